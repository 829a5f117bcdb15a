//! Problem generation, the reference solver, and the experiment harness.
//!
//! Report schemas:
//!
//! * CSV: `problem_index,n_blocks,outcome,trials,wall_ms`, one row per
//!   problem in index order. `outcome` is `solved`, `exhausted` or `error`;
//!   unsolved rows carry `trials = max_trials`.
//! * JSON: [`BenchResult`] serialized as is.

pub mod gen;
pub mod solver;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use gen::{gen_problem, gen_problems, GenConfig, GoalStyle, DOMAIN_NAME};
pub use solver::{reference_solve, SolveError};

use crate::cegis::{cegis_solve, CegisError, LoopConfig, Outcome, RunRecord};
use crate::oracle::{OracleSpec, SolutionOracle};
use crate::pddl::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Solved,
    Exhausted,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub problem_index: usize,
    pub problem_name: String,
    pub n_blocks: usize,
    pub outcome: RunStatus,
    pub trials: usize,
    pub wall_ms: u64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchResult {
    pub oracle: String,
    pub records: Vec<RunSummary>,
    pub success_count: usize,
    /// Trials charged per run mapped to the number of runs.
    pub histogram: BTreeMap<usize, usize>,
    pub total_wall_ms: u64,
}

impl BenchResult {
    pub fn from_records(oracle: impl Into<String>, mut records: Vec<RunSummary>) -> Self {
        records.sort_by_key(|r| r.problem_index);
        BenchResult {
            oracle: oracle.into(),
            success_count: records.iter().filter(|r| r.outcome == RunStatus::Solved).count(),
            histogram: histogram(&records),
            total_wall_ms: records.iter().map(|r| r.wall_ms).sum(),
            records,
        }
    }
}

pub fn histogram(records: &[RunSummary]) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for r in records {
        *h.entry(r.trials).or_insert(0) += 1;
    }
    h
}

fn summarize(index: usize, problem: &Problem, result: Result<RunRecord, CegisError>, max_trials: usize) -> RunSummary {
    let base = RunSummary {
        problem_index: index,
        problem_name: problem.name.clone(),
        n_blocks: problem.objects.len(),
        outcome: RunStatus::Error,
        trials: max_trials,
        wall_ms: 0,
        error: None,
    };
    match result {
        Ok(r) => RunSummary {
            outcome: match r.outcome {
                Outcome::Solved { .. } => RunStatus::Solved,
                Outcome::Exhausted { .. } => RunStatus::Exhausted,
                Outcome::Aborted { .. } => RunStatus::Error,
            },
            trials: r.trials_charged(),
            wall_ms: r.trials.iter().map(|t| t.wall_ms).sum(),
            ..base
        },
        Err(CegisError::Oracle { error, partial }) => RunSummary {
            wall_ms: partial.trials.iter().map(|t| t.wall_ms).sum(),
            error: Some(error.to_string()),
            ..base
        },
        Err(e) => RunSummary {
            error: Some(e.to_string()),
            ..base
        },
    }
}

/// Runs the loop on every problem with up to `parallelism` concurrent
/// sessions. `session` builds a fresh oracle for each problem index.
pub fn bench_problems<F>(
    problems: &[Problem],
    session: F,
    oracle_label: &str,
    loop_cfg: &LoopConfig,
    parallelism: usize,
) -> BenchResult
where
    F: Fn(usize, &Problem) -> Box<dyn SolutionOracle> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .expect("thread pool");
    let records: Vec<RunSummary> = pool.install(|| {
        problems
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let mut oracle = session(i, p);
                let result = cegis_solve(p, oracle.as_mut(), loop_cfg);
                if let Err(e) = &result {
                    log::warn!("{}: {e}", p.name);
                }
                summarize(i, p, result, loop_cfg.max_trials)
            })
            .collect()
    });
    BenchResult::from_records(oracle_label, records)
}

pub fn bench_run(gen: &GenConfig, oracle: &OracleSpec, loop_cfg: &LoopConfig, parallelism: usize) -> BenchResult {
    let problems = gen_problems(gen);
    bench_problems(
        &problems,
        |i, _| oracle.session(i as u64),
        &oracle.label(),
        loop_cfg,
        parallelism,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    /// `.json` paths get JSON, everything else CSV.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

pub fn write_csv(result: &BenchResult, out: impl Write) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["problem_index", "n_blocks", "outcome", "trials", "wall_ms"])?;
    for r in &result.records {
        let outcome = match r.outcome {
            RunStatus::Solved => "solved",
            RunStatus::Exhausted => "exhausted",
            RunStatus::Error => "error",
        };
        w.write_record([
            r.problem_index.to_string(),
            r.n_blocks.to_string(),
            outcome.to_string(),
            r.trials.to_string(),
            r.wall_ms.to_string(),
        ])?;
    }
    w.flush()
}

pub fn export_report(result: &BenchResult, format: ReportFormat, path: &Path) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        ReportFormat::Csv => write_csv(result, &mut out)?,
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut out, result)?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()
}

pub fn load_json_report(path: &Path) -> io::Result<BenchResult> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

/// Trial histogram recomputed from a CSV report.
pub fn histogram_from_csv(input: impl Read) -> io::Result<BTreeMap<usize, usize>> {
    let mut r = csv::Reader::from_reader(input);
    let mut h = BTreeMap::new();
    for row in r.records() {
        let row = row?;
        let trials: usize = row
            .get(3)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "bad trials column"))?;
        *h.entry(trials).or_insert(0) += 1;
    }
    Ok(h)
}
