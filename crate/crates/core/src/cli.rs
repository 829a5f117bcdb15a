//! The `plancegis` command line.
//!
//! Exit codes: 0 success, 1 domain or IO error, 2 invalid plan (or unsolved
//! run), 3 native/solver disagreement, 64 usage error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{bench_problems, bench_run, export_report, gen_problems, GenConfig, GoalStyle, ReportFormat};
use crate::cegis::{cegis_solve, write_jsonl, CegisError, LoopConfig, Outcome};
use crate::corpus::Corpus;
use crate::oracle::{load_transcript, FeedbackMode, HttpConfig, NoisyConfig, OracleSpec, PromptConfig, ScriptedOracle};
use crate::pddl::{parse_problem, print_problem, Problem};
use crate::plan::{parse_plan, print_plan, Plan};
use crate::semantics::{minimal_infeasible_prefix, verify, SemanticsError, SemanticsMode, VerdictReport};
use crate::smt::{self, CrossCheckReport, FrameAxioms, SmtOptions, SolverCommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_DISAGREE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "plancegis",
    version,
    about = "Verifier-guided plan synthesis for blocksworld"
)]
struct Cli {
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// TOML file with HTTP oracle settings.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Strict,
    Appendix,
}

impl From<ModeArg> for SemanticsMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Strict => SemanticsMode::Strict4Ops,
            ModeArg::Appendix => SemanticsMode::AppendixDisjunctive,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FeedbackArg {
    Rich,
    Weak,
}

impl From<FeedbackArg> for FeedbackMode {
    fn from(f: FeedbackArg) -> Self {
        match f {
            FeedbackArg::Rich => FeedbackMode::RichPrefix,
            FeedbackArg::Weak => FeedbackMode::WeakInvalid,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GoalStyleArg {
    Full,
    Partial,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExamplesArg {
    /// OLDPROB1 and OLDPROB2.
    Builtin,
    None,
}

#[derive(Debug, Args)]
struct ProblemPlan {
    #[arg(long, value_name = "FILE")]
    problem: PathBuf,
    #[arg(long, value_name = "FILE")]
    plan: PathBuf,
    #[arg(long, value_enum, default_value = "strict")]
    mode: ModeArg,
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// perfect, noisy, http, scripted:FILE, or scripted (corpus transcripts).
    #[arg(long, default_value = "perfect")]
    oracle: String,
    #[arg(long, default_value_t = 0.2)]
    p_err: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    prefix_respecting: bool,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
}

#[derive(Debug, Args)]
struct LoopArgs {
    #[arg(long, default_value_t = 10)]
    max_trials: usize,
    #[arg(long, value_enum, default_value = "rich")]
    feedback: FeedbackArg,
    #[arg(long, value_enum, default_value = "strict")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "builtin")]
    examples: ExamplesArg,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Verify a plan; prints the verdict as JSON.
    Verify(ProblemPlan),
    /// Print the minimal infeasible prefix (or other counterexample).
    Prefix(ProblemPlan),
    /// Run the synthesis loop on one problem.
    Solve {
        #[arg(long, value_name = "FILE")]
        problem: PathBuf,
        #[command(flatten)]
        oracle: OracleArgs,
        #[command(flatten)]
        loop_args: LoopArgs,
        /// JSON Lines run record; defaults to `<problem stem>.run.jsonl`.
        #[arg(long, value_name = "FILE")]
        record: Option<PathBuf>,
    },
    /// Write seeded random problems.
    Gen {
        #[arg(long)]
        blocks: usize,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "partial")]
        goal_style: GoalStyleArg,
    },
    /// Run the loop over a generated set or a corpus.
    Bench {
        #[arg(long, default_value_t = 3)]
        blocks: usize,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long = "gen-seed", default_value_t = 0)]
        gen_seed: u64,
        #[arg(long, value_enum, default_value = "partial")]
        goal_style: GoalStyleArg,
        /// `builtin` or a corpus directory, instead of generated problems.
        #[arg(long)]
        corpus: Option<String>,
        #[command(flatten)]
        oracle: OracleArgs,
        #[command(flatten)]
        loop_args: LoopArgs,
        /// Report path; `.json` selects JSON, anything else CSV.
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        json_report: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        parallel: usize,
        /// Record wall_ms as 0 so reports are byte-reproducible.
        #[arg(long)]
        no_timing: bool,
    },
    /// Write the SMT-LIB2 verification query.
    EmitSmt {
        #[command(flatten)]
        pp: ProblemPlan,
        #[arg(long)]
        literal_appendix: bool,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Compare the native verifier with an external SMT solver.
    CrossCheck {
        #[command(flatten)]
        pp: ProblemPlan,
        /// Command template, e.g. "z3 -smt2 {file}"; defaults to $SOLVER_CMD.
        #[arg(long)]
        solver: Option<String>,
        #[arg(long, default_value_t = 30)]
        timeout_secs: u64,
    },
    /// List or export a named corpus.
    Corpus {
        #[arg(long, default_value = "builtin")]
        name: String,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

struct Failure {
    code: i32,
    message: String,
}

fn fail(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_ERROR,
        message: message.into(),
    }
}

type CmdResult = Result<i32, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn load_problem(path: &Path) -> Result<Problem, Failure> {
    parse_problem(&read(path)?).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn load_plan(path: &Path, problem: &Problem) -> Result<Plan, Failure> {
    parse_plan(&read(path)?, &problem.objects)
        .map(|p| p.plan)
        .map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn http_config(cli: &Cli, o: &OracleArgs) -> Result<HttpConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => HttpConfig::load(p).map_err(|e| fail(e.to_string()))?,
        None => HttpConfig::default(),
    };
    if let Some(e) = &o.endpoint {
        cfg.endpoint = e.clone();
    }
    if let Some(m) = &o.model {
        cfg.model = m.clone();
    }
    if let Some(t) = o.temperature {
        cfg.temperature = t;
    }
    Ok(cfg.with_env_key())
}

/// `None` means "scripted from corpus transcripts".
fn oracle_spec(cli: &Cli, o: &OracleArgs) -> Result<Option<OracleSpec>, Failure> {
    let usage = |m: String| Failure {
        code: EXIT_USAGE,
        message: m,
    };
    Ok(Some(match o.oracle.as_str() {
        "perfect" => OracleSpec::Perfect,
        "noisy" => {
            if !(0.0..=1.0).contains(&o.p_err) {
                return Err(usage(format!("--p-err must be in [0, 1], got {}", o.p_err)));
            }
            OracleSpec::Noisy(NoisyConfig {
                p_err: o.p_err,
                seed: o.seed,
                prefix_respecting: o.prefix_respecting,
            })
        }
        "http" => OracleSpec::Http(http_config(cli, o)?),
        "scripted" => return Ok(None),
        s => match s.strip_prefix("scripted:") {
            Some(file) => OracleSpec::Scripted(load_transcript(Path::new(file)).map_err(|e| fail(e.to_string()))?),
            None => return Err(usage(format!("unknown oracle `{s}`"))),
        },
    }))
}

fn loop_config(l: &LoopArgs, no_timing: bool) -> Result<LoopConfig, Failure> {
    if l.max_trials == 0 {
        return Err(Failure {
            code: EXIT_USAGE,
            message: "--max-trials must be at least 1".into(),
        });
    }
    let feedback: FeedbackMode = l.feedback.into();
    let prompt = match l.examples {
        ExamplesArg::Builtin => PromptConfig::with_builtin_examples(feedback),
        ExamplesArg::None => PromptConfig::without_examples(feedback),
    };
    Ok(LoopConfig {
        max_trials: l.max_trials,
        feedback_mode: feedback,
        semantics_mode: l.mode.into(),
        prompt,
        record_timing: !no_timing,
    })
}

fn cmd_verify(pp: &ProblemPlan, out: &mut dyn Write) -> CmdResult {
    let problem = load_problem(&pp.problem)?;
    let plan = load_plan(&pp.plan, &problem)?;
    let verdict = verify(&problem, &plan, pp.mode.into()).map_err(|e| fail(e.to_string()))?;
    let _ = writeln!(out, "{}", to_json(&VerdictReport::new(&verdict, &plan)));
    Ok(if verdict.is_valid() { EXIT_OK } else { EXIT_INVALID })
}

fn cmd_prefix(cli: &Cli, pp: &ProblemPlan, out: &mut dyn Write) -> CmdResult {
    let problem = load_problem(&pp.problem)?;
    let plan = load_plan(&pp.plan, &problem)?;
    match minimal_infeasible_prefix(&problem, &plan, pp.mode.into()) {
        Ok(cex) => {
            if cli.json {
                let _ = writeln!(out, "{}", to_json(&cex));
            } else {
                let _ = writeln!(out, "{}", cex.render());
            }
            Ok(EXIT_INVALID)
        }
        Err(SemanticsError::ContractViolation(_)) => {
            if cli.json {
                let _ = writeln!(out, "null");
            } else {
                let _ = writeln!(out, "plan is valid");
            }
            Ok(EXIT_OK)
        }
        Err(e) => Err(fail(e.to_string())),
    }
}

fn cmd_solve(
    cli: &Cli,
    problem_path: &Path,
    o: &OracleArgs,
    l: &LoopArgs,
    record: &Option<PathBuf>,
    out: &mut dyn Write,
) -> CmdResult {
    let problem = load_problem(problem_path)?;
    let config = loop_config(l, false)?;
    let mut oracle = match oracle_spec(cli, o)? {
        Some(spec) => spec.session(0),
        None => {
            return Err(Failure {
                code: EXIT_USAGE,
                message: "solve needs --oracle scripted:FILE".into(),
            })
        }
    };
    let record_path = record.clone().unwrap_or_else(|| {
        let stem = problem_path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
        problem_path.with_file_name(format!("{stem}.run.jsonl"))
    });
    let (run, err) = match cegis_solve(&problem, oracle.as_mut(), &config) {
        Ok(r) => (r, None),
        Err(CegisError::Oracle { error, partial }) => (*partial, Some(error.to_string())),
        Err(e) => return Err(fail(e.to_string())),
    };
    let mut buf = Vec::new();
    write_jsonl(&run, &mut buf).map_err(|e| fail(e.to_string()))?;
    fs::write(&record_path, buf).map_err(|e| fail(format!("{}: {e}", record_path.display())))?;

    if cli.json {
        let v = serde_json::json!({
            "outcome": run.outcome,
            "trials": run.trials.len(),
            "record": record_path,
            "error": err,
        });
        let _ = writeln!(out, "{}", to_json(&v));
    } else {
        match &run.outcome {
            Outcome::Solved { plan, trials_used } => {
                let _ = writeln!(out, "solved in {trials_used} trial(s)\n{}", print_plan(plan));
            }
            Outcome::Exhausted { max_trials } => {
                let _ = writeln!(out, "no valid plan within {max_trials} trials");
            }
            Outcome::Aborted { error } => {
                let _ = writeln!(out, "aborted: {error}");
            }
        }
        let _ = writeln!(out, "record: {}", record_path.display());
    }
    if let Some(e) = err {
        return Err(fail(e));
    }
    Ok(if run.is_solved() { EXIT_OK } else { EXIT_INVALID })
}

fn goal_style(g: GoalStyleArg) -> GoalStyle {
    match g {
        GoalStyleArg::Full => GoalStyle::FullTowers,
        GoalStyleArg::Partial => GoalStyle::PartialAtoms,
    }
}

fn cmd_gen(blocks: usize, count: usize, seed: u64, dir: &Path, style: GoalStyleArg, out: &mut dyn Write) -> CmdResult {
    if blocks == 0 {
        return Err(Failure {
            code: EXIT_USAGE,
            message: "--blocks must be at least 1".into(),
        });
    }
    fs::create_dir_all(dir).map_err(|e| fail(format!("{}: {e}", dir.display())))?;
    let cfg = GenConfig {
        goal_style: goal_style(style),
        ..GenConfig::new(blocks, seed, count)
    };
    for p in gen_problems(&cfg) {
        let path = dir.join(format!("{}.pddl", p.name));
        fs::write(&path, print_problem(&p)).map_err(|e| fail(format!("{}: {e}", path.display())))?;
        let _ = writeln!(out, "{}", path.display());
    }
    Ok(EXIT_OK)
}

fn cmd_emit_smt(pp: &ProblemPlan, literal: bool, dest: &Option<PathBuf>, out: &mut dyn Write) -> CmdResult {
    let problem = load_problem(&pp.problem)?;
    let plan = load_plan(&pp.plan, &problem)?;
    let opts = SmtOptions {
        frame: if literal {
            FrameAxioms::LiteralAppendix
        } else {
            FrameAxioms::Corrected
        },
        semantics: pp.mode.into(),
    };
    let enc = smt::emit_smtlib_with(&problem, &plan, &opts).map_err(|e| fail(e.to_string()))?;
    match dest {
        Some(path) => {
            smt::write_script(&enc, path).map_err(|e| fail(format!("{}: {e}", path.display())))?;
            let _ = writeln!(out, "{}", path.display());
        }
        None => {
            let _ = write!(out, "{}", enc.script);
        }
    }
    Ok(EXIT_OK)
}

fn cmd_cross_check(
    cli: &Cli,
    pp: &ProblemPlan,
    solver: &Option<String>,
    timeout: u64,
    out: &mut dyn Write,
) -> CmdResult {
    let problem = load_problem(&pp.problem)?;
    let plan = load_plan(&pp.plan, &problem)?;
    let cmd = match solver {
        Some(s) => SolverCommand::new(s.clone()),
        None => SolverCommand::from_env_or(None)
            .ok_or_else(|| fail("no solver configured: pass --solver or set SOLVER_CMD"))?,
    }
    .with_timeout(Duration::from_secs(timeout));
    let result = smt::cross_check_in(&problem, &plan, pp.mode.into(), &cmd).map_err(|e| fail(e.to_string()))?;
    if cli.json {
        let _ = writeln!(out, "{}", to_json(&CrossCheckReport::new(&result, &plan)));
    } else {
        let _ = writeln!(out, "{}", smt::describe(&result));
    }
    Ok(if result.agrees() { EXIT_OK } else { EXIT_DISAGREE })
}

fn cmd_corpus(cli: &Cli, name: &str, dest: &Option<PathBuf>, out: &mut dyn Write) -> CmdResult {
    let corpus = Corpus::load(name).map_err(|e| fail(e.to_string()))?;
    if let Some(dir) = dest {
        corpus.write_to(dir).map_err(|e| fail(e.to_string()))?;
    }
    if cli.json {
        let v = serde_json::json!({
            "problems": corpus.problems.keys().collect::<Vec<_>>(),
            "plans": corpus.plans.keys().collect::<Vec<_>>(),
            "transcripts": corpus.transcripts.keys().collect::<Vec<_>>(),
        });
        let _ = writeln!(out, "{}", to_json(&v));
    } else {
        for (kind, keys) in [
            ("problem", &corpus.problems),
            ("plan", &corpus.plans),
            ("transcript", &corpus.transcripts),
        ] {
            for k in keys.keys() {
                let _ = writeln!(out, "{kind}\t{k}");
            }
        }
    }
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    cli: &Cli,
    blocks: usize,
    count: usize,
    gen_seed: u64,
    style: GoalStyleArg,
    corpus: &Option<String>,
    o: &OracleArgs,
    l: &LoopArgs,
    report: &Option<PathBuf>,
    json_report: &Option<PathBuf>,
    parallel: usize,
    no_timing: bool,
    out: &mut dyn Write,
) -> CmdResult {
    let config = loop_config(l, no_timing)?;
    let spec = oracle_spec(cli, o)?;
    let result = match corpus {
        Some(name) => {
            let c = Corpus::load(name).map_err(|e| fail(e.to_string()))?;
            let names: Vec<&String> = c.problems.keys().collect();
            let mut problems = Vec::new();
            for n in &names {
                problems.push(c.problem(n).map_err(|e| fail(e.to_string()))?);
            }
            match &spec {
                Some(spec) => bench_problems(
                    &problems,
                    |i, _| spec.session(i as u64),
                    &spec.label(),
                    &config,
                    parallel,
                ),
                None => {
                    let transcripts: Vec<Vec<String>> =
                        names.iter().map(|n| c.transcript(n).unwrap_or_default()).collect();
                    bench_problems(
                        &problems,
                        |i, _| Box::new(ScriptedOracle::new(transcripts[i].clone())),
                        "scripted(corpus)",
                        &config,
                        parallel,
                    )
                }
            }
        }
        None => {
            let Some(spec) = spec else {
                return Err(Failure {
                    code: EXIT_USAGE,
                    message: "--oracle scripted without a file needs --corpus".into(),
                });
            };
            if blocks == 0 {
                return Err(Failure {
                    code: EXIT_USAGE,
                    message: "--blocks must be at least 1".into(),
                });
            }
            let gen = GenConfig {
                goal_style: goal_style(style),
                ..GenConfig::new(blocks, gen_seed, count)
            };
            bench_run(&gen, &spec, &config, parallel)
        }
    };
    if let Some(path) = report {
        export_report(&result, ReportFormat::for_path(path), path)
            .map_err(|e| fail(format!("{}: {e}", path.display())))?;
    }
    if let Some(path) = json_report {
        export_report(&result, ReportFormat::Json, path).map_err(|e| fail(format!("{}: {e}", path.display())))?;
    }
    if cli.json {
        let _ = writeln!(out, "{}", to_json(&result));
    } else {
        let _ = writeln!(out, "oracle: {}", result.oracle);
        let _ = writeln!(out, "solved: {}/{}", result.success_count, result.records.len());
        for (trials, n) in &result.histogram {
            let _ = writeln!(out, "trials {trials}: {n}");
        }
    }
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match &cli.command {
        Cmd::Verify(pp) => cmd_verify(pp, out),
        Cmd::Prefix(pp) => cmd_prefix(&cli, pp, out),
        Cmd::Solve {
            problem,
            oracle,
            loop_args,
            record,
        } => cmd_solve(&cli, problem, oracle, loop_args, record, out),
        Cmd::Gen {
            blocks,
            count,
            seed,
            out: dir,
            goal_style,
        } => cmd_gen(*blocks, *count, *seed, dir, *goal_style, out),
        Cmd::Bench {
            blocks,
            count,
            gen_seed,
            goal_style,
            corpus,
            oracle,
            loop_args,
            report,
            json_report,
            parallel,
            no_timing,
        } => cmd_bench(
            &cli,
            *blocks,
            *count,
            *gen_seed,
            *goal_style,
            corpus,
            oracle,
            loop_args,
            report,
            json_report,
            *parallel,
            *no_timing,
            out,
        ),
        Cmd::EmitSmt {
            pp,
            literal_appendix,
            out: dest,
        } => cmd_emit_smt(pp, *literal_appendix, dest, out),
        Cmd::CrossCheck {
            pp,
            solver,
            timeout_secs,
        } => cmd_cross_check(&cli, pp, solver, *timeout_secs, out),
        Cmd::Corpus { name, out: dest } => cmd_corpus(&cli, name, dest, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
