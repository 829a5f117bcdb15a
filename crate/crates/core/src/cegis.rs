//! The synthesis loop: query, verify, feed back, repeat.

use std::io::{self, BufRead, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::{
    build_feedback_prompt, build_initial_prompt, build_unparsed_feedback, FeedbackMode, OracleError, PromptConfig,
    SolutionOracle,
};
use crate::pddl::{InconsistentInit, Problem};
use crate::plan::{Plan, PlanError};
use crate::semantics::{verify_from, Counterexample, SemanticsMode, Verdict, VerdictReport};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_MAX_TRIALS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopConfig {
    pub max_trials: usize,
    pub feedback_mode: FeedbackMode,
    pub semantics_mode: SemanticsMode,
    pub prompt: PromptConfig,
    /// When false every `wall_ms` is 0, so records are reproducible byte for byte.
    pub record_timing: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            max_trials: DEFAULT_MAX_TRIALS,
            feedback_mode: FeedbackMode::RichPrefix,
            semantics_mode: SemanticsMode::Strict4Ops,
            prompt: PromptConfig::default(),
            record_timing: true,
        }
    }
}

impl LoopConfig {
    pub fn without_timing(mut self) -> Self {
        self.record_timing = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// 1-based.
    pub trial: usize,
    pub prompt_messages: usize,
    pub prompt_chars: usize,
    pub prompt_tokens_estimate: usize,
    pub context_overflow_risk: bool,
    pub raw_response: String,
    pub plan: Option<Plan>,
    pub parse_error: Option<PlanError>,
    pub verdict: Option<VerdictReport>,
    pub counterexample: Option<Counterexample>,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Solved {
        plan: Plan,
        trials_used: usize,
    },
    Exhausted {
        max_trials: usize,
    },
    /// The oracle failed at transport level; the record is partial.
    Aborted {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub problem_name: String,
    pub max_trials: usize,
    pub feedback_mode: FeedbackMode,
    pub semantics_mode: SemanticsMode,
    pub trials: Vec<TrialRecord>,
    pub outcome: Outcome,
    /// Diagnostic pick for unsolved runs: fewest violated preconditions, then
    /// longest feasible prefix.
    pub best_trial: Option<usize>,
}

impl RunRecord {
    pub fn is_solved(&self) -> bool {
        matches!(self.outcome, Outcome::Solved { .. })
    }

    /// Trials charged to this run: `trials_used` if solved, else the budget.
    pub fn trials_charged(&self) -> usize {
        match &self.outcome {
            Outcome::Solved { trials_used, .. } => *trials_used,
            _ => self.max_trials,
        }
    }
}

#[derive(Debug, Error)]
pub enum CegisError {
    #[error(transparent)]
    Init(#[from] InconsistentInit),
    #[error("oracle failed: {error}")]
    Oracle {
        error: OracleError,
        partial: Box<RunRecord>,
    },
    #[error("max_trials must be at least 1")]
    ZeroBudget,
}

fn best_trial(trials: &[TrialRecord]) -> Option<usize> {
    trials
        .iter()
        .filter_map(|t| {
            let v = t.verdict.as_ref()?;
            let len = t.plan.as_ref().map_or(0, Plan::len);
            let violated = v.violated.as_ref().map_or(0, Vec::len);
            let feasible = v.failing_step.map_or(len, |s| s - 1);
            Some(((violated, std::cmp::Reverse(feasible), t.trial), t.trial))
        })
        .min_by_key(|(k, _)| *k)
        .map(|(_, t)| t)
}

/// Runs the loop until a plan verifies or the budget is spent.
pub fn cegis_solve(
    problem: &Problem,
    oracle: &mut dyn SolutionOracle,
    config: &LoopConfig,
) -> Result<RunRecord, CegisError> {
    if config.max_trials == 0 {
        return Err(CegisError::ZeroBudget);
    }
    let init = problem.initial_state()?;
    let prompt = PromptConfig {
        feedback_mode: config.feedback_mode,
        ..config.prompt.clone()
    };
    let mut record = RunRecord {
        schema_version: SCHEMA_VERSION,
        problem_name: problem.name.clone(),
        max_trials: config.max_trials,
        feedback_mode: config.feedback_mode,
        semantics_mode: config.semantics_mode,
        trials: Vec::new(),
        outcome: Outcome::Exhausted {
            max_trials: config.max_trials,
        },
        best_trial: None,
    };

    let mut query = build_initial_prompt(problem, &prompt);
    for t in 1..=config.max_trials {
        query.trial = t;
        let started = Instant::now();
        let tokens = query.token_estimate();
        let overflow = tokens > prompt.max_prompt_tokens_hint;
        if overflow {
            log::warn!(
                "{}: trial {t} prompt is ~{tokens} tokens, above the {} hint",
                problem.name,
                prompt.max_prompt_tokens_hint
            );
        }
        let response = match oracle.query(&query, problem) {
            Ok(r) => r,
            Err(error) => {
                record.outcome = Outcome::Aborted {
                    error: error.to_string(),
                };
                record.best_trial = best_trial(&record.trials);
                return Err(CegisError::Oracle {
                    error,
                    partial: Box::new(record),
                });
            }
        };

        let mut trial = TrialRecord {
            trial: t,
            prompt_messages: query.messages().len(),
            prompt_chars: query.total_chars(),
            prompt_tokens_estimate: tokens,
            context_overflow_risk: overflow,
            raw_response: response.raw_text.clone(),
            plan: response.parsed.clone(),
            parse_error: response.parse_error.clone(),
            verdict: None,
            counterexample: None,
            wall_ms: 0,
        };

        let next = match &response.parsed {
            Some(plan) => {
                let verdict = verify_from(&init, &problem.goal, plan, config.semantics_mode);
                trial.verdict = Some(VerdictReport::new(&verdict, plan));
                if let Verdict::Valid = verdict {
                    trial.wall_ms = elapsed(started, config);
                    record.trials.push(trial);
                    record.outcome = Outcome::Solved {
                        plan: plan.clone(),
                        trials_used: t,
                    };
                    return Ok(record);
                }
                let cex = match config.feedback_mode {
                    FeedbackMode::RichPrefix => {
                        Counterexample::from_verdict(&verdict, plan).expect("invalid verdicts have a counterexample")
                    }
                    FeedbackMode::WeakInvalid => Counterexample::InvalidWholePlan(plan.clone()),
                };
                oracle.observe(&cex);
                let q =
                    build_feedback_prompt(&query, &response, &cex, &prompt).expect("response carries a parsed plan");
                trial.counterexample = Some(cex);
                q
            }
            None => build_unparsed_feedback(&query, &response),
        };
        trial.wall_ms = elapsed(started, config);
        record.trials.push(trial);
        query = next;
    }
    record.best_trial = best_trial(&record.trials);
    Ok(record)
}

fn elapsed(started: Instant, config: &LoopConfig) -> u64 {
    if config.record_timing {
        started.elapsed().as_millis() as u64
    } else {
        0
    }
}

// ---------------------------------------------------------------------------
// JSON Lines

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Summary {
    schema_version: u32,
    problem_name: String,
    max_trials: usize,
    feedback_mode: FeedbackMode,
    semantics_mode: SemanticsMode,
    outcome: Outcome,
    best_trial: Option<usize>,
    trial_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Trial(TrialRecord),
    Summary(Summary),
}

/// One `{"type":"trial",...}` line per trial, then one summary line.
pub fn write_jsonl(record: &RunRecord, mut out: impl Write) -> io::Result<()> {
    for t in &record.trials {
        serde_json::to_writer(&mut out, &Line::Trial(t.clone()))?;
        out.write_all(b"\n")?;
    }
    let summary = Summary {
        schema_version: record.schema_version,
        problem_name: record.problem_name.clone(),
        max_trials: record.max_trials,
        feedback_mode: record.feedback_mode,
        semantics_mode: record.semantics_mode,
        outcome: record.outcome.clone(),
        best_trial: record.best_trial,
        trial_count: record.trials.len(),
    };
    serde_json::to_writer(&mut out, &Line::Summary(summary))?;
    out.write_all(b"\n")
}

pub fn read_jsonl(input: impl BufRead) -> io::Result<RunRecord> {
    let mut trials = Vec::new();
    let mut summary = None;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))? {
            Line::Trial(t) => trials.push(t),
            Line::Summary(s) => summary = Some(s),
        }
    }
    let s = summary.ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "no summary line"))?;
    if s.schema_version != SCHEMA_VERSION {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("unsupported schema_version {}", s.schema_version),
        ));
    }
    if s.trial_count != trials.len() {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "trial count mismatch"));
    }
    Ok(RunRecord {
        schema_version: s.schema_version,
        problem_name: s.problem_name,
        max_trials: s.max_trials,
        feedback_mode: s.feedback_mode,
        semantics_mode: s.semantics_mode,
        trials,
        outcome: s.outcome,
        best_trial: s.best_trial,
    })
}

/// Re-verifies every recorded plan; `Ok(())` when all verdicts match.
pub fn replay(record: &RunRecord, problem: &Problem) -> Result<(), String> {
    let init = problem.initial_state().map_err(|e| e.to_string())?;
    for t in &record.trials {
        let Some(plan) = &t.plan else { continue };
        let v = verify_from(&init, &problem.goal, plan, record.semantics_mode);
        let report = VerdictReport::new(&v, plan);
        if Some(&report) != t.verdict.as_ref() {
            return Err(format!(
                "trial {}: recorded {:?}, replayed {:?}",
                t.trial, t.verdict, report
            ));
        }
    }
    if let Outcome::Solved { plan, .. } = &record.outcome {
        if !verify_from(&init, &problem.goal, plan, record.semantics_mode).is_valid() {
            return Err("solved plan does not verify".into());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{gen_problem, GenConfig};
    use crate::corpus::Corpus;
    use crate::oracle::{PerfectOracle, ScriptedOracle};

    fn cfg() -> LoopConfig {
        LoopConfig {
            prompt: PromptConfig::without_examples(FeedbackMode::RichPrefix),
            ..LoopConfig::default()
        }
    }

    #[test]
    fn scripted_dialogue() {
        let c = Corpus::builtin();
        let p = c.problem("newprob").unwrap();
        let mut o = ScriptedOracle::new(c.transcript("newprob").unwrap());
        let r = cegis_solve(&p, &mut o, &cfg()).unwrap();
        assert!(matches!(r.outcome, Outcome::Solved { trials_used: 2, .. }));
        match &r.trials[0].counterexample {
            Some(Counterexample::InvalidPrefix(pre)) => assert_eq!(pre.len(), 5),
            other => panic!("{other:?}"),
        }
        assert_eq!(r.trials[1].prompt_messages, 3);
        replay(&r, &p).unwrap();
    }

    #[test]
    fn exhaustion_and_best_trial() {
        let c = Corpus::builtin();
        let p = c.problem("newprob").unwrap();
        let bad = c.plans["newprob-incorrect"].clone();
        let mut script = vec!["no plan here".to_string()];
        script.extend(std::iter::repeat_n(bad, 9));
        let mut o = ScriptedOracle::new(script);
        let r = cegis_solve(&p, &mut o, &cfg()).unwrap();
        assert_eq!(r.outcome, Outcome::Exhausted { max_trials: 10 });
        assert_eq!(r.trials.len(), 10);
        assert_eq!(r.best_trial, Some(2));
        assert_eq!(r.trials_charged(), 10);
        // t failed trials leave t feedback messages in the t+1-th prompt
        for (i, t) in r.trials.iter().enumerate() {
            assert_eq!(t.prompt_messages, 1 + 2 * i);
        }
    }

    #[test]
    fn transport_failure_keeps_partial_record() {
        let c = Corpus::builtin();
        let p = c.problem("newprob").unwrap();
        let mut o = ScriptedOracle::new(vec![c.plans["newprob-incorrect"].clone()]);
        match cegis_solve(&p, &mut o, &cfg()) {
            Err(CegisError::Oracle { error, partial }) => {
                assert_eq!(error, OracleError::TranscriptExhausted { served: 1 });
                assert_eq!(partial.trials.len(), 1);
                assert!(matches!(partial.outcome, Outcome::Aborted { .. }));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn perfect_oracle_and_jsonl_round_trip() {
        let p = gen_problem(&GenConfig::new(5, 3, 1), 0);
        let r = cegis_solve(&p, &mut PerfectOracle, &cfg()).unwrap();
        assert!(matches!(r.outcome, Outcome::Solved { trials_used: 1, .. }));
        let mut buf = Vec::new();
        write_jsonl(&r, &mut buf).unwrap();
        assert_eq!(String::from_utf8_lossy(&buf).lines().count(), 2);
        assert_eq!(read_jsonl(&buf[..]).unwrap(), r);
    }

    #[test]
    fn weak_mode_reports_whole_plan() {
        let c = Corpus::builtin();
        let p = c.problem("newprob").unwrap();
        let mut o = ScriptedOracle::new(c.transcript("newprob").unwrap());
        let config = LoopConfig {
            feedback_mode: FeedbackMode::WeakInvalid,
            ..cfg()
        };
        let r = cegis_solve(&p, &mut o, &config).unwrap();
        assert!(matches!(r.trials[0].counterexample, Some(Counterexample::InvalidWholePlan(ref pl)) if pl.len() == 12));
    }

    #[test]
    fn zero_budget_rejected() {
        let p = gen_problem(&GenConfig::new(3, 1, 1), 0);
        let config = LoopConfig { max_trials: 0, ..cfg() };
        assert!(matches!(
            cegis_solve(&p, &mut PerfectOracle, &config),
            Err(CegisError::ZeroBudget)
        ));
    }
}
