//! Deterministic test doubles.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{OracleError, OracleQuery, OracleResponse, SolutionOracle};
use crate::bench::reference_solve;
use crate::pddl::{Block, Problem};
use crate::plan::{print_plan, Action, Plan};
use crate::semantics::Counterexample;

/// Replays a fixed list of completions, one per query.
pub struct ScriptedOracle {
    responses: Vec<String>,
    next: usize,
}

impl ScriptedOracle {
    pub fn new(responses: Vec<String>) -> Self {
        ScriptedOracle { responses, next: 0 }
    }
}

impl SolutionOracle for ScriptedOracle {
    fn query(&mut self, _query: &OracleQuery, problem: &Problem) -> Result<OracleResponse, OracleError> {
        let raw = self
            .responses
            .get(self.next)
            .ok_or(OracleError::TranscriptExhausted { served: self.next })?;
        self.next += 1;
        Ok(OracleResponse::from_completion(raw.clone(), &problem.objects))
    }

    fn describe(&self) -> String {
        format!("scripted ({} responses)", self.responses.len())
    }
}

fn completion_for(plan: &Plan) -> String {
    format!("Here is the plan.\n{}", print_plan(plan))
}

fn solve(problem: &Problem) -> Result<Plan, OracleError> {
    reference_solve(problem).map_err(|e| OracleError::NoReferencePlan(e.to_string()))
}

/// Always answers with the reference solver's plan.
pub struct PerfectOracle;

impl SolutionOracle for PerfectOracle {
    fn query(&mut self, _query: &OracleQuery, problem: &Problem) -> Result<OracleResponse, OracleError> {
        Ok(OracleResponse::from_completion(
            completion_for(&solve(problem)?),
            &problem.objects,
        ))
    }

    fn describe(&self) -> String {
        "perfect".into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyConfig {
    pub p_err: f64,
    pub seed: u64,
    pub prefix_respecting: bool,
}

/// Redraws before giving up and answering with the clean reference plan.
const RESAMPLE_LIMIT: u64 = 64;

/// The reference plan with each action replaced, independently with
/// probability `p_err`, by a uniformly random action.
///
/// Every action consumes the same random draws whatever `p_err` is, so for a
/// fixed seed the set of corrupted steps only grows with `p_err`.
pub struct NoisyOracle {
    config: NoisyConfig,
    session: u64,
    reference: Option<Plan>,
    invalid_prefixes: Vec<Plan>,
}

impl NoisyOracle {
    pub fn new(config: NoisyConfig, session: u64) -> Self {
        NoisyOracle {
            config,
            session,
            reference: None,
            invalid_prefixes: Vec::new(),
        }
    }

    fn rng(&self, trial: usize, attempt: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ self.session.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        rng.set_stream(((trial as u64) << 8) | attempt);
        rng
    }

    fn corrupt(&self, reference: &Plan, objects: &[Block], rng: &mut ChaCha8Rng) -> Plan {
        reference
            .actions
            .iter()
            .map(|a| {
                let u: f64 = rng.random();
                let replacement = random_other_action(a, objects, rng);
                match replacement {
                    Some(r) if u < self.config.p_err => r,
                    _ => a.clone(),
                }
            })
            .collect()
    }

    fn extends_known_failure(&self, plan: &Plan) -> bool {
        self.invalid_prefixes.iter().any(|p| plan.starts_with(p))
    }
}

fn random_action(objects: &[Block], rng: &mut impl Rng) -> Action {
    let a = objects.choose(rng).expect("problems have objects").clone();
    let op = if objects.len() < 2 {
        rng.random_range(0..2)
    } else {
        rng.random_range(0..4)
    };
    let mut other = || loop {
        let b = objects.choose(rng).expect("non-empty").clone();
        if b != a {
            break b;
        }
    };
    match op {
        0 => Action::PickUp(a),
        1 => Action::PutDown(a.clone()),
        2 => {
            let b = other();
            Action::Stack(a, b)
        }
        _ => {
            let b = other();
            Action::Unstack(a, b)
        }
    }
}

/// A random action different from `original`; `None` only when no other
/// action exists. Tries a bounded number of times so the draw count stays
/// independent of `p_err`.
fn random_other_action(original: &Action, objects: &[Block], rng: &mut impl Rng) -> Option<Action> {
    (0..32).map(|_| random_action(objects, rng)).find(|a| a != original)
}

impl SolutionOracle for NoisyOracle {
    fn query(&mut self, query: &OracleQuery, problem: &Problem) -> Result<OracleResponse, OracleError> {
        if self.reference.is_none() {
            self.reference = Some(solve(problem)?);
        }
        let reference = self.reference.clone().expect("set above");
        let mut chosen = None;
        for attempt in 0..RESAMPLE_LIMIT {
            let mut rng = self.rng(query.trial, attempt);
            let candidate = self.corrupt(&reference, &problem.objects, &mut rng);
            if !self.config.prefix_respecting || !self.extends_known_failure(&candidate) {
                chosen = Some(candidate);
                break;
            }
        }
        let plan = chosen.unwrap_or(reference);
        Ok(OracleResponse::from_completion(completion_for(&plan), &problem.objects))
    }

    fn observe(&mut self, counterexample: &Counterexample) {
        if let Counterexample::InvalidPrefix(p) = counterexample {
            self.invalid_prefixes.push(p.clone());
        }
    }

    fn describe(&self) -> String {
        format!(
            "noisy p_err={} seed={} prefix_respecting={}",
            self.config.p_err, self.config.seed, self.config.prefix_respecting
        )
    }
}
