//! Transition relation, plan verifier and counterexample extraction.
//!
//! Two semantics are available. [`SemanticsMode::Strict4Ops`] is classic
//! four-operator STRIPS blocksworld: `stack` only from the hand, `unstack`
//! only into the hand. [`SemanticsMode::AppendixDisjunctive`] also admits
//! stacking a clear block straight from the table and unstacking a block
//! straight onto the table. Unstack is then nondeterministic (hand or
//! table), so the verifier tracks the set of reachable states and accepts a
//! plan if some resolution of the choices succeeds.
//!
//! A held block is never clear. Every transition changes the support of
//! exactly one block, the one named first by the action.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::{Atom, Block, GoalSpec, InconsistentInit, Problem, Support, WorldState};
use crate::plan::{print_prefix, Action, Plan};

/// Largest problem [`reachable_states`] will enumerate.
pub const MAX_ENUMERATION_BLOCKS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticsMode {
    #[default]
    Strict4Ops,
    AppendixDisjunctive,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemanticsError {
    #[error(transparent)]
    Init(#[from] InconsistentInit),
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("state space too large: {blocks} blocks (limit {MAX_ENUMERATION_BLOCKS})")]
    TooLarge { blocks: usize },
}

/// Symbolic precondition identifiers, serialized as e.g. `pickup.on_table`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Precondition {
    PickupClear,
    PickupOnTable,
    PickupArmEmpty,
    PutdownHolding,
    StackHolding,
    StackDestClear,
    StackTopOnTable,
    StackTopClear,
    StackArmEmpty,
    UnstackOn,
    UnstackTopClear,
    UnstackArmEmpty,
}

impl Precondition {
    pub const ALL: [Precondition; 12] = [
        Precondition::PickupClear,
        Precondition::PickupOnTable,
        Precondition::PickupArmEmpty,
        Precondition::PutdownHolding,
        Precondition::StackHolding,
        Precondition::StackDestClear,
        Precondition::StackTopOnTable,
        Precondition::StackTopClear,
        Precondition::StackArmEmpty,
        Precondition::UnstackOn,
        Precondition::UnstackTopClear,
        Precondition::UnstackArmEmpty,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Precondition::PickupClear => "pickup.clear",
            Precondition::PickupOnTable => "pickup.on_table",
            Precondition::PickupArmEmpty => "pickup.arm_empty",
            Precondition::PutdownHolding => "putdown.holding",
            Precondition::StackHolding => "stack.holding",
            Precondition::StackDestClear => "stack.dest_clear",
            Precondition::StackTopOnTable => "stack.top_on_table",
            Precondition::StackTopClear => "stack.top_clear",
            Precondition::StackArmEmpty => "stack.arm_empty",
            Precondition::UnstackOn => "unstack.on",
            Precondition::UnstackTopClear => "unstack.top_clear",
            Precondition::UnstackArmEmpty => "unstack.arm_empty",
        }
    }

    pub fn from_id(id: &str) -> Option<Precondition> {
        Precondition::ALL.into_iter().find(|p| p.id() == id)
    }
}

impl fmt::Display for Precondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl Serialize for Precondition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.id())
    }
}

impl<'de> Deserialize<'de> for Precondition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let id = String::deserialize(d)?;
        Precondition::from_id(&id).ok_or_else(|| serde::de::Error::custom(format!("unknown precondition `{id}`")))
    }
}

/// An action whose preconditions fail in some state.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{action}: violated {}", ids(violated))]
pub struct Violation {
    pub action: Action,
    pub violated: Vec<Precondition>,
    pub explanation: String,
}

fn ids(v: &[Precondition]) -> String {
    v.iter().map(|p| p.id()).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepFailure {
    /// 1-based.
    pub step_index: usize,
    pub action: Action,
    pub violated: Vec<Precondition>,
    pub explanation: String,
}

impl StepFailure {
    fn at(step_index: usize, v: Violation) -> Self {
        StepFailure {
            step_index,
            action: v.action,
            violated: v.violated,
            explanation: format!("step {step_index}: {}", v.explanation),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    Infeasible(StepFailure),
    GoalUnsatisfied {
        missing: BTreeSet<Atom>,
        final_state: WorldState,
    },
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid)
    }

    pub fn status(&self) -> &'static str {
        match self {
            Verdict::Valid => "valid",
            Verdict::Infeasible(_) => "infeasible",
            Verdict::GoalUnsatisfied { .. } => "goal_unsatisfied",
        }
    }

    pub fn failure(&self) -> Option<&StepFailure> {
        match self {
            Verdict::Infeasible(f) => Some(f),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Counterexample {
    /// Every plan starting with this prefix is infeasible.
    InvalidPrefix(Plan),
    InvalidWholePlan(Plan),
    GoalGap(BTreeSet<Atom>),
}

impl Counterexample {
    /// The counterexample a verdict implies for `plan`; `None` for valid plans.
    pub fn from_verdict(verdict: &Verdict, plan: &Plan) -> Option<Counterexample> {
        match verdict {
            Verdict::Valid => None,
            Verdict::Infeasible(f) => Some(Counterexample::InvalidPrefix(plan.prefix(f.step_index))),
            Verdict::GoalUnsatisfied { missing, .. } => Some(Counterexample::GoalGap(missing.clone())),
        }
    }

    /// Human-readable rendering: prefix listing, whole plan, or missing atoms.
    pub fn render(&self) -> String {
        match self {
            Counterexample::InvalidPrefix(p) => print_prefix(p),
            Counterexample::InvalidWholePlan(p) => crate::plan::print_plan(p),
            Counterexample::GoalGap(missing) => missing.iter().map(|a| a.to_string()).collect::<Vec<_>>().join("\n"),
        }
    }
}

/// Stable JSON shape of a verdict: `{status, failing_step, violated,
/// missing_atoms, prefix}`. Absent parts are `null`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub status: String,
    pub failing_step: Option<usize>,
    pub violated: Option<Vec<Precondition>>,
    pub missing_atoms: Option<Vec<Atom>>,
    pub prefix: Option<Vec<Action>>,
}

impl VerdictReport {
    pub fn new(verdict: &Verdict, plan: &Plan) -> Self {
        match verdict {
            Verdict::Valid => VerdictReport {
                status: verdict.status().into(),
                failing_step: None,
                violated: None,
                missing_atoms: None,
                prefix: None,
            },
            Verdict::Infeasible(f) => VerdictReport {
                status: verdict.status().into(),
                failing_step: Some(f.step_index),
                violated: Some(f.violated.clone()),
                missing_atoms: None,
                prefix: Some(plan.prefix(f.step_index).actions),
            },
            Verdict::GoalUnsatisfied { missing, .. } => VerdictReport {
                status: verdict.status().into(),
                failing_step: None,
                violated: None,
                missing_atoms: Some(missing.iter().cloned().collect()),
                prefix: None,
            },
        }
    }
}

// ---------------------------------------------------------------------------
// Transition relation

fn describe_support(state: &WorldState, b: &Block) -> String {
    match state.support(b) {
        Some(Support::Table) => "on the table".into(),
        Some(Support::On(x)) => format!("on {x}"),
        Some(Support::Hand) => "in the hand".into(),
        None => "not a block of this problem".into(),
    }
}

fn explain(state: &WorldState, action: &Action, violated: &[Precondition]) -> String {
    let mut reasons = Vec::new();
    for p in violated {
        let r = match (p, action) {
            (Precondition::PickupClear, Action::PickUp(b))
            | (Precondition::StackTopClear, Action::Stack(b, _))
            | (Precondition::UnstackTopClear, Action::Unstack(b, _)) => match state.above(b) {
                Some(x) => format!("{b} is not clear ({x} is on it)"),
                None => format!("{b} is not clear (it is {})", describe_support(state, b)),
            },
            (Precondition::StackDestClear, Action::Stack(_, c)) => match state.above(c) {
                Some(x) => format!("{c} is not clear ({x} is on it)"),
                None => format!("{c} is not clear (it is {})", describe_support(state, c)),
            },
            (Precondition::PickupOnTable, Action::PickUp(b)) | (Precondition::StackTopOnTable, Action::Stack(b, _)) => {
                format!("{b} is not on the table (it is {})", describe_support(state, b))
            }
            (Precondition::PickupArmEmpty | Precondition::StackArmEmpty | Precondition::UnstackArmEmpty, _) => format!(
                "the hand is not empty (holding {})",
                state.holding().map(Block::as_str).unwrap_or("?")
            ),
            (Precondition::PutdownHolding, Action::PutDown(b)) | (Precondition::StackHolding, Action::Stack(b, _)) => {
                match state.holding() {
                    Some(h) => format!("the hand holds {h}, not {b}"),
                    None => format!("{b} is not in the hand (the hand is empty)"),
                }
            }
            (Precondition::UnstackOn, Action::Unstack(a, c)) => {
                format!("{a} is not on {c} (it is {})", describe_support(state, a))
            }
            (p, _) => format!("{p} does not hold"),
        };
        reasons.push(r);
    }
    format!("{action} failed: {}", reasons.join("; "))
}

fn violation(state: &WorldState, action: &Action, violated: Vec<Precondition>) -> Violation {
    Violation {
        action: action.clone(),
        explanation: explain(state, action, &violated),
        violated,
    }
}

fn moved_to(state: &WorldState, block: &Block, to: Support) -> WorldState {
    state
        .with_support(block, to)
        .expect("transition from a valid state preserves the state invariants")
}

/// All states `action` can lead to, in a fixed order: the strict outcome
/// first. Unknown blocks are reported as violations of every precondition
/// mentioning them.
pub fn successors(state: &WorldState, action: &Action, mode: SemanticsMode) -> Result<Vec<WorldState>, Violation> {
    let known = |b: &Block| state.support(b).is_some();
    match action {
        Action::PickUp(b) => {
            let mut v = Vec::new();
            if !state.clear(b) {
                v.push(Precondition::PickupClear);
            }
            if !state.on_table(b) {
                v.push(Precondition::PickupOnTable);
            }
            if !state.arm_empty() {
                v.push(Precondition::PickupArmEmpty);
            }
            if !v.is_empty() {
                return Err(violation(state, action, v));
            }
            Ok(vec![moved_to(state, b, Support::Hand)])
        }
        Action::PutDown(b) => {
            if state.holding() != Some(b) {
                return Err(violation(state, action, vec![Precondition::PutdownHolding]));
            }
            Ok(vec![moved_to(state, b, Support::Table)])
        }
        Action::Stack(a, c) => {
            let dest_clear = known(c) && state.clear(c);
            let from_hand = state.holding() == Some(a);
            if from_hand && dest_clear {
                return Ok(vec![moved_to(state, a, Support::On(c.clone()))]);
            }
            let table_case = mode == SemanticsMode::AppendixDisjunctive && state.arm_empty();
            if table_case {
                let mut v = Vec::new();
                if !state.on_table(a) {
                    v.push(Precondition::StackTopOnTable);
                }
                if !state.clear(a) {
                    v.push(Precondition::StackTopClear);
                }
                if !dest_clear {
                    v.push(Precondition::StackDestClear);
                }
                if v.is_empty() {
                    return Ok(vec![moved_to(state, a, Support::On(c.clone()))]);
                }
                return Err(violation(state, action, v));
            }
            let mut v = Vec::new();
            if !from_hand {
                v.push(Precondition::StackHolding);
            }
            if !dest_clear {
                v.push(Precondition::StackDestClear);
            }
            Err(violation(state, action, v))
        }
        Action::Unstack(a, c) => {
            let mut v = Vec::new();
            if !state.on(a, c) {
                v.push(Precondition::UnstackOn);
            }
            if !state.clear(a) {
                v.push(Precondition::UnstackTopClear);
            }
            if !state.arm_empty() {
                v.push(Precondition::UnstackArmEmpty);
            }
            if !v.is_empty() {
                return Err(violation(state, action, v));
            }
            let mut out = vec![moved_to(state, a, Support::Hand)];
            if mode == SemanticsMode::AppendixDisjunctive {
                out.push(moved_to(state, a, Support::Table));
            }
            Ok(out)
        }
    }
}

/// Applies one action. Under the disjunctive semantics an unstack resolves
/// to the hand; use [`successors`] for every outcome.
pub fn apply(state: &WorldState, action: &Action, mode: SemanticsMode) -> Result<WorldState, Violation> {
    successors(state, action, mode).map(|mut v| v.swap_remove(0))
}

/// Actions applicable in `state` under [`SemanticsMode::Strict4Ops`], in a
/// fixed order.
pub fn applicable_actions(state: &WorldState) -> Vec<Action> {
    let mut out = Vec::new();
    if let Some(h) = state.holding() {
        out.push(Action::PutDown(h.clone()));
        for c in state.blocks() {
            if state.clear(c) {
                out.push(Action::Stack(h.clone(), c.clone()));
            }
        }
    } else {
        for b in state.blocks() {
            if !state.clear(b) {
                continue;
            }
            match state.support(b) {
                Some(Support::Table) => out.push(Action::PickUp(b.clone())),
                Some(Support::On(x)) => out.push(Action::Unstack(b.clone(), x.clone())),
                _ => {}
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Verification

/// Runs `plan` from `init` and checks `goal` on the final state.
pub fn verify_from(init: &WorldState, goal: &GoalSpec, plan: &Plan, mode: SemanticsMode) -> Verdict {
    let mut frontier = vec![init.clone()];
    for (i, action) in plan.actions.iter().enumerate() {
        let mut next: Vec<WorldState> = Vec::new();
        let mut first_violation = None;
        for state in &frontier {
            match successors(state, action, mode) {
                Ok(states) => {
                    for s in states {
                        if !next.contains(&s) {
                            next.push(s);
                        }
                    }
                }
                Err(v) => {
                    first_violation.get_or_insert(v);
                }
            }
        }
        if next.is_empty() {
            let v = first_violation.expect("an empty frontier implies a violation");
            return Verdict::Infeasible(StepFailure::at(i + 1, v));
        }
        frontier = next;
    }
    if frontier.iter().any(|s| goal.satisfied_by(s)) {
        return Verdict::Valid;
    }
    let final_state = frontier.swap_remove(0);
    Verdict::GoalUnsatisfied {
        missing: goal.missing(&final_state),
        final_state,
    }
}

/// Verifies `plan` from the normalized initial state of `problem`.
pub fn verify(problem: &Problem, plan: &Plan, mode: SemanticsMode) -> Result<Verdict, InconsistentInit> {
    let init = problem.initial_state()?;
    Ok(verify_from(&init, &problem.goal, plan, mode))
}

/// The counterexample for a rejected plan: the shortest infeasible prefix
/// (ending at the first failing action) or the unmet goal atoms.
pub fn minimal_infeasible_prefix(
    problem: &Problem,
    plan: &Plan,
    mode: SemanticsMode,
) -> Result<Counterexample, SemanticsError> {
    let verdict = verify(problem, plan, mode)?;
    Counterexample::from_verdict(&verdict, plan)
        .ok_or_else(|| SemanticsError::ContractViolation("the plan is valid; there is no counterexample".into()))
}

/// Breadth-first enumeration of states reachable from the initial state in
/// at most `depth` strict actions (`None` runs to the fixpoint). States are
/// returned in discovery order.
pub fn reachable_states(problem: &Problem, depth: Option<usize>) -> Result<Vec<WorldState>, SemanticsError> {
    if problem.objects.len() > MAX_ENUMERATION_BLOCKS {
        return Err(SemanticsError::TooLarge {
            blocks: problem.objects.len(),
        });
    }
    let init = problem.initial_state()?;
    let mut seen: HashSet<WorldState> = HashSet::new();
    let mut order = vec![init.clone()];
    seen.insert(init.clone());
    let mut queue = VecDeque::from([(init, 0usize)]);
    while let Some((state, d)) = queue.pop_front() {
        if depth.is_some_and(|max| d >= max) {
            continue;
        }
        for action in applicable_actions(&state) {
            let next = apply(&state, &action, SemanticsMode::Strict4Ops).expect("applicable actions apply");
            if seen.insert(next.clone()) {
                order.push(next.clone());
                queue.push_back((next, d + 1));
            }
        }
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::parse_problem;

    fn b(n: &str) -> Block {
        Block::new(n).unwrap()
    }

    fn state(pairs: &[(&str, Option<&str>)], held: Option<&str>) -> WorldState {
        let mut map = std::collections::BTreeMap::new();
        for (x, on) in pairs {
            map.insert(b(x), on.map_or(Support::Table, |y| Support::On(b(y))));
        }
        if let Some(h) = held {
            map.insert(b(h), Support::Hand);
        }
        WorldState::from_support(map).unwrap()
    }

    #[test]
    fn pickup_putdown_is_identity() {
        let s = state(&[("b1", None)], None);
        let held = apply(&s, &Action::PickUp(b("b1")), SemanticsMode::Strict4Ops).unwrap();
        assert_eq!(held.holding(), Some(&b("b1")));
        assert!(!held.clear(&b("b1")));
        let back = apply(&held, &Action::PutDown(b("b1")), SemanticsMode::Strict4Ops).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn every_violation_is_listed() {
        let s = state(&[("x", Some("a")), ("a", Some("c")), ("c", None)], Some("h"));
        let v = apply(&s, &Action::PickUp(b("a")), SemanticsMode::Strict4Ops).unwrap_err();
        assert_eq!(
            v.violated,
            vec![
                Precondition::PickupClear,
                Precondition::PickupOnTable,
                Precondition::PickupArmEmpty
            ]
        );
        assert!(v.explanation.contains("x is on it"), "{}", v.explanation);
        let v = apply(&s, &Action::Unstack(b("a"), b("x")), SemanticsMode::Strict4Ops).unwrap_err();
        assert_eq!(
            v.violated,
            vec![
                Precondition::UnstackOn,
                Precondition::UnstackTopClear,
                Precondition::UnstackArmEmpty
            ]
        );
        let v = apply(&s, &Action::Stack(b("a"), b("c")), SemanticsMode::Strict4Ops).unwrap_err();
        assert_eq!(
            v.violated,
            vec![Precondition::StackHolding, Precondition::StackDestClear]
        );
        let v = apply(&s, &Action::PutDown(b("a")), SemanticsMode::Strict4Ops).unwrap_err();
        assert_eq!(v.violated, vec![Precondition::PutdownHolding]);
    }

    #[test]
    fn stack_onto_held_or_unknown_block_fails() {
        let s = state(&[("a", None)], Some("h"));
        assert!(apply(&s, &Action::Stack(b("h"), b("zz")), SemanticsMode::Strict4Ops).is_err());
    }

    #[test]
    fn disjunctive_modes() {
        let s = state(&[("a", None), ("c", None)], None);
        let stack = Action::Stack(b("a"), b("c"));
        assert!(apply(&s, &stack, SemanticsMode::Strict4Ops).is_err());
        let t = apply(&s, &stack, SemanticsMode::AppendixDisjunctive).unwrap();
        assert!(t.on(&b("a"), &b("c")) && t.arm_empty() && t.clear(&b("a")) && !t.clear(&b("c")));

        let outs = successors(&t, &Action::Unstack(b("a"), b("c")), SemanticsMode::AppendixDisjunctive).unwrap();
        assert_eq!(outs.len(), 2);
        assert_eq!(outs[0].holding(), Some(&b("a")));
        assert_eq!(outs[1], s);
    }

    #[test]
    fn disjunctive_verify_explores_both_unstack_outcomes() {
        let p = parse_problem(
            "(define (problem p)(:domain d)(:objects a c)(:init (on a c)(on-table c))(:goal (and (on c a))))",
        )
        .unwrap();
        // unstack to the table, then stack c on a from the table
        let plan = Plan::new(vec![Action::Unstack(b("a"), b("c")), Action::Stack(b("c"), b("a"))]);
        assert!(verify(&p, &plan, SemanticsMode::AppendixDisjunctive)
            .unwrap()
            .is_valid());
        assert!(!verify(&p, &plan, SemanticsMode::Strict4Ops).unwrap().is_valid());
    }

    #[test]
    fn prefix_on_valid_plan_is_a_contract_violation() {
        let p = parse_problem(
            "(define (problem p)(:domain d)(:objects b1)(:init (arm-empty)(on-table b1)(clear b1))(:goal (and (on-table b1))))",
        )
        .unwrap();
        let err = minimal_infeasible_prefix(&p, &Plan::default(), SemanticsMode::Strict4Ops).unwrap_err();
        assert!(matches!(err, SemanticsError::ContractViolation(_)));
        let bad = Plan::new(vec![Action::PutDown(b("b1"))]);
        let cex = minimal_infeasible_prefix(&p, &bad, SemanticsMode::Strict4Ops).unwrap();
        assert_eq!(cex, Counterexample::InvalidPrefix(bad));
    }

    #[test]
    fn reachable_guard_and_small_cases() {
        let one =
            parse_problem("(define (problem p)(:domain d)(:objects b1)(:init (on-table b1))(:goal (on-table b1)))")
                .unwrap();
        assert_eq!(reachable_states(&one, Some(2)).unwrap().len(), 2);
        assert_eq!(reachable_states(&one, Some(0)).unwrap().len(), 1);
        let seven = parse_problem(
            "(define (problem p)(:domain d)(:objects a b c d e f g)(:init (on-table a)(on-table b)(on-table c)(on-table d)(on-table e)(on-table f)(on-table g))(:goal (on-table a)))",
        )
        .unwrap();
        assert!(matches!(
            reachable_states(&seven, Some(1)),
            Err(SemanticsError::TooLarge { blocks: 7 })
        ));
    }

    #[test]
    fn report_json_shape() {
        let plan = Plan::new(vec![Action::PutDown(b("b1"))]);
        let s = state(&[("b1", None)], None);
        let goal = GoalSpec::new(vec![Atom::OnTable(b("b1"))]).unwrap();
        let verdict = verify_from(&s, &goal, &plan, SemanticsMode::Strict4Ops);
        let json = serde_json::to_value(VerdictReport::new(&verdict, &plan)).unwrap();
        assert_eq!(
            json,
            serde_json::json!({
                "status": "infeasible",
                "failing_step": 1,
                "violated": ["putdown.holding"],
                "missing_atoms": null,
                "prefix": ["put-down b1"],
            })
        );
    }
}
