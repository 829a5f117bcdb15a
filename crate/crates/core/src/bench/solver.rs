//! Unstack-then-rebuild reference solver.
//!
//! A block is *settled* when the whole tower below it already matches the
//! goal. Phase one clears every unsettled block onto the table; phase two
//! stacks blocks onto settled destinations bottom-up. Each block moves at
//! most twice, so plans have at most `4n` actions.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::pddl::{Atom, Block, InconsistentInit, Problem, Support, WorldState};
use crate::plan::{Action, Plan};
use crate::semantics::{apply, SemanticsMode};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Init(#[from] InconsistentInit),
    #[error("unsatisfiable goal: {0}")]
    UnsatisfiableGoal(String),
}

/// What the goal says about where a block must rest.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Want {
    Table,
    On(Block),
}

struct GoalShape {
    below: BTreeMap<Block, Want>,
    wanted_on: BTreeSet<Block>,
    must_be_clear: BTreeSet<Block>,
}

impl GoalShape {
    fn new(problem: &Problem) -> Result<Self, SolveError> {
        let mut below = BTreeMap::new();
        let mut wanted_on = BTreeSet::new();
        let mut must_be_clear = BTreeSet::new();
        for atom in problem.goal.atoms() {
            for b in atom.blocks() {
                if !problem.objects.contains(b) {
                    return Err(SolveError::UnsatisfiableGoal(format!("{b} is not an object")));
                }
            }
            match atom {
                Atom::On(a, b) => {
                    below.insert(a.clone(), Want::On(b.clone()));
                    wanted_on.insert(b.clone());
                }
                Atom::OnTable(a) => {
                    below.insert(a.clone(), Want::Table);
                }
                Atom::Clear(b) => {
                    must_be_clear.insert(b.clone());
                }
                other => return Err(SolveError::UnsatisfiableGoal(format!("{other} is not a goal atom"))),
            }
        }
        if let Some(b) = must_be_clear.intersection(&wanted_on).next() {
            return Err(SolveError::UnsatisfiableGoal(format!("{b} must be clear and covered")));
        }
        for start in below.keys() {
            let mut seen = BTreeSet::new();
            let mut cur = start;
            while let Some(Want::On(next)) = below.get(cur) {
                if !seen.insert(cur.clone()) {
                    return Err(SolveError::UnsatisfiableGoal(format!(
                        "goal towers form a cycle through {start}"
                    )));
                }
                cur = next;
            }
        }
        Ok(GoalShape {
            below,
            wanted_on,
            must_be_clear,
        })
    }

    /// Whether `upper` may stay directly on `lower` in the final state.
    fn compatible(&self, upper: &Block, lower: &Block) -> bool {
        match self.below.get(upper) {
            Some(Want::On(x)) => x == lower,
            Some(Want::Table) => false,
            None => !self.wanted_on.contains(lower) && !self.must_be_clear.contains(lower),
        }
    }

    fn settled_blocks(&self, state: &WorldState) -> BTreeSet<Block> {
        let mut settled = BTreeSet::new();
        for tower in state.towers() {
            let bottom = &tower[0];
            if matches!(self.below.get(bottom), Some(Want::On(_))) {
                continue;
            }
            settled.insert(bottom.clone());
            for pair in tower.windows(2) {
                if !self.compatible(&pair[1], &pair[0]) {
                    break;
                }
                settled.insert(pair[1].clone());
            }
        }
        settled
    }
}

/// A plan reaching the goal of `problem` under [`SemanticsMode::Strict4Ops`].
pub fn reference_solve(problem: &Problem) -> Result<Plan, SolveError> {
    let goal = GoalShape::new(problem)?;
    let mut state = problem.initial_state()?;
    let mut actions = Vec::new();
    let mut step = |state: &mut WorldState, action: Action| {
        *state =
            apply(state, &action, SemanticsMode::Strict4Ops).expect("reference solver only emits applicable actions");
        actions.push(action);
    };

    if let Some(h) = state.holding().cloned() {
        step(&mut state, Action::PutDown(h));
    }

    // Phase one: everything above the settled part of each tower goes to the table.
    let settled = goal.settled_blocks(&state);
    for tower in state.towers() {
        for block in tower.iter().rev() {
            if settled.contains(block) {
                break;
            }
            if let Some(Support::On(lower)) = state.support(block).cloned() {
                step(&mut state, Action::Unstack(block.clone(), lower));
                step(&mut state, Action::PutDown(block.clone()));
            }
        }
    }

    // Phase two: build goal towers bottom-up onto settled blocks.
    let mut settled = goal.settled_blocks(&state);
    loop {
        let next = goal.below.iter().find_map(|(a, want)| match want {
            Want::On(b) if !settled.contains(a) && settled.contains(b) && state.clear(b) => {
                Some((a.clone(), b.clone()))
            }
            _ => None,
        });
        let Some((a, b)) = next else { break };
        step(&mut state, Action::PickUp(a.clone()));
        step(&mut state, Action::Stack(a.clone(), b));
        settled.insert(a);
    }

    if !problem.goal.satisfied_by(&state) {
        return Err(SolveError::UnsatisfiableGoal(format!(
            "could not reach {}",
            problem
                .goal
                .missing(&state)
                .iter()
                .map(|a| a.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        )));
    }
    Ok(Plan::new(actions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{parse_problem, GoalSpec};
    use crate::semantics::verify;

    fn b(n: &str) -> Block {
        Block::new(n).unwrap()
    }

    #[test]
    fn already_satisfied_goal_gives_empty_plan() {
        let p = parse_problem(
            "(define (problem p)(:domain d)(:objects a c)(:init (on a c)(on-table c))(:goal (and (on a c))))",
        )
        .unwrap();
        assert!(reference_solve(&p).unwrap().is_empty());
    }

    #[test]
    fn held_block_is_handled() {
        let p = parse_problem(
            "(define (problem p)(:domain d)(:objects a c)(:init (holding a)(on-table c))(:goal (and (on c a))))",
        )
        .unwrap();
        let plan = reference_solve(&p).unwrap();
        assert!(verify(&p, &plan, SemanticsMode::Strict4Ops).unwrap().is_valid());
        assert!(plan.len() <= 8);
    }

    #[test]
    fn clear_goals_are_respected() {
        let p = parse_problem(
            "(define (problem p)(:domain d)(:objects a c x)(:init (on x a)(on a c)(on-table c))(:goal (and (clear a))))",
        )
        .unwrap();
        let plan = reference_solve(&p).unwrap();
        assert!(verify(&p, &plan, SemanticsMode::Strict4Ops).unwrap().is_valid());
    }

    #[test]
    fn cyclic_goal_is_unsatisfiable() {
        let mut p = parse_problem(
            "(define (problem p)(:domain d)(:objects a c x)(:init (on-table a)(on-table c)(on-table x))(:goal (and (on a c))))",
        )
        .unwrap();
        p.goal = GoalSpec::new(vec![
            Atom::On(b("a"), b("c")),
            Atom::On(b("c"), b("x")),
            Atom::On(b("x"), b("a")),
        ])
        .unwrap();
        assert!(matches!(reference_solve(&p), Err(SolveError::UnsatisfiableGoal(_))));
    }
}
