//! The library's transition relation against the tower model in `support`.

mod support;

use std::collections::BTreeSet;

use plancegis::bench::{gen_problem, reference_solve, GenConfig};
use plancegis::semantics::{applicable_actions, apply, reachable_states, verify, SemanticsMode};
use plancegis::{Atom, GoalSpec, Problem, WorldState};
use support::{reachable, state_count, Towers};

fn towers_of(state: &WorldState) -> Towers {
    let any = state.blocks().next().unwrap().clone();
    let p = Problem::from_state("s", "bw", state, GoalSpec::new(vec![Atom::OnTable(any)]).unwrap());
    Towers::from_init(&p).expect("library state is a configuration")
}

#[test]
fn state_count_formula() {
    assert_eq!(
        (0..=5).map(state_count).collect::<Vec<_>>(),
        vec![1, 2, 5, 22, 125, 866]
    );
}

#[test]
fn reachable_set_matches_model() {
    for n in 1..=5 {
        let p = gen_problem(&GenConfig::new(n, 11, 1), 0);
        let lib: BTreeSet<Towers> = reachable_states(&p, None).unwrap().iter().map(towers_of).collect();
        let model = reachable(&Towers::from_init(&p).unwrap());
        assert_eq!(lib.len(), state_count(n), "n={n}");
        assert_eq!(lib, model, "n={n}");
    }
}

#[test]
fn successor_relation_matches_model() {
    for n in 1..=4 {
        let p = gen_problem(&GenConfig::new(n, 12, 1), 0);
        for state in reachable_states(&p, None).unwrap() {
            let model: BTreeSet<_> = towers_of(&state).moves().into_iter().collect();
            let lib: BTreeSet<_> = applicable_actions(&state)
                .into_iter()
                .map(|a| {
                    let next = apply(&state, &a, SemanticsMode::Strict4Ops).unwrap();
                    (a, towers_of(&next))
                })
                .collect();
            assert_eq!(lib, model, "{state:?}");
        }
    }
}

#[test]
fn depth_bound_limits_enumeration() {
    let p = gen_problem(&GenConfig::new(3, 13, 1), 0);
    assert_eq!(reachable_states(&p, Some(0)).unwrap().len(), 1);
    let one = reachable_states(&p, Some(1)).unwrap().len();
    let init = p.initial_state().unwrap();
    assert_eq!(one, 1 + applicable_actions(&init).len());
}

#[test]
fn reference_plans_from_every_start_state() {
    // Every reachable 4-block configuration as a start, towards a few goals.
    let seed = gen_problem(&GenConfig::new(4, 14, 1), 0);
    let goals: Vec<_> = (0..5).map(|i| gen_problem(&GenConfig::new(4, 15, 5), i).goal).collect();
    for state in reachable_states(&seed, None).unwrap() {
        if !state.arm_empty() {
            continue;
        }
        for goal in &goals {
            let p = Problem::from_state("start", "bw", &state, goal.clone());
            let plan = reference_solve(&p).unwrap();
            assert!(verify(&p, &plan, SemanticsMode::Strict4Ops).unwrap().is_valid());
            assert!(plan.len() <= 16);
        }
    }
}
