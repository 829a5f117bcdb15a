//! Runs the encodings through a real solver; skipped when none is configured.

use plancegis::corpus::Corpus;
use plancegis::pddl::parse_problem;
use plancegis::plan::parse_plan;
use plancegis::semantics::{verify, SemanticsMode, Verdict};
use plancegis::smt::{
    check_script, check_with_solver, cross_check, cross_check_in, emit_smtlib, FrameAxioms, SatResult, SolverCommand,
};

fn solver() -> Option<SolverCommand> {
    let s = SolverCommand::detect();
    if s.is_none() {
        eprintln!("no SMT solver configured; skipping");
    }
    s
}

#[test]
fn newprob_plans() {
    let Some(cmd) = solver() else { return };
    let c = Corpus::builtin();
    let p = c.problem("newprob").unwrap();
    let good = c.plan("newprob-corrected", &p).unwrap();
    let bad = c.plan("newprob-incorrect", &p).unwrap();
    let enc = emit_smtlib(&p, &good, FrameAxioms::Corrected).unwrap();
    assert_eq!(check_with_solver(&enc, &cmd).unwrap(), SatResult::Sat);
    let enc = emit_smtlib(&p, &bad, FrameAxioms::Corrected).unwrap();
    assert_eq!(check_with_solver(&enc, &cmd).unwrap(), SatResult::Unsat);
    assert!(cross_check(&p, &good, &cmd).unwrap().agrees());
    assert!(cross_check(&p, &bad, &cmd).unwrap().agrees());
    assert!(cross_check_in(&p, &bad, SemanticsMode::AppendixDisjunctive, &cmd)
        .unwrap()
        .agrees());
}

#[test]
fn trivial_and_contradictory_scripts() {
    let Some(cmd) = solver() else { return };
    let p =
        parse_problem("(define (problem p)(:domain d)(:objects a)(:init (on-table a))(:goal (on-table a)))").unwrap();
    let enc = emit_smtlib(&p, &Default::default(), FrameAxioms::Corrected).unwrap();
    assert_eq!(check_with_solver(&enc, &cmd).unwrap(), SatResult::Sat);
    let contradictory = "(set-logic UFLIA)\n(declare-fun s0_table (Int) Bool)\n(declare-fun s0_hand (Int) Bool)\n\
        (declare-const blk_a Int)\n(assert (= blk_a 1))\n(assert (s0_table blk_a))\n(assert (s0_hand blk_a))\n\
        (assert (forall ((x Int)) (not (and (s0_table x) (s0_hand x)))))\n(check-sat)\n";
    assert_eq!(check_script(contradictory, &cmd).unwrap(), SatResult::Unsat);
}

#[test]
fn stdin_mode() {
    let Some(cmd) = solver() else { return };
    if !cmd.template.starts_with("z3") {
        return;
    }
    let stdin = SolverCommand::new("z3 -smt2 -in");
    assert_eq!(check_script("(check-sat)\n", &stdin).unwrap(), SatResult::Sat);
}

#[test]
fn literal_appendix_accepts_a_wrong_plan() {
    let Some(cmd) = solver() else { return };
    let c = Corpus::builtin();
    let p = parse_problem(&c.problems["literal-gap"]).unwrap_or_else(|_| unreachable!());
    let plan = parse_plan(&c.plans["literal-gap"], &p.objects).unwrap().plan;
    assert!(matches!(
        verify(&p, &plan, SemanticsMode::Strict4Ops).unwrap(),
        Verdict::GoalUnsatisfied { .. }
    ));
    let corrected = emit_smtlib(&p, &plan, FrameAxioms::Corrected).unwrap();
    assert_eq!(check_with_solver(&corrected, &cmd).unwrap(), SatResult::Unsat);
    let literal = emit_smtlib(&p, &plan, FrameAxioms::LiteralAppendix).unwrap();
    assert_eq!(check_with_solver(&literal, &cmd).unwrap(), SatResult::Sat);
}
