//! Counterexample-guided plan synthesis for the blocksworld domain.
//!
//! A generative solution oracle (an LLM behind a chat-completions endpoint,
//! or one of the deterministic mocks) proposes plans; a deductive verifier
//! accepts them or localizes the first infeasible step, and the resulting
//! counterexample is fed back into the conversation until a verified plan
//! comes out or the trial budget runs out.
//!
//! Module map:
//!
//! * [`pddl`]: the problem format and closed-world [`pddl::WorldState`]s.
//! * [`plan`]: `START-PLAN`/`END-PLAN` plan text.
//! * [`semantics`]: transition relation, verifier and counterexamples.
//! * [`smt`]: SMT-LIB2 encoding of a verification query and solver driver.
//! * [`oracle`]: prompts, the HTTP client and mock oracles.
//! * [`cegis`]: the synthesis loop and its run records.
//! * [`bench`]: problem generator, reference solver and experiment harness.
//! * [`cli`]: the `plancegis` command line.

pub mod bench;
pub mod cegis;
pub mod cli;
pub mod corpus;
pub mod oracle;
pub mod pddl;
pub mod plan;
pub mod semantics;
pub mod smt;

pub use pddl::{Atom, Block, GoalSpec, InitMode, Problem, Support, WorldState};
pub use plan::{Action, Plan};
pub use semantics::{Counterexample, SemanticsMode, StepFailure, Verdict};
