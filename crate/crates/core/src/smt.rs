//! SMT-LIB2 encoding of plan verification, and an external solver driver.
//!
//! Each state `k` gets the function family `s{k}_table`, `s{k}_hand`,
//! `s{k}_clear : Int -> Bool`, `s{k}_stacked : Int Int -> Bool` and the
//! nullary `s{k}_handsfree`. Blocks are integer constants `blk_<name>` fixed
//! to `1..n`. The script is `sat` exactly when the plan executes and reaches
//! the goal under the chosen semantics.
//!
//! [`FrameAxioms::Corrected`] keeps every fact an operator does not touch.
//! [`FrameAxioms::LiteralAppendix`] copies the original stack/unstack frame
//! rules, which leave the destination's table/hand facts and every
//! `stacked(a, _)`/`stacked(_, c)` pair free; it exists to show that gap and
//! is never used by the loop.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use wait_timeout::ChildExt;

use crate::pddl::{Atom, Block, InconsistentInit, Problem, Support};
use crate::plan::{Action, Plan};
use crate::semantics::{verify, SemanticsMode, Verdict, VerdictReport};

pub const SOLVER_CMD_VAR: &str = "SOLVER_CMD";
pub const DEFAULT_SOLVER_CMD: &str = "z3 -smt2 {file}";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameAxioms {
    #[default]
    Corrected,
    LiteralAppendix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SmtOptions {
    pub frame: FrameAxioms,
    /// `AppendixDisjunctive` emits the two-case disjunctions for stack and
    /// unstack; `Strict4Ops` keeps only the hand cases.
    pub semantics: SemanticsMode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmtEncoding {
    pub script: String,
    pub step_count: usize,
    pub state_symbols: Vec<String>,
}

const FAMILIES: [&str; 5] = ["table", "hand", "stacked", "clear", "handsfree"];

fn sym(b: &Block) -> String {
    format!("blk_{}", b.as_str())
}

struct Writer {
    out: String,
}

impl Writer {
    fn line(&mut self, s: impl AsRef<str>) {
        self.out.push_str(s.as_ref());
        self.out.push('\n');
    }

    fn assert(&mut self, s: impl AsRef<str>) {
        self.line(format!("(assert {})", s.as_ref()));
    }
}

fn lit(positive: bool, atom: String) -> String {
    if positive {
        atom
    } else {
        format!("(not {atom})")
    }
}

fn and(parts: &[String]) -> String {
    format!("(and {})", parts.join(" "))
}

/// Constraints between state `p` and `q` for one action, as assertion bodies.
fn step_constraints(action: &Action, p: usize, q: usize, opts: &SmtOptions) -> Vec<String> {
    let f = |fam: &str, k: usize, args: &[&str]| format!("(s{k}_{fam} {})", args.join(" "));
    let hf = |k: usize| format!("s{k}_handsfree");
    let same1 = |fam: &str| format!("(= (s{q}_{fam} x) (s{p}_{fam} x))");
    let same2 = format!("(= (s{q}_stacked x y) (s{p}_stacked x y))");
    let all_stacked_same = format!("(forall ((x Int) (y Int)) {same2})");

    let mut out = Vec::new();
    match action {
        Action::PickUp(b) => {
            let a = sym(b);
            out.push(f("table", p, &[&a]));
            out.push(f("clear", p, &[&a]));
            out.push(lit(false, f("hand", p, &[&a])));
            out.push(hf(p));
            out.push(f("hand", q, &[&a]));
            out.push(lit(false, f("table", q, &[&a])));
            out.push(lit(false, f("clear", q, &[&a])));
            out.push(lit(false, hf(q)));
            out.push(format!(
                "(forall ((x Int)) (=> (not (= x {a})) {}))",
                and(&[same1("table"), same1("hand"), same1("clear")])
            ));
            out.push(all_stacked_same);
        }
        Action::PutDown(b) => {
            let a = sym(b);
            out.push(f("hand", p, &[&a]));
            out.push(lit(false, hf(p)));
            out.push(lit(false, f("hand", q, &[&a])));
            out.push(f("table", q, &[&a]));
            out.push(f("clear", q, &[&a]));
            out.push(hf(q));
            out.push(format!(
                "(forall ((x Int)) (=> (not (= x {a})) {}))",
                and(&[same1("table"), same1("hand"), same1("clear")])
            ));
            out.push(all_stacked_same);
        }
        Action::Stack(top, dest) | Action::Unstack(top, dest) => {
            let (a, c) = (sym(top), sym(dest));
            out.extend(move_frames(&a, &c, &same1, &same2, opts.frame));
            let mut cases = if matches!(action, Action::Stack(..)) {
                let post = [
                    lit(false, f("table", q, &[&a])),
                    lit(false, f("hand", q, &[&a])),
                    f("stacked", q, &[&a, &c]),
                    f("clear", q, &[&a]),
                    lit(false, f("clear", q, &[&c])),
                    hf(q),
                ];
                let from_hand = [
                    f("hand", p, &[&a]),
                    lit(false, f("stacked", p, &[&a, &c])),
                    f("clear", p, &[&c]),
                    lit(false, hf(p)),
                ];
                let from_table = [
                    f("table", p, &[&a]),
                    lit(false, f("stacked", p, &[&a, &c])),
                    f("clear", p, &[&a]),
                    f("clear", p, &[&c]),
                    hf(p),
                ];
                let mut cases = vec![and(&[&from_hand[..], &post[..]].concat())];
                if opts.semantics == SemanticsMode::AppendixDisjunctive {
                    cases.push(and(&[&from_table[..], &post[..]].concat()));
                }
                cases
            } else {
                let pre = [f("stacked", p, &[&a, &c]), f("clear", p, &[&a]), hf(p)];
                let to_hand = [
                    lit(false, f("stacked", q, &[&a, &c])),
                    f("hand", q, &[&a]),
                    lit(false, f("table", q, &[&a])),
                    f("clear", q, &[&c]),
                    lit(false, f("clear", q, &[&a])),
                    lit(false, hf(q)),
                ];
                let to_table = [
                    lit(false, f("stacked", q, &[&a, &c])),
                    f("table", q, &[&a]),
                    lit(false, f("hand", q, &[&a])),
                    f("clear", q, &[&a]),
                    f("clear", q, &[&c]),
                    hf(q),
                ];
                let mut cases = vec![and(&[&pre[..], &to_hand[..]].concat())];
                if opts.semantics == SemanticsMode::AppendixDisjunctive {
                    cases.push(and(&[&pre[..], &to_table[..]].concat()));
                }
                cases
            };
            out.push(if cases.len() == 1 {
                cases.remove(0)
            } else {
                format!("(or {})", cases.join(" "))
            });
        }
    }
    out
}

fn move_frames(a: &str, c: &str, same1: &dyn Fn(&str) -> String, same2: &str, frame: FrameAxioms) -> Vec<String> {
    match frame {
        FrameAxioms::Corrected => vec![
            format!(
                "(forall ((x Int)) (=> (not (= x {a})) {}))",
                and(&[same1("table"), same1("hand")])
            ),
            format!(
                "(forall ((x Int)) (=> (and (not (= x {a})) (not (= x {c}))) {}))",
                same1("clear")
            ),
            format!("(forall ((x Int) (y Int)) (=> (not (and (= x {a}) (= y {c}))) {same2}))"),
        ],
        FrameAxioms::LiteralAppendix => vec![
            format!(
                "(forall ((x Int)) (=> (and (not (= x {a})) (not (= x {c}))) {}))",
                and(&[same1("hand"), same1("table"), same1("clear")])
            ),
            format!("(forall ((x Int) (y Int)) (=> (and (not (= x {a})) (not (= y {c}))) {same2}))"),
        ],
    }
}

fn goal_term(atom: &Atom, k: usize) -> String {
    match atom {
        Atom::On(x, y) => format!("(s{k}_stacked {} {})", sym(x), sym(y)),
        Atom::OnTable(x) => format!("(s{k}_table {})", sym(x)),
        Atom::Clear(x) => format!("(s{k}_clear {})", sym(x)),
        Atom::Holding(x) => format!("(s{k}_hand {})", sym(x)),
        Atom::ArmEmpty => format!("s{k}_handsfree"),
    }
}

/// Strict semantics with the chosen frame axioms.
pub fn emit_smtlib(problem: &Problem, plan: &Plan, frame: FrameAxioms) -> Result<SmtEncoding, InconsistentInit> {
    emit_smtlib_with(
        problem,
        plan,
        &SmtOptions {
            frame,
            semantics: SemanticsMode::Strict4Ops,
        },
    )
}

pub fn emit_smtlib_with(problem: &Problem, plan: &Plan, opts: &SmtOptions) -> Result<SmtEncoding, InconsistentInit> {
    let init = problem.initial_state()?;
    let blocks: Vec<&Block> = init.blocks().collect();
    let steps = plan.len();
    let mut w = Writer { out: String::new() };

    w.line(format!("; problem {}", problem.name));
    w.line(format!(
        "; steps {steps}, frame axioms {}, semantics {}",
        match opts.frame {
            FrameAxioms::Corrected => "corrected",
            FrameAxioms::LiteralAppendix => "literal-appendix",
        },
        match opts.semantics {
            SemanticsMode::Strict4Ops => "strict4ops",
            SemanticsMode::AppendixDisjunctive => "appendix-disjunctive",
        }
    ));
    w.line("(set-logic UFLIA)");
    for (i, b) in blocks.iter().enumerate() {
        w.line(format!("(declare-const {} Int)", sym(b)));
        w.assert(format!("(= {} {})", sym(b), i + 1));
    }
    if blocks.len() >= 2 {
        let all: Vec<String> = blocks.iter().map(|b| sym(b)).collect();
        w.assert(format!("(distinct {})", all.join(" ")));
    }

    let mut state_symbols = Vec::with_capacity((steps + 1) * FAMILIES.len());
    for k in 0..=steps {
        for fam in FAMILIES {
            let sig = match fam {
                "stacked" => "(Int Int)",
                "handsfree" => "()",
                _ => "(Int)",
            };
            let name = format!("s{k}_{fam}");
            w.line(format!("(declare-fun {name} {sig} Bool)"));
            state_symbols.push(name);
        }
    }

    w.line("; initial state");
    for b in &blocks {
        let s = sym(b);
        let support = init.support(b).expect("listed block");
        w.assert(lit(*support == Support::Table, format!("(s0_table {s})")));
        w.assert(lit(*support == Support::Hand, format!("(s0_hand {s})")));
        w.assert(lit(init.clear(b), format!("(s0_clear {s})")));
    }
    for x in &blocks {
        for y in &blocks {
            w.assert(lit(init.on(x, y), format!("(s0_stacked {} {})", sym(x), sym(y))));
        }
    }
    w.assert(lit(init.arm_empty(), "s0_handsfree".into()));

    for (i, action) in plan.actions.iter().enumerate() {
        w.line(format!("; step {}: {action}", i + 1));
        for c in step_constraints(action, i, i + 1, opts) {
            w.assert(c);
        }
    }

    w.line("; goal");
    for atom in problem.goal.atoms() {
        w.assert(goal_term(atom, steps));
    }
    w.line("(check-sat)");

    Ok(SmtEncoding {
        script: w.out,
        step_count: steps,
        state_symbols,
    })
}

// ---------------------------------------------------------------------------
// Solver process

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SatResult {
    Sat,
    Unsat,
    Unknown,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("empty solver command")]
    EmptyCommand,
    #[error("could not run `{cmd}`: {source}")]
    Spawn { cmd: String, source: std::io::Error },
    #[error("solver io: {0}")]
    Io(#[from] std::io::Error),
    #[error("solver timed out after {0:?}")]
    Timeout(Duration),
    #[error("solver exited with {status}: {output}")]
    ExitStatus { status: String, output: String },
    #[error("unparseable solver output: {0}")]
    Unparseable(String),
}

/// A command line; a `{file}` token is replaced by the path of a temporary
/// script file, otherwise the script is written to stdin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverCommand {
    pub template: String,
    pub timeout: Duration,
}

impl SolverCommand {
    pub fn new(template: impl Into<String>) -> Self {
        SolverCommand {
            template: template.into(),
            timeout: DEFAULT_TIMEOUT,
        }
    }

    /// `SOLVER_CMD` if set, else `fallback`.
    pub fn from_env_or(fallback: Option<&str>) -> Option<Self> {
        std::env::var(SOLVER_CMD_VAR)
            .ok()
            .filter(|s| !s.trim().is_empty())
            .or_else(|| fallback.map(str::to_string))
            .map(SolverCommand::new)
    }

    /// The configured command, or z3 when it is on `PATH`.
    pub fn detect() -> Option<Self> {
        Self::from_env_or(None).or_else(|| {
            let found = std::env::var_os("PATH")
                .map(|p| std::env::split_paths(&p).any(|d| d.join("z3").is_file()))
                .unwrap_or(false);
            found.then(|| SolverCommand::new(DEFAULT_SOLVER_CMD))
        })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

/// First `sat`/`unsat`/`unknown` line of solver output.
pub fn parse_solver_output(output: &str) -> Result<SatResult, SolverError> {
    if output.contains("(error") {
        return Err(SolverError::Unparseable(output.trim().to_string()));
    }
    for line in output.lines() {
        match line.trim() {
            "sat" => return Ok(SatResult::Sat),
            "unsat" => return Ok(SatResult::Unsat),
            "unknown" => return Ok(SatResult::Unknown),
            _ => {}
        }
    }
    Err(SolverError::Unparseable(output.trim().to_string()))
}

pub fn check_script(script: &str, cmd: &SolverCommand) -> Result<SatResult, SolverError> {
    let parts: Vec<&str> = cmd.template.split_whitespace().collect();
    let Some((program, rest)) = parts.split_first() else {
        return Err(SolverError::EmptyCommand);
    };
    let uses_file = rest.iter().any(|a| a.contains("{file}"));
    let file = if uses_file {
        let mut f = tempfile::Builder::new().suffix(".smt2").tempfile()?;
        f.write_all(script.as_bytes())?;
        f.flush()?;
        Some(f)
    } else {
        None
    };
    let path = file.as_ref().map(|f| f.path().to_path_buf());
    let args: Vec<String> = rest
        .iter()
        .map(|a| match &path {
            Some(p) => a.replace("{file}", &p.to_string_lossy()),
            None => a.to_string(),
        })
        .collect();

    let mut child = Command::new(program)
        .args(&args)
        .stdin(if uses_file { Stdio::null() } else { Stdio::piped() })
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| SolverError::Spawn {
            cmd: cmd.template.clone(),
            source,
        })?;
    if let Some(mut stdin) = child.stdin.take() {
        stdin.write_all(script.as_bytes())?;
    }
    let mut stdout = child.stdout.take().expect("piped");
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        stdout.read_to_string(&mut s).map(|_| s)
    });
    let status = match child.wait_timeout(cmd.timeout)? {
        Some(s) => s,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(SolverError::Timeout(cmd.timeout));
        }
    };
    let output = reader.join().expect("reader thread")?;
    let mut stderr = String::new();
    if let Some(mut e) = child.stderr.take() {
        let _ = e.read_to_string(&mut stderr);
    }
    if !status.success() {
        return Err(SolverError::ExitStatus {
            status: status.to_string(),
            output: format!("{}{}", output.trim(), stderr.trim()),
        });
    }
    parse_solver_output(&output)
}

pub fn check_with_solver(encoding: &SmtEncoding, cmd: &SolverCommand) -> Result<SatResult, SolverError> {
    check_script(&encoding.script, cmd)
}

/// Runs many scripts with at most `pool_size` solver processes at once.
pub fn check_many(
    encodings: &[SmtEncoding],
    cmd: &SolverCommand,
    pool_size: usize,
) -> Vec<Result<SatResult, SolverError>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(pool_size.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| encodings.par_iter().map(|e| check_with_solver(e, cmd)).collect())
}

#[derive(Debug, Error)]
pub enum CrossCheckError {
    #[error(transparent)]
    Init(#[from] InconsistentInit),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CrossCheck {
    Agree(Verdict),
    Disagree {
        native: Verdict,
        smt: SatResult,
        script: String,
    },
}

impl CrossCheck {
    pub fn agrees(&self) -> bool {
        matches!(self, CrossCheck::Agree(_))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossCheckReport {
    pub agree: bool,
    pub native: VerdictReport,
    pub smt: Option<SatResult>,
}

impl CrossCheckReport {
    pub fn new(result: &CrossCheck, plan: &Plan) -> Self {
        match result {
            CrossCheck::Agree(v) => CrossCheckReport {
                agree: true,
                native: VerdictReport::new(v, plan),
                smt: Some(if v.is_valid() { SatResult::Sat } else { SatResult::Unsat }),
            },
            CrossCheck::Disagree { native, smt, .. } => CrossCheckReport {
                agree: false,
                native: VerdictReport::new(native, plan),
                smt: Some(*smt),
            },
        }
    }
}

/// Native verification in `mode` against the corrected encoding of the
/// same semantics.
pub fn cross_check_in(
    problem: &Problem,
    plan: &Plan,
    mode: SemanticsMode,
    cmd: &SolverCommand,
) -> Result<CrossCheck, CrossCheckError> {
    let native = verify(problem, plan, mode)?;
    let enc = emit_smtlib_with(
        problem,
        plan,
        &SmtOptions {
            frame: FrameAxioms::Corrected,
            semantics: mode,
        },
    )?;
    let smt = check_with_solver(&enc, cmd)?;
    let agree = match smt {
        SatResult::Sat => native.is_valid(),
        SatResult::Unsat => !native.is_valid(),
        SatResult::Unknown => false,
    };
    Ok(if agree {
        CrossCheck::Agree(native)
    } else {
        CrossCheck::Disagree {
            native,
            smt,
            script: enc.script,
        }
    })
}

pub fn cross_check(problem: &Problem, plan: &Plan, cmd: &SolverCommand) -> Result<CrossCheck, CrossCheckError> {
    cross_check_in(problem, plan, SemanticsMode::Strict4Ops, cmd)
}

pub fn write_script(encoding: &SmtEncoding, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, &encoding.script)
}

/// Checks that `text` is a sequence of balanced s-expressions.
pub fn is_well_formed(text: &str) -> bool {
    let mut depth = 0i64;
    for line in text.lines() {
        let code = line.split(';').next().unwrap_or("");
        for ch in code.chars() {
            match ch {
                '(' => depth += 1,
                ')' => {
                    depth -= 1;
                    if depth < 0 {
                        return false;
                    }
                }
                _ => {}
            }
        }
    }
    depth == 0
}

/// Summary line used by the CLI.
pub fn describe(result: &CrossCheck) -> String {
    let mut s = String::new();
    match result {
        CrossCheck::Agree(v) => {
            let _ = write!(s, "agree: {}", v.status());
        }
        CrossCheck::Disagree { native, smt, .. } => {
            let _ = write!(s, "disagree: native {} vs solver {smt:?}", native.status());
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Corpus;
    use crate::pddl::parse_problem;

    fn newprob(plan: &str) -> (Problem, Plan) {
        let c = Corpus::builtin();
        let p = c.problem("newprob").unwrap();
        let plan = c.plan(plan, &p).unwrap();
        (p, plan)
    }

    #[test]
    fn one_family_per_state() {
        let (p, plan) = newprob("newprob-corrected");
        let enc = emit_smtlib(&p, &plan, FrameAxioms::Corrected).unwrap();
        assert_eq!(enc.step_count, 12);
        assert_eq!(enc.state_symbols.len(), 13 * 5);
        assert!(enc.state_symbols.contains(&"s12_handsfree".to_string()));
        let unique: std::collections::BTreeSet<_> = enc.state_symbols.iter().collect();
        assert_eq!(unique.len(), enc.state_symbols.len());
        assert!(is_well_formed(&enc.script));
        assert!(enc.script.trim_end().ends_with("(check-sat)"));
        assert!(enc.script.contains("(distinct blk_b1"));
    }

    #[test]
    fn strict_has_no_disjunction() {
        let (p, plan) = newprob("newprob-corrected");
        let strict = emit_smtlib(&p, &plan, FrameAxioms::Corrected).unwrap();
        assert!(!strict.script.contains("(or "));
        let disj = emit_smtlib_with(
            &p,
            &plan,
            &SmtOptions {
                frame: FrameAxioms::Corrected,
                semantics: SemanticsMode::AppendixDisjunctive,
            },
        )
        .unwrap();
        assert!(disj.script.contains("(or "));
    }

    #[test]
    fn single_block_empty_plan() {
        let p = parse_problem("(define (problem p)(:domain d)(:objects a)(:init (on-table a))(:goal (on-table a)))")
            .unwrap();
        let enc = emit_smtlib(&p, &Plan::default(), FrameAxioms::Corrected).unwrap();
        assert!(!enc.script.contains("distinct"));
        assert_eq!(enc.state_symbols.len(), 5);
    }

    #[test]
    fn output_parsing() {
        assert_eq!(parse_solver_output("sat\n").unwrap(), SatResult::Sat);
        assert_eq!(parse_solver_output("unsat\n").unwrap(), SatResult::Unsat);
        assert_eq!(parse_solver_output("\nunknown\n").unwrap(), SatResult::Unknown);
        assert!(parse_solver_output("(error \"line 1\")\nsat").is_err());
        assert!(parse_solver_output("").is_err());
    }

    #[test]
    fn missing_solver_binary() {
        let cmd = SolverCommand::new("definitely-not-a-solver-binary {file}");
        assert!(matches!(
            check_script("(check-sat)", &cmd),
            Err(SolverError::Spawn { .. })
        ));
        assert!(matches!(
            check_script("(check-sat)", &SolverCommand::new("  ")),
            Err(SolverError::EmptyCommand)
        ));
    }
}
