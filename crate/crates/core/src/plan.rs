//! Plans over the four blocksworld operators and their text form.
//!
//! Canonical text:
//!
//! ```text
//! START-PLAN
//! 1. unstack b4 b1
//! 2. put-down b4
//! END-PLAN
//! ```
//!
//! Parsing is tolerant of what chat models wrap around a plan: prose before
//! and after the markers, markdown fences, `pickup`/`putdown` spellings,
//! `3)` numbering and misnumbered steps.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::Block;

pub const START_MARKER: &str = "START-PLAN";
pub const END_MARKER: &str = "END-PLAN";

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum PlanError {
    #[error("no START-PLAN ... END-PLAN block found")]
    NoPlanBlock,
    #[error("malformed step on line {line}: {reason}")]
    MalformedStep { line: usize, reason: String },
    #[error("unknown block `{0}`")]
    UnknownBlock(String),
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    PickUp(Block),
    PutDown(Block),
    Stack(Block, Block),
    Unstack(Block, Block),
}

impl Action {
    pub fn operator(&self) -> &'static str {
        match self {
            Action::PickUp(_) => "pick-up",
            Action::PutDown(_) => "put-down",
            Action::Stack(..) => "stack",
            Action::Unstack(..) => "unstack",
        }
    }

    /// The block whose support changes.
    pub fn moved(&self) -> &Block {
        match self {
            Action::PickUp(b) | Action::PutDown(b) | Action::Stack(b, _) | Action::Unstack(b, _) => b,
        }
    }

    pub fn blocks(&self) -> Vec<&Block> {
        match self {
            Action::PickUp(b) | Action::PutDown(b) => vec![b],
            Action::Stack(a, c) | Action::Unstack(a, c) => vec![a, c],
        }
    }

    /// Parses `op arg1 [arg2]` (no step number) against the declared objects.
    pub fn parse(text: &str, objects: &[Block]) -> Result<Action, PlanError> {
        parse_action(text, objects, 0)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::PickUp(b) | Action::PutDown(b) => write!(f, "{} {b}", self.operator()),
            Action::Stack(a, c) | Action::Unstack(a, c) => write!(f, "{} {a} {c}", self.operator()),
        }
    }
}

impl Serialize for Action {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_action_unchecked(&text, 0).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Plan {
    pub actions: Vec<Action>,
}

impl Plan {
    pub fn new(actions: Vec<Action>) -> Self {
        Plan { actions }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// The first `n` actions.
    pub fn prefix(&self, n: usize) -> Plan {
        Plan::new(self.actions[..n.min(self.actions.len())].to_vec())
    }

    pub fn starts_with(&self, prefix: &Plan) -> bool {
        self.actions.starts_with(&prefix.actions)
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_plan(self))
    }
}

impl FromIterator<Action> for Plan {
    fn from_iter<I: IntoIterator<Item = Action>>(iter: I) -> Self {
        Plan::new(iter.into_iter().collect())
    }
}

/// A parsed plan plus what the parser had to tolerate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedPlan {
    pub plan: Plan,
    /// Step numbers were not `1, 2, 3, ...`.
    pub irregular_numbering: bool,
}

fn is_marker(line: &str, marker: &str) -> bool {
    let t = line
        .trim()
        .trim_matches(|c: char| c == '*' || c == '`' || c == '#' || c == ':');
    t.trim().eq_ignore_ascii_case(marker)
}

/// Extracts and parses the first `START-PLAN`/`END-PLAN` block in `text`.
pub fn parse_plan(text: &str, objects: &[Block]) -> Result<ParsedPlan, PlanError> {
    let lines: Vec<&str> = text.lines().collect();
    let start = lines
        .iter()
        .position(|l| is_marker(l, START_MARKER))
        .ok_or(PlanError::NoPlanBlock)?;
    let end = lines[start + 1..]
        .iter()
        .position(|l| is_marker(l, END_MARKER))
        .map(|i| start + 1 + i)
        .ok_or(PlanError::NoPlanBlock)?;

    let mut actions = Vec::new();
    let mut irregular = false;
    for (idx, raw) in lines[start + 1..end].iter().enumerate() {
        let line_no = start + 2 + idx;
        let line = raw.trim();
        if line.is_empty() || line.starts_with("```") {
            continue;
        }
        let (number, rest) = split_step_number(line).ok_or_else(|| PlanError::MalformedStep {
            line: line_no,
            reason: format!("expected `N. operator args`, found `{line}`"),
        })?;
        if number != actions.len() + 1 {
            irregular = true;
        }
        actions.push(parse_action(rest, objects, line_no)?);
    }
    Ok(ParsedPlan {
        plan: Plan::new(actions),
        irregular_numbering: irregular,
    })
}

fn split_step_number(line: &str) -> Option<(usize, &str)> {
    let digits = line.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits == 0 {
        return None;
    }
    let number = line[..digits].parse().ok()?;
    let rest = &line[digits..];
    let rest = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')'))?;
    Some((number, rest.trim()))
}

fn normalize_operator(op: &str) -> Option<&'static str> {
    match op.to_ascii_lowercase().replace('_', "-").as_str() {
        "pick-up" | "pickup" => Some("pick-up"),
        "put-down" | "putdown" => Some("put-down"),
        "stack" => Some("stack"),
        "unstack" => Some("unstack"),
        _ => None,
    }
}

fn parse_action_unchecked(text: &str, line: usize) -> Result<Action, PlanError> {
    parse_action_inner(text, None, line)
}

fn parse_action(text: &str, objects: &[Block], line: usize) -> Result<Action, PlanError> {
    parse_action_inner(text, Some(objects), line)
}

fn parse_action_inner(text: &str, objects: Option<&[Block]>, line: usize) -> Result<Action, PlanError> {
    let cleaned = text.trim().trim_start_matches('(').trim_end_matches(')');
    let words: Vec<&str> = cleaned
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|w| !w.is_empty())
        .collect();
    let malformed = |reason: String| PlanError::MalformedStep { line, reason };
    let (op_word, args) = words
        .split_first()
        .ok_or_else(|| malformed("missing operator".into()))?;
    let op = normalize_operator(op_word).ok_or_else(|| PlanError::UnknownOperator(op_word.to_string()))?;
    let want = if matches!(op, "pick-up" | "put-down") { 1 } else { 2 };
    if args.len() != want {
        return Err(malformed(format!(
            "`{op}` takes {want} argument(s), got {}",
            args.len()
        )));
    }
    let mut blocks = Vec::with_capacity(want);
    for a in args {
        let block = Block::new(a).map_err(|_| PlanError::UnknownBlock(a.to_string()))?;
        if let Some(objs) = objects {
            if !objs.contains(&block) {
                return Err(PlanError::UnknownBlock(block.to_string()));
            }
        }
        blocks.push(block);
    }
    let mut it = blocks.into_iter();
    let first = it.next().unwrap();
    Ok(match op {
        "pick-up" => Action::PickUp(first),
        "put-down" => Action::PutDown(first),
        _ => {
            let second = it.next().unwrap();
            if first == second {
                return Err(malformed(format!("`{op}` needs two distinct blocks")));
            }
            if op == "stack" {
                Action::Stack(first, second)
            } else {
                Action::Unstack(first, second)
            }
        }
    })
}

fn numbered_lines(plan: &Plan) -> String {
    plan.actions
        .iter()
        .enumerate()
        .map(|(i, a)| format!("{}. {a}\n", i + 1))
        .collect()
}

/// Canonical text: `START-PLAN`, numbered lines, `END-PLAN`. No trailing
/// newline after `END-PLAN`.
pub fn print_plan(plan: &Plan) -> String {
    format!("{START_MARKER}\n{}{END_MARKER}", numbered_lines(plan))
}

/// A prefix listing: the opening marker and the numbered steps, with no
/// closing marker since the listing is not a complete plan.
pub fn print_prefix(prefix: &Plan) -> String {
    let body = numbered_lines(prefix);
    format!("{START_MARKER}\n{}", body.trim_end_matches('\n'))
}
