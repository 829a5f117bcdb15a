//! The blocksworld-4ops problem fragment of PDDL.
//!
//! Only `define`, `:domain`, `:objects`, `:init` and `:goal` are understood,
//! over the closed predicate vocabulary `on`, `on-table`, `clear`,
//! `arm-empty` and `holding`. Predicate and block tokens are case-insensitive
//! and canonicalized to lower case; problem and domain names are kept as
//! written.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PddlError {
    #[error("syntax error at {line}:{col}: expected {expected}")]
    Syntax { line: usize, col: usize, expected: String },
    #[error("semantic error: {0}")]
    Semantic(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("inconsistent init: {0}")]
pub struct InconsistentInit(pub String);

/// A block name. Always lower case and matching `[a-z][a-z0-9_-]*`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Block(String);

impl Block {
    pub fn new(name: &str) -> Result<Self, PddlError> {
        let lower = name.to_ascii_lowercase();
        let mut chars = lower.chars();
        let valid = matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
            && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        if valid {
            Ok(Block(lower))
        } else {
            Err(PddlError::Semantic(format!("invalid block name `{name}`")))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Block {
    type Error = PddlError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Block::new(&value)
    }
}

impl From<Block> for String {
    fn from(b: Block) -> String {
        b.0
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    On(Block, Block),
    OnTable(Block),
    Clear(Block),
    ArmEmpty,
    Holding(Block),
}

impl Atom {
    pub fn on(upper: Block, lower: Block) -> Result<Atom, PddlError> {
        if upper == lower {
            return Err(PddlError::Semantic(format!("(on {upper} {upper}) is not allowed")));
        }
        Ok(Atom::On(upper, lower))
    }

    pub fn blocks(&self) -> Vec<&Block> {
        match self {
            Atom::On(a, b) => vec![a, b],
            Atom::OnTable(b) | Atom::Clear(b) | Atom::Holding(b) => vec![b],
            Atom::ArmEmpty => vec![],
        }
    }

    fn is_goal_form(&self) -> bool {
        matches!(self, Atom::On(..) | Atom::OnTable(_) | Atom::Clear(_))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::On(a, b) => write!(f, "(on {a} {b})"),
            Atom::OnTable(b) => write!(f, "(on-table {b})"),
            Atom::Clear(b) => write!(f, "(clear {b})"),
            Atom::ArmEmpty => f.write_str("(arm-empty)"),
            Atom::Holding(b) => write!(f, "(holding {b})"),
        }
    }
}

impl Serialize for Atom {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Atom {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_atom(&text).map_err(serde::de::Error::custom)
    }
}

/// Parses a single atom such as `(on b1 b2)`.
pub fn parse_atom(text: &str) -> Result<Atom, PddlError> {
    let sexp = parse_sexprs(text)?;
    match sexp.as_slice() {
        [one] => atom_from_sexp(one, None),
        _ => Err(PddlError::Semantic(format!("expected exactly one atom in `{text}`"))),
    }
}

/// Where a block rests.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    Table,
    On(Block),
    Hand,
}

/// A complete blocksworld configuration. `clear` and `arm-empty` are derived.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WorldState {
    support: BTreeMap<Block, Support>,
    holding: Option<Block>,
}

impl WorldState {
    /// Builds a state from a total support map, checking every invariant.
    pub fn from_support(support: BTreeMap<Block, Support>) -> Result<Self, InconsistentInit> {
        let held: Vec<&Block> = support
            .iter()
            .filter(|(_, s)| **s == Support::Hand)
            .map(|(b, _)| b)
            .collect();
        if held.len() > 1 {
            return Err(InconsistentInit(format!(
                "more than one block in hand: {}",
                join(held.iter().map(|b| b.as_str()))
            )));
        }
        let holding = held.first().map(|b| (*b).clone());
        let mut occupant: BTreeMap<&Block, &Block> = BTreeMap::new();
        for (block, s) in &support {
            if let Support::On(lower) = s {
                if lower == block {
                    return Err(InconsistentInit(format!("{block} is on itself")));
                }
                match support.get(lower) {
                    None => return Err(InconsistentInit(format!("{block} is on undeclared block {lower}"))),
                    Some(Support::Hand) => {
                        return Err(InconsistentInit(format!("{block} is on {lower}, which is in the hand")))
                    }
                    Some(_) => {}
                }
                if let Some(other) = occupant.insert(lower, block) {
                    return Err(InconsistentInit(format!(
                        "both {other} and {block} are directly on {lower}"
                    )));
                }
            }
        }
        for start in support.keys() {
            let mut seen = BTreeSet::new();
            let mut cur = start;
            while let Some(Support::On(lower)) = support.get(cur) {
                if !seen.insert(cur) {
                    return Err(InconsistentInit(format!("cycle in stacking through {start}")));
                }
                cur = lower;
            }
        }
        Ok(WorldState { support, holding })
    }

    pub fn blocks(&self) -> impl Iterator<Item = &Block> {
        self.support.keys()
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn support(&self, block: &Block) -> Option<&Support> {
        self.support.get(block)
    }

    pub fn support_map(&self) -> &BTreeMap<Block, Support> {
        &self.support
    }

    pub fn holding(&self) -> Option<&Block> {
        self.holding.as_ref()
    }

    pub fn arm_empty(&self) -> bool {
        self.holding.is_none()
    }

    pub fn on_table(&self, block: &Block) -> bool {
        self.support.get(block) == Some(&Support::Table)
    }

    pub fn on(&self, upper: &Block, lower: &Block) -> bool {
        matches!(self.support.get(upper), Some(Support::On(b)) if b == lower)
    }

    /// The block directly on top of `block`, if any.
    pub fn above(&self, block: &Block) -> Option<&Block> {
        self.support
            .iter()
            .find(|(_, s)| matches!(s, Support::On(b) if b == block))
            .map(|(b, _)| b)
    }

    /// A held block is not clear.
    pub fn clear(&self, block: &Block) -> bool {
        self.support.contains_key(block) && self.holding.as_ref() != Some(block) && self.above(block).is_none()
    }

    pub fn satisfies(&self, atom: &Atom) -> bool {
        match atom {
            Atom::On(a, b) => self.on(a, b),
            Atom::OnTable(b) => self.on_table(b),
            Atom::Clear(b) => self.clear(b),
            Atom::ArmEmpty => self.arm_empty(),
            Atom::Holding(b) => self.holding.as_ref() == Some(b),
        }
    }

    /// Towers listed bottom-up, ordered by their bottom block.
    pub fn towers(&self) -> Vec<Vec<Block>> {
        let mut towers = Vec::new();
        for (block, s) in &self.support {
            if *s == Support::Table {
                let mut tower = vec![block.clone()];
                while let Some(next) = self.above(tower.last().unwrap()) {
                    tower.push(next.clone());
                }
                towers.push(tower);
            }
        }
        towers
    }

    /// Replaces the support of one block, re-checking every invariant.
    pub fn with_support(&self, block: &Block, to: Support) -> Result<Self, InconsistentInit> {
        let mut support = self.support.clone();
        support.insert(block.clone(), to);
        WorldState::from_support(support)
    }

    /// The complete atom listing in the usual `:init` order: `arm-empty`,
    /// placement atoms by block, then `clear` atoms.
    pub fn to_atoms(&self) -> Vec<Atom> {
        let mut atoms = Vec::new();
        if self.arm_empty() {
            atoms.push(Atom::ArmEmpty);
        }
        for (block, s) in &self.support {
            atoms.push(match s {
                Support::Table => Atom::OnTable(block.clone()),
                Support::On(lower) => Atom::On(block.clone(), lower.clone()),
                Support::Hand => Atom::Holding(block.clone()),
            });
        }
        for block in self.support.keys() {
            if self.clear(block) {
                atoms.push(Atom::Clear(block.clone()));
            }
        }
        atoms
    }
}

impl fmt::Display for WorldState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let towers: Vec<String> = self
            .towers()
            .iter()
            .map(|t| format!("[{}]", join(t.iter().map(|b| b.as_str()))))
            .collect();
        write!(f, "{}", towers.join(" "))?;
        if let Some(b) = &self.holding {
            write!(f, " hand:{b}")?;
        }
        Ok(())
    }
}

/// A consistent goal conjunction over `on`, `on-table` and `clear`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Atom>", into = "Vec<Atom>")]
pub struct GoalSpec {
    atoms: Vec<Atom>,
}

impl GoalSpec {
    pub fn new(atoms: Vec<Atom>) -> Result<Self, PddlError> {
        if atoms.is_empty() {
            return Err(PddlError::Semantic("goal is empty".into()));
        }
        let mut below: BTreeMap<&Block, &Atom> = BTreeMap::new();
        let mut occupied: BTreeMap<&Block, &Block> = BTreeMap::new();
        for atom in &atoms {
            if !atom.is_goal_form() {
                return Err(PddlError::Semantic(format!("{atom} is not allowed in a goal")));
            }
            let placed = match atom {
                Atom::On(a, _) | Atom::OnTable(a) => a,
                _ => continue,
            };
            if let Some(prev) = below.insert(placed, atom) {
                if prev != atom {
                    return Err(PddlError::Semantic(format!(
                        "goal places {placed} twice: {prev} and {atom}"
                    )));
                }
            }
            if let Atom::On(a, b) = atom {
                if let Some(other) = occupied.insert(b, a) {
                    if other != a {
                        return Err(PddlError::Semantic(format!("goal puts both {other} and {a} on {b}")));
                    }
                }
            }
        }
        for atom in &atoms {
            if let Atom::Clear(b) = atom {
                if let Some(a) = occupied.get(b) {
                    return Err(PddlError::Semantic(format!(
                        "goal requires {b} clear but puts {a} on it"
                    )));
                }
            }
        }
        Ok(GoalSpec { atoms })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Goal atoms not holding in `state`.
    pub fn missing(&self, state: &WorldState) -> BTreeSet<Atom> {
        self.atoms.iter().filter(|a| !state.satisfies(a)).cloned().collect()
    }

    pub fn satisfied_by(&self, state: &WorldState) -> bool {
        self.atoms.iter().all(|a| state.satisfies(a))
    }
}

impl TryFrom<Vec<Atom>> for GoalSpec {
    type Error = PddlError;
    fn try_from(atoms: Vec<Atom>) -> Result<Self, Self::Error> {
        GoalSpec::new(atoms)
    }
}

impl From<GoalSpec> for Vec<Atom> {
    fn from(g: GoalSpec) -> Self {
        g.atoms
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub name: String,
    pub domain_name: String,
    pub objects: Vec<Block>,
    pub init: Vec<Atom>,
    pub goal: GoalSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitMode {
    Strict,
    #[default]
    Normalize,
}

impl Problem {
    /// Builds a problem whose `:init` lists the complete state.
    pub fn from_state(
        name: impl Into<String>,
        domain_name: impl Into<String>,
        state: &WorldState,
        goal: GoalSpec,
    ) -> Self {
        Problem {
            name: name.into(),
            domain_name: domain_name.into(),
            objects: state.blocks().cloned().collect(),
            init: state.to_atoms(),
            goal,
        }
    }

    pub fn initial_state(&self) -> Result<WorldState, InconsistentInit> {
        state_from_init(self, InitMode::Normalize)
    }
}

/// Closes the declarative `:init` into a [`WorldState`].
///
/// `Normalize` places blocks from `on`/`on-table`/`holding` and derives
/// `clear`/`arm-empty`; `Strict` additionally requires the declared `clear`
/// and `arm-empty` atoms to match the derived ones exactly.
pub fn state_from_init(problem: &Problem, mode: InitMode) -> Result<WorldState, InconsistentInit> {
    let mut support: BTreeMap<Block, Support> = BTreeMap::new();
    for atom in &problem.init {
        let (block, s) = match atom {
            Atom::On(a, b) => (a, Support::On(b.clone())),
            Atom::OnTable(a) => (a, Support::Table),
            Atom::Holding(a) => (a, Support::Hand),
            Atom::Clear(_) | Atom::ArmEmpty => continue,
        };
        if let Some(prev) = support.insert(block.clone(), s) {
            return Err(InconsistentInit(format!(
                "{block} is placed twice ({} and {atom})",
                placement_atom(block, &prev)
            )));
        }
    }
    let unplaced: Vec<&str> = problem
        .objects
        .iter()
        .filter(|b| !support.contains_key(*b))
        .map(|b| b.as_str())
        .collect();
    if !unplaced.is_empty() {
        return Err(InconsistentInit(format!("unplaced blocks: {}", join(unplaced))));
    }
    if let Some(stray) = support.keys().find(|b| !problem.objects.contains(b)) {
        return Err(InconsistentInit(format!("{stray} is not a declared object")));
    }
    let state = WorldState::from_support(support)?;

    if mode == InitMode::Strict {
        let declared: BTreeSet<&Block> = problem
            .init
            .iter()
            .filter_map(|a| match a {
                Atom::Clear(b) => Some(b),
                _ => None,
            })
            .collect();
        let derived: BTreeSet<&Block> = state.blocks().filter(|b| state.clear(b)).collect();
        let wrongly: Vec<&str> = declared.difference(&derived).map(|b| b.as_str()).collect();
        let omitted: Vec<&str> = derived.difference(&declared).map(|b| b.as_str()).collect();
        let mut problems = Vec::new();
        if !wrongly.is_empty() {
            problems.push(format!("declared clear but occupied or held: {}", join(wrongly)));
        }
        if !omitted.is_empty() {
            problems.push(format!("clear but not declared: {}", join(omitted)));
        }
        let declared_arm = problem.init.contains(&Atom::ArmEmpty);
        if declared_arm != state.arm_empty() {
            problems.push(if declared_arm {
                "arm-empty declared while holding a block".to_string()
            } else {
                "arm-empty missing while the hand is empty".to_string()
            });
        }
        if !problems.is_empty() {
            return Err(InconsistentInit(problems.join("; ")));
        }
    }
    Ok(state)
}

fn placement_atom(block: &Block, s: &Support) -> Atom {
    match s {
        Support::Table => Atom::OnTable(block.clone()),
        Support::On(b) => Atom::On(block.clone(), b.clone()),
        Support::Hand => Atom::Holding(block.clone()),
    }
}

fn join<'a>(items: impl IntoIterator<Item = &'a str>) -> String {
    items.into_iter().collect::<Vec<_>>().join(", ")
}

// ---------------------------------------------------------------------------
// Printing

/// Prints in the canonical layout: one atom per line inside `:init` and the
/// goal conjunction.
pub fn print_problem(problem: &Problem) -> String {
    let mut out = String::new();
    out.push_str(&format!("(define (problem {})\n", problem.name));
    out.push_str(&format!("(:domain {})\n", problem.domain_name));
    out.push_str("(:objects ");
    for b in &problem.objects {
        out.push_str(b.as_str());
        out.push(' ');
    }
    out.push_str(")\n(:init\n");
    for atom in &problem.init {
        out.push_str(&format!("{atom}\n"));
    }
    out.push_str(")\n(:goal\n(and\n");
    for atom in problem.goal.atoms() {
        out.push_str(&format!("{atom}\n"));
    }
    out.push_str(")))\n");
    out
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_problem(self))
    }
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug, Clone, PartialEq)]
enum Sexp {
    Sym { text: String, line: usize, col: usize },
    List { items: Vec<Sexp>, line: usize, col: usize },
}

impl Sexp {
    fn pos(&self) -> (usize, usize) {
        match self {
            Sexp::Sym { line, col, .. } | Sexp::List { line, col, .. } => (*line, *col),
        }
    }

    fn sym(&self) -> Option<&str> {
        match self {
            Sexp::Sym { text, .. } => Some(text),
            Sexp::List { .. } => None,
        }
    }

    fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List { items, .. } => Some(items),
            Sexp::Sym { .. } => None,
        }
    }
}

fn syntax(line: usize, col: usize, expected: impl Into<String>) -> PddlError {
    PddlError::Syntax {
        line,
        col,
        expected: expected.into(),
    }
}

fn parse_sexprs(text: &str) -> Result<Vec<Sexp>, PddlError> {
    let mut stack: Vec<(Vec<Sexp>, usize, usize)> = vec![(Vec::new(), 0, 0)];
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            ';' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '(' => {
                chars.next();
                stack.push((Vec::new(), line, col));
                col += 1;
            }
            ')' => {
                chars.next();
                if stack.len() == 1 {
                    return Err(syntax(line, col, "end of input, found `)`"));
                }
                let (items, l, c0) = stack.pop().unwrap();
                stack.last_mut().unwrap().0.push(Sexp::List {
                    items,
                    line: l,
                    col: c0,
                });
                col += 1;
            }
            _ => {
                let (l, c0) = (line, col);
                let mut sym = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    sym.push(c);
                    chars.next();
                    col += 1;
                }
                stack.last_mut().unwrap().0.push(Sexp::Sym {
                    text: sym,
                    line: l,
                    col: c0,
                });
            }
        }
    }
    if stack.len() > 1 {
        return Err(syntax(line, col, "`)` before end of input"));
    }
    Ok(stack.pop().unwrap().0)
}

fn expect_list<'a>(s: &'a Sexp, what: &str) -> Result<&'a [Sexp], PddlError> {
    s.list().ok_or_else(|| {
        let (l, c) = s.pos();
        syntax(l, c, what)
    })
}

fn expect_sym<'a>(s: &'a Sexp, what: &str) -> Result<&'a str, PddlError> {
    s.sym().ok_or_else(|| {
        let (l, c) = s.pos();
        syntax(l, c, what)
    })
}

fn keyword_section<'a>(s: &'a Sexp, keyword: &str) -> Result<&'a [Sexp], PddlError> {
    let items = expect_list(s, &format!("`({keyword} ...)`"))?;
    match items.first().and_then(Sexp::sym) {
        Some(k) if k.eq_ignore_ascii_case(keyword) => Ok(&items[1..]),
        _ => {
            let (l, c) = items.first().map(Sexp::pos).unwrap_or(s.pos());
            Err(syntax(l, c, format!("`{keyword}`")))
        }
    }
}

fn atom_from_sexp(s: &Sexp, objects: Option<&[Block]>) -> Result<Atom, PddlError> {
    let items = expect_list(s, "an atom `(predicate args...)`")?;
    let (l, c) = s.pos();
    let head = items.first().ok_or_else(|| syntax(l, c + 1, "a predicate name"))?;
    let pred = expect_sym(head, "a predicate name")?.to_ascii_lowercase();
    let mut args = Vec::new();
    for arg in &items[1..] {
        let name = expect_sym(arg, "a block name")?;
        let block = Block::new(name)?;
        if let Some(objs) = objects {
            if !objs.contains(&block) {
                return Err(PddlError::Semantic(format!(
                    "undeclared block `{block}` in ({pred} ...)"
                )));
            }
        }
        args.push(block);
    }
    let got = args.len();
    let arity = |n: usize| -> Result<(), PddlError> {
        if got == n {
            Ok(())
        } else {
            Err(PddlError::Semantic(format!(
                "predicate `{pred}` takes {n} argument(s), got {got}"
            )))
        }
    };
    let mut args = args.into_iter();
    match pred.as_str() {
        "on" => {
            arity(2)?;
            Atom::on(args.next().unwrap(), args.next().unwrap())
        }
        "on-table" | "ontable" => {
            arity(1)?;
            Ok(Atom::OnTable(args.next().unwrap()))
        }
        "clear" => {
            arity(1)?;
            Ok(Atom::Clear(args.next().unwrap()))
        }
        "holding" => {
            arity(1)?;
            Ok(Atom::Holding(args.next().unwrap()))
        }
        "arm-empty" | "armempty" | "handempty" => {
            arity(0)?;
            Ok(Atom::ArmEmpty)
        }
        other => Err(PddlError::Semantic(format!("unknown predicate `{other}`"))),
    }
}

/// Parses the problem fragment. Errors carry 1-based line/column positions.
pub fn parse_problem(text: &str) -> Result<Problem, PddlError> {
    let top = parse_sexprs(text)?;
    let define = match top.as_slice() {
        [one] => one,
        [] => return Err(syntax(1, 1, "`(define ...)`")),
        [_, second, ..] => {
            let (l, c) = second.pos();
            return Err(syntax(l, c, "end of input after `(define ...)`"));
        }
    };
    let items = keyword_section(define, "define")?;
    let mut sections = items.iter();

    let header = sections
        .next()
        .ok_or_else(|| syntax(define.pos().0, define.pos().1, "`(problem NAME)`"))?;
    let header_items = keyword_section(header, "problem")?;
    let name = match header_items {
        [n] => expect_sym(n, "a problem name")?.to_string(),
        _ => {
            let (l, c) = header.pos();
            return Err(syntax(l, c, "`(problem NAME)`"));
        }
    };

    let mut domain_name = None;
    let mut objects: Option<Vec<Block>> = None;
    let mut init_sexps: Option<&[Sexp]> = None;
    let mut goal_sexp: Option<&[Sexp]> = None;
    for section in sections {
        let parts = expect_list(section, "a `(:section ...)`")?;
        let key = parts
            .first()
            .and_then(Sexp::sym)
            .map(str::to_ascii_lowercase)
            .ok_or_else(|| {
                let (l, c) = section.pos();
                syntax(l, c + 1, "a section keyword")
            })?;
        let body = &parts[1..];
        let duplicate = |done: bool| -> Result<(), PddlError> {
            if done {
                Err(PddlError::Semantic(format!("duplicate `{key}` section")))
            } else {
                Ok(())
            }
        };
        match key.as_str() {
            ":domain" => {
                duplicate(domain_name.is_some())?;
                match body {
                    [d] => domain_name = Some(expect_sym(d, "a domain name")?.to_string()),
                    _ => {
                        let (l, c) = section.pos();
                        return Err(syntax(l, c, "`(:domain NAME)`"));
                    }
                }
            }
            ":objects" => {
                duplicate(objects.is_some())?;
                let mut objs: Vec<Block> = Vec::new();
                for o in body {
                    let b = Block::new(expect_sym(o, "an object name")?)?;
                    if objs.contains(&b) {
                        return Err(PddlError::Semantic(format!("duplicate object `{b}`")));
                    }
                    objs.push(b);
                }
                objects = Some(objs);
            }
            ":init" => {
                duplicate(init_sexps.is_some())?;
                init_sexps = Some(body);
            }
            ":goal" => {
                duplicate(goal_sexp.is_some())?;
                goal_sexp = Some(body);
            }
            other => return Err(PddlError::Semantic(format!("unsupported section `{other}`"))),
        }
    }

    let objects = objects.ok_or_else(|| PddlError::Semantic("missing `:objects`".into()))?;
    let domain_name = domain_name.ok_or_else(|| PddlError::Semantic("missing `:domain`".into()))?;
    let init = init_sexps
        .ok_or_else(|| PddlError::Semantic("missing `:init`".into()))?
        .iter()
        .map(|s| atom_from_sexp(s, Some(&objects)))
        .collect::<Result<Vec<_>, _>>()?;

    let goal_body = goal_sexp.ok_or_else(|| PddlError::Semantic("missing `:goal`".into()))?;
    let goal_atoms = match goal_body {
        [single] => {
            let items = expect_list(single, "a goal formula")?;
            let is_and = items
                .first()
                .and_then(Sexp::sym)
                .is_some_and(|s| s.eq_ignore_ascii_case("and"));
            if is_and {
                items[1..]
                    .iter()
                    .map(|s| atom_from_sexp(s, Some(&objects)))
                    .collect::<Result<Vec<_>, _>>()?
            } else {
                vec![atom_from_sexp(single, Some(&objects))?]
            }
        }
        _ => return Err(PddlError::Semantic("`:goal` takes exactly one formula".into())),
    };
    let goal = GoalSpec::new(goal_atoms)?;

    Ok(Problem {
        name,
        domain_name,
        objects,
        init,
        goal,
    })
}

impl std::str::FromStr for Problem {
    type Err = PddlError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_problem(s)
    }
}
