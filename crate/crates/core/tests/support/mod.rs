//! Test-only reference model, written without the library's state or
//! transition code: a state is a sorted list of towers plus the hand, and
//! moves are enumerated directly from tower tops.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, VecDeque};

use plancegis::{Action, Atom, Plan, Problem};
use rand::seq::IndexedRandom;
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Towers {
    /// Bottom first, sorted by bottom block.
    pub towers: Vec<Vec<String>>,
    pub hand: Option<String>,
}

impl Towers {
    fn canon(mut self) -> Self {
        self.towers.retain(|t| !t.is_empty());
        self.towers.sort();
        self
    }

    /// Builds the state from placement atoms; `None` if they do not describe
    /// a single configuration.
    pub fn from_init(problem: &Problem) -> Option<Towers> {
        let mut below: HashMap<String, String> = HashMap::new();
        let mut bottoms = Vec::new();
        let mut hand = None;
        for atom in &problem.init {
            match atom {
                Atom::On(a, b) => {
                    below.insert(a.as_str().into(), b.as_str().into());
                }
                Atom::OnTable(a) => bottoms.push(a.as_str().to_string()),
                Atom::Holding(a) => hand = Some(a.as_str().to_string()),
                _ => {}
            }
        }
        let mut towers = Vec::new();
        for bottom in bottoms {
            let mut tower = vec![bottom];
            loop {
                let top = tower.last().unwrap().clone();
                let next: Vec<&String> = below.iter().filter(|(_, b)| **b == top).map(|(a, _)| a).collect();
                match next.as_slice() {
                    [] => break,
                    [one] => tower.push((*one).clone()),
                    _ => return None,
                }
            }
            towers.push(tower);
        }
        let placed: usize = towers.iter().map(Vec::len).sum::<usize>() + hand.iter().count();
        (placed == problem.objects.len()).then(|| Towers { towers, hand }.canon())
    }

    /// Every legal move and its result.
    pub fn moves(&self) -> Vec<(Action, Towers)> {
        let mut out = Vec::new();
        let blk = |s: &str| plancegis::Block::new(s).unwrap();
        match &self.hand {
            None => {
                for (i, t) in self.towers.iter().enumerate() {
                    let mut next = self.clone();
                    let top = next.towers[i].pop().unwrap();
                    next.hand = Some(top.clone());
                    let action = if t.len() == 1 {
                        Action::PickUp(blk(&top))
                    } else {
                        Action::Unstack(blk(&top), blk(&t[t.len() - 2]))
                    };
                    out.push((action, next.canon()));
                }
            }
            Some(h) => {
                let mut down = self.clone();
                down.hand = None;
                down.towers.push(vec![h.clone()]);
                out.push((Action::PutDown(blk(h)), down.canon()));
                for (i, t) in self.towers.iter().enumerate() {
                    let mut next = self.clone();
                    next.hand = None;
                    next.towers[i].push(h.clone());
                    out.push((Action::Stack(blk(h), blk(t.last().unwrap())), next.canon()));
                }
            }
        }
        out
    }

    pub fn holds(&self, atom: &Atom) -> bool {
        let pos = |b: &str| {
            self.towers
                .iter()
                .find_map(|t| t.iter().position(|x| x == b).map(|i| (t, i)))
        };
        match atom {
            Atom::On(a, b) => matches!(pos(a.as_str()), Some((t, i)) if i > 0 && t[i - 1] == b.as_str()),
            Atom::OnTable(a) => matches!(pos(a.as_str()), Some((_, 0))),
            Atom::Clear(a) => matches!(pos(a.as_str()), Some((t, i)) if i + 1 == t.len()),
            Atom::Holding(a) => self.hand.as_deref() == Some(a.as_str()),
            Atom::ArmEmpty => self.hand.is_none(),
        }
    }
}

/// All states reachable from `start`.
pub fn reachable(start: &Towers) -> BTreeSet<Towers> {
    let mut seen = BTreeSet::from([start.clone()]);
    let mut queue = VecDeque::from([start.clone()]);
    while let Some(s) = queue.pop_front() {
        for (_, n) in s.moves() {
            if seen.insert(n.clone()) {
                queue.push_back(n);
            }
        }
    }
    seen
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleVerdict {
    Valid,
    /// 1-based step of the first move that is not an edge of the state graph.
    Infeasible(usize),
    GoalUnsatisfied,
}

/// Replays `plan` along the reachable-state graph.
pub fn path_replay(problem: &Problem, plan: &Plan, graph: &BTreeSet<Towers>) -> OracleVerdict {
    let mut state = Towers::from_init(problem).expect("consistent init");
    for (i, action) in plan.actions.iter().enumerate() {
        let next = state.moves().into_iter().find(|(a, _)| a == action).map(|(_, s)| s);
        match next {
            Some(s) => {
                assert!(graph.contains(&s), "successor outside the reachable set");
                state = s;
            }
            None => return OracleVerdict::Infeasible(i + 1),
        }
    }
    if problem.goal.atoms().iter().all(|a| state.holds(a)) {
        OracleVerdict::Valid
    } else {
        OracleVerdict::GoalUnsatisfied
    }
}

pub fn random_action(objects: &[plancegis::Block], rng: &mut impl Rng) -> Action {
    let a = objects.choose(rng).unwrap().clone();
    let b = objects.choose(rng).unwrap().clone();
    match rng.random_range(0..4) {
        0 => Action::PickUp(a),
        1 => Action::PutDown(a),
        2 if a != b => Action::Stack(a, b),
        3 if a != b => Action::Unstack(a, b),
        _ => Action::PickUp(a),
    }
}

/// A random walk of legal moves, for plans that are feasible but usually
/// miss the goal.
pub fn random_walk(problem: &Problem, len: usize, rng: &mut impl Rng) -> Plan {
    let mut state = Towers::from_init(problem).unwrap();
    let mut actions = Vec::new();
    for _ in 0..len {
        let moves = state.moves();
        let (a, s) = moves.choose(rng).unwrap().clone();
        actions.push(a);
        state = s;
    }
    Plan::new(actions)
}

/// One mutation: replace, insert, delete or swap a step.
pub fn mutate(plan: &Plan, objects: &[plancegis::Block], rng: &mut impl Rng) -> Plan {
    let mut actions = plan.actions.clone();
    let n = actions.len();
    match rng.random_range(0..4) {
        0 if n > 0 => {
            let i = rng.random_range(0..n);
            actions[i] = random_action(objects, rng);
        }
        1 => {
            let i = rng.random_range(0..=n);
            actions.insert(i, random_action(objects, rng));
        }
        2 if n > 0 => {
            actions.remove(rng.random_range(0..n));
        }
        _ if n > 1 => {
            let i = rng.random_range(0..n - 1);
            actions.swap(i, i + 1);
        }
        _ => actions.push(random_action(objects, rng)),
    }
    Plan::new(actions)
}

/// Number of configurations of `n` labelled blocks (arm empty) plus those
/// with one block held: a(n) + n * a(n-1), where a(n) = sum_k L(n, k).
pub fn state_count(n: usize) -> usize {
    fn arrangements(n: usize) -> usize {
        // a(0) = 1, a(n) = sum_k C(n-1, k-1) n!/k!
        if n == 0 {
            return 1;
        }
        let fact = |m: usize| (1..=m).product::<usize>();
        let binom = |a: usize, b: usize| fact(a) / (fact(b) * fact(a - b));
        (1..=n).map(|k| binom(n - 1, k - 1) * fact(n) / fact(k)).sum()
    }
    arrangements(n) + if n > 0 { n * arrangements(n - 1) } else { 0 }
}

/// 200 seeded problems of 1 to 4 blocks with 10 candidate plans each:
/// the reference plan, three mutations of it, two random walks, one mutated
/// walk and three random action strings.
pub fn equivalence_corpus() -> Vec<(Problem, Vec<Plan>)> {
    use plancegis::bench::{gen_problem, reference_solve, GenConfig, GoalStyle};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..200)
        .map(|i| {
            let n = 1 + i % 4;
            let style = if i % 2 == 0 {
                GoalStyle::PartialAtoms
            } else {
                GoalStyle::FullTowers
            };
            let cfg = GenConfig {
                goal_style: style,
                ..GenConfig::new(n, 4040, 200)
            };
            let p = gen_problem(&cfg, i);
            let reference = reference_solve(&p).unwrap();
            let mut plans = vec![reference.clone()];
            for _ in 0..3 {
                plans.push(mutate(&reference, &p.objects, &mut rng));
            }
            for _ in 0..2 {
                let len = rng.random_range(1..=2 * n + 2);
                plans.push(random_walk(&p, len, &mut rng));
            }
            let walk = random_walk(&p, rng.random_range(1..=2 * n + 2), &mut rng);
            plans.push(mutate(&walk, &p.objects, &mut rng));
            for _ in 0..3 {
                let len = rng.random_range(1..=8);
                plans.push((0..len).map(|_| random_action(&p.objects, &mut rng)).collect());
            }
            (p, plans)
        })
        .collect()
}
