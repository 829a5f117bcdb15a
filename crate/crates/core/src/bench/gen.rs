//! Seeded random problem generation.
//!
//! Initial configurations are uniform over all arrangements of `n` labelled
//! blocks into towers: the tower count `k` is drawn with weight equal to the
//! Lah number `L(n, k)`, then a uniform permutation is cut at `k - 1` uniform
//! gap positions. Each `(permutation, cuts)` pair maps to one arrangement and
//! every arrangement has exactly `k!` preimages, so the result is uniform.
//! Goals are taken from a second independently drawn arrangement, which makes
//! every problem solvable by construction.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::pddl::{Atom, Block, GoalSpec, Problem, Support, WorldState};

pub const DOMAIN_NAME: &str = "blocksworld-4ops";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalStyle {
    FullTowers,
    #[default]
    PartialAtoms,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_blocks: usize,
    pub seed: u64,
    pub problem_count: usize,
    pub goal_style: GoalStyle,
}

impl GenConfig {
    pub fn new(n_blocks: usize, seed: u64, problem_count: usize) -> Self {
        GenConfig {
            n_blocks,
            seed,
            problem_count,
            goal_style: GoalStyle::default(),
        }
    }
}

pub fn block_names(n: usize) -> Vec<Block> {
    (1..=n).map(|i| Block::new(&format!("b{i}")).unwrap()).collect()
}

/// `L(n, k) = C(n-1, k-1) * n! / k!` for `k` in `1..=n`, as floating weights.
fn lah_weights(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    for k in 1..=n {
        // C(n-1, k-1) * n!/k! = C(n-1, k-1) * prod_{j=k+1..=n} j
        let mut binom = 1f64;
        for j in 0..(k - 1) {
            binom = binom * (n - 1 - j) as f64 / (j + 1) as f64;
        }
        let falling: f64 = ((k + 1)..=n).map(|j| j as f64).product();
        out.push(binom * falling);
    }
    out
}

/// A uniformly random arrangement of `blocks` into towers (bottom first).
pub fn random_towers(blocks: &[Block], rng: &mut impl Rng) -> Vec<Vec<Block>> {
    let n = blocks.len();
    if n == 0 {
        return Vec::new();
    }
    let k = WeightedIndex::new(lah_weights(n))
        .expect("Lah weights are positive")
        .sample(rng)
        + 1;
    let mut perm = blocks.to_vec();
    perm.shuffle(rng);
    let gaps: Vec<usize> = (1..n).collect();
    let mut cuts: Vec<usize> = gaps.choose_multiple(rng, k - 1).copied().collect();
    cuts.sort_unstable();
    let mut towers = Vec::with_capacity(k);
    let mut start = 0;
    for cut in cuts.into_iter().chain(std::iter::once(n)) {
        towers.push(perm[start..cut].to_vec());
        start = cut;
    }
    towers
}

pub fn state_from_towers(towers: &[Vec<Block>]) -> WorldState {
    let mut support = std::collections::BTreeMap::new();
    for tower in towers {
        for (i, b) in tower.iter().enumerate() {
            let s = if i == 0 {
                Support::Table
            } else {
                Support::On(tower[i - 1].clone())
            };
            support.insert(b.clone(), s);
        }
    }
    WorldState::from_support(support).expect("towers form a valid state")
}

/// Placement atoms of a complete configuration, ordered by block.
fn placement_atoms(state: &WorldState) -> Vec<Atom> {
    state
        .support_map()
        .iter()
        .filter_map(|(b, s)| match s {
            Support::Table => Some(Atom::OnTable(b.clone())),
            Support::On(x) => Some(Atom::On(b.clone(), x.clone())),
            Support::Hand => None,
        })
        .collect()
}

const GOAL_ATTEMPTS: usize = 256;

fn rng_for(config: &GenConfig, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    rng
}

/// The `index`-th problem of a generated set. Deterministic in
/// `(config.n_blocks, config.seed, config.goal_style, index)`.
pub fn gen_problem(config: &GenConfig, index: usize) -> Problem {
    let mut rng = rng_for(config, index);
    let blocks = block_names(config.n_blocks.max(1));
    let init = state_from_towers(&random_towers(&blocks, &mut rng));

    let mut goal_atoms = None;
    for _ in 0..GOAL_ATTEMPTS {
        let target = state_from_towers(&random_towers(&blocks, &mut rng));
        if target == init {
            continue;
        }
        let full = placement_atoms(&target);
        let atoms = match config.goal_style {
            GoalStyle::FullTowers => full,
            GoalStyle::PartialAtoms => {
                let picked: Vec<Atom> = full.into_iter().filter(|_| rng.random_bool(0.5)).collect();
                if picked.is_empty() || picked.iter().all(|a| init.satisfies(a)) {
                    continue;
                }
                picked
            }
        };
        goal_atoms = Some(atoms);
        break;
    }
    // Only a single block leaves no distinct configuration to aim for.
    let goal_atoms = goal_atoms.unwrap_or_else(|| placement_atoms(&init));
    let goal = GoalSpec::new(goal_atoms).expect("atoms of one configuration are consistent");
    let name = format!("BW-rand-{}-{}-{index}", config.n_blocks, config.seed);
    Problem::from_state(name, DOMAIN_NAME, &init, goal)
}

pub fn gen_problems(config: &GenConfig) -> Vec<Problem> {
    (0..config.problem_count).map(|i| gen_problem(config, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{print_problem, state_from_init, InitMode};
    use std::collections::HashMap;

    #[test]
    fn lah_weights_sum_to_arrangement_counts() {
        // 1, 3, 13, 73, 501: arrangements of n labelled blocks into towers
        let totals: Vec<f64> = (1..=5).map(|n| lah_weights(n).iter().sum()).collect();
        assert_eq!(totals, vec![1.0, 3.0, 13.0, 73.0, 501.0]);
    }

    #[test]
    fn arrangements_are_roughly_uniform() {
        let blocks = block_names(3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut counts: HashMap<WorldState, usize> = HashMap::new();
        let draws = 13_000;
        for _ in 0..draws {
            *counts
                .entry(state_from_towers(&random_towers(&blocks, &mut rng)))
                .or_default() += 1;
        }
        assert_eq!(counts.len(), 13);
        for c in counts.values() {
            assert!((800..1200).contains(c), "{counts:?}");
        }
    }

    #[test]
    fn single_block() {
        let p = gen_problem(&GenConfig::new(1, 5, 1), 0);
        assert_eq!(p.goal.atoms(), &[Atom::OnTable(Block::new("b1").unwrap())]);
    }

    #[test]
    fn generated_problems_are_strictly_consistent_and_deterministic() {
        for style in [GoalStyle::FullTowers, GoalStyle::PartialAtoms] {
            let cfg = GenConfig {
                goal_style: style,
                ..GenConfig::new(6, 42, 20)
            };
            let a = gen_problems(&cfg);
            let b = gen_problems(&cfg);
            assert_eq!(a, b);
            for p in &a {
                let reparsed = crate::pddl::parse_problem(&print_problem(p)).unwrap();
                state_from_init(&reparsed, InitMode::Strict).unwrap();
                assert!(!p.goal.satisfied_by(&p.initial_state().unwrap()));
            }
        }
    }
}
