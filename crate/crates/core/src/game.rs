//! Rock-paper-scissors with and without foreknowledge of the opponent.
//!
//! Bob draws every hand independently from a fixed mix. Alice either plays
//! a mix of her own without seeing Bob's hands (annealed: the expectation is
//! taken before she optimizes) or sees Bob's whole set in advance and
//! optimizes against the realization (quenched: she optimizes first and the
//! score is averaged afterwards). Constraints on Alice:
//!
//! * `None`: any hand in any round.
//! * `EqualCounts`: each hand exactly `rounds / 3` times per set.
//! * `SameHandEachSet`: one hand for all rounds of a set, re-chosen per set.
//!
//! The score is +1 per win, −1 per loss and 0 per tie.

use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::keyed_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hand {
    Rock = 0,
    Paper = 1,
    Scissors = 2,
}

impl Hand {
    pub const ALL: [Hand; 3] = [Hand::Rock, Hand::Paper, Hand::Scissors];

    fn from_index(i: usize) -> Hand {
        Hand::ALL[i]
    }
}

/// Score for playing `a` against `b`.
pub fn payoff(a: Hand, b: Hand) -> i64 {
    match (a as i64 - b as i64).rem_euclid(3) {
        0 => 0,
        1 => 1,
        _ => -1,
    }
}

/// Probabilities of rock, paper and scissors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mix {
    probs: [f64; 3],
}

impl Mix {
    pub fn new(rock: f64, paper: f64, scissors: f64) -> Result<Self> {
        let probs = [rock, paper, scissors];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::domain(format!(
                "mix entries must lie in [0, 1]: {probs:?}"
            )));
        }
        if (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("mix must sum to 1: {probs:?}")));
        }
        Ok(Mix { probs })
    }

    pub fn uniform() -> Self {
        Mix {
            probs: [1.0 / 3.0; 3],
        }
    }

    /// Always plays `hand`.
    pub fn pure(hand: Hand) -> Self {
        let mut probs = [0.0; 3];
        probs[hand as usize] = 1.0;
        Mix { probs }
    }

    pub fn prob(&self, hand: Hand) -> f64 {
        self.probs[hand as usize]
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> Hand {
        let u: f64 = rng.random();
        if u < self.probs[0] {
            Hand::Rock
        } else if u < self.probs[0] + self.probs[1] {
            Hand::Paper
        } else {
            Hand::Scissors
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Knowledge {
    Annealed,
    Quenched,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    None,
    EqualCounts,
    SameHandEachSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub bob_mix: Mix,
    /// Rounds per set.
    pub rounds: u32,
    pub knowledge: Knowledge,
    pub constraint: Constraint,
    pub sets: u32,
}

impl GameSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::config("rounds", "must be positive"));
        }
        if self.sets == 0 {
            return Err(Error::config("sets", "must be positive"));
        }
        if self.constraint == Constraint::EqualCounts && !self.rounds.is_multiple_of(3) {
            return Err(Error::Constraint(format!(
                "equal counts need rounds divisible by 3, got {}",
                self.rounds
            )));
        }
        Ok(())
    }

    fn total_rounds(&self) -> f64 {
        self.rounds as f64 * self.sets as f64
    }
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
}

/// Expected score of `alice_mix` against Bob's mix over all rounds of all sets.
pub fn expected_score_annealed(alice_mix: &Mix, spec: &GameSpec) -> Result<f64> {
    if spec.knowledge != Knowledge::Annealed {
        return Err(Error::domain("annealed score needs annealed knowledge"));
    }
    spec.validate()?;
    Ok(spec.total_rounds() * per_round(alice_mix, &spec.bob_mix))
}

fn per_round(alice: &Mix, bob: &Mix) -> f64 {
    let mut s = 0.0;
    for a in Hand::ALL {
        for b in Hand::ALL {
            s += alice.prob(a) * bob.prob(b) * payoff(a, b) as f64;
        }
    }
    s
}

/// Best annealed expectation achievable under the game's constraint.
///
/// Without constraint, or with one hand per set, the optimum of the linear
/// objective sits on a vertex (a pure hand). Equal counts pin Alice's
/// per-round marginal to the uniform mix.
pub fn best_annealed_score(spec: &GameSpec) -> Result<f64> {
    spec.validate()?;
    let per = match spec.constraint {
        Constraint::None | Constraint::SameHandEachSet => Hand::ALL
            .iter()
            .map(|&h| per_round(&Mix::pure(h), &spec.bob_mix))
            .fold(f64::NEG_INFINITY, f64::max),
        Constraint::EqualCounts => per_round(&Mix::uniform(), &spec.bob_mix),
    };
    Ok(spec.total_rounds() * per)
}

/// Monte Carlo estimate of Alice's score when she sees each set in advance.
///
/// Trial `t` draws Bob's hands from the ChaCha stream `(seed, t)`, so the
/// estimate is a deterministic function of `(spec, n_trials, seed)`.
pub fn expected_score_quenched(spec: &GameSpec, n_trials: u64, seed: u64) -> Result<McEstimate> {
    if spec.knowledge != Knowledge::Quenched {
        return Err(Error::domain("quenched score needs quenched knowledge"));
    }
    spec.validate()?;
    if n_trials < 2 {
        return Err(Error::config("trials", "need at least 2 trials"));
    }
    let third = spec.rounds / 3;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for t in 0..n_trials {
        let mut rng = keyed_rng(seed, t);
        let mut score = 0i64;
        for _ in 0..spec.sets {
            let mut counts = [0u32; 3];
            for _ in 0..spec.rounds {
                counts[spec.bob_mix.draw(&mut rng) as usize] += 1;
            }
            score += match spec.constraint {
                Constraint::None => unconstrained_best(counts),
                Constraint::SameHandEachSet => best_single_hand(counts),
                Constraint::EqualCounts => best_assignment([third; 3], counts),
            };
        }
        let s = score as f64;
        sum += s;
        sum_sq += s * s;
    }
    let n = n_trials as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(McEstimate {
        mean,
        stderr: (var / n).sqrt(),
        trials: n_trials,
    })
}

/// Outcome of comparing quenched and annealed play under one constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameCheck {
    pub quenched: McEstimate,
    pub annealed_best: f64,
    pub passed: bool,
}

/// Checks `E[max] ≥ max E` up to three standard errors.
pub fn quenched_geq_annealed_check(spec: &GameSpec, n_trials: u64, seed: u64) -> Result<GameCheck> {
    let quenched_spec = GameSpec {
        knowledge: Knowledge::Quenched,
        ..*spec
    };
    let quenched = expected_score_quenched(&quenched_spec, n_trials, seed)?;
    let annealed_best = best_annealed_score(spec)?;
    Ok(GameCheck {
        quenched,
        annealed_best,
        passed: quenched.mean >= annealed_best - 3.0 * quenched.stderr,
    })
}

fn unconstrained_best(bob: [u32; 3]) -> i64 {
    Hand::ALL
        .iter()
        .map(|&b| {
            let best = Hand::ALL.iter().map(|&a| payoff(a, b)).max().unwrap();
            best * bob[b as usize] as i64
        })
        .sum()
}

/// Best score with one hand held against the whole set.
pub fn best_single_hand(bob: [u32; 3]) -> i64 {
    Hand::ALL
        .iter()
        .map(|&a| {
            Hand::ALL
                .iter()
                .map(|&b| payoff(a, b) * bob[b as usize] as i64)
                .sum::<i64>()
        })
        .max()
        .unwrap()
}

/// Optimal score when Alice must spend exactly `alice[a]` of each hand
/// against Bob's realized counts.
///
/// This is a 3×3 transportation problem. Its optimum is attained at a vertex
/// of the transport polytope, and every vertex is the unique flow supported
/// on a spanning tree of the complete bipartite graph K₃,₃. The 81 spanning
/// trees are enumerated; infeasible (negative) flows are discarded.
pub fn best_assignment(alice: [u32; 3], bob: [u32; 3]) -> i64 {
    assert_eq!(
        alice.iter().sum::<u32>(),
        bob.iter().sum::<u32>(),
        "both players must play the same number of rounds"
    );
    let supply: [i64; 6] = [
        alice[0] as i64,
        alice[1] as i64,
        alice[2] as i64,
        -(bob[0] as i64),
        -(bob[1] as i64),
        -(bob[2] as i64),
    ];
    let mut best = i64::MIN;
    for tree in spanning_trees() {
        if let Some(flow) = tree_flow(tree, supply) {
            let score: i64 = tree
                .iter()
                .zip(flow)
                .map(|(&e, f)| payoff(Hand::from_index(e / 3), Hand::from_index(e % 3)) * f)
                .sum();
            best = best.max(score);
        }
    }
    best
}

/// Edge `e` joins Alice's hand `e / 3` (node `e / 3`) to Bob's hand `e % 3`
/// (node `3 + e % 3`).
fn endpoints(e: usize) -> (usize, usize) {
    (e / 3, 3 + e % 3)
}

fn spanning_trees() -> &'static [[usize; 5]] {
    static TREES: OnceLock<Vec<[usize; 5]>> = OnceLock::new();
    TREES.get_or_init(|| {
        let mut out = Vec::new();
        for mask in 0u32..(1 << 9) {
            if mask.count_ones() != 5 {
                continue;
            }
            let edges: Vec<usize> = (0..9).filter(|e| mask & (1 << e) != 0).collect();
            // five edges on six nodes without a cycle span the graph
            let mut parent: [usize; 6] = [0, 1, 2, 3, 4, 5];
            fn find(p: &mut [usize; 6], mut x: usize) -> usize {
                while p[x] != x {
                    p[x] = p[p[x]];
                    x = p[x];
                }
                x
            }
            let acyclic = edges.iter().all(|&e| {
                let (u, v) = endpoints(e);
                let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
                parent[ru] = rv;
                ru != rv
            });
            if acyclic {
                out.push([edges[0], edges[1], edges[2], edges[3], edges[4]]);
            }
        }
        out
    })
}

/// The unique flow on `tree` meeting the node balances, if non-negative.
fn tree_flow(tree: &[usize; 5], mut balance: [i64; 6]) -> Option<[i64; 5]> {
    let mut flow = [0i64; 5];
    let mut used = [false; 5];
    for _ in 0..5 {
        // a leaf: a node touched by exactly one unused edge
        let (k, leaf) = (0..6).find_map(|node| {
            let mut touching = (0..5).filter(|&k| {
                let (u, v) = endpoints(tree[k]);
                !used[k] && (u == node || v == node)
            });
            match (touching.next(), touching.next()) {
                (Some(k), None) => Some((k, node)),
                _ => None,
            }
        })?;
        let (u, v) = endpoints(tree[k]);
        // flow runs from Alice node u to Bob node v
        let f = if leaf == u { balance[u] } else { -balance[v] };
        if f < 0 {
            return None;
        }
        flow[k] = f;
        balance[u] -= f;
        balance[v] += f;
        used[k] = true;
    }
    balance.iter().all(|&b| b == 0).then_some(flow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(
        bob: Mix,
        rounds: u32,
        knowledge: Knowledge,
        constraint: Constraint,
        sets: u32,
    ) -> GameSpec {
        GameSpec {
            bob_mix: bob,
            rounds,
            knowledge,
            constraint,
            sets,
        }
    }

    /// Exhaustive search over integer 3×3 transport matrices with the given margins.
    fn brute_assignment(alice: [u32; 3], bob: [u32; 3]) -> i64 {
        let (a, b) = (alice.map(|v| v as i64), bob.map(|v| v as i64));
        let mut best = i64::MIN;
        for x00 in 0..=a[0] {
            for x01 in 0..=a[0] - x00 {
                for x10 in 0..=a[1] {
                    for x11 in 0..=a[1] - x10 {
                        let x = [
                            [x00, x01, a[0] - x00 - x01],
                            [x10, x11, a[1] - x10 - x11],
                            [b[0] - x00 - x10, b[1] - x01 - x11, 0],
                        ];
                        let x22 = a[2] - x[2][0] - x[2][1];
                        let x = [x[0], x[1], [x[2][0], x[2][1], x22]];
                        if x.iter().flatten().any(|&v| v < 0) || x[0][2] + x[1][2] + x22 != b[2] {
                            continue;
                        }
                        let s: i64 = (0..3)
                            .flat_map(|i| (0..3).map(move |j| (i, j)))
                            .map(|(i, j)| {
                                payoff(Hand::from_index(i), Hand::from_index(j)) * x[i][j]
                            })
                            .sum();
                        best = best.max(s);
                    }
                }
            }
        }
        best
    }

    #[test]
    fn payoff_table() {
        use Hand::*;
        assert_eq!(payoff(Paper, Rock), 1);
        assert_eq!(payoff(Rock, Scissors), 1);
        assert_eq!(payoff(Scissors, Paper), 1);
        for a in Hand::ALL {
            assert_eq!(payoff(a, a), 0);
            for b in Hand::ALL {
                assert_eq!(payoff(a, b), -payoff(b, a));
            }
        }
    }

    #[test]
    fn there_are_81_spanning_trees() {
        assert_eq!(spanning_trees().len(), 81);
    }

    #[test]
    fn annealed_reference_scores() {
        let s = spec(
            Mix::uniform(),
            300,
            Knowledge::Annealed,
            Constraint::None,
            1,
        );
        assert_eq!(expected_score_annealed(&Mix::uniform(), &s).unwrap(), 0.0);
        assert_eq!(
            expected_score_annealed(&Mix::pure(Hand::Rock), &s).unwrap(),
            0.0
        );
        let bob = Mix::new(2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0).unwrap();
        let s = spec(bob, 300, Knowledge::Annealed, Constraint::None, 1);
        assert_eq!(
            expected_score_annealed(&Mix::pure(Hand::Paper), &s).unwrap(),
            150.0
        );
        assert_eq!(expected_score_annealed(&bob, &s).unwrap(), 0.0);
        assert_eq!(best_annealed_score(&s).unwrap(), 150.0);
        let q = GameSpec {
            knowledge: Knowledge::Quenched,
            ..s
        };
        assert!(expected_score_annealed(&Mix::uniform(), &q).is_err());
    }

    #[test]
    fn annealed_optimum_is_a_vertex() {
        let bob = Mix::new(0.5, 0.2, 0.3).unwrap();
        let s = spec(bob, 30, Knowledge::Annealed, Constraint::None, 1);
        let vertex = best_annealed_score(&s).unwrap();
        let mut grid_best = f64::NEG_INFINITY;
        for i in 0..=50 {
            for j in 0..=50 - i {
                let m = Mix::new(i as f64 / 50.0, j as f64 / 50.0, (50 - i - j) as f64 / 50.0)
                    .unwrap_or_else(|_| Mix::pure(Hand::Scissors));
                grid_best = grid_best.max(expected_score_annealed(&m, &s).unwrap());
            }
        }
        assert!(grid_best <= vertex + 1e-12);
        assert!((grid_best - vertex).abs() < 1e-9);
    }

    #[test]
    fn equal_counts_need_divisible_rounds() {
        let s = spec(
            Mix::uniform(),
            100,
            Knowledge::Quenched,
            Constraint::EqualCounts,
            1,
        );
        assert!(matches!(
            expected_score_quenched(&s, 10, 1),
            Err(Error::Constraint(_))
        ));
    }

    #[test]
    fn unconstrained_foreknowledge_wins_every_round() {
        let s = spec(
            Mix::uniform(),
            300,
            Knowledge::Quenched,
            Constraint::None,
            1,
        );
        let est = expected_score_quenched(&s, 500, 3).unwrap();
        assert_eq!((est.mean, est.stderr), (300.0, 0.0));
    }

    #[test]
    fn assignment_simple_cases() {
        // Bob plays only rock: Alice wins with her paper, ties with rock, loses with scissors
        assert_eq!(best_assignment([2, 2, 2], [6, 0, 0]), 0);
        assert_eq!(best_assignment([2, 2, 2], [2, 2, 2]), 6);
        assert_eq!(best_assignment([0, 3, 0], [3, 0, 0]), 3);
    }

    #[test]
    fn quenched_is_deterministic() {
        let s = spec(
            Mix::uniform(),
            30,
            Knowledge::Quenched,
            Constraint::EqualCounts,
            2,
        );
        assert_eq!(
            expected_score_quenched(&s, 200, 9).unwrap(),
            expected_score_quenched(&s, 200, 9).unwrap()
        );
    }

    #[test]
    fn quenched_beats_annealed_in_every_mode() {
        for constraint in [
            Constraint::None,
            Constraint::EqualCounts,
            Constraint::SameHandEachSet,
        ] {
            for bob in [
                Mix::uniform(),
                Mix::new(2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0).unwrap(),
            ] {
                let s = spec(bob, 30, Knowledge::Annealed, constraint, 2);
                let check = quenched_geq_annealed_check(&s, 2000, 5).unwrap();
                assert!(check.passed, "{constraint:?}: {check:?}");
            }
        }
    }

    proptest! {
        #[test]
        fn tree_enumeration_matches_brute_force(
            alice in proptest::array::uniform3(0u32..6),
            split in proptest::array::uniform2(0.0f64..1.0),
        ) {
            let total: u32 = alice.iter().sum();
            let b0 = (split[0] * total as f64).floor() as u32;
            let b1 = ((total - b0) as f64 * split[1]).floor() as u32;
            let bob = [b0, b1, total - b0 - b1];
            prop_assert_eq!(best_assignment(alice, bob), brute_assignment(alice, bob));
        }
    }
}
