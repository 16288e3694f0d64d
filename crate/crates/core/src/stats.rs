//! Pairwise-judgment aggregation and significance tests.
//!
//! Two judges compare set A (ground truth) with set B (generated) per task.
//! Agreement is a win for the chosen side; disagreement is a tie. The
//! trinomial test then asks whether wins and losses differ given the
//! observed tie rate.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default significance level.
pub const DEFAULT_ALPHA: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("no comparisons (n = 0)")]
    ZeroN,
    #[error("empty sample")]
    EmptyInput,
    #[error("permutation count must be positive")]
    NoPermutations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Coherency,
    Quality,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Coherency => "coherency",
            Criterion::Quality => "quality",
        })
    }
}

impl FromStr for Criterion {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "coherency" => Ok(Criterion::Coherency),
            "quality" => Ok(Criterion::Quality),
            other => Err(format!("unknown criterion {other:?} (expected coherency|quality)")),
        }
    }
}

/// A judge's preference after resolving screen sides to sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preference {
    /// Set A, the ground truth.
    A,
    /// Set B, the generated set.
    B,
}

/// All judgments on one task, resolved to A/B.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedComparison {
    pub task_id: String,
    pub criterion: Criterion,
    pub choices: Vec<Preference>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseCounts {
    pub wins_a: u64,
    pub ties: u64,
    pub wins_b: u64,
    pub criterion: Criterion,
}

impl PairwiseCounts {
    pub fn new(wins_a: u64, ties: u64, wins_b: u64, criterion: Criterion) -> Self {
        Self { wins_a, ties, wins_b, criterion }
    }

    pub fn n(&self) -> u64 {
        self.wins_a + self.ties + self.wins_b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregation {
    pub counts: PairwiseCounts,
    /// Tasks without exactly two judgments; excluded from the counts.
    pub incomplete: Vec<String>,
}

/// Folds two-judge tasks into win/tie/loss counts for one criterion.
/// Tasks for other criteria are ignored.
pub fn aggregate_pairwise(comparisons: &[ResolvedComparison], criterion: Criterion) -> Aggregation {
    let mut counts = PairwiseCounts::new(0, 0, 0, criterion);
    let mut incomplete = Vec::new();
    for c in comparisons.iter().filter(|c| c.criterion == criterion) {
        match c.choices.as_slice() {
            [Preference::A, Preference::A] => counts.wins_a += 1,
            [Preference::B, Preference::B] => counts.wins_b += 1,
            [_, _] => counts.ties += 1,
            _ => incomplete.push(c.task_id.clone()),
        }
    }
    Aggregation { counts, incomplete }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrinomialResult {
    /// wins_a - wins_b
    pub n_d: i64,
    pub p_value: f64,
    /// Plug-in tie probability, ties / n.
    pub p0: f64,
}

impl TrinomialResult {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    table.push(acc);
    for k in 1..=n {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

/// `count * ln(p)` with the convention 0 * ln(0) = 0.
fn weighted_ln(count: usize, p: f64) -> f64 {
    if count == 0 {
        0.0
    } else {
        count as f64 * p.ln()
    }
}

/// Multinomial probability of (wins, ties, losses) under
/// (p_win, p_tie, p_loss), in log space.
pub fn trinomial_pmf(wins: usize, ties: usize, losses: usize, p_win: f64, p_tie: f64, p_loss: f64) -> f64 {
    let lf = ln_factorials(wins + ties + losses);
    pmf_with(&lf, wins, ties, losses, p_win, p_tie, p_loss)
}

fn pmf_with(lf: &[f64], w: usize, t: usize, l: usize, pw: f64, pt: f64, pl: f64) -> f64 {
    let ln = lf[w + t + l] - lf[w] - lf[t] - lf[l]
        + weighted_ln(w, pw)
        + weighted_ln(t, pt)
        + weighted_ln(l, pl);
    ln.exp()
}

/// Exact two-sided trinomial test.
///
/// Ties are estimated as p0 = ties / n and wins and losses share the rest
/// equally under the null. The p-value is P(|W - L| >= |n_d|), summed over
/// every (w, t, l) with w + t + l = n.
pub fn trinomial_pvalue(counts: &PairwiseCounts) -> Result<TrinomialResult, StatsError> {
    let n = counts.n() as usize;
    if n == 0 {
        return Err(StatsError::ZeroN);
    }
    let n_d = counts.wins_a as i64 - counts.wins_b as i64;
    let p0 = counts.ties as f64 / n as f64;
    if n_d == 0 {
        return Ok(TrinomialResult { n_d, p_value: 1.0, p0 });
    }
    let half = (1.0 - p0) / 2.0;
    let threshold = n_d.unsigned_abs() as usize;
    let lf = ln_factorials(n);
    let mut p_value = 0.0;
    for w in 0..=n {
        for l in 0..=n - w {
            if w.abs_diff(l) >= threshold {
                p_value += pmf_with(&lf, w, n - w - l, l, half, p0, half);
            }
        }
    }
    Ok(TrinomialResult { n_d, p_value: p_value.min(1.0), p0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsetTest {
    pub mean_a: f64,
    pub mean_b: f64,
    pub observed_diff: f64,
    pub permutations: usize,
    pub p_value: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Two-sided permutation test on the difference of means.
///
/// Permutation `k` shuffles the pooled sample with a generator on stream
/// `k` of the seeded ChaCha8 source, so the result does not depend on the
/// number of worker threads. p = (1 + #{|perm diff| >= |observed|}) /
/// (permutations + 1).
pub fn subset_significance(
    values_a: &[f64],
    values_b: &[f64],
    permutations: usize,
    seed: u64,
) -> Result<SubsetTest, StatsError> {
    if values_a.is_empty() || values_b.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if permutations == 0 {
        return Err(StatsError::NoPermutations);
    }
    let mean_a = mean(values_a);
    let mean_b = mean(values_b);
    let observed = (mean_a - mean_b).abs();
    let scale = values_a.iter().chain(values_b).fold(1.0f64, |m, v| m.max(v.abs()));
    let tolerance = 1e-12 * scale;

    let pooled: Vec<f64> = values_a.iter().chain(values_b).copied().collect();
    let split = values_a.len();
    let extreme: usize = (0..permutations as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let mut sample = pooled.clone();
            sample.shuffle(&mut rng);
            let diff = (mean(&sample[..split]) - mean(&sample[split..])).abs();
            usize::from(diff >= observed - tolerance)
        })
        .sum();

    Ok(SubsetTest {
        mean_a,
        mean_b,
        observed_diff: mean_a - mean_b,
        permutations,
        p_value: (1 + extreme) as f64 / (permutations + 1) as f64,
    })
}

/// Text table of win/tie/loss percentages with trinomial p-values; a dagger
/// marks p < alpha.
pub fn format_pairwise_table(rows: &[(PairwiseCounts, TrinomialResult)], alpha: f64) -> String {
    let mut out = String::from("criterion\tn\twins_a_pct\ttie_pct\twins_b_pct\tp_value\tsignificant\n");
    for (c, r) in rows {
        let n = c.n() as f64;
        let pct = |x: u64| 100.0 * x as f64 / n;
        out.push_str(&format!(
            "{}\t{}\t{:.1}\t{:.1}\t{:.1}\t{:.4e}\t{}\n",
            c.criterion,
            c.n(),
            pct(c.wins_a),
            pct(c.ties),
            pct(c.wins_b),
            r.p_value,
            if r.significant(alpha) { "\u{2020}" } else { "" },
        ));
    }
    out
}
