use serde::{Deserialize, Serialize};

use super::porter;
use super::MetricError;
use crate::corpus::FacetSet;

const FRAG_GAMMA: f64 = 0.5;
const FRAG_BETA: f64 = 3.0;

/// Search budget for the exact token alignment; past it the greedy
/// alignment is used.
const ALIGN_NODE_BUDGET: usize = 200_000;

/// Bitmask assignment over facets is exact up to this many facets on the
/// larger side.
const MAX_EXACT_FACETS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeteorScore {
    pub value: f64,
    /// Total matched unigrams over aligned facet pairs.
    pub matches: usize,
    /// Total chunks over aligned facet pairs.
    pub chunks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairMeteor {
    pub score: f64,
    pub matches: usize,
    pub chunks: usize,
    pub candidate_len: usize,
    pub reference_len: usize,
}

/// METEOR between two token sequences with exact and Porter-stem matching.
///
/// The alignment maximizes the number of matched unigrams and, among those,
/// minimizes the number of chunks.
pub fn meteor_pair(candidate: &[String], reference: &[String]) -> PairMeteor {
    let c_stems: Vec<String> = candidate.iter().map(|t| porter::stem(t)).collect();
    let r_stems: Vec<String> = reference.iter().map(|t| porter::stem(t)).collect();
    let (matches, chunks) = align(&c_stems, &r_stems, candidate, reference);
    let (c, r) = (candidate.len(), reference.len());
    let score = if matches == 0 {
        0.0
    } else {
        let m = matches as f64;
        let precision = m / c as f64;
        let recall = m / r as f64;
        let f_mean = 10.0 * precision * recall / (recall + 9.0 * precision);
        let penalty = FRAG_GAMMA * (chunks as f64 / m).powf(FRAG_BETA);
        f_mean * (1.0 - penalty)
    };
    PairMeteor { score, matches, chunks, candidate_len: c, reference_len: r }
}

fn align(c_stems: &[String], r_stems: &[String], c_raw: &[String], r_raw: &[String]) -> (usize, usize) {
    let options: Vec<Vec<usize>> = c_stems
        .iter()
        .map(|cs| (0..r_stems.len()).filter(|&j| &r_stems[j] == cs).collect())
        .collect();
    if r_stems.len() <= 64 {
        let mut search = AlignSearch {
            options: &options,
            best: None,
            nodes: 0,
        };
        search.dfs(0, 0, None, 0, 0);
        if search.nodes <= ALIGN_NODE_BUDGET {
            if let Some(best) = search.best {
                return best;
            }
            return (0, 0);
        }
    }
    greedy_align(&options, c_raw, r_raw)
}

struct AlignSearch<'a> {
    options: &'a [Vec<usize>],
    /// (matches, chunks)
    best: Option<(usize, usize)>,
    nodes: usize,
}

impl AlignSearch<'_> {
    fn better(a: (usize, usize), b: Option<(usize, usize)>) -> bool {
        match b {
            None => true,
            Some(b) => a.0 > b.0 || (a.0 == b.0 && a.1 < b.1),
        }
    }

    fn dfs(&mut self, i: usize, used: u64, prev: Option<usize>, m: usize, chunks: usize) {
        self.nodes += 1;
        if self.nodes > ALIGN_NODE_BUDGET {
            return;
        }
        if i == self.options.len() {
            if Self::better((m, chunks), self.best) {
                self.best = Some((m, chunks));
            }
            return;
        }
        // Even matching every remaining token cannot beat the incumbent.
        if let Some((bm, _)) = self.best {
            if m + (self.options.len() - i) < bm {
                return;
            }
        }
        for &j in &self.options[i] {
            if used & (1 << j) != 0 {
                continue;
            }
            let new_chunk = !matches!(prev, Some(p) if p + 1 == j);
            self.dfs(i + 1, used | (1 << j), Some(j), m + 1, chunks + new_chunk as usize);
        }
        self.dfs(i + 1, used, None, m, chunks);
    }
}

fn greedy_align(options: &[Vec<usize>], c_raw: &[String], r_raw: &[String]) -> (usize, usize) {
    let mut used = vec![false; r_raw.len()];
    let mut prev: Option<usize> = None;
    let (mut m, mut chunks) = (0, 0);
    for (i, opts) in options.iter().enumerate() {
        let free: Vec<usize> = opts.iter().copied().filter(|&j| !used[j]).collect();
        let pick = free
            .iter()
            .copied()
            .find(|&j| matches!(prev, Some(p) if p + 1 == j))
            .or_else(|| free.iter().copied().find(|&j| r_raw[j] == c_raw[i]))
            .or_else(|| free.first().copied());
        match pick {
            Some(j) => {
                used[j] = true;
                if !matches!(prev, Some(p) if p + 1 == j) {
                    chunks += 1;
                }
                m += 1;
                prev = Some(j);
            }
            None => prev = None,
        }
    }
    (m, chunks)
}

/// Set-level METEOR.
///
/// Facets are aligned one-to-one over `min(|C|, |R|)` pairs maximizing the
/// summed pairwise score. The set value is the token-weighted mean of the
/// aligned pair scores: a pair weighs the token count of both facets and
/// every unaligned facet adds its own token count with score zero.
pub fn meteor_set(candidate: &FacetSet, reference: &FacetSet) -> Result<MeteorScore, MetricError> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let pairs: Vec<Vec<PairMeteor>> = candidate
        .iter()
        .map(|c| reference.iter().map(|r| meteor_pair(c.terms(), r.terms())).collect())
        .collect();
    let scores: Vec<Vec<f64>> = pairs
        .iter()
        .map(|row| row.iter().map(|p| p.score).collect())
        .collect();
    let assignment = best_assignment(&scores);

    let total_weight = (candidate.token_count() + reference.token_count()) as f64;
    let mut weighted = 0.0;
    let (mut matches, mut chunks) = (0, 0);
    for (i, j) in assignment {
        let p = &pairs[i][j];
        weighted += (p.candidate_len + p.reference_len) as f64 * p.score;
        matches += p.matches;
        chunks += p.chunks;
    }
    Ok(MeteorScore { value: weighted / total_weight, matches, chunks })
}

/// Maximum-weight assignment of size `min(rows, cols)`, returned as
/// (row, col) pairs. Ties resolve to the lexicographically first
/// assignment in row order.
fn best_assignment(scores: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = scores.len();
    let cols = scores.first().map_or(0, Vec::len);
    let transpose = rows > cols;
    let (small, large) = if transpose { (cols, rows) } else { (rows, cols) };
    let at = |s: usize, l: usize| if transpose { scores[l][s] } else { scores[s][l] };

    let picks: Vec<usize> = if large <= MAX_EXACT_FACETS {
        // best[i][mask]: best total for small-side items i.. given used mask
        let full = 1usize << large;
        let mut best = vec![vec![f64::NEG_INFINITY; full]; small + 1];
        best[small].fill(0.0);
        for i in (0..small).rev() {
            for mask in 0..full {
                if mask.count_ones() as usize != i {
                    continue;
                }
                let mut b = f64::NEG_INFINITY;
                for l in 0..large {
                    if mask & (1 << l) == 0 {
                        let v = at(i, l) + best[i + 1][mask | (1 << l)];
                        if v > b {
                            b = v;
                        }
                    }
                }
                best[i][mask] = b;
            }
        }
        let mut mask = 0usize;
        let mut picks = Vec::with_capacity(small);
        for i in 0..small {
            let target = best[i][mask];
            let l = (0..large)
                .find(|&l| mask & (1 << l) == 0 && at(i, l) + best[i + 1][mask | (1 << l)] == target)
                .expect("dp consistency");
            picks.push(l);
            mask |= 1 << l;
        }
        picks
    } else {
        let mut cells: Vec<(usize, usize)> =
            (0..small).flat_map(|s| (0..large).map(move |l| (s, l))).collect();
        cells.sort_by(|a, b| at(b.0, b.1).total_cmp(&at(a.0, a.1)).then(a.cmp(b)));
        let mut picks = vec![usize::MAX; small];
        let mut taken = vec![false; large];
        for (s, l) in cells {
            if picks[s] == usize::MAX && !taken[l] {
                picks[s] = l;
                taken[l] = true;
            }
        }
        picks
    };

    picks
        .into_iter()
        .enumerate()
        .map(|(s, l)| if transpose { (l, s) } else { (s, l) })
        .collect()
}
