use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Coherency, CoherencyError, LabeledRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 0.70, validation: 0.15, test: 0.15 }
    }
}

impl SplitRatios {
    fn as_array(&self) -> [f64; 3] {
        [self.train, self.validation, self.test]
    }

    fn validate(&self) -> Result<(), CoherencyError> {
        let r = self.as_array();
        if r.iter().any(|x| !x.is_finite() || *x < 0.0) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(CoherencyError::InvalidRatios(r));
        }
        Ok(())
    }

    /// Splits `n` items: floor of each share, then leftover items one at a
    /// time by largest fractional part, ties going Train, Validation, Test.
    pub fn allocate(&self, n: usize) -> [usize; 3] {
        let raw = self.as_array().map(|r| r * n as f64);
        // tolerate representation error such as 0.7 * 10 = 7.000000000000001
        let mut counts = raw.map(|x| (x + 1e-9).floor() as usize);
        let frac: Vec<f64> = raw
            .iter()
            .zip(&counts)
            .map(|(x, c)| (x - *c as f64).max(0.0))
            .collect();
        let assigned: usize = counts.iter().sum();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| frac[b].total_cmp(&frac[a]).then(a.cmp(&b)));
        for &k in order.iter().take(n.saturating_sub(assigned)) {
            counts[k] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub assignments: BTreeMap<String, Split>,
}

impl SplitAssignment {
    pub fn get(&self, id: &str) -> Option<Split> {
        self.assignments.get(id).copied()
    }

    pub fn counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for s in self.assignments.values() {
            c[*s as usize] += 1;
        }
        c
    }

    /// Records of `records` assigned to `split`, in input order.
    pub fn select(&self, records: &[LabeledRecord], split: Split) -> Vec<LabeledRecord> {
        records
            .iter()
            .filter(|r| self.get(&r.id) == Some(split))
            .cloned()
            .collect()
    }

    /// `id<TAB>split` lines, sorted by id.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("id\tsplit\n");
        for (id, s) in &self.assignments {
            out.push_str(&format!("{id}\t{s}\n"));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self, CoherencyError> {
        let mut assignments = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 && line.starts_with("id\t") || line.trim().is_empty() {
                continue;
            }
            let (id, split) = line
                .split_once('\t')
                .ok_or_else(|| CoherencyError::Format(format!("line {}: expected id<TAB>split", i + 1)))?;
            let split = split
                .trim()
                .parse()
                .map_err(|e| CoherencyError::Format(format!("line {}: {e}", i + 1)))?;
            if assignments.insert(id.to_string(), split).is_some() {
                return Err(CoherencyError::DuplicateId(id.to_string()));
            }
        }
        Ok(Self { assignments })
    }
}

/// Stratified train/validation/test split.
///
/// Each class is shuffled with its own generator derived from `seed`, then
/// cut according to [`SplitRatios::allocate`].
pub fn stratified_split(
    records: &[LabeledRecord],
    ratios: SplitRatios,
    seed: u64,
) -> Result<SplitAssignment, CoherencyError> {
    ratios.validate()?;
    let mut seen = HashSet::new();
    for r in records {
        if !seen.insert(r.id.as_str()) {
            return Err(CoherencyError::DuplicateId(r.id.clone()));
        }
    }

    let mut assignments = BTreeMap::new();
    for (class_idx, class) in [Coherency::Coherent, Coherency::Incoherent].into_iter().enumerate() {
        let mut members: Vec<&str> = records
            .iter()
            .filter(|r| r.label.value == class)
            .map(|r| r.id.as_str())
            .collect();
        if members.is_empty() {
            return Err(CoherencyError::EmptyClass(class));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(class_idx as u64);
        members.shuffle(&mut rng);

        let [n_train, n_val, _] = ratios.allocate(members.len());
        for (pos, id) in members.into_iter().enumerate() {
            let split = if pos < n_train {
                Split::Train
            } else if pos < n_train + n_val {
                Split::Validation
            } else {
                Split::Test
            };
            assignments.insert(id.to_string(), split);
        }
    }
    Ok(SplitAssignment { assignments })
}
