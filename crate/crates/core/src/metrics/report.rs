use std::collections::{BTreeMap, HashMap, VecDeque};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{meteor_set, semantic_f1, set_bleu, EmbeddingProvider, MetricError, SemanticScore};
use crate::corpus::{ClarificationRecord, FacetSet, Query};

/// A ground-truth record and a generated record for the same query.
#[derive(Debug, Clone)]
pub struct RecordPair {
    pub reference: ClarificationRecord,
    pub candidate: ClarificationRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnpairedQuery {
    pub query: String,
    pub side: String,
}

/// Pairs reference and candidate records by query id.
///
/// When a query occurs several times on a side, the k-th reference is paired
/// with the k-th candidate; leftovers on either side are reported.
pub fn pair_records(
    references: &[ClarificationRecord],
    candidates: &[ClarificationRecord],
) -> (Vec<RecordPair>, Vec<UnpairedQuery>) {
    let mut pending: HashMap<&str, VecDeque<&ClarificationRecord>> = HashMap::new();
    for c in candidates {
        pending.entry(c.query.id()).or_default().push_back(c);
    }
    let mut pairs = Vec::new();
    let mut unpaired = Vec::new();
    for r in references {
        match pending.get_mut(r.query.id()).and_then(VecDeque::pop_front) {
            Some(c) => pairs.push(RecordPair { reference: r.clone(), candidate: c.clone() }),
            None => unpaired.push(UnpairedQuery {
                query: r.query.text().to_string(),
                side: "reference".into(),
            }),
        }
    }
    for c in candidates {
        if let Some(queue) = pending.get_mut(c.query.id()) {
            if let Some(left) = queue.pop_front() {
                unpaired.push(UnpairedQuery {
                    query: left.query.text().to_string(),
                    side: "candidate".into(),
                });
            }
        }
    }
    (pairs, unpaired)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub query: String,
    pub query_id: String,
    /// Reference set size.
    pub m: usize,
    pub candidate_m: usize,
    /// Cumulative Set BLEU for n = 1..=4.
    pub bleu: Vec<f64>,
    pub meteor: f64,
    pub semantic: SemanticScore,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coherency_reference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coherency_candidate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub m: usize,
    pub pairs: usize,
    pub bleu: Vec<f64>,
    pub bertscore_like: f64,
    pub meteor: f64,
    /// Fraction of reference sets scored coherent (s > 0.5).
    pub coherency_reference: Option<f64>,
    /// Fraction of candidate sets scored coherent (s > 0.5).
    pub coherency_candidate: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub pairs: Vec<PairMetrics>,
    pub aggregates: Vec<AggregateRow>,
    pub unpaired: Vec<UnpairedQuery>,
}

/// Scores every pair and aggregates by reference set size `M`.
///
/// Pairs run in parallel; results are ordered by query id (then input
/// position) before aggregation, so the report does not depend on thread
/// scheduling.
pub fn evaluate_corpus(
    pairs: &[RecordPair],
    provider: &dyn EmbeddingProvider,
) -> Result<MetricReport, MetricError> {
    evaluate_corpus_scored(pairs, provider, None)
}

/// Coherency score of one facet set, used to fill the coherency columns.
pub type SetScorer<'a> = &'a (dyn Fn(&Query, &FacetSet) -> Result<f64, MetricError> + Sync);

/// [`evaluate_corpus`] that also scores both sides of every pair with
/// `coherency`, when given.
pub fn evaluate_corpus_scored(
    pairs: &[RecordPair],
    provider: &dyn EmbeddingProvider,
    coherency: Option<SetScorer<'_>>,
) -> Result<MetricReport, MetricError> {
    let mut unpaired = Vec::new();
    let mut usable = Vec::new();
    for (idx, p) in pairs.iter().enumerate() {
        if p.reference.query.id() != p.candidate.query.id() {
            unpaired.push(UnpairedQuery {
                query: p.reference.query.text().to_string(),
                side: "reference".into(),
            });
            unpaired.push(UnpairedQuery {
                query: p.candidate.query.text().to_string(),
                side: "candidate".into(),
            });
        } else {
            usable.push((idx, p));
        }
    }

    let mut scored: Vec<(usize, PairMetrics)> = usable
        .par_iter()
        .map(|&(idx, p)| {
            let mut m = score_pair(p, provider)?;
            if let Some(score) = coherency {
                m.coherency_reference = Some(score(&p.reference.query, &p.reference.facets)?);
                m.coherency_candidate = Some(score(&p.candidate.query, &p.candidate.facets)?);
            }
            Ok((idx, m))
        })
        .collect::<Result<_, _>>()?;
    scored.sort_by(|a, b| a.1.query_id.cmp(&b.1.query_id).then(a.0.cmp(&b.0)));
    let pairs: Vec<PairMetrics> = scored.into_iter().map(|(_, m)| m).collect();

    let mut report = MetricReport { pairs, aggregates: Vec::new(), unpaired };
    report.recompute_aggregates();
    Ok(report)
}

fn score_pair(p: &RecordPair, provider: &dyn EmbeddingProvider) -> Result<PairMetrics, MetricError> {
    let (cand, refs) = (&p.candidate.facets, &p.reference.facets);
    let bleu = set_bleu(cand, refs, 4)?;
    let meteor = meteor_set(cand, refs)?;
    let semantic = semantic_f1(cand, refs, provider)?;
    Ok(PairMetrics {
        query: p.reference.query.text().to_string(),
        query_id: p.reference.query.id().to_string(),
        m: refs.len(),
        candidate_m: cand.len(),
        bleu: bleu.per_n,
        meteor: meteor.value,
        semantic,
        coherency_reference: None,
        coherency_candidate: None,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn coherent_fraction(scores: &[Option<f64>]) -> Option<f64> {
    if scores.is_empty() || scores.iter().any(Option::is_none) {
        return None;
    }
    let coherent = scores.iter().flatten().filter(|s| **s > 0.5).count();
    Some(coherent as f64 / scores.len() as f64)
}

impl MetricReport {
    /// Rebuilds the per-`M` rows from `pairs` (arithmetic means in pair order).
    pub fn recompute_aggregates(&mut self) {
        let mut groups: BTreeMap<usize, Vec<&PairMetrics>> = BTreeMap::new();
        for p in &self.pairs {
            groups.entry(p.m).or_default().push(p);
        }
        self.aggregates = groups
            .into_iter()
            .map(|(m, rows)| {
                let bleu = (0..4)
                    .map(|k| mean(rows.iter().map(|r| r.bleu.get(k).copied().unwrap_or(0.0))))
                    .collect();
                let refs: Vec<Option<f64>> = rows.iter().map(|r| r.coherency_reference).collect();
                let cands: Vec<Option<f64>> = rows.iter().map(|r| r.coherency_candidate).collect();
                AggregateRow {
                    m,
                    pairs: rows.len(),
                    bleu,
                    bertscore_like: mean(rows.iter().map(|r| r.semantic.f1)),
                    meteor: mean(rows.iter().map(|r| r.meteor)),
                    coherency_reference: coherent_fraction(&refs),
                    coherency_candidate: coherent_fraction(&cands),
                }
            })
            .collect();
    }

    /// One JSON object per scored pair.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for p in &self.pairs {
            serde_json::to_writer(&mut w, p)?;
            writeln!(w)?;
        }
        Ok(())
    }

    /// Tab-separated aggregate table, one row per reference set size.
    pub fn write_table<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let with_coherency = self
            .aggregates
            .iter()
            .any(|a| a.coherency_reference.is_some() || a.coherency_candidate.is_some());
        let mut header = vec!["M", "bleu1", "bleu2", "bleu3", "bleu4", "bertscore_like", "meteor"];
        if with_coherency {
            header.extend(["coherency_gt", "coherency_generated"]);
        }
        header.push("pairs");
        writeln!(w, "{}", header.join("\t"))?;
        let fmt_opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
        for a in &self.aggregates {
            let mut cells = vec![a.m.to_string()];
            cells.extend(a.bleu.iter().map(|b| format!("{b:.4}")));
            cells.push(format!("{:.4}", a.bertscore_like));
            cells.push(format!("{:.4}", a.meteor));
            if with_coherency {
                cells.push(fmt_opt(a.coherency_reference));
                cells.push(fmt_opt(a.coherency_candidate));
            }
            cells.push(a.pairs.to_string());
            writeln!(w, "{}", cells.join("\t"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{FacetSet, Query};
    use crate::metrics::HashedTrigramEmbedder;

    fn gt(q: &str, facets: &[&str]) -> ClarificationRecord {
        ClarificationRecord::ground_truth(
            Query::new(q).unwrap(),
            "",
            FacetSet::from_texts(facets.iter().copied()).unwrap(),
        )
    }

    fn gen(q: &str, facets: &[&str]) -> ClarificationRecord {
        ClarificationRecord::generated(
            Query::new(q).unwrap(),
            FacetSet::from_texts(facets.iter().copied()).unwrap(),
            "bart",
        )
    }

    #[test]
    fn identity_pair_aggregates_to_one() {
        let (pairs, unpaired) =
            pair_records(&[gt("q", &["coupe", "hatchback"])], &[gen("q", &["coupe", "hatchback"])]);
        assert!(unpaired.is_empty());
        let report = evaluate_corpus(&pairs, &HashedTrigramEmbedder::default()).unwrap();
        assert_eq!(report.aggregates.len(), 1);
        let row = &report.aggregates[0];
        assert_eq!(row.m, 2);
        assert_eq!(row.bleu, vec![1.0; 4]);
        assert_eq!(row.bertscore_like, 1.0);
    }

    #[test]
    fn mean_over_group() {
        let refs = [gt("a", &["car"]), gt("b", &["boat"])];
        let cands = [gen("a", &["car"]), gen("b", &["plane"])];
        let (pairs, _) = pair_records(&refs, &cands);
        let report = evaluate_corpus(&pairs, &HashedTrigramEmbedder::default()).unwrap();
        assert_eq!(report.aggregates.len(), 1);
        assert!((report.aggregates[0].bleu[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn groups_by_reference_size() {
        let refs = [gt("a", &["x", "y"]), gt("b", &["x", "y", "z"]), gt("c", &["p", "q"])];
        let cands = [gen("a", &["x"]), gen("b", &["x"]), gen("c", &["p"])];
        let (pairs, _) = pair_records(&refs, &cands);
        let report = evaluate_corpus(&pairs, &HashedTrigramEmbedder::default()).unwrap();
        let ms: Vec<(usize, usize)> = report.aggregates.iter().map(|a| (a.m, a.pairs)).collect();
        assert_eq!(ms, vec![(2, 2), (3, 1)]);
        let mut table = Vec::new();
        report.write_table(&mut table).unwrap();
        let text = String::from_utf8(table).unwrap();
        assert!(text.starts_with("M\tbleu1\tbleu2\tbleu3\tbleu4\tbertscore_like\tmeteor\tpairs\n"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn coherency_columns() {
        let pairs = vec![
            RecordPair { reference: gt("a", &["x", "y"]), candidate: gen("a", &["x", "x"]) },
            RecordPair { reference: gt("b", &["x", "z"]), candidate: gen("b", &["z"]) },
        ];
        let score = |_: &Query, f: &FacetSet| Ok(if f.len() == 2 && f.raw_texts()[0] != f.raw_texts()[1] { 0.9 } else { 0.1 });
        let report =
            evaluate_corpus_scored(&pairs, &HashedTrigramEmbedder::default(), Some(&score)).unwrap();
        assert_eq!(report.aggregates.len(), 1);
        assert_eq!(report.aggregates[0].coherency_reference, Some(1.0));
        assert_eq!(report.aggregates[0].coherency_candidate, Some(0.0));
        let mut table = Vec::new();
        report.write_table(&mut table).unwrap();
        let table = String::from_utf8(table).unwrap();
        assert!(table.starts_with("M\tbleu1\tbleu2\tbleu3\tbleu4\tbertscore_like\tmeteor\tcoherency_gt\tcoherency_generated\tpairs\n"));
        assert!(table.lines().nth(1).unwrap().ends_with("\t1.0000\t0.0000\t2"));
    }

    #[test]
    fn unpaired_queries_listed() {
        let refs = [gt("a", &["x"]), gt("a", &["y"]), gt("b", &["x"])];
        let cands = [gen("a", &["x"]), gen("c", &["x"])];
        let (pairs, unpaired) = pair_records(&refs, &cands);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].reference.facets.raw_texts(), vec!["x"]);
        let sides: Vec<(&str, &str)> =
            unpaired.iter().map(|u| (u.query.as_str(), u.side.as_str())).collect();
        assert_eq!(sides, vec![("a", "reference"), ("b", "reference"), ("c", "candidate")]);

        let mismatched = vec![RecordPair { reference: gt("a", &["x"]), candidate: gen("b", &["x"]) }];
        let report = evaluate_corpus(&mismatched, &HashedTrigramEmbedder::default()).unwrap();
        assert!(report.pairs.is_empty());
        assert_eq!(report.unpaired.len(), 2);
    }
}
