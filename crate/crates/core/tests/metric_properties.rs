use facetkit_core::corpus::FacetSet;
use facetkit_core::metrics::{
    meteor_pair, meteor_set, semantic_f1, set_bleu, HashedTrigramEmbedder,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: &[&str] = &["car", "cars", "sale", "sales", "police", "boat", "red", "bus"];

/// Every n-gram occurrence of a facet list, as a space-joined string.
fn occurrences(facets: &[Vec<&str>], n: usize) -> Vec<String> {
    let mut out = Vec::new();
    for f in facets {
        if f.len() >= n {
            for start in 0..=f.len() - n {
                out.push(f[start..start + n].join(" "));
            }
        }
    }
    out
}

/// Clipped count by one-to-one matching of candidate occurrences against
/// unused reference occurrences.
fn clipped_matches(cand: &[String], refs: &[String]) -> usize {
    let mut used = vec![false; refs.len()];
    let mut matched = 0;
    for c in cand {
        if let Some(j) = (0..refs.len()).find(|&j| !used[j] && refs[j] == *c) {
            used[j] = true;
            matched += 1;
        }
    }
    matched
}

fn oracle_bleu(cand: &[Vec<&str>], refs: &[Vec<&str>]) -> (Vec<f64>, Vec<f64>) {
    let mut precisions = Vec::new();
    for n in 1..=4 {
        let c = occurrences(cand, n);
        let r = occurrences(refs, n);
        precisions.push(match (c.len(), r.len()) {
            (0, 0) => 1.0,
            (0, _) => 0.0,
            (total, _) => clipped_matches(&c, &r) as f64 / total as f64,
        });
    }
    let c_len: usize = cand.iter().map(Vec::len).sum();
    let r_len: usize = refs.iter().map(Vec::len).sum();
    let bp = if c_len >= r_len { 1.0 } else { (1.0 - r_len as f64 / c_len as f64).exp() };
    let mut scores = Vec::new();
    let mut log_sum = 0.0;
    for (k, &p) in precisions.iter().enumerate() {
        if p == 0.0 || scores.last() == Some(&0.0) {
            scores.push(0.0);
            continue;
        }
        log_sum += p.ln();
        scores.push(bp * (log_sum / (k + 1) as f64).exp());
    }
    (precisions, scores)
}

fn random_facets(rng: &mut ChaCha8Rng) -> Vec<Vec<&'static str>> {
    (0..rng.gen_range(1..=3))
        .map(|_| (0..rng.gen_range(1..=3)).map(|_| *WORDS.choose(rng).unwrap()).collect())
        .collect()
}

fn to_set(facets: &[Vec<&str>]) -> FacetSet {
    FacetSet::from_texts(facets.iter().map(|f| f.join(" "))).unwrap()
}

#[test]
fn set_bleu_matches_counting_oracle_on_500_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2023);
    for _ in 0..500 {
        let cand = random_facets(&mut rng);
        let refs = random_facets(&mut rng);
        let got = set_bleu(&to_set(&cand), &to_set(&refs), 4).unwrap();
        let (precisions, per_n) = oracle_bleu(&cand, &refs);
        assert_eq!(got.precisions, precisions, "{cand:?} vs {refs:?}");
        assert_eq!(got.per_n, per_n, "{cand:?} vs {refs:?}");
    }
}

fn facet_lists() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(
        prop::collection::vec(prop::sample::select(WORDS), 1..=3).prop_map(|w| w.join(" ")),
        1..=4,
    )
}

fn reversed(items: &[String]) -> Vec<String> {
    items.iter().rev().cloned().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn metrics_ignore_facet_order(cand in facet_lists(), refs in facet_lists(), seed in any::<u64>()) {
        let mut shuffled = cand.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let c1 = FacetSet::from_texts(&cand).unwrap();
        let c2 = FacetSet::from_texts(&shuffled).unwrap();
        let r1 = FacetSet::from_texts(&refs).unwrap();
        let r2 = FacetSet::from_texts(reversed(&refs)).unwrap();
        let provider = HashedTrigramEmbedder::default();

        prop_assert_eq!(set_bleu(&c1, &r1, 4).unwrap(), set_bleu(&c2, &r2, 4).unwrap());
        prop_assert_eq!(meteor_set(&c1, &r1).unwrap(), meteor_set(&c2, &r2).unwrap());
        prop_assert_eq!(
            semantic_f1(&c1, &r1, &provider).unwrap(),
            semantic_f1(&c2, &r2, &provider).unwrap()
        );
    }

    #[test]
    fn scores_lie_in_unit_interval(cand in facet_lists(), refs in facet_lists()) {
        let c = FacetSet::from_texts(&cand).unwrap();
        let r = FacetSet::from_texts(&refs).unwrap();
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        let bleu = set_bleu(&c, &r, 4).unwrap();
        prop_assert!(bleu.per_n.iter().chain(&bleu.precisions).all(|x| unit(*x)));
        prop_assert!(unit(meteor_set(&c, &r).unwrap().value));
        let s = semantic_f1(&c, &r, &HashedTrigramEmbedder::default()).unwrap();
        prop_assert!(unit(s.precision) && unit(s.recall) && unit(s.f1));
    }

    #[test]
    fn identity_scores_one(items in facet_lists()) {
        let s = FacetSet::from_texts(&items).unwrap();
        prop_assert_eq!(set_bleu(&s, &s, 4).unwrap().at(1), 1.0);
        prop_assert_eq!(semantic_f1(&s, &s, &HashedTrigramEmbedder::default()).unwrap().f1, 1.0);
    }

    #[test]
    fn duplicating_a_candidate_facet_into_reference_never_lowers_unigram_bleu(
        cand in facet_lists(),
        refs in facet_lists(),
        pick in any::<prop::sample::Index>(),
    ) {
        let c = FacetSet::from_texts(&cand).unwrap();
        let before = set_bleu(&c, &FacetSet::from_texts(&refs).unwrap(), 1).unwrap().precisions[0];
        let mut grown = refs.clone();
        grown.push(cand[pick.index(cand.len())].clone());
        let after = set_bleu(&c, &FacetSet::from_texts(&grown).unwrap(), 1).unwrap().precisions[0];
        prop_assert!(after >= before);
    }

    #[test]
    fn meteor_pair_is_symmetric_in_matches(a in prop::collection::vec(prop::sample::select(WORDS), 1..=4),
                                          b in prop::collection::vec(prop::sample::select(WORDS), 1..=4)) {
        let a: Vec<String> = a.iter().map(|s| s.to_string()).collect();
        let b: Vec<String> = b.iter().map(|s| s.to_string()).collect();
        prop_assert_eq!(meteor_pair(&a, &b).matches, meteor_pair(&b, &a).matches);
    }
}
