use facetkit_core::coherency::{read_labeled, write_labeled, CoherencyLabel, Coherency, LabeledRecord, Provenance};
use facetkit_core::corpus::{
    load_generated_facets, normalize_facet, parse_clarification_tsv, tokenize,
    write_clarification_tsv, write_generated_facets, ClarificationRecord, FacetSet, Query,
};
use proptest::prelude::*;

fn text() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9][a-zA-Z0-9 ,.'-]{0,14}"
}

fn facet_texts() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(text(), 1..=5)
}

fn provenance() -> impl Strategy<Value = Provenance> {
    prop_oneof![
        Just(Provenance::Expert),
        Just(Provenance::Propagated),
        "[a-z-]{1,12}".prop_map(Provenance::WeakRule),
    ]
}

proptest! {
    #[test]
    fn tsv_roundtrip(rows in prop::collection::vec((text(), text(), facet_texts()), 1..6)) {
        let records: Vec<ClarificationRecord> = rows
            .iter()
            .map(|(q, question, facets)| {
                ClarificationRecord::ground_truth(
                    Query::new(q.clone()).unwrap(),
                    question.clone(),
                    FacetSet::from_texts(facets).unwrap(),
                )
            })
            .collect();
        let mut buf = Vec::new();
        write_clarification_tsv(&mut buf, &records).unwrap();
        let parsed = parse_clarification_tsv(buf.as_slice()).unwrap();
        prop_assert!(parsed.errors.is_empty());
        prop_assert_eq!(parsed.records, records);
    }

    #[test]
    fn generated_jsonl_roundtrip(rows in prop::collection::vec((text(), facet_texts()), 1..6)) {
        let records: Vec<ClarificationRecord> = rows
            .iter()
            .map(|(q, facets)| {
                ClarificationRecord::generated(
                    Query::new(q.clone()).unwrap(),
                    FacetSet::from_texts(facets).unwrap(),
                    "bart",
                )
            })
            .collect();
        let mut buf = Vec::new();
        write_generated_facets(&mut buf, &records).unwrap();
        let parsed = load_generated_facets(buf.as_slice(), "bart");
        prop_assert!(parsed.errors.is_empty());
        prop_assert_eq!(parsed.records, records);
    }

    #[test]
    fn labeled_jsonl_roundtrip(
        rows in prop::collection::vec((text(), text(), facet_texts(), any::<bool>(), provenance()), 1..6)
    ) {
        let records: Vec<LabeledRecord> = rows
            .into_iter()
            .enumerate()
            .map(|(i, (q, question, facets, coherent, prov))| LabeledRecord {
                id: format!("r{i}"),
                query: Query::new(q).unwrap(),
                question,
                facets: FacetSet::from_texts(facets).unwrap(),
                label: CoherencyLabel::new(
                    if coherent { Coherency::Coherent } else { Coherency::Incoherent },
                    prov,
                ),
            })
            .collect();
        let mut buf = Vec::new();
        write_labeled(&mut buf, &records).unwrap();
        let (back, errors) = read_labeled(buf.as_slice());
        prop_assert!(errors.is_empty());
        prop_assert_eq!(back, records);
    }

    #[test]
    fn facet_set_ignores_input_order(mut items in facet_texts(), k in 0usize..5) {
        let a = FacetSet::from_texts(&items).unwrap();
        let len = items.len();
        items.rotate_left(k % len);
        let b = FacetSet::from_texts(&items).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.to_string(), b.to_string());
        let json = serde_json::to_string(&a).unwrap();
        prop_assert_eq!(serde_json::from_str::<FacetSet>(&json).unwrap(), a);
    }

    #[test]
    fn tokenize_is_idempotent(s in "\\PC{0,40}") {
        let once = tokenize(&s);
        let twice = tokenize(&once.join(" "));
        prop_assert_eq!(once, twice);
        let n = normalize_facet(&s);
        prop_assert_eq!(normalize_facet(&n), n);
    }
}
