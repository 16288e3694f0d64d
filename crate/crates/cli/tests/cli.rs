use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use facetkit_core::coherency::{synthetic::weakly_labeled_corpus, write_labeled};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn facetkit(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_facetkit"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = facetkit(out, args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn no_arguments_prints_usage_and_fails() {
    let o = Command::new(env!("CARGO_BIN_EXE_facetkit")).output().unwrap();
    assert!(!o.status.success());
    let text = String::from_utf8_lossy(&o.stdout) + String::from_utf8_lossy(&o.stderr);
    assert!(text.contains("Usage"));
}

#[test]
fn trinomial_marks_significance() {
    let dir = tempfile::tempdir().unwrap();
    let quality = ok(dir.path(), &["trinomial", "--wins", "119", "--ties", "48", "--losses", "32"]);
    let row = quality.lines().last().unwrap();
    assert!(row.starts_with("quality\t199\t"));
    assert!(row.ends_with('†'));

    let coherency = ok(
        dir.path(),
        &["trinomial", "--wins", "58", "--ties", "85", "--losses", "56", "--criterion", "coherency"],
    );
    assert!(!coherency.contains('†'));
    let written = std::fs::read_to_string(dir.path().join("trinomial.tsv")).unwrap();
    assert_eq!(written, coherency);
    assert!(written.starts_with("# facetkit trinomial {"));
}

fn evaluate(out: &Path) -> String {
    let fx = fixtures();
    ok(
        out,
        &[
            "evaluate",
            "--reference",
            path(&fx.join("sample_ground_truth.tsv")),
            "--generated",
            path(&fx.join("sample_generated.jsonl")),
        ],
    )
}

#[test]
fn evaluate_keeps_directional_relations() {
    let dir = tempfile::tempdir().unwrap();
    evaluate(dir.path());
    let per_pair: Vec<serde_json::Value> = std::fs::read_to_string(dir.path().join("metrics.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let get = |q: &str| per_pair.iter().find(|p| p["query"] == q).unwrap_or_else(|| panic!("{q}"));
    let f1 = |q: &str| get(q)["semantic"]["f1"].as_f64().unwrap();
    let bleu1 = |q: &str| get(q)["bleu"][0].as_f64().unwrap();
    assert!(f1("police sales") > f1("1982 mustang"));
    assert!(bleu1("police sales") > bleu1("new call of duty game"));
    assert_eq!(get("1982 mustang")["meteor"].as_f64().unwrap(), 0.0);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    evaluate(dir.path());
    let first = std::fs::read(dir.path().join("metrics.tsv")).unwrap();
    let first_pairs = std::fs::read(dir.path().join("metrics.jsonl")).unwrap();
    evaluate(dir.path());
    assert_eq!(std::fs::read(dir.path().join("metrics.tsv")).unwrap(), first);
    assert_eq!(std::fs::read(dir.path().join("metrics.jsonl")).unwrap(), first_pairs);
}

#[test]
fn failed_runs_leave_no_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = facetkit(
        dir.path(),
        &["prevalence", path(&fixtures().join("sample_generated.jsonl")), "--model", "/nonexistent/model.json"],
    );
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("model"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);

    let o = facetkit(dir.path(), &["--provider", "bogus", "trinomial", "--wins", "1", "--ties", "0", "--losses", "0"]);
    assert!(!o.status.success());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn classifier_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let labeled = out.join("labeled.jsonl");
    let mut buf = Vec::new();
    write_labeled(&mut buf, &weakly_labeled_corpus(500, 17)).unwrap();
    std::fs::write(&labeled, buf).unwrap();

    let split = ok(out, &["--seed", "5", "split", path(&labeled)]);
    let count = |name: &str| -> usize {
        split.lines().find_map(|l| l.strip_prefix(&format!("{name}\t"))).unwrap().parse().unwrap()
    };
    let (train, validation, test) = (count("train"), count("validation"), count("test"));
    assert_eq!(train + validation + test, 500);
    assert!((349..=351).contains(&train) && (74..=76).contains(&test), "{split}");

    let split_file = out.join("split.tsv");
    ok(out, &["--seed", "5", "train", path(&labeled), "--split", path(&split_file)]);
    let model = out.join("model.json");
    assert!(model.exists());

    let eval = ok(out, &["eval-classifier", path(&labeled), "--model", path(&model), "--split", path(&split_file)]);
    let accuracy: f64 = eval
        .lines()
        .find_map(|l| l.strip_prefix("accuracy\t"))
        .unwrap()
        .parse()
        .unwrap();
    assert!(accuracy >= 0.90, "{eval}");
    assert!(eval.contains(&format!("records\t{test}\n")));

    let generated = fixtures().join("sample_generated.jsonl");
    let predictions = ok(out, &["predict", path(&generated), "--model", path(&model)]);
    assert_eq!(predictions.lines().count(), 3);
    for line in predictions.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let s = v["score"].as_f64().unwrap();
        let expected = if s > 0.5 { "coherent" } else { "incoherent" };
        assert_eq!(v["label"], expected);
    }

    let prevalence = ok(out, &["prevalence", path(&generated), "--model", path(&model), "--group-by-m"]);
    assert!(prevalence.contains("\n3\t1\t"));
    assert!(prevalence.contains("\nall\t3\t"));
}

#[test]
fn weak_label_reports_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("records.jsonl");
    std::fs::write(
        &records,
        concat!(
            "{\"query\":\"gift ideas\",\"facets\":[\"gift ideas for men\",\"gift ideas for women\"]}\n",
            "{\"query\":\"jaguar\",\"facets\":[\"Cat\",\"cat \"]}\n",
            "{\"query\":\"jaguar\",\"facets\":[\"car\",\"cat\"]}\n",
        ),
    )
    .unwrap();
    let report = ok(dir.path(), &["weak-label", path(&records)]);
    assert!(report.contains("weak:query-containment\t1\n"));
    assert!(report.contains("weak:duplicate-facet\t1\n"));
    assert!(report.contains("unlabeled\t1\n"));
    let labeled = std::fs::read_to_string(dir.path().join("weak_labels.jsonl")).unwrap();
    assert_eq!(labeled.lines().count(), 2);
}

#[test]
fn aggregate_and_subset_test() {
    let dir = tempfile::tempdir().unwrap();
    let export = dir.path().join("export.json");
    let comparisons: Vec<_> = [["A", "A"], ["A", "A"], ["A", "B"], ["B", "B"]]
        .iter()
        .enumerate()
        .map(|(i, c)| serde_json::json!({"task_id": format!("t{i}"), "criterion": "quality", "choices": c}))
        .collect();
    let doc = serde_json::json!({"criterion": "quality", "comparisons": comparisons, "incomplete": ["t9"]});
    std::fs::write(&export, doc.to_string()).unwrap();
    let report = ok(dir.path(), &["aggregate", path(&export)]);
    assert!(report.contains("quality\t2\t1\t1\n"));
    assert!(report.contains("# incomplete tasks: 1"));

    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    std::fs::write(&a, "1\n2\n3\n").unwrap();
    std::fs::write(&b, "1\n2\n3\n").unwrap();
    let run = || ok(dir.path(), &["--seed", "3", "subset-test", path(&a), path(&b), "--permutations", "200"]);
    let first = run();
    assert_eq!(first, run());
    assert!(first.lines().last().unwrap().ends_with("\t1.000000"));
}
