//! `facetkit`: command-line entry point for the facet set evaluation
//! pipeline. Run `facetkit help` for the subcommand list.

mod io;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use facetkit_annotation::{AnnotationService, ComparisonPair, Export, GoldItem, ServiceConfig};
use facetkit_core::coherency::{
    evaluate, prevalence, stratified_split, train, weak_label, CoherencyModel, CoherencyScorer,
    LabeledRecord, LocalScorer, QuestionStats, Split, SplitAssignment, SplitRatios, TrainConfig,
};
use facetkit_core::metrics::{
    evaluate_corpus_scored, pair_records, EmbeddingProvider, HashedTrigramEmbedder, MetricError,
    HASHED_DIMENSION, HASH_SEED,
};
use facetkit_core::remote::{ExternalScorer, HttpEmbeddingProvider};
use facetkit_core::stats::{
    aggregate_pairwise, format_pairwise_table, subset_significance, trinomial_pvalue, Criterion,
    PairwiseCounts, DEFAULT_ALPHA,
};
use io::Output;
use serde::Serialize;

#[derive(Parser, Serialize)]
#[command(name = "facetkit", version, about = "Facet set evaluation pipeline", arg_required_else_help = true)]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Embedding provider: `hashed` or `http:<base url>`.
    #[arg(long, global = true, default_value = "hashed")]
    provider: String,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Parse a clarification TSV into records.jsonl.
    Ingest(IngestArgs),
    /// Set BLEU, METEOR and semantic F1 per pair, aggregated by facet-set size.
    Evaluate(EvaluateArgs),
    /// Apply the weak-labeling rules.
    WeakLabel(WeakLabelArgs),
    /// Stratified train/validation/test split of labeled records.
    Split(SplitArgs),
    /// Train the coherency classifier.
    Train(TrainArgs),
    /// Accuracy and macro-F1 of a classifier on the test split.
    EvalClassifier(EvalClassifierArgs),
    /// Coherency score and label for each record.
    Predict(PredictArgs),
    /// Fraction of records classified incoherent.
    Prevalence(PrevalenceArgs),
    /// Exact trinomial test on win/tie/loss counts.
    Trinomial(TrinomialArgs),
    /// Permutation test on the difference of two samples' means.
    SubsetTest(SubsetTestArgs),
    /// Turn annotation exports into win/tie/loss counts with p-values.
    Aggregate(AggregateArgs),
    /// Run the annotation service.
    Serve(ServeArgs),
}

#[derive(Args, Serialize)]
struct IngestArgs {
    tsv: PathBuf,
    /// JSON lines of `{"query", "documents"}` to attach.
    #[arg(long)]
    documents: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct EvaluateArgs {
    /// Ground-truth records (TSV or JSON lines).
    #[arg(long)]
    reference: PathBuf,
    /// Generated facet sets (JSON lines).
    #[arg(long)]
    generated: PathBuf,
    /// Label attached to generated records.
    #[arg(long, default_value = "model")]
    generator: String,
    /// Coherency model; fills the coherency columns.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct WeakLabelArgs {
    records: PathBuf,
    /// Expert-labeled records supplying per-question statistics.
    #[arg(long)]
    expert: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SplitArgs {
    labeled: PathBuf,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    labeled: PathBuf,
    /// Split file from `split`; computed from --seed when absent.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    learning_rate: f64,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().patience)]
    patience: usize,
    #[arg(long, default_value_t = TrainConfig::default().l2)]
    l2: f64,
    #[arg(long, default_value_t = TrainConfig::default().steps_per_epoch)]
    steps_per_epoch: usize,
}

#[derive(Args, Serialize)]
struct ScorerArgs {
    /// Model file written by `train`.
    #[arg(long, required_unless_present = "scorer")]
    model: Option<PathBuf>,
    /// Base URL of an external scorer, used instead of a local model.
    #[arg(long, conflicts_with = "model")]
    scorer: Option<String>,
}

#[derive(Args, Serialize)]
struct EvalClassifierArgs {
    labeled: PathBuf,
    #[command(flatten)]
    scorer: ScorerArgs,
    /// Split file; all records are scored when absent.
    #[arg(long)]
    split: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct PredictArgs {
    records: PathBuf,
    #[command(flatten)]
    scorer: ScorerArgs,
}

#[derive(Args, Serialize)]
struct PrevalenceArgs {
    records: PathBuf,
    #[command(flatten)]
    scorer: ScorerArgs,
    #[arg(long)]
    group_by_m: bool,
}

#[derive(Args, Serialize)]
struct TrinomialArgs {
    #[arg(long)]
    wins: u64,
    #[arg(long)]
    ties: u64,
    #[arg(long)]
    losses: u64,
    #[arg(long, default_value = "quality")]
    criterion: Criterion,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
}

#[derive(Args, Serialize)]
struct SubsetTestArgs {
    /// One value per line.
    a: PathBuf,
    b: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    permutations: usize,
}

#[derive(Args, Serialize)]
struct AggregateArgs {
    /// Export documents as returned by the service's /export route.
    #[arg(required = true)]
    exports: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
}

#[derive(Args, Serialize)]
struct ServeArgs {
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    generated: PathBuf,
    /// Gold items, one JSON object per line.
    #[arg(long)]
    gold: PathBuf,
    #[arg(long, default_value = "annotation-log.jsonl")]
    log: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    #[arg(long, default_value_t = facetkit_annotation::DEFAULT_JUDGMENTS_PER_TASK)]
    judgments_per_task: usize,
    #[arg(long, default_value_t = facetkit_annotation::DEFAULT_QUALIFICATION_THRESHOLD)]
    qualification_threshold: f64,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Evaluate(_) => "evaluate",
            Command::WeakLabel(_) => "weak-label",
            Command::Split(_) => "split",
            Command::Train(_) => "train",
            Command::EvalClassifier(_) => "eval-classifier",
            Command::Predict(_) => "predict",
            Command::Prevalence(_) => "prevalence",
            Command::Trinomial(_) => "trinomial",
            Command::SubsetTest(_) => "subset-test",
            Command::Aggregate(_) => "aggregate",
            Command::Serve(_) => "serve",
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn provider(spec: &str) -> Result<Box<dyn EmbeddingProvider>> {
    if spec == "hashed" {
        return Ok(Box::new(HashedTrigramEmbedder::new(HASHED_DIMENSION, HASH_SEED)));
    }
    match spec.strip_prefix("http:") {
        Some(url) if !url.is_empty() => Ok(Box::new(HttpEmbeddingProvider::new(url))),
        _ => bail!("unknown provider {spec:?}; expected `hashed` or `http:<url>`"),
    }
}

fn run(cli: &Cli) -> Result<()> {
    let config = serde_json::to_value(cli)?;
    let out = Output::new(&cli.out, cli.command.name(), &config)?;
    let embed = provider(&cli.provider)?;
    let embed = embed.as_ref();
    match &cli.command {
        Command::Ingest(a) => ingest(&out, a),
        Command::Evaluate(a) => evaluate_cmd(&out, a, embed),
        Command::WeakLabel(a) => weak_label_cmd(&out, a),
        Command::Split(a) => split_cmd(&out, a, cli.seed),
        Command::Train(a) => train_cmd(&out, a, cli.seed, embed),
        Command::EvalClassifier(a) => eval_classifier(&out, a, embed),
        Command::Predict(a) => predict_cmd(&out, a, embed),
        Command::Prevalence(a) => prevalence_cmd(&out, a, embed),
        Command::Trinomial(a) => trinomial_cmd(&out, a),
        Command::SubsetTest(a) => subset_cmd(&out, a, cli.seed),
        Command::Aggregate(a) => aggregate_cmd(&out, a),
        Command::Serve(a) => serve_cmd(a, cli.seed),
    }
}

/// Writes a report file and echoes it to stdout.
fn emit(out: &Output, name: &str, body: &str) -> Result<()> {
    let path = out.report(name, body)?;
    print!("{}{body}", out.header());
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn ingest(out: &Output, a: &IngestArgs) -> Result<()> {
    let mut records = io::load_records(&a.tsv, "")?;
    if let Some(docs) = &a.documents {
        let file = std::fs::File::open(docs).with_context(|| format!("opening {}", docs.display()))?;
        let (map, errors) = facetkit_core::corpus::load_documents(std::io::BufReader::new(file));
        for e in errors {
            eprintln!("warning: {}: {e}", docs.display());
        }
        facetkit_core::corpus::attach_documents(&mut records, &map);
    }
    let mut body = String::new();
    for r in &records {
        body.push_str(&serde_json::to_string(r)?);
        body.push('\n');
    }
    out.raw("records.jsonl", body.as_bytes())?;
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for r in &records {
        *sizes.entry(r.facets.len()).or_default() += 1;
    }
    let mut report = format!("records\t{}\nM\tcount\n", records.len());
    for (m, n) in sizes {
        writeln!(report, "{m}\t{n}")?;
    }
    emit(out, "ingest.tsv", &report)
}

fn load_scorer<'a>(
    a: &ScorerArgs,
    model: &'a mut Option<CoherencyModel>,
    embed: &'a dyn EmbeddingProvider,
) -> Result<Box<dyn CoherencyScorer + 'a>> {
    if let Some(url) = &a.scorer {
        return Ok(Box::new(ExternalScorer::new(url.clone())));
    }
    let path = a.model.as_ref().ok_or_else(|| anyhow!("--model or --scorer is required"))?;
    *model = Some(load_model(path)?);
    Ok(Box::new(LocalScorer::new(model.as_ref().unwrap(), embed)))
}

fn load_model(path: &Path) -> Result<CoherencyModel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    CoherencyModel::from_text(&text).with_context(|| format!("loading model {}", path.display()))
}

fn evaluate_cmd(out: &Output, a: &EvaluateArgs, embed: &dyn EmbeddingProvider) -> Result<()> {
    let references = io::load_records(&a.reference, "")?;
    let candidates = io::load_records(&a.generated, &a.generator)?;
    let (pairs, unpaired) = pair_records(&references, &candidates);
    if pairs.is_empty() {
        bail!("no query appears in both {} and {}", a.reference.display(), a.generated.display());
    }
    let model = a.model.as_deref().map(load_model).transpose()?;
    let local = model.as_ref().map(|m| LocalScorer::new(m, embed));
    let score = |q: &facetkit_core::corpus::Query, f: &facetkit_core::corpus::FacetSet| {
        let scorer = local.as_ref().expect("scorer present when called");
        scorer.score(q, f).map_err(|e| MetricError::ProviderFailure(e.to_string()))
    };
    let scorer: Option<facetkit_core::metrics::SetScorer<'_>> = local.as_ref().map(|_| &score as _);
    let mut report = evaluate_corpus_scored(&pairs, embed, scorer)?;
    report.unpaired.extend(unpaired);

    let mut per_pair = Vec::new();
    report.write_jsonl(&mut per_pair)?;
    out.raw("metrics.jsonl", &per_pair)?;

    let mut table = Vec::new();
    report.write_table(&mut table)?;
    let mut body = String::from_utf8(table)?;
    body.push_str("\nquery\tbleu1\tmeteor\tsemantic_f1\n");
    for p in &report.pairs {
        writeln!(body, "{}\t{:.4}\t{:.4}\t{:.4}", p.query, p.bleu[0], p.meteor, p.semantic.f1)?;
    }
    for u in &report.unpaired {
        writeln!(body, "# unpaired {}: {}", u.side, u.query)?;
    }
    emit(out, "metrics.tsv", &body)
}

fn weak_label_cmd(out: &Output, a: &WeakLabelArgs) -> Result<()> {
    let records = io::load_records(&a.records, "")?;
    let stats = a
        .expert
        .as_deref()
        .map(|p| io::load_labeled(p).map(|e| QuestionStats::from_expert_labels(&e)))
        .transpose()?;
    let mut labeled = Vec::new();
    let mut by_provenance: BTreeMap<String, usize> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        match weak_label(r, stats.as_ref()) {
            Some(label) => {
                *by_provenance.entry(label.provenance.to_string()).or_default() += 1;
                labeled.push(LabeledRecord {
                    id: format!("{}:{}", r.query.id(), i + 1),
                    query: r.query.clone(),
                    question: r.question.clone(),
                    facets: r.facets.clone(),
                    label,
                });
            }
            None => *by_provenance.entry("unlabeled".into()).or_default() += 1,
        }
    }
    let mut body = Vec::new();
    facetkit_core::coherency::write_labeled(&mut body, &labeled)?;
    out.raw("weak_labels.jsonl", &body)?;
    let mut report = format!("records\t{}\nprovenance\tcount\n", records.len());
    for (k, n) in by_provenance {
        writeln!(report, "{k}\t{n}")?;
    }
    emit(out, "weak_label.tsv", &report)
}

fn split_cmd(out: &Output, a: &SplitArgs, seed: u64) -> Result<()> {
    let records = io::load_labeled(&a.labeled)?;
    let split = stratified_split(&records, SplitRatios::default(), seed)?;
    out.raw("split.tsv", split.to_tsv().as_bytes())?;
    let [tr, va, te] = split.counts();
    emit(out, "split_summary.tsv", &format!("split\tcount\ntrain\t{tr}\nvalidation\t{va}\ntest\t{te}\n"))
}

fn load_split(path: Option<&Path>, records: &[LabeledRecord], seed: u64) -> Result<SplitAssignment> {
    match path {
        Some(p) => Ok(SplitAssignment::from_tsv(&io::load_text(p)?)?),
        None => Ok(stratified_split(records, SplitRatios::default(), seed)?),
    }
}

fn train_cmd(out: &Output, a: &TrainArgs, seed: u64, embed: &dyn EmbeddingProvider) -> Result<()> {
    let records = io::load_labeled(&a.labeled)?;
    let split = load_split(a.split.as_deref(), &records, seed)?;
    let config = TrainConfig {
        learning_rate: a.learning_rate,
        epochs: a.epochs,
        patience: a.patience,
        l2: a.l2,
        seed,
        steps_per_epoch: a.steps_per_epoch,
    };
    let model = train(
        &split.select(&records, Split::Train),
        &split.select(&records, Split::Validation),
        &config,
        embed,
    )?;
    out.raw("model.json", model.to_text().as_bytes())?;
    let mut body = String::from("epoch\ttrain_loss\tvalidation_loss\n");
    for p in &model.metadata.loss_trace {
        let v = p.validation_loss.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"));
        writeln!(body, "{}\t{:.6}\t{v}", p.epoch, p.train_loss)?;
    }
    emit(out, "training.tsv", &body)
}

fn eval_classifier(out: &Output, a: &EvalClassifierArgs, embed: &dyn EmbeddingProvider) -> Result<()> {
    let records = io::load_labeled(&a.labeled)?;
    let test = match &a.split {
        Some(p) => SplitAssignment::from_tsv(&io::load_text(p)?)?.select(&records, Split::Test),
        None => records,
    };
    let mut model = None;
    let scorer = load_scorer(&a.scorer, &mut model, embed)?;
    let e = evaluate(scorer.as_ref(), &test)?;
    let c = e.confusion;
    let body = format!(
        "records\t{}\naccuracy\t{:.4}\nmacro_f1\t{:.4}\ntrue_coherent\t{}\nfalse_coherent\t{}\ntrue_incoherent\t{}\nfalse_incoherent\t{}\n",
        c.total(),
        e.accuracy,
        e.macro_f1,
        c.true_coherent,
        c.false_coherent,
        c.true_incoherent,
        c.false_incoherent
    );
    emit(out, "classifier_eval.tsv", &body)
}

fn predict_cmd(out: &Output, a: &PredictArgs, embed: &dyn EmbeddingProvider) -> Result<()> {
    let records = io::load_records(&a.records, "")?;
    let mut model = None;
    let scorer = load_scorer(&a.scorer, &mut model, embed)?;
    let mut body = String::new();
    for r in &records {
        let p = scorer.predict(&r.query, &r.facets)?;
        let line = serde_json::json!({
            "query": r.query.text(),
            "facets": r.facets.raw_texts(),
            "score": p.score,
            "label": p.label,
        });
        writeln!(body, "{line}")?;
    }
    out.raw("predictions.jsonl", body.as_bytes())?;
    print!("{body}");
    Ok(())
}

fn prevalence_cmd(out: &Output, a: &PrevalenceArgs, embed: &dyn EmbeddingProvider) -> Result<()> {
    let records = io::load_records(&a.records, "")?;
    let mut model = None;
    let scorer = load_scorer(&a.scorer, &mut model, embed)?;
    let r = prevalence(scorer.as_ref(), &records, a.group_by_m)?;
    let mut body = String::from("M\trecords\tincoherent\tfraction\n");
    for row in &r.by_m {
        writeln!(body, "{}\t{}\t{}\t{:.4}", row.m, row.records, row.incoherent, row.fraction)?;
    }
    writeln!(body, "all\t{}\t{}\t{:.4}", r.records, r.incoherent, r.fraction)?;
    emit(out, "prevalence.tsv", &body)
}

fn trinomial_cmd(out: &Output, a: &TrinomialArgs) -> Result<()> {
    let counts = PairwiseCounts::new(a.wins, a.ties, a.losses, a.criterion);
    let result = trinomial_pvalue(&counts)?;
    emit(out, "trinomial.tsv", &format_pairwise_table(&[(counts, result)], a.alpha))
}

fn subset_cmd(out: &Output, a: &SubsetTestArgs, seed: u64) -> Result<()> {
    let xs = io::load_numbers(&a.a)?;
    let ys = io::load_numbers(&a.b)?;
    let t = subset_significance(&xs, &ys, a.permutations, seed)?;
    let body = format!(
        "n_a\tn_b\tmean_a\tmean_b\tdiff\tpermutations\tp_value\n{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{}\t{:.6}\n",
        xs.len(),
        ys.len(),
        t.mean_a,
        t.mean_b,
        t.observed_diff,
        t.permutations,
        t.p_value
    );
    emit(out, "subset_test.tsv", &body)
}

fn aggregate_cmd(out: &Output, a: &AggregateArgs) -> Result<()> {
    let mut rows = Vec::new();
    let mut incomplete = 0;
    for path in &a.exports {
        let text = io::load_text(path)?;
        let export: Export =
            serde_json::from_str(&text).with_context(|| format!("parsing export {}", path.display()))?;
        let agg = aggregate_pairwise(&export.comparisons, export.criterion);
        incomplete += export.incomplete.len() + agg.incomplete.len();
        let result = trinomial_pvalue(&agg.counts)
            .with_context(|| format!("{}: no complete comparisons", path.display()))?;
        rows.push((agg.counts, result));
    }
    let mut body = String::from("criterion\twins_a\tties\twins_b\n");
    for (c, _) in &rows {
        writeln!(body, "{}\t{}\t{}\t{}", c.criterion, c.wins_a, c.ties, c.wins_b)?;
    }
    body.push('\n');
    body.push_str(&format_pairwise_table(&rows, a.alpha));
    writeln!(body, "# incomplete tasks: {incomplete}")?;
    emit(out, "pairwise.tsv", &body)
}

fn serve_cmd(a: &ServeArgs, seed: u64) -> Result<()> {
    let references = io::load_records(&a.reference, "")?;
    let candidates = io::load_records(&a.generated, "model")?;
    let (pairs, unpaired) = pair_records(&references, &candidates);
    for u in unpaired {
        eprintln!("warning: unpaired {} query {:?}", u.side, u.query);
    }
    let pairs: Vec<ComparisonPair> = pairs
        .into_iter()
        .map(|p| ComparisonPair {
            query: p.reference.query,
            ground_truth: p.reference.facets,
            generated: p.candidate.facets,
        })
        .collect();
    let gold: Vec<GoldItem> = io::load_jsonl(&a.gold)?;
    let config = ServiceConfig {
        seed,
        judgments_per_task: a.judgments_per_task,
        qualification_threshold: a.qualification_threshold,
        log_path: a.log.clone(),
    };
    let service = AnnotationService::open(config, &pairs, gold)?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&a.addr)
            .await
            .with_context(|| format!("binding {}", a.addr))?;
        eprintln!("listening on {}", listener.local_addr()?);
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        facetkit_annotation::http::serve(listener, service, shutdown).await?;
        Ok(())
    })
}
