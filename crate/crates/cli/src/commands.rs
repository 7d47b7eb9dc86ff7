//! Subcommand definitions and their implementations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use infodemic_core::corpus::{default_stopwords, frequent_terms, parse_stopwords, Corpus, Split};
use infodemic_core::ensemble::{ensemble_predict, evaluate, misclassification_report, Metrics, ProbVector};
use infodemic_core::model::train_classifier;
use infodemic_core::preprocess::Preprocessor;
use infodemic_core::Label;

use crate::archive::ModelArchive;
use crate::config::{parse_model, parse_tie, RunConfig};
use crate::error::{CliError, Result};
use crate::io::{self, emit, metric, read_corpus, tsv_cell};

/// Weighted averages first, then macro averages.
pub const METRICS_HEADER: &str =
    "model\tPrecision\tRecall\tAccuracy\tF1-Score\tMacro-Precision\tMacro-Recall\tMacro-F1";

#[derive(Debug, Parser)]
#[command(name = "infodemic", version, about = "Fake-news detection for short social-media posts")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tokenize a dataset with the configured pipeline.
    Preprocess(PreprocessArgs),
    /// Train one model and write its archive.
    Train(TrainArgs),
    /// Predict with one archive, or average several into an ensemble.
    Predict(PredictArgs),
    /// Score prediction files against a labeled dataset.
    Evaluate(EvaluateArgs),
    /// Most frequent tokens of one class.
    ReportTerms(ReportTermsArgs),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long, value_name = "TSV")]
    pub dataset: Option<PathBuf>,
    /// Output file (stdout when absent).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Model kind: logreg, svm, pac, mlp, lstm, bilstm_attn, cnn, cnn_bilstm,
    /// encoder, encoder_shared, encoder_relative.
    #[arg(long)]
    pub model: Option<String>,
    /// Labeled training set.
    #[arg(long, value_name = "TSV")]
    pub dataset: Option<PathBuf>,
    /// Labeled validation set for early stopping and the reported metrics.
    #[arg(long, value_name = "TSV")]
    pub valid: Option<PathBuf>,
    /// Pretrained embeddings in whitespace text format.
    #[arg(long, value_name = "FILE")]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Archive to write.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Also write the per-epoch history TSV here.
    #[arg(long, value_name = "FILE")]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Comma-separated archives; more than one averages their probabilities.
    #[arg(long, value_delimiter = ',', value_name = "ARCHIVES")]
    pub members: Vec<PathBuf>,
    #[arg(long, value_name = "TSV")]
    pub dataset: Option<PathBuf>,
    /// Output file (stdout when absent).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Label for an exact 0.5 probability: fake or real.
    #[arg(long)]
    pub tie: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Comma-separated prediction files, one metrics row each.
    #[arg(long, value_delimiter = ',', value_name = "FILES")]
    pub predictions: Vec<PathBuf>,
    /// Predictions of the ensemble, added as the last row and report column.
    #[arg(long, value_name = "FILE")]
    pub ensemble: Option<PathBuf>,
    /// Labeled gold dataset.
    #[arg(long, value_name = "TSV")]
    pub dataset: Option<PathBuf>,
    /// Metrics table (stdout when absent).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Confusion matrices (stderr when absent).
    #[arg(long, value_name = "FILE")]
    pub confusion: Option<PathBuf>,
    /// Misclassification report.
    #[arg(long, value_name = "FILE")]
    pub misclassified: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportTermsArgs {
    #[arg(long, value_name = "TSV")]
    pub dataset: Option<PathBuf>,
    /// fake or real.
    #[arg(long, default_value = "fake")]
    pub label: String,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// One stopword per line; the built-in English list when absent.
    #[arg(long, value_name = "FILE")]
    pub stopwords: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Preprocess(a) => preprocess(config, a),
        Command::Train(a) => train(config, a),
        Command::Predict(a) => predict(config, a),
        Command::Evaluate(a) => evaluate_cmd(config, a),
        Command::ReportTerms(a) => report_terms(config, a),
    }
}

fn required(flag: &str, value: Option<PathBuf>) -> Result<PathBuf> {
    value.ok_or_else(|| CliError::Usage(format!("--{flag} is required (flag or config file)")))
}

fn preprocess(config: RunConfig, args: PreprocessArgs) -> Result<()> {
    let dataset = required("dataset", args.dataset.or(config.paths.dataset))?;
    let out = args.out.or(config.paths.out);
    let corpus = read_corpus(&dataset, Split::Unlabeled, false)?;
    let pre = Preprocessor::new(config.settings.pipeline);
    let mut text = String::from("id\ttokens\n");
    for r in corpus.records() {
        let seq = pre.process(&r.text, &r.id);
        let _ = writeln!(text, "{}\t{}", r.id, seq.tokens.join(" "));
    }
    emit(out.as_deref(), &text)
}

pub fn metrics_row(name: &str, m: &Metrics) -> String {
    format!(
        "{name}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        metric(m.precision),
        metric(m.recall),
        metric(m.accuracy),
        metric(m.f1),
        metric(m.macro_precision),
        metric(m.macro_recall),
        metric(m.macro_f1)
    )
}

fn train(mut config: RunConfig, args: TrainArgs) -> Result<()> {
    if let Some(name) = &args.model {
        config.model = Some(parse_model(name)?);
    }
    if let Some(seed) = args.seed {
        config.settings.seed = seed;
    }
    let kind = config.model.ok_or_else(|| CliError::Usage("--model is required (flag or config file)".into()))?;
    let dataset = required("dataset", args.dataset.or(config.paths.dataset))?;
    let out = required("out", args.out.or(config.paths.out))?;
    let valid_path = args.valid.or(config.paths.valid);
    let embeddings_path = args.embeddings.or(config.paths.embeddings);

    let train_set = read_corpus(&dataset, Split::Train, true)?;
    let valid = valid_path.as_deref().map(|p| read_corpus(p, Split::Valid, true)).transpose()?;
    let embeddings = embeddings_path.as_deref().map(io::read_embeddings).transpose()?;
    log::info!("training {kind} on {} records (seed {})", train_set.len(), config.settings.seed);

    let (classifier, history) = train_classifier(kind, &config.settings, &train_set, valid.as_ref(), embeddings.as_ref())?;
    for r in &history.epochs {
        log::info!("epoch {}: loss {:.6}, f1 {:.6}", r.epoch, r.train_loss, r.valid_f1);
    }

    let (scored, scored_name) = match &valid {
        Some(v) => (v, "validation"),
        None => (&train_set, "training"),
    };
    let metrics = score(&classifier.predict_corpus(scored)?, scored, config.tie)?;
    log::info!("{scored_name} metrics for {kind}");

    let archive = ModelArchive::new(classifier, &config.settings, &history);
    archive.save(&out)?;
    if let Some(h) = args.history {
        io::write_atomic(&h, archive.history.as_bytes())?;
    }
    emit(None, &format!("{METRICS_HEADER}\n{}\n", metrics_row(kind.as_str(), &metrics)))
}

fn score(probs: &[ProbVector], corpus: &Corpus, tie: infodemic_core::ensemble::TieBreak) -> Result<Metrics> {
    let preds: Vec<Label> = probs.iter().map(|p| p.predict(tie)).collect();
    Ok(evaluate(&preds, &corpus.labels()?)?)
}

fn predict(mut config: RunConfig, args: PredictArgs) -> Result<()> {
    if let Some(t) = &args.tie {
        config.tie = parse_tie(t)?;
    }
    let members = if args.members.is_empty() { config.paths.members } else { args.members };
    if members.is_empty() {
        return Err(CliError::Usage("--members needs at least one archive".into()));
    }
    let dataset = required("dataset", args.dataset.or(config.paths.dataset))?;
    let out = args.out.or(config.paths.out);

    let archives: Vec<ModelArchive> = members.iter().map(|p| ModelArchive::load(p)).collect::<Result<_>>()?;
    let corpus = read_corpus(&dataset, Split::Unlabeled, false)?;
    let per_member: Vec<Vec<ProbVector>> =
        archives.iter().map(|a| a.classifier.predict_corpus(&corpus)).collect::<infodemic_core::Result<_>>()?;
    let probs = if per_member.len() == 1 { per_member.into_iter().next().expect("one member") } else { ensemble_predict(&per_member)? };
    let ids: Vec<&str> = corpus.records().iter().map(|r| r.id.as_str()).collect();
    let labels: Vec<Label> = probs.iter().map(|p| p.predict(config.tie)).collect();
    emit(out.as_deref(), &io::format_predictions(&ids, &probs, &labels))
}

/// Predicted labels in gold order; every gold id must appear exactly once.
fn align(path: &Path, gold: &Corpus) -> Result<Vec<Label>> {
    let preds = io::parse_predictions(path, &io::read_text(path)?)?;
    let mut by_id: BTreeMap<&str, Label> = BTreeMap::new();
    let mut duplicate = Vec::new();
    for p in &preds {
        if by_id.insert(p.id.as_str(), p.label).is_some() {
            duplicate.push(p.id.as_str());
        }
    }
    let gold_ids: BTreeSet<&str> = gold.records().iter().map(|r| r.id.as_str()).collect();
    let missing: Vec<&str> = gold.records().iter().map(|r| r.id.as_str()).filter(|id| !by_id.contains_key(id)).collect();
    let unknown: Vec<&str> = preds.iter().map(|p| p.id.as_str()).filter(|id| !gold_ids.contains(id)).collect();
    if missing.is_empty() && unknown.is_empty() && duplicate.is_empty() {
        return Ok(gold.records().iter().map(|r| by_id[r.id.as_str()]).collect());
    }
    let mut msg = format!("{}: prediction ids do not match the gold dataset", path.display());
    for (what, ids) in [("missing", &missing), ("not in gold", &unknown), ("duplicated", &duplicate)] {
        if !ids.is_empty() {
            let shown: Vec<&str> = ids.iter().take(10).copied().collect();
            let more = if ids.len() > 10 { format!(" (+{} more)", ids.len() - 10) } else { String::new() };
            let _ = write!(msg, "\n  {what}: {}{more}", shown.join(", "));
        }
    }
    Err(CliError::Data(msg))
}

fn model_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn evaluate_cmd(config: RunConfig, args: EvaluateArgs) -> Result<()> {
    let files = if args.predictions.is_empty() { config.paths.predictions } else { args.predictions };
    if files.is_empty() && args.ensemble.is_none() {
        return Err(CliError::Usage("--predictions needs at least one file".into()));
    }
    let dataset = required("dataset", args.dataset.or(config.paths.dataset))?;
    let gold = read_corpus(&dataset, Split::Test, true)?;
    let golds = gold.labels()?;

    let per_model: Vec<Vec<Label>> = files.iter().map(|p| align(p, &gold)).collect::<Result<_>>()?;
    let ensemble = args.ensemble.as_deref().map(|p| align(p, &gold)).transpose()?;
    let mut names: Vec<String> = files.iter().map(|p| model_name(p)).collect();
    let mut rows: Vec<&[Label]> = per_model.iter().map(Vec::as_slice).collect();
    if let Some(e) = &ensemble {
        names.push("ensemble".into());
        rows.push(e);
    }

    let mut table = format!("{METRICS_HEADER}\n");
    let mut confusion = String::from("model\tgold\tpred_fake\tpred_real\n");
    for (name, preds) in names.iter().zip(&rows) {
        let m = evaluate(preds, &golds)?;
        let _ = writeln!(table, "{}", metrics_row(name, &m));
        for gold_label in Label::ALL {
            let c = m.confusion[gold_label.index()];
            let _ = writeln!(confusion, "{name}\t{gold_label}\t{}\t{}", c[0], c[1]);
        }
    }
    emit(args.out.as_deref(), &table)?;
    match &args.confusion {
        Some(p) => io::write_atomic(p, confusion.as_bytes())?,
        None => eprint!("{confusion}"),
    }

    if let Some(path) = args.misclassified.or(config.paths.misclassified) {
        let report = misclassification_report(&gold, &per_model, ensemble.as_deref())?;
        let mut text = String::from("id\ttext\tgold");
        for n in names.iter().take(per_model.len()) {
            let _ = write!(text, "\t{n}");
        }
        if ensemble.is_some() {
            text.push_str("\tensemble");
        }
        text.push('\n');
        let mark = |ok: bool| if ok { "✓" } else { "✗" };
        for row in report {
            let _ = write!(text, "{}\t{}\t{}", row.id, tsv_cell(&row.text), row.gold);
            for v in &row.verdicts {
                let _ = write!(text, "\t{}", mark(*v));
            }
            if let Some(e) = row.ensemble {
                let _ = write!(text, "\t{}", mark(e));
            }
            text.push('\n');
        }
        io::write_atomic(&path, text.as_bytes())?;
    }
    Ok(())
}

fn report_terms(config: RunConfig, args: ReportTermsArgs) -> Result<()> {
    let dataset = required("dataset", args.dataset.or(config.paths.dataset))?;
    let label = Label::parse(&args.label).ok_or_else(|| CliError::Usage(format!("--label must be fake or real, not `{}`", args.label)))?;
    let stopwords = match args.stopwords.or(config.paths.stopwords) {
        Some(p) => parse_stopwords(&io::read_text(&p)?),
        None => default_stopwords(),
    };
    let corpus = read_corpus(&dataset, Split::Train, true)?;
    let pre = Preprocessor::new(config.settings.pipeline);
    let terms = frequent_terms(&corpus, label, args.k, &stopwords, &pre)?;
    let mut text = String::from("rank\ttoken\tcount\n");
    for (i, (tok, n)) in terms.iter().enumerate() {
        let _ = writeln!(text, "{}\t{tok}\t{n}", i + 1);
    }
    emit(args.out.as_deref().or(config.paths.out.as_deref()), &text)
}
