//! Command-line interface. The binary only calls [`main`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::classifier::{history_tsv, train, TrainedModel};
use crate::config::Config;
use crate::corpus::{corpus_stats, load_corpus, resolve_dual_labels, Corpus, DualLabelPolicy};
use crate::ensemble::{check_member_count, combine, DecisionMethod};
use crate::error::{Error, Result};
use crate::eval::report::{regenerate, write_results};
use crate::eval::{
    per_class_metrics, run_experiment, ConfusionMatrix, ExperimentPlan, Preset, Target,
};
use crate::features::{FeatureCombination, TendencyIndex, TendencyMode};
use crate::label::{ClassDistribution, ClassLabel};
use crate::manifest::{experiment_seeds, InputFile, RunManifest, SeedRecord};
use crate::nn::{CellActivation, FeatureMode};
use crate::persist;
use crate::pipeline::prepare_fold;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_RUNTIME: u8 = 4;

/// Environment variable naming the directory default output paths live in.
pub const RESULTS_ROOT_ENV: &str = "HSD_RESULTS_ROOT";

#[derive(Debug, Parser)]
#[command(
    name = "hatespeech",
    version,
    about = "Tweet hate-speech classification with LSTM ensembles"
)]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dataset summary: class counts, users, dual labels, tendency correlation.
    Stats(StatsArgs),
    /// Train one classifier on a whole corpus.
    Train(TrainArgs),
    /// Classify tweets with one model or an ensemble of 3 or 5 models.
    Predict(PredictArgs),
    /// Cross-validate a single feature combination.
    Evaluate(EvaluateArgs),
    /// Cross-validate an ensemble scheme over every combination of runs.
    Experiment(ExperimentArgs),
    /// Re-render report.txt from a results directory.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct CorpusArgs {
    /// Corpus TSV: tweet_id, user_id, label, text.
    corpus: PathBuf,
    /// How tweets with both a neutral and a hateful label are resolved.
    #[arg(long, value_name = "POLICY")]
    policy: Option<DualLabelPolicy>,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// TOML config file; flags override its values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "N")]
    epochs: Option<usize>,
    #[arg(long, value_name = "N")]
    batch_size: Option<usize>,
    #[arg(long, value_name = "N")]
    hidden: Option<usize>,
    #[arg(long, value_name = "N")]
    embedding_dim: Option<usize>,
    #[arg(long, value_name = "N")]
    max_len: Option<usize>,
    #[arg(long, value_name = "N")]
    vocab_size: Option<usize>,
    #[arg(long)]
    activation: Option<CellActivation>,
    #[arg(long)]
    feature_mode: Option<FeatureMode>,
    #[arg(long, value_name = "MODE")]
    tendency_mode: Option<TendencyMode>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Also write stats.txt and stats.properties here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, short)]
    combination: FeatureCombination,
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory (default: $HSD_RESULTS_ROOT/train-<combination>).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Model files; 1 for a single classifier, 3 or 5 for an ensemble.
    #[arg(long = "model", short, required = true, num_args = 1..)]
    models: Vec<PathBuf>,
    /// Labeled corpus to classify (metrics are printed).
    #[arg(long, conflicts_with_all = ["unlabeled", "text"])]
    corpus: Option<PathBuf>,
    /// Unlabeled TSV to classify: tweet_id, user_id, text.
    #[arg(long, conflicts_with = "text")]
    unlabeled: Option<PathBuf>,
    /// A single tweet text.
    #[arg(long)]
    text: Option<String>,
    /// Author of --text.
    #[arg(long, default_value = "-")]
    user: String,
    /// Labeled corpus providing author histories for tendency features.
    #[arg(long, value_name = "FILE")]
    user_history: Option<PathBuf>,
    #[arg(long, value_name = "POLICY")]
    policy: Option<DualLabelPolicy>,
    /// Refuse models whose feature mode differs.
    #[arg(long)]
    feature_mode: Option<FeatureMode>,
    /// Write predictions here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    /// desk (5 folds, 3 runs) or full (10 folds, 15 runs; 5 for scheme xi).
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long)]
    stratified_folds: bool,
    /// Keep every trained model under <out>/models.
    #[arg(long)]
    save_models: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, short)]
    combination: FeatureCombination,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    plan: PlanArgs,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// Corpus TSV; not needed with --manifest.
    #[arg(required_unless_present = "manifest")]
    corpus: Option<PathBuf>,
    #[arg(long, value_name = "POLICY")]
    policy: Option<DualLabelPolicy>,
    #[arg(long, short, required_unless_present = "manifest")]
    scheme: Option<crate::ensemble::EnsembleScheme>,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    plan: PlanArgs,
    /// Re-run exactly what a previous manifest (file or results directory) describes.
    #[arg(long, conflicts_with_all = ["scheme", "config"])]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Results directory containing results.json.
    dir: PathBuf,
}

fn results_root() -> PathBuf {
    std::env::var_os(RESULTS_ROOT_ENV).map_or_else(|| PathBuf::from("results"), PathBuf::from)
}

fn out_dir(explicit: Option<PathBuf>, default_name: &str) -> Result<PathBuf> {
    let dir = explicit.unwrap_or_else(|| results_root().join(default_name));
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn load_resolved(path: &Path, policy: DualLabelPolicy) -> Result<Corpus> {
    let raw = load_corpus(path)?;
    let corpus = resolve_dual_labels(&raw, policy)?;
    if corpus.is_empty() {
        return Err(Error::Validation(format!(
            "{} has no usable tweets",
            path.display()
        )));
    }
    Ok(corpus)
}

fn apply_overrides(cfg: &mut Config, a: &ConfigArgs) {
    let t = &mut cfg.train;
    if let Some(v) = a.seed {
        t.seed = v;
        cfg.experiment.seed = v;
    }
    if let Some(v) = a.epochs {
        t.max_epochs = v;
    }
    if let Some(v) = a.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = a.hidden {
        t.hidden = v;
    }
    if let Some(v) = a.embedding_dim {
        t.embedding_dim = v;
    }
    if let Some(v) = a.max_len {
        t.max_len = v;
    }
    if let Some(v) = a.vocab_size {
        t.vocab_size = v;
    }
    if let Some(v) = a.activation {
        t.activation = v;
    }
    if let Some(v) = a.feature_mode {
        t.feature_mode = v;
    }
    if let Some(v) = a.tendency_mode {
        cfg.tendency_mode = v;
    }
}

fn load_config(a: &ConfigArgs, policy: Option<DualLabelPolicy>) -> Result<Config> {
    let mut cfg = Config::load_or_default(a.config.as_deref())?;
    apply_overrides(&mut cfg, a);
    if let Some(p) = policy {
        cfg.dual_label_policy = p;
    }
    cfg.train.validate()?;
    Ok(cfg)
}

fn cmd_stats(a: StatsArgs) -> Result<()> {
    let corpus = load_resolved(&a.corpus.corpus, a.corpus.policy.unwrap_or_default())?;
    let stats = corpus_stats(&corpus)?;
    let table = stats.to_table();
    print!("{table}");
    if let Some(dir) = a.out {
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_file(&dir.join("stats.txt"), &table)?;
        write_file(&dir.join("stats.properties"), &stats.to_key_values())?;
    }
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let cfg = load_config(&a.config, a.corpus.policy)?;
    let corpus = load_resolved(&a.corpus.corpus, cfg.dual_label_policy)?;
    let out = out_dir(a.out, &format!("train-{}", a.combination))?;
    let all: Vec<usize> = (0..corpus.len()).collect();
    let fold = prepare_fold(
        &corpus,
        &all,
        &[],
        &cfg.train.text_settings(),
        TendencyMode::FoldLocal,
    )?;
    let outcome = train(
        &fold.train,
        &fold.vocab,
        fold.tendency.priors(),
        a.combination,
        &cfg.train,
    )?;
    let model = &outcome.model;

    persist::save(model, &out.join("model.hsm"))?;
    fold.vocab.save(&out.join("vocab.tsv"))?;
    write_file(&out.join("profiles.tsv"), &fold.tendency.to_tsv())?;
    write_file(
        &out.join("history.tsv"),
        &history_tsv(&outcome.history, model.selected_epoch),
    )?;
    let history = serde_json::to_string_pretty(&outcome.history).expect("history serializes");
    write_file(&out.join("history.json"), &(history + "\n"))?;
    write_file(&out.join("config.toml"), &cfg.to_toml())?;
    let info = serde_json::json!({
        "combination": model.combination,
        "input_dimension": model.input_dimension(),
        "feature_count": model.combination.feature_count(),
        "network": model.network.spec,
        "parameters": model.network.parameter_count(),
        "selected_epoch": model.selected_epoch,
        "vocab_hash": model.vocab_hash(),
        "seed": model.seed,
    });
    write_file(
        &out.join("model.json"),
        &(serde_json::to_string_pretty(&info).expect("json") + "\n"),
    )?;

    let mut plan = cfg.plan(Target::Single(a.combination));
    plan.folds = 1;
    plan.runs = 1;
    let seeds = vec![SeedRecord {
        fold: 0,
        member: a.combination.to_string(),
        run: 0,
        seed: cfg.train.seed,
    }];
    RunManifest::new(
        "train",
        InputFile::hash(&a.corpus.corpus)?,
        cfg.dual_label_policy,
        &plan,
        seeds,
    )
    .write(&out)?;

    let sel = outcome.selected();
    println!(
        "trained {} (input dimension {}) on {} tweets; selected epoch {} (val loss {:.4}, val accuracy {:.4})",
        model.combination,
        model.input_dimension(),
        corpus.len(),
        sel.epoch,
        sel.val_loss,
        sel.val_accuracy
    );
    println!("wrote {}", out.display());
    Ok(())
}

/// Tweets to classify: id, author, text, gold label if known.
type Item = (String, String, String, Option<ClassLabel>);

fn parse_unlabeled(path: &Path) -> Result<Vec<Item>> {
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut items = Vec::new();
    for (n, line) in s.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.splitn(3, '\t').collect();
        if n == 0 && f[0].eq_ignore_ascii_case("tweet_id") {
            continue;
        }
        if f.len() < 3 {
            return Err(Error::Parse {
                line: n + 1,
                message: format!("expected tweet_id, user_id, text; found {} fields", f.len()),
            });
        }
        items.push((f[0].to_string(), f[1].to_string(), f[2].to_string(), None));
    }
    Ok(items)
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let n = a.models.len();
    if n != 1 {
        check_member_count(n)?;
    }
    let models = a
        .models
        .iter()
        .map(|p| match a.feature_mode {
            Some(mode) => persist::load_expecting(p, mode),
            None => persist::load(p),
        })
        .collect::<Result<Vec<TrainedModel>>>()?;
    persist::check_vocab_hashes(&models);
    let policy = a.policy.unwrap_or_default();

    let labeled = a
        .corpus
        .as_deref()
        .map(|p| load_resolved(p, policy))
        .transpose()?;
    let items: Vec<Item> = if let Some(c) = &labeled {
        c.tweets()
            .iter()
            .map(|t| {
                (
                    t.tweet_id.clone(),
                    t.user_id.clone(),
                    t.text.clone(),
                    Some(t.label()),
                )
            })
            .collect()
    } else if let Some(p) = &a.unlabeled {
        parse_unlabeled(p)?
    } else if let Some(text) = &a.text {
        vec![("-".into(), a.user.clone(), text.clone(), None)]
    } else {
        return Err(Error::InvalidArgument(
            "give one of --corpus, --unlabeled or --text".into(),
        ));
    };

    // Author histories: an explicit file, else the labeled corpus itself
    // with each tweet left out of its own profile.
    let history = match &a.user_history {
        Some(p) => Some((
            TendencyIndex::from_corpus(&load_resolved(p, policy)?)?,
            false,
        )),
        None => labeled
            .as_ref()
            .map(|c| TendencyIndex::from_corpus(c).map(|t| (t, true)))
            .transpose()?,
    };
    let profile_for = |user: &str, gold: Option<ClassLabel>, model: &TrainedModel| match &history {
        Some((index, self_included)) => {
            index.profile(user, if *self_included { gold } else { None })
        }
        None => model.priors,
    };

    let mut out = String::from("tweet_id\tpredicted\tmethod\tconfidence");
    if labeled.is_some() {
        out.push_str("\tgold");
    }
    out.push('\n');
    let mut cm = ConfusionMatrix::new();
    for (id, user, text, gold) in &items {
        let dists = models
            .iter()
            .map(|m| m.predict_text(text, &profile_for(user, *gold, m)))
            .collect::<Result<Vec<ClassDistribution>>>()?;
        let (label, method, confidence) = if n == 1 {
            let (l, p) = dists[0].argmax();
            (l, "single", p)
        } else {
            let d = combine(&dists)?;
            let method = match d.method {
                DecisionMethod::Vote => "vote",
                DecisionMethod::Confidence => "confidence",
            };
            let conf = d.decisive_member.map_or_else(
                || {
                    dists
                        .iter()
                        .filter(|x| x.argmax().0 == d.label)
                        .map(|x| x.argmax().1)
                        .fold(0.0, f64::max)
                },
                |m| dists[m].argmax().1,
            );
            (d.label, method, conf)
        };
        let _ = write!(out, "{id}\t{label}\t{method}\t{confidence:.6}");
        if let Some(g) = gold {
            let _ = write!(out, "\t{g}");
            cm.record(*g, label);
        }
        out.push('\n');
    }
    match &a.out {
        Some(p) => write_file(p, &out)?,
        None => print!("{out}"),
    }
    if labeled.is_some() {
        let r = per_class_metrics(&cm);
        eprintln!(
            "precision {:.4} recall {:.4} F {:.4} accuracy {:.4} over {} tweets",
            r.precision,
            r.recall,
            r.f_score,
            r.accuracy,
            cm.total()
        );
    }
    Ok(())
}

fn apply_plan_args(plan: &mut ExperimentPlan, cfg: &Config, a: &PlanArgs) {
    if let Some(p) = a.preset {
        let fresh = ExperimentPlan::preset(plan.target, p, plan.seed);
        plan.folds = fresh.folds;
        plan.runs = fresh.runs;
        if let Some(f) = cfg.experiment.folds {
            plan.folds = f;
        }
        if let Some(r) = cfg.experiment.runs {
            plan.runs = r;
        }
    }
    if let Some(f) = a.folds {
        plan.folds = f;
    }
    if let Some(r) = a.runs {
        plan.runs = r;
    }
    if a.stratified_folds {
        plan.stratified_folds = true;
    }
}

fn execute_plan(
    command: &str,
    plan: &ExperimentPlan,
    corpus_path: &Path,
    policy: DualLabelPolicy,
    out: &Path,
    save_models: bool,
) -> Result<()> {
    let input = InputFile::hash(corpus_path)?;
    let corpus = load_resolved(corpus_path, policy)?;
    let model_dir = if save_models {
        let d = out.join("models");
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        Some(d)
    } else {
        None
    };
    log::info!(
        "{} on {} tweets: {} folds x {} runs",
        plan.target,
        corpus.len(),
        plan.folds,
        plan.runs
    );
    let results = run_experiment(plan, &corpus, model_dir.as_deref())?;
    write_results(&results, out)?;
    RunManifest::new(command, input, policy, plan, experiment_seeds(plan)).write(out)?;
    print!("{}", regenerate(out)?);
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let cfg = load_config(&a.config, a.corpus.policy)?;
    let mut plan = cfg.plan(Target::Single(a.combination));
    apply_plan_args(&mut plan, &cfg, &a.plan);
    let out = out_dir(a.plan.out, &format!("evaluate-{}", a.combination))?;
    execute_plan(
        "evaluate",
        &plan,
        &a.corpus.corpus,
        cfg.dual_label_policy,
        &out,
        a.plan.save_models,
    )
}

fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    if let Some(m) = &a.manifest {
        let manifest = RunManifest::read(m)?;
        manifest.input.verify()?;
        let corpus = a.corpus.unwrap_or_else(|| manifest.input.path.clone());
        let name = match manifest.plan.target {
            Target::Scheme(s) => format!("experiment-{s}"),
            Target::Single(c) => format!("evaluate-{c}"),
        };
        let out = out_dir(a.plan.out, &name)?;
        return execute_plan(
            &manifest.command,
            &manifest.plan,
            &corpus,
            manifest.dual_label_policy,
            &out,
            a.plan.save_models,
        );
    }
    let scheme = a.scheme.expect("clap requires --scheme without --manifest");
    let corpus = a.corpus.expect("clap requires a corpus without --manifest");
    let cfg = load_config(&a.config, a.policy)?;
    let mut plan = cfg.plan(Target::Scheme(scheme));
    apply_plan_args(&mut plan, &cfg, &a.plan);
    let out = out_dir(a.plan.out, &format!("experiment-{scheme}"))?;
    execute_plan(
        "experiment",
        &plan,
        &corpus,
        cfg.dual_label_policy,
        &out,
        a.plan.save_models,
    )
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    print!("{}", regenerate(&a.dir)?);
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Stats(a) => cmd_stats(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Report(a) => cmd_report(a),
    }
}

/// Exit code for an error: usage, data or runtime.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) => EXIT_USAGE,
        Error::Io { .. } => EXIT_DATA,
        e if e.is_data_error() => EXIT_DATA,
        _ => EXIT_RUNTIME,
    }
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
