//! Cross-validated training of every member classifier over several runs,
//! followed by evaluation of every combination of runs through the ensemble.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kfold::{kfold_split, Fold};
use super::metrics::{mean_std, per_class_metrics, ConfusionMatrix, MetricsReport};
use crate::classifier::{train, TrainConfig};
use crate::corpus::Corpus;
use crate::ensemble::{
    check_member_count, combine_votes, member_vote, DecisionMethod, EnsembleScheme,
};
use crate::error::{Error, Result};
use crate::features::{FeatureCombination, TendencyMode};
use crate::label::{ClassDistribution, ClassLabel};
use crate::pipeline::prepare_fold;
use crate::{persist, seed};

/// What an experiment evaluates: an ensemble scheme or one classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "name")]
pub enum Target {
    Scheme(EnsembleScheme),
    Single(FeatureCombination),
}

impl Target {
    pub fn members(self) -> Vec<FeatureCombination> {
        match self {
            Target::Scheme(s) => s.members().to_vec(),
            Target::Single(c) => vec![c],
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Scheme(s) => write!(f, "scheme {s} ({})", s.member_label()),
            Target::Single(c) => write!(f, "single {c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub target: Target,
    pub folds: usize,
    pub runs: usize,
    pub seed: u64,
    #[serde(default)]
    pub stratified_folds: bool,
    #[serde(default)]
    pub tendency_mode: TendencyMode,
    #[serde(default)]
    pub train: TrainConfig,
}

/// Named protocol sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// 5 folds, 3 runs per classifier.
    #[default]
    Desk,
    /// 10 folds, 15 runs per classifier (5 for five-member schemes).
    Full,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "full" => Ok(Preset::Full),
            other => Err(Error::InvalidArgument(format!("unknown preset {other:?}"))),
        }
    }
}

impl ExperimentPlan {
    pub fn preset(target: Target, preset: Preset, seed: u64) -> Self {
        let (folds, runs) = match preset {
            Preset::Desk => (5, 3),
            Preset::Full if target.members().len() == 5 => (10, 5),
            Preset::Full => (10, 15),
        };
        ExperimentPlan {
            target,
            folds,
            runs,
            seed,
            stratified_folds: false,
            tendency_mode: TendencyMode::FoldLocal,
            train: TrainConfig::default(),
        }
    }

    pub fn members(&self) -> Vec<FeatureCombination> {
        self.target.members()
    }

    /// Number of run tuples evaluated: runs to the power of member count.
    pub fn enumeration_size(&self) -> Result<usize> {
        let m = self.members().len() as u32;
        self.runs
            .checked_pow(m)
            .ok_or_else(|| Error::Config(format!("{}^{m} run combinations overflow", self.runs)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config(format!(
                "folds must be at least 2, got {}",
                self.folds
            )));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be positive".into()));
        }
        if let Target::Scheme(_) = self.target {
            check_member_count(self.members().len())?;
        }
        let size = self.enumeration_size()?;
        if size > 50_000_000 {
            return Err(Error::Config(format!(
                "{size} run combinations is too many"
            )));
        }
        self.train.validate()
    }

    pub fn run_seed(&self, fold: usize, member: FeatureCombination, run: usize) -> u64 {
        seed::derive(
            self.seed,
            "run",
            &[fold as u64, member.code() as u64, run as u64],
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub fold: usize,
    pub member: FeatureCombination,
    pub run: usize,
    pub seed: u64,
    pub selected_epoch: usize,
    pub val_loss: f64,
    pub val_accuracy: f64,
    /// Weighted F of this run alone on its test fold.
    pub test_f: f64,
}

/// Evaluation of one member classifier on its own, across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleResult {
    pub combination: FeatureCombination,
    /// Summed over runs and folds.
    pub confusion: ConfusionMatrix,
    pub report: MetricsReport,
    pub f_mean: f64,
    pub f_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub plan: ExperimentPlan,
    pub members: Vec<FeatureCombination>,
    pub tweet_ids: Vec<String>,
    pub gold: Vec<ClassLabel>,
    /// Fold in which each tweet was tested.
    pub fold_of: Vec<usize>,
    /// `predictions[member][run][tweet]`, in corpus order.
    pub predictions: Vec<Vec<Vec<ClassDistribution>>>,
    pub runs: Vec<RunRecord>,
    pub enumeration_size: usize,
    /// Summed over every run tuple and fold.
    pub confusion: ConfusionMatrix,
    pub report: MetricsReport,
    /// Weighted F of each run tuple, in enumeration order.
    pub tuple_f: Vec<f64>,
    pub f_mean: f64,
    pub f_std: f64,
    /// Running mean of `tuple_f`.
    pub convergence: Vec<f64>,
    /// Share of ensemble decisions reached by the confidence fallback.
    pub confidence_share: f64,
    pub singles: Vec<SingleResult>,
}

impl ExperimentResults {
    pub fn is_ensemble(&self) -> bool {
        matches!(self.plan.target, Target::Scheme(_))
    }
}

/// Run indices for tuple `t`, one per member, first member varying slowest.
pub fn tuple_runs(mut t: usize, runs: usize, members: usize) -> Vec<usize> {
    let mut out = vec![0; members];
    for slot in out.iter_mut().rev() {
        *slot = t % runs;
        t /= runs;
    }
    out
}

struct JobOutput {
    record: RunRecord,
    test: Vec<usize>,
    dists: Vec<ClassDistribution>,
}

/// Runs the full protocol. With `model_dir`, every trained model is saved
/// there as `fold{f}_{member}_run{r}.hsm` as soon as it is trained.
pub fn run_experiment(
    plan: &ExperimentPlan,
    corpus: &Corpus,
    model_dir: Option<&Path>,
) -> Result<ExperimentResults> {
    plan.validate()?;
    let folds: Vec<Fold> = kfold_split(corpus, plan.folds, plan.seed, plan.stratified_folds)?;
    let members = plan.members();
    let text = plan.train.text_settings();

    let prepared = folds
        .par_iter()
        .map(|f| prepare_fold(corpus, &f.train, &f.test, &text, plan.tendency_mode))
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize, usize)> = (0..folds.len())
        .flat_map(|f| (0..members.len()).flat_map(move |m| (0..plan.runs).map(move |r| (f, m, r))))
        .collect();
    let outputs = jobs
        .par_iter()
        .map(|&(f, m, r)| -> Result<JobOutput> {
            let data = &prepared[f];
            let member = members[m];
            let cfg = TrainConfig {
                seed: plan.run_seed(f, member, r),
                ..plan.train.clone()
            };
            let outcome = train(
                &data.train,
                &data.vocab,
                data.tendency.priors(),
                member,
                &cfg,
            )?;
            if let Some(dir) = model_dir {
                let path = dir.join(format!("fold{f}_{member}_run{r}.hsm"));
                persist::save(&outcome.model, &path)?;
            }
            let dists = outcome.model.predict_examples(&data.test)?;
            let cm = ConfusionMatrix::from_pairs(
                data.test
                    .iter()
                    .zip(&dists)
                    .map(|(e, d)| (e.label, d.argmax().0)),
            );
            let sel = *outcome.selected();
            let record = RunRecord {
                fold: f,
                member,
                run: r,
                seed: cfg.seed,
                selected_epoch: sel.epoch,
                val_loss: sel.val_loss,
                val_accuracy: sel.val_accuracy,
                test_f: per_class_metrics(&cm).f_score,
            };
            log::info!(
                "fold {f} {member} run {r}: epoch {} val_acc {:.4} test F {:.4}",
                record.selected_epoch,
                record.val_accuracy,
                record.test_f
            );
            Ok(JobOutput {
                record,
                test: data.test.iter().map(|e| e.tweet).collect(),
                dists,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = corpus.len();
    let gold: Vec<ClassLabel> = corpus.tweets().iter().map(|t| t.label()).collect();
    let mut fold_of = vec![0; n];
    for (f, fold) in folds.iter().enumerate() {
        for &i in &fold.test {
            fold_of[i] = f;
        }
    }
    let mut predictions =
        vec![vec![vec![ClassDistribution::uniform(); n]; plan.runs]; members.len()];
    let mut runs = Vec::with_capacity(outputs.len());
    for (out, &(_, m, r)) in outputs.into_iter().zip(&jobs) {
        for (&i, d) in out.test.iter().zip(out.dists) {
            predictions[m][r][i] = d;
        }
        runs.push(out.record);
    }

    let votes: Vec<Vec<Vec<(ClassLabel, f64)>>> = predictions
        .iter()
        .map(|per_run| {
            per_run
                .iter()
                .map(|ds| ds.iter().map(member_vote).collect())
                .collect()
        })
        .collect();
    let size = plan.enumeration_size()?;
    let tuples: Vec<(ConfusionMatrix, usize)> = (0..size)
        .into_par_iter()
        .map(|t| {
            let run_of = tuple_runs(t, plan.runs, members.len());
            let mut cm = ConfusionMatrix::new();
            let mut fallback = 0;
            let mut ballot = vec![(ClassLabel::Neutral, 0.0); members.len()];
            for i in 0..n {
                for (m, slot) in ballot.iter_mut().enumerate() {
                    *slot = votes[m][run_of[m]][i];
                }
                let label = if members.len() == 1 {
                    ballot[0].0
                } else {
                    let (label, method, _) = combine_votes(&ballot);
                    fallback += usize::from(method == DecisionMethod::Confidence);
                    label
                };
                cm.record(gold[i], label);
            }
            (cm, fallback)
        })
        .collect();

    let mut confusion = ConfusionMatrix::new();
    let mut fallbacks = 0usize;
    let mut tuple_f = Vec::with_capacity(size);
    for (cm, fb) in &tuples {
        confusion.add(cm);
        fallbacks += fb;
        tuple_f.push(per_class_metrics(cm).f_score);
    }
    let (f_mean, f_std) = mean_std(&tuple_f);
    let mut convergence = Vec::with_capacity(size);
    let mut acc = 0.0;
    for (j, f) in tuple_f.iter().enumerate() {
        acc += f;
        convergence.push(acc / (j + 1) as f64);
    }

    let singles = members
        .iter()
        .enumerate()
        .map(|(m, &combination)| {
            let mut total = ConfusionMatrix::new();
            let mut fs = Vec::with_capacity(plan.runs);
            for r in 0..plan.runs {
                let cm = ConfusionMatrix::from_pairs((0..n).map(|i| (gold[i], votes[m][r][i].0)));
                fs.push(per_class_metrics(&cm).f_score);
                total.add(&cm);
            }
            let (f_mean, f_std) = mean_std(&fs);
            SingleResult {
                combination,
                confusion: total,
                report: per_class_metrics(&total),
                f_mean,
                f_std,
            }
        })
        .collect();

    Ok(ExperimentResults {
        plan: plan.clone(),
        members,
        tweet_ids: corpus.tweets().iter().map(|t| t.tweet_id.clone()).collect(),
        gold,
        fold_of,
        predictions,
        runs,
        enumeration_size: size,
        report: per_class_metrics(&confusion),
        confusion,
        tuple_f,
        f_mean,
        f_std,
        convergence,
        confidence_share: fallbacks as f64 / (size * n).max(1) as f64,
        singles,
    })
}
