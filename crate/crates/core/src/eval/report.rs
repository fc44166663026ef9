//! Result files of an experiment.
//!
//! ```text
//! report.txt              human-readable summary tables
//! results.json            machine-readable summary (ResultsSummary)
//! confusion.tsv           accumulated confusion matrix
//! convergence.tsv         F of each run tuple and its running mean
//! decisions.tsv           per-tweet ensemble decisions for the first run tuple
//! predictions/<member>_run<r>.tsv   per-run distributions for every tweet
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::{
    tuple_runs, ExperimentPlan, ExperimentResults, RunRecord, SingleResult, Target,
};
use super::metrics::{ConfusionMatrix, MetricsReport};
use crate::ensemble::{combine, decisions_tsv};
use crate::error::{Error, Result};
use crate::features::FeatureCombination;
use crate::label::ClassLabel;

pub const SUMMARY_FILE: &str = "results.json";
pub const REPORT_FILE: &str = "report.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsSummary {
    pub plan: ExperimentPlan,
    pub members: Vec<FeatureCombination>,
    pub tweets: usize,
    pub enumeration_size: usize,
    pub confusion: ConfusionMatrix,
    pub report: MetricsReport,
    pub f_mean: f64,
    pub f_std: f64,
    pub confidence_share: f64,
    pub singles: Vec<SingleResult>,
    pub runs: Vec<RunRecord>,
}

impl From<&ExperimentResults> for ResultsSummary {
    fn from(r: &ExperimentResults) -> Self {
        ResultsSummary {
            plan: r.plan.clone(),
            members: r.members.clone(),
            tweets: r.gold.len(),
            enumeration_size: r.enumeration_size,
            confusion: r.confusion,
            report: r.report,
            f_mean: r.f_mean,
            f_std: r.f_std,
            confidence_share: r.confidence_share,
            singles: r.singles.clone(),
            runs: r.runs.clone(),
        }
    }
}

fn metrics_row(s: &mut String, name: &str, p: f64, r: f64, f: f64) {
    let _ = writeln!(s, "{name:<14} {p:>9.4} {r:>9.4} {f:>9.4}");
}

fn metrics_block(s: &mut String, report: &MetricsReport) {
    let _ = writeln!(
        s,
        "{:<14} {:>9} {:>9} {:>9}",
        "", "precision", "recall", "F"
    );
    metrics_row(
        s,
        "overall",
        report.precision,
        report.recall,
        report.f_score,
    );
    for c in ClassLabel::ALL {
        let m = report.class(c);
        let mut name = c.name().to_string();
        if m.precision_undefined || m.recall_undefined {
            name.push('*');
        }
        metrics_row(s, &name, m.precision, m.recall, m.f_score);
    }
}

fn confusion_block(s: &mut String, cm: &ConfusionMatrix) {
    let _ = writeln!(
        s,
        "{:<14} {:>12} {:>12} {:>12}",
        "true\\pred", "neutral", "racism", "sexism"
    );
    for t in ClassLabel::ALL {
        let row = cm.0[t.index()];
        let _ = writeln!(
            s,
            "{:<14} {:>12} {:>12} {:>12}",
            t.name(),
            row[0],
            row[1],
            row[2]
        );
    }
}

pub fn render_report(sum: &ResultsSummary) -> String {
    let mut s = String::new();
    let p = &sum.plan;
    let _ = writeln!(s, "Experiment: {}", p.target);
    let _ = writeln!(
        s,
        "folds {}  runs {}  seed {}  tendency {:?}  tweets {}  run tuples {}",
        p.folds, p.runs, p.seed, p.tendency_mode, sum.tweets, sum.enumeration_size
    );
    s.push('\n');
    let _ = writeln!(s, "Summary");
    let _ = writeln!(
        s,
        "{:<14} {:>9} {:>9} {:>9} {:>9}",
        "approach", "precision", "recall", "F", "F std"
    );
    let label = match p.target {
        Target::Scheme(e) => format!("ensemble {e}"),
        Target::Single(c) => format!("single {c}"),
    };
    let _ = writeln!(
        s,
        "{label:<14} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
        sum.report.precision, sum.report.recall, sum.report.f_score, sum.f_std
    );
    if matches!(p.target, Target::Scheme(_)) {
        for single in &sum.singles {
            let name = format!("single {}", single.combination);
            let _ = writeln!(
                s,
                "{name:<14} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                single.report.precision, single.report.recall, single.report.f_score, single.f_std
            );
        }
    }
    s.push('\n');
    let _ = writeln!(s, "Per-class metrics ({label})");
    metrics_block(&mut s, &sum.report);
    s.push('\n');
    let _ = writeln!(s, "Confusion matrix ({label}), rows = true label");
    confusion_block(&mut s, &sum.confusion);
    let _ = writeln!(s, "total {}", sum.confusion.total());
    if matches!(p.target, Target::Scheme(_)) {
        let _ = writeln!(
            s,
            "\nmean F over run tuples {:.4} (std {:.4}); confidence fallback share {:.4}",
            sum.f_mean, sum.f_std, sum.confidence_share
        );
    }
    if sum
        .report
        .per_class
        .iter()
        .any(|m| m.precision_undefined || m.recall_undefined)
    {
        let _ = writeln!(s, "* zero denominator; value reported as 0");
    }
    s
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes every result file into `dir`, creating it if needed.
pub fn write_results(results: &ExperimentResults, dir: &Path) -> Result<()> {
    if results.gold.is_empty() || results.enumeration_size == 0 {
        return Err(Error::InvalidArgument("no results to report".into()));
    }
    let pred_dir = dir.join("predictions");
    fs::create_dir_all(&pred_dir).map_err(|e| Error::io(&pred_dir, e))?;

    let summary = ResultsSummary::from(results);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write(&dir.join(SUMMARY_FILE), &(json + "\n"))?;
    write(&dir.join(REPORT_FILE), &render_report(&summary))?;
    write(&dir.join("confusion.tsv"), &results.confusion.to_tsv())?;

    let mut conv = String::from("tuple\truns\tf_score\tcumulative_mean\n");
    for (t, (f, c)) in results.tuple_f.iter().zip(&results.convergence).enumerate() {
        let runs = tuple_runs(t, results.plan.runs, results.members.len());
        let runs: Vec<String> = runs.iter().map(usize::to_string).collect();
        let _ = writeln!(conv, "{t}\t{}\t{f}\t{c}", runs.join(","));
    }
    write(&dir.join("convergence.tsv"), &conv)?;

    if let Target::Scheme(scheme) = results.plan.target {
        let decisions = (0..results.gold.len())
            .map(|i| {
                let outs: Vec<_> = results
                    .predictions
                    .iter()
                    .map(|per_run| per_run[0][i])
                    .collect();
                combine(&outs)
            })
            .collect::<Result<Vec<_>>>()?;
        let ids: Vec<&str> = results.tweet_ids.iter().map(String::as_str).collect();
        let gold: Vec<Option<ClassLabel>> = results.gold.iter().copied().map(Some).collect();
        write(
            &dir.join("decisions.tsv"),
            &decisions_tsv(scheme, &ids, &gold, &decisions),
        )?;
    }

    for (m, member) in results.members.iter().enumerate() {
        for (r, dists) in results.predictions[m].iter().enumerate() {
            let mut s = String::from("tweet_id\tfold\tgold\tp_neutral\tp_racism\tp_sexism\n");
            for (i, d) in dists.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    results.tweet_ids[i],
                    results.fold_of[i],
                    results.gold[i],
                    d.0[0],
                    d.0[1],
                    d.0[2]
                );
            }
            write(&pred_dir.join(format!("{member}_run{r}.tsv")), &s)?;
        }
    }
    Ok(())
}

pub fn read_summary(dir: &Path) -> Result<ResultsSummary> {
    let path = dir.join(SUMMARY_FILE);
    let s = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&s).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}

/// Re-renders `report.txt` from `results.json` in `dir`.
pub fn regenerate(dir: &Path) -> Result<String> {
    let sum = read_summary(dir)?;
    let text = render_report(&sum);
    write(&dir.join(REPORT_FILE), &text)?;
    Ok(text)
}
