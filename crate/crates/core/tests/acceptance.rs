//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use hatespeech::classifier::{train, TrainConfig};
use hatespeech::corpus::write_corpus;
use hatespeech::ensemble::{combine, DecisionMethod, EnsembleScheme};
use hatespeech::eval::{
    kfold_split, per_class_metrics, run_experiment, weighted_f, ConfusionMatrix, ExperimentPlan,
    Preset, Target,
};
use hatespeech::features::{FeatureCombination, TendencyMode};
use hatespeech::nn::{gradient_check, CellActivation, FeatureMode, Network, NetworkSpec};
use hatespeech::pipeline::prepare_fold;
use hatespeech::{persist, ClassDistribution, ClassLabel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Published ensemble confusion counts with the Racism and Sexism rows in
/// the order their sums imply (Racism support 1943 x 15^3 = 6557625).
const ENSEMBLE_COUNTS: [[u64; 3]; 3] = [
    [35_314_416, 1_430_030, 5_929],
    [2_195_711, 4_357_971, 3_943],
    [24_295, 5_635, 10_655_320],
];

fn metric_oracle() -> Outcome {
    let cm = ConfusionMatrix(ENSEMBLE_COUNTS);
    if cm.row_sum(ClassLabel::Racism) != 1943 * 3375
        || cm.row_sum(ClassLabel::Sexism) != 3166 * 3375
    {
        return Err("row sums do not match class supports".into());
    }
    // Direct arithmetic, independent of the library.
    let col = |c: usize| -> u64 { ENSEMBLE_COUNTS.iter().map(|r| r[c]).sum() };
    let row = |r: usize| -> u64 { ENSEMBLE_COUNTS[r].iter().sum() };
    let oracle_pr = 4_357_971.0 / col(1) as f64;
    let oracle_rr = 4_357_971.0 / row(1) as f64;
    let oracle_ps = 10_655_320.0 / col(2) as f64;

    let r = per_class_metrics(&cm);
    let got = [
        r.class(ClassLabel::Racism).precision,
        r.class(ClassLabel::Racism).recall,
        r.class(ClassLabel::Sexism).precision,
    ];
    let oracle = [oracle_pr, oracle_rr, oracle_ps];
    let reference = [0.7522, 0.6646, 0.9991];
    let ok =
        (0..3).all(|i| (got[i] - reference[i]).abs() <= 5e-4 && (got[i] - oracle[i]).abs() < 1e-12);
    check(
        ok,
        format!(
            "P_R {:.4} (0.7522), R_R {:.4} (0.6646), P_S {:.4} (0.9991)",
            got[0], got[1], got[2]
        ),
    )
}

fn weighted_f_arithmetic() -> Outcome {
    let f = weighted_f([0.9508, 0.7057, 0.9981], [10889.0, 1943.0, 3166.0])
        .map_err(|e| e.to_string())?;
    let oracle = (0.9508 * 10889.0 + 0.7057 * 1943.0 + 0.9981 * 3166.0) / 15998.0;
    check(
        (f - 0.9308).abs() <= 0.0015 && (f - oracle).abs() < 1e-12,
        format!(
            "weighted F {f:.5} vs reported 0.9308 (|diff| {:.5})",
            (f - 0.9308).abs()
        ),
    )
}

fn gradient_correctness() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut models = 0;
    for seed in 0..10u64 {
        for act in [CellActivation::Sigmoid, CellActivation::Tanh] {
            let spec = NetworkSpec {
                token_rows: 12,
                embedding_dim: 4,
                hidden: 8,
                seq_len: 5,
                n_features: 3,
                activation: act,
                feature_mode: FeatureMode::Dense,
                masking: true,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let net = Network::init(spec, &mut rng).map_err(|e| e.to_string())?;
            let len = rng.gen_range(2..=5);
            let mut tokens: Vec<u32> = (0..len).map(|_| rng.gen_range(1..12)).collect();
            tokens.resize(5, 0);
            let a: f64 = rng.gen_range(0.0..1.0);
            let b: f64 = rng.gen_range(0.0..1.0 - a);
            let features = vec![a, b, 1.0 - a - b];
            let target = ClassLabel::ALL[rng.gen_range(0..3)];
            let report = gradient_check(&net, &tokens, &features, target, 1e-5, 1e-4)
                .map_err(|e| e.to_string())?;
            worst = worst.max(report.worst());
            models += 1;
        }
    }
    check(
        worst < 1e-4,
        format!("{models} models, worst block relative error {worst:.2e} (< 1e-4)"),
    )
}

fn learning_capability() -> Outcome {
    let corpus = common::separable_corpus(20, 42);
    let cfg = TrainConfig {
        hidden: 32,
        max_epochs: 200,
        ..TrainConfig::default()
    };
    let all: Vec<usize> = (0..corpus.len()).collect();
    let fold = prepare_fold(
        &corpus,
        &all,
        &[],
        &cfg.text_settings(),
        TendencyMode::FoldLocal,
    )
    .map_err(|e| e.to_string())?;
    let out = train(
        &fold.train,
        &fold.vocab,
        fold.tendency.priors(),
        FeatureCombination::O,
        &cfg,
    )
    .map_err(|e| e.to_string())?;
    let first_full = out
        .history
        .iter()
        .find(|r| r.train_accuracy == 1.0)
        .map(|r| r.epoch);
    let sel = *out.selected();
    let ln3 = 3f64.ln();
    check(
        first_full.is_some() && sel.train_loss < ln3 && sel.val_loss < ln3,
        format!(
            "{} tweets: 100% training accuracy at epoch {:?}; selected epoch {} train loss {:.4}, val loss {:.4} (ln 3 = {ln3:.4})",
            corpus.len(),
            first_full,
            sel.epoch,
            sel.train_loss,
            sel.val_loss
        ),
    )
}

/// Line-by-line transcription of the ensemble decision procedure for three
/// classifiers: take each classifier's top class and its value, return the
/// mode of the classes if one exists, otherwise the class of the largest value.
fn algorithm_oracle(dists: &[[f64; 3]; 3]) -> (ClassLabel, bool) {
    let mut classes = [0usize; 3];
    let mut values = [0f64; 3];
    for (k, d) in dists.iter().enumerate() {
        let mut best = 0;
        for c in 1..3 {
            if d[c] > d[best] {
                best = c;
            }
        }
        classes[k] = best;
        values[k] = d[best];
    }
    let mut mode = None;
    for c in 0..3 {
        if classes.iter().filter(|&&x| x == c).count() >= 2 {
            mode = Some(c);
        }
    }
    if let Some(c) = mode {
        return (ClassLabel::from_index(c).unwrap(), true);
    }
    let mut k_best = 0;
    for k in 1..3 {
        if values[k] > values[k_best] {
            k_best = k;
        }
    }
    (ClassLabel::from_index(classes[k_best]).unwrap(), false)
}

fn dist_for(label: usize, confidence: f64) -> [f64; 3] {
    let mut d = [(1.0 - confidence) / 2.0; 3];
    d[label] = confidence;
    d
}

fn ensemble_oracle() -> Outcome {
    let perms = [
        [0.5, 0.6, 0.7],
        [0.5, 0.7, 0.6],
        [0.6, 0.5, 0.7],
        [0.6, 0.7, 0.5],
        [0.7, 0.5, 0.6],
        [0.7, 0.6, 0.5],
    ];
    let mut cases = 0;
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                for conf in perms {
                    let dists = [
                        dist_for(a, conf[0]),
                        dist_for(b, conf[1]),
                        dist_for(c, conf[2]),
                    ];
                    let (label, voted) = algorithm_oracle(&dists);
                    let got = combine(&dists.map(ClassDistribution)).map_err(|e| e.to_string())?;
                    if got.label != label || (got.method == DecisionMethod::Vote) != voted {
                        return Err(format!(
                            "mismatch on labels ({a},{b},{c}) confidences {conf:?}"
                        ));
                    }
                    cases += 1;
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..10_000 {
        let dists: [[f64; 3]; 3] = std::array::from_fn(|_| {
            let l = rng.gen_range(0..3);
            dist_for(l, rng.gen_range(0.34..1.0))
        });
        let (label, voted) = algorithm_oracle(&dists);
        let got = combine(&dists.map(ClassDistribution)).map_err(|e| e.to_string())?;
        if got.label != label || (got.method == DecisionMethod::Vote) != voted {
            return Err(format!("mismatch on random case {dists:?}"));
        }
    }
    check(
        true,
        format!("{cases} enumerated cases and 10000 random triples agree"),
    )
}

fn desk_train_config() -> TrainConfig {
    TrainConfig {
        hidden: 16,
        embedding_dim: 8,
        batch_size: 50,
        max_epochs: 40,
        max_len: 12,
        ..TrainConfig::default()
    }
}

fn feature_uplift() -> Outcome {
    let corpus = common::skewed_corpus(1200, 60, 0.3, 7);
    let mut f_o = Vec::new();
    let mut f_nrs = Vec::new();
    for seed in 1..=3u64 {
        for (c, acc) in [
            (FeatureCombination::O, &mut f_o),
            (FeatureCombination::NRS, &mut f_nrs),
        ] {
            let mut plan = ExperimentPlan::preset(Target::Single(c), Preset::Desk, seed);
            plan.runs = 1;
            plan.train = desk_train_config();
            let r = run_experiment(&plan, &corpus, None).map_err(|e| e.to_string())?;
            acc.push(r.report.f_score);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let gap = mean(&f_nrs) - mean(&f_o);
    check(
        gap >= 0.02,
        format!(
            "weighted F: NRS {:.4} vs O {:.4}, gap {gap:.4} (>= 0.02)",
            mean(&f_nrs),
            mean(&f_o)
        ),
    )
}

fn sha(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn leak_free() -> Outcome {
    let corpus = common::fixture_corpus(120, 3);
    let folds = kfold_split(&corpus, 5, 9, false).map_err(|e| e.to_string())?;
    let fold = &folds[0];
    let scrambled_labels: Vec<(usize, ClassLabel)> = fold
        .test
        .iter()
        .map(|&i| {
            let l = corpus.get(i).label();
            (i, ClassLabel::from_index((l.index() + 1) % 3).unwrap())
        })
        .collect();
    let scrambled = corpus.with_labels_replaced(&scrambled_labels);
    let cfg = TrainConfig {
        hidden: 8,
        embedding_dim: 4,
        max_epochs: 5,
        batch_size: 32,
        max_len: 10,
        ..TrainConfig::default()
    };
    let text = cfg.text_settings();
    let a = prepare_fold(
        &corpus,
        &fold.train,
        &fold.test,
        &text,
        TendencyMode::FoldLocal,
    )
    .map_err(|e| e.to_string())?;
    let b = prepare_fold(
        &scrambled,
        &fold.train,
        &fold.test,
        &text,
        TendencyMode::FoldLocal,
    )
    .map_err(|e| e.to_string())?;
    let profiles = |f: &hatespeech::pipeline::FoldData| {
        let mut s = f.tendency.to_tsv();
        for e in f.train.iter().chain(&f.test) {
            s.push_str(&format!("{:?}\n", e.profile.as_array()));
        }
        sha(s.as_bytes())
    };
    let same_profiles = profiles(&a) == profiles(&b);
    let same_vocab = a.vocab.content_hash() == b.vocab.content_hash();
    let mut same_params = true;
    for combo in [FeatureCombination::O, FeatureCombination::NRS] {
        let ma = train(&a.train, &a.vocab, a.tendency.priors(), combo, &cfg)
            .map_err(|e| e.to_string())?;
        let mb = train(&b.train, &b.vocab, b.tendency.priors(), combo, &cfg)
            .map_err(|e| e.to_string())?;
        same_params &= sha(&persist::to_bytes(&ma.model)) == sha(&persist::to_bytes(&mb.model));
    }
    check(
        same_profiles && same_vocab && same_params,
        format!(
            "{} test labels scrambled: profiles {}, vocabulary {}, parameters {}",
            scrambled_labels.len(),
            if same_profiles {
                "unchanged"
            } else {
                "CHANGED"
            },
            if same_vocab { "unchanged" } else { "CHANGED" },
            if same_params { "unchanged" } else { "CHANGED" }
        ),
    )
}

const MACHINE_READABLE: [&str; 4] = [
    "results.json",
    "confusion.tsv",
    "convergence.tsv",
    "decisions.tsv",
];

fn tree_digest(dir: &Path) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for name in MACHINE_READABLE {
        let bytes = std::fs::read(dir.join(name)).map_err(|e| format!("{name}: {e}"))?;
        out.push((name.to_string(), sha(&bytes)));
    }
    let mut preds: Vec<_> = std::fs::read_dir(dir.join("predictions"))
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .collect();
    preds.sort();
    for p in preds {
        let bytes = std::fs::read(&p).map_err(|e| e.to_string())?;
        out.push((
            p.file_name().unwrap().to_string_lossy().into_owned(),
            sha(&bytes),
        ));
    }
    Ok(out)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = dir.path().join("fixture.tsv");
    write_corpus(&common::fixture_corpus(60, 5), &data).map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_hatespeech");
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let status = Command::new(bin)
        .arg("experiment")
        .arg(&data)
        .args([
            "--scheme", "viii", "--folds", "3", "--runs", "2", "--seed", "17",
        ])
        .args([
            "--hidden",
            "8",
            "--embedding-dim",
            "4",
            "--epochs",
            "6",
            "--batch-size",
            "16",
            "--max-len",
            "10",
        ])
        .arg("--out")
        .arg(&first)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(format!(
            "first run failed: {}",
            String::from_utf8_lossy(&status.stderr)
        ));
    }
    let status = Command::new(bin)
        .arg("experiment")
        .arg("--manifest")
        .arg(&first)
        .arg("--out")
        .arg(&second)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(format!(
            "manifest rerun failed: {}",
            String::from_utf8_lossy(&status.stderr)
        ));
    }
    let a = tree_digest(&first)?;
    let b = tree_digest(&second)?;
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    check(
        a.len() == b.len() && differing.is_empty(),
        format!(
            "{} machine-readable files compared, differing: {differing:?}",
            a.len()
        ),
    )
}

fn bookkeeping() -> Outcome {
    let corpus = common::fixture_corpus(20, 11);
    let mut plan = ExperimentPlan::preset(Target::Scheme(EnsembleScheme::Viii), Preset::Desk, 4);
    plan.runs = 2;
    plan.train = TrainConfig {
        hidden: 4,
        embedding_dim: 4,
        max_epochs: 3,
        batch_size: 8,
        max_len: 10,
        ..TrainConfig::default()
    };
    let r = run_experiment(&plan, &corpus, None).map_err(|e| e.to_string())?;
    let counts = corpus.class_counts().map_err(|e| e.to_string())?;
    let rows_ok = ClassLabel::ALL
        .iter()
        .all(|&c| r.confusion.row_sum(c) == counts[c.index()] as u64 * 8);
    check(
        r.confusion.total() == 20 * 8 && rows_ok && r.enumeration_size == 8,
        format!(
            "total {} (expected 160), row sums {:?} vs supports x 8 {:?}",
            r.confusion.total(),
            ClassLabel::ALL.map(|c| r.confusion.row_sum(c)),
            counts.map(|n| n * 8)
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        (
            "1 metric oracle vs reference confusion counts",
            metric_oracle,
        ),
        ("2 weighted-F arithmetic", weighted_f_arithmetic),
        ("3 gradient correctness", gradient_correctness),
        ("4 learning capability", learning_capability),
        ("5 ensemble oracle", ensemble_oracle),
        ("6 feature uplift", feature_uplift),
        ("7 leak-free guarantee", leak_free),
        ("8 determinism", determinism),
        ("9 combinatorial bookkeeping", bookkeeping),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
