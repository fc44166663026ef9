//! Labeled tweet corpus: TSV loading, dual-label resolution and summary
//! statistics.
//!
//! The on-disk format is UTF-8, one record per line, tab separated:
//!
//! ```text
//! tweet_id <TAB> user_id <TAB> label <TAB> text
//! ```
//!
//! A header line (`tweet_id\tuser_id\tlabel\ttext`) is optional. Labels are
//! case-insensitive `neutral`, `racism` or `sexism`; a tweet annotated with two
//! classes lists both joined by `,` `+` or `|` (e.g. `neutral+sexism`). Any tab
//! after the third one is part of the text.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{ClassLabel, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledTweet {
    pub tweet_id: String,
    pub user_id: String,
    pub text: String,
    /// Sorted, deduplicated. A single element once the corpus is resolved.
    pub labels: Vec<ClassLabel>,
}

impl LabeledTweet {
    pub fn new(
        tweet_id: impl Into<String>,
        user_id: impl Into<String>,
        label: ClassLabel,
        text: impl Into<String>,
    ) -> Self {
        LabeledTweet {
            tweet_id: tweet_id.into(),
            user_id: user_id.into(),
            text: text.into(),
            labels: vec![label],
        }
    }

    /// The resolved label. Panics on a tweet that still carries several.
    pub fn label(&self) -> ClassLabel {
        assert_eq!(
            self.labels.len(),
            1,
            "tweet {} has unresolved labels",
            self.tweet_id
        );
        self.labels[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DualLabelPolicy {
    #[default]
    PreferHateful,
    PreferNeutral,
    Drop,
}

impl std::str::FromStr for DualLabelPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prefer-hateful" => Ok(DualLabelPolicy::PreferHateful),
            "prefer-neutral" => Ok(DualLabelPolicy::PreferNeutral),
            "drop" => Ok(DualLabelPolicy::Drop),
            other => Err(Error::InvalidArgument(format!(
                "unknown dual-label policy {other:?}"
            ))),
        }
    }
}

/// A log entry for one tweet that arrived with two labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualResolution {
    pub tweet_id: String,
    pub original: Vec<ClassLabel>,
    /// `None` when the tweet was dropped.
    pub resolved: Option<ClassLabel>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    tweets: Vec<LabeledTweet>,
    by_user: BTreeMap<String, Vec<usize>>,
    resolutions: Vec<DualResolution>,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids, empty texts and empty label sets.
    pub fn new(tweets: Vec<LabeledTweet>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(tweets.len());
        let mut by_user: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut tweets = tweets;
        for (i, t) in tweets.iter_mut().enumerate() {
            if !seen.insert(t.tweet_id.clone()) {
                return Err(Error::Validation(format!(
                    "duplicate tweet_id {:?}",
                    t.tweet_id
                )));
            }
            if t.text.trim().is_empty() {
                return Err(Error::Validation(format!(
                    "tweet {:?} has empty text",
                    t.tweet_id
                )));
            }
            t.labels.sort();
            t.labels.dedup();
            if t.labels.is_empty() {
                return Err(Error::Validation(format!(
                    "tweet {:?} has no label",
                    t.tweet_id
                )));
            }
            by_user.entry(t.user_id.clone()).or_default().push(i);
        }
        Ok(Corpus {
            tweets,
            by_user,
            resolutions: Vec::new(),
        })
    }

    pub fn tweets(&self) -> &[LabeledTweet] {
        &self.tweets
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    pub fn get(&self, i: usize) -> &LabeledTweet {
        &self.tweets[i]
    }

    /// Indices of every tweet written by `user_id`, in corpus order.
    pub fn user_tweets(&self, user_id: &str) -> &[usize] {
        self.by_user.get(user_id).map_or(&[], Vec::as_slice)
    }

    pub fn users(&self) -> impl Iterator<Item = &str> {
        self.by_user.keys().map(String::as_str)
    }

    pub fn user_count(&self) -> usize {
        self.by_user.len()
    }

    pub fn resolutions(&self) -> &[DualResolution] {
        &self.resolutions
    }

    pub fn is_resolved(&self) -> bool {
        self.tweets.iter().all(|t| t.labels.len() == 1)
    }

    /// Copy of the corpus with labels of the tweets at `indices` replaced.
    pub fn with_labels_replaced(&self, replacements: &[(usize, ClassLabel)]) -> Corpus {
        let mut out = self.clone();
        for &(i, label) in replacements {
            out.tweets[i].labels = vec![label];
        }
        out
    }

    /// Class counts; requires a resolved corpus.
    pub fn class_counts(&self) -> Result<[usize; NUM_CLASSES]> {
        let mut counts = [0usize; NUM_CLASSES];
        for t in &self.tweets {
            if t.labels.len() != 1 {
                return Err(Error::Validation(format!(
                    "tweet {:?} still has {} labels; resolve dual labels first",
                    t.tweet_id,
                    t.labels.len()
                )));
            }
            counts[t.labels[0].index()] += 1;
        }
        Ok(counts)
    }
}

fn parse_labels(field: &str, line: usize) -> Result<Vec<ClassLabel>> {
    field
        .split([',', '+', '|'])
        .map(|s| {
            s.parse::<ClassLabel>().map_err(|e| match e {
                Error::Validation(m) => Error::Validation(format!("line {line}: {m}")),
                other => other,
            })
        })
        .collect()
}

fn is_header(fields: &[&str]) -> bool {
    fields.len() >= 3
        && fields[0].trim().eq_ignore_ascii_case("tweet_id")
        && fields[2].trim().eq_ignore_ascii_case("label")
}

/// Parses corpus records from TSV text.
pub fn parse_corpus(contents: &str) -> Result<Corpus> {
    let mut tweets = Vec::new();
    for (n, raw) in contents.lines().enumerate() {
        let line = n + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.splitn(4, '\t').collect();
        if n == 0 && is_header(&fields) {
            continue;
        }
        if fields.len() < 4 {
            return Err(Error::Parse {
                line,
                message: format!("expected 4 tab-separated fields, found {}", fields.len()),
            });
        }
        let (tweet_id, user_id, text) = (fields[0].trim(), fields[1].trim(), fields[3]);
        if tweet_id.is_empty() || user_id.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty tweet_id or user_id".into(),
            });
        }
        if text.trim().is_empty() {
            return Err(Error::Parse {
                line,
                message: format!("tweet {tweet_id:?} has empty text"),
            });
        }
        let labels = parse_labels(fields[2], line)?;
        tweets.push(LabeledTweet {
            tweet_id: tweet_id.to_string(),
            user_id: user_id.to_string(),
            text: text.to_string(),
            labels,
        });
    }
    Corpus::new(tweets)
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let contents = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&contents)
}

/// Serializes a resolved or unresolved corpus back to the TSV format.
pub fn write_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let mut out = String::from("tweet_id\tuser_id\tlabel\ttext\n");
    for t in corpus.tweets() {
        let labels: Vec<&str> = t.labels.iter().map(|l| l.name()).collect();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            t.tweet_id,
            t.user_id,
            labels.join("+"),
            t.text.replace('\n', " ")
        );
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Collapses every multi-label tweet to one label (or drops it). Already
/// resolved tweets pass through untouched, so the operation is idempotent.
pub fn resolve_dual_labels(corpus: &Corpus, policy: DualLabelPolicy) -> Result<Corpus> {
    let mut kept = Vec::with_capacity(corpus.len());
    let mut log = corpus.resolutions.clone();
    for t in corpus.tweets() {
        match t.labels.as_slice() {
            [_] => kept.push(t.clone()),
            [ClassLabel::Neutral, hateful] => {
                let resolved = match policy {
                    DualLabelPolicy::PreferHateful => Some(*hateful),
                    DualLabelPolicy::PreferNeutral => Some(ClassLabel::Neutral),
                    DualLabelPolicy::Drop => None,
                };
                log::debug!("tweet {}: {:?} -> {:?}", t.tweet_id, t.labels, resolved);
                log.push(DualResolution {
                    tweet_id: t.tweet_id.clone(),
                    original: t.labels.clone(),
                    resolved,
                });
                if let Some(label) = resolved {
                    let mut t = t.clone();
                    t.labels = vec![label];
                    kept.push(t);
                }
            }
            other => {
                return Err(Error::Validation(format!(
                    "tweet {:?} has irreconcilable labels {:?}",
                    t.tweet_id, other
                )))
            }
        }
    }
    let mut out = Corpus::new(kept)?;
    out.resolutions = log;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub size: usize,
    pub class_counts: BTreeMap<ClassLabel, usize>,
    pub user_count: usize,
    pub dual_label_count: usize,
    /// Dual-label combinations seen, e.g. "neutral+sexism" -> 42.
    pub dual_label_kinds: BTreeMap<String, usize>,
    /// Pearson correlation per class; absent when undefined.
    pub tendency_label_correlation: BTreeMap<ClassLabel, Option<f64>>,
}

/// Pearson correlation; `None` for fewer than two points or zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Correlation between each tweet's author tendency toward class c
/// (leave-one-out over the whole corpus, falling back to corpus priors for
/// authors with no other tweet) and the indicator that the tweet is labeled c.
pub fn tendency_label_correlation(corpus: &Corpus) -> Result<BTreeMap<ClassLabel, Option<f64>>> {
    let counts = corpus.class_counts()?;
    let total = corpus.len().max(1) as f64;
    let priors: Vec<f64> = counts.iter().map(|&c| c as f64 / total).collect();

    let mut per_user: HashMap<&str, [usize; NUM_CLASSES]> = HashMap::new();
    for t in corpus.tweets() {
        per_user.entry(&t.user_id).or_default()[t.label().index()] += 1;
    }

    let mut out = BTreeMap::new();
    for class in ClassLabel::ALL {
        let c = class.index();
        let mut xs = Vec::with_capacity(corpus.len());
        let mut ys = Vec::with_capacity(corpus.len());
        for t in corpus.tweets() {
            let mut hist = per_user[t.user_id.as_str()];
            hist[t.label().index()] -= 1;
            let n: usize = hist.iter().sum();
            let x = if n == 0 {
                priors[c]
            } else {
                hist[c] as f64 / n as f64
            };
            xs.push(x);
            ys.push(if t.label() == class { 1.0 } else { 0.0 });
        }
        out.insert(class, pearson(&xs, &ys));
    }
    Ok(out)
}

pub fn corpus_stats(corpus: &Corpus) -> Result<CorpusStats> {
    let counts = corpus.class_counts()?;
    let mut kinds: BTreeMap<String, usize> = BTreeMap::new();
    for r in corpus.resolutions() {
        let names: Vec<&str> = r.original.iter().map(|l| l.name()).collect();
        *kinds.entry(names.join("+")).or_default() += 1;
    }
    Ok(CorpusStats {
        size: corpus.len(),
        class_counts: ClassLabel::ALL
            .iter()
            .map(|&l| (l, counts[l.index()]))
            .collect(),
        user_count: corpus.user_count(),
        dual_label_count: corpus.resolutions().len(),
        dual_label_kinds: kinds,
        tendency_label_correlation: tendency_label_correlation(corpus)?,
    })
}

impl CorpusStats {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "tweets           {}", self.size);
        let _ = writeln!(s, "users            {}", self.user_count);
        let _ = writeln!(s, "dual-labeled     {}", self.dual_label_count);
        for (kind, n) in &self.dual_label_kinds {
            let _ = writeln!(s, "  {kind:<15}{n}");
        }
        let _ = writeln!(s, "\nclass       count   r(tendency,label)");
        for (label, n) in &self.class_counts {
            let r = match self
                .tendency_label_correlation
                .get(label)
                .copied()
                .flatten()
            {
                Some(r) => format!("{r:.4}"),
                None => "undefined".into(),
            };
            let _ = writeln!(s, "{:<10}{:>7}   {}", label.name(), n, r);
        }
        s
    }

    /// Flat `key=value` lines, stable order.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "size={}", self.size);
        let _ = writeln!(s, "user_count={}", self.user_count);
        let _ = writeln!(s, "dual_label_count={}", self.dual_label_count);
        for (kind, n) in &self.dual_label_kinds {
            let _ = writeln!(s, "dual_label.{kind}={n}");
        }
        for (label, n) in &self.class_counts {
            let _ = writeln!(s, "class_count.{}={}", label.name(), n);
        }
        for (label, r) in &self.tendency_label_correlation {
            match r {
                Some(r) => {
                    let _ = writeln!(s, "correlation.{}={}", label.name(), r);
                }
                None => {
                    let _ = writeln!(s, "correlation.{}=undefined", label.name());
                }
            }
        }
        s
    }
}

/// Labels that appear in a corpus, for quick sanity checks.
pub fn distinct_labels(corpus: &Corpus) -> BTreeSet<ClassLabel> {
    corpus
        .tweets()
        .iter()
        .flat_map(|t| t.labels.iter().copied())
        .collect()
}
