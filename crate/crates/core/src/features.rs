//! Per-user tendency features and classifier input assembly.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::label::{ClassLabel, NUM_CLASSES};
use crate::text::IndexVector;

/// Fractions of a user's labeled history in each class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TendencyProfile {
    pub neutral: f64,
    pub racism: f64,
    pub sexism: f64,
}

impl TendencyProfile {
    pub fn from_counts(counts: [usize; NUM_CLASSES]) -> Option<Self> {
        let n: usize = counts.iter().sum();
        (n > 0).then(|| {
            let n = n as f64;
            TendencyProfile {
                neutral: counts[0] as f64 / n,
                racism: counts[1] as f64 / n,
                sexism: counts[2] as f64 / n,
            }
        })
    }

    pub fn get(&self, label: ClassLabel) -> f64 {
        match label {
            ClassLabel::Neutral => self.neutral,
            ClassLabel::Racism => self.racism,
            ClassLabel::Sexism => self.sexism,
        }
    }

    pub fn as_array(&self) -> [f64; NUM_CLASSES] {
        [self.neutral, self.racism, self.sexism]
    }
}

/// Which tendency features ride along with the token vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureCombination {
    O,
    NS,
    NR,
    RS,
    NRS,
}

impl FeatureCombination {
    pub const ALL: [FeatureCombination; 5] = [
        FeatureCombination::O,
        FeatureCombination::NS,
        FeatureCombination::NR,
        FeatureCombination::RS,
        FeatureCombination::NRS,
    ];

    /// Selected classes, always in (N, R, S) order.
    pub fn selected(self) -> &'static [ClassLabel] {
        use ClassLabel::*;
        match self {
            FeatureCombination::O => &[],
            FeatureCombination::NS => &[Neutral, Sexism],
            FeatureCombination::NR => &[Neutral, Racism],
            FeatureCombination::RS => &[Racism, Sexism],
            FeatureCombination::NRS => &[Neutral, Racism, Sexism],
        }
    }

    pub fn feature_count(self) -> usize {
        self.selected().len()
    }

    /// Token slots plus feature count: 30, 32 or 33 at the default length.
    pub fn input_dimension(self, max_len: usize) -> usize {
        max_len + self.feature_count()
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureCombination::O => "O",
            FeatureCombination::NS => "NS",
            FeatureCombination::NR => "NR",
            FeatureCombination::RS => "RS",
            FeatureCombination::NRS => "NRS",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            FeatureCombination::O => 0,
            FeatureCombination::NS => 1,
            FeatureCombination::NR => 2,
            FeatureCombination::RS => 3,
            FeatureCombination::NRS => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for FeatureCombination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureCombination {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "O" => Ok(FeatureCombination::O),
            "NS" => Ok(FeatureCombination::NS),
            "NR" => Ok(FeatureCombination::NR),
            "RS" => Ok(FeatureCombination::RS),
            "NRS" => Ok(FeatureCombination::NRS),
            _ => Err(Error::InvalidArgument(format!(
                "unknown feature combination {s:?} (expected O, NS, NR, RS or NRS)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierInput {
    pub combination: FeatureCombination,
    pub indices: IndexVector,
    pub features: Vec<f64>,
}

pub fn assemble_input(
    indices: IndexVector,
    profile: &TendencyProfile,
    combination: FeatureCombination,
) -> ClassifierInput {
    ClassifierInput {
        combination,
        features: combination
            .selected()
            .iter()
            .map(|&c| profile.get(c))
            .collect(),
        indices,
    }
}

/// Where tendency statistics are allowed to come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TendencyMode {
    /// Only the training partition of the current fold.
    #[default]
    FoldLocal,
    /// Every labeled tweet in the corpus, test folds included. Leaks test
    /// labels; exists only to replicate results computed that way.
    CorpusWide,
}

impl FromStr for TendencyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fold-local" => Ok(TendencyMode::FoldLocal),
            "corpus-wide" => Ok(TendencyMode::CorpusWide),
            other => Err(Error::InvalidArgument(format!(
                "unknown tendency mode {other:?}"
            ))),
        }
    }
}

/// Per-user label counts over a set of history tweets, plus the class priors
/// of that set used for users without history.
#[derive(Debug, Clone, PartialEq)]
pub struct TendencyIndex {
    counts: HashMap<String, [usize; NUM_CLASSES]>,
    priors: TendencyProfile,
}

impl TendencyIndex {
    /// Counts labels of `corpus[i]` for every `i` in `history`.
    pub fn from_partition(corpus: &Corpus, history: &[usize]) -> Result<Self> {
        let mut counts: HashMap<String, [usize; NUM_CLASSES]> = HashMap::new();
        let mut totals = [0usize; NUM_CLASSES];
        for &i in history {
            let t = corpus.get(i);
            let label = t.label();
            counts.entry(t.user_id.clone()).or_default()[label.index()] += 1;
            totals[label.index()] += 1;
        }
        let priors = TendencyProfile::from_counts(totals)
            .ok_or_else(|| Error::InvalidArgument("tendency history partition is empty".into()))?;
        Ok(TendencyIndex { counts, priors })
    }

    pub fn from_corpus(corpus: &Corpus) -> Result<Self> {
        let all: Vec<usize> = (0..corpus.len()).collect();
        Self::from_partition(corpus, &all)
    }

    pub fn priors(&self) -> TendencyProfile {
        self.priors
    }

    /// Profile for `user_id`, optionally removing one history tweet with
    /// label `exclude` (the tweet being classified). Falls back to the priors
    /// when nothing is left.
    pub fn profile(&self, user_id: &str, exclude: Option<ClassLabel>) -> TendencyProfile {
        let Some(mut counts) = self.counts.get(user_id).copied() else {
            return self.priors;
        };
        if let Some(label) = exclude {
            let slot = &mut counts[label.index()];
            *slot = slot.saturating_sub(1);
        }
        TendencyProfile::from_counts(counts).unwrap_or(self.priors)
    }

    /// Users in the index, sorted.
    pub fn users(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.counts.keys().map(String::as_str).collect();
        v.sort_unstable();
        v
    }

    /// `user_id  t_N  t_R  t_S` rows sorted by user.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("user_id\tt_N\tt_R\tt_S\n");
        for user in self.users() {
            let p = self.profile(user, None);
            let _ = writeln!(s, "{}\t{}\t{}\t{}", user, p.neutral, p.racism, p.sexism);
        }
        s
    }
}

/// Tendency of `user_id` over the tweets of `training` (all of it, as the
/// training partition), leaving out `exclude` if given.
pub fn compute_tendencies(
    user_id: &str,
    training: &Corpus,
    exclude: Option<&str>,
) -> Result<TendencyProfile> {
    let index = TendencyIndex::from_corpus(training)?;
    let excluded_label = exclude.and_then(|id| {
        training
            .user_tweets(user_id)
            .iter()
            .map(|&i| training.get(i))
            .find(|t| t.tweet_id == id)
            .map(|t| t.label())
    });
    Ok(index.profile(user_id, excluded_label))
}
