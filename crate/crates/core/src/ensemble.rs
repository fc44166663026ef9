//! Combining several classifiers' outputs into one decision.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureCombination;
use crate::label::{ClassDistribution, ClassLabel, NUM_CLASSES};

/// The eleven fixed member groupings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleScheme {
    I,
    Ii,
    Iii,
    Iv,
    V,
    Vi,
    Vii,
    Viii,
    Ix,
    X,
    Xi,
}

impl EnsembleScheme {
    pub const ALL: [EnsembleScheme; 11] = [
        EnsembleScheme::I,
        EnsembleScheme::Ii,
        EnsembleScheme::Iii,
        EnsembleScheme::Iv,
        EnsembleScheme::V,
        EnsembleScheme::Vi,
        EnsembleScheme::Vii,
        EnsembleScheme::Viii,
        EnsembleScheme::Ix,
        EnsembleScheme::X,
        EnsembleScheme::Xi,
    ];

    pub fn members(self) -> &'static [FeatureCombination] {
        use FeatureCombination::*;
        match self {
            EnsembleScheme::I => &[O, NRS, NR],
            EnsembleScheme::Ii => &[O, NRS, NS],
            EnsembleScheme::Iii => &[O, NRS, RS],
            EnsembleScheme::Iv => &[O, NS, RS],
            EnsembleScheme::V => &[O, NS, NR],
            EnsembleScheme::Vi => &[O, RS, NR],
            EnsembleScheme::Vii => &[NRS, NR, RS],
            EnsembleScheme::Viii => &[NRS, NR, NS],
            EnsembleScheme::Ix => &[NRS, NS, RS],
            EnsembleScheme::X => &[NS, RS, NR],
            EnsembleScheme::Xi => &[O, NS, RS, NR, NRS],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EnsembleScheme::I => "i",
            EnsembleScheme::Ii => "ii",
            EnsembleScheme::Iii => "iii",
            EnsembleScheme::Iv => "iv",
            EnsembleScheme::V => "v",
            EnsembleScheme::Vi => "vi",
            EnsembleScheme::Vii => "vii",
            EnsembleScheme::Viii => "viii",
            EnsembleScheme::Ix => "ix",
            EnsembleScheme::X => "x",
            EnsembleScheme::Xi => "xi",
        }
    }

    /// Human-readable member list, e.g. `O+NRS+NR`.
    pub fn member_label(self) -> String {
        self.members()
            .iter()
            .map(|m| m.name())
            .collect::<Vec<_>>()
            .join("+")
    }
}

impl fmt::Display for EnsembleScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnsembleScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|e| e.name() == lower)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown ensemble scheme {s:?}")))
    }
}

/// One member's opinion: its argmax label and that label's probability.
pub fn member_vote(dist: &ClassDistribution) -> (ClassLabel, f64) {
    dist.argmax()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecisionMethod {
    /// A label was the unique most frequent vote and got at least two votes.
    Vote,
    /// No majority: the most confident member decided.
    Confidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub label: ClassLabel,
    pub method: DecisionMethod,
    /// Index of the member whose confidence decided, if any.
    pub decisive_member: Option<usize>,
    pub member_outputs: Vec<ClassDistribution>,
}

/// Plurality vote over the members' argmax labels. Without a unique label
/// holding at least two votes, the member with the highest winning
/// probability decides; equal confidences go to the earliest member.
pub fn combine(outputs: &[ClassDistribution]) -> Result<Decision> {
    check_member_count(outputs.len())?;
    let votes: Vec<(ClassLabel, f64)> = outputs.iter().map(member_vote).collect();
    let (label, method, decisive_member) = combine_votes(&votes);
    Ok(Decision {
        label,
        method,
        decisive_member,
        member_outputs: outputs.to_vec(),
    })
}

pub fn check_member_count(n: usize) -> Result<()> {
    if n != 3 && n != 5 {
        return Err(Error::InvalidArgument(format!(
            "an ensemble needs 3 or 5 members, got {n}"
        )));
    }
    Ok(())
}

/// The rule of [`combine`] on precomputed `(label, confidence)` votes.
/// Returns the label, how it was reached and the deciding member for the
/// confidence fallback. Callers check the member count.
pub fn combine_votes(votes: &[(ClassLabel, f64)]) -> (ClassLabel, DecisionMethod, Option<usize>) {
    let mut counts = [0usize; NUM_CLASSES];
    for (l, _) in votes {
        counts[l.index()] += 1;
    }
    let top = *counts.iter().max().expect("three classes");
    let leaders = counts.iter().filter(|&&c| c == top).count();
    if top >= 2 && leaders == 1 {
        let c = counts
            .iter()
            .position(|&c| c == top)
            .expect("leader exists");
        let label = ClassLabel::from_index(c).expect("valid index");
        return (label, DecisionMethod::Vote, None);
    }
    let mut best = 0;
    for (i, (_, p)) in votes.iter().enumerate().skip(1) {
        if *p > votes[best].1 {
            best = i;
        }
    }
    (votes[best].0, DecisionMethod::Confidence, Some(best))
}

/// TSV of per-tweet decisions with every member's distribution.
pub fn decisions_tsv(
    scheme: EnsembleScheme,
    tweet_ids: &[&str],
    gold: &[Option<ClassLabel>],
    decisions: &[Decision],
) -> String {
    let mut s = String::from("tweet_id\tgold\tpredicted\tmethod");
    for m in scheme.members() {
        let _ = write!(s, "\t{m}_N\t{m}_R\t{m}_S");
    }
    s.push('\n');
    for ((id, g), d) in tweet_ids.iter().zip(gold).zip(decisions) {
        let method = match d.method {
            DecisionMethod::Vote => "vote",
            DecisionMethod::Confidence => "confidence",
        };
        let gold = g.map_or("-", ClassLabel::name);
        let _ = write!(s, "{id}\t{gold}\t{}\t{method}", d.label);
        for out in &d.member_outputs {
            for p in out.0 {
                let _ = write!(s, "\t{p}");
            }
        }
        s.push('\n');
    }
    s
}
