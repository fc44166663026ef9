use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// One of the three message classes. The ordinal order (Neutral < Racism <
/// Sexism) is used for every tie-break in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Neutral = 0,
    Racism = 1,
    Sexism = 2,
}

pub const NUM_CLASSES: usize = 3;

impl ClassLabel {
    pub const ALL: [ClassLabel; NUM_CLASSES] =
        [ClassLabel::Neutral, ClassLabel::Racism, ClassLabel::Sexism];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Neutral => "neutral",
            ClassLabel::Racism => "racism",
            ClassLabel::Sexism => "sexism",
        }
    }

    pub fn is_hateful(self) -> bool {
        self != ClassLabel::Neutral
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "neutral" | "none" => Ok(ClassLabel::Neutral),
            "racism" => Ok(ClassLabel::Racism),
            "sexism" => Ok(ClassLabel::Sexism),
            other => Err(Error::Validation(format!("unknown label {other:?}"))),
        }
    }
}

/// A softmax output over (Neutral, Racism, Sexism).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution(pub [f64; NUM_CLASSES]);

impl ClassDistribution {
    pub fn uniform() -> Self {
        ClassDistribution([1.0 / 3.0; NUM_CLASSES])
    }

    pub fn prob(&self, label: ClassLabel) -> f64 {
        self.0[label.index()]
    }

    /// Argmax with ties going to the lowest ordinal, and the winning value.
    pub fn argmax(&self) -> (ClassLabel, f64) {
        let mut best = 0;
        for i in 1..NUM_CLASSES {
            if self.0[i] > self.0[best] {
                best = i;
            }
        }
        (ClassLabel::ALL[best], self.0[best])
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_case_insensitively() {
        assert_eq!("RaCiSm".parse::<ClassLabel>().unwrap(), ClassLabel::Racism);
        assert_eq!(
            " sexism ".parse::<ClassLabel>().unwrap(),
            ClassLabel::Sexism
        );
        assert!("spam".parse::<ClassLabel>().is_err());
    }

    #[test]
    fn argmax_ties_prefer_lower_ordinal() {
        let d = ClassDistribution([0.4, 0.4, 0.2]);
        assert_eq!(d.argmax().0, ClassLabel::Neutral);
        let d = ClassDistribution([0.2, 0.4, 0.4]);
        assert_eq!(d.argmax().0, ClassLabel::Racism);
    }
}
