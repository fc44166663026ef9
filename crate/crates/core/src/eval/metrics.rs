use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{ClassLabel, NUM_CLASSES};

/// 3x3 counts, rows are true labels and columns predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix(pub [[u64; NUM_CLASSES]; NUM_CLASSES]);

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, truth: ClassLabel, predicted: ClassLabel) {
        self.0[truth.index()][predicted.index()] += 1;
    }

    pub fn get(&self, truth: ClassLabel, predicted: ClassLabel) -> u64 {
        self.0[truth.index()][predicted.index()]
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        for r in 0..NUM_CLASSES {
            for c in 0..NUM_CLASSES {
                self.0[r][c] += other.0[r][c];
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }

    pub fn row_sum(&self, truth: ClassLabel) -> u64 {
        self.0[truth.index()].iter().sum()
    }

    pub fn col_sum(&self, predicted: ClassLabel) -> u64 {
        self.0.iter().map(|row| row[predicted.index()]).sum()
    }

    pub fn correct(&self) -> u64 {
        (0..NUM_CLASSES).map(|i| self.0[i][i]).sum()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (ClassLabel, ClassLabel)>) -> Self {
        let mut cm = Self::new();
        for (t, p) in pairs {
            cm.record(t, p);
        }
        cm
    }

    /// Header row plus one row per true label.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("true\\predicted\tneutral\tracism\tsexism\n");
        for t in ClassLabel::ALL {
            let row = self.0[t.index()];
            let _ = writeln!(s, "{}\t{}\t{}\t{}", t, row[0], row[1], row[2]);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub support: u64,
    /// Nothing was predicted as this class, so precision was set to 0.
    pub precision_undefined: bool,
    /// The class has no true examples, so recall was set to 0.
    pub recall_undefined: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Indexed by class ordinal.
    pub per_class: [ClassMetrics; NUM_CLASSES],
    /// Support-weighted mean of per-class precision.
    pub precision: f64,
    /// Support-weighted mean of per-class recall.
    pub recall: f64,
    /// Support-weighted mean of per-class F.
    pub f_score: f64,
    pub accuracy: f64,
}

impl MetricsReport {
    pub fn class(&self, label: ClassLabel) -> &ClassMetrics {
        &self.per_class[label.index()]
    }

    pub fn supports(&self) -> [u64; NUM_CLASSES] {
        [
            self.per_class[0].support,
            self.per_class[1].support,
            self.per_class[2].support,
        ]
    }
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn per_class_metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let per_class = ClassLabel::ALL.map(|c| {
        let tp = cm.get(c, c);
        let (precision, precision_undefined) = ratio(tp, cm.col_sum(c));
        let (recall, recall_undefined) = ratio(tp, cm.row_sum(c));
        ClassMetrics {
            precision,
            recall,
            f_score: harmonic(precision, recall),
            support: cm.row_sum(c),
            precision_undefined,
            recall_undefined,
        }
    });
    let supports = per_class.map(|m| m.support as f64);
    let weighted = |f: fn(&ClassMetrics) -> f64| -> f64 {
        let total: f64 = supports.iter().sum();
        if total == 0.0 {
            return 0.0;
        }
        per_class
            .iter()
            .zip(supports)
            .map(|(m, s)| f(m) * s)
            .sum::<f64>()
            / total
    };
    MetricsReport {
        precision: weighted(|m| m.precision),
        recall: weighted(|m| m.recall),
        f_score: weighted(|m| m.f_score),
        accuracy: ratio(cm.correct(), cm.total()).0,
        per_class,
    }
}

/// Support-weighted mean of per-class F values.
pub fn weighted_f(f_scores: [f64; NUM_CLASSES], supports: [f64; NUM_CLASSES]) -> Result<f64> {
    if supports.iter().any(|&s| s < 0.0 || !s.is_finite()) {
        return Err(Error::InvalidArgument(
            "supports must be finite and non-negative".into(),
        ));
    }
    let total: f64 = supports.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("supports sum to zero".into()));
    }
    Ok(f_scores
        .iter()
        .zip(supports)
        .map(|(f, s)| f * s)
        .sum::<f64>()
        / total)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use ClassLabel::*;

    #[test]
    fn diagonal_is_perfect() {
        let cm = ConfusionMatrix([[5, 0, 0], [0, 3, 0], [0, 0, 2]]);
        let r = per_class_metrics(&cm);
        for c in ClassLabel::ALL {
            assert_eq!(r.class(c).f_score, 1.0);
        }
        assert_eq!(r.f_score, 1.0);
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn empty_predicted_column_flags_precision() {
        let cm = ConfusionMatrix([[5, 0, 0], [2, 0, 0], [0, 0, 2]]);
        let r = per_class_metrics(&cm);
        assert!(r.class(Racism).precision_undefined);
        assert_eq!(r.class(Racism).precision, 0.0);
        assert_eq!(r.class(Racism).f_score, 0.0);
        assert!(!r.class(Neutral).precision_undefined);
    }

    #[test]
    fn weighted_f_degenerate_weights() {
        assert_eq!(weighted_f([0.3, 0.6, 0.9], [1.0, 0.0, 0.0]).unwrap(), 0.3);
        let x = weighted_f([0.7; 3], [10889.0, 1943.0, 3166.0]).unwrap();
        assert!((x - 0.7).abs() < 1e-12);
        assert!(weighted_f([0.5; 3], [0.0; 3]).is_err());
    }

    #[test]
    fn tsv_layout() {
        let cm = ConfusionMatrix::from_pairs([(Neutral, Racism), (Sexism, Sexism)]);
        assert_eq!(
            cm.to_tsv(),
            "true\\predicted\tneutral\tracism\tsexism\nneutral\t0\t1\t0\nracism\t0\t0\t0\nsexism\t0\t0\t1\n"
        );
    }

    proptest! {
        #[test]
        fn metrics_lie_in_unit_interval(cells in prop::array::uniform9(0u64..1000)) {
            let cm = ConfusionMatrix([
                [cells[0], cells[1], cells[2]],
                [cells[3], cells[4], cells[5]],
                [cells[6], cells[7], cells[8]],
            ]);
            let r = per_class_metrics(&cm);
            for m in r.per_class {
                for v in [m.precision, m.recall, m.f_score] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
            for v in [r.precision, r.recall, r.f_score, r.accuracy] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn summed_matrices_add_counts(a in prop::array::uniform9(0u64..50), b in prop::array::uniform9(0u64..50)) {
            let m = |c: [u64; 9]| ConfusionMatrix([[c[0], c[1], c[2]], [c[3], c[4], c[5]], [c[6], c[7], c[8]]]);
            let mut s = m(a);
            s.add(&m(b));
            prop_assert_eq!(s.total(), m(a).total() + m(b).total());
            for c in ClassLabel::ALL {
                prop_assert_eq!(s.row_sum(c), m(a).row_sum(c) + m(b).row_sum(c));
            }
        }
    }
}
