//! Central finite-difference check of the analytic network gradients.

use serde::Serialize;

use super::network::{cross_entropy, Network};
use crate::error::Result;
use crate::label::ClassLabel;

/// Pairs whose magnitudes sum below this are compared on an absolute scale.
pub const GRADIENT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct BlockCheck {
    pub block: &'static str,
    pub max_relative_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub blocks: Vec<BlockCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.blocks
            .iter()
            .all(|b| b.max_relative_error <= self.tolerance)
    }

    pub fn worst(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.max_relative_error)
            .fold(0.0, f64::max)
    }
}

/// `|a - b| / (|a| + |b|)`, which lies in [0, 1].
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(GRADIENT_FLOOR)
}

fn loss_at(net: &Network, tokens: &[u32], features: &[f64], target: ClassLabel) -> Result<f64> {
    let dist = net.predict(tokens, features)?;
    Ok(cross_entropy(&dist, target))
}

/// Compares `analytic` against central differences with step `h` for every
/// parameter of `net`.
pub fn compare_gradients(
    net: &Network,
    analytic: &Network,
    tokens: &[u32],
    features: &[f64],
    target: ClassLabel,
    h: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let mut probe = net.clone();
    let mut blocks = Vec::new();
    for b in 0..analytic.blocks().len() {
        let (name, grad) = analytic.blocks()[b];
        let mut check = BlockCheck {
            block: name,
            max_relative_error: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for i in 0..grad.len() {
            let orig = probe.blocks()[b].1.data()[i];
            probe.blocks_mut()[b].1.data_mut()[i] = orig + h;
            let plus = loss_at(&probe, tokens, features, target)?;
            probe.blocks_mut()[b].1.data_mut()[i] = orig - h;
            let minus = loss_at(&probe, tokens, features, target)?;
            probe.blocks_mut()[b].1.data_mut()[i] = orig;

            let numeric = (plus - minus) / (2.0 * h);
            let err = relative_error(grad.data()[i], numeric);
            if err > check.max_relative_error {
                check = BlockCheck {
                    block: name,
                    max_relative_error: err,
                    worst_index: i,
                    analytic: grad.data()[i],
                    numeric,
                };
            }
        }
        blocks.push(check);
    }
    Ok(GradCheckReport { tolerance, blocks })
}

pub fn gradient_check(
    net: &Network,
    tokens: &[u32],
    features: &[f64],
    target: ClassLabel,
    h: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let mut grads = net.zeros_like();
    net.loss_and_grad(tokens, features, target, &mut grads)?;
    compare_gradients(net, &grads, tokens, features, target, h, tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::lstm::CellActivation;
    use crate::nn::network::{FeatureMode, NetworkSpec};
    use rand::{Rng, SeedableRng};

    fn tiny(
        seed: u64,
        act: CellActivation,
        mode: FeatureMode,
    ) -> (Network, Vec<u32>, Vec<f64>, ClassLabel) {
        let spec = NetworkSpec {
            token_rows: 10,
            embedding_dim: 4,
            hidden: 8,
            seq_len: 5,
            n_features: 3,
            activation: act,
            feature_mode: mode,
            masking: true,
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let net = Network::init(spec, &mut rng).unwrap();
        let len = rng.gen_range(1..=5);
        let mut tokens: Vec<u32> = (0..len).map(|_| rng.gen_range(1..10)).collect();
        tokens.resize(5, 0);
        let features = vec![0.25, 0.35, 0.4];
        let target = ClassLabel::ALL[rng.gen_range(0..3)];
        (net, tokens, features, target)
    }

    #[test]
    fn tiny_model_passes() {
        for act in [CellActivation::Sigmoid, CellActivation::Tanh] {
            let (net, tokens, features, target) = tiny(11, act, FeatureMode::Dense);
            let report = gradient_check(&net, &tokens, &features, target, 1e-5, 1e-4).unwrap();
            assert!(report.passed(), "{report:#?}");
        }
    }

    #[test]
    fn sign_flip_is_caught() {
        let (net, tokens, features, target) = tiny(12, CellActivation::Sigmoid, FeatureMode::Dense);
        let mut grads = net.zeros_like();
        net.loss_and_grad(&tokens, &features, target, &mut grads)
            .unwrap();
        grads.lstm.u.scale(-1.0);
        let report =
            compare_gradients(&net, &grads, &tokens, &features, target, 1e-5, 1e-4).unwrap();
        assert!(!report.passed());
        let bad: Vec<_> = report
            .blocks
            .iter()
            .filter(|b| b.max_relative_error >= 1e-4)
            .map(|b| b.block)
            .collect();
        assert_eq!(bad, vec!["lstm.u"]);
    }

    #[test]
    fn vacuous_tolerance_always_passes() {
        let (net, tokens, features, target) =
            tiny(13, CellActivation::Tanh, FeatureMode::PseudoTokens);
        let mut grads = net.zeros_like();
        net.loss_and_grad(&tokens, &features, target, &mut grads)
            .unwrap();
        grads.scale(-1.0);
        let report =
            compare_gradients(&net, &grads, &tokens, &features, target, 1e-5, 1.0).unwrap();
        assert!(report.passed());
    }
}
