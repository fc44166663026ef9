//! The four-layer classifier network and its exact gradients.
//!
//! ```text
//! token indices --embedding--> LSTM over time --final h--+
//!                                                        +--concat--> dense(ReLU) --> dense(3) --> softmax
//! tendency features -------------------------------------+
//! ```
//!
//! With [`FeatureMode::PseudoTokens`] the features are instead quantized into
//! reserved embedding rows and appended to the token sequence, and the dense
//! layer sees the final hidden state alone.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::lstm::{glorot, CellActivation, LstmParams};
use super::tensor::{matvec_add, matvec_t_add, outer_add, Tensor};
use crate::error::{Error, Result};
use crate::label::{ClassDistribution, ClassLabel, NUM_CLASSES};
use crate::text::PAD_INDEX;

/// Number of reserved embedding rows per feature in pseudo-token mode.
pub const FEATURE_BUCKETS: usize = 100;

/// Smallest probability fed to the logarithm in the loss.
pub const PROB_FLOOR: f64 = 1e-12;

/// How real-valued tendency features enter the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMode {
    /// Concatenated to the final LSTM state.
    #[default]
    Dense,
    /// Quantized into reserved vocabulary slots and appended as extra timesteps.
    PseudoTokens,
}

impl FeatureMode {
    pub fn name(self) -> &'static str {
        match self {
            FeatureMode::Dense => "dense",
            FeatureMode::PseudoTokens => "pseudo-tokens",
        }
    }
}

impl std::str::FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" | "a" | "A" => Ok(FeatureMode::Dense),
            "pseudo-tokens" | "b" | "B" => Ok(FeatureMode::PseudoTokens),
            other => Err(Error::InvalidArgument(format!(
                "unknown feature mode {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Index space of the token vocabulary, reserved slots included.
    pub token_rows: usize,
    pub embedding_dim: usize,
    pub hidden: usize,
    /// Token positions per input.
    pub seq_len: usize,
    pub n_features: usize,
    pub activation: CellActivation,
    pub feature_mode: FeatureMode,
    /// Skip index-0 timesteps, carrying the state through unchanged.
    pub masking: bool,
}

impl NetworkSpec {
    pub fn embedding_rows(&self) -> usize {
        match self.feature_mode {
            FeatureMode::Dense => self.token_rows,
            FeatureMode::PseudoTokens => self.token_rows + FEATURE_BUCKETS,
        }
    }

    /// Width of the dense layer: token positions plus feature count.
    pub fn dense_width(&self) -> usize {
        self.seq_len + self.n_features
    }

    fn dense_input(&self) -> usize {
        match self.feature_mode {
            FeatureMode::Dense => self.hidden + self.n_features,
            FeatureMode::PseudoTokens => self.hidden,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.token_rows < 2 || self.embedding_dim == 0 || self.hidden == 0 || self.seq_len == 0 {
            return Err(Error::InvalidArgument(format!(
                "degenerate network spec {self:?}"
            )));
        }
        Ok(())
    }
}

/// Maps a feature value in [0, 1] to its reserved bucket.
pub fn feature_bucket(value: f64) -> usize {
    ((value.clamp(0.0, 1.0) * FEATURE_BUCKETS as f64) as usize).min(FEATURE_BUCKETS - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: NetworkSpec,
    pub embedding: Tensor,
    pub lstm: LstmParams,
    pub dense_w: Tensor,
    pub dense_b: Tensor,
    pub out_w: Tensor,
    pub out_b: Tensor,
}

pub const BLOCK_NAMES: [&str; 8] = [
    "embedding",
    "lstm.w",
    "lstm.u",
    "lstm.b",
    "dense.w",
    "dense.b",
    "output.w",
    "output.b",
];

impl Network {
    pub fn zeros(spec: NetworkSpec) -> Self {
        let d = spec.dense_width();
        Network {
            embedding: Tensor::zeros(&[spec.embedding_rows(), spec.embedding_dim]),
            lstm: LstmParams::zeros(spec.embedding_dim, spec.hidden),
            dense_w: Tensor::zeros(&[d, spec.dense_input()]),
            dense_b: Tensor::zeros(&[d]),
            out_w: Tensor::zeros(&[NUM_CLASSES, d]),
            out_b: Tensor::zeros(&[NUM_CLASSES]),
            spec,
        }
    }

    pub fn init(spec: NetworkSpec, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        let mut net = Self::zeros(spec);
        let rows = spec.embedding_rows();
        glorot(rng, &mut net.embedding, rows, spec.embedding_dim);
        net.lstm = LstmParams::init(spec.embedding_dim, spec.hidden, rng);
        let d = spec.dense_width();
        glorot(rng, &mut net.dense_w, spec.dense_input(), d);
        glorot(rng, &mut net.out_w, d, NUM_CLASSES);
        Ok(net)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.spec)
    }

    pub fn blocks(&self) -> [(&'static str, &Tensor); 8] {
        [
            (BLOCK_NAMES[0], &self.embedding),
            (BLOCK_NAMES[1], &self.lstm.w),
            (BLOCK_NAMES[2], &self.lstm.u),
            (BLOCK_NAMES[3], &self.lstm.b),
            (BLOCK_NAMES[4], &self.dense_w),
            (BLOCK_NAMES[5], &self.dense_b),
            (BLOCK_NAMES[6], &self.out_w),
            (BLOCK_NAMES[7], &self.out_b),
        ]
    }

    pub fn blocks_mut(&mut self) -> [(&'static str, &mut Tensor); 8] {
        [
            (BLOCK_NAMES[0], &mut self.embedding),
            (BLOCK_NAMES[1], &mut self.lstm.w),
            (BLOCK_NAMES[2], &mut self.lstm.u),
            (BLOCK_NAMES[3], &mut self.lstm.b),
            (BLOCK_NAMES[4], &mut self.dense_w),
            (BLOCK_NAMES[5], &mut self.dense_b),
            (BLOCK_NAMES[6], &mut self.out_w),
            (BLOCK_NAMES[7], &mut self.out_b),
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.blocks().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn fill(&mut self, v: f64) {
        for (_, t) in self.blocks_mut() {
            t.fill(v);
        }
    }

    pub fn scale(&mut self, k: f64) {
        for (_, t) in self.blocks_mut() {
            t.scale(k);
        }
    }

    pub fn add_assign(&mut self, other: &Network) {
        for ((_, a), (_, b)) in self.blocks_mut().into_iter().zip(other.blocks()) {
            a.add_assign(b);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.blocks()
            .iter()
            .map(|(_, t)| t.sum_squares())
            .sum::<f64>()
            .sqrt()
    }

    /// Full timestep sequence: tokens, then pseudo-tokens in that mode.
    fn sequence(&self, tokens: &[u32], features: &[f64]) -> Result<Vec<u32>> {
        let spec = &self.spec;
        if tokens.len() != spec.seq_len {
            return Err(Error::Shape(format!(
                "expected {} token indices, got {}",
                spec.seq_len,
                tokens.len()
            )));
        }
        if features.len() != spec.n_features {
            return Err(Error::Shape(format!(
                "expected {} features, got {}",
                spec.n_features,
                features.len()
            )));
        }
        if let Some(&bad) = tokens.iter().find(|&&i| i as usize >= spec.token_rows) {
            return Err(Error::InvalidArgument(format!(
                "token index {bad} outside vocabulary of {} rows",
                spec.token_rows
            )));
        }
        let mut seq = tokens.to_vec();
        if spec.feature_mode == FeatureMode::PseudoTokens {
            seq.extend(
                features
                    .iter()
                    .map(|&v| (spec.token_rows + feature_bucket(v)) as u32),
            );
        }
        Ok(seq)
    }

    pub fn forward(
        &self,
        tokens: &[u32],
        features: &[f64],
    ) -> Result<(ClassDistribution, ForwardCache)> {
        let seq = self.sequence(tokens, features)?;
        let spec = &self.spec;
        let n = spec.hidden;

        let mut cache = ForwardCache::with_capacity(n, seq.len());
        let mut h = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut gates = vec![0.0; 4 * n];
        let mut c_new = vec![0.0; n];
        let mut act_c = vec![0.0; n];
        let mut h_new = vec![0.0; n];
        for &idx in &seq {
            if spec.masking && idx == PAD_INDEX {
                continue;
            }
            let x = self.embedding.row(idx as usize);
            self.lstm.step_into(
                spec.activation,
                x,
                &h,
                &c,
                &mut gates,
                &mut c_new,
                &mut act_c,
                &mut h_new,
            );
            cache.steps.push(idx);
            cache.h_prev.extend_from_slice(&h);
            cache.c_prev.extend_from_slice(&c);
            cache.gates.extend_from_slice(&gates);
            cache.act_c.extend_from_slice(&act_c);
            std::mem::swap(&mut h, &mut h_new);
            std::mem::swap(&mut c, &mut c_new);
        }

        let mut u = h;
        if spec.feature_mode == FeatureMode::Dense {
            u.extend_from_slice(features);
        }
        let mut a = self.dense_b.data().to_vec();
        matvec_add(self.dense_w.data(), u.len(), &u, &mut a);
        let r: Vec<f64> = a.iter().map(|&v| v.max(0.0)).collect();
        let mut logits = [0.0; NUM_CLASSES];
        logits.copy_from_slice(self.out_b.data());
        matvec_add(self.out_w.data(), r.len(), &r, &mut logits);
        let p = softmax(&logits);

        cache.dense_in = u;
        cache.dense_pre = a;
        cache.dense_out = r;
        cache.probs = p;
        Ok((ClassDistribution(p), cache))
    }

    pub fn predict(&self, tokens: &[u32], features: &[f64]) -> Result<ClassDistribution> {
        self.forward(tokens, features).map(|(d, _)| d)
    }

    /// Accumulates into `grads` the gradient of the cross-entropy loss for
    /// `target` at the cached forward pass, by backpropagation through time.
    pub fn backward(&self, cache: &ForwardCache, target: ClassLabel, grads: &mut Network) {
        let spec = &self.spec;
        let n = spec.hidden;
        let din = self.embedding.cols();

        let mut dlogits = cache.probs;
        dlogits[target.index()] -= 1.0;
        outer_add(grads.out_w.data_mut(), &dlogits, &cache.dense_out);
        for (g, d) in grads.out_b.data_mut().iter_mut().zip(&dlogits) {
            *g += d;
        }

        let width = cache.dense_out.len();
        let mut dr = vec![0.0; width];
        matvec_t_add(self.out_w.data(), width, &dlogits, &mut dr);
        let da: Vec<f64> = dr
            .iter()
            .zip(&cache.dense_pre)
            .map(|(g, &a)| if a > 0.0 { *g } else { 0.0 })
            .collect();
        outer_add(grads.dense_w.data_mut(), &da, &cache.dense_in);
        for (g, d) in grads.dense_b.data_mut().iter_mut().zip(&da) {
            *g += d;
        }
        let mut du = vec![0.0; cache.dense_in.len()];
        matvec_t_add(self.dense_w.data(), du.len(), &da, &mut du);

        let mut dh = du[..n].to_vec();
        let mut dc = vec![0.0; n];
        let mut dz = vec![0.0; 4 * n];
        let mut dx = vec![0.0; din];
        let act = spec.activation;
        for t in (0..cache.steps.len()).rev() {
            let gates = &cache.gates[t * 4 * n..(t + 1) * 4 * n];
            let act_c = &cache.act_c[t * n..(t + 1) * n];
            let c_prev = &cache.c_prev[t * n..(t + 1) * n];
            let h_prev = &cache.h_prev[t * n..(t + 1) * n];
            for k in 0..n {
                let (i, f, o, g) = (gates[k], gates[n + k], gates[2 * n + k], gates[3 * n + k]);
                let d_o = dh[k] * act_c[k];
                let dck = dc[k] + dh[k] * o * act.derivative_from_output(act_c[k]);
                dz[k] = dck * g * i * (1.0 - i);
                dz[n + k] = dck * c_prev[k] * f * (1.0 - f);
                dz[2 * n + k] = d_o * o * (1.0 - o);
                dz[3 * n + k] = dck * i * act.derivative_from_output(g);
                dc[k] = dck * f;
            }
            let idx = cache.steps[t] as usize;
            let x = self.embedding.row(idx);
            outer_add(grads.lstm.w.data_mut(), &dz, x);
            outer_add(grads.lstm.u.data_mut(), &dz, h_prev);
            for (g, d) in grads.lstm.b.data_mut().iter_mut().zip(&dz) {
                *g += d;
            }
            dx.fill(0.0);
            matvec_t_add(self.lstm.w.data(), din, &dz, &mut dx);
            for (g, d) in grads.embedding.row_mut(idx).iter_mut().zip(&dx) {
                *g += d;
            }
            dh.fill(0.0);
            matvec_t_add(self.lstm.u.data(), n, &dz, &mut dh);
        }
    }

    /// Loss and accumulated gradient for one example.
    pub fn loss_and_grad(
        &self,
        tokens: &[u32],
        features: &[f64],
        target: ClassLabel,
        grads: &mut Network,
    ) -> Result<(f64, ClassDistribution)> {
        let (dist, cache) = self.forward(tokens, features)?;
        self.backward(&cache, target, grads);
        Ok((cross_entropy(&dist, target), dist))
    }
}

/// Activations kept from a forward pass for the backward pass. Only
/// timesteps that were actually processed (not masked) are stored.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    steps: Vec<u32>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    gates: Vec<f64>,
    act_c: Vec<f64>,
    dense_in: Vec<f64>,
    dense_pre: Vec<f64>,
    dense_out: Vec<f64>,
    probs: [f64; NUM_CLASSES],
}

impl ForwardCache {
    fn with_capacity(hidden: usize, steps: usize) -> Self {
        ForwardCache {
            steps: Vec::with_capacity(steps),
            h_prev: Vec::with_capacity(hidden * steps),
            c_prev: Vec::with_capacity(hidden * steps),
            gates: Vec::with_capacity(4 * hidden * steps),
            act_c: Vec::with_capacity(hidden * steps),
            ..Default::default()
        }
    }

    pub fn processed_steps(&self) -> usize {
        self.steps.len()
    }

    /// Input to the dense layer (final hidden state, plus features in dense mode).
    pub fn dense_input(&self) -> &[f64] {
        &self.dense_in
    }

    pub fn dense_activations(&self) -> &[f64] {
        &self.dense_out
    }
}

pub fn softmax(logits: &[f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; NUM_CLASSES];
    let mut s = 0.0;
    for (pi, &l) in p.iter_mut().zip(logits) {
        *pi = (l - m).exp();
        s += *pi;
    }
    p.iter_mut().for_each(|v| *v /= s);
    p
}

/// Categorical cross-entropy `-ln p_target` with the probability clamped to
/// `[PROB_FLOOR, 1]`.
pub fn cross_entropy(prediction: &ClassDistribution, target: ClassLabel) -> f64 {
    -prediction.prob(target).clamp(PROB_FLOOR, 1.0).ln()
}

impl From<Vec<f64>> for ClassDistribution {
    fn from(v: Vec<f64>) -> Self {
        let mut a = [0.0; NUM_CLASSES];
        a.copy_from_slice(&v[..NUM_CLASSES]);
        ClassDistribution(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn tiny_spec(mode: FeatureMode, act: CellActivation) -> NetworkSpec {
        NetworkSpec {
            token_rows: 12,
            embedding_dim: 4,
            hidden: 8,
            seq_len: 5,
            n_features: 3,
            activation: act,
            feature_mode: mode,
            masking: true,
        }
    }

    fn tiny(seed: u64) -> Network {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Network::init(
            tiny_spec(FeatureMode::Dense, CellActivation::Sigmoid),
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn loss_closed_forms() {
        let perfect = ClassDistribution([1.0, 0.0, 0.0]);
        assert_eq!(cross_entropy(&perfect, ClassLabel::Neutral), 0.0);
        let u = ClassDistribution::uniform();
        assert!((cross_entropy(&u, ClassLabel::Sexism) - 3f64.ln()).abs() < 1e-12);
        let d = ClassDistribution([0.7, 0.2, 0.1]);
        assert!((cross_entropy(&d, ClassLabel::Racism) - 1.6094379124341003).abs() < 1e-12);
        // Clamp keeps the loss finite.
        assert!((cross_entropy(&perfect, ClassLabel::Racism) - 1e-12f64.ln().abs()).abs() < 1e-9);
    }

    #[test]
    fn zero_output_layer_is_uniform() {
        let mut net = tiny(3);
        net.out_w.fill(0.0);
        net.out_b.fill(0.0);
        let d = net.predict(&[2, 3, 0, 0, 0], &[0.2, 0.3, 0.5]).unwrap();
        for p in d.0 {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_is_pure() {
        let net = tiny(4);
        let a = net.predict(&[5, 2, 7, 0, 0], &[0.1, 0.1, 0.8]).unwrap();
        let b = net.predict(&[5, 2, 7, 0, 0], &[0.1, 0.1, 0.8]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_out_of_range_index_and_bad_shapes() {
        let net = tiny(5);
        assert!(net.predict(&[12, 0, 0, 0, 0], &[0.0; 3]).is_err());
        assert!(net.predict(&[1, 0, 0, 0], &[0.0; 3]).is_err());
        assert!(net.predict(&[1, 0, 0, 0, 0], &[0.0; 2]).is_err());
    }

    #[test]
    fn output_gradient_identity() {
        let net = tiny(6);
        let (dist, cache) = net.forward(&[3, 4, 5, 0, 0], &[0.5, 0.25, 0.25]).unwrap();
        let mut g = net.zeros_like();
        net.backward(&cache, ClassLabel::Racism, &mut g);
        let r = cache.dense_activations();
        for c in 0..NUM_CLASSES {
            let delta = dist.0[c] - if c == 1 { 1.0 } else { 0.0 };
            assert!((g.out_b.data()[c] - delta).abs() < 1e-15);
            for (j, rj) in r.iter().enumerate() {
                assert!((g.out_w.row(c)[j] - delta * rj).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn padding_row_receives_no_gradient_when_masked() {
        let net = tiny(7);
        let mut g = net.zeros_like();
        net.loss_and_grad(
            &[3, 4, 0, 0, 0],
            &[0.3, 0.3, 0.4],
            ClassLabel::Sexism,
            &mut g,
        )
        .unwrap();
        assert!(g.embedding.row(0).iter().all(|&v| v == 0.0));

        let mut perturbed = net.clone();
        perturbed
            .embedding
            .row_mut(0)
            .iter_mut()
            .for_each(|v| *v += 0.5);
        let a = net.predict(&[3, 4, 0, 0, 0], &[0.3, 0.3, 0.4]).unwrap();
        let b = perturbed
            .predict(&[3, 4, 0, 0, 0], &[0.3, 0.3, 0.4])
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn extra_padding_does_not_change_output() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let short = Network::init(
            tiny_spec(FeatureMode::Dense, CellActivation::Tanh),
            &mut rng,
        )
        .unwrap();
        // The dense width follows seq_len, so compare the dense-layer input.
        let (_, c1) = short.forward(&[3, 4, 0, 0, 0], &[0.1, 0.2, 0.7]).unwrap();
        let mut l = Network::zeros(NetworkSpec {
            seq_len: 9,
            ..short.spec
        });
        l.embedding = short.embedding.clone();
        l.lstm = short.lstm.clone();
        let (_, c2) = l
            .forward(&[3, 4, 0, 0, 0, 0, 0, 0, 0], &[0.1, 0.2, 0.7])
            .unwrap();
        assert_eq!(c1.dense_input(), c2.dense_input());
        assert_eq!(c1.processed_steps(), 2);
    }

    #[test]
    fn unmasked_mode_processes_padding() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut spec = tiny_spec(FeatureMode::Dense, CellActivation::Sigmoid);
        spec.masking = false;
        let net = Network::init(spec, &mut rng).unwrap();
        let (_, cache) = net.forward(&[3, 0, 0, 0, 0], &[0.0; 3]).unwrap();
        assert_eq!(cache.processed_steps(), 5);
    }

    #[test]
    fn pseudo_token_mode_appends_features() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        let net = Network::init(
            tiny_spec(FeatureMode::PseudoTokens, CellActivation::Sigmoid),
            &mut rng,
        )
        .unwrap();
        assert_eq!(net.embedding.rows(), 12 + FEATURE_BUCKETS);
        let (_, cache) = net.forward(&[3, 4, 0, 0, 0], &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(cache.processed_steps(), 5);
        assert_eq!(cache.dense_input().len(), 8);
        assert_eq!(feature_bucket(0.0), 0);
        assert_eq!(feature_bucket(0.5), 50);
        assert_eq!(feature_bucket(1.0), 99);
    }

    proptest! {
        #[test]
        fn softmax_is_normalized_and_shift_invariant(
            a in -50.0f64..50.0, b in -50.0f64..50.0, c in -50.0f64..50.0, k in -100.0f64..100.0
        ) {
            let p = softmax(&[a, b, c]);
            prop_assert!(p.iter().all(|&v| v > 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let q = softmax(&[a + k, b + k, c + k]);
            for (x, y) in p.iter().zip(&q) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
