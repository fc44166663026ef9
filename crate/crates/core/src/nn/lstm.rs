use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{matvec_add, Tensor};
use crate::error::{Error, Result};

/// Activation used for the candidate value and for squashing the cell state.
/// Gates always use the logistic sigmoid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellActivation {
    #[default]
    Sigmoid,
    Tanh,
}

impl CellActivation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            CellActivation::Sigmoid => sigmoid(x),
            CellActivation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's output `y`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            CellActivation::Sigmoid => y * (1.0 - y),
            CellActivation::Tanh => 1.0 - y * y,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CellActivation::Sigmoid => "sigmoid",
            CellActivation::Tanh => "tanh",
        }
    }
}

impl std::str::FromStr for CellActivation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(CellActivation::Sigmoid),
            "tanh" => Ok(CellActivation::Tanh),
            other => Err(Error::InvalidArgument(format!(
                "unknown activation {other:?}"
            ))),
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Candidate = 3,
}

/// Weights of one LSTM layer. The four gates are stacked row-wise in the
/// order input, forget, output, candidate: `w` is `4H x D`, `u` is `4H x H`
/// and `b` has `4H` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden: usize,
    pub w: Tensor,
    pub u: Tensor,
    pub b: Tensor,
}

pub(crate) fn glorot(rng: &mut impl Rng, t: &mut Tensor, fan_in: usize, fan_out: usize) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in t.data_mut() {
        *v = rng.gen_range(-limit..limit);
    }
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        LstmParams {
            input_dim,
            hidden,
            w: Tensor::zeros(&[4 * hidden, input_dim]),
            u: Tensor::zeros(&[4 * hidden, hidden]),
            b: Tensor::zeros(&[4 * hidden]),
        }
    }

    /// Glorot-uniform weights per gate, zero biases except the forget gate at +1.
    pub fn init(input_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(input_dim, hidden);
        let (h, d) = (hidden, input_dim);
        for g in 0..4 {
            let mut w = Tensor::zeros(&[h, d]);
            glorot(rng, &mut w, d, h);
            p.w.data_mut()[g * h * d..(g + 1) * h * d].copy_from_slice(w.data());
            let mut u = Tensor::zeros(&[h, h]);
            glorot(rng, &mut u, h, h);
            p.u.data_mut()[g * h * h..(g + 1) * h * h].copy_from_slice(u.data());
        }
        p.b.data_mut()[h..2 * h].fill(1.0);
        p
    }

    pub fn gate_bias(&self, gate: Gate) -> &[f64] {
        let h = self.hidden;
        &self.b.data()[gate as usize * h..(gate as usize + 1) * h]
    }

    /// One step writing gate activations `[i, f, o, g]` (4H), the new cell
    /// state and its activation into caller-provided buffers.
    #[inline]
    pub(crate) fn step_into(
        &self,
        act: CellActivation,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
        gates: &mut [f64],
        c: &mut [f64],
        act_c: &mut [f64],
        h: &mut [f64],
    ) {
        let n = self.hidden;
        gates.copy_from_slice(self.b.data());
        matvec_add(self.w.data(), self.input_dim, x, gates);
        matvec_add(self.u.data(), n, h_prev, gates);
        for z in &mut gates[..3 * n] {
            *z = sigmoid(*z);
        }
        for z in &mut gates[3 * n..] {
            *z = act.apply(*z);
        }
        for k in 0..n {
            let (i, f, o, g) = (gates[k], gates[n + k], gates[2 * n + k], gates[3 * n + k]);
            c[k] = f * c_prev[k] + i * g;
            act_c[k] = act.apply(c[k]);
            h[k] = o * act_c[k];
        }
    }
}

/// Single LSTM recurrence step; returns `(h_t, c_t)`.
pub fn lstm_step(
    params: &LstmParams,
    act: CellActivation,
    x: &Tensor,
    h_prev: &Tensor,
    c_prev: &Tensor,
) -> Result<(Tensor, Tensor)> {
    let (d, n) = (params.input_dim, params.hidden);
    if x.len() != d || h_prev.len() != n || c_prev.len() != n {
        return Err(Error::Shape(format!(
            "lstm step expects x[{d}], h[{n}], c[{n}]; got x[{}], h[{}], c[{}]",
            x.len(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    let mut gates = vec![0.0; 4 * n];
    let (mut c, mut ac, mut h) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    params.step_into(
        act,
        x.data(),
        h_prev.data(),
        c_prev.data(),
        &mut gates,
        &mut c,
        &mut ac,
        &mut h,
    );
    Ok((Tensor::vector(h), Tensor::vector(c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_weights_closed_form() {
        let p = LstmParams::zeros(2, 3);
        let c_prev = Tensor::vector(vec![0.0, 1.0, -2.0]);
        let (h, c) = lstm_step(
            &p,
            CellActivation::Sigmoid,
            &Tensor::vector(vec![0.3, -0.7]),
            &Tensor::vector(vec![0.1, 0.2, 0.3]),
            &c_prev,
        )
        .unwrap();
        for k in 0..3 {
            let expect_c = 0.5 * c_prev.data()[k] + 0.25;
            assert!((c.data()[k] - expect_c).abs() < 1e-15);
            assert!((h.data()[k] - 0.5 * sigmoid(expect_c)).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let p = LstmParams::zeros(2, 3);
        let z3 = Tensor::vector(vec![0.0; 3]);
        assert!(lstm_step(&p, CellActivation::Tanh, &z3, &z3, &z3).is_err());
    }

    #[test]
    fn constant_padding_input_is_a_fixed_step() {
        // From zero state with zero input every step sees identical inputs.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let p = LstmParams::init(3, 4, &mut rng);
        let zero_x = Tensor::vector(vec![0.0; 3]);
        let zero_h = Tensor::vector(vec![0.0; 4]);
        let a = lstm_step(&p, CellActivation::Sigmoid, &zero_x, &zero_h, &zero_h).unwrap();
        let b = lstm_step(&p, CellActivation::Sigmoid, &zero_x, &zero_h, &zero_h).unwrap();
        assert_eq!(a, b);
    }

    /// Straight-line reference: each gate computed separately with explicit
    /// loops over nested vectors.
    fn reference_step(
        w: &[Vec<Vec<f64>>],
        u: &[Vec<Vec<f64>>],
        b: &[Vec<f64>],
        x: &[f64],
        h: &[f64],
        c: &[f64],
        tanh_mode: bool,
    ) -> (Vec<f64>, Vec<f64>) {
        let n = h.len();
        let pre = |g: usize, k: usize| {
            let mut s = b[g][k];
            for j in 0..x.len() {
                s += w[g][k][j] * x[j];
            }
            for j in 0..n {
                s += u[g][k][j] * h[j];
            }
            s
        };
        let logistic = |v: f64| 1.0 / (1.0 + (-v).exp());
        let cand = |v: f64| if tanh_mode { v.tanh() } else { logistic(v) };
        let mut h_out = vec![0.0; n];
        let mut c_out = vec![0.0; n];
        for k in 0..n {
            let i = logistic(pre(0, k));
            let f = logistic(pre(1, k));
            let o = logistic(pre(2, k));
            let g = cand(pre(3, k));
            c_out[k] = f * c[k] + i * g;
            h_out[k] = o * cand(c_out[k]);
        }
        (h_out, c_out)
    }

    #[test]
    fn matches_reference_step() {
        use rand::Rng;
        let (d, n) = (4, 3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let mut gen =
            |len: usize| -> Vec<f64> { (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let w: Vec<Vec<Vec<f64>>> = (0..4).map(|_| (0..n).map(|_| gen(d)).collect()).collect();
        let u: Vec<Vec<Vec<f64>>> = (0..4).map(|_| (0..n).map(|_| gen(n)).collect()).collect();
        let b: Vec<Vec<f64>> = (0..4).map(|_| gen(n)).collect();
        let (x, h, c) = (gen(d), gen(n), gen(n));

        let mut p = LstmParams::zeros(d, n);
        for g in 0..4 {
            for k in 0..n {
                p.w.row_mut(g * n + k).copy_from_slice(&w[g][k]);
                p.u.row_mut(g * n + k).copy_from_slice(&u[g][k]);
                p.b.data_mut()[g * n + k] = b[g][k];
            }
        }
        for (act, tanh_mode) in [
            (CellActivation::Sigmoid, false),
            (CellActivation::Tanh, true),
        ] {
            let (h_t, c_t) = lstm_step(
                &p,
                act,
                &Tensor::vector(x.clone()),
                &Tensor::vector(h.clone()),
                &Tensor::vector(c.clone()),
            )
            .unwrap();
            let (h_ref, c_ref) = reference_step(&w, &u, &b, &x, &h, &c, tanh_mode);
            for k in 0..n {
                assert!((h_t.data()[k] - h_ref[k]).abs() < 1e-12);
                assert!((c_t.data()[k] - c_ref[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn init_sets_forget_bias() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let p = LstmParams::init(5, 6, &mut rng);
        assert!(p.gate_bias(Gate::Forget).iter().all(|&b| b == 1.0));
        assert!(p.gate_bias(Gate::Input).iter().all(|&b| b == 0.0));
        let limit = (6.0f64 / 11.0).sqrt();
        assert!(p.w.data().iter().all(|v| v.abs() <= limit));
    }
}
