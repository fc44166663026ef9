use serde::{Deserialize, Serialize};

use super::network::Network;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam update of one parameter slice. `step` is the 1-based
/// index of this update.
pub fn adam_update(
    cfg: &AdamConfig,
    step: u64,
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
) {
    debug_assert!(step >= 1);
    let c1 = 1.0 - cfg.beta1.powi(step as i32);
    let c2 = 1.0 - cfg.beta2.powi(step as i32);
    for (((p, &g), mi), vi) in params.iter_mut().zip(grads).zip(m).zip(v) {
        *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * g;
        *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * g * g;
        let m_hat = *mi / c1;
        let v_hat = *vi / c2;
        *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// Moment estimates for every block of a [`Network`].
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: Network,
    v: Network,
}

impl AdamState {
    pub fn new(config: AdamConfig, like: &Network) -> Self {
        AdamState {
            config,
            step: 0,
            m: like.zeros_like(),
            v: like.zeros_like(),
        }
    }

    pub fn apply(&mut self, params: &mut Network, grads: &Network) {
        self.step += 1;
        let blocks = params
            .blocks_mut()
            .into_iter()
            .zip(grads.blocks())
            .zip(self.m.blocks_mut())
            .zip(self.v.blocks_mut());
        for ((((_, p), (_, g)), (_, m)), (_, v)) in blocks {
            adam_update(
                &self.config,
                self.step,
                p.data_mut(),
                g.data(),
                m.data_mut(),
                v.data_mut(),
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_closed_form() {
        let cfg = AdamConfig::default();
        let mut p = vec![0.0; 4];
        let (mut m, mut v) = (vec![0.0; 4], vec![0.0; 4]);
        adam_update(&cfg, 1, &mut p, &[1.0; 4], &mut m, &mut v);
        let expected = -0.001 / (1.0 + 1e-8);
        for x in p {
            assert!((x - expected).abs() < 1e-18);
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let cfg = AdamConfig::default();
        let mut p = vec![0.3, -1.2];
        let (mut m, mut v) = (vec![0.0; 2], vec![0.0; 2]);
        adam_update(&cfg, 1, &mut p, &[0.0, 0.0], &mut m, &mut v);
        assert_eq!(p, vec![0.3, -1.2]);
    }

    #[test]
    fn descends_a_parabola() {
        // f(x) = x^2, f'(x) = 2x.
        let cfg = AdamConfig::default();
        let mut x = [1.0];
        let (mut m, mut v) = ([0.0], [0.0]);
        let mut f = x[0] * x[0];
        for step in 1..=2 {
            let g = [2.0 * x[0]];
            adam_update(&cfg, step, &mut x, &g, &mut m, &mut v);
            let next = x[0] * x[0];
            assert!(next < f);
            f = next;
        }
    }
}
