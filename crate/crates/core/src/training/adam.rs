use serde::{Deserialize, Serialize};

/// Adam hyper-parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    #[serde(default = "lr")]
    pub lr: f64,
    #[serde(default = "beta1")]
    pub beta1: f64,
    #[serde(default = "beta2")]
    pub beta2: f64,
    #[serde(default = "eps")]
    pub eps: f64,
}

fn lr() -> f64 {
    1e-3
}
fn beta1() -> f64 {
    0.9
}
fn beta2() -> f64 {
    0.999
}
fn eps() -> f64 {
    1e-8
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: lr(), beta1: beta1(), beta2: beta2(), eps: eps() }
    }
}

/// Moment estimates for one flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        AdamState { config, m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    /// One bias-corrected update of `params` along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len(), "parameter length mismatch");
        assert_eq!(grad.len(), self.m.len(), "gradient length mismatch");
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * grad[i];
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut s = AdamState::new(3, AdamConfig::default());
        let mut p = vec![0.5, -1.0, 2.0];
        s.step(&mut p, &[0.0; 3]);
        assert_eq!(p, vec![0.5, -1.0, 2.0]);
    }

    #[test]
    fn three_scalar_steps_match_hand_computation() {
        let cfg = AdamConfig { lr: 0.1, beta1: 0.9, beta2: 0.999, eps: 1e-8 };
        let mut s = AdamState::new(1, cfg);
        let mut p = [1.0];
        let grads = [0.5, -0.2, 0.3];
        // m1 = 0.05, v1 = 0.00025: m̂ = 0.5, v̂ = 0.25, step = 0.1 * 0.5 / 0.5 = 0.1.
        // m2 = 0.025, v2 = 0.00028975: m̂ = 0.025 / 0.19 = 0.131579, v̂ = 0.00028975 / 0.001999 = 0.144947.
        // m3 = 0.0525, v3 = 0.000379460: m̂ = 0.0525 / 0.271 = 0.193727, v̂ = 0.00037946 / 0.002997001 = 0.126613.
        let want = [0.9, 0.9 - 0.1 * 0.131579 / 0.144947f64.sqrt(), 0.0];
        let mut expected = want;
        expected[2] = expected[1] - 0.1 * 0.193727 / 0.126613f64.sqrt();
        for (g, w) in grads.iter().zip(expected) {
            s.step(&mut p, &[*g]);
            assert!((p[0] - w).abs() < 1e-5, "{} vs {w}", p[0]);
        }
        assert_eq!(s.t, 3);
    }
}
