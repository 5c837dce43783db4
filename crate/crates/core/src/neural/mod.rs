//! Neural codebooks and annealed gradient-descent quantization.
//!
//! A neural codebook maps `B_m` (relaxed) bits to the `2 n_tx` real outputs
//! of a small MLP, read as `[Re x̂_m; Im x̂_m]`. Quantization relaxes the
//! bits to `u = σ_τ(r)` and runs gradient descent on `r` while the
//! temperature is annealed; the final bits are `1(r > 0)`.
//!
//! With `e = Σ_m γ_m A_m x̂_m − t`, the gradient of `‖e‖²` with respect to
//! the network output of RU `m` is `2 [Re g_m; Im g_m]`, `g_m = γ_m A_m† e`.
//! It is backpropagated through the network and the sigmoid
//! (`dσ_τ/dr = σ_τ(1 − σ_τ)/τ`).

mod checkpoint;
mod mlp;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use mlp::{flatten_grads, Activation, Dense, ForwardTrace, Mlp};

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::c;
use crate::model::{bits_to_index, SystemConfig};
use crate::quantizers::{assemble_result, LinearObjective, QuantContext};
use crate::{CVec, Error, QuantizationResult, Result, C64};

/// One MLP per RU plus the power scales used with it.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuralCodebook {
    pub activation: Activation,
    pub gamma: Vec<f64>,
    pub rus: Vec<Mlp>,
}

impl NeuralCodebook {
    /// Xavier-initialized networks `B_m → D_m (×K_m) → 2 n_tx[m]`.
    pub fn xavier<R: Rng + ?Sized>(cfg: &SystemConfig, hidden: &[usize], depth: &[usize], rng: &mut R) -> Result<Self> {
        let m = cfg.num_rus();
        if hidden.len() != m || depth.len() != m {
            return Err(Error::config("hidden widths and depths are per RU"));
        }
        let rus =
            (0..m).map(|i| Mlp::xavier(cfg.bits[i] as usize, hidden[i], depth[i], 2 * cfg.n_tx[i], rng)).collect();
        Ok(NeuralCodebook { activation: Activation::Tanh, gamma: vec![1.0; m], rus })
    }

    /// Default architecture: one hidden layer of width `B_m`.
    pub fn default_for<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<Self> {
        let hidden: Vec<usize> = cfg.bits.iter().map(|&b| b as usize).collect();
        Self::xavier(cfg, &hidden, &vec![1; cfg.num_rus()], rng)
    }

    pub fn num_rus(&self) -> usize {
        self.rus.len()
    }

    pub fn bits(&self) -> Vec<u32> {
        self.rus.iter().map(|n| n.input_dim() as u32).collect()
    }

    /// Codeword of RU `m` for (possibly relaxed) bits `u`.
    pub fn codeword(&self, m: usize, u: &DVector<f64>) -> CVec {
        output_to_complex(&self.rus[m].forward(u))
    }

    /// Codeword for hard bits.
    pub fn hard_codeword(&self, m: usize, bits: &[bool]) -> CVec {
        self.codeword(m, &bits_to_input(bits))
    }

    /// Multiply-accumulates of one relaxed GD step (forward and backward
    /// through every network).
    pub fn macs_per_step(&self) -> u64 {
        2 * self.rus.iter().map(|n| n.forward_macs()).sum::<u64>()
    }

    pub(crate) fn check(&self, ctx: &QuantContext) -> Result<()> {
        if self.rus.len() != ctx.num_rus() || self.gamma.len() != ctx.num_rus() {
            return Err(Error::config("neural codebook does not match the RU count"));
        }
        for (m, net) in self.rus.iter().enumerate() {
            if net.output_dim() != 2 * ctx.dims[m] {
                return Err(Error::config(format!("network of RU {m} outputs {} reals", net.output_dim())));
            }
        }
        Ok(())
    }
}

pub fn output_to_complex(y: &DVector<f64>) -> CVec {
    let n = y.len() / 2;
    CVec::from_fn(n, |i, _| C64::new(y[i], y[n + i]))
}

fn complex_to_output(g: &CVec) -> DVector<f64> {
    let n = g.len();
    DVector::from_fn(2 * n, |i, _| if i < n { g[i].re } else { g[i - n].im })
}

pub fn bits_to_input(bits: &[bool]) -> DVector<f64> {
    DVector::from_iterator(bits.len(), bits.iter().map(|&b| if b { 1.0 } else { 0.0 }))
}

/// `1 / (1 + exp(−x/τ))`.
pub fn sigmoid_tau(x: f64, tau: f64) -> f64 {
    let z = x / tau;
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `I` GD steps with step size `η` and temperatures `τ_i = exp(−5 i / I)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealSchedule {
    pub steps: usize,
    #[serde(default = "default_step_size")]
    pub step_size: f64,
}

fn default_step_size() -> f64 {
    0.1
}

impl AnnealSchedule {
    pub fn new(steps: usize, step_size: f64) -> Self {
        AnnealSchedule { steps, step_size }
    }

    /// Temperature of 1-based step `i`.
    pub fn tau(&self, i: usize) -> f64 {
        (-5.0 * i as f64 / self.steps as f64).exp()
    }
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        AnnealSchedule { steps: 100, step_size: default_step_size() }
    }
}

/// Relaxed objective `obj(f(σ_τ(r)))` and its gradient with respect to
/// every `r_m`.
pub fn relaxed_objective_grad(
    obj: &LinearObjective,
    nets: &[&Mlp],
    r: &[DVector<f64>],
    tau: f64,
) -> (f64, Vec<DVector<f64>>) {
    let us: Vec<DVector<f64>> = r.iter().map(|rm| rm.map(|v| sigmoid_tau(v, tau))).collect();
    let traces: Vec<ForwardTrace> = nets.iter().zip(&us).map(|(n, u)| n.forward_trace(u)).collect();
    let xs: Vec<CVec> = traces.iter().map(|t| output_to_complex(t.output())).collect();
    let e = obj.residual(&xs);
    let value = e.norm_squared() + obj.offset;
    let grads = (0..nets.len())
        .map(|m| {
            let g = obj.gradient_block(m, &e) * c(2.0);
            let (du, _) = nets[m].backward(&traces[m], &complex_to_output(&g), false);
            DVector::from_fn(du.len(), |i, _| du[i] * us[m][i] * (1.0 - us[m][i]) / tau)
        })
        .collect();
    (value, grads)
}

/// Annealed GD on the relaxed bits; returns hard bits per RU.
pub fn anneal(obj: &LinearObjective, nets: &[&Mlp], schedule: &AnnealSchedule) -> Result<Vec<Vec<bool>>> {
    let mut r: Vec<DVector<f64>> = nets.iter().map(|n| DVector::zeros(n.input_dim())).collect();
    for i in 1..=schedule.steps {
        let tau = schedule.tau(i);
        let (_, grads) = relaxed_objective_grad(obj, nets, &r, tau);
        for (m, g) in grads.iter().enumerate() {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { step: i, detail: format!("RU {m}, tau {tau:.3e}") });
            }
            r[m] -= g * schedule.step_size;
        }
    }
    Ok(r.iter().map(|rm| rm.iter().map(|&v| v > 0.0).collect()).collect())
}

/// Neural-MQ: joint annealed search on the sum-EI objective. The reported
/// codewords are the hard outputs `f(b|θ)`.
pub fn neural_mq_quantize(
    ctx: &QuantContext,
    code: &NeuralCodebook,
    schedule: &AnnealSchedule,
) -> Result<QuantizationResult> {
    code.check(ctx)?;
    let obj = ctx.objective(&code.gamma)?;
    let nets: Vec<&Mlp> = code.rus.iter().collect();
    let bits = anneal(&obj, &nets, schedule)?;
    Ok(hard_result(&obj, code, &bits, schedule.steps as u64))
}

fn hard_result(obj: &LinearObjective, code: &NeuralCodebook, bits: &[Vec<bool>], evals: u64) -> QuantizationResult {
    let words: Vec<CVec> = bits.iter().enumerate().map(|(m, b)| code.hard_codeword(m, b)).collect();
    let indices = bits.iter().map(|b| bits_to_index(b)).collect();
    assemble_result(obj, words, indices, code.bits(), &code.gamma, evals)
}

/// Neural-VQ for one RU: annealed search on `‖x − f(σ_τ(r)|θ)‖²`.
pub fn neural_vq_quantize(x: &CVec, net: &Mlp, schedule: &AnnealSchedule) -> Result<(Vec<bool>, CVec)> {
    if net.output_dim() != 2 * x.len() {
        return Err(Error::config("network output does not match the target dimension"));
    }
    let bits = anneal(&LinearObjective::euclidean(x), &[net], schedule)?.remove(0);
    let word = output_to_complex(&net.forward(&bits_to_input(&bits)));
    Ok((bits, word))
}

/// Neural-VQ on every RU (targets `x_m / γ_m`), scored with sum-EI.
pub fn neural_vq_quantize_all(
    ctx: &QuantContext,
    code: &NeuralCodebook,
    schedule: &AnnealSchedule,
) -> Result<QuantizationResult> {
    code.check(ctx)?;
    let obj = ctx.objective(&code.gamma)?;
    let bits = (0..ctx.num_rus())
        .map(|m| neural_vq_quantize(&(ctx.x_block(m) / c(code.gamma[m])), &code.rus[m], schedule).map(|r| r.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(hard_result(&obj, code, &bits, (schedule.steps * ctx.num_rus()) as u64))
}
