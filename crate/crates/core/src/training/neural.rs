use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::TrainingSet;
use crate::linalg::c;
use crate::neural::{
    anneal, bits_to_input, flatten_grads, neural_vq_quantize, output_to_complex, AnnealSchedule, Mlp, NeuralCodebook,
};
use crate::{par_map, CVec, Error, Result};

/// Loss the networks are trained on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeuralObjective {
    /// Sum-EI with bits from neural-MQ.
    #[default]
    Mq,
    /// Per-RU distortion `‖x_m / γ_m − f_m(b_m)‖²` with bits from neural-VQ.
    Vq,
}

/// When hard bits are recomputed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BitRefresh {
    #[default]
    PerEpoch,
    PerStep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuralTrainOptions {
    pub epochs: usize,
    #[serde(default = "one")]
    pub steps_per_epoch: usize,
    #[serde(default)]
    pub adam: AdamConfig,
    #[serde(default)]
    pub schedule: AnnealSchedule,
    #[serde(default)]
    pub objective: NeuralObjective,
    #[serde(default)]
    pub refresh: BitRefresh,
    /// Set `γ_m` from the initial networks so that `E‖γ_m f_m(b)‖² = P_m`
    /// over random bits. Otherwise the scales of `init` are kept. Either way
    /// `γ_m` shrinks after training if the training set exceeds `P_m`.
    #[serde(default = "yes")]
    pub calibrate_gamma: bool,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl NeuralTrainOptions {
    pub fn new(epochs: usize) -> Self {
        NeuralTrainOptions {
            epochs,
            steps_per_epoch: 1,
            adam: AdamConfig::default(),
            schedule: AnnealSchedule::default(),
            objective: NeuralObjective::Mq,
            refresh: BitRefresh::PerEpoch,
            calibrate_gamma: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeuralTrainOutcome {
    pub code: NeuralCodebook,
    /// Mean training loss before every Adam step.
    pub trace: Vec<f64>,
}

/// Losses blowing up by this factor abort training.
const DIVERGENCE_FACTOR: f64 = 1e6;

/// Random bit patterns used to calibrate the power scales.
const CALIBRATION_PATTERNS: usize = 256;

/// Full-batch Adam on the networks with hard bits held fixed between
/// refreshes.
pub fn neural_train_adam(
    init: &NeuralCodebook,
    set: &TrainingSet,
    opts: &NeuralTrainOptions,
) -> Result<NeuralTrainOutcome> {
    let mut code = init.clone();
    for s in &set.samples {
        code.check(&s.ctx)?;
    }
    if opts.steps_per_epoch == 0 {
        return Err(Error::config("steps_per_epoch must be at least 1"));
    }
    if opts.calibrate_gamma {
        code.gamma = calibrate(&code, &set.cfg.power);
    }
    let mut params: Vec<Vec<f64>> = code.rus.iter().map(Mlp::params).collect();
    let mut adams: Vec<AdamState> = params.iter().map(|p| AdamState::new(p.len(), opts.adam)).collect();
    let mut trace = Vec::with_capacity(opts.epochs * opts.steps_per_epoch);
    let mut initial_residual = None;
    let mut bits = Vec::new();
    for epoch in 0..opts.epochs {
        for step in 0..opts.steps_per_epoch {
            if step == 0 || opts.refresh == BitRefresh::PerStep {
                bits = hard_bits(&code, set, opts)?;
            }
            let (loss, residual, grads) = loss_and_grads(&code, set, &bits, opts.objective)?;
            trace.push(loss);
            let initial = *initial_residual.get_or_insert(residual);
            if !loss.is_finite() || residual > DIVERGENCE_FACTOR * initial.max(f64::MIN_POSITIVE) {
                return Err(Error::Divergence { epoch, loss, initial });
            }
            for ((p, a), g) in params.iter_mut().zip(&mut adams).zip(&grads) {
                a.step(p, g);
            }
            for (net, p) in code.rus.iter_mut().zip(&params) {
                net.set_params(p);
            }
        }
        log::debug!("neural epoch {epoch}: loss {:.6e}", trace.last().copied().unwrap_or(f64::NAN));
    }
    let bits = hard_bits(&code, set, opts)?;
    for m in 0..code.num_rus() {
        let p = bits.iter().map(|b| code.hard_codeword(m, &b[m]).norm_squared()).sum::<f64>() / set.len() as f64;
        let g = code.gamma[m];
        if p * g * g > set.cfg.power[m] {
            code.gamma[m] = (set.cfg.power[m] / p).sqrt();
        }
    }
    Ok(NeuralTrainOutcome { code, trace })
}

fn calibrate(code: &NeuralCodebook, power: &[f64]) -> Vec<f64> {
    code.rus
        .iter()
        .enumerate()
        .map(|(m, net)| {
            let mut rng = ChaCha8Rng::seed_from_u64(m as u64);
            let mean = (0..CALIBRATION_PATTERNS)
                .map(|_| {
                    let b: Vec<bool> = (0..net.input_dim()).map(|_| rng.random_bool(0.5)).collect();
                    output_to_complex(&net.forward(&bits_to_input(&b))).norm_squared()
                })
                .sum::<f64>()
                / CALIBRATION_PATTERNS as f64;
            if mean > 0.0 {
                (power[m] / mean).sqrt()
            } else {
                1.0
            }
        })
        .collect()
}

fn hard_bits(code: &NeuralCodebook, set: &TrainingSet, opts: &NeuralTrainOptions) -> Result<Vec<Vec<Vec<bool>>>> {
    par_map(&set.samples, |s| -> Result<Vec<Vec<bool>>> {
        match opts.objective {
            NeuralObjective::Mq => {
                let nets: Vec<&Mlp> = code.rus.iter().collect();
                anneal(&s.ctx.objective(&code.gamma)?, &nets, &opts.schedule)
            }
            NeuralObjective::Vq => (0..code.num_rus())
                .map(|m| {
                    neural_vq_quantize(&(s.ctx.x_block(m) / c(code.gamma[m])), &code.rus[m], &opts.schedule)
                        .map(|r| r.0)
                })
                .collect(),
        }
    })
    .into_iter()
    .collect()
}

fn to_output(g: &CVec) -> DVector<f64> {
    let n = g.len();
    DVector::from_fn(2 * n, |i, _| if i < n { g[i].re } else { g[i - n].im })
}

/// Mean loss, mean residual energy and mean gradients per RU.
fn loss_and_grads(
    code: &NeuralCodebook,
    set: &TrainingSet,
    bits: &[Vec<Vec<bool>>],
    objective: NeuralObjective,
) -> Result<(f64, f64, Vec<Vec<f64>>)> {
    let pairs: Vec<(usize, &Vec<Vec<bool>>)> = bits.iter().enumerate().collect();
    let per_sample = par_map(&pairs, |&(k, b)| -> Result<(f64, f64, Vec<Vec<f64>>)> {
        let ctx = &set.samples[k].ctx;
        let inputs: Vec<DVector<f64>> = b.iter().map(|bm| bits_to_input(bm)).collect();
        let traces: Vec<_> = code.rus.iter().zip(&inputs).map(|(n, u)| n.forward_trace(u)).collect();
        let xs: Vec<CVec> = traces.iter().map(|t| output_to_complex(t.output())).collect();
        let (loss, residual, out_grads): (f64, f64, Vec<CVec>) = match objective {
            NeuralObjective::Mq => {
                let obj = ctx.objective(&code.gamma)?;
                let e = obj.residual(&xs);
                let r = e.norm_squared();
                (r + obj.offset, r, (0..xs.len()).map(|m| obj.gradient_block(m, &e) * c(2.0)).collect())
            }
            NeuralObjective::Vq => {
                let es: Vec<CVec> = xs.iter().enumerate().map(|(m, x)| x - ctx.x_block(m) / c(code.gamma[m])).collect();
                let r = es.iter().map(|e| e.norm_squared()).sum();
                (r, r, es.iter().map(|e| e * c(2.0)).collect())
            }
        };
        let grads = code
            .rus
            .iter()
            .zip(&traces)
            .zip(&out_grads)
            .map(|((net, tr), g)| flatten_grads(&net.backward(tr, &to_output(g), true).1.expect("requested")))
            .collect();
        Ok((loss, residual, grads))
    });
    let n = set.len() as f64;
    let mut loss = 0.0;
    let mut residual = 0.0;
    let mut grads: Vec<Vec<f64>> = code.rus.iter().map(|net| vec![0.0; net.num_params()]).collect();
    for r in per_sample {
        let (l, e, g) = r?;
        loss += l / n;
        residual += e / n;
        for (acc, gm) in grads.iter_mut().zip(g) {
            for (a, v) in acc.iter_mut().zip(gm) {
                *a += v / n;
            }
        }
    }
    Ok((loss, residual, grads))
}
