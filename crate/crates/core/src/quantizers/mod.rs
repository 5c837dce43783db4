//! Lookup-codebook fronthaul quantizers.
//!
//! Every sum-EI criterion is handled through one quadratic form,
//! `obj(x̂) = ‖Σ_m γ_m A_m x̂_m − t‖² + offset`:
//!
//! * single-antenna EI: `A_m = H_{:,m}`, `t = [H_n W_n s_n]_n`, `offset = 0`;
//! * multi-antenna EI: `A_m = blockdiag(F_n†) H_{:,m}`, `t = s`,
//!   `offset = −‖s‖²`.

mod codebook;
mod graph;
mod lookup;
mod pmq;
mod tree;

pub use codebook::{CodebookSet, LookupCodebook, TreeCodebook, TreeCodebookSet};
pub use graph::{build_interference_graph, rlf_independent_sets, InterferenceGraph, QuantizationSchedule};
pub use lookup::{mq_quantize, mq_quantize_with_cap, smq_quantize, vq_quantize, vq_quantize_all, DEFAULT_SEARCH_CAP};
pub use pmq::{alpha_pmq_quantize, alpha_pmq_with_schedule, PmqOptions, PmqOutcome};
pub use tree::{tree_mq_quantize, tree_mq_quantize_with_cap, tree_quantize, tree_quantize_all, TreeSearch};

use serde::{Deserialize, Serialize};

use crate::linalg::c;
use crate::model::{ChannelState, SystemConfig};
use crate::{CMat, CVec, Error, Result};

/// Which effective-interference criterion drives the search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EiKind {
    Single,
    Multi,
}

/// Per-channel-use quantization problem before power scaling.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantContext {
    pub kind: EiKind,
    /// `A_m` per RU, without `γ_m`.
    pub blocks: Vec<CMat>,
    pub target: CVec,
    pub offset: f64,
    /// Unquantized precoded signal `x = W s`.
    pub x: CVec,
    pub dims: Vec<usize>,
}

impl QuantContext {
    /// Single-antenna (per-UE Euclidean) EI context.
    pub fn single(cfg: &SystemConfig, channel: &ChannelState, w: &CMat, s: &CVec) -> Result<Self> {
        check(cfg, channel, w, s)?;
        let mut target = CVec::zeros(cfg.total_rx());
        for n in 0..cfg.num_ues() {
            let (rr, sr) = (cfg.rx_range(n), cfg.stream_range(n));
            let t = channel.ue_block(cfg, n) * (w.columns(sr.start, sr.len()) * s.rows(sr.start, sr.len()));
            target.rows_mut(rr.start, rr.len()).copy_from(&t);
        }
        let blocks = (0..cfg.num_rus()).map(|m| channel.ru_columns(cfg, m)).collect();
        Ok(QuantContext { kind: EiKind::Single, blocks, target, offset: 0.0, x: w * s, dims: cfg.n_tx.clone() })
    }

    /// Multi-antenna EI context for receive beamformers `f`.
    pub fn multi(cfg: &SystemConfig, channel: &ChannelState, w: &CMat, f: &[CMat], s: &CVec) -> Result<Self> {
        check(cfg, channel, w, s)?;
        if f.len() != cfg.num_ues() || f.iter().enumerate().any(|(n, f_n)| f_n.shape() != (cfg.n_rx[n], cfg.streams[n]))
        {
            return Err(Error::config("receive beamformers do not match the system"));
        }
        let mut fh = CMat::zeros(cfg.total_streams(), cfg.total_tx());
        for n in 0..cfg.num_ues() {
            let sr = cfg.stream_range(n);
            let rows = f[n].adjoint() * channel.ue_block(cfg, n);
            fh.view_mut((sr.start, 0), (sr.len(), cfg.total_tx())).copy_from(&rows);
        }
        let blocks = (0..cfg.num_rus())
            .map(|m| {
                let r = cfg.tx_range(m);
                fh.columns(r.start, r.len()).into_owned()
            })
            .collect();
        Ok(QuantContext {
            kind: EiKind::Multi,
            blocks,
            target: s.clone(),
            offset: -s.norm_squared(),
            x: w * s,
            dims: cfg.n_tx.clone(),
        })
    }

    /// Applies the power scales.
    pub fn objective(&self, gamma: &[f64]) -> Result<LinearObjective> {
        if gamma.len() != self.blocks.len() {
            return Err(Error::config("one power scale per RU is required"));
        }
        let a = self
            .blocks
            .iter()
            .zip(gamma)
            .enumerate()
            .map(
                |(m, (b, &g))| {
                    if g > 0.0 && g.is_finite() {
                        Ok(b * c(g))
                    } else {
                        Err(Error::InvalidScale { ru: m, value: g })
                    }
                },
            )
            .collect::<Result<_>>()?;
        Ok(LinearObjective { a, t: self.target.clone(), offset: self.offset })
    }

    pub fn num_rus(&self) -> usize {
        self.blocks.len()
    }

    /// `x_m`, RU `m`'s slice of the precoded signal.
    pub fn x_block(&self, m: usize) -> CVec {
        let start: usize = self.dims[..m].iter().sum();
        self.x.rows(start, self.dims[m]).into_owned()
    }
}

fn check(cfg: &SystemConfig, channel: &ChannelState, w: &CMat, s: &CVec) -> Result<()> {
    if channel.h.shape() != (cfg.total_rx(), cfg.total_tx())
        || w.shape() != (cfg.total_tx(), cfg.total_streams())
        || s.len() != cfg.total_streams()
    {
        return Err(Error::config("quantization context dimensions do not match the system"));
    }
    Ok(())
}

/// `‖Σ_m A_m x_m − t‖² + offset` with the power scales folded into `A_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearObjective {
    pub a: Vec<CMat>,
    pub t: CVec,
    pub offset: f64,
}

impl LinearObjective {
    /// Per-RU Euclidean distortion `‖x − target‖²`.
    pub fn euclidean(target: &CVec) -> Self {
        let n = target.len();
        LinearObjective { a: vec![CMat::identity(n, n)], t: target.clone(), offset: 0.0 }
    }

    pub fn contribution(&self, m: usize, x: &CVec) -> CVec {
        &self.a[m] * x
    }

    /// `Σ_m A_m x_m − t`.
    pub fn residual(&self, xs: &[CVec]) -> CVec {
        let mut e = -self.t.clone();
        for (a, x) in self.a.iter().zip(xs) {
            e += a * x;
        }
        e
    }

    pub fn value(&self, xs: &[CVec]) -> f64 {
        self.residual(xs).norm_squared() + self.offset
    }

    /// `A_m† e`; the gradient with respect to `[Re x_m; Im x_m]` is
    /// `2 [Re g; Im g]`.
    pub fn gradient_block(&self, m: usize, residual: &CVec) -> CVec {
        self.a[m].adjoint() * residual
    }

    /// All codeword contributions `A_m c` for RU `m`.
    pub fn contributions(&self, m: usize, book: &LookupCodebook) -> Vec<CVec> {
        book.words.iter().map(|w| &self.a[m] * w).collect()
    }
}

/// Builds a [`crate::QuantizationResult`] from per-RU indices.
pub(crate) fn assemble_result(
    obj: &LinearObjective,
    words: Vec<CVec>,
    indices: Vec<usize>,
    bit_widths: Vec<u32>,
    gamma: &[f64],
    evaluations: u64,
) -> crate::QuantizationResult {
    let objective = obj.value(&words);
    crate::QuantizationResult {
        indices,
        bit_widths,
        xhat: crate::model::concat_blocks(&words),
        gamma: gamma.to_vec(),
        objective,
        evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{ei_multi, ei_single};
    use crate::model::{apply_power_scaling, complex_gaussian};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn contexts_reproduce_metric_functions() {
        let cfg = SystemConfig::uniform(3, 2, 2, 2, 1, 2, 1.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ch = ChannelState::new(CMat::from_fn(4, 6, |_, _| complex_gaussian(&mut rng)), &cfg).unwrap();
        let w = CMat::from_fn(6, 2, |_, _| complex_gaussian(&mut rng));
        let s = CVec::from_fn(2, |_, _| complex_gaussian(&mut rng));
        let f: Vec<CMat> = (0..2).map(|_| CMat::from_fn(2, 1, |_, _| complex_gaussian(&mut rng))).collect();
        let gamma = [0.7, 1.1, 2.0];
        let xhat = CVec::from_fn(6, |_, _| complex_gaussian(&mut rng));
        let blocks: Vec<CVec> = (0..3).map(|m| xhat.rows(2 * m, 2).into_owned()).collect();

        let single = QuantContext::single(&cfg, &ch, &w, &s).unwrap().objective(&gamma).unwrap();
        let scaled = apply_power_scaling(&xhat, &gamma, &cfg).unwrap();
        let want: f64 = ei_single(&cfg, &ch, &w, &s, &scaled).unwrap().iter().sum();
        assert!((single.value(&blocks) - want).abs() < 1e-10 * want.abs().max(1.0));

        let multi = QuantContext::multi(&cfg, &ch, &w, &f, &s).unwrap().objective(&gamma).unwrap();
        let want: f64 = ei_multi(&cfg, &f, &ch, &gamma, &xhat, &s).unwrap().iter().sum();
        assert!((multi.value(&blocks) - want).abs() < 1e-10 * want.abs().max(1.0));
    }
}
