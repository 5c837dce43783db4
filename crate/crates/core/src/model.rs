//! System configuration, block-partitioned containers and precoded-signal
//! assembly.

use std::ops::Range;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{CMat, CVec, Error, Result, C64};

/// Dimensions, fronthaul budgets and powers of a cell-free downlink.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Transmit antennas per RU.
    pub n_tx: Vec<usize>,
    /// Receive antennas per UE.
    pub n_rx: Vec<usize>,
    /// Data streams per UE.
    pub streams: Vec<usize>,
    /// Fronthaul bits per channel use, per RU.
    pub bits: Vec<u32>,
    /// Per-RU power budget (linear).
    pub power: Vec<f64>,
    /// Receiver noise variance (linear).
    pub noise_var: f64,
}

fn offsets(sizes: &[usize], i: usize) -> Range<usize> {
    let start: usize = sizes[..i].iter().sum();
    start..start + sizes[i]
}

impl SystemConfig {
    /// Homogeneous system: every RU and every UE share the same parameters.
    #[allow(clippy::too_many_arguments)]
    pub fn uniform(
        rus: usize,
        ues: usize,
        n_tx: usize,
        n_rx: usize,
        streams: usize,
        bits: u32,
        power: f64,
        noise_var: f64,
    ) -> Result<Self> {
        let cfg = SystemConfig {
            n_tx: vec![n_tx; rus],
            n_rx: vec![n_rx; ues],
            streams: vec![streams; ues],
            bits: vec![bits; rus],
            power: vec![power; rus],
            noise_var,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.n_tx.len();
        let n = self.n_rx.len();
        if m == 0 || n == 0 {
            return Err(Error::config("at least one RU and one UE are required"));
        }
        if self.bits.len() != m || self.power.len() != m {
            return Err(Error::config(format!(
                "per-RU vectors must have length {m} (bits: {}, power: {})",
                self.bits.len(),
                self.power.len()
            )));
        }
        if self.streams.len() != n {
            return Err(Error::config(format!("streams must have length {n}, got {}", self.streams.len())));
        }
        if self.n_tx.contains(&0) || self.n_rx.contains(&0) {
            return Err(Error::config("antenna counts must be >= 1"));
        }
        for (u, (&l, &r)) in self.streams.iter().zip(&self.n_rx).enumerate() {
            if l == 0 || l > r {
                return Err(Error::config(format!("UE {u}: streams {l} must satisfy 1 <= L <= n_rx = {r}")));
            }
        }
        if self.bits.iter().any(|&b| b == 0 || b > 64) {
            return Err(Error::config("fronthaul bits must be in 1..=64"));
        }
        if self.power.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::config("RU powers must be positive and finite"));
        }
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) {
            return Err(Error::config("noise variance must be positive"));
        }
        Ok(())
    }

    pub fn num_rus(&self) -> usize {
        self.n_tx.len()
    }

    pub fn num_ues(&self) -> usize {
        self.n_rx.len()
    }

    pub fn total_tx(&self) -> usize {
        self.n_tx.iter().sum()
    }

    pub fn total_rx(&self) -> usize {
        self.n_rx.iter().sum()
    }

    pub fn total_streams(&self) -> usize {
        self.streams.iter().sum()
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }

    /// Rows of `x`/`W` (columns of `H`) owned by RU `m`.
    pub fn tx_range(&self, m: usize) -> Range<usize> {
        offsets(&self.n_tx, m)
    }

    /// Rows of `H` belonging to UE `n`.
    pub fn rx_range(&self, n: usize) -> Range<usize> {
        offsets(&self.n_rx, n)
    }

    /// Entries of `s` (columns of `W`) belonging to UE `n`.
    pub fn stream_range(&self, n: usize) -> Range<usize> {
        offsets(&self.streams, n)
    }

    /// Same system with a different fronthaul budget on every RU.
    pub fn with_bits(&self, bits: u32) -> Self {
        let mut cfg = self.clone();
        cfg.bits = vec![bits; cfg.num_rus()];
        cfg
    }
}

/// Full downlink channel `H` (`N_rx x N_tx`) with RU/UE block views.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelState {
    pub h: CMat,
}

impl ChannelState {
    pub fn new(h: CMat, cfg: &SystemConfig) -> Result<Self> {
        if h.nrows() != cfg.total_rx() || h.ncols() != cfg.total_tx() {
            return Err(Error::config(format!(
                "channel is {}x{}, expected {}x{}",
                h.nrows(),
                h.ncols(),
                cfg.total_rx(),
                cfg.total_tx()
            )));
        }
        Ok(ChannelState { h })
    }

    /// `H_n`: the rows of UE `n` across all RUs.
    pub fn ue_block(&self, cfg: &SystemConfig, n: usize) -> CMat {
        let r = cfg.rx_range(n);
        self.h.rows(r.start, r.len()).into_owned()
    }

    /// `H_{m,n}`: UE `n` rows restricted to RU `m` columns.
    pub fn block(&self, cfg: &SystemConfig, m: usize, n: usize) -> CMat {
        let r = cfg.rx_range(n);
        let c = cfg.tx_range(m);
        self.h.view((r.start, c.start), (r.len(), c.len())).into_owned()
    }

    /// All rows of `H` restricted to RU `m` columns.
    pub fn ru_columns(&self, cfg: &SystemConfig, m: usize) -> CMat {
        let c = cfg.tx_range(m);
        self.h.columns(c.start, c.len()).into_owned()
    }
}

/// A batch of symbol vectors `s`, one per channel use.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolBatch {
    pub symbols: Vec<CVec>,
}

impl SymbolBatch {
    /// Circularly-symmetric unit-variance Gaussian symbols.
    pub fn gaussian<R: Rng + ?Sized>(cfg: &SystemConfig, count: usize, rng: &mut R) -> Self {
        let len = cfg.total_streams();
        let symbols = (0..count).map(|_| DVector::from_fn(len, |_, _| complex_gaussian(rng))).collect();
        SymbolBatch { symbols }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Per-UE slice `s_n` of symbol vector `k`.
    pub fn ue_block(&self, cfg: &SystemConfig, k: usize, n: usize) -> CVec {
        let r = cfg.stream_range(n);
        self.symbols[k].rows(r.start, r.len()).into_owned()
    }
}

/// Draws one `CN(0, 1)` sample.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Precoded vector `x = W s`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecodedSignal {
    pub x: CVec,
}

impl PrecodedSignal {
    /// `x_m`, the portion transmitted by RU `m`.
    pub fn ru_block(&self, cfg: &SystemConfig, m: usize) -> CVec {
        let r = cfg.tx_range(m);
        self.x.rows(r.start, r.len()).into_owned()
    }

    pub fn ru_blocks(&self, cfg: &SystemConfig) -> Vec<CVec> {
        (0..cfg.num_rus()).map(|m| self.ru_block(cfg, m)).collect()
    }
}

pub fn assemble_precoded(w: &CMat, s: &CVec) -> Result<PrecodedSignal> {
    if w.ncols() != s.len() {
        return Err(Error::config(format!(
            "precoder has {} columns but symbol vector has {} entries",
            w.ncols(),
            s.len()
        )));
    }
    Ok(PrecodedSignal { x: w * s })
}

/// Returns `Γ x̂`, each `gamma[m]` repeated over RU `m`'s antennas.
pub fn apply_power_scaling(xhat: &CVec, gamma: &[f64], cfg: &SystemConfig) -> Result<CVec> {
    if gamma.len() != cfg.num_rus() || xhat.len() != cfg.total_tx() {
        return Err(Error::config("power scaling dimensions do not match the system"));
    }
    let mut out = xhat.clone();
    for (m, &g) in gamma.iter().enumerate() {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::InvalidScale { ru: m, value: g });
        }
        for i in cfg.tx_range(m) {
            out[i] *= g;
        }
    }
    Ok(out)
}

/// Output of any fronthaul quantizer for a single channel use.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizationResult {
    /// Codeword index per RU; bit `i` of the fronthaul message is bit
    /// `B_m - 1 - i` of the index (natural binary, MSB first).
    pub indices: Vec<usize>,
    pub bit_widths: Vec<u32>,
    /// Dequantized codewords, concatenated over RUs (before `Γ`).
    pub xhat: CVec,
    pub gamma: Vec<f64>,
    /// Sum-EI achieved by `xhat`.
    pub objective: f64,
    /// Number of objective evaluations spent by the search.
    pub evaluations: u64,
}

impl QuantizationResult {
    pub fn bits(&self, m: usize) -> Vec<bool> {
        index_to_bits(self.indices[m], self.bit_widths[m])
    }

    pub fn xhat_block(&self, cfg: &SystemConfig, m: usize) -> CVec {
        let r = cfg.tx_range(m);
        self.xhat.rows(r.start, r.len()).into_owned()
    }
}

pub fn index_to_bits(index: usize, width: u32) -> Vec<bool> {
    (0..width).rev().map(|i| (index >> i) & 1 == 1).collect()
}

pub fn bits_to_index(bits: &[bool]) -> usize {
    bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize)
}

/// Concatenates per-RU vectors into one.
pub fn concat_blocks(blocks: &[CVec]) -> CVec {
    let len = blocks.iter().map(|b| b.len()).sum();
    let mut out = CVec::zeros(len);
    let mut at = 0;
    for b in blocks {
        out.rows_mut(at, b.len()).copy_from(b);
        at += b.len();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn identity_precoder_passes_symbols() {
        let w = CMat::identity(2, 2);
        let s = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 2.0)]);
        assert_eq!(assemble_precoded(&w, &s).unwrap().x, s);
    }

    #[test]
    fn zero_precoder_gives_zero() {
        let w = CMat::zeros(3, 2);
        let s = CVec::from_vec(vec![c(1.0, -1.0), c(0.5, 2.0)]);
        assert_eq!(assemble_precoded(&w, &s).unwrap().x, CVec::zeros(3));
    }

    #[test]
    fn mismatched_precoder_is_a_config_error() {
        let w = CMat::zeros(3, 2);
        let s = CVec::zeros(3);
        assert!(matches!(assemble_precoded(&w, &s), Err(Error::Config(_))));
    }

    #[test]
    fn ru_blocks_match_dense_product() {
        let cfg = SystemConfig::uniform(2, 2, 2, 1, 1, 2, 1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = CMat::from_fn(4, 2, |_, _| complex_gaussian(&mut rng));
        let s = SymbolBatch::gaussian(&cfg, 1, &mut rng).symbols.remove(0);
        let x = assemble_precoded(&w, &s).unwrap();
        // independent row-by-row product
        for m in 0..2 {
            let block = x.ru_block(&cfg, m);
            for (k, i) in cfg.tx_range(m).enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..2 {
                    acc += w[(i, j)] * s[j];
                }
                assert!((block[k] - acc).norm() < 1e-14);
            }
        }
        assert_eq!(concat_blocks(&x.ru_blocks(&cfg)), x.x);
    }

    #[test]
    fn diagonal_power_scaling() {
        let cfg = SystemConfig::uniform(2, 1, 1, 1, 1, 1, 1.0, 1.0).unwrap();
        let x = CVec::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        let out = apply_power_scaling(&x, &[2.0, 3.0], &cfg).unwrap();
        assert_eq!(out, CVec::from_vec(vec![c(2.0, 0.0), c(3.0, 0.0)]));
        assert_eq!(apply_power_scaling(&x, &[1.0, 1.0], &cfg).unwrap(), x);
        assert!(matches!(apply_power_scaling(&x, &[1.0, 0.0], &cfg), Err(Error::InvalidScale { ru: 1, .. })));
    }

    #[test]
    fn config_rejects_too_many_streams() {
        let mut cfg = SystemConfig::uniform(1, 1, 2, 2, 2, 2, 1.0, 1.0).unwrap();
        cfg.streams = vec![3];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn bit_index_round_trip() {
        assert_eq!(index_to_bits(0b101, 4), vec![false, true, false, true]);
        assert_eq!(bits_to_index(&[true, true, false]), 6);
    }

    #[test]
    fn gaussian_symbols_have_unit_covariance() {
        let cfg = SystemConfig::uniform(1, 2, 1, 1, 1, 1, 1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let batch = SymbolBatch::gaussian(&cfg, 50_000, &mut rng);
        let mut cov = CMat::zeros(2, 2);
        for s in &batch.symbols {
            cov += s * s.adjoint();
        }
        cov /= C64::from(batch.len() as f64);
        assert!((cov[(0, 0)].re - 1.0).abs() < 0.03);
        assert!((cov[(1, 1)].re - 1.0).abs() < 0.03);
        assert!(cov[(0, 1)].norm() < 0.03);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn cvec(len: usize) -> impl Strategy<Value = CVec> {
            proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), len)
                .prop_map(|v| CVec::from_iterator(v.len(), v.into_iter().map(|(a, b)| C64::new(a, b))))
        }

        proptest! {
            #[test]
            fn precoding_is_linear(
                w in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 12),
                s1 in cvec(3), s2 in cvec(3), a in -3.0f64..3.0, b in -3.0f64..3.0,
            ) {
                let w = CMat::from_iterator(4, 3, w.into_iter().map(|(x, y)| C64::new(x, y)));
                let lhs = assemble_precoded(&w, &(&s1 * C64::from(a) + &s2 * C64::from(b))).unwrap().x;
                let rhs = assemble_precoded(&w, &s1).unwrap().x * C64::from(a)
                    + assemble_precoded(&w, &s2).unwrap().x * C64::from(b);
                let scale = rhs.norm().max(1.0);
                prop_assert!((lhs - rhs).norm() <= 1e-12 * scale);
            }

            #[test]
            fn scaling_multiplies_block_norms(x in cvec(4), g1 in 0.1f64..4.0, g2 in 0.1f64..4.0) {
                let cfg = SystemConfig { n_tx: vec![1, 3], n_rx: vec![1], streams: vec![1],
                    bits: vec![1, 1], power: vec![1.0, 1.0], noise_var: 1.0 };
                let y = apply_power_scaling(&x, &[g1, g2], &cfg).unwrap();
                for (m, g) in [(0usize, g1), (1, g2)] {
                    let r = cfg.tx_range(m);
                    let before = x.rows(r.start, r.len()).norm_squared();
                    let after = y.rows(r.start, r.len()).norm_squared();
                    prop_assert!((after - g * g * before).abs() <= 1e-12 * (1.0 + after));
                }
            }

            #[test]
            fn channel_blocks_tile_the_matrix(rows in 1usize..4, cols in 1usize..4, seed in 0u64..1000) {
                let cfg = SystemConfig { n_tx: vec![cols, 2], n_rx: vec![rows, 1], streams: vec![1, 1],
                    bits: vec![1, 1], power: vec![1.0, 1.0], noise_var: 1.0 };
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let h = CMat::from_fn(cfg.total_rx(), cfg.total_tx(), |_, _| complex_gaussian(&mut rng));
                let ch = ChannelState::new(h.clone(), &cfg).unwrap();
                let mut rebuilt = CMat::zeros(h.nrows(), h.ncols());
                for n in 0..2 {
                    let r = cfg.rx_range(n);
                    rebuilt.rows_mut(r.start, r.len()).copy_from(&ch.ue_block(&cfg, n));
                    for m in 0..2 {
                        let c = cfg.tx_range(m);
                        let blk = ch.block(&cfg, m, n);
                        prop_assert_eq!(blk, h.view((r.start, c.start), (r.len(), c.len())).into_owned());
                    }
                }
                prop_assert_eq!(rebuilt, h);
            }
        }
    }
}
