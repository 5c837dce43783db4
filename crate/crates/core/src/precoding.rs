//! MMSE and normalized zero-forcing precoders, plus the compress-and-precode
//! baseline's averaged channel and entry-wise precoder quantizer.

use crate::linalg::{c, hpd_inverse, right_pinv, svd_sorted, trace};
use crate::model::{ChannelState, SymbolBatch, SystemConfig};
use crate::{CMat, Error, Result};

/// Precoder `W` (`N_tx x L_tot`) and the per-RU scale used to build it.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecodingMatrix {
    pub w: CMat,
    /// Per-RU normalization `r_m` (MMSE) or the common ZF factor repeated.
    pub r: Vec<f64>,
}

impl PrecodingMatrix {
    /// Columns of UE `n`.
    pub fn ue_columns(&self, cfg: &SystemConfig, n: usize) -> CMat {
        let r = cfg.stream_range(n);
        self.w.columns(r.start, r.len()).into_owned()
    }

    /// Rows of RU `m`.
    pub fn ru_rows(&self, cfg: &SystemConfig, m: usize) -> CMat {
        let r = cfg.tx_range(m);
        self.w.rows(r.start, r.len()).into_owned()
    }

    /// `W_{m,n}`.
    pub fn block(&self, cfg: &SystemConfig, m: usize, n: usize) -> CMat {
        let (rr, cc) = (cfg.tx_range(m), cfg.stream_range(n));
        self.w.view((rr.start, cc.start), (rr.len(), cc.len())).into_owned()
    }

    /// `tr(W_m W_m†)`.
    pub fn ru_power(&self, cfg: &SystemConfig, m: usize) -> f64 {
        self.ru_rows(cfg, m).norm_squared()
    }
}

/// Precoder family selected by scenarios and training sets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrecoderKind {
    #[default]
    Mmse,
    ZeroForcing,
}

impl PrecoderKind {
    pub fn design(self, channel: &ChannelState, cfg: &SystemConfig) -> Result<PrecodingMatrix> {
        match self {
            PrecoderKind::Mmse => mmse_precoder(channel, cfg),
            PrecoderKind::ZeroForcing => zero_forcing_precoder(channel, cfg),
        }
    }
}

/// Per-UE left factors `U_n[:, :L_n]` of the channel SVD.
pub fn reduction_bases(channel: &ChannelState, cfg: &SystemConfig) -> Vec<CMat> {
    (0..cfg.num_ues())
        .map(|n| {
            let (u, _, _) = svd_sorted(&channel.ue_block(cfg, n));
            u.columns(0, cfg.streams[n]).into_owned()
        })
        .collect()
}

/// Stacked reduced channel `H̃ = [U_n† H_n]_n` (`L_tot x N_tx`).
pub fn reduced_channel(channel: &ChannelState, cfg: &SystemConfig, bases: &[CMat]) -> CMat {
    let mut out = CMat::zeros(cfg.total_streams(), cfg.total_tx());
    for (n, u) in bases.iter().enumerate() {
        let r = cfg.stream_range(n);
        let block = u.adjoint() * channel.ue_block(cfg, n);
        out.view_mut((r.start, 0), (r.len(), cfg.total_tx())).copy_from(&block);
    }
    out
}

/// Regularized MMSE precoder on the SVD-reduced channel, with per-RU power
/// normalization `tr(W_m W_m†) = P_m`.
pub fn mmse_precoder(channel: &ChannelState, cfg: &SystemConfig) -> Result<PrecodingMatrix> {
    mmse_precoder_with_bases(channel, cfg, &reduction_bases(channel, cfg))
}

/// MMSE precoder reusing previously computed reduction bases (e.g. shared
/// over a block of channel uses).
pub fn mmse_precoder_with_bases(channel: &ChannelState, cfg: &SystemConfig, bases: &[CMat]) -> Result<PrecodingMatrix> {
    let h_red = reduced_channel(channel, cfg, bases);
    let xi = cfg.total_rx() as f64 / cfg.total_power();
    let gram = &h_red * h_red.adjoint() + CMat::identity(h_red.nrows(), h_red.nrows()) * c(xi);
    let inv = hpd_inverse(&gram).ok_or_else(|| Error::Precoding("regularized Gram is singular".into()))?;
    let mut w = h_red.adjoint() * inv;
    let mut r = Vec::with_capacity(cfg.num_rus());
    for m in 0..cfg.num_rus() {
        let rows = cfg.tx_range(m);
        let p = w.rows(rows.start, rows.len()).norm_squared();
        if !(p > 0.0) {
            return Err(Error::DegenerateChannel(format!("RU {m} has zero precoder energy")));
        }
        let r_m = (cfg.power[m] / p).sqrt();
        w.rows_mut(rows.start, rows.len()).scale_mut(r_m);
        r.push(r_m);
    }
    Ok(PrecodingMatrix { w, r })
}

/// Normalized zero-forcing precoder `sqrt(ΣP / tr(H⁻¹H⁻†)) H⁻¹` with the
/// right pseudoinverse. The raw channel is used when every UE has as many
/// streams as antennas, otherwise the SVD-reduced channel.
pub fn zero_forcing_precoder(channel: &ChannelState, cfg: &SystemConfig) -> Result<PrecodingMatrix> {
    let full = cfg.streams.iter().zip(&cfg.n_rx).all(|(l, r)| l == r);
    let h = if full { channel.h.clone() } else { reduced_channel(channel, cfg, &reduction_bases(channel, cfg)) };
    let pinv = right_pinv(&h).ok_or_else(|| Error::Precoding("channel is row-rank deficient".into()))?;
    let t = trace(&(&pinv * pinv.adjoint())).re;
    let scale = (cfg.total_power() / t).sqrt();
    Ok(PrecodingMatrix { w: pinv * c(scale), r: vec![scale; cfg.num_rus()] })
}

/// Entry-wise mean of equally shaped channels.
pub fn cp_average_channel(channels: &[ChannelState]) -> Result<ChannelState> {
    let first = channels.first().ok_or_else(|| Error::config("cannot average zero channels"))?;
    let mut acc = first.h.clone();
    for ch in &channels[1..] {
        if ch.h.shape() != acc.shape() {
            return Err(Error::config("channels to average differ in shape"));
        }
        acc += &ch.h;
    }
    Ok(ChannelState { h: acc * c(1.0 / channels.len() as f64) })
}

/// Precoder after entry-wise uniform quantization.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedPrecoder {
    pub w_hat: CMat,
    /// Bits per complex entry.
    pub bits: u32,
    /// Half-width of the per-axis grid.
    pub range: f64,
}

impl QuantizedPrecoder {
    pub fn levels_per_axis(&self) -> u64 {
        1u64 << (self.bits / 2)
    }

    pub fn step(&self) -> f64 {
        2.0 * self.range / self.levels_per_axis() as f64
    }
}

/// Standard deviation of a precoder entry per real axis, `sqrt(M P / (2 N_tx L))`
/// with `P` the mean per-RU power.
pub fn cp_entry_sigma(cfg: &SystemConfig) -> f64 {
    let m = cfg.num_rus() as f64;
    let p = cfg.total_power() / m;
    (m * p / (2.0 * cfg.total_tx() as f64 * cfg.total_streams() as f64)).sqrt()
}

fn quantize_axis(v: f64, range: f64, levels: u64) -> f64 {
    let step = 2.0 * range / levels as f64;
    let k = ((v + range) / step).floor().clamp(0.0, (levels - 1) as f64);
    -range + step * (k + 0.5)
}

/// Quantizes real and imaginary parts with `B_CP/2` bits each on a mid-rise
/// grid over `[-1.96 σ_W, 1.96 σ_W]`; out-of-range values clamp.
pub fn cp_quantize_precoder(w: &CMat, bits: u32, cfg: &SystemConfig) -> Result<QuantizedPrecoder> {
    if bits < 2 || !bits.is_multiple_of(2) || bits > 64 {
        return Err(Error::config(format!("B_CP must be even and in 2..=64, got {bits}")));
    }
    let range = 1.96 * cp_entry_sigma(cfg);
    let levels = 1u64 << (bits / 2);
    let w_hat = w.map(|z| crate::C64::new(quantize_axis(z.re, range, levels), quantize_axis(z.im, range, levels)));
    Ok(QuantizedPrecoder { w_hat, bits, range })
}

/// Per-RU transmit scale `sqrt(P_m / Ê‖Ŵ_m s‖²)` estimated on a symbol batch.
pub fn cp_power_scale(w_hat: &CMat, symbols: &SymbolBatch, cfg: &SystemConfig) -> Result<Vec<f64>> {
    if symbols.is_empty() {
        return Err(Error::config("empty symbol batch"));
    }
    (0..cfg.num_rus())
        .map(|m| {
            let r = cfg.tx_range(m);
            let w_m = w_hat.rows(r.start, r.len());
            let e: f64 = symbols.symbols.iter().map(|s| (w_m * s).norm_squared()).sum::<f64>() / symbols.len() as f64;
            if e > 0.0 {
                Ok((cfg.power[m] / e).sqrt())
            } else {
                Err(Error::DegenerateChannel(format!("quantized precoder of RU {m} is zero")))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::complex_gaussian;
    use crate::C64;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_channel(cfg: &SystemConfig, seed: u64) -> ChannelState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ChannelState::new(CMat::from_fn(cfg.total_rx(), cfg.total_tx(), |_, _| complex_gaussian(&mut rng)), cfg)
            .unwrap()
    }

    #[test]
    fn scalar_mmse_has_sqrt_power_magnitude() {
        let cfg = SystemConfig::uniform(1, 1, 1, 1, 1, 1, 2.5, 1.0).unwrap();
        for h in [C64::new(0.3, -0.1), C64::new(-4.0, 2.0)] {
            let ch = ChannelState::new(CMat::from_element(1, 1, h), &cfg).unwrap();
            let w = mmse_precoder(&ch, &cfg).unwrap();
            assert!((w.w[(0, 0)].norm() - 2.5f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn full_stream_reduction_preserves_norm() {
        let cfg = SystemConfig::uniform(2, 2, 3, 2, 2, 2, 1.0, 0.1).unwrap();
        let ch = random_channel(&cfg, 3);
        let bases = reduction_bases(&ch, &cfg);
        let red = reduced_channel(&ch, &cfg, &bases);
        for n in 0..2 {
            let r = cfg.stream_range(n);
            let a = red.rows(r.start, r.len()).norm();
            assert!((a - ch.ue_block(&cfg, n).norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn zf_on_unitary_channel() {
        let cfg = SystemConfig::uniform(2, 2, 1, 1, 1, 1, 1.5, 0.1).unwrap();
        let s = 0.5f64.sqrt();
        let h = CMat::from_row_slice(2, 2, &[c(s), c(s), C64::new(0.0, s), C64::new(0.0, -s)]);
        let ch = ChannelState::new(h.clone(), &cfg).unwrap();
        let w = zero_forcing_precoder(&ch, &cfg).unwrap();
        let k = (2.0 * 1.5 / 2.0f64).sqrt();
        assert!((&w.w - h.adjoint() * c(k)).norm() < 1e-12);
        assert!((&h * &w.w - CMat::identity(2, 2) * c(k)).norm() < 1e-12);
    }

    #[test]
    fn zf_reduced_channel_is_diagonalized() {
        let cfg = SystemConfig::uniform(3, 2, 2, 2, 1, 2, 1.0, 0.1).unwrap();
        let ch = random_channel(&cfg, 8);
        let w = zero_forcing_precoder(&ch, &cfg).unwrap();
        let red = reduced_channel(&ch, &cfg, &reduction_bases(&ch, &cfg));
        let hw = red * &w.w;
        let d = hw[(0, 0)];
        assert!((hw - CMat::identity(2, 2) * d).norm() < 1e-10);
        assert!((w.w.norm_squared() - 3.0).abs() < 1e-10);
    }

    #[test]
    fn rank_deficient_zf_fails() {
        let cfg = SystemConfig::uniform(1, 2, 2, 1, 1, 1, 1.0, 0.1).unwrap();
        let h = CMat::from_row_slice(2, 2, &[c(1.0), c(2.0), c(2.0), c(4.0)]);
        let ch = ChannelState::new(h, &cfg).unwrap();
        assert!(matches!(zero_forcing_precoder(&ch, &cfg), Err(Error::Precoding(_))));
    }

    #[test]
    fn averaging() {
        let cfg = SystemConfig::uniform(2, 2, 2, 1, 1, 2, 1.0, 0.1).unwrap();
        let chans: Vec<_> = (0..3).map(|s| random_channel(&cfg, s)).collect();
        assert_eq!(cp_average_channel(&chans[..1]).unwrap(), chans[0]);
        let neg = ChannelState { h: -chans[0].h.clone() };
        assert!(cp_average_channel(&[chans[0].clone(), neg]).unwrap().h.norm() == 0.0);
        let mean = cp_average_channel(&chans).unwrap();
        let expected = CMat::from_fn(2, 4, |i, j| (chans[0].h[(i, j)] + chans[1].h[(i, j)] + chans[2].h[(i, j)]) / 3.0);
        assert!((mean.h - expected).norm() < 1e-12);
        assert!(cp_average_channel(&[]).is_err());
    }

    #[test]
    fn cp_grid_behaviour() {
        let cfg = SystemConfig::uniform(4, 2, 4, 1, 1, 8, 1.0, 0.1).unwrap();
        let sigma = cp_entry_sigma(&cfg);
        let zero = cp_quantize_precoder(&CMat::zeros(1, 1), 4, &cfg).unwrap();
        assert!(zero.w_hat[(0, 0)].norm() <= zero.step() / 2.0 * 2f64.sqrt() + 1e-15);
        assert!(zero.w_hat[(0, 0)].re.abs() <= zero.step() / 2.0 + 1e-15);

        let edge = cp_quantize_precoder(&CMat::from_element(1, 1, c(1.96 * sigma)), 4, &cfg).unwrap();
        // 4 levels over [-R, R]: centers at ±R/4 and ±3R/4.
        assert!((edge.w_hat[(0, 0)].re - 0.75 * 1.96 * sigma).abs() < 1e-15);
        assert!(cp_quantize_precoder(&CMat::zeros(1, 1), 3, &cfg).is_err());
    }

    #[test]
    fn fine_grid_error_bounds() {
        let cfg = SystemConfig::uniform(2, 2, 2, 1, 1, 8, 1.0, 0.1).unwrap();
        let sigma = cp_entry_sigma(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = CMat::from_fn(4, 2, |_, _| {
            let z = complex_gaussian(&mut rng) * sigma;
            C64::new(z.re.clamp(-1.9 * sigma, 1.9 * sigma), z.im.clamp(-1.9 * sigma, 1.9 * sigma))
        });
        for bits in [32, 48] {
            let q = cp_quantize_precoder(&w, bits, &cfg).unwrap();
            let err = (&q.w_hat - &w).iter().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max);
            assert!(err <= q.step() / 2.0 * (1.0 + 1e-9));
        }
        let q = cp_quantize_precoder(&w, 48, &cfg).unwrap();
        let err = (&q.w_hat - &w).iter().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max);
        assert!(err < 1e-6 * sigma);
    }

    #[test]
    fn cp_scale_meets_power() {
        let cfg = SystemConfig::uniform(2, 2, 2, 1, 1, 8, 2.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = CMat::from_fn(4, 2, |_, _| complex_gaussian(&mut rng));
        let s = SymbolBatch::gaussian(&cfg, 50, &mut rng);
        let g = cp_power_scale(&w, &s, &cfg).unwrap();
        for m in 0..2 {
            let r = cfg.tx_range(m);
            let e: f64 =
                s.symbols.iter().map(|x| (w.rows(r.start, r.len()) * x * c(g[m])).norm_squared()).sum::<f64>() / 50.0;
            assert!((e - 2.0).abs() < 1e-10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn mmse_meets_per_ru_power(seed in any::<u64>(), rus in 1usize..4, ues in 1usize..4, p in 0.1f64..10.0) {
            let cfg = SystemConfig::uniform(rus, ues, 2, 2, 1, 2, p, 0.1).unwrap();
            let ch = random_channel(&cfg, seed);
            let w = mmse_precoder(&ch, &cfg).unwrap();
            for m in 0..rus {
                prop_assert!((w.ru_power(&cfg, m) - p).abs() <= 1e-9 * p);
            }
        }

        #[test]
        fn zf_total_power(seed in any::<u64>(), rus in 2usize..4, p in 0.1f64..10.0) {
            let cfg = SystemConfig::uniform(rus, 2, 1, 1, 1, 2, p, 0.1).unwrap();
            let ch = random_channel(&cfg, seed);
            let w = zero_forcing_precoder(&ch, &cfg).unwrap();
            let total = rus as f64 * p;
            prop_assert!((w.w.norm_squared() - total).abs() <= 1e-9 * total);
        }

        #[test]
        fn more_cp_bits_never_hurt(seed in any::<u64>(), b in 1u32..10) {
            let cfg = SystemConfig::uniform(2, 2, 2, 1, 1, 8, 1.0, 0.1).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = CMat::from_fn(4, 2, |_, _| complex_gaussian(&mut rng) * cp_entry_sigma(&cfg));
            let err = |bits| {
                let q = cp_quantize_precoder(&w, bits, &cfg).unwrap();
                (&q.w_hat - &w).iter().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max)
            };
            prop_assert!(err(2 * (b + 1)) <= err(2 * b) + 1e-15);
        }
    }
}
