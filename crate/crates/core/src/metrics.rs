//! Effective interference, receive beamforming, spectral efficiency, SER and
//! estimation-aware SINR.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{c, hermitian_part, hpd_solve, log2_det_floored};
use crate::model::{apply_power_scaling, ChannelState, SystemConfig};
use crate::{CMat, CVec, Error, Result, C64};

/// Eigenvalue floor applied to error covariances before taking log-dets.
pub const KE_FLOOR: f64 = 1e-12;

fn check_dims(cfg: &SystemConfig, channel: &ChannelState, w: &CMat, s: &CVec, xhat: &CVec) -> Result<()> {
    if channel.h.shape() != (cfg.total_rx(), cfg.total_tx())
        || w.shape() != (cfg.total_tx(), cfg.total_streams())
        || s.len() != cfg.total_streams()
        || xhat.len() != cfg.total_tx()
    {
        return Err(Error::config("EI inputs do not match the system dimensions"));
    }
    Ok(())
}

fn ue_target(cfg: &SystemConfig, channel: &ChannelState, w: &CMat, s: &CVec, n: usize) -> CVec {
    let r = cfg.stream_range(n);
    channel.ue_block(cfg, n) * (w.columns(r.start, r.len()) * s.rows(r.start, r.len()))
}

/// `EI_n = ‖H_n(Γx̂ − W_n s_n)‖²`, where `xhat_scaled = Γx̂`.
pub fn ei_single(
    cfg: &SystemConfig,
    channel: &ChannelState,
    w: &CMat,
    s: &CVec,
    xhat_scaled: &CVec,
) -> Result<Vec<f64>> {
    check_dims(cfg, channel, w, s, xhat_scaled)?;
    Ok((0..cfg.num_ues())
        .map(|n| (channel.ue_block(cfg, n) * xhat_scaled - ue_target(cfg, channel, w, s, n)).norm_squared())
        .collect())
}

/// Disturbances `Δ[m][n] = H_{m,n}(γ_m x̂_m − W_{m,n} s_n)`.
pub fn ei_disturbance(
    cfg: &SystemConfig,
    channel: &ChannelState,
    w: &CMat,
    s: &CVec,
    xhat: &CVec,
    gamma: &[f64],
) -> Result<Vec<Vec<CVec>>> {
    check_dims(cfg, channel, w, s, xhat)?;
    let scaled = apply_power_scaling(xhat, gamma, cfg)?;
    Ok((0..cfg.num_rus())
        .map(|m| {
            let tr = cfg.tx_range(m);
            let x_m = scaled.rows(tr.start, tr.len());
            (0..cfg.num_ues())
                .map(|n| {
                    let sr = cfg.stream_range(n);
                    let w_mn = w.view((tr.start, sr.start), (tr.len(), sr.len()));
                    channel.block(cfg, m, n) * (x_m - w_mn * s.rows(sr.start, sr.len()))
                })
                .collect()
        })
        .collect())
}

/// Sum-EI from disturbances: `Σ_n ‖Σ_m Δ[m][n]‖²`.
pub fn disturbance_sum_ei(delta: &[Vec<CVec>]) -> f64 {
    let Some(first) = delta.first() else { return 0.0 };
    (0..first.len())
        .map(|n| {
            let mut acc = CVec::zeros(first[n].len());
            for d in delta {
                acc += &d[n];
            }
            acc.norm_squared()
        })
        .sum()
}

fn ei_from_u(u: &CVec, s_n: CVec) -> f64 {
    // Re tr(u (u − 2s)†) for column vectors is Re((u − 2s)† u).
    (u - s_n * c(2.0)).dotc(u).re
}

/// Multi-antenna EI `Re tr(F_n†H_nΓx̂ (F_n†H_nΓx̂ − 2s_n)†)`.
pub fn ei_multi(
    cfg: &SystemConfig,
    f: &[CMat],
    channel: &ChannelState,
    gamma: &[f64],
    xhat: &CVec,
    s: &CVec,
) -> Result<Vec<f64>> {
    check_receivers(cfg, f)?;
    let scaled = apply_power_scaling(xhat, gamma, cfg)?;
    Ok((0..cfg.num_ues())
        .map(|n| {
            let u = f[n].adjoint() * (channel.ue_block(cfg, n) * &scaled);
            let r = cfg.stream_range(n);
            ei_from_u(&u, s.rows(r.start, r.len()).into_owned())
        })
        .collect())
}

/// Same value as [`ei_multi`] accumulated from per-RU terms
/// `F_n† H_{n,m} γ_m x̂_m`.
pub fn ei_multi_decomposed(
    cfg: &SystemConfig,
    f: &[CMat],
    channel: &ChannelState,
    gamma: &[f64],
    xhat_blocks: &[CVec],
    s: &CVec,
) -> Result<Vec<f64>> {
    check_receivers(cfg, f)?;
    if xhat_blocks.len() != cfg.num_rus() || gamma.len() != cfg.num_rus() {
        return Err(Error::config("one codeword and one scale per RU are required"));
    }
    Ok((0..cfg.num_ues())
        .map(|n| {
            let mut u = CVec::zeros(cfg.streams[n]);
            for m in 0..cfg.num_rus() {
                u += f[n].adjoint() * channel.block(cfg, m, n) * &xhat_blocks[m] * c(gamma[m]);
            }
            let r = cfg.stream_range(n);
            ei_from_u(&u, s.rows(r.start, r.len()).into_owned())
        })
        .collect())
}

fn check_receivers(cfg: &SystemConfig, f: &[CMat]) -> Result<()> {
    if f.len() != cfg.num_ues() {
        return Err(Error::config("one receive beamformer per UE is required"));
    }
    for (n, f_n) in f.iter().enumerate() {
        if f_n.shape() != (cfg.n_rx[n], cfg.streams[n]) {
            return Err(Error::config(format!("receiver of UE {n} has shape {:?}", f_n.shape())));
        }
    }
    Ok(())
}

/// MMSE receiver `F_n = (Σ_{n'} H_nW_{n'}W_{n'}†H_n† + σ²I)⁻¹ H_nW_n`; the
/// localized variant keeps only `n' = n`.
pub fn mmse_receiver(cfg: &SystemConfig, channel: &ChannelState, w: &CMat, n: usize, localized: bool) -> CMat {
    let h_n = channel.ue_block(cfg, n);
    let r = cfg.stream_range(n);
    let g = &h_n * w.columns(r.start, r.len());
    let mut cov = CMat::identity(cfg.n_rx[n], cfg.n_rx[n]) * c(cfg.noise_var);
    if localized {
        cov += &g * g.adjoint();
    } else {
        let hw = &h_n * w;
        cov += &hw * hw.adjoint();
    }
    hpd_solve(&cov, &g).expect("noise-regularized covariance is invertible")
}

/// Receivers for every UE.
pub fn mmse_receivers(cfg: &SystemConfig, channel: &ChannelState, w: &CMat, localized: bool) -> Vec<CMat> {
    (0..cfg.num_ues()).map(|n| mmse_receiver(cfg, channel, w, n, localized)).collect()
}

/// Receiver-noise treatment in [`error_covariance`].
#[derive(Clone, Copy, Debug)]
pub enum NoiseModel<'a> {
    None,
    /// Adds `σ² F†F`, the expectation over white noise.
    Analytic(f64),
    /// One noise vector per sample.
    Samples(&'a [CVec]),
}

/// Empirical `E[(ŝ_n − s_n)(ŝ_n − s_n)†]` with `ŝ_n = F_n†(H_n x̃ + z)`,
/// Hermitian-symmetrized.
pub fn error_covariance(f_n: &CMat, h_n: &CMat, xtilde: &[CVec], s_n: &[CVec], noise: NoiseModel<'_>) -> Result<CMat> {
    if xtilde.is_empty() || xtilde.len() != s_n.len() {
        return Err(Error::Metric("error covariance needs paired, non-empty batches".into()));
    }
    if let NoiseModel::Samples(z) = noise {
        if z.len() != xtilde.len() {
            return Err(Error::Metric("noise batch length mismatch".into()));
        }
    }
    let l = f_n.ncols();
    let fh = f_n.adjoint() * h_n;
    let mut acc = CMat::zeros(l, l);
    for (k, (x, s)) in xtilde.iter().zip(s_n).enumerate() {
        let mut y = &fh * x;
        if let NoiseModel::Samples(z) = noise {
            y += f_n.adjoint() * &z[k];
        }
        let e = y - s;
        acc += &e * e.adjoint();
    }
    acc *= c(1.0 / xtilde.len() as f64);
    if let NoiseModel::Analytic(sigma2) = noise {
        acc += f_n.adjoint() * f_n * c(sigma2);
    }
    Ok(hermitian_part(&acc))
}

/// `Σ_n log₂det(K_s,n + K_e,n) − log₂det(K_e,n)` with eigenvalues floored at
/// [`KE_FLOOR`].
pub fn sum_spectral_efficiency(k_s: &[CMat], k_e: &[CMat]) -> Result<f64> {
    Ok(per_ue_spectral_efficiency(k_s, k_e)?.iter().sum())
}

pub fn per_ue_spectral_efficiency(k_s: &[CMat], k_e: &[CMat]) -> Result<Vec<f64>> {
    if k_s.len() != k_e.len() {
        return Err(Error::Metric("signal and error covariance counts differ".into()));
    }
    k_s.iter()
        .zip(k_e)
        .enumerate()
        .map(|(n, (ks, ke))| {
            let bad = || Error::Metric(format!("covariance of UE {n} is not PSD"));
            let a = log2_det_floored(&(ks + ke), KE_FLOOR).ok_or_else(bad)?;
            let b = log2_det_floored(ke, KE_FLOOR).ok_or_else(bad)?;
            Ok((a - b).max(0.0))
        })
        .collect()
}

const QAM_AXIS: [f64; 4] = [-3.0, -1.0, 1.0, 3.0];
/// Gray label (2 bits) of each axis level, in level order.
const QAM_GRAY: [usize; 4] = [0b00, 0b01, 0b11, 0b10];

/// Unit-average-power Gray-labeled 16-QAM: entry `i` is the point with label
/// `i` (upper two bits in-phase, lower two quadrature).
pub fn qam16_constellation() -> [C64; 16] {
    let scale = 1.0 / 10f64.sqrt();
    let mut out = [C64::new(0.0, 0.0); 16];
    for (i, gi) in QAM_GRAY.iter().enumerate() {
        for (q, gq) in QAM_GRAY.iter().enumerate() {
            out[(gi << 2) | gq] = C64::new(QAM_AXIS[i], QAM_AXIS[q]) * scale;
        }
    }
    out
}

fn axis_level(v: f64) -> usize {
    let v = v * 10f64.sqrt();
    if v < -2.0 {
        0
    } else if v < 0.0 {
        1
    } else if v < 2.0 {
        2
    } else {
        3
    }
}

/// Minimum-distance 16-QAM decision, returned as a label.
pub fn qam16_detect(z: C64) -> usize {
    (QAM_GRAY[axis_level(z.re)] << 2) | QAM_GRAY[axis_level(z.im)]
}

/// Uniform random 16-QAM labels.
pub fn qam16_labels<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<usize> {
    (0..count).map(|_| rng.random_range(0..16)).collect()
}

/// Fraction of mismatched decisions.
pub fn ser_16qam(decisions: &[usize], truth: &[usize]) -> Result<f64> {
    if decisions.len() != truth.len() {
        return Err(Error::Metric("decision and truth lengths differ".into()));
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let errors = decisions.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok(errors as f64 / truth.len() as f64)
}

/// `E‖Ĝ_n‖² / (n_rx σ² + E[EI_n] + E‖E_n‖²)` with expectations taken as
/// sample means.
pub fn sinr_with_estimation(g_hat: &[CMat], ei: &[f64], err: &[CMat], n_rx: usize, noise_var: f64) -> Result<f64> {
    if g_hat.is_empty() || ei.is_empty() {
        return Err(Error::Metric("SINR needs non-empty samples".into()));
    }
    let mean = |v: &mut dyn Iterator<Item = f64>, len: usize| v.sum::<f64>() / len as f64;
    let signal = mean(&mut g_hat.iter().map(|g| g.norm_squared()), g_hat.len());
    let interference = mean(&mut ei.iter().copied(), ei.len());
    let estimation = if err.is_empty() { 0.0 } else { mean(&mut err.iter().map(|e| e.norm_squared()), err.len()) };
    Ok(signal / (n_rx as f64 * noise_var + interference + estimation))
}

/// Per-scheme evaluation summary.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ei: Vec<f64>,
    /// Effective per-UE SINR `2^(SE_n / L_n) − 1`.
    pub sinr: Vec<f64>,
    pub se: Vec<f64>,
    pub sum_se: f64,
    pub ser: f64,
    pub estimation_error_power: Option<Vec<f64>>,
    pub ke_floor: f64,
}

impl MetricsReport {
    pub fn validate(&self) -> Result<()> {
        let ok = self.se.iter().all(|&v| v >= 0.0) && self.sum_se >= 0.0 && (0.0..=1.0).contains(&self.ser);
        if ok {
            Ok(())
        } else {
            Err(Error::Metric("report values out of range".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::complex_gaussian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(r: usize, cc: usize, rng: &mut ChaCha8Rng) -> CMat {
        CMat::from_fn(r, cc, |_, _| complex_gaussian(rng))
    }

    fn rand_vec(n: usize, rng: &mut ChaCha8Rng) -> CVec {
        CVec::from_fn(n, |_, _| complex_gaussian(rng))
    }

    #[test]
    fn single_ue_exact_reconstruction() {
        let cfg = SystemConfig::uniform(2, 1, 1, 1, 1, 1, 1.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ch = ChannelState::new(rand_mat(1, 2, &mut rng), &cfg).unwrap();
        let w = rand_mat(2, 1, &mut rng);
        let s = rand_vec(1, &mut rng);
        let x = &w * &s;
        assert!(ei_single(&cfg, &ch, &w, &s, &x).unwrap()[0] < 1e-24);
        let zero = ChannelState::new(CMat::zeros(1, 2), &cfg).unwrap();
        assert_eq!(ei_single(&cfg, &zero, &w, &s, &x).unwrap()[0], 0.0);
    }

    #[test]
    fn toy_ei_values() {
        let cfg = SystemConfig::uniform(2, 1, 1, 1, 1, 1, 1.0, 0.1).unwrap();
        let ch = ChannelState::new(CMat::from_row_slice(1, 2, &[c(1.0), c(1.0)]), &cfg).unwrap();
        let w = CMat::from_row_slice(2, 1, &[c(0.5), c(0.5)]);
        let s = CVec::from_element(1, c(1.0));
        let ei = |a: f64, b: f64| ei_single(&cfg, &ch, &w, &s, &CVec::from_vec(vec![c(a), c(b)])).unwrap()[0];
        assert!((ei(0.0, 0.0) - 1.0).abs() < 1e-15);
        assert!(ei(1.0, 0.0).abs() < 1e-15);
    }

    #[test]
    fn disturbances_vanish_at_precoded_blocks() {
        let cfg = SystemConfig::uniform(2, 1, 2, 1, 1, 1, 1.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ch = ChannelState::new(rand_mat(1, 4, &mut rng), &cfg).unwrap();
        let w = rand_mat(4, 1, &mut rng);
        let s = rand_vec(1, &mut rng);
        let gamma = [2.0, 0.5];
        let x = &w * &s;
        let mut xhat = x.clone();
        for m in 0..2 {
            for i in cfg.tx_range(m) {
                xhat[i] = x[i] / gamma[m];
            }
        }
        let d = ei_disturbance(&cfg, &ch, &w, &s, &xhat, &gamma).unwrap();
        assert!(d.iter().flatten().all(|v| v.norm() < 1e-14));
    }

    #[test]
    fn single_ru_disturbance_is_per_ue_ei() {
        let cfg = SystemConfig::uniform(1, 3, 2, 1, 1, 1, 1.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = ChannelState::new(rand_mat(3, 2, &mut rng), &cfg).unwrap();
        let w = rand_mat(2, 3, &mut rng);
        let s = rand_vec(3, &mut rng);
        let xhat = rand_vec(2, &mut rng);
        let d = ei_disturbance(&cfg, &ch, &w, &s, &xhat, &[1.0]).unwrap();
        let ei = ei_single(&cfg, &ch, &w, &s, &xhat).unwrap();
        for n in 0..3 {
            assert!((d[0][n].norm_squared() - ei[n]).abs() <= 1e-12 * ei[n].max(1.0));
        }
    }

    #[test]
    fn multi_ei_quadratic_properties() {
        let cfg = SystemConfig::uniform(2, 2, 2, 2, 1, 1, 1.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ch = ChannelState::new(rand_mat(4, 4, &mut rng), &cfg).unwrap();
        let f: Vec<CMat> = (0..2).map(|_| rand_mat(2, 1, &mut rng)).collect();
        let gamma = [1.3, 0.7];
        let s = rand_vec(2, &mut rng);
        assert!(ei_multi(&cfg, &f, &ch, &gamma, &CVec::zeros(4), &s).unwrap().iter().all(|&v| v == 0.0));
        let x = rand_vec(4, &mut rng);
        let zero_s = CVec::zeros(2);
        let a = ei_multi(&cfg, &f, &ch, &gamma, &x, &zero_s).unwrap();
        let b = ei_multi(&cfg, &f, &ch, &gamma, &(&x * c(2.0)), &zero_s).unwrap();
        for n in 0..2 {
            assert!((b[n] - 4.0 * a[n]).abs() < 1e-12 * b[n].abs().max(1.0));
        }
        let blocks = vec![x.rows(0, 2).into_owned(), x.rows(2, 2).into_owned()];
        let d = ei_multi_decomposed(&cfg, &f, &ch, &gamma, &blocks, &s).unwrap();
        let full = ei_multi(&cfg, &f, &ch, &gamma, &x, &s).unwrap();
        for n in 0..2 {
            assert!((d[n] - full[n]).abs() < 1e-12 * full[n].abs().max(1.0));
        }
    }

    #[test]
    fn receiver_limits() {
        let cfg = SystemConfig::uniform(1, 1, 1, 1, 1, 1, 1.0, 1.0).unwrap();
        let ch = ChannelState::new(CMat::from_element(1, 1, c(1.0)), &cfg).unwrap();
        let w = CMat::from_element(1, 1, c(1.0));
        let f = mmse_receiver(&cfg, &ch, &w, 0, false);
        assert!((f[(0, 0)] - c(0.5)).norm() < 1e-15);
        assert_eq!(f, mmse_receiver(&cfg, &ch, &w, 0, true));

        let cfg2 = SystemConfig::uniform(2, 2, 2, 2, 2, 1, 1.0, 1e12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ch2 = ChannelState::new(rand_mat(4, 4, &mut rng), &cfg2).unwrap();
        let w2 = rand_mat(4, 4, &mut rng);
        let f2 = mmse_receiver(&cfg2, &ch2, &w2, 1, false);
        let mf = ch2.ue_block(&cfg2, 1) * w2.columns(2, 2);
        for j in 0..2 {
            let a = f2.column(j).normalize();
            let b = mf.column(j).normalize();
            assert!((a - b).norm() < 1e-3);
        }
    }

    #[test]
    fn error_covariance_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = rand_mat(2, 3, &mut rng);
        let xs: Vec<CVec> = (0..50).map(|_| rand_vec(3, &mut rng)).collect();
        let ss: Vec<CVec> = (0..50).map(|_| rand_vec(1, &mut rng)).collect();
        let f0 = CMat::zeros(2, 1);
        let e = error_covariance(&f0, &h, &xs, &ss, NoiseModel::None).unwrap();
        let emp: f64 = ss.iter().map(|s| s.norm_squared()).sum::<f64>() / 50.0;
        assert!((e[(0, 0)].re - emp).abs() < 1e-12);

        // Perfect reconstruction: s = F† H x.
        let f = rand_mat(2, 1, &mut rng);
        let sp: Vec<CVec> = xs.iter().map(|x| f.adjoint() * &h * x).collect();
        let e = error_covariance(&f, &h, &xs, &sp, NoiseModel::None).unwrap();
        assert!(e.norm() < 1e-12);
        assert!(error_covariance(&f, &h, &[], &[], NoiseModel::None).is_err());
    }

    #[test]
    fn error_covariance_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = rand_mat(2, 3, &mut rng);
        let f = rand_mat(2, 2, &mut rng);
        let xs: Vec<CVec> = (0..20).map(|_| rand_vec(3, &mut rng)).collect();
        let ss: Vec<CVec> = (0..20).map(|_| rand_vec(2, &mut rng)).collect();
        let zs: Vec<CVec> = (0..20).map(|_| rand_vec(2, &mut rng)).collect();
        let e = error_covariance(&f, &h, &xs, &ss, NoiseModel::Samples(&zs)).unwrap();
        // Four-term expansion: F†(Hx+z)(Hx+z)†F − F†(Hx+z)s† − s(Hx+z)†F + ss†.
        let mut acc = CMat::zeros(2, 2);
        for k in 0..20 {
            let y = &h * &xs[k] + &zs[k];
            acc += f.adjoint() * &y * y.adjoint() * &f;
            acc -= f.adjoint() * &y * ss[k].adjoint();
            acc -= &ss[k] * y.adjoint() * &f;
            acc += &ss[k] * ss[k].adjoint();
        }
        acc /= c(20.0);
        assert!((e - acc).norm() < 1e-10);
    }

    #[test]
    fn spectral_efficiency_examples() {
        let one = CMat::identity(1, 1);
        assert!(
            (sum_spectral_efficiency(std::slice::from_ref(&one), std::slice::from_ref(&one)).unwrap() - 1.0).abs()
                < 1e-12
        );
        let big = CMat::identity(1, 1) * c(1e6);
        assert!(sum_spectral_efficiency(std::slice::from_ref(&one), &[big]).unwrap() < 1e-5);
        let i2 = CMat::identity(2, 2);
        assert!(
            (sum_spectral_efficiency(std::slice::from_ref(&i2), std::slice::from_ref(&i2)).unwrap() - 2.0).abs()
                < 1e-12
        );
        let neg = CMat::identity(1, 1) * c(-1.0);
        assert!(sum_spectral_efficiency(&[one], &[neg]).is_err());
    }

    #[test]
    fn qam_constellation_is_gray_and_unit_power() {
        let pts = qam16_constellation();
        let p: f64 = pts.iter().map(|z| z.norm_sqr()).sum::<f64>() / 16.0;
        assert!((p - 1.0).abs() < 1e-12);
        for (i, &z) in pts.iter().enumerate() {
            assert_eq!(qam16_detect(z), i);
        }
        let d = 2.0 / 10f64.sqrt();
        for i in 0..16 {
            for j in 0..16 {
                if ((pts[i] - pts[j]).norm() - d).abs() < 1e-12 {
                    assert_eq!((i ^ j).count_ones(), 1);
                }
            }
        }
    }

    #[test]
    fn ser_random_decisions() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let truth = qam16_labels(100_000, &mut rng);
        assert_eq!(ser_16qam(&truth, &truth).unwrap(), 0.0);
        let guess = qam16_labels(100_000, &mut rng);
        let ser = ser_16qam(&guess, &truth).unwrap();
        assert!((ser - 15.0 / 16.0).abs() < 0.02 * 15.0 / 16.0);
    }

    #[test]
    fn ser_matches_q_function_formula() {
        use statrs::function::erf::erfc;
        let q = |x: f64| 0.5 * erfc(x / 2f64.sqrt());
        let es_n0 = 10f64.powf(1.0);
        let analytic = 1.0 - (1.0 - 1.5 * q((es_n0 / 5.0).sqrt())).powi(2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts = qam16_constellation();
        let sigma = (1.0 / es_n0 / 2.0).sqrt();
        let truth = qam16_labels(200_000, &mut rng);
        let dec: Vec<usize> = truth
            .iter()
            .map(|&t| {
                let z = complex_gaussian(&mut rng) * (2.0 * sigma * sigma).sqrt();
                qam16_detect(pts[t] + z)
            })
            .collect();
        let ser = ser_16qam(&dec, &truth).unwrap();
        assert!((ser - analytic).abs() < 0.15 * analytic, "{ser} vs {analytic}");
    }

    #[test]
    fn sinr_hand_computation() {
        let g = [CMat::from_element(1, 1, c(2.0))];
        let e = [CMat::from_element(1, 1, c(0.5))];
        let base = sinr_with_estimation(&g, &[0.0], &[], 1, 0.5).unwrap();
        assert!((base - 8.0).abs() < 1e-12);
        let with = sinr_with_estimation(&g, &[1.0], &e, 1, 0.5).unwrap();
        assert!((with - 4.0 / 1.75).abs() < 1e-12);
        assert!(with < base);
    }
}
