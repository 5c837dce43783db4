//! Synthetic channels and pilot-based ML channel estimation.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::right_pinv;
use crate::model::{complex_gaussian, ChannelState, SystemConfig};
use crate::{CMat, Error, Result, C64};

/// Geometry and large-scale fading of a log-distance pathloss + i.i.d.
/// Rayleigh channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelScenario {
    /// RU coordinates in meters, one per RU.
    pub ru_positions: Vec<[f64; 2]>,
    /// UE placement box `[[x_min, y_min], [x_max, y_max]]`.
    pub ue_box: [[f64; 2]; 2],
    #[serde(default = "default_exponent")]
    pub pathloss_exponent: f64,
    #[serde(default = "default_reference_loss")]
    pub reference_loss_db: f64,
}

fn default_exponent() -> f64 {
    3.0
}

fn default_reference_loss() -> f64 {
    30.0
}

impl ChannelScenario {
    /// RUs evenly spaced on a circle of radius `radius`, UEs in the enclosing
    /// square.
    pub fn ring(rus: usize, radius: f64, pathloss_exponent: f64, reference_loss_db: f64) -> Self {
        let ru_positions = (0..rus)
            .map(|m| {
                let a = 2.0 * std::f64::consts::PI * m as f64 / rus as f64;
                [radius * a.cos(), radius * a.sin()]
            })
            .collect();
        ChannelScenario {
            ru_positions,
            ue_box: [[-radius, -radius], [radius, radius]],
            pathloss_exponent,
            reference_loss_db,
        }
    }

    pub fn validate(&self, cfg: &SystemConfig) -> Result<()> {
        if self.ru_positions.len() != cfg.num_rus() {
            return Err(Error::config(format!(
                "scenario has {} RU positions for {} RUs",
                self.ru_positions.len(),
                cfg.num_rus()
            )));
        }
        let finite = self.ru_positions.iter().chain(self.ue_box.iter()).all(|p| p[0].is_finite() && p[1].is_finite());
        if !finite {
            return Err(Error::config("positions must be finite"));
        }
        if !(self.pathloss_exponent >= 0.0 && self.pathloss_exponent.is_finite()) {
            return Err(Error::config("pathloss exponent must be non-negative"));
        }
        if self.ue_box[0][0] > self.ue_box[1][0] || self.ue_box[0][1] > self.ue_box[1][1] {
            return Err(Error::config("UE box corners are out of order"));
        }
        Ok(())
    }

    /// Linear power gain at distance `d` meters.
    pub fn pathloss(&self, d: f64) -> f64 {
        let db = self.reference_loss_db + 10.0 * self.pathloss_exponent * d.log10();
        10f64.powf(-db / 10.0)
    }

    fn draw_ue<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        loop {
            let p = [
                sample_range(rng, self.ue_box[0][0], self.ue_box[1][0]),
                sample_range(rng, self.ue_box[0][1], self.ue_box[1][1]),
            ];
            if self.ru_positions.iter().all(|r| distance(*r, p) > 0.0) {
                return p;
            }
        }
    }
}

fn sample_range<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Draws UE positions, then the channel for those positions.
pub fn generate_channel<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    scenario: &ChannelScenario,
    rng: &mut R,
) -> Result<ChannelState> {
    scenario.validate(cfg)?;
    let ues: Vec<[f64; 2]> = (0..cfg.num_ues()).map(|_| scenario.draw_ue(rng)).collect();
    generate_channel_at(cfg, scenario, &ues, rng)
}

/// Channel for fixed UE positions: `H_{m,n} = sqrt(pathloss(d_{m,n})) G`,
/// `G` i.i.d. `CN(0, 1)`.
pub fn generate_channel_at<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    scenario: &ChannelScenario,
    ue_positions: &[[f64; 2]],
    rng: &mut R,
) -> Result<ChannelState> {
    if ue_positions.len() != cfg.num_ues() {
        return Err(Error::config("one position per UE is required"));
    }
    let mut h = CMat::zeros(cfg.total_rx(), cfg.total_tx());
    for n in 0..cfg.num_ues() {
        let rows = cfg.rx_range(n);
        for m in 0..cfg.num_rus() {
            let d = distance(scenario.ru_positions[m], ue_positions[n]);
            if d <= 0.0 {
                return Err(Error::config(format!("UE {n} coincides with RU {m}")));
            }
            let amp = scenario.pathloss(d).sqrt();
            for i in rows.clone() {
                for j in cfg.tx_range(m) {
                    h[(i, j)] = complex_gaussian(rng) * amp;
                }
            }
        }
    }
    ChannelState::new(h, cfg)
}

/// Dumps `H` as `row,col,re,im` CSV lines.
pub fn write_channel_csv<W: Write>(channel: &ChannelState, mut out: W) -> Result<()> {
    writeln!(out, "row,col,re,im")?;
    for i in 0..channel.h.nrows() {
        for j in 0..channel.h.ncols() {
            let z = channel.h[(i, j)];
            writeln!(out, "{i},{j},{:.17e},{:.17e}", z.re, z.im)?;
        }
    }
    Ok(())
}

/// Pilot matrix `S_p` (`L_tot x N_p`) with per-UE row blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct PilotBlock {
    pub s_p: CMat,
}

impl PilotBlock {
    pub fn num_pilots(&self) -> usize {
        self.s_p.ncols()
    }

    pub fn ue_block(&self, cfg: &SystemConfig, n: usize) -> CMat {
        let r = cfg.stream_range(n);
        self.s_p.rows(r.start, r.len()).into_owned()
    }
}

/// Orthogonal pilots from rows of the `N_p`-point DFT matrix; every entry
/// has unit modulus, so each pilot column has unit power per stream.
///
/// With `N_p >= L_tot` all streams get distinct rows and the per-UE blocks
/// are mutually orthogonal. With `max L_n <= N_p < L_tot` every UE reuses
/// rows `0..L_n` and cross-UE orthogonality is lost.
pub fn generate_pilots(cfg: &SystemConfig, n_p: usize) -> Result<PilotBlock> {
    let l_tot = cfg.total_streams();
    let l_max = cfg.streams.iter().copied().max().unwrap_or(0);
    if n_p < l_max {
        return Err(Error::PilotDesign(format!("{n_p} pilots cannot separate {l_max} streams of one UE")));
    }
    let dft_row = |k: usize| {
        (0..n_p)
            .map(|j| C64::from_polar(1.0, -2.0 * std::f64::consts::PI * (k * j) as f64 / n_p as f64))
            .collect::<Vec<_>>()
    };
    let mut s_p = CMat::zeros(l_tot, n_p);
    if n_p >= l_tot {
        for k in 0..l_tot {
            for (j, z) in dft_row(k).into_iter().enumerate() {
                s_p[(k, j)] = z;
            }
        }
    } else {
        log::warn!("{n_p} pilots < {l_tot} streams: pilot rows are reused across UEs");
        for n in 0..cfg.num_ues() {
            for (local, k) in cfg.stream_range(n).enumerate() {
                for (j, z) in dft_row(local).into_iter().enumerate() {
                    s_p[(k, j)] = z;
                }
            }
        }
    }
    Ok(PilotBlock { s_p })
}

/// i.i.d. `CN(0, 1)` pilots.
pub fn gaussian_pilots<R: Rng + ?Sized>(cfg: &SystemConfig, n_p: usize, rng: &mut R) -> PilotBlock {
    PilotBlock { s_p: CMat::from_fn(cfg.total_streams(), n_p, |_, _| complex_gaussian(rng)) }
}

/// ML channel estimate of UE `n`'s effective channel `G_n = H_n W_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelEstimate {
    pub g_hat: CMat,
    /// `Ĝ_n − H_n W_n`, available when the ground truth is known.
    pub error: Option<CMat>,
}

/// `Ĝ_n = Y_p,n pinv(S_p,n)`.
pub fn ml_pilot_estimate(y_p: &CMat, s_p: &CMat) -> Result<CMat> {
    if y_p.ncols() != s_p.ncols() {
        return Err(Error::Estimation(format!("{} received pilots for {} transmitted", y_p.ncols(), s_p.ncols())));
    }
    let pinv = right_pinv(s_p).ok_or_else(|| Error::Estimation("pilot block is not right-invertible".into()))?;
    Ok(y_p * pinv)
}

/// Simulates pilot transmission of the (possibly quantized) precoded pilots
/// `xhat_p` (`N_tx x N_p`) and returns every UE's estimate together with the
/// ground-truth error. `noise[n]` is UE `n`'s `n_rx x N_p` noise matrix.
pub fn estimate_all(
    cfg: &SystemConfig,
    channel: &ChannelState,
    w: &CMat,
    xhat_p: &CMat,
    pilots: &PilotBlock,
    noise: Option<&[CMat]>,
) -> Result<Vec<ChannelEstimate>> {
    (0..cfg.num_ues())
        .map(|n| {
            let h_n = channel.ue_block(cfg, n);
            let mut y = &h_n * xhat_p;
            if let Some(z) = noise {
                y += &z[n];
            }
            let g_hat = ml_pilot_estimate(&y, &pilots.ue_block(cfg, n))?;
            let r = cfg.stream_range(n);
            let g_true = &h_n * w.columns(r.start, r.len());
            let error = Some(&g_hat - g_true);
            Ok(ChannelEstimate { g_hat, error })
        })
        .collect()
}
