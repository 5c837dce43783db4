//! Closed-form flop counts, search-complexity counts and fronthaul overhead.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One line item of a flop table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlopItem {
    pub name: String,
    pub formula: String,
    pub flops: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlopReport {
    pub items: Vec<FlopItem>,
}

impl FlopReport {
    fn push(&mut self, name: &str, formula: &str, flops: u64) {
        self.items.push(FlopItem { name: name.into(), formula: formula.into(), flops });
    }

    pub fn total(&self) -> u64 {
        self.items.iter().map(|i| i.flops).sum()
    }

    pub fn get(&self, name: &str) -> Option<u64> {
        self.items.iter().find(|i| i.name == name).map(|i| i.flops)
    }

    /// `name,formula,flops` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "item,formula,flops")?;
        for i in &self.items {
            writeln!(out, "{},\"{}\",{}", i.name, i.formula, i.flops)?;
        }
        Ok(())
    }
}

/// Dimensions entering the flop tables. Per-RU and per-UE values are taken
/// as uniform; `n_rx` is per UE.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlopConfig {
    pub rus: usize,
    pub ues: usize,
    pub n_tx: usize,
    pub n_rx: usize,
    pub streams: usize,
    /// Fronthaul bits per RU (neural rows).
    #[serde(default = "default_bits")]
    pub bits: u64,
    /// Hidden widths `N_net` to tabulate for the neural rows.
    #[serde(default = "default_widths")]
    pub hidden: Vec<u64>,
}

fn default_bits() -> u64 {
    64
}

fn default_widths() -> Vec<u64> {
    vec![64, 20, 10, 5]
}

impl FlopConfig {
    /// The table configuration: `M=4`, `N=16`, 16 transmit and 4 receive
    /// antennas, one stream per UE.
    pub fn reference() -> Self {
        FlopConfig { rus: 4, ues: 16, n_tx: 16, n_rx: 4, streams: 1, bits: 64, hidden: default_widths() }
    }

    fn totals(&self) -> (u64, u64, u64) {
        let n_tx = (self.rus * self.n_tx) as u64;
        let n_rx = (self.ues * self.n_rx) as u64;
        let l = (self.ues * self.streams) as u64;
        (n_tx, n_rx, l)
    }
}

/// `a / b` rounded half-up.
fn div_round(a: u64, b: u64) -> u64 {
    (2 * a + b) / (2 * b)
}

/// Flops per channel use at the DU: MMSE precoder design plus one neural-MQ
/// line (per GD step coefficient) for each tabulated hidden width.
pub fn flops_du(cfg: &FlopConfig) -> FlopReport {
    let (n_tx, n_rx_tot, l) = cfg.totals();
    let (n, n_rx, l_n, m) = (cfg.ues as u64, cfg.n_rx as u64, cfg.streams as u64, cfg.rus as u64);
    let mut r = FlopReport::default();
    r.push("svd", "(2 N_tx n_rx^2 + 11 n_rx^3) N", (2 * n_tx * n_rx * n_rx + 11 * n_rx.pow(3)) * n);
    r.push("dimension_reduction", "(2 L_n n_rx N_tx) N", 2 * l_n * n_rx * n_tx * n);
    r.push("gram", "2 L^2 N_tx", 2 * l * l * n_tx);
    r.push("inverse", "2 L^3 / 3", div_round(2 * l.pow(3), 3));
    r.push("unnormalized_precoder", "2 N_tx L^2", 2 * n_tx * l * l);
    let m_tx = cfg.n_tx as u64;
    r.push("power_scaling", "2 min(L^2 n_tx, n_tx^2 L) M", 2 * (l * l * m_tx).min(m_tx * m_tx * l) * m);
    for &d in &cfg.hidden {
        let net = div_round(4 * (cfg.bits * d + 2 * d * m_tx), 3);
        let ei = 2 * n_rx_tot * (n_tx + l_n) + 3 * l;
        r.push(
            &format!("neural_mq_per_gd_step_n{d}"),
            "(4 (B_m N_net + 2 N_net n_tx) / 3 + 2 N_rx (N_tx + L_n) + 3 L) M",
            (net + ei) * m,
        );
    }
    r
}

/// Flops per channel use at the RU side (summed over RUs).
pub fn flops_ru(cfg: &FlopConfig) -> FlopReport {
    let (n_tx, _, l) = cfg.totals();
    let (m, m_tx) = (cfg.rus as u64, cfg.n_tx as u64);
    let mut r = FlopReport::default();
    r.push("weight_application", "2 N_tx L", 2 * n_tx * l);
    for &d in &cfg.hidden {
        r.push(
            &format!("neural_inference_n{d}"),
            "(2 (B_m N_net + 2 N_net n_tx) / 3) M",
            div_round(2 * (cfg.bits * d + 2 * d * m_tx), 3) * m,
        );
    }
    r
}

/// Quantizer family for search-complexity counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Vq,
    Mq,
    Smq,
    TreeMq,
    AlphaPmq,
    NeuralMq,
    NeuralVq,
}

/// Parameters of [`op_count`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpParams {
    pub bits: Vec<u32>,
    #[serde(default)]
    pub iterations: usize,
    #[serde(default)]
    pub n_tx: Vec<usize>,
    #[serde(default)]
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub depth: Vec<usize>,
}

/// Closed-form search complexity: objective evaluations for lookup schemes,
/// multiply-accumulates for neural schemes.
pub fn op_count(scheme: Scheme, p: &OpParams) -> Result<u128> {
    let m = p.bits.len();
    let pow = |b: u32| 1u128.checked_shl(b).ok_or_else(|| Error::config("bit width too large"));
    match scheme {
        Scheme::Vq | Scheme::Smq => p.bits.iter().try_fold(0u128, |acc, &b| Ok(acc + pow(b)?)),
        Scheme::Mq => pow(p.bits.iter().sum()),
        Scheme::TreeMq => {
            let depth = p.bits.iter().copied().max().unwrap_or(0);
            (1..=depth).try_fold(0u128, |acc, b| Ok(acc + pow(p.bits.iter().filter(|&&x| x >= b).count() as u32)?))
        }
        Scheme::AlphaPmq => Ok(p.iterations as u128 * pow(p.bits.iter().copied().max().unwrap_or(0))?),
        Scheme::NeuralMq | Scheme::NeuralVq => {
            if p.n_tx.len() != m || p.hidden.len() != m || p.depth.len() != m {
                return Err(Error::config("neural op counts need n_tx, hidden and depth per RU"));
            }
            let per_step: u128 = (0..m)
                .map(|i| {
                    let (b, d, k, t) = (p.bits[i] as u128, p.hidden[i] as u128, p.depth[i] as u128, p.n_tx[i] as u128);
                    if k == 0 {
                        b * 2 * t
                    } else {
                        d * (b + d * (k - 1) + 2 * t)
                    }
                })
                .sum();
            Ok(2 * p.iterations as u128 * per_step)
        }
    }
}

/// Required fronthaul bits per channel use for compress-and-precode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpOverheadInput {
    pub r_sum: f64,
    #[serde(default = "one")]
    pub r_code: f64,
    pub n_tx: usize,
    pub streams: usize,
    pub b_cp: u32,
    pub k_rep: usize,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverheadReport {
    pub input: CpOverheadInput,
    pub bits_per_channel_use: f64,
}

/// `B = R_sum / R_code + n_tx L B_CP / K_rep`.
pub fn fronthaul_overhead_cp(input: &CpOverheadInput) -> Result<OverheadReport> {
    if input.k_rep == 0 || !(input.r_code > 0.0 && input.r_code <= 1.0) || input.r_sum < 0.0 {
        return Err(Error::config("need K_rep >= 1, R_code in (0, 1] and R_sum >= 0"));
    }
    let b = input.r_sum / input.r_code + (input.n_tx * input.streams) as f64 * input.b_cp as f64 / input.k_rep as f64;
    Ok(OverheadReport { input: input.clone(), bits_per_channel_use: b })
}

/// OFDM resource grid used to convert per-RE bits to bit rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfdmGrid {
    pub resource_blocks: u64,
    #[serde(default = "subcarriers")]
    pub subcarriers: u64,
    #[serde(default = "symbols")]
    pub symbols: u64,
    #[serde(default = "slots")]
    pub slots_per_second: u64,
    /// Resource blocks sharing one precoder.
    #[serde(default = "rbg")]
    pub rbg: u64,
}

fn subcarriers() -> u64 {
    12
}
fn symbols() -> u64 {
    14
}
fn slots() -> u64 {
    2000
}
fn rbg() -> u64 {
    4
}

impl OfdmGrid {
    pub fn nr_100mhz() -> Self {
        OfdmGrid { resource_blocks: 273, subcarriers: 12, symbols: 14, slots_per_second: 2000, rbg: 4 }
    }

    pub fn resource_elements_per_second(&self) -> f64 {
        (self.resource_blocks * self.subcarriers * self.symbols * self.slots_per_second) as f64
    }
}

/// Bit rate of a stream carrying `bits_per_re` bits on every RE.
pub fn fronthaul_bps(bits_per_re: f64, grid: &OfdmGrid) -> f64 {
    bits_per_re * grid.resource_elements_per_second()
}

/// Rate of shipping one `N_tx x L` precoder of `b_w`-bit entries per
/// resource-block group and slot.
pub fn cp_precoder_bps(b_w: u32, n_tx: usize, streams: usize, grid: &OfdmGrid) -> f64 {
    let groups = grid.resource_blocks as f64 / grid.rbg as f64;
    b_w as f64 * (n_tx * streams) as f64 * groups * grid.slots_per_second as f64
}

/// Rate of the coded data stream of `b_s` bits per symbol for `L` streams.
pub fn cp_data_bps(b_s: u32, streams: usize, grid: &OfdmGrid) -> f64 {
    fronthaul_bps(b_s as f64 * streams as f64, grid)
}

/// Input of the `overhead` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverheadConfig {
    #[serde(default)]
    pub cp: Option<CpOverheadInput>,
    #[serde(default)]
    pub grid: Option<OfdmGrid>,
    /// Per-RU fronthaul budgets `B_m` to convert to bit rates.
    #[serde(default)]
    pub pc_bits: Vec<f64>,
    #[serde(default)]
    pub cp_streams: Option<CpStreams>,
}

/// Precoder and data streams of compress-and-precode in bit-rate terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpStreams {
    pub b_w: u32,
    pub b_s: u32,
    pub n_tx: usize,
    pub streams: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverheadSummary {
    pub cp: Option<OverheadReport>,
    pub grid: OfdmGrid,
    /// `(B_m, bit/s)` pairs for precode-and-compress.
    pub pc_bps: Vec<(f64, f64)>,
    pub cp_precoder_bps: Option<f64>,
    pub cp_data_bps: Option<f64>,
}

pub fn overhead_summary(cfg: &OverheadConfig) -> Result<OverheadSummary> {
    let grid = cfg.grid.unwrap_or_else(OfdmGrid::nr_100mhz);
    if grid.rbg == 0 {
        return Err(Error::config("rbg must be at least 1"));
    }
    Ok(OverheadSummary {
        cp: cfg.cp.as_ref().map(fronthaul_overhead_cp).transpose()?,
        grid,
        pc_bps: cfg.pc_bits.iter().map(|&b| (b, fronthaul_bps(b, &grid))).collect(),
        cp_precoder_bps: cfg.cp_streams.map(|c| cp_precoder_bps(c.b_w, c.n_tx, c.streams, &grid)),
        cp_data_bps: cfg.cp_streams.map(|c| cp_data_bps(c.b_s, c.streams, &grid)),
    })
}
