use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One (scheme, sweep point) result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scheme: String,
    pub bits: u32,
    pub sum_se: f64,
    pub ser: f64,
    /// Effective per-UE SINR `2^(SE_n / L_n) − 1`.
    pub sinr: Vec<f64>,
    /// Mean quantizer objective per channel use.
    pub objective: f64,
    /// Mean search cost per channel use: objective evaluations for lookup
    /// and tree schemes, multiply-accumulates for neural schemes.
    pub op_count: f64,
    pub wall_time_s: f64,
    pub seed: u64,
}

/// CSV columns. Wall time is left to the JSON summary so that reruns give
/// byte-identical CSV files.
pub const CSV_HEADER: &str = "scheme,bits,sum_se,ser,sinr_per_ue,objective,op_count,seed";

pub fn write_rows_csv<W: Write>(rows: &[ResultRow], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        let sinr: Vec<String> = r.sinr.iter().map(|v| format!("{v:.9e}")).collect();
        writeln!(
            out,
            "{},{},{:.9e},{:.9e},{},{:.9e},{:.6e},{}",
            r.scheme,
            r.bits,
            r.sum_se,
            r.ser,
            sinr.join(";"),
            r.objective,
            r.op_count,
            r.seed
        )?;
    }
    Ok(())
}

/// A scheme measured against the baseline at one sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub scheme: String,
    pub bits: u32,
    pub baseline: String,
    pub se_ratio: f64,
    pub objective_ratio: f64,
}

/// One line per scheme per sweep point, with ratios against `baseline`.
pub fn compare_schemes(rows: &[ResultRow], baseline: &str) -> Result<Vec<Comparison>> {
    let mut out = Vec::with_capacity(rows.len());
    for r in rows {
        let base = rows
            .iter()
            .find(|b| b.scheme == baseline && b.bits == r.bits)
            .ok_or_else(|| Error::config(format!("baseline {baseline} missing at B = {}", r.bits)))?;
        let ratio = |a: f64, b: f64| if a == b { 1.0 } else { a / b };
        out.push(Comparison {
            scheme: r.scheme.clone(),
            bits: r.bits,
            baseline: baseline.to_string(),
            se_ratio: ratio(r.sum_se, base.sum_se),
            objective_ratio: ratio(r.objective, base.objective),
        });
    }
    Ok(out)
}
