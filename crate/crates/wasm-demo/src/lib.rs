//! Browser entry points. Each operation has a plain Rust function returning
//! a serializable report and a `#[wasm_bindgen]` wrapper returning JSON.

use fronthaul_mq::accounting::{flops_du, flops_ru, fronthaul_bps, FlopConfig, FlopReport, OfdmGrid};
use fronthaul_mq::channel::{generate_channel, ChannelScenario};
use fronthaul_mq::quantizers::{
    alpha_pmq_quantize, build_interference_graph, mq_quantize, rlf_independent_sets, smq_quantize, vq_quantize_all,
    CodebookSet, EiKind, LookupCodebook, PmqOptions,
};
use fronthaul_mq::training::{lloyd_max_train, GammaPolicy, LloydOptions, LloydQuantizer, TrainingSet, TrainingSpec};
use fronthaul_mq::{Error, QuantizationResult, Result, SystemConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest `M · B` the exhaustive MQ search is allowed in the browser.
const MAX_JOINT_BITS: u32 = 12;

fn scenario(rus: usize) -> ChannelScenario {
    ChannelScenario::ring(rus, 30.0, 3.0, 30.0)
}

fn scalar_system(rus: usize, bits: u32) -> Result<SystemConfig> {
    if rus == 0 || bits == 0 || rus as u32 * bits > MAX_JOINT_BITS {
        return Err(Error::config(format!("need M >= 1, B >= 1 and M·B <= {MAX_JOINT_BITS}")));
    }
    SystemConfig::uniform(rus, rus, 1, 1, 1, bits, 1.0, 0.01)
}

#[derive(Debug, Serialize)]
pub struct SchemeScore {
    pub scheme: String,
    /// Mean sum-EI over the test batch.
    pub objective: f64,
    /// Mean objective evaluations per channel use.
    pub evaluations: f64,
}

#[derive(Debug, Serialize)]
pub struct QuantizerComparison {
    pub rus: usize,
    pub bits: u32,
    pub alpha: f64,
    /// Lloyd-Max training trace of the shared codebooks.
    pub training_trace: Vec<f64>,
    pub schemes: Vec<SchemeScore>,
}

/// Trains MQ codebooks on a scalar system of `rus` RUs and UEs, then scores
/// VQ, SMQ, α-PMQ and MQ on fresh channel uses with those codebooks.
pub fn compare_quantizers(seed: u64, rus: usize, bits: u32, alpha: f64) -> Result<QuantizerComparison> {
    let cfg = scalar_system(rus, bits)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = TrainingSpec { channels: 8, symbols: 8, precoder: Default::default(), ei: EiKind::Single };
    let set = TrainingSet::generate(&cfg, &scenario(rus), &spec, &mut rng)?;
    let power = set.mean_ru_power();
    let books =
        (0..rus).map(|m| LookupCodebook::gaussian(1, bits, power[m].sqrt(), &mut rng)).collect::<Result<Vec<_>>>()?;
    let init = CodebookSet::new(books, vec![1.0; rus])?;
    let trained = lloyd_max_train(
        &set,
        &init,
        &LloydOptions { quantizer: LloydQuantizer::Mq, rounds: 5, gamma: GammaPolicy::PerRound },
    )?;
    let books = trained.books;
    let test = TrainingSet::generate(&cfg, &scenario(rus), &TrainingSpec { channels: 4, ..spec }, &mut rng)?;
    let order: Vec<usize> = (0..rus).collect();
    let opts = PmqOptions { alpha, iterations: rus, sequential: false };
    let mut schemes = Vec::new();
    for name in ["vq", "smq", "alpha-pmq", "mq"] {
        let mut objective = 0.0;
        let mut evaluations = 0.0;
        for s in &test.samples {
            let r: QuantizationResult = match name {
                "vq" => vq_quantize_all(&s.ctx, &books)?,
                "smq" => smq_quantize(&s.ctx, &books, &order)?,
                "alpha-pmq" => alpha_pmq_quantize(&cfg, &test.channels[s.channel], &s.ctx, &books, &opts)?.result,
                _ => mq_quantize(&s.ctx, &books)?,
            };
            objective += r.objective;
            evaluations += r.evaluations as f64;
        }
        let n = test.len() as f64;
        schemes.push(SchemeScore { scheme: name.into(), objective: objective / n, evaluations: evaluations / n });
    }
    Ok(QuantizerComparison { rus, bits, alpha, training_trace: trained.trace, schemes })
}

#[derive(Debug, Serialize)]
pub struct ScheduleReport {
    pub rus: usize,
    pub alpha: f64,
    /// `gains[m][n] = |h_{n,m}|²`.
    pub gains: Vec<Vec<f64>>,
    pub edges: Vec<(usize, usize)>,
    /// RU sets quantized together, in order.
    pub sets: Vec<Vec<usize>>,
}

/// Interference graph and RLF schedule of one random channel draw.
pub fn interference_schedule(seed: u64, rus: usize, alpha: f64) -> Result<ScheduleReport> {
    if rus == 0 || rus > 32 {
        return Err(Error::config("need 1 to 32 RUs"));
    }
    let cfg = SystemConfig::uniform(rus, rus, 1, 1, 1, 1, 1.0, 0.01)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channel = generate_channel(&cfg, &scenario(rus), &mut rng)?;
    let graph = build_interference_graph(&cfg, &channel, alpha)?;
    let sets = rlf_independent_sets(&graph).sets;
    Ok(ScheduleReport { rus, alpha, gains: graph.gains, edges: graph.edges, sets })
}

#[derive(Debug, Serialize)]
pub struct BudgetReport {
    pub du: FlopReport,
    pub ru: FlopReport,
    /// Precode-and-compress fronthaul rate on a 100 MHz NR carrier.
    pub fronthaul_gbps: f64,
}

/// Flop tables and fronthaul rate for one configuration.
pub fn fronthaul_budget(
    rus: usize,
    ues: usize,
    n_tx: usize,
    n_rx: usize,
    bits: u64,
    hidden: u64,
) -> Result<BudgetReport> {
    if [rus, ues, n_tx, n_rx].contains(&0) || bits == 0 || hidden == 0 {
        return Err(Error::config("all dimensions must be positive"));
    }
    let cfg = FlopConfig { rus, ues, n_tx, n_rx, streams: 1, bits, hidden: vec![hidden] };
    Ok(BudgetReport {
        du: flops_du(&cfg),
        ru: flops_ru(&cfg),
        fronthaul_gbps: fronthaul_bps(bits as f64, &OfdmGrid::nr_100mhz()) / 1e9,
    })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let value = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = compareQuantizers)]
pub fn compare_quantizers_js(seed: u32, rus: u32, bits: u32, alpha: f64) -> std::result::Result<String, JsError> {
    to_js(compare_quantizers(seed as u64, rus as usize, bits, alpha))
}

#[wasm_bindgen(js_name = interferenceSchedule)]
pub fn interference_schedule_js(seed: u32, rus: u32, alpha: f64) -> std::result::Result<String, JsError> {
    to_js(interference_schedule(seed as u64, rus as usize, alpha))
}

#[wasm_bindgen(js_name = fronthaulBudget)]
pub fn fronthaul_budget_js(
    rus: u32,
    ues: u32,
    n_tx: u32,
    n_rx: u32,
    bits: u32,
    hidden: u32,
) -> std::result::Result<String, JsError> {
    to_js(fronthaul_budget(rus as usize, ues as usize, n_tx as usize, n_rx as usize, bits as u64, hidden as u64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mq_wins_the_comparison() {
        let r = compare_quantizers(1, 3, 2, 0.5).unwrap();
        let mq = r.schemes.iter().find(|s| s.scheme == "mq").unwrap().objective;
        assert!(r.schemes.iter().all(|s| mq <= s.objective + 1e-12));
        assert_eq!(r.schemes.last().unwrap().evaluations, 64.0);
        assert!(compare_quantizers(1, 4, 4, 0.5).is_err());
    }

    #[test]
    fn schedule_covers_every_ru_once() {
        let r = interference_schedule(2, 6, 0.5).unwrap();
        let mut seen: Vec<usize> = r.sets.iter().flatten().copied().collect();
        seen.sort();
        assert_eq!(seen, (0..6).collect::<Vec<_>>());
        assert_eq!(r.edges.len(), 8);
    }

    #[test]
    fn budget_reproduces_the_reference_rows() {
        let r = fronthaul_budget(4, 16, 16, 4, 64, 64).unwrap();
        assert_eq!(r.du.get("svd"), Some(44_032));
        assert_eq!(r.ru.get("neural_inference_n64"), Some(16_384));
        assert!((r.fronthaul_gbps / 64.0 - 0.0917).abs() < 1e-4);
    }
}
