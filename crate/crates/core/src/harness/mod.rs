//! Seeded experiment runner: scenario parsing, training, evaluation and
//! report emission.
//!
//! Every random draw comes from a ChaCha stream derived from the master seed
//! and a (domain, index) pair, so results do not depend on the thread count.

mod report;
mod scenario;

pub use report::{compare_schemes, write_rows_csv, Comparison, ResultRow, CSV_HEADER};
pub use scenario::{EvalSection, NeuralSpec, Scenario, SchemeSpec, SizeSection, SystemSection};

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::{generate_channel, write_channel_csv};
use crate::linalg::c;
use crate::metrics::{
    error_covariance, mmse_receivers, per_ue_spectral_efficiency, qam16_constellation, qam16_detect, NoiseModel,
};
use crate::model::complex_gaussian;
use crate::neural::{neural_mq_quantize, neural_vq_quantize_all, write_checkpoint, AnnealSchedule, NeuralCodebook};
use crate::precoding::{cp_power_scale, cp_quantize_precoder};
use crate::quantizers::{
    alpha_pmq_quantize, mq_quantize, smq_quantize, tree_mq_quantize, vq_quantize_all, CodebookSet, EiKind,
    LookupCodebook, PmqOptions, QuantContext, TreeCodebookSet,
};
use crate::training::{
    lloyd_max_train, neural_train_adam, tree_codebook_train, GammaPolicy, LloydOptions, LloydQuantizer,
    NeuralObjective, NeuralTrainOptions, TrainingSet, TrainingSpec,
};
use crate::{par_map, CMat, CVec, Error, Result, SymbolBatch, SystemConfig};

/// Stream domains of the per-draw generators.
const DOMAIN_TRAINING: u64 = 1;
const DOMAIN_INIT: u64 = 2;
const DOMAIN_EVAL: u64 = 3;

/// Generator for draw `index` of `domain`.
pub fn draw_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((domain << 48) | index);
    rng
}

/// A trained scheme, ready to quantize.
#[derive(Clone, Debug)]
pub enum Trained {
    Unquantized,
    Lookup { quantizer: LloydQuantizer, books: CodebookSet },
    Tree(TreeCodebookSet),
    Neural { objective: NeuralObjective, code: NeuralCodebook, schedule: AnnealSchedule },
    Cp { b_cp: u32 },
}

/// Training sets for a scenario: one per scenario, shared by every sweep
/// point so that all bit budgets see the same data.
pub fn training_set(sc: &Scenario) -> Result<TrainingSet> {
    let cfg = sc.system_config(1)?;
    let spec =
        TrainingSpec { channels: sc.training.channels, symbols: sc.training.symbols, precoder: sc.precoder, ei: sc.ei };
    TrainingSet::generate(&cfg, &sc.channel_scenario(), &spec, &mut draw_rng(sc.seed, DOMAIN_TRAINING, 0))
}

fn with_bits(set: &TrainingSet, bits: u32) -> TrainingSet {
    TrainingSet { cfg: set.cfg.with_bits(bits), channels: set.channels.clone(), samples: set.samples.clone() }
}

/// Trains scheme `index` of the scenario at `bits` bits per RU.
pub fn train_scheme(sc: &Scenario, set: &TrainingSet, index: usize, bits: u32) -> Result<Trained> {
    let set = with_bits(set, bits);
    let cfg = &set.cfg;
    let mut rng = draw_rng(sc.seed, DOMAIN_INIT, ((index as u64) << 8) | bits as u64);
    let lloyd = |quantizer: LloydQuantizer, rounds: usize, rng: &mut ChaCha8Rng| -> Result<Trained> {
        let power = set.mean_ru_power();
        let books = (0..cfg.num_rus())
            .map(|m| LookupCodebook::gaussian(cfg.n_tx[m], bits, (power[m] / cfg.n_tx[m] as f64).sqrt(), rng))
            .collect::<Result<Vec<_>>>()?;
        let init = CodebookSet::new(books, vec![1.0; cfg.num_rus()])?;
        let out = lloyd_max_train(
            &set,
            &init,
            &LloydOptions { quantizer: quantizer.clone(), rounds, gamma: GammaPolicy::PerRound },
        )?;
        Ok(Trained::Lookup { quantizer, books: out.books })
    };
    match &sc.schemes[index] {
        SchemeSpec::Unquantized => Ok(Trained::Unquantized),
        SchemeSpec::Vq { rounds } => lloyd(LloydQuantizer::Vq, *rounds, &mut rng),
        SchemeSpec::Mq { rounds } => lloyd(LloydQuantizer::Mq, *rounds, &mut rng),
        SchemeSpec::Smq { rounds } => lloyd(LloydQuantizer::Smq { order: Vec::new() }, *rounds, &mut rng),
        SchemeSpec::AlphaPmq { alpha, iterations, sequential, rounds } => {
            let opts =
                PmqOptions { alpha: *alpha, iterations: iterations.unwrap_or(cfg.num_rus()), sequential: *sequential };
            lloyd(LloydQuantizer::AlphaPmq(opts), *rounds, &mut rng)
        }
        SchemeSpec::TreeMq { rounds } => {
            Ok(Trained::Tree(tree_codebook_train(&set, &vec![1.0; cfg.num_rus()], *rounds)?.trees))
        }
        SchemeSpec::NeuralMq(n) | SchemeSpec::NeuralVq(n) => {
            let objective = if matches!(sc.schemes[index], SchemeSpec::NeuralMq(_)) {
                NeuralObjective::Mq
            } else {
                NeuralObjective::Vq
            };
            let hidden = vec![n.hidden.unwrap_or(bits as usize); cfg.num_rus()];
            let init = NeuralCodebook::xavier(cfg, &hidden, &vec![n.depth; cfg.num_rus()], &mut rng)?;
            let schedule = AnnealSchedule::new(n.steps, n.step_size);
            let mut opts = NeuralTrainOptions::new(n.epochs);
            opts.adam.lr = n.lr;
            opts.schedule = schedule;
            let mut code = init;
            if objective == NeuralObjective::Mq && n.pretrain_epochs > 0 {
                let pre =
                    NeuralTrainOptions { epochs: n.pretrain_epochs, objective: NeuralObjective::Vq, ..opts.clone() };
                code = neural_train_adam(&code, &set, &pre)?.code;
                opts.calibrate_gamma = false;
            }
            opts.objective = objective;
            let out = neural_train_adam(&code, &set, &opts)?;
            Ok(Trained::Neural { objective, code: out.code, schedule })
        }
        SchemeSpec::Cp { b_cp } => Ok(Trained::Cp { b_cp: *b_cp }),
    }
}

/// Quantized transmit vector `Γ x̂` for one channel use plus the achieved
/// objective and the operation count.
fn transmit(
    trained: &Trained,
    cfg: &SystemConfig,
    channel: &crate::ChannelState,
    ctx: &QuantContext,
) -> Result<(CVec, f64, u64)> {
    let scaled = |r: crate::QuantizationResult, ops: u64| -> Result<(CVec, f64, u64)> {
        Ok((crate::apply_power_scaling(&r.xhat, &r.gamma, cfg)?, r.objective, ops))
    };
    match trained {
        Trained::Unquantized => {
            let obj = ctx.objective(&vec![1.0; cfg.num_rus()])?;
            let blocks: Vec<CVec> = (0..cfg.num_rus()).map(|m| ctx.x_block(m)).collect();
            Ok((ctx.x.clone(), obj.value(&blocks), 0))
        }
        Trained::Lookup { quantizer, books } => {
            let r = match quantizer {
                LloydQuantizer::Vq => vq_quantize_all(ctx, books)?,
                LloydQuantizer::Mq => mq_quantize(ctx, books)?,
                LloydQuantizer::Smq { .. } => smq_quantize(ctx, books, &(0..cfg.num_rus()).collect::<Vec<_>>())?,
                LloydQuantizer::AlphaPmq(p) => alpha_pmq_quantize(cfg, channel, ctx, books, p)?.result,
            };
            let ops = r.evaluations;
            scaled(r, ops)
        }
        Trained::Tree(trees) => {
            let r = tree_mq_quantize(ctx, trees)?;
            let ops = r.evaluations;
            scaled(r, ops)
        }
        Trained::Neural { objective, code, schedule } => {
            let r = match objective {
                NeuralObjective::Mq => neural_mq_quantize(ctx, code, schedule)?,
                NeuralObjective::Vq => neural_vq_quantize_all(ctx, code, schedule)?,
            };
            let ops = schedule.steps as u64 * code.macs_per_step();
            scaled(r, ops)
        }
        Trained::Cp { .. } => Err(Error::config("compress-and-precode is evaluated per channel")),
    }
}

#[derive(Clone, Debug, Default)]
struct Accum {
    se: Vec<f64>,
    sum_se: f64,
    errors: usize,
    decisions: usize,
    objective: f64,
    ops: f64,
}

/// Evaluates every trained scheme on evaluation channel `k`.
fn evaluate_channel(sc: &Scenario, cfg: &SystemConfig, trained: &[Trained], k: usize) -> Result<Vec<Accum>> {
    let mut rng = draw_rng(sc.seed, DOMAIN_EVAL, k as u64);
    let channel = generate_channel(cfg, &sc.channel_scenario(), &mut rng)?;
    let w = sc.precoder.design(&channel, cfg)?.w;
    let f = mmse_receivers(cfg, &channel, &w, false);
    let points = qam16_constellation();
    let count = sc.evaluation.symbols;
    let labels: Vec<Vec<usize>> =
        (0..count).map(|_| crate::metrics::qam16_labels(cfg.total_streams(), &mut rng)).collect();
    let symbols: Vec<CVec> =
        labels.iter().map(|l| CVec::from_iterator(l.len(), l.iter().map(|&i| points[i]))).collect();
    let noise: Vec<CVec> = (0..count)
        .map(|_| CVec::from_fn(cfg.total_rx(), |_, _| complex_gaussian(&mut rng) * c(cfg.noise_var.sqrt())))
        .collect();
    let contexts: Vec<QuantContext> = symbols
        .iter()
        .map(|s| match sc.ei {
            EiKind::Multi => QuantContext::multi(cfg, &channel, &w, &f, s),
            EiKind::Single => QuantContext::single(cfg, &channel, &w, s),
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(trained.len());
    for t in trained {
        let mut sent = Vec::with_capacity(count);
        let mut acc = Accum::default();
        if let Trained::Cp { b_cp } = t {
            let q = cp_quantize_precoder(&w, *b_cp, cfg)?;
            let gamma = cp_power_scale(&q.w_hat, &SymbolBatch { symbols: symbols.clone() }, cfg)?;
            for s in &symbols {
                sent.push(crate::apply_power_scaling(&(&q.w_hat * s), &gamma, cfg)?);
            }
        } else {
            for ctx in &contexts {
                let (x, obj, ops) = transmit(t, cfg, &channel, ctx)?;
                acc.objective += obj / count as f64;
                acc.ops += ops as f64 / count as f64;
                sent.push(x);
            }
        }
        let mut k_e = Vec::with_capacity(cfg.num_ues());
        let mut k_s = Vec::with_capacity(cfg.num_ues());
        for n in 0..cfg.num_ues() {
            let (rr, sr) = (cfg.rx_range(n), cfg.stream_range(n));
            let h_n = channel.ue_block(cfg, n);
            let s_n: Vec<CVec> = symbols.iter().map(|s| s.rows(sr.start, sr.len()).into_owned()).collect();
            k_e.push(error_covariance(&f[n], &h_n, &sent, &s_n, NoiseModel::Analytic(cfg.noise_var))?);
            k_s.push(CMat::identity(sr.len(), sr.len()));
            let gain = f[n].adjoint() * &h_n * w.columns(sr.start, sr.len());
            for (j, x) in sent.iter().enumerate() {
                let y = f[n].adjoint() * (&h_n * x + noise[j].rows(rr.start, rr.len()));
                for l in 0..sr.len() {
                    let d = qam16_detect(y[l] / gain[(l, l)]);
                    acc.errors += usize::from(d != labels[j][sr.start + l]);
                    acc.decisions += 1;
                }
            }
        }
        acc.se = per_ue_spectral_efficiency(&k_s, &k_e)?;
        acc.sum_se = acc.se.iter().sum();
        out.push(acc);
    }
    Ok(out)
}

/// Everything produced by one scenario run.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub scenario: Scenario,
    pub rows: Vec<ResultRow>,
    pub comparisons: Vec<Comparison>,
}

/// Trains and evaluates every scheme at every sweep point.
pub fn run_scenario(sc: &Scenario) -> Result<RunReport> {
    let sc = sc.resolved();
    let set = training_set(&sc)?;
    let mut rows = Vec::new();
    for &bits in &sc.bits {
        let cfg = sc.system_config(bits)?;
        let mut trained = Vec::with_capacity(sc.schemes.len());
        let mut train_time = Vec::with_capacity(sc.schemes.len());
        for i in 0..sc.schemes.len() {
            let start = Instant::now();
            trained.push(train_scheme(&sc, &set, i, bits)?);
            train_time.push(start.elapsed().as_secs_f64());
            log::info!("trained {} at B = {bits} in {:.2} s", sc.schemes[i].label(), train_time[i]);
        }
        let start = Instant::now();
        let indices: Vec<usize> = (0..sc.evaluation.channels).collect();
        let per_channel =
            par_map(&indices, |&k| evaluate_channel(&sc, &cfg, &trained, k)).into_iter().collect::<Result<Vec<_>>>()?;
        let eval_time = start.elapsed().as_secs_f64() / sc.schemes.len() as f64;
        let c_count = per_channel.len() as f64;
        for (i, spec) in sc.schemes.iter().enumerate() {
            let mut se = vec![0.0; cfg.num_ues()];
            let (mut sum_se, mut errors, mut decisions, mut objective, mut ops) = (0.0, 0, 0, 0.0, 0.0);
            for ch in &per_channel {
                let a = &ch[i];
                for (acc, v) in se.iter_mut().zip(&a.se) {
                    *acc += v / c_count;
                }
                sum_se += a.sum_se / c_count;
                errors += a.errors;
                decisions += a.decisions;
                objective += a.objective / c_count;
                ops += a.ops / c_count;
            }
            let sinr = se.iter().zip(&cfg.streams).map(|(s, &l)| 2f64.powf(s / l as f64) - 1.0).collect();
            rows.push(ResultRow {
                scheme: spec.label(),
                bits,
                sum_se,
                ser: errors as f64 / decisions.max(1) as f64,
                sinr,
                objective,
                op_count: ops,
                wall_time_s: train_time[i] + eval_time,
                seed: sc.seed,
            });
        }
    }
    let baseline = sc.schemes[0].label();
    let comparisons = compare_schemes(&rows, &baseline)?;
    Ok(RunReport { scenario: sc, rows, comparisons })
}

/// Writes `results.csv`, `summary.json` and `scenario.resolved.toml`.
pub fn write_report(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let csv = dir.join("results.csv");
    write_rows_csv(&report.rows, std::fs::File::create(&csv)?)?;
    let json = dir.join("summary.json");
    std::fs::write(&json, serde_json::to_string_pretty(report).map_err(|e| Error::Format(e.to_string()))?)?;
    let resolved = dir.join("scenario.resolved.toml");
    std::fs::write(&resolved, toml::to_string(&report.scenario).map_err(|e| Error::Format(e.to_string()))?)?;
    Ok(vec![csv, json, resolved])
}

/// Trains every scheme at every sweep point and saves the codebooks, plus
/// the first training channel as CSV.
pub fn train_and_save(sc: &Scenario, dir: &Path) -> Result<Vec<PathBuf>> {
    let sc = sc.resolved();
    std::fs::create_dir_all(dir)?;
    let set = training_set(&sc)?;
    let mut written = Vec::new();
    let channel = dir.join("channel.csv");
    write_channel_csv(&set.channels[0], std::fs::File::create(&channel)?)?;
    written.push(channel);
    for &bits in &sc.bits {
        for (i, spec) in sc.schemes.iter().enumerate() {
            let stem = format!("{}-b{bits}", spec.label());
            match train_scheme(&sc, &set, i, bits)? {
                Trained::Lookup { books, .. } => {
                    let p = dir.join(format!("{stem}.json"));
                    books.save(&p)?;
                    written.push(p);
                }
                Trained::Tree(trees) => {
                    let p = dir.join(format!("{stem}.json"));
                    std::fs::write(&p, trees.to_json()?)?;
                    written.push(p);
                }
                Trained::Neural { code, .. } => {
                    let p = dir.join(format!("{stem}.fhqn"));
                    write_checkpoint(&code, std::io::BufWriter::new(std::fs::File::create(&p)?))?;
                    written.push(p);
                }
                Trained::Unquantized | Trained::Cp { .. } => {}
            }
        }
    }
    let resolved = dir.join("scenario.resolved.toml");
    std::fs::write(&resolved, toml::to_string(&sc).map_err(|e| Error::Format(e.to_string()))?)?;
    written.push(resolved);
    Ok(written)
}
