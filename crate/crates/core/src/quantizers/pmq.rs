use serde::{Deserialize, Serialize};

use super::graph::{build_interference_graph, rlf_independent_sets, QuantizationSchedule};
use super::lookup::{best_local, check_books, contributions, pick};
use super::{assemble_result, CodebookSet, QuantContext};
use crate::model::{ChannelState, SystemConfig};
use crate::{CVec, Error, QuantizationResult, Result};

/// α-PMQ parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmqOptions {
    pub alpha: f64,
    pub iterations: usize,
    /// Members of a set see each other's fresh decisions instead of the
    /// previous iteration's state.
    #[serde(default)]
    pub sequential: bool,
}

/// α-PMQ result with the schedule used and the objective after every
/// iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct PmqOutcome {
    pub result: QuantizationResult,
    pub schedule: QuantizationSchedule,
    pub trace: Vec<f64>,
}

/// Builds the interference graph for `opts.alpha`, colors it with RLF and
/// runs α-PMQ on the resulting schedule.
pub fn alpha_pmq_quantize(
    cfg: &SystemConfig,
    channel: &ChannelState,
    ctx: &QuantContext,
    books: &CodebookSet,
    opts: &PmqOptions,
) -> Result<PmqOutcome> {
    let graph = build_interference_graph(cfg, channel, opts.alpha)?;
    let schedule = rlf_independent_sets(&graph);
    alpha_pmq_with_schedule(ctx, books, &schedule, opts.iterations, opts.sequential)
}

/// α-PMQ on an explicit schedule.
///
/// The state keeps each RU's disturbance `Δ_m = γ_m A_m x̂_m`, starting from
/// `x̂ = 0`, `Δ = 0`. At iteration `t` every RU of set `(t − 1) mod I` solves
/// `argmin_c ‖Σ_{m'≠m} Δ_{m'} − t + γ_m A_m c‖²`.
pub fn alpha_pmq_with_schedule(
    ctx: &QuantContext,
    books: &CodebookSet,
    schedule: &QuantizationSchedule,
    iterations: usize,
    sequential: bool,
) -> Result<PmqOutcome> {
    check_books(ctx, books)?;
    if iterations == 0 {
        return Err(Error::config("alpha-PMQ needs at least one iteration"));
    }
    if schedule.sets.is_empty() || schedule.sets.iter().flatten().any(|&m| m >= ctx.num_rus()) {
        return Err(Error::config("schedule does not match the RU count"));
    }
    let obj = ctx.objective(&books.gamma)?;
    let parts = contributions(&obj, books);
    let m_count = ctx.num_rus();
    let mut delta: Vec<CVec> = (0..m_count).map(|_| CVec::zeros(obj.t.len())).collect();
    let mut indices = vec![0usize; m_count];
    let mut e = -obj.t.clone();
    let mut trace = Vec::with_capacity(iterations);
    let mut evals = 0u64;
    for t in 1..=iterations {
        let set = schedule.set_at(t);
        let snapshot = e.clone();
        let mut updates = Vec::with_capacity(set.len());
        for &m in set {
            let reference = if sequential { &e } else { &snapshot };
            let base = reference - &delta[m];
            let i = best_local(&base, &parts[m]);
            evals += parts[m].len() as u64;
            if sequential {
                e = base + &parts[m][i];
                delta[m] = parts[m][i].clone();
                indices[m] = i;
            } else {
                updates.push((m, i));
            }
        }
        for (m, i) in updates {
            e += &parts[m][i] - &delta[m];
            delta[m] = parts[m][i].clone();
            indices[m] = i;
        }
        trace.push(e.norm_squared() + obj.offset);
    }
    // RUs never scheduled transmit codeword 0 rather than silence.
    let words = pick(books, &indices);
    let result = assemble_result(&obj, words, indices, books.bits(), &books.gamma, evals);
    Ok(PmqOutcome { result, schedule: schedule.clone(), trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::model::complex_gaussian;
    use crate::quantizers::{smq_quantize, LookupCodebook};
    use crate::CMat;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy() -> (SystemConfig, ChannelState, QuantContext, CodebookSet) {
        let cfg = SystemConfig::uniform(2, 1, 1, 1, 1, 1, 1.0, 0.1).unwrap();
        let ch = ChannelState::new(CMat::from_row_slice(1, 2, &[c(1.0), c(1.0)]), &cfg).unwrap();
        let w = CMat::from_row_slice(2, 1, &[c(0.5), c(0.5)]);
        let ctx = QuantContext::single(&cfg, &ch, &w, &CVec::from_element(1, c(1.0))).unwrap();
        let book = LookupCodebook::scalar(&[0.0, 1.0]).unwrap();
        (cfg, ch, ctx, CodebookSet::new(vec![book.clone(), book], vec![1.0, 1.0]).unwrap())
    }

    #[test]
    fn parallel_toy_pays_for_parallelism() {
        let (cfg, ch, ctx, books) = toy();
        let out =
            alpha_pmq_quantize(&cfg, &ch, &ctx, &books, &PmqOptions { alpha: 1.0, iterations: 1, sequential: false })
                .unwrap();
        assert_eq!(out.schedule.sets, vec![vec![0, 1]]);
        assert_eq!(out.result.indices, vec![1, 1]);
        assert!((out.result.objective - 1.0).abs() < 1e-15);
    }

    #[test]
    fn alpha_zero_recovers_smq() {
        let cfg = SystemConfig::uniform(3, 2, 1, 1, 1, 2, 1.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..30 {
            let ch = ChannelState::new(CMat::from_fn(2, 3, |_, _| complex_gaussian(&mut rng)), &cfg).unwrap();
            let w = CMat::from_fn(3, 2, |_, _| complex_gaussian(&mut rng));
            let s = CVec::from_fn(2, |_, _| complex_gaussian(&mut rng));
            let ctx = QuantContext::single(&cfg, &ch, &w, &s).unwrap();
            let books = CodebookSet::new(
                (0..3).map(|_| LookupCodebook::gaussian(1, 2, 1.0, &mut rng).unwrap()).collect(),
                vec![1.0; 3],
            )
            .unwrap();
            let out = alpha_pmq_quantize(
                &cfg,
                &ch,
                &ctx,
                &books,
                &PmqOptions { alpha: 0.0, iterations: 3, sequential: false },
            )
            .unwrap();
            assert_eq!(out.schedule.sets.len(), 3);
            let order: Vec<usize> = out.schedule.sets.iter().map(|s| s[0]).collect();
            assert_eq!(out.result.indices, smq_quantize(&ctx, &books, &order).unwrap().indices);
        }
    }

    #[test]
    fn singleton_trace_is_monotone_over_many_sweeps() {
        let cfg = SystemConfig::uniform(3, 3, 2, 1, 1, 3, 1.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let ch = ChannelState::new(CMat::from_fn(3, 6, |_, _| complex_gaussian(&mut rng)), &cfg).unwrap();
        let w = CMat::from_fn(6, 3, |_, _| complex_gaussian(&mut rng));
        let s = CVec::from_fn(3, |_, _| complex_gaussian(&mut rng));
        let ctx = QuantContext::single(&cfg, &ch, &w, &s).unwrap();
        let books = CodebookSet::new(
            (0..3).map(|_| LookupCodebook::gaussian(2, 3, 1.0, &mut rng).unwrap()).collect(),
            vec![1.0; 3],
        )
        .unwrap();
        let out = alpha_pmq_with_schedule(&ctx, &books, &QuantizationSchedule::singletons(3), 12, false).unwrap();
        // Once every RU has transmitted, each update is a coordinate descent step.
        assert!(out.trace[2..].windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert_eq!(out.result.evaluations, 12 * 8);
        assert!((out.trace[11] - out.result.objective).abs() < 1e-9);
    }
}
