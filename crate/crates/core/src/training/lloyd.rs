use serde::{Deserialize, Serialize};

use super::refit::{refit, Item, Slot};
use super::TrainingSet;
use crate::linalg::c;
use crate::quantizers::{
    alpha_pmq_quantize, mq_quantize, smq_quantize, vq_quantize, CodebookSet, LookupCodebook, PmqOptions,
};
use crate::{par_map, CVec, Error, Result};

/// Quantizer used in the assignment step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum LloydQuantizer {
    /// Per-RU nearest neighbour on `x_m / γ_m`; the re-fit is the k-means
    /// centroid and the trace is the Euclidean distortion.
    Vq,
    Mq,
    /// SMQ in the given RU order (`0..M` when empty).
    Smq {
        #[serde(default)]
        order: Vec<usize>,
    },
    AlphaPmq(PmqOptions),
}

/// Power-scale handling between rounds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaPolicy {
    /// Shrink `γ_m` after every re-fit so that the training-set mean of
    /// `‖γ_m x̂_m‖²` does not exceed `P_m`.
    #[default]
    PerRound,
    /// Keep the initial scales.
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LloydOptions {
    pub quantizer: LloydQuantizer,
    pub rounds: usize,
    #[serde(default)]
    pub gamma: GammaPolicy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LloydOutcome {
    pub books: CodebookSet,
    /// Mean training objective after each round's assignment step, plus the
    /// value after the final re-fit.
    pub trace: Vec<f64>,
}

/// Lloyd-Max alternation starting from `init`.
pub fn lloyd_max_train(set: &TrainingSet, init: &CodebookSet, opts: &LloydOptions) -> Result<LloydOutcome> {
    if opts.rounds == 0 {
        return Err(Error::config("Lloyd-Max needs at least one round"));
    }
    let m_count = set.cfg.num_rus();
    if init.rus.len() != m_count {
        return Err(Error::config("initial codebooks do not match the RU count"));
    }
    let order: Vec<usize> = match &opts.quantizer {
        LloydQuantizer::Smq { order } if !order.is_empty() => order.clone(),
        _ => (0..m_count).collect(),
    };
    let mut books = init.clone();
    let mut trace = Vec::with_capacity(opts.rounds + 1);
    for round in 0..opts.rounds {
        let assignments = assign(set, &books, &opts.quantizer, &order)?;
        trace.push(objective(set, &books, &assignments, &opts.quantizer)?);
        log::debug!("lloyd round {round}: objective {:.6e}", trace[round]);
        let mut words: Vec<Vec<CVec>> = books.rus.iter().map(|b| b.words.clone()).collect();
        if opts.quantizer == LloydQuantizer::Vq {
            centroids(set, &books.gamma, &assignments, &mut words);
        } else {
            let items = set
                .samples
                .iter()
                .zip(&assignments)
                .map(|(s, a)| {
                    Ok(Item { obj: s.ctx.objective(&books.gamma)?, slots: a.iter().map(|&i| Slot::Var(i)).collect() })
                })
                .collect::<Result<Vec<_>>>()?;
            refit(&mut words, &items)?;
        }
        for (book, w) in books.rus.iter_mut().zip(words) {
            *book = LookupCodebook::new(w)?;
        }
        if opts.gamma == GammaPolicy::PerRound {
            enforce_power(set, &mut books.gamma, &books.rus, &assignments);
        }
        if round + 1 == opts.rounds {
            trace.push(objective(set, &books, &assignments, &opts.quantizer)?);
        }
    }
    Ok(LloydOutcome { books, trace })
}

fn assign(set: &TrainingSet, books: &CodebookSet, q: &LloydQuantizer, order: &[usize]) -> Result<Vec<Vec<usize>>> {
    par_map(&set.samples, |s| -> Result<Vec<usize>> {
        Ok(match q {
            LloydQuantizer::Vq => (0..books.rus.len())
                .map(|m| vq_quantize(&(s.ctx.x_block(m) / c(books.gamma[m])), &books.rus[m]).0)
                .collect(),
            LloydQuantizer::Mq => mq_quantize(&s.ctx, books)?.indices,
            LloydQuantizer::Smq { .. } => smq_quantize(&s.ctx, books, order)?.indices,
            LloydQuantizer::AlphaPmq(p) => {
                alpha_pmq_quantize(&set.cfg, &set.channels[s.channel], &s.ctx, books, p)?.result.indices
            }
        })
    })
    .into_iter()
    .collect()
}

fn objective(set: &TrainingSet, books: &CodebookSet, assignments: &[Vec<usize>], q: &LloydQuantizer) -> Result<f64> {
    let mut total = 0.0;
    for (s, a) in set.samples.iter().zip(assignments) {
        let words: Vec<CVec> = a.iter().enumerate().map(|(m, &i)| books.rus[m].words[i].clone()).collect();
        total += if *q == LloydQuantizer::Vq {
            words.iter().enumerate().map(|(m, w)| (s.ctx.x_block(m) / c(books.gamma[m]) - w).norm_squared()).sum()
        } else {
            s.ctx.objective(&books.gamma)?.value(&words)
        };
    }
    Ok(total / set.len() as f64)
}

fn centroids(set: &TrainingSet, gamma: &[f64], assignments: &[Vec<usize>], words: &mut [Vec<CVec>]) {
    for (m, book) in words.iter_mut().enumerate() {
        let mut sums: Vec<CVec> = book.iter().map(|w| CVec::zeros(w.len())).collect();
        let mut counts = vec![0usize; book.len()];
        for (s, a) in set.samples.iter().zip(assignments) {
            sums[a[m]] += s.ctx.x_block(m) / c(gamma[m]);
            counts[a[m]] += 1;
        }
        for ((w, sum), n) in book.iter_mut().zip(sums).zip(counts) {
            if n > 0 {
                *w = sum / c(n as f64);
            }
        }
    }
}

fn enforce_power(set: &TrainingSet, gamma: &mut [f64], books: &[LookupCodebook], assignments: &[Vec<usize>]) {
    let n = set.len() as f64;
    for (m, g) in gamma.iter_mut().enumerate() {
        let p = assignments.iter().map(|a| books[m].words[a[m]].norm_squared()).sum::<f64>() / n * *g * *g;
        if p > set.cfg.power[m] {
            *g *= (set.cfg.power[m] / p).sqrt();
        }
    }
}
