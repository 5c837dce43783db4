//! Codebook training against the empirical sum-EI.
//!
//! Lookup and tree codebooks are trained by Lloyd-Max style alternation:
//! quantize every training pair, then re-fit the codewords with the
//! assignments held fixed. With assignments fixed the objective is a convex
//! quadratic in the codewords, solved as damped normal equations
//! `(G + λI) z = r + λ z_prev`, `λ = 1e-9 · max diag G`. Neural codebooks
//! are trained with Adam.

mod adam;
mod lloyd;
mod neural;
mod refit;
mod tree;

pub use adam::{AdamConfig, AdamState};
pub use lloyd::{lloyd_max_train, GammaPolicy, LloydOptions, LloydOutcome, LloydQuantizer};
pub use neural::{neural_train_adam, BitRefresh, NeuralObjective, NeuralTrainOptions, NeuralTrainOutcome};
pub use tree::{tree_codebook_train, TreeTrainOutcome};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{generate_channel, ChannelScenario};
use crate::metrics::mmse_receivers;
use crate::model::SymbolBatch;
use crate::precoding::PrecoderKind;
use crate::quantizers::{EiKind, QuantContext};
use crate::{ChannelState, Error, Result, SystemConfig};

/// One training pair: a channel use and the channel it was drawn on.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSample {
    pub channel: usize,
    pub ctx: QuantContext,
}

/// `C` channel draws with `S` symbol draws each.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    pub cfg: SystemConfig,
    pub channels: Vec<ChannelState>,
    pub samples: Vec<TrainingSample>,
}

/// How a [`TrainingSet`] is synthesized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSpec {
    pub channels: usize,
    pub symbols: usize,
    #[serde(default)]
    pub precoder: PrecoderKind,
    #[serde(default = "default_ei")]
    pub ei: EiKind,
}

fn default_ei() -> EiKind {
    EiKind::Multi
}

impl TrainingSet {
    pub fn new(cfg: SystemConfig, channels: Vec<ChannelState>, samples: Vec<TrainingSample>) -> Result<Self> {
        if channels.is_empty() || samples.is_empty() {
            return Err(Error::config("a training set needs at least one channel and one sample"));
        }
        if samples.iter().any(|s| s.channel >= channels.len() || s.ctx.num_rus() != cfg.num_rus()) {
            return Err(Error::config("training sample does not match the channel list"));
        }
        Ok(TrainingSet { cfg, channels, samples })
    }

    /// Draws `spec.channels` channels and `spec.symbols` Gaussian symbol
    /// vectors per channel; multi-antenna contexts use MMSE receivers.
    pub fn generate<R: Rng + ?Sized>(
        cfg: &SystemConfig,
        scenario: &ChannelScenario,
        spec: &TrainingSpec,
        rng: &mut R,
    ) -> Result<Self> {
        if spec.channels == 0 || spec.symbols == 0 {
            return Err(Error::config("training set sizes must be at least 1"));
        }
        let mut channels = Vec::with_capacity(spec.channels);
        let mut samples = Vec::with_capacity(spec.channels * spec.symbols);
        for c in 0..spec.channels {
            let ch = generate_channel(cfg, scenario, rng)?;
            let w = spec.precoder.design(&ch, cfg)?.w;
            let f = (spec.ei == EiKind::Multi).then(|| mmse_receivers(cfg, &ch, &w, false));
            for s in SymbolBatch::gaussian(cfg, spec.symbols, rng).symbols {
                let ctx = match &f {
                    Some(f) => QuantContext::multi(cfg, &ch, &w, f, &s)?,
                    None => QuantContext::single(cfg, &ch, &w, &s)?,
                };
                samples.push(TrainingSample { channel: c, ctx });
            }
            channels.push(ch);
        }
        TrainingSet::new(cfg.clone(), channels, samples)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean of `E‖x_m‖²` over the set, per RU.
    pub fn mean_ru_power(&self) -> Vec<f64> {
        let n = self.samples.len() as f64;
        (0..self.cfg.num_rus())
            .map(|m| self.samples.iter().map(|s| s.ctx.x_block(m).norm_squared()).sum::<f64>() / n)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generation_is_reproducible() {
        let cfg = SystemConfig::uniform(2, 2, 2, 2, 1, 2, 1.0, 0.1).unwrap();
        let sc = ChannelScenario::ring(2, 50.0, 3.0, 30.0);
        let spec = TrainingSpec { channels: 3, symbols: 4, precoder: PrecoderKind::Mmse, ei: EiKind::Multi };
        let a = TrainingSet::generate(&cfg, &sc, &spec, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = TrainingSet::generate(&cfg, &sc, &spec, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 12);
        assert_eq!(a.samples[7].channel, 1);
        let bad = TrainingSpec { symbols: 0, ..spec };
        assert!(TrainingSet::generate(&cfg, &sc, &bad, &mut ChaCha8Rng::seed_from_u64(5)).is_err());
    }
}
