use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::ChannelScenario;
use crate::precoding::PrecoderKind;
use crate::quantizers::EiKind;
use crate::{Error, Result, SystemConfig};

/// Experiment description read from TOML. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub system: SystemSection,
    /// Defaults to RUs on a ring of radius 50 m, exponent 3, 30 dB.
    #[serde(default)]
    pub channel: Option<ChannelScenario>,
    #[serde(default)]
    pub precoder: PrecoderKind,
    #[serde(default = "default_ei")]
    pub ei: EiKind,
    /// Fronthaul bits per RU, one sweep point each.
    pub bits: Vec<u32>,
    #[serde(default)]
    pub training: SizeSection,
    #[serde(default)]
    pub evaluation: EvalSection,
    pub schemes: Vec<SchemeSpec>,
    /// Output directory; `--out-dir` overrides it.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn default_name() -> String {
    "scenario".into()
}

fn default_ei() -> EiKind {
    EiKind::Multi
}

/// Homogeneous system parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub rus: usize,
    pub ues: usize,
    pub n_tx: usize,
    pub n_rx: usize,
    #[serde(default = "one")]
    pub streams: usize,
    #[serde(default = "unit")]
    pub power: f64,
    #[serde(default = "unit")]
    pub noise_var: f64,
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeSection {
    pub channels: usize,
    pub symbols: usize,
}

impl Default for SizeSection {
    fn default() -> Self {
        SizeSection { channels: 10, symbols: 10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub channels: usize,
    /// 16-QAM symbol vectors per channel.
    pub symbols: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { channels: 10, symbols: 100 }
    }
}

/// One scheme to train and evaluate, tagged by `kind`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum SchemeSpec {
    /// Infinite-resolution fronthaul.
    Unquantized,
    Vq {
        #[serde(default = "rounds")]
        rounds: usize,
    },
    Mq {
        #[serde(default = "rounds")]
        rounds: usize,
    },
    Smq {
        #[serde(default = "rounds")]
        rounds: usize,
    },
    AlphaPmq {
        #[serde(default = "alpha")]
        alpha: f64,
        /// Iterations `T`; defaults to the RU count.
        #[serde(default)]
        iterations: Option<usize>,
        #[serde(default)]
        sequential: bool,
        #[serde(default = "rounds")]
        rounds: usize,
    },
    TreeMq {
        #[serde(default = "rounds")]
        rounds: usize,
    },
    NeuralMq(NeuralSpec),
    NeuralVq(NeuralSpec),
    /// Compress-and-precode with `b_cp` bits per precoder entry.
    Cp {
        #[serde(default = "b_cp")]
        b_cp: u32,
    },
}

fn rounds() -> usize {
    10
}

fn alpha() -> f64 {
    0.5
}

fn b_cp() -> u32 {
    16
}

/// Neural codebook architecture and training parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuralSpec {
    /// Hidden width; defaults to the bit budget.
    #[serde(default)]
    pub hidden: Option<usize>,
    #[serde(default = "one")]
    pub depth: usize,
    #[serde(default = "epochs")]
    pub epochs: usize,
    /// GD steps `I` per quantization.
    #[serde(default = "steps")]
    pub steps: usize,
    /// GD step size `η`.
    #[serde(default = "step_size")]
    pub step_size: f64,
    #[serde(default = "lr")]
    pub lr: f64,
    /// Neural-MQ only: epochs on the per-RU distortion loss before the
    /// sum-EI epochs.
    #[serde(default)]
    pub pretrain_epochs: usize,
}

fn epochs() -> usize {
    50
}

fn steps() -> usize {
    100
}

fn step_size() -> f64 {
    0.1
}

fn lr() -> f64 {
    1e-3
}

impl SchemeSpec {
    /// Stable label used in reports and file names.
    pub fn label(&self) -> String {
        match self {
            SchemeSpec::Unquantized => "unquantized".into(),
            SchemeSpec::Vq { .. } => "vq".into(),
            SchemeSpec::Mq { .. } => "mq".into(),
            SchemeSpec::Smq { .. } => "smq".into(),
            SchemeSpec::AlphaPmq { alpha, .. } => format!("alpha-pmq-{alpha}"),
            SchemeSpec::TreeMq { .. } => "tree-mq".into(),
            SchemeSpec::NeuralMq(_) => "neural-mq".into(),
            SchemeSpec::NeuralVq(_) => "neural-vq".into(),
            SchemeSpec::Cp { b_cp } => format!("cp-{b_cp}"),
        }
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let sc: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = self.system_config(1)?;
        self.channel_scenario().validate(&cfg)?;
        if self.bits.is_empty() || self.schemes.is_empty() {
            return Err(Error::config("bits and schemes must be non-empty"));
        }
        for &b in &self.bits {
            self.system_config(b)?;
        }
        let sizes = [self.training.channels, self.training.symbols, self.evaluation.channels, self.evaluation.symbols];
        if sizes.contains(&0) {
            return Err(Error::config("training and evaluation sizes must be at least 1"));
        }
        let mut labels: Vec<String> = self.schemes.iter().map(SchemeSpec::label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("scheme labels must be unique"));
        }
        for s in &self.schemes {
            match s {
                SchemeSpec::AlphaPmq { alpha, iterations, .. } => {
                    if !(0.0..=1.0).contains(alpha) || *iterations == Some(0) {
                        return Err(Error::config("alpha-pmq needs alpha in [0, 1] and at least one iteration"));
                    }
                }
                SchemeSpec::NeuralMq(n) | SchemeSpec::NeuralVq(n) => {
                    if n.epochs == 0 || !(n.step_size > 0.0) || !(n.lr > 0.0) {
                        return Err(Error::config("neural schemes need epochs >= 1 and positive step sizes"));
                    }
                }
                SchemeSpec::Cp { b_cp } if *b_cp < 2 || b_cp % 2 != 0 || *b_cp > 64 => {
                    return Err(Error::config("b_cp must be even and in 2..=64"));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn system_config(&self, bits: u32) -> Result<SystemConfig> {
        let s = &self.system;
        SystemConfig::uniform(s.rus, s.ues, s.n_tx, s.n_rx, s.streams, bits, s.power, s.noise_var)
    }

    pub fn channel_scenario(&self) -> ChannelScenario {
        self.channel.clone().unwrap_or_else(|| ChannelScenario::ring(self.system.rus, 50.0, 3.0, 30.0))
    }

    /// Copy with every default made explicit.
    pub fn resolved(&self) -> Self {
        let mut sc = self.clone();
        sc.channel = Some(self.channel_scenario());
        for s in &mut sc.schemes {
            if let SchemeSpec::AlphaPmq { iterations, .. } = s {
                iterations.get_or_insert(self.system.rus);
            }
        }
        sc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        bits = [1, 2]
        [system]
        rus = 2
        ues = 2
        n_tx = 1
        n_rx = 1
        [[schemes]]
        kind = "vq"
    "#;

    #[test]
    fn minimal_scenario_parses_with_defaults() {
        let sc = Scenario::from_toml_str(MINIMAL).unwrap();
        assert_eq!(sc.schemes, vec![SchemeSpec::Vq { rounds: 10 }]);
        assert_eq!(sc.ei, EiKind::Multi);
        let r = sc.resolved();
        assert!(r.channel.is_some());
        let text = toml::to_string(&r).unwrap();
        assert_eq!(Scenario::from_toml_str(&text).unwrap(), r);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = MINIMAL.replace("n_rx = 1", "n_rx = 1\nantennas = 3");
        let err = Scenario::from_toml_str(&bad).unwrap_err().to_string();
        assert!(err.contains("antennas"), "{err}");
        let bad = MINIMAL.replace("kind = \"vq\"", "kind = \"vq\"\nalpha = 0.5");
        assert!(Scenario::from_toml_str(&bad).is_err());
        assert!(Scenario::from_toml_str(&MINIMAL.replace("bits = [1, 2]", "bits = []")).is_err());
    }
}
