//! Optional TOML defaults shared by every subcommand.
//!
//! ```toml
//! [data]
//! schema = "schema.toml"
//! target = "cohesion"
//!
//! [train]
//! epochs = 600
//! layers = [64, 1000, 200, 8]
//!
//! [cv]
//! k = 10
//!
//! [explain]
//! method = "kernel"
//! n_samples = 4096
//!
//! [serve]
//! addr = "0.0.0.0:8080"
//! ```
//!
//! A flag always wins over the file, and the file over built-in defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use shear_core::data::Target;
use shear_core::mlp::{MlpConfig, DEFAULT_DROPOUT, PROPOSED_HIDDEN};
use shear_core::train::{BatchMode, TrainConfig};

use crate::args::{HyperArgs, MethodArg, MethodArgs};
use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub data: DataSection,
    pub gen_data: GenSection,
    pub train: TrainSection,
    pub cv: CvSection,
    pub explain: ExplainSection,
    pub serve: ServeSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub schema: Option<PathBuf>,
    pub target: Option<Target>,
    pub ignore_extra_columns: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSection {
    pub seed: Option<u64>,
    pub spec: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub lr0: Option<f64>,
    pub step_size: Option<usize>,
    pub gamma: Option<f64>,
    pub clip_norm: Option<f64>,
    pub weight_decay: Option<f64>,
    pub batch_size: Option<usize>,
    pub dropout: Option<f64>,
    pub layers: Option<Vec<usize>>,
    pub background: Option<usize>,
    pub test_fraction: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSection {
    pub k: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainSection {
    pub method: Option<MethodArg>,
    pub n_samples: Option<usize>,
    pub seed: Option<u64>,
    pub background: Option<usize>,
    pub exact_limit: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSection {
    pub addr: Option<String>,
    pub max_batch: Option<usize>,
    pub exact_limit: Option<usize>,
    pub friction_model: Option<PathBuf>,
    pub cohesion_model: Option<PathBuf>,
    pub friction_summary: Option<PathBuf>,
    pub cohesion_summary: Option<PathBuf>,
    pub ui_dir: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {}", path.display(), e.message())))
    }

    /// Training and network settings after applying file then flags.
    pub fn hyper(&self, flags: &HyperArgs, input_size: usize) -> Result<(MlpConfig, TrainConfig), CliError> {
        let t = &self.train;
        let d = TrainConfig::default();
        let batch = flags.batch_size.or(t.batch_size);
        let train = TrainConfig {
            lr0: flags.lr0.or(t.lr0).unwrap_or(d.lr0),
            step_size: flags.step_size.or(t.step_size).unwrap_or(d.step_size),
            gamma: flags.gamma.or(t.gamma).unwrap_or(d.gamma),
            clip_norm: flags.clip_norm.or(t.clip_norm).unwrap_or(d.clip_norm),
            epochs: flags.epochs.or(t.epochs).unwrap_or(d.epochs),
            weight_decay: flags.weight_decay.or(t.weight_decay).unwrap_or(d.weight_decay),
            batch_mode: match batch {
                Some(size) => BatchMode::MiniBatch { size },
                None => BatchMode::FullBatch,
            },
            seed: flags.seed.or(t.seed).unwrap_or(d.seed),
            background_size: flags.background.or(t.background).unwrap_or(d.background_size),
            ..d
        };
        let mlp = MlpConfig {
            input_size,
            hidden_sizes: flags
                .layers
                .clone()
                .or_else(|| t.layers.clone())
                .unwrap_or_else(|| PROPOSED_HIDDEN.to_vec()),
            dropout_p: flags.dropout.or(t.dropout).unwrap_or(DEFAULT_DROPOUT),
        };
        train.validate()?;
        mlp.validate()?;
        Ok((mlp, train))
    }

    pub fn method(&self, flags: &MethodArgs) -> ResolvedMethod {
        let e = &self.explain;
        ResolvedMethod {
            method: flags.method.or(e.method).unwrap_or(MethodArg::Kernel),
            n_samples: flags.n_samples.or(e.n_samples),
            seed: flags.seed.or(e.seed).unwrap_or(0),
            background: flags.background.or(e.background),
            exact_limit: flags.exact_limit.or(e.exact_limit),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ResolvedMethod {
    pub method: MethodArg,
    pub n_samples: Option<usize>,
    pub seed: u64,
    pub background: Option<usize>,
    pub exact_limit: Option<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file: FileConfig = toml::from_str("[train]\nepochs = 10\nlr0 = 0.1\nlayers = [4, 2]\n").unwrap();
        let flags = HyperArgs {
            epochs: Some(20),
            ..HyperArgs::default()
        };
        let (mlp, train) = file.hyper(&flags, 3).unwrap();
        assert_eq!(train.epochs, 20);
        assert_eq!(train.lr0, 0.1);
        assert_eq!(train.gamma, 0.8);
        assert_eq!(mlp.hidden_sizes, vec![4, 2]);
        assert_eq!(mlp.dropout_p, 0.2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("[train]\nepoch = 10\n").is_err());
        assert!(toml::from_str::<FileConfig>("[plot]\n").is_err());
    }

    #[test]
    fn invalid_values_fail_validation() {
        let flags = HyperArgs {
            gamma: Some(1.5),
            ..HyperArgs::default()
        };
        assert!(FileConfig::default().hyper(&flags, 3).is_err());
        let flags = HyperArgs {
            dropout: Some(1.0),
            ..HyperArgs::default()
        };
        assert!(FileConfig::default().hyper(&flags, 3).is_err());
    }

    #[test]
    fn minibatch_only_when_asked() {
        let (_, t) = FileConfig::default().hyper(&HyperArgs::default(), 3).unwrap();
        assert_eq!(t.batch_mode, BatchMode::FullBatch);
        let file: FileConfig = toml::from_str("[train]\nbatch_size = 16\n").unwrap();
        let (_, t) = file.hyper(&HyperArgs::default(), 3).unwrap();
        assert_eq!(t.batch_mode, BatchMode::MiniBatch { size: 16 });
    }
}
