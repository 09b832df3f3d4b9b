use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mlp::MlpConfig;
use crate::train::{cross_validate, BatchMode, CvReport, TrainConfig};

/// One searched hyperparameter and its candidate values.
///
/// In TOML: `[[axis]]` tables with `param` and `values` keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "param", content = "values", rename_all = "snake_case")]
pub enum GridAxis {
    Lr0(Vec<f64>),
    BatchSize(Vec<usize>),
    Epochs(Vec<usize>),
    StepSize(Vec<usize>),
    Gamma(Vec<f64>),
    ClipNorm(Vec<f64>),
    WeightDecay(Vec<f64>),
    Dropout(Vec<f64>),
    HiddenSizes(Vec<Vec<usize>>),
}

/// A single hyperparameter assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "param", content = "value", rename_all = "snake_case")]
pub enum Setting {
    Lr0(f64),
    BatchSize(usize),
    Epochs(usize),
    StepSize(usize),
    Gamma(f64),
    ClipNorm(f64),
    WeightDecay(f64),
    Dropout(f64),
    HiddenSizes(Vec<usize>),
}

impl Setting {
    pub fn apply(&self, mlp: &mut MlpConfig, train: &mut TrainConfig) {
        match self {
            Setting::Lr0(v) => train.lr0 = *v,
            Setting::BatchSize(v) => train.batch_mode = BatchMode::MiniBatch { size: *v },
            Setting::Epochs(v) => train.epochs = *v,
            Setting::StepSize(v) => train.step_size = *v,
            Setting::Gamma(v) => train.gamma = *v,
            Setting::ClipNorm(v) => train.clip_norm = *v,
            Setting::WeightDecay(v) => train.weight_decay = *v,
            Setting::Dropout(v) => mlp.dropout_p = *v,
            Setting::HiddenSizes(v) => mlp.hidden_sizes = v.clone(),
        }
    }
}

impl GridAxis {
    fn settings(&self) -> Vec<Setting> {
        match self {
            GridAxis::Lr0(v) => v.iter().map(|&x| Setting::Lr0(x)).collect(),
            GridAxis::BatchSize(v) => v.iter().map(|&x| Setting::BatchSize(x)).collect(),
            GridAxis::Epochs(v) => v.iter().map(|&x| Setting::Epochs(x)).collect(),
            GridAxis::StepSize(v) => v.iter().map(|&x| Setting::StepSize(x)).collect(),
            GridAxis::Gamma(v) => v.iter().map(|&x| Setting::Gamma(x)).collect(),
            GridAxis::ClipNorm(v) => v.iter().map(|&x| Setting::ClipNorm(x)).collect(),
            GridAxis::WeightDecay(v) => v.iter().map(|&x| Setting::WeightDecay(x)).collect(),
            GridAxis::Dropout(v) => v.iter().map(|&x| Setting::Dropout(x)).collect(),
            GridAxis::HiddenSizes(v) => v.iter().cloned().map(Setting::HiddenSizes).collect(),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            GridAxis::Lr0(_) => "lr0",
            GridAxis::BatchSize(_) => "batch_size",
            GridAxis::Epochs(_) => "epochs",
            GridAxis::StepSize(_) => "step_size",
            GridAxis::Gamma(_) => "gamma",
            GridAxis::ClipNorm(_) => "clip_norm",
            GridAxis::WeightDecay(_) => "weight_decay",
            GridAxis::Dropout(_) => "dropout",
            GridAxis::HiddenSizes(_) => "hidden_sizes",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperGrid {
    #[serde(rename = "axis")]
    pub axes: Vec<GridAxis>,
}

impl HyperGrid {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let grid: HyperGrid = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::InvalidConfig("grid has no axes".into()));
        }
        for axis in &self.axes {
            if axis.settings().is_empty() {
                return Err(Error::InvalidConfig(format!("grid axis {} has no values", axis.name())));
            }
        }
        Ok(())
    }
}

/// Cartesian product of the axes in lexicographic order: the first axis
/// varies slowest.
pub fn enumerate_grid(grid: &HyperGrid) -> Result<Vec<Vec<Setting>>> {
    grid.validate()?;
    let mut combos: Vec<Vec<Setting>> = vec![Vec::new()];
    for axis in &grid.axes {
        let values = axis.settings();
        combos = combos
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut c = prefix.clone();
                    c.push(v.clone());
                    c
                })
            })
            .collect();
    }
    Ok(combos)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    /// Position in enumeration order.
    pub index: usize,
    pub settings: Vec<Setting>,
    pub cv: CvReport,
}

/// Evaluates every grid point by k-fold mean validation MAE and returns them
/// best first. Ties keep enumeration order.
pub fn grid_search(
    dataset: &Dataset,
    base_mlp: &MlpConfig,
    base_train: &TrainConfig,
    grid: &HyperGrid,
    k: usize,
) -> Result<Vec<GridResult>> {
    let combos = enumerate_grid(grid)?;
    let mut configs = Vec::with_capacity(combos.len());
    for settings in &combos {
        let (mut mlp, mut train) = (base_mlp.clone(), base_train.clone());
        settings.iter().for_each(|s| s.apply(&mut mlp, &mut train));
        mlp.validate()?;
        train.validate()?;
        configs.push((mlp, train));
    }
    let mut results = combos
        .into_par_iter()
        .zip(configs)
        .enumerate()
        .map(|(index, (settings, (mlp, train)))| {
            Ok(GridResult {
                index,
                settings,
                cv: cross_validate(dataset, &mlp, &train, k)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    results.sort_by(|a, b| a.cv.mae.mean.total_cmp(&b.cv.mae.mean));
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    const NINE: &str = r#"
[[axis]]
param = "lr0"
values = [0.001, 0.01, 0.1]

[[axis]]
param = "batch_size"
values = [16, 32, 64]
"#;

    #[test]
    fn nine_configurations_in_lexicographic_order() {
        let grid = HyperGrid::from_toml_str(NINE).unwrap();
        let combos = enumerate_grid(&grid).unwrap();
        assert_eq!(combos.len(), 9);
        assert_eq!(combos[0], vec![Setting::Lr0(0.001), Setting::BatchSize(16)]);
        assert_eq!(combos[1], vec![Setting::Lr0(0.001), Setting::BatchSize(32)]);
        assert_eq!(combos[8], vec![Setting::Lr0(0.1), Setting::BatchSize(64)]);
        assert_eq!(combos, enumerate_grid(&grid).unwrap());
    }

    #[test]
    fn single_point_grid() {
        let grid = HyperGrid::from_toml_str("[[axis]]\nparam = \"hidden_sizes\"\nvalues = [[8, 4]]\n").unwrap();
        assert_eq!(enumerate_grid(&grid).unwrap(), vec![vec![Setting::HiddenSizes(vec![8, 4])]]);
    }

    #[test]
    fn empty_axis_rejected() {
        let err = HyperGrid::from_toml_str("[[axis]]\nparam = \"gamma\"\nvalues = []\n").unwrap_err();
        assert!(err.to_string().contains("gamma"), "{err}");
        assert!(HyperGrid::from_toml_str("[[axis]]\nparam = \"momentum\"\nvalues = [1.0]\n").is_err());
    }

    #[test]
    fn settings_apply() {
        let mut mlp = MlpConfig::proposed(3);
        let mut train = TrainConfig::default();
        Setting::BatchSize(32).apply(&mut mlp, &mut train);
        Setting::Dropout(0.1).apply(&mut mlp, &mut train);
        assert_eq!(train.batch_mode, BatchMode::MiniBatch { size: 32 });
        assert_eq!(mlp.dropout_p, 0.1);
    }
}
