//! Request and response bodies of the JSON API.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use shear_core::data::{FeatureKind, Target};

pub type FeatureMap = Map<String, Value>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictRequest {
    /// One instance.
    #[serde(default)]
    pub features: Option<FeatureMap>,
    /// Several instances; mutually exclusive with `features`.
    #[serde(default)]
    pub batch: Option<Vec<FeatureMap>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Exact,
    #[default]
    Kernel,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplainRequest {
    pub features: FeatureMap,
    pub target: Target,
    #[serde(default)]
    pub method: MethodName,
    /// Kernel coalition budget. Values of at least `2^M − 2` enumerate every
    /// coalition.
    #[serde(default)]
    pub n_samples: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub target: Target,
    pub unit: String,
    pub checksum: String,
    pub hidden_sizes: Vec<usize>,
    pub dropout_p: f64,
    pub background_rows: usize,
    pub train_samples: usize,
}

pub type Models = BTreeMap<Target, ModelInfo>;

#[derive(Debug, Clone, Serialize)]
pub struct HealthResponse {
    pub status: &'static str,
    pub models: Models,
}

#[derive(Debug, Clone, Serialize)]
pub struct SchemaFeature {
    pub name: String,
    pub unit: String,
    pub kind: FeatureKind,
    /// Valid interval; `None` for an unbounded upper end.
    pub bounds: (f64, Option<f64>),
    /// Range seen in training, per loaded model.
    pub fit_range: BTreeMap<Target, (f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SchemaResponse {
    pub features: Vec<SchemaFeature>,
    pub models: Models,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RangeWarning {
    pub target: Target,
    pub feature: String,
    pub value: f64,
    pub fit_min: f64,
    pub fit_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    /// Feature values in schema order, as interpreted by the service.
    pub resolved_features: Vec<f64>,
    pub friction_deg: f64,
    pub cohesion_kpa: f64,
    pub out_of_range: Vec<RangeWarning>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictResponse {
    pub predictions: Vec<Prediction>,
    pub models: Models,
}

#[derive(Debug, Clone, Serialize)]
pub struct Attribution {
    pub feature: String,
    pub value: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WaterfallEntry {
    /// `None` for the base-value step.
    pub feature: Option<String>,
    pub phi: f64,
    pub cumulative: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BackgroundInfo {
    pub rows: usize,
    pub seed: u64,
    pub source_size: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExplainResponse {
    pub target: Target,
    pub unit: String,
    pub resolved_features: Vec<f64>,
    pub base_value: f64,
    pub prediction: f64,
    pub attributions: Vec<Attribution>,
    pub waterfall: Vec<WaterfallEntry>,
    pub method: shear_core::explain::Method,
    pub background: BackgroundInfo,
    pub local_accuracy_error: f64,
    pub out_of_range: Vec<RangeWarning>,
    pub models: Models,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorBody {
    pub error: String,
    pub models: Models,
}
