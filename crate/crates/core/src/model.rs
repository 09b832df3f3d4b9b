//! Trained model bundle and its file format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes   "MSWSHEAR"
//! version    u32       1
//! header_len u64
//! header     header_len bytes of UTF-8 JSON: target, schema, scaler,
//!            network config, layer shapes, background shape and
//!            provenance, metadata
//! payload    f64 values: for each layer W (out × in, row-major) then b;
//!            then the background rows, row-major
//! checksum   32 bytes  SHA-256 of everything before it
//! ```

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Dataset, FeatureSchema, ScalerParams, Target};
use crate::error::{Error, Result};
use crate::explain::{explain, global_summary, BackgroundSet, ExplainMethod, Explanation, GlobalSummary, Predictor};
use crate::mlp::{Mlp, MlpConfig, MlpParams};
use crate::numeric::Matrix;
use crate::train::TrainConfig;

pub const MAGIC: &[u8; 8] = b"MSWSHEAR";
pub const FORMAT_VERSION: u32 = 1;
const PREFIX_LEN: usize = 8 + 4 + 8;
const CHECKSUM_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub producer: String,
    pub train_config: Option<TrainConfig>,
    pub train_samples: usize,
    pub test_samples: usize,
    pub final_train_mse_scaled: Option<f64>,
    pub final_test_mse_scaled: Option<f64>,
}

impl ModelMetadata {
    pub fn producer() -> String {
        format!("shear-core {}", env!("CARGO_PKG_VERSION"))
    }
}

impl Default for ModelMetadata {
    fn default() -> Self {
        Self {
            producer: Self::producer(),
            train_config: None,
            train_samples: 0,
            test_samples: 0,
            final_train_mse_scaled: None,
            final_test_mse_scaled: None,
        }
    }
}

/// A global summary labelled with what produced it, as written by the CLI
/// and served to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryReport {
    pub target: Target,
    pub unit: String,
    pub features: Vec<String>,
    pub method: ExplainMethod,
    /// Checksum of the model file the summary was computed from.
    pub model_checksum: String,
    pub summary: GlobalSummary,
}

/// Everything needed to predict and explain one target from native-unit
/// features.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub target: Target,
    pub schema: FeatureSchema,
    pub scaler: ScalerParams,
    pub mlp: Mlp,
    /// Scaled training rows used as the explanation background.
    pub background: BackgroundSet,
    pub metadata: ModelMetadata,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    target: Target,
    schema: FeatureSchema,
    scaler: ScalerParams,
    mlp: MlpConfig,
    layers: Vec<[usize; 2]>,
    background: BackgroundHeader,
    metadata: ModelMetadata,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BackgroundHeader {
    rows: usize,
    cols: usize,
    seed: u64,
    source_size: usize,
}

impl ModelBundle {
    pub fn new(
        target: Target,
        schema: FeatureSchema,
        scaler: ScalerParams,
        mlp: Mlp,
        background: BackgroundSet,
        metadata: ModelMetadata,
    ) -> Result<Self> {
        let bundle = Self {
            target,
            schema,
            scaler,
            mlp,
            background,
            metadata,
        };
        bundle.check()?;
        Ok(bundle)
    }

    fn check(&self) -> Result<()> {
        let m = self.schema.len();
        self.scaler.validate()?;
        if self.scaler.n_features() != m {
            return Err(Error::ModelFormat(format!(
                "scaler covers {} features, schema has {m}",
                self.scaler.n_features()
            )));
        }
        self.mlp.config.validate()?;
        self.mlp.params.check_shapes(&self.mlp.config)?;
        if self.mlp.config.input_size != m {
            return Err(Error::ModelFormat(format!(
                "network takes {} inputs, schema has {m}",
                self.mlp.config.input_size
            )));
        }
        if self.background.is_empty() || self.background.width() != m {
            return Err(Error::ModelFormat(format!(
                "background must be a nonempty set of rows of width {m}"
            )));
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    /// Native features to model inputs, after checking length and finiteness.
    pub fn scale_input(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("input features".into()));
        }
        self.scaler.transform_features(features)
    }

    /// Prediction in the target's native units.
    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        Ok(self.predict_batch(&[features.to_vec()])?[0])
    }

    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let mut data = Vec::with_capacity(rows.len() * self.n_features());
        for r in rows {
            data.extend(self.scale_input(r)?);
        }
        self.predict_rows(&Matrix::new(rows.len(), self.n_features(), data)?)
    }

    pub fn predict_dataset(&self, dataset: &Dataset) -> Result<Vec<f64>> {
        if dataset.schema != self.schema {
            return Err(Error::Schema("dataset schema differs from the model's".into()));
        }
        let rows: Vec<Vec<f64>> = dataset.samples.iter().map(|s| s.features.clone()).collect();
        self.predict_batch(&rows)
    }

    /// Explains a native-unit instance against the embedded background.
    pub fn explain(&self, features: &[f64], method: &ExplainMethod) -> Result<Explanation> {
        self.explain_with_background(features, &self.background, method)
    }

    pub fn explain_with_background(
        &self,
        features: &[f64],
        background: &BackgroundSet,
        method: &ExplainMethod,
    ) -> Result<Explanation> {
        let x = self.scale_input(features)?;
        let mut e = explain(self, &x, background, method)?;
        e.feature_values = features.to_vec();
        Ok(e)
    }

    /// Global summary over a dataset; values reported in native units.
    pub fn summarize(&self, dataset: &Dataset, method: &ExplainMethod) -> Result<GlobalSummary> {
        if dataset.schema != self.schema {
            return Err(Error::Schema("dataset schema differs from the model's".into()));
        }
        let native = dataset.feature_matrix();
        let mut scaled = Vec::with_capacity(native.as_slice().len());
        for r in native.iter_rows() {
            scaled.extend(self.scale_input(r)?);
        }
        let scaled = Matrix::new(native.rows(), native.cols(), scaled)?;
        let s = global_summary(self, &scaled, &self.background, method)?;
        GlobalSummary::from_parts(s.phi, native, s.base_values, s.predictions)
    }

    pub fn summary_report(&self, dataset: &Dataset, method: &ExplainMethod) -> Result<SummaryReport> {
        Ok(SummaryReport {
            target: self.target,
            unit: self.target.unit().to_owned(),
            features: self.schema.names().map(str::to_owned).collect(),
            method: *method,
            model_checksum: self.checksum_hex()?,
            summary: self.summarize(dataset, method)?,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            target: self.target,
            schema: self.schema.clone(),
            scaler: self.scaler.clone(),
            mlp: self.mlp.config.clone(),
            layers: self.mlp.params.weights.iter().map(|w| [w.rows(), w.cols()]).collect(),
            background: BackgroundHeader {
                rows: self.background.len(),
                cols: self.background.width(),
                seed: self.background.seed,
                source_size: self.background.source_size,
            },
            metadata: self.metadata.clone(),
        };
        let header = serde_json::to_vec(&header).map_err(|e| Error::ModelFormat(e.to_string()))?;
        let n_values = self.mlp.params.num_params() + self.background.rows.as_slice().len();

        let mut out = Vec::with_capacity(PREFIX_LEN + header.len() + 8 * n_values + CHECKSUM_LEN);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        let mut put = |values: &[f64]| values.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        for (w, b) in self.mlp.params.weights.iter().zip(&self.mlp.params.biases) {
            put(w.as_slice());
            put(b);
        }
        put(self.background.rows.as_slice());
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < PREFIX_LEN + CHECKSUM_LEN {
            return Err(Error::Checksum);
        }
        let (body, stored) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
        if Sha256::digest(body).as_slice() != stored {
            return Err(Error::Checksum);
        }
        if &body[..8] != MAGIC {
            return Err(Error::ModelFormat("not a model file (bad magic)".into()));
        }
        let version = u32::from_le_bytes(body[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let header_len = u64::from_le_bytes(body[12..20].try_into().expect("8 bytes"));
        let header_end = usize::try_from(header_len)
            .ok()
            .and_then(|l| PREFIX_LEN.checked_add(l))
            .filter(|&end| end <= body.len())
            .ok_or_else(|| Error::ModelFormat("header length exceeds file size".into()))?;
        let header: Header = serde_json::from_slice(&body[PREFIX_LEN..header_end])
            .map_err(|e| Error::ModelFormat(format!("header: {e}")))?;

        let sizes = header.mlp.layer_sizes();
        let expected: Vec<[usize; 2]> = sizes.windows(2).map(|w| [w[1], w[0]]).collect();
        if header.layers != expected {
            return Err(Error::ModelFormat(format!(
                "declared layer shapes {:?} do not chain for {:?}",
                header.layers, sizes
            )));
        }
        let payload = &body[header_end..];
        if payload.len() % 8 != 0 {
            return Err(Error::ModelFormat("payload is not a whole number of f64 values".into()));
        }
        let mut values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let n_params: usize = expected.iter().map(|[r, c]| r * c + r).sum();
        let bg = &header.background;
        let n_bg = bg
            .rows
            .checked_mul(bg.cols)
            .ok_or_else(|| Error::ModelFormat("background shape overflows".into()))?;
        if payload.len() / 8 != n_params.saturating_add(n_bg) {
            return Err(Error::ModelFormat(format!(
                "payload holds {} values, header declares {}",
                payload.len() / 8,
                n_params.saturating_add(n_bg)
            )));
        }

        let mut weights = Vec::with_capacity(expected.len());
        let mut biases = Vec::with_capacity(expected.len());
        for &[r, c] in &expected {
            weights.push(Matrix::new(r, c, values.by_ref().take(r * c).collect())?);
            biases.push(values.by_ref().take(r).collect::<Vec<f64>>());
        }
        if biases.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model biases".into()));
        }
        let rows = Matrix::new(bg.rows, bg.cols, values.collect())?;
        let background = BackgroundSet::new(rows, bg.seed, bg.source_size)?;
        let mlp = Mlp::from_parts(header.mlp, MlpParams { weights, biases })?;
        Self::new(header.target, header.schema, header.scaler, mlp, background, header.metadata)
    }

    /// Hex SHA-256 of the serialized file.
    pub fn checksum_hex(&self) -> Result<String> {
        let bytes = self.to_bytes()?;
        Ok(hex::encode(&bytes[bytes.len() - CHECKSUM_LEN..]))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Checksum stored in the trailer of a serialized model.
pub fn file_checksum_hex(bytes: &[u8]) -> Option<String> {
    (bytes.len() >= CHECKSUM_LEN).then(|| hex::encode(&bytes[bytes.len() - CHECKSUM_LEN..]))
}

impl Predictor for ModelBundle {
    fn input_size(&self) -> usize {
        self.n_features()
    }

    /// Model-space rows in, native-unit predictions out.
    fn predict_rows(&self, rows: &Matrix) -> Result<Vec<f64>> {
        Ok(self
            .mlp
            .predict(rows)?
            .into_iter()
            .map(|y| self.scaler.inverse_target(y))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureDescriptor, FeatureKind};
    use crate::numeric::Rng;

    pub(crate) fn toy_bundle(seed: u64) -> ModelBundle {
        let schema = FeatureSchema::new(vec![
            FeatureDescriptor::new("a", "fraction", FeatureKind::CompositionFraction),
            FeatureDescriptor::new("b", "kN/m3", FeatureKind::Physical),
            FeatureDescriptor::new("c", "fraction", FeatureKind::ParticleSizeFraction),
        ])
        .unwrap();
        let mut rng = Rng::new(seed);
        let mlp = Mlp::init(
            MlpConfig {
                input_size: 3,
                hidden_sizes: vec![6, 4],
                dropout_p: 0.2,
            },
            &mut rng,
        )
        .unwrap();
        let scaler = ScalerParams {
            x_min: vec![0.0, 4.0, 0.1],
            x_max: vec![0.6, 10.0, 0.5],
            y_min: 20.0,
            y_max: 50.0,
        };
        let bg = Matrix::new(2, 3, vec![0.1, 0.5, 0.9, 0.4, 0.2, 0.6]).unwrap();
        ModelBundle::new(
            Target::Friction,
            schema,
            scaler,
            mlp,
            BackgroundSet::new(bg, 7, 10).unwrap(),
            ModelMetadata::default(),
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let b = toy_bundle(1);
        let bytes = b.to_bytes().unwrap();
        let back = ModelBundle::from_bytes(&bytes).unwrap();
        assert_eq!(back, b);
        let mut rng = Rng::new(2);
        for _ in 0..100 {
            let x = [rng.uniform(), 4.0 + 6.0 * rng.uniform(), rng.uniform()];
            assert_eq!(b.predict(&x).unwrap().to_bits(), back.predict(&x).unwrap().to_bits());
        }
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert_eq!(b.checksum_hex().unwrap(), file_checksum_hex(&bytes).unwrap());
    }

    #[test]
    fn truncation_and_corruption_fail_the_checksum() {
        let bytes = toy_bundle(1).to_bytes().unwrap();
        assert!(matches!(ModelBundle::from_bytes(&bytes[..bytes.len() - 1]), Err(Error::Checksum)));
        assert!(matches!(ModelBundle::from_bytes(&bytes[..10]), Err(Error::Checksum)));
        let mut bad = bytes.clone();
        bad[bytes.len() / 2] ^= 0x40;
        assert!(matches!(ModelBundle::from_bytes(&bad), Err(Error::Checksum)));
    }

    fn reseal(mut body: Vec<u8>) -> Vec<u8> {
        let digest = Sha256::digest(&body);
        body.extend_from_slice(&digest);
        body
    }

    #[test]
    fn version_and_magic_are_checked() {
        let bytes = toy_bundle(1).to_bytes().unwrap();
        let mut body = bytes[..bytes.len() - CHECKSUM_LEN].to_vec();
        body[8..12].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(
            ModelBundle::from_bytes(&reseal(body.clone())),
            Err(Error::Version { found: 2, expected: 1 })
        ));
        body[0] = b'X';
        assert!(matches!(ModelBundle::from_bytes(&reseal(body)), Err(Error::ModelFormat(_))));
    }

    #[test]
    fn inconsistent_shapes_rejected() {
        let bytes = toy_bundle(1).to_bytes().unwrap();
        // drop one payload value but keep a valid checksum
        let body = bytes[..bytes.len() - CHECKSUM_LEN - 8].to_vec();
        let err = ModelBundle::from_bytes(&reseal(body)).unwrap_err();
        assert!(err.to_string().contains("payload"), "{err}");
    }

    #[test]
    fn predictions_are_in_native_units() {
        let mut b = toy_bundle(3);
        for w in &mut b.mlp.params.weights {
            w.as_mut_slice().iter_mut().for_each(|v| *v = 0.0);
        }
        *b.mlp.params.biases.last_mut().unwrap() = vec![0.5];
        assert_eq!(b.predict(&[0.3, 5.0, 0.2]).unwrap(), 35.0);
        assert!(b.predict(&[0.3, f64::NAN, 0.2]).is_err());
        assert!(b.predict(&[0.3, 5.0]).is_err());
    }

    #[test]
    fn explanation_reports_native_values_and_is_additive() {
        let b = toy_bundle(4);
        let x = [0.3, 7.5, 0.25];
        let e = b.explain(&x, &ExplainMethod::default()).unwrap();
        assert_eq!(e.feature_values, x.to_vec());
        assert_eq!(e.prediction, b.predict(&x).unwrap());
        e.check_local_accuracy(1e-9).unwrap();
    }
}
