//! HTTP front end for trained shear-strength models.
//!
//! Routes, all JSON:
//!
//! | method | path                        |                                    |
//! |--------|-----------------------------|------------------------------------|
//! | GET    | `/api/v1/health`            | status and loaded models           |
//! | GET    | `/api/v1/schema`            | feature descriptors and fit ranges |
//! | POST   | `/api/v1/predict`           | one instance or a batch            |
//! | POST   | `/api/v1/explain`           | Shapley attribution of one target  |
//! | GET    | `/api/v1/summary/{target}`  | precomputed global summary         |
//!
//! Every body, errors included, carries a `models` map with the checksum of
//! each loaded model file.

pub mod api;
mod error;
mod handlers;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::routing::{get, post};
use axum::Router;
use shear_core::data::{FeatureSchema, Target};
use shear_core::explain::{DEFAULT_EXACT_LIMIT, DEFAULT_KERNEL_SAMPLES};
use shear_core::model::{file_checksum_hex, ModelBundle, SummaryReport};
use tower_http::services::ServeDir;

pub use error::{ApiError, StartupError};

use api::{ModelInfo, Models};

pub const DEFAULT_MAX_BATCH: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    /// Largest accepted `batch` in a predict request.
    pub max_batch: usize,
    /// Largest feature count for which exact Shapley values are computed.
    pub exact_limit: usize,
    pub default_kernel_samples: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            max_batch: DEFAULT_MAX_BATCH,
            exact_limit: DEFAULT_EXACT_LIMIT,
            default_kernel_samples: DEFAULT_KERNEL_SAMPLES,
        }
    }
}

#[derive(Debug)]
pub struct LoadedModel {
    pub bundle: ModelBundle,
    pub info: ModelInfo,
}

impl LoadedModel {
    /// Wraps a bundle whose file bytes are `bytes`.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StartupError> {
        let bundle = ModelBundle::from_bytes(bytes)?;
        let checksum = file_checksum_hex(bytes).expect("a decoded model has a trailer");
        Ok(Self::with_checksum(bundle, checksum))
    }

    pub fn from_bundle(bundle: ModelBundle) -> Result<Self, StartupError> {
        let checksum = bundle.checksum_hex()?;
        Ok(Self::with_checksum(bundle, checksum))
    }

    fn with_checksum(bundle: ModelBundle, checksum: String) -> Self {
        let info = ModelInfo {
            target: bundle.target,
            unit: bundle.target.unit().to_owned(),
            checksum,
            hidden_sizes: bundle.mlp.config.hidden_sizes.clone(),
            dropout_p: bundle.mlp.config.dropout_p,
            background_rows: bundle.background.len(),
            train_samples: bundle.metadata.train_samples,
        };
        Self { bundle, info }
    }

    pub fn load(path: &Path) -> Result<Self, StartupError> {
        let bytes = std::fs::read(path).map_err(|e| StartupError::Read(path.to_owned(), e))?;
        Self::from_bytes(&bytes).map_err(|e| StartupError::Model(path.to_owned(), Box::new(e)))
    }
}

/// Immutable state shared by all requests.
#[derive(Debug)]
pub struct AppState {
    pub config: ServiceConfig,
    pub schema: FeatureSchema,
    pub models: BTreeMap<Target, LoadedModel>,
    pub summaries: BTreeMap<Target, SummaryReport>,
    pub infos: Models,
}

impl AppState {
    /// Checks that the models agree on a schema and that each sits under its
    /// own target.
    pub fn new(models: Vec<LoadedModel>, config: ServiceConfig) -> Result<Self, StartupError> {
        let mut map = BTreeMap::new();
        let mut schema: Option<FeatureSchema> = None;
        for m in models {
            match &schema {
                Some(s) if *s != m.bundle.schema => return Err(StartupError::SchemaMismatch),
                Some(_) => {}
                None => schema = Some(m.bundle.schema.clone()),
            }
            let target = m.bundle.target;
            if map.insert(target, m).is_some() {
                return Err(StartupError::DuplicateTarget(target));
            }
        }
        let schema = schema.ok_or(StartupError::NoModels)?;
        if config.max_batch == 0 {
            return Err(StartupError::Config("max batch must be >= 1".into()));
        }
        let infos = map.iter().map(|(t, m)| (*t, m.info.clone())).collect();
        Ok(Self {
            config,
            schema,
            models: map,
            summaries: BTreeMap::new(),
            infos,
        })
    }

    /// Attaches a summary; it must describe a loaded model.
    pub fn add_summary(&mut self, report: SummaryReport) -> Result<(), StartupError> {
        let model = self.models.get(&report.target).ok_or(StartupError::SummaryTarget(report.target))?;
        if report.model_checksum != model.info.checksum {
            return Err(StartupError::SummaryChecksum(report.target));
        }
        self.summaries.insert(report.target, report);
        Ok(())
    }

    pub fn load_summary(&mut self, path: &Path) -> Result<(), StartupError> {
        let text = std::fs::read_to_string(path).map_err(|e| StartupError::Read(path.to_owned(), e))?;
        let report: SummaryReport =
            serde_json::from_str(&text).map_err(|e| StartupError::Summary(path.to_owned(), e.to_string()))?;
        self.add_summary(report)
    }
}

/// The API routes, plus static files from `ui_dir` for every other path.
pub fn router(state: Arc<AppState>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/v1/health", get(handlers::health))
        .route("/api/v1/schema", get(handlers::schema))
        .route("/api/v1/predict", post(handlers::predict))
        .route("/api/v1/explain", post(handlers::explain))
        .route("/api/v1/summary/{target}", get(handlers::summary));
    match ui_dir {
        Some(dir) => api
            .route("/api/{*rest}", get(handlers::not_found).post(handlers::not_found))
            .fallback_service(ServeDir::new(dir))
            .with_state(state),
        None => api.fallback(handlers::not_found).with_state(state),
    }
}

/// Serves until the process receives Ctrl-C.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
