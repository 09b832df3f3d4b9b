use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;
use shear_core::data::{FeatureSchema, Target};
use shear_core::explain::{waterfall, ExplainMethod, KernelSamples};

use crate::api::*;
use crate::{ApiError, AppState, LoadedModel};

const ACCURACY_TOL: f64 = 1e-6;

fn reply<T: Serialize>(state: &AppState, result: Result<T, ApiError>) -> Response {
    match result {
        Ok(body) => Json(body).into_response(),
        Err(e) => {
            tracing::debug!(status = %e.status, "{}", e.message);
            let body = ErrorBody {
                error: e.message,
                models: state.infos.clone(),
            };
            (e.status, Json(body)).into_response()
        }
    }
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))
}

/// Feature map to a schema-ordered vector, rejecting unknown, missing,
/// non-numeric and invalid values.
pub(crate) fn resolve(schema: &FeatureSchema, map: &FeatureMap) -> Result<Vec<f64>, ApiError> {
    if let Some(unknown) = map.keys().find(|k| schema.index_of(k).is_none()) {
        return Err(ApiError::bad_request(format!("unknown feature `{unknown}`")));
    }
    schema
        .features()
        .iter()
        .map(|d| {
            let raw = map
                .get(&d.name)
                .ok_or_else(|| ApiError::bad_request(format!("missing feature `{}`", d.name)))?;
            let v = raw
                .as_f64()
                .ok_or_else(|| ApiError::bad_request(format!("feature `{}` must be a number, got {raw}", d.name)))?;
            d.check(v)
                .map_err(|msg| ApiError::bad_request(format!("feature `{}`: {msg}", d.name)))?;
            Ok(v)
        })
        .collect()
}

fn range_warnings(model: &LoadedModel, x: &[f64]) -> Vec<RangeWarning> {
    let scaler = &model.bundle.scaler;
    scaler
        .out_of_range(x)
        .into_iter()
        .map(|j| RangeWarning {
            target: model.bundle.target,
            feature: model.bundle.schema.features()[j].name.clone(),
            value: x[j],
            fit_min: scaler.x_min[j],
            fit_max: scaler.x_max[j],
        })
        .collect()
}

fn model(state: &AppState, target: Target) -> Result<&LoadedModel, ApiError> {
    state
        .models
        .get(&target)
        .ok_or_else(|| ApiError::unavailable(format!("no {target} model loaded")))
}

pub(crate) async fn health(State(state): State<Arc<AppState>>) -> Response {
    let body = HealthResponse {
        status: "ok",
        models: state.infos.clone(),
    };
    reply(&state, Ok(body))
}

pub(crate) async fn schema(State(state): State<Arc<AppState>>) -> Response {
    let features = state
        .schema
        .features()
        .iter()
        .enumerate()
        .map(|(j, d)| {
            let (lo, hi) = d.bounds();
            SchemaFeature {
                name: d.name.clone(),
                unit: d.unit.clone(),
                kind: d.kind,
                bounds: (lo, hi.is_finite().then_some(hi)),
                fit_range: state
                    .models
                    .iter()
                    .map(|(t, m)| (*t, (m.bundle.scaler.x_min[j], m.bundle.scaler.x_max[j])))
                    .collect(),
            }
        })
        .collect();
    let body = SchemaResponse {
        features,
        models: state.infos.clone(),
    };
    reply(&state, Ok(body))
}

fn predict_inner(state: &AppState, body: &[u8]) -> Result<PredictResponse, ApiError> {
    let req: PredictRequest = parse(body)?;
    let rows = match (req.features, req.batch) {
        (Some(one), None) => vec![one],
        (None, Some(batch)) => {
            if batch.is_empty() {
                return Err(ApiError::bad_request("batch is empty"));
            }
            if batch.len() > state.config.max_batch {
                return Err(ApiError::too_large(format!(
                    "batch of {} rows exceeds the limit of {}",
                    batch.len(),
                    state.config.max_batch
                )));
            }
            batch
        }
        _ => return Err(ApiError::bad_request("request needs exactly one of `features` or `batch`")),
    };
    let friction = model(state, Target::Friction)?;
    let cohesion = model(state, Target::Cohesion)?;
    let resolved = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            resolve(&state.schema, r).map_err(|e| ApiError {
                message: if rows.len() > 1 {
                    format!("batch row {i}: {}", e.message)
                } else {
                    e.message
                },
                ..e
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let phi = friction.bundle.predict_batch(&resolved)?;
    let coh = cohesion.bundle.predict_batch(&resolved)?;
    let predictions = resolved
        .into_iter()
        .zip(phi.into_iter().zip(coh))
        .map(|(x, (f, c))| {
            let mut out_of_range = range_warnings(friction, &x);
            out_of_range.extend(range_warnings(cohesion, &x));
            Prediction {
                resolved_features: x,
                friction_deg: f,
                cohesion_kpa: c,
                out_of_range,
            }
        })
        .collect();
    Ok(PredictResponse {
        predictions,
        models: state.infos.clone(),
    })
}

pub(crate) async fn predict(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let worker = state.clone();
    let result = tokio::task::spawn_blocking(move || predict_inner(&worker, &body))
        .await
        .unwrap_or_else(|e| Err(ApiError::internal(format!("prediction task failed: {e}"))));
    reply(&state, result)
}

pub(crate) fn explain_method(state: &AppState, req: &ExplainRequest) -> Result<ExplainMethod, ApiError> {
    let m = state.schema.len();
    match req.method {
        MethodName::Exact => {
            if req.n_samples.is_some() {
                return Err(ApiError::bad_request("n_samples only applies to the kernel method"));
            }
            Ok(ExplainMethod::Exact {
                limit: state.config.exact_limit,
            })
        }
        MethodName::Kernel => {
            let n = req.n_samples.unwrap_or(state.config.default_kernel_samples);
            if n < 2 * m {
                return Err(ApiError::bad_request(format!(
                    "kernel SHAP with {m} features needs n_samples >= {}, got {n}",
                    2 * m
                )));
            }
            Ok(ExplainMethod::Kernel {
                samples: KernelSamples::Sampled(n),
                seed: req.seed.unwrap_or(0),
            })
        }
    }
}

fn explain_inner(state: &AppState, body: &[u8]) -> Result<ExplainResponse, ApiError> {
    let req: ExplainRequest = parse(body)?;
    let loaded = model(state, req.target)?;
    let x = resolve(&state.schema, &req.features)?;
    let method = explain_method(state, &req)?;
    let e = loaded.bundle.explain(&x, &method)?;
    e.check_local_accuracy(ACCURACY_TOL)
        .map_err(|err| ApiError::internal(err.to_string()))?;
    let names: Vec<&str> = state.schema.names().collect();
    let attributions = names
        .iter()
        .zip(e.feature_values.iter().zip(&e.phi))
        .map(|(n, (&value, &phi))| Attribution {
            feature: (*n).to_owned(),
            value,
            phi,
        })
        .collect();
    let steps = waterfall(&e)
        .into_iter()
        .map(|s| WaterfallEntry {
            feature: s.feature.map(|j| names[j].to_owned()),
            phi: s.phi,
            cumulative: s.cumulative,
        })
        .collect();
    let bg = &loaded.bundle.background;
    Ok(ExplainResponse {
        target: req.target,
        unit: req.target.unit().to_owned(),
        out_of_range: range_warnings(loaded, &x),
        resolved_features: x,
        base_value: e.base_value,
        prediction: e.prediction,
        local_accuracy_error: e.local_accuracy_error(),
        attributions,
        waterfall: steps,
        method: e.method,
        background: BackgroundInfo {
            rows: bg.len(),
            seed: bg.seed,
            source_size: bg.source_size,
        },
        models: state.infos.clone(),
    })
}

pub(crate) async fn explain(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let worker = state.clone();
    let result = tokio::task::spawn_blocking(move || explain_inner(&worker, &body))
        .await
        .unwrap_or_else(|e| Err(ApiError::internal(format!("explanation task failed: {e}"))));
    reply(&state, result)
}

pub(crate) async fn summary(State(state): State<Arc<AppState>>, Path(target): Path<String>) -> Response {
    let result = target
        .parse::<Target>()
        .map_err(|e| ApiError::not_found(e.to_string()))
        .and_then(|t| {
            state
                .summaries
                .get(&t)
                .ok_or_else(|| ApiError::not_found(format!("no {t} summary loaded")))
        })
        .map(|report| json!({ "report": report, "models": state.infos }));
    reply(&state, result)
}

pub(crate) async fn not_found(State(state): State<Arc<AppState>>) -> Response {
    reply::<()>(&state, Err(ApiError::not_found("no such endpoint")))
}
