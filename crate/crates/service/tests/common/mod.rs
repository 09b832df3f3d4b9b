#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use shear_core::data::{split_train_test, FeatureSchema, Target};
use shear_core::mlp::MlpConfig;
use shear_core::numeric::Rng;
use shear_core::synth::{generate, GeneratorSpec};
use shear_core::train::{train, TrainConfig};
use shear_service::{router, AppState, LoadedModel, ServiceConfig};
use tower::ServiceExt;

/// Small, quickly trained models for both targets; fully determined by seeds.
pub fn models() -> Vec<LoadedModel> {
    let schema = FeatureSchema::default_msw();
    let data = generate(&GeneratorSpec::default(), &schema, 120, &mut Rng::new(11)).unwrap().dataset;
    Target::ALL
        .iter()
        .map(|&t| {
            let d = data.clone().with_target(t);
            let (tr, te) = split_train_test(&d, 0.1, &mut Rng::new(3)).unwrap();
            let mlp = MlpConfig {
                input_size: schema.len(),
                hidden_sizes: vec![12, 6],
                dropout_p: 0.1,
            };
            let cfg = TrainConfig {
                epochs: 60,
                seed: 5,
                background_size: 4,
                ..TrainConfig::default()
            };
            let (bundle, _) = train(&tr, &te, &mlp, &cfg).unwrap();
            LoadedModel::from_bytes(&bundle.to_bytes().unwrap()).unwrap()
        })
        .collect()
}

pub fn config() -> ServiceConfig {
    ServiceConfig {
        max_batch: 8,
        exact_limit: 17,
        ..ServiceConfig::default()
    }
}

pub fn app_with(models: Vec<LoadedModel>, config: ServiceConfig) -> Router {
    router(Arc::new(AppState::new(models, config).unwrap()), None)
}

pub fn app() -> Router {
    app_with(models(), config())
}

/// The parameter set shown on the web application's input form; features not
/// listed there are filled so the composition sums to one.
pub fn form_features() -> Value {
    json!({
        "food_waste": 0.31,
        "garden_waste": 0.03,
        "paper_cardboard": 0.05,
        "textiles": 0.08,
        "plastics": 0.35,
        "rubber": 0.01,
        "nappies": 0.02,
        "metal": 0.02,
        "glass": 0.02,
        "other": 0.11,
        "size_10_15_mm": 0.15,
        "size_5_10_mm": 0.2,
        "size_2_5_mm": 0.2,
        "size_lt_2_mm": 0.25,
        "fine_fraction": 0.08,
        "moisture_content": 0.45,
        "density_kn_m3": 7.23
    })
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(serde_json::to_vec(&b).unwrap())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, value)
}

pub async fn raw(app: &Router, uri: &str, body: &'static str) -> (StatusCode, Value) {
    let req = Request::builder()
        .method("POST")
        .uri(uri)
        .body(Body::from(body))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}
