#![no_main]
use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use libfuzzer_sys::fuzz_target;
use shear_core::data::{split_train_test, FeatureSchema, Target};
use shear_core::mlp::MlpConfig;
use shear_core::numeric::Rng;
use shear_core::synth::{generate, GeneratorSpec};
use shear_core::train::{train, TrainConfig};
use shear_service::{router, AppState, LoadedModel, ServiceConfig};
use tower::ServiceExt;

fn app() -> &'static (tokio::runtime::Runtime, Router) {
    static APP: OnceLock<(tokio::runtime::Runtime, Router)> = OnceLock::new();
    APP.get_or_init(|| {
        let schema = FeatureSchema::default_msw();
        let data = generate(&GeneratorSpec::default(), &schema, 40, &mut Rng::new(1)).unwrap().dataset;
        let models = Target::ALL
            .iter()
            .map(|&t| {
                let d = data.clone().with_target(t);
                let (tr, te) = split_train_test(&d, 0.2, &mut Rng::new(1)).unwrap();
                let mlp = MlpConfig {
                    input_size: schema.len(),
                    hidden_sizes: vec![4],
                    dropout_p: 0.0,
                };
                let cfg = TrainConfig {
                    epochs: 2,
                    background_size: 2,
                    ..TrainConfig::default()
                };
                LoadedModel::from_bundle(train(&tr, &te, &mlp, &cfg).unwrap().0).unwrap()
            })
            .collect();
        // Small limits keep each iteration cheap.
        let config = ServiceConfig {
            max_batch: 16,
            exact_limit: 8,
            default_kernel_samples: 64,
        };
        let state = AppState::new(models, config).unwrap();
        let runtime = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        (runtime, router(Arc::new(state), None))
    })
}

fuzz_target!(|data: &[u8]| {
    let Some((&route, body)) = data.split_first() else {
        return;
    };
    let uri = if route & 1 == 0 { "/api/v1/predict" } else { "/api/v1/explain" };
    let (runtime, router) = app();
    let request = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_vec()))
        .unwrap();
    let status = runtime.block_on(router.clone().oneshot(request)).unwrap().status();
    assert_ne!(status, StatusCode::INTERNAL_SERVER_ERROR);
});
