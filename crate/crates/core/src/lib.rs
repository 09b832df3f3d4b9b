//! Shear-strength regression for municipal solid waste: a dropout MLP
//! trained with AdamW, evaluated by holdout and k-fold protocols, and
//! explained with exact and kernel Shapley values.
//!
//! ```no_run
//! use shear_core::data::{split_train_test, FeatureSchema};
//! use shear_core::explain::{ExplainMethod, KernelSamples};
//! use shear_core::mlp::MlpConfig;
//! use shear_core::numeric::Rng;
//! use shear_core::synth::{generate, GeneratorSpec};
//! use shear_core::train::{evaluate, train, TrainConfig};
//!
//! let schema = FeatureSchema::default_msw();
//! let data = generate(&GeneratorSpec::default(), &schema, 500, &mut Rng::new(7))?.dataset;
//! let (train_set, test_set) = split_train_test(&data, 0.1, &mut Rng::new(1))?;
//! let (model, _curve) = train(&train_set, &test_set, &MlpConfig::proposed(schema.len()), &TrainConfig::default())?;
//! println!("{:?}", evaluate(&model, &test_set)?);
//! let kernel = ExplainMethod::Kernel { samples: KernelSamples::Sampled(2048), seed: 0 };
//! let why = model.explain(&test_set.samples[0].features, &kernel)?;
//! println!("{:?}", why.phi);
//! # Ok::<(), shear_core::Error>(())
//! ```

pub mod data;
mod error;
pub mod explain;
pub mod mlp;
pub mod model;
pub mod numeric;
pub mod synth;
pub mod train;

pub use error::{Error, Result, Shape};
