//! Feature schema, dataset container and CSV I/O, Min-Max scaling, and
//! seeded train/test and k-fold partitioning.

mod dataset;
mod scaler;
mod schema;
mod split;

pub use dataset::{CsvOptions, Dataset, Target, WasteSample};
pub use scaler::ScalerParams;
pub use schema::{FeatureDescriptor, FeatureKind, FeatureSchema, FRACTION_UNIT};
pub use split::{kfold_indices, kfold_partition, split_indices, split_train_test, Fold, SplitIndices};

/// Fits Min-Max parameters over every feature and the dataset's active target.
pub fn fit_minmax(dataset: &Dataset) -> crate::Result<ScalerParams> {
    ScalerParams::fit(dataset)
}
