//! Batch-process analytics: ingest variable-duration batch trajectories,
//! align them (phase triggers, an indicator variable, or dynamic time
//! warping), extract landmark features, screen predictors with a random
//! forest against a synthetic noise feature, decompose trajectories with
//! functional PCA, and monitor batches with univariate and Hotelling-T²
//! control charts.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`.

pub mod align;
pub mod fpca;
pub mod ingest;
pub mod landmarks;
pub mod linalg;
pub mod plot;
mod scalar;
pub mod screen;
pub mod spc;
pub mod synthetic;

pub use scalar::Real;

use thiserror::Error;

/// Any error raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] ingest::IngestError),
    #[error(transparent)]
    Align(#[from] align::AlignError),
    #[error(transparent)]
    Feature(#[from] landmarks::FeatureError),
    #[error(transparent)]
    Screen(#[from] screen::ScreenError),
    #[error(transparent)]
    Fpca(#[from] fpca::FpcaError),
    #[error(transparent)]
    Spc(#[from] spc::SpcError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub type BatchDataset = ingest::BatchDataset<f64>;
pub type BatchRecord = ingest::BatchRecord<f64>;
pub type Grid = ingest::Grid<f64>;
pub type AlignedBatchSet = align::AlignedBatchSet<f64>;
pub type DtwAlignment = align::DtwAlignment<f64>;
pub type FeatureMatrix = landmarks::FeatureMatrix<f64>;
pub type FpcaModel = fpca::FpcaModel<f64>;
pub type ControlChartModel = spc::ControlChartModel<f64>;
pub type UnivariateChart = spc::UnivariateChart<f64>;
pub type FunctionalMspc = spc::FunctionalMspc<f64>;
pub type Matrix = linalg::Matrix<f64>;
