//! Gradient-boosted event classification for PMU power-system data with
//! exact interventional Shapley attributions, evaluation reports and SVG
//! explanation plots.
//!
//! The numeric modules are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the 64-bit instantiation used by the pipeline.

pub mod dataset;
pub mod eval;
pub mod gbt;
pub mod preprocess;
mod scalar;
pub mod shap;
pub mod viz;

pub use scalar::{logit, sigmoid, Scalar};

pub type Table = dataset::EventTable<f64>;
pub type Ensemble = gbt::TreeEnsemble<f64>;
pub type Explanation = shap::ShapExplanation<f64>;
pub type Scaler = preprocess::ScalerParams<f64>;
pub type Correlation = eval::CorrelationMatrix<f64>;
