//! Latent VAR extraction by oblique projection.
//!
//! A `p`-dimensional series is split into `ℓ` dynamic latent variables that
//! follow a VAR(s) and a serially independent static part. The weights that
//! define the latent scores are chosen to maximize one-step predictability.

pub mod benchmark;
pub mod data;
pub mod datagen;
pub mod error;
pub mod estimation;
pub mod io;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod selection;

pub use data::TimeSeries;
pub use error::{Error, Result};
pub use estimation::{fit, fit_oneshot, FitOptions, FitReport, Variant};
pub use metrics::{avg_correlation, d_distance};
pub use model::PredVarModel;
pub use numerics::{Matrix, Vector};
