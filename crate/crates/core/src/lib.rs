//! Surrogate-model toolkit for pyrolysis plant telemetry.
//!
//! The pipeline learns plant sensor outputs (NOx, O2, CO2, reactor
//! temperature, moisture) from machine states with a from-scratch
//! regression random forest, then minimizes the predicted NOx under
//! user-set bands on the other predicted sensors. A deterministic
//! synthetic plant supplies ground-truth telemetry for training and
//! evaluation, and an edge loop emulates periodic on-device retraining
//! of a depth-capped model.
//!
//! Modules:
//! - [`telemetry`]: CSV ingestion, lagged flattening, z-score
//!   normalization.
//! - [`forest`]: CART trees, bagging, prediction, the binary model
//!   format.
//! - [`tuner`]: MSE / R-squared and 5-fold cross-validated grid search.
//! - [`optimizer`]: penalized multi-start plus coordinate pattern
//!   search over surrogate predictions, and the exhaustive grid oracle.
//! - [`plantsim`]: the synthetic plant and its config file format.
//! - [`edge`]: the rolling-window retraining loop.
//! - [`rng`]: the frozen generators behind every stochastic step.
//!
//! Everything stochastic is seeded and reproducible: a fixed seed gives
//! byte-identical telemetry files, model binaries and optimization
//! traces.

pub mod edge;
pub mod forest;
pub mod optimizer;
pub mod plantsim;
pub mod rng;
pub mod telemetry;
pub mod tuner;
