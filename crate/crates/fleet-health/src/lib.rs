//! Predictive-maintenance toolkit for railcar fleets.
//!
//! Raw maintenance, railcar, and trip records go in; a ranked fleet
//! health report comes out. The stages, each usable on its own:
//!
//! - [`data`] / [`features`]: CSV ingest, per-component datasets,
//!   cut-off-based failure targets, and engineered usage features.
//! - [`dbscan`]: density clustering with an operational-set shortcut and
//!   cluster-based imputation of missing cells (Gower distance over
//!   mixed numeric/categorical rows).
//! - [`pca`]: standardization, covariance, cyclic-Jacobi
//!   eigendecomposition, and projection onto appended feature columns.
//! - [`adasyn`]: adaptive oversampling of the failure class for
//!   imbalanced training folds.
//! - [`forest`]: per-component random forests with Gini splits and
//!   impurity-based feature importances.
//! - [`metrics`]: ROC/AUC, threshold selection, and cumulative gain
//!   curves.
//! - [`health`]: weighted aggregation of component failure probabilities
//!   into per-railcar health rates and the fleet ranking.
//! - [`synth`]: seeded synthetic fleets with a planted degradation
//!   signal for end-to-end verification.
//! - [`pipeline`] / [`cli`]: the staged end-to-end run behind a
//!   declarative JSON config and one thin binary.
//!
//! See `examples/` for a runnable tour of each capability.

pub mod adasyn;
pub mod cli;
pub mod data;
pub mod dbscan;
pub mod error;
pub mod features;
pub mod forest;
pub mod health;
pub mod matrix;
pub mod metrics;
pub mod pipeline;
pub mod pca;
pub mod split;
pub mod synth;

pub use error::{Error, Result};
