//! Engine for extrapolating street-level bicycle volumes from a sparse set
//! of counting stations.
//!
//! The crate is organised as a pipeline:
//!
//! - [`geo`] and [`counts`]: spatial primitives, stations, and the
//!   hourly-to-daily counting protocol.
//! - [`ingest`]: raw data sources, trip reconstruction from bike-share
//!   availability snapshots, shortest-path routing, and a synthetic city
//!   generator for end-to-end testing.
//! - [`pipeline`]: trip cleaning, feature engineering around station
//!   locations, feature-table assembly, and train-time preprocessing.
//! - [`learners`]: weighted regression models (mean baseline, linear,
//!   decision tree, random forest, gradient boosting, regularized boosting)
//!   plus random hyperparameter search and feature selection.
//! - [`eval`]: error metrics, grouped fold construction, and the evaluation
//!   protocols over held-out stations.
//! - [`analysis`]: grouped permutation feature importance and the
//!   short-duration sampling simulator.
//!
//! Every source of randomness is seeded through [`util::derive_seed`], and
//! parallel sections use [`util::par_map`], so identical inputs and seeds
//! produce identical outputs for any worker count.

pub mod analysis;
pub mod counts;
pub mod error;
pub mod eval;
pub mod geo;
pub mod ingest;
pub mod learners;
pub mod pipeline;
pub mod util;

pub use error::{Error, Result};

/// Version tag written into model dumps and report metadata.
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
