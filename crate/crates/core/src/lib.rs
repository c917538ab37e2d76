//! Confound regression and confound-leakage auditing for tabular machine
//! learning pipelines.
//!
//! The crate is organised around the stages of a two-step
//! "confound removal, then prediction" workflow:
//!
//! - [`data`]: the [`Dataset`] model, CSV ingestion and the stateless or
//!   train-fitted preprocessing steps (one-hot encoding, standardization,
//!   class balancing, splitting, feature shuffling).
//! - [`confound`]: featurewise linear confound regression producing residual
//!   features and confound-predicted features.
//! - [`models`]: a small model zoo (dummy, linear, logistic, CART tree,
//!   random forest, one-hidden-layer MLP).
//! - [`metrics`]: AUCROC, R², Pearson and point-biserial correlation.
//! - [`cv`]: CV-consistent repeated k-fold evaluation, holdout evaluation
//!   and the Bayesian correlated t-test with a region of practical
//!   equivalence.
//! - [`audit`]: target-as-confound construction, simulated confounds, the
//!   five evaluation variants and the leakage verdict.
//! - [`simgen`]: seeded generators for the leakage mechanisms.
//! - [`report`]: markdown / CSV rendering and conditional histograms.

pub mod audit;
pub mod confound;
pub mod cv;
pub mod data;
pub mod error;
pub mod metrics;
pub mod models;
pub mod report;
pub mod rng;
pub mod simgen;

pub use audit::{AuditConfig, AuditReport, AuditVariant, ConfoundSource, Verdict};
pub use confound::{fit_cr, transform_cr, ConfoundModel};
pub use cv::{rope_compare, run_cv, run_holdout, CrOutput, CrVariant, CvScheme, PipelineSpec};
pub use data::{ColumnInfo, ColumnKind, Dataset, TargetKind};
pub use error::{Error, Result};
pub use models::{FittedModel, ModelKind, ModelSpec};
pub use simgen::{SimKind, SimSpec};
