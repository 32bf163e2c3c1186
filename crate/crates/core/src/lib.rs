//! Verification of model preprocessing from prediction explanations, with a
//! locally differentially private release of the training data.
//!
//! A researcher trains a model on a private table and shares only a
//! Laplace-noised copy of that table. A verifier retrains models on the noised
//! copy under every proper and improper preprocessing pipeline, queries them
//! for explanations, and classifies the researcher's model from its own
//! explanations, either with a learned classifier or with a cosine-distance
//! threshold.
//!
//! Modules map onto the stages of that workflow:
//!
//! - [`tabular`]: datasets, CSV I/O, statistics, splitting, synthetic data
//! - [`ldp`]: Laplace sampling and per-feature private release
//! - [`preprocess`]: the preprocessing steps and pipeline enumeration
//! - [`models`]: logistic regression, CART, random forest
//! - [`explain`]: local linear surrogates, Kernel SHAP, exact Shapley values
//! - [`verify`]: response vectors, cosine distance, the two verifiers
//! - [`privattack`]: Hamming-distance membership inference
//! - [`experiment`]: seeded sweeps over privacy budgets and report emission

pub mod error;
pub mod experiment;
pub mod explain;
pub mod ldp;
mod linalg;
pub mod models;
pub mod preprocess;
pub mod privattack;
pub mod seed;
pub mod tabular;
pub mod verify;

pub use error::{Error, ErrorClass, Result};
