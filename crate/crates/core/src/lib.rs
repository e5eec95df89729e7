//! Cross-cohort tabular classification pipeline.
//!
//! The crate covers the full train/holdout workflow for multi-site feature
//! tables: ingestion and group assembly, PCA + Hotelling T² outlier gating,
//! empirical-Bayes ComBat batch harmonization, Z-score normalization frozen
//! into a reusable transform, Gaussian-mixture binarization of continuous
//! scores, LASSO-CV feature selection, SVM / random-forest / gradient-boost
//! learners with a 2:1:1 soft-voting ensemble, degenerate-aware holdout
//! metrics, paired stratified bootstrap model comparison, and survival
//! statistics. A deterministic synthetic multi-site generator provides the
//! ground truth used by the test suite.

pub mod canonical;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod feature_select;
pub mod labeling;
pub mod learners;
pub mod matrix;
pub mod pipeline;
pub mod preprocess;
pub mod special;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::Matrix;
