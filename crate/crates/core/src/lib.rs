//! Prediction of word-level eye-tracking reading measures from lexical
//! features, built around a histogram gradient-boosted decision tree
//! regressor that optimizes MAE directly.
//!
//! The crate is organized in four layers:
//!
//! - [`corpus`]: task data, token annotations and external lexical
//!   resources (frequency lists, norms, bigram counts).
//! - [`features`]: the feature matrix — lengths, positions, categorical
//!   POS/lemma columns, resource lookups and eight bigram association
//!   measures computed from 2x2 contingency tables.
//! - [`gbdt`]: the learner — quantile-binned histograms, leaf-wise tree
//!   growth, L1/L2 objectives, bagging, feature subsampling, missing-value
//!   default directions and early stopping.
//! - [`harness`]: the experiment protocol — sentence-level k-fold CV,
//!   random hyperparameter search, ablations, a stepwise linear baseline
//!   and the official challenge score.

pub mod corpus;
pub mod error;
pub mod features;
pub mod gbdt;
pub mod harness;

pub use corpus::{BigramTable, Dv, Lexicon, SentenceSet, Targets, Token};
pub use error::{Error, ErrorCategory, Result};
pub use features::{AmScores, ContingencyTable, FeatureGroup, FeatureGroupSpec, FeatureMatrix};
pub use gbdt::{Ensemble, FitReport, Objective, TrainConfig};
pub use harness::{AblationReport, CvSplit, ScoreReport, SearchSpace, TuneReport};
