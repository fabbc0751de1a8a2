//! Bias detection and multi-level, multi-attribute sample reweighting for
//! tabular binary classification.
//!
//! The pipeline is: load a CSV ([`data`]), find attributes that look unfair
//! under a baseline model ([`detection`]), compute training weights that
//! decouple the label from one or more sensitive attributes ([`reweight`]),
//! fit a weighted logistic regression ([`model`]) and report performance and
//! group-fairness metrics ([`metrics`], [`report`]). [`experiment`] wires
//! the steps together and runs the level-weight grid search.

pub mod data;
pub mod detection;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod report;
pub mod reweight;
pub mod synth;

pub use data::{Dataset, GroupAssignment, LoadOptions, SplitSpec};
pub use detection::{detect, DetectionConfig, DetectionResult};
pub use error::{Error, Result, Stage};
pub use experiment::{grid_search, run_experiment, ExperimentConfig, GridSearchConfig, Method};
pub use metrics::{FairnessReport, PredictionSet};
pub use model::{fit, predict, predict_scores, ModelParams, TrainConfig};
pub use report::{emit_report, ExperimentReport};
pub use reweight::{LevelWeightConfig, SampleWeights};
