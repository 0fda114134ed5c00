//! Uncertainty quantification for regression and classification.
//!
//! * [`linreg`]: least squares with Student-t prediction intervals.
//! * [`forest`]: random forest classifier whose per-tree distributions feed
//!   [`infotheory`] for a total/aleatoric/epistemic entropy split.
//! * [`bnn`]: Monte Carlo dropout network with a learned noise variance.
//! * [`selective`]: rejection curves and uncertainty thresholds.
//! * [`conformal`]: split conformal prediction sets and intervals.
//! * [`datasets`]: CSV loading, seeded splits and synthetic generators.
//!
//! All randomness flows through [`RandomStream`], addressed by a master seed
//! and a stream index, so results are reproducible regardless of thread count.

#![allow(clippy::needless_range_loop)]

pub mod bnn;
pub mod conformal;
pub mod datasets;
pub mod forest;
pub mod infotheory;
pub mod linreg;
pub mod numerics;
pub mod selective;

pub use bnn::{McPrediction, Mlp, MlpConfig};
pub use conformal::{CalibrationResult, PredictionSet, ScoreKind};
pub use datasets::{Dataset, Targets};
pub use forest::{ForestConfig, RandomForest, TreeNode};
pub use infotheory::{LogBase, UncertaintyDecomposition};
pub use linreg::{OlsFit, PredictionInterval};
pub use numerics::{Matrix, ProbVector, RandomStream};
pub use selective::{CurvePoint, MetricKind, RejectionCurve};
