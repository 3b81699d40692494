//! Singleton-optimized conformal prediction.
//!
//! The nonconformity score of a label is the smallest Lagrange multiplier at
//! which the loss-minimizing top-k set of the instance contains that label.
//! For one instance the multipliers at which the optimal size jumps are the
//! edge slopes of the lower convex hull of the points `(Γ_k, g_k)`, where
//! `Γ_k` is the mass of the top-k labels and `g_k = I(k > k0) + λk`. The hull
//! is built with a monotone chain in `O(K)` after sorting.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, synthetic data
//! and the command-line front end live in the `socop` crate.
//!
//! ```
//! use socop_core::{ScoreConfig, socop_score};
//!
//! let probs = [0.202, 0.172, 0.157, 0.143, 0.127, 0.077, 0.057, 0.031, 0.027, 0.007];
//! let cfg = ScoreConfig::new(0.1, 1).unwrap();
//! let top = socop_score(&probs, 0, &cfg).unwrap();
//! assert!((top - 0.495049504950495).abs() < 1e-9);
//! ```
#![no_std]

extern crate alloc;

pub mod conformal;
pub mod dist;
pub mod error;
pub mod hull;
pub mod metrics;
pub mod oracle;
pub mod scoring;
pub mod tuning;

pub use conformal::{calibrate, predict_generic, predict_socop, CalibrationResult, PredictionSet};
pub use dist::{sort_dist, ScoreConfig, SortedDist, SumPolicy};
pub use error::{Error, Result};
pub use hull::{build_hull, socop_score, HullProfile, KappaStep};
pub use metrics::{evaluate, excess_mass_delta, EvalReport, Histogram};
pub use scoring::{
    plugin_set, score_batch_las, score_batch_singleton, score_batch_socop, ProbMatrix,
    ScoreFunction, ScoreMethod, ScoreVector,
};
pub use tuning::{knee_point, sweep_lambda, TradeoffCurve, TradeoffPoint};
