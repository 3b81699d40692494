//! File formats, synthetic data and the repeated-split evaluation protocol
//! around [`socop_core`]. The `socop` binary is a thin front end over this
//! crate.

pub mod error;
pub mod experiment;
pub mod io;
pub mod synth;

pub use error::{Error, Result};
pub use experiment::{
    run_experiment, split_dataset, ExperimentConfig, ExperimentReport, LambdaChoice, Method,
    SplitSizes,
};
pub use io::{load_probs_csv, load_scores_csv};
pub use synth::{generate_synthetic, SyntheticSpec};
