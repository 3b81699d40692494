//! Repeated random-split evaluation.
//!
//! Each trial draws disjoint tuning, calibration and evaluation subsets,
//! optionally picks `λ` at the knee of a sweep on the tuning subset,
//! calibrates on the calibration subset and evaluates on the rest.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use socop_core::conformal::{calibrate, predict_generic, predict_socop, CalibrationResult};
use socop_core::scoring::{plugin_set, ScoreFunction};
use socop_core::tuning::{default_grid, knee_point, sweep_lambda};
use socop_core::{evaluate, EvalReport, PredictionSet, ProbMatrix, ScoreConfig, ScoreVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Socop,
    Las,
    Singleton,
    Plugin,
    External,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Method::Socop => "socop",
            Method::Las => "las",
            Method::Singleton => "singleton",
            Method::Plugin => "plugin",
            Method::External => "external",
        };
        f.write_str(name)
    }
}

/// A fixed `λ` or `auto` (knee of a sweep on the tuning split).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaChoice {
    Fixed(f64),
    Auto,
}

impl FromStr for LambdaChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(LambdaChoice::Auto);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| format!("`{s}` is neither a number nor `auto`"))?;
        if !v.is_finite() || v < 0.0 {
            return Err(format!("lambda must be finite and >= 0, got {v}"));
        }
        Ok(LambdaChoice::Fixed(v))
    }
}

impl Serialize for LambdaChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LambdaChoice::Fixed(v) => s.serialize_f64(*v),
            LambdaChoice::Auto => s.serialize_str("auto"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SplitSizes {
    pub n_tune: usize,
    pub n_cal: usize,
    pub n_eval: usize,
}

impl SplitSizes {
    pub fn total(&self) -> usize {
        self.n_tune + self.n_cal + self.n_eval
    }
}

impl FromStr for SplitSizes {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let parts = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| format!("`{s}`: {e}"))?;
        match parts[..] {
            [n_tune, n_cal, n_eval] => Ok(SplitSizes {
                n_tune,
                n_cal,
                n_eval,
            }),
            _ => Err(format!("expected n_tune,n_cal,n_eval, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub alpha: f64,
    pub lambda: LambdaChoice,
    pub k0: usize,
    pub method: Method,
    pub splits: SplitSizes,
    pub seed: u64,
    pub trials: usize,
    /// `λ` grid for `auto`.
    pub grid: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            lambda: LambdaChoice::Fixed(0.1),
            k0: 1,
            method: Method::Socop,
            splits: SplitSizes {
                n_tune: 0,
                n_cal: 1000,
                n_eval: 1000,
            },
            seed: 0,
            trials: 1,
            grid: default_grid(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.k0 == 0 {
            return Err(Error::Config("k0 must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.splits.n_eval == 0 {
            return Err(Error::Config("evaluation split is empty".into()));
        }
        if self.method != Method::Plugin && self.splits.n_cal == 0 {
            return Err(Error::Config("calibration split is empty".into()));
        }
        if self.method == Method::Socop && self.lambda == LambdaChoice::Auto {
            if self.splits.n_tune < 2 {
                return Err(Error::Config(
                    "lambda=auto needs a tuning split of at least 2".into(),
                ));
            }
            if self.grid.len() < 3 {
                return Err(Error::Config(
                    "lambda=auto needs a grid of at least 3 values".into(),
                ));
            }
        }
        Ok(())
    }

    fn check_fits(&self, n: usize) -> Result<()> {
        if self.splits.total() > n {
            return Err(Error::Config(format!(
                "splits need {} instances, data has {n}",
                self.splits.total()
            )));
        }
        Ok(())
    }
}

/// Row indices of the three subsets of one trial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub tune: Vec<usize>,
    pub cal: Vec<usize>,
    pub eval: Vec<usize>,
}

/// Disjoint subsets sampled without replacement. The generator is seeded
/// with `cfg.seed` and uses `trial` as its stream, so trials are independent
/// of each other and of the order they run in.
pub fn split_indices(n: usize, cfg: &ExperimentConfig, trial: usize) -> Result<SplitIndices> {
    cfg.check_fits(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(trial as u64);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let s = cfg.splits;
    let eval = idx[s.n_tune + s.n_cal..s.total()].to_vec();
    let cal = idx[s.n_tune..s.n_tune + s.n_cal].to_vec();
    idx.truncate(s.n_tune);
    Ok(SplitIndices {
        tune: idx,
        cal,
        eval,
    })
}

pub struct Splits {
    pub tune: ProbMatrix,
    pub cal: ProbMatrix,
    pub eval: ProbMatrix,
    pub indices: SplitIndices,
}

pub fn split_dataset(data: &ProbMatrix, cfg: &ExperimentConfig, trial: usize) -> Result<Splits> {
    let indices = split_indices(data.len(), cfg, trial)?;
    Ok(Splits {
        tune: data.subset(&indices.tune),
        cal: data.subset(&indices.cal),
        eval: data.subset(&indices.eval),
        indices,
    })
}

/// Calibrated sets for one method on one calibration/evaluation pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub calibration: Option<CalibrationResult>,
    pub sets: Vec<PredictionSet>,
}

/// Per-label external scores for the calibration and evaluation rows.
pub type ExternalPair<'a> = (&'a [Vec<f64>], &'a [Vec<f64>]);

/// Calibrate `method` on `cal` and predict every row of `eval`.
///
/// `external` holds per-label scores for the calibration and evaluation rows
/// (in that order) and is only read for [`Method::External`].
pub fn calibrate_and_predict(
    method: Method,
    lambda: f64,
    k0: usize,
    alpha: f64,
    cal: &ProbMatrix,
    eval: &ProbMatrix,
    external: Option<ExternalPair<'_>>,
) -> Result<MethodOutcome> {
    match method {
        Method::Plugin => {
            let sets = eval
                .rows()
                .iter()
                .map(|row| plugin_set(row, alpha))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            Ok(MethodOutcome {
                calibration: None,
                sets,
            })
        }
        Method::Socop => {
            let cfg = ScoreConfig::new(lambda, k0)?;
            let q = calibrate(&ScoreFunction::Socop(cfg).score_batch(cal)?, alpha)?;
            let sets = eval
                .rows()
                .iter()
                .map(|row| predict_socop(row, &q, &cfg))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            Ok(MethodOutcome {
                calibration: Some(q),
                sets,
            })
        }
        Method::Las | Method::Singleton => {
            let f = if method == Method::Las {
                ScoreFunction::Las
            } else {
                ScoreFunction::Singleton { k0 }
            };
            let q = calibrate(&f.score_batch(cal)?, alpha)?;
            let sets = eval
                .rows()
                .iter()
                .map(|row| Ok(predict_generic(&f.label_scores(row)?, &q)))
                .collect::<Result<Vec<_>>>()?;
            Ok(MethodOutcome {
                calibration: Some(q),
                sets,
            })
        }
        Method::External => {
            let (cal_scores, eval_scores) = external
                .ok_or_else(|| Error::Config("method `external` needs --scores-file".into()))?;
            let labels = cal.labels().ok_or(socop_core::Error::MissingLabels)?;
            if cal_scores.len() != cal.len() || eval_scores.len() != eval.len() {
                return Err(Error::Input(
                    "external scores do not align with the data".into(),
                ));
            }
            let values = cal_scores
                .iter()
                .zip(labels)
                .map(|(row, &y)| {
                    row.get(y)
                        .copied()
                        .ok_or_else(|| Error::Input(format!("external score row lacks label {y}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let q = calibrate(&ScoreVector::external(values)?, alpha)?;
            let sets = eval_scores.iter().map(|s| predict_generic(s, &q)).collect();
            Ok(MethodOutcome {
                calibration: Some(q),
                sets,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    /// `λ` actually used (socop only).
    pub lambda: Option<f64>,
    /// `null` when no calibration happened or the threshold is infinite.
    pub q_hat: Option<f64>,
    pub report: EvalReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
}

impl MeanStderr {
    /// Mean and sample standard deviation over `√n`; 0 for a single value.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        if values.len() < 2 {
            return Self { mean, stderr: 0.0 };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self {
            mean,
            stderr: (var / n).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub trials: usize,
    pub coverage: MeanStderr,
    pub avg_size: MeanStderr,
    pub p_size_gt: MeanStderr,
    pub empty_rate: MeanStderr,
    /// Present when `λ` was chosen per trial.
    pub lambda: Option<MeanStderr>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub per_trial: Vec<TrialRecord>,
    pub aggregate: Aggregate,
}

fn pick_rows(rows: &[Vec<f64>], idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| rows[i].clone()).collect()
}

/// Run one trial of the protocol.
pub fn run_trial(
    data: &ProbMatrix,
    cfg: &ExperimentConfig,
    trial: usize,
    external: Option<&[Vec<f64>]>,
) -> Result<TrialRecord> {
    let splits = split_dataset(data, cfg, trial)?;
    let lambda = match (cfg.method, cfg.lambda) {
        (Method::Socop, LambdaChoice::Fixed(l)) => Some(l),
        (Method::Socop, LambdaChoice::Auto) => {
            let seed = cfg.seed ^ (trial as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
            let curve = sweep_lambda(&splits.tune, cfg.alpha, &cfg.grid, cfg.k0, seed)?;
            Some(knee_point(&curve)?)
        }
        _ => None,
    };
    let ext_rows;
    let external = match external {
        Some(rows) => {
            ext_rows = (
                pick_rows(rows, &splits.indices.cal),
                pick_rows(rows, &splits.indices.eval),
            );
            Some((ext_rows.0.as_slice(), ext_rows.1.as_slice()))
        }
        None => None,
    };
    let outcome = calibrate_and_predict(
        cfg.method,
        lambda.unwrap_or(0.0),
        cfg.k0,
        cfg.alpha,
        &splits.cal,
        &splits.eval,
        external,
    )?;
    let labels = splits
        .eval
        .labels()
        .ok_or(socop_core::Error::MissingLabels)?;
    let report = evaluate(&outcome.sets, labels, cfg.k0)?;
    Ok(TrialRecord {
        trial,
        lambda,
        q_hat: outcome
            .calibration
            .map(|c| c.q_hat)
            .filter(|q| q.is_finite()),
        report,
    })
}

pub fn aggregate(records: &[TrialRecord]) -> Aggregate {
    let mut records: Vec<&TrialRecord> = records.iter().collect();
    records.sort_by_key(|r| r.trial);
    let col = |f: &dyn Fn(&TrialRecord) -> f64| {
        MeanStderr::of(&records.iter().map(|r| f(r)).collect::<Vec<_>>())
    };
    let lambdas: Option<Vec<f64>> = records.iter().map(|r| r.lambda).collect();
    Aggregate {
        trials: records.len(),
        coverage: col(&|r| r.report.coverage),
        avg_size: col(&|r| r.report.avg_size),
        p_size_gt: col(&|r| r.report.p_size_gt),
        empty_rate: col(&|r| r.report.empty_rate),
        lambda: lambdas.map(|l| MeanStderr::of(&l)),
    }
}

/// Full protocol over `cfg.trials` random splits.
pub fn run_experiment(
    data: &ProbMatrix,
    cfg: &ExperimentConfig,
    external: Option<&[Vec<f64>]>,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    cfg.check_fits(data.len())?;
    if data.labels().is_none() {
        return Err(Error::Input("experiment needs a label column".into()));
    }
    if let Some(rows) = external {
        if rows.len() != data.len() {
            return Err(Error::Input(format!(
                "scores file has {} rows, data has {}",
                rows.len(),
                data.len()
            )));
        }
    }
    if cfg.method == Method::External && external.is_none() {
        return Err(Error::Config(
            "method `external` needs --scores-file".into(),
        ));
    }
    if matches!(cfg.method, Method::Socop | Method::Singleton) && cfg.k0 >= data.classes() {
        return Err(Error::Config(format!(
            "k0 = {} must be below the class count {}",
            cfg.k0,
            data.classes()
        )));
    }
    let per_trial = (0..cfg.trials)
        .map(|t| run_trial(data, cfg, t, external))
        .collect::<Result<Vec<_>>>()?;
    let aggregate = aggregate(&per_trial);
    Ok(ExperimentReport {
        config: cfg.clone(),
        per_trial,
        aggregate,
    })
}
