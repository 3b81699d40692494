use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use socop::experiment::{LambdaChoice, Method, SplitSizes};
use socop::io::{
    load_probs_csv, load_scores_csv, load_sets_csv, write_curve_csv, write_instance_scores_csv,
    write_probs_csv, write_scores_csv, write_sets_csv,
};
use socop::synth::{generate_rows, Concentration, SyntheticSpec};
use socop::{run_experiment, Error, ExperimentConfig, Result};
use socop_core::conformal::{calibrate, predict_generic, predict_socop, CalibrationResult};
use socop_core::scoring::{plugin_set, ScoreFunction};
use socop_core::tuning::{default_grid, knee_point, sweep_lambda};
use socop_core::{evaluate, ProbMatrix, ScoreConfig, ScoreVector};

/// Singleton-optimized conformal prediction sets.
#[derive(Parser)]
#[command(name = "socop", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit the nonconformity score of every labelled instance
    Score(ScoreArgs),
    /// Emit the conformal threshold q̂ as JSON
    Calibrate(CalibrateArgs),
    /// Emit prediction sets as CSV
    Predict(PredictArgs),
    /// Compare prediction sets with labels and emit an evaluation report
    Evaluate(EvaluateArgs),
    /// Sweep λ, emit the trade-off curve as CSV and report the knee λ
    Sweep(SweepArgs),
    /// Run the repeated random-split protocol and emit a JSON report
    Experiment(ExperimentArgs),
    /// Write synthetic probabilities with labels drawn from each row
    Synth(SynthArgs),
}

#[derive(Args)]
struct MethodArgs {
    #[arg(long, value_enum, default_value_t = Method::Socop)]
    method: Method,
    /// Size penalty λ (a number; `auto` only for `experiment`)
    #[arg(long, default_value = "0.1")]
    lambda: LambdaChoice,
    #[arg(long, default_value_t = 1)]
    k0: usize,
    /// Per-label scores (header s_0..s_{K-1}) for `--method external`
    #[arg(long)]
    scores_file: Option<PathBuf>,
}

impl MethodArgs {
    fn fixed_lambda(&self) -> Result<f64> {
        match self.lambda {
            LambdaChoice::Fixed(l) => Ok(l),
            LambdaChoice::Auto => Err(Error::Config(
                "`--lambda auto` is only supported by `experiment` (use `sweep` to pick one)"
                    .into(),
            )),
        }
    }

    fn external(&self, n: usize) -> Result<Option<Vec<Vec<f64>>>> {
        match (&self.scores_file, self.method) {
            (Some(path), _) => {
                let rows = load_scores_csv(path)?;
                if rows.len() != n {
                    return Err(Error::Input(format!(
                        "{} has {} rows, data has {n}",
                        path.display(),
                        rows.len()
                    )));
                }
                Ok(Some(rows))
            }
            (None, Method::External) => Err(Error::Config(
                "method `external` needs --scores-file".into(),
            )),
            (None, _) => Ok(None),
        }
    }

    fn score_function(&self, classes: usize) -> Result<ScoreFunction> {
        let f = match self.method {
            Method::Socop => {
                let cfg = ScoreConfig::new(self.fixed_lambda()?, self.k0)?;
                cfg.check_classes(classes)?;
                ScoreFunction::Socop(cfg)
            }
            Method::Las => ScoreFunction::Las,
            Method::Singleton => {
                ScoreConfig::new(0.0, self.k0)?.check_classes(classes)?;
                ScoreFunction::Singleton { k0: self.k0 }
            }
            other => {
                return Err(Error::Config(format!(
                    "method `{other}` has no built-in score function"
                )))
            }
        };
        Ok(f)
    }
}

#[derive(Args)]
struct ScoreArgs {
    /// Probability CSV (p_0..p_{K-1}[,label])
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    method: MethodArgs,
    /// Emit all K scores per instance (s_0..s_{K-1}) instead of the labelled one
    #[arg(long)]
    per_label: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Threshold q̂ (`inf` allowed)
    #[arg(long, conflicts_with = "calibration")]
    q_hat: Option<f64>,
    /// JSON written by `calibrate`
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Probability CSV with the label column
    #[arg(long)]
    input: PathBuf,
    /// Sets CSV written by `predict`
    #[arg(long)]
    sets: PathBuf,
    #[arg(long, default_value_t = 1)]
    k0: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    k0: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated λ values; defaults to 0,0.01,…,0.1,0.2,…,1
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Curve CSV destination; the knee λ then goes to stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// n_tune,n_cal,n_eval
    #[arg(long)]
    splits: SplitSizes,
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    classes: usize,
    #[arg(long)]
    n: usize,
    /// Dirichlet concentration: one value or K comma-separated values
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    concentration: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::io_path(p, e))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io_path("<output>", e))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

fn calibration_scores(data: &ProbMatrix, args: &MethodArgs) -> Result<ScoreVector> {
    let labels = data
        .labels()
        .ok_or_else(|| Error::Input("a label column is required".into()))?;
    if args.method == Method::External {
        let rows = args.external(data.len())?.unwrap_or_default();
        let values = rows
            .iter()
            .zip(labels)
            .map(|(r, &y)| r.get(y).copied().unwrap_or(f64::NAN))
            .collect();
        return Ok(ScoreVector::external(values)?);
    }
    Ok(args.score_function(data.classes())?.score_batch(data)?)
}

fn cmd_score(a: ScoreArgs) -> Result<()> {
    let data = load_probs_csv(&a.input)?;
    let f = a.method.score_function(data.classes())?;
    let out = output(a.out.as_deref())?;
    if a.per_label {
        let rows = data
            .rows()
            .iter()
            .map(|r| f.label_scores(r))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        write_scores_csv(out, &rows)
    } else {
        let scores = f.score_batch(&data)?;
        write_instance_scores_csv(out, data.labels().unwrap_or_default(), &scores.values)
    }
}

#[derive(Serialize)]
struct CalibrationOutput {
    method: Method,
    lambda: Option<f64>,
    k0: usize,
    #[serde(flatten)]
    calibration: CalibrationResult,
}

fn cmd_calibrate(a: CalibrateArgs) -> Result<()> {
    check_alpha(a.alpha)?;
    if a.method.method == Method::Plugin {
        return Err(Error::Config("plug-in sets are not calibrated".into()));
    }
    let data = load_probs_csv(&a.input)?;
    let scores = calibration_scores(&data, &a.method)?;
    let calibration = calibrate(&scores, a.alpha)?;
    let lambda = match a.method.method {
        Method::Socop => Some(a.method.fixed_lambda()?),
        _ => None,
    };
    write_json(
        a.out.as_deref(),
        &CalibrationOutput {
            method: a.method.method,
            lambda,
            k0: a.method.k0,
            calibration,
        },
    )
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    check_alpha(a.alpha)?;
    let data = load_probs_csv(&a.input)?;
    let m = &a.method;
    let q = match (a.q_hat, &a.calibration) {
        (Some(q), _) => Some(CalibrationResult::new(q, a.alpha, 0)?),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io_path(path, e))?;
            Some(serde_json::from_str::<CalibrationResult>(&text)?)
        }
        (None, None) => None,
    };
    let need_q = || q.ok_or_else(|| Error::Config("pass --q-hat or --calibration".into()));
    let sets = match m.method {
        Method::Plugin => data
            .rows()
            .iter()
            .map(|r| plugin_set(r, a.alpha))
            .collect::<std::result::Result<Vec<_>, _>>()?,
        Method::Socop => {
            let q = need_q()?;
            let cfg = ScoreConfig::new(m.fixed_lambda()?, m.k0)?;
            cfg.check_classes(data.classes())?;
            data.rows()
                .iter()
                .map(|r| predict_socop(r, &q, &cfg))
                .collect::<std::result::Result<Vec<_>, _>>()?
        }
        Method::External => {
            let q = need_q()?;
            let rows = m.external(data.len())?.unwrap_or_default();
            rows.iter().map(|s| predict_generic(s, &q)).collect()
        }
        Method::Las | Method::Singleton => {
            let q = need_q()?;
            let f = m.score_function(data.classes())?;
            data.rows()
                .iter()
                .map(|r| Ok(predict_generic(&f.label_scores(r)?, &q)))
                .collect::<Result<Vec<_>>>()?
        }
    };
    write_sets_csv(output(a.out.as_deref())?, &sets)
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let data = load_probs_csv(&a.input)?;
    let labels = data
        .labels()
        .ok_or_else(|| Error::Input("a label column is required".into()))?;
    let sets = load_sets_csv(&a.sets)?;
    if let Some((i, _)) = sets
        .iter()
        .enumerate()
        .find(|(_, s)| s.members().iter().any(|&y| y >= data.classes()))
    {
        return Err(Error::Row {
            row: i + 1,
            message: "set member out of range".into(),
        });
    }
    let report = evaluate(&sets, labels, a.k0)?;
    write_json(a.out.as_deref(), &report)
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    check_alpha(a.alpha)?;
    let data = load_probs_csv(&a.input)?;
    ScoreConfig::new(0.0, a.k0)?.check_classes(data.classes())?;
    let grid = a.grid.unwrap_or_else(default_grid);
    let curve = sweep_lambda(&data, a.alpha, &grid, a.k0, a.seed)?;
    let knee = knee_point(&curve)?;
    match &a.out {
        Some(path) => {
            write_curve_csv(output(Some(path))?, &curve)?;
            println!("knee_lambda={knee}");
        }
        None => {
            write_curve_csv(output(None)?, &curve)?;
            eprintln!("knee_lambda={knee}");
        }
    }
    Ok(())
}

fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    let cfg = ExperimentConfig {
        alpha: a.alpha,
        lambda: a.method.lambda,
        k0: a.method.k0,
        method: a.method.method,
        splits: a.splits,
        seed: a.seed,
        trials: a.trials,
        grid: a.grid.unwrap_or_else(default_grid),
    };
    cfg.validate()?;
    let data = load_probs_csv(&a.input)?;
    let external = a.method.external(data.len())?;
    let report = run_experiment(&data, &cfg, external.as_deref())?;
    write_json(a.out.as_deref(), &report)
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let concentration = match a.concentration[..] {
        [c] => Concentration::Symmetric(c),
        _ => Concentration::PerClass(a.concentration),
    };
    let spec = SyntheticSpec {
        classes: a.classes,
        n: a.n,
        concentration,
        seed: a.seed,
    };
    let raw = generate_rows(&spec)?;
    write_probs_csv(output(a.out.as_deref())?, &raw.rows, raw.labels.as_deref())
}

fn main() -> ExitCode {
    // clap would exit with 2 on a bad command line; that code is reserved
    // for bad input data, so argument errors are reported as configuration
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Score(a) => cmd_score(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
