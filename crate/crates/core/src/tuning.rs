//! Choosing `λ`: sweep a grid on held-out data and take the knee of the
//! (average size, P(size > k0)) curve.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::conformal::{calibrate, predict_socop};
use crate::dist::ScoreConfig;
use crate::error::{Error, Result};
use crate::metrics::evaluate;
use crate::scoring::{score_batch_socop, ProbMatrix};

/// The grid used for the ImageNet sweeps: 0 to 0.1 in steps of 0.01, then
/// 0.2 to 1.0 in steps of 0.1.
pub fn default_grid() -> Vec<f64> {
    let fine = (0..=10).map(|i| i as f64 / 100.0);
    let coarse = (2..=10).map(|i| i as f64 / 10.0);
    fine.chain(coarse).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TradeoffPoint {
    pub lambda: f64,
    pub avg_size: f64,
    pub p_size_gt: f64,
    pub coverage: f64,
}

/// Curve points ordered by strictly increasing `λ`, all at one `α`.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TradeoffCurve {
    pub points: Vec<TradeoffPoint>,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty"));
    }
    if grid.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::InvalidGrid(
            "entries must be finite and non-negative",
        ));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGrid("entries must be strictly increasing"));
    }
    Ok(())
}

/// Seeded 50/50 partition of `0..n` into (calibration, evaluation).
pub fn half_split(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let eval = idx.split_off(n / 2);
    (idx, eval)
}

/// Run calibrate → predict → evaluate on a seeded half split of `tune` for
/// every `λ` in `grid`.
pub fn sweep_lambda(
    tune: &ProbMatrix,
    alpha: f64,
    grid: &[f64],
    k0: usize,
    seed: u64,
) -> Result<TradeoffCurve> {
    check_grid(grid)?;
    tune.labels().ok_or(Error::MissingLabels)?;
    if tune.len() < 2 {
        return Err(Error::EmptyInput);
    }
    let (cal_idx, eval_idx) = half_split(tune.len(), seed);
    let cal = tune.subset(&cal_idx);
    let eval = tune.subset(&eval_idx);
    let eval_labels = eval.labels().ok_or(Error::MissingLabels)?;

    let mut points = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let cfg = ScoreConfig::new(lambda, k0)?;
        let q = calibrate(&score_batch_socop(&cal, &cfg)?, alpha)?;
        let sets = eval
            .rows()
            .iter()
            .map(|row| predict_socop(row, &q, &cfg))
            .collect::<Result<Vec<_>>>()?;
        let report = evaluate(&sets, eval_labels, k0)?;
        points.push(TradeoffPoint {
            lambda,
            avg_size: report.avg_size,
            p_size_gt: report.p_size_gt,
            coverage: report.coverage,
        });
    }
    Ok(TradeoffCurve { points })
}

const KNEE_TIE: f64 = 1e-12;

fn min_max(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

fn normalize(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (v - lo) / (hi - lo)
    } else {
        0.0
    }
}

/// `λ` of the point farthest from the chord through the curve's endpoints,
/// after min-max normalizing both axes. Near-ties go to the larger `λ`.
pub fn knee_point(curve: &TradeoffCurve) -> Result<f64> {
    let pts = &curve.points;
    if pts.len() < 3 {
        return Err(Error::TooFewPoints {
            found: pts.len(),
            needed: 3,
        });
    }
    let (xlo, xhi) = min_max(pts.iter().map(|p| p.avg_size));
    let (ylo, yhi) = min_max(pts.iter().map(|p| p.p_size_gt));
    let norm: Vec<(f64, f64)> = pts
        .iter()
        .map(|p| {
            (
                normalize(p.avg_size, xlo, xhi),
                normalize(p.p_size_gt, ylo, yhi),
            )
        })
        .collect();

    let (x0, y0) = norm[0];
    let (x1, y1) = norm[norm.len() - 1];
    let (dx, dy) = (x1 - x0, y1 - y0);
    let chord = libm::sqrt(dx * dx + dy * dy);
    let distance = |&(x, y): &(f64, f64)| -> f64 {
        if chord > 0.0 {
            (dx * (y - y0) - dy * (x - x0)).abs() / chord
        } else {
            libm::sqrt((x - x0) * (x - x0) + (y - y0) * (y - y0))
        }
    };

    let mut best = 0;
    let mut best_dist = f64::NEG_INFINITY;
    for (i, p) in norm.iter().enumerate() {
        let d = distance(p);
        if d >= best_dist - KNEE_TIE {
            if d > best_dist {
                best_dist = d;
            }
            best = i;
        }
    }
    Ok(pts[best].lambda)
}
