//! Brute-force reference implementations.
//!
//! These evaluate the reduced problem directly and never touch the hull code,
//! so they can be used to check it. They are quadratic in `K` and meant for
//! tests and small diagnostics only.

use alloc::vec::Vec;

use crate::dist::{ScoreConfig, SortedDist};

/// Exhaustive optimal sizes over an `η` grid plus exact per-rank scores.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// `(η, κ(η))` pairs in the order the grid was supplied.
    pub kappa_grid: Vec<(f64, usize)>,
    /// `scores[i - 1]` is the score of the label with rank `i`.
    pub scores: Vec<f64>,
}

fn objectives(k: usize, cfg: &ScoreConfig) -> Vec<f64> {
    (0..=k)
        .map(|size| {
            let over = if size > cfg.k0 { 1.0 } else { 0.0 };
            over + cfg.lambda * size as f64
        })
        .collect()
}

/// `argmin_k I(k > k0) + λk − ηΓ_k` over `k = 0..=K`, smallest `k` on ties.
pub fn oracle_kappa(dist: &SortedDist, cfg: &ScoreConfig, eta: f64) -> usize {
    let gamma = dist.cumulative();
    let g = objectives(dist.len(), cfg);
    argmin_size(&gamma, &g, eta)
}

fn argmin_size(gamma: &[f64], g: &[f64], eta: f64) -> usize {
    let mut best = 0;
    let mut best_val = g[0] - eta * gamma[0];
    for k in 1..gamma.len() {
        let val = g[k] - eta * gamma[k];
        if val < best_val {
            best = k;
            best_val = val;
        }
    }
    best
}

/// `min_{k ≥ rank} max_{j < k} (g_k − g_j) / (Γ_k − Γ_j)`.
///
/// Size `k` first becomes optimal once `η` exceeds every slope from an
/// earlier point, so the score of a rank is the cheapest such entry point
/// among sizes that include it.
pub fn oracle_score(dist: &SortedDist, cfg: &ScoreConfig, rank: usize) -> f64 {
    let gamma = dist.cumulative();
    let g = objectives(dist.len(), cfg);
    score_from_tables(&gamma, &g, rank)
}

fn score_from_tables(gamma: &[f64], g: &[f64], rank: usize) -> f64 {
    assert!(rank >= 1 && rank < gamma.len(), "rank out of range");
    let mut best = f64::INFINITY;
    for k in rank..gamma.len() {
        let mut entry = f64::NEG_INFINITY;
        for j in 0..k {
            let slope = (g[k] - g[j]) / (gamma[k] - gamma[j]);
            if slope > entry {
                entry = slope;
            }
        }
        if entry < best {
            best = entry;
        }
    }
    best
}

/// Scores for every rank and `κ` on the supplied `η` grid.
pub fn oracle_profile(dist: &SortedDist, cfg: &ScoreConfig, etas: &[f64]) -> OracleResult {
    let gamma = dist.cumulative();
    let g = objectives(dist.len(), cfg);
    let kappa_grid = etas
        .iter()
        .map(|&eta| (eta, argmin_size(&gamma, &g, eta)))
        .collect();
    let scores = (1..=dist.len())
        .map(|rank| score_from_tables(&gamma, &g, rank))
        .collect();
    OracleResult { kappa_grid, scores }
}
