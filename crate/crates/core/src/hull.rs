//! Lower convex hull of `P_k = (Γ_k, g_k)` and the quantities read off it.
//!
//! For a sorted distribution the optimal set size `κ(η)` is a non-decreasing,
//! left-continuous step function of the multiplier `η`. Its range is exactly
//! the set of hull vertex indices `v_0 = 0 < v_1 < … < v_m = K` and it jumps at
//! the edge slopes `η_1 < … < η_m`:
//!
//! ```text
//! κ(η) = 0     for η in [0, η_1]
//!        v_i   for η in (η_i, η_{i+1}]
//!        K     for η > η_m
//! ```
//!
//! The score of the label at rank `i` is the smallest slope `η_j` with
//! `v_j ≥ i`.

use alloc::vec::Vec;

use crate::dist::{prefix_sums, sorted_values_and_rank, ScoreConfig, SortedDist};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HullProfile {
    gamma_prefix: Vec<f64>,
    g: Vec<f64>,
    vertices: Vec<usize>,
    slopes: Vec<f64>,
}

/// `(Γ_i − Γ_j)(g_k − g_i) − (g_i − g_j)(Γ_k − Γ_i)`; non-positive means `i`
/// is not strictly below the chord from `j` to `k`.
#[inline]
fn cross(gamma: &[f64], cfg: &ScoreConfig, j: usize, i: usize, k: usize) -> f64 {
    let (gj, gi, gk) = (cfg.objective(j), cfg.objective(i), cfg.objective(k));
    (gamma[i] - gamma[j]) * (gk - gi) - (gi - gj) * (gamma[k] - gamma[i])
}

/// Vertices and edge slopes of the lower hull over `Γ_0..=Γ_K`.
fn chain(gamma: &[f64], cfg: &ScoreConfig) -> (Vec<usize>, Vec<f64>) {
    let mut vertices: Vec<usize> = Vec::new();
    for idx in 0..gamma.len() {
        while let [.., j, i] = vertices[..] {
            if cross(gamma, cfg, j, i, idx) <= 0.0 {
                vertices.pop();
            } else {
                break;
            }
        }
        vertices.push(idx);
    }
    let slopes = vertices
        .windows(2)
        .map(|w| (cfg.objective(w[1]) - cfg.objective(w[0])) / (gamma[w[1]] - gamma[w[0]]))
        .collect();
    (vertices, slopes)
}

/// Smallest slope whose edge ends at or past `rank`.
fn slope_for_rank(vertices: &[usize], slopes: &[f64], rank: usize) -> Result<f64> {
    let k = *vertices.last().unwrap_or(&0);
    if rank == 0 || rank > k {
        return Err(Error::InvalidRank { rank, k });
    }
    // vertices[0] = 0 < rank, so the first qualifying vertex has an
    // incoming edge.
    let j = vertices.partition_point(|&v| v < rank);
    Ok(slopes[j - 1])
}

/// Monotone chain over the already x-sorted points `P_0..=P_K`.
///
/// Collinear points are dropped, so every retained vertex is a strict corner
/// and ties in `κ` resolve to the smaller size.
pub fn build_hull(dist: &SortedDist, cfg: &ScoreConfig) -> Result<HullProfile> {
    let k = dist.len();
    cfg.check_classes(k)?;
    let gamma_prefix = dist.cumulative();
    let g = (0..=k).map(|size| cfg.objective(size)).collect();
    let (vertices, slopes) = chain(&gamma_prefix, cfg);
    Ok(HullProfile {
        gamma_prefix,
        g,
        vertices,
        slopes,
    })
}

impl HullProfile {
    /// Number of classes `K`.
    pub fn classes(&self) -> usize {
        self.gamma_prefix.len() - 1
    }

    /// `Γ_0..=Γ_K`.
    pub fn gamma_prefix(&self) -> &[f64] {
        &self.gamma_prefix
    }

    /// `g_0..=g_K`.
    pub fn objective(&self) -> &[f64] {
        &self.g
    }

    /// Hull vertex indices, starting at 0 and ending at `K`.
    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    /// Edge slopes `η_1..=η_m`; `slopes[i]` belongs to the edge ending at
    /// `vertices[i + 1]`.
    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn kappa(&self) -> KappaStep<'_> {
        KappaStep { hull: self }
    }

    /// Optimal set size `κ(η)`.
    pub fn kappa_at(&self, eta: f64) -> usize {
        let below = self.slopes.partition_point(|&s| s < eta);
        self.vertices[below]
    }

    /// Score of the label with 1-based `rank`.
    pub fn score_for_rank(&self, rank: usize) -> Result<f64> {
        slope_for_rank(&self.vertices, &self.slopes, rank)
    }

    /// Scores for all ranks `1..=K`, in rank order.
    pub fn rank_scores(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.classes());
        for (w, &slope) in self.vertices.windows(2).zip(&self.slopes) {
            out.extend(core::iter::repeat_n(slope, w[1] - w[0]));
        }
        out
    }

    /// Size of the prediction set at threshold `q`: the largest vertex whose
    /// incoming slope is at most `q`, or 0 when even `η_1 > q`.
    pub fn size_within(&self, q: f64) -> usize {
        let within = self.slopes.partition_point(|&s| s <= q);
        self.vertices[within]
    }
}

/// `κ(η)` viewed as a step function over `η ≥ 0`.
#[derive(Debug, Clone, Copy)]
pub struct KappaStep<'a> {
    hull: &'a HullProfile,
}

impl KappaStep<'_> {
    pub fn at(&self, eta: f64) -> usize {
        self.hull.kappa_at(eta)
    }

    /// Jump locations and the value taken just after each jump.
    pub fn breakpoints(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.hull
            .slopes
            .iter()
            .copied()
            .zip(self.hull.vertices[1..].iter().copied())
    }
}

/// Nonconformity score of `label` (an original class index) for raw
/// probabilities `probs`.
///
/// Equal to [`score_sorted`] on [`sort_dist`] of the same input, but only
/// the sorted values and the label's rank are materialized.
pub fn socop_score(probs: &[f64], label: usize, cfg: &ScoreConfig) -> Result<f64> {
    let (values, rank) = sorted_values_and_rank(probs, label)?;
    cfg.check_classes(values.len())?;
    let gamma = prefix_sums(&values);
    drop(values);
    let (vertices, slopes) = chain(&gamma, cfg);
    slope_for_rank(&vertices, &slopes, rank)
}

/// Same as [`socop_score`] for an already validated distribution.
pub fn score_sorted(dist: &SortedDist, label: usize, cfg: &ScoreConfig) -> Result<f64> {
    let k = dist.len();
    let rank = dist
        .rank_of(label)
        .ok_or(Error::LabelOutOfRange { row: 0, label, k })?;
    build_hull(dist, cfg)?.score_for_rank(rank)
}
