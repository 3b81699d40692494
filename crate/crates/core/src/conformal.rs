//! Split-conformal calibration and prediction sets.

use alloc::vec::Vec;

use crate::dist::{ScoreConfig, SortedDist};
use crate::error::{Error, Result};
use crate::hull::build_hull;
use crate::scoring::ScoreVector;

/// Conformal threshold `q̂` for level `α` from `n` calibration scores.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CalibrationResult {
    /// `+INF` when the calibration set is too small for the requested level.
    /// JSON renders that as `null`.
    #[cfg_attr(feature = "serde", serde(with = "extended_real"))]
    pub q_hat: f64,
    pub alpha: f64,
    pub n: usize,
}

impl CalibrationResult {
    pub fn new(q_hat: f64, alpha: f64, n: usize) -> Result<Self> {
        check_alpha(alpha)?;
        if q_hat.is_nan() {
            return Err(Error::InvalidScore {
                index: 0,
                value: q_hat,
            });
        }
        Ok(Self { q_hat, alpha, n })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

/// 1-based rank `⌈(1−α)(n+1)⌉` of the calibration score used as threshold.
pub fn quantile_rank(n: usize, alpha: f64) -> usize {
    let target = (1.0 - alpha) * (n as f64 + 1.0);
    // absorb rounding when the product is an integer in exact arithmetic
    let rank = libm::ceil(target - 1e-9 * target.max(1.0));
    (rank as usize).max(1)
}

/// `q̂` = the `⌈(1−α)(n+1)⌉`-th smallest score, or `+INF` past `n`.
pub fn calibrate(scores: &ScoreVector, alpha: f64) -> Result<CalibrationResult> {
    check_alpha(alpha)?;
    let n = scores.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if let Some((index, &value)) = scores.values.iter().enumerate().find(|(_, v)| v.is_nan()) {
        return Err(Error::InvalidScore { index, value });
    }
    let rank = quantile_rank(n, alpha);
    let q_hat = if rank > n {
        f64::INFINITY
    } else {
        let mut buf = scores.values.clone();
        let (_, nth, _) = buf.select_nth_unstable_by(rank - 1, f64::total_cmp);
        *nth
    };
    Ok(CalibrationResult { q_hat, alpha, n })
}

/// Labels of one prediction set, as original class indices in ascending
/// order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PredictionSet {
    members: Vec<usize>,
}

impl PredictionSet {
    pub fn new(mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        Self { members }
    }

    /// The `size` most probable labels of `row`.
    pub fn top_k(row: &SortedDist, size: usize) -> Self {
        Self::new(row.perm()[..size].to_vec())
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, label: usize) -> bool {
        self.members.binary_search(&label).is_ok()
    }

    pub fn is_subset(&self, other: &PredictionSet) -> bool {
        self.members.iter().all(|&m| other.contains(m))
    }
}

/// Walk the hull edges in order and keep the last vertex whose incoming
/// slope is `≤ q̂`. The result is empty when `η_1 > q̂`.
pub fn predict_socop(
    row: &SortedDist,
    q: &CalibrationResult,
    cfg: &ScoreConfig,
) -> Result<PredictionSet> {
    let hull = build_hull(row, cfg)?;
    Ok(PredictionSet::top_k(row, hull.size_within(q.q_hat)))
}

/// `{ y : score(y) ≤ q̂ }`.
pub fn predict_generic(per_label_scores: &[f64], q: &CalibrationResult) -> PredictionSet {
    PredictionSet {
        members: per_label_scores
            .iter()
            .enumerate()
            .filter(|(_, &s)| s <= q.q_hat)
            .map(|(y, _)| y)
            .collect(),
    }
}

#[cfg(feature = "serde")]
mod extended_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}
