//! Batch scoring over datasets, the baseline scores and the plug-in sets.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::conformal::PredictionSet;
use crate::dist::{ScoreConfig, SortedDist, SumPolicy};
use crate::error::{Error, Result};
use crate::hull::build_hull;

/// `N` validated probability rows over `K` classes, optionally labelled.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    classes: usize,
    rows: Vec<SortedDist>,
    labels: Option<Vec<usize>>,
}

impl ProbMatrix {
    /// Validate raw rows. Errors carry the offending row index.
    pub fn new(rows: &[Vec<f64>], labels: Option<Vec<usize>>) -> Result<Self> {
        Self::with_policy(rows, labels, SumPolicy::Tolerant)
    }

    pub fn with_policy(
        rows: &[Vec<f64>],
        labels: Option<Vec<usize>>,
        policy: SumPolicy,
    ) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyInput)?;
        let classes = first.len();
        let mut sorted = Vec::with_capacity(rows.len());
        for (row, probs) in rows.iter().enumerate() {
            if probs.len() != classes {
                return Err(Error::RaggedRow {
                    row,
                    expected: classes,
                    found: probs.len(),
                });
            }
            let dist = SortedDist::with_policy(probs, policy).map_err(|e| Error::InvalidRow {
                row,
                source: Box::new(e),
            })?;
            sorted.push(dist);
        }
        Self::from_sorted(sorted, labels)
    }

    pub fn from_sorted(rows: Vec<SortedDist>, labels: Option<Vec<usize>>) -> Result<Self> {
        let classes = rows.first().ok_or(Error::EmptyInput)?.len();
        if let Some((row, found)) = rows
            .iter()
            .enumerate()
            .find(|(_, d)| d.len() != classes)
            .map(|(i, d)| (i, d.len()))
        {
            return Err(Error::RaggedRow {
                row,
                expected: classes,
                found,
            });
        }
        if let Some(labels) = &labels {
            if labels.len() != rows.len() {
                return Err(Error::LengthMismatch {
                    left: rows.len(),
                    right: labels.len(),
                });
            }
            if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
                return Err(Error::LabelOutOfRange {
                    row,
                    label,
                    k: classes,
                });
            }
        }
        Ok(Self {
            classes,
            rows,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn rows(&self) -> &[SortedDist] {
        &self.rows
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    fn require_labels(&self) -> Result<&[usize]> {
        self.labels.as_deref().ok_or(Error::MissingLabels)
    }

    /// Rows at `indices`, in that order. Indices must be in range.
    pub fn subset(&self, indices: &[usize]) -> ProbMatrix {
        ProbMatrix {
            classes: self.classes,
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ScoreMethod {
    Socop,
    Las,
    Singleton,
    External,
}

/// Calibration scores, one per instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub values: Vec<f64>,
    pub method: ScoreMethod,
}

impl ScoreVector {
    /// Wrap scores computed elsewhere. `+INF` is allowed, NaN and `-INF` are not.
    pub fn external(values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| v.is_nan() || **v == f64::NEG_INFINITY)
        {
            return Err(Error::InvalidScore { index, value });
        }
        Ok(Self {
            values,
            method: ScoreMethod::External,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A score family that can be evaluated from the probabilities alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoreFunction {
    Socop(ScoreConfig),
    /// `1 − p̂(y|x)`.
    Las,
    /// `I(rank > k0) / (1 − Γ_{k0})`.
    Singleton {
        k0: usize,
    },
}

impl ScoreFunction {
    pub fn method(&self) -> ScoreMethod {
        match self {
            ScoreFunction::Socop(_) => ScoreMethod::Socop,
            ScoreFunction::Las => ScoreMethod::Las,
            ScoreFunction::Singleton { .. } => ScoreMethod::Singleton,
        }
    }

    /// Score of one original label.
    pub fn score(&self, row: &SortedDist, label: usize) -> Result<f64> {
        let k = row.len();
        let rank = row
            .rank_of(label)
            .ok_or(Error::LabelOutOfRange { row: 0, label, k })?;
        match self {
            ScoreFunction::Socop(cfg) => build_hull(row, cfg)?.score_for_rank(rank),
            ScoreFunction::Las => Ok(1.0 - row.values()[rank - 1]),
            ScoreFunction::Singleton { k0 } => singleton_score(row, *k0, rank),
        }
    }

    /// Scores of every label, indexed by original label.
    pub fn label_scores(&self, row: &SortedDist) -> Result<Vec<f64>> {
        let k = row.len();
        let by_rank: Vec<f64> = match self {
            ScoreFunction::Socop(cfg) => build_hull(row, cfg)?.rank_scores(),
            ScoreFunction::Las => row.values().iter().map(|p| 1.0 - p).collect(),
            ScoreFunction::Singleton { k0 } => (1..=k)
                .map(|rank| singleton_score(row, *k0, rank))
                .collect::<Result<_>>()?,
        };
        let mut out = alloc::vec![0.0; k];
        for (pos, &label) in row.perm().iter().enumerate() {
            out[label] = by_rank[pos];
        }
        Ok(out)
    }

    /// Calibration scores of the labelled rows of `data`.
    pub fn score_batch(&self, data: &ProbMatrix) -> Result<ScoreVector> {
        let labels = data.require_labels()?;
        if let ScoreFunction::Singleton { k0 } = self {
            ScoreConfig::new(0.0, *k0)?.check_classes(data.classes())?;
        }
        let values = data
            .rows()
            .iter()
            .zip(labels)
            .map(|(row, &label)| self.score(row, label))
            .collect::<Result<Vec<_>>>()?;
        Ok(ScoreVector {
            values,
            method: self.method(),
        })
    }
}

fn singleton_score(row: &SortedDist, k0: usize, rank: usize) -> Result<f64> {
    let k = row.len();
    if k0 == 0 || k0 >= k {
        return Err(Error::InvalidK0 { k0, k });
    }
    if rank <= k0 {
        return Ok(0.0);
    }
    // same prefix sums and the same division as the hull edge from k0 to K
    let gamma = row.cumulative();
    Ok(1.0 / (gamma[k] - gamma[k0]))
}

pub fn score_batch_socop(data: &ProbMatrix, cfg: &ScoreConfig) -> Result<ScoreVector> {
    ScoreFunction::Socop(*cfg).score_batch(data)
}

pub fn score_batch_las(data: &ProbMatrix) -> Result<ScoreVector> {
    ScoreFunction::Las.score_batch(data)
}

pub fn score_batch_singleton(data: &ProbMatrix, k0: usize) -> Result<ScoreVector> {
    ScoreFunction::Singleton { k0 }.score_batch(data)
}

/// Smallest top-k set whose mass reaches `1 − α`. Never empty.
///
/// This baseline carries no coverage guarantee and is never calibrated.
pub fn plugin_set(row: &SortedDist, alpha: f64) -> Result<PredictionSet> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let target = 1.0 - alpha;
    let gamma = row.cumulative();
    let size = (1..=row.len())
        .find(|&k| gamma[k] >= target)
        .unwrap_or(row.len());
    Ok(PredictionSet::top_k(row, size))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::sort_dist;
    use alloc::vec;

    const TEN_CLASS: [f64; 10] = [
        0.202, 0.172, 0.157, 0.143, 0.127, 0.077, 0.057, 0.031, 0.027, 0.007,
    ];

    fn matrix(rows: &[&[f64]], labels: &[usize]) -> ProbMatrix {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        ProbMatrix::new(&rows, Some(labels.to_vec())).unwrap()
    }

    #[test]
    fn socop_batch_matches_oracle_value() {
        let data = matrix(&[&TEN_CLASS, &TEN_CLASS], &[0, 0]);
        let s = score_batch_socop(&data, &ScoreConfig::new(0.1, 1).unwrap()).unwrap();
        assert_eq!(s.method, ScoreMethod::Socop);
        assert!((s.values[0] - 0.49504950495049505).abs() < 1e-9);
        assert_eq!(s.values[0], s.values[1]);
    }

    #[test]
    fn socop_zero_lambda_top_label_scores_zero() {
        let data = matrix(&[&[0.2, 0.5, 0.3]], &[1]);
        let s = score_batch_socop(&data, &ScoreConfig::default()).unwrap();
        assert_eq!(s.values, vec![0.0]);
    }

    #[test]
    fn las_scores() {
        let data = matrix(
            &[&[0.7, 0.2, 0.1], &[0.7, 0.2, 0.1], &[1.0, 0.0, 0.0]],
            &[0, 2, 0],
        );
        let s = score_batch_las(&data).unwrap();
        assert!((s.values[0] - 0.3).abs() < 1e-12);
        assert!((s.values[1] - 0.9).abs() < 1e-12);
        assert!(s.values[2].abs() < 1e-9);
    }

    #[test]
    fn singleton_scores() {
        let data = matrix(&[&[0.6, 0.3, 0.1], &[0.6, 0.3, 0.1]], &[0, 2]);
        let s1 = score_batch_singleton(&data, 1).unwrap();
        assert_eq!(s1.values[0], 0.0);
        assert!((s1.values[1] - 2.5).abs() < 1e-12);
        let s2 = score_batch_singleton(&data, 2).unwrap();
        assert!((s2.values[1] - 10.0).abs() < 1e-9);
        assert!(score_batch_singleton(&data, 3).is_err());
    }

    #[test]
    fn missing_labels_rejected() {
        let data = ProbMatrix::new(&[vec![0.5, 0.5]], None).unwrap();
        assert_eq!(score_batch_las(&data), Err(Error::MissingLabels));
    }

    #[test]
    fn matrix_validation_reports_rows() {
        let bad = ProbMatrix::new(&[vec![0.5, 0.5], vec![0.5, 0.4]], None);
        assert!(matches!(bad, Err(Error::InvalidRow { row: 1, .. })));
        let ragged = ProbMatrix::new(&[vec![0.5, 0.5], vec![0.2, 0.3, 0.5]], None);
        assert!(matches!(ragged, Err(Error::RaggedRow { row: 1, .. })));
        let label = ProbMatrix::new(&[vec![0.5, 0.5]], Some(vec![2]));
        assert!(matches!(label, Err(Error::LabelOutOfRange { row: 0, .. })));
    }

    #[test]
    fn label_scores_are_in_original_order() {
        let d = sort_dist(&[0.1, 0.7, 0.2]).unwrap();
        let las = ScoreFunction::Las.label_scores(&d).unwrap();
        assert!((las[0] - 0.9).abs() < 1e-12 && (las[1] - 0.3).abs() < 1e-12);
        let single = ScoreFunction::Singleton { k0: 1 }.label_scores(&d).unwrap();
        assert_eq!(single[1], 0.0);
        assert_eq!(single[0], single[2]);
    }

    #[test]
    fn plugin_sets() {
        let d = sort_dist(&[0.5, 0.3, 0.2]).unwrap();
        assert_eq!(plugin_set(&d, 0.1).unwrap().members(), &[0, 1, 2]);
        let d = sort_dist(&[0.96, 0.03, 0.01]).unwrap();
        assert_eq!(plugin_set(&d, 0.05).unwrap().members(), &[0]);
        let d = sort_dist(&[0.5, 0.5]).unwrap();
        assert_eq!(plugin_set(&d, 0.5).unwrap().members(), &[0]);
        assert!(plugin_set(&d, 0.0).is_err());
    }

    #[test]
    fn external_scores_validated() {
        assert!(ScoreVector::external(vec![0.1, f64::INFINITY]).is_ok());
        assert!(ScoreVector::external(vec![f64::NAN]).is_err());
    }
}
