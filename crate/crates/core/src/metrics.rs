//! Coverage, size statistics and the excess-mass comparison of two size
//! histograms.

use alloc::vec::Vec;

use crate::conformal::PredictionSet;
use crate::error::{Error, Result};

/// Empirical frequency of each prediction-set size; `freqs[s]` is the
/// fraction of sets with exactly `s` members.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct Histogram {
    pub freqs: Vec<f64>,
}

impl Histogram {
    pub fn from_sizes(sizes: impl IntoIterator<Item = usize>) -> Self {
        let mut counts: Vec<usize> = Vec::new();
        let mut n = 0usize;
        for s in sizes {
            if s >= counts.len() {
                counts.resize(s + 1, 0);
            }
            counts[s] += 1;
            n += 1;
        }
        let freqs = if n == 0 {
            Vec::new()
        } else {
            counts.iter().map(|&c| c as f64 / n as f64).collect()
        };
        Self { freqs }
    }

    pub fn freq(&self, size: usize) -> f64 {
        self.freqs.get(size).copied().unwrap_or(0.0)
    }

    pub fn max_size(&self) -> usize {
        self.freqs.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub coverage: f64,
    pub avg_size: f64,
    /// Fraction of sets larger than `k0`.
    pub p_size_gt: f64,
    pub k0: usize,
    pub empty_rate: f64,
    pub histogram: Histogram,
    pub n_eval: usize,
}

pub fn evaluate(sets: &[PredictionSet], labels: &[usize], k0: usize) -> Result<EvalReport> {
    if sets.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: sets.len(),
            right: labels.len(),
        });
    }
    if sets.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = sets.len() as f64;
    let mut covered = 0usize;
    let mut total_size = 0usize;
    let mut large = 0usize;
    let mut empty = 0usize;
    for (set, &label) in sets.iter().zip(labels) {
        covered += set.contains(label) as usize;
        total_size += set.size();
        large += (set.size() > k0) as usize;
        empty += set.is_empty() as usize;
    }
    Ok(EvalReport {
        coverage: covered as f64 / n,
        avg_size: total_size as f64 / n,
        p_size_gt: large as f64 / n,
        k0,
        empty_rate: empty as f64 / n,
        histogram: Histogram::from_sizes(sets.iter().map(PredictionSet::size)),
        n_eval: sets.len(),
    })
}

/// `Σ_{s ≥ 2} max(f_A(s) − f_B(s), 0)`: how much more mass `a` puts on
/// non-singleton sizes than `b`.
pub fn excess_mass_delta(a: &Histogram, b: &Histogram) -> f64 {
    let top = a.freqs.len().max(b.freqs.len());
    (2..top).map(|s| (a.freq(s) - b.freq(s)).max(0.0)).sum()
}
