//! Sorted probability vectors and the score configuration.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Floor applied to every probability before renormalization, so that the
/// cumulative mass is strictly increasing and hull slopes stay finite.
pub const PROB_FLOOR: f64 = 1e-12;

/// How far the raw mass may stray from 1 before the row is rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SumPolicy {
    /// Accept sums within 1e-3 of 1 (float32 softmax exports) and renormalize.
    #[default]
    Tolerant,
    /// Accept sums within 1e-6 of 1 only.
    Strict,
}

impl SumPolicy {
    pub fn tolerance(self) -> f64 {
        match self {
            SumPolicy::Tolerant => 1e-3,
            SumPolicy::Strict => 1e-6,
        }
    }
}

/// A probability vector sorted in decreasing order.
///
/// `perm[i]` is the original label of the `i`-th largest probability and
/// `ranks[label]` is the 0-based position of `label` in the sorted order.
/// Ties keep the smaller original label first.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedDist {
    values: Vec<f64>,
    perm: Vec<usize>,
    ranks: Vec<usize>,
}

/// Validate, clamp, renormalize and sort a probability vector.
pub fn sort_dist(probs: &[f64]) -> Result<SortedDist> {
    SortedDist::with_policy(probs, SumPolicy::Tolerant)
}

impl SortedDist {
    pub fn new(probs: &[f64]) -> Result<Self> {
        Self::with_policy(probs, SumPolicy::Tolerant)
    }

    pub fn with_policy(probs: &[f64], policy: SumPolicy) -> Result<Self> {
        let k = probs.len();
        let total = clamped_total(probs, policy)?;
        let mut pairs: Vec<(f64, usize)> = probs
            .iter()
            .enumerate()
            .map(|(label, &p)| (p.max(PROB_FLOOR) / total, label))
            .collect();
        // Values are positive and finite, so inverted bit patterns order them
        // descending. The radix sort is linear in K and stable, which keeps
        // the smaller label first among ties.
        radsort::sort_by_key(&mut pairs, |p| !p.0.to_bits());
        let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let perm: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let mut ranks = alloc::vec![0; k];
        for (pos, &label) in perm.iter().enumerate() {
            ranks[label] = pos;
        }
        Ok(Self {
            values,
            perm,
            ranks,
        })
    }

    /// Number of classes `K`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sorted probabilities, largest first.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// 1-based rank of an original label (1 = most probable).
    pub fn rank_of(&self, label: usize) -> Option<usize> {
        self.ranks.get(label).map(|r| r + 1)
    }

    /// Probability of an original label after clamping and renormalization.
    pub fn prob_of(&self, label: usize) -> Option<f64> {
        self.ranks.get(label).map(|&r| self.values[r])
    }

    /// Cumulative mass `Γ_0..=Γ_K` of the top-k labels.
    ///
    /// `Γ_0 = 0` and `Γ_K = 1` exactly; the intermediate sums are compensated.
    pub fn cumulative(&self) -> Vec<f64> {
        prefix_sums(&self.values)
    }
}

/// Validate `probs` and return the normalizer of the clamped values.
fn clamped_total(probs: &[f64], policy: SumPolicy) -> Result<f64> {
    let k = probs.len();
    if k < 2 {
        return Err(Error::TooFewClasses { k });
    }
    let mut sum = 0.0;
    for (index, &value) in probs.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidProbability { index, value });
        }
        sum += value;
    }
    if (sum - 1.0).abs() > policy.tolerance() {
        return Err(Error::BadMass { sum });
    }
    Ok(neumaier_sum(probs.iter().map(|&p| p.max(PROB_FLOOR))))
}

/// Sorted values and the 1-based rank of `label`, without the permutation.
///
/// Matches [`SortedDist::values`] and [`SortedDist::rank_of`] exactly; this is
/// the single-label path, which skips the label bookkeeping.
pub(crate) fn sorted_values_and_rank(probs: &[f64], label: usize) -> Result<(Vec<f64>, usize)> {
    let total = clamped_total(probs, SumPolicy::Tolerant)?;
    let k = probs.len();
    let target = match probs.get(label) {
        Some(&p) => p.max(PROB_FLOOR) / total,
        None => return Err(Error::LabelOutOfRange { row: 0, label, k }),
    };
    let mut rank = 1;
    let mut values = Vec::with_capacity(k);
    for (j, &p) in probs.iter().enumerate() {
        let v = p.max(PROB_FLOOR) / total;
        rank += usize::from(v > target || (v == target && j < label));
        values.push(v);
    }
    radsort::sort_by_key(&mut values, |v| !v.to_bits());
    Ok((values, rank))
}

/// `Γ_0..=Γ_K` of values sorted in descending order.
pub(crate) fn prefix_sums(values: &[f64]) -> Vec<f64> {
    let k = values.len();
    let mut out = Vec::with_capacity(k + 1);
    out.push(0.0);
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for &v in &values[..k - 1] {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
        out.push(sum + carry);
    }
    out.push(1.0);
    out
}

fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// Penalty `λ` on set size and the size threshold `k0` of the objective
/// `g_k = I(k > k0) + λk`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoreConfig {
    pub lambda: f64,
    pub k0: usize,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self { lambda: 0.0, k0: 1 }
    }
}

impl ScoreConfig {
    pub fn new(lambda: f64, k0: usize) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidLambda(lambda));
        }
        if k0 == 0 {
            return Err(Error::InvalidK0 { k0, k: 0 });
        }
        Ok(Self { lambda, k0 })
    }

    pub fn with_lambda(lambda: f64) -> Result<Self> {
        Self::new(lambda, 1)
    }

    /// Check `k0 < K` for a concrete class count.
    pub fn check_classes(&self, k: usize) -> Result<()> {
        if self.k0 == 0 || self.k0 >= k {
            return Err(Error::InvalidK0 { k0: self.k0, k });
        }
        Ok(())
    }

    /// `g_k` for one candidate size.
    #[inline]
    pub fn objective(&self, size: usize) -> f64 {
        let indicator = if size > self.k0 { 1.0 } else { 0.0 };
        indicator + self.lambda * size as f64
    }
}
