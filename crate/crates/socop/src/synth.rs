//! Synthetic softmax outputs from a perfectly calibrated model.
//!
//! Each row is a Dirichlet draw and its label is drawn from that row, so
//! `Y | X ~ p̂(· | X)` holds exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use socop_core::ProbMatrix;

use crate::error::{Error, Result};
use crate::io::RawProbs;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Concentration {
    Symmetric(f64),
    PerClass(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub n: usize,
    pub concentration: Concentration,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn symmetric(classes: usize, n: usize, concentration: f64, seed: u64) -> Self {
        Self {
            classes,
            n,
            concentration: Concentration::Symmetric(concentration),
            seed,
        }
    }

    fn alphas(&self) -> Result<Vec<f64>> {
        if self.classes < 2 {
            return Err(Error::Config(format!(
                "need at least 2 classes, got {}",
                self.classes
            )));
        }
        let alphas = match &self.concentration {
            Concentration::Symmetric(a) => vec![*a; self.classes],
            Concentration::PerClass(v) => {
                if v.len() != self.classes {
                    return Err(Error::Config(format!(
                        "{} concentration entries for {} classes",
                        v.len(),
                        self.classes
                    )));
                }
                v.clone()
            }
        };
        if let Some(a) = alphas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::Config(format!("concentration must be > 0, got {a}")));
        }
        Ok(alphas)
    }
}

/// Raw rows and labels; these are what `synth` writes to disk.
pub fn generate_rows(spec: &SyntheticSpec) -> Result<RawProbs> {
    let alphas = spec.alphas()?;
    let gammas = alphas
        .iter()
        .map(|&a| Gamma::new(a, 1.0).map_err(|e| Error::Config(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rows = Vec::with_capacity(spec.n);
    let mut labels = Vec::with_capacity(spec.n);
    let mut draw = vec![0.0; spec.classes];
    for _ in 0..spec.n {
        let total = loop {
            for (slot, g) in draw.iter_mut().zip(&gammas) {
                *slot = g.sample(&mut rng);
            }
            let total: f64 = draw.iter().sum();
            if total > 0.0 && total.is_finite() {
                break total;
            }
        };
        let row: Vec<f64> = draw.iter().map(|v| v / total).collect();

        let u: f64 = rng.random::<f64>() * row.iter().sum::<f64>();
        let mut acc = 0.0;
        let mut label = spec.classes - 1;
        for (y, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                label = y;
                break;
            }
        }
        rows.push(row);
        labels.push(label);
    }
    Ok(RawProbs {
        rows,
        labels: Some(labels),
    })
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<ProbMatrix> {
    generate_rows(spec)?.into_matrix()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_deterministic() {
        let spec = SyntheticSpec {
            classes: 2,
            n: 4,
            concentration: Concentration::PerClass(vec![1.0, 1.0]),
            seed: 7,
        };
        let a = generate_rows(&spec).unwrap();
        let b = generate_rows(&spec).unwrap();
        assert_eq!(a.rows.len(), 4);
        assert!(a.rows.iter().all(|r| r.len() == 2));
        assert_eq!(a, b);
        let other = generate_rows(&SyntheticSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn rows_are_distributions() {
        let m = generate_synthetic(&SyntheticSpec::symmetric(10, 200, 0.5, 1)).unwrap();
        assert_eq!(m.len(), 200);
        assert_eq!(m.classes(), 10);
        assert!(m.labels().unwrap().iter().all(|&y| y < 10));
    }

    #[test]
    fn small_concentration_gives_peaked_rows() {
        let mean_max = |c: f64| {
            let raw = generate_rows(&SyntheticSpec::symmetric(10, 10_000, c, 3)).unwrap();
            raw.rows
                .iter()
                .map(|r| r.iter().cloned().fold(0.0, f64::max))
                .sum::<f64>()
                / raw.rows.len() as f64
        };
        let peaked = mean_max(0.3);
        let flat = mean_max(1.0);
        assert!(peaked > flat + 0.1, "{peaked} vs {flat}");
    }

    #[test]
    fn labels_follow_the_rows() {
        // with calibrated labels the top label is correct E[max p] of the time
        let raw = generate_rows(&SyntheticSpec::symmetric(5, 20_000, 0.5, 11)).unwrap();
        let labels = raw.labels.unwrap();
        let (mut hits, mut expected) = (0.0, 0.0);
        for (row, &y) in raw.rows.iter().zip(&labels) {
            let (top, pmax) =
                row.iter()
                    .enumerate()
                    .fold((0, 0.0), |b, (i, &p)| if p > b.1 { (i, p) } else { b });
            hits += (top == y) as u8 as f64;
            expected += pmax;
        }
        let n = labels.len() as f64;
        assert!((hits / n - expected / n).abs() < 0.02);
    }

    #[test]
    fn invalid_specs() {
        assert!(generate_rows(&SyntheticSpec::symmetric(1, 5, 1.0, 0)).is_err());
        assert!(generate_rows(&SyntheticSpec::symmetric(3, 5, 0.0, 0)).is_err());
        let spec = SyntheticSpec {
            classes: 3,
            n: 5,
            concentration: Concentration::PerClass(vec![1.0, 1.0]),
            seed: 0,
        };
        assert!(matches!(generate_rows(&spec), Err(Error::Config(_))));
    }
}
