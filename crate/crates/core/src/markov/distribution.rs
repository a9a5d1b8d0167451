use rand::Rng;
use rand_distr::{Distribution as _, Exp1};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A probability vector over `N` states.
///
/// Entries are non-negative and sum to one within [`Distribution::TOLERANCE`].
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub const TOLERANCE: f64 = 1e-12;

    /// Validates `probs`. Negative entries down to `-TOLERANCE` are treated
    /// as rounding noise and clamped to zero.
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty vector".into()));
        }
        for (i, p) in probs.iter_mut().enumerate() {
            if !p.is_finite() || *p < -Self::TOLERANCE {
                return Err(Error::InvalidDistribution(format!("entry {i} is {p}")));
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > Self::TOLERANCE {
            return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Ok(Self { probs })
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidDistribution("weights must be finite and >= 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution needs at least one state");
        Self { probs: vec![1.0 / n as f64; n] }
    }

    /// Kronecker delta at `index` (0-based).
    pub fn delta(n: usize, index: usize) -> Self {
        assert!(index < n, "delta index {index} out of range for {n} states");
        let mut probs = vec![0.0; n];
        probs[index] = 1.0;
        Self { probs }
    }

    /// Uniform draw from the probability simplex (normalized exponentials).
    pub fn sample_simplex<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let w: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
        Self::from_weights(w).expect("exponential draws are positive")
    }

    /// Uniform simplex draw sorted into decreasing order.
    pub fn sample_decaying<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut d = Self::sample_simplex(n, rng);
        d.probs.sort_by(|a, b| b.total_cmp(a));
        d
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    pub fn min(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Index of the first adjacent increase larger than `tol`, if any.
    pub fn first_increase(&self, tol: f64) -> Option<usize> {
        self.probs.windows(2).position(|w| w[1] - w[0] > tol)
    }

    /// Non-increasing up to `tol` on adjacent pairs.
    pub fn is_decaying(&self, tol: f64) -> bool {
        self.first_increase(tol).is_none()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.probs.iter().all(|&p| p > 0.0)
    }

    /// Same entries in reverse order.
    pub fn reversed(&self) -> Self {
        let mut probs = self.probs.clone();
        probs.reverse();
        Self { probs }
    }

    pub fn to_document(&self) -> DistributionDocument {
        DistributionDocument { n: self.len(), pi: self.probs.clone() }
    }

    pub fn from_document(doc: DistributionDocument) -> Result<Self> {
        if doc.pi.len() != doc.n {
            return Err(Error::Dimension { expected: doc.n, found: doc.pi.len() });
        }
        Self::new(doc.pi)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("plain data serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(s)?)
    }
}

impl std::ops::Index<usize> for Distribution {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.probs[i]
    }
}

/// JSON form `{"n": N, "pi": [...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionDocument {
    pub n: usize,
    pub pi: Vec<f64>,
}

/// Total variation distance `1/2 * sum_j |a_j - b_j|`.
pub fn tv_distance(a: &Distribution, b: &Distribution) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension { expected: a.len(), found: b.len() });
    }
    Ok(tv_slices(a.as_slice(), b.as_slice()))
}

pub(crate) fn tv_slices(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}
