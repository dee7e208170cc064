//! Finitely supported distributions on the real line.

use crate::error::{Error, Result};

/// Probability weights on an increasing list of points.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    support: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    /// Validates that the support is strictly increasing and the weights are a
    /// probability vector to within `1e-12`.
    pub fn new(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let d = Self::unchecked(support, weights)?;
        let total: f64 = d.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(d)
    }

    /// Normalizes nonnegative weights.
    pub fn from_unnormalized(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let mut d = Self::unchecked(support, weights)?;
        let total: f64 = d.weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::invalid("weights have no positive finite mass"));
        }
        d.weights.iter_mut().for_each(|w| *w /= total);
        Ok(d)
    }

    fn unchecked(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if support.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: support.len(),
                got: weights.len(),
            });
        }
        if support.is_empty() {
            return Err(Error::invalid("empty support"));
        }
        if support.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("support must be strictly increasing"));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::invalid("weights must be nonnegative"));
        }
        Ok(Self { support, weights })
    }

    /// Lattice law on `{k / V : k = offset, offset + 1, ...}`.
    pub fn lattice(scale: f64, offset: usize, weights: Vec<f64>) -> Result<Self> {
        let support = (0..weights.len())
            .map(|k| (k + offset) as f64 / scale)
            .collect();
        Self::from_unnormalized(support, weights)
    }

    pub fn point_mass(x: f64) -> Self {
        Self {
            support: vec![x],
            weights: vec![1.0],
        }
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.support.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(x, w)| x * w).sum()
    }

    /// Weight sitting exactly on `x`.
    pub fn mass_at(&self, x: f64) -> f64 {
        match self.support.binary_search_by(|s| s.total_cmp(&x)) {
            Ok(i) => self.weights[i],
            Err(_) => 0.0,
        }
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.support.partition_point(|&s| s <= x);
        self.weights[..k].iter().sum::<f64>().min(1.0)
    }

    /// Expectation of `f`.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}
