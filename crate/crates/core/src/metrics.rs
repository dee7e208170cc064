//! Distances between distributions: exact one-dimensional Wasserstein-1,
//! total variation, Kolmogorov–Smirnov and a sliced Wasserstein surrogate.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::model::LimitMeasure;
use crate::quadrature::adaptive_simpson;

/// Points in `R^d`, optionally weighted.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    dim: usize,
    points: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl SampleSet {
    /// `points` holds `dim` coordinates per point, point after point.
    pub fn new(dim: usize, points: Vec<f64>, weights: Option<Vec<f64>>) -> Result<Self> {
        if dim == 0 || !points.len().is_multiple_of(dim) {
            return Err(Error::invalid("point buffer length is not a multiple of the dimension"));
        }
        if points.is_empty() {
            return Err(Error::invalid("empty sample set"));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sample values must be finite"));
        }
        if let Some(w) = &weights {
            if w.len() != points.len() / dim {
                return Err(Error::DimensionMismatch {
                    expected: points.len() / dim,
                    got: w.len(),
                });
            }
            if w.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::invalid("weights must be nonnegative"));
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("weights sum to {total}, not 1")));
            }
        }
        Ok(Self { dim, points, weights })
    }

    pub fn scalars(values: Vec<f64>) -> Result<Self> {
        Self::new(1, values, None)
    }

    pub fn weighted(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::new(1, values, Some(weights))
    }

    pub fn from_distribution(d: &DiscreteDistribution) -> Self {
        Self {
            dim: 1,
            points: d.support().to_vec(),
            weights: Some(d.weights().to_vec()),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.dim..(k + 1) * self.dim]
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// The `i`-th coordinate marginal.
    pub fn coordinate(&self, i: usize) -> Result<Self> {
        if i >= self.dim {
            return Err(Error::invalid(format!("coordinate {i} out of range")));
        }
        Ok(Self {
            dim: 1,
            points: self.points.iter().skip(i).step_by(self.dim).copied().collect(),
            weights: self.weights.clone(),
        })
    }

    /// Projection onto direction `u`.
    pub fn project(&self, u: &[f64]) -> Self {
        Self {
            dim: 1,
            points: self
                .points
                .chunks_exact(self.dim)
                .map(|p| p.iter().zip(u).map(|(a, b)| a * b).sum())
                .collect(),
            weights: self.weights.clone(),
        }
    }

    /// `(value, weight)` pairs sorted by value.
    fn sorted_scalar(&self) -> Vec<(f64, f64)> {
        let n = self.len();
        let mut v: Vec<(f64, f64)> = match &self.weights {
            Some(w) => self.points.iter().copied().zip(w.iter().copied()).collect(),
            None => self.points.iter().map(|&x| (x, 1.0 / n as f64)).collect(),
        };
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    }

    fn mean_scalar(&self) -> f64 {
        match &self.weights {
            Some(w) => self.points.iter().zip(w).map(|(x, w)| x * w).sum(),
            None => self.points.iter().sum::<f64>() / self.len() as f64,
        }
    }
}

fn require_scalar(s: &SampleSet) -> Result<()> {
    if s.dim != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: s.dim });
    }
    Ok(())
}

/// Exact W1 between two one-dimensional empirical laws by quantile matching.
pub fn w1_empirical(a: &SampleSet, b: &SampleSet) -> Result<f64> {
    require_scalar(a)?;
    require_scalar(b)?;
    if a.weights.is_none() && b.weights.is_none() && a.len() == b.len() {
        let mut x = a.points.clone();
        let mut y = b.points.clone();
        x.sort_by(f64::total_cmp);
        y.sort_by(f64::total_cmp);
        let total: f64 = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).sum();
        return Ok(total / x.len() as f64);
    }
    Ok(quantile_gap(&a.sorted_scalar(), &b.sorted_scalar()))
}

/// `∫₀¹ |Q_a(u) - Q_b(u)| du` over the merged grid of cumulative weights.
fn quantile_gap(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (mut left_a, mut left_b) = (a[0].1, b[0].1);
    let mut total = 0.0;
    while i < a.len() && j < b.len() {
        let step = left_a.min(left_b);
        total += step * (a[i].0 - b[j].0).abs();
        left_a -= step;
        left_b -= step;
        if left_a <= 1e-15 {
            i += 1;
            if i < a.len() {
                left_a += a[i].1;
            }
        }
        if left_b <= 1e-15 {
            j += 1;
            if j < b.len() {
                left_b += b[j].1;
            }
        }
    }
    total
}

/// Standard deviation scale of the empirical W1 between two independent
/// unweighted samples of one law: `sqrt(1/n + 1/m) ∫ sqrt(F(1 - F)) dx`
/// with `F` the pooled empirical cdf.
pub fn w1_null_scale(a: &SampleSet, b: &SampleSet) -> Result<f64> {
    require_scalar(a)?;
    require_scalar(b)?;
    let (n, m) = (a.len() as f64, b.len() as f64);
    let mut pooled: Vec<f64> = a.points.iter().chain(&b.points).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let total = pooled.len() as f64;
    let mut acc = 0.0;
    for (k, w) in pooled.windows(2).enumerate() {
        let f = (k + 1) as f64 / total;
        acc += (f * (1.0 - f)).sqrt() * (w[1] - w[0]);
    }
    Ok((1.0 / n + 1.0 / m).sqrt() * acc)
}

/// A one-dimensional cumulative distribution function.
pub trait Cdf {
    fn cdf(&self, x: f64) -> f64;

    /// `F` vanishes below this point.
    fn lower_bound(&self) -> f64;

    /// `∫_{lower}^{x} F(t) dt` in closed form, when available.
    fn cdf_integral(&self, _x: f64) -> Option<f64> {
        None
    }

    /// `∫_x^∞ (1 - F(t)) dt` in closed form, when available.
    fn survival_integral(&self, _x: f64) -> Option<f64> {
        None
    }
}

impl Cdf for LimitMeasure {
    fn cdf(&self, x: f64) -> f64 {
        LimitMeasure::cdf(self, x)
    }

    fn lower_bound(&self) -> f64 {
        0.0
    }

    fn cdf_integral(&self, x: f64) -> Option<f64> {
        let (shape, rate) = self.gamma_parameters()?;
        Some(gamma_cdf_integral(shape, rate, x))
    }

    fn survival_integral(&self, x: f64) -> Option<f64> {
        let (shape, rate) = self.gamma_parameters()?;
        Some(gamma_survival_integral(shape, rate, x))
    }
}

/// `∫₀ˣ F(t) dt = x P(α, λx) - (α/λ) P(α+1, λx)` for the gamma law.
pub(crate) fn gamma_cdf_integral(shape: f64, rate: f64, x: f64) -> f64 {
    use statrs::function::gamma::gamma_lr;
    if x <= 0.0 {
        return 0.0;
    }
    x * gamma_lr(shape, rate * x) - shape / rate * gamma_lr(shape + 1.0, rate * x)
}

/// `∫ₓ^∞ (1 - F(t)) dt = (α/λ) Q(α+1, λx) - x Q(α, λx)`.
pub(crate) fn gamma_survival_integral(shape: f64, rate: f64, x: f64) -> f64 {
    use statrs::function::gamma::gamma_ur;
    if x <= 0.0 {
        return shape / rate - x;
    }
    (shape / rate * gamma_ur(shape + 1.0, rate * x) - x * gamma_ur(shape, rate * x)).max(0.0)
}

impl Cdf for DiscreteDistribution {
    fn cdf(&self, x: f64) -> f64 {
        DiscreteDistribution::cdf(self, x)
    }

    fn lower_bound(&self) -> f64 {
        self.support()[0]
    }

    fn cdf_integral(&self, x: f64) -> Option<f64> {
        Some(self.iter().take_while(|(s, _)| *s <= x).map(|(s, w)| w * (x - s)).sum())
    }

    fn survival_integral(&self, x: f64) -> Option<f64> {
        Some(self.iter().filter(|(s, _)| *s > x).map(|(s, w)| w * (s - x)).sum())
    }
}

fn integrate_cdf(cdf: &dyn Cdf, a: f64, b: f64) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    if let (Some(ga), Some(gb)) = (cdf.cdf_integral(a), cdf.cdf_integral(b)) {
        return Ok(gb - ga);
    }
    adaptive_simpson(&mut |x: f64| cdf.cdf(x), a, b, 1e-13 * (b - a).max(1e-300), 50)
}

fn survival_from(cdf: &dyn Cdf, x: f64) -> Result<f64> {
    if let Some(v) = cdf.survival_integral(x) {
        return Ok(v);
    }
    // extend until the survival function is negligible
    let mut total = 0.0;
    let mut a = x;
    let mut len = 1.0f64.max(x.abs());
    for _ in 0..200 {
        let b = a + len;
        total += adaptive_simpson(&mut |t: f64| 1.0 - cdf.cdf(t), a, b, 1e-13 * len, 50)?;
        if 1.0 - cdf.cdf(b) < 1e-15 {
            return Ok(total);
        }
        a = b;
        len *= 2.0;
    }
    Err(Error::QuadratureFailure {
        a: x,
        b: f64::INFINITY,
        depth: 200,
    })
}

/// Point in `[a, b]` where a nondecreasing `F` crosses `level`.
fn crossing(cdf: &dyn Cdf, level: f64, mut a: f64, mut b: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if cdf.cdf(m) < level {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// `∫ |F_n(x) - F(x)| dx` between an empirical (possibly weighted) law and a cdf.
///
/// Exact between sample points whenever the cdf has a closed-form
/// antiderivative; tails outside the sample range come from the cdf alone.
pub fn w1_vs_cdf(a: &SampleSet, cdf: &dyn Cdf) -> Result<f64> {
    require_scalar(a)?;
    let pts = a.sorted_scalar();
    // collapse ties so that F_n is a proper step function
    let mut xs: Vec<f64> = Vec::with_capacity(pts.len());
    let mut levels: Vec<f64> = Vec::with_capacity(pts.len());
    let mut cum = 0.0;
    for (x, w) in pts {
        cum += w;
        if xs.last() == Some(&x) {
            *levels.last_mut().expect("nonempty") = cum;
        } else {
            xs.push(x);
            levels.push(cum);
        }
    }
    let mut prev = f64::NEG_INFINITY;
    for &x in &xs {
        let f = cdf.cdf(x);
        if !(-1e-12..=1.0 + 1e-12).contains(&f) || f < prev - 1e-12 {
            return Err(Error::NonMonotoneCdf { x });
        }
        prev = f;
    }
    let lo = cdf.lower_bound();
    let mut total = if xs[0] > lo { integrate_cdf(cdf, lo, xs[0])? } else { 0.0 };
    for k in 0..xs.len() - 1 {
        let (x0, x1) = (xs[k], xs[k + 1]);
        let level = levels[k].min(1.0);
        let (f0, f1) = (cdf.cdf(x0), cdf.cdf(x1));
        let piece = if f1 <= level {
            level * (x1 - x0) - integrate_cdf(cdf, x0, x1)?
        } else if f0 >= level {
            integrate_cdf(cdf, x0, x1)? - level * (x1 - x0)
        } else {
            let c = crossing(cdf, level, x0, x1);
            (level * (c - x0) - integrate_cdf(cdf, x0, c)?) + (integrate_cdf(cdf, c, x1)? - level * (x1 - c))
        };
        total += piece.max(0.0);
    }
    let last = *xs.last().expect("nonempty");
    total += survival_from(cdf, last)?;
    Ok(total)
}

/// `Σ |P(x) - Q(x)| Δx` over the merged support.
pub fn w1_discrete_1d(p: &DiscreteDistribution, q: &DiscreteDistribution) -> f64 {
    let grid = merged_support(p, q);
    let mut total = 0.0;
    let (mut cp, mut cq) = (0.0, 0.0);
    for w in grid.windows(2) {
        cp += p.mass_at(w[0]);
        cq += q.mass_at(w[0]);
        total += (cp - cq).abs() * (w[1] - w[0]);
    }
    total
}

fn merged_support(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Vec<f64> {
    let mut grid: Vec<f64> = p.support().iter().chain(q.support()).copied().collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// `½ Σ |p(x) - q(x)|` over the merged support.
pub fn tv_discrete(p: &DiscreteDistribution, q: &DiscreteDistribution) -> f64 {
    let total: f64 = merged_support(p, q)
        .into_iter()
        .map(|x| (p.mass_at(x) - q.mass_at(x)).abs())
        .sum();
    (0.5 * total).min(1.0)
}

/// `sup |F_n - F|`, checking both one-sided gaps at every sample point.
pub fn ks_statistic(a: &SampleSet, cdf: &dyn Cdf) -> Result<f64> {
    require_scalar(a)?;
    let pts = a.sorted_scalar();
    let mut below = 0.0;
    let mut best: f64 = 0.0;
    let mut k = 0;
    while k < pts.len() {
        let x = pts[k].0;
        let mut above = below;
        while k < pts.len() && pts[k].0 == x {
            above += pts[k].1;
            k += 1;
        }
        let f = cdf.cdf(x);
        // left limit of F at x, for distributions with atoms
        let f_left = cdf.cdf(x - x.abs().max(1.0) * 1e-12);
        best = best.max((above - f).abs()).max((f_left - below).abs());
        below = above;
    }
    Ok(best.min(1.0))
}

/// Mean of projected W1 over random directions, with its Monte Carlo spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlicedW1 {
    pub value: f64,
    pub std_error: f64,
}

pub fn w1_sliced<R: Rng + ?Sized>(a: &SampleSet, b: &SampleSet, n_projections: usize, rng: &mut R) -> Result<SlicedW1> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            got: b.dim,
        });
    }
    if n_projections == 0 {
        return Err(Error::invalid("need at least one projection"));
    }
    let d = a.dim;
    let mut values = Vec::with_capacity(n_projections);
    let mut u = vec![0.0; d];
    for _ in 0..n_projections {
        loop {
            u.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
            let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-12 {
                u.iter_mut().for_each(|v| *v /= norm);
                break;
            }
        }
        values.push(w1_empirical(&a.project(&u), &b.project(&u))?);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(SlicedW1 {
        value: mean,
        std_error: (var / n).sqrt(),
    })
}

/// Sample mean of a one-dimensional set.
pub fn sample_mean(a: &SampleSet) -> f64 {
    a.mean_scalar()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_rng;

    fn s(v: &[f64]) -> SampleSet {
        SampleSet::scalars(v.to_vec()).unwrap()
    }

    #[test]
    fn w1_examples() {
        assert_eq!(w1_empirical(&s(&[0.3, 1.0]), &s(&[1.0, 0.3])).unwrap(), 0.0);
        assert_eq!(w1_empirical(&s(&[0.0]), &s(&[1.0])).unwrap(), 1.0);
        assert_eq!(w1_empirical(&s(&[0.0, 1.0]), &s(&[1.0, 2.0])).unwrap(), 1.0);
        // unequal sizes: {0, 1} vs {0, 0.5, 1}
        let v = w1_empirical(&s(&[0.0, 1.0]), &s(&[0.0, 0.5, 1.0])).unwrap();
        assert!((v - (1.0 / 6.0) * 0.5 * 2.0).abs() < 1e-15, "{v}");
    }

    #[test]
    fn w1_vs_cdf_point_masses() {
        let atom = DiscreteDistribution::point_mass(0.0);
        assert_eq!(w1_vs_cdf(&s(&[0.0]), &atom).unwrap(), 0.0);
        assert!((w1_vs_cdf(&s(&[1.0]), &atom).unwrap() - 1.0).abs() < 1e-12);
        let shifted = DiscreteDistribution::point_mass(2.0);
        assert!((w1_vs_cdf(&s(&[0.5]), &shifted).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn w1_vs_cdf_matches_discrete_formula() {
        let exp = LimitMeasure::Exponential { rate: 1.0 };
        // W1 between a point mass at m and Exp(1) is E|X - m| = m - 1 + 2 e^{-m}
        for m in [0.2, 1.0, 3.0] {
            let v = w1_vs_cdf(&s(&[m]), &exp).unwrap();
            assert!((v - (m - 1.0 + 2.0 * (-m).exp())).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn non_monotone_cdf_is_rejected() {
        struct Bad;
        impl Cdf for Bad {
            fn cdf(&self, x: f64) -> f64 {
                if x < 1.0 {
                    0.8
                } else {
                    0.2
                }
            }
            fn lower_bound(&self) -> f64 {
                0.0
            }
        }
        assert!(matches!(w1_vs_cdf(&s(&[0.5, 2.0]), &Bad), Err(Error::NonMonotoneCdf { .. })));
    }

    #[test]
    fn discrete_distances() {
        let p = DiscreteDistribution::point_mass(0.0);
        let q = DiscreteDistribution::point_mass(0.1);
        assert!((w1_discrete_1d(&p, &q) - 0.1).abs() < 1e-15);
        assert_eq!(tv_discrete(&p, &q), 1.0);
        assert_eq!(tv_discrete(&p, &p), 0.0);
        let a = DiscreteDistribution::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let b = DiscreteDistribution::new(vec![0.0, 1.0], vec![0.75, 0.25]).unwrap();
        assert!((tv_discrete(&a, &b) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ks_examples() {
        let exp = LimitMeasure::Exponential { rate: 1.0 };
        let median = std::f64::consts::LN_2;
        assert!((ks_statistic(&s(&[median]), &exp).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sliced_point_masses() {
        let a = SampleSet::new(2, vec![0.0, 0.0], None).unwrap();
        let b = SampleSet::new(2, vec![1.0, 0.0], None).unwrap();
        let r = w1_sliced(&a, &b, 20_000, &mut replica_rng(1, 0)).unwrap();
        let target = 2.0 / std::f64::consts::PI;
        assert!((r.value - target).abs() < 3.0 * r.std_error, "{r:?}");
    }

    #[test]
    fn weighted_sets_validate() {
        assert!(SampleSet::weighted(vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(SampleSet::scalars(vec![f64::NAN]).is_err());
        let w = SampleSet::weighted(vec![0.0, 1.0], vec![0.25, 0.75]).unwrap();
        assert!((sample_mean(&w) - 0.75).abs() < 1e-15);
    }
}
