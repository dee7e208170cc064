//! Burst-size laws: the mesoscopic pmf family `p(V, ·)` on copy numbers and
//! the limiting measure `μ` on concentrations.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use statrs::distribution::{Continuous, ContinuousCDF, Gamma as GammaDist};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;

/// Uniform draw on `(0, 1]`, safe to take the logarithm of.
#[inline]
pub(crate) fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

pub type PmfFn = Arc<dyn Fn(f64, u64) -> f64 + Send + Sync>;
pub type CapFn = Arc<dyn Fn(f64) -> u64 + Send + Sync>;

/// A user-supplied burst pmf `p(V, m)`, `m >= 0`, used only on `0..=cap(V)`.
///
/// `tail_bound` is the caller's claim on the mass beyond the cap; the model
/// validator checks it.
#[derive(Clone)]
pub struct CustomPmf {
    pub pmf: PmfFn,
    pub cap: CapFn,
    pub tail_bound: f64,
}

impl fmt::Debug for CustomPmf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPmf")
            .field("tail_bound", &self.tail_bound)
            .finish_non_exhaustive()
    }
}

/// Mesoscopic burst-size pmf family.
///
/// For the geometric and negative-binomial laws the success parameter at
/// scale `V` is `p_V = V / (V + λ)`, so the odds `p_V / (1 - p_V)` equal `V / λ`.
#[derive(Debug, Clone)]
pub enum BurstLaw {
    /// `p(V, m) = p_V^m (1 - p_V)`
    Geometric { lambda: f64 },
    /// `p(V, m) = (α)_m / m! · p_V^m (1 - p_V)^α`
    NegBinomial { alpha: f64, lambda: f64 },
    Custom(CustomPmf),
}

impl BurstLaw {
    pub fn geometric(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("burst scale lambda must be > 0, got {lambda}")));
        }
        Ok(BurstLaw::Geometric { lambda })
    }

    pub fn neg_binomial(alpha: f64, lambda: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::invalid(format!("burst shape alpha must be > 0, got {alpha}")));
        }
        Self::geometric(lambda)?;
        Ok(BurstLaw::NegBinomial { alpha, lambda })
    }

    /// `p_V` for the parametric laws.
    pub fn success_probability(&self, scale: f64) -> Option<f64> {
        match self {
            BurstLaw::Geometric { lambda } | BurstLaw::NegBinomial { lambda, .. } => {
                Some(scale / (scale + lambda))
            }
            BurstLaw::Custom(_) => None,
        }
    }

    fn shape(&self) -> f64 {
        match self {
            BurstLaw::NegBinomial { alpha, .. } => *alpha,
            _ => 1.0,
        }
    }

    /// `ln p_V` and `ln(1 - p_V)`, computed without cancellation.
    fn log_params(&self, scale: f64) -> (f64, f64) {
        match self {
            BurstLaw::Geometric { lambda } | BurstLaw::NegBinomial { lambda, .. } => {
                let ln_p = -(lambda / scale).ln_1p();
                let ln_q = -(scale / lambda).ln_1p();
                (ln_p, ln_q)
            }
            BurstLaw::Custom(_) => unreachable!("custom laws have no success parameter"),
        }
    }

    /// `p(V, m)` including the `m = 0` atom.
    pub fn pmf(&self, scale: f64, m: u64) -> f64 {
        match self {
            BurstLaw::Custom(c) => {
                if m <= (c.cap)(scale) {
                    (c.pmf)(scale, m)
                } else {
                    0.0
                }
            }
            _ => self.ln_pmf(scale, m).exp(),
        }
    }

    pub fn ln_pmf(&self, scale: f64, m: u64) -> f64 {
        match self {
            BurstLaw::Custom(_) => self.pmf(scale, m).ln(),
            _ => {
                let a = self.shape();
                let (ln_p, ln_q) = self.log_params(scale);
                let mf = m as f64;
                let comb = if a == 1.0 {
                    0.0
                } else {
                    ln_gamma(a + mf) - ln_gamma(a) - ln_gamma(mf + 1.0)
                };
                comb + mf * ln_p + a * ln_q
            }
        }
    }

    /// Channel mass `S(V) = Σ_{m>=1} p(V, m)`.
    pub fn burst_mass(&self, scale: f64) -> f64 {
        match self {
            BurstLaw::Custom(c) => (1..=(c.cap)(scale)).map(|m| (c.pmf)(scale, m)).sum(),
            _ => {
                let (_, ln_q) = self.log_params(scale);
                // 1 - q^α
                -(self.shape() * ln_q).exp_m1()
            }
        }
    }

    /// `Σ_{m>=1} m p(V, m)` (condition (a)). For custom laws, over the capped support.
    pub fn mean_size(&self, scale: f64) -> f64 {
        match self {
            BurstLaw::Custom(c) => (1..=(c.cap)(scale))
                .map(|m| m as f64 * (c.pmf)(scale, m))
                .sum(),
            BurstLaw::Geometric { lambda } => scale / lambda,
            BurstLaw::NegBinomial { alpha, lambda } => alpha * scale / lambda,
        }
    }

    /// Walk `(m, p(V, m))` for `m = 1, 2, ...` by the ratio recurrence.
    pub fn weights(&self, scale: f64) -> BurstWeights<'_> {
        let (first, ratio_base) = match self {
            BurstLaw::Custom(_) => (0.0, 0.0),
            _ => {
                let (ln_p, _) = self.log_params(scale);
                (self.ln_pmf(scale, 1).exp(), ln_p.exp())
            }
        };
        BurstWeights {
            law: self,
            scale,
            next_m: 1,
            current: first,
            p: ratio_base,
        }
    }

    /// Draw a burst size conditioned on `m >= 1`.
    ///
    /// Geometric (and negative binomial with `α = 1`) use the closed-form
    /// inverse cdf, so the two produce identical sequences from one stream.
    /// Other shapes draw a gamma-mixed Poisson variate and discard zeros.
    pub fn sample_size<R: Rng + ?Sized>(&self, scale: f64, rng: &mut R) -> u64 {
        match self {
            BurstLaw::Geometric { .. } => self.geometric_conditional(scale, open_unit(rng)),
            BurstLaw::NegBinomial { alpha, lambda } => {
                if *alpha == 1.0 {
                    return self.geometric_conditional(scale, open_unit(rng));
                }
                let mixing = Gamma::new(*alpha, scale / lambda).expect("validated gamma parameters");
                loop {
                    let intensity: f64 = mixing.sample(rng);
                    if intensity <= 0.0 {
                        continue;
                    }
                    let n: f64 = Poisson::new(intensity)
                        .expect("positive Poisson intensity")
                        .sample(rng);
                    if n >= 1.0 {
                        return n as u64;
                    }
                }
            }
            BurstLaw::Custom(c) => {
                let mass = self.burst_mass(scale);
                let u = rng.random::<f64>() * mass;
                let cap = (c.cap)(scale);
                let mut acc = 0.0;
                for m in 1..=cap {
                    acc += (c.pmf)(scale, m);
                    if u < acc {
                        return m;
                    }
                }
                cap.max(1)
            }
        }
    }

    fn geometric_conditional(&self, scale: f64, u: f64) -> u64 {
        1 + self.geometric_quantile(scale, u)
    }

    fn geometric_quantile(&self, scale: f64, u: f64) -> u64 {
        // P(M >= k) = p^k
        let (ln_p, _) = self.log_params(scale);
        let k = (u.ln() / ln_p).floor();
        if k.is_finite() {
            k as u64
        } else {
            0
        }
    }

    /// Inverse cdf of the full pmf (`m >= 0`) at survival level `u ∈ (0, 1]`:
    /// the smallest `m` with `P(M > m) < u`.
    ///
    /// Used when the simulator draws from `p(V, ·)` including the zero atom,
    /// so that a shared uniform couples the size to a limit-measure draw.
    pub fn quantile(&self, scale: f64, u: f64) -> u64 {
        match self {
            BurstLaw::Geometric { .. } => self.geometric_quantile(scale, u),
            BurstLaw::NegBinomial { alpha, .. } if *alpha == 1.0 => {
                self.geometric_quantile(scale, u)
            }
            _ => {
                let mut tail = 1.0 - self.pmf(scale, 0);
                if tail < u {
                    return 0;
                }
                let mean = self.mean_size(scale);
                let mut last = 0;
                for (m, w) in self.weights(scale) {
                    tail -= w;
                    last = m;
                    // the second test stops on rounding residue far in the tail
                    if tail < u || (w < 1e-3 * f64::EPSILON * u && m as f64 > mean) {
                        return m;
                    }
                }
                last
            }
        }
    }

    /// The weak limit of `p(V, ·)` under the `V / λ` scaling, when known.
    pub fn limit_measure(&self) -> Option<LimitMeasure> {
        match self {
            BurstLaw::Geometric { lambda } => Some(LimitMeasure::Exponential { rate: *lambda }),
            BurstLaw::NegBinomial { alpha, lambda } => Some(LimitMeasure::Gamma {
                shape: *alpha,
                rate: *lambda,
            }),
            BurstLaw::Custom(_) => None,
        }
    }
}

/// Iterator over `(m, p(V, m))`, `m >= 1`.
pub struct BurstWeights<'a> {
    law: &'a BurstLaw,
    scale: f64,
    next_m: u64,
    current: f64,
    p: f64,
}

impl Iterator for BurstWeights<'_> {
    type Item = (u64, f64);

    fn next(&mut self) -> Option<(u64, f64)> {
        let m = self.next_m;
        let w = match self.law {
            BurstLaw::Custom(c) => {
                if m > (c.cap)(self.scale) {
                    return None;
                }
                (c.pmf)(self.scale, m)
            }
            _ => {
                let w = self.current;
                let a = self.law.shape();
                self.current *= self.p * (a + m as f64) / (m as f64 + 1.0);
                // refresh from the log form now and then to stop drift
                if m.is_multiple_of(4096) {
                    self.current = self.law.ln_pmf(self.scale, m + 1).exp();
                }
                w
            }
        };
        self.next_m += 1;
        Some((m, w))
    }
}

pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user density on `[0, upper]`, tabulated for cdf and quantile lookups.
#[derive(Clone)]
pub struct CustomDensity {
    density: DensityFn,
    upper: f64,
    grid: Arc<Vec<(f64, f64)>>,
    mean: f64,
}

impl fmt::Debug for CustomDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomDensity")
            .field("upper", &self.upper)
            .field("mean", &self.mean)
            .finish_non_exhaustive()
    }
}

impl CustomDensity {
    const PANELS: usize = 4096;

    /// Fails unless the density integrates to one within `1e-8`.
    pub fn new(density: DensityFn, upper: f64) -> Result<Self> {
        if !(upper > 0.0) || !upper.is_finite() {
            return Err(Error::invalid("custom density needs a finite positive upper bound"));
        }
        let h = upper / Self::PANELS as f64;
        let mut grid = Vec::with_capacity(Self::PANELS + 1);
        let mut acc = 0.0;
        let mut first_moment = 0.0;
        grid.push((0.0, 0.0));
        for k in 0..Self::PANELS {
            let a = k as f64 * h;
            let b = a + h;
            acc += adaptive_simpson(&mut |x| density(x), a, b, 1e-13, 30)?;
            first_moment += adaptive_simpson(&mut |x| x * density(x), a, b, 1e-13, 30)?;
            grid.push((b, acc));
        }
        if (acc - 1.0).abs() > 1e-8 {
            return Err(Error::invalid(format!(
                "custom density integrates to {acc}, not 1"
            )));
        }
        Ok(Self {
            density,
            upper,
            grid: Arc::new(grid),
            mean: first_moment,
        })
    }

    pub fn density(&self, x: f64) -> f64 {
        if (0.0..=self.upper).contains(&x) {
            (self.density)(x)
        } else {
            0.0
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= self.upper {
            return 1.0;
        }
        let h = self.upper / Self::PANELS as f64;
        let k = ((x / h) as usize).min(Self::PANELS - 1);
        let (a, base) = self.grid[k];
        let d = &self.density;
        base + adaptive_simpson(&mut |s| d(s), a, x, 1e-13, 30).unwrap_or(0.0)
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let idx = self.grid.partition_point(|&(_, c)| c < u);
        if idx == 0 {
            return 0.0;
        }
        if idx >= self.grid.len() {
            return self.upper;
        }
        let (x0, c0) = self.grid[idx - 1];
        let (x1, c1) = self.grid[idx];
        if c1 > c0 {
            x0 + (x1 - x0) * (u - c0) / (c1 - c0)
        } else {
            x0
        }
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }
}

/// Limit jump-size measure `μ` on the positive half-line.
#[derive(Debug, Clone)]
pub enum LimitMeasure {
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    Custom(CustomDensity),
}

impl LimitMeasure {
    pub fn mean(&self) -> f64 {
        match self {
            LimitMeasure::Exponential { rate } => 1.0 / rate,
            LimitMeasure::Gamma { shape, rate } => shape / rate,
            LimitMeasure::Custom(c) => c.mean,
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match self {
            LimitMeasure::Exponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    rate * (-rate * x).exp()
                }
            }
            LimitMeasure::Gamma { shape, rate } => gamma_density(*shape, *rate, x),
            LimitMeasure::Custom(c) => c.density(x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            LimitMeasure::Exponential { rate } => -(-rate * x).exp_m1(),
            LimitMeasure::Gamma { shape, rate } => gamma_lr(*shape, rate * x),
            LimitMeasure::Custom(c) => c.cdf(x),
        }
    }

    /// `μ[a, b)`, accurate for narrow intervals far in the tail.
    pub fn interval_mass(&self, a: f64, b: f64) -> f64 {
        match self {
            LimitMeasure::Exponential { rate } | LimitMeasure::Gamma { shape: 1.0, rate } => {
                let a = a.max(0.0);
                let b = b.max(0.0);
                (-rate * a).exp() * -(-rate * (b - a)).exp_m1()
            }
            LimitMeasure::Gamma { shape, rate } => {
                let (a, b) = (a.max(0.0), b.max(0.0));
                if rate * a > *shape {
                    gamma_ur(*shape, rate * a) - gamma_ur(*shape, rate * b)
                } else {
                    gamma_lr(*shape, rate * b) - gamma_lr(*shape, rate * a)
                }
            }
            LimitMeasure::Custom(c) => c.cdf(b) - c.cdf(a),
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            LimitMeasure::Exponential { rate } => -(-u).ln_1p() / rate,
            LimitMeasure::Gamma { shape, rate } => GammaDist::new(*shape, *rate)
                .expect("validated gamma parameters")
                .inverse_cdf(u.clamp(0.0, 1.0)),
            LimitMeasure::Custom(c) => c.quantile(u),
        }
    }

    /// Draw from `μ`. Exponential uses the inverse cdf on `(0, 1]`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            LimitMeasure::Exponential { rate } => -open_unit(rng).ln() / rate,
            LimitMeasure::Gamma { shape, rate } => Gamma::new(*shape, 1.0 / rate)
                .expect("validated gamma parameters")
                .sample(rng),
            LimitMeasure::Custom(c) => c.quantile(rng.random::<f64>()),
        }
    }

    /// Draw coupled to a uniform `u ∈ (0, 1]` whose survival level is `u`,
    /// matching [`BurstLaw::quantile`] (`P(M >= m) = p^m` ↔ `P(Z > z) = e^{-λz}`).
    pub fn survival_quantile(&self, u: f64) -> f64 {
        match self {
            LimitMeasure::Exponential { rate } => -u.ln() / rate,
            LimitMeasure::Gamma { shape, rate } => {
                let d = GammaDist::new(*shape, *rate).expect("validated gamma parameters");
                d.inverse_cdf((1.0 - u).clamp(0.0, 1.0))
            }
            LimitMeasure::Custom(c) => c.quantile(1.0 - u),
        }
    }

    /// `(shape, rate)` when `μ` is a gamma law (exponential included).
    pub fn gamma_parameters(&self) -> Option<(f64, f64)> {
        match self {
            LimitMeasure::Exponential { rate } => Some((1.0, *rate)),
            LimitMeasure::Gamma { shape, rate } => Some((*shape, *rate)),
            LimitMeasure::Custom(_) => None,
        }
    }

    pub fn is_finite_mean(&self) -> bool {
        self.mean().is_finite()
    }
}

pub(crate) fn gamma_density(shape: f64, rate: f64, x: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    if x == 0.0 {
        return match shape.partial_cmp(&1.0) {
            Some(std::cmp::Ordering::Less) => f64::INFINITY,
            Some(std::cmp::Ordering::Equal) => rate,
            _ => 0.0,
        };
    }
    GammaDist::new(shape, rate)
        .map(|d| d.pdf(x))
        .unwrap_or(f64::NAN)
}
