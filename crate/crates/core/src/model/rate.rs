//! Evaluable rate functions: transcription rates `c_i` for burst channels and
//! propensities `β_m` for stoichiometric channels.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// One regulator entry of a Hill-type rate: gene `from` acting with `exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Regulator {
    pub from: usize,
    #[serde(rename = "exp")]
    pub exponent: f64,
}

/// `(s + Σ_E x_j^μ) / (1 + Σ_E x_j^μ + Σ_I x_j^ν)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HillRate {
    pub basal: f64,
    pub excite: Vec<Regulator>,
    pub inhibit: Vec<Regulator>,
}

impl HillRate {
    pub fn numerator(&self, x: &[f64]) -> f64 {
        self.basal + self.excite.iter().map(|r| x[r.from].powf(r.exponent)).sum::<f64>()
    }

    pub fn denominator(&self, x: &[f64]) -> f64 {
        1.0 + self.excite.iter().map(|r| x[r.from].powf(r.exponent)).sum::<f64>()
            + self.inhibit.iter().map(|r| x[r.from].powf(r.exponent)).sum::<f64>()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.numerator(x) / self.denominator(x)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|g| *g = 0.0);
        let num = self.numerator(x);
        let den = self.denominator(x);
        let d = |r: &Regulator| {
            if x[r.from] > 0.0 {
                r.exponent * x[r.from].powf(r.exponent - 1.0)
            } else if r.exponent == 1.0 {
                1.0
            } else {
                0.0
            }
        };
        for r in &self.excite {
            let dr = d(r);
            out[r.from] += (dr * den - num * dr) / (den * den);
        }
        for r in &self.inhibit {
            out[r.from] -= num * d(r) / (den * den);
        }
    }

    pub fn min_exponent(&self) -> f64 {
        self.excite
            .iter()
            .chain(&self.inhibit)
            .map(|r| r.exponent)
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest gradient norm found on a deterministic sample of `[0, extent]^dim`.
    ///
    /// Only meaningful when every exponent is at least one; smaller exponents
    /// have unbounded slope at the boundary.
    pub fn estimate_lipschitz(&self, dim: usize, extent: f64) -> f64 {
        let mut rng = stream_rng(0x4c69_7073, 0, 0);
        let mut x = vec![0.0; dim];
        let mut g = vec![0.0; dim];
        let mut best: f64 = 0.0;
        let probe = |x: &[f64], g: &mut [f64]| {
            self.gradient(x, g);
            g.iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        for _ in 0..4096 {
            for xi in x.iter_mut() {
                // bias samples towards the boundary where Hill slopes peak
                let u: f64 = rng.random();
                *xi = extent * u * u;
            }
            best = best.max(probe(&x, &mut g));
        }
        // axis lines through the origin
        for axis in 0..dim {
            x.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..=512 {
                x[axis] = extent * k as f64 / 512.0;
                best = best.max(probe(&x, &mut g));
            }
        }
        best
    }
}

/// Functional form of a burst-channel rate `c_i`.
#[derive(Clone)]
pub enum RateFn {
    Constant(f64),
    /// `intercept + Σ_j slopes_j x_j`
    Affine { intercept: f64, slopes: Vec<f64> },
    /// `base + amplitude · x_a / (half_saturation + x_a)`
    Saturating {
        base: f64,
        amplitude: f64,
        half_saturation: f64,
        axis: usize,
    },
    Hill(HillRate),
    Custom(ScalarFn),
}

impl fmt::Debug for RateFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateFn::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            RateFn::Affine { intercept, slopes } => f
                .debug_struct("Affine")
                .field("intercept", intercept)
                .field("slopes", slopes)
                .finish(),
            RateFn::Saturating {
                base,
                amplitude,
                half_saturation,
                axis,
            } => f
                .debug_struct("Saturating")
                .field("base", base)
                .field("amplitude", amplitude)
                .field("half_saturation", half_saturation)
                .field("axis", axis)
                .finish(),
            RateFn::Hill(h) => f.debug_tuple("Hill").field(h).finish(),
            RateFn::Custom(_) => f.write_str("Custom(<fn>)"),
        }
    }
}

/// A rate function with its Lipschitz metadata.
#[derive(Debug, Clone)]
pub struct Rate {
    func: RateFn,
    lipschitz: Option<f64>,
}

impl Rate {
    pub fn constant(value: f64) -> Result<Self> {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::invalid(format!("constant rate must be finite and >= 0, got {value}")));
        }
        Ok(Self {
            func: RateFn::Constant(value),
            lipschitz: Some(0.0),
        })
    }

    pub fn affine(intercept: f64, slopes: Vec<f64>) -> Result<Self> {
        if !(intercept >= 0.0) || slopes.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::invalid("affine rate needs nonnegative intercept and slopes"));
        }
        let l = slopes.iter().map(|s| s * s).sum::<f64>().sqrt();
        Ok(Self {
            func: RateFn::Affine { intercept, slopes },
            lipschitz: Some(l),
        })
    }

    pub fn saturating(base: f64, amplitude: f64, half_saturation: f64, axis: usize) -> Result<Self> {
        if !(base >= 0.0) || !(half_saturation > 0.0) || !(base + amplitude >= 0.0) {
            return Err(Error::invalid(
                "saturating rate needs base >= 0, half_saturation > 0, base + amplitude >= 0",
            ));
        }
        Ok(Self {
            func: RateFn::Saturating {
                base,
                amplitude,
                half_saturation,
                axis,
            },
            lipschitz: Some(amplitude.abs() / half_saturation),
        })
    }

    /// Hill-type rate. With every exponent `>= 1` a Lipschitz bound is
    /// estimated over `[0, extent]^dim`; otherwise the rate is accepted
    /// without one and a warning is logged.
    pub fn hill(h: HillRate, dim: usize, extent: f64) -> Result<Self> {
        if !(h.basal >= 0.0) {
            return Err(Error::invalid("Hill basal rate must be >= 0"));
        }
        for r in h.excite.iter().chain(&h.inhibit) {
            if r.from >= dim {
                return Err(Error::invalid(format!(
                    "regulator index {} out of range for {dim} genes",
                    r.from
                )));
            }
            if !(r.exponent > 0.0) {
                return Err(Error::invalid("Hill exponents must be > 0"));
            }
        }
        for e in &h.excite {
            if h.inhibit.iter().any(|i| i.from == e.from) {
                return Err(Error::invalid(format!(
                    "gene {} is both excitatory and inhibitory",
                    e.from
                )));
            }
        }
        let lipschitz = if h.min_exponent() >= 1.0 {
            Some(h.estimate_lipschitz(dim, extent))
        } else {
            log::warn!(
                "Hill exponent {} < 1: rate is not globally Lipschitz at the boundary",
                h.min_exponent()
            );
            None
        };
        Ok(Self {
            func: RateFn::Hill(h),
            lipschitz,
        })
    }

    pub fn custom(f: ScalarFn, lipschitz: Option<f64>) -> Self {
        Self {
            func: RateFn::Custom(f),
            lipschitz,
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.func {
            RateFn::Constant(c) => *c,
            RateFn::Affine { intercept, slopes } => {
                intercept + slopes.iter().zip(x).map(|(s, v)| s * v).sum::<f64>()
            }
            RateFn::Saturating {
                base,
                amplitude,
                half_saturation,
                axis,
            } => {
                let v = x[*axis];
                base + amplitude * v / (half_saturation + v)
            }
            RateFn::Hill(h) => h.eval(x),
            RateFn::Custom(f) => f(x),
        }
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn func(&self) -> &RateFn {
        &self.func
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self.func {
            RateFn::Constant(c) => Some(c),
            _ => None,
        }
    }
}

/// Propensity `β_m` of a stoichiometric channel (events per time per volume).
#[derive(Clone)]
pub enum Propensity {
    Constant(f64),
    /// `coefficient · x_species`
    Linear { coefficient: f64, species: usize },
    /// `k / Π a_i! · Π x_i^{a_i}`
    MassAction { rate_constant: f64, reactants: Vec<u32> },
    Custom(ScalarFn),
}

impl fmt::Debug for Propensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Propensity::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            Propensity::Linear { coefficient, species } => f
                .debug_struct("Linear")
                .field("coefficient", coefficient)
                .field("species", species)
                .finish(),
            Propensity::MassAction {
                rate_constant,
                reactants,
            } => f
                .debug_struct("MassAction")
                .field("rate_constant", rate_constant)
                .field("reactants", reactants)
                .finish(),
            Propensity::Custom(_) => f.write_str("Custom(<fn>)"),
        }
    }
}

impl Propensity {
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Propensity::Constant(c) => *c,
            Propensity::Linear {
                coefficient,
                species,
            } => coefficient * x[*species],
            Propensity::MassAction {
                rate_constant,
                reactants,
            } => {
                let mut v = *rate_constant;
                for (a, xi) in reactants.iter().zip(x) {
                    for k in 1..=*a {
                        v *= xi / k as f64;
                    }
                }
                v
            }
            Propensity::Custom(f) => f(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg(from: usize, exponent: f64) -> Regulator {
        Regulator { from, exponent }
    }

    #[test]
    fn hill_examples() {
        let h = HillRate {
            basal: 2.0,
            ..Default::default()
        };
        assert_eq!(h.eval(&[5.0, 7.0]), 2.0);

        let h = HillRate {
            basal: 2.0,
            excite: vec![reg(1, 1.0)],
            inhibit: vec![],
        };
        assert!((h.eval(&[0.3, 1.0]) - 1.5).abs() < 1e-15);

        let h = HillRate {
            basal: 4.0,
            excite: vec![],
            inhibit: vec![reg(1, 2.0)],
        };
        assert!((h.eval(&[0.0, 3.0]) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn hill_rejects_bad_regulators() {
        let h = HillRate {
            basal: 1.0,
            excite: vec![reg(3, 1.0)],
            inhibit: vec![],
        };
        assert!(Rate::hill(h, 2, 10.0).is_err());
        let h = HillRate {
            basal: 1.0,
            excite: vec![reg(0, 1.0)],
            inhibit: vec![reg(0, 2.0)],
        };
        assert!(Rate::hill(h, 2, 10.0).is_err());
    }

    #[test]
    fn hill_lipschitz_estimate_bounds_difference_quotients() {
        let h = HillRate {
            basal: 0.5,
            excite: vec![reg(0, 2.0)],
            inhibit: vec![reg(1, 1.0)],
        };
        let rate = Rate::hill(h, 2, 10.0).unwrap();
        let l = rate.lipschitz().unwrap();
        let mut rng = stream_rng(1, 0, 0);
        for _ in 0..2000 {
            let x = [rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0];
            let y = [rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0];
            let d = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
            let diff = (rate.eval(&x) - rate.eval(&y)).abs();
            assert!(diff <= l * d * (1.0 + 1e-6) + 1e-12);
        }
    }

    #[test]
    fn sublinear_hill_has_no_lipschitz_constant() {
        let h = HillRate {
            basal: 1.0,
            excite: vec![reg(0, 0.5)],
            inhibit: vec![],
        };
        assert!(Rate::hill(h, 1, 10.0).unwrap().lipschitz().is_none());
    }

    #[test]
    fn propensities() {
        assert_eq!(Propensity::Linear { coefficient: 2.0, species: 1 }.eval(&[5.0, 3.0]), 6.0);
        let dimer = Propensity::MassAction {
            rate_constant: 4.0,
            reactants: vec![2, 1],
        };
        assert!((dimer.eval(&[3.0, 2.0]) - 4.0 / 2.0 * 9.0 * 2.0).abs() < 1e-12);
    }
}
