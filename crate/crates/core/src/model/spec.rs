use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

use super::burst::{BurstLaw, LimitMeasure};
use super::rate::{Propensity, Rate};

/// A reaction-type transition `n -> n + m` firing at rate `V β_m(n / V)`.
#[derive(Debug, Clone)]
pub struct StoichiometricChannel {
    pub displacement: Vec<i64>,
    pub propensity: Propensity,
}

impl StoichiometricChannel {
    pub fn new(displacement: Vec<i64>, propensity: Propensity) -> Self {
        Self {
            displacement,
            propensity,
        }
    }
}

/// A bursting transition: rate `c_i`, mesoscopic size law `p_i(V, ·)` and
/// limit measure `μ_i`, acting along coordinate `axis`.
#[derive(Debug, Clone)]
pub struct BurstChannel {
    pub rate: Rate,
    pub meso_law: BurstLaw,
    pub limit: LimitMeasure,
    pub axis: Option<usize>,
}

impl BurstChannel {
    /// Channel whose limit measure is the known weak limit of `meso_law`.
    pub fn paired(rate: Rate, meso_law: BurstLaw, axis: Option<usize>) -> Result<Self> {
        let limit = meso_law
            .limit_measure()
            .ok_or_else(|| Error::invalid("custom burst laws need an explicit limit measure"))?;
        Ok(Self {
            rate,
            meso_law,
            limit,
            axis,
        })
    }

    /// Coordinate the burst lands on.
    #[inline]
    pub fn axis_index(&self) -> usize {
        self.axis.unwrap_or(0)
    }

    fn check(&self, dim: usize) -> Result<()> {
        match self.axis {
            Some(a) if a >= dim => Err(Error::invalid(format!(
                "burst axis {a} out of range for dimension {dim}"
            ))),
            None if dim > 1 => Err(Error::invalid(
                "bursts in more than one dimension need an axis",
            )),
            _ => Ok(()),
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(Error::invalid("dimension must be at least 1"))
    } else {
        Ok(())
    }
}

/// Mesoscopic chain on the lattice `{n / V : n ∈ ℕ^d}`.
#[derive(Debug, Clone)]
pub struct GddmcSpec {
    dim: usize,
    scale: f64,
    reactions: Vec<StoichiometricChannel>,
    bursts: Vec<BurstChannel>,
    burst_mass: Vec<f64>,
}

impl GddmcSpec {
    pub fn new(
        dim: usize,
        scale: f64,
        reactions: Vec<StoichiometricChannel>,
        bursts: Vec<BurstChannel>,
    ) -> Result<Self> {
        check_dim(dim)?;
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::invalid(format!("scale V must be > 0, got {scale}")));
        }
        for r in &reactions {
            if r.displacement.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.displacement.len(),
                });
            }
            if r.displacement.iter().all(|&m| m == 0) {
                return Err(Error::invalid("reaction displacement must be nonzero"));
            }
        }
        for b in &bursts {
            b.check(dim)?;
        }
        let burst_mass = bursts.iter().map(|b| b.meso_law.burst_mass(scale)).collect();
        Ok(Self {
            dim,
            scale,
            reactions,
            bursts,
            burst_mass,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn reactions(&self) -> &[StoichiometricChannel] {
        &self.reactions
    }

    pub fn bursts(&self) -> &[BurstChannel] {
        &self.bursts
    }

    /// `S_i(V) = Σ_{m>=1} p_i(V, m)` for each burst channel.
    pub fn burst_mass(&self) -> &[f64] {
        &self.burst_mass
    }

    /// Lattice point `n` as a concentration `n / V`.
    pub fn concentration(&self, n: &[i64], out: &mut [f64]) {
        for (o, &k) in out.iter_mut().zip(n) {
            *o = k as f64 / self.scale;
        }
    }
}

pub type FieldFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Drift of the limiting flow.
#[derive(Clone)]
pub enum VectorField {
    /// `F_i(x) = -r_i x_i`
    DiagonalLinear(Vec<f64>),
    /// `F(x) = Σ_m m β_m(x)`
    Reactions(Vec<StoichiometricChannel>),
    Custom(FieldFn),
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VectorField::DiagonalLinear(r) => f.debug_tuple("DiagonalLinear").field(r).finish(),
            VectorField::Reactions(r) => f.debug_tuple("Reactions").field(r).finish(),
            VectorField::Custom(_) => f.write_str("Custom(<fn>)"),
        }
    }
}

/// Piecewise-deterministic limit: flow of `F` plus bursts.
#[derive(Debug, Clone)]
pub struct PdmpSpec {
    dim: usize,
    field: VectorField,
    field_lipschitz: Option<f64>,
    bursts: Vec<BurstChannel>,
}

impl PdmpSpec {
    pub fn new(
        dim: usize,
        field: VectorField,
        field_lipschitz: Option<f64>,
        bursts: Vec<BurstChannel>,
    ) -> Result<Self> {
        check_dim(dim)?;
        match &field {
            VectorField::DiagonalLinear(r) => {
                if r.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: r.len(),
                    });
                }
                if r.iter().any(|v| !(*v >= 0.0)) {
                    return Err(Error::invalid("decay rates must be >= 0"));
                }
            }
            VectorField::Reactions(rs) => {
                if let Some(r) = rs.iter().find(|r| r.displacement.len() != dim) {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: r.displacement.len(),
                    });
                }
            }
            VectorField::Custom(_) => {}
        }
        for b in &bursts {
            b.check(dim)?;
        }
        let field_lipschitz = match (&field, field_lipschitz) {
            (VectorField::DiagonalLinear(r), None) => Some(r.iter().cloned().fold(0.0, f64::max)),
            (_, l) => l,
        };
        Ok(Self {
            dim,
            field,
            field_lipschitz,
            bursts,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }

    pub fn field_lipschitz(&self) -> Option<f64> {
        self.field_lipschitz
    }

    pub fn bursts(&self) -> &[BurstChannel] {
        &self.bursts
    }

    /// Decay rates when the field is diagonal linear.
    pub fn diagonal_rates(&self) -> Option<&[f64]> {
        match &self.field {
            VectorField::DiagonalLinear(r) => Some(r),
            _ => None,
        }
    }

    /// Total burst rate `c(x) = Σ_i c_i(x)`.
    pub fn total_burst_rate(&self, x: &[f64]) -> f64 {
        self.bursts.iter().map(|b| b.rate.eval(x)).sum()
    }

    /// `Some(c)` when every burst rate is constant.
    pub fn constant_total_rate(&self) -> Option<f64> {
        self.bursts
            .iter()
            .map(|b| b.rate.as_constant())
            .sum::<Option<f64>>()
    }
}

/// Anything with a drift `F`.
pub trait Drift {
    fn dim(&self) -> usize;
    fn drift(&self, x: &[f64], out: &mut [f64]);
}

fn reaction_drift(reactions: &[StoichiometricChannel], x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for r in reactions {
        let beta = r.propensity.eval(x);
        if beta != 0.0 {
            for (o, &m) in out.iter_mut().zip(&r.displacement) {
                *o += m as f64 * beta;
            }
        }
    }
}

impl Drift for GddmcSpec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        reaction_drift(&self.reactions, x, out);
    }
}

impl Drift for PdmpSpec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        match &self.field {
            VectorField::DiagonalLinear(r) => {
                for ((o, ri), xi) in out.iter_mut().zip(r).zip(x) {
                    *o = -ri * xi;
                }
            }
            VectorField::Reactions(rs) => reaction_drift(rs, x, out),
            VectorField::Custom(f) => f(x, out),
        }
    }
}

/// `F(x)`: `Σ_m m β_m(x)` for a chain, the stored field for a PDMP.
pub fn vector_field<S: Drift + ?Sized>(spec: &S, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; spec.dim()];
    spec.drift(x, &mut out);
    out
}
