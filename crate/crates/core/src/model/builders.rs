use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::burst::BurstLaw;
use super::rate::{HillRate, Propensity, Rate, Regulator};
use super::spec::{BurstChannel, GddmcSpec, PdmpSpec, StoichiometricChannel, VectorField};

/// Single unregulated or autoregulated gene: linear degradation at rate `r`,
/// geometric bursts with transcription rate `c`.
#[derive(Debug, Clone)]
pub struct GeneModelParams {
    pub degradation: f64,
    pub transcription: Rate,
    pub lambda: f64,
    pub scale: f64,
}

impl GeneModelParams {
    pub fn new(degradation: f64, transcription: Rate, lambda: f64, scale: f64) -> Result<Self> {
        let p = Self {
            degradation,
            transcription,
            lambda,
            scale,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.degradation > 0.0) {
            return Err(Error::invalid(format!("degradation rate r must be > 0, got {}", self.degradation)));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::invalid(format!("burst scale lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.scale > 0.0) {
            return Err(Error::invalid(format!("scale V must be > 0, got {}", self.scale)));
        }
        Ok(())
    }

    /// `p_V = V / (V + λ)`.
    pub fn success_probability(&self) -> f64 {
        self.scale / (self.scale + self.lambda)
    }

    pub fn with_scale(&self, scale: f64) -> Self {
        Self {
            scale,
            ..self.clone()
        }
    }
}

/// Chain with `β_{-1}(x) = r x` and geometric bursts; limit with `F(x) = -r x`
/// and exponential bursts.
pub fn build_gene_model(params: &GeneModelParams) -> Result<(GddmcSpec, PdmpSpec)> {
    params.validate()?;
    let law = BurstLaw::geometric(params.lambda)?;
    let burst = BurstChannel::paired(params.transcription.clone(), law, None)?;
    let decay = StoichiometricChannel::new(
        vec![-1],
        Propensity::Linear {
            coefficient: params.degradation,
            species: 0,
        },
    );
    let chain = GddmcSpec::new(1, params.scale, vec![decay], vec![burst.clone()])?;
    let limit = PdmpSpec::new(
        1,
        VectorField::DiagonalLinear(vec![params.degradation]),
        Some(params.degradation),
        vec![burst],
    )?;
    Ok((chain, limit))
}

/// One gene of a regulatory network. Regulator indices are zero-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneSpec {
    pub r: f64,
    pub s: f64,
    #[serde(default = "unit")]
    pub alpha: f64,
    pub lambda: f64,
    #[serde(default)]
    pub excite: Vec<Regulator>,
    #[serde(default)]
    pub inhibit: Vec<Regulator>,
}

fn unit() -> f64 {
    1.0
}

fn default_extent() -> f64 {
    10.0
}

/// Network of `d` genes with Hill-type cross regulation and negative-binomial bursts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrnParams {
    pub genes: Vec<GeneSpec>,
    /// Box `[0, extent]^d` over which Hill Lipschitz bounds are estimated.
    #[serde(default = "default_extent")]
    pub lipschitz_extent: f64,
}

impl GrnParams {
    pub fn dim(&self) -> usize {
        self.genes.len()
    }

    fn hill(&self, i: usize) -> HillRate {
        let g = &self.genes[i];
        HillRate {
            basal: g.s,
            excite: g.excite.clone(),
            inhibit: g.inhibit.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::invalid("network needs at least one gene"));
        }
        for (i, g) in self.genes.iter().enumerate() {
            if !(g.r >= 0.0) || !(g.s >= 0.0) {
                return Err(Error::invalid(format!("gene {i}: rates must be >= 0")));
            }
            if !(g.alpha > 0.0) || !(g.lambda > 0.0) {
                return Err(Error::invalid(format!("gene {i}: alpha and lambda must be > 0")));
            }
            for reg in g.excite.iter().chain(&g.inhibit) {
                if reg.from >= d {
                    return Err(Error::invalid(format!(
                        "gene {i}: regulator {} outside 0..{d}",
                        reg.from
                    )));
                }
                if !(reg.exponent > 0.0) {
                    return Err(Error::invalid(format!("gene {i}: exponents must be > 0")));
                }
            }
            if g.excite.iter().any(|e| g.inhibit.iter().any(|h| h.from == e.from)) {
                return Err(Error::invalid(format!(
                    "gene {i}: excitatory and inhibitory sets overlap"
                )));
            }
        }
        Ok(())
    }
}

/// Transcription rate of gene `i` at concentration `x`.
pub fn hill_rate(params: &GrnParams, i: usize, x: &[f64]) -> f64 {
    params.hill(i).eval(x)
}

pub fn build_grn_model(params: &GrnParams, scale: f64) -> Result<(GddmcSpec, PdmpSpec)> {
    params.validate()?;
    let d = params.dim();
    let mut reactions = Vec::with_capacity(d);
    let mut bursts = Vec::with_capacity(d);
    for (i, g) in params.genes.iter().enumerate() {
        let mut m = vec![0; d];
        m[i] = -1;
        reactions.push(StoichiometricChannel::new(
            m,
            Propensity::Linear {
                coefficient: g.r,
                species: i,
            },
        ));
        let rate = Rate::hill(params.hill(i), d, params.lipschitz_extent)?;
        let law = BurstLaw::neg_binomial(g.alpha, g.lambda)?;
        bursts.push(BurstChannel::paired(rate, law, Some(i))?);
    }
    let decay: Vec<f64> = params.genes.iter().map(|g| g.r).collect();
    let chain = GddmcSpec::new(d, scale, reactions, bursts.clone())?;
    let limit = PdmpSpec::new(d, VectorField::DiagonalLinear(decay), None, bursts)?;
    Ok((chain, limit))
}
