//! JSON model documents.
//!
//! ```json
//! {"kind": "gene", "gene": {"r": 1, "lambda": 1, "V": 50, "c": {"kind": "constant", "value": 2}}}
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::builders::{build_gene_model, build_grn_model, GeneModelParams, GeneSpec, GrnParams};
use super::burst::BurstLaw;
use super::rate::{HillRate, Propensity, Rate, Regulator};
use super::spec::{BurstChannel, GddmcSpec, PdmpSpec, StoichiometricChannel, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gene,
    Grn,
    Custom,
}

/// Transcription / burst rate `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateConfig {
    Constant {
        value: f64,
    },
    Affine {
        intercept: f64,
        slopes: Vec<f64>,
    },
    Saturating {
        base: f64,
        amplitude: f64,
        half_saturation: f64,
        #[serde(default)]
        axis: usize,
    },
    Hill {
        basal: f64,
        #[serde(default)]
        excite: Vec<Regulator>,
        #[serde(default)]
        inhibit: Vec<Regulator>,
        #[serde(default = "default_extent")]
        extent: f64,
    },
}

fn default_extent() -> f64 {
    10.0
}

impl RateConfig {
    pub fn build(&self, dim: usize) -> Result<Rate> {
        match self {
            RateConfig::Constant { value } => Rate::constant(*value),
            RateConfig::Affine { intercept, slopes } => {
                if slopes.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: slopes.len(),
                    });
                }
                Rate::affine(*intercept, slopes.clone())
            }
            RateConfig::Saturating {
                base,
                amplitude,
                half_saturation,
                axis,
            } => {
                if *axis >= dim {
                    return Err(Error::invalid(format!("saturating axis {axis} out of range")));
                }
                Rate::saturating(*base, *amplitude, *half_saturation, *axis)
            }
            RateConfig::Hill {
                basal,
                excite,
                inhibit,
                extent,
            } => Rate::hill(
                HillRate {
                    basal: *basal,
                    excite: excite.clone(),
                    inhibit: inhibit.clone(),
                },
                dim,
                *extent,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneConfig {
    pub r: f64,
    pub lambda: f64,
    #[serde(rename = "V", default)]
    pub scale: Option<f64>,
    pub c: RateConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrnConfig {
    pub genes: Vec<GeneSpec>,
    #[serde(default = "default_extent")]
    pub lipschitz_extent: f64,
    #[serde(rename = "V", default)]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PropensityConfig {
    Constant { value: f64 },
    Linear { coefficient: f64, species: usize },
    MassAction { rate_constant: f64, reactants: Vec<u32> },
}

impl PropensityConfig {
    fn build(&self) -> Propensity {
        match self {
            PropensityConfig::Constant { value } => Propensity::Constant(*value),
            PropensityConfig::Linear {
                coefficient,
                species,
            } => Propensity::Linear {
                coefficient: *coefficient,
                species: *species,
            },
            PropensityConfig::MassAction {
                rate_constant,
                reactants,
            } => Propensity::MassAction {
                rate_constant: *rate_constant,
                reactants: reactants.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionConfig {
    pub displacement: Vec<i64>,
    pub propensity: PropensityConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawConfig {
    Geometric { lambda: f64 },
    NegBinomial { alpha: f64, lambda: f64 },
}

impl LawConfig {
    pub fn build(&self) -> Result<BurstLaw> {
        match self {
            LawConfig::Geometric { lambda } => BurstLaw::geometric(*lambda),
            LawConfig::NegBinomial { alpha, lambda } => BurstLaw::neg_binomial(*alpha, *lambda),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BurstConfig {
    pub rate: RateConfig,
    pub law: LawConfig,
    #[serde(default)]
    pub axis: Option<usize>,
}

/// Drift of the limit: either `Σ m β_m` from the reactions, or diagonal decay.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldConfig {
    #[default]
    Reactions,
    DiagonalLinear { rates: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomConfig {
    pub dim: usize,
    #[serde(rename = "V", default)]
    pub scale: Option<f64>,
    #[serde(default)]
    pub reactions: Vec<ReactionConfig>,
    #[serde(default)]
    pub bursts: Vec<BurstConfig>,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default)]
    pub field_lipschitz: Option<f64>,
}

/// A model document: `kind` selects which of the sections is read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gene: Option<GeneConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grn: Option<GrnConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomConfig>,
}

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T> {
    s.as_ref()
        .ok_or_else(|| Error::Config(format!("model kind \"{name}\" needs a \"{name}\" section")))
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn gene(config: GeneConfig) -> Self {
        Self {
            kind: ModelKind::Gene,
            gene: Some(config),
            grn: None,
            custom: None,
        }
    }

    /// Section presence and dimension checks that do not need a scale.
    pub fn check(&self) -> Result<()> {
        match self.kind {
            ModelKind::Gene => {
                let g = section(&self.gene, "gene")?;
                g.c.build(1)?;
            }
            ModelKind::Grn => {
                self.grn_params()?.validate()?;
            }
            ModelKind::Custom => {
                section(&self.custom, "custom")?;
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> Result<usize> {
        Ok(match self.kind {
            ModelKind::Gene => 1,
            ModelKind::Grn => section(&self.grn, "grn")?.genes.len(),
            ModelKind::Custom => section(&self.custom, "custom")?.dim,
        })
    }

    /// The scale `V` given in the document, if any.
    pub fn scale(&self) -> Option<f64> {
        match self.kind {
            ModelKind::Gene => self.gene.as_ref().and_then(|g| g.scale),
            ModelKind::Grn => self.grn.as_ref().and_then(|g| g.scale),
            ModelKind::Custom => self.custom.as_ref().and_then(|g| g.scale),
        }
    }

    fn resolve_scale(&self, scale: Option<f64>) -> Result<f64> {
        scale
            .or_else(|| self.scale())
            .ok_or_else(|| Error::Config("no scale V given in the model or the experiment".into()))
    }

    /// Gene-model parameters, for the closed-form stationary laws.
    pub fn gene_params(&self, scale: Option<f64>) -> Result<GeneModelParams> {
        if self.kind != ModelKind::Gene {
            return Err(Error::Config("operation requires a gene model".into()));
        }
        let g = section(&self.gene, "gene")?;
        GeneModelParams::new(g.r, g.c.build(1)?, g.lambda, self.resolve_scale(scale)?)
    }

    pub fn grn_params(&self) -> Result<GrnParams> {
        let g = section(&self.grn, "grn")?;
        Ok(GrnParams {
            genes: g.genes.clone(),
            lipschitz_extent: g.lipschitz_extent,
        })
    }

    /// Builds the chain and its limit; `scale` overrides the document's `V`.
    pub fn build(&self, scale: Option<f64>) -> Result<(GddmcSpec, PdmpSpec)> {
        let v = self.resolve_scale(scale)?;
        match self.kind {
            ModelKind::Gene => build_gene_model(&self.gene_params(Some(v))?),
            ModelKind::Grn => build_grn_model(&self.grn_params()?, v),
            ModelKind::Custom => build_custom(section(&self.custom, "custom")?, v),
        }
    }
}

fn build_custom(cfg: &CustomConfig, scale: f64) -> Result<(GddmcSpec, PdmpSpec)> {
    let reactions: Vec<StoichiometricChannel> = cfg
        .reactions
        .iter()
        .map(|r| {
            if let PropensityConfig::Linear { species, .. } = r.propensity {
                if species >= cfg.dim {
                    return Err(Error::invalid(format!("species {species} out of range")));
                }
            }
            if let PropensityConfig::MassAction { reactants, .. } = &r.propensity {
                if reactants.len() != cfg.dim {
                    return Err(Error::DimensionMismatch {
                        expected: cfg.dim,
                        got: reactants.len(),
                    });
                }
            }
            Ok(StoichiometricChannel::new(r.displacement.clone(), r.propensity.build()))
        })
        .collect::<Result<_>>()?;
    let bursts: Vec<BurstChannel> = cfg
        .bursts
        .iter()
        .map(|b| BurstChannel::paired(b.rate.build(cfg.dim)?, b.law.build()?, b.axis))
        .collect::<Result<_>>()?;
    let field = match &cfg.field {
        FieldConfig::Reactions => VectorField::Reactions(reactions.clone()),
        FieldConfig::DiagonalLinear { rates } => VectorField::DiagonalLinear(rates.clone()),
    };
    let chain = GddmcSpec::new(cfg.dim, scale, reactions, bursts.clone())?;
    let limit = PdmpSpec::new(cfg.dim, field, cfg.field_lipschitz, bursts)?;
    Ok((chain, limit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::spec::vector_field;

    #[test]
    fn parses_gene_document() {
        let cfg = ModelConfig::from_json(
            r#"{"kind":"gene","gene":{"r":1,"lambda":1,"V":50,"c":{"kind":"saturating","base":1,"amplitude":0.5,"half_saturation":1}}}"#,
        )
        .unwrap();
        let (chain, limit) = cfg.build(None).unwrap();
        assert_eq!(chain.scale(), 50.0);
        assert_eq!(limit.bursts()[0].rate.lipschitz(), Some(0.5));
        let (chain, _) = cfg.build(Some(10.0)).unwrap();
        assert_eq!(chain.scale(), 10.0);
    }

    #[test]
    fn parses_grn_document() {
        let cfg = ModelConfig::from_json(
            r#"{"kind":"grn","grn":{"V":20,"genes":[
                {"r":1,"s":2,"lambda":1,"excite":[{"from":1,"exp":1}]},
                {"r":2,"s":1,"alpha":2,"lambda":4,"inhibit":[{"from":0,"exp":2}]}]}}"#,
        )
        .unwrap();
        assert_eq!(cfg.dim().unwrap(), 2);
        let (_, limit) = cfg.build(None).unwrap();
        assert_eq!(vector_field(&limit, &[1.0, 1.0]), vec![-1.0, -2.0]);
    }

    #[test]
    fn parses_custom_document() {
        let cfg = ModelConfig::from_json(
            r#"{"kind":"custom","custom":{"dim":1,"V":10,
                "reactions":[{"displacement":[-1],"propensity":{"kind":"linear","coefficient":1.5,"species":0}}],
                "bursts":[{"rate":{"kind":"constant","value":1},"law":{"kind":"neg_binomial","alpha":2,"lambda":1}}]}}"#,
        )
        .unwrap();
        let (chain, limit) = cfg.build(None).unwrap();
        assert_eq!(vector_field(&chain, &[2.0]), vector_field(&limit, &[2.0]));
    }

    #[test]
    fn rejects_unknown_keys_and_missing_sections() {
        let unknown = r#"{"kind":"gene","gene":{"r":1,"lambda":1,"c":{"kind":"constant","value":2},"bogus":1}}"#;
        assert!(ModelConfig::from_json(unknown).unwrap_err().is_config());
        let missing = r#"{"kind":"grn"}"#;
        assert!(ModelConfig::from_json(missing).unwrap_err().is_config());
        let no_scale = r#"{"kind":"gene","gene":{"r":1,"lambda":1,"c":{"kind":"constant","value":2}}}"#;
        let cfg = ModelConfig::from_json(no_scale).unwrap();
        assert!(cfg.build(None).unwrap_err().is_config());
    }
}
