//! Model definitions for the mesoscopic chain and its piecewise-deterministic limit.

pub mod builders;
pub mod burst;
pub mod config;
pub mod rate;
pub mod spec;
pub mod validate;

pub use builders::{build_gene_model, build_grn_model, hill_rate, GeneModelParams, GeneSpec, GrnParams};
pub use burst::{BurstLaw, CustomDensity, CustomPmf, LimitMeasure};
pub use config::{LawConfig, ModelConfig, ModelKind, RateConfig};
pub use rate::{HillRate, Propensity, Rate, RateFn, Regulator};
pub use spec::{vector_field, BurstChannel, Drift, GddmcSpec, PdmpSpec, StoichiometricChannel, VectorField};
pub use validate::{validate_gddmc, validate_pdmp, Diagnostic, Diagnostics, ValidationConfig};
