//! Contraction of coupled limit paths, against the dissipativity margin.

use crate::coupling::{contraction_rate_estimate, diagonal_dissipativity, dissipative_margin, ContractionConfig, ContractionFit};
use crate::error::{Error, Result};
use crate::pdmp::PdmpConfig;
use crate::row;

use super::config::ErgodicityConfig;
use super::ExperimentReport;

#[derive(Debug, Clone, PartialEq)]
pub struct Ergodicity {
    pub fit: ContractionFit,
    /// Dissipativity constant of the drift.
    pub r: f64,
    /// `r̃ = r - Σ L_i ∫|x| μ_i(dx)`.
    pub margin: f64,
    pub level: f64,
}

impl Ergodicity {
    /// The upper end of the band lies at or below `-r̃ + slack`.
    pub fn bound_holds(&self, slack: f64) -> bool {
        self.fit.upper <= -self.margin + slack
    }

    pub fn report(&self, seed: u64) -> ExperimentReport {
        let mut r = ExperimentReport::new(
            "ergodicity",
            seed,
            &["t", "mean_distance", "stderr", "coalesced_fraction"],
        );
        r.param("r", self.r).param("level", self.level);
        for row in &self.fit.rows {
            r.push_row(row![row.t, row.mean_distance, row.std_error, row.coalesced_fraction])
                .expect("four cells per row");
        }
        r.note("slope", self.fit.slope)
            .note("lower", self.fit.lower)
            .note("upper", self.fit.upper)
            .note("window", self.fit.window)
            .note("r_tilde", self.margin);
        r
    }
}

/// Coupled simulation from `(x0, y0)` and the fitted decay rate of `E|X_t - Y_t|`.
///
/// Without an explicit `r` the drift must be diagonal linear, where
/// `r = min_i r_i`.
pub fn run_ergodicity(cfg: &ErgodicityConfig, seed: u64) -> Result<Ergodicity> {
    cfg.model.check()?;
    let d = cfg.model.dim()?;
    if cfg.x0.len() != d || cfg.y0.len() != d {
        return Err(Error::Config(format!("x0 and y0 need {d} coordinates")));
    }
    if !(cfg.level > 0.0 && cfg.level < 1.0) {
        return Err(Error::Config("level must lie in (0, 1)".into()));
    }
    let times = cfg.times()?;
    let (_, spec) = cfg.model.build(Some(cfg.model.scale().unwrap_or(1.0)))?;
    let r = match cfg.r {
        Some(r) => r,
        None => diagonal_dissipativity(&spec)
            .ok_or_else(|| Error::Config("give r explicitly for drifts that are not diagonal linear".into()))?,
    };
    let margin = dissipative_margin(&spec, r)?;
    let fit = contraction_rate_estimate(
        &spec,
        &cfg.x0,
        &cfg.y0,
        &times,
        &ContractionConfig {
            n_reps: cfg.replicas,
            bootstrap: cfg.bootstrap,
            level: cfg.level,
            seed,
            pdmp: PdmpConfig::default(),
        },
    )?;
    Ok(Ergodicity {
        fit,
        r,
        margin,
        level: cfg.level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::parse_config;

    #[test]
    fn constant_rate_contracts_at_r() {
        let cfg: ErgodicityConfig = parse_config(
            r#"{"model": {"kind": "gene", "gene": {"r": 1, "lambda": 1, "c": {"kind": "constant", "value": 2}}},
                "x0": [0], "y0": [4], "horizon": 2, "step": 0.5, "replicas": 50, "bootstrap": 20}"#,
        )
        .unwrap();
        let out = run_ergodicity(&cfg, 4).unwrap();
        assert_eq!(out.margin, 1.0);
        assert!((out.fit.slope + 1.0).abs() < 1e-9);
        assert_eq!(out.report(4).rows().len(), 5);
    }
}
