//! Convergence of the chain's stationary law to the limit's stationary density.

use crate::error::{Error, Result};
use crate::metrics::{w1_vs_cdf, SampleSet};
use crate::model::GeneModelParams;
use crate::row;
use crate::stationary::{gene_gddmc_stationary_pmf_with_tail, gene_pdmp_stationary_density, TruncatedPmf};

use super::config::StationaryConvergenceConfig;
use super::{strictly_decreasing, ExperimentReport};

const FIRST_TRUNCATION: usize = 64;
const LAST_TRUNCATION: usize = 1 << 26;

/// Closed-form stationary pmf, doubling the truncation from 64 until the
/// omitted tail is certified below the pmf tolerance.
pub fn auto_stationary_pmf(params: &GeneModelParams) -> Result<TruncatedPmf> {
    let mut n_max = FIRST_TRUNCATION;
    loop {
        match gene_gddmc_stationary_pmf_with_tail(params, n_max) {
            Err(Error::TruncationInsufficient { .. }) if n_max < LAST_TRUNCATION => n_max *= 2,
            other => return other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryCell {
    pub scale: f64,
    pub n_max: usize,
    pub w1: f64,
    pub chain_mean: f64,
    pub limit_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryConvergence {
    pub cells: Vec<StationaryCell>,
}

impl StationaryConvergence {
    pub fn decreasing(&self) -> bool {
        strictly_decreasing(&self.cells.iter().map(|c| c.w1).collect::<Vec<_>>())
    }

    /// W1 at the first scale over W1 at the last.
    pub fn reduction(&self) -> f64 {
        match (self.cells.first(), self.cells.last()) {
            (Some(a), Some(b)) => a.w1 / b.w1,
            _ => f64::NAN,
        }
    }

    pub fn report(&self, seed: u64) -> ExperimentReport {
        let mut r = ExperimentReport::new(
            "converge-stationary",
            seed,
            &["V", "n_max", "w1", "chain_mean", "limit_mean"],
        );
        for c in &self.cells {
            r.push_row(row![c.scale, c.n_max, c.w1, c.chain_mean, c.limit_mean])
                .expect("five cells per row");
        }
        r.note("decreasing", self.decreasing()).note("reduction", self.reduction());
        r
    }
}

/// W1 between the stationary pmf on `ℕ / V` and the limit density, for each
/// scale of a gene model.
pub fn run_stationary_convergence(cfg: &StationaryConvergenceConfig) -> Result<StationaryConvergence> {
    cfg.model.check()?;
    if cfg.scales.is_empty() || cfg.scales.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Config("scales must be a nonempty list of positive values".into()));
    }
    let density = gene_pdmp_stationary_density(&cfg.model.gene_params(Some(cfg.scales[0]))?)?;
    let limit_mean = density.mean();
    let cells = cfg
        .scales
        .iter()
        .map(|&v| {
            let pmf = auto_stationary_pmf(&cfg.model.gene_params(Some(v))?)?;
            let dist = &pmf.distribution;
            Ok(StationaryCell {
                scale: v,
                n_max: dist.len() - 1,
                w1: w1_vs_cdf(&SampleSet::from_distribution(dist), &density)?,
                chain_mean: dist.mean(),
                limit_mean,
            })
        })
        .collect::<Result<_>>()?;
    Ok(StationaryConvergence { cells })
}
