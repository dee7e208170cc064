//! The three conditions a burst-size family must meet for the limit theorem:
//! (a) a finite mean size, (b) vanishing mass at zero, (c) local agreement of
//! `p(V, m)` with the limit measure on the cells `[m/V, (m+1)/V)`.

use crate::error::{Error, Result};
use crate::model::BurstLaw;
use crate::row;

use super::config::ConditionsConfig;
use super::{strictly_decreasing, ExperimentReport};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionsRow {
    pub scale: f64,
    /// `Σ_{m>=1} m p(V, m)`.
    pub mean_size: f64,
    /// `1 - Σ_{m>=1} p(V, m) = p(V, 0)`.
    pub deficit: f64,
    /// `V^d̃ sup_{0<m<=kV} |p(V, m) - μ[m/V, (m+1)/V)|`.
    pub scaled_gap: f64,
    /// The `m` attaining the supremum.
    pub argmax: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BurstConditions {
    pub k: f64,
    pub effective_dim: usize,
    pub rows: Vec<ConditionsRow>,
}

impl BurstConditions {
    pub fn mean_finite(&self) -> bool {
        self.rows.iter().all(|r| r.mean_size.is_finite())
    }

    pub fn deficit_decreasing(&self) -> bool {
        strictly_decreasing(&self.rows.iter().map(|r| r.deficit).collect::<Vec<_>>())
    }

    pub fn gap_decreasing(&self) -> bool {
        strictly_decreasing(&self.rows.iter().map(|r| r.scaled_gap).collect::<Vec<_>>())
    }

    pub fn report(&self, seed: u64) -> ExperimentReport {
        let mut r = ExperimentReport::new(
            "check-conditions",
            seed,
            &["V", "mean_size", "deficit", "scaled_gap", "argmax"],
        );
        r.param("k", self.k).param("effective_dim", self.effective_dim);
        for row in &self.rows {
            r.push_row(row![row.scale, row.mean_size, row.deficit, row.scaled_gap, row.argmax])
                .expect("five cells per row");
        }
        r.note("mean_finite", self.mean_finite())
            .note("deficit_decreasing", self.deficit_decreasing())
            .note("gap_decreasing", self.gap_decreasing());
        r
    }
}

/// Tabulates the three conditions at each scale.
pub fn check_burst_conditions(law: &BurstLaw, scales: &[f64], k: f64, effective_dim: usize) -> Result<BurstConditions> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Config(format!("k must be finite and > 0, got {k}")));
    }
    if effective_dim == 0 {
        return Err(Error::Config("effective dimension must be >= 1".into()));
    }
    if scales.is_empty() || scales.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Config("scales must be a nonempty list of positive values".into()));
    }
    let limit = law
        .limit_measure()
        .ok_or_else(|| Error::Config("the burst law has no known limit measure".into()))?;
    let rows = scales
        .iter()
        .map(|&v| {
            let last = (k * v).floor() as u64;
            let mut best = (0.0f64, 0u64);
            for m in 1..=last {
                let lo = m as f64 / v;
                let gap = (law.pmf(v, m) - limit.interval_mass(lo, (m + 1) as f64 / v)).abs();
                if gap > best.0 {
                    best = (gap, m);
                }
            }
            ConditionsRow {
                scale: v,
                mean_size: law.mean_size(v),
                deficit: law.pmf(v, 0),
                scaled_gap: v.powi(effective_dim as i32) * best.0,
                argmax: best.1,
            }
        })
        .collect();
    Ok(BurstConditions { k, effective_dim, rows })
}

impl ConditionsConfig {
    pub fn run(&self) -> Result<BurstConditions> {
        check_burst_conditions(&self.law.build()?, &self.scales, self.k, self.effective_dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_deficit() {
        let law = BurstLaw::geometric(1.0).unwrap();
        let out = check_burst_conditions(&law, &[99.0], 5.0, 1).unwrap();
        assert!((out.rows[0].deficit - 0.01).abs() < 1e-15);
        assert_eq!(out.rows[0].mean_size, 99.0);
    }

    #[test]
    fn negative_binomial_of_shape_one_is_geometric() {
        let scales = [10.0, 100.0, 1000.0];
        let a = check_burst_conditions(&BurstLaw::geometric(1.5).unwrap(), &scales, 5.0, 1).unwrap();
        let b = check_burst_conditions(&BurstLaw::neg_binomial(1.0, 1.5).unwrap(), &scales, 5.0, 1).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert!((x.scaled_gap - y.scaled_gap).abs() <= 1e-12 * x.scaled_gap.max(1e-300));
            assert!((x.deficit - y.deficit).abs() < 1e-15);
            assert_eq!(x.mean_size, y.mean_size);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let law = BurstLaw::geometric(1.0).unwrap();
        assert!(check_burst_conditions(&law, &[10.0], 0.0, 1).unwrap_err().is_config());
        assert!(check_burst_conditions(&law, &[], 1.0, 1).unwrap_err().is_config());
    }
}
