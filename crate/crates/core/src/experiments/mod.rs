//! Reproduction harness: convergence of the chain to its limit, stationary
//! convergence, burst-law conditions, Dynkin checks and coupling-based
//! ergodicity. Every runner returns a typed result that renders to an
//! [`ExperimentReport`].

pub mod conditions;
pub mod config;
pub mod dynkin;
pub mod ergodicity;
pub mod stationary;
pub mod trajectory;

use std::fmt::Display;
use std::io::Write;

pub use conditions::{check_burst_conditions, BurstConditions, ConditionsRow};
pub use config::*;
pub use dynkin::{dynkin_residual, DynkinOutcome, DynkinRow, DynkinSettings, Simulator};
pub use ergodicity::{run_ergodicity, Ergodicity};
pub use stationary::{auto_stationary_pmf, run_stationary_convergence, StationaryCell, StationaryConvergence};
pub use trajectory::{
    chain_marginals, limit_marginals, run_trajectory_convergence, ConvergenceCell, JointCell, TrajectoryConvergence,
    TrendCheck,
};

use crate::error::{Error, Result};

/// Version string written into every report.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Tabular result of one experiment.
///
/// Cells are preformatted strings. Floats go through `Display`, which prints
/// the shortest representation that round-trips, so equal results give equal
/// bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub name: String,
    pub seed: u64,
    pub version: &'static str,
    pub parameters: Vec<(String, String)>,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
    pub summary: Vec<(String, String)>,
}

impl ExperimentReport {
    pub fn new(name: &str, seed: u64, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            seed,
            version: TOOL_VERSION,
            parameters: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            summary: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.parameters.push((key.to_string(), value.to_string()));
        self
    }

    pub fn note(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.summary.push((key.to_string(), value.to_string()));
        self
    }

    /// Appends a row; it must fill every column.
    pub fn push_row(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                expected: self.columns.len(),
                got: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    /// Values of one column, by name.
    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k].as_str()).collect())
    }

    /// `# experiment`, `# param` lines, the header, the rows, then `# summary` lines.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "# experiment {}", self.name)?;
        for (k, v) in &self.parameters {
            writeln!(out, "# param {k}={v}")?;
        }
        writeln!(out, "{}", self.columns.join(","))?;
        for row in &self.rows {
            writeln!(out, "{}", row.join(","))?;
        }
        for (k, v) in &self.summary {
            writeln!(out, "# summary {k}={v}")?;
        }
        Ok(())
    }
}

/// Builds a report row from displayable cells.
#[macro_export]
macro_rules! row {
    ($($cell:expr),* $(,)?) => {
        vec![$($cell.to_string()),*]
    };
}

/// Mean and standard error of the mean.
pub(crate) fn mean_and_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Every value lies below its predecessor.
pub(crate) fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout_and_row_check() {
        let mut r = ExperimentReport::new("demo", 7, &["V", "w1"]);
        r.param("replicas", 10);
        r.push_row(row![10, 0.5]).unwrap();
        assert!(r.push_row(row![1]).is_err());
        r.note("decreasing", true);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "# experiment demo\n# param replicas=10\nV,w1\n10,0.5\n# summary decreasing=true\n"
        );
        assert_eq!(r.column("w1").unwrap(), vec!["0.5"]);
    }

    #[test]
    fn summary_statistics() {
        let (m, se) = mean_and_error(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(strictly_decreasing(&[3.0, 2.0, 1.0]));
        assert!(!strictly_decreasing(&[3.0, 3.0]));
    }
}
