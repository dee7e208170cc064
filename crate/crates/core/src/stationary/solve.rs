use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::model::GddmcSpec;

/// Largest admissible outflow through the truncation boundary, relative to the
/// total rate mass under the computed law.
pub const TRUNCATION_FLUX_TOL: f64 = 1e-10;

/// Dense rate matrix of a one-dimensional chain on `{0, ..., n_max}`.
///
/// Jumps past `n_max` are redirected to `n_max`. `overflow[i]` keeps the
/// redirected rate out of state `i` for the truncation check.
pub(crate) struct RateMatrix {
    pub size: usize,
    pub q: Vec<f64>,
    pub overflow: Vec<f64>,
}

impl RateMatrix {
    pub fn build(spec: &GddmcSpec, n_max: usize) -> Result<Self> {
        if spec.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: spec.dim(),
            });
        }
        let size = n_max + 1;
        let v = spec.scale();
        let mut q = vec![0.0; size * size];
        let mut overflow = vec![0.0; size];
        for i in 0..size {
            let x = [i as f64 / v];
            let row = &mut q[i * size..(i + 1) * size];
            for r in spec.reactions() {
                let rate = v * r.propensity.eval(&x);
                if rate == 0.0 {
                    continue;
                }
                let target = i as i64 + r.displacement[0];
                if target < 0 {
                    return Err(Error::invalid(format!(
                        "reaction leaves the lattice from n = {i} at rate {rate}"
                    )));
                }
                let target = target as usize;
                if target > n_max {
                    overflow[i] += rate;
                }
                let target = target.min(n_max);
                if target != i {
                    row[target] += rate;
                }
            }
            if i == n_max {
                continue;
            }
            for (k, b) in spec.bursts().iter().enumerate() {
                let c = b.rate.eval(&x);
                if c == 0.0 {
                    continue;
                }
                let room = (n_max - i) as u64;
                let mut kept = 0.0;
                for (m, w) in b.meso_law.weights(v).take(room as usize) {
                    row[i + m as usize] += c * w;
                    kept += w;
                }
                let spill = c * (spec.burst_mass()[k] - kept).max(0.0);
                row[n_max] += spill;
                overflow[i] += spill;
            }
        }
        Ok(Self { size, q, overflow })
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.size + j]
    }

    /// `out(i) = Σ_{j != i} q(i, j)`.
    pub fn exit_rate(&self, i: usize) -> f64 {
        (0..self.size).filter(|&j| j != i).map(|j| self.at(i, j)).sum()
    }

    /// `max_y |Σ_x π(x) q(x, y) - π(y) out(y)|`.
    pub fn balance_residual(&self, pi: &[f64]) -> f64 {
        let mut inflow = vec![0.0; self.size];
        for (i, p) in pi.iter().enumerate() {
            if *p == 0.0 {
                continue;
            }
            for (j, slot) in inflow.iter_mut().enumerate() {
                if j != i {
                    *slot += p * self.at(i, j);
                }
            }
        }
        inflow
            .iter()
            .enumerate()
            .map(|(y, f)| (f - pi[y] * self.exit_rate(y)).abs())
            .fold(0.0, f64::max)
    }

    /// Stationary vector by state reduction (Grassmann–Taksar–Heyman).
    ///
    /// This is Gaussian elimination on the balance equations arranged so that
    /// no subtraction occurs, which keeps the small tail probabilities
    /// accurate. Zero entries of the pivot row are skipped, so chains whose
    /// downward jumps are short cost `O(n_max²)`.
    pub fn solve(mut self) -> Result<Vec<f64>> {
        let n = self.size;
        let mut pivots = vec![0.0; n];
        let mut row_nz: Vec<usize> = Vec::new();
        for k in (1..n).rev() {
            row_nz.clear();
            let mut s = 0.0;
            for j in 0..k {
                let v = self.q[k * n + j];
                if v != 0.0 {
                    row_nz.push(j);
                    s += v;
                }
            }
            if !(s > 0.0) {
                return Err(Error::SingularSystem { pivot: k });
            }
            pivots[k] = s;
            for i in 0..k {
                let qik = self.q[i * n + k];
                if qik == 0.0 {
                    continue;
                }
                let f = qik / s;
                for &j in &row_nz {
                    self.q[i * n + j] += f * self.q[k * n + j];
                }
            }
        }
        let mut pi = vec![0.0; n];
        pi[0] = 1.0;
        for k in 1..n {
            let inflow: f64 = (0..k).map(|i| pi[i] * self.q[i * n + k]).sum();
            pi[k] = inflow / pivots[k];
        }
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|p| *p /= total);
        Ok(pi)
    }
}

/// Stationary law of the truncated one-dimensional chain on `{0, ..., n_max} / V`.
///
/// Burst mass that would land beyond `n_max` is lumped onto `n_max`. Fails
/// with [`Error::TruncationInsufficient`] when the rate of such jumps exceeds
/// `1e-10` of the total rate mass under the computed law.
pub fn truncated_stationary_solve(spec: &GddmcSpec, n_max: usize) -> Result<DiscreteDistribution> {
    let matrix = RateMatrix::build(spec, n_max)?;
    let overflow = matrix.overflow.clone();
    let exits: Vec<f64> = (0..matrix.size).map(|i| matrix.exit_rate(i)).collect();
    let pi = matrix.solve()?;
    let spill: f64 = pi.iter().zip(&overflow).map(|(p, o)| p * o).sum();
    let total: f64 = pi.iter().zip(&exits).map(|(p, e)| p * e).sum();
    if total > 0.0 && spill > TRUNCATION_FLUX_TOL * total {
        return Err(Error::TruncationInsufficient {
            n_max,
            reason: format!("outflow fraction {:e} through the boundary", spill / total),
        });
    }
    DiscreteDistribution::lattice(spec.scale(), 0, pi)
}

/// Balance residual of a lattice law on `{0, ..., n_max} / V` for the chain
/// truncated at its last support point.
pub fn global_balance_residual(spec: &GddmcSpec, dist: &DiscreteDistribution) -> Result<f64> {
    let n_max = dist.len() - 1;
    let matrix = RateMatrix::build(spec, n_max)?;
    Ok(matrix.balance_residual(dist.weights()))
}
