//! Stationary laws of the single-gene model, in closed form and from an
//! independent linear solve, plus a weak-form stationarity check.

mod density;
mod solve;

pub use density::{DensityEvaluator, DENSITY_TAIL_TOL};
pub use solve::{global_balance_residual, truncated_stationary_solve, TRUNCATION_FLUX_TOL};

use statrs::function::gamma::ln_gamma;

use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::gddmc::{apply_gddmc_generator, GeneratorEstimate};
use crate::model::{GddmcSpec, GeneModelParams, PdmpSpec};
use crate::pdmp::{apply_pdmp_generator, GeneratorQuadrature};
use crate::test_functions::TestFunction;

/// Largest relative tail weight tolerated beyond the truncation point.
pub const PMF_TAIL_TOL: f64 = 1e-10;

/// A truncated pmf together with a bound on the relative weight it leaves out.
#[derive(Debug, Clone)]
pub struct TruncatedPmf {
    pub distribution: DiscreteDistribution,
    pub tail_bound: f64,
}

fn check_dissipative(params: &GeneModelParams) -> Result<f64> {
    params.validate()?;
    let c = &params.transcription;
    let c0 = c.eval(&[0.0]);
    if !(c0 > 0.0) {
        return Err(Error::invalid(format!("stationary formulas need c(0) > 0, got {c0}")));
    }
    let lip = c
        .lipschitz()
        .ok_or_else(|| Error::invalid("the transcription rate needs a Lipschitz constant"))?;
    let margin = params.degradation - lip / params.lambda;
    if !(margin > 0.0) {
        return Err(Error::NonDissipative { margin });
    }
    Ok(lip)
}

/// Weights `∝ (p^n / n!) Π_{k<n} (c(k/V)/r + k)` on `0..=n_max`, with a
/// ratio-test bound on the omitted tail.
///
/// For `k >= n_max` the Lipschitz bound gives `c(k/V)/r + k <= a + b k`, so the
/// weight ratio is at most `ρ = p max(b, (a + b n_max)/(n_max + 1))`; the tail
/// is then below `w_{n_max} ρ / (1 - ρ)`.
pub fn gene_gddmc_stationary_pmf_with_tail(params: &GeneModelParams, n_max: usize) -> Result<TruncatedPmf> {
    let lip = check_dissipative(params)?;
    let v = params.scale;
    let r = params.degradation;
    let p = params.success_probability();
    let ln_p = p.ln();
    let c = &params.transcription;
    let mut ln_w = Vec::with_capacity(n_max + 1);
    let mut acc = 0.0;
    ln_w.push(0.0);
    for k in 0..n_max {
        let kf = k as f64;
        acc += ln_p + (c.eval(&[kf / v]) / r + kf).ln() - (kf + 1.0).ln();
        ln_w.push(acc);
    }
    let peak = ln_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = ln_w.iter().map(|l| (l - peak).exp()).collect();
    let total: f64 = weights.iter().sum();

    let nf = n_max as f64;
    let b = 1.0 + lip / (r * v);
    let a = (c.eval(&[nf / v]) - lip * nf / v) / r;
    let rho = p * b.max((a + b * nf) / (nf + 1.0));
    let tail_bound = if rho < 1.0 {
        weights[n_max] * rho / (1.0 - rho) / total
    } else {
        f64::INFINITY
    };
    if !(tail_bound < PMF_TAIL_TOL) {
        return Err(Error::TruncationInsufficient {
            n_max,
            reason: format!("ratio-test tail bound {tail_bound:e} (ratio {rho})"),
        });
    }
    Ok(TruncatedPmf {
        distribution: DiscreteDistribution::lattice(v, 0, weights)?,
        tail_bound,
    })
}

/// Stationary pmf of the gene chain, normalized over `0..=n_max`.
pub fn gene_gddmc_stationary_pmf(params: &GeneModelParams, n_max: usize) -> Result<DiscreteDistribution> {
    Ok(gene_gddmc_stationary_pmf_with_tail(params, n_max)?.distribution)
}

/// Stationary density of the limiting process,
/// `p(x) = A x^{-1} exp(-λx + (1/r) ∫₁ˣ c(y)/y dy)`.
pub fn gene_pdmp_stationary_density(params: &GeneModelParams) -> Result<DensityEvaluator> {
    check_dissipative(params)?;
    DensityEvaluator::from_rate(&params.transcription, params.degradation, params.lambda)
}

/// Negative binomial pmf `((a)_n / n!) p^n (1 - p)^a` on the lattice and the
/// `Gamma(a, λ)` density, with `a = c0 / r` and `p = V / (V + λ)`.
///
/// The pmf is cut where the omitted mass falls below `1e-16`.
pub fn nb_gamma_closed_forms(c0: f64, r: f64, lambda: f64, scale: f64) -> Result<(DiscreteDistribution, DensityEvaluator)> {
    if !(c0 > 0.0) || !(r > 0.0) || !(lambda > 0.0) || !(scale > 0.0) {
        return Err(Error::invalid("closed forms need c0, r, lambda, V > 0"));
    }
    let a = c0 / r;
    let p = scale / (scale + lambda);
    let (ln_p, ln_q) = (p.ln(), (lambda / (scale + lambda)).ln());
    let ln_ga = ln_gamma(a);
    let mean = a * p / (1.0 - p);
    let mut weights = Vec::new();
    let mut n = 0usize;
    loop {
        let nf = n as f64;
        let ln_w = ln_gamma(a + nf) - ln_ga - ln_gamma(nf + 1.0) + nf * ln_p + a * ln_q;
        let w = ln_w.exp();
        weights.push(w);
        // ratio (a + n) p / (n + 1) is bounded by ρ beyond n
        let rho = p * 1.0f64.max((a + nf) / (nf + 1.0));
        if nf > mean && rho < 1.0 && w * rho / (1.0 - rho) < 1e-16 {
            break;
        }
        n += 1;
    }
    let pmf = DiscreteDistribution::lattice(scale, 0, weights)?;
    Ok((pmf, DensityEvaluator::gamma(a, lambda)?))
}

/// Stationary law handed to [`stationarity_residual`].
#[derive(Debug, Clone, Copy)]
pub enum StationaryLaw<'a> {
    Lattice(&'a DiscreteDistribution),
    Density(&'a DensityEvaluator),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// `|∫ A f dπ|` per test function.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// Largest integrated generator error bound over the test functions.
    pub error_bound: f64,
}

/// `max_f |∫ (A f) dπ|` for a generator supplied as `apply(f, x)`.
///
/// Lattice laws are summed exactly over their support; densities use the
/// 10⁴-node rule of [`DensityEvaluator::expect`].
pub fn stationarity_residual<G>(mut apply: G, law: StationaryLaw<'_>, fs: &[&dyn TestFunction]) -> Result<ResidualReport>
where
    G: FnMut(&dyn TestFunction, f64) -> Result<GeneratorEstimate>,
{
    let mut residuals = Vec::with_capacity(fs.len());
    let mut error_bound: f64 = 0.0;
    for f in fs {
        let (value, err) = match law {
            StationaryLaw::Lattice(d) => {
                let (mut sum, mut err) = (0.0, 0.0);
                for (x, w) in d.iter() {
                    if w == 0.0 {
                        continue;
                    }
                    let g = apply(*f, x)?;
                    sum += w * g.value;
                    err += w * g.error_bound;
                }
                (sum, err)
            }
            StationaryLaw::Density(p) => {
                let mut failure = None;
                let pair = p.expect_pair(|x| match apply(*f, x) {
                    Ok(g) => (g.value, g.error_bound),
                    Err(e) => {
                        failure.get_or_insert(e);
                        (0.0, 0.0)
                    }
                });
                if let Some(e) = failure {
                    return Err(e);
                }
                pair
            }
        };
        residuals.push(value.abs());
        error_bound = error_bound.max(err);
    }
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(ResidualReport {
        residuals,
        max_residual,
        error_bound,
    })
}

/// [`stationarity_residual`] with the chain generator on a one-dimensional lattice law.
pub fn gddmc_stationarity_residual(
    spec: &GddmcSpec,
    dist: &DiscreteDistribution,
    fs: &[&dyn TestFunction],
) -> Result<ResidualReport> {
    let v = spec.scale();
    stationarity_residual(
        |f, x| apply_gddmc_generator(spec, f, &[(x * v).round() as i64], 1e-16),
        StationaryLaw::Lattice(dist),
        fs,
    )
}

/// [`stationarity_residual`] with the limit generator on a one-dimensional density.
pub fn pdmp_stationarity_residual(
    spec: &PdmpSpec,
    density: &DensityEvaluator,
    fs: &[&dyn TestFunction],
) -> Result<ResidualReport> {
    let quad = GeneratorQuadrature {
        check_gradient: false,
        ..GeneratorQuadrature::default()
    };
    stationarity_residual(
        |f, x| apply_pdmp_generator(spec, f, &[x], &quad),
        StationaryLaw::Density(density),
        fs,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::tv_discrete;
    use crate::model::{build_gene_model, Rate};
    use crate::test_functions::{Constant, ExpDecay, LatticeIndicator};

    fn gene(c: Rate, r: f64, lambda: f64, v: f64) -> GeneModelParams {
        GeneModelParams::new(r, c, lambda, v).unwrap()
    }

    #[test]
    fn constant_rate_pmf_is_negative_binomial() {
        let params = gene(Rate::constant(2.0).unwrap(), 1.0, 1.0, 20.0);
        let pmf = gene_gddmc_stationary_pmf(&params, 800).unwrap();
        let (nb, _) = nb_gamma_closed_forms(2.0, 1.0, 1.0, 20.0).unwrap();
        for (k, w) in pmf.weights().iter().enumerate() {
            let other = nb.weights().get(k).copied().unwrap_or(0.0);
            assert!((w - other).abs() < 1e-12, "{k}: {w} vs {other}");
        }
    }

    #[test]
    fn geometric_atom_at_zero() {
        // c = r: π_V(0) = 1 - p_V
        let params = gene(Rate::constant(1.0).unwrap(), 1.0, 1.0, 9.0);
        let pmf = gene_gddmc_stationary_pmf(&params, 600).unwrap();
        assert!((pmf.weights()[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn short_truncation_is_reported() {
        let params = gene(Rate::constant(2.0).unwrap(), 1.0, 1.0, 100.0);
        assert!(matches!(
            gene_gddmc_stationary_pmf(&params, 50),
            Err(Error::TruncationInsufficient { .. })
        ));
    }

    #[test]
    fn closed_form_moments() {
        let (nb, gamma) = nb_gamma_closed_forms(2.0, 1.0, 1.0, 100.0).unwrap();
        assert!((nb.mean() - 2.0).abs() < 1e-9 * 2.0);
        assert!((gamma.mean() - 2.0).abs() < 1e-15);
        assert!((gamma.expect(|x| x) - 2.0).abs() < 1e-9);
        // a = 1: geometric and exponential
        let (geo, exp) = nb_gamma_closed_forms(1.0, 1.0, 1.0, 9.0).unwrap();
        assert!((geo.weights()[3] - 0.9f64.powi(3) * 0.1).abs() < 1e-15);
        assert!((exp.density(0.5) - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn linear_solve_agrees_with_product_formula() {
        let params = gene(Rate::constant(2.0).unwrap(), 1.0, 1.0, 20.0);
        let (chain, _) = build_gene_model(&params).unwrap();
        let solved = truncated_stationary_solve(&chain, 800).unwrap();
        let formula = gene_gddmc_stationary_pmf(&params, 800).unwrap();
        assert!(tv_discrete(&solved, &formula) < 1e-8);
        assert!(global_balance_residual(&chain, &solved).unwrap() < 1e-10);

        let reg = gene(Rate::saturating(1.0, 1.5, 2.0, 0).unwrap(), 1.0, 2.0, 15.0);
        let (chain, _) = build_gene_model(&reg).unwrap();
        let solved = truncated_stationary_solve(&chain, 600).unwrap();
        let formula = gene_gddmc_stationary_pmf(&reg, 600).unwrap();
        assert!(tv_discrete(&solved, &formula) < 1e-8);
    }

    #[test]
    fn absorbing_chain_has_point_mass() {
        let params = gene(Rate::constant(0.0).unwrap(), 1.0, 1.0, 10.0);
        let (chain, _) = build_gene_model(&params).unwrap();
        let pi = truncated_stationary_solve(&chain, 50).unwrap();
        assert_eq!(pi.weights()[0], 1.0);
        assert!(pi.weights()[1..].iter().all(|&w| w == 0.0));
    }

    #[test]
    fn residuals() {
        let params = gene(Rate::constant(2.0).unwrap(), 1.0, 1.0, 10.0);
        let (chain, limit) = build_gene_model(&params).unwrap();
        let pi = truncated_stationary_solve(&chain, 400).unwrap();
        let ind = LatticeIndicator::new(&[17], 10.0);
        let one = Constant(1.0);
        let rep = gddmc_stationarity_residual(&chain, &pi, &[&ind, &one]).unwrap();
        assert!(rep.max_residual < 1e-9, "{rep:?}");
        assert_eq!(rep.residuals[1], 0.0);

        let density = gene_pdmp_stationary_density(&params).unwrap();
        let f = ExpDecay { rate: 1.0, index: 0 };
        let rep = pdmp_stationarity_residual(&limit, &density, &[&f, &one]).unwrap();
        assert!(rep.max_residual < 1e-6, "{rep:?}");
        assert_eq!(rep.residuals[1], 0.0);
    }
}
