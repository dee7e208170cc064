use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::gddmc::GeneratorEstimate;
use crate::model::{Drift, LimitMeasure, PdmpSpec};
use crate::quadrature::gauss_legendre;
use crate::test_functions::TestFunction;

/// Settings for [`apply_pdmp_generator`].
#[derive(Debug, Clone, Copy)]
pub struct GeneratorQuadrature {
    /// Gauss–Legendre nodes; the error estimate compares against half as many.
    pub nodes: usize,
    /// Compare the supplied gradient with central differences first.
    pub check_gradient: bool,
}

impl Default for GeneratorQuadrature {
    fn default() -> Self {
        Self {
            nodes: 128,
            check_gradient: true,
        }
    }
}

/// `∫ g(y) μ(dy)` with `n` nodes.
///
/// Exponential and gamma measures are mapped to `(0, 1)` by `y = -ln(u) / λ`,
/// then `u` is reparametrised to flatten the endpoint singularities.
fn measure_integral<G: FnMut(f64) -> f64>(mu: &LimitMeasure, n: usize, mut g: G) -> f64 {
    let rule = gauss_legendre(n);
    match mu {
        LimitMeasure::Exponential { rate } => rule.integrate(0.0, 1.0, |v| {
            let u = v * v * v;
            g(-u.ln() / rate) * 3.0 * v * v
        }),
        LimitMeasure::Gamma { shape, rate } => {
            // sigmoidal map u = w⁴ / (w⁴ + (1 - w)⁴) tames both the s → ∞ end
            // and the s^{α-1} behaviour as s → 0
            let ln_norm = ln_gamma(*shape);
            rule.integrate(0.0, 1.0, |w| {
                let (w2, v2) = (w * w, (1.0 - w) * (1.0 - w));
                let (a, b) = (w2 * w2, v2 * v2);
                let den = a + b;
                let jac = 4.0 * w2 * w * v2 * (1.0 - w) / (den * den);
                // -ln u, written to stay accurate as u → 1
                let s = (den / a).ln();
                if !(s > 0.0) || jac == 0.0 {
                    return 0.0;
                }
                let weight = ((shape - 1.0) * s.ln() - ln_norm).exp();
                g(s / rate) * weight * jac
            })
        }
        LimitMeasure::Custom(c) => rule.integrate(0.0, c.upper(), |y| g(y) * c.density(y)),
    }
}

fn check_gradient(f: &dyn TestFunction, x: &[f64], grad: &[f64]) -> Result<()> {
    let mut y = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-6 * x[i].abs().max(1.0);
        y[i] = x[i] + h;
        let up = f.value(&y);
        y[i] = x[i] - h;
        let down = f.value(&y);
        y[i] = x[i];
        let numeric = (up - down) / (2.0 * h);
        if (grad[i] - numeric).abs() > 1e-5 * numeric.abs().max(1.0) {
            return Err(Error::GradientMismatch {
                coord: i,
                analytic: grad[i],
                numeric,
            });
        }
    }
    Ok(())
}

/// `A f(x) = F(x)·∇f(x) + Σ_i c_i(x) ∫ [f(x + y e_i) - f(x)] μ_i(dy)`.
///
/// `error_bound` is the gap between the `nodes`-point and `nodes/2`-point
/// rules, weighted by the channel rates.
pub fn apply_pdmp_generator(
    spec: &PdmpSpec,
    f: &dyn TestFunction,
    x: &[f64],
    quad: &GeneratorQuadrature,
) -> Result<GeneratorEstimate> {
    let d = spec.dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.len() });
    }
    if quad.nodes < 2 {
        return Err(Error::invalid("generator quadrature needs at least 2 nodes"));
    }
    let mut grad = vec![0.0; d];
    f.gradient(x, &mut grad);
    if quad.check_gradient {
        check_gradient(f, x, &grad)?;
    }
    let mut field = vec![0.0; d];
    spec.drift(x, &mut field);
    let mut value: f64 = field.iter().zip(&grad).map(|(a, b)| a * b).sum();
    let fx = f.value(x);
    let mut y = x.to_vec();
    let mut error = 0.0;
    for b in spec.bursts() {
        let c = b.rate.eval(x);
        if c == 0.0 {
            continue;
        }
        let axis = b.axis_index();
        let mut jump = |z: f64| {
            y[axis] = x[axis] + z;
            f.value(&y) - fx
        };
        let fine = measure_integral(&b.limit, quad.nodes, &mut jump);
        let coarse = measure_integral(&b.limit, quad.nodes / 2, &mut jump);
        y[axis] = x[axis];
        if !fine.is_finite() {
            return Err(Error::QuadratureFailure {
                a: 0.0,
                b: f64::INFINITY,
                depth: quad.nodes as u32,
            });
        }
        value += c * fine;
        error += c * (fine - coarse).abs();
    }
    Ok(GeneratorEstimate {
        value,
        tail_mass: 0.0,
        error_bound: error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_gene_model, GeneModelParams, Rate};
    use crate::test_functions::{Constant, Coordinate, ExpDecay, FnTest};

    fn gene() -> PdmpSpec {
        build_gene_model(&GeneModelParams::new(1.0, Rate::constant(2.0).unwrap(), 1.0, 100.0).unwrap())
            .unwrap()
            .1
    }

    #[test]
    fn constants_vanish() {
        let g = apply_pdmp_generator(&gene(), &Constant(1.0), &[0.7], &Default::default()).unwrap();
        assert_eq!(g.value, 0.0);
    }

    #[test]
    fn first_moment_drift() {
        let g = apply_pdmp_generator(&gene(), &Coordinate(0), &[3.0], &Default::default()).unwrap();
        assert!((g.value + 1.0).abs() < 1e-10, "{}", g.value);
    }

    #[test]
    fn exponential_test_function_is_exact() {
        // jump part: 2 · (-e^{-x} / 2); drift: -x · (-e^{-x})
        let x = 0.8f64;
        let g = apply_pdmp_generator(&gene(), &ExpDecay { rate: 1.0, index: 0 }, &[x], &Default::default())
            .unwrap();
        let expected = x * (-x).exp() - (-x).exp();
        assert!((g.value - expected).abs() < 1e-10);
        let jump = measure_integral(&LimitMeasure::Exponential { rate: 1.0 }, 128, |y| (-(x + y)).exp() - (-x).exp());
        assert!((jump + (-x).exp() / 2.0).abs() < 1e-10);
    }

    #[test]
    fn gamma_moments() {
        let mu = LimitMeasure::Gamma { shape: 2.5, rate: 4.0 };
        let m1 = measure_integral(&mu, 128, |y| y);
        let m2 = measure_integral(&mu, 128, |y| y * y);
        assert!((m1 - 2.5 / 4.0).abs() < 1e-10);
        assert!((m2 - 2.5 * 3.5 / 16.0).abs() < 1e-10);
    }

    #[test]
    fn inconsistent_gradient_is_rejected() {
        let f = FnTest {
            f: std::sync::Arc::new(|x: &[f64]| x[0] * x[0]),
            grad: Some(std::sync::Arc::new(|_x: &[f64], g: &mut [f64]| g[0] = 0.0)),
            sup: f64::INFINITY,
        };
        let err = apply_pdmp_generator(&gene(), &f, &[1.0], &Default::default());
        assert!(matches!(err, Err(Error::GradientMismatch { .. })));
    }
}
