use crate::error::{Error, Result};
use crate::model::{BurstLaw, GddmcSpec};
use crate::test_functions::TestFunction;

/// Value of a generator applied to a function at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorEstimate {
    pub value: f64,
    /// Burst-size mass left out by truncation, summed over channels and weighted by `c_i`.
    pub tail_mass: f64,
    /// Bound on `|value - exact|`.
    pub error_bound: f64,
}

/// `A_V f(n / V)`: reaction jumps plus bursts, the burst sums truncated once
/// the remaining pmf mass falls below `tail_tol`.
pub fn apply_gddmc_generator(
    spec: &GddmcSpec,
    f: &dyn TestFunction,
    n: &[i64],
    tail_tol: f64,
) -> Result<GeneratorEstimate> {
    if !(tail_tol > 0.0) {
        return Err(Error::invalid("tail tolerance must be > 0"));
    }
    if n.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: n.len(),
        });
    }
    let v = spec.scale();
    let mut x = vec![0.0; spec.dim()];
    spec.concentration(n, &mut x);
    let fx = f.value(&x);
    let mut y = x.clone();
    let mut value = 0.0;
    for r in spec.reactions() {
        let beta = r.propensity.eval(&x);
        if beta == 0.0 {
            continue;
        }
        for ((yi, xi), m) in y.iter_mut().zip(&x).zip(&r.displacement) {
            *yi = xi + *m as f64 / v;
        }
        value += v * beta * (f.value(&y) - fx);
    }
    y.copy_from_slice(&x);
    let mut weighted_tail = 0.0;
    for (i, b) in spec.bursts().iter().enumerate() {
        let c = b.rate.eval(&x);
        if c == 0.0 {
            continue;
        }
        let axis = b.axis_index();
        let upper = match &b.meso_law {
            BurstLaw::Custom(custom) => (custom.cap)(v),
            law => law.quantile(v, tail_tol).max(1),
        };
        let mut sum = 0.0;
        let mut kept = 0.0;
        for (m, w) in b.meso_law.weights(v).take(upper as usize) {
            y[axis] = x[axis] + m as f64 / v;
            sum += w * (f.value(&y) - fx);
            kept += w;
        }
        y[axis] = x[axis];
        let mass = spec.burst_mass()[i];
        value += c * sum;
        weighted_tail += c * (mass - kept).max(0.0);
    }
    Ok(GeneratorEstimate {
        value,
        tail_mass: weighted_tail,
        error_bound: 2.0 * f.sup_norm() * weighted_tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gddmc::total_rates;
    use crate::model::{build_gene_model, GeneModelParams, Rate};
    use crate::test_functions::{Constant, Coordinate, LatticeIndicator};

    fn gene(v: f64) -> GddmcSpec {
        let c = Rate::saturating(1.0, 0.5, 1.0, 0).unwrap();
        build_gene_model(&GeneModelParams::new(1.0, c, 1.0, v).unwrap()).unwrap().0
    }

    #[test]
    fn constants_are_annihilated() {
        let g = apply_gddmc_generator(&gene(20.0), &Constant(3.0), &[7], 1e-12).unwrap();
        assert_eq!(g.value, 0.0);
    }

    #[test]
    fn indicator_gives_minus_total_rate() {
        let spec = gene(20.0);
        let f = LatticeIndicator::new(&[7], 20.0);
        let g = apply_gddmc_generator(&spec, &f, &[7], 1e-14).unwrap();
        let total = total_rates(&spec, &[7], f64::INFINITY).unwrap().total;
        assert!((g.value + total).abs() < 1e-12, "{} vs {}", g.value, total);
    }

    #[test]
    fn identity_matches_brute_force_sum() {
        let spec = gene(20.0);
        let g = apply_gddmc_generator(&spec, &Coordinate(0), &[7], 1e-15).unwrap();
        // brute force over a huge support, in the defining form
        let x = 7.0 / 20.0;
        let c = 1.0 + 0.5 * x / (1.0 + x);
        let p: f64 = 20.0 / 21.0;
        let q = 1.0 - p;
        let mut burst = 0.0;
        let mut w = q;
        for m in 1..200_000 {
            w *= p;
            burst += w * (m as f64 / 20.0);
        }
        let expected = 20.0 * x * (-1.0 / 20.0) + c * burst;
        assert!((g.value - expected).abs() < 1e-10, "{} vs {expected}", g.value);
        // mean burst concentration is (1/λ) exactly
        assert!((g.value - (-x + c * 1.0)).abs() < 1e-10);
    }
}
