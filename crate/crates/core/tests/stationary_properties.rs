use burstsim::experiments::{auto_stationary_pmf, parse_config, run_stationary_convergence, StationaryConvergenceConfig};
use burstsim::metrics::tv_discrete;
use burstsim::model::{build_gene_model, GeneModelParams, Rate};
use burstsim::stationary::{gene_gddmc_stationary_pmf, truncated_stationary_solve};
use proptest::prelude::*;

fn affine_gene(c0: f64, slope: f64, r: f64, lambda: f64, scale: f64) -> GeneModelParams {
    GeneModelParams::new(r, Rate::affine(c0, vec![slope]).unwrap(), lambda, scale).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn product_formula_agrees_with_the_linear_solve(
        c0 in 0.5f64..3.0,
        slope_frac in 0.0f64..0.5,
        r in 1.0f64..2.0,
        lambda in 1.0f64..2.0,
        scale in 5.0f64..30.0,
    ) {
        // keep r - slope / λ >= r / 2
        let params = affine_gene(c0, slope_frac * r * lambda, r, lambda, scale);
        let n_max = 1500;
        let pmf = gene_gddmc_stationary_pmf(&params, n_max).unwrap();
        let (chain, _) = build_gene_model(&params).unwrap();
        let solved = truncated_stationary_solve(&chain, n_max).unwrap();
        prop_assert!(tv_discrete(&pmf, &solved) < 1e-8);
        prop_assert!((pmf.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(pmf.weights().iter().all(|w| *w >= 0.0));
    }

    #[test]
    fn constant_rate_pmf_has_the_negative_binomial_mean(
        c0 in 0.2f64..5.0,
        r in 0.5f64..3.0,
        lambda in 0.5f64..3.0,
        scale in 1.0f64..200.0,
    ) {
        let params = GeneModelParams::new(r, Rate::constant(c0).unwrap(), lambda, scale).unwrap();
        // go well past the certified truncation so the omitted tail cannot move the mean
        let n_max = auto_stationary_pmf(&params).unwrap().distribution.len() * 4;
        let pmf = gene_gddmc_stationary_pmf(&params, n_max).unwrap();
        let want = c0 / (r * lambda);
        prop_assert!((pmf.mean() - want).abs() <= 1e-9 * want, "{} vs {want}", pmf.mean());
    }
}

#[test]
fn longer_truncations_approach_the_limit_monotonically() {
    let params = affine_gene(1.0, 0.5, 1.0, 1.0, 20.0);
    let reference = gene_gddmc_stationary_pmf(&params, 6000).unwrap();
    let (chain, _) = build_gene_model(&params).unwrap();
    let gaps: Vec<f64> = [1000, 1200, 1600, 2400]
        .iter()
        .map(|&n| tv_discrete(&truncated_stationary_solve(&chain, n).unwrap(), &reference))
        .collect();
    // monotone down to the rounding floor of the solve
    assert!(gaps.windows(2).all(|w| w[1] <= w[0] + 1e-13), "{gaps:?}");
    assert!(*gaps.last().unwrap() < 1e-12);
}

/// `∫|F_geo - F_exp|` cell by cell. On each lattice cell the geometric
/// survival is a constant `S`, so the integrand changes sign at most once, at
/// `-ln(S) / λ`.
fn geometric_exponential_gap(scale: f64, lambda: f64) -> f64 {
    let p = scale / (scale + lambda);
    let h = 1.0 / scale;
    // ∫_a^b (S - e^{-λx}) dx
    let signed = |s: f64, a: f64, b: f64| s * (b - a) + ((-lambda * b).exp() - (-lambda * a).exp()) / lambda;
    let mut total = 0.0;
    for k in 0.. {
        let (lo, hi) = (k as f64 * h, (k + 1) as f64 * h);
        let surv = p.powi(k + 1);
        if surv < 1e-18 && (-lambda * lo).exp() < 1e-18 {
            break;
        }
        let cross = -surv.ln() / lambda;
        total += if cross <= lo || cross >= hi {
            signed(surv, lo, hi).abs()
        } else {
            signed(surv, lo, cross).abs() + signed(surv, cross, hi).abs()
        };
    }
    total
}

#[test]
fn unit_shape_gap_matches_direct_integration() {
    let cfg: StationaryConvergenceConfig = parse_config(
        r#"{"model": {"kind": "gene", "gene": {"r": 1.5, "lambda": 2, "c": {"kind": "constant", "value": 1.5}}},
            "scales": [10, 100, 1000]}"#,
    )
    .unwrap();
    let out = run_stationary_convergence(&cfg).unwrap();
    for cell in &out.cells {
        let want = geometric_exponential_gap(cell.scale, 2.0);
        // both laws are cut where their omitted mass drops below 1e-10, and
        // the cut points sit near x = 10
        assert!((cell.w1 - want).abs() <= 5e-9, "V {}: {} vs {want}", cell.scale, cell.w1);
    }
}
