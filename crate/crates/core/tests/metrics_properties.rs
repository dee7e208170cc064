use burstsim::metrics::{ks_statistic, tv_discrete, w1_discrete_1d, w1_empirical, SampleSet};
use burstsim::model::LimitMeasure;
use burstsim::rng::replica_rng;
use burstsim::DiscreteDistribution;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::Exp1;

fn scalars(v: Vec<f64>) -> SampleSet {
    SampleSet::scalars(v).unwrap()
}

/// Equal weights on the points of `v`, merging repeats.
fn uniform(v: &[f64]) -> DiscreteDistribution {
    let mut sorted = v.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mut support, mut weights) = (Vec::new(), Vec::<f64>::new());
    for x in sorted {
        if support.last() == Some(&x) {
            *weights.last_mut().unwrap() += 1.0;
        } else {
            support.push(x);
            weights.push(1.0);
        }
    }
    DiscreteDistribution::from_unnormalized(support, weights).unwrap()
}

/// Smallest average `|x_i - y_σ(i)|` over every permutation σ.
fn brute_force_ot(x: &[f64], y: &[f64]) -> f64 {
    fn go(x: &[f64], y: &[f64], used: &mut Vec<bool>, k: usize, acc: f64, best: &mut f64) {
        if acc >= *best {
            return;
        }
        if k == x.len() {
            *best = acc;
            return;
        }
        for j in 0..y.len() {
            if !used[j] {
                used[j] = true;
                go(x, y, used, k + 1, acc + (x[k] - y[j]).abs(), best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(x, y, &mut vec![false; y.len()], 0, 0.0, &mut best);
    best / x.len() as f64
}

fn sample_vec(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, len)
}

proptest! {
    #[test]
    fn w1_is_a_metric(a in sample_vec(1..40), b in sample_vec(1..40), c in sample_vec(1..40)) {
        let (sa, sb, sc) = (scalars(a), scalars(b), scalars(c));
        let ab = w1_empirical(&sa, &sb).unwrap();
        let ba = w1_empirical(&sb, &sa).unwrap();
        let bc = w1_empirical(&sb, &sc).unwrap();
        let ac = w1_empirical(&sa, &sc).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab));
        prop_assert!(ac <= ab + bc + 1e-12 * (1.0 + ac));
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(w1_empirical(&sa, &sa).unwrap(), 0.0);
    }

    #[test]
    fn discrete_w1_matches_assignment(n in 1usize..=7, seed in any::<u64>()) {
        let mut rng = replica_rng(seed, 0);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let got = w1_discrete_1d(&uniform(&x), &uniform(&y));
        let want = brute_force_ot(&x, &y);
        prop_assert!((got - want).abs() <= 1e-10, "got {got}, want {want}");
    }

    #[test]
    fn discrete_distances_vanish_only_on_equal_laws(x in sample_vec(1..10), shift in 0.0f64..3.0) {
        let p = uniform(&x);
        prop_assert_eq!(tv_discrete(&p, &p), 0.0);
        prop_assert_eq!(w1_discrete_1d(&p, &p), 0.0);
        let moved: Vec<f64> = x.iter().map(|v| v + shift + 1e-3).collect();
        let q = uniform(&moved);
        prop_assert!(tv_discrete(&p, &q) > 0.0);
        prop_assert!((w1_discrete_1d(&p, &q) - (shift + 1e-3)).abs() < 1e-9);
    }
}

#[test]
fn ks_of_exact_exponential_samples_stays_under_the_critical_value() {
    let n = 100_000;
    let runs = 200;
    let exp1 = LimitMeasure::Exponential { rate: 1.0 };
    let critical = 1.95 / (n as f64).sqrt();
    let below = (0..runs)
        .filter(|&k| {
            let mut rng = replica_rng(77, k);
            let s = scalars((0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect());
            ks_statistic(&s, &exp1).unwrap() < critical
        })
        .count();
    assert!(below as f64 >= 0.99 * runs as f64, "{below} of {runs}");
}
