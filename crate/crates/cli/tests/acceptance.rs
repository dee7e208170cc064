//! Acceptance suite: one line per criterion, `PASS` or `FAIL`, with the
//! measured quantity, its threshold and the wall time against its budget.
//! Exits nonzero when any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;

use burstsim::coupling::simulate_coupled_pdmp;
use burstsim::experiments::{
    check_burst_conditions, dynkin_residual, parse_config, run_ergodicity, run_stationary_convergence,
    run_trajectory_convergence, DynkinSettings, ErgodicityConfig, Simulator, StationaryConvergenceConfig,
    TrajectoryConvergenceConfig,
};
use burstsim::gddmc::{simulate_gddmc_observed, OccupationAccumulator, SimConfig};
use burstsim::metrics::{ks_statistic, tv_discrete, w1_empirical, w1_null_scale, SampleSet};
use burstsim::model::{build_gene_model, BurstLaw, GeneModelParams, Rate};
use burstsim::pdmp::{simulate_pdmp, simulate_pdmp_observed, FlowEvaluator, GridSampler, PdmpConfig};
use burstsim::rng::{derived_seed, replica_rng, stream_rng};
use burstsim::stationary::{gene_gddmc_stationary_pmf, truncated_stationary_solve, DensityEvaluator};
use burstsim::test_functions::{Bump, TestFunction};
use burstsim::Result;

const SEED: u64 = 20_240_917;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn gene(c: Rate, v: f64) -> GeneModelParams {
    GeneModelParams::new(1.0, c, 1.0, v).expect("valid gene parameters")
}

fn saturating() -> Rate {
    Rate::saturating(1.0, 0.5, 1.0, 0).expect("valid rate")
}

/// Occupation pmf of one long chain path against the negative-binomial pmf.
fn c1_chain_stationary() -> Result<Outcome> {
    let params = gene(Rate::constant(2.0)?, 50.0);
    let (chain, _) = build_gene_model(&params)?;
    let mut occupation = OccupationAccumulator::new(0.0);
    simulate_gddmc_observed(&chain, &[100], 1e5, SimConfig::default(), &mut replica_rng(SEED, 1), &mut occupation)?;
    let empirical = occupation.into_distribution(50.0)?;
    let exact = gene_gddmc_stationary_pmf(&params, 2000)?;
    let tv = tv_discrete(&empirical, &exact);
    outcome(tv < 0.02, format!("TV = {tv:.5} (threshold 0.02)"))
}

/// Unit-spaced samples of one long limit path after burn-in, KS against Gamma(2, 1).
fn c2_limit_stationary() -> Result<Outcome> {
    let (_, limit) = build_gene_model(&gene(Rate::constant(2.0)?, 50.0))?;
    let n = 100_000;
    let times: Vec<f64> = (1..=n).map(|k| 10.0 + k as f64).collect();
    let horizon = times[n - 1];
    let mut sampler = GridSampler::new(FlowEvaluator::new(&limit), times);
    simulate_pdmp_observed(&limit, &[2.0], horizon, PdmpConfig::default(), &mut replica_rng(SEED, 2), &mut sampler)?;
    let samples = SampleSet::scalars(sampler.into_values()?)?;
    let ks = ks_statistic(&samples, &DensityEvaluator::gamma(2.0, 1.0)?)?;
    outcome(ks < 0.015, format!("KS = {ks:.5} over {n} samples (threshold 0.015)"))
}

/// Product-form pmf against the dense solve of the truncated chain.
fn c3_closed_form_vs_solve() -> Result<Outcome> {
    let mut rng = replica_rng(SEED, 3);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let r = rng.random_range(1.0..2.0);
        let lambda = rng.random_range(1.0..2.0);
        let v = rng.random_range(5.0..=50.0f64).round();
        let base = rng.random_range(0.5..3.0);
        let half = rng.random_range(0.5..2.0);
        // Lipschitz constant amplitude / half stays below 0.8 r λ
        let amplitude = rng.random_range(0.0..0.8) * r * lambda * half;
        let params = GeneModelParams::new(r, Rate::saturating(base, amplitude, half, 0)?, lambda, v)?;
        let (chain, _) = build_gene_model(&params)?;
        let closed = gene_gddmc_stationary_pmf(&params, 2000)?;
        let solved = truncated_stationary_solve(&chain, 2000)?;
        worst = worst.max(tv_discrete(&closed, &solved));
    }
    outcome(worst < 1e-8, format!("max TV over 20 parameter sets = {worst:.3e} (threshold 1e-8)"))
}

fn c4_trajectory_trend() -> Result<Outcome> {
    let cfg: TrajectoryConvergenceConfig = parse_config(
        r#"{"model": {"kind": "gene", "gene": {"r": 1, "lambda": 1, "c": {"kind": "constant", "value": 2}}},
            "scales": [10, 50, 250], "times": [1, 5], "replicas": 10000,
            "initial": {"kind": "gamma", "shape": 2, "rate": 1}}"#,
    )?;
    let out = run_trajectory_convergence(&cfg, SEED)?;
    let cells: Vec<String> = out
        .cells
        .iter()
        .map(|c| format!("V={} t={}: {:.5}±{:.5}", c.scale, c.t, c.w1, c.std_error))
        .collect();
    let margins: Vec<String> = out
        .trends
        .iter()
        .map(|t| format!("{:.1}", t.drop / t.combined_error))
        .collect();
    outcome(
        out.decreasing(),
        format!(
            "W1 [{}]; drops in combined standard errors [{}] (threshold 2)",
            cells.join(", "),
            margins.join(", ")
        ),
    )
}

fn c5_stationary_trend() -> Result<Outcome> {
    let cfg: StationaryConvergenceConfig = parse_config(
        r#"{"model": {"kind": "gene", "gene": {"r": 1, "lambda": 1, "c": {"kind": "constant", "value": 2}}},
            "scales": [10, 100, 1000]}"#,
    )?;
    let out = run_stationary_convergence(&cfg)?;
    let w: Vec<String> = out.cells.iter().map(|c| format!("{:.4e}", c.w1)).collect();
    outcome(
        out.decreasing() && out.reduction() >= 5.0,
        format!("W1 [{}], reduction {:.1}x (threshold 5x, strictly decreasing)", w.join(", "), out.reduction()),
    )
}

fn c6_ergodicity() -> Result<Outcome> {
    let cfg: ErgodicityConfig = parse_config(
        r#"{"model": {"kind": "gene", "gene": {"r": 1, "lambda": 1,
                "c": {"kind": "saturating", "base": 1, "amplitude": 0.5, "half_saturation": 1}}},
            "x0": [0], "y0": [4], "horizon": 4, "step": 0.1, "replicas": 10000, "bootstrap": 1000}"#,
    )?;
    let out = run_ergodicity(&cfg, SEED)?;
    outcome(
        out.bound_holds(0.05),
        format!(
            "slope {:.4}, 95% band [{:.4}, {:.4}], r̃ = {} (upper must be <= {:.2})",
            out.fit.slope,
            out.fit.lower,
            out.fit.upper,
            out.margin,
            -out.margin + 0.05
        ),
    )
}

fn c7_burst_conditions() -> Result<Outcome> {
    let out = check_burst_conditions(&BurstLaw::geometric(1.0)?, &[10.0, 100.0, 1000.0, 10000.0], 5.0, 1)?;
    let gaps: Vec<String> = out.rows.iter().map(|r| format!("{:.4e}", r.scaled_gap)).collect();
    let last = out.rows.last().map_or(f64::NAN, |r| r.scaled_gap);
    outcome(
        out.gap_decreasing() && last < 1e-2,
        format!("column (c) [{}] (strictly decreasing, last < 1e-2)", gaps.join(", ")),
    )
}

fn c8_dynkin() -> Result<Outcome> {
    let (chain, limit) = build_gene_model(&gene(saturating(), 50.0))?;
    let bumps = [
        Bump::new(vec![1.0], 1.0, 1.0),
        Bump::new(vec![2.0], 1.5, 1.0),
        Bump::new(vec![0.5], 0.75, 2.0),
    ];
    let fs: Vec<&dyn TestFunction> = bumps.iter().map(|b| b as &dyn TestFunction).collect();
    let settings = DynkinSettings::default();
    let mut rows = dynkin_residual(Simulator::Gddmc(&chain), &fs, &[1.0], 1.0, 10_000, SEED, &settings)?;
    rows.extend(dynkin_residual(Simulator::Pdmp(&limit), &fs, &[1.0], 1.0, 10_000, SEED, &settings)?);
    let pass = rows.iter().all(|r| r.within(4.0));
    let text: Vec<String> = rows
        .iter()
        .map(|r| format!("{}#{}: {:.2}", r.simulator, r.function, r.residual.abs() / r.std_error))
        .collect();
    outcome(pass, format!("|residual| / std_error [{}] (threshold 4)", text.join(", ")))
}

fn c9_coupling_marginals() -> Result<Outcome> {
    let (_, limit) = build_gene_model(&gene(saturating(), 50.0))?;
    let times = [0.5, 1.0, 2.0];
    let n = 10_000;
    let eval = FlowEvaluator::new(&limit);
    let cfg = PdmpConfig::default();
    let mut coupled_x = vec![Vec::with_capacity(n); times.len()];
    let mut coupled_y = vec![Vec::with_capacity(n); times.len()];
    for k in 0..n {
        let traj = simulate_coupled_pdmp(&limit, &[0.0], &[4.0], 2.0, cfg, &mut stream_rng(SEED, k as u64, 0))?;
        for (j, &t) in times.iter().enumerate() {
            let (x, y) = traj.states_at(&eval, t)?;
            coupled_x[j].push(x[0]);
            coupled_y[j].push(y[0]);
        }
    }
    let standalone = |x0: f64, tag: u64| -> Result<Vec<Vec<f64>>> {
        let mut cols = vec![Vec::with_capacity(n); times.len()];
        let seed = derived_seed(SEED, tag);
        for k in 0..n {
            let traj = simulate_pdmp(&limit, &[x0], 2.0, cfg, &mut replica_rng(seed, k as u64))?;
            for (j, &t) in times.iter().enumerate() {
                let (origin_time, origin) = traj.last_event_before(t);
                cols[j].push(eval.flow(origin, t - origin_time)?[0]);
            }
        }
        Ok(cols)
    };
    let alone_x = standalone(0.0, 1)?;
    let alone_y = standalone(4.0, 2)?;
    let mut pass = true;
    let mut text = Vec::new();
    for (j, &t) in times.iter().enumerate() {
        for (name, a, b) in [("x", &coupled_x[j], &alone_x[j]), ("y", &coupled_y[j], &alone_y[j])] {
            let a = SampleSet::scalars(a.clone())?;
            let b = SampleSet::scalars(b.clone())?;
            let ratio = w1_empirical(&a, &b)? / w1_null_scale(&a, &b)?;
            pass &= ratio <= 3.0;
            text.push(format!("{name}@{t}: {ratio:.2}"));
        }
    }
    outcome(pass, format!("W1 / standard error [{}] (threshold 3)", text.join(", ")))
}

fn write_configs(dir: &Path) -> Vec<(&'static str, PathBuf, Vec<&'static str>)> {
    let gene = r#"{"kind": "gene", "gene": {"r": 1, "lambda": 1, "V": 20,
        "c": {"kind": "saturating", "base": 1, "amplitude": 0.5, "half_saturation": 1}}}"#;
    let docs: Vec<(&str, String, Vec<&str>)> = vec![
        ("simulate-gddmc", format!(r#"{{"model": {gene}, "x0": [1], "horizon": 5}}"#), vec!["--reps", "2"]),
        ("simulate-pdmp", format!(r#"{{"model": {gene}, "x0": [1], "horizon": 5}}"#), vec![]),
        ("simulate-pdmp", format!(r#"{{"model": {gene}, "x0": [1], "horizon": 5}}"#), vec!["--dense", "0.25"]),
        ("stationary", format!(r#"{{"model": {gene}}}"#), vec![]),
        ("stationary", format!(r#"{{"model": {gene}}}"#), vec!["--grid", "50"]),
        (
            "converge-trajectory",
            format!(r#"{{"model": {gene}, "scales": [10, 40], "times": [0.5, 1], "replicas": 200, "bootstrap": 20}}"#),
            vec![],
        ),
        ("converge-stationary", format!(r#"{{"model": {gene}, "scales": [10, 100]}}"#), vec![]),
        (
            "ergodicity",
            format!(r#"{{"model": {gene}, "x0": [0], "y0": [4], "horizon": 2, "replicas": 200, "bootstrap": 50}}"#),
            vec![],
        ),
        ("check-conditions", r#"{"law": {"kind": "geometric", "lambda": 1}, "scales": [10, 100]}"#.to_string(), vec![]),
        (
            "dynkin",
            format!(
                r#"{{"model": {gene}, "x0": [1], "t": 0.5, "replicas": 100,
                    "test_functions": [{{"kind": "bump", "center": [1], "radius": 1}}]}}"#
            ),
            vec![],
        ),
    ];
    docs.into_iter()
        .enumerate()
        .map(|(k, (cmd, body, extra))| {
            let path = dir.join(format!("{k}-{cmd}.json"));
            std::fs::write(&path, body).expect("write config");
            (cmd, path, extra)
        })
        .collect()
}

fn c10_determinism() -> Result<Outcome> {
    let exe = env!("CARGO_BIN_EXE_burstsim");
    let dir = std::env::temp_dir().join(format!("burstsim-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let mut failures = Vec::new();
    let configs = write_configs(&dir);
    for (cmd, path, extra) in &configs {
        let run = || {
            Command::new(exe)
                .arg(cmd)
                .arg("--config")
                .arg(path)
                .args(["--seed", "42"])
                .args(extra)
                .output()
        };
        let (a, b) = (run()?, run()?);
        if !a.status.success() || a.stdout.is_empty() || a.stdout != b.stdout {
            failures.push(format!("{cmd} {} (status {})", extra.join(" "), a.status));
        }
    }
    std::fs::remove_dir_all(&dir)?;
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} invocations byte-identical across reruns", configs.len())
        } else {
            format!("differing or failing: {}", failures.join("; "))
        },
    )
}

type Criterion = (&'static str, &'static str, Duration, fn() -> Result<Outcome>);

fn main() {
    let criteria: [Criterion; 10] = [
        ("1", "chain stationary law", Duration::from_secs(60), c1_chain_stationary),
        ("2", "limit stationary law", Duration::from_secs(60), c2_limit_stationary),
        ("3", "closed-form pmf vs truncated solve", Duration::from_secs(30), c3_closed_form_vs_solve),
        ("4", "trajectory convergence trend", Duration::from_secs(300), c4_trajectory_trend),
        ("5", "stationary convergence trend", Duration::from_secs(10), c5_stationary_trend),
        ("6", "exponential ergodicity", Duration::from_secs(180), c6_ergodicity),
        ("7", "burst-law limit conditions", Duration::from_secs(10), c7_burst_conditions),
        ("8", "Dynkin residuals", Duration::from_secs(180), c8_dynkin),
        ("9", "coupling marginality", Duration::from_secs(120), c9_coupling_marginals),
        ("10", "CLI determinism", Duration::from_secs(120), c10_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let (pass, detail) = match result {
            Ok(o) => (o.pass && in_time, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "[{}] criterion {id} ({name}): {detail}; {:.1} s of {} s budget{}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { " (over budget)" }
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
