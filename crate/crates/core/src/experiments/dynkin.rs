//! Dynkin's formula in expectation:
//! `E f(X_t) - f(x0) - ∫₀ᵗ E (A f)(X_s) ds = 0` for both simulators.
//!
//! Each replica contributes `M = f(X_t) - f(X_0) - ∫₀ᵗ A f(X_s) ds`; the
//! residual is the mean of `M` and its error bar the standard error.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gddmc::{apply_gddmc_generator, simulate_gddmc_observed, SimConfig};
use crate::model::{GddmcSpec, PdmpSpec};
use crate::pdmp::{apply_pdmp_generator, simulate_pdmp, GeneratorQuadrature, PdmpConfig};
use crate::quadrature::gauss_legendre;
use crate::rng::replica_rng;
use crate::row;
use crate::test_functions::TestFunction;
use crate::trajectory::{ChannelRef, PathObserver, Status};

use super::config::{round_down, DynkinConfig, SimulatorChoice};
use super::{mean_and_error, ExperimentReport};

/// Gauss–Legendre nodes per time piece of a limit path.
const TIME_NODES: usize = 3;

#[derive(Debug, Clone, Copy)]
pub enum Simulator<'a> {
    Gddmc(&'a GddmcSpec),
    Pdmp(&'a PdmpSpec),
}

impl Simulator<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Simulator::Gddmc(_) => "gddmc",
            Simulator::Pdmp(_) => "pdmp",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DynkinSettings {
    /// The time integral of a limit path is split at least at `t k / grid`.
    pub grid: usize,
    pub quadrature: GeneratorQuadrature,
    /// Burst-sum truncation for the chain generator.
    pub tail_tol: f64,
}

impl Default for DynkinSettings {
    fn default() -> Self {
        Self {
            grid: 100,
            quadrature: GeneratorQuadrature {
                nodes: 64,
                check_gradient: false,
            },
            tail_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynkinRow {
    pub simulator: &'static str,
    /// Position of the test function in the input list.
    pub function: usize,
    /// Mean of `M` (signed).
    pub residual: f64,
    pub std_error: f64,
    /// Mean over replicas of `∫₀ᵗ` the generator's own error bound.
    pub generator_error: f64,
}

impl DynkinRow {
    /// `|residual| <= z · std_error`.
    pub fn within(&self, z: f64) -> bool {
        self.residual.abs() <= z * self.std_error
    }
}

/// `A f` for every test function at lattice states, shared across replicas.
struct GeneratorTable<'a> {
    spec: &'a GddmcSpec,
    fs: &'a [&'a dyn TestFunction],
    tail_tol: f64,
    cache: Mutex<HashMap<Vec<i64>, Arc<[f64]>>>,
}

impl GeneratorTable<'_> {
    /// Values, then error bounds, one per function.
    fn get(&self, n: &[i64]) -> Result<Arc<[f64]>> {
        if let Some(hit) = self.cache.lock().expect("generator cache poisoned").get(n) {
            return Ok(hit.clone());
        }
        let mut row = vec![0.0; 2 * self.fs.len()];
        for (k, f) in self.fs.iter().enumerate() {
            let g = apply_gddmc_generator(self.spec, *f, n, self.tail_tol)?;
            row[k] = g.value;
            row[self.fs.len() + k] = g.error_bound;
        }
        let row: Arc<[f64]> = row.into();
        self.cache
            .lock()
            .expect("generator cache poisoned")
            .insert(n.to_vec(), row.clone());
        Ok(row)
    }
}

/// Integrates `A f` exactly along a piecewise-constant chain path.
struct ChainIntegral<'t, 'a> {
    table: &'t GeneratorTable<'a>,
    current: Vec<i64>,
    last: f64,
    integral: Vec<f64>,
    error: Vec<f64>,
    failure: Option<Error>,
}

impl ChainIntegral<'_, '_> {
    fn advance(&mut self, until: f64) {
        let dt = until - self.last;
        self.last = until;
        if dt <= 0.0 || self.failure.is_some() {
            return;
        }
        match self.table.get(&self.current) {
            Ok(row) => {
                let nf = self.integral.len();
                for k in 0..nf {
                    self.integral[k] += row[k] * dt;
                    self.error[k] += row[nf + k] * dt;
                }
            }
            Err(e) => self.failure = Some(e),
        }
    }
}

impl PathObserver<i64> for ChainIntegral<'_, '_> {
    fn start(&mut self, initial: &[i64]) {
        self.current = initial.to_vec();
    }

    fn event(&mut self, time: f64, _: ChannelRef, _: &[i64], state: &[i64]) {
        self.advance(time);
        self.current.copy_from_slice(state);
    }

    fn finish(&mut self, horizon: f64, _: Status) {
        self.advance(horizon);
    }
}

/// `(M_f, ∫ error bound)` per test function for one replica.
type Increment = (Vec<f64>, Vec<f64>);

fn chain_increments(
    spec: &GddmcSpec,
    fs: &[&dyn TestFunction],
    x0: &[f64],
    t: f64,
    n_reps: usize,
    seed: u64,
    settings: &DynkinSettings,
) -> Result<Vec<Increment>> {
    let v = spec.scale();
    let n0 = round_down(x0, v);
    let table = GeneratorTable {
        spec,
        fs,
        tail_tol: settings.tail_tol,
        cache: Mutex::new(HashMap::new()),
    };
    let start: Vec<f64> = n0.iter().map(|&n| n as f64 / v).collect();
    (0..n_reps)
        .into_par_iter()
        .map(|k| {
            let mut obs = ChainIntegral {
                table: &table,
                current: Vec::new(),
                last: 0.0,
                integral: vec![0.0; fs.len()],
                error: vec![0.0; fs.len()],
                failure: None,
            };
            let mut rng = replica_rng(seed, k as u64);
            let status = simulate_gddmc_observed(spec, &n0, t, SimConfig::default(), &mut rng, &mut obs)?;
            if status == Status::GuardTripped {
                return Err(Error::invalid("chain hit its event cap"));
            }
            if let Some(e) = obs.failure {
                return Err(e);
            }
            let end: Vec<f64> = obs.current.iter().map(|&n| n as f64 / v).collect();
            let m = fs
                .iter()
                .zip(&obs.integral)
                .map(|(f, i)| f.value(&end) - f.value(&start) - i)
                .collect();
            Ok((m, obs.error))
        })
        .collect()
}

fn limit_increments(
    spec: &PdmpSpec,
    fs: &[&dyn TestFunction],
    x0: &[f64],
    t: f64,
    n_reps: usize,
    seed: u64,
    settings: &DynkinSettings,
) -> Result<Vec<Increment>> {
    let cfg = PdmpConfig::default();
    let eval = cfg.evaluator(spec)?;
    let rule = gauss_legendre(TIME_NODES);
    let grid = settings.grid.max(1);
    (0..n_reps)
        .into_par_iter()
        .map(|k| {
            let mut rng = replica_rng(seed, k as u64);
            let path = simulate_pdmp(spec, x0, t, cfg, &mut rng)?;
            if path.status == Status::GuardTripped {
                return Err(Error::invalid("limit simulation hit its jump cap"));
            }
            let nf = fs.len();
            let mut integral = vec![0.0; nf];
            let mut error = vec![0.0; nf];
            let mut y = vec![0.0; spec.dim()];
            let mut cuts: Vec<f64> = (0..=grid).map(|i| t * i as f64 / grid as f64).collect();
            cuts.extend(path.events.iter().map(|e| e.time));
            cuts.sort_by(f64::total_cmp);
            for w in cuts.windows(2) {
                let (a, b) = (w[0], w[1]);
                if b <= a {
                    continue;
                }
                // the segment is the flow from the last jump at or before a
                let (origin_time, origin) = path.last_event_before(a);
                let half = 0.5 * (b - a);
                let mid = 0.5 * (a + b);
                for (&node, &weight) in rule.nodes.iter().zip(&rule.weights) {
                    let s = mid + half * node;
                    eval.flow_into(origin, s - origin_time, &mut y)?;
                    for (j, f) in fs.iter().enumerate() {
                        let g = apply_pdmp_generator(spec, *f, &y, &settings.quadrature)?;
                        integral[j] += half * weight * g.value;
                        error[j] += half * weight * g.error_bound;
                    }
                }
            }
            let (_, end_origin) = path.last_event_before(t);
            let end_time = path.last_event_before(t).0;
            eval.flow_into(end_origin, t - end_time, &mut y)?;
            let m = fs
                .iter()
                .zip(&integral)
                .map(|(f, i)| f.value(&y) - f.value(x0) - i)
                .collect();
            Ok((m, error))
        })
        .collect()
}

/// Dynkin residual of each test function on one simulator.
///
/// The chain starts at `⌊x0 V⌋`; its generator integral is exact between
/// events. The limit integral splits `[0, t]` at `grid` uniform points and at
/// the jump times and applies a three-node Gauss–Legendre rule per piece.
pub fn dynkin_residual(
    sim: Simulator<'_>,
    fs: &[&dyn TestFunction],
    x0: &[f64],
    t: f64,
    n_reps: usize,
    seed: u64,
    settings: &DynkinSettings,
) -> Result<Vec<DynkinRow>> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Config(format!("t must be finite and > 0, got {t}")));
    }
    if n_reps < 2 {
        return Err(Error::Config("need at least two replicas".into()));
    }
    if x0.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Config("x0 must lie in the orthant".into()));
    }
    let increments = match sim {
        Simulator::Gddmc(spec) => chain_increments(spec, fs, x0, t, n_reps, seed, settings)?,
        Simulator::Pdmp(spec) => limit_increments(spec, fs, x0, t, n_reps, seed, settings)?,
    };
    Ok((0..fs.len())
        .map(|j| {
            let m: Vec<f64> = increments.iter().map(|(m, _)| m[j]).collect();
            let (residual, std_error) = mean_and_error(&m);
            let generator_error = increments.iter().map(|(_, e)| e[j]).sum::<f64>() / n_reps as f64;
            DynkinRow {
                simulator: sim.name(),
                function: j,
                residual,
                std_error,
                generator_error,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynkinOutcome {
    pub t: f64,
    pub replicas: usize,
    pub rows: Vec<DynkinRow>,
}

impl DynkinOutcome {
    /// Every residual lies within `z` standard errors of zero.
    pub fn all_within(&self, z: f64) -> bool {
        self.rows.iter().all(|r| r.within(z))
    }

    pub fn report(&self, seed: u64) -> ExperimentReport {
        let mut r = ExperimentReport::new(
            "dynkin",
            seed,
            &["simulator", "function", "residual", "std_error", "generator_error"],
        );
        r.param("t", self.t).param("replicas", self.replicas);
        for row in &self.rows {
            r.push_row(row![row.simulator, row.function, row.residual, row.std_error, row.generator_error])
                .expect("five cells per row");
        }
        r.note("within_4_std_errors", self.all_within(4.0));
        r
    }
}

impl DynkinConfig {
    pub fn run(&self, seed: u64) -> Result<DynkinOutcome> {
        self.model.check()?;
        let d = self.model.dim()?;
        if self.x0.len() != d {
            return Err(Error::Config(format!("x0 has {} coordinates, model has {d}", self.x0.len())));
        }
        let owned: Vec<Box<dyn TestFunction>> =
            self.test_functions.iter().map(|f| f.build(d)).collect::<Result<_>>()?;
        let fs: Vec<&dyn TestFunction> = owned.iter().map(|f| f.as_ref()).collect();
        let settings = DynkinSettings {
            grid: self.grid,
            quadrature: GeneratorQuadrature {
                nodes: self.quadrature_nodes,
                check_gradient: false,
            },
            ..Default::default()
        };
        let scale = match self.simulator {
            SimulatorChoice::Pdmp => Some(self.model.scale().unwrap_or(1.0)),
            _ => None,
        };
        let (chain, limit) = self.model.build(scale)?;
        let mut rows = Vec::new();
        if self.simulator != SimulatorChoice::Pdmp {
            rows.extend(dynkin_residual(Simulator::Gddmc(&chain), &fs, &self.x0, self.t, self.replicas, seed, &settings)?);
        }
        if self.simulator != SimulatorChoice::Gddmc {
            rows.extend(dynkin_residual(Simulator::Pdmp(&limit), &fs, &self.x0, self.t, self.replicas, seed, &settings)?);
        }
        Ok(DynkinOutcome {
            t: self.t,
            replicas: self.replicas,
            rows,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_gene_model, GeneModelParams, Rate};
    use crate::test_functions::{Bump, Constant};

    fn gene() -> (GddmcSpec, PdmpSpec) {
        build_gene_model(&GeneModelParams::new(1.0, Rate::constant(2.0).unwrap(), 1.0, 20.0).unwrap()).unwrap()
    }

    #[test]
    fn constants_have_zero_residual() {
        let (chain, limit) = gene();
        let f = Constant(3.0);
        let fs: [&dyn TestFunction; 1] = [&f];
        for sim in [Simulator::Gddmc(&chain), Simulator::Pdmp(&limit)] {
            let rows = dynkin_residual(sim, &fs, &[1.0], 1.0, 20, 1, &DynkinSettings::default()).unwrap();
            assert_eq!(rows[0].residual, 0.0);
            assert_eq!(rows[0].std_error, 0.0);
            assert!(rows[0].within(4.0));
        }
    }

    #[test]
    fn bump_residual_is_small() {
        let (chain, limit) = gene();
        let f = Bump::new(vec![1.5], 1.0, 1.0);
        let fs: [&dyn TestFunction; 1] = [&f];
        for sim in [Simulator::Gddmc(&chain), Simulator::Pdmp(&limit)] {
            let rows = dynkin_residual(sim, &fs, &[1.0], 1.0, 400, 2, &DynkinSettings::default()).unwrap();
            assert!(rows[0].within(5.0), "{:?}", rows[0]);
            assert!(rows[0].std_error > 0.0);
        }
    }
}
