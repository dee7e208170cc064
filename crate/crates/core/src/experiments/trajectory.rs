//! Fixed-time convergence of the chain to its piecewise-deterministic limit.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gddmc::{simulate_gddmc_driven, SimConfig};
use crate::metrics::{w1_empirical, w1_sliced, SampleSet};
use crate::model::{GddmcSpec, PdmpSpec};
use crate::pdmp::{simulate_pdmp_driven, GridSampler, PdmpConfig};
use crate::rng::{derived_seed, replica_rng, stream_rng, ChannelClocks, BURST_SLOT, REACTION_SLOT};
use crate::row;
use crate::trajectory::{LatticeGridSampler, Status};

use super::config::{round_down, CouplingMode, InitialLaw, TrajectoryConvergenceConfig};
use super::{mean_and_error, ExperimentReport};

/// Stream slot of the initial-state draw. The channel clocks start at
/// [`BURST_SLOT`], so slot 0 is free.
const INITIAL_SLOT: u16 = 0;
const BOOTSTRAP_TAG: u64 = 0xB007_5742;
const SLICE_TAG: u64 = 0x511C_E000;

/// Grid samples of an ensemble: replica `k`, time `j`, coordinate `i` sits at
/// `(k * times + j) * dim + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    pub dim: usize,
    pub times: usize,
    pub values: Vec<f64>,
}

impl Marginals {
    pub fn replicas(&self) -> usize {
        self.values.len() / (self.dim * self.times)
    }

    fn at(&self, k: usize, j: usize, i: usize) -> f64 {
        self.values[(k * self.times + j) * self.dim + i]
    }

    /// Coordinate `i` at time index `j`, over the listed replicas.
    pub fn column(&self, j: usize, i: usize, replicas: impl Iterator<Item = usize>) -> Vec<f64> {
        replicas.map(|k| self.at(k, j, i)).collect()
    }

    fn full_column(&self, j: usize, i: usize) -> Vec<f64> {
        self.column(j, i, 0..self.replicas())
    }
}

fn check_status(status: Status) -> Result<()> {
    match status {
        Status::Completed => Ok(()),
        Status::GuardTripped => Err(Error::invalid("simulation hit its event cap before the last time point")),
    }
}

fn check_grid(times: &[f64]) -> Result<f64> {
    match times.last() {
        Some(&h) if h > 0.0 && times.windows(2).all(|w| w[0] <= w[1]) => Ok(h),
        _ => Err(Error::invalid("time grid must be nonempty, nondecreasing and end above 0")),
    }
}

/// Limit-process states at `times` for `reps` replicas.
///
/// Replica `k` draws its initial state from `stream_rng(seed, k, 0)` and is
/// driven by `ChannelClocks::new(seed, k, BURST_SLOT, ·)`, which makes it
/// path-wise coupled to replica `k` of [`chain_marginals`] under the same seed.
pub fn limit_marginals(
    spec: &PdmpSpec,
    initial: &InitialLaw,
    times: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Marginals> {
    let horizon = check_grid(times)?;
    let d = spec.dim();
    let nb = spec.bursts().len();
    let cfg = PdmpConfig::default();
    let rows: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|k| {
            let x0 = initial.sample(d, &mut stream_rng(seed, k as u64, INITIAL_SLOT));
            let mut clocks = ChannelClocks::new(seed, k as u64, BURST_SLOT, nb);
            let mut sampler = GridSampler::new(cfg.evaluator(spec)?, times.to_vec());
            check_status(simulate_pdmp_driven(spec, &x0, horizon, cfg, &mut clocks, &mut sampler)?)?;
            sampler.into_values()
        })
        .collect::<Result<_>>()?;
    Ok(Marginals {
        dim: d,
        times: times.len(),
        values: rows.concat(),
    })
}

/// Chain states, as concentrations `n / V`, at `times` for `reps` replicas.
///
/// The initial state is the draw of [`limit_marginals`] rounded down to the
/// lattice.
pub fn chain_marginals(
    spec: &GddmcSpec,
    initial: &InitialLaw,
    times: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Marginals> {
    let horizon = check_grid(times)?;
    let d = spec.dim();
    let v = spec.scale();
    let (nb, nr) = (spec.bursts().len(), spec.reactions().len());
    let rows: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|k| {
            let x0 = initial.sample(d, &mut stream_rng(seed, k as u64, INITIAL_SLOT));
            let n0 = round_down(&x0, v);
            let mut bursts = ChannelClocks::new(seed, k as u64, BURST_SLOT, nb);
            let mut reactions = ChannelClocks::new(seed, k as u64, REACTION_SLOT, nr);
            let mut sampler = LatticeGridSampler::new(times.to_vec());
            let status = simulate_gddmc_driven(
                spec,
                &n0,
                horizon,
                SimConfig::default(),
                &mut bursts,
                &mut reactions,
                &mut sampler,
            )?;
            check_status(status)?;
            Ok(sampler.into_values().into_iter().map(|n| n as f64 / v).collect())
        })
        .collect::<Result<_>>()?;
    Ok(Marginals {
        dim: d,
        times: times.len(),
        values: rows.concat(),
    })
}

/// Marginal W1 between the chain at scale `V` and the limit, at one time and coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceCell {
    pub scale: f64,
    pub t: f64,
    pub coord: usize,
    pub w1: f64,
    /// Bootstrap standard error over replicas.
    pub std_error: f64,
}

/// Change of W1 between consecutive scales at one time and coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendCheck {
    pub t: f64,
    pub coord: usize,
    pub from_scale: f64,
    pub to_scale: f64,
    /// `W1(from) - W1(to)`.
    pub drop: f64,
    /// `sqrt(se_from² + se_to²)`.
    pub combined_error: f64,
    /// Bootstrap standard error of the drop itself, resampling replicas jointly.
    pub paired_error: f64,
}

impl TrendCheck {
    /// The drop exceeds two combined standard errors.
    pub fn significant(&self) -> bool {
        self.drop > 2.0 * self.combined_error
    }
}

/// Sliced W1 between the joint laws of the whole sampled path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointCell {
    pub scale: f64,
    pub sliced_w1: f64,
    /// Spread over random projections.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConvergence {
    pub config: TrajectoryConvergenceConfig,
    /// Ordered by scale, then time, then coordinate.
    pub cells: Vec<ConvergenceCell>,
    pub trends: Vec<TrendCheck>,
    pub joint: Vec<JointCell>,
}

impl TrajectoryConvergence {
    /// Every consecutive drop is significant.
    pub fn decreasing(&self) -> bool {
        self.trends.iter().all(TrendCheck::significant)
    }

    pub fn report(&self, seed: u64) -> ExperimentReport {
        let c = &self.config;
        let mut r = ExperimentReport::new("converge-trajectory", seed, &["V", "t", "coordinate", "w1", "std_error"]);
        r.param("replicas", c.replicas)
            .param("bootstrap", c.bootstrap)
            .param("coupling", format!("{:?}", c.coupling).to_lowercase());
        for cell in &self.cells {
            r.push_row(row![cell.scale, cell.t, cell.coord, cell.w1, cell.std_error])
                .expect("five cells per row");
        }
        for tr in &self.trends {
            r.note(
                &format!("trend_t{}_c{}_V{}_V{}", tr.t, tr.coord, tr.from_scale, tr.to_scale),
                format!(
                    "drop {} combined_se {} paired_se {} significant {}",
                    tr.drop,
                    tr.combined_error,
                    tr.paired_error,
                    tr.significant()
                ),
            );
        }
        for j in &self.joint {
            r.note(&format!("joint_sliced_w1_V{}", j.scale), format!("{} se {}", j.sliced_w1, j.std_error));
        }
        r.note("decreasing", self.decreasing());
        r
    }
}

fn w1_of(a: Vec<f64>, b: Vec<f64>) -> Result<f64> {
    w1_empirical(&SampleSet::scalars(a)?, &SampleSet::scalars(b)?)
}

/// For each scale `V`, time `t` and coordinate: W1 between the empirical
/// marginals of the chain and the limit, with bootstrap error bars; plus the
/// drop between consecutive scales and a sliced W1 on the whole sampled path.
///
/// In [`CouplingMode::Common`] replica `k` of every ensemble shares its
/// initial draw and burst clocks, so the differences between scales carry
/// much less Monte Carlo noise than the W1 values themselves.
pub fn run_trajectory_convergence(cfg: &TrajectoryConvergenceConfig, seed: u64) -> Result<TrajectoryConvergence> {
    cfg.check()?;
    let d = cfg.model.dim()?;
    let ensemble_seed = |tag: u64| match cfg.coupling {
        CouplingMode::Common => seed,
        CouplingMode::Independent => derived_seed(seed, tag),
    };
    let (_, limit_spec) = cfg.model.build(Some(cfg.scales[0]))?;
    let limit = limit_marginals(&limit_spec, &cfg.initial, &cfg.times, cfg.replicas, ensemble_seed(1))?;
    let chains: Vec<Marginals> = cfg
        .scales
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            let (chain, _) = cfg.model.build(Some(v))?;
            chain_marginals(&chain, &cfg.initial, &cfg.times, cfg.replicas, ensemble_seed(2 + j as u64))
        })
        .collect::<Result<_>>()?;

    let nt = cfg.times.len();
    let n = cfg.replicas;
    let index = |j: usize, k: usize, i: usize| (j * nt + k) * d + i;
    let mut point = vec![0.0; cfg.scales.len() * nt * d];
    for (j, chain) in chains.iter().enumerate() {
        for k in 0..nt {
            for i in 0..d {
                point[index(j, k, i)] = w1_of(chain.full_column(k, i), limit.full_column(k, i))?;
            }
        }
    }

    let boot_seed = derived_seed(seed, BOOTSTRAP_TAG);
    let boots: Vec<Vec<f64>> = (0..cfg.bootstrap)
        .into_par_iter()
        .map(|b| {
            let mut rng = replica_rng(boot_seed, b as u64);
            let pick: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut out = vec![0.0; point.len()];
            for (j, chain) in chains.iter().enumerate() {
                for k in 0..nt {
                    for i in 0..d {
                        out[index(j, k, i)] = w1_of(
                            chain.column(k, i, pick.iter().copied()),
                            limit.column(k, i, pick.iter().copied()),
                        )?;
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let spread = |f: &dyn Fn(&[f64]) -> f64| -> f64 {
        let xs: Vec<f64> = boots.iter().map(|b| f(b)).collect();
        mean_and_error(&xs).1 * (xs.len() as f64).sqrt()
    };

    let mut cells = Vec::with_capacity(point.len());
    let mut trends = Vec::new();
    for (j, &v) in cfg.scales.iter().enumerate() {
        for (k, &t) in cfg.times.iter().enumerate() {
            for i in 0..d {
                let at = index(j, k, i);
                cells.push(ConvergenceCell {
                    scale: v,
                    t,
                    coord: i,
                    w1: point[at],
                    std_error: spread(&|b: &[f64]| b[at]),
                });
            }
        }
    }
    for j in 0..cfg.scales.len().saturating_sub(1) {
        for (k, &t) in cfg.times.iter().enumerate() {
            for i in 0..d {
                let (a, b) = (index(j, k, i), index(j + 1, k, i));
                trends.push(TrendCheck {
                    t,
                    coord: i,
                    from_scale: cfg.scales[j],
                    to_scale: cfg.scales[j + 1],
                    drop: point[a] - point[b],
                    combined_error: cells[a].std_error.hypot(cells[b].std_error),
                    paired_error: spread(&|x: &[f64]| x[a] - x[b]),
                });
            }
        }
    }

    let mut joint = Vec::new();
    let width = nt * d;
    if width >= 2 {
        let limit_set = SampleSet::new(width, limit.values.clone(), None)?;
        for (j, chain) in chains.iter().enumerate() {
            let chain_set = SampleSet::new(width, chain.values.clone(), None)?;
            let mut rng = replica_rng(derived_seed(seed, SLICE_TAG), j as u64);
            let s = w1_sliced(&chain_set, &limit_set, cfg.projections.max(1), &mut rng)?;
            joint.push(JointCell {
                scale: cfg.scales[j],
                sliced_w1: s.value,
                std_error: s.std_error,
            });
        }
    }
    Ok(TrajectoryConvergence {
        config: cfg.clone(),
        cells,
        trends,
        joint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::parse_config;

    fn config(c: f64, reps: usize) -> TrajectoryConvergenceConfig {
        parse_config(&format!(
            r#"{{"model": {{"kind": "gene", "gene": {{"r": 1, "lambda": 1, "c": {{"kind": "constant", "value": {c}}}}}}},
                "scales": [10, 50], "times": [0.5, 1], "replicas": {reps}, "bootstrap": 20, "projections": 8}}"#
        ))
        .unwrap()
    }

    #[test]
    fn frozen_dynamics_give_zero_distance() {
        let out = run_trajectory_convergence(&config(0.0, 50), 3).unwrap();
        assert!(out.cells.iter().all(|c| c.w1 == 0.0 && c.std_error == 0.0));
        assert!(out.joint.iter().all(|j| j.sliced_w1 == 0.0));
    }

    #[test]
    fn reproducible_and_complete() {
        let cfg = config(2.0, 200);
        let a = run_trajectory_convergence(&cfg, 11).unwrap();
        let b = run_trajectory_convergence(&cfg, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cells.len(), 4);
        assert_eq!(a.trends.len(), 2);
        assert_eq!(a.joint.len(), 2);
        let report = a.report(11);
        assert_eq!(report.rows().len(), 4);
        assert!(a.cells.iter().all(|c| c.w1 > 0.0 && c.std_error > 0.0));
    }

    #[test]
    fn coupled_ensembles_share_initial_draws() {
        let cfg = config(2.0, 20);
        let (chain, limit) = cfg.model.build(Some(1000.0)).unwrap();
        let init = InitialLaw::Uniform { low: 0.0, high: 3.0 };
        let times = [1e-9];
        let a = limit_marginals(&limit, &init, &times, 20, 5).unwrap();
        let b = chain_marginals(&chain, &init, &times, 20, 5).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-3 + 1e-8, "{x} vs {y}");
        }
    }
}
