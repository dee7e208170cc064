//! Coupled simulation of two copies of the limit process and estimation of
//! their exponential contraction.
//!
//! Per burst channel the pair jumps together at rate `c(x) ∧ c(y)` and
//! separately at rates `(c(x) - c(y))⁺` and `(c(x) - c(y))⁻`, so each copy on
//! its own jumps at its usual rate `c`.

use std::fmt::{self, Display};

use rand::Rng;
use rand::seq::IndexedRandom;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Drift, PdmpSpec};
use crate::pdmp::{FlowEvaluator, PdmpConfig};
use crate::quadrature::invert_integrated_hazard;
use crate::rng::{derived_seed, replica_rng, stream_rng};
use crate::trajectory::{ChannelRef, Event, Status, Trajectory};

/// Distance below which the pair is merged and moves as one.
pub const COALESCENCE_TOL: f64 = 1e-12;

/// `r̃ = r - Σ_i L_{c_i} ∫ |z| μ_i(dz)`.
pub fn dissipative_margin(spec: &PdmpSpec, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::invalid(format!("dissipativity constant must be > 0, got {r}")));
    }
    let mut margin = r;
    for (i, b) in spec.bursts().iter().enumerate() {
        let lip = b
            .rate
            .lipschitz()
            .ok_or_else(|| Error::invalid(format!("burst channel {i} has no Lipschitz constant")))?;
        // limit measures live on the positive half-line, so ∫|z| = mean
        margin -= lip * b.limit.mean();
    }
    if !(margin > 0.0) {
        return Err(Error::NonDissipative { margin });
    }
    Ok(margin)
}

/// The exact dissipativity constant `min_i r_i` of a diagonal linear field.
pub fn diagonal_dissipativity(spec: &PdmpSpec) -> Option<f64> {
    spec.diagonal_rates()
        .map(|r| r.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Spot-checks `⟨F(x) - F(y), x - y⟩ <= -r |x - y|²` on random pairs in
/// `[0, extent]^d`. Fails with the worst observed margin.
pub fn check_dissipativity<R: Rng + ?Sized>(
    spec: &PdmpSpec,
    r: f64,
    samples: usize,
    extent: f64,
    rng: &mut R,
) -> Result<()> {
    let d = spec.dim();
    let (mut x, mut y) = (vec![0.0; d], vec![0.0; d]);
    let (mut fx, mut fy) = (vec![0.0; d], vec![0.0; d]);
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        x.iter_mut().for_each(|v| *v = rng.random::<f64>() * extent);
        y.iter_mut().for_each(|v| *v = rng.random::<f64>() * extent);
        spec.drift(&x, &mut fx);
        spec.drift(&y, &mut fy);
        let mut inner = 0.0;
        let mut sq = 0.0;
        for i in 0..d {
            inner += (fx[i] - fy[i]) * (x[i] - y[i]);
            sq += (x[i] - y[i]).powi(2);
        }
        if sq > 0.0 {
            worst = worst.min(-inner / sq - r);
        }
    }
    if worst < -1e-9 {
        return Err(Error::NonDissipative { margin: worst });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpKind {
    Synchronous,
    XOnly,
    YOnly,
}

impl Display for JumpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JumpKind::Synchronous => "synchronous",
            JumpKind::XOnly => "x_only",
            JumpKind::YOnly => "y_only",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledEvent {
    pub time: f64,
    pub kind: JumpKind,
    pub channel: usize,
    pub displacement: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledTrajectory {
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub events: Vec<CoupledEvent>,
    pub horizon: f64,
    pub status: Status,
}

impl CoupledTrajectory {
    fn marginal(&self, first: bool) -> Trajectory<f64> {
        let skip = if first { JumpKind::YOnly } else { JumpKind::XOnly };
        Trajectory {
            initial: if first { self.x0.clone() } else { self.y0.clone() },
            events: self
                .events
                .iter()
                .filter(|e| e.kind != skip)
                .map(|e| Event {
                    time: e.time,
                    channel: ChannelRef::Burst(e.channel),
                    displacement: e.displacement.clone(),
                    state: if first { e.x.clone() } else { e.y.clone() },
                })
                .collect(),
            horizon: self.horizon,
            status: self.status,
        }
    }

    /// The path of the first copy alone.
    pub fn marginal_x(&self) -> Trajectory<f64> {
        self.marginal(true)
    }

    pub fn marginal_y(&self) -> Trajectory<f64> {
        self.marginal(false)
    }

    /// `(X_t, Y_t)` by flowing from the last event at or before `t`.
    pub fn states_at(&self, eval: &FlowEvaluator<'_>, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let k = self.events.partition_point(|e| e.time <= t);
        let (t0, x, y) = match k {
            0 => (0.0, &self.x0, &self.y0),
            _ => {
                let e = &self.events[k - 1];
                (e.time, &e.x, &e.y)
            }
        };
        let fx = eval.flow(x, t - t0)?;
        let fy = if x == y { fx.clone() } else { eval.flow(y, t - t0)? };
        Ok((fx, fy))
    }
}

fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

/// Simulates the coupled pair on `[0, horizon]`.
///
/// The superposed rate `Σ_i max(c_i(x), c_i(y))` is inverted along the pair
/// of flows; at each firing one of the `3N` streams is picked in proportion
/// to its rate and one size `Z ~ μ_i` is drawn.
pub fn simulate_coupled_pdmp<R: Rng + ?Sized>(
    spec: &PdmpSpec,
    x0: &[f64],
    y0: &[f64],
    horizon: f64,
    cfg: PdmpConfig,
    rng: &mut R,
) -> Result<CoupledTrajectory> {
    let d = spec.dim();
    for s in [x0, y0] {
        if s.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: s.len() });
        }
        if s.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("initial states must lie in the nonnegative orthant"));
        }
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::invalid(format!("horizon must be finite and > 0, got {horizon}")));
    }
    let eval = cfg.evaluator(spec)?;
    let constant = spec.constant_total_rate();
    let nb = spec.bursts().len();
    let mut x = x0.to_vec();
    let mut y = y0.to_vec();
    let mut coalesced = distance(&x, &y) < COALESCENCE_TOL;
    if coalesced {
        y.copy_from_slice(&x);
    }
    let mut streams = vec![0.0; 3 * nb];
    let mut events = Vec::new();
    let mut t = 0.0;
    let status = loop {
        let level: f64 = rng.sample(Exp1);
        let wait = if let Some(c) = constant {
            (c > 0.0).then(|| level / c).filter(|s| *s <= horizon - t)
        } else {
            let mut px = eval.path(&x);
            let mut py = eval.path(&y);
            let (mut ux, mut uy) = (vec![0.0; d], vec![0.0; d]);
            let mut failure = None;
            let mut hazard = |s: f64| {
                let res = px.state_at(s, &mut ux).and_then(|_| {
                    if coalesced {
                        uy.copy_from_slice(&ux);
                        Ok(())
                    } else {
                        py.state_at(s, &mut uy)
                    }
                });
                match res {
                    Ok(()) => spec
                        .bursts()
                        .iter()
                        .map(|b| b.rate.eval(&ux).max(b.rate.eval(&uy)))
                        .sum(),
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NAN
                    }
                }
            };
            let hit = invert_integrated_hazard(&mut hazard, level, horizon - t, &cfg.hazard);
            if let Some(e) = failure {
                return Err(e);
            }
            hit?
        };
        let Some(wait) = wait else {
            break Status::Completed;
        };
        if events.len() as u64 >= cfg.max_jumps {
            break Status::GuardTripped;
        }
        x = eval.flow(&x, wait)?;
        y = if coalesced { x.clone() } else { eval.flow(&y, wait)? };
        t += wait;
        let mut total = 0.0;
        for (i, b) in spec.bursts().iter().enumerate() {
            let (cx, cy) = (b.rate.eval(&x), b.rate.eval(&y));
            streams[3 * i] = cx.min(cy);
            streams[3 * i + 1] = (cx - cy).max(0.0);
            streams[3 * i + 2] = (cy - cx).max(0.0);
            total += streams[3 * i] + streams[3 * i + 1] + streams[3 * i + 2];
        }
        if !(total > 0.0) {
            return Err(Error::ZeroHazardJump);
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = streams.iter().rposition(|&s| s > 0.0).expect("positive total");
        for (k, &s) in streams.iter().enumerate() {
            if s > 0.0 && u < s {
                pick = k;
                break;
            }
            u -= s;
        }
        let (channel, kind) = match pick % 3 {
            0 => (pick / 3, JumpKind::Synchronous),
            1 => (pick / 3, JumpKind::XOnly),
            _ => (pick / 3, JumpKind::YOnly),
        };
        let b = &spec.bursts()[channel];
        let size = b.limit.sample(rng);
        let axis = b.axis_index();
        let mut z = vec![0.0; d];
        z[axis] = size;
        if kind != JumpKind::YOnly {
            x[axis] += size;
        }
        if kind != JumpKind::XOnly {
            y[axis] += size;
        }
        if !coalesced && distance(&x, &y) < COALESCENCE_TOL {
            coalesced = true;
        }
        if coalesced {
            y.copy_from_slice(&x);
        }
        events.push(CoupledEvent {
            time: t,
            kind,
            channel,
            displacement: z,
            x: x.clone(),
            y: y.clone(),
        });
    };
    Ok(CoupledTrajectory {
        x0: x0.to_vec(),
        y0: y0.to_vec(),
        events,
        horizon,
        status,
    })
}

/// One grid row of a contraction experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceRow {
    pub t: f64,
    pub mean_distance: f64,
    pub std_error: f64,
    pub coalesced_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionFit {
    pub rows: Vec<DistanceRow>,
    /// Least-squares slope of `ln E|X_t - Y_t|` against `t`.
    pub slope: f64,
    /// Percentile bootstrap band at the requested level.
    pub lower: f64,
    pub upper: f64,
    /// Number of grid points in the fit window.
    pub window: usize,
}

/// Settings for [`contraction_rate_estimate`].
#[derive(Debug, Clone, Copy)]
pub struct ContractionConfig {
    pub n_reps: usize,
    pub bootstrap: usize,
    /// Two-sided coverage of the band, e.g. `0.95`.
    pub level: f64,
    pub seed: u64,
    pub pdmp: PdmpConfig,
}

impl Default for ContractionConfig {
    fn default() -> Self {
        Self {
            n_reps: 10_000,
            bootstrap: 1000,
            level: 0.95,
            seed: 0,
            pdmp: PdmpConfig::default(),
        }
    }
}

/// Distance matrix `|X_t - Y_t|`, one row of grid values per replica.
pub fn coupled_distances(
    spec: &PdmpSpec,
    x0: &[f64],
    y0: &[f64],
    times: &[f64],
    n_reps: usize,
    seed: u64,
    cfg: PdmpConfig,
) -> Result<Vec<Vec<f64>>> {
    let horizon = times.iter().copied().fold(0.0, f64::max);
    if !(horizon > 0.0) {
        return Err(Error::invalid("time grid needs a positive point"));
    }
    let eval = cfg.evaluator(spec)?;
    (0..n_reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(seed, rep as u64, 0);
            let traj = simulate_coupled_pdmp(spec, x0, y0, horizon, cfg, &mut rng)?;
            if traj.status == Status::GuardTripped {
                return Err(Error::invalid("coupled simulation hit the jump cap"));
            }
            times
                .iter()
                .map(|&t| traj.states_at(&eval, t).map(|(x, y)| distance(&x, &y)))
                .collect()
        })
        .collect()
}

fn ols_slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let (mt, my) = (t.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let sxx: f64 = t.iter().map(|a| (a - mt).powi(2)).sum();
    sxy / sxx
}

fn column_means(rows: &[&Vec<f64>], k: usize) -> Vec<f64> {
    let n = rows.len() as f64;
    (0..k).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect()
}

/// Fits the decay rate of `E|X_t - Y_t|` over the grid.
///
/// The fit window keeps grid points until more than half the pairs have
/// coalesced (or the mean distance vanishes). The band comes from resampling
/// replicas with replacement.
pub fn contraction_rate_estimate(
    spec: &PdmpSpec,
    x0: &[f64],
    y0: &[f64],
    times: &[f64],
    cfg: &ContractionConfig,
) -> Result<ContractionFit> {
    if cfg.n_reps < 2 {
        return Err(Error::invalid("need at least two replicas"));
    }
    if times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("time grid must be strictly increasing"));
    }
    let dist = coupled_distances(spec, x0, y0, times, cfg.n_reps, cfg.seed, cfg.pdmp)?;
    let n = dist.len() as f64;
    let rows: Vec<DistanceRow> = times
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let col = dist.iter().map(|r| r[j]);
            let mean = col.clone().sum::<f64>() / n;
            let var = col.clone().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let coalesced = col.filter(|&v| v < COALESCENCE_TOL).count() as f64 / n;
            DistanceRow {
                t,
                mean_distance: mean,
                std_error: (var / n).sqrt(),
                coalesced_fraction: coalesced,
            }
        })
        .collect();
    let window = rows
        .iter()
        .take_while(|r| r.coalesced_fraction <= 0.5 && r.mean_distance > 0.0)
        .count();
    if window < 2 {
        return Err(Error::DegenerateFit(format!(
            "only {window} grid point(s) before coalescence"
        )));
    }
    let tw = &times[..window];
    let logs: Vec<f64> = rows[..window].iter().map(|r| r.mean_distance.ln()).collect();
    let slope = ols_slope(tw, &logs);

    let mut boot_rng = replica_rng(derived_seed(cfg.seed, 0xB007), 0);
    let all: Vec<&Vec<f64>> = dist.iter().collect();
    let mut slopes = Vec::with_capacity(cfg.bootstrap);
    let mut sample: Vec<&Vec<f64>> = Vec::with_capacity(all.len());
    for _ in 0..cfg.bootstrap {
        sample.clear();
        for _ in 0..all.len() {
            sample.push(all.choose(&mut boot_rng).expect("nonempty"));
        }
        let means = column_means(&sample, window);
        if means.iter().all(|&m| m > 0.0) {
            let logs: Vec<f64> = means.iter().map(|m| m.ln()).collect();
            slopes.push(ols_slope(tw, &logs));
        }
    }
    if slopes.is_empty() {
        return Err(Error::DegenerateFit("no usable bootstrap resample".into()));
    }
    slopes.sort_by(f64::total_cmp);
    let alpha = (1.0 - cfg.level) / 2.0;
    let pick = |q: f64| slopes[((q * (slopes.len() - 1) as f64).round() as usize).min(slopes.len() - 1)];
    Ok(ContractionFit {
        rows,
        slope,
        lower: pick(alpha),
        upper: pick(1.0 - alpha),
        window,
    })
}
