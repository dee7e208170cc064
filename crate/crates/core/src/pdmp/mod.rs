//! Simulation of the piecewise-deterministic limit: flow between jumps,
//! jump times by integrated-hazard inversion, jump vectors from the limit
//! measures.

mod flow;
mod generator;
mod sampler;

pub use flow::{default_rk4_step, flow, FlowEvaluator, FlowMode, FlowPath};
pub use generator::{apply_pdmp_generator, GeneratorQuadrature};
pub use sampler::GridSampler;

use std::cell::RefCell;

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::model::PdmpSpec;
use crate::quadrature::{adaptive_simpson, invert_integrated_hazard, HazardConfig};
use crate::rng::ChannelClocks;
use crate::trajectory::{ChannelRef, PathObserver, Recorder, Status, Trajectory};

/// Settings for a limit simulation.
#[derive(Debug, Clone, Copy)]
pub struct PdmpConfig {
    pub max_jumps: u64,
    pub hazard: HazardConfig,
    /// `None` selects closed form or RK4 automatically.
    pub flow_mode: Option<FlowMode>,
}

impl Default for PdmpConfig {
    fn default() -> Self {
        Self {
            max_jumps: crate::gddmc::DEFAULT_MAX_EVENTS,
            hazard: HazardConfig::default(),
            flow_mode: None,
        }
    }
}

impl PdmpConfig {
    pub fn evaluator<'a>(&self, spec: &'a PdmpSpec) -> Result<FlowEvaluator<'a>> {
        match self.flow_mode {
            Some(mode) => FlowEvaluator::with_mode(spec, mode),
            None => Ok(FlowEvaluator::new(spec)),
        }
    }
}

/// Time `s <= horizon` at which `∫₀ˢ rate(φ(u, x)) du` reaches `level`.
///
/// A constant rate is inverted in closed form.
pub(crate) fn hazard_crossing<F>(
    path: &mut FlowPath<'_>,
    rate: F,
    constant: Option<f64>,
    level: f64,
    horizon: f64,
    cfg: &HazardConfig,
) -> Result<Option<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if let Some(c) = constant {
        if c <= 0.0 {
            return Ok(None);
        }
        let s = level / c;
        return Ok((s <= horizon).then_some(s));
    }
    let failure = RefCell::new(None);
    let mut y = vec![0.0; path.origin().len()];
    let mut hazard = |s: f64| match path.state_at(s, &mut y) {
        Ok(()) => rate(&y),
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let res = invert_integrated_hazard(&mut hazard, level, horizon, cfg);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    res
}

/// `∫₀ˢ rate(φ(u, x)) du`.
pub(crate) fn integrated_hazard<F>(
    path: &mut FlowPath<'_>,
    rate: F,
    constant: Option<f64>,
    s: f64,
    cfg: &HazardConfig,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if let Some(c) = constant {
        return Ok(c * s);
    }
    let failure = RefCell::new(None);
    let mut y = vec![0.0; path.origin().len()];
    let mut hazard = |u: f64| match path.state_at(u, &mut y) {
        Ok(()) => rate(&y),
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let res = adaptive_simpson(&mut hazard, 0.0, s, cfg.tol * 0.25, cfg.max_depth);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    res
}

/// First jump time from `x`, or `None` if no jump occurs before `horizon`.
pub fn sample_jump_time<R: Rng + ?Sized>(
    spec: &PdmpSpec,
    x: &[f64],
    horizon: f64,
    rng: &mut R,
) -> Result<Option<f64>> {
    let eval = FlowEvaluator::new(spec);
    let mut path = eval.path(x);
    let level: f64 = rng.sample(Exp1);
    hazard_crossing(
        &mut path,
        |y| spec.total_burst_rate(y),
        spec.constant_total_rate(),
        level,
        horizon,
        &HazardConfig::default(),
    )
}

/// Picks channel `i` with probability `c_i(y) / c(y)` and draws its jump size.
pub fn sample_jump_vector<R: Rng + ?Sized>(spec: &PdmpSpec, y: &[f64], rng: &mut R) -> Result<(usize, Vec<f64>)> {
    let (i, size) = sample_jump(spec, y, rng)?;
    let mut z = vec![0.0; spec.dim()];
    z[spec.bursts()[i].axis_index()] = size;
    Ok((i, z))
}

fn sample_jump<R: Rng + ?Sized>(spec: &PdmpSpec, y: &[f64], rng: &mut R) -> Result<(usize, f64)> {
    let rates: Vec<f64> = spec.bursts().iter().map(|b| b.rate.eval(y)).collect();
    let total: f64 = rates.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroHazardJump);
    }
    let mut u = rng.random::<f64>() * total;
    let mut chosen = rates.iter().rposition(|&c| c > 0.0).expect("positive total");
    for (i, &c) in rates.iter().enumerate() {
        if c > 0.0 && u < c {
            chosen = i;
            break;
        }
        u -= c;
    }
    let size = spec.bursts()[chosen].limit.sample(rng);
    Ok((chosen, size))
}

fn check_start(spec: &PdmpSpec, x0: &[f64], horizon: f64) -> Result<()> {
    if x0.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: x0.len(),
        });
    }
    if x0.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::invalid("initial state must lie in the nonnegative orthant"));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::invalid(format!("horizon must be finite and > 0, got {horizon}")));
    }
    Ok(())
}

/// Simulates the limit on `[0, horizon]`, recording every jump.
pub fn simulate_pdmp<R: Rng + ?Sized>(
    spec: &PdmpSpec,
    x0: &[f64],
    horizon: f64,
    cfg: PdmpConfig,
    rng: &mut R,
) -> Result<Trajectory<f64>> {
    let mut rec = Recorder::new();
    let status = simulate_pdmp_observed(spec, x0, horizon, cfg, rng, &mut rec)?;
    Ok(rec.into_trajectory(horizon, status))
}

/// Simulation feeding an observer. Events carry post-jump states; the path
/// between events is the flow from the previous post-jump state.
pub fn simulate_pdmp_observed<R: Rng + ?Sized, O: PathObserver<f64>>(
    spec: &PdmpSpec,
    x0: &[f64],
    horizon: f64,
    cfg: PdmpConfig,
    rng: &mut R,
    observer: &mut O,
) -> Result<Status> {
    check_start(spec, x0, horizon)?;
    let eval = cfg.evaluator(spec)?;
    let constant = spec.constant_total_rate();
    let d = spec.dim();
    let mut x = x0.to_vec();
    let mut z = vec![0.0; d];
    let mut t = 0.0;
    let mut count = 0u64;
    observer.start(&x);
    let status = loop {
        let level: f64 = rng.sample(Exp1);
        let mut path = eval.path(&x);
        let wait = hazard_crossing(
            &mut path,
            |y| spec.total_burst_rate(y),
            constant,
            level,
            horizon - t,
            &cfg.hazard,
        )?;
        let Some(wait) = wait else {
            break Status::Completed;
        };
        if count >= cfg.max_jumps {
            break Status::GuardTripped;
        }
        path.state_at(wait, &mut x)?;
        t += wait;
        let (i, size) = sample_jump(spec, &x, rng)?;
        let axis = spec.bursts()[i].axis_index();
        z.iter_mut().for_each(|v| *v = 0.0);
        z[axis] = size;
        x[axis] += size;
        count += 1;
        observer.event(t, ChannelRef::Burst(i), &z, &x);
    };
    observer.finish(horizon, status);
    Ok(status)
}

/// Random-time-change simulation sharing per-channel clocks with
/// `gddmc::simulate_gddmc_driven`.
///
/// Channel `i` fires when `∫ c_i(X(s)) ds` reaches its next unit-exponential
/// level; its size is [`crate::model::LimitMeasure::survival_quantile`] of the
/// channel's next uniform. The law is that of [`simulate_pdmp_observed`].
pub fn simulate_pdmp_driven<O: PathObserver<f64>>(
    spec: &PdmpSpec,
    x0: &[f64],
    horizon: f64,
    cfg: PdmpConfig,
    clocks: &mut ChannelClocks,
    observer: &mut O,
) -> Result<Status> {
    check_start(spec, x0, horizon)?;
    let nb = spec.bursts().len();
    if clocks.len() != nb {
        return Err(Error::DimensionMismatch {
            expected: nb,
            got: clocks.len(),
        });
    }
    let eval = cfg.evaluator(spec)?;
    let d = spec.dim();
    let mut x = x0.to_vec();
    let mut z = vec![0.0; d];
    let mut internal = vec![0.0; nb];
    let mut level: Vec<f64> = (0..nb).map(|i| clocks.exp1(i)).collect();
    let constants: Vec<Option<f64>> = spec.bursts().iter().map(|b| b.rate.as_constant()).collect();
    let mut t = 0.0;
    let mut count = 0u64;
    observer.start(&x);
    let status = loop {
        let mut path = eval.path(&x);
        let mut best: Option<(f64, usize)> = None;
        for (i, b) in spec.bursts().iter().enumerate() {
            let window = best.map_or(horizon - t, |(s, _)| s);
            let hit = hazard_crossing(
                &mut path,
                |y| b.rate.eval(y),
                constants[i],
                level[i] - internal[i],
                window,
                &cfg.hazard,
            )?;
            if let Some(s) = hit {
                if best.is_none_or(|(bs, _)| s < bs) {
                    best = Some((s, i));
                }
            }
        }
        let Some((wait, k)) = best else {
            break Status::Completed;
        };
        if count >= cfg.max_jumps {
            break Status::GuardTripped;
        }
        for (j, b) in spec.bursts().iter().enumerate() {
            if j != k {
                internal[j] += integrated_hazard(&mut path, |y| b.rate.eval(y), constants[j], wait, &cfg.hazard)?;
            }
        }
        internal[k] = level[k];
        path.state_at(wait, &mut x)?;
        t += wait;
        let b = &spec.bursts()[k];
        let size = b.limit.survival_quantile(clocks.unit(k));
        level[k] += clocks.exp1(k);
        let axis = b.axis_index();
        z.iter_mut().for_each(|v| *v = 0.0);
        z[axis] = size;
        x[axis] += size;
        count += 1;
        observer.event(t, ChannelRef::Burst(k), &z, &x);
    };
    observer.finish(horizon, status);
    Ok(status)
}
