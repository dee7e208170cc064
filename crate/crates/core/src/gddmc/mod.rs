//! Exact event-driven simulation of the mesoscopic chain and its generator.

mod generator;
mod occupation;

pub use generator::{apply_gddmc_generator, GeneratorEstimate};
pub use occupation::{occupation_pmf, OccupationAccumulator};

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::model::{BurstLaw, GddmcSpec};
use crate::rng::ChannelClocks;
use crate::trajectory::{ChannelRef, PathObserver, Recorder, Status, Trajectory};

/// Default event cap; nonexplosiveness makes this a runtime bound only.
pub const DEFAULT_MAX_EVENTS: u64 = 100_000_000;

/// Per-channel jump rates at one lattice point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChannelRates {
    /// `V β_m(n / V)` per stoichiometric channel.
    pub reactions: Vec<f64>,
    /// `c_i(n / V) S_i(V)` per burst channel.
    pub bursts: Vec<f64>,
    pub total: f64,
}

fn checked(rate: f64, channel: ChannelRef) -> Result<f64> {
    if rate >= 0.0 && rate.is_finite() {
        Ok(rate)
    } else {
        Err(Error::invalid(format!("{channel} has rate {rate}")))
    }
}

fn fill_rates(spec: &GddmcSpec, x: &[f64], thinned: bool, cap: f64, rates: &mut ChannelRates) -> Result<()> {
    let v = spec.scale();
    rates.reactions.clear();
    rates.bursts.clear();
    let mut total = 0.0;
    for (k, r) in spec.reactions().iter().enumerate() {
        let a = checked(v * r.propensity.eval(x), ChannelRef::Reaction(k))?;
        rates.reactions.push(a);
        total += a;
    }
    for (i, b) in spec.bursts().iter().enumerate() {
        let mass = if thinned { spec.burst_mass()[i] } else { 1.0 };
        let a = checked(b.rate.eval(x) * mass, ChannelRef::Burst(i))?;
        rates.bursts.push(a);
        total += a;
    }
    if total > cap {
        return Err(Error::RateOverflow { rate: total, cap });
    }
    rates.total = total;
    Ok(())
}

/// Rates of every channel at copy-number vector `n`.
pub fn total_rates(spec: &GddmcSpec, n: &[i64], rate_cap: f64) -> Result<ChannelRates> {
    check_state(spec, n)?;
    let mut x = vec![0.0; spec.dim()];
    spec.concentration(n, &mut x);
    let mut rates = ChannelRates::default();
    fill_rates(spec, &x, true, rate_cap, &mut rates)?;
    Ok(rates)
}

/// Burst size from `p(V, ·)` conditioned on `m >= 1`.
pub fn sample_burst_size<R: Rng + ?Sized>(law: &BurstLaw, scale: f64, rng: &mut R) -> u64 {
    law.sample_size(scale, rng)
}

/// Limits for one simulation run.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub max_events: u64,
    /// Total-rate ceiling; exceeding it is a [`Error::RateOverflow`].
    pub rate_cap: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            max_events: DEFAULT_MAX_EVENTS,
            rate_cap: 1e12,
        }
    }
}

impl SimConfig {
    pub fn with_max_events(max_events: u64) -> Self {
        Self {
            max_events,
            ..Self::default()
        }
    }
}

fn check_state(spec: &GddmcSpec, n: &[i64]) -> Result<()> {
    if n.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: n.len(),
        });
    }
    if let Some(v) = n.iter().find(|&&k| k < 0) {
        return Err(Error::invalid(format!("copy numbers must be >= 0, got {v}")));
    }
    Ok(())
}

fn check_horizon(horizon: f64) -> Result<()> {
    if horizon > 0.0 && horizon.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("horizon must be finite and > 0, got {horizon}")))
    }
}

fn apply_reaction(n: &mut [i64], displacement: &[i64], k: usize) -> Result<()> {
    for (coord, (s, m)) in n.iter_mut().zip(displacement).enumerate() {
        *s += m;
        if *s < 0 {
            log::error!("reaction {k} drove coordinate {coord} to {s}");
            return Err(Error::LeftOrthant {
                coord,
                value: *s as f64,
            });
        }
    }
    Ok(())
}

/// Direct-method simulation, recording every event.
pub fn simulate_gddmc<R: Rng + ?Sized>(
    spec: &GddmcSpec,
    n0: &[i64],
    horizon: f64,
    cfg: SimConfig,
    rng: &mut R,
) -> Result<Trajectory<i64>> {
    let mut rec = Recorder::new();
    let status = simulate_gddmc_observed(spec, n0, horizon, cfg, rng, &mut rec)?;
    Ok(rec.into_trajectory(horizon, status))
}

/// Direct-method simulation feeding an observer.
///
/// Holding times are exponential with the current total rate; the channel is
/// chosen proportionally to its rate and a burst channel draws its size
/// conditioned on `m >= 1`.
pub fn simulate_gddmc_observed<R: Rng + ?Sized, O: PathObserver<i64>>(
    spec: &GddmcSpec,
    n0: &[i64],
    horizon: f64,
    cfg: SimConfig,
    rng: &mut R,
    observer: &mut O,
) -> Result<Status> {
    check_state(spec, n0)?;
    check_horizon(horizon)?;
    let d = spec.dim();
    let mut n = n0.to_vec();
    let mut x = vec![0.0; d];
    let mut dn = vec![0i64; d];
    let mut rates = ChannelRates::default();
    let mut t = 0.0;
    let mut count = 0u64;
    observer.start(&n);
    let status = loop {
        spec.concentration(&n, &mut x);
        fill_rates(spec, &x, true, cfg.rate_cap, &mut rates)?;
        if rates.total <= 0.0 {
            break Status::Completed;
        }
        let e: f64 = rng.sample(Exp1);
        t += e / rates.total;
        if t > horizon {
            break Status::Completed;
        }
        if count >= cfg.max_events {
            break Status::GuardTripped;
        }
        let mut u = rng.random::<f64>() * rates.total;
        let channel = pick(&rates, &mut u);
        match channel {
            ChannelRef::Reaction(k) => {
                let m = &spec.reactions()[k].displacement;
                apply_reaction(&mut n, m, k)?;
                dn.copy_from_slice(m);
            }
            ChannelRef::Burst(i) => {
                let b = &spec.bursts()[i];
                let size = b.meso_law.sample_size(spec.scale(), rng) as i64;
                dn.iter_mut().for_each(|z| *z = 0);
                dn[b.axis_index()] = size;
                n[b.axis_index()] += size;
            }
            ChannelRef::Init => unreachable!(),
        }
        count += 1;
        observer.event(t, channel, &dn, &n);
    };
    observer.finish(horizon, status);
    Ok(status)
}

fn pick(rates: &ChannelRates, u: &mut f64) -> ChannelRef {
    let mut last = None;
    for (k, &a) in rates.reactions.iter().enumerate() {
        if a > 0.0 {
            if *u < a {
                return ChannelRef::Reaction(k);
            }
            *u -= a;
            last = Some(ChannelRef::Reaction(k));
        }
    }
    for (i, &a) in rates.bursts.iter().enumerate() {
        if a > 0.0 {
            if *u < a {
                return ChannelRef::Burst(i);
            }
            *u -= a;
            last = Some(ChannelRef::Burst(i));
        }
    }
    // rounding left u just above the last positive rate
    last.expect("positive total rate has a positive channel")
}

/// Random-time-change simulation driven by per-channel unit clocks.
///
/// Burst channel `i` fires at rate `c_i(n / V)` with a size drawn from the
/// full pmf `p_i(V, ·)` by [`BurstLaw::quantile`]; a zero size is no event.
/// This has the same law as [`simulate_gddmc_observed`]. Because the burst
/// clocks and sizes come from `clocks`, a limit simulation sharing them
/// (see `pdmp::simulate_pdmp_driven`) is coupled to this one path by path.
///
/// `burst_clocks` has one channel per burst channel, `reaction_clocks` one
/// per stoichiometric channel.
pub fn simulate_gddmc_driven<O: PathObserver<i64>>(
    spec: &GddmcSpec,
    n0: &[i64],
    horizon: f64,
    cfg: SimConfig,
    burst_clocks: &mut ChannelClocks,
    reaction_clocks: &mut ChannelClocks,
    observer: &mut O,
) -> Result<Status> {
    check_state(spec, n0)?;
    check_horizon(horizon)?;
    let nr = spec.reactions().len();
    let nb = spec.bursts().len();
    if burst_clocks.len() != nb || reaction_clocks.len() != nr {
        return Err(Error::DimensionMismatch {
            expected: nb + nr,
            got: burst_clocks.len() + reaction_clocks.len(),
        });
    }
    let d = spec.dim();
    let mut n = n0.to_vec();
    let mut x = vec![0.0; d];
    let mut dn = vec![0i64; d];
    let mut rates = ChannelRates::default();
    // internal times and next firing levels, reactions first
    let mut internal = vec![0.0; nr + nb];
    let mut level: Vec<f64> = (0..nr)
        .map(|k| reaction_clocks.exp1(k))
        .chain((0..nb).map(|i| burst_clocks.exp1(i)))
        .collect();
    let mut t = 0.0;
    let mut count = 0u64;
    observer.start(&n);
    let status = loop {
        spec.concentration(&n, &mut x);
        fill_rates(spec, &x, false, cfg.rate_cap, &mut rates)?;
        let all = rates.reactions.iter().chain(&rates.bursts);
        let mut best = (f64::INFINITY, usize::MAX);
        for (k, &a) in all.enumerate() {
            if a > 0.0 {
                let wait = (level[k] - internal[k]) / a;
                if wait < best.0 {
                    best = (wait, k);
                }
            }
        }
        let (wait, k) = best;
        if !(t + wait <= horizon) {
            break Status::Completed;
        }
        if count >= cfg.max_events {
            break Status::GuardTripped;
        }
        t += wait;
        for (j, &a) in rates.reactions.iter().chain(&rates.bursts).enumerate() {
            internal[j] += a * wait;
        }
        internal[k] = level[k];
        if k < nr {
            let m = &spec.reactions()[k].displacement;
            apply_reaction(&mut n, m, k)?;
            level[k] += reaction_clocks.exp1(k);
            dn.copy_from_slice(m);
            count += 1;
            observer.event(t, ChannelRef::Reaction(k), &dn, &n);
        } else {
            let i = k - nr;
            let b = &spec.bursts()[i];
            let size = b.meso_law.quantile(spec.scale(), burst_clocks.unit(i)) as i64;
            level[k] += burst_clocks.exp1(i);
            if size > 0 {
                dn.iter_mut().for_each(|z| *z = 0);
                dn[b.axis_index()] = size;
                n[b.axis_index()] += size;
                count += 1;
                observer.event(t, ChannelRef::Burst(i), &dn, &n);
            }
        }
    };
    observer.finish(horizon, status);
    Ok(status)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_gene_model, GeneModelParams, Rate};
    use crate::rng::replica_rng;
    use crate::trajectory::EventCounter;

    fn gene(c: f64, v: f64) -> GddmcSpec {
        let p = GeneModelParams::new(1.0, Rate::constant(c).unwrap(), 1.0, v).unwrap();
        build_gene_model(&p).unwrap().0
    }

    #[test]
    fn rates_at_interior_and_boundary() {
        let spec = gene(2.0, 1.0);
        let r = total_rates(&spec, &[5], f64::INFINITY).unwrap();
        assert_eq!(r.reactions, vec![5.0]);
        assert!((r.bursts[0] - 2.0 * 0.5).abs() < 1e-15);
        assert_eq!(total_rates(&spec, &[0], f64::INFINITY).unwrap().reactions, vec![0.0]);
        let spec = gene(2.0, 99.0);
        let r = total_rates(&spec, &[0], f64::INFINITY).unwrap();
        assert!((r.bursts[0] - 2.0 * 0.99).abs() < 1e-14);
        assert!(matches!(
            total_rates(&spec, &[10_000], 100.0),
            Err(Error::RateOverflow { .. })
        ));
    }

    #[test]
    fn frozen_model_has_no_events() {
        let spec = gene(0.0, 10.0);
        let t = simulate_gddmc(&spec, &[0], 5.0, SimConfig::default(), &mut replica_rng(1, 0)).unwrap();
        assert!(t.events.is_empty());
        assert_eq!(t.status, Status::Completed);
    }

    #[test]
    fn guard_trips_on_event_cap() {
        let spec = gene(2.0, 50.0);
        let t = simulate_gddmc(&spec, &[100], 100.0, SimConfig::with_max_events(10), &mut replica_rng(1, 0))
            .unwrap();
        assert_eq!(t.events.len(), 10);
        assert_eq!(t.status, Status::GuardTripped);
    }

    #[test]
    fn path_is_consistent_and_deterministic() {
        let spec = gene(2.0, 20.0);
        let a = simulate_gddmc(&spec, &[3], 20.0, SimConfig::default(), &mut replica_rng(9, 2)).unwrap();
        let b = simulate_gddmc(&spec, &[3], 20.0, SimConfig::default(), &mut replica_rng(9, 2)).unwrap();
        assert_eq!(a, b);
        let mut prev_t = 0.0;
        let mut prev = a.initial.clone();
        for e in &a.events {
            assert!(e.time > prev_t);
            assert_eq!(e.state[0], prev[0] + e.displacement[0]);
            assert!(e.state[0] >= 0);
            prev_t = e.time;
            prev = e.state.clone();
        }
    }

    #[test]
    fn driven_simulation_matches_mean_copy_number() {
        // stationary mean of n is (c/r) V / λ = 40
        let spec = gene(2.0, 20.0);
        let mut acc = OccupationAccumulator::new(10.0);
        let mut bc = ChannelClocks::new(5, 0, crate::rng::BURST_SLOT, 1);
        let mut rc = ChannelClocks::new(5, 0, crate::rng::REACTION_SLOT, 1);
        simulate_gddmc_driven(&spec, &[0], 5000.0, SimConfig::default(), &mut bc, &mut rc, &mut acc).unwrap();
        let pmf = acc.into_distribution(20.0).unwrap();
        assert!((pmf.mean() - 2.0).abs() < 0.1, "{}", pmf.mean());
    }

    #[test]
    fn event_counter_sees_every_event() {
        let spec = gene(2.0, 5.0);
        let mut c = EventCounter::default();
        simulate_gddmc_observed(&spec, &[0], 10.0, SimConfig::default(), &mut replica_rng(3, 0), &mut c).unwrap();
        let t = simulate_gddmc(&spec, &[0], 10.0, SimConfig::default(), &mut replica_rng(3, 0)).unwrap();
        assert_eq!(c.0, t.events.len());
    }
}
