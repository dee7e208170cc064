//! Sampled checks of the standing assumptions on a model: no exit from the
//! orthant, inward drift on the boundary, finite burst means and Lipschitz
//! metadata.

use std::fmt;

use rand::Rng;

use crate::rng::{stream_rng, SimRng};

use super::burst::BurstLaw;
use super::spec::{BurstChannel, Drift, GddmcSpec, PdmpSpec};

/// One failed check.
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    /// Reaction `channel` has positive rate at a boundary point it would leave.
    BoundaryExit { channel: usize, point: Vec<f64>, rate: f64 },
    NegativeRate { channel: usize, point: Vec<f64>, rate: f64 },
    /// `F_coord(x) < 0` at a point with `x_coord = 0`.
    NonInwardField { coord: usize, point: Vec<f64>, value: f64 },
    MissingLipschitz { channel: usize },
    MissingFieldLipschitz,
    LipschitzViolated { channel: usize, ratio: f64, bound: f64 },
    /// `Σ m p(V, m)` keeps growing over doubling truncations.
    DivergentBurstMean { channel: usize, growth_ratio: f64 },
    TailBoundExceeded { channel: usize, tail_mass: f64, bound: f64 },
    InfiniteLimitMean { channel: usize },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::BoundaryExit { channel, point, rate } => {
                write!(f, "reaction {channel} leaves the orthant at {point:?} with rate {rate}")
            }
            Diagnostic::NegativeRate { channel, point, rate } => {
                write!(f, "channel {channel} has negative rate {rate} at {point:?}")
            }
            Diagnostic::NonInwardField { coord, point, value } => {
                write!(f, "F_{coord} = {value} < 0 on the boundary at {point:?}")
            }
            Diagnostic::MissingLipschitz { channel } => {
                write!(f, "burst channel {channel} has no Lipschitz constant")
            }
            Diagnostic::MissingFieldLipschitz => f.write_str("vector field has no Lipschitz constant"),
            Diagnostic::LipschitzViolated {
                channel,
                ratio,
                bound,
            } => write!(f, "burst channel {channel}: difference quotient {ratio} exceeds {bound}"),
            Diagnostic::DivergentBurstMean {
                channel,
                growth_ratio,
            } => write!(
                f,
                "burst channel {channel}: partial burst means grow by ratio {growth_ratio} per doubling"
            ),
            Diagnostic::TailBoundExceeded {
                channel,
                tail_mass,
                bound,
            } => write!(f, "burst channel {channel}: tail mass {tail_mass} exceeds declared {bound}"),
            Diagnostic::InfiniteLimitMean { channel } => {
                write!(f, "burst channel {channel}: limit measure has no finite mean")
            }
        }
    }
}

/// Outcome of [`validate_gddmc`] / [`validate_pdmp`].
#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    pub failures: Vec<Diagnostic>,
}

impl Diagnostics {
    pub fn is_ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Sampling settings for the checks.
#[derive(Debug, Clone, Copy)]
pub struct ValidationConfig {
    pub samples: usize,
    pub extent: f64,
    pub seed: u64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            samples: 1000,
            extent: 10.0,
            seed: 0x7661_6c69,
        }
    }
}

fn random_point(rng: &mut SimRng, dim: usize, extent: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random::<f64>() * extent).collect()
}

fn check_bursts(
    bursts: &[BurstChannel],
    dim: usize,
    scale: Option<f64>,
    cfg: &ValidationConfig,
    out: &mut Vec<Diagnostic>,
) {
    let mut rng = stream_rng(cfg.seed, 1, 0);
    for (i, b) in bursts.iter().enumerate() {
        match b.rate.lipschitz() {
            None => out.push(Diagnostic::MissingLipschitz { channel: i }),
            Some(l) => {
                for _ in 0..cfg.samples {
                    let x = random_point(&mut rng, dim, cfg.extent);
                    let y = random_point(&mut rng, dim, cfg.extent);
                    let d = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                    let diff = (b.rate.eval(&x) - b.rate.eval(&y)).abs();
                    if d > 0.0 && diff > l * d * (1.0 + 1e-9) + 1e-12 {
                        out.push(Diagnostic::LipschitzViolated {
                            channel: i,
                            ratio: diff / d,
                            bound: l,
                        });
                        break;
                    }
                }
            }
        }
        for k in 0..cfg.samples {
            let mut x = random_point(&mut rng, dim, cfg.extent);
            if k == 0 {
                x.iter_mut().for_each(|v| *v = 0.0);
            }
            let c = b.rate.eval(&x);
            if !(c >= 0.0) {
                out.push(Diagnostic::NegativeRate {
                    channel: i,
                    point: x,
                    rate: c,
                });
                break;
            }
        }
        if !b.limit.is_finite_mean() {
            out.push(Diagnostic::InfiniteLimitMean { channel: i });
        }
        if let (BurstLaw::Custom(custom), Some(v)) = (&b.meso_law, scale) {
            let cap = (custom.cap)(v).max(1);
            let tail: f64 = (cap + 1..=64 * cap).map(|m| (custom.pmf)(v, m)).sum();
            if tail > custom.tail_bound {
                out.push(Diagnostic::TailBoundExceeded {
                    channel: i,
                    tail_mass: tail,
                    bound: custom.tail_bound,
                });
            }
            if let Some(ratio) = partial_mean_growth(|m| (custom.pmf)(v, m), cap) {
                out.push(Diagnostic::DivergentBurstMean {
                    channel: i,
                    growth_ratio: ratio,
                });
            }
        }
    }
}

/// Ratio of the last two increments of `Σ_{m <= M} m p(m)` over
/// `M = cap, 2 cap, ..., 64 cap`, when it signals divergence.
///
/// A convergent tail `m^{-s}` with `s > 2` shrinks the increments by
/// `2^{2-s}` per doubling; ratios above 0.75 are reported.
pub(crate) fn partial_mean_growth<F: Fn(u64) -> f64>(pmf: F, cap: u64) -> Option<f64> {
    let mut partial = Vec::with_capacity(7);
    let mut acc = 0.0;
    let mut m = 1u64;
    for k in 0..7 {
        let upper = cap << k;
        while m <= upper {
            acc += m as f64 * pmf(m);
            m += 1;
        }
        partial.push(acc);
    }
    let inc_prev = partial[5] - partial[4];
    let inc_last = partial[6] - partial[5];
    if inc_last <= 1e-12 * partial[6].abs().max(1e-300) {
        return None;
    }
    let ratio = inc_last / inc_prev;
    (ratio > 0.75).then_some(ratio)
}

pub fn validate_gddmc(spec: &GddmcSpec, cfg: &ValidationConfig) -> Diagnostics {
    let mut failures = Vec::new();
    let mut rng = stream_rng(cfg.seed, 0, 0);
    let dim = spec.dim();
    'channels: for (ci, r) in spec.reactions().iter().enumerate() {
        let leaving: Vec<usize> = (0..dim).filter(|&i| r.displacement[i] < 0).collect();
        for k in 0..cfg.samples {
            let mut x = random_point(&mut rng, dim, cfg.extent);
            if k == 0 {
                x.iter_mut().for_each(|v| *v = 0.0);
            }
            let beta = r.propensity.eval(&x);
            if !(beta >= 0.0) {
                failures.push(Diagnostic::NegativeRate {
                    channel: ci,
                    point: x,
                    rate: beta,
                });
                continue 'channels;
            }
            for &i in &leaving {
                // the exit test uses the lattice point one step short of the boundary
                let mut xb = x.clone();
                xb[i] = (-r.displacement[i] - 1) as f64 / spec.scale();
                let beta = r.propensity.eval(&xb);
                if beta > 0.0 {
                    failures.push(Diagnostic::BoundaryExit {
                        channel: ci,
                        point: xb,
                        rate: beta,
                    });
                    continue 'channels;
                }
            }
        }
    }
    check_bursts(spec.bursts(), dim, Some(spec.scale()), cfg, &mut failures);
    Diagnostics { failures }
}

pub fn validate_pdmp(spec: &PdmpSpec, cfg: &ValidationConfig) -> Diagnostics {
    let mut failures = Vec::new();
    let mut rng = stream_rng(cfg.seed, 2, 0);
    let dim = spec.dim();
    let mut f = vec![0.0; dim];
    'coords: for i in 0..dim {
        for k in 0..cfg.samples {
            let mut x = random_point(&mut rng, dim, cfg.extent);
            if k == 0 {
                x.iter_mut().for_each(|v| *v = 0.0);
            }
            x[i] = 0.0;
            spec.drift(&x, &mut f);
            if f[i] < 0.0 {
                failures.push(Diagnostic::NonInwardField {
                    coord: i,
                    point: x,
                    value: f[i],
                });
                continue 'coords;
            }
        }
    }
    if spec.field_lipschitz().is_none() {
        failures.push(Diagnostic::MissingFieldLipschitz);
    }
    check_bursts(spec.bursts(), dim, None, cfg, &mut failures);
    Diagnostics { failures }
}
