//! Numerical integration primitives: adaptive Simpson, Gauss–Legendre rules
//! and inversion of an integrated hazard.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
///
/// Fails with [`Error::QuadratureFailure`] if a subinterval still has not
/// converged after `max_depth` bisections.
pub fn adaptive_simpson<F>(f: &mut F, a: f64, b: f64, tol: f64, max_depth: u32) -> Result<f64>
where
    F: FnMut(f64) -> f64 + ?Sized,
{
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth, 0)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    max_depth: u32,
    depth: u32,
) -> Result<f64>
where
    F: FnMut(f64) -> f64 + ?Sized,
{
    const MIN_DEPTH: u32 = 2;
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return Err(Error::QuadratureFailure { a, b, depth });
    }
    if depth >= MIN_DEPTH && delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth >= max_depth {
        return Err(Error::QuadratureFailure { a, b, depth });
    }
    let l = simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, max_depth, depth + 1)?;
    let r = simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, max_depth, depth + 1)?;
    Ok(l + r)
}

/// An n-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on the Legendre three-term recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d.is_finite() { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 1 {
        return (x, 1.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Shared, lazily built rule with `n` nodes.
pub fn gauss_legendre(n: usize) -> Arc<GaussLegendre> {
    static CACHE: OnceLock<Mutex<BTreeMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(GaussLegendre::new(n)))
        .clone()
}

/// Settings for integrated-hazard inversion.
#[derive(Debug, Clone, Copy)]
pub struct HazardConfig {
    /// Absolute tolerance on the integrated hazard.
    pub tol: f64,
    /// Length of the marching segments used to bracket the root.
    pub segment: f64,
    /// Bisection depth cap for adaptive Simpson.
    pub max_depth: u32,
}

impl Default for HazardConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            segment: 0.5,
            max_depth: 40,
        }
    }
}

/// Smallest `t` in `(0, horizon]` with `∫₀ᵗ hazard(s) ds = target`, or `None`
/// when the integrated hazard stays below `target` on the whole window.
///
/// The hazard is integrated segment by segment with adaptive Simpson; once a
/// segment brackets the root, a safeguarded Newton iteration (falling back to
/// bisection) locates it.
pub fn invert_integrated_hazard<F>(
    hazard: &mut F,
    target: f64,
    horizon: f64,
    cfg: &HazardConfig,
) -> Result<Option<f64>>
where
    F: FnMut(f64) -> f64 + ?Sized,
{
    if !(horizon > 0.0) {
        return Ok(None);
    }
    let mut a = 0.0;
    let mut acc = 0.0;
    loop {
        let b = (a + cfg.segment).min(horizon);
        let seg = adaptive_simpson(hazard, a, b, cfg.tol * 0.25, cfg.max_depth)?;
        if acc + seg >= target {
            return solve_in_bracket(hazard, target, a, acc, b, acc + seg, cfg).map(Some);
        }
        acc += seg;
        if b >= horizon {
            return Ok(None);
        }
        a = b;
    }
}

fn solve_in_bracket<F>(
    hazard: &mut F,
    target: f64,
    mut lo: f64,
    mut lo_val: f64,
    mut hi: f64,
    hi_val: f64,
    cfg: &HazardConfig,
) -> Result<f64>
where
    F: FnMut(f64) -> f64 + ?Sized,
{
    // linear interpolation as the starting guess
    let span = hi_val - lo_val;
    let mut t = if span > 0.0 {
        lo + (hi - lo) * ((target - lo_val) / span).clamp(0.0, 1.0)
    } else {
        0.5 * (lo + hi)
    };
    for _ in 0..200 {
        let val = lo_val + adaptive_simpson(hazard, lo, t, cfg.tol * 0.25, cfg.max_depth)?;
        let g = val - target;
        if g.abs() <= cfg.tol || hi - lo <= 1e-15 * (1.0 + hi.abs()) {
            return Ok(t);
        }
        if g < 0.0 {
            lo = t;
            lo_val = val;
        } else {
            hi = t;
        }
        let h = hazard(t);
        let newton = t - g / h;
        t = if h > 0.0 && newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(t)
}
