use std::sync::Arc;

use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::metrics::{gamma_cdf_integral, gamma_survival_integral, Cdf};
use crate::model::Rate;
use crate::quadrature::{gauss_legendre, GaussLegendre};

/// Relative mass allowed beyond the upper end of the normalization domain.
pub const DENSITY_TAIL_TOL: f64 = 1e-10;

/// Cells on `(0, split]`, uniform in `w = x^a / a`.
const NEAR_ZERO_CELLS: usize = 2000;
/// Cells are appended in chunks until the tail bound is met.
const GRADED_CELLS: usize = 40;
const CHUNK: usize = 256;
const MAX_CELLS: usize = 2_000_000;
/// Composite rule used by [`DensityEvaluator::expect`]: 625 panels of 16 nodes.
const EXPECT_PANELS: usize = 625;

/// A stationary density on `(0, ∞)` with its normalization domain `(0, upper]`.
#[derive(Debug, Clone)]
pub struct DensityEvaluator {
    kind: Kind,
    upper: f64,
    tail_bound: f64,
}

#[derive(Debug, Clone)]
enum Kind {
    Gamma { shape: f64, rate: f64, ln_norm: f64 },
    Table(Box<DensityTable>),
}

impl DensityEvaluator {
    /// Gamma law with shape `α` and rate `λ`, normalized by `λ^α / Γ(α)`.
    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0) || !(rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
            return Err(Error::invalid(format!("gamma parameters must be > 0, got ({shape}, {rate})")));
        }
        // smallest power-of-two multiple of the mean past which the mass is negligible
        let mut upper = (shape / rate).max(1.0 / rate);
        while gamma_ur(shape, rate * upper) > 1e-13 {
            upper *= 2.0;
        }
        let ln_norm = shape * rate.ln() - ln_gamma(shape);
        Ok(Self {
            kind: Kind::Gamma { shape, rate, ln_norm },
            upper,
            tail_bound: gamma_ur(shape, rate * upper),
        })
    }

    /// Density proportional to `x^{-1} exp(-λx + (1/r) ∫₁ˣ c(y)/y dy)` for a
    /// Lipschitz rate `c` with `c(0) > 0` and `r λ > L_c`.
    pub(crate) fn from_rate(rate: &Rate, degradation: f64, lambda: f64) -> Result<Self> {
        let c0 = rate.eval(&[0.0]);
        if !(c0 > 0.0) {
            return Err(Error::invalid(format!(
                "the density is not integrable unless c(0) > 0, got c(0) = {c0}"
            )));
        }
        let lip = rate
            .lipschitz()
            .ok_or_else(|| Error::invalid("the transcription rate needs a Lipschitz constant"))?;
        let kappa = lambda - lip / degradation;
        if !(kappa > 0.0) {
            return Err(Error::NonDissipative { margin: kappa });
        }
        let table = DensityTable::build(rate.clone(), c0, degradation, lambda, kappa)?;
        let upper = *table.edges.last().expect("table has cells");
        let tail_bound = table.tail_bound;
        Ok(Self {
            kind: Kind::Table(Box::new(table)),
            upper,
            tail_bound,
        })
    }

    /// Upper end of the normalization domain.
    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// Bound on the relative mass beyond [`upper`](Self::upper).
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// `ln A`, the log of the normalizing constant in front of the unnormalized kernel.
    pub fn ln_normalization(&self) -> f64 {
        match &self.kind {
            Kind::Gamma { ln_norm, .. } => *ln_norm,
            Kind::Table(t) => -t.shift - t.total_mass().ln(),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match &self.kind {
            Kind::Gamma { shape, rate, ln_norm } => {
                if x == 0.0 {
                    return at_zero(*shape, ln_norm.exp());
                }
                ((shape - 1.0) * x.ln() - rate * x + ln_norm).exp()
            }
            Kind::Table(t) => t.density(x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            Kind::Gamma { shape, rate, .. } => gamma_lr(*shape, rate * x),
            Kind::Table(t) => t.cdf(x),
        }
    }

    pub fn mean(&self) -> f64 {
        match &self.kind {
            Kind::Gamma { shape, rate, .. } => shape / rate,
            Kind::Table(t) => t.mean(),
        }
    }

    /// `∫ f(x) p(x) dx` over the normalization domain with 10⁴ nodes, in the
    /// variable `x = upper · s²`.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.expect_pair(|x| (f(x), 0.0)).0
    }

    /// Two expectations sharing one pass over the nodes.
    pub fn expect_pair<F: FnMut(f64) -> (f64, f64)>(&self, mut f: F) -> (f64, f64) {
        let rule = gauss_legendre(16);
        let h = 1.0 / EXPECT_PANELS as f64;
        let (mut first, mut second) = (0.0, 0.0);
        for k in 0..EXPECT_PANELS {
            let (mid, half) = ((k as f64 + 0.5) * h, 0.5 * h);
            for (&z, &wt) in rule.nodes.iter().zip(&rule.weights) {
                let s = mid + half * z;
                let x = self.upper * s * s;
                let w = self.density(x) * 2.0 * self.upper * s * wt * half;
                if w != 0.0 {
                    let (a, b) = f(x);
                    first += w * a;
                    second += w * b;
                }
            }
        }
        (first, second)
    }

    /// `(x, p(x))` at the midpoints of `n` equal cells covering `(0, upper]`.
    pub fn grid(&self, n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|k| {
                let x = self.upper * (k as f64 + 0.5) / n as f64;
                (x, self.density(x))
            })
            .collect()
    }
}

fn at_zero(shape: f64, norm: f64) -> f64 {
    match shape.partial_cmp(&1.0) {
        Some(std::cmp::Ordering::Less) => f64::INFINITY,
        Some(std::cmp::Ordering::Equal) => norm,
        _ => 0.0,
    }
}

impl Cdf for DensityEvaluator {
    fn cdf(&self, x: f64) -> f64 {
        DensityEvaluator::cdf(self, x)
    }

    fn lower_bound(&self) -> f64 {
        0.0
    }

    fn cdf_integral(&self, x: f64) -> Option<f64> {
        if x <= 0.0 {
            return Some(0.0);
        }
        Some(match &self.kind {
            Kind::Gamma { shape, rate, .. } => gamma_cdf_integral(*shape, *rate, x),
            // integration by parts: ∫₀ˣ F = x F(x) - ∫₀ˣ t p(t) dt
            Kind::Table(t) => {
                let (mass, moment) = t.partial(x);
                (x * mass - moment).max(0.0)
            }
        })
    }

    fn survival_integral(&self, x: f64) -> Option<f64> {
        Some(match &self.kind {
            Kind::Gamma { shape, rate, .. } => gamma_survival_integral(*shape, *rate, x),
            // E(X - x)⁺ = E X - x + E(x - X)⁺
            Kind::Table(_) => (self.mean() - x + self.cdf_integral(x)?).max(0.0),
        })
    }
}

/// Tabulated kernel `x^{a-1} exp(-λx + G(x)/r)` with `a = c(0)/r` and
/// `G(x) = ∫₀ˣ (c(y) - c(0))/y dy`.
///
/// The `c(0) log x` part of `∫ c(y)/y dy` is the power `x^{a-1}`, handled
/// exactly; `G` is integrated in `u = ln y`, where its integrand is
/// `c(e^u) - c(0)` and bounded. Near zero the mass is integrated in
/// `w = x^a / a` so the power singularity disappears.
#[derive(Clone)]
struct DensityTable {
    rate: Rate,
    c0: f64,
    r: f64,
    lambda: f64,
    a: f64,
    /// Log-scale offset keeping the kernel in floating-point range.
    shift: f64,
    near_zero: usize,
    edges: Vec<f64>,
    g: Vec<f64>,
    /// Unnormalized `∫₀^{edge} k(x) dx` and `∫₀^{edge} x k(x) dx`.
    mass: Vec<f64>,
    moment: Vec<f64>,
    tail_bound: f64,
    cell_rule: Arc<GaussLegendre>,
    log_rule: Arc<GaussLegendre>,
}

impl std::fmt::Debug for DensityTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DensityTable")
            .field("a", &self.a)
            .field("lambda", &self.lambda)
            .field("cells", &(self.edges.len() - 1))
            .field("upper", &self.edges.last())
            .finish()
    }
}

impl DensityTable {
    fn build(rate: Rate, c0: f64, r: f64, lambda: f64, kappa: f64) -> Result<Self> {
        let a = c0 / r;
        let mut t = Self {
            rate,
            c0,
            r,
            lambda,
            a,
            shift: 0.0,
            near_zero: NEAR_ZERO_CELLS + GRADED_CELLS,
            edges: vec![0.0],
            g: vec![0.0],
            mass: vec![0.0],
            moment: vec![0.0],
            tail_bound: f64::INFINITY,
            cell_rule: gauss_legendre(16),
            log_rule: gauss_legendre(8),
        };
        if a > 1.0 {
            let mode = (a - 1.0) / kappa;
            t.shift = t.ln_kernel(mode, t.g_increment(0.0, mode)).max(0.0);
        }
        let split = 1.0f64.min(1.0 / lambda);
        let w_split = split.powf(a) / a;
        let to_x = |w: f64| (a * w).powf(1.0 / a);
        // the first cell is refined geometrically, since the integrand carries
        // a fractional power of w at the origin
        let w_first = w_split / NEAR_ZERO_CELLS as f64;
        for k in (1..=GRADED_CELLS).rev() {
            t.push_edge(to_x(w_first * 0.5f64.powi(k as i32)));
        }
        for k in 1..=NEAR_ZERO_CELLS {
            let x = if k == NEAR_ZERO_CELLS {
                split
            } else {
                to_x(w_split * k as f64 / NEAR_ZERO_CELLS as f64)
            };
            t.push_edge(x);
        }
        let dx = a.sqrt().max(1.0) / (50.0 * lambda);
        loop {
            for _ in 0..CHUNK {
                let x = *t.edges.last().expect("nonempty") + dx;
                t.push_edge(x);
            }
            let x0 = *t.edges.last().expect("nonempty");
            let slack = if a <= 1.0 { kappa } else { kappa - (a - 1.0) / x0 };
            if slack > 0.0 {
                let k0 = (t.ln_kernel(x0, *t.g.last().expect("nonempty")) - t.shift).exp();
                let tail = k0 / slack / t.total_mass();
                if tail <= DENSITY_TAIL_TOL {
                    t.tail_bound = tail;
                    return Ok(t);
                }
            }
            if t.edges.len() > MAX_CELLS {
                return Err(Error::TruncationInsufficient {
                    n_max: MAX_CELLS,
                    reason: "density tail bound not reached".into(),
                });
            }
        }
    }

    fn push_edge(&mut self, x: f64) {
        let j = self.edges.len() - 1;
        let lo = self.edges[j];
        let (m, mo) = self.cell_partial(j, x);
        self.g.push(self.g[j] + self.g_increment(lo, x));
        self.mass.push(self.mass[j] + m);
        self.moment.push(self.moment[j] + mo);
        self.edges.push(x);
    }

    fn total_mass(&self) -> f64 {
        *self.mass.last().expect("nonempty")
    }

    /// `∫_{x0}^{x1} (c(y) - c(0)) / y dy` in the variable `u = ln y`.
    fn g_increment(&self, x0: f64, x1: f64) -> f64 {
        if x1 <= x0 {
            return 0.0;
        }
        let u1 = x1.ln();
        // the integrand is O(e^u) as u → -∞
        let u0 = if x0 > 0.0 { x0.ln() } else { u1 - 40.0 };
        let panels = ((u1 - u0) / 2.0).ceil().max(1.0) as usize;
        let h = (u1 - u0) / panels as f64;
        (0..panels)
            .map(|k| {
                let a = u0 + k as f64 * h;
                self.log_rule
                    .integrate(a, a + h, |u| self.rate.eval(&[u.exp()]) - self.c0)
            })
            .sum()
    }

    fn ln_kernel(&self, x: f64, g: f64) -> f64 {
        (self.a - 1.0) * x.ln() - self.lambda * x + g / self.r
    }

    fn cell_of(&self, x: f64) -> usize {
        self.edges
            .partition_point(|&e| e <= x)
            .saturating_sub(1)
            .min(self.edges.len() - 2)
    }

    fn g_at(&self, x: f64) -> f64 {
        let j = self.cell_of(x);
        self.g[j] + self.g_increment(self.edges[j], x)
    }

    /// Unnormalized `(∫ k, ∫ x k)` over `[edge_j, x]`.
    fn cell_partial(&self, j: usize, x: f64) -> (f64, f64) {
        let lo = self.edges[j];
        if x <= lo {
            return (0.0, 0.0);
        }
        let (mut mass, mut moment) = (0.0, 0.0);
        let rule = &self.cell_rule;
        if j < self.near_zero {
            // k(x) dx = exp(-λx + G/r) dw with w = x^a / a
            let (w0, w1) = (lo.powf(self.a) / self.a, x.powf(self.a) / self.a);
            let (half, mid) = (0.5 * (w1 - w0), 0.5 * (w0 + w1));
            for (&z, &wt) in rule.nodes.iter().zip(&rule.weights) {
                let xw = (self.a * (mid + half * z)).powf(1.0 / self.a);
                let g = self.g[j] + self.g_increment(lo, xw);
                let e = (-self.lambda * xw + g / self.r - self.shift).exp() * wt * half;
                mass += e;
                moment += xw * e;
            }
        } else {
            let (half, mid) = (0.5 * (x - lo), 0.5 * (x + lo));
            for (&z, &wt) in rule.nodes.iter().zip(&rule.weights) {
                let y = mid + half * z;
                let g = self.g[j] + self.g_increment(lo, y);
                let e = (self.ln_kernel(y, g) - self.shift).exp() * wt * half;
                mass += e;
                moment += y * e;
            }
        }
        (mass, moment)
    }

    /// Normalized `(F(x), ∫₀ˣ t p(t) dt)`.
    fn partial(&self, x: f64) -> (f64, f64) {
        let total = self.total_mass();
        let upper = *self.edges.last().expect("nonempty");
        if x >= upper {
            return (1.0, self.mean());
        }
        let j = self.cell_of(x);
        let (m, mo) = self.cell_partial(j, x);
        (((self.mass[j] + m) / total).min(1.0), (self.moment[j] + mo) / total)
    }

    fn density(&self, x: f64) -> f64 {
        let total = self.total_mass();
        if x == 0.0 {
            return at_zero(self.a, (-self.shift).exp() / total);
        }
        (self.ln_kernel(x, self.g_at(x)) - self.shift).exp() / total
    }

    fn cdf(&self, x: f64) -> f64 {
        self.partial(x).0
    }

    fn mean(&self) -> f64 {
        *self.moment.last().expect("nonempty") / self.total_mass()
    }
}
