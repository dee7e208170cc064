//! Functions `f` fed to the generators and the Dynkin check.

use std::sync::Arc;

/// A real function on the orthant with a gradient.
pub trait TestFunction: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;

    /// Central differences unless overridden.
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let mut y = x.to_vec();
        for i in 0..x.len() {
            let h = 1e-6 * x[i].abs().max(1.0);
            y[i] = x[i] + h;
            let up = self.value(&y);
            y[i] = x[i] - h;
            let down = self.value(&y);
            y[i] = x[i];
            out[i] = (up - down) / (2.0 * h);
        }
    }

    /// `sup |f|`, or infinity when unbounded.
    fn sup_norm(&self) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl TestFunction for Constant {
    fn value(&self, _: &[f64]) -> f64 {
        self.0
    }

    fn gradient(&self, _: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|g| *g = 0.0);
    }

    fn sup_norm(&self) -> f64 {
        self.0.abs()
    }
}

/// Smooth compactly supported bump `h exp(1 - 1/(1 - s²))`, `s = |x - center| / radius`.
#[derive(Debug, Clone)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: f64,
    pub height: f64,
}

impl Bump {
    pub fn new(center: Vec<f64>, radius: f64, height: f64) -> Self {
        Self {
            center,
            radius,
            height,
        }
    }

    fn s2(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.center)
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>()
            / (self.radius * self.radius)
    }
}

impl TestFunction for Bump {
    fn value(&self, x: &[f64]) -> f64 {
        let s2 = self.s2(x);
        if s2 >= 1.0 {
            0.0
        } else {
            self.height * (1.0 - 1.0 / (1.0 - s2)).exp()
        }
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let s2 = self.s2(x);
        if s2 >= 1.0 {
            out.iter_mut().for_each(|g| *g = 0.0);
            return;
        }
        let f = self.height * (1.0 - 1.0 / (1.0 - s2)).exp();
        let k = -2.0 * f / ((1.0 - s2) * (1.0 - s2) * self.radius * self.radius);
        for ((g, a), c) in out.iter_mut().zip(x).zip(&self.center) {
            *g = k * (a - c);
        }
    }

    fn sup_norm(&self) -> f64 {
        self.height.abs()
    }
}

/// `f(x) = x_index`.
#[derive(Debug, Clone, Copy)]
pub struct Coordinate(pub usize);

impl TestFunction for Coordinate {
    fn value(&self, x: &[f64]) -> f64 {
        x[self.0]
    }

    fn gradient(&self, _: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|g| *g = 0.0);
        out[self.0] = 1.0;
    }

    fn sup_norm(&self) -> f64 {
        f64::INFINITY
    }
}

/// `f(x) = exp(-rate · x_index)`.
#[derive(Debug, Clone, Copy)]
pub struct ExpDecay {
    pub rate: f64,
    pub index: usize,
}

impl TestFunction for ExpDecay {
    fn value(&self, x: &[f64]) -> f64 {
        (-self.rate * x[self.index]).exp()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|g| *g = 0.0);
        out[self.index] = -self.rate * self.value(x);
    }

    fn sup_norm(&self) -> f64 {
        1.0
    }
}

/// Indicator of one lattice point, matched to within half a lattice spacing.
#[derive(Debug, Clone)]
pub struct LatticeIndicator {
    pub point: Vec<f64>,
    pub half_width: f64,
}

impl LatticeIndicator {
    pub fn new(n: &[i64], scale: f64) -> Self {
        Self {
            point: n.iter().map(|&k| k as f64 / scale).collect(),
            half_width: 0.5 / scale,
        }
    }
}

impl TestFunction for LatticeIndicator {
    fn value(&self, x: &[f64]) -> f64 {
        let hit = x
            .iter()
            .zip(&self.point)
            .all(|(a, p)| (a - p).abs() < self.half_width);
        if hit {
            1.0
        } else {
            0.0
        }
    }

    fn gradient(&self, _: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|g| *g = 0.0);
    }

    fn sup_norm(&self) -> f64 {
        1.0
    }
}

pub type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Closure-backed test function.
#[derive(Clone)]
pub struct FnTest {
    pub f: ValueFn,
    pub grad: Option<GradientFn>,
    pub sup: f64,
}

impl TestFunction for FnTest {
    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        match &self.grad {
            Some(g) => g(x, out),
            None => {
                let mut y = x.to_vec();
                for i in 0..x.len() {
                    let h = 1e-6 * x[i].abs().max(1.0);
                    y[i] = x[i] + h;
                    let up = (self.f)(&y);
                    y[i] = x[i] - h;
                    let down = (self.f)(&y);
                    y[i] = x[i];
                    out[i] = (up - down) / (2.0 * h);
                }
            }
        }
    }

    fn sup_norm(&self) -> f64 {
        self.sup
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: &dyn TestFunction, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        (0..x.len())
            .map(|i| {
                let h = 1e-6;
                y[i] = x[i] + h;
                let up = f.value(&y);
                y[i] = x[i] - h;
                let down = f.value(&y);
                y[i] = x[i];
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn bump_gradient_matches_differences() {
        let b = Bump::new(vec![1.0, 2.0], 1.5, 2.0);
        for x in [[1.2, 2.3], [0.1, 1.9], [1.0, 3.2]] {
            let mut g = [0.0; 2];
            b.gradient(&x, &mut g);
            let n = fd(&b, &x);
            for i in 0..2 {
                assert!((g[i] - n[i]).abs() < 1e-6, "{g:?} {n:?}");
            }
        }
        assert_eq!(b.value(&[5.0, 5.0]), 0.0);
        assert_eq!(b.value(&[1.0, 2.0]), 2.0);
    }

    #[test]
    fn exp_decay_and_indicator() {
        let e = ExpDecay { rate: 2.0, index: 0 };
        let mut g = [0.0];
        e.gradient(&[0.5], &mut g);
        assert!((g[0] + 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        let ind = LatticeIndicator::new(&[3], 10.0);
        assert_eq!(ind.value(&[0.3]), 1.0);
        assert_eq!(ind.value(&[0.4]), 0.0);
    }
}
