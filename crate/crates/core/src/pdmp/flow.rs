use crate::error::{Error, Result};
use crate::model::{Drift, PdmpSpec};

/// Below this a negative coordinate is treated as integration noise and clamped.
const CLAMP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowMode {
    /// `x_i e^{-r_i t}`, for diagonal linear fields only.
    ClosedForm,
    /// Classical Runge–Kutta with step `step`; the last step is shortened to land on `t`.
    Rk4 { step: f64 },
}

/// Evaluates the flow `φ(t, x)` of the drift.
#[derive(Debug, Clone, Copy)]
pub struct FlowEvaluator<'a> {
    spec: &'a PdmpSpec,
    mode: FlowMode,
}

/// Default RK4 step `1e-3 / max(1, L_F)`.
pub fn default_rk4_step(spec: &PdmpSpec) -> f64 {
    1e-3 / spec.field_lipschitz().unwrap_or(1.0).max(1.0)
}

impl<'a> FlowEvaluator<'a> {
    /// Closed form for diagonal linear fields, RK4 with the default step otherwise.
    pub fn new(spec: &'a PdmpSpec) -> Self {
        let mode = if spec.diagonal_rates().is_some() {
            FlowMode::ClosedForm
        } else {
            FlowMode::Rk4 {
                step: default_rk4_step(spec),
            }
        };
        Self { spec, mode }
    }

    pub fn with_mode(spec: &'a PdmpSpec, mode: FlowMode) -> Result<Self> {
        match mode {
            FlowMode::ClosedForm if spec.diagonal_rates().is_none() => {
                Err(Error::invalid("closed-form flow needs a diagonal linear field"))
            }
            FlowMode::Rk4 { step } if !(step > 0.0) || !step.is_finite() => {
                Err(Error::invalid(format!("RK4 step must be > 0, got {step}")))
            }
            _ => Ok(Self { spec, mode }),
        }
    }

    pub fn mode(&self) -> FlowMode {
        self.mode
    }

    pub fn spec(&self) -> &'a PdmpSpec {
        self.spec
    }

    /// `φ(t, x)` written into `out`.
    pub fn flow_into(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        if !(t >= 0.0) {
            return Err(Error::invalid(format!("flow time must be >= 0, got {t}")));
        }
        out.copy_from_slice(x);
        if t == 0.0 {
            return Ok(());
        }
        match self.mode {
            FlowMode::ClosedForm => {
                let r = self.spec.diagonal_rates().expect("checked at construction");
                for ((o, xi), ri) in out.iter_mut().zip(x).zip(r) {
                    *o = xi * (-ri * t).exp();
                }
                Ok(())
            }
            FlowMode::Rk4 { step } => {
                let mut ws = Rk4Workspace::new(x.len());
                let full = (t / step).floor();
                for _ in 0..full as u64 {
                    ws.step(self.spec, out, step);
                }
                let rest = t - full * step;
                if rest > 0.0 {
                    ws.step(self.spec, out, rest);
                }
                clamp_orthant(out)
            }
        }
    }

    pub fn flow(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        self.flow_into(x, t, &mut out)?;
        Ok(out)
    }

    /// Cached flow line from `origin`.
    pub fn path(&self, origin: &[f64]) -> FlowPath<'a> {
        FlowPath::new(*self, origin)
    }
}

/// `φ(t, x)` with the automatically selected mode.
pub fn flow(spec: &PdmpSpec, x: &[f64], t: f64) -> Result<Vec<f64>> {
    FlowEvaluator::new(spec).flow(x, t)
}

fn clamp_orthant(x: &mut [f64]) -> Result<()> {
    for (coord, v) in x.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v < -CLAMP_TOL {
                return Err(Error::LeftOrthant { coord, value: *v });
            }
            *v = 0.0;
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
struct Rk4Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Workspace {
    fn new(d: usize) -> Self {
        Self {
            k1: vec![0.0; d],
            k2: vec![0.0; d],
            k3: vec![0.0; d],
            k4: vec![0.0; d],
            tmp: vec![0.0; d],
        }
    }

    fn step(&mut self, spec: &PdmpSpec, x: &mut [f64], h: f64) {
        spec.drift(x, &mut self.k1);
        for ((t, xi), k) in self.tmp.iter_mut().zip(x.iter()).zip(&self.k1) {
            *t = xi + 0.5 * h * k;
        }
        spec.drift(&self.tmp, &mut self.k2);
        for ((t, xi), k) in self.tmp.iter_mut().zip(x.iter()).zip(&self.k2) {
            *t = xi + 0.5 * h * k;
        }
        spec.drift(&self.tmp, &mut self.k3);
        for ((t, xi), k) in self.tmp.iter_mut().zip(x.iter()).zip(&self.k3) {
            *t = xi + h * k;
        }
        spec.drift(&self.tmp, &mut self.k4);
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Flow line from a fixed origin with RK4 checkpoints at multiples of the
/// step, so `state_at(s)` costs at most one partial step once the
/// checkpoints up to `s` exist. Results agree bit for bit with
/// [`FlowEvaluator::flow_into`].
#[derive(Debug, Clone)]
pub struct FlowPath<'a> {
    eval: FlowEvaluator<'a>,
    origin: Vec<f64>,
    checkpoints: Vec<f64>,
    ws: Rk4Workspace,
}

impl<'a> FlowPath<'a> {
    fn new(eval: FlowEvaluator<'a>, origin: &[f64]) -> Self {
        Self {
            eval,
            origin: origin.to_vec(),
            checkpoints: origin.to_vec(),
            ws: Rk4Workspace::new(origin.len()),
        }
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn state_at(&mut self, s: f64, out: &mut [f64]) -> Result<()> {
        let step = match self.eval.mode {
            FlowMode::ClosedForm => return self.eval.flow_into(&self.origin, s, out),
            FlowMode::Rk4 { step } => step,
        };
        if !(s >= 0.0) {
            return Err(Error::invalid(format!("flow time must be >= 0, got {s}")));
        }
        let d = self.origin.len();
        let full = (s / step).floor();
        let k = full as usize;
        while self.checkpoints.len() / d <= k {
            let last = self.checkpoints.len() - d;
            out.copy_from_slice(&self.checkpoints[last..]);
            self.ws.step(self.eval.spec, out, step);
            self.checkpoints.extend_from_slice(out);
        }
        out.copy_from_slice(&self.checkpoints[k * d..(k + 1) * d]);
        let rest = s - full * step;
        if rest > 0.0 {
            self.ws.step(self.eval.spec, out, rest);
        }
        clamp_orthant(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_gene_model, GeneModelParams, Rate, VectorField};
    use rand::Rng;

    fn gene() -> PdmpSpec {
        let p = GeneModelParams::new(1.0, Rate::constant(2.0).unwrap(), 1.0, 100.0).unwrap();
        build_gene_model(&p).unwrap().1
    }

    #[test]
    fn closed_form_examples() {
        let spec = gene();
        let y = flow(&spec, &[2.0], std::f64::consts::LN_2).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-15);
        assert_eq!(flow(&spec, &[2.0], 0.0).unwrap(), vec![2.0]);
    }

    #[test]
    fn rk4_matches_closed_form() {
        let spec = PdmpSpec::new(2, VectorField::DiagonalLinear(vec![1.0, 2.0]), None, vec![]).unwrap();
        let rk = FlowEvaluator::with_mode(&spec, FlowMode::Rk4 { step: 1e-3 }).unwrap();
        let exact = FlowEvaluator::new(&spec);
        let x = [1.5, 3.0];
        let a = rk.flow(&x, 5.0).unwrap();
        let b = exact.flow(&x, 5.0).unwrap();
        for i in 0..2 {
            assert!((a[i] - b[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn path_cache_agrees_with_direct_flow() {
        let spec = PdmpSpec::new(1, VectorField::DiagonalLinear(vec![1.3]), None, vec![]).unwrap();
        let rk = FlowEvaluator::with_mode(&spec, FlowMode::Rk4 { step: 1e-2 }).unwrap();
        let mut path = rk.path(&[2.0]);
        let mut out = [0.0];
        for s in [0.731, 0.01, 2.5, 0.0, 1.005] {
            path.state_at(s, &mut out).unwrap();
            assert_eq!(out[0], rk.flow(&[2.0], s).unwrap()[0]);
        }
    }

    #[test]
    fn semigroup_property() {
        let spec = PdmpSpec::new(2, VectorField::DiagonalLinear(vec![0.5, 2.0]), None, vec![]).unwrap();
        let rk = FlowEvaluator::with_mode(&spec, FlowMode::Rk4 { step: 1e-3 }).unwrap();
        let exact = FlowEvaluator::new(&spec);
        let mut rng = crate::rng::replica_rng(4, 0);
        for _ in 0..100 {
            let t = rng.random::<f64>() * 3.0;
            let s = rng.random::<f64>() * 3.0;
            let x = [rng.random::<f64>() * 5.0, rng.random::<f64>() * 5.0];
            for (ev, tol) in [(rk, 1e-8), (exact, 1e-13)] {
                let lhs = ev.flow(&x, t + s).unwrap();
                let rhs = ev.flow(&ev.flow(&x, t).unwrap(), s).unwrap();
                for i in 0..2 {
                    assert!((lhs[i] - rhs[i]).abs() <= tol, "{lhs:?} {rhs:?}");
                }
            }
        }
    }

    #[test]
    fn outward_field_is_rejected() {
        let push: crate::model::spec::FieldFn = std::sync::Arc::new(|_x: &[f64], out: &mut [f64]| out[0] = -1.0);
        let spec = PdmpSpec::new(1, VectorField::Custom(push), Some(0.0), vec![]).unwrap();
        let ev = FlowEvaluator::new(&spec);
        assert!(matches!(ev.flow(&[0.5], 1.0), Err(Error::LeftOrthant { .. })));
        // tiny overshoot is clamped
        assert_eq!(ev.flow(&[0.5], 0.5 + 1e-12).unwrap(), vec![0.0]);
    }
}
