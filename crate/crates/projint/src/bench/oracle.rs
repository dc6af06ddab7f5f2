//! Reference trajectories, validated at build time by step halving.

use crate::error::Error;
use crate::model::{FullState, MultiscaleSystem, ReducedSystem};
use crate::rk::{RkStepper, RkTableau};
use crate::Result;

/// Tolerance of the reduced oracle's build-time step-halving check.
const REDUCED_GATE: f64 = 1e-12;
/// Tolerance of the full oracle's build-time step-halving check.
const FULL_GATE: f64 = 1e-10;
/// Hard cap on full-system oracle steps (the stiff sweep figures must never
/// request it).
const FULL_MAX_STEPS: f64 = 1e7;

/// Dense reduced reference Y(t) on [t0, t0 + t_span], RK4 at fixed step with
/// linear interpolation between stored nodes.
#[derive(Debug, Clone)]
pub struct ReducedOracle {
    t0: f64,
    h: f64,
    dim: usize,
    nodes: Vec<f64>,
    /// Relative endpoint change under step halving, measured at build time.
    pub richardson_delta: f64,
}

fn integrate<F>(mut field: F, y0: &[f64], h: f64, steps: u64, store: bool) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let dim = y0.len();
    let tab = RkTableau::rk4();
    let mut stepper = RkStepper::new(dim);
    let mut y = y0.to_vec();
    let mut nodes = Vec::new();
    if store {
        nodes.reserve(((steps + 1) as usize) * dim);
        nodes.extend_from_slice(&y);
    }
    for step in 0..steps {
        stepper
            .step(&mut field, &tab, h, &mut y)
            .map_err(|_| Error::Divergence { step })?;
        if store {
            nodes.extend_from_slice(&y);
        }
    }
    Ok((nodes, y))
}

fn rel_change(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let den: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

impl ReducedOracle {
    fn lookup(&self, t: f64) -> Vec<f64> {
        let n = self.nodes.len() / self.dim - 1;
        let u = ((t - self.t0) / self.h).clamp(0.0, n as f64);
        let i = (u.floor() as usize).min(n.saturating_sub(1));
        let w = u - i as f64;
        let lo = &self.nodes[i * self.dim..(i + 1) * self.dim];
        let hi = &self.nodes[(i + 1) * self.dim..(i + 2) * self.dim];
        lo.iter().zip(hi).map(|(a, b)| a * (1.0 - w) + b * w).collect()
    }

    /// Y(t); clamps outside the built range.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        if self.nodes.len() == self.dim {
            return self.nodes.clone();
        }
        self.lookup(t)
    }

    pub fn step(&self) -> f64 {
        self.h
    }
}

/// Builds a reduced reference by RK4 at step ≤ `resolution`, validating that
/// halving the step changes the endpoint by less than 1e-12 relative.
pub fn reference_reduced(
    reduced: &ReducedSystem,
    y0: &[f64],
    t0: f64,
    t_span: f64,
    resolution: f64,
) -> Result<ReducedOracle> {
    if !(resolution > 0.0) {
        return Err(Error::Config(format!(
            "oracle resolution must be positive, got {resolution}"
        )));
    }
    if t_span < 0.0 {
        return Err(Error::Config("oracle span must be nonnegative".into()));
    }
    if t_span == 0.0 {
        return Ok(ReducedOracle {
            t0,
            h: resolution,
            dim: y0.len(),
            nodes: y0.to_vec(),
            richardson_delta: 0.0,
        });
    }
    let steps = (t_span / resolution).ceil().max(1.0) as u64;
    let h = t_span / steps as f64;
    let mut ev = reduced.evaluator();
    let (nodes, end) = integrate(|y, out| ev.eval(y, out), y0, h, steps, true)?;
    let mut ev2 = reduced.evaluator();
    let (_, end_half) = integrate(|y, out| ev2.eval(y, out), y0, h / 2.0, steps * 2, false)?;
    let delta = rel_change(&end, &end_half);
    if delta >= REDUCED_GATE {
        return Err(Error::OracleConvergence {
            delta,
            tol: REDUCED_GATE,
        });
    }
    Ok(ReducedOracle {
        t0,
        h,
        dim: y0.len(),
        nodes,
        richardson_delta: delta,
    })
}

/// Dense full-system reference (x, y)(t), RK4 at step 0.1ε.
#[derive(Debug, Clone)]
pub struct FullOracle {
    t0: f64,
    h: f64,
    dim_fast: usize,
    dim: usize,
    nodes: Vec<f64>,
    pub richardson_delta: f64,
}

impl FullOracle {
    fn lookup(&self, t: f64) -> Vec<f64> {
        let n = self.nodes.len() / self.dim - 1;
        let u = ((t - self.t0) / self.h).clamp(0.0, n as f64);
        let i = (u.floor() as usize).min(n.saturating_sub(1));
        let w = u - i as f64;
        let lo = &self.nodes[i * self.dim..(i + 1) * self.dim];
        let hi = &self.nodes[(i + 1) * self.dim..(i + 2) * self.dim];
        lo.iter().zip(hi).map(|(a, b)| a * (1.0 - w) + b * w).collect()
    }

    /// Full state (x, y) at time t.
    pub fn eval(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        if self.nodes.len() == self.dim {
            let (x, y) = self.nodes.split_at(self.dim_fast);
            return (x.to_vec(), y.to_vec());
        }
        let z = self.lookup(t);
        let (x, y) = z.split_at(self.dim_fast);
        (x.to_vec(), y.to_vec())
    }

    /// Slow variables y_ε(t).
    pub fn slow(&self, t: f64) -> Vec<f64> {
        self.eval(t).1
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    /// Node times, useful as sample points for error sweeps.
    pub fn times(&self) -> Vec<f64> {
        let n = self.nodes.len() / self.dim;
        (0..n).map(|i| self.t0 + i as f64 * self.h).collect()
    }
}

/// Builds a full-system reference over `t_span` from `s0`, guarding against
/// infeasible requests (more than 1e7 fast steps at δt = 0.1ε).
pub fn reference_full(sys: &MultiscaleSystem, s0: &FullState, t_span: f64) -> Result<FullOracle> {
    if t_span < 0.0 {
        return Err(Error::Config("oracle span must be nonnegative".into()));
    }
    let h = 0.1 * sys.epsilon();
    let steps_f = (t_span / h).ceil();
    if steps_f > FULL_MAX_STEPS {
        return Err(Error::Infeasible(format!(
            "full reference would need {steps_f:.2e} steps at dt = 0.1 eps (cap {FULL_MAX_STEPS:.0e}); \
             use the reduced reference instead"
        )));
    }
    let z0 = s0.flatten();
    if t_span == 0.0 {
        return Ok(FullOracle {
            t0: s0.t,
            h,
            dim_fast: sys.dim_fast(),
            dim: sys.dim(),
            nodes: z0,
            richardson_delta: 0.0,
        });
    }
    let steps = steps_f as u64;
    let h = t_span / steps as f64;
    let (nodes, end) = integrate(|z, out| sys.eval_full_flat(z, out), &z0, h, steps, true)?;
    let (_, end_half) = integrate(
        |z, out| sys.eval_full_flat(z, out),
        &z0,
        h / 2.0,
        steps * 2,
        false,
    )?;
    let delta = rel_change(&end, &end_half);
    if delta >= FULL_GATE {
        return Err(Error::OracleConvergence {
            delta,
            tol: FULL_GATE,
        });
    }
    Ok(FullOracle {
        t0: s0.t,
        h,
        dim_fast: sys.dim_fast(),
        dim: sys.dim(),
        nodes,
        richardson_delta: delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_toy_system;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    #[test]
    fn constant_field_reduced_oracle() {
        use crate::model::{Manifold, MultiscaleSystem, SlowField};
        let g: Arc<SlowField> = Arc::new(|_, _, out: &mut [f64]| out[0] = 0.0);
        let h: Arc<Manifold> = Arc::new(|_, out: &mut [f64]| out[0] = 0.5);
        let sys = MultiscaleSystem::new(1, 1, 1e-3, vec![1.0], g, h).unwrap();
        let oracle = reference_reduced(&sys.reduce(), &[2.0], 0.0, 1.0, 1e-3).unwrap();
        assert_eq!(oracle.eval(0.37), vec![2.0]);
        assert_eq!(oracle.richardson_delta, 0.0);
    }

    #[test]
    fn zero_span_returns_initial() {
        let sys = make_toy_system(0.2, 1e-3).unwrap();
        let oracle = reference_reduced(&sys.reduce(), &[1.0], 0.0, 0.0, 1e-3).unwrap();
        assert_eq!(oracle.eval(0.0), vec![1.0]);
        let s0 = FullState::scalar(0.3, 1.0, 0.0).unwrap();
        let full = reference_full(&sys, &s0, 0.0).unwrap();
        assert_eq!(full.eval(0.0), (vec![0.3], vec![1.0]));
    }

    #[test]
    fn reduced_oracle_matches_independent_reference() {
        // Y(1) for dY/dt = -Y sin²Y - 0.2 Y², Y(0) = 1, computed to 30
        // digits with an independent arbitrary-precision integrator.
        let sys = make_toy_system(0.2, 1e-9).unwrap();
        let oracle = reference_reduced(&sys.reduce(), &[1.0], 0.0, 1.0, 1e-4).unwrap();
        assert_relative_eq!(
            oracle.eval(1.0)[0],
            0.55613046584905345,
            max_relative = 1e-11
        );
        assert!(oracle.richardson_delta < 1e-12);
    }

    #[test]
    fn full_oracle_fixed_point_and_tracking() {
        let sys = make_toy_system(1.0, 1e-3).unwrap();
        // Fixed point (0, 0) stays put.
        let s0 = FullState::scalar(0.0, 0.0, 0.0).unwrap();
        let oracle = reference_full(&sys, &s0, 0.05).unwrap();
        let (x, y) = oracle.eval(0.05);
        assert_eq!(x[0], 0.0);
        assert_eq!(y[0], 0.0);
        // From the manifold, x tracks h0(y) within O(eps).
        let y0 = 1.0f64;
        let s0 = FullState::scalar(y0.sin() * y0.sin(), y0, 0.0).unwrap();
        let oracle = reference_full(&sys, &s0, 0.1).unwrap();
        let (x, y) = oracle.eval(0.1);
        let lag = (x[0] - (y[0].sin() * y[0].sin())).abs();
        assert!(lag < 10.0 * sys.epsilon(), "lag {lag}");
        assert!(oracle.richardson_delta < 1e-10);
    }

    #[test]
    fn full_oracle_guards_infeasible_requests() {
        let sys = make_toy_system(0.2, 1e-9).unwrap();
        let s0 = FullState::scalar(0.5, 1.0, 0.0).unwrap();
        match reference_full(&sys, &s0, 1.0) {
            Err(Error::Infeasible(_)) => {}
            other => panic!("expected infeasible, got {other:?}"),
        }
    }
}
