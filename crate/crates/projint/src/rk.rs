//! Explicit Runge-Kutta machinery in recursive-increment form.
//!
//! Only tableaux in which each increment depends on the single previous one
//! are supported:
//!
//! ```text
//! k_j = h f(z + a_j k_{j-1}),   j = 1..P,  a_1 = 0
//! z'  = z + Σ b_j k_j,          Σ b_j = 1
//! ```
//!
//! This covers forward Euler, the explicit trapezoid rule and the classical
//! RK4 scheme, and is the family the projective-integration analysis is
//! built on. General Butcher tableaux are deliberately out of scope.

use crate::error::Error;
use crate::Result;

/// Nodes and weights of a recursive-form explicit Runge-Kutta scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct RkTableau {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// A violated tableau invariant, reported by [`RkTableau::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum TableauViolation {
    /// a_1 must be 0.
    FirstNodeNonzero(f64),
    /// All nodes must lie in [0, 1].
    NodeOutOfRange { index: usize, value: f64 },
    /// Weights must sum to 1.
    WeightSum(f64),
    /// Nodes and weights must have equal, positive length.
    Shape { nodes: usize, weights: usize },
}

impl std::fmt::Display for TableauViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TableauViolation::FirstNodeNonzero(a) => write!(f, "a_1 = {a}, expected 0"),
            TableauViolation::NodeOutOfRange { index, value } => {
                write!(f, "node a_{} = {value} outside [0, 1]", index + 1)
            }
            TableauViolation::WeightSum(s) => write!(f, "weights sum to {s}, expected 1"),
            TableauViolation::Shape { nodes, weights } => {
                write!(f, "{nodes} nodes vs {weights} weights")
            }
        }
    }
}

impl RkTableau {
    /// Builds and validates a tableau.
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let t = Self { nodes, weights };
        match t.validate() {
            v if v.is_empty() => Ok(t),
            v => Err(Error::Config(format!(
                "invalid tableau: {}",
                v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
            ))),
        }
    }

    /// Forward Euler: a = {0}, b = {1}.
    pub fn euler() -> Self {
        Self {
            nodes: vec![0.0],
            weights: vec![1.0],
        }
    }

    /// Second-order explicit trapezoid form: a = {0, 1}, b = {1/2, 1/2}.
    pub fn rk2() -> Self {
        Self {
            nodes: vec![0.0, 1.0],
            weights: vec![0.5, 0.5],
        }
    }

    /// Classical fourth-order scheme: a = {0, 1/2, 1/2, 1},
    /// b = {1/6, 1/3, 1/3, 1/6}.
    pub fn rk4() -> Self {
        Self {
            nodes: vec![0.0, 0.5, 0.5, 1.0],
            weights: vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
        }
    }

    /// The order P (= number of stages in this restricted family).
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Checks all invariants; empty result means valid.
    pub fn validate(&self) -> Vec<TableauViolation> {
        let mut v = Vec::new();
        if self.nodes.is_empty() || self.nodes.len() != self.weights.len() {
            v.push(TableauViolation::Shape {
                nodes: self.nodes.len(),
                weights: self.weights.len(),
            });
            return v;
        }
        if self.nodes[0] != 0.0 {
            v.push(TableauViolation::FirstNodeNonzero(self.nodes[0]));
        }
        for (i, &a) in self.nodes.iter().enumerate() {
            if !(0.0..=1.0).contains(&a) || !a.is_finite() {
                v.push(TableauViolation::NodeOutOfRange { index: i, value: a });
            }
        }
        let s: f64 = self.weights.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            v.push(TableauViolation::WeightSum(s));
        }
        v
    }
}

/// Linear amplification factor ρ(η) = Σ_{j=0..p} η^j / j!, the degree-p
/// Taylor polynomial of exp. One step of an order-p scheme on dx/dt = -x/ε
/// multiplies the state by ρ(-h/ε).
pub fn amplification(order_p: usize, eta: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    for j in 1..=order_p {
        term *= eta / j as f64;
        sum += term;
    }
    sum
}

/// Reusable single-step integrator holding scratch buffers.
pub struct RkStepper {
    k_prev: Vec<f64>,
    k: Vec<f64>,
    stage: Vec<f64>,
    acc: Vec<f64>,
}

impl RkStepper {
    pub fn new(dim: usize) -> Self {
        Self {
            k_prev: vec![0.0; dim],
            k: vec![0.0; dim],
            stage: vec![0.0; dim],
            acc: vec![0.0; dim],
        }
    }

    /// Advances `state` in place by one step of size `h`.
    ///
    /// `field` writes the tangent of its first argument into its second.
    /// Returns the offending stage index if the field produces a non-finite
    /// value.
    pub fn step<F>(&mut self, field: &mut F, tableau: &RkTableau, h: f64, state: &mut [f64]) -> Result<()>
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        let dim = state.len();
        self.acc[..dim].fill(0.0);
        for (j, (&a, &b)) in tableau.nodes().iter().zip(tableau.weights()).enumerate() {
            if j == 0 {
                self.stage[..dim].copy_from_slice(state);
            } else {
                for i in 0..dim {
                    self.stage[i] = state[i] + a * self.k_prev[i];
                }
            }
            field(&self.stage[..dim], &mut self.k[..dim]);
            for i in 0..dim {
                let ki = h * self.k[i];
                if !ki.is_finite() {
                    return Err(Error::NonFiniteField { stage: j });
                }
                self.k[i] = ki;
                self.acc[i] += b * ki;
            }
            self.k_prev[..dim].copy_from_slice(&self.k[..dim]);
        }
        for i in 0..dim {
            state[i] += self.acc[i];
        }
        Ok(())
    }
}

/// One explicit step of size `h` from `state`, returning the new state.
///
/// Convenience wrapper over [`RkStepper`]; reuse a stepper in hot loops.
pub fn rk_step<F>(field: &mut F, state: &[f64], tableau: &RkTableau, h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if !(h > 0.0) {
        return Err(Error::Config(format!("step size must be positive, got {h}")));
    }
    let mut out = state.to_vec();
    RkStepper::new(state.len()).step(field, tableau, h, &mut out)?;
    Ok(out)
}
