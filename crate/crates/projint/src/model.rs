//! Slow-fast system definitions and the reduced dynamics.
//!
//! A [`MultiscaleSystem`] couples slow variables y (dimension n) to fast
//! variables x (dimension m) through
//!
//! ```text
//! dy/dt = g(x, y)
//! dx/dt = (Λ/ε) (-x + h0(y))
//! ```
//!
//! with Λ diagonal and positive. Time is normalized so that min(Λ) = 1; the
//! largest entry is exposed as [`MultiscaleSystem::lambda_max`]. On the slow
//! manifold x = h0(y) the fast field vanishes and the dynamics is governed by
//! the reduced system dY/dt = g(h0(Y), Y), obtained with [`MultiscaleSystem::reduce`].

use crate::error::Error;
use crate::Result;
use std::sync::Arc;

/// Slow vector field g(x, y) writing into `out` (length n).
pub type SlowField = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;
/// Zeroth-order slow manifold h0(y) writing into `out` (length m).
pub type Manifold = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A slow-fast system with linear-relaxation fast dynamics.
///
/// Immutable after construction; cheap to clone (the callable fields are
/// shared) and safe to use from concurrent evaluations.
#[derive(Clone)]
pub struct MultiscaleSystem {
    dim_slow: usize,
    dim_fast: usize,
    epsilon: f64,
    lambda_diag: Vec<f64>,
    slow_field: Arc<SlowField>,
    h0: Arc<Manifold>,
}

impl std::fmt::Debug for MultiscaleSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MultiscaleSystem")
            .field("dim_slow", &self.dim_slow)
            .field("dim_fast", &self.dim_fast)
            .field("epsilon", &self.epsilon)
            .field("lambda_diag", &self.lambda_diag)
            .finish_non_exhaustive()
    }
}

impl MultiscaleSystem {
    /// Builds a system, validating ε > 0 and the Λ normalization
    /// (all entries positive, smallest equal to 1).
    pub fn new(
        dim_slow: usize,
        dim_fast: usize,
        epsilon: f64,
        lambda_diag: Vec<f64>,
        slow_field: Arc<SlowField>,
        h0: Arc<Manifold>,
    ) -> Result<Self> {
        if dim_slow == 0 || dim_fast == 0 {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        if lambda_diag.len() != dim_fast {
            return Err(Error::DimensionMismatch {
                what: "lambda_diag",
                expected: dim_fast,
                got: lambda_diag.len(),
            });
        }
        let min = lambda_diag.iter().cloned().fold(f64::INFINITY, f64::min);
        if !lambda_diag.iter().all(|&l| l > 0.0 && l.is_finite()) {
            return Err(Error::Config("lambda_diag entries must be positive".into()));
        }
        if (min - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "time normalization requires min(lambda) = 1, got {min}"
            )));
        }
        Ok(Self {
            dim_slow,
            dim_fast,
            epsilon,
            lambda_diag,
            slow_field,
            h0,
        })
    }

    pub fn dim_slow(&self) -> usize {
        self.dim_slow
    }

    pub fn dim_fast(&self) -> usize {
        self.dim_fast
    }

    /// Total state dimension m + n.
    pub fn dim(&self) -> usize {
        self.dim_fast + self.dim_slow
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn lambda_diag(&self) -> &[f64] {
        &self.lambda_diag
    }

    /// λ = max(Λ); the fastest relaxation rate relative to the slowest.
    pub fn lambda_max(&self) -> f64 {
        self.lambda_diag.iter().cloned().fold(1.0, f64::max)
    }

    fn check_dims(&self, s: &FullState) -> Result<()> {
        if s.x.len() != self.dim_fast {
            return Err(Error::DimensionMismatch {
                what: "fast state",
                expected: self.dim_fast,
                got: s.x.len(),
            });
        }
        if s.y.len() != self.dim_slow {
            return Err(Error::DimensionMismatch {
                what: "slow state",
                expected: self.dim_slow,
                got: s.y.len(),
            });
        }
        Ok(())
    }

    /// h0(y) into `out`.
    pub fn h0_into(&self, y: &[f64], out: &mut [f64]) {
        (self.h0)(y, out);
    }

    /// Fast field (Λ/ε)(-x + h0(y)) into `out`; no allocation.
    pub fn eval_fast_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        (self.h0)(y, out);
        for i in 0..self.dim_fast {
            out[i] = self.lambda_diag[i] / self.epsilon * (-x[i] + out[i]);
        }
    }

    /// Fast field (Λ/ε)(-x + h0(y)).
    pub fn eval_fast(&self, s: &FullState) -> Result<Vec<f64>> {
        self.check_dims(s)?;
        let mut out = vec![0.0; self.dim_fast];
        self.eval_fast_into(&s.x, &s.y, &mut out);
        Ok(out)
    }

    /// Slow field g(x, y).
    pub fn eval_slow(&self, s: &FullState) -> Result<Vec<f64>> {
        self.check_dims(s)?;
        let mut out = vec![0.0; self.dim_slow];
        (self.slow_field)(&s.x, &s.y, &mut out);
        Ok(out)
    }

    /// Full tangent, concatenated as (fast, slow) to match the (x, y) state
    /// split.
    pub fn eval_full(&self, s: &FullState) -> Result<Vec<f64>> {
        self.check_dims(s)?;
        let mut out = vec![0.0; self.dim()];
        self.eval_full_flat(&s.flatten(), &mut out);
        Ok(out)
    }

    /// Full tangent on a flattened state z = (x..., y...); no allocation.
    pub fn eval_full_flat(&self, z: &[f64], out: &mut [f64]) {
        let m = self.dim_fast;
        let (x, y) = z.split_at(m);
        let (fx, fy) = out.split_at_mut(m);
        self.eval_fast_into(x, y, fx);
        (self.slow_field)(x, y, fy);
    }

    /// Euclidean distance of the fast variables from the approximate slow
    /// manifold, |x - h0(y)|.
    pub fn deviation(&self, s: &FullState) -> f64 {
        self.deviation_flat(&s.flatten())
    }

    pub(crate) fn deviation_flat(&self, z: &[f64]) -> f64 {
        let m = self.dim_fast;
        let (x, y) = z.split_at(m);
        let mut h = vec![0.0; m];
        (self.h0)(y, &mut h);
        x.iter()
            .zip(h.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// The reduced slow dynamics dY/dt = g(h0(Y), Y).
    pub fn reduce(&self) -> ReducedSystem {
        ReducedSystem {
            dim: self.dim_slow,
            dim_fast: self.dim_fast,
            slow_field: Arc::clone(&self.slow_field),
            h0: Arc::clone(&self.h0),
        }
    }
}

/// Full system state (x, y) and simulation time.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub t: f64,
}

impl FullState {
    /// Rejects NaN/Inf entries.
    pub fn new(x: Vec<f64>, y: Vec<f64>, t: f64) -> Result<Self> {
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteState { what: "fast state x" });
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteState { what: "slow state y" });
        }
        if !t.is_finite() {
            return Err(Error::NonFiniteState { what: "time t" });
        }
        Ok(Self { x, y, t })
    }

    /// Scalar convenience constructor for 1+1 dimensional systems.
    pub fn scalar(x: f64, y: f64, t: f64) -> Result<Self> {
        Self::new(vec![x], vec![y], t)
    }

    /// Flattened view z = (x..., y...).
    pub fn flatten(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.x.len() + self.y.len());
        z.extend_from_slice(&self.x);
        z.extend_from_slice(&self.y);
        z
    }

    pub(crate) fn from_flat(z: &[f64], dim_fast: usize, t: f64) -> Result<Self> {
        let (x, y) = z.split_at(dim_fast);
        Self::new(x.to_vec(), y.to_vec(), t)
    }
}

/// Reduced slow dynamics dY/dt = G(Y) with G(Y) = g(h0(Y), Y).
#[derive(Clone)]
pub struct ReducedSystem {
    dim: usize,
    dim_fast: usize,
    slow_field: Arc<SlowField>,
    h0: Arc<Manifold>,
}

impl ReducedSystem {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// G(Y), allocating.
    pub fn eval(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        let mut xbuf = vec![0.0; self.dim_fast];
        self.eval_into(y, &mut xbuf, &mut out);
        out
    }

    /// G(Y) into `out`, using `xbuf` (length m) as scratch for h0(Y).
    pub fn eval_into(&self, y: &[f64], xbuf: &mut [f64], out: &mut [f64]) {
        (self.h0)(y, xbuf);
        (self.slow_field)(xbuf, y, out);
    }

    /// A reusable evaluator carrying its own scratch buffer, for hot loops.
    pub fn evaluator(&self) -> ReducedEvaluator {
        ReducedEvaluator {
            sys: self.clone(),
            xbuf: vec![0.0; self.dim_fast],
        }
    }
}

/// Allocation-free evaluator for a [`ReducedSystem`].
pub struct ReducedEvaluator {
    sys: ReducedSystem,
    xbuf: Vec<f64>,
}

impl ReducedEvaluator {
    pub fn eval(&mut self, y: &[f64], out: &mut [f64]) {
        self.sys.eval_into(y, &mut self.xbuf, out);
    }
}

/// The scalar benchmark system
///
/// ```text
/// dy/dt = -x y - α y²
/// dx/dt = (-x + sin²(y)) / ε
/// ```
///
/// with stable fixed point (0, 0), slow manifold h0(y) = sin²(y) and reduced
/// dynamics dY/dt = -Y sin²(Y) - α Y².
pub fn make_toy_system(alpha: f64, epsilon: f64) -> Result<MultiscaleSystem> {
    let g: Arc<SlowField> = Arc::new(move |x: &[f64], y: &[f64], out: &mut [f64]| {
        out[0] = -x[0] * y[0] - alpha * y[0] * y[0];
    });
    let h0: Arc<Manifold> = Arc::new(|y: &[f64], out: &mut [f64]| {
        let s = y[0].sin();
        out[0] = s * s;
    });
    MultiscaleSystem::new(1, 1, epsilon, vec![1.0], g, h0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;

    fn sin2(y: f64) -> f64 {
        y.sin() * y.sin()
    }

    #[test]
    fn fast_field_vanishes_on_manifold() {
        let sys = make_toy_system(0.2, 1e-4).unwrap();
        let s = FullState::scalar(sin2(1.0), 1.0, 0.0).unwrap();
        assert_eq!(sys.eval_fast(&s).unwrap()[0], 0.0);

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let y: f64 = rng.gen_range(-6.0..6.0);
            let s = FullState::scalar(sin2(y), y, 0.0).unwrap();
            assert_eq!(sys.eval_fast(&s).unwrap()[0], 0.0);
        }
    }

    #[test]
    fn fast_field_at_fixed_point_is_zero() {
        let sys = make_toy_system(1.0, 1e-4).unwrap();
        let s = FullState::scalar(0.0, 0.0, 0.0).unwrap();
        assert_eq!(sys.eval_fast(&s).unwrap()[0], 0.0);
        assert_eq!(sys.eval_slow(&s).unwrap()[0], 0.0);
    }

    #[test]
    fn fast_field_direct_substitution() {
        // ε = 1, λ = 1, x = 1, y = 0: (1/1)(-1 + sin²0) = -1
        let sys = make_toy_system(0.7, 1.0).unwrap();
        let s = FullState::scalar(1.0, 0.0, 0.0).unwrap();
        assert_eq!(sys.eval_fast(&s).unwrap()[0], -1.0);
    }

    #[test]
    fn slow_field_values() {
        let sys = make_toy_system(0.2, 1e-4).unwrap();
        let s = FullState::scalar(0.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(sys.eval_slow(&s).unwrap()[0], -0.2, max_relative = 1e-15);

        let sys = make_toy_system(1.0, 1e-4).unwrap();
        let s = FullState::scalar(1.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(sys.eval_slow(&s).unwrap()[0], -2.0, max_relative = 1e-15);
    }

    #[test]
    fn full_tangent_is_concatenation() {
        let sys = make_toy_system(0.2, 1e-3).unwrap();
        let s = FullState::scalar(0.3, 1.2, 0.0).unwrap();
        let full = sys.eval_full(&s).unwrap();
        assert_eq!(full[0], sys.eval_fast(&s).unwrap()[0]);
        assert_eq!(full[1], sys.eval_slow(&s).unwrap()[0]);
    }

    #[test]
    fn reduced_matches_formula() {
        // G(Y) = -Y sin²(Y) - α Y²
        let sys = make_toy_system(0.2, 1e-9).unwrap();
        let red = sys.reduce();
        assert_eq!(red.eval(&[0.0])[0], 0.0);
        // α = 0.2, Y = 1: -(sin²(1) + 0.2), independently computed
        assert_relative_eq!(
            red.eval(&[1.0])[0],
            -0.9080734182735712,
            max_relative = 1e-14
        );
    }

    #[test]
    fn reduced_agrees_with_slow_field_on_manifold() {
        let sys = make_toy_system(0.7, 1e-6).unwrap();
        let red = sys.reduce();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for _ in 0..1000 {
            let y: f64 = rng.gen_range(-5.0..5.0);
            let s = FullState::scalar(sin2(y), y, 0.0).unwrap();
            // Same code path, must be bitwise equal.
            assert_eq!(red.eval(&[y])[0], sys.eval_slow(&s).unwrap()[0]);
        }
    }

    #[test]
    fn toy_manifold_range_and_normalization() {
        let sys = make_toy_system(3.0, 1e-2).unwrap();
        assert_eq!(sys.lambda_diag(), &[1.0]);
        assert_eq!(sys.lambda_max(), 1.0);
        let mut out = [0.0];
        for k in -50..50 {
            sys.h0_into(&[k as f64 * 0.17], &mut out);
            assert!((0.0..=1.0).contains(&out[0]));
        }
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(make_toy_system(0.2, 0.0).is_err());
        assert!(make_toy_system(0.2, -1.0).is_err());
        let g: Arc<SlowField> = Arc::new(|_, _, out| out[0] = 0.0);
        let h: Arc<Manifold> = Arc::new(|_, out| out[0] = 0.0);
        // min(lambda) != 1
        let r = MultiscaleSystem::new(1, 1, 1e-3, vec![2.0], g.clone(), h.clone());
        assert!(matches!(r, Err(Error::Config(_))));
        let r = MultiscaleSystem::new(1, 2, 1e-3, vec![1.0], g, h);
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn state_rejects_non_finite() {
        assert!(FullState::scalar(f64::NAN, 0.0, 0.0).is_err());
        assert!(FullState::scalar(0.0, f64::INFINITY, 0.0).is_err());
        assert!(FullState::scalar(0.0, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn dimension_mismatch_reported() {
        let sys = make_toy_system(0.2, 1e-3).unwrap();
        let s = FullState::new(vec![0.0, 0.0], vec![1.0], 0.0).unwrap();
        assert!(matches!(
            sys.eval_fast(&s),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
