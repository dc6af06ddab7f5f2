//! The microsolver: m explicit steps of size δt on the full stiff system.

use crate::error::Error;
use crate::model::{FullState, MultiscaleSystem};
use crate::rk::{amplification, RkStepper, RkTableau};
use crate::Result;

/// Microsolver configuration: explicit order p ∈ {1, 2, 4} and microstep δt.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MicroConfig {
    order_p: usize,
    dt_micro: f64,
}

impl MicroConfig {
    pub fn new(order_p: usize, dt_micro: f64) -> Result<Self> {
        if !matches!(order_p, 1 | 2 | 4) {
            return Err(Error::Config(format!(
                "microsolver order must be 1, 2 or 4, got {order_p}"
            )));
        }
        if !(dt_micro > 0.0) || !dt_micro.is_finite() {
            return Err(Error::Config(format!(
                "microstep must be positive, got {dt_micro}"
            )));
        }
        Ok(Self { order_p, dt_micro })
    }

    pub fn order(&self) -> usize {
        self.order_p
    }

    pub fn dt_micro(&self) -> f64 {
        self.dt_micro
    }

    pub fn tableau(&self) -> RkTableau {
        match self.order_p {
            1 => RkTableau::euler(),
            2 => RkTableau::rk2(),
            _ => RkTableau::rk4(),
        }
    }

    /// Warning when an Euler microsolver sits outside its stability region
    /// 0 < δt < 2ε/λ. Deliberate unstable regimes are allowed, so this never
    /// aborts.
    pub fn stability_warning(&self, sys: &MultiscaleSystem) -> Option<String> {
        if self.order_p == 1 {
            let limit = 2.0 * sys.epsilon() / sys.lambda_max();
            if self.dt_micro >= limit {
                return Some(format!(
                    "microstep {:.3e} outside the Euler stability region (0, {:.3e})",
                    self.dt_micro, limit
                ));
            }
        }
        None
    }
}

/// Internal evaluator for the full field that counts evaluations.
pub(crate) struct FullField<'a> {
    sys: &'a MultiscaleSystem,
    pub evals: u64,
}

impl<'a> FullField<'a> {
    pub fn new(sys: &'a MultiscaleSystem) -> Self {
        Self { sys, evals: 0 }
    }

    pub fn eval(&mut self, z: &[f64], out: &mut [f64]) {
        self.evals += 1;
        self.sys.eval_full_flat(z, out);
    }
}

/// Relaxes a flattened state in place by `m` microsteps.
pub(crate) fn relax_flat(
    field: &mut FullField<'_>,
    stepper: &mut RkStepper,
    tableau: &RkTableau,
    dt: f64,
    z: &mut [f64],
    m: u64,
) -> Result<()> {
    for step in 0..m {
        let mut f = |zz: &[f64], out: &mut [f64]| field.eval(zz, out);
        stepper
            .step(&mut f, tableau, dt, z)
            .map_err(|_| Error::Divergence { step })?;
    }
    Ok(())
}

/// The microsolver flow map φ^{m,δt}: `m` explicit order-p steps applied to
/// the full system. `m = 0` returns the state unchanged; time advances by
/// m·δt.
pub fn micro_flow(
    sys: &MultiscaleSystem,
    s0: &FullState,
    m: u64,
    cfg: &MicroConfig,
) -> Result<FullState> {
    let mut z = s0.flatten();
    let mut field = FullField::new(sys);
    let mut stepper = RkStepper::new(sys.dim());
    let tab = cfg.tableau();
    relax_flat(&mut field, &mut stepper, &tab, cfg.dt_micro, &mut z, m)?;
    let mut t = s0.t;
    for _ in 0..m {
        t += cfg.dt_micro;
    }
    FullState::from_flat(&z, sys.dim_fast(), t)
}

/// Theoretical contraction of the fast deviation over `m` microsteps at the
/// slowest rate min(Λ) = 1: ρ(-δt/ε)^m.
pub fn contraction_factor(cfg: &MicroConfig, sys: &MultiscaleSystem, m: u64) -> f64 {
    amplification(cfg.order_p, -cfg.dt_micro / sys.epsilon()).powf(m as f64)
}
