//! The PI1 and PI2 macrostep procedures and the outer integration loop.
//!
//! Both schemes relax the state with the microsolver, build increments that
//! span a macro time step, and combine them with Runge-Kutta weights:
//!
//! * PI1 evaluates the vector field after each relaxation,
//!   `k̂_j = Δt F(φ^{M_j,δt}(seed_j))`, and steps
//!   `z' = φ^{M_1,δt}(z) + Σ b_j k̂_j`.
//! * PI2 additionally relaxes the seed after each auxiliary increment and
//!   replaces `k̂_j` by the chord
//!   `k_j = (φ^{M_{j+1},δt}(seed_{j+1}) - φ^{M_1,δt}(z)) / a_{j+1}`,
//!   with `a_{P+1} = 1`. The chords end near the slow manifold, which is what
//!   buys PI2 its smaller microstep error and quadratic (instead of linear)
//!   manifold deviation per macrostep.
//!
//! With every microstep count zero, both schemes reduce to the plain
//! Runge-Kutta method on the full system.

use crate::error::Error;
use crate::micro::{relax_flat, FullField, MicroConfig};
use crate::model::{FullState, MultiscaleSystem};
use crate::rk::{RkStepper, RkTableau};
use crate::Result;

/// Projective integration variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Scheme {
    Pi1,
    Pi2,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::Pi1 => write!(f, "PI1"),
            Scheme::Pi2 => write!(f, "PI2"),
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pi1" => Ok(Scheme::Pi1),
            "pi2" => Ok(Scheme::Pi2),
            other => Err(Error::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Macrostep configuration.
#[derive(Debug, Clone)]
pub struct PiConfig {
    pub scheme: Scheme,
    /// Macrosolver tableau (order P).
    pub tableau: RkTableau,
    /// Macrostep Δt.
    pub dt_macro: f64,
    pub micro: MicroConfig,
    /// M₁, microsteps of the initial relaxation.
    pub m_first: u64,
    /// M, the allocation base: PI1 uses M per increment, PI2 allocates a_j·M.
    pub m_budget: u64,
}

impl PiConfig {
    pub fn new(
        scheme: Scheme,
        tableau: RkTableau,
        dt_macro: f64,
        micro: MicroConfig,
        m_first: u64,
        m_budget: u64,
    ) -> Result<Self> {
        let cfg = Self {
            scheme,
            tableau,
            dt_macro,
            micro,
            m_first,
            m_budget,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_macro > 0.0) || !self.dt_macro.is_finite() {
            return Err(Error::Config(format!(
                "macrostep must be positive, got {}",
                self.dt_macro
            )));
        }
        let v = self.tableau.validate();
        if !v.is_empty() {
            return Err(Error::Config(format!(
                "invalid tableau: {}",
                v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
            )));
        }
        if self.scheme == Scheme::Pi2 {
            for (j, &a) in self.tableau.nodes().iter().enumerate().skip(1) {
                if a == 0.0 {
                    return Err(Error::Config(format!(
                        "PI2 requires a_{} > 0 (chord denominator)",
                        j + 1
                    )));
                }
            }
        }
        self.allocate_microsteps().map(|_| ())
    }

    /// Per-increment microstep counts: PI1 gives {M₁, M, ..., M} (P entries),
    /// PI2 gives {M₁, a₂M, ..., a_P M, M} (P+1 entries, a_{P+1} = 1).
    ///
    /// For PI2 every a_j·M must be an integer; the error names the offending
    /// node.
    pub fn allocate_microsteps(&self) -> Result<Vec<u64>> {
        let p = self.tableau.order();
        match self.scheme {
            Scheme::Pi1 => {
                let mut ms = vec![self.m_first];
                ms.extend(std::iter::repeat(self.m_budget).take(p - 1));
                Ok(ms)
            }
            Scheme::Pi2 => {
                let mut ms = Vec::with_capacity(p + 1);
                ms.push(self.m_first);
                let nodes_tail = self.tableau.nodes()[1..]
                    .iter()
                    .copied()
                    .chain(std::iter::once(1.0));
                for (j, a) in nodes_tail.enumerate() {
                    let v = a * self.m_budget as f64;
                    let rounded = v.round();
                    if (v - rounded).abs() > 1e-9 * v.max(1.0) {
                        return Err(Error::Config(format!(
                            "PI2 allocation a_{}·M = {}·{} = {} is not an integer",
                            j + 2,
                            a,
                            self.m_budget,
                            v
                        )));
                    }
                    ms.push(rounded as u64);
                }
                Ok(ms)
            }
        }
    }

    /// Time advanced per macrostep. PI1: Δt + M₁δt. PI2: Δ̃t + M₁δt with
    /// Δ̃t = Δt + Mδt. This is the single place the clock convention lives.
    pub fn step_span(&self) -> f64 {
        let dt = self.micro.dt_micro();
        match self.scheme {
            Scheme::Pi1 => self.dt_macro + self.m_first as f64 * dt,
            Scheme::Pi2 => self.dt_macro + (self.m_budget + self.m_first) as f64 * dt,
        }
    }

    /// Effective increment span: Δt for PI1, Δ̃t = Δt + Mδt for PI2.
    pub fn increment_span(&self) -> f64 {
        match self.scheme {
            Scheme::Pi1 => self.dt_macro,
            Scheme::Pi2 => self.dt_macro + self.m_budget as f64 * self.micro.dt_micro(),
        }
    }
}

/// Per-macrostep diagnostics.
#[derive(Debug, Clone)]
pub struct StepDiagnostics {
    /// |x - h0(y)| at each increment seed z^{n,j}_0 (P entries for PI1,
    /// P+1 for PI2; the first is the deviation of the incoming state).
    pub seed_deviations: Vec<f64>,
    /// Full-field evaluations spent in this step (microsolver stages plus
    /// increment evaluations).
    pub field_evals: u64,
}

fn pi_step_impl(
    sys: &MultiscaleSystem,
    s: &FullState,
    cfg: &PiConfig,
) -> Result<(FullState, StepDiagnostics)> {
    let ms = cfg.allocate_microsteps()?;
    let p = cfg.tableau.order();
    let n_seeds = ms.len();
    let dim = sys.dim();
    let dt = cfg.dt_macro;

    // a_j for seeds j = 2..=n_seeds; PI2 appends a_{P+1} = 1.
    let mut nodes = cfg.tableau.nodes().to_vec();
    if cfg.scheme == Scheme::Pi2 {
        nodes.push(1.0);
    }
    let weights = cfg.tableau.weights();

    let mut field = FullField::new(sys);
    let mut stepper = RkStepper::new(dim);
    let micro_tab = cfg.micro.tableau();
    let dtm = cfg.micro.dt_micro();

    let mut seed_deviations = Vec::with_capacity(n_seeds);
    let mut seed = s.flatten();
    let mut rel_base = vec![0.0; dim];
    let mut rels: Vec<Vec<f64>> = Vec::new(); // relaxed seeds 2..=P+1 (PI2 only)
    let mut k_hat = vec![0.0; dim];
    let mut acc = vec![0.0; dim];

    for j in 1..=n_seeds {
        if j > 1 {
            for i in 0..dim {
                seed[i] = rel_base[i] + nodes[j - 1] * k_hat[i];
            }
        }
        seed_deviations.push(sys.deviation_flat(&seed));
        relax_flat(&mut field, &mut stepper, &micro_tab, dtm, &mut seed, ms[j - 1])?;
        if j == 1 {
            rel_base.copy_from_slice(&seed);
        } else if cfg.scheme == Scheme::Pi2 {
            rels.push(seed.clone());
        }
        if j <= p {
            // k̂_j = Δt F(z^{n,j}_{M_j})
            let mut tangent = vec![0.0; dim];
            field.eval(if j == 1 { &rel_base } else { &seed }, &mut tangent);
            for i in 0..dim {
                k_hat[i] = dt * tangent[i];
            }
            if cfg.scheme == Scheme::Pi1 {
                for i in 0..dim {
                    acc[i] += weights[j - 1] * k_hat[i];
                }
            }
        }
    }

    if cfg.scheme == Scheme::Pi2 {
        for (j, rel) in rels.iter().enumerate() {
            let a_next = nodes[j + 1]; // a_{j+1} for increment j = 1..=P
            let b = weights[j];
            for i in 0..dim {
                acc[i] += b * (rel[i] - rel_base[i]) / a_next;
            }
        }
    }

    let mut z_new = rel_base;
    for i in 0..dim {
        z_new[i] += acc[i];
    }
    let s_new = FullState::from_flat(&z_new, sys.dim_fast(), s.t + cfg.step_span())
        .map_err(|_| Error::Divergence { step: 0 })?;
    Ok((
        s_new,
        StepDiagnostics {
            seed_deviations,
            field_evals: field.evals,
        },
    ))
}

/// One PI1 macrostep.
pub fn pi1_step(
    sys: &MultiscaleSystem,
    s: &FullState,
    cfg: &PiConfig,
) -> Result<(FullState, StepDiagnostics)> {
    if cfg.scheme != Scheme::Pi1 {
        return Err(Error::Config("pi1_step requires scheme = PI1".into()));
    }
    pi_step_impl(sys, s, cfg)
}

/// One PI2 macrostep.
pub fn pi2_step(
    sys: &MultiscaleSystem,
    s: &FullState,
    cfg: &PiConfig,
) -> Result<(FullState, StepDiagnostics)> {
    if cfg.scheme != Scheme::Pi2 {
        return Err(Error::Config("pi2_step requires scheme = PI2".into()));
    }
    pi_step_impl(sys, s, cfg)
}

/// Recorded trajectory of a projective-integration run.
///
/// `times`, `states`, `deviations` and `dev_max` have `n_steps + 1` entries
/// (the initial state included); `step_seed_max` has one entry per executed
/// macrostep.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<FullState>,
    /// |x^n - h0(y^n)| per recorded state.
    pub deviations: Vec<f64>,
    /// Running maximum over all increment-seed deviations |x^{i,k}_0 -
    /// h0(y^{i,k}_0)| seen so far; entry 0 is the initial deviation.
    pub dev_max: Vec<f64>,
    /// Max seed deviation within each macrostep.
    pub step_seed_max: Vec<f64>,
    /// Total full-field evaluations (cost accounting).
    pub micro_eval_count: u64,
}

impl TrajectoryRecord {
    pub fn final_state(&self) -> &FullState {
        self.states.last().expect("record always holds s0")
    }

    pub fn final_dev_max(&self) -> f64 {
        *self.dev_max.last().expect("record always holds s0")
    }
}

/// Runs `n_steps` macrosteps of the configured scheme. Deterministic in all
/// inputs; step failures carry the macrostep index.
pub fn run(
    sys: &MultiscaleSystem,
    s0: &FullState,
    cfg: &PiConfig,
    n_steps: u64,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let d0 = sys.deviation(s0);
    let mut rec = TrajectoryRecord {
        times: vec![s0.t],
        states: vec![s0.clone()],
        deviations: vec![d0],
        dev_max: vec![d0],
        step_seed_max: Vec::new(),
        micro_eval_count: 0,
    };
    let mut s = s0.clone();
    let mut running = d0;
    for i in 0..n_steps {
        let (next, diag) = pi_step_impl(sys, &s, cfg).map_err(|e| Error::StepFailed {
            macro_step: i,
            source: Box::new(e),
        })?;
        let step_max = diag
            .seed_deviations
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        running = running.max(step_max);
        rec.micro_eval_count += diag.field_evals;
        rec.step_seed_max.push(step_max);
        rec.times.push(next.t);
        rec.deviations.push(sys.deviation(&next));
        rec.dev_max.push(running);
        rec.states.push(next.clone());
        s = next;
    }
    Ok(rec)
}
