//! The five benchmark experiments and the sweep runner.

use crate::analysis::{loglog_slope, BoundConstants, LinearFit};
use crate::bench::oracle::{reference_reduced, ReducedOracle};
use crate::error::Error;
use crate::micro::MicroConfig;
use crate::model::{make_toy_system, FullState, MultiscaleSystem};
use crate::pi::{run, PiConfig, Scheme};
use crate::rk::RkTableau;
use crate::Result;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// The built-in benchmark experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    /// Final slow error against the reduced reference vs. macrostep Δt at
    /// fixed final time.
    ErrVsDtMacro,
    /// Final slow error vs. microstep δt at fixed effective macrostep and
    /// step count, second-order microsolver.
    ErrVsDtMicro,
    /// Final slow error vs. initial fast deviation |d⁰| in a deliberately
    /// unstable regime.
    ErrVsD0,
    /// Fast deviation from the manifold after the first macrostep vs. Δt,
    /// starting off-manifold.
    DevVsDtMacro,
    /// Self-difference |y(T; Δt) − y(T; Δt/2)| vs. Δt (an error proxy that
    /// keeps falling where the true error has plateaued).
    SelfdiffVsDt,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 5] = [
        ExperimentId::ErrVsDtMacro,
        ExperimentId::ErrVsDtMicro,
        ExperimentId::ErrVsD0,
        ExperimentId::DevVsDtMacro,
        ExperimentId::SelfdiffVsDt,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentId::ErrVsDtMacro => "err-vs-dt-macro",
            ExperimentId::ErrVsDtMicro => "err-vs-dt-micro",
            ExperimentId::ErrVsD0 => "err-vs-d0",
            ExperimentId::DevVsDtMacro => "dev-vs-dt-macro",
            ExperimentId::SelfdiffVsDt => "selfdiff-vs-dt",
        }
    }
}

impl std::fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ExperimentId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .iter()
            .copied()
            .find(|id| id.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown experiment '{s}' (expected one of: {})",
                    ExperimentId::ALL.map(|i| i.name()).join(", ")
                ))
            })
    }
}

/// A sweep definition. `grid` semantics depend on the experiment: target
/// macrosteps Δt for the Δt sweeps, microsteps δt for the microstep sweep,
/// and initial fast offsets d⁰ for the deviation-sensitivity sweep.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub alpha: f64,
    pub epsilon: f64,
    pub schemes: Vec<Scheme>,
    pub grid: Vec<f64>,
    /// Fixed final time for the Δt sweeps; the effective macro span for the
    /// microstep sweep (T = n·Δ̃t); informational otherwise.
    pub t_final: f64,
    pub y0: f64,
    /// Initial fast variable; for the deviation sweep this is the base value
    /// to which the grid offsets are added.
    pub x0: f64,
    /// Fixed macrostep count (microstep and deviation sweeps).
    pub n_steps: Option<u64>,
    /// Fixed macrostep (deviation sweep).
    pub dt_macro: Option<f64>,
    /// Fixed microstep (all but the microstep sweep).
    pub dt_micro: Option<f64>,
    pub m_budget: u64,
    pub m_first: u64,
    pub micro_order: usize,
    pub constants: BoundConstants,
}

pub(crate) fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(la + (lb - la) * i as f64 / (n - 1) as f64))
        .collect()
}

fn sin2(y: f64) -> f64 {
    y.sin() * y.sin()
}

impl ExperimentSpec {
    /// The benchmark parameterization of each figure experiment.
    pub fn for_figure(id: ExperimentId) -> Self {
        let both = vec![Scheme::Pi1, Scheme::Pi2];
        match id {
            ExperimentId::ErrVsDtMacro => ExperimentSpec {
                id,
                alpha: 0.2,
                epsilon: 1e-9,
                schemes: both,
                grid: logspace(1e-5, 2e-1, 14),
                t_final: 1.0,
                y0: 1.0,
                x0: sin2(1.0),
                n_steps: None,
                dt_macro: None,
                dt_micro: Some(0.4e-9),
                m_budget: 40,
                m_first: 40,
                micro_order: 1,
                constants: BoundConstants {
                    l_g: 1.1,
                    l_h: 1.0,
                    l_hprime: 2.0,
                    c_g: 2.0,
                    c2_star: 4.0,
                    cp_star: 8.0,
                    l_big_g: 2.2,
                    lambda_max: 1.0,
                },
            },
            ExperimentId::SelfdiffVsDt => {
                let mut s = Self::for_figure(ExperimentId::ErrVsDtMacro);
                s.id = id;
                s.grid = logspace(8e-3, 1e-1, 10);
                s
            }
            ExperimentId::DevVsDtMacro => {
                let mut s = Self::for_figure(ExperimentId::ErrVsDtMacro);
                s.id = id;
                s.grid = logspace(1e-5, 5e-2, 12);
                s.x0 = sin2(1.0) + 1.0;
                s.constants.l_g = 5.0;
                s.constants.l_big_g = 10.0;
                s
            }
            ExperimentId::ErrVsDtMicro => ExperimentSpec {
                id,
                alpha: 1.0,
                epsilon: 1e-5,
                schemes: both,
                grid: logspace(1e-6, 4e-6, 10),
                t_final: 0.18,
                y0: 5.0,
                x0: sin2(5.0),
                n_steps: Some(50),
                dt_macro: None,
                dt_micro: None,
                m_budget: 100,
                m_first: 100,
                micro_order: 2,
                constants: BoundConstants {
                    l_g: 11.0,
                    l_h: 1.0,
                    l_hprime: 2.0,
                    c_g: 30.0,
                    c2_star: 50.0,
                    cp_star: 2000.0,
                    l_big_g: 22.0,
                    lambda_max: 1.0,
                },
            },
            ExperimentId::ErrVsD0 => ExperimentSpec {
                id,
                alpha: 1.0,
                epsilon: 1e-4,
                schemes: both,
                grid: logspace(1e-3, 2e-2, 10),
                t_final: 5.5e-3,
                y0: 1.0,
                x0: sin2(1.0),
                n_steps: Some(5),
                dt_macro: Some(1e-3),
                dt_micro: Some(1e-6),
                m_budget: 100,
                m_first: 100,
                micro_order: 1,
                constants: BoundConstants {
                    l_g: 3.0,
                    l_h: 1.0,
                    l_hprime: 2.0,
                    c_g: 2.0,
                    c2_star: 3.0,
                    cp_star: 24.0,
                    l_big_g: 6.0,
                    lambda_max: 1.0,
                },
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(Error::Config("at least one scheme required".into()));
        }
        if self.grid.is_empty() {
            return Err(Error::Config("empty sweep grid".into()));
        }
        if !self.grid.iter().all(|&v| v > 0.0 && v.is_finite()) {
            return Err(Error::Config("grid values must be positive".into()));
        }
        if !self.grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("grid must be strictly increasing".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        self.constants.validate()?;
        match self.id {
            ExperimentId::ErrVsDtMacro | ExperimentId::DevVsDtMacro | ExperimentId::SelfdiffVsDt => {
                if self.dt_micro.is_none() {
                    return Err(Error::Config("dt_micro required for this sweep".into()));
                }
                if !(self.t_final > 0.0) {
                    return Err(Error::Config("t_final must be positive".into()));
                }
            }
            ExperimentId::ErrVsDtMicro => {
                if self.n_steps.is_none() {
                    return Err(Error::Config("n_steps required for the microstep sweep".into()));
                }
            }
            ExperimentId::ErrVsD0 => {
                if self.n_steps.is_none() || self.dt_macro.is_none() || self.dt_micro.is_none() {
                    return Err(Error::Config(
                        "n_steps, dt_macro and dt_micro required for the deviation sweep".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn pi_config(&self, scheme: Scheme, dt_macro: f64, dt_micro: f64) -> Result<PiConfig> {
        PiConfig::new(
            scheme,
            RkTableau::rk4(),
            dt_macro,
            MicroConfig::new(self.micro_order, dt_micro)?,
            self.m_first,
            self.m_budget,
        )
    }

    /// Non-macrostep time spent per macrostep (relaxations).
    fn overhead(&self, scheme: Scheme, dt_micro: f64) -> f64 {
        match scheme {
            Scheme::Pi1 => self.m_first as f64 * dt_micro,
            Scheme::Pi2 => (self.m_first + self.m_budget) as f64 * dt_micro,
        }
    }
}

/// One sweep point of one scheme.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridPoint {
    pub abscissa: f64,
    /// The experiment's designated error (None when the point diverged).
    pub error: Option<f64>,
    /// Running maximum seed deviation over the executed macrosteps.
    pub dev_max: f64,
    pub n_macro: u64,
    pub micro_evals: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diverged: Option<String>,
}

/// Regression over the regime-selected sub-grid.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FitSummary {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Grid indices entering the fit.
    pub used: Vec<usize>,
    /// Excluded indices with reasons.
    pub excluded: Vec<(usize, String)>,
}

/// Plateau diagnostics for the macrostep sweep.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PlateauSummary {
    /// Mean error over the plateau points.
    pub level: f64,
    /// Largest |local slope| between consecutive plateau points.
    pub max_local_slope: f64,
    pub points: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SchemeSeries {
    pub scheme: Scheme,
    pub points: Vec<GridPoint>,
    pub fit: Option<FitSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub plateau: Option<PlateauSummary>,
}

/// Sweep results with the spec echoed back.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub series: Vec<SchemeSeries>,
}

impl ExperimentResult {
    pub fn any_diverged(&self) -> bool {
        self.series
            .iter()
            .any(|s| s.points.iter().any(|p| p.diverged.is_some()))
    }

    pub fn series_for(&self, scheme: Scheme) -> Option<&SchemeSeries> {
        self.series.iter().find(|s| s.scheme == scheme)
    }
}

/// Worker count: `PROJINT_THREADS` caps the available parallelism; grid
/// points are distributed by index and reassembled in order, so the output
/// is identical to a sequential run.
fn parallelism() -> Result<usize> {
    match std::env::var("PROJINT_THREADS") {
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::Config(format!("PROJINT_THREADS must be a positive integer, got '{v}'"))),
    }
}

fn parallel_map<T, F>(count: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = threads.min(count).max(1);
    if threads == 1 {
        return (0..count).map(f).collect();
    }
    let slots: Vec<Mutex<Option<T>>> = (0..count).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let v = f(i);
                *slots[i].lock().unwrap() = Some(v);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("worker filled slot"))
        .collect()
}

struct PointPlan {
    scheme: Scheme,
    abscissa: f64,
    cfg: PiConfig,
    x0: f64,
    n: u64,
}

/// Executes the sweep, computes the designated error per point, and fits the
/// regression over the dominating-regime sub-grid.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let sys = make_toy_system(spec.alpha, spec.epsilon)?;
    let threads = parallelism()?;

    // Per-point plans, grouped by scheme in spec order.
    let mut plans: Vec<PointPlan> = Vec::new();
    for &scheme in &spec.schemes {
        for &g in &spec.grid {
            plans.push(plan_point(spec, scheme, g)?);
        }
    }

    // A shared reduced reference where the experiment measures errors.
    let oracle = match spec.id {
        ExperimentId::ErrVsDtMacro | ExperimentId::ErrVsDtMicro | ExperimentId::ErrVsD0 => {
            let min_dt = plans
                .iter()
                .map(|p| p.cfg.dt_macro)
                .fold(f64::INFINITY, f64::min);
            let t_end = plans
                .iter()
                .map(|p| p.n as f64 * p.cfg.step_span())
                .fold(0.0, f64::max);
            Some(reference_reduced(
                &sys.reduce(),
                &[spec.y0],
                0.0,
                t_end,
                min_dt / 100.0,
            )?)
        }
        _ => None,
    };

    let results = parallel_map(plans.len(), threads, |i| {
        execute_point(spec, &sys, &plans[i], oracle.as_ref())
    });

    let per_scheme = spec.grid.len();
    let mut series = Vec::new();
    for (k, &scheme) in spec.schemes.iter().enumerate() {
        let points: Vec<GridPoint> = results[k * per_scheme..(k + 1) * per_scheme].to_vec();
        let (fit, plateau) = summarize(spec, &points);
        series.push(SchemeSeries {
            scheme,
            points,
            fit,
            plateau,
        });
    }
    Ok(ExperimentResult {
        spec: spec.clone(),
        series,
    })
}

fn plan_point(spec: &ExperimentSpec, scheme: Scheme, g: f64) -> Result<PointPlan> {
    match spec.id {
        ExperimentId::ErrVsDtMacro | ExperimentId::DevVsDtMacro | ExperimentId::SelfdiffVsDt => {
            // g is the target Δt; adjust so n·span = t_final with integer n.
            let dtm = spec.dt_micro.expect("validated");
            let ov = spec.overhead(scheme, dtm);
            let n = ((spec.t_final / (g + ov)).round() as u64).max(1);
            let dt_macro = spec.t_final / n as f64 - ov;
            if !(dt_macro > 0.0) {
                return Err(Error::Config(format!(
                    "grid point {g}: relaxation overhead exceeds the step span"
                )));
            }
            Ok(PointPlan {
                scheme,
                abscissa: dt_macro,
                cfg: spec.pi_config(scheme, dt_macro, dtm)?,
                x0: spec.x0,
                n,
            })
        }
        ExperimentId::ErrVsDtMicro => {
            // g is δt; hold Δ̃t = Δt + Mδt = t_final/n fixed.
            let n = spec.n_steps.expect("validated");
            let dt_eff = spec.t_final / n as f64;
            let dt_macro = dt_eff - spec.m_budget as f64 * g;
            if !(dt_macro > 0.0) {
                return Err(Error::Config(format!(
                    "microstep {g}: M·δt exceeds the effective macrostep {dt_eff}"
                )));
            }
            Ok(PointPlan {
                scheme,
                abscissa: g,
                cfg: spec.pi_config(scheme, dt_macro, g)?,
                x0: spec.x0,
                n,
            })
        }
        ExperimentId::ErrVsD0 => Ok(PointPlan {
            scheme,
            abscissa: g,
            cfg: spec.pi_config(
                scheme,
                spec.dt_macro.expect("validated"),
                spec.dt_micro.expect("validated"),
            )?,
            x0: spec.x0 + g,
            n: spec.n_steps.expect("validated"),
        }),
    }
}

fn execute_point(
    spec: &ExperimentSpec,
    sys: &MultiscaleSystem,
    plan: &PointPlan,
    oracle: Option<&ReducedOracle>,
) -> GridPoint {
    let diverged_point = |msg: String| GridPoint {
        abscissa: plan.abscissa,
        error: None,
        dev_max: f64::NAN,
        n_macro: 0,
        micro_evals: 0,
        diverged: Some(msg),
    };
    let s0 = match FullState::scalar(plan.x0, spec.y0, 0.0) {
        Ok(s) => s,
        Err(e) => return diverged_point(e.to_string()),
    };
    match spec.id {
        ExperimentId::DevVsDtMacro => match run(sys, &s0, &plan.cfg, 1) {
            Ok(rec) => GridPoint {
                abscissa: plan.abscissa,
                error: Some(rec.deviations[1]),
                dev_max: rec.final_dev_max(),
                n_macro: 1,
                micro_evals: rec.micro_eval_count,
                diverged: None,
            },
            Err(e) => diverged_point(e.to_string()),
        },
        ExperimentId::SelfdiffVsDt => {
            let full = match run(sys, &s0, &plan.cfg, plan.n) {
                Ok(r) => r,
                Err(e) => return diverged_point(e.to_string()),
            };
            // Halved span at matched final time: n doubles, Δt shrinks to
            // span/2 - overhead.
            let dtm = plan.cfg.micro.dt_micro();
            let half_dt = plan.cfg.step_span() / 2.0 - spec.overhead(plan.scheme, dtm);
            let half_cfg = match spec.pi_config(plan.scheme, half_dt, dtm) {
                Ok(c) => c,
                Err(e) => return diverged_point(e.to_string()),
            };
            let half = match run(sys, &s0, &half_cfg, plan.n * 2) {
                Ok(r) => r,
                Err(e) => return diverged_point(e.to_string()),
            };
            let dy = full
                .final_state()
                .y
                .iter()
                .zip(&half.final_state().y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            GridPoint {
                abscissa: plan.abscissa,
                error: Some(dy),
                dev_max: full.final_dev_max().max(half.final_dev_max()),
                n_macro: plan.n,
                micro_evals: full.micro_eval_count + half.micro_eval_count,
                diverged: None,
            }
        }
        _ => match run(sys, &s0, &plan.cfg, plan.n) {
            Ok(rec) => {
                let s_end = rec.final_state();
                let y_ref = oracle.expect("oracle built for error sweeps").eval(s_end.t);
                let err = s_end
                    .y
                    .iter()
                    .zip(&y_ref)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                GridPoint {
                    abscissa: plan.abscissa,
                    error: Some(err),
                    dev_max: rec.final_dev_max(),
                    n_macro: plan.n,
                    micro_evals: rec.micro_eval_count,
                    diverged: None,
                }
            }
            Err(e) => diverged_point(e.to_string()),
        },
    }
}

const R2_GATE: f64 = 0.98;
/// A point counts as regime-dominating only when its error exceeds the
/// measured plateau by this factor.
const PLATEAU_DOMINANCE: f64 = 4.0;

fn summarize(spec: &ExperimentSpec, points: &[GridPoint]) -> (Option<FitSummary>, Option<PlateauSummary>) {
    // Valid (index, x, y) triples.
    let valid: Vec<(usize, f64, f64)> = points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.error.filter(|e| *e > 0.0).map(|e| (i, p.abscissa, e)))
        .collect();
    let mut excluded: Vec<(usize, String)> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.diverged.is_some() || !p.error.map(|e| e > 0.0).unwrap_or(false))
        .map(|(i, p)| {
            (
                i,
                p.diverged
                    .clone()
                    .unwrap_or_else(|| "non-positive error".into()),
            )
        })
        .collect();

    if valid.len() < 2 {
        return (None, None);
    }

    match spec.id {
        ExperimentId::ErrVsDtMacro => {
            // Plateau level from the smallest-Δt points; fit the points that
            // decisively dominate it.
            let n_plateau_ref = 4.min(valid.len());
            let level: f64 =
                valid[..n_plateau_ref].iter().map(|v| v.2).sum::<f64>() / n_plateau_ref as f64;
            let (rk, plat): (Vec<&(usize, f64, f64)>, Vec<&(usize, f64, f64)>) = valid
                .iter()
                .partition(|v| v.2 > PLATEAU_DOMINANCE * level);
            for v in &plat {
                excluded.push((v.0, "microstep-dominated regime".into()));
            }
            let fit = if rk.len() >= 2 {
                let xs: Vec<f64> = rk.iter().map(|v| v.1).collect();
                let ys: Vec<f64> = rk.iter().map(|v| v.2).collect();
                loglog_slope(&xs, &ys).ok().map(|f| FitSummary {
                    slope: f.slope,
                    intercept: f.intercept,
                    r2: f.r2,
                    used: rk.iter().map(|v| v.0).collect(),
                    excluded: excluded.clone(),
                })
            } else {
                None
            };
            let plateau = if plat.len() >= 2 {
                let pts: Vec<_> = plat.iter().take(6).collect();
                let mut max_local: f64 = 0.0;
                for w in pts.windows(2) {
                    let s = ((w[1].2 / w[0].2).ln() / (w[1].1 / w[0].1).ln()).abs();
                    max_local = max_local.max(s);
                }
                Some(PlateauSummary {
                    level,
                    max_local_slope: max_local,
                    points: pts.iter().map(|v| v.0).collect(),
                })
            } else {
                None
            };
            (fit, plateau)
        }
        _ => {
            // Generic gate: trim whichever end most improves r² until the
            // fit is clean or only 3 points remain.
            let mut lo = 0usize;
            let mut hi = valid.len();
            let fit_range = |lo: usize, hi: usize| -> Option<LinearFit> {
                let xs: Vec<f64> = valid[lo..hi].iter().map(|v| v.1).collect();
                let ys: Vec<f64> = valid[lo..hi].iter().map(|v| v.2).collect();
                loglog_slope(&xs, &ys).ok()
            };
            let mut current = match fit_range(lo, hi) {
                Some(f) => f,
                None => return (None, None),
            };
            while current.r2 < R2_GATE && hi - lo > 3 {
                let head = fit_range(lo + 1, hi);
                let tail = fit_range(lo, hi - 1);
                let (pick_head, next) = match (head, tail) {
                    (Some(h), Some(t)) => {
                        if h.r2 >= t.r2 {
                            (true, h)
                        } else {
                            (false, t)
                        }
                    }
                    (Some(h), None) => (true, h),
                    (None, Some(t)) => (false, t),
                    (None, None) => break,
                };
                if pick_head {
                    excluded.push((valid[lo].0, "trimmed by r² gate".into()));
                    lo += 1;
                } else {
                    excluded.push((valid[hi - 1].0, "trimmed by r² gate".into()));
                    hi -= 1;
                }
                current = next;
            }
            let fit = FitSummary {
                slope: current.slope,
                intercept: current.intercept,
                r2: current.r2,
                used: valid[lo..hi].iter().map(|v| v.0).collect(),
                excluded,
            };
            (Some(fit), None)
        }
    }
}
