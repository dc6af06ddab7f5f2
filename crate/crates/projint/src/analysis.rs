//! Stability indicators, deviation-bound evaluators, error metrics, and
//! log-log slope fitting.

use crate::error::Error;
use crate::model::MultiscaleSystem;
use crate::pi::{PiConfig, Scheme, TrajectoryRecord};
use crate::rk::amplification;
use crate::Result;

/// Lipschitz/boundedness constants entering the deviation bounds. Supplied
/// per experiment; the library does not estimate them.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConstants {
    /// Lipschitz constant of g.
    pub l_g: f64,
    /// Lipschitz constant of h0.
    pub l_h: f64,
    /// Bound on the second derivatives of h0.
    pub l_hprime: f64,
    /// sup |g|.
    pub c_g: f64,
    /// sup |d²Y/dt²| of the reduced dynamics.
    pub c2_star: f64,
    /// sup |d^P Y/dt^P| of the reduced dynamics.
    pub cp_star: f64,
    /// Lipschitz constant of the reduced field; at most l_g (1 + l_h).
    pub l_big_g: f64,
    /// λ = max(Λ).
    pub lambda_max: f64,
}

impl BoundConstants {
    /// Validates non-negativity and L_G ≤ L_g (1 + L_h).
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.l_g,
            self.l_h,
            self.l_hprime,
            self.c_g,
            self.c2_star,
            self.cp_star,
            self.l_big_g,
            self.lambda_max,
        ];
        if fields.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config("bound constants must be nonnegative".into()));
        }
        if self.l_big_g > self.l_g * (1.0 + self.l_h) * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "L_G = {} exceeds L_g (1 + L_h) = {}",
                self.l_big_g,
                self.l_g * (1.0 + self.l_h)
            )));
        }
        Ok(())
    }
}

/// Output of [`stability_indicator`].
#[derive(Debug, Clone, Copy)]
pub struct StabilityReport {
    /// σ = (λ Δt / ε) ρ(-δt/ε)^{aM}, the deviation growth factor per
    /// increment. σ < 1 guarantees bounded fast deviations for PI1.
    pub sigma: f64,
    /// PI2's stronger indicator σ₂ = (ρ^{aM} / a) σ; present only for PI2.
    pub sigma_pi2: Option<f64>,
    /// Per-microstep contraction ρ(-δt/ε).
    pub rho: f64,
    /// aM = min over the post-relaxation microstep counts M_j, j > 1.
    pub a_m: u64,
    /// The bounds are stated for a forward-Euler microsolver; true when the
    /// indicator was extrapolated to a higher-order ρ.
    pub extrapolated: bool,
}

impl StabilityReport {
    /// Scheme-relevant verdict: σ < 1 for PI1, σ₂ < 1 for PI2.
    pub fn is_stable(&self) -> bool {
        match self.sigma_pi2 {
            Some(s2) => s2 < 1.0,
            None => self.sigma < 1.0,
        }
    }
}

fn min_tail_node(cfg: &PiConfig) -> f64 {
    let tail = &cfg.tableau.nodes()[1..];
    let m = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    match cfg.scheme {
        Scheme::Pi2 => m.min(1.0),
        Scheme::Pi1 => {
            if m.is_finite() {
                m
            } else {
                1.0
            }
        }
    }
}

fn min_tail_alloc(cfg: &PiConfig) -> Result<u64> {
    let ms = cfg.allocate_microsteps()?;
    Ok(ms[1..].iter().copied().min().unwrap_or(cfg.m_budget))
}

/// Stability indicator σ = (λΔt/ε) ρ(-δt/ε)^{aM} with aM = min_{j>1} M_j.
///
/// For PI2 the report additionally carries σ₂ = (ρ^{aM}/a) σ. For microsolver
/// order p ≠ 1 the Euler contraction (1 - δt/ε) is replaced by ρ_p and the
/// result is flagged `extrapolated`.
pub fn stability_indicator(sys: &MultiscaleSystem, cfg: &PiConfig) -> Result<StabilityReport> {
    let eps = sys.epsilon();
    let rho = amplification(cfg.micro.order(), -cfg.micro.dt_micro() / eps);
    let a_m = min_tail_alloc(cfg)?;
    let contraction = rho.abs().powf(a_m as f64);
    let sigma = sys.lambda_max() * cfg.dt_macro / eps * contraction;
    let sigma_pi2 = match cfg.scheme {
        Scheme::Pi2 => Some(contraction / min_tail_node(cfg) * sigma),
        Scheme::Pi1 => None,
    };
    Ok(StabilityReport {
        sigma,
        sigma_pi2,
        rho,
        a_m,
        extrapolated: cfg.micro.order() != 1,
    })
}

fn sigma_weighted_sum(sigma: f64, weights: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut pow = 1.0;
    for &b in weights {
        pow *= sigma;
        acc += b * pow;
    }
    acc
}

/// Lowest-order PI1 deviation recurrence:
/// Σ_j b_j σ^j d_prev + L_h C_g (1 + λ) Δt.
pub fn pi1_deviation_bound(
    d_prev: f64,
    sys: &MultiscaleSystem,
    cfg: &PiConfig,
    k: &BoundConstants,
) -> f64 {
    let eps = sys.epsilon();
    let rho = amplification(cfg.micro.order(), -cfg.micro.dt_micro() / eps);
    let a_m = min_tail_alloc(cfg).unwrap_or(cfg.m_budget);
    let sigma = k.lambda_max * cfg.dt_macro / eps * rho.abs().powf(a_m as f64);
    sigma_weighted_sum(sigma, cfg.tableau.weights()) * d_prev
        + k.l_h * k.c_g * (1.0 + k.lambda_max) * cfg.dt_macro
}

/// Lowest-order PI2 deviation recurrence:
/// (ρ^{aM}/a) Σ_j b_j σ^j d_prev + 2 L_h' C_g² Δ̃t².
pub fn pi2_deviation_bound(
    d_prev: f64,
    sys: &MultiscaleSystem,
    cfg: &PiConfig,
    k: &BoundConstants,
) -> f64 {
    let eps = sys.epsilon();
    let rho = amplification(cfg.micro.order(), -cfg.micro.dt_micro() / eps);
    let a_m = min_tail_alloc(cfg).unwrap_or(cfg.m_budget);
    let contraction = rho.abs().powf(a_m as f64);
    let sigma = k.lambda_max * cfg.dt_macro / eps * contraction;
    let a = min_tail_node(cfg);
    let dt_eff = cfg.dt_macro + cfg.m_budget as f64 * cfg.micro.dt_micro();
    contraction / a * sigma_weighted_sum(sigma, cfg.tableau.weights()) * d_prev
        + 2.0 * k.l_hprime * k.c_g * k.c_g * dt_eff * dt_eff
}

/// Upper bound on the maximal seed deviation over `n_steps` PI1 macrosteps,
/// evaluated from the exact per-relaxation and per-increment recurrences
///
/// ```text
/// relax(s, m)  = ρ^m s + L_h C_g ε (1 - ρ^m)
/// seed_{j+1}   = r_1 + a_{j+1} (κ relax(seed_j, M_j) + L_h C_g Δt)
/// |d^{n+1}|    ≤ r_1 + κ Σ b_j relax(seed_j, M_j) + L_h C_g Δt
/// ```
///
/// with κ = λΔt/ε. Every inequality is exact for a forward-Euler microsolver
/// on the normalized fast field, so a measured dev_max can only exceed this
/// value if C_g fails to bound |g| along the trajectory.
pub fn pi1_deviation_envelope(
    sys: &MultiscaleSystem,
    cfg: &PiConfig,
    k: &BoundConstants,
    d0: f64,
    n_steps: u64,
) -> Result<f64> {
    if cfg.scheme != Scheme::Pi1 {
        return Err(Error::Config("deviation envelope is stated for PI1".into()));
    }
    let eps = sys.epsilon();
    let rho = amplification(cfg.micro.order(), -cfg.micro.dt_micro() / eps).abs();
    let kappa = k.lambda_max * cfg.dt_macro / eps;
    let drift_floor = k.l_h * k.c_g * eps;
    let drift_macro = k.l_h * k.c_g * cfg.dt_macro;
    let ms = cfg.allocate_microsteps()?;
    let nodes = cfg.tableau.nodes();
    let weights = cfg.tableau.weights();
    let relax = |s: f64, m: u64| {
        let c = rho.powf(m as f64);
        c * s + drift_floor * (1.0 - c)
    };
    let mut dev_max = d0;
    let mut d_prev = d0;
    for _ in 0..n_steps {
        let r1 = relax(d_prev, ms[0]);
        let mut r_j = r1;
        let mut macro_acc = 0.0;
        for (j, &b) in weights.iter().enumerate() {
            macro_acc += b * r_j;
            if j + 1 < nodes.len() {
                let seed = r1 + nodes[j + 1] * (kappa * r_j + drift_macro);
                dev_max = dev_max.max(seed);
                r_j = relax(seed, ms[j + 1]);
            }
        }
        let d_next = r1 + kappa * macro_acc + drift_macro;
        dev_max = dev_max.max(d_next);
        d_prev = d_next;
    }
    Ok(dev_max)
}

/// |y^n - Y(t^n)| for every recorded macrostep, with `reduced_ref` the
/// reduced reference trajectory.
pub fn discretization_error<F>(traj: &TrajectoryRecord, reduced_ref: F) -> Vec<f64>
where
    F: Fn(f64) -> Vec<f64>,
{
    traj.states
        .iter()
        .map(|s| {
            let y_ref = reduced_ref(s.t);
            norm_diff(&s.y, &y_ref)
        })
        .collect()
}

/// |y_ε(t) - Y(t)| on the given sample times.
pub fn reduction_error<F, G>(full_slow_ref: F, reduced_ref: G, ts: &[f64]) -> Vec<f64>
where
    F: Fn(f64) -> Vec<f64>,
    G: Fn(f64) -> Vec<f64>,
{
    ts.iter()
        .map(|&t| norm_diff(&full_slow_ref(t), &reduced_ref(t)))
        .collect()
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Least-squares fit of ln(y) against ln(x).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares on (ln x, ln y). Rejects non-positive or
/// non-finite data, identifying the offending index.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            what: "loglog series",
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::Config("loglog fit needs at least two points".into()));
    }
    for (i, &x) in xs.iter().enumerate() {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::Domain { index: i, value: x });
        }
    }
    for (i, &y) in ys.iter().enumerate() {
        if !(y > 0.0) || !y.is_finite() {
            return Err(Error::Domain { index: i, value: y });
        }
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Config("loglog fit needs distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sst: f64 = ly.iter().map(|v| (v - my) * (v - my)).sum();
    let ssr: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| {
            let e = b - (intercept + slope * a);
            e * e
        })
        .sum();
    let r2 = if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 };
    Ok(LinearFit {
        slope,
        intercept,
        r2,
    })
}
