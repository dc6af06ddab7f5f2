//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! (run with `cargo test --test acceptance -- --nocapture` to see them all).

use projint::analysis::{loglog_slope, pi1_deviation_envelope, stability_indicator, BoundConstants};
use projint::bench::{
    reference_full, reference_reduced, run_experiment, ExperimentId, ExperimentResult,
    ExperimentSpec, SchemeSeries,
};
use projint::micro::{micro_flow, MicroConfig};
use projint::model::{make_toy_system, FullState};
use projint::pi::{run, PiConfig, Scheme};
use projint::rk::{rk_step, RkTableau};
use rand::Rng;
use rand::SeedableRng;
use std::sync::OnceLock;
use std::time::Instant;

fn sin2(y: f64) -> f64 {
    y.sin() * y.sin()
}

struct Criterion {
    name: &'static str,
    started: Instant,
}

impl Criterion {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            started: Instant::now(),
        }
    }

    fn finish(self, pass: bool, detail: String, budget_s: Option<f64>) {
        let elapsed = self.started.elapsed().as_secs_f64();
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("acceptance {}: {verdict} {detail} [elapsed {elapsed:.2}s]", self.name);
        if let Some(b) = budget_s {
            assert!(
                elapsed < b,
                "{}: runtime {elapsed:.1}s exceeds the {b:.0}s budget",
                self.name
            );
        }
        assert!(pass, "{}: {detail}", self.name);
    }
}

fn fit_of(series: &SchemeSeries) -> (f64, f64) {
    let f = series.fit.as_ref().expect("fit present");
    (f.slope, f.r2)
}

/// The macrostep sweep feeds two criteria; run it once.
fn err_vs_dt_macro() -> &'static ExperimentResult {
    static CACHE: OnceLock<ExperimentResult> = OnceLock::new();
    CACHE.get_or_init(|| {
        run_experiment(&ExperimentSpec::for_figure(ExperimentId::ErrVsDtMacro)).unwrap()
    })
}

#[test]
fn criterion_01_macrostep_convergence() {
    let c = Criterion::new("1 (macrostep convergence)");
    let res = err_vs_dt_macro();
    let pi1 = res.series_for(Scheme::Pi1).unwrap();
    let pi2 = res.series_for(Scheme::Pi2).unwrap();
    let (s1, r1) = fit_of(pi1);
    let (s2, r2) = fit_of(pi2);
    let window = 3.7..=4.2;
    let p1 = pi1.plateau.as_ref().unwrap();
    let p2 = pi2.plateau.as_ref().unwrap();
    let pass = window.contains(&s1)
        && window.contains(&s2)
        && r1 >= 0.98
        && r2 >= 0.98
        && p1.max_local_slope < 0.3
        && p2.max_local_slope < 0.3
        && p2.level < p1.level
        && !res.any_diverged();
    c.finish(
        pass,
        format!(
            "slopes PI1={s1:.3} PI2={s2:.3} (r² {r1:.4}/{r2:.4}); plateau levels \
             PI1={:.3e} PI2={:.3e}, max local slopes {:.3}/{:.3}",
            p1.level, p2.level, p1.max_local_slope, p2.max_local_slope
        ),
        Some(120.0),
    );
}

#[test]
fn criterion_02_microstep_scaling() {
    let c = Criterion::new("2 (microstep scaling)");
    let res = run_experiment(&ExperimentSpec::for_figure(ExperimentId::ErrVsDtMicro)).unwrap();
    let pi1 = res.series_for(Scheme::Pi1).unwrap();
    let pi2 = res.series_for(Scheme::Pi2).unwrap();
    let (s1, r1) = fit_of(pi1);
    let (s2, r2) = fit_of(pi2);
    let window = 0.85..=1.15;
    let below_everywhere = pi1
        .points
        .iter()
        .zip(&pi2.points)
        .all(|(a, b)| b.error.unwrap() < a.error.unwrap());
    let pass = window.contains(&s1)
        && window.contains(&s2)
        && r1 >= 0.98
        && r2 >= 0.98
        && below_everywhere
        && !res.any_diverged();
    c.finish(
        pass,
        format!("slopes PI1={s1:.3} PI2={s2:.3} (r² {r1:.4}/{r2:.4}); PI2 below PI1 everywhere: {below_everywhere}"),
        Some(30.0),
    );
}

#[test]
fn criterion_03_deviation_sensitivity() {
    let c = Criterion::new("3 (deviation sensitivity)");
    let res = run_experiment(&ExperimentSpec::for_figure(ExperimentId::ErrVsD0)).unwrap();
    let (s1, r1) = fit_of(res.series_for(Scheme::Pi1).unwrap());
    let (s2, r2) = fit_of(res.series_for(Scheme::Pi2).unwrap());
    let window = 0.85..=1.15;
    let pass = window.contains(&s1)
        && window.contains(&s2)
        && r1 >= 0.98
        && r2 >= 0.98
        && !res.any_diverged();
    c.finish(
        pass,
        format!("slopes PI1={s1:.3} PI2={s2:.3} (r² {r1:.4}/{r2:.4})"),
        Some(10.0),
    );
}

#[test]
fn criterion_04_manifold_deviation_scaling() {
    let c = Criterion::new("4 (manifold deviation scaling)");
    let res = run_experiment(&ExperimentSpec::for_figure(ExperimentId::DevVsDtMacro)).unwrap();
    let (s1, r1) = fit_of(res.series_for(Scheme::Pi1).unwrap());
    let (s2, r2) = fit_of(res.series_for(Scheme::Pi2).unwrap());
    let pass = (0.85..=1.15).contains(&s1)
        && (1.75..=2.15).contains(&s2)
        && r1 >= 0.98
        && r2 >= 0.98
        && !res.any_diverged();
    c.finish(
        pass,
        format!("slopes PI1={s1:.3} PI2={s2:.3} (r² {r1:.4}/{r2:.4})"),
        Some(120.0),
    );
}

#[test]
fn criterion_05_self_difference_proxy() {
    let c = Criterion::new("5 (self-difference proxy)");
    let res = run_experiment(&ExperimentSpec::for_figure(ExperimentId::SelfdiffVsDt)).unwrap();
    // The proxy must keep its quartic slope over the *full* grid, including
    // the region where the true error of criterion 1 has plateaued.
    let macro_res = err_vs_dt_macro();
    let plateau_top = macro_res
        .series_for(Scheme::Pi1)
        .unwrap()
        .plateau
        .as_ref()
        .unwrap()
        .points
        .iter()
        .map(|&i| macro_res.series_for(Scheme::Pi1).unwrap().points[i].abscissa)
        .fold(0.0, f64::max);
    let mut pass = true;
    let mut detail = String::new();
    for series in &res.series {
        let xs: Vec<f64> = series.points.iter().map(|p| p.abscissa).collect();
        let ys: Vec<f64> = series.points.iter().map(|p| p.error.unwrap()).collect();
        let fit = loglog_slope(&xs, &ys).unwrap();
        pass &= (3.8..=4.3).contains(&fit.slope);
        // grid overlaps the plateau region of criterion 1
        pass &= xs[0] < plateau_top;
        detail.push_str(&format!("{} slope={:.3} (r² {:.4}); ", series.scheme, fit.slope, fit.r2));
    }
    detail.push_str(&format!(
        "grid reaches down to {:.2e} inside the plateau region (up to {:.2e})",
        res.series[0].points[0].abscissa, plateau_top
    ));
    c.finish(pass, detail, Some(240.0));
}

#[test]
fn criterion_06_degeneration_to_rk4() {
    let c = Criterion::new("6 (degeneration to RK4)");
    let sys = make_toy_system(0.2, 1e-2).unwrap();
    let s0 = FullState::scalar(sin2(1.0), 1.0, 0.0).unwrap();
    let dt = 1e-3;
    let n = 100;
    let mut z = s0.flatten();
    let mut field = |zz: &[f64], out: &mut [f64]| sys.eval_full_flat(zz, out);
    for _ in 0..n {
        z = rk_step(&mut field, &z, &RkTableau::rk4(), dt).unwrap();
    }
    let mut pass = true;
    let mut worst: f64 = 0.0;
    for scheme in [Scheme::Pi1, Scheme::Pi2] {
        let cfg = PiConfig::new(
            scheme,
            RkTableau::rk4(),
            dt,
            MicroConfig::new(1, 1e-9).unwrap(),
            0,
            0,
        )
        .unwrap();
        let rec = run(&sys, &s0, &cfg, n).unwrap();
        let s = rec.final_state();
        for (got, want) in [(s.x[0], z[0]), (s.y[0], z[1])] {
            let rel = (got - want).abs() / want.abs();
            worst = worst.max(rel);
            pass &= rel <= 1e-13;
        }
    }
    c.finish(
        pass,
        format!("100 macrosteps agree with plain RK4 to {worst:.2e} relative"),
        None,
    );
}

#[test]
fn criterion_07_stability_dichotomy() {
    let c = Criterion::new("7 (stability dichotomy)");
    let eps = 1e-6;
    let sys = make_toy_system(0.2, eps).unwrap();
    let micro = MicroConfig::new(1, 0.4 * eps).unwrap();
    let d0 = 1e-6;
    let s0 = FullState::scalar(sin2(1.0) + d0, 1.0, 0.0).unwrap();
    let k = BoundConstants {
        l_g: 1.1,
        l_h: 1.0,
        l_hprime: 2.0,
        c_g: 2.0,
        c2_star: 4.0,
        cp_star: 8.0,
        l_big_g: 2.2,
        lambda_max: 1.0,
    };
    let dts: Vec<f64> = (0..20)
        .map(|i| 10f64.powf(-4.0 + 3.0 * i as f64 / 19.0))
        .collect();
    let ms: Vec<u64> = (1..=20).map(|i| 2 * i).collect();
    let n_steps = 50;
    let mut stable_pts = 0usize;
    let mut unstable_pts = 0usize;
    let mut violations: Vec<String> = Vec::new();
    for &dt in &dts {
        for &m in &ms {
            let cfg = PiConfig::new(Scheme::Pi1, RkTableau::rk4(), dt, micro, m, m).unwrap();
            let sigma = stability_indicator(&sys, &cfg).unwrap().sigma;
            if sigma >= 0.9 && sigma <= 1.5 {
                continue; // dead band between the two claims
            }
            let outcome = run(&sys, &s0, &cfg, n_steps);
            if sigma < 0.9 {
                stable_pts += 1;
                let bound = pi1_deviation_envelope(&sys, &cfg, &k, d0, n_steps).unwrap();
                match &outcome {
                    Ok(rec) if rec.final_dev_max() <= bound => {}
                    Ok(rec) => violations.push(format!(
                        "stable σ={sigma:.3} (Δt={dt:.2e}, M={m}): dev_max {:.3e} > bound {bound:.3e}",
                        rec.final_dev_max()
                    )),
                    Err(e) => violations.push(format!(
                        "stable σ={sigma:.3} (Δt={dt:.2e}, M={m}): diverged ({e})"
                    )),
                }
            } else {
                unstable_pts += 1;
                let grew = match &outcome {
                    Err(_) => true,
                    Ok(rec) => rec.final_dev_max() / d0 > 10.0,
                };
                if !grew {
                    let got = outcome.as_ref().map(|r| r.final_dev_max() / d0).unwrap_or(f64::NAN);
                    violations.push(format!(
                        "unstable σ={sigma:.3} (Δt={dt:.2e}, M={m}): growth factor {got:.3} ≤ 10"
                    ));
                }
            }
        }
    }
    let pass = violations.is_empty();
    let mut detail = format!("{stable_pts} stable / {unstable_pts} unstable points asserted");
    if !pass {
        detail.push_str(&format!("; {} violations:", violations.len()));
        for v in &violations {
            detail.push_str(&format!("\n    {v}"));
        }
        detail.push_str(
            "\n  note: points with σ slightly above 1.5 sit where the alternating signs of the \
             recursive RK4 increments cancel (true per-macrostep factor \
             F(σ) = -σ/6 + σ²/6 - σ³/12 + σ⁴/24 stays below 1 up to σ ≈ 2.62), so the bound's \
             divergence threshold is not sharp there.",
        );
    }
    c.finish(pass, detail, None);
}

#[test]
fn criterion_08_contraction_lemma() {
    let c = Criterion::new("8 (microsolver contraction)");
    let (alpha, eps) = (0.2, 1e-6);
    let sys = make_toy_system(alpha, eps).unwrap();
    let dtm = 0.3 * eps;
    let cfg = MicroConfig::new(1, dtm).unwrap();
    let rho = 1.0 - dtm / eps;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let mut violations = 0usize;
    for _ in 0..100 {
        let y0: f64 = rng.gen_range(0.1..2.5);
        let d0: f64 = rng.gen_range(-1.0..1.0);
        let m: u64 = rng.gen_range(1..100);
        let mut s = FullState::scalar(sin2(y0) + d0, y0, 0.0).unwrap();
        // measured constants: C_g from the trajectory, L_h = sup|h0'| = 1
        let mut cg: f64 = 0.0;
        for _ in 0..m {
            cg = cg.max(sys.eval_slow(&s).unwrap()[0].abs());
            s = micro_flow(&sys, &s, 1, &cfg).unwrap();
        }
        let d_m = (s.x[0] - sin2(s.y[0])).abs();
        let bound = rho.powf(m as f64) * d0.abs() + 1.0 * cg * eps;
        if d_m > bound + 1e-12 {
            violations += 1;
        }
    }
    c.finish(
        violations == 0,
        format!("100 random off-manifold seeds, violations = {violations}"),
        None,
    );
}

#[test]
fn criterion_09_reduction_error_scaling() {
    let c = Criterion::new("9 (reduction error O(ε))");
    let alpha = 1.0;
    let t_final = 0.1;
    let mut maxima = Vec::new();
    for eps in [1e-3, 5e-4, 2.5e-4] {
        let sys = make_toy_system(alpha, eps).unwrap();
        let s0 = FullState::scalar(sin2(1.0), 1.0, 0.0).unwrap();
        let full = reference_full(&sys, &s0, t_final).unwrap();
        let reduced = reference_reduced(&sys.reduce(), &[1.0], 0.0, t_final, eps / 10.0).unwrap();
        let errs = projint::analysis::reduction_error(
            |t| full.slow(t),
            |t| reduced.eval(t),
            &full.times(),
        );
        maxima.push(errs.into_iter().fold(0.0f64, f64::max));
    }
    let r1 = maxima[0] / maxima[1];
    let r2 = maxima[1] / maxima[2];
    let pass = (1.6..=2.4).contains(&r1) && (1.6..=2.4).contains(&r2);
    c.finish(
        pass,
        format!(
            "max|E_r| = {:.3e}/{:.3e}/{:.3e}, halving ratios {r1:.3}, {r2:.3}",
            maxima[0], maxima[1], maxima[2]
        ),
        Some(60.0),
    );
}

#[test]
fn criterion_10_oracle_validity() {
    let c = Criterion::new("10 (oracle step-halving validity)");
    // Reduced oracle at the macrostep sweep's resolution (T = 1, step 1e-7).
    let sys = make_toy_system(0.2, 1e-9).unwrap();
    let reduced = reference_reduced(&sys.reduce(), &[1.0], 0.0, 1.0, 1e-5 / 100.0).unwrap();
    // Full oracle at the reduction-error scale.
    let sys_mod = make_toy_system(1.0, 1e-3).unwrap();
    let s0 = FullState::scalar(sin2(1.0), 1.0, 0.0).unwrap();
    let full = reference_full(&sys_mod, &s0, 0.1).unwrap();
    let pass = reduced.richardson_delta < 1e-10 && full.richardson_delta < 1e-10;
    c.finish(
        pass,
        format!(
            "relative endpoint changes: reduced {:.3e}, full {:.3e} (both < 1e-10)",
            reduced.richardson_delta, full.richardson_delta
        ),
        None,
    );
}
