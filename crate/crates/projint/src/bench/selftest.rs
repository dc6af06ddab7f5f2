//! Quick property suite behind `projint selftest`.

use crate::analysis::{loglog_slope, stability_indicator};
use crate::bench::oracle::reference_reduced;
use crate::micro::{micro_flow, MicroConfig};
use crate::model::{make_toy_system, FullState};
use crate::pi::{run, PiConfig, Scheme};
use crate::rk::{amplification, rk_step, RkTableau};
use rand::Rng;
use rand::SeedableRng;

fn sin2(y: f64) -> f64 {
    y.sin() * y.sin()
}

struct Report {
    ok: bool,
}

impl Report {
    fn check(&mut self, name: &str, pass: bool) {
        println!("{} - {name}", if pass { "ok" } else { "FAIL" });
        self.ok &= pass;
    }
}

/// Runs the property suite, printing one line per check. Returns true when
/// everything passed.
pub fn selftest() -> bool {
    let mut rep = Report { ok: true };

    rep.check(
        "tableaux satisfy their invariants",
        RkTableau::euler().validate().is_empty()
            && RkTableau::rk2().validate().is_empty()
            && RkTableau::rk4().validate().is_empty(),
    );

    rep.check("euler amplification stable on (0, 2)", {
        (1..200).all(|i| amplification(1, -(i as f64) / 100.0).abs() < 1.0)
    });

    rep.check("rk step reproduces the linear amplification factor", {
        let eps = 1e-3;
        let mut field = |z: &[f64], out: &mut [f64]| out[0] = -z[0] / eps;
        let x = rk_step(&mut field, &[1.0], &RkTableau::rk4(), 2e-4).unwrap()[0];
        (x - amplification(4, -0.2)).abs() < 1e-14
    });

    rep.check("PI degenerates to RK4 without the microsolver", {
        let sys = make_toy_system(0.2, 1e-2).unwrap();
        let s0 = FullState::scalar(sin2(1.0), 1.0, 0.0).unwrap();
        let micro = MicroConfig::new(1, 1e-9).unwrap();
        let mut ok = true;
        for scheme in [Scheme::Pi1, Scheme::Pi2] {
            let cfg = PiConfig::new(scheme, RkTableau::rk4(), 1e-3, micro, 0, 0).unwrap();
            let rec = run(&sys, &s0, &cfg, 20).unwrap();
            let mut z = s0.flatten();
            let mut field = |zz: &[f64], out: &mut [f64]| sys.eval_full_flat(zz, out);
            for _ in 0..20 {
                z = rk_step(&mut field, &z, &RkTableau::rk4(), 1e-3).unwrap();
            }
            let s = rec.final_state();
            ok &= (s.x[0] - z[0]).abs() <= 1e-13 * z[0].abs();
            ok &= (s.y[0] - z[1]).abs() <= 1e-13 * z[1].abs();
        }
        ok
    });

    rep.check("microsolver flow composes bitwise", {
        let sys = make_toy_system(1.0, 1e-5).unwrap();
        let cfg = MicroConfig::new(1, 2e-6).unwrap();
        let s0 = FullState::scalar(sin2(2.0) + 0.3, 2.0, 0.0).unwrap();
        let once = micro_flow(&sys, &s0, 37, &cfg).unwrap();
        let part = micro_flow(&sys, &s0, 17, &cfg).unwrap();
        let twice = micro_flow(&sys, &part, 20, &cfg).unwrap();
        once.x == twice.x && once.y == twice.y
    });

    rep.check("microsolver contraction inequality on random seeds", {
        let (alpha, eps) = (0.2, 1e-6);
        let sys = make_toy_system(alpha, eps).unwrap();
        let dt = 0.3 * eps;
        let cfg = MicroConfig::new(1, dt).unwrap();
        let rho = 1.0 - dt / eps;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4242);
        (0..20).all(|_| {
            let y0: f64 = rng.gen_range(0.2..1.8);
            let d0: f64 = rng.gen_range(-0.8..0.8);
            let m: u64 = rng.gen_range(1..60);
            let mut s = FullState::scalar(sin2(y0) + d0, y0, 0.0).unwrap();
            let mut cg: f64 = 0.0;
            for _ in 0..m {
                cg = cg.max(sys.eval_slow(&s).unwrap()[0].abs());
                s = micro_flow(&sys, &s, 1, &cfg).unwrap();
            }
            let d = (s.x[0] - sin2(s.y[0])).abs();
            d <= rho.powf(m as f64) * d0.abs() + cg * eps + 1e-12
        })
    });

    rep.check("PI1 and PI2 run at the same microstep cost", {
        let sys = make_toy_system(0.2, 1e-6).unwrap();
        let s0 = FullState::scalar(sin2(1.0), 1.0, 0.0).unwrap();
        let micro = MicroConfig::new(1, 2e-7).unwrap();
        let c1 = PiConfig::new(Scheme::Pi1, RkTableau::rk4(), 1e-4, micro, 40, 40).unwrap();
        let c2 = PiConfig::new(Scheme::Pi2, RkTableau::rk4(), 1e-4, micro, 40, 40).unwrap();
        let r1 = run(&sys, &s0, &c1, 5).unwrap();
        let r2 = run(&sys, &s0, &c2, 5).unwrap();
        r1.micro_eval_count == r2.micro_eval_count
    });

    rep.check("runs are deterministic", {
        let sys = make_toy_system(0.2, 1e-6).unwrap();
        let s0 = FullState::scalar(sin2(1.0) + 0.05, 1.0, 0.0).unwrap();
        let cfg = PiConfig::new(
            Scheme::Pi2,
            RkTableau::rk4(),
            1e-4,
            MicroConfig::new(1, 2e-7).unwrap(),
            20,
            20,
        )
        .unwrap();
        let a = run(&sys, &s0, &cfg, 10).unwrap();
        let b = run(&sys, &s0, &cfg, 10).unwrap();
        a.states == b.states && a.dev_max == b.dev_max
    });

    rep.check("log-log fit recovers a quartic power law", {
        let xs: Vec<f64> = (1..=6).map(|i| 2f64.powi(i)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.3 * x.powi(4)).collect();
        let fit = loglog_slope(&xs, &ys).unwrap();
        (fit.slope - 4.0).abs() < 1e-12 && fit.r2 > 1.0 - 1e-12
    });

    rep.check("stability indicator verdicts on the benchmark set", {
        let sys = make_toy_system(0.2, 1e-9).unwrap();
        let micro = MicroConfig::new(1, 0.4e-9).unwrap();
        let c1 = PiConfig::new(Scheme::Pi1, RkTableau::rk4(), 1e-3, micro, 40, 40).unwrap();
        let r1 = stability_indicator(&sys, &c1).unwrap();
        let c2 = PiConfig::new(Scheme::Pi2, RkTableau::rk4(), 1e-3, micro, 40, 40).unwrap();
        let r2 = stability_indicator(&sys, &c2).unwrap();
        r1.sigma < 1.0 && r1.is_stable() && r2.sigma_pi2.unwrap() < 1.0 && r2.is_stable()
    });

    rep.check("reduced oracle passes step halving", {
        let sys = make_toy_system(0.2, 1e-9).unwrap();
        match reference_reduced(&sys.reduce(), &[1.0], 0.0, 0.5, 1e-4) {
            Ok(o) => o.richardson_delta < 1e-12,
            Err(_) => false,
        }
    });

    rep.ok
}
