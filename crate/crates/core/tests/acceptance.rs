//! Acceptance checks, one PASS/FAIL line per criterion.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twolayer::asymptotics::{composite_grid, h_infinity_series, outer_slope, AsymptoticSolution};
use twolayer::droplet::{
    droplet_pressures, mobility, neumann_stationary, solve_droplet, solve_h_infinity, GridSpec,
};
use twolayer::minimizer::{
    centered, el_residual, energy_eps, energy_gradient, gamma_convergence_study, minimize, nodal_pressures,
    rearrange_decreasing, rearranged_pair, DiscreteState, MinimizeOptions,
};
use twolayer::potential::PotentialSpec;
use twolayer::sharp_interface::{c_constant, gamma_minimizer, neumann_triangle, sharp_droplet};

const PHI1: f64 = 0.375;

struct Outcome {
    pass: bool,
    detail: String,
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn report(id: u32, title: &str, budget: Duration, check: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let mut out = check();
    let elapsed = start.elapsed();
    if elapsed > budget {
        out.pass = false;
        out.detail.push_str(&format!("; over budget {budget:?}"));
    }
    let tag = if out.pass { "PASS" } else { "FAIL" };
    // written past the test harness capture so the lines always show
    let _ = writeln!(std::io::stdout(), "{tag} {id}: {title}: {} ({elapsed:.2?})", out.detail);
    out.pass
}

fn pot(eps: f64) -> PotentialSpec {
    PotentialSpec::standard(eps).unwrap()
}

fn composite_error(eps: f64, sigma: f64) -> f64 {
    let profile = solve_droplet(&pot(eps), sigma, &GridSpec::default()).unwrap();
    let sol = AsymptoticSolution::new(eps, sigma).unwrap();
    composite_grid(eps, sol.s, sol.s + 5.0 * eps, 4000)
        .into_iter()
        .map(|x| (sol.composite(x) - profile.eval(x)).abs())
        .fold(0.0, f64::max)
}

fn criterion_1() -> Outcome {
    let eps = [0.2, 0.1, 0.05];
    let mut errs = Vec::new();
    let mut slowest = Duration::ZERO;
    for &e in &eps {
        let t = Instant::now();
        errs.push(composite_error(e, 1.2));
        slowest = slowest.max(t.elapsed());
    }
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let pass = errs.iter().all(|e| e.is_finite())
        && orders.iter().all(|&p| p >= 1.5)
        && slowest < Duration::from_secs(10);
    Outcome { pass, detail: format!("sup errors {}, orders {orders:.2?}", sci(&errs)) }
}

fn criterion_2() -> Outcome {
    let err = |e: f64| (solve_h_infinity(&pot(e), 1e-14).unwrap() - h_infinity_series(e)).abs();
    let ratio = err(0.1) / err(0.05);
    Outcome { pass: (8.0..=32.0).contains(&ratio), detail: format!("error ratio {ratio:.3}") }
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let sigma = rng.gen_range(0.2..5.0);
        let a = outer_slope(sigma).unwrap();
        let b = sharp_droplet(sigma, PHI1, None).unwrap().slope;
        let c = (2.0 * c_constant(sigma, PHI1)).sqrt();
        let g = gamma_minimizer(100.0, 1.0, sigma, PHI1, 1, 10.0).unwrap().contact_slope();
        let t = -neumann_triangle(sigma, c_constant(sigma, PHI1)).unwrap().2;
        for v in [a, b, g, t] {
            worst = worst.max((v - c).abs() / c);
        }
    }
    Outcome { pass: worst < 1e-12, detail: format!("largest relative mismatch {worst:.2e}") }
}

fn criterion_4() -> Outcome {
    let g = gamma_minimizer(4.0, 1.0, 1.0, PHI1, 1, 3.0).unwrap();
    let mass = 4.0 / 3.0 * g.alpha * g.s.powi(3);
    let (s1, s2, _) = neumann_triangle(1.0, g.c).unwrap();
    let triangle = (1.0 * s1 * s1 + s2 * s2 - 2.0 * PHI1).abs();
    let pass = (g.s - 1.106682).abs() < 5e-7
        && (g.alpha - 0.553341).abs() < 5e-7
        && (mass - 1.0).abs() < 1e-10
        && triangle < 1e-12;
    Outcome {
        pass,
        detail: format!("s = {:.7}, alpha = {:.7}, mass error {:.1e}, triangle {triangle:.1e}", g.s, g.alpha, mass - 1.0),
    }
}

fn criterion_5() -> Outcome {
    let p = pot(0.1);
    let init = DiscreteState::initial(4.0, 2.0, 4.0, 1024, p, 1.0).unwrap();
    let (state, rep) = minimize(&init, &MinimizeOptions::default()).unwrap();
    let (exact, _) = neumann_stationary(4.0, 2.0, 4.0, &p, 1.0, 1024).unwrap();
    let c = centered(&state);
    let sup = c
        .h1
        .iter()
        .zip(&exact.h1)
        .chain(c.h2.iter().zip(&exact.h2))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let el = el_residual(&state, rep.lambda1, rep.lambda2).unwrap();
    let pass = rep.converged && sup < 1e-3 && rep.lambda2.abs() < 1e-4 && el < 1e-3;
    Outcome {
        pass,
        detail: format!(
            "sup distance {sup:.2e}, lambda2 {:.1e}, EL residual {el:.1e}, {} iterations",
            rep.lambda2, rep.iterations
        ),
    }
}

fn criterion_6() -> Outcome {
    let t = gamma_convergence_study(&[0.2, 0.1, 0.05], 4.0, 2.0, 1.0, 4.0, 1024, &MinimizeOptions::default())
        .unwrap();
    let gaps: Vec<f64> = t.rows.iter().map(|r| r.energy_gap).collect();
    let slopes: Vec<f64> = t.rows.iter().map(|r| r.contact_slope).collect();
    let pass = t.energy_gap_decreasing() && t.slope_error_decreasing() && t.rows.iter().all(|r| r.converged);
    Outcome {
        pass,
        detail: format!(
            "energy gaps {}, contact slopes {slopes:.4?} -> {:.4}",
            sci(&gaps),
            t.contact_slope_target
        ),
    }
}

fn random_bump(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let k = rng.gen_range(1..4);
    let bumps: Vec<(f64, f64, f64)> =
        (0..k).map(|_| (rng.gen_range(0.3..0.7), rng.gen_range(0.02..0.25), rng.gen_range(0.05..1.5))).collect();
    (0..n)
        .map(|i| {
            let x = i as f64 / (n - 1) as f64;
            bumps.iter().map(|&(c, r, a)| a * (1.0 - ((x - c) / r).powi(2)).max(0.0).powi(2)).sum()
        })
        .collect()
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let dirichlet = |f: &[f64]| f.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>();
    let (mut mass_err, mut dir_excess, mut energy_excess) = (0.0f64, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for _ in 0..100 {
        let h = random_bump(&mut rng, 300);
        let r = rearrange_decreasing(&h);
        mass_err = mass_err.max((h.iter().sum::<f64>() - r.iter().sum::<f64>()).abs());
        dir_excess = dir_excess.max(dirichlet(&r) - dirichlet(&h));
    }
    for _ in 0..50 {
        let eps = 0.05;
        let h = random_bump(&mut rng, 300);
        let tilt = rng.gen_range(-0.3..0.3);
        let h1: Vec<f64> = (0..300).map(|i| 1.0 + tilt * i as f64 / 300.0 - 0.2 * h[i]).collect();
        let h2: Vec<f64> = h1.iter().zip(&h).map(|(a, b)| a + b + eps).collect();
        let s = DiscreteState::new(3.0, h1, h2, pot(eps), rng.gen_range(0.3..3.0)).unwrap();
        let e0 = energy_eps(&s).unwrap().shifted;
        let e1 = energy_eps(&rearranged_pair(&s).unwrap()).unwrap().shifted;
        energy_excess = energy_excess.max(e1 - e0);
    }
    let pass = mass_err < 1e-12 && dir_excess <= 1e-8 && energy_excess <= 1e-8;
    Outcome {
        pass,
        detail: format!(
            "mass error {mass_err:.1e}, Dirichlet increase {dir_excess:.1e}, energy increase {energy_excess:.1e}"
        ),
    }
}

fn criterion_8() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut relative = |grad: f64, p1: &[f64], p2: &[f64]| {
        let scale = p1.iter().chain(p2).fold(1.0f64, |a, p| a.max(p.abs()));
        worst = worst.max(grad / scale);
    };
    for eps in [0.2, 0.1, 0.05] {
        let profile = solve_droplet(&pot(eps), 1.2, &GridSpec::default()).unwrap();
        let f = droplet_pressures(&profile, 1.0, &pot(eps)).unwrap();
        relative(f.max_interior_gradient(2), &f.p1, &f.p2);
    }
    for (m2, sigma) in [(2.0, 1.0), (1.0, 0.5), (1.5, 2.5)] {
        let (_, f) = neumann_stationary(4.0, m2, 4.0, &pot(0.1), sigma, 512).unwrap();
        relative(f.max_interior_gradient(2), &f.p1, &f.p2);
    }
    let init = DiscreteState::initial(4.0, 2.0, 4.0, 512, pot(0.1), 1.0).unwrap();
    let (state, _) = minimize(&init, &MinimizeOptions::default()).unwrap();
    let (p1, p2) = nodal_pressures(&state).unwrap();
    let dx = state.dx();
    let grad = p1
        .windows(3)
        .chain(p2.windows(3))
        .map(|w| ((w[2] - w[0]) / (2.0 * dx)).abs())
        .fold(0.0, f64::max);
    relative(grad, &p1, &p2);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut min_det = f64::INFINITY;
    for _ in 0..100 {
        let h1 = rng.gen_range(1e-3..5.0);
        let h2 = h1 + rng.gen_range(1e-3..5.0);
        min_det = min_det.min(mobility(h1, h2, rng.gen_range(0.05..20.0)).unwrap().det);
    }
    Outcome {
        pass: worst < 1e-6 && min_det > 0.0,
        detail: format!("max relative pressure gradient {worst:.1e}, min det Q {min_det:.2e}"),
    }
}

fn criterion_9() -> Outcome {
    let s = DiscreteState::initial(3.0, 1.5, 4.0, 256, pot(0.1), 1.3).unwrap();
    let (g1, g2) = energy_gradient(&s).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    let step = 1e-7;
    for _ in 0..20 {
        let d1: Vec<f64> = (0..s.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d2: Vec<f64> = (0..s.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let at = |t: f64| {
            let mut m = s.clone();
            for i in 0..s.len() {
                m.h1[i] += t * d1[i];
                m.h2[i] += t * d2[i];
            }
            energy_eps(&m).unwrap().raw
        };
        let fd = (at(step) - at(-step)) / (2.0 * step);
        let an: f64 = g1.iter().zip(&d1).chain(g2.iter().zip(&d2)).map(|(g, d)| g * d).sum();
        worst = worst.max((fd - an).abs() / an.abs());
    }
    Outcome { pass: worst < 1e-5, detail: format!("largest relative error {worst:.1e} over 20 directions") }
}

#[test]
fn acceptance_criteria() {
    let s = Duration::from_secs;
    let results = [
        report(1, "composite vs quadrature convergence", s(30), criterion_1),
        report(2, "h_infinity series error ratio", s(1), criterion_2),
        report(3, "contact slope across pipelines", s(1), criterion_3),
        report(4, "sharp-interface minimizer constants", s(1), criterion_4),
        report(5, "discrete minimizer vs Neumann stationary state", s(60), criterion_5),
        report(6, "gamma-convergence study", s(300), criterion_6),
        report(7, "rearrangement properties", s(30), criterion_7),
        report(8, "stationarity and mobility", s(5), criterion_8),
        report(9, "energy gradient vs finite differences", s(5), criterion_9),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, p)| !**p).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
