//! Acceptance battery: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::Instant;

use hillspec_core::discriminant;
use hillspec_core::eigen;
use hillspec_core::expansion::{self, Mode, PlainExpansionVerdict, ReconstructOptions, SourceFunction};
use hillspec_core::ode;
use hillspec_core::oracle::{self, ContourOptions};
use hillspec_core::roots::Rect;
use hillspec_core::singular::{self, SingularityClass};
use hillspec_core::spectrum;
use hillspec_core::{quad, Complex64 as C64, Potential, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 0.02;
const TOL: f64 = spectrum::EIGEN_TOL;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn zero() -> Potential {
    Potential::zero()
}

fn mathieu() -> Potential {
    Potential::fourier(&[(1, c(1.0, 0.0)), (-1, c(1.0, 0.0))]).unwrap()
}

fn gasymov() -> Potential {
    Potential::fourier(&[(1, c(1.0, 0.0))]).unwrap()
}

fn complex_pot() -> Potential {
    Potential::fourier(&[(1, c(0.5, 0.5)), (-1, c(0.1, 0.0))]).unwrap()
}

fn rel_l2(a: &[C64], b: &[C64]) -> f64 {
    let w = quad::gregory_weights(a.len());
    let d: Vec<C64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    quad::norm(&w, &d) / quad::norm(&w, b)
}

fn rel_gap(a: C64, b: C64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm())
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

/// λ_n(t) = (2πn+t)² and α_n(t) = 1 for q = 0.
fn c1() -> Result<Verdict> {
    let start = Instant::now();
    let p = zero();
    // integration at 1e-13: near band edges F' ≈ sin t/(4πn) amplifies the error of F
    let tol = 1e-13;
    let mut lam_err = 0.0f64;
    let mut alpha_err = 0.0f64;
    for i in 1..=64 {
        let t = -PI + 2.0 * PI * i as f64 / 64.0;
        let roots = spectrum::solve_labeled(&p, c(t, 0.0), -20, 20, tol, false)?;
        if roots.len() != 41 {
            return verdict(false, format!("{} eigenvalues at t={t}", roots.len()));
        }
        for r in &roots {
            lam_err = lam_err.max((r.lambda - (2.0 * PI * r.n as f64 + t).powi(2)).norm());
        }
        // at t ∈ {0, π} every eigenvalue is semisimple double and α is undefined
        if t.abs() < 1e-12 || (PI - t.abs()).abs() < 1e-12 {
            continue;
        }
        for n in -20..=20 {
            let pair = eigen::normalized_pair(&p, n, t, tol)?;
            alpha_err = alpha_err.max((pair.alpha - 1.0).norm());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        lam_err <= 1e-8 && alpha_err <= 1e-8 && secs < 30.0,
        format!("max|λ-(2πn+t)²| = {lam_err:.2e}, max|α-1| = {alpha_err:.2e}, {secs:.1} s"),
    )
}

fn random_potential(rng: &mut ChaCha8Rng) -> Potential {
    let kmax = rng.gen_range(1..=3);
    let terms: Vec<(i64, C64)> = (-kmax..=kmax)
        .filter(|&k| k != 0)
        .map(|k| (k, c(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5))))
        .collect();
    Potential::fourier(&terms).unwrap()
}

/// Wronskian θφ' - θ'φ = 1 and (φ'-θ)² + 4 - F² = -4φθ' at x = 1.
fn c2() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut wr = 0.0f64;
    let mut id = 0.0f64;
    for _ in 0..200 {
        let p = random_potential(&mut rng);
        let lambda = c(rng.gen_range(-50.0..500.0), rng.gen_range(-20.0..20.0));
        let fs = ode::integrate_fundamental(&p, lambda, 129, TOL)?;
        wr = wr.max(ode::wronskian_defect(&fs));
        let m = fs.monodromy;
        let f = m.trace();
        let lhs = (m.phi_dx - m.theta).powi(2) + 4.0 - f * f;
        let rhs = -4.0 * m.phi * m.theta_dx;
        let scale = lhs.norm().max(rhs.norm()).max((f * f).norm()).max(4.0);
        id = id.max((lhs - rhs).norm() / scale);
    }
    verdict(wr <= 1e-9 && id <= 1e-9, format!("Wronskian defect {wr:.2e}, identity residual {id:.2e} over 200 samples"))
}

/// F' three ways: product integral, variational system, central difference.
fn c3() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for p in [mathieu(), gasymov(), complex_pot()] {
        for _ in 0..100 {
            let im = rng.gen_range(0.5..3.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let lambda = c(rng.gen_range(-10.0..300.0), im);
            let v = discriminant::hill_discriminant(&p, lambda, TOL)?;
            let step = 1e-3 * (1.0 + lambda.norm()).sqrt();
            let fp = ode::monodromy(&p, lambda + step, TOL)?.trace();
            let fm = ode::monodromy(&p, lambda - step, TOL)?.trace();
            let fd = (fp - fm) / (2.0 * step);
            worst = worst
                .max(rel_gap(v.fprime, v.fprime_integral))
                .max(rel_gap(v.fprime, fd))
                .max(rel_gap(v.fprime_integral, fd));
        }
    }
    verdict(worst <= 1e-6, format!("max pairwise relative gap {worst:.2e} over 3×100 samples"))
}

/// q = e^{2πix}: F = 2cos√λ, ESS at (kπ)², k = 1..4, none for 2cos 2πx.
fn c4() -> Result<Verdict> {
    let p = gasymov();
    let mut f_err = 0.0f64;
    for i in 0..=400 {
        let l = 0.5 * i as f64;
        f_err = f_err.max((ode::monodromy(&p, c(l, 0.0), TOL)?.trace() - 2.0 * l.sqrt().cos()).norm());
    }
    let window = Rect::new(1.0, -1.0, 170.0, 1.0);
    let recs = singular::find_singularities(&p, window, H, TOL)?;
    let mut ok_points = 0;
    let mut betas = Vec::new();
    for k in 1..=4 {
        let mu = (k as f64 * PI).powi(2);
        let Some(r) = recs.iter().find(|r| (r.mu - mu).norm() < 1e-6 * mu) else { continue };
        let beta_ok = r.beta.is_some_and(|b| (b - 1.0).abs() <= 0.1);
        if r.geo_mult == 1 && r.klass == Some(SingularityClass::Ess) && r.ess_by_monodromy && r.ess_by_beta == Some(true) && beta_ok {
            ok_points += 1;
        }
        betas.push(r.beta.unwrap_or(f64::NAN));
    }
    let control = singular::find_singularities(&mathieu(), window, H, TOL)?;
    let control_ess = control
        .iter()
        .filter(|r| r.klass == Some(SingularityClass::Ess) && (1..=4).any(|k| (r.mu - (k as f64 * PI).powi(2)).norm() < 1.0))
        .count();
    verdict(
        f_err <= 1e-7 && ok_points == 4 && control_ess == 0,
        format!(
            "|F-2cos√λ| ≤ {f_err:.2e}, ESS confirmed at {ok_points}/4 points (β = {betas:.3?}), ESS in control: {control_ess}"
        ),
    )
}

/// β = 1 at a boundary Jordan point; α exponent 1/2 at an interior double point.
fn c5() -> Result<Verdict> {
    let p = gasymov();
    let mu = c(4.0 * PI * PI, 0.0);
    let seed = singular::BranchSeed::new(&p, mu, TOL)?;
    let boundary = singular::fit_alpha_exponent_adaptive(&p, 1, 0.0, H, Some(seed), TOL)?;
    let gammas: Vec<f64> = (1..=12).map(|i| 0.5 * i as f64).collect();
    let Some((g, q, pt)) = singular::search_interior_point(&gammas, Rect::new(-10.0, -2.0, 60.0, 2.0), 0.2, TOL)? else {
        return verdict(false, "no interior multiple point found".into());
    };
    let rec = singular::classify(&q, &singular::record_for(&q, &pt, TOL)?, H, f64::INFINITY, TOL)?;
    let interior = rec.beta.unwrap_or(f64::NAN);
    let target = (rec.m as f64 - 1.0) / rec.m as f64;
    verdict(
        (boundary.beta - 1.0).abs() <= 0.1 && rec.m == 2 && (interior - target).abs() <= 0.1,
        format!(
            "boundary β = {:.3} (target 1), interior point γ = {g}, t0 = {:.3}, m = {}: exponent {interior:.3} (target {target})",
            boundary.beta, pt.t.re, rec.m
        ),
    )
}

/// P(γ)f from the t-integral equals the λ-domain contour form.
fn c6() -> Result<Verdict> {
    let fs = [SourceFunction::bump(0.0, 1.0), SourceFunction::hat(0.3, 0.8), SourceFunction::bump(-0.4, 1.5)];
    let mut worst = 0.0f64;
    for p in [mathieu(), complex_pot()] {
        for f in &fs {
            worst = worst.max(expansion::lambda_domain_projection(&p, f, 1, (0.5, 2.5), 8, TOL)?.relative_l2);
        }
    }
    verdict(worst <= 1e-6, format!("max relative L2 defect {worst:.2e} (band 1, t ∈ [0.5, 2.5], 2 potentials × 3 functions)"))
}

/// T_n over C(n) against a_nΨ_n + a_{-n}Ψ_{-n} for q = e^{2πix}.
fn c7() -> Result<Verdict> {
    let p = gasymov();
    let f = SourceFunction::bump(0.0, 1.0);
    let n = spectrum::asymptotic_window(&p, H, TOL)?.n + 1;
    let opts = ContourOptions::default();
    let mut worst = 0.0f64;
    let mut bound = 0.0f64;
    for k in 0..32 {
        let t = c(-H + 2.0 * H * (k as f64 + 0.5) / 32.0, 0.0);
        let tp = oracle::total_projection(&p, &f, n, t, H, &opts)?;
        // the eigenpairs near the double point at t = 0 need integration at 1e-14
        let direct = expansion::band_sum(&p, &f, &[n, -n], t, opts.grid_size, 1e-14)?;
        worst = worst.max(rel_l2(&tp.profile, &direct));
        bound = bound.max(tp.bound);
    }
    verdict(worst <= 1e-6, format!("n = {n}: max relative L2 gap {worst:.2e} over 32 t-samples, sup|T_n| = {bound:.3e}"))
}

fn bump() -> SourceFunction {
    SourceFunction::bump(0.0, 1.0)
}

/// Both modes reconstruct the bump for q = 0 and q = 2cos 2πx.
fn c8() -> Result<Verdict> {
    let opts = ReconstructOptions::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, p) in [("q=0", zero()), ("q=2cos2πx", mathieu())] {
        let plan = expansion::plan(&p, opts.h, opts.n_max, opts.tol)?;
        let r = expansion::reconstruct_modes(&p, &bump(), &plan, &opts, &[Mode::Contour, Mode::Pv])?;
        let dist = r[0].distance(&r[1]);
        let err = r[0].l2_error.max(r[1].l2_error);
        pass &= err <= 1e-2 && dist <= 2e-3;
        parts.push(format!("{name}: error {err:.2e}, modes differ by {dist:.2e}"));
    }
    verdict(pass, parts.join("; "))
}

/// p.v. reconstruction for q = e^{2πix} with the unpaired negative control.
fn c9() -> Result<Verdict> {
    let p = gasymov();
    let opts = ReconstructOptions::default();
    let plan = expansion::plan(&p, opts.h, opts.n_max, opts.tol)?;
    let r = expansion::reconstruct(&p, &bump(), &plan, &opts, Mode::Pv)?;
    let pv = r.pv.as_ref().expect("pv diagnostics");
    let ratio = pv.control_ratio.unwrap_or(0.0);
    verdict(
        pv.spread <= 1e-3 && r.l2_error <= 2e-2 && ratio >= 10.0,
        format!(
            "spread {:.2e}, error {:.2e}, unpaired/paired at δ = {:e}: {ratio:.1}",
            pv.spread,
            r.l2_error,
            expansion::CONTROL_DELTA
        ),
    )
}

fn c10() -> Result<Verdict> {
    let ns = [1, 2, 4, 8, 16];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, p, want) in [
        ("q=0", zero(), PlainExpansionVerdict::PlainExpansionOk),
        ("q=2cos2πx", mathieu(), PlainExpansionVerdict::PlainExpansionOk),
        ("q=e^{2πix}", gasymov(), PlainExpansionVerdict::NotOk),
    ] {
        let plan = expansion::plan(&p, H, 30, TOL)?;
        let r = expansion::theorem10_check(&p, &bump(), &plan, &ns, TOL)?;
        let stuck: Vec<i64> = r.integrals.iter().filter(|i| !i.converges).map(|i| i.n).collect();
        let ok = r.verdict == want && (want == PlainExpansionVerdict::PlainExpansionOk || !stuck.is_empty());
        pass &= ok;
        parts.push(format!("{name}: {:?} (non-vanishing ladders at n = {stuck:?})", r.verdict));
    }
    verdict(pass, parts.join("; "))
}

fn c11() -> Result<Verdict> {
    let ts: Vec<f64> = (0..8).map(|i| 0.02 + (PI - 0.04) * i as f64 / 7.0).chain([0.3]).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, p) in [("q=0", zero()), ("q=2cos2πx", mathieu()), ("q=e^{2πix}", gasymov())] {
        let r = expansion::remainder_diagnostics(&p, &bump(), &ts, &[8, 16, 32], TOL)?;
        pass &= r.stable;
        let cs: Vec<String> = r.c_fit.iter().map(|v| format!("{v:.2e}")).collect();
        parts.push(format!("{name}: c(8, 16, 32) = [{}]", cs.join(", ")));
    }
    verdict(pass, parts.join("; "))
}

fn c12() -> Result<Verdict> {
    let bin = env!("CARGO_BIN_EXE_hillspec");
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/verify.json");
    let run = |threads: &str| {
        Command::new(bin)
            .args(["verify", "--config", config, "--threads", threads])
            .output()
            .expect("spawn hillspec")
    };
    let a = run("1");
    let b = run("4");
    let passed = String::from_utf8_lossy(&a.stdout).matches("\"pass\": true").count();
    verdict(
        a.status.success() && b.status.success() && !a.stdout.is_empty() && a.stdout == b.stdout,
        format!(
            "scorecards at 1 and 4 threads: {} bytes, identical = {}, {passed} checks passing",
            a.stdout.len(),
            a.stdout == b.stdout
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Result<Verdict>); 12] = [
        ("free-potential exactness", c1),
        ("Wronskian and identity audits", c2),
        ("F' consistency", c3),
        ("Gasymov battery", c4),
        ("α-exponent laws", c5),
        ("projection identity", c6),
        ("bundle oracle", c7),
        ("reconstruction, regular case", c8),
        ("reconstruction, ESS case", c9),
        ("plain-expansion verdicts", c10),
        ("remainder bound", c11),
        ("determinism", c12),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("{}: {e}", e.kind())),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "C{:<2} {} {name}: {detail} [{:.1} s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
