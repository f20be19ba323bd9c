//! Multiple eigenvalues, their geometric multiplicity, α-exponent fits and
//! classification into regular points, spectral singularities and ESS.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::eigen;
use crate::error::{HillError, Result};
use crate::ode;
use crate::potential::Potential;
use crate::roots::Rect;
use crate::spectrum::{self, MultiplePoint};

/// Quasimomenta closer than this to 0 or π are treated as boundary points.
pub const BOUNDARY_SNAP: f64 = 1e-4;
/// Deepest level j of the adaptive ladder h·2^{-j}.
pub const MAX_LEVEL: i32 = 60;
/// Accepted RMS residual (natural-log units) of the α power-law fit.
pub const FIT_RESIDUAL_MAX: f64 = 0.2;
/// Exponents within this distance of 0 or 1 are read as 0 or 1.
pub const BETA_BAND: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SingularityClass {
    RegularMultiple,
    SpectralSingularity,
    Ess,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityRecord {
    pub mu: C64,
    pub t0: f64,
    pub m: u32,
    pub geo_mult: u32,
    /// Fitted exponent of |α_k(t)| ~ |t - t0|^β, averaged over the bands meeting μ.
    pub beta: Option<f64>,
    pub beta_residual: Option<f64>,
    pub klass: Option<SingularityClass>,
    pub dirichlet_flag: bool,
    pub neumann_flag: bool,
    pub indices: Vec<i64>,
    /// μ above the large-eigenvalue threshold, where the monodromy criterion applies.
    pub large: bool,
    pub ess_by_monodromy: bool,
    pub ess_by_beta: Option<bool>,
    /// Set when the record could not be classified (e.g. an unstable exponent fit).
    pub flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularQuasimomentum {
    /// Positive unrolled quasimomentum, a multiple of π.
    pub value: f64,
    pub ess_lambda: C64,
    pub indices: Vec<i64>,
    /// Open intervals (a, b) of unrolled quasimomenta forming the bundle.
    pub bundle: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaFit {
    pub beta: f64,
    /// first and last ladder level j of the fitted window
    pub levels: (i32, i32),
    pub residual: f64,
    /// (|t - t0|, |α|) samples used in the fit.
    pub samples: Vec<(f64, f64)>,
}

fn kappa(mu: C64) -> f64 {
    (1.0 + mu.norm()).sqrt()
}

fn snap_t0(t0: f64) -> f64 {
    if t0.abs() < BOUNDARY_SNAP {
        0.0
    } else if (PI - t0).abs() < BOUNDARY_SNAP {
        PI
    } else {
        t0
    }
}

pub fn is_boundary(t0: f64) -> bool {
    t0 == 0.0 || t0 == PI
}

/// Monodromy at μ (integrated at tol/100) and the cutoff below which its
/// κ-scaled entries count as zero: 100 times their change between tol and
/// tol/100, and never below 10·tol.
pub fn zero_threshold(p: &Potential, mu: C64, tol: f64) -> Result<(ode::Monodromy, f64)> {
    let coarse = ode::monodromy(p, mu, tol)?;
    let fine = ode::monodromy(p, mu, tol * 1e-2)?;
    let k = kappa(mu);
    let noise = ((coarse.theta - fine.theta).norm())
        .max((coarse.phi - fine.phi).norm() * k)
        .max((coarse.theta_dx - fine.theta_dx).norm() / k)
        .max((coarse.phi_dx - fine.phi_dx).norm());
    Ok((fine, (100.0 * noise).max(10.0 * tol)))
}

/// 2 when the monodromy at μ equals e^{it0}·I (entries scaled by their natural
/// size κ = sqrt(1+|μ|)) up to the integration noise, otherwise 1.
pub fn geometric_multiplicity(p: &Potential, mu: C64, t0: f64, tol: f64) -> Result<u32> {
    let (m, thr) = zero_threshold(p, mu, tol)?;
    let e = C64::from_polar(1.0, t0);
    let k = kappa(mu);
    let worst = (m.theta - e)
        .norm()
        .max(m.phi.norm() * k)
        .max(m.theta_dx.norm() / k)
        .max((m.phi_dx - e).norm());
    Ok(if worst <= thr { 2 } else { 1 })
}

/// (Dirichlet, Neumann) flags: φ(1,μ) = 0 and θ'(1,μ) = 0 up to the integration noise.
pub fn boundary_flags(p: &Potential, mu: C64, tol: f64) -> Result<(bool, bool)> {
    let (m, thr) = zero_threshold(p, mu, tol)?;
    let k = kappa(mu);
    Ok((m.phi.norm() * k <= thr, m.theta_dx.norm() / k <= thr))
}

/// Least-squares slope of log|α_k(t)| against log|t - t0| at t = t0 + offset.
/// Offsets that leave (-π, π] wrap around the period.
pub fn fit_alpha_exponent(p: &Potential, k: i64, t0: f64, offsets: &[f64], tol: f64) -> Result<AlphaFit> {
    if offsets.len() < 3 {
        return Err(HillError::InvalidArgument("exponent fit needs at least 3 samples".into()));
    }
    let samples: Vec<(f64, f64)> = offsets
        .par_iter()
        .map(|&s| {
            let mut t = t0 + s;
            if t > PI {
                t -= 2.0 * PI;
            } else if t <= -PI {
                t += 2.0 * PI;
            }
            let pair = eigen::normalized_pair(p, k, t, tol)?;
            Ok((s.abs(), pair.alpha.norm()))
        })
        .collect::<Result<Vec<_>>>()?;
    if samples.iter().any(|&(s, a)| s == 0.0 || a == 0.0 || !a.is_finite()) {
        return Err(HillError::FitUnstable(format!("zero sample in α ladder for band {k}")));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let (beta, c) = least_squares(&xs, &ys);
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - beta * x - c).powi(2))
        .sum::<f64>()
        / xs.len() as f64)
        .sqrt();
    if residual > FIT_RESIDUAL_MAX {
        return Err(HillError::FitUnstable(format!(
            "band {k} at t0={t0}: residual {residual:.3} for slope {beta:.3}"
        )));
    }
    Ok(AlphaFit {
        beta,
        levels: (0, 0),
        residual,
        samples,
    })
}

fn wrap(t: f64) -> f64 {
    if t > PI {
        t - 2.0 * PI
    } else if t <= -PI {
        t + 2.0 * PI
    } else {
        t
    }
}

/// Local data at a double point needed to follow a band along its Puiseux branch.
#[derive(Debug, Clone, Copy)]
pub struct BranchSeed {
    pub mu: C64,
    pub f_mu: C64,
    pub f2_mu: C64,
}

impl BranchSeed {
    pub fn new(p: &Potential, mu: C64, tol: f64) -> Result<Self> {
        let j = ode::monodromy_jet(p, mu, 2, tol)?;
        Ok(BranchSeed {
            mu,
            f_mu: j.value.trace(),
            f2_mu: j.d2.expect("second order jet").trace(),
        })
    }

    /// The two leading-order solutions of F(λ) = 2cos t near μ, with 2cos t - F(μ).
    fn roots(&self, t0: f64, t: f64) -> ([C64; 2], C64) {
        let target = if is_boundary(t0) {
            // exact: F(μ) = 2cos t0 at a boundary double point
            C64::new(-4.0 * (0.5 * (t - t0)).sin().powi(2) * t0.cos(), 0.0)
        } else {
            C64::new(2.0 * t.cos(), 0.0) - self.f_mu
        };
        let d = (2.0 * target / self.f2_mu).sqrt();
        ([self.mu + d, self.mu - d], target)
    }
}

struct LevelSample {
    alpha: f64,
    lambda: C64,
}

/// α_k at t = t0 + s from the solved eigenvalue; `None` when the eigenvalue
/// solve fails or the α formulas disagree by more than 1e-3 relative.
fn direct_alpha(p: &Potential, k: i64, t: f64, tol: f64) -> Result<Option<LevelSample>> {
    match eigen::normalized_pair(p, k, t, tol) {
        Ok(pair) => {
            let a = pair.alpha.norm();
            let ok = a > 0.0 && a.is_finite() && pair.formula_spread <= 1e-3 * a;
            Ok(ok.then_some(LevelSample { alpha: a, lambda: pair.lambda }))
        }
        Err(HillError::MissedRoot(_) | HillError::NewtonDiverged(_) | HillError::WindingMismatch(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// α from the closed formula of the better-conditioned eigenfunction form at
/// (λ, t), with e^{±it} exact. `None` when the Φ and G formulas disagree by
/// more than 1e-3 relative.
fn closed_alpha(p: &Potential, k: i64, t: f64, lambda: C64, tol: f64) -> Result<Option<f64>> {
    let fs = ode::integrate_fundamental_jet(p, lambda, eigen::profile_grid(lambda), tol)?;
    let fprime = fs.monodromy_dlambda.expect("jet").trace();
    let pair = eigen::pair_from_solution(&fs, k, t, fprime)?;
    let (chosen, other) = match pair.form {
        eigen::EigenForm::Phi => (pair.alpha_phi, pair.alpha_g),
        eigen::EigenForm::G => (pair.alpha_g, pair.alpha_phi),
    };
    let Some(a) = chosen.map(|a| a.norm()) else {
        return Ok(None);
    };
    if let Some(o) = other.map(|o| o.norm()) {
        if (a - o).abs() > 1e-3 * a {
            return Ok(None);
        }
    }
    Ok((a > 0.0 && a.is_finite()).then_some(a))
}

/// Slope, residual and (|t - t0|, |α|) samples for a window of ladder levels,
/// or `None` if the local slopes spread by more than `BETA_BAND`.
fn window_fit(win: &[(f64, f64, f64)]) -> Option<(f64, f64, Vec<(f64, f64)>)> {
    let slopes: Vec<f64> = win
        .windows(2)
        .map(|w| ((w[0].1 * w[0].2).ln() - (w[1].1 * w[1].2).ln()) / (2.0 * (w[0].0 / w[1].0).ln()))
        .collect();
    let lo = slopes.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo > BETA_BAND {
        return None;
    }
    let mut xs = Vec::with_capacity(2 * win.len());
    let mut ys = Vec::with_capacity(2 * win.len());
    let mut samples = Vec::with_capacity(2 * win.len());
    for &(s, a, b) in win {
        for v in [a, b] {
            xs.push(s.ln());
            ys.push(v.ln());
            samples.push((s, v));
        }
    }
    let (beta, c) = least_squares(&xs, &ys);
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - beta * x - c).powi(2))
        .sum::<f64>()
        / xs.len() as f64)
        .sqrt();
    Some((beta, residual, samples))
}

/// Exponent fit on the two-sided ladder t0 ± h·2^{-j}, fitted over nine
/// consecutive levels whose local slopes agree within `BETA_BAND`.
///
/// Without `branch` the first such window is used. With `branch` (a
/// non-semisimple double point) |α| stays near its regular value down to a
/// crossover scale set by the Jordan coupling, which can be far below h, so the
/// ladder runs to its numerical floor and the deepest window is used. Past
/// |t - t0| ~ sqrt(noise/|F''|)/κ the eigenvalue cannot be resolved from
/// F(λ) = 2cos t; those levels follow the leading Puiseux term
/// λ = μ ± sqrt(2(2cos t - F(μ))/F''(μ)) and use the closed α formula there.
pub fn fit_alpha_exponent_adaptive(
    p: &Potential,
    k: i64,
    t0: f64,
    h: f64,
    branch: Option<BranchSeed>,
    tol: f64,
) -> Result<AlphaFit> {
    const WINDOW: usize = 9;
    let mut levels: Vec<(f64, f64, f64)> = Vec::new();
    let mut best: Option<AlphaFit> = None;
    // direction of λ - μ on each side once following the branch
    let mut dirs: [Option<C64>; 2] = [None, None];
    let mut last_lambda: [Option<C64>; 2] = [None, None];
    'ladder: for j in 0..=MAX_LEVEL {
        let s = h * 0.5f64.powi(j);
        let mut vals = [0.0f64; 2];
        for (side, sign) in [1.0f64, -1.0].into_iter().enumerate() {
            let t = wrap(t0 + sign * s);
            let direct = if dirs[side].is_none() {
                direct_alpha(p, k, t, tol)?
            } else {
                None
            };
            vals[side] = match (direct, branch) {
                (Some(d), _) => {
                    last_lambda[side] = Some(d.lambda);
                    d.alpha
                }
                (None, Some(b)) => {
                    let (roots, target) = b.roots(t0, t0 + sign * s);
                    let floor_target = !is_boundary(t0) && target.norm() < 100.0 * tol * kappa(b.mu);
                    let floor_offset = (roots[0] - b.mu).norm() < 1e3 * f64::EPSILON * (1.0 + b.mu.norm());
                    if floor_target || floor_offset {
                        break 'ladder;
                    }
                    let reference = match last_lambda[side] {
                        Some(l) => l,
                        None => spectrum::solve_eigenvalues_opt(p, t, k, k, tol, false)?[0].lambda,
                    };
                    let pick = match dirs[side] {
                        Some(d) => roots
                            .into_iter()
                            .min_by(|x, y| {
                                ((x - b.mu).unscale((x - b.mu).norm()) - d)
                                    .norm()
                                    .total_cmp(&((y - b.mu).unscale((y - b.mu).norm()) - d).norm())
                            })
                            .unwrap(),
                        None => roots
                            .into_iter()
                            .min_by(|x, y| (x - reference).norm().total_cmp(&(y - reference).norm()))
                            .unwrap(),
                    };
                    let off = pick - b.mu;
                    dirs[side] = Some(off.unscale(off.norm()));
                    match closed_alpha(p, k, t, pick, tol)? {
                        Some(a) => a,
                        None => break 'ladder,
                    }
                }
                (None, None) => break 'ladder,
            };
        }
        levels.push((s, vals[0], vals[1]));
        if levels.len() < WINDOW {
            continue;
        }
        if let Some((beta, residual, samples)) = window_fit(&levels[levels.len() - WINDOW..]) {
            let fit = AlphaFit {
                beta,
                levels: (j + 1 - WINDOW as i32, j),
                residual,
                samples,
            };
            if branch.is_none() {
                best = Some(fit);
                break;
            }
            best = Some(fit);
        }
    }
    let fit = best.ok_or_else(|| {
        HillError::FitUnstable(format!(
            "band {k} at t0={t0}: no stable power law over {} ladder levels",
            levels.len()
        ))
    })?;
    if fit.residual > FIT_RESIDUAL_MAX {
        return Err(HillError::FitUnstable(format!(
            "band {k} at t0={t0}: residual {:.3} for slope {:.3}",
            fit.residual, fit.beta
        )));
    }
    Ok(fit)
}

/// Slope and intercept of the least-squares line through (x, y).
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// The two-sided ladder t0 ± h·2^{-j}, j = 0..8.
pub fn beta_ladder(h: f64) -> Vec<f64> {
    let mut v = Vec::with_capacity(18);
    for j in 0..9 {
        let s = h * 0.5f64.powi(j);
        v.push(s);
        v.push(-s);
    }
    v
}

/// Band indices k with λ_k(t0) = μ.
pub fn meeting_bands(p: &Potential, mu: C64, t0: f64, tol: f64) -> Result<Vec<i64>> {
    let mean = p.mean();
    let r = p.perturbation_radius() * 1.02 + 1e-9;
    let kc = ((mu - mean).sqrt().re.abs() / (2.0 * PI)).round() as i64;
    let reach = 2.0 * r + 1.0 + 1e-6 * (1.0 + mu.norm());
    let mut candidates: Vec<i64> = ((-kc - 3)..=(kc + 3))
        .filter(|&n| {
            let s = (2.0 * PI * n as f64 + t0).powi(2) + mean;
            (s - mu).norm() <= reach
        })
        .collect();
    candidates.sort_unstable();
    let mut out = Vec::new();
    for n in candidates {
        let ev = spectrum::solve_eigenvalues_opt(p, t0, n, n, tol, false)?;
        if (ev[0].lambda - mu).norm() <= 1e-6 * (1.0 + mu.norm()) {
            out.push(n);
        }
    }
    Ok(out)
}

/// Skeleton record for a multiple point before classification.
pub fn record_for(p: &Potential, point: &MultiplePoint, tol: f64) -> Result<SingularityRecord> {
    let t0 = snap_t0(point.t.re);
    let indices = meeting_bands(p, point.mu, t0, tol)?;
    let geo_mult = if is_boundary(t0) {
        geometric_multiplicity(p, point.mu, t0, tol)?
    } else {
        1
    };
    let (dirichlet_flag, neumann_flag) = boundary_flags(p, point.mu, tol)?;
    Ok(SingularityRecord {
        mu: point.mu,
        t0,
        m: point.m,
        geo_mult,
        beta: None,
        beta_residual: None,
        klass: None,
        dirichlet_flag,
        neumann_flag,
        indices,
        large: false,
        ess_by_monodromy: false,
        ess_by_beta: None,
        flag: None,
    })
}

/// β → class by the exponent criterion.
fn class_from_beta(beta: f64) -> SingularityClass {
    if beta < BETA_BAND {
        SingularityClass::RegularMultiple
    } else if beta < 1.0 - BETA_BAND {
        SingularityClass::SpectralSingularity
    } else {
        SingularityClass::Ess
    }
}

/// Classify a record. `large_threshold` is the modulus above which μ counts as a
/// large eigenvalue (the monodromy criterion is then authoritative).
pub fn classify(p: &Potential, rec: &SingularityRecord, h: f64, large_threshold: f64, tol: f64) -> Result<SingularityRecord> {
    let mut out = rec.clone();
    out.large = rec.mu.norm() > large_threshold;
    out.ess_by_monodromy = is_boundary(rec.t0) && !rec.dirichlet_flag && !rec.neumann_flag;
    let branch = if rec.m == 2 && rec.geo_mult == 1 {
        Some(BranchSeed::new(p, rec.mu, tol)?)
    } else {
        None
    };
    let mut betas = Vec::new();
    let mut worst = 0.0f64;
    let mut fit_error = None;
    for &k in &rec.indices {
        match fit_alpha_exponent_adaptive(p, k, rec.t0, h, branch, tol) {
            Ok(fit) => {
                betas.push(fit.beta);
                worst = worst.max(fit.residual);
            }
            Err(e @ HillError::FitUnstable(_)) => fit_error = Some(e),
            Err(e) => return Err(e),
        }
    }
    if fit_error.is_none() && !betas.is_empty() {
        let beta = betas.iter().sum::<f64>() / betas.len() as f64;
        out.beta = Some(beta);
        out.beta_residual = Some(worst);
        out.ess_by_beta = Some(is_boundary(rec.t0) && class_from_beta(beta) == SingularityClass::Ess);
    }
    if !is_boundary(rec.t0) {
        out.klass = Some(SingularityClass::SpectralSingularity);
        return Ok(out);
    }
    if out.large {
        if out.ess_by_monodromy != (rec.geo_mult == 1) {
            return Err(HillError::InconsistentCriteria(format!(
                "μ={}: φ(1)≠0 and θ'(1)≠0 is {} but geometric multiplicity is {}",
                rec.mu, out.ess_by_monodromy, rec.geo_mult
            )));
        }
        if let Some(b) = out.ess_by_beta {
            if b != out.ess_by_monodromy {
                return Err(HillError::InconsistentCriteria(format!(
                    "μ={}: exponent criterion gives ESS={b}, monodromy criterion ESS={}",
                    rec.mu, out.ess_by_monodromy
                )));
            }
        }
        out.klass = Some(if out.ess_by_monodromy {
            SingularityClass::Ess
        } else {
            SingularityClass::RegularMultiple
        });
        return Ok(out);
    }
    if rec.geo_mult == 1 {
        out.klass = Some(SingularityClass::Ess);
        return Ok(out);
    }
    match (out.beta, fit_error) {
        (Some(b), _) => out.klass = Some(class_from_beta(b)),
        (None, Some(e)) => return Err(e),
        (None, None) => {
            return Err(HillError::FitUnstable(format!("no bands meet μ={}", rec.mu)));
        }
    }
    Ok(out)
}

/// Large-eigenvalue threshold (2π(N+1))² for the asymptotic index N(h).
pub fn large_threshold(p: &Potential, h: f64, tol: f64) -> Result<f64> {
    let w = spectrum::asymptotic_window(p, h, tol)?;
    Ok((2.0 * PI * (w.n as f64 + 1.0)).powi(2))
}

/// All multiple eigenvalues in `window`, classified. Records that cannot be
/// classified keep `klass = None` and carry the reason in `flag`.
pub fn find_singularities(p: &Potential, window: Rect, h: f64, tol: f64) -> Result<Vec<SingularityRecord>> {
    let threshold = large_threshold(p, h, tol)?;
    let points = spectrum::find_multiple_eigenvalues(p, window, tol)?;
    points
        .par_iter()
        .map(|pt| {
            let rec = record_for(p, pt, tol)?;
            match classify(p, &rec, h, threshold, tol) {
                Ok(r) => Ok(r),
                Err(e @ (HillError::FitUnstable(_) | HillError::InconsistentCriteria(_))) => {
                    let mut r = rec;
                    r.flag = Some(format!("{}: {e}", e.kind()));
                    Ok(r)
                }
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Singular quasimomenta and their bundles: for each ESS the unrolled
/// quasimomenta 2πk + t0, k ∈ 𝕋(μ), each widened to (u - h, u + h).
pub fn singular_quasimomenta(records: &[SingularityRecord], h: f64) -> Vec<SingularQuasimomentum> {
    let mut out: Vec<SingularQuasimomentum> = records
        .iter()
        .filter(|r| r.klass == Some(SingularityClass::Ess))
        .map(|r| {
            let mut us: Vec<f64> = r.indices.iter().map(|&k| 2.0 * PI * k as f64 + r.t0).collect();
            us.sort_by(f64::total_cmp);
            let value = us.iter().fold(0.0f64, |a, u| a.max(u.abs()));
            SingularQuasimomentum {
                value,
                ess_lambda: r.mu,
                indices: r.indices.clone(),
                bundle: us.iter().map(|u| (u - h, u + h)).collect(),
            }
        })
        .collect();
    out.sort_by(|a, b| a.value.total_cmp(&b.value));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfinityDiagnostic {
    pub n: Vec<i64>,
    /// min over sampled t ∈ [h, π-h] of |α_n(t)|
    pub min_alpha: Vec<f64>,
    /// slope of log min|α_n| against log n
    pub slope: f64,
    /// heuristic only: min|α_n| keeps decreasing with n
    pub suspected: bool,
}

/// Trend of min_t |α_n(t)| over a ladder of band indices.
pub fn infinity_diagnostic(p: &Potential, ns: &[i64], h: f64, tol: f64) -> Result<InfinityDiagnostic> {
    let ts: Vec<f64> = (0..9).map(|i| h + (PI - 2.0 * h) * i as f64 / 8.0).collect();
    let min_alpha = ns
        .par_iter()
        .map(|&n| {
            let mut m = f64::INFINITY;
            for &t in &ts {
                m = m.min(eigen::normalized_pair(p, n, t, tol)?.alpha.norm());
            }
            Ok(m)
        })
        .collect::<Result<Vec<f64>>>()?;
    let xs: Vec<f64> = ns.iter().map(|&n| (n.unsigned_abs() as f64).max(1.0).ln()).collect();
    let ys: Vec<f64> = min_alpha.iter().map(|a| a.max(1e-300).ln()).collect();
    let (slope, _) = least_squares(&xs, &ys);
    Ok(InfinityDiagnostic {
        n: ns.to_vec(),
        min_alpha,
        slope,
        suspected: slope < -0.5,
    })
}

/// The two-mode potential q = (γ/2)e^{2πix} - (γ/2)e^{-2πix}.
pub fn pt_potential(gamma: f64) -> Result<Potential> {
    Potential::fourier(&[(1, C64::new(0.5 * gamma, 0.0)), (-1, C64::new(-0.5 * gamma, 0.0))])
}

/// First γ on `gammas` for which the two-mode potential has a multiple point with
/// t0 ∈ [margin, π - margin] inside `window`.
pub fn search_interior_point(
    gammas: &[f64],
    window: Rect,
    margin: f64,
    tol: f64,
) -> Result<Option<(f64, Potential, MultiplePoint)>> {
    for &g in gammas {
        let p = pt_potential(g)?;
        let pts = spectrum::find_multiple_eigenvalues(&p, window, tol)?;
        if let Some(pt) = pts
            .into_iter()
            .find(|pt| pt.t.re >= margin && pt.t.re <= PI - margin && pt.t.im.abs() < 1e-9)
        {
            return Ok(Some((g, p, pt)));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gasymov() -> Potential {
        Potential::fourier(&[(1, C64::new(1.0, 0.0))]).unwrap()
    }

    #[test]
    fn free_double_point_is_semisimple() {
        let z = Potential::zero();
        let mu = C64::new(4.0 * PI * PI, 0.0);
        assert_eq!(geometric_multiplicity(&z, mu, 0.0, 1e-12).unwrap(), 2);
        let (d, n) = boundary_flags(&z, mu, 1e-12).unwrap();
        assert!(d && n);
    }

    #[test]
    fn gasymov_double_point_is_jordan() {
        let q = gasymov();
        let mu = C64::new(4.0 * PI * PI, 0.0);
        assert_eq!(geometric_multiplicity(&q, mu, 0.0, 1e-12).unwrap(), 1);
        let (d, n) = boundary_flags(&q, mu, 1e-12).unwrap();
        assert!(!d && !n);
        assert_eq!(meeting_bands(&q, mu, 0.0, 1e-12).unwrap(), vec![-1, 1]);
        let mu_pi = C64::new(PI * PI, 0.0);
        assert_eq!(meeting_bands(&q, mu_pi, PI, 1e-12).unwrap(), vec![-1, 0]);
    }

    #[test]
    fn gasymov_alpha_exponent_is_one() {
        let q = gasymov();
        let mu = C64::new(4.0 * PI * PI, 0.0);
        let seed = BranchSeed::new(&q, mu, 1e-12).unwrap();
        let fit = fit_alpha_exponent_adaptive(&q, 1, 0.0, 0.02, Some(seed), 1e-12).unwrap();
        assert!((fit.beta - 1.0).abs() < 0.1, "{fit:?}");
    }

    #[test]
    fn simple_point_alpha_exponent_is_zero() {
        let fit = fit_alpha_exponent(&gasymov(), 1, 0.4, &beta_ladder(0.02), 1e-12).unwrap();
        assert!(fit.beta.abs() < 0.1, "{fit:?}");
        let fit = fit_alpha_exponent_adaptive(&gasymov(), 1, 0.4, 0.02, None, 1e-12).unwrap();
        assert!(fit.beta.abs() < 0.1 && fit.levels.0 == 0, "{fit:?}");
    }

    #[test]
    fn gasymov_classification_and_bundles() {
        let q = gasymov();
        let recs = find_singularities(&q, Rect::new(1.0, -1.0, 170.0, 1.0), 0.02, 1e-12).unwrap();
        assert_eq!(recs.len(), 4, "{recs:?}");
        for (k, r) in recs.iter().enumerate() {
            let expect = (PI * (k + 1) as f64).powi(2);
            assert!((r.mu.re - expect).abs() < 1e-6, "{r:?}");
            assert_eq!(r.m, 2);
            assert_eq!(r.geo_mult, 1);
            assert_eq!(r.klass, Some(SingularityClass::Ess), "{r:?}");
            assert_eq!(r.ess_by_beta, Some(true), "{r:?}");
            assert!((r.beta.unwrap() - 1.0).abs() < 0.1, "{r:?}");
        }
        let sq = singular_quasimomenta(&recs, 0.02);
        assert!((sq[1].value - 2.0 * PI).abs() < 1e-12);
        assert_eq!(sq[1].bundle.len(), 2);
        assert!((sq[1].bundle[0].0 - (-2.0 * PI - 0.02)).abs() < 1e-12);
        assert!((sq[1].bundle[1].1 - (2.0 * PI + 0.02)).abs() < 1e-12);
        assert!((sq[0].value - PI).abs() < 1e-12);
    }

    #[test]
    fn even_potential_has_no_ess() {
        let q = Potential::fourier(&[(1, C64::new(1.0, 0.0)), (-1, C64::new(1.0, 0.0))]).unwrap();
        let recs = find_singularities(&q, Rect::new(1.0, -1.0, 170.0, 1.0), 0.02, 1e-12).unwrap();
        assert!(recs.iter().all(|r| r.klass != Some(SingularityClass::Ess)), "{recs:?}");
        assert!(singular_quasimomenta(&recs, 0.02).is_empty());
    }

    #[test]
    fn interior_point_is_spectral_singularity() {
        let gammas: Vec<f64> = (1..=12).map(|i| 0.5 * i as f64).collect();
        let (g, p, pt) = search_interior_point(&gammas, Rect::new(-10.0, -2.0, 60.0, 2.0), 0.2, 1e-12)
            .unwrap()
            .expect("interior point");
        assert!(g > 0.0);
        let rec = record_for(&p, &pt, 1e-12).unwrap();
        let rec = classify(&p, &rec, 0.02, f64::INFINITY, 1e-12).unwrap();
        assert_eq!(rec.klass, Some(SingularityClass::SpectralSingularity));
        let beta = rec.beta.unwrap();
        assert!((beta - 0.5).abs() < 0.1, "{rec:?}");
    }
}
