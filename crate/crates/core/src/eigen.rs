//! Bloch eigenfunctions Φ_t, G_t, the normalized pair (Ψ, Ψ*), the scalar α_n(t)
//! and the spectral projection of a quasi-periodic function onto one band.

use num_complex::Complex64 as C64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{HillError, Result};
use crate::ode::{self, FundamentalSolution};
use crate::potential::Potential;
use crate::quad;
use crate::spectrum::{self, EIGEN_TOL};

/// Grid size resolving e^{i sqrt(λ) x} on [0,1] with at least eight points per radian
/// (never below 513).
pub fn profile_grid(lambda: C64) -> usize {
    let k = lambda.sqrt().norm().max(1.0);
    let want = (8.0 * k).max(512.0);
    (want.log2().ceil().exp2() as usize) + 1
}

fn expit(t: C64) -> C64 {
    (C64::i() * t).exp()
}

/// Φ_t(x,λ) = φθ(x) + (e^{it} - θ)φ(x), with unsubscripted values at x=1.
pub fn phi_eigenfunction(fs: &FundamentalSolution, t: C64) -> Vec<C64> {
    let m = fs.monodromy;
    let c = expit(t) - m.theta;
    fs.theta
        .iter()
        .zip(&fs.phi)
        .map(|(th, ph)| m.phi * th + c * ph)
        .collect()
}

/// G_t(x,λ) = θ'φ(x) + (e^{it} - φ')θ(x).
pub fn g_eigenfunction(fs: &FundamentalSolution, t: C64) -> Vec<C64> {
    let m = fs.monodromy;
    let c = expit(t) - m.phi_dx;
    fs.theta
        .iter()
        .zip(&fs.phi)
        .map(|(th, ph)| m.theta_dx * ph + c * th)
        .collect()
}

/// Φ_± = φθ(x) + ½(φ' - θ ± i p)φ(x) for a given p = sqrt(4 - F²).
pub fn phi_pm(fs: &FundamentalSolution, p: C64, sign: f64) -> Vec<C64> {
    let m = fs.monodromy;
    let c = 0.5 * (m.phi_dx - m.theta + C64::i() * p * sign);
    fs.theta
        .iter()
        .zip(&fs.phi)
        .map(|(th, ph)| m.phi * th + c * ph)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EigenForm {
    Phi,
    G,
}

/// Size below which an eigenfunction candidate counts as the zero profile.
fn vanishing(norm: f64, parts: f64) -> bool {
    norm <= 1e-9 * parts.max(1e-300)
}

// Typical sizes: φ(1) ~ 1/κ and θ'(1) ~ κ with κ = sqrt(1+|λ|); the monodromy
// coefficients of Φ_t and G_t are measured against these.
fn parts_phi(fs: &FundamentalSolution, w: &[f64], _t: C64) -> f64 {
    let kappa = (1.0 + fs.lambda.norm()).sqrt();
    quad::norm(w, &fs.theta) / kappa + quad::norm(w, &fs.phi)
}

fn parts_g(fs: &FundamentalSolution, w: &[f64], _t: C64) -> f64 {
    let kappa = (1.0 + fs.lambda.norm()).sqrt();
    kappa * quad::norm(w, &fs.phi) + quad::norm(w, &fs.theta)
}

/// Eigenfunctions at t and -t from one fundamental solution, in a common form.
#[derive(Debug, Clone)]
pub struct BlochProjector {
    pub form: EigenForm,
    pub t: C64,
    /// eigenfunction at quasimomentum t
    pub u: Vec<C64>,
    /// eigenfunction at quasimomentum -t (the transposed problem)
    pub w: Vec<C64>,
    /// ∫₀¹ u w dx
    pub uw: C64,
    pub weights: Vec<f64>,
}

impl BlochProjector {
    /// Picks the Φ or G form, whichever has the larger smaller-norm of the ±t pair.
    pub fn new(fs: &FundamentalSolution, t: C64) -> Result<Self> {
        let weights = quad::gregory_weights(fs.len());
        let (pu, pw) = (phi_eigenfunction(fs, t), phi_eigenfunction(fs, -t));
        let (gu, gw) = (g_eigenfunction(fs, t), g_eigenfunction(fs, -t));
        let phi_min = quad::norm(&weights, &pu).min(quad::norm(&weights, &pw));
        let g_min = quad::norm(&weights, &gu).min(quad::norm(&weights, &gw));
        let phi_parts = parts_phi(fs, &weights, t).max(parts_phi(fs, &weights, -t));
        let g_parts = parts_g(fs, &weights, t).max(parts_g(fs, &weights, -t));
        let phi_ok = !vanishing(phi_min, phi_parts);
        let g_ok = !vanishing(g_min, g_parts);
        let (form, u, w) = match (phi_ok, g_ok) {
            (false, false) => {
                return Err(HillError::DegenerateAtBoundary(format!(
                    "both eigenfunction forms vanish at λ={}, t={}",
                    fs.lambda, t
                )))
            }
            (true, false) => (EigenForm::Phi, pu, pw),
            (false, true) => (EigenForm::G, gu, gw),
            (true, true) => {
                if phi_min / phi_parts >= g_min / g_parts {
                    (EigenForm::Phi, pu, pw)
                } else {
                    (EigenForm::G, gu, gw)
                }
            }
        };
        let uw = quad::bilinear(&weights, &u, &w);
        Ok(BlochProjector {
            form,
            t,
            u,
            w,
            uw,
            weights,
        })
    }

    /// Coefficient c with projection c·u of `f_t` (a profile at quasimomentum t).
    pub fn coefficient(&self, f_t: &[C64]) -> Result<C64> {
        if self.uw.norm() == 0.0 {
            return Err(HillError::AlphaZero(format!("t={}", self.t)));
        }
        Ok(quad::bilinear(&self.weights, f_t, &self.w) / self.uw)
    }

    /// Coefficient for the companion quasimomentum -t (profile `f_mt`).
    pub fn coefficient_mirror(&self, f_mt: &[C64]) -> Result<C64> {
        if self.uw.norm() == 0.0 {
            return Err(HillError::AlphaZero(format!("t={}", -self.t)));
        }
        Ok(quad::bilinear(&self.weights, f_mt, &self.u) / self.uw)
    }

    /// a_n(t)Ψ_{n,t} for the profile `f_t`.
    pub fn project(&self, f_t: &[C64]) -> Result<Vec<C64>> {
        let c = self.coefficient(f_t)?;
        Ok(self.u.iter().map(|v| v * c).collect())
    }

    /// a_n(-t)Ψ_{n,-t} for the profile `f_mt` at quasimomentum -t.
    pub fn project_mirror(&self, f_mt: &[C64]) -> Result<Vec<C64>> {
        let c = self.coefficient_mirror(f_mt)?;
        Ok(self.w.iter().map(|v| v * c).collect())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenfunctionPair {
    pub n: i64,
    pub t: f64,
    pub lambda: C64,
    pub form: EigenForm,
    pub psi: Vec<C64>,
    pub psi_star: Vec<C64>,
    /// (Ψ, Ψ*) by quadrature
    pub alpha: C64,
    pub alpha_phi: Option<C64>,
    pub alpha_g: Option<C64>,
    pub alpha_pm: Option<C64>,
    /// max pairwise deviation of the available α values
    pub formula_spread: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaVariant {
    Phi,
    G,
    Pm,
}

/// Phase e^{-i arg c} of the largest Fourier coefficient c of `u` against
/// e^{i(2πk+Re t)x}, |k - n| ≤ 16; multiplying by it makes that coefficient real positive.
fn phase_factor(w: &[f64], grid: &[f64], u: &[C64], n: i64, t: f64) -> C64 {
    let mut best = C64::new(0.0, 0.0);
    for k in (n - 16)..=(n + 16) {
        let kk = 2.0 * PI * k as f64 + t;
        let c: C64 = u
            .iter()
            .zip(grid)
            .zip(w)
            .map(|((v, x), wi)| v * C64::from_polar(*wi, -kk * x))
            .sum();
        if c.norm() > best.norm() * (1.0 + 1e-12) {
            best = c;
        }
    }
    if best.norm() == 0.0 {
        C64::new(1.0, 0.0)
    } else {
        best.conj() / best.norm()
    }
}

struct Normalized {
    psi: Vec<C64>,
    psi_star: Vec<C64>,
    /// α of the natural (unphased) pair times the phase correction
    phase: C64,
}

/// Ψ = u/‖u‖, Ψ* = conj(w)/‖w‖, each rotated to the Fourier phase convention.
fn normalize(wts: &[f64], grid: &[f64], u: &[C64], w: &[C64], n: i64, t: f64) -> Normalized {
    let nu = quad::norm(wts, u);
    let nw = quad::norm(wts, w);
    let psi0: Vec<C64> = u.iter().map(|v| v / nu).collect();
    let star0: Vec<C64> = w.iter().map(|v| v.conj() / nw).collect();
    let a = phase_factor(wts, grid, &psi0, n, t);
    let b = phase_factor(wts, grid, &star0, n, t);
    Normalized {
        psi: psi0.iter().map(|v| v * a).collect(),
        psi_star: star0.iter().map(|v| v * b).collect(),
        phase: a * b.conj(),
    }
}

/// Normalized pair and α for an eigenvalue already known together with its
/// fundamental solution and F'(λ).
pub fn pair_from_solution(fs: &FundamentalSolution, n: i64, t: f64, fprime: C64) -> Result<EigenfunctionPair> {
    let tc = C64::new(t, 0.0);
    let proj = BlochProjector::new(fs, tc)?;
    let wts = &proj.weights;
    let grid = &fs.grid;
    let base = normalize(wts, grid, &proj.u, &proj.w, n, t);
    let alpha = quad::inner(wts, &base.psi, &base.psi_star);
    let m = fs.monodromy;
    let mut variants = Vec::new();
    let closed = |u: Vec<C64>, w: Vec<C64>, num: C64, parts: f64| -> Option<C64> {
        let nu = quad::norm(wts, &u);
        let nw = quad::norm(wts, &w);
        if vanishing(nu.min(nw), parts) {
            return None;
        }
        let nrm = normalize(wts, grid, &u, &w, n, t);
        Some(nrm.phase * num / (nu * nw))
    };
    let phi_parts = parts_phi(fs, wts, tc).max(parts_phi(fs, wts, -tc));
    let alpha_phi = closed(
        phi_eigenfunction(fs, tc),
        phi_eigenfunction(fs, -tc),
        -m.phi * fprime,
        phi_parts,
    );
    let g_parts = parts_g(fs, wts, tc).max(parts_g(fs, wts, -tc));
    let alpha_g = closed(
        g_eigenfunction(fs, tc),
        g_eigenfunction(fs, -tc),
        // ∫G_tG_{-t} = +θ'F' (G_t = ((e^{it}-φ')/φ)Φ_t); the opposite sign only flips the phase
        m.theta_dx * fprime,
        g_parts,
    );
    // Φ_± with p from F; the sign matching e^{it} selects which one is Φ_t
    let f = m.trace();
    let p = (C64::new(4.0, 0.0) - f * f).sqrt();
    let plus = phi_pm(fs, p, 1.0);
    let minus = phi_pm(fs, p, -1.0);
    let phi_t = phi_eigenfunction(fs, tc);
    let d_plus: f64 = plus.iter().zip(&phi_t).map(|(a, b)| (a - b).norm_sqr()).sum();
    let d_minus: f64 = minus.iter().zip(&phi_t).map(|(a, b)| (a - b).norm_sqr()).sum();
    let (pu, pw) = if d_plus <= d_minus { (plus, minus) } else { (minus, plus) };
    let alpha_pm = closed(pu, pw, -m.phi * fprime, phi_parts);
    for v in [alpha_phi, alpha_g, alpha_pm].into_iter().flatten() {
        variants.push(v);
    }
    variants.push(alpha);
    let mut spread: f64 = 0.0;
    for i in 0..variants.len() {
        for j in (i + 1)..variants.len() {
            spread = spread.max((variants[i] - variants[j]).norm());
        }
    }
    Ok(EigenfunctionPair {
        n,
        t,
        lambda: fs.lambda,
        form: proj.form,
        psi: base.psi,
        psi_star: base.psi_star,
        alpha,
        alpha_phi,
        alpha_g,
        alpha_pm,
        formula_spread: spread,
    })
}

/// Normalized eigenfunction pair of band n at real t on the grid chosen by [`profile_grid`].
pub fn normalized_pair(p: &Potential, n: i64, t: f64, tol: f64) -> Result<EigenfunctionPair> {
    let ev = spectrum::solve_eigenvalues_opt(p, t, n, n, tol.min(EIGEN_TOL), false)?;
    let lambda = ev[0].lambda;
    normalized_pair_at(p, n, t, lambda, profile_grid(lambda), tol)
}

/// As [`normalized_pair`] for a known eigenvalue and an explicit grid size.
pub fn normalized_pair_at(
    p: &Potential,
    n: i64,
    t: f64,
    lambda: C64,
    grid: usize,
    tol: f64,
) -> Result<EigenfunctionPair> {
    let fs = ode::integrate_fundamental_jet(p, lambda, grid, tol)?;
    let fprime = fs.monodromy_dlambda.expect("jet").trace();
    pair_from_solution(&fs, n, t, fprime)
}

/// α_n(t) from one closed formula; `ZeroDenominator` if that formula is unusable.
pub fn alpha_closed_form(p: &Potential, n: i64, t: f64, variant: AlphaVariant, tol: f64) -> Result<C64> {
    let pair = normalized_pair(p, n, t, tol)?;
    let v = match variant {
        AlphaVariant::Phi => pair.alpha_phi,
        AlphaVariant::G => pair.alpha_g,
        AlphaVariant::Pm => pair.alpha_pm,
    };
    v.ok_or_else(|| HillError::ZeroDenominator(format!("{variant:?} formula at n={n}, t={t}")))
}

/// X_{n,t} = Ψ*_{n,t} / conj(α_n(t)).
pub fn biorthogonal(pair: &EigenfunctionPair) -> Result<Vec<C64>> {
    if pair.alpha.norm() == 0.0 {
        return Err(HillError::AlphaZero(format!("n={}, t={}", pair.n, pair.t)));
    }
    let c = pair.alpha.conj();
    Ok(pair.psi_star.iter().map(|v| v / c).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn free_pair_is_orthonormal_exponential() {
        let z = Potential::zero();
        let pair = normalized_pair(&z, 2, 0.5, 1e-12).unwrap();
        assert!((pair.alpha - 1.0).norm() < 1e-9, "{}", pair.alpha);
        for a in [pair.alpha_phi, pair.alpha_g, pair.alpha_pm] {
            assert!((a.unwrap() - 1.0).norm() < 1e-8);
        }
        let k = 4.0 * PI + 0.5;
        let grid = profile_grid(pair.lambda);
        let h = 1.0 / (grid - 1) as f64;
        for (i, v) in pair.psi.iter().enumerate() {
            let x = i as f64 * h;
            assert!((v - C64::from_polar(1.0, k * x)).norm() < 1e-8);
        }
    }

    #[test]
    fn free_boundary_point_is_degenerate() {
        let z = Potential::zero();
        let lam = c(4.0 * PI * PI, 0.0);
        let fs = ode::integrate_fundamental(&z, lam, 513, 1e-12).unwrap();
        assert!(BlochProjector::new(&fs, c(0.0, 0.0)).is_err());
    }

    #[test]
    fn mathieu_alpha_is_one() {
        let q = Potential::fourier(&[(1, c(1.0, 0.0)), (-1, c(1.0, 0.0))]).unwrap();
        for (n, t) in [(0, 0.7), (1, 2.0), (-2, 1.1)] {
            let pair = normalized_pair(&q, n, t, 1e-12).unwrap();
            assert!((pair.alpha - 1.0).norm() < 1e-8, "{n} {t} {}", pair.alpha);
            assert!(pair.formula_spread < 1e-7, "{}", pair.formula_spread);
        }
    }

    #[test]
    fn complex_forms_are_collinear_and_formulas_agree() {
        let q = Potential::fourier(&[(1, c(0.5, 0.5)), (-1, c(0.1, 0.0)), (2, c(0.0, -0.3))]).unwrap();
        let ev = spectrum::solve_eigenvalues(&q, 0.7, 1, 1, EIGEN_TOL).unwrap();
        let fs = ode::integrate_fundamental(&q, ev[0].lambda, 1025, 1e-12).unwrap();
        let w = quad::gregory_weights(fs.len());
        let u = phi_eigenfunction(&fs, c(0.7, 0.0));
        let v = g_eigenfunction(&fs, c(0.7, 0.0));
        let ip = quad::inner(&w, &u, &v).norm();
        let prod = quad::norm(&w, &u) * quad::norm(&w, &v);
        assert!((ip - prod).abs() <= 1e-8 * prod);
        let pair = normalized_pair(&q, 1, 0.7, 1e-12).unwrap();
        assert!(pair.formula_spread < 1e-7, "{pair:?}");
        let wp = quad::gregory_weights(pair.psi.len());
        assert!((quad::norm(&wp, &pair.psi) - 1.0).abs() < 1e-10);
        assert!((quad::norm(&wp, &pair.psi_star) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn projector_reproduces_eigenfunctions() {
        let q = Potential::fourier(&[(1, c(0.5, 0.5)), (-1, c(0.1, 0.0))]).unwrap();
        let t = 1.3;
        let a = normalized_pair(&q, -1, t, 1e-12).unwrap();
        let lam_b = spectrum::solve_eigenvalues(&q, t, 2, 2, EIGEN_TOL).unwrap()[0].lambda;
        let b = normalized_pair_at(&q, 2, t, lam_b, a.psi.len(), 1e-12).unwrap();
        let fs = ode::integrate_fundamental(&q, a.lambda, a.psi.len(), 1e-12).unwrap();
        let proj = BlochProjector::new(&fs, c(t, 0.0)).unwrap();
        let w = &proj.weights;
        let same = proj.project(&a.psi).unwrap();
        let diff: Vec<C64> = same.iter().zip(&a.psi).map(|(x, y)| x - y).collect();
        assert!(quad::norm(w, &diff) < 1e-9);
        let other = proj.project(&b.psi).unwrap();
        assert!(quad::norm(w, &other) < 1e-8);
        let x = biorthogonal(&a).unwrap();
        assert!((quad::inner(w, &a.psi, &x) - 1.0).norm() < 1e-9);
        assert!(quad::inner(w, &b.psi, &x).norm() < 1e-8);
    }
}
