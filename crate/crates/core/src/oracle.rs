//! Independent checks built on the resolvent of L_t: the quasi-periodic Green
//! kernel, Riesz projections over circles in λ, and a truncated Fourier
//! (Galerkin) eigenproblem.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::discriminant;
use crate::error::{HillError, Result};
use crate::expansion::{unit_grid, SourceFunction};
use crate::ode::{self, FundamentalSolution};
use crate::potential::Potential;
use crate::quad;
use crate::spectrum;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
/// |Δ| below this on a contour node counts as touching the spectrum.
const POLE_GUARD: f64 = 1e-8;

fn check_grid(n: usize) -> Result<()> {
    if n < 8 {
        return Err(HillError::InvalidArgument(format!("grid of {n} points is too coarse")));
    }
    Ok(())
}

/// Coefficients (a, b) of the homogeneous correction a·θ + b·φ that makes
/// g + aθ + bφ quasi-periodic, for a particular solution whose boundary data
/// (value and derivative at 0 and 1) are given.
struct BoundarySolve {
    e: C64,
    m: [[C64; 2]; 2],
    det: C64,
}

impl BoundarySolve {
    fn new(fs: &FundamentalSolution, t: C64) -> Result<Self> {
        let e = (C64::i() * t).exp();
        let mono = fs.monodromy;
        let det = discriminant::raw_determinant(&mono, t);
        let scale = 1.0 + mono.theta.norm() + mono.phi_dx.norm() + mono.phi.norm() + mono.theta_dx.norm();
        if det.norm() <= POLE_GUARD * scale {
            return Err(HillError::ResolventPole(format!(
                "|Δ(λ,t)| = {:e} at λ={}, t={}",
                det.norm(),
                fs.lambda,
                t
            )));
        }
        Ok(BoundarySolve {
            e,
            m: [[mono.theta - e, mono.phi], [mono.theta_dx, mono.phi_dx - e]],
            det,
        })
    }

    /// Solve for (a, b) given the boundary mismatch (r1, r2) of the particular solution.
    fn solve(&self, r1: C64, r2: C64) -> (C64, C64) {
        let [[a11, a12], [a21, a22]] = self.m;
        ((r1 * a22 - a12 * r2) / self.det, (a11 * r2 - a21 * r1) / self.det)
    }
}

/// Kernel of (L_t - λ)^{-1} on a square grid of [0,1]².
///
/// G(x,ξ) = g(x,ξ) + a(ξ)θ(x) + b(ξ)φ(x) with g = ±½(θ(x)φ(ξ) - φ(x)θ(ξ)),
/// the plus sign for x > ξ. With that sign ∂G/∂x drops by 1 across x = ξ.
#[derive(Debug, Clone, Serialize)]
pub struct GreenKernel {
    pub lambda: C64,
    pub t: C64,
    pub grid: Vec<f64>,
    /// values[i][j] = G(x_i, ξ_j)
    pub values: Vec<Vec<C64>>,
    /// Δ(λ,t)
    pub determinant: C64,
}

pub fn green_kernel(p: &Potential, lambda: C64, t: C64, grid_size: usize, tol: f64) -> Result<GreenKernel> {
    check_grid(grid_size)?;
    let fs = ode::integrate_fundamental(p, lambda, grid_size, tol)?;
    let bs = BoundarySolve::new(&fs, t)?;
    let m = fs.monodromy;
    let n = grid_size;
    // a(ξ), b(ξ): the x > ξ branch must reproduce e^{it}× the x < ξ branch at the ends.
    let coeffs: Vec<(C64, C64)> = (0..n)
        .map(|j| {
            let (th, ph) = (fs.theta[j], fs.phi[j]);
            let r1 = -0.5 * (m.theta * ph - m.phi * th) - 0.5 * bs.e * ph;
            let r2 = -0.5 * (m.theta_dx * ph - m.phi_dx * th) + 0.5 * bs.e * th;
            bs.solve(r1, r2)
        })
        .collect();
    let values = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let g = 0.5 * (fs.theta[i] * fs.phi[j] - fs.phi[i] * fs.theta[j]);
                    let g = if i >= j { g } else { -g };
                    let (a, b) = coeffs[j];
                    g + a * fs.theta[i] + b * fs.phi[i]
                })
                .collect()
        })
        .collect();
    Ok(GreenKernel {
        lambda,
        t,
        grid: fs.grid.clone(),
        values,
        determinant: bs.det,
    })
}

impl GreenKernel {
    fn spacing(&self) -> f64 {
        1.0 / (self.grid.len() - 1) as f64
    }

    /// ∂G/∂x(ξ_j+, ξ_j) - ∂G/∂x(ξ_j-, ξ_j) from one-sided third-order
    /// differences on the grid. Needs 3 ≤ j ≤ n-4.
    pub fn discrete_jump(&self, j: usize) -> Option<C64> {
        let n = self.grid.len();
        if j < 3 || j + 4 > n {
            return None;
        }
        let g = |i: usize| self.values[i][j];
        let h = self.spacing();
        let right = (-11.0 * g(j) + 18.0 * g(j + 1) - 9.0 * g(j + 2) + 2.0 * g(j + 3)) / (6.0 * h);
        let left = (11.0 * g(j) - 18.0 * g(j - 1) + 9.0 * g(j - 2) - 2.0 * g(j - 3)) / (6.0 * h);
        Some(right - left)
    }

    /// max over grid points at least three cells off the diagonal of
    /// |(-∂²_x + q - λ)G| / max|G|, with a fourth-order difference in x.
    pub fn off_diagonal_residual(&self, p: &Potential) -> f64 {
        let n = self.grid.len();
        let h = self.spacing();
        let scale = self
            .values
            .iter()
            .flat_map(|r| r.iter().map(|v| v.norm()))
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 2..n - 2 {
                if i.abs_diff(j) < 3 {
                    continue;
                }
                let g = |k: usize| self.values[k][j];
                let d2 = (-g(i - 2) + 16.0 * g(i - 1) - 30.0 * g(i) + 16.0 * g(i + 1) - g(i + 2)) / (12.0 * h * h);
                let r = -d2 + (p.eval(self.grid[i]) - self.lambda) * g(i);
                worst = worst.max(r.norm() / scale);
            }
        }
        worst
    }

    /// ∫₀¹ G(x_i,ξ) v(ξ) dξ for grid values of a quasi-periodic v (same t).
    ///
    /// In ξ the kernel obeys the adjoint condition G(x,ξ+1) = e^{-it}G(x,ξ), so
    /// the integrand is 1-periodic and smooth except at ξ = x_i; it is
    /// integrated over [x_i, x_i + 1] in one piece.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let n = self.grid.len();
        let w = quad::gregory_weights(n);
        (0..n)
            .map(|i| {
                let row = &self.values[i];
                let k_at = |m: usize| if i + m < n { i + m } else { i + m + 1 - n };
                (0..n).map(|m| row[k_at(m)] * v[k_at(m)] * w[m]).sum()
            })
            .collect()
    }
}

/// Controls for contour quadrature of the resolvent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourOptions {
    pub grid_size: usize,
    pub tol: f64,
    /// successive trapezoid sums must agree to this relative sup-norm
    pub quad_tol: f64,
    pub min_points: usize,
    pub max_points: usize,
}

impl Default for ContourOptions {
    fn default() -> Self {
        ContourOptions {
            grid_size: 257,
            tol: spectrum::EIGEN_TOL,
            quad_tol: 1e-9,
            min_points: 32,
            max_points: 4096,
        }
    }
}

/// A(x,λ,t) = ∫₀¹ G(x,ξ,λ,t) f_t(ξ) dξ on the uniform grid, from a single
/// integration carrying the running integrals of θf_t and φf_t.
pub fn resolvent_apply(p: &Potential, f: &SourceFunction, lambda: C64, t: C64, grid_size: usize, tol: f64) -> Result<Vec<C64>> {
    let (fs, i_theta, i_phi) = ode::integrate_with_source(p, lambda, grid_size, tol, |x| f.gelfand_at(t, x))?;
    let bs = BoundarySolve::new(&fs, t)?;
    let m = fs.monodromy;
    let n = fs.len();
    let (t_theta, t_phi) = (i_theta[n - 1], i_phi[n - 1]);
    let r1 = -0.5 * (m.theta * t_phi - m.phi * t_theta) - 0.5 * bs.e * t_phi;
    let r2 = -0.5 * (m.theta_dx * t_phi - m.phi_dx * t_theta) + 0.5 * bs.e * t_theta;
    let (a, b) = bs.solve(r1, r2);
    Ok((0..n)
        .map(|i| {
            let g = 0.5 * (fs.theta[i] * (2.0 * i_phi[i] - t_phi) - fs.phi[i] * (2.0 * i_theta[i] - t_theta));
            g + a * fs.theta[i] + b * fs.phi[i]
        })
        .collect())
}

/// A circle in the λ-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Circle {
    pub center: C64,
    pub radius: f64,
}

/// -(1/2πi)∮ A dλ over a circle, evaluated with the trapezoid rule and
/// doubled until successive sums agree.
#[derive(Debug, Clone, Serialize)]
pub struct RieszIntegral {
    pub circle: Circle,
    pub grid: Vec<f64>,
    pub profile: Vec<C64>,
    pub quadrature_points: usize,
    /// number of eigenvalues enclosed (winding of F - 2cos t)
    pub enclosed: i64,
    /// max |profile|
    pub bound: f64,
}

fn sup(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn enclosed_count(p: &Potential, circle: Circle, t: C64, tol: f64) -> Result<Option<i64>> {
    let target = 2.0 * t.cos();
    let mut g = |z: C64| -> Result<C64> { Ok(ode::monodromy(p, z, tol)?.trace() - target) };
    crate::roots::winding_on_circle(&mut g, circle.center, circle.radius, 64)
}

fn riesz_on_circle(p: &Potential, f: &SourceFunction, t: C64, circle: Circle, opts: &ContourOptions) -> Result<RieszIntegral> {
    let node = |k: usize, m: usize| -> Result<(C64, Vec<C64>)> {
        let e = C64::from_polar(1.0, 2.0 * PI * k as f64 / m as f64);
        let a = resolvent_apply(p, f, circle.center + circle.radius * e, t, opts.grid_size, opts.tol)?;
        Ok((e, a))
    };
    // running Σ A(λ_k) e^{iθ_k}; the integral is -(R/M)·sum
    let mut m = opts.min_points.max(4);
    let terms: Vec<(C64, Vec<C64>)> = (0..m).into_par_iter().map(|k| node(k, m)).collect::<Result<_>>()?;
    let mut sum = vec![ZERO; opts.grid_size];
    for (e, a) in &terms {
        for (s, v) in sum.iter_mut().zip(a) {
            *s += v * e;
        }
    }
    let finish = |sum: &[C64], m: usize| -> Vec<C64> { sum.iter().map(|s| -s * (circle.radius / m as f64)).collect() };
    let mut current = finish(&sum, m);
    loop {
        if 2 * m > opts.max_points {
            return Err(HillError::ToleranceNotMet(format!(
                "trapezoid rule on |λ - {}| = {} not converged with {m} points",
                circle.center, circle.radius
            )));
        }
        let odd: Vec<(C64, Vec<C64>)> = (0..m)
            .into_par_iter()
            .map(|k| node(2 * k + 1, 2 * m))
            .collect::<Result<_>>()?;
        for (e, a) in &odd {
            for (s, v) in sum.iter_mut().zip(a) {
                *s += v * e;
            }
        }
        m *= 2;
        let next = finish(&sum, m);
        let diff: Vec<C64> = next.iter().zip(&current).map(|(a, b)| a - b).collect();
        let done = sup(&diff) <= opts.quad_tol * sup(&next) + 1e-300;
        current = next;
        if done {
            break;
        }
    }
    Ok(RieszIntegral {
        circle,
        grid: unit_grid(opts.grid_size),
        bound: sup(&current),
        profile: current,
        quadrature_points: m,
        enclosed: 0,
    })
}

/// Try the circle, then twice and half its radius, until it encloses
/// `expected` eigenvalues and the quadrature stays off the spectrum.
fn riesz_adaptive(
    p: &Potential,
    f: &SourceFunction,
    t: C64,
    circle: Circle,
    expected: i64,
    opts: &ContourOptions,
) -> Result<RieszIntegral> {
    let mut last = None;
    for factor in [1.0, 2.0, 0.5] {
        let c = Circle {
            center: circle.center,
            radius: circle.radius * factor,
        };
        match enclosed_count(p, c, t, opts.tol)? {
            Some(w) if w == expected => {}
            other => {
                last = Some(HillError::ResolventPole(format!(
                    "circle |λ - {}| = {} encloses {other:?} eigenvalues at t={t}, expected {expected}",
                    c.center, c.radius
                )));
                continue;
            }
        }
        match riesz_on_circle(p, f, t, c, opts) {
            Ok(mut r) => {
                r.enclosed = expected;
                return Ok(r);
            }
            Err(e @ HillError::ResolventPole(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| HillError::ResolventPole(format!("no admissible circle at t={t}"))))
}

/// T_n(x,t): the Riesz projection of f_t onto the two eigenvalues inside C(n).
#[derive(Debug, Clone, Serialize)]
pub struct TotalProjectionSample {
    pub n: i64,
    pub t: C64,
    pub grid: Vec<f64>,
    pub profile: Vec<C64>,
    pub circle: Circle,
    pub quadrature_points: usize,
    pub bound: f64,
}

fn check_h(h: f64) -> Result<()> {
    if !(h > 0.0 && h < 1.0 / (15.0 * PI)) {
        return Err(HillError::InvalidArgument(format!("h={h} outside (0, 1/(15π))")));
    }
    Ok(())
}

/// T_n(·,t) = -(1/2πi)∮_{C(n)} A(·,λ,t) dλ, C(n) the circle of radius 2n about
/// (2nπ)² + q̂₀. Requires n ≥ 1. |t| may exceed h as long as some circle
/// of radius 2n, 4n or n encloses exactly the two eigenvalues.
pub fn total_projection(
    p: &Potential,
    f: &SourceFunction,
    n: i64,
    t: C64,
    h: f64,
    opts: &ContourOptions,
) -> Result<TotalProjectionSample> {
    check_h(h)?;
    check_grid(opts.grid_size)?;
    if n < 1 {
        return Err(HillError::InvalidArgument(format!("C(n) needs n ≥ 1, got {n}")));
    }
    let nf = n as f64;
    let circle = Circle {
        center: C64::new((2.0 * nf * PI).powi(2), 0.0) + p.mean(),
        radius: 2.0 * nf,
    };
    let r = riesz_adaptive(p, f, t, circle, 2, opts)?;
    Ok(TotalProjectionSample {
        n,
        t,
        grid: r.grid,
        profile: r.profile,
        circle: r.circle,
        quadrature_points: r.quadrature_points,
        bound: r.bound,
    })
}

/// Both sides of ∫T_n dt along [-h,h] and along the upper half circle |t| = h.
#[derive(Debug, Clone, Serialize)]
pub struct DeformationCheck {
    pub n: i64,
    pub h: f64,
    pub segment: Vec<C64>,
    pub arc: Vec<C64>,
    pub relative_defect: f64,
}

pub fn contour_deformation_check(
    p: &Potential,
    f: &SourceFunction,
    n: i64,
    h: f64,
    nodes: usize,
    opts: &ContourOptions,
) -> Result<DeformationCheck> {
    let gl = quad::gauss_legendre_on(nodes, 0.0, 1.0);
    let accumulate = |path: &dyn Fn(f64) -> (C64, C64)| -> Result<Vec<C64>> {
        let parts: Vec<Vec<C64>> = gl
            .iter()
            .map(|&(s, w)| {
                let (t, dt) = path(s);
                let tp = total_projection(p, f, n, t, h, opts)?;
                Ok(tp.profile.iter().map(|v| v * dt * w).collect())
            })
            .collect::<Result<_>>()?;
        let mut out = vec![ZERO; opts.grid_size];
        for v in &parts {
            for (o, x) in out.iter_mut().zip(v) {
                *o += x;
            }
        }
        Ok(out)
    };
    let segment = accumulate(&|s| (C64::new(-h + 2.0 * h * s, 0.0), C64::new(2.0 * h, 0.0)))?;
    // t = h e^{iθ}, θ from π down to 0
    let arc = accumulate(&|s| {
        let e = C64::from_polar(1.0, PI * (1.0 - s));
        (h * e, -C64::i() * h * e * PI)
    })?;
    let w = quad::gregory_weights(opts.grid_size);
    let diff: Vec<C64> = segment.iter().zip(&arc).map(|(a, b)| a - b).collect();
    let relative_defect = quad::norm(&w, &diff) / quad::norm(&w, &segment).max(f64::MIN_POSITIVE);
    Ok(DeformationCheck {
        n,
        h,
        segment,
        arc,
        relative_defect,
    })
}

/// S_N(x,t): the Riesz projection onto the eigenvalues of the bands |n| ≤ N.
#[derive(Debug, Clone, Serialize)]
pub struct PartialSum {
    pub n_cut: i64,
    pub t: C64,
    pub grid: Vec<f64>,
    pub profile: Vec<C64>,
    pub circle: Circle,
    pub quadrature_points: usize,
    pub bound: f64,
}

/// S_N(·,t) with N = N(h) taken from the asymptotic window.
pub fn partial_sum_s_n(p: &Potential, f: &SourceFunction, t: C64, h: f64, opts: &ContourOptions) -> Result<PartialSum> {
    check_h(h)?;
    let w = spectrum::asymptotic_window(p, h, opts.tol)?;
    partial_sum_over(p, f, t, w.n, h, opts)
}

/// S_N(·,t) for an explicit cut N. The contour is a circle through the
/// midpoints of the gaps below band 0 and above band ±N.
pub fn partial_sum_over(
    p: &Potential,
    f: &SourceFunction,
    t: C64,
    n_cut: i64,
    h: f64,
    opts: &ContourOptions,
) -> Result<PartialSum> {
    check_h(h)?;
    check_grid(opts.grid_size)?;
    if n_cut < 0 {
        return Err(HillError::InvalidArgument(format!("N={n_cut} must be nonnegative")));
    }
    if t.norm() > h * (1.0 + 1e-12) {
        return Err(HillError::InvalidArgument(format!("|t|={} exceeds h={h}", t.norm())));
    }
    let nf = n_cut as f64;
    let top = (2.0 * PI * nf + h).powi(2);
    let margin = 0.5 * ((2.0 * PI * (nf + 1.0) - h).powi(2) - top);
    let mean = p.mean();
    let lo = mean.re - p.perturbation_radius() - margin;
    let hi = mean.re + top + margin;
    let circle = Circle {
        center: C64::new(0.5 * (lo + hi), mean.im),
        radius: 0.5 * (hi - lo),
    };
    let r = riesz_adaptive(p, f, t, circle, 2 * n_cut + 1, opts)?;
    Ok(PartialSum {
        n_cut,
        t,
        grid: r.grid,
        profile: r.profile,
        circle: r.circle,
        quadrature_points: r.quadrature_points,
        bound: r.bound,
    })
}

/// One eigenpair of the truncated Fourier matrix.
#[derive(Debug, Clone, Serialize)]
pub struct GalerkinMode {
    /// band label from the nearest unperturbed seed (2πn+t)² + q̂₀
    pub n: i64,
    pub lambda: C64,
    /// c_k for k = -K..=K, unit Euclidean norm
    pub coefficients: Vec<C64>,
    /// false within K/4 of the truncation edge
    pub reliable: bool,
}

impl GalerkinMode {
    /// Σ c_k e^{i(2πk+t)x}.
    pub fn profile(&self, t: C64, grid: &[f64]) -> Vec<C64> {
        let k_max = (self.coefficients.len() as i64 - 1) / 2;
        grid.iter()
            .map(|&x| {
                self.coefficients
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c * (C64::i() * ((2.0 * PI * (i as i64 - k_max) as f64 + t) * x)).exp())
                    .sum()
            })
            .collect()
    }
}

/// Eigenpairs of H_{jk} = (2πk+t)²δ_{jk} + q̂_{j-k}, |j|,|k| ≤ K, labelled by
/// greedy matching to the seeds and sorted by label.
pub fn galerkin_eigensolve(p: &Potential, t: C64, basis_size: usize) -> Result<Vec<GalerkinMode>> {
    let k_max = basis_size as i64;
    let dim = 2 * basis_size + 1;
    let qhat: Vec<C64> = (-2 * k_max..=2 * k_max).map(|k| p.coefficient(k)).collect();
    let q = |k: i64| qhat[(k + 2 * k_max) as usize];
    let h = DMatrix::from_fn(dim, dim, |j, k| {
        let (jj, kk) = (j as i64 - k_max, k as i64 - k_max);
        let mut v = q(jj - kk);
        if j == k {
            v += (2.0 * PI * kk as f64 + t).powi(2);
        }
        v
    });
    let scale = h.iter().map(|v| v.norm()).fold(1.0, f64::max);
    let eig = h
        .clone()
        .schur()
        .eigenvalues()
        .ok_or_else(|| HillError::ToleranceNotMet("Schur decomposition did not converge".into()))?;
    let mut lambdas: Vec<C64> = eig.iter().copied().collect();
    lambdas.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));

    // seeds in order of increasing |seed - q̂₀| claim their nearest eigenvalue
    let mean = q(0);
    let mut seeds: Vec<(i64, C64)> = (-k_max..=k_max).map(|n| (n, (2.0 * PI * n as f64 + t).powi(2) + mean)).collect();
    seeds.sort_by(|a, b| (a.1 - mean).norm().total_cmp(&(b.1 - mean).norm()).then(a.0.cmp(&b.0)));
    let mut taken = vec![false; dim];
    let mut modes = Vec::with_capacity(dim);
    for (n, s) in seeds {
        let mut best = None;
        for (i, l) in lambdas.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let d = (l - s).norm();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        let Some((i, _)) = best else { break };
        taken[i] = true;
        let lambda = lambdas[i];
        modes.push(GalerkinMode {
            n,
            lambda,
            coefficients: inverse_iteration(&h, lambda, scale),
            reliable: n.abs() <= k_max - (k_max / 4).max(1),
        });
    }
    modes.sort_by_key(|m| m.n);
    Ok(modes)
}

/// An eigenvector for the (approximate) eigenvalue `lambda`.
fn inverse_iteration(h: &DMatrix<C64>, lambda: C64, scale: f64) -> Vec<C64> {
    let dim = h.nrows();
    let shift = lambda + C64::new(1e-10 * scale, 1e-10 * scale);
    let mut a = h.clone();
    for i in 0..dim {
        a[(i, i)] -= shift;
    }
    let lu = a.lu();
    let mut v = nalgebra::DVector::from_fn(dim, |i, _| C64::new(1.0, 0.1 * i as f64 / dim as f64));
    for _ in 0..3 {
        match lu.solve(&v) {
            Some(w) => {
                let nrm = w.norm();
                if !(nrm.is_finite() && nrm > 0.0) {
                    break;
                }
                v = w / C64::new(nrm, 0.0);
            }
            None => break,
        }
    }
    // fix the phase: largest component real and positive
    let (imax, _) = v.iter().enumerate().fold((0, 0.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
    let phase = v[imax].conj() / v[imax].norm();
    v.iter().map(|z| z * phase).collect()
}
