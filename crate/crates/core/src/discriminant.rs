//! Hill discriminant F(λ), its derivative, the characteristic determinant and p(λ).

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{HillError, Result};
use crate::ode::{self, FundamentalSolution, Monodromy};
use crate::potential::Potential;
use crate::quad;

/// Grid used when F' is evaluated by quadrature.
pub const DERIVATIVE_GRID: usize = 513;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DiscriminantValue {
    pub lambda: C64,
    #[serde(rename = "F")]
    pub f: C64,
    /// F' from the variational system.
    #[serde(rename = "Fprime")]
    pub fprime: C64,
    /// F' from the product integral of the fundamental solutions.
    #[serde(rename = "Fprime_integral")]
    pub fprime_integral: C64,
    /// Relative disagreement of the two F' values.
    pub fprime_spread: f64,
    /// sqrt(4 - F²) on the principal branch (callers needing continuity use [`p_branch`]).
    pub p: C64,
}

/// F(λ) with F' computed two ways.
pub fn hill_discriminant(p: &Potential, lambda: C64, tol: f64) -> Result<DiscriminantValue> {
    let fs = ode::integrate_fundamental_jet(p, lambda, DERIVATIVE_GRID, tol)?;
    let f = fs.monodromy.trace();
    let fprime = fs.monodromy_dlambda.expect("jet integration").trace();
    let fprime_integral = discriminant_derivative(&fs);
    let fprime_spread = relative_gap(fprime, fprime_integral);
    Ok(DiscriminantValue {
        lambda,
        f,
        fprime,
        fprime_integral,
        fprime_spread,
        p: (C64::new(4.0, 0.0) - f * f).sqrt(),
    })
}

pub(crate) fn relative_gap(a: C64, b: C64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

/// F'(λ) = ∫₀¹ θ'φ(x)² + (θ - φ')θ(x)φ(x) - φθ(x)² dx, with unsubscripted values at x=1.
pub fn discriminant_derivative(fs: &FundamentalSolution) -> C64 {
    let w = quad::gregory_weights(fs.len());
    let m = fs.monodromy;
    let a = m.theta_dx;
    let b = m.theta - m.phi_dx;
    let c = m.phi;
    (0..fs.len())
        .map(|i| {
            let (th, ph) = (fs.theta[i], fs.phi[i]);
            (a * ph * ph + b * th * ph - c * th * th) * w[i]
        })
        .sum()
}

/// e^{2it} - F e^{it} + 1, the determinant of (M - e^{it} I) for unit Wronskian.
pub fn characteristic_determinant(f: C64, t: C64) -> C64 {
    let e = (C64::i() * t).exp();
    e * e - f * e + 1.0
}

/// det [[θ - e^{it}, φ], [θ', φ' - e^{it}]] from the raw monodromy entries.
pub fn raw_determinant(m: &Monodromy, t: C64) -> C64 {
    let e = (C64::i() * t).exp();
    (m.theta - e) * (m.phi_dx - e) - m.phi * m.theta_dx
}

/// arccos with real part in [0,π] and, where a choice exists, nonnegative imaginary part.
pub fn arccos_branch(w: C64) -> C64 {
    let t = w.acos();
    let (re, im) = (t.re, t.im);
    let on_edge = re.abs() < 1e-300 || (re - std::f64::consts::PI).abs() < 1e-300;
    if im < 0.0 && on_edge {
        C64::new(re, -im)
    } else {
        t
    }
}

/// sqrt(4 - F²) continued along a path of F values. The start is anchored at
/// 2 sin(arccos(F/2)).
pub fn p_branch(f_path: &[C64]) -> Result<Vec<C64>> {
    let mut out: Vec<C64> = Vec::with_capacity(f_path.len());
    for (k, f) in f_path.iter().enumerate() {
        if k > 0 && (f - f_path[k - 1]).norm() >= 0.5 {
            return Err(HillError::BranchAmbiguity(k));
        }
        let s = (C64::new(4.0, 0.0) - f * f).sqrt();
        if k == 0 {
            out.push(2.0 * arccos_branch(f / 2.0).sin());
            continue;
        }
        let pred = if k >= 2 {
            2.0 * out[k - 1] - out[k - 2]
        } else {
            out[k - 1]
        };
        let dp = (s - pred).norm();
        let dm = (-s - pred).norm();
        let (near, far) = if dp <= dm { (dp, dm) } else { (dm, dp) };
        if near > 0.5 * far && s.norm() > 0.0 {
            return Err(HillError::BranchAmbiguity(k));
        }
        out.push(if dp <= dm { s } else { -s });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn free_values() {
        let z = Potential::zero();
        let d = hill_discriminant(&z, c(0.09, 0.0), 1e-12).unwrap();
        assert!((d.f - 2.0 * 0.3f64.cos()).norm() < 1e-11);
        let d = hill_discriminant(&z, c(4.0 * PI * PI, 0.0), 1e-12).unwrap();
        assert!((d.f - 2.0).norm() < 1e-10 && d.fprime.norm() < 1e-10);
        let d = hill_discriminant(&z, c(PI * PI / 4.0, 0.0), 1e-12).unwrap();
        assert!((d.fprime + 2.0 / PI).norm() < 1e-10);
        assert!((d.fprime_integral + 2.0 / PI).norm() < 1e-10);
        assert!(d.fprime_spread < 1e-8);
    }

    #[test]
    fn determinant_forms_agree() {
        assert!(characteristic_determinant(c(2.0, 0.0), c(0.0, 0.0)).norm() < 1e-15);
        assert!(characteristic_determinant(c(-2.0, 0.0), c(PI, 0.0)).norm() < 1e-15);
        assert!(characteristic_determinant(c(2.0 * 0.3f64.cos(), 0.0), c(0.3, 0.0)).norm() < 1e-12);
        let p = Potential::fourier(&[(1, c(0.5, 0.5)), (-1, c(0.1, 0.0))]).unwrap();
        let m = ode::monodromy(&p, c(17.0, -2.0), 1e-12).unwrap();
        for t in [c(0.3, 0.0), c(1.0, 0.2), c(-2.0, 0.05)] {
            let a = raw_determinant(&m, t);
            let b = characteristic_determinant(m.trace(), t);
            assert!((a - b).norm() <= 1e-9 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn p_branch_constant_and_band() {
        let p = p_branch(&[c(0.0, 0.0); 5]).unwrap();
        assert!(p.iter().all(|v| (v - 2.0).norm() < 1e-15));
        let ts: Vec<f64> = (0..=290).map(|i| 0.1 + i as f64 * 0.01).collect();
        let path: Vec<C64> = ts.iter().map(|t| c(2.0 * t.cos(), 0.0)).collect();
        let p = p_branch(&path).unwrap();
        for (v, t) in p.iter().zip(&ts) {
            assert!((v - 2.0 * t.sin()).norm() < 1e-12);
        }
        assert!(p_branch(&[c(0.0, 0.0), c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn p_flips_sign_around_band_edge() {
        // a simple root of 4 - F² at the bottom of the first Mathieu band
        let q = Potential::fourier(&[(1, c(1.0, 0.0)), (-1, c(1.0, 0.0))]).unwrap();
        let mut lam = c(-0.5, 0.0);
        for _ in 0..40 {
            let j = ode::monodromy_jet(&q, lam, 1, 1e-13).unwrap();
            lam -= (j.value.trace() - 2.0) / j.d1.trace();
        }
        let n = 400;
        let path: Vec<C64> = (0..=n)
            .map(|i| {
                let z = lam + C64::from_polar(0.3, 2.0 * PI * i as f64 / n as f64);
                ode::monodromy(&q, z, 1e-12).unwrap().trace()
            })
            .collect();
        let p = p_branch(&path).unwrap();
        assert!((p[0] + p[n]).norm() < 1e-8 * p[0].norm(), "{} {}", p[0], p[n]);
    }

    #[test]
    fn arccos_branch_real_on_band() {
        let t = arccos_branch(c(0.7f64.cos(), 0.0));
        assert!((t - 0.7).norm() < 1e-14);
        let t = arccos_branch(c(-1.0, 0.0));
        assert!((t.re - PI).abs() < 1e-15);
    }
}
