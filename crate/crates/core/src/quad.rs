//! Quadrature rules shared by the spectral routines.
#![allow(clippy::excessive_precision)]

use num_complex::Complex64 as C64;
use std::f64::consts::PI;

use crate::error::{HillError, Result};

/// Endpoint correction coefficients of the Gregory rule (differences of order 1..5).
const GREGORY: [f64; 5] = [1.0 / 12.0, 1.0 / 24.0, 19.0 / 720.0, 3.0 / 160.0, 863.0 / 60480.0];

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Weights of the Gregory rule on `n` equispaced points covering [0,1].
///
/// Exact for polynomials up to degree 6 once n ≥ 12; falls back to Simpson-like
/// trapezoid weights on very short grids.
pub fn gregory_weights(n: usize) -> Vec<f64> {
    assert!(n >= 2, "need at least two points");
    let h = 1.0 / (n - 1) as f64;
    let mut w = vec![1.0; n];
    w[0] = 0.5;
    w[n - 1] = 0.5;
    let order = if n >= 12 { 5 } else { 0 };
    for (k, g) in GREGORY.iter().enumerate().take(order) {
        let k = k + 1;
        // forward difference Δ^k f_0 and backward ∇^k f_{n-1}
        let sign_fwd = if k % 2 == 1 { 1.0 } else { -1.0 };
        for j in 0..=k {
            let c = binomial(k, j);
            let fwd = if (k - j) % 2 == 0 { c } else { -c };
            // -(g)(∇^k f_n ∓ Δ^k f_0): odd k subtracts, even k adds
            w[j] += g * sign_fwd * fwd;
            let bwd = if j % 2 == 0 { c } else { -c };
            w[n - 1 - j] -= g * bwd;
        }
    }
    w.iter().map(|v| v * h).collect()
}

/// ∫₀¹ u(x) v(x) dx with the Gregory rule (no conjugation).
pub fn bilinear(w: &[f64], u: &[C64], v: &[C64]) -> C64 {
    w.iter().zip(u).zip(v).map(|((w, a), b)| a * b * *w).sum()
}

/// ∫₀¹ u(x) conj(v(x)) dx.
pub fn inner(w: &[f64], u: &[C64], v: &[C64]) -> C64 {
    w.iter().zip(u).zip(v).map(|((w, a), b)| a * b.conj() * *w).sum()
}

pub fn norm(w: &[f64], u: &[C64]) -> f64 {
    w.iter().zip(u).map(|(w, a)| a.norm_sqr() * w).sum::<f64>().max(0.0).sqrt()
}

/// Gauss-Legendre nodes and weights on [-1,1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            } else {
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
            }
            // p1 = P_n(z), p0 = P_{n-1}(z)
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            if n == 1 {
                dp = 1.0;
            }
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    (x, w)
}

/// Gauss-Legendre nodes and weights mapped to [a,b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    x.iter().zip(&w).map(|(x, w)| (c + r * x, r * w)).collect()
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// The 15 Kronrod abscissae on [a,b] in increasing order.
pub fn kronrod_nodes(a: f64, b: f64) -> [f64; 15] {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let mut out = [0.0; 15];
    for i in 0..7 {
        out[i] = c - r * XGK[i];
        out[14 - i] = c + r * XGK[i];
    }
    out[7] = c;
    out
}

fn gk_combine(values: &[Vec<C64>], a: f64, b: f64) -> (Vec<C64>, f64) {
    let r = 0.5 * (b - a);
    let len = values[0].len();
    let mut k = vec![C64::new(0.0, 0.0); len];
    let mut g = vec![C64::new(0.0, 0.0); len];
    for (idx, v) in values.iter().enumerate() {
        let j = if idx <= 7 { idx } else { 14 - idx };
        let wk = WGK[j] * r;
        // Gauss nodes sit at odd Kronrod positions and at the centre
        let wg = if j % 2 == 1 { WG[j / 2] * r } else if j == 7 { WG[3] * r } else { 0.0 };
        for (i, x) in v.iter().enumerate() {
            k[i] += x * wk;
            if wg != 0.0 {
                g[i] += x * wg;
            }
        }
    }
    let err = k.iter().zip(&g).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    (k, err)
}

/// Result of an adaptive vector quadrature.
#[derive(Debug, Clone)]
pub struct VecIntegral {
    pub value: Vec<C64>,
    pub error: f64,
    pub evaluations: usize,
}

/// Adaptive Gauss-Kronrod (7,15) for vector-valued integrands; the error is
/// measured in the Euclidean norm of the vector scaled by `weight`.
pub fn adaptive_gk15<F>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
    weight: f64,
) -> Result<VecIntegral>
where
    F: FnMut(f64) -> Result<Vec<C64>>,
{
    let mut eval_panel = |lo: f64, hi: f64, evals: &mut usize| -> Result<(Vec<C64>, f64)> {
        let nodes = kronrod_nodes(lo, hi);
        let mut vals = Vec::with_capacity(15);
        for x in nodes {
            vals.push(f(x)?);
        }
        *evals += 15;
        let (v, e) = gk_combine(&vals, lo, hi);
        Ok((v, e * weight))
    };
    let mut evals = 0;
    let (v0, e0) = eval_panel(a, b, &mut evals)?;
    let mut panels = vec![(a, b, v0, e0)];
    loop {
        let total_err: f64 = panels.iter().map(|p| p.3).sum();
        let len = panels[0].2.len();
        let mut total = vec![C64::new(0.0, 0.0); len];
        for p in &panels {
            for (t, v) in total.iter_mut().zip(&p.2) {
                *t += v;
            }
        }
        let scale = weight * total.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if total_err <= abs_tol.max(rel_tol * scale) {
            return Ok(VecIntegral {
                value: total,
                error: total_err,
                evaluations: evals,
            });
        }
        if panels.len() >= max_panels {
            return Err(HillError::QuadratureFailure(format!(
                "adaptive quadrature on [{a}, {b}] stalled at error {total_err:e}"
            )));
        }
        // split the worst panel (first on ties, for reproducibility)
        let mut worst = 0;
        for (i, p) in panels.iter().enumerate() {
            if p.3 > panels[worst].3 {
                worst = i;
            }
        }
        let (lo, hi, _, _) = panels.remove(worst);
        let mid = 0.5 * (lo + hi);
        let left = eval_panel(lo, mid, &mut evals)?;
        let right = eval_panel(mid, hi, &mut evals)?;
        panels.insert(worst, (mid, hi, right.0, right.1));
        panels.insert(worst, (lo, mid, left.0, left.1));
    }
}

/// Winding number of a closed sampled curve around the origin.
///
/// Returns `None` if consecutive samples turn by more than `max_turn` radians
/// (curve under-resolved) or pass too close to zero.
pub fn winding_number(values: &[C64], max_turn: f64) -> Option<i64> {
    let n = values.len();
    let mut total = 0.0;
    for i in 0..n {
        let a = values[i];
        let b = values[(i + 1) % n];
        if a.norm() == 0.0 || b.norm() == 0.0 {
            return None;
        }
        let d = (b / a).arg();
        if d.abs() > max_turn {
            return None;
        }
        total += d;
    }
    Some((total / (2.0 * PI)).round() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gregory_is_exact_on_low_degree_polynomials() {
        for n in [12usize, 33, 257] {
            let w = gregory_weights(n);
            for deg in 0..=5 {
                let s: f64 = (0..n)
                    .map(|i| w[i] * (i as f64 / (n - 1) as f64).powi(deg))
                    .sum();
                assert!((s - 1.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n={n} deg={deg} s={s}");
            }
        }
    }

    #[test]
    fn gregory_handles_oscillatory_products() {
        let n = 513;
        let w = gregory_weights(n);
        let k = 2.0 * PI * 20.0 + 0.3;
        let s: C64 = (0..n)
            .map(|i| {
                let x = i as f64 / (n - 1) as f64;
                C64::from_polar(1.0, k * x) * w[i]
            })
            .sum();
        let exact = (C64::from_polar(1.0, k) - 1.0) / C64::new(0.0, k);
        // sixth-order endpoint error at kh ≈ 0.25
        assert!((s - exact).norm() < 5e-8, "{}", (s - exact).norm());
    }

    #[test]
    fn gauss_legendre_exactness() {
        for n in [1usize, 2, 5, 8, 20] {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((s - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn kronrod_integrates_polynomials_and_adapts() {
        let r = adaptive_gk15(
            |x| Ok(vec![C64::new(x.powi(20), 0.0), C64::new(0.0, x.cos())]),
            0.0,
            1.0,
            1e-14,
            1e-14,
            50,
            1.0,
        )
        .unwrap();
        assert!((r.value[0].re - 1.0 / 21.0).abs() < 1e-14);
        assert!((r.value[1].im - 1f64.sin()).abs() < 1e-14);
        let r = adaptive_gk15(|x| Ok(vec![C64::new(x.sqrt(), 0.0)]), 0.0, 1.0, 1e-10, 0.0, 200, 1.0).unwrap();
        assert!((r.value[0].re - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn winding_counts() {
        let circle = |m: i64| -> Vec<C64> {
            (0..64).map(|i| C64::from_polar(1.0, m as f64 * 2.0 * PI * i as f64 / 64.0)).collect()
        };
        assert_eq!(winding_number(&circle(2), 1.0), Some(2));
        assert_eq!(winding_number(&circle(-1), 1.0), Some(-1));
        assert_eq!(winding_number(&circle(0), 1.0), Some(0));
        assert_eq!(winding_number(&circle(40), 1.0), None);
    }
}
