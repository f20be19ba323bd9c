//! Complex 1-periodic potentials.

use num_complex::Complex64 as C64;
use serde::Deserialize;
use std::f64::consts::PI;

use crate::error::{HillError, Result};

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    /// Dense coefficients q_k for k in kmin..=kmin+len-1.
    Fourier { kmin: i64, coeffs: Vec<C64> },
    /// Periodic samples on [0,1) with local Lagrange interpolation.
    Samples {
        xs: Vec<f64>,
        vals: Vec<C64>,
        order: usize,
    },
}

/// A complex potential of period 1, written in the basis e^{2πikx}.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    repr: Repr,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PotentialDoc {
    fourier: Option<Vec<[f64; 3]>>,
    samples: Option<Vec<[f64; 3]>>,
    #[serde(default)]
    normalize_mean: bool,
    interp_order: Option<usize>,
}

impl Potential {
    pub fn zero() -> Self {
        Potential {
            repr: Repr::Fourier {
                kmin: 0,
                coeffs: vec![C64::new(0.0, 0.0)],
            },
        }
    }

    /// Build from a list of (k, q_k). Repeated indices are summed.
    pub fn fourier(terms: &[(i64, C64)]) -> Result<Self> {
        for (k, c) in terms {
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(HillError::NonFiniteCoefficient(format!("q_{k} = {c}")));
            }
        }
        if terms.is_empty() {
            return Ok(Self::zero());
        }
        let kmin = terms.iter().map(|t| t.0).min().unwrap();
        let kmax = terms.iter().map(|t| t.0).max().unwrap();
        let mut coeffs = vec![C64::new(0.0, 0.0); (kmax - kmin + 1) as usize];
        for &(k, c) in terms {
            coeffs[(k - kmin) as usize] += c;
        }
        Ok(Potential {
            repr: Repr::Fourier { kmin, coeffs },
        })
    }

    /// Periodic samples (x in [0,1), value) interpolated with local polynomials of
    /// degree `order`.
    pub fn samples(points: &[(f64, C64)], order: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(HillError::MalformedConfig("empty sample list".into()));
        }
        if order + 1 > points.len() {
            return Err(HillError::MalformedConfig(format!(
                "interp_order {order} needs at least {} samples",
                order + 1
            )));
        }
        let mut pts: Vec<(f64, C64)> = points.to_vec();
        for (x, v) in &pts {
            if !x.is_finite() || !(v.re.is_finite() && v.im.is_finite()) {
                return Err(HillError::NonFiniteCoefficient(format!("sample at x={x}")));
            }
            if !(0.0..1.0).contains(x) {
                return Err(HillError::MalformedConfig(format!(
                    "sample abscissa {x} outside [0,1)"
                )));
            }
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pts.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(HillError::MalformedConfig("duplicate sample abscissa".into()));
        }
        Ok(Potential {
            repr: Repr::Samples {
                xs: pts.iter().map(|p| p.0).collect(),
                vals: pts.iter().map(|p| p.1).collect(),
                order,
            },
        })
    }

    /// Parse the JSON configuration document.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: PotentialDoc =
            serde_json::from_str(text).map_err(|e| HillError::MalformedConfig(e.to_string()))?;
        match (doc.fourier, doc.samples) {
            (Some(_), Some(_)) => Err(HillError::MalformedConfig(
                "both fourier and samples given".into(),
            )),
            (None, None) => Err(HillError::MalformedConfig(
                "one of fourier or samples is required".into(),
            )),
            (Some(f), None) => {
                let mut terms = Vec::with_capacity(f.len());
                for [k, re, im] in f {
                    if k.fract() != 0.0 || !k.is_finite() {
                        return Err(HillError::MalformedConfig(format!(
                            "fourier index {k} is not an integer"
                        )));
                    }
                    terms.push((k as i64, C64::new(re, im)));
                }
                let mut p = Potential::fourier(&terms)?;
                if doc.normalize_mean {
                    p = p.without_mean();
                }
                Ok(p)
            }
            (None, Some(s)) => {
                let pts: Vec<(f64, C64)> =
                    s.iter().map(|[x, re, im]| (*x, C64::new(*re, *im))).collect();
                let p = Potential::samples(&pts, doc.interp_order.unwrap_or(3))?;
                Ok(if doc.normalize_mean { p.without_mean() } else { p })
            }
        }
    }

    /// Same potential with zero mean over a period.
    pub fn without_mean(&self) -> Self {
        match &self.repr {
            Repr::Fourier { kmin, coeffs } => {
                let mut coeffs = coeffs.clone();
                if *kmin <= 0 && -kmin < coeffs.len() as i64 {
                    coeffs[(-kmin) as usize] = C64::new(0.0, 0.0);
                }
                Potential {
                    repr: Repr::Fourier { kmin: *kmin, coeffs },
                }
            }
            Repr::Samples { xs, vals, order } => {
                let mean = self.mean();
                Potential {
                    repr: Repr::Samples {
                        xs: xs.clone(),
                        vals: vals.iter().map(|v| v - mean).collect(),
                        order: *order,
                    },
                }
            }
        }
    }

    /// Mean value over one period.
    pub fn mean(&self) -> C64 {
        match &self.repr {
            Repr::Fourier { .. } => self.coefficient(0),
            Repr::Samples { .. } => {
                let n = 4096;
                (0..n).map(|i| self.eval((i as f64 + 0.5) / n as f64)).sum::<C64>() / n as f64
            }
        }
    }

    /// Fourier coefficient q_k (Fourier representation only; sampled potentials
    /// are transformed numerically).
    pub fn coefficient(&self, k: i64) -> C64 {
        match &self.repr {
            Repr::Fourier { kmin, coeffs } => {
                let i = k - kmin;
                if i >= 0 && (i as usize) < coeffs.len() {
                    coeffs[i as usize]
                } else {
                    C64::new(0.0, 0.0)
                }
            }
            Repr::Samples { .. } => {
                let n = 4096;
                (0..n)
                    .map(|i| {
                        let x = (i as f64 + 0.5) / n as f64;
                        self.eval(x) * C64::from_polar(1.0, -2.0 * PI * k as f64 * x)
                    })
                    .sum::<C64>()
                    / n as f64
            }
        }
    }

    /// Nonzero Fourier terms (k, q_k), or `None` for sampled potentials.
    pub fn fourier_terms(&self) -> Option<Vec<(i64, C64)>> {
        match &self.repr {
            Repr::Fourier { kmin, coeffs } => Some(
                coeffs
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.norm() > 0.0)
                    .map(|(i, c)| (kmin + i as i64, *c))
                    .collect(),
            ),
            Repr::Samples { .. } => None,
        }
    }

    pub fn eval(&self, x: f64) -> C64 {
        match &self.repr {
            Repr::Fourier { kmin, coeffs } => {
                let (s, c) = (2.0 * PI * x).sin_cos();
                let z = C64::new(c, s);
                let mut acc = C64::new(0.0, 0.0);
                for q in coeffs.iter().rev() {
                    acc = acc * z + q;
                }
                if *kmin == 0 {
                    acc
                } else {
                    acc * C64::from_polar(1.0, 2.0 * PI * (*kmin as f64) * x)
                }
            }
            Repr::Samples { xs, vals, order } => lagrange_periodic(xs, vals, *order, x),
        }
    }

    /// Upper bound for sup |q|; for Fourier potentials Σ|q_k|, which also bounds the
    /// coefficient-space Toeplitz norm for complex quasimomenta.
    pub fn sup_bound(&self) -> f64 {
        match &self.repr {
            Repr::Fourier { coeffs, .. } => coeffs.iter().map(|c| c.norm()).sum(),
            Repr::Samples { vals, order, .. } => {
                // Lagrange interpolation can overshoot the data; sample densely and pad.
                let m = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
                let n = 8 * vals.len().max(64);
                let dense = (0..n)
                    .map(|i| self.eval(i as f64 / n as f64).norm())
                    .fold(0.0, f64::max);
                m.max(dense) * (1.0 + 0.05 * *order as f64)
            }
        }
    }

    /// Radius r such that every Bloch eigenvalue at quasimomentum t lies within r of
    /// some (2πk+t)² + mean(q): the norm of the Toeplitz operator of q - mean(q).
    pub fn perturbation_radius(&self) -> f64 {
        self.without_mean().sup_bound()
    }

    /// True if q(x) = q(-x), i.e. q_k = q_{-k}.
    pub fn is_even(&self) -> bool {
        match &self.repr {
            Repr::Fourier { kmin, coeffs } => {
                let kmax = kmin + coeffs.len() as i64 - 1;
                let kk = kmin.abs().max(kmax.abs());
                (1..=kk).all(|k| {
                    let a = self.coefficient(k);
                    let b = self.coefficient(-k);
                    (a - b).norm() <= 1e-14 * (1.0 + a.norm())
                })
            }
            Repr::Samples { .. } => (0..257).all(|i| {
                let x = i as f64 / 256.0;
                let a = self.eval(x);
                (a - self.eval(1.0 - x)).norm() <= 1e-12 * (1.0 + a.norm())
            }),
        }
    }

    /// True if every value of q is real.
    pub fn is_real(&self) -> bool {
        match &self.repr {
            Repr::Fourier { kmin, coeffs } => {
                let kmax = kmin + coeffs.len() as i64 - 1;
                let kk = kmin.abs().max(kmax.abs());
                (0..=kk).all(|k| {
                    let a = self.coefficient(k);
                    (a - self.coefficient(-k).conj()).norm() <= 1e-14 * (1.0 + a.norm())
                })
            }
            Repr::Samples { vals, .. } => vals.iter().all(|v| v.im == 0.0),
        }
    }

    /// Potential of the formal adjoint, x ↦ conj(q(x)).
    pub fn conj(&self) -> Self {
        match &self.repr {
            Repr::Fourier { kmin, coeffs } => {
                let terms: Vec<(i64, C64)> = coeffs
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (-(kmin + i as i64), c.conj()))
                    .collect();
                Potential::fourier(&terms).expect("finite coefficients stay finite")
            }
            Repr::Samples { xs, vals, order } => Potential {
                repr: Repr::Samples {
                    xs: xs.clone(),
                    vals: vals.iter().map(|v| v.conj()).collect(),
                    order: *order,
                },
            },
        }
    }
}

fn lagrange_periodic(xs: &[f64], vals: &[C64], order: usize, x: f64) -> C64 {
    let n = xs.len();
    let x = x.rem_euclid(1.0);
    // index of the last node <= x (periodic)
    let pos = xs.partition_point(|&v| v <= x) as i64 - 1;
    let m = order + 1;
    let start = pos - (m as i64 - 1) / 2;
    let node = |j: i64| -> (f64, C64) {
        let wrapped = j.rem_euclid(n as i64) as usize;
        let shift = j.div_euclid(n as i64) as f64;
        (xs[wrapped] + shift, vals[wrapped])
    };
    let mut acc = C64::new(0.0, 0.0);
    for a in 0..m as i64 {
        let (xa, va) = node(start + a);
        let mut w = 1.0;
        for b in 0..m as i64 {
            if a != b {
                let (xb, _) = node(start + b);
                w *= (x - xb) / (xa - xb);
            }
        }
        acc += va * w;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn zero_from_empty_fourier() {
        let p = Potential::from_json(r#"{"fourier": []}"#).unwrap();
        assert_eq!(p.eval(0.37), c(0.0, 0.0));
    }

    #[test]
    fn gasymov_and_cosine_values() {
        let g = Potential::from_json(r#"{"fourier": [[1, 1.0, 0.0]]}"#).unwrap();
        assert!((g.eval(0.25) - c(0.0, 1.0)).norm() < 1e-15);
        let m = Potential::from_json(r#"{"fourier": [[1, 1, 0], [-1, 1, 0]]}"#).unwrap();
        assert!((m.eval(0.0) - c(2.0, 0.0)).norm() < 1e-15);
        assert!(m.is_even() && m.is_real());
        assert!(!g.is_even() && !g.is_real());
    }

    #[test]
    fn mean_normalization() {
        let p = Potential::from_json(r#"{"fourier": [[0, 3, 1], [2, 1, 0]], "normalize_mean": true}"#)
            .unwrap();
        assert_eq!(p.coefficient(0), c(0.0, 0.0));
        assert_eq!(p.coefficient(2), c(1.0, 0.0));
    }

    #[test]
    fn config_errors() {
        let both = r#"{"fourier": [], "samples": [[0, 1, 0]]}"#;
        assert!(matches!(Potential::from_json(both), Err(HillError::MalformedConfig(_))));
        assert!(matches!(Potential::from_json("{}"), Err(HillError::MalformedConfig(_))));
        assert!(matches!(
            Potential::from_json(r#"{"fourier": [[1.5, 1, 0]]}"#),
            Err(HillError::MalformedConfig(_))
        ));
        assert!(matches!(
            Potential::fourier(&[(1, c(f64::NAN, 0.0))]),
            Err(HillError::NonFiniteCoefficient(_))
        ));
        assert!(matches!(
            Potential::from_json(r#"{"fourier": [[1, 1e400, 0]]}"#),
            Err(HillError::MalformedConfig(_)) | Err(HillError::NonFiniteCoefficient(_))
        ));
    }

    #[test]
    fn samples_reproduce_smooth_potential() {
        let n = 64;
        let pts: Vec<(f64, C64)> = (0..n)
            .map(|i| {
                let x = i as f64 / n as f64;
                (x, c((2.0 * PI * x).cos(), (2.0 * PI * x).sin()))
            })
            .collect();
        let p = Potential::samples(&pts, 5).unwrap();
        for i in 0..100 {
            let x = i as f64 / 100.0 + 0.003;
            let exact = C64::from_polar(1.0, 2.0 * PI * x);
            assert!((p.eval(x) - exact).norm() < 1e-7, "x={x}");
        }
        assert!((p.coefficient(1) - c(1.0, 0.0)).norm() < 1e-7);
    }

    #[test]
    fn conj_is_adjoint_potential() {
        let p = Potential::fourier(&[(1, c(0.5, 0.5)), (-2, c(0.1, 0.0))]).unwrap();
        let q = p.conj();
        for i in 0..10 {
            let x = i as f64 * 0.0917;
            assert!((q.eval(x) - p.eval(x).conj()).norm() < 1e-14);
        }
    }
}
