//! `hillspec verify`: a fixed battery of cross-checks between independent
//! code paths, reported as a JSON scorecard.

use std::f64::consts::PI;
use std::path::Path;

use hillspec_core::discriminant;
use hillspec_core::expansion::{self, SourceFunction};
use hillspec_core::ode;
use hillspec_core::oracle::{self, ContourOptions};
use hillspec_core::spectrum::{self, EIGEN_TOL};
use hillspec_core::{quad, Complex64 as C64, HillError, Potential};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commands::{check_h, check_tol, Failure};
use crate::output::ErrorEntry;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// random (potential, λ) pairs for the Wronskian audit
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_seed() -> u64 {
    20240611
}
fn default_samples() -> usize {
    24
}
fn default_h() -> f64 {
    0.02
}
fn default_tol() -> f64 {
    EIGEN_TOL
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: default_seed(),
            samples: default_samples(),
            h: default_h(),
            tol: default_tol(),
        }
    }
}

impl VerifyConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let cfg = match path {
            None => VerifyConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Failure::io(p, e))?;
                serde_json::from_str(&text).map_err(|e| Failure::invalid("MalformedConfig", e.to_string()))?
            }
        };
        check_tol(cfg.tol)?;
        check_h(cfg.h)?;
        if cfg.samples == 0 {
            return Err(Failure::invalid("InvalidArgument", "samples must be positive"));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    /// worst observed defect
    pub value: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Scorecard {
    pub config: VerifyConfig,
    pub checks: Vec<Check>,
    pub passed: usize,
    pub failed: usize,
    pub errors: Vec<ErrorEntry>,
}

type Probe = fn(&VerifyConfig) -> hillspec_core::Result<f64>;

const CHECKS: [(&str, f64, Probe); 9] = [
    ("free_eigenvalues", 1e-8, free_eigenvalues),
    ("wronskian_defect", 1e-9, wronskian),
    ("monodromy_identity", 1e-9, monodromy_identity),
    ("fprime_consistency", 1e-6, fprime_consistency),
    ("gasymov_discriminant", 1e-7, gasymov_discriminant),
    ("galerkin_vs_shooting", 1e-6, galerkin_vs_shooting),
    ("free_green_kernel", 1e-8, free_green_kernel),
    ("bundle_oracle", 1e-6, bundle_oracle),
    ("parseval_hat", 1e-8, parseval_hat),
];

pub fn run(cfg: &VerifyConfig) -> Scorecard {
    // checks run one after another; each is parallel inside
    let mut checks = Vec::new();
    let mut errors = Vec::new();
    for (name, threshold, probe) in CHECKS {
        match probe(cfg) {
            Ok(v) => checks.push(Check {
                name,
                value: Some(v),
                threshold,
                pass: v <= threshold,
            }),
            Err(e) => {
                errors.push(ErrorEntry {
                    kind: e.kind().to_string(),
                    message: format!("{name}: {e}"),
                });
                checks.push(Check {
                    name,
                    value: None,
                    threshold,
                    pass: false,
                });
            }
        }
    }
    let passed = checks.iter().filter(|c| c.pass).count();
    Scorecard {
        config: cfg.clone(),
        failed: checks.len() - passed,
        passed,
        checks,
        errors,
    }
}

fn worst(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn mathieu() -> Potential {
    Potential::fourier(&[(1, c(1.0, 0.0)), (-1, c(1.0, 0.0))]).expect("finite")
}

fn gasymov() -> Potential {
    Potential::fourier(&[(1, c(1.0, 0.0))]).expect("finite")
}

/// Seeded random (potential, λ) pairs; potentials have modes |k| ≤ 3.
fn random_samples(cfg: &VerifyConfig) -> Vec<(Potential, C64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.samples)
        .map(|_| {
            let terms: Vec<(i64, C64)> = (-3..=3)
                .filter(|&k| k != 0)
                .map(|k| (k, c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
                .collect();
            let lambda = c(rng.gen_range(-20.0..400.0), rng.gen_range(-10.0..10.0));
            (Potential::fourier(&terms).expect("finite"), lambda)
        })
        .collect()
}

fn free_eigenvalues(cfg: &VerifyConfig) -> hillspec_core::Result<f64> {
    let ts: Vec<f64> = (1..=16).map(|i| -PI + 2.0 * PI * i as f64 / 16.0).collect();
    let per_t: Vec<f64> = ts
        .par_iter()
        .map(|&t| {
            let roots = spectrum::solve_labeled(&Potential::zero(), c(t, 0.0), -5, 5, cfg.tol, false)?;
            Ok(worst(roots.iter().map(|r| (r.lambda - (2.0 * PI * r.n as f64 + t).powi(2)).norm())))
        })
        .collect::<hillspec_core::Result<_>>()?;
    Ok(worst(per_t))
}

fn wronskian(cfg: &VerifyConfig) -> hillspec_core::Result<f64> {
    let samples = random_samples(cfg);
    let d: Vec<f64> = samples
        .par_iter()
        .map(|(p, l)| Ok(ode::wronskian_defect(&ode::integrate_fundamental(p, *l, 129, cfg.tol)?)))
        .collect::<hillspec_core::Result<_>>()?;
    Ok(worst(d))
}

fn monodromy_identity(cfg: &VerifyConfig) -> hillspec_core::Result<f64> {
    let samples = random_samples(cfg);
    let d: Vec<f64> = samples
        .par_iter()
        .map(|(p, l)| {
            let m = ode::monodromy(p, *l, cfg.tol)?;
            let f = m.trace();
            let lhs = (m.phi_dx - m.theta).powi(2) + 4.0 - f * f;
            let rhs = -4.0 * m.phi * m.theta_dx;
            let scale = lhs.norm().max(rhs.norm()).max((f * f).norm()).max(4.0);
            Ok((lhs - rhs).norm() / scale)
        })
        .collect::<hillspec_core::Result<_>>()?;
    Ok(worst(d))
}

fn fprime_consistency(cfg: &VerifyConfig) -> hillspec_core::Result<f64> {
    let lambdas: Vec<C64> = (0..12).map(|i| c(-5.0 + 30.0 * i as f64, 0.5 * i as f64)).collect();
    let d: Vec<f64> = lambdas
        .par_iter()
        .map(|&l| Ok(discriminant::hill_discriminant(&mathieu(), l, cfg.tol)?.fprime_spread))
        .collect::<hillspec_core::Result<_>>()?;
    Ok(worst(d))
}

fn gasymov_discriminant(cfg: &VerifyConfig) -> hillspec_core::Result<f64> {
    let p = gasymov();
    let d: Vec<f64> = (0..=40)
        .into_par_iter()
        .map(|i| {
            let l = 5.0 * i as f64;
            let f = ode::monodromy(&p, c(l, 0.0), cfg.tol)?.trace();
            Ok((f - 2.0 * l.sqrt().cos()).norm())
        })
        .collect::<hillspec_core::Result<_>>()?;
    Ok(worst(d))
}

fn galerkin_vs_shooting(cfg: &VerifyConfig) -> hillspec_core::Result<f64> {
    let p = mathieu();
    let t = c(1.0, 0.0);
    let modes = oracle::galerkin_eigensolve(&p, t, 20)?;
    let roots = spectrum::solve_labeled(&p, t, -2, 2, cfg.tol, false)?;
    let mut out = 0.0f64;
    for r in roots {
        let m = modes
            .iter()
            .find(|m| m.n == r.n)
            .ok_or_else(|| HillError::MissedRoot(format!("Galerkin band {}", r.n)))?;
        out = out.max((m.lambda - r.lambda).norm());
    }
    Ok(out)
}

fn free_green_kernel(cfg: &VerifyConfig) -> hillspec_core::Result<f64> {
    let k = oracle::green_kernel(&Potential::zero(), c(-1.0, 0.0), c(0.0, 0.0), 65, cfg.tol)?;
    let denom = 2.0 * 0.5f64.sinh();
    let mut out = 0.0f64;
    for (i, x) in k.grid.iter().enumerate() {
        for (j, xi) in k.grid.iter().enumerate() {
            out = out.max((k.values[i][j] - ((x - xi).abs() - 0.5).cosh() / denom).norm());
        }
    }
    Ok(out)
}

/// T_1 from the resolvent against a_1Ψ_1 + a_{-1}Ψ_{-1} for q = e^{2πix}.
fn bundle_oracle(cfg: &VerifyConfig) -> hillspec_core::Result<f64> {
    let p = gasymov();
    let f = SourceFunction::bump(0.0, 1.0);
    let opts = ContourOptions {
        tol: cfg.tol,
        ..ContourOptions::default()
    };
    let w = quad::gregory_weights(opts.grid_size);
    let d: Vec<f64> = [-0.75, -0.25, 0.25, 0.75]
        .par_iter()
        .map(|&s| {
            let t = c(s * cfg.h, 0.0);
            let tp = oracle::total_projection(&p, &f, 1, t, cfg.h, &opts)?;
            // eigenfunctions near the double point need the tighter integration
            let direct = expansion::band_sum(&p, &f, &[1, -1], t, opts.grid_size, 1e-14)?;
            let diff: Vec<C64> = tp.profile.iter().zip(&direct).map(|(a, b)| a - b).collect();
            Ok(quad::norm(&w, &diff) / quad::norm(&w, &direct))
        })
        .collect::<hillspec_core::Result<_>>()?;
    Ok(worst(d))
}

fn parseval_hat(_: &VerifyConfig) -> hillspec_core::Result<f64> {
    Ok(expansion::parseval_check(&SourceFunction::hat(0.0, 1.0), 257)?.relative_defect)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_depend_only_on_seed() {
        let cfg = VerifyConfig::default();
        let a = random_samples(&cfg);
        let b = random_samples(&cfg);
        assert_eq!(a.len(), cfg.samples);
        for ((pa, la), (pb, lb)) in a.iter().zip(&b) {
            assert_eq!(la, lb);
            assert_eq!(pa.fourier_terms(), pb.fourier_terms());
        }
    }

    #[test]
    fn unknown_config_fields_are_rejected() {
        assert!(serde_json::from_str::<VerifyConfig>(r#"{"seed": 1, "bogus": 2}"#).is_err());
        let cfg: VerifyConfig = serde_json::from_str(r#"{"seed": 5}"#).unwrap();
        assert_eq!(cfg.samples, default_samples());
    }
}
