//! Randomized invariants over small trigonometric potentials.

use std::f64::consts::PI;

use hillspec_core::discriminant::{characteristic_determinant, hill_discriminant, raw_determinant};
use hillspec_core::expansion::SourceFunction;
use hillspec_core::ode;
use hillspec_core::spectrum::{self, EIGEN_TOL};
use hillspec_core::{Complex64 as C64, Potential};
use proptest::prelude::*;

fn coeff() -> impl Strategy<Value = C64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| C64::new(a, b))
}

/// q with modes 1 ≤ |k| ≤ 2 and zero mean.
fn potential() -> impl Strategy<Value = Potential> {
    prop::collection::vec(coeff(), 4).prop_map(|c| {
        Potential::fourier(&[(-2, c[0]), (-1, c[1]), (1, c[2]), (2, c[3])]).unwrap()
    })
}

fn lambda() -> impl Strategy<Value = C64> {
    (-20.0f64..400.0, -10.0f64..10.0).prop_map(|(a, b)| C64::new(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn potential_is_periodic(p in potential(), x in -3.0f64..3.0) {
        let a = p.eval(x);
        prop_assert!((p.eval(x + 1.0) - a).norm() <= 1e-14 * (1.0 + a.norm()));
    }

    #[test]
    fn symmetric_coefficients_are_even(c in coeff(), d in coeff()) {
        let even = Potential::fourier(&[(1, c), (-1, c), (2, d), (-2, d)]).unwrap();
        prop_assert!(even.is_even());
        let odd = Potential::fourier(&[(1, c), (-1, c + C64::new(0.5, 0.0))]).unwrap();
        prop_assert!(!odd.is_even());
    }

    #[test]
    fn wronskian_stays_one(p in potential(), l in lambda()) {
        let fs = ode::integrate_fundamental(&p, l, 65, EIGEN_TOL).unwrap();
        prop_assert!(ode::wronskian_defect(&fs) <= 10.0 * EIGEN_TOL,
            "defect {}", ode::wronskian_defect(&fs));
    }

    #[test]
    fn monodromy_quadratic_identity(p in potential(), l in lambda()) {
        let m = ode::monodromy(&p, l, EIGEN_TOL).unwrap();
        let f = m.trace();
        let lhs = (m.phi_dx - m.theta).powi(2) + 4.0 - f * f;
        let rhs = -4.0 * m.phi * m.theta_dx;
        let scale = lhs.norm().max(rhs.norm()).max((f * f).norm()).max(4.0);
        prop_assert!((lhs - rhs).norm() / scale <= 1e-9);
    }

    #[test]
    fn raw_determinant_matches_discriminant_form(p in potential(), l in lambda(), t in -PI..PI) {
        let m = ode::monodromy(&p, l, EIGEN_TOL).unwrap();
        let t = C64::new(t, 0.0);
        let a = raw_determinant(&m, t);
        let b = characteristic_determinant(m.trace(), t);
        prop_assert!((a - b).norm() <= 1e-9 * (1.0 + m.trace().norm()));
    }

    #[test]
    fn fprime_two_ways_agree(p in potential(), l in lambda()) {
        let d = hill_discriminant(&p, l, EIGEN_TOL).unwrap();
        prop_assert!(d.fprime_spread <= 1e-6, "spread {}", d.fprime_spread);
    }

    #[test]
    fn free_monodromy_closed_form(re in -50.0f64..10_000.0, im in -20.0f64..20.0) {
        let l = C64::new(re, im);
        let m = ode::monodromy(&Potential::zero(), l, EIGEN_TOL).unwrap();
        let s = l.sqrt();
        let scale = 1.0 + s.im.abs().exp();
        let sinc = if s.norm() < 1e-8 { C64::new(1.0, 0.0) } else { s.sin() / s };
        prop_assert!((m.theta - s.cos()).norm() <= 1e-9 * scale);
        prop_assert!((m.phi_dx - s.cos()).norm() <= 1e-9 * scale);
        prop_assert!((m.phi - sinc).norm() <= 1e-9 * scale);
        prop_assert!((m.theta_dx + s * s.sin()).norm() <= 1e-9 * scale * (1.0 + s.norm()));
    }

    #[test]
    fn gelfand_transform_is_quasiperiodic(t in -PI..PI, x in -1.0f64..1.0, w in 0.3f64..2.5) {
        let f = SourceFunction::bump(0.1, w);
        let t = C64::new(t, 0.0);
        let a = f.gelfand_at(t, x);
        let b = f.gelfand_at(t, x + 1.0);
        prop_assert!((b - (C64::i() * t).exp() * a).norm() <= 1e-12 * (1.0 + a.norm()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn bands_are_even_in_quasimomentum(p in potential(), t in 0.05f64..3.0) {
        let plus = spectrum::solve_eigenvalues_opt(&p, t, -2, 2, EIGEN_TOL, false).unwrap();
        let minus = spectrum::solve_eigenvalues_opt(&p, -t, -2, 2, EIGEN_TOL, false).unwrap();
        prop_assert_eq!(plus.len(), minus.len());
        for (a, b) in plus.iter().zip(&minus) {
            prop_assert_eq!(a.n, b.n);
            prop_assert!((a.lambda - b.lambda).norm() <= 1e-9 * (1.0 + a.lambda.norm()));
        }
    }

    #[test]
    fn eigenvalues_are_roots_of_the_characteristic_determinant(p in potential(), t in 0.05f64..3.0) {
        let t = C64::new(t, 0.0);
        for r in spectrum::solve_labeled(&p, t, -2, 2, EIGEN_TOL, false).unwrap() {
            let m = ode::monodromy(&p, r.lambda, EIGEN_TOL).unwrap();
            let f = m.trace();
            let scale = 1.0 + r.lambda.norm().sqrt();
            prop_assert!((f - 2.0 * t.cos()).norm() <= 1e-7 * scale, "n={} F-2cos t={}", r.n, (f - 2.0 * t.cos()).norm());
        }
    }
}
