//! Bloch eigenvalues λ_n(t), band tracking, multiple eigenvalues and the
//! asymptotic window N(h).
//!
//! Numbering: every eigenvalue at quasimomentum t lies within
//! `Potential::perturbation_radius` of a seed (2πk+t)² + mean(q). Overlapping seed
//! discs form clusters holding exactly as many eigenvalues as seeds; inside a
//! cluster labels go to the assignment with least total squared displacement.
//! Negative t reuses the eigenvalues at |t|, so λ_n(-t) = λ_n(t).

use num_complex::Complex64 as C64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::discriminant::arccos_branch;
use crate::error::{HillError, Result};
use crate::ode::{self, MonodromyJet};
use crate::potential::Potential;
use crate::roots::{self, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlochEigenvalue {
    pub n: i64,
    pub t: f64,
    pub lambda: C64,
    pub algebraic_multiplicity: u32,
    pub newton_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlochBand {
    pub n: i64,
    pub samples: Vec<BlochEigenvalue>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticWindow {
    pub h: f64,
    #[serde(rename = "N")]
    pub n: i64,
}

/// A point where F' vanishes and the eigenvalue equation holds for real t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultiplePoint {
    pub mu: C64,
    pub t: C64,
    pub m: u32,
}

/// Eigenvalue at a possibly complex quasimomentum (used on contours).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledRoot {
    pub n: i64,
    pub lambda: C64,
    pub multiplicity: u32,
    pub residual: f64,
}

/// Default integrator tolerance for eigenvalue work.
pub const EIGEN_TOL: f64 = 1e-12;

/// Radius within which a root near `s` is fixed only up to integrator noise:
/// near a double root the error is sqrt(2|λ|ε_F) with ε_F ≈ 4·tol·sqrt(1+|λ|).
fn noise_radius(s: C64, tol: f64) -> f64 {
    let m = 1.0 + s.norm();
    (8.0 * m * tol * m.sqrt()).sqrt()
}

fn seed(p_mean: C64, k: i64, t: C64) -> C64 {
    let s = 2.0 * PI * k as f64 + t;
    s * s + p_mean
}

struct Cluster {
    labels: Vec<i64>,
}

fn clusters_for(
    mean: C64,
    r: f64,
    t: C64,
    n_min: i64,
    n_max: i64,
    tol: f64,
) -> Vec<Cluster> {
    // disc overlaps only occur between nearby seeds; pad the index range until
    // no cluster reaches its edge
    let mut pad = 3i64;
    loop {
        let lo = n_min.min(-n_max) - pad;
        let hi = n_max.max(-n_min) + pad;
        let ks: Vec<i64> = (lo..=hi).collect();
        let seeds: Vec<C64> = ks.iter().map(|&k| seed(mean, k, t)).collect();
        let mut parent: Vec<usize> = (0..ks.len()).collect();
        fn find(p: &mut [usize], i: usize) -> usize {
            let mut i = i;
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for a in 0..ks.len() {
            for b in (a + 1)..ks.len() {
                let reach = 2.0 * r + noise_radius(seeds[a], tol) + noise_radius(seeds[b], tol);
                if (seeds[a] - seeds[b]).norm() <= reach {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut root_of: Vec<usize> = Vec::new();
        for i in 0..ks.len() {
            let rt = find(&mut parent, i);
            match root_of.iter().position(|&x| x == rt) {
                Some(j) => groups[j].push(i),
                None => {
                    root_of.push(rt);
                    groups.push(vec![i]);
                }
            }
        }
        let touches_edge = groups.iter().any(|g| {
            let wanted = g.iter().any(|&i| ks[i] >= n_min && ks[i] <= n_max);
            wanted && g.iter().any(|&i| i == 0 || i == ks.len() - 1)
        });
        if touches_edge && pad < 4096 {
            pad *= 2;
            continue;
        }
        return groups
            .into_iter()
            .filter(|g| g.iter().any(|&i| ks[i] >= n_min && ks[i] <= n_max))
            .map(|g| Cluster {
                labels: g.iter().map(|&i| ks[i]).collect(),
            })
            .collect();
    }
}

struct NewtonOutcome {
    z: C64,
    jet: MonodromyJet,
    converged: bool,
    slow: bool,
}

fn newton(p: &Potential, target: C64, z0: C64, cap: f64, tol: f64) -> Result<NewtonOutcome> {
    let mut z = z0;
    let mut prev = f64::INFINITY;
    let mut ratios = Vec::new();
    for it in 0..60 {
        let jet = ode::monodromy_jet(p, z, 1, tol)?;
        let g = jet.value.trace() - target;
        let d = jet.d1.trace();
        if d.norm() == 0.0 || !d.is_finite() {
            return Ok(NewtonOutcome {
                z,
                jet,
                converged: g.norm() == 0.0,
                slow: true,
            });
        }
        let scale = 1.0 + z.norm();
        // residual at the noise level of F: step ratios carry no information any more
        if it >= 1 && g.norm() <= tol * scale.sqrt() {
            return Ok(NewtonOutcome {
                z,
                jet,
                converged: true,
                slow: false,
            });
        }
        let mut dz = g / d;
        if dz.norm() > cap {
            dz *= cap / dz.norm();
        }
        let size = dz.norm();
        if size <= 1e-15 * scale {
            return Ok(NewtonOutcome {
                z,
                jet,
                converged: true,
                slow: false,
            });
        }
        if it >= 1 {
            ratios.push(size / prev);
        }
        // linear convergence with ratio ~1/2 signals a (near) double root
        let slow = ratios.len() >= 3
            && ratios[ratios.len() - 3..].iter().all(|r| (0.3..0.8).contains(r));
        if slow && size < 1e-4 * scale.sqrt() {
            return Ok(NewtonOutcome {
                z: z - dz,
                jet,
                converged: false,
                slow: true,
            });
        }
        // stagnation at the noise floor of F
        if it >= 2 && size >= 0.9 * prev && size < 1e-8 * scale {
            return Ok(NewtonOutcome {
                z,
                jet,
                converged: true,
                slow: false,
            });
        }
        z -= dz;
        prev = size;
    }
    let jet = ode::monodromy_jet(p, z, 1, tol)?;
    Ok(NewtonOutcome {
        z,
        jet,
        converged: false,
        slow: true,
    })
}

/// Resolve a near-double root of F - c around `z0`: Newton on F' locates the
/// critical point μ; if F(μ) = c within noise the root is double, otherwise the
/// two roots μ ± sqrt(2(c - F(μ))/F''(μ)) are polished separately.
fn resolve_double(
    p: &Potential,
    target: C64,
    z0: C64,
    cap: f64,
    tol: f64,
) -> Result<Vec<(C64, u32, f64)>> {
    let mut mu = z0;
    let mut jet = ode::monodromy_jet(p, mu, 2, tol)?;
    for _ in 0..60 {
        let d1 = jet.d1.trace();
        let d2 = jet.d2.unwrap().trace();
        if d2.norm() == 0.0 {
            break;
        }
        let mut dz = d1 / d2;
        if dz.norm() > cap {
            dz *= cap / dz.norm();
        }
        mu -= dz;
        jet = ode::monodromy_jet(p, mu, 2, tol)?;
        if dz.norm() <= 1e-14 * (1.0 + mu.norm()) {
            break;
        }
    }
    let g = jet.value.trace() - target;
    let d2 = jet.d2.unwrap().trace();
    // noise level of F grows like the phase error, ~ tol * sqrt|λ|
    let noise = 50.0 * tol * (1.0 + mu.norm()).sqrt();
    if g.norm() <= noise {
        return Ok(vec![(mu, 2, g.norm())]);
    }
    let off = (-2.0 * g / d2).sqrt();
    let mut out = Vec::new();
    for s in [1.0, -1.0] {
        let start = mu + off * s;
        let r = newton(p, target, start, off.norm().max(1e-12), tol)?;
        let res = (r.jet.value.trace() - target).norm();
        out.push((r.z, 1, res));
    }
    if (out[0].0 - out[1].0).norm() <= 1e-3 * off.norm() {
        return Ok(vec![(mu, 2, g.norm())]);
    }
    Ok(out)
}

fn solve_cluster(
    p: &Potential,
    t: C64,
    mean: C64,
    r: f64,
    cluster: &Cluster,
    tol: f64,
    audit: bool,
) -> Result<Vec<LabeledRoot>> {
    let target = 2.0 * t.cos();
    let seeds: Vec<C64> = cluster.labels.iter().map(|&k| seed(mean, k, t)).collect();
    let size = seeds.len();
    let inside = |z: C64| {
        seeds
            .iter()
            .any(|s| (z - s).norm() <= r * 1.001 + (1e-7 * (1.0 + s.norm()).sqrt()).max(noise_radius(*s, tol)))
    };
    let cap = r.max(1e-3);
    // points closer than the noise radius cannot be told apart
    let same = |a: C64, b: C64| (a - b).norm() <= (1e-7 * (1.0 + a.norm()).sqrt() + 1e-6 * r).max(noise_radius(a, tol));

    let mut found: Vec<(C64, u32, f64)> = Vec::new();
    let mut suspects: Vec<C64> = Vec::new();
    let count = |f: &Vec<(C64, u32, f64)>| f.iter().map(|x| x.1 as usize).sum::<usize>();

    for s in &seeds {
        if count(&found) >= size {
            break;
        }
        let out = newton(p, target, *s, cap, tol)?;
        if !inside(out.z) {
            // flat F near a coincident seed pair throws Newton out
            if size > 1 {
                suspects.push(*s);
            }
            continue;
        }
        if out.slow || !out.converged {
            suspects.push(out.z);
            continue;
        }
        if let Some(j) = found.iter().position(|f| same(f.0, out.z)) {
            suspects.push(found[j].0);
            continue;
        }
        let res = (out.jet.value.trace() - target).norm();
        found.push((out.z, 1, res));
    }
    // two seeds landing on one point, or slow convergence: analyse a double root
    for z in suspects {
        if count(&found) >= size {
            break;
        }
        let resolved = resolve_double(p, target, z, cap, tol)?;
        for (zz, m, res) in resolved {
            if !inside(zz) {
                continue;
            }
            if let Some(j) = found.iter().position(|f| same(f.0, zz)) {
                if m == 2 && found[j].1 == 1 {
                    found[j] = (zz, 2, res);
                }
            } else {
                found.push((zz, m, res));
            }
        }
    }
    if count(&found) < size {
        // deflated Newton from shifted starts
        'outer: for s in &seeds {
            for off in [C64::new(0.5, 0.0), C64::new(0.0, 0.5), C64::new(-0.5, 0.0), C64::new(0.0, -0.5)] {
                if count(&found) >= size {
                    break 'outer;
                }
                let z = deflated_newton(p, target, s + off * r, &found, cap, tol)?;
                if let Some(z) = z {
                    if inside(z) && !found.iter().any(|f| same(f.0, z)) {
                        let jet = ode::monodromy_jet(p, z, 1, tol)?;
                        found.push((z, 1, (jet.value.trace() - target).norm()));
                    }
                }
            }
        }
    }
    if count(&found) < size {
        found = search_rect(p, target, &seeds, r, tol)?;
    }
    if count(&found) != size {
        return Err(HillError::MissedRoot(format!(
            "cluster {:?} at t={t}: found {} of {size} eigenvalues",
            cluster.labels,
            count(&found)
        )));
    }
    if audit {
        let kmax = cluster.labels.iter().map(|k| k.abs()).max().unwrap_or(0) + 3;
        let others: Vec<C64> = (-kmax..=kmax)
            .filter(|k| !cluster.labels.contains(k))
            .map(|k| seed(mean, k, t))
            .collect();
        audit_roots(p, target, &found, &others, r)?;
    }
    let mut flat: Vec<(C64, u32, f64)> = Vec::new();
    for f in &found {
        for _ in 0..f.1 {
            flat.push(*f);
        }
    }
    let order = assign(&seeds, &flat);
    Ok(cluster
        .labels
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let f = flat[order[i]];
            LabeledRoot {
                n,
                lambda: f.0,
                multiplicity: f.1,
                residual: f.2,
            }
        })
        .collect())
}

fn deflated_newton(
    p: &Potential,
    target: C64,
    z0: C64,
    known: &[(C64, u32, f64)],
    cap: f64,
    tol: f64,
) -> Result<Option<C64>> {
    let mut z = z0;
    for _ in 0..60 {
        let jet = ode::monodromy_jet(p, z, 1, tol)?;
        let g = jet.value.trace() - target;
        let mut ratio = jet.d1.trace() / g;
        for k in known {
            ratio -= (k.1 as f64) / (z - k.0);
        }
        if ratio.norm() == 0.0 {
            return Ok(None);
        }
        let mut dz = 1.0 / ratio;
        if dz.norm() > cap {
            dz *= cap / dz.norm();
        }
        z -= dz;
        if dz.norm() <= 1e-13 * (1.0 + z.norm()) {
            // polish on the undeflated function
            let out = newton(p, target, z, cap, tol)?;
            return Ok(out.converged.then_some(out.z));
        }
    }
    Ok(None)
}

fn search_rect(p: &Potential, target: C64, seeds: &[C64], r: f64, tol: f64) -> Result<Vec<(C64, u32, f64)>> {
    let re0 = seeds.iter().map(|s| s.re).fold(f64::INFINITY, f64::min) - 1.1 * r;
    let re1 = seeds.iter().map(|s| s.re).fold(f64::NEG_INFINITY, f64::max) + 1.1 * r;
    let im0 = seeds.iter().map(|s| s.im).fold(f64::INFINITY, f64::min) - 1.1 * r;
    let im1 = seeds.iter().map(|s| s.im).fold(f64::NEG_INFINITY, f64::max) + 1.1 * r;
    let mut fd = |z: C64| -> Result<(C64, C64)> {
        let j = ode::monodromy_jet(p, z, 1, tol)?;
        Ok((j.value.trace() - target, j.d1.trace()))
    };
    let step = (0.25 * (1.0 + seeds[0].norm()).sqrt()).min(0.25 * r.max(1e-3));
    let found = roots::roots_in_rect(&mut fd, Rect::new(re0, im0, re1, im1), step)?;
    let mut out = Vec::new();
    for f in found {
        if seeds.iter().any(|s| (f.z - s).norm() <= 1.001 * r) {
            let res = fd(f.z)?.0.norm();
            out.push((f.z, f.multiplicity.max(1) as u32, res));
        }
    }
    Ok(out)
}

fn audit_roots(
    p: &Potential,
    target: C64,
    found: &[(C64, u32, f64)],
    other_seeds: &[C64],
    r: f64,
) -> Result<()> {
    for (i, f) in found.iter().enumerate() {
        // eigenvalues of other clusters lie within r of their seeds
        let mut rad = other_seeds
            .iter()
            .map(|s| 0.5 * ((f.0 - s).norm() - r))
            .fold(f64::INFINITY, f64::min);
        for (j, g) in found.iter().enumerate() {
            if i != j {
                rad = rad.min(0.5 * (f.0 - g.0).norm());
            }
        }
        let rad = rad.max(1e-9 * (1.0 + f.0.norm()));
        let mut g = |z: C64| -> Result<C64> { Ok(ode::monodromy(p, z, EIGEN_TOL)?.trace() - target) };
        let w = roots::winding_on_circle(&mut g, f.0, rad, 32)?;
        if w != Some(f.1 as i64) {
            return Err(HillError::MissedRoot(format!(
                "winding audit at {}: expected {}, got {:?}",
                f.0, f.1, w
            )));
        }
    }
    Ok(())
}

/// Assignment of roots to seeds minimising Σ|root - seed|²; returns for each
/// seed the index of its root.
fn assign(seeds: &[C64], roots: &[(C64, u32, f64)]) -> Vec<usize> {
    let n = seeds.len();
    if n <= 7 {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = perm.clone();
        let mut best_cost = f64::INFINITY;
        permute(&mut perm, 0, &mut |p| {
            let c: f64 = p.iter().enumerate().map(|(i, &j)| (seeds[i] - roots[j].0).norm_sqr()).sum();
            if c < best_cost - 1e-12 * c.abs() {
                best_cost = c;
                best = p.to_vec();
            }
        });
        best
    } else {
        let mut si: Vec<usize> = (0..n).collect();
        si.sort_by(|&a, &b| seeds[a].re.total_cmp(&seeds[b].re));
        let mut ri: Vec<usize> = (0..n).collect();
        ri.sort_by(|&a, &b| roots[a].0.re.total_cmp(&roots[b].0.re));
        let mut out = vec![0; n];
        for (a, b) in si.iter().zip(&ri) {
            out[*a] = *b;
        }
        out
    }
}

fn permute(p: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, visit);
        p.swap(k, i);
    }
}

fn check_range(n_min: i64, n_max: i64, tol: f64) -> Result<()> {
    if n_min > n_max {
        return Err(HillError::InvalidArgument(format!("empty index range {n_min}..{n_max}")));
    }
    if !(tol > 0.0) {
        return Err(HillError::InvalidArgument("tolerance must be positive".into()));
    }
    Ok(())
}

/// Eigenvalues at a complex quasimomentum, labelled by seed proximity.
pub fn solve_labeled(
    p: &Potential,
    t: C64,
    n_min: i64,
    n_max: i64,
    tol: f64,
    audit: bool,
) -> Result<Vec<LabeledRoot>> {
    check_range(n_min, n_max, tol)?;
    let mean = p.mean();
    let r = p.perturbation_radius() * 1.02 + 1e-9;
    let mut out = Vec::new();
    for c in clusters_for(mean, r, t, n_min, n_max, tol) {
        for root in solve_cluster(p, t, mean, r, &c, tol, audit)? {
            if root.n >= n_min && root.n <= n_max {
                out.push(root);
            }
        }
    }
    out.sort_by_key(|r| r.n);
    Ok(out)
}

/// Bloch eigenvalues λ_n(t) for n in [n_min, n_max], t in (-π, π].
pub fn solve_eigenvalues(
    p: &Potential,
    t: f64,
    n_min: i64,
    n_max: i64,
    tol: f64,
) -> Result<Vec<BlochEigenvalue>> {
    solve_eigenvalues_opt(p, t, n_min, n_max, tol, true)
}

/// As [`solve_eigenvalues`], with the per-root winding audit optional.
pub fn solve_eigenvalues_opt(
    p: &Potential,
    t: f64,
    n_min: i64,
    n_max: i64,
    tol: f64,
    audit: bool,
) -> Result<Vec<BlochEigenvalue>> {
    if !(t > -PI - 1e-12 && t <= PI + 1e-12) {
        return Err(HillError::InvalidArgument(format!("t={t} outside (-π, π]")));
    }
    let roots = solve_labeled(p, C64::new(t.abs(), 0.0), n_min, n_max, tol, audit)?;
    Ok(roots
        .into_iter()
        .map(|r| BlochEigenvalue {
            n: r.n,
            t,
            lambda: r.lambda,
            algebraic_multiplicity: r.multiplicity,
            newton_residual: r.residual,
        })
        .collect())
}

/// Eigenvalue of band n at complex t, Newton-continued from `guess` when the
/// band's seed disc is isolated (falls back to the full cluster solve).
pub fn eigenvalue_near(p: &Potential, n: i64, t: C64, guess: Option<C64>, tol: f64) -> Result<LabeledRoot> {
    let mean = p.mean();
    let r = p.perturbation_radius() * 1.02 + 1e-9;
    if let Some(g) = guess {
        let clusters = clusters_for(mean, r, t, n, n, tol);
        if clusters.len() == 1 && clusters[0].labels.len() == 1 {
            let s = seed(mean, n, t);
            let out = newton(p, 2.0 * t.cos(), g, r.max(1e-3), tol)?;
            if out.converged && (out.z - s).norm() <= 1.001 * r + 1e-9 * (1.0 + s.norm()) {
                return Ok(LabeledRoot {
                    n,
                    lambda: out.z,
                    multiplicity: 1,
                    residual: (out.jet.value.trace() - 2.0 * t.cos()).norm(),
                });
            }
        }
    }
    let roots = solve_labeled(p, t, n, n, tol, false)?;
    Ok(roots[0])
}

/// Continuation of band n over an increasing grid in [0, π].
pub fn track_band(p: &Potential, n: i64, t_grid: &[f64], tol: f64) -> Result<BlochBand> {
    if t_grid.windows(2).any(|w| w[1] < w[0]) || t_grid.iter().any(|t| !(0.0..=PI + 1e-12).contains(t)) {
        return Err(HillError::InvalidArgument("t grid must be ordered in [0, π]".into()));
    }
    let mean = p.mean();
    let r = p.perturbation_radius() * 1.02 + 1e-9;
    let mut samples: Vec<BlochEigenvalue> = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let tc = C64::new(t, 0.0);
        let clusters = clusters_for(mean, r, tc, n, n, tol);
        let cluster = clusters
            .into_iter()
            .find(|c| c.labels.contains(&n))
            .expect("band belongs to a cluster");
        let roots = solve_cluster(p, tc, mean, r, &cluster, tol, false)?;
        let chosen = if samples.is_empty() {
            *roots.iter().find(|x| x.n == n).unwrap()
        } else {
            let k = samples.len();
            let pred = if k >= 2 {
                let (a, b) = (&samples[k - 2], &samples[k - 1]);
                let dt = b.t - a.t;
                if dt > 0.0 {
                    b.lambda + (b.lambda - a.lambda) * ((t - b.t) / dt)
                } else {
                    b.lambda
                }
            } else {
                samples[k - 1].lambda
            };
            *roots
                .iter()
                .min_by(|a, b| (a.lambda - pred).norm().total_cmp(&(b.lambda - pred).norm()))
                .ok_or_else(|| HillError::ContinuationLost(format!("no eigenvalue at t={t}")))?
        };
        let coincident = roots
            .iter()
            .filter(|x| (x.lambda - chosen.lambda).norm() <= tol.sqrt() * (1.0 + chosen.lambda.norm()))
            .count() as u32;
        samples.push(BlochEigenvalue {
            n,
            t,
            lambda: chosen.lambda,
            algebraic_multiplicity: coincident.max(chosen.multiplicity),
            newton_residual: chosen.residual,
        });
    }
    Ok(BlochBand { n, samples })
}

/// Points μ with F'(μ) = 0 inside `window` at which F(μ) = 2cos t for real t.
pub fn find_multiple_eigenvalues(p: &Potential, window: Rect, tol: f64) -> Result<Vec<MultiplePoint>> {
    let mut fd = |z: C64| -> Result<(C64, C64)> {
        let j = ode::monodromy_jet(p, z, 2, tol)?;
        Ok((j.d1.trace(), j.d2.unwrap().trace()))
    };
    let scale = (1.0 + window.center().norm()).sqrt();
    let step = (0.2 * scale).min(0.25 * window.diameter()).max(1e-6);
    let crit = roots::roots_in_rect(&mut fd, window, step)?;
    let mut out = Vec::new();
    // the root of F' moves by (error in F')/F''; polish at a tighter tolerance
    let mut fine = |z: C64| -> Result<(C64, C64)> {
        let j = ode::monodromy_jet(p, z, 2, tol * 1e-2)?;
        Ok((j.d1.trace(), j.d2.unwrap().trace()))
    };
    let crit: Vec<roots::RootInfo> = crit
        .into_iter()
        .map(|c| Ok(roots::RootInfo { z: polish(&mut fine, c.z)?, ..c }))
        .collect::<Result<_>>()?;
    for (i, c) in crit.iter().enumerate() {
        let mu = c.z;
        let jet = ode::monodromy_jet(p, mu, 1, tol)?;
        let f = jet.value.trace();
        // F carries integrator noise of order tol·sqrt(1+|μ|); gaps narrower than that are closed
        let slack = 2.0 * tol * (1.0 + mu.norm()).sqrt();
        if f.im.abs() > slack || f.re.abs() > 2.0 + slack {
            continue;
        }
        let t = arccos_branch(C64::new((f.re / 2.0).clamp(-1.0, 1.0), 0.0));
        // algebraic multiplicity from the winding of F - F(μ)
        let mut rad = 0.5 * (1.0 + mu.norm()).sqrt().min(4.0);
        for (j, o) in crit.iter().enumerate() {
            if i != j {
                rad = rad.min(0.5 * (o.z - mu).norm());
            }
        }
        let mut g = |z: C64| -> Result<C64> { Ok(ode::monodromy(p, z, tol)?.trace() - f) };
        let w = roots::winding_on_circle(&mut g, mu, rad, 32)?
            .ok_or_else(|| HillError::WindingMismatch(format!("multiplicity count at {mu}")))?;
        if w < 2 {
            return Err(HillError::WindingMismatch(format!(
                "critical point {mu} has winding {w} for F - F(mu)"
            )));
        }
        out.push(MultiplePoint { mu, t, m: w as u32 });
    }
    out.sort_by(|a, b| a.mu.re.total_cmp(&b.mu.re).then(a.mu.im.total_cmp(&b.mu.im)));
    Ok(out)
}

/// Newton steps on `fd` from z while they keep shrinking.
fn polish<F>(fd: &mut F, mut z: C64) -> Result<C64>
where
    F: FnMut(C64) -> Result<(C64, C64)>,
{
    let mut prev = f64::INFINITY;
    for _ in 0..12 {
        let (v, d) = fd(z)?;
        if d.norm() == 0.0 {
            break;
        }
        let dz = v / d;
        if !(dz.norm() < 0.5 * prev) {
            break;
        }
        z -= dz;
        prev = dz.norm();
        if prev <= f64::EPSILON * z.norm() {
            break;
        }
    }
    Ok(z)
}

/// Smallest N such that for every 0 < |n| up to the guaranteed isolation bound
/// beyond N the seed disc of n isolates exactly one eigenvalue at t = h and t = π - h.
pub fn asymptotic_window(p: &Potential, h: f64, tol: f64) -> Result<AsymptoticWindow> {
    if !(h > 0.0 && h < 1.0 / (15.0 * PI)) {
        return Err(HillError::InvalidArgument(format!("h={h} outside (0, 1/(15π))")));
    }
    let mean = p.mean();
    let r = p.perturbation_radius();
    // beyond this index the perturbation radius is below the half-gap between seeds
    let cap = (r / (4.0 * PI * h)).ceil() as i64 + 1;
    let mut worst = 0i64;
    for n in 1..=cap {
        for sign in [1i64, -1] {
            let k = sign * n;
            for t in [h, PI - h] {
                let tc = C64::new(t, 0.0);
                let c = seed(mean, k, tc);
                let gap = [k - 1, k + 1, -k, -k - 1, -k + 1]
                    .iter()
                    .filter(|&&j| j != k)
                    .map(|&j| (seed(mean, j, tc) - c).norm())
                    .fold(f64::INFINITY, f64::min);
                let target = 2.0 * t.cos();
                let mut g = |z: C64| -> Result<C64> { Ok(ode::monodromy(p, z, tol)?.trace() - target) };
                let w = roots::winding_on_circle(&mut g, c, 0.5 * gap, 32)?;
                if w != Some(1) {
                    worst = worst.max(n);
                }
            }
        }
    }
    Ok(AsymptoticWindow { h, n: worst })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn free_eigenvalues_exact() {
        let z = Potential::zero();
        let ev = solve_eigenvalues(&z, 1.0, 3, 3, EIGEN_TOL).unwrap();
        let e = (6.0 * PI + 1.0).powi(2);
        assert!((ev[0].lambda - e).norm() < 1e-8);
        let ev = solve_eigenvalues(&z, 0.0, -2, 2, EIGEN_TOL).unwrap();
        for v in &ev {
            let e = (2.0 * PI * v.n as f64).powi(2);
            assert!((v.lambda - e).norm() < 1e-8, "{v:?}");
            if v.n != 0 {
                assert_eq!(v.algebraic_multiplicity, 2);
            }
        }
    }

    #[test]
    fn gasymov_double_root() {
        let g = Potential::fourier(&[(1, c(1.0, 0.0))]).unwrap();
        let ev = solve_eigenvalues(&g, 0.0, -1, 1, EIGEN_TOL).unwrap();
        for v in ev.iter().filter(|v| v.n != 0) {
            assert!((v.lambda - 4.0 * PI * PI).norm() < 1e-7, "{v:?}");
            assert_eq!(v.algebraic_multiplicity, 2);
        }
    }

    #[test]
    fn negative_t_mirrors_positive() {
        let p = Potential::fourier(&[(1, c(0.5, 0.5)), (-1, c(0.1, 0.0))]).unwrap();
        let a = solve_eigenvalues(&p, 0.7, -3, 3, EIGEN_TOL).unwrap();
        let b = solve_eigenvalues(&p, -0.7, -3, 3, EIGEN_TOL).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.lambda, y.lambda);
        }
    }

    #[test]
    fn gasymov_critical_points() {
        let g = Potential::fourier(&[(1, c(1.0, 0.0))]).unwrap();
        let pts = find_multiple_eigenvalues(&g, Rect::new(1.0, -1.0, 150.0, 1.0), EIGEN_TOL).unwrap();
        assert_eq!(pts.len(), 3, "{pts:?}");
        for (k, pt) in pts.iter().enumerate() {
            let k = (k + 1) as f64;
            assert!((pt.mu - (PI * k).powi(2)).norm() < 1e-6, "{pt:?}");
            assert_eq!(pt.m, 2);
            let want = if k as i64 % 2 == 1 { PI } else { 0.0 };
            assert!((pt.t.re - want).abs() < 1e-4 && pt.t.im.abs() < 1e-12);
        }
    }

    #[test]
    fn band_tracking_free() {
        let z = Potential::zero();
        let grid: Vec<f64> = (0..=16).map(|i| PI * i as f64 / 16.0).collect();
        let b = track_band(&z, 1, &grid, EIGEN_TOL).unwrap();
        for s in &b.samples {
            assert!((s.lambda - (2.0 * PI + s.t).powi(2)).norm() < 1e-8);
        }
    }

    #[test]
    fn window_for_gasymov_is_zero() {
        let g = Potential::fourier(&[(1, c(1.0, 0.0))]).unwrap();
        let w = asymptotic_window(&g, 0.02, EIGEN_TOL).unwrap();
        assert_eq!(w.n, 0);
        let m = Potential::fourier(&[(1, c(1.0, 0.0)), (-1, c(1.0, 0.0))]).unwrap();
        let w = asymptotic_window(&m, 0.02, EIGEN_TOL).unwrap();
        assert!(w.n >= 1 && w.n <= 8, "{w:?}");
    }
}
