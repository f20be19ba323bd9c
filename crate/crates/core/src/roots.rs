//! Argument-principle root location for analytic functions given with their derivative.

use num_complex::Complex64 as C64;
use std::f64::consts::PI;

use crate::error::{HillError, Result};

/// Closed axis-aligned rectangle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub re0: f64,
    pub im0: f64,
    pub re1: f64,
    pub im1: f64,
}

impl Rect {
    pub fn new(re0: f64, im0: f64, re1: f64, im1: f64) -> Self {
        Rect {
            re0: re0.min(re1),
            im0: im0.min(im1),
            re1: re0.max(re1),
            im1: im0.max(im1),
        }
    }

    pub fn contains(&self, z: C64, slack: f64) -> bool {
        z.re >= self.re0 - slack
            && z.re <= self.re1 + slack
            && z.im >= self.im0 - slack
            && z.im <= self.im1 + slack
    }

    pub fn center(&self) -> C64 {
        C64::new(0.5 * (self.re0 + self.re1), 0.5 * (self.im0 + self.im1))
    }

    fn corners(&self) -> [C64; 4] {
        [
            C64::new(self.re0, self.im0),
            C64::new(self.re1, self.im0),
            C64::new(self.re1, self.im1),
            C64::new(self.re0, self.im1),
        ]
    }

    pub fn diameter(&self) -> f64 {
        (self.re1 - self.re0).hypot(self.im1 - self.im0)
    }
}

/// Winding number of `f` along the straight path through `path` (closed).
/// Sampling is refined until consecutive values turn by at most π/4.
/// Returns `None` when `f` is (numerically) zero on the path.
pub fn winding_along<F>(f: &mut F, path: &[C64], initial_step: f64) -> Result<Option<i64>>
where
    F: FnMut(C64) -> Result<C64>,
{
    let mut total = 0.0;
    let n = path.len();
    for i in 0..n {
        let a = path[i];
        let b = path[(i + 1) % n];
        let len = (b - a).norm();
        let pieces = ((len / initial_step).ceil() as usize).max(1);
        let mut za = a;
        let mut fa = f(za)?;
        for j in 1..=pieces {
            let zb = a + (b - a) * (j as f64 / pieces as f64);
            let fb = f(zb)?;
            match turn(f, za, fa, zb, fb, 0)? {
                Some(d) => total += d,
                None => return Ok(None),
            }
            za = zb;
            fa = fb;
        }
    }
    Ok(Some((total / (2.0 * PI)).round() as i64))
}

fn turn<F>(f: &mut F, za: C64, fa: C64, zb: C64, fb: C64, depth: usize) -> Result<Option<f64>>
where
    F: FnMut(C64) -> Result<C64>,
{
    if fa.norm() == 0.0 || fb.norm() == 0.0 || !fa.is_finite() || !fb.is_finite() {
        return Ok(None);
    }
    let d = (fb / fa).arg();
    if d.abs() <= PI / 4.0 {
        return Ok(Some(d));
    }
    if depth > 40 {
        return Ok(None);
    }
    let zm = 0.5 * (za + zb);
    let fm = f(zm)?;
    let l = turn(f, za, fa, zm, fm, depth + 1)?;
    let r = turn(f, zm, fm, zb, fb, depth + 1)?;
    Ok(match (l, r) {
        (Some(x), Some(y)) => Some(x + y),
        _ => None,
    })
}

/// Winding number of `f` around the circle |z - c| = r sampled at `m` points,
/// doubling the sampling until every turn is below π/4.
pub fn winding_on_circle<F>(f: &mut F, c: C64, r: f64, mut m: usize) -> Result<Option<i64>>
where
    F: FnMut(C64) -> Result<C64>,
{
    loop {
        let vals: Result<Vec<C64>> = (0..m)
            .map(|i| f(c + C64::from_polar(r, 2.0 * PI * i as f64 / m as f64)))
            .collect();
        let vals = vals?;
        if let Some(w) = crate::quad::winding_number(&vals, PI / 4.0) {
            return Ok(Some(w));
        }
        if m >= 1 << 14 {
            return Ok(None);
        }
        m *= 2;
    }
}

/// A root with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootInfo {
    pub z: C64,
    pub multiplicity: i64,
}

/// All roots of `f` inside `rect` by recursive subdivision and Newton. `fd`
/// returns (f, f'). `step` is the initial boundary sampling step.
pub fn roots_in_rect<F>(fd: &mut F, rect: Rect, step: f64) -> Result<Vec<RootInfo>>
where
    F: FnMut(C64) -> Result<(C64, C64)>,
{
    let mut out = Vec::new();
    let count = rect_count(fd, rect, step)?.ok_or_else(|| {
        HillError::WindingMismatch("function vanishes on the search window boundary".into())
    })?;
    subdivide(fd, rect, count, step, 0, &mut out)?;
    Ok(out)
}

fn rect_count<F>(fd: &mut F, rect: Rect, step: f64) -> Result<Option<i64>>
where
    F: FnMut(C64) -> Result<(C64, C64)>,
{
    let mut g = |z: C64| fd(z).map(|v| v.0);
    winding_along(&mut g, &rect.corners(), step)
}

fn newton_in<F>(fd: &mut F, rect: Rect, z0: C64) -> Result<Option<C64>>
where
    F: FnMut(C64) -> Result<(C64, C64)>,
{
    let mut z = z0;
    let cap = rect.diameter();
    let mut prev = f64::INFINITY;
    for _ in 0..60 {
        let (v, d) = fd(z)?;
        if d.norm() == 0.0 {
            return Ok(None);
        }
        let mut dz = v / d;
        if dz.norm() > cap {
            dz *= cap / dz.norm();
        }
        z -= dz;
        let small = dz.norm() <= 1e-14 * (1.0 + z.norm());
        if small || (dz.norm() >= 0.5 * prev && dz.norm() < 1e-9 * (1.0 + z.norm())) {
            let slack = 1e-9 * (1.0 + z.norm()) + 1e-3 * cap;
            return Ok(rect.contains(z, slack).then_some(z));
        }
        prev = dz.norm();
    }
    Ok(None)
}

fn subdivide<F>(
    fd: &mut F,
    rect: Rect,
    count: i64,
    step: f64,
    depth: usize,
    out: &mut Vec<RootInfo>,
) -> Result<()>
where
    F: FnMut(C64) -> Result<(C64, C64)>,
{
    if count <= 0 {
        return Ok(());
    }
    let tiny = rect.diameter() < 1e-9 * (1.0 + rect.center().norm());
    if count == 1 || tiny || depth > 60 {
        if let Some(z) = newton_in(fd, rect, rect.center())? {
            // a root sitting on a cut is counted partly on each side
            match out.iter_mut().find(|r| (r.z - z).norm() <= 1e-7 * (1.0 + z.norm())) {
                Some(r) => r.multiplicity += count,
                None => out.push(RootInfo {
                    z,
                    multiplicity: count,
                }),
            }
            return Ok(());
        }
        if tiny || depth > 60 {
            out.push(RootInfo {
                z: rect.center(),
                multiplicity: count,
            });
            return Ok(());
        }
    }
    // split off-centre so that symmetric root sets do not land on the cut
    let wide = rect.re1 - rect.re0 >= rect.im1 - rect.im0;
    for frac in [0.4637, 0.5371, 0.4219, 0.5823] {
        let (a, b) = if wide {
            let cut = rect.re0 + frac * (rect.re1 - rect.re0);
            (
                Rect::new(rect.re0, rect.im0, cut, rect.im1),
                Rect::new(cut, rect.im0, rect.re1, rect.im1),
            )
        } else {
            let cut = rect.im0 + frac * (rect.im1 - rect.im0);
            (
                Rect::new(rect.re0, rect.im0, rect.re1, cut),
                Rect::new(rect.re0, cut, rect.re1, rect.im1),
            )
        };
        let sub_step = step.min(0.25 * a.diameter().max(1e-300));
        let ca = rect_count(fd, a, sub_step)?;
        if let Some(ca) = ca {
            subdivide(fd, a, ca, sub_step, depth + 1, out)?;
            subdivide(fd, b, count - ca, sub_step, depth + 1, out)?;
            return Ok(());
        }
    }
    Err(HillError::WindingMismatch(format!(
        "could not split window around {}",
        rect.center()
    )))
}
