//! Fundamental solutions of -y'' + q y = λ y via an embedded Runge-Kutta 8(5,3) pair.

use num_complex::Complex64 as C64;

use crate::error::{HillError, Result};
use crate::potential::Potential;
use crate::tableau::{A, B, BHH, C, ER};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Steps are capped at `STEP_PHASE / sqrt(1+|λ|)` so the phase advance per step stays bounded.
const STEP_PHASE: f64 = 2.0;
const MAX_STEPS: usize = 5_000_000;

/// Values at x=1 of θ, φ and their x-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monodromy {
    pub theta: C64,
    pub phi: C64,
    pub theta_dx: C64,
    pub phi_dx: C64,
}

impl Monodromy {
    /// Hill discriminant F = θ(1) + φ'(1).
    pub fn trace(&self) -> C64 {
        self.theta + self.phi_dx
    }

    /// θφ' - θ'φ.
    pub fn wronskian(&self) -> C64 {
        self.theta * self.phi_dx - self.theta_dx * self.phi
    }

    fn from_slice(y: &[C64]) -> Self {
        Monodromy {
            theta: y[0],
            theta_dx: y[1],
            phi: y[2],
            phi_dx: y[3],
        }
    }
}

/// Monodromy entries together with their first (and optionally second) λ-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonodromyJet {
    pub value: Monodromy,
    pub d1: Monodromy,
    pub d2: Option<Monodromy>,
}

/// θ, φ and x-derivatives on the uniform grid x_i = i/(n-1).
#[derive(Debug, Clone)]
pub struct FundamentalSolution {
    pub lambda: C64,
    pub grid: Vec<f64>,
    pub theta: Vec<C64>,
    pub theta_dx: Vec<C64>,
    pub phi: Vec<C64>,
    pub phi_dx: Vec<C64>,
    pub monodromy: Monodromy,
    /// λ-derivative of the monodromy entries, when integrated alongside.
    pub monodromy_dlambda: Option<Monodromy>,
}

impl FundamentalSolution {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.grid.len() - 1) as f64
    }
}

/// Integration controls for [`dop853`].
#[derive(Debug, Clone, Copy)]
pub(crate) struct StepControl {
    pub tol: f64,
    pub h_max: f64,
}

/// Adaptive DOP853 from `x0` through the increasing `stops`; `on_stop` sees the
/// state at every stop. `scale[i]` is the natural magnitude of component i, used
/// as the absolute part of the mixed error norm.
pub(crate) fn dop853<const N: usize, F, S>(
    mut f: F,
    x0: f64,
    stops: &[f64],
    y0: [C64; N],
    scale: &[f64; N],
    ctl: StepControl,
    mut on_stop: S,
) -> Result<[C64; N]>
where
    F: FnMut(f64, &[C64; N]) -> [C64; N],
    S: FnMut(usize, &[C64; N]),
{
    let safe = 0.9;
    let facc1 = 1.0 / 0.333;
    let facc2 = 1.0 / 6.0;
    let mut x = x0;
    let mut y = y0;
    let mut k: [[C64; N]; 12] = [[ZERO; N]; 12];
    k[0] = f(x, &y);
    let mut h = (0.05f64).min(ctl.h_max);
    let mut steps = 0usize;
    let mut last_rejected = false;

    for (si, &xs) in stops.iter().enumerate() {
        while xs - x > 1e-15 * (1.0 + xs.abs()) {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(HillError::ToleranceNotMet(format!(
                    "step budget exhausted at x={x}"
                )));
            }
            let mut hh = h.min(ctl.h_max);
            let clipped = x + hh >= xs;
            if clipped {
                hh = xs - x;
            }
            let mut ys = [ZERO; N];
            for s in 1..12 {
                for i in 0..N {
                    let mut acc = ZERO;
                    for j in 0..s {
                        let a = A[s][j];
                        if a != 0.0 {
                            acc += k[j][i] * a;
                        }
                    }
                    ys[i] = y[i] + acc * hh;
                }
                k[s] = f(x + C[s] * hh, &ys);
            }
            let mut y1 = [ZERO; N];
            let mut err = 0.0;
            let mut err2 = 0.0;
            for i in 0..N {
                let mut inc = ZERO;
                let mut e = ZERO;
                for j in 0..12 {
                    if B[j] != 0.0 {
                        inc += k[j][i] * B[j];
                    }
                    if ER[j] != 0.0 {
                        e += k[j][i] * ER[j];
                    }
                }
                y1[i] = y[i] + inc * hh;
                let sk = ctl.tol * (scale[i] + y[i].norm().max(y1[i].norm()));
                let e2 = inc - k[0][i] * BHH[0] - k[8][i] * BHH[1] - k[11][i] * BHH[2];
                err2 += (e2.norm() / sk).powi(2);
                err += (e.norm() / sk).powi(2);
            }
            if !err.is_finite() || y1.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
                if hh < 1e-12 {
                    return Err(if y1.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
                        // finite state, overflowing error estimate: tol is below what f64 resolves
                        HillError::ToleranceNotMet(format!("tolerance {:e} unreachable at x={x}", ctl.tol))
                    } else {
                        HillError::NonFiniteState { x }
                    });
                }
                h = hh * 0.25;
                last_rejected = true;
                continue;
            }
            let mut deno = err + 0.01 * err2;
            if deno <= 0.0 {
                deno = 1.0;
            }
            let err = hh * err * (1.0 / (deno * N as f64)).sqrt();
            let fac11 = err.powf(0.125);
            let fac = (fac11 / safe).clamp(facc2, facc1);
            let mut hnew = hh / fac;
            if err <= 1.0 {
                x = if clipped { xs } else { x + hh };
                y = y1;
                k[0] = f(x, &y);
                if last_rejected {
                    hnew = hnew.min(hh);
                }
                last_rejected = false;
                // a clipped step says little about the natural step length
                h = if clipped { hnew.max(h) } else { hnew };
            } else {
                hnew = hh / (fac11 / safe).min(facc1);
                last_rejected = true;
                h = hnew;
                if h < 1e-14 * (1.0 + x.abs()) {
                    return Err(HillError::ToleranceNotMet(format!(
                        "step size underflow at x={x}"
                    )));
                }
            }
        }
        on_stop(si, &y);
    }
    Ok(y)
}

#[inline]
fn hill_rhs<const N: usize>(q: C64, lambda: C64, y: &[C64; N]) -> [C64; N] {
    let mut d = [ZERO; N];
    let qm = q - lambda;
    let mut l = 0;
    while 4 * l < N {
        for s in 0..2 {
            let i = 4 * l + 2 * s;
            d[i] = y[i + 1];
            let mut v = qm * y[i];
            if l > 0 {
                v -= y[i - 4] * l as f64;
            }
            d[i + 1] = v;
        }
        l += 1;
    }
    d
}

fn initial_state<const N: usize>() -> [C64; N] {
    let mut y = [ZERO; N];
    y[0] = ONE;
    y[3] = ONE;
    y
}

fn scales<const N: usize>(lambda: C64) -> [f64; N] {
    let kappa = (1.0 + lambda.norm()).sqrt();
    let mut s = [0.0; N];
    for (i, v) in s.iter_mut().enumerate() {
        let level = (i / 4) as i32;
        let local = i % 4;
        // θ ~ 1, θ' ~ κ, φ ~ 1/κ, φ' ~ 1; each λ-derivative costs one power of κ
        let base = match local {
            0 => 0,
            1 => 1,
            2 => -1,
            _ => 0,
        };
        *v = kappa.powi(base - level);
    }
    s
}

fn control(lambda: C64, tol: f64, h_cap: f64) -> StepControl {
    StepControl {
        tol,
        h_max: (STEP_PHASE / (1.0 + lambda.norm()).sqrt()).min(h_cap),
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(HillError::InvalidArgument(format!("tolerance must be positive, got {tol}")))
    }
}

fn run<const N: usize>(p: &Potential, lambda: C64, tol: f64) -> Result<[C64; N]> {
    check_tol(tol)?;
    dop853(
        |x, y: &[C64; N]| hill_rhs(p.eval(x), lambda, y),
        0.0,
        &[1.0],
        initial_state::<N>(),
        &scales::<N>(lambda),
        control(lambda, tol, 0.25),
        |_, _| {},
    )
}

/// Monodromy entries at λ.
pub fn monodromy(p: &Potential, lambda: C64, tol: f64) -> Result<Monodromy> {
    let y = run::<4>(p, lambda, tol)?;
    Ok(Monodromy::from_slice(&y))
}

/// Monodromy entries with λ-derivatives up to `order` (1 or 2), from the
/// variational system integrated alongside the solutions.
pub fn monodromy_jet(p: &Potential, lambda: C64, order: usize, tol: f64) -> Result<MonodromyJet> {
    match order {
        1 => {
            let y = run::<8>(p, lambda, tol)?;
            Ok(MonodromyJet {
                value: Monodromy::from_slice(&y[0..4]),
                d1: Monodromy::from_slice(&y[4..8]),
                d2: None,
            })
        }
        2 => {
            let y = run::<12>(p, lambda, tol)?;
            Ok(MonodromyJet {
                value: Monodromy::from_slice(&y[0..4]),
                d1: Monodromy::from_slice(&y[4..8]),
                d2: Some(Monodromy::from_slice(&y[8..12])),
            })
        }
        _ => Err(HillError::InvalidArgument(format!("jet order {order} not in {{1,2}}"))),
    }
}

fn uniform_grid(grid_size: usize) -> Result<Vec<f64>> {
    if grid_size < 2 {
        return Err(HillError::InvalidArgument(format!("grid_size {grid_size} < 2")));
    }
    let n = grid_size - 1;
    Ok((0..=n).map(|i| i as f64 / n as f64).collect())
}

fn profile<const N: usize>(
    p: &Potential,
    lambda: C64,
    grid_size: usize,
    tol: f64,
) -> Result<(FundamentalSolution, [C64; N])> {
    check_tol(tol)?;
    let grid = uniform_grid(grid_size)?;
    let mut theta = vec![ONE; grid_size];
    let mut theta_dx = vec![ZERO; grid_size];
    let mut phi = vec![ZERO; grid_size];
    let mut phi_dx = vec![ONE; grid_size];
    let y = dop853(
        |x, y: &[C64; N]| hill_rhs(p.eval(x), lambda, y),
        0.0,
        &grid[1..],
        initial_state::<N>(),
        &scales::<N>(lambda),
        control(lambda, tol, 0.25),
        |i, y| {
            theta[i + 1] = y[0];
            theta_dx[i + 1] = y[1];
            phi[i + 1] = y[2];
            phi_dx[i + 1] = y[3];
        },
    )?;
    let monodromy = Monodromy::from_slice(&y[0..4]);
    Ok((
        FundamentalSolution {
            lambda,
            grid,
            theta,
            theta_dx,
            phi,
            phi_dx,
            monodromy,
            monodromy_dlambda: None,
        },
        y,
    ))
}

/// Fundamental solutions reported on a uniform grid of `grid_size` points.
pub fn integrate_fundamental(
    p: &Potential,
    lambda: C64,
    grid_size: usize,
    tol: f64,
) -> Result<FundamentalSolution> {
    Ok(profile::<4>(p, lambda, grid_size, tol)?.0)
}

/// As [`integrate_fundamental`], additionally carrying the λ-derivative of the monodromy.
pub fn integrate_fundamental_jet(
    p: &Potential,
    lambda: C64,
    grid_size: usize,
    tol: f64,
) -> Result<FundamentalSolution> {
    let (mut fs, y) = profile::<8>(p, lambda, grid_size, tol)?;
    fs.monodromy_dlambda = Some(Monodromy::from_slice(&y[4..8]));
    Ok(fs)
}

/// Fundamental solutions together with the running integrals
/// ∫₀ˣ θ(s)f(s)ds and ∫₀ˣ φ(s)f(s)ds of a source term, all on a uniform grid.
pub fn integrate_with_source<S>(
    p: &Potential,
    lambda: C64,
    grid_size: usize,
    tol: f64,
    source: S,
) -> Result<(FundamentalSolution, Vec<C64>, Vec<C64>)>
where
    S: Fn(f64) -> C64,
{
    check_tol(tol)?;
    let grid = uniform_grid(grid_size)?;
    let mut theta = vec![ONE; grid_size];
    let mut theta_dx = vec![ZERO; grid_size];
    let mut phi = vec![ZERO; grid_size];
    let mut phi_dx = vec![ONE; grid_size];
    let mut i_theta = vec![ZERO; grid_size];
    let mut i_phi = vec![ZERO; grid_size];
    let base = scales::<4>(lambda);
    let scale = [base[0], base[1], base[2], base[3], base[0], base[2]];
    let mut y0 = [ZERO; 6];
    y0[0] = ONE;
    y0[3] = ONE;
    let y = dop853(
        |x, y: &[C64; 6]| {
            let qm = p.eval(x) - lambda;
            let f = source(x);
            [y[1], qm * y[0], y[3], qm * y[2], y[0] * f, y[2] * f]
        },
        0.0,
        &grid[1..],
        y0,
        &scale,
        control(lambda, tol, 0.25),
        |i, y| {
            theta[i + 1] = y[0];
            theta_dx[i + 1] = y[1];
            phi[i + 1] = y[2];
            phi_dx[i + 1] = y[3];
            i_theta[i + 1] = y[4];
            i_phi[i + 1] = y[5];
        },
    )?;
    let fs = FundamentalSolution {
        lambda,
        grid,
        theta,
        theta_dx,
        phi,
        phi_dx,
        monodromy: Monodromy::from_slice(&y[0..4]),
        monodromy_dlambda: None,
    };
    Ok((fs, i_theta, i_phi))
}

/// max over the grid of |θφ' - θ'φ - 1|.
pub fn wronskian_defect(fs: &FundamentalSolution) -> f64 {
    (0..fs.len())
        .map(|i| (fs.theta[i] * fs.phi_dx[i] - fs.theta_dx[i] * fs.phi[i] - ONE).norm())
        .fold(0.0, f64::max)
}
