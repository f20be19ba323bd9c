use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use hillspec_core::discriminant;
use hillspec_core::expansion::{self, Mode, ReconstructOptions, SourceFunction};
use hillspec_core::roots::Rect;
use hillspec_core::singular;
use hillspec_core::spectrum::{self, BlochBand, EIGEN_TOL};
use hillspec_core::{Complex64 as C64, HillError, Potential};
use rayon::prelude::*;
use serde::Serialize;

use crate::output::{self, cnum, num, ErrorEntry};

/// Why a command stopped; maps onto the process exit code.
#[derive(Debug)]
pub enum Failure {
    Validation(Vec<ErrorEntry>),
    Numerical(Vec<ErrorEntry>),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    pub fn entries(&self) -> &[ErrorEntry] {
        match self {
            Failure::Validation(e) | Failure::Numerical(e) => e,
        }
    }

    pub fn invalid(kind: &str, message: impl Into<String>) -> Self {
        Failure::Validation(vec![ErrorEntry {
            kind: kind.into(),
            message: message.into(),
        }])
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::invalid("Io", format!("{}: {e}", path.display()))
    }
}

impl From<HillError> for Failure {
    fn from(e: HillError) -> Self {
        let entry = ErrorEntry::from(&e);
        if e.is_validation() {
            Failure::Validation(vec![entry])
        } else {
            Failure::Numerical(vec![entry])
        }
    }
}

pub type CmdResult = std::result::Result<(), Failure>;

pub fn check_tol(tol: f64) -> Result<(), Failure> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Failure::invalid("InvalidArgument", format!("tolerance {tol} must be positive")));
    }
    Ok(())
}

pub fn check_h(h: f64) -> Result<(), Failure> {
    if !(h > 0.0 && h < 1.0 / (15.0 * PI)) {
        return Err(Failure::invalid("InvalidArgument", format!("h={h} outside (0, 1/(15π))")));
    }
    Ok(())
}

pub fn load_potential(path: &Path) -> Result<Potential, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    Ok(Potential::from_json(&text)?)
}

pub fn load_function(path: &Path) -> Result<SourceFunction, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    Ok(SourceFunction::from_json(&text)?)
}

/// "a:b:n" → n equispaced values from a to b.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::invalid("InvalidArgument", format!("grid '{spec}' is not of the form a:b:n"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, n] = parts.as_slice() else { return Err(bad()) };
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n == 0 || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
}

#[derive(Serialize)]
struct Envelope<T: Serialize> {
    #[serde(flatten)]
    body: T,
    errors: Vec<ErrorEntry>,
}

fn write_json<T: Serialize>(out: Option<&Path>, body: T) -> CmdResult {
    let text = output::to_json(&Envelope { body, errors: Vec::new() });
    output::emit(out, &text).map_err(|e| Failure::io(out.unwrap_or(Path::new("<stdout>")), e))
}

fn write_text(out: Option<&Path>, text: &str) -> CmdResult {
    output::emit(out, text).map_err(|e| Failure::io(out.unwrap_or(Path::new("<stdout>")), e))
}

pub fn discriminant(potential: &Path, lambda_grid: &str, tol: f64, out: Option<&Path>) -> CmdResult {
    check_tol(tol)?;
    let p = load_potential(potential)?;
    let grid = parse_grid(lambda_grid)?;
    let values: Vec<_> = grid
        .par_iter()
        .map(|&l| discriminant::hill_discriminant(&p, C64::new(l, 0.0), tol))
        .collect::<Result<_, _>>()?;
    let mut csv = String::from("lambda,F_re,F_im,Fprime_re,Fprime_im\n");
    for v in &values {
        csv.push_str(&format!("{},{},{}\n", num(v.lambda.re), cnum(v.f), cnum(v.fprime)));
    }
    write_text(out, &csv)
}

#[derive(Serialize)]
struct BandsOut {
    t_grid: Vec<f64>,
    bands: Vec<BlochBand>,
}

pub fn bands(
    potential: &Path,
    n_min: i64,
    n_max: i64,
    t_points: usize,
    tol: f64,
    out: Option<&Path>,
    csv: Option<&Path>,
) -> CmdResult {
    check_tol(tol)?;
    if n_min > n_max {
        return Err(Failure::invalid("InvalidArgument", format!("empty band range {n_min}..{n_max}")));
    }
    if t_points < 2 {
        return Err(Failure::invalid("InvalidArgument", "need at least two t points"));
    }
    let p = load_potential(potential)?;
    let t_grid: Vec<f64> = (0..t_points).map(|i| PI * i as f64 / (t_points - 1) as f64).collect();
    let bands: Vec<BlochBand> = (n_min..=n_max)
        .into_par_iter()
        .map(|n| spectrum::track_band(&p, n, &t_grid, tol))
        .collect::<Result<_, _>>()?;
    if let Some(path) = csv {
        let mut text = String::from("n,t,lambda_re,lambda_im\n");
        for b in &bands {
            for s in &b.samples {
                text.push_str(&format!("{},{},{}\n", b.n, num(s.t), cnum(s.lambda)));
            }
        }
        write_text(Some(path), &text)?;
    }
    write_json(out, BandsOut { t_grid, bands })
}

#[derive(Serialize)]
struct SingularitiesOut {
    window: [f64; 4],
    h: f64,
    records: Vec<singular::SingularityRecord>,
    singular_quasimomenta: Vec<singular::SingularQuasimomentum>,
}

/// Corners (a + ib) and (c + id). A window of zero height is widened to
/// |Im λ| ≤ 1 so the rectangle has an interior.
pub fn window_rect(w: [f64; 4]) -> Result<Rect, Failure> {
    let [a, b, c, d] = w;
    if w.iter().any(|v| !v.is_finite()) || a == c {
        return Err(Failure::invalid("InvalidArgument", format!("degenerate window {w:?}")));
    }
    let (b, d) = if b == d { (b - 1.0, d + 1.0) } else { (b, d) };
    Ok(Rect::new(a, b, c, d))
}

pub fn singularities(potential: &Path, window: [f64; 4], h: f64, tol: f64, out: Option<&Path>) -> CmdResult {
    check_tol(tol)?;
    check_h(h)?;
    let rect = window_rect(window)?;
    let p = load_potential(potential)?;
    let records = singular::find_singularities(&p, rect, h, tol)?;
    let singular_quasimomenta = singular::singular_quasimomenta(&records, h);
    write_json(
        out,
        SingularitiesOut {
            window,
            h,
            records,
            singular_quasimomenta,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Contour,
    Pv,
    Both,
}

impl ModeArg {
    fn modes(self) -> Vec<Mode> {
        match self {
            ModeArg::Contour => vec![Mode::Contour],
            ModeArg::Pv => vec![Mode::Pv],
            ModeArg::Both => vec![Mode::Contour, Mode::Pv],
        }
    }
}

#[derive(Serialize)]
struct ExpandOut {
    plan: expansion::ExpansionPlan,
    reports: Vec<expansion::ReconstructionReport>,
}

pub struct ExpandArgs {
    pub potential: PathBuf,
    pub function: PathBuf,
    pub h: f64,
    pub n_max: i64,
    pub m: i64,
    pub mode: ModeArg,
    pub tol: f64,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

pub fn expand(a: &ExpandArgs) -> CmdResult {
    check_tol(a.tol)?;
    check_h(a.h)?;
    if a.n_max < 1 || a.m < 1 {
        return Err(Failure::invalid("InvalidArgument", "n-max and m must be positive"));
    }
    let p = load_potential(&a.potential)?;
    let f = load_function(&a.function)?;
    let plan = expansion::plan(&p, a.h, a.n_max, a.tol)?;
    let opts = ReconstructOptions {
        h: a.h,
        n_max: a.n_max,
        m: a.m,
        tol: a.tol,
    };
    let reports = expansion::reconstruct_modes(&p, &f, &plan, &opts, &a.mode.modes())?;
    if let Some(path) = &a.csv {
        let mut text = String::from("mode,x,f,f_hat_re,f_hat_im\n");
        for r in &reports {
            let tag = match r.mode {
                Mode::Contour => "contour",
                Mode::Pv => "pv",
            };
            for ((x, fv), fh) in r.x.iter().zip(&r.f).zip(&r.f_hat) {
                text.push_str(&format!("{tag},{},{},{}\n", num(*x), num(*fv), cnum(*fh)));
            }
        }
        write_text(Some(path), &text)?;
    }
    write_json(a.out.as_deref(), ExpandOut { plan, reports })
}

/// Default integrator tolerance shown in --help.
pub const DEFAULT_TOL: f64 = EIGEN_TOL;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("2:5:1").unwrap(), vec![2.0]);
        for bad in ["0:1", "a:1:2", "0:1:0", "0:1:2:3"] {
            assert_eq!(parse_grid(bad).unwrap_err().code(), 2, "{bad}");
        }
    }

    #[test]
    fn flat_windows_are_widened() {
        let r = window_rect([1.0, 0.0, 150.0, 0.0]).unwrap();
        assert_eq!((r.im0, r.im1), (-1.0, 1.0));
        assert!(window_rect([1.0, 0.0, 1.0, 2.0]).is_err());
    }

    #[test]
    fn numerical_errors_exit_3() {
        assert_eq!(Failure::from(HillError::MissedRoot("x".into())).code(), 3);
        assert_eq!(Failure::from(HillError::MalformedConfig("x".into())).code(), 2);
    }
}
