//! Batch evaluation over `(T, H)` grids and CSV output.
//!
//! Points are evaluated in parallel and collected in grid order, so the
//! output does not depend on scheduling. A failing point becomes a row with
//! NaN values (and state `E` in the gap surface) instead of aborting the
//! sweep, unless more than 10% of the points fail.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{DomainBox, MaterialParams};
use crate::solvers::{solve_gap_squared, solve_hc, uniform_grid, SolverSpec};
use crate::thermo::{entropy_gap, entropy_gap_fd, psi, DosModel, DEFAULT_FD_STEP_FRACTION};

const MAX_FAILURE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(min: f64, max: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Sweep(format!("grid needs n >= 2 (got {n})")));
        }
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(Error::Sweep(format!(
                "grid needs min < max (got {min}, {max})"
            )));
        }
        Ok(Grid { min, max, n })
    }

    pub fn points(&self) -> Vec<f64> {
        uniform_grid(self.min, self.max, self.n)
    }
}

/// Field axis of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FieldGrid {
    Fixed(Grid),
    /// `n` points from 0 to `H_c(T)` for each temperature.
    Auto {
        n: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Output {
    HcCurve,
    GapSurface,
    PsiSurface,
    EntropyCurve,
}

impl Output {
    pub const ALL: [Output; 4] = [
        Output::HcCurve,
        Output::GapSurface,
        Output::PsiSurface,
        Output::EntropyCurve,
    ];

    /// Suffix used in `<prefix>_<suffix>.csv`.
    pub fn suffix(self) -> &'static str {
        match self {
            Output::HcCurve => "hc",
            Output::GapSurface => "gap",
            Output::PsiSurface => "psi",
            Output::EntropyCurve => "entropy",
        }
    }

    pub fn header(self) -> &'static str {
        match self {
            Output::HcCurve => "T,H_c",
            Output::GapSurface => "T,H,Y,delta,state",
            Output::PsiSurface => "T,H,omega_S,omega_N,psi",
            Output::EntropyCurve => "T,H_c,dS_formula,dS_fd",
        }
    }
}

impl FromStr for Output {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hc" | "hc_curve" => Ok(Output::HcCurve),
            "gap" | "gap_surface" => Ok(Output::GapSurface),
            "psi" | "psi_surface" => Ok(Output::PsiSurface),
            "entropy" | "entropy_curve" => Ok(Output::EntropyCurve),
            other => Err(Error::Sweep(format!(
                "unknown output `{other}` (expected hc, gap, psi or entropy)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub t_grid: Grid,
    pub h_grid: FieldGrid,
    pub outputs: BTreeSet<Output>,
    /// Step of the finite-difference entropy estimate; `DEFAULT_FD_STEP_FRACTION * tau1`
    /// when absent.
    pub fd_step: Option<f64>,
}

impl SweepSpec {
    /// Checks grid sizes and that the grids lie inside the domain box.
    pub fn validate(&self, dbox: &DomainBox) -> Result<()> {
        let t = Grid::new(self.t_grid.min, self.t_grid.max, self.t_grid.n)?;
        if t.min < dbox.t0 || t.max > dbox.tau1 {
            return Err(Error::Sweep(format!(
                "T grid [{}, {}] leaves [T0, tau1] = [{}, {}]",
                t.min, t.max, dbox.t0, dbox.tau1
            )));
        }
        match self.h_grid {
            FieldGrid::Fixed(g) => {
                let g = Grid::new(g.min, g.max, g.n)?;
                if g.min < 0.0 || g.max > dbox.h_max {
                    return Err(Error::Sweep(format!(
                        "H grid [{}, {}] leaves [0, H_max] = [0, {}]",
                        g.min, g.max, dbox.h_max
                    )));
                }
            }
            FieldGrid::Auto { n } if n < 2 => {
                return Err(Error::Sweep(format!("grid needs n >= 2 (got {n})")));
            }
            FieldGrid::Auto { .. } => {}
        }
        if self.outputs.is_empty() {
            return Err(Error::Sweep("no outputs requested".into()));
        }
        if let Some(step) = self.fd_step {
            if !(step > 0.0 && step < t.min) {
                return Err(Error::Sweep(format!("bad finite-difference step {step}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowState {
    /// Superconducting.
    S,
    /// Normal.
    N,
    /// The solver failed at this point.
    E,
}

impl fmt::Display for RowState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowState::S => "S",
            RowState::N => "N",
            RowState::E => "E",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HcRow {
    pub t: f64,
    pub h_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub t: f64,
    pub h: f64,
    pub y: f64,
    pub delta: f64,
    pub state: RowState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiRow {
    pub t: f64,
    pub h: f64,
    pub omega_s: f64,
    pub omega_n: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyRow {
    pub t: f64,
    pub h_c: f64,
    pub ds_formula: f64,
    pub ds_fd: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub hc: Option<Vec<HcRow>>,
    pub gap: Option<Vec<GapRow>>,
    pub psi: Option<Vec<PsiRow>>,
    pub entropy: Option<Vec<EntropyRow>>,
    pub points: usize,
    pub failures: usize,
}

struct Tally {
    points: usize,
    failures: usize,
}

impl Tally {
    fn record<T>(&mut self, results: &[Result<T>]) {
        self.points += results.len();
        for r in results {
            if let Err(e) = r {
                self.failures += 1;
                log::warn!("sweep point failed: {e}");
            }
        }
    }
}

/// Evaluates every requested output over the grid.
pub fn run_sweep(
    spec: &SweepSpec,
    p: &MaterialParams,
    dos: &DosModel,
    dbox: &DomainBox,
    solver: &SolverSpec,
) -> Result<Dataset> {
    spec.validate(dbox)?;
    let temps = spec.t_grid.points();
    let mut tally = Tally {
        points: 0,
        failures: 0,
    };

    let needs_hc = spec.outputs.contains(&Output::HcCurve)
        || matches!(spec.h_grid, FieldGrid::Auto { .. })
            && (spec.outputs.contains(&Output::GapSurface)
                || spec.outputs.contains(&Output::PsiSurface));
    let hc: Vec<Result<f64>> = if needs_hc {
        temps
            .par_iter()
            .map(|&t| solve_hc(t, p, dbox, solver))
            .collect()
    } else {
        Vec::new()
    };
    let mut out = Dataset::default();
    if spec.outputs.contains(&Output::HcCurve) {
        tally.record(&hc);
        out.hc = Some(
            temps
                .iter()
                .zip(&hc)
                .map(|(&t, r)| HcRow {
                    t,
                    h_c: *r.as_ref().unwrap_or(&f64::NAN),
                })
                .collect(),
        );
    }

    // (T, H) points in row-major order; None where the auto grid has no H_c.
    let plane: Vec<(f64, Option<f64>)> = match spec.h_grid {
        FieldGrid::Fixed(g) => {
            let fields = g.points();
            temps
                .iter()
                .flat_map(|&t| fields.iter().map(move |&h| (t, Some(h))))
                .collect()
        }
        FieldGrid::Auto { n } if !hc.is_empty() => temps
            .iter()
            .zip(&hc)
            .flat_map(|(&t, r)| match r {
                Ok(h_c) => uniform_grid(0.0, *h_c, n)
                    .into_iter()
                    .map(|h| (t, Some(h)))
                    .collect::<Vec<_>>(),
                Err(_) => vec![(t, None); n],
            })
            .collect(),
        FieldGrid::Auto { .. } => Vec::new(),
    };
    let missing = || Error::Sweep("critical field unavailable for auto grid".into());

    if spec.outputs.contains(&Output::GapSurface) {
        let results: Vec<Result<GapRow>> = plane
            .par_iter()
            .map(|&(t, h)| {
                let h = h.ok_or_else(missing)?;
                let g = solve_gap_squared(t, h, p, dbox, solver)?;
                Ok(GapRow {
                    t,
                    h,
                    y: g.y,
                    delta: g.delta,
                    state: if g.boundary { RowState::N } else { RowState::S },
                })
            })
            .collect();
        tally.record(&results);
        out.gap = Some(
            plane
                .iter()
                .zip(results)
                .map(|(&(t, h), r)| {
                    r.unwrap_or(GapRow {
                        t,
                        h: h.unwrap_or(f64::NAN),
                        y: f64::NAN,
                        delta: f64::NAN,
                        state: RowState::E,
                    })
                })
                .collect(),
        );
    }

    if spec.outputs.contains(&Output::PsiSurface) {
        let results: Vec<Result<PsiRow>> = plane
            .par_iter()
            .map(|&(t, h)| {
                let h = h.ok_or_else(missing)?;
                let tp = psi(t, h, p, dos, dbox, solver)?;
                Ok(PsiRow {
                    t,
                    h,
                    omega_s: tp.omega_s,
                    omega_n: tp.omega_n,
                    psi: tp.psi,
                })
            })
            .collect();
        tally.record(&results);
        out.psi = Some(
            plane
                .iter()
                .zip(results)
                .map(|(&(t, h), r)| {
                    r.unwrap_or(PsiRow {
                        t,
                        h: h.unwrap_or(f64::NAN),
                        omega_s: f64::NAN,
                        omega_n: f64::NAN,
                        psi: f64::NAN,
                    })
                })
                .collect(),
        );
    }

    if spec.outputs.contains(&Output::EntropyCurve) {
        let step = spec.fd_step.unwrap_or(DEFAULT_FD_STEP_FRACTION * dbox.tau1);
        let results: Vec<Result<EntropyRow>> = temps
            .par_iter()
            .map(|&t| {
                let g = entropy_gap(t, p, dos, dbox, solver)?;
                let ds_fd = if g.h_c == 0.0 {
                    0.0
                } else {
                    entropy_gap_fd(t, p, dos, dbox, solver, step)?
                };
                Ok(EntropyRow {
                    t,
                    h_c: g.h_c,
                    ds_formula: g.ds,
                    ds_fd,
                })
            })
            .collect();
        tally.record(&results);
        out.entropy = Some(
            temps
                .iter()
                .zip(results)
                .map(|(&t, r)| {
                    r.unwrap_or(EntropyRow {
                        t,
                        h_c: f64::NAN,
                        ds_formula: f64::NAN,
                        ds_fd: f64::NAN,
                    })
                })
                .collect(),
        );
    }

    out.points = tally.points;
    out.failures = tally.failures;
    if tally.failures as f64 > MAX_FAILURE_FRACTION * tally.points as f64 {
        return Err(Error::Sweep(format!(
            "{} of {} points failed",
            tally.failures, tally.points
        )));
    }
    Ok(out)
}

/// 17 significant digits; parses back to the same double.
pub fn format_value(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_rows<W: Write, R>(
    mut w: W,
    header: &str,
    rows: &[R],
    fields: impl Fn(&R) -> Vec<String>,
) -> std::io::Result<()> {
    writeln!(w, "{header}")?;
    for r in rows {
        writeln!(w, "{}", fields(r).join(","))?;
    }
    w.flush()
}

pub fn write_hc<W: Write>(w: W, rows: &[HcRow]) -> std::io::Result<()> {
    write_rows(w, Output::HcCurve.header(), rows, |r| {
        vec![format_value(r.t), format_value(r.h_c)]
    })
}

pub fn write_gap<W: Write>(w: W, rows: &[GapRow]) -> std::io::Result<()> {
    write_rows(w, Output::GapSurface.header(), rows, |r| {
        vec![
            format_value(r.t),
            format_value(r.h),
            format_value(r.y),
            format_value(r.delta),
            r.state.to_string(),
        ]
    })
}

pub fn write_psi<W: Write>(w: W, rows: &[PsiRow]) -> std::io::Result<()> {
    write_rows(w, Output::PsiSurface.header(), rows, |r| {
        vec![
            format_value(r.t),
            format_value(r.h),
            format_value(r.omega_s),
            format_value(r.omega_n),
            format_value(r.psi),
        ]
    })
}

pub fn write_entropy<W: Write>(w: W, rows: &[EntropyRow]) -> std::io::Result<()> {
    write_rows(w, Output::EntropyCurve.header(), rows, |r| {
        vec![
            format_value(r.t),
            format_value(r.h_c),
            format_value(r.ds_formula),
            format_value(r.ds_fd),
        ]
    })
}

/// `<prefix>_<suffix>.csv`.
pub fn output_path(prefix: &Path, output: Output) -> PathBuf {
    let mut name = prefix.file_name().unwrap_or_default().to_os_string();
    name.push(format!("_{}.csv", output.suffix()));
    prefix.with_file_name(name)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes one file per output present in `data`; returns the paths written.
pub fn write_csv(data: &Dataset, prefix: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let prefix = prefix.as_ref();
    let mut written = Vec::new();
    let mut emit = |out: Output, f: &dyn Fn(BufWriter<File>) -> std::io::Result<()>| {
        let path = output_path(prefix, out);
        f(create(&path)?).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok::<_, Error>(())
    };
    if let Some(rows) = &data.hc {
        emit(Output::HcCurve, &|w| write_hc(w, rows))?;
    }
    if let Some(rows) = &data.gap {
        emit(Output::GapSurface, &|w| write_gap(w, rows))?;
    }
    if let Some(rows) = &data.psi {
        emit(Output::PsiSurface, &|w| write_psi(w, rows))?;
    }
    if let Some(rows) = &data.entropy {
        emit(Output::EntropyCurve, &|w| write_entropy(w, rows))?;
    }
    Ok(written)
}
