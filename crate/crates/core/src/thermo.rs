//! Grand potentials of the superconducting and normal states, their
//! difference `Psi = Omega_S - Omega_N`, and the entropy gap across the
//! critical curve, for a pluggable density of states `D`.
//!
//! The gap `Delta = sqrt(Y)` is taken independent of `xi` and extended over
//! the spin-split intervals
//!
//! ```text
//! I_up   = [-hbar_omega_D - s - mu_B H, hbar_omega_D - s - mu_B H]
//! I_down = [-hbar_omega_D - s + mu_B H, hbar_omega_D - s + mu_B H]
//! ```
//!
//! with `s = a H + b H^2`. The mismatch between these and the symmetric
//! interval of the gap equation is what makes the entropy gap nonzero.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::fermi;
use crate::numerics::{integrate, integrate_with_breaks, QuadSpec};
use crate::params::{DomainBox, MaterialParams};
use crate::solvers::{implicit_partials_at, solve_gap_squared, solve_hc, GapSolution, SolverSpec};

/// Default step of [`entropy_gap_fd`] as a fraction of `tau1`.
pub const DEFAULT_FD_STEP_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DosKind {
    Constant,
    /// `D0 (1 + slope (eps - mu) / hbar_omega_D)`.
    Linear {
        slope: f64,
    },
    /// `D0 sqrt(eps / mu)`.
    Sqrt,
    /// Piecewise-linear interpolation of `(eps, D)` nodes, scaled by `D0`.
    Tabulated(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DosModel {
    pub kind: DosKind,
    pub d0: f64,
    pub monotone_increasing: bool,
}

impl DosModel {
    pub fn constant(d0: f64) -> Result<Self> {
        Self::build(DosKind::Constant, d0, false)
    }

    pub fn linear(d0: f64, slope: f64) -> Result<Self> {
        if !slope.is_finite() {
            return Err(Error::Dos(format!("slope must be finite (got {slope})")));
        }
        Self::build(DosKind::Linear { slope }, d0, slope > 0.0)
    }

    pub fn sqrt(d0: f64) -> Result<Self> {
        Self::build(DosKind::Sqrt, d0, true)
    }

    /// Nodes must have strictly increasing `eps` and `D >= 0`. The monotone
    /// flag is set when the interpolant is strictly increasing.
    pub fn tabulated(table: Vec<(f64, f64)>) -> Result<Self> {
        if table.len() < 2 {
            return Err(Error::Dos("table needs at least two rows".into()));
        }
        for (i, &(e, d)) in table.iter().enumerate() {
            if !(e.is_finite() && d.is_finite() && d >= 0.0) {
                return Err(Error::Dos(format!("row {}: bad entry ({e}, {d})", i + 1)));
            }
            if i > 0 && e <= table[i - 1].0 {
                return Err(Error::Dos(format!(
                    "row {}: energies must be strictly increasing",
                    i + 1
                )));
            }
        }
        let increasing = table.windows(2).all(|w| w[1].1 > w[0].1);
        Self::build(DosKind::Tabulated(table), 1.0, increasing)
    }

    /// Reads whitespace-separated `eps D` rows; `#` starts a comment.
    pub fn load_table(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut table = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            let parsed = match cols.as_slice() {
                [e, d] => e.parse::<f64>().ok().zip(d.parse::<f64>().ok()),
                _ => None,
            };
            let row = parsed.ok_or_else(|| {
                Error::Dos(format!(
                    "{}:{}: expected two numbers",
                    path.display(),
                    idx + 1
                ))
            })?;
            table.push(row);
        }
        Self::tabulated(table)
    }

    fn build(kind: DosKind, d0: f64, monotone_increasing: bool) -> Result<Self> {
        if !(d0 > 0.0 && d0.is_finite()) {
            return Err(Error::Dos(format!("D0 must be > 0 (got {d0})")));
        }
        Ok(DosModel {
            kind,
            d0,
            monotone_increasing,
        })
    }

    /// `D(eps)`, with range checks.
    pub fn eval(&self, eps: f64, p: &MaterialParams) -> Result<f64> {
        match &self.kind {
            DosKind::Sqrt if eps <= 0.0 => Err(Error::Dos(format!(
                "square-root model needs eps > 0 (got {eps})"
            ))),
            DosKind::Tabulated(t) if eps < t[0].0 || eps > t[t.len() - 1].0 => {
                Err(Error::Dos(format!(
                    "eps = {eps} outside table [{}, {}]",
                    t[0].0,
                    t[t.len() - 1].0
                )))
            }
            _ => {
                let d = self.eval_unchecked(eps, p);
                if d < 0.0 {
                    Err(Error::Dos(format!("negative density {d} at eps = {eps}")))
                } else {
                    Ok(d)
                }
            }
        }
    }

    fn eval_unchecked(&self, eps: f64, p: &MaterialParams) -> f64 {
        match &self.kind {
            DosKind::Constant => self.d0,
            DosKind::Linear { slope } => self.d0 * (1.0 + slope * (eps - p.mu) / p.hbar_omega_d),
            DosKind::Sqrt => self.d0 * (eps / p.mu).sqrt(),
            DosKind::Tabulated(t) => {
                let i = t.partition_point(|&(e, _)| e <= eps).clamp(1, t.len() - 1);
                let (e0, d0) = t[i - 1];
                let (e1, d1) = t[i];
                self.d0 * (d0 + (d1 - d0) * (eps - e0) / (e1 - e0))
            }
        }
    }

    /// Checks that `D` is defined and nonnegative on `[lo, hi]`. Every model
    /// is piecewise monotone between its nodes, so endpoints and nodes suffice.
    pub fn check_support(&self, lo: f64, hi: f64, p: &MaterialParams) -> Result<()> {
        self.eval(lo, p)?;
        self.eval(hi, p)?;
        if let DosKind::Tabulated(t) = &self.kind {
            for &(e, _) in t.iter().filter(|(e, _)| (lo..=hi).contains(e)) {
                self.eval(e, p)?;
            }
        }
        Ok(())
    }
}

/// Parses `constant`, `linear:<slope>`, `sqrt` or `table:<path>`, each
/// optionally followed by `@<D0>`.
impl FromStr for DosModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (body, d0) = match s.rsplit_once('@') {
            Some((b, d)) => (
                b,
                d.parse::<f64>()
                    .map_err(|_| Error::Dos(format!("bad D0 `{d}`")))?,
            ),
            None => (s, 1.0),
        };
        let (kind, arg) = body.split_once(':').unwrap_or((body, ""));
        match (kind, arg) {
            ("constant", "") => Self::constant(d0),
            ("sqrt", "") => Self::sqrt(d0),
            ("linear", a) => {
                let slope = a
                    .parse::<f64>()
                    .map_err(|_| Error::Dos(format!("bad slope `{a}`")))?;
                Self::linear(d0, slope)
            }
            ("table", path) if !path.is_empty() => {
                let mut m = Self::load_table(path)?;
                m.d0 = d0;
                Ok(m)
            }
            _ => Err(Error::Dos(format!(
                "unknown model `{s}` (expected constant, linear:<slope>, sqrt or table:<path>)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermoPoint {
    pub t: f64,
    pub h: f64,
    pub omega_s: f64,
    pub omega_n: f64,
    /// Integrated directly from pointwise differences, so it agrees with
    /// `omega_s - omega_n` to quadrature tolerance but keeps full relative
    /// accuracy when both potentials nearly cancel.
    pub psi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyGap {
    pub t: f64,
    pub h_c: f64,
    /// `df/dT` at `(T, H_c(T))`.
    pub df_dt: f64,
    /// `int_{I1} D / |xi + s| - int_{I2} D / |xi + s|`.
    pub brace: f64,
    pub i1: [f64; 2],
    pub i2: [f64; 2],
    pub ds: f64,
}

// ln(1 + e^{-x})
fn ln1p_exp_neg(x: f64) -> f64 {
    if x > 30.0 {
        let e = (-x).exp();
        e - 0.5 * e * e
    } else if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

// logistic 1 / (1 + e^{-v})
fn logistic(v: f64) -> f64 {
    fermi(-v)
}

/// The spin-split intervals `(I_up, I_down)` at field `h`.
pub fn spin_intervals(h: f64, p: &MaterialParams) -> ([f64; 2], [f64; 2]) {
    let w = p.hbar_omega_d;
    let s = p.orbital_shift(h);
    let z = p.mu_b * h;
    ([-w - s - z, w - s - z], [-w - s + z, w - s + z])
}

/// `(I1, I2)`: the intervals of width `2 mu_B H_c` centred at
/// `-hbar_omega_D - s` and `hbar_omega_D - s`.
pub fn entropy_intervals(h_c: f64, p: &MaterialParams) -> ([f64; 2], [f64; 2]) {
    let w = p.hbar_omega_d;
    let s = p.orbital_shift(h_c);
    let z = p.mu_b * h_c;
    ([-w - s - z, -w - s + z], [w - s - z, w - s + z])
}

fn check_dos_on_spin_intervals(h: f64, p: &MaterialParams, dos: &DosModel) -> Result<()> {
    let (up, down) = spin_intervals(h, p);
    dos.check_support(up[0] + p.mu, down[1] + p.mu, p)
}

// Spin-up bracket of the grand potential.
fn omega_up(t: f64, hz: f64, y: f64, x: f64) -> f64 {
    let e = (x * x + y).sqrt();
    if e == 0.0 {
        return -2.0 * t * ln1p_exp_neg(hz / t);
    }
    x - x * x / e - (y / e) * fermi((e + hz) / t) - 2.0 * t * ln1p_exp_neg((e + hz) / t)
}

// Spin-down bracket of the grand potential.
fn omega_down(t: f64, hz: f64, y: f64, x: f64) -> f64 {
    let e = (x * x + y).sqrt();
    if e == 0.0 {
        return -2.0 * t * ln1p_exp_neg(-hz / t);
    }
    x - x * x / e - (y / e) * (1.0 + fermi((e - hz) / t)) - 2.0 * t * ln1p_exp_neg((e - hz) / t)
}

// omega_up(y) - omega_up(0), free of cancellation.
fn psi_up(t: f64, hz: f64, y: f64, x: f64) -> f64 {
    let ax = x.abs();
    let e = (x * x + y).sqrt();
    let d = y / ((e + ax) * t);
    (y / e) * (1.0 - fermi((e + hz) / t))
        - y / (e + ax)
        - 2.0 * t * (logistic(-(ax + hz) / t) * (-d).exp_m1()).ln_1p()
}

// omega_down(y) - omega_down(0), free of cancellation.
fn psi_down(t: f64, hz: f64, y: f64, x: f64) -> f64 {
    let ax = x.abs();
    let e = (x * x + y).sqrt();
    let d = y / ((e + ax) * t);
    -y / (e + ax)
        - (y / e) * fermi((e - hz) / t)
        - 2.0 * t * (logistic(-(ax - hz) / t) * (-d).exp_m1()).ln_1p()
}

#[allow(clippy::too_many_arguments)]
fn spin_sum(
    t: f64,
    h: f64,
    y: f64,
    p: &MaterialParams,
    dos: &DosModel,
    quad: &QuadSpec,
    up: fn(f64, f64, f64, f64) -> f64,
    down: fn(f64, f64, f64, f64) -> f64,
) -> Result<f64> {
    check_dos_on_spin_intervals(h, p, dos)?;
    let s = p.orbital_shift(h);
    let hz = p.mu_b * h;
    let (i_up, i_down) = spin_intervals(h, p);
    let part = |iv: [f64; 2], g: fn(f64, f64, f64, f64) -> f64| {
        integrate_with_breaks(
            |xi| dos.eval_unchecked(xi + p.mu, p) * g(t, hz, y, xi + s),
            iv[0],
            iv[1],
            &[-s],
            quad,
        )
    };
    Ok(0.5 * part(i_up, up)? + 0.5 * part(i_down, down)?)
}

fn grand_potential(
    t: f64,
    h: f64,
    y: f64,
    p: &MaterialParams,
    dos: &DosModel,
    quad: &QuadSpec,
) -> Result<f64> {
    spin_sum(t, h, y, p, dos, quad, omega_up, omega_down)
}

/// `Omega_S(T, H)` with the squared gap taken from `gap`.
pub fn grand_potential_s(
    t: f64,
    h: f64,
    p: &MaterialParams,
    dos: &DosModel,
    gap: &GapSolution,
    spec: &SolverSpec,
) -> Result<f64> {
    grand_potential(t, h, gap.y, p, dos, &spec.quad)
}

/// `Omega_N(T, H)`: the same expression with the gap set to zero.
pub fn grand_potential_n(
    t: f64,
    h: f64,
    p: &MaterialParams,
    dos: &DosModel,
    spec: &SolverSpec,
) -> Result<f64> {
    grand_potential(t, h, 0.0, p, dos, &spec.quad)
}

/// `Psi` at a known squared gap; exactly 0 when `y == 0`.
pub fn psi_at(
    t: f64,
    h: f64,
    y: f64,
    p: &MaterialParams,
    dos: &DosModel,
    quad: &QuadSpec,
) -> Result<f64> {
    if y == 0.0 {
        check_dos_on_spin_intervals(h, p, dos)?;
        return Ok(0.0);
    }
    spin_sum(t, h, y, p, dos, quad, psi_up, psi_down)
}

/// Solves the gap at `(T, H)` and evaluates both potentials and `Psi`.
pub fn psi(
    t: f64,
    h: f64,
    p: &MaterialParams,
    dos: &DosModel,
    dbox: &DomainBox,
    spec: &SolverSpec,
) -> Result<ThermoPoint> {
    let gap = solve_gap_squared(t, h, p, dbox, spec)?;
    Ok(ThermoPoint {
        t,
        h,
        omega_s: grand_potential_s(t, h, p, dos, &gap, spec)?,
        omega_n: grand_potential_n(t, h, p, dos, spec)?,
        psi: psi_at(t, h, gap.y, p, dos, &spec.quad)?,
    })
}

/// Entropy gap across the critical curve at temperature `t`:
///
/// ```text
/// dS = -(1/4) (df/dT)(T, H_c) { int_{I1} D(xi + mu) / |xi + s| dxi
///                             - int_{I2} D(xi + mu) / |xi + s| dxi }
/// ```
pub fn entropy_gap(
    t: f64,
    p: &MaterialParams,
    dos: &DosModel,
    dbox: &DomainBox,
    spec: &SolverSpec,
) -> Result<EntropyGap> {
    let h_c = solve_hc(t, p, dbox, spec)?;
    let (i1, i2) = entropy_intervals(h_c, p);
    let w = p.hbar_omega_d;
    let z = p.mu_b * h_c;
    if z >= w {
        return Err(Error::Domain(format!(
            "mu_B H_c = {z} reaches hbar_omega_D; the entropy integrals diverge"
        )));
    }
    dos.check_support(i1[0] + p.mu, i1[1] + p.mu, p)?;
    dos.check_support(i2[0] + p.mu, i2[1] + p.mu, p)?;
    let gap = GapSolution {
        residual: 0.0,
        ..GapSolution::normal(t, h_c)
    };
    let df_dt = implicit_partials_at(&gap, p, spec)?.df_dt;
    if h_c == 0.0 {
        return Ok(EntropyGap {
            t,
            h_c,
            df_dt,
            brace: 0.0,
            i1,
            i2,
            ds: 0.0,
        });
    }
    // Both intervals are parametrised by the offset u from their centres so
    // that a constant density cancels node by node.
    let s = p.orbital_shift(h_c);
    let brace = integrate(
        |u| {
            dos.eval_unchecked(p.mu - w - s + u, p) / (w - u)
                - dos.eval_unchecked(p.mu + w - s + u, p) / (w + u)
        },
        -z,
        z,
        &spec.quad,
    )?;
    Ok(EntropyGap {
        t,
        h_c,
        df_dt,
        brace,
        i1,
        i2,
        ds: -0.25 * df_dt * brace,
    })
}

/// Finite-difference estimate of `-dPsi/dT` along `H = H_c(T)`, one-sided
/// from the superconducting side and Richardson-extrapolated over the steps
/// `delta_t` and `delta_t / 2`.
pub fn entropy_gap_fd(
    t: f64,
    p: &MaterialParams,
    dos: &DosModel,
    dbox: &DomainBox,
    spec: &SolverSpec,
    delta_t: f64,
) -> Result<f64> {
    if !(delta_t > 0.0 && delta_t < t) {
        return Err(Error::Domain(format!(
            "need 0 < delta_T < T (got {delta_t})"
        )));
    }
    let h_c = solve_hc(t, p, dbox, spec)?;
    let psi_on_curve = |tt: f64| -> Result<f64> {
        let gap = solve_gap_squared(tt, h_c, p, dbox, spec)?;
        psi_at(tt, h_c, gap.y, p, dos, &spec.quad)
    };
    let at_t = psi_on_curve(t)?;
    let slope = |d: f64| -> Result<f64> { Ok(-(at_t - psi_on_curve(t - d)?) / d) };
    let coarse = slope(delta_t)?;
    let fine = slope(0.5 * delta_t)?;
    Ok(2.0 * fine - coarse)
}
