//! Implicit functions of the gap equation, realised as monotone root finding:
//! the zero-field transition temperature, the squared gap `f(T, H)`, the
//! critical field `H_c(T)` and the implicit partial derivatives of `f`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{f_eval, f_partials, StatePoint};
use crate::numerics::{find_root_decreasing, integrate, QuadSpec, RootSpec};
use crate::params::{domain_from_with, DomainBox, MaterialParams, FIELD_RATIO_CAP};

/// Lower temperature bound used when none is given, as a fraction of
/// `tau1`. For the default material `mu_B H_c(T) / T` first exceeds 1.24
/// near `0.75 tau1`.
pub const DEFAULT_T0_FRACTION: f64 = 0.8;

const MAX_BRACKET_DOUBLINGS: usize = 60;

/// Tolerances shared by every solver. `root.x_tol` is relative to the
/// natural bracket of each solve (`tau1`, `h_max` or `y0`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverSpec {
    pub quad: QuadSpec,
    pub root: RootSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapSolution {
    pub t: f64,
    pub h: f64,
    /// Squared gap `f(T, H)`.
    pub y: f64,
    pub delta: f64,
    /// `F(T, H, Y)` at the returned `Y` (at `Y = 0` for boundary solutions).
    pub residual: f64,
    pub iterations: usize,
    /// Set when `F(T, H, 0) <= f_tol`, i.e. the normal state (`H >= H_c(T)`).
    pub boundary: bool,
}

impl GapSolution {
    pub fn is_superconducting(&self) -> bool {
        !self.boundary
    }

    /// `"S"` or `"N"`.
    pub fn state(&self) -> &'static str {
        if self.boundary {
            "N"
        } else {
            "S"
        }
    }

    /// The zero gap of the normal state at `(t, h)`.
    pub fn normal(t: f64, h: f64) -> Self {
        GapSolution {
            t,
            h,
            y: 0.0,
            delta: 0.0,
            residual: 0.0,
            iterations: 0,
            boundary: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalFieldCurve {
    pub tau1: f64,
    /// `(T, H_c(T))`, strictly increasing in `T`, ending at `(tau1, 0)`.
    pub samples: Vec<(f64, f64)>,
    pub slope_at_tau1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImplicitPartials {
    pub df_dt: f64,
    pub df_dh: f64,
    /// `f(T, H)` at which the partials were taken.
    pub y: f64,
}

fn f_zero_field(t: f64, p: &MaterialParams, quad: &QuadSpec) -> Result<f64> {
    f_eval(&StatePoint::new(t, 0.0, 0.0)?, p, quad)
}

/// Zero-field transition temperature `tau1`, the root of `F(T, 0, 0)`.
///
/// The bracket is grown geometrically from `hbar_omega_D exp(-1 / (2 U1))`.
pub fn solve_tau1(p: &MaterialParams, spec: &SolverSpec) -> Result<f64> {
    let p = p.validate()?;
    let q = &spec.quad;
    let start = p.hbar_omega_d * (-0.5 / p.u1).exp();
    let (mut lo, mut hi);
    if f_zero_field(start, &p, q)? > 0.0 {
        lo = start;
        hi = 2.0 * start;
        let mut n = 0;
        while f_zero_field(hi, &p, q)? > 0.0 {
            n += 1;
            if n > MAX_BRACKET_DOUBLINGS {
                return Err(Error::BracketExpansion(format!(
                    "F(T, 0, 0) still positive at T = {hi}"
                )));
            }
            lo = hi;
            hi *= 2.0;
        }
    } else {
        hi = start;
        lo = 0.5 * start;
        let mut n = 0;
        while f_zero_field(lo, &p, q)? <= 0.0 {
            n += 1;
            if n > MAX_BRACKET_DOUBLINGS {
                return Err(Error::BracketExpansion(format!(
                    "F(T, 0, 0) still non-positive at T = {lo}"
                )));
            }
            hi = lo;
            lo *= 0.5;
        }
    }
    let root = find_root_decreasing(
        |t| f_zero_field(t, &p, q),
        lo,
        hi,
        &spec.root.with_scale(hi),
    )?;
    Ok(root.x)
}

/// The domain box with `T0 = DEFAULT_T0_FRACTION * tau1`.
pub fn default_domain(p: &MaterialParams, spec: &SolverSpec) -> Result<DomainBox> {
    let tau1 = solve_tau1(p, spec)?;
    domain_from_with(p, DEFAULT_T0_FRACTION * tau1, tau1, &spec.quad)
}

fn warn_outside_guarantee(t: f64, h: f64, p: &MaterialParams, dbox: &DomainBox) {
    if p.mu_b * h / t > FIELD_RATIO_CAP {
        log::warn!(
            "mu_B H / T = {:.4} > {FIELD_RATIO_CAP} at (T, H) = ({t}, {h}); monotonicity is not guaranteed",
            p.mu_b * h / t
        );
    }
    if t < dbox.t0 {
        log::debug!("T = {t} is below T0 = {}", dbox.t0);
    }
}

/// Squared gap `Y = f(T, H)`: the unique root of `F(T, H, .)` in `(0, y0]`,
/// or `Y = 0` with the boundary flag when `F(T, H, 0) <= f_tol`.
pub fn solve_gap_squared(
    t: f64,
    h: f64,
    p: &MaterialParams,
    dbox: &DomainBox,
    spec: &SolverSpec,
) -> Result<GapSolution> {
    let s0 = StatePoint::new(t, h, 0.0)?;
    warn_outside_guarantee(t, h, p, dbox);
    let q = &spec.quad;
    let f0 = f_eval(&s0, p, q)?;
    if f0 <= spec.root.f_tol {
        return Ok(GapSolution {
            residual: f0,
            ..GapSolution::normal(t, h)
        });
    }
    let root = find_root_decreasing(
        |y| f_eval(&StatePoint { y, ..s0 }, p, q),
        0.0,
        dbox.y0,
        &spec.root.with_scale(dbox.y0),
    )
    .map_err(|e| match e {
        Error::NoRootInBracket { value, .. } => Error::Domain(format!(
            "F({t}, {h}, Y0) = {value} > 0: Y0 = {} does not bracket the gap",
            dbox.y0
        )),
        other => other,
    })?;
    Ok(GapSolution {
        t,
        h,
        y: root.x,
        delta: root.x.sqrt(),
        residual: root.value,
        iterations: root.iterations,
        boundary: false,
    })
}

/// Critical field `H_c(T)`: the root of `F(T, ., 0)` on `[0, h_max]`.
/// Returns 0 when `F(T, 0, 0) <= f_tol`, in particular at `T = tau1`.
pub fn solve_hc(t: f64, p: &MaterialParams, dbox: &DomainBox, spec: &SolverSpec) -> Result<f64> {
    let q = &spec.quad;
    if t < dbox.t0 {
        log::debug!("H_c requested at T = {t} below T0 = {}", dbox.t0);
    }
    let f0 = f_zero_field(t, p, q)?;
    if f0 <= spec.root.f_tol {
        return Ok(0.0);
    }
    let g = |h: f64| f_eval(&StatePoint::new(t, h, 0.0)?, p, q);
    let root = find_root_decreasing(g, 0.0, dbox.h_max, &spec.root.with_scale(dbox.h_max))
        .map_err(|e| match e {
            Error::NoRootInBracket { value, .. } => Error::CriticalFieldAboveCap { t, value },
            other => other,
        })?;
    Ok(root.x)
}

/// `(df/dT, df/dH) = (-F_T / F_Y, -F_H / F_Y)` at `(T, H, f(T, H))`.
///
/// Valid for `0 <= H <= H_c(T)`; at `H = H_c(T)` the partials are taken at
/// `Y = 0` and stay finite.
pub fn implicit_partials(
    t: f64,
    h: f64,
    p: &MaterialParams,
    dbox: &DomainBox,
    spec: &SolverSpec,
) -> Result<ImplicitPartials> {
    let gap = solve_gap_squared(t, h, p, dbox, spec)?;
    if gap.boundary && gap.residual < -spec.root.f_tol {
        return Err(Error::Domain(format!(
            "(T, H) = ({t}, {h}) lies in the normal region (H > H_c(T))"
        )));
    }
    implicit_partials_at(&gap, p, spec)
}

/// Same as [`implicit_partials`] for an already solved gap.
pub fn implicit_partials_at(
    gap: &GapSolution,
    p: &MaterialParams,
    spec: &SolverSpec,
) -> Result<ImplicitPartials> {
    let d = f_partials(&StatePoint::new(gap.t, gap.h, gap.y)?, p, &spec.quad)?;
    if d.y == 0.0 || !d.y.is_finite() {
        return Err(Error::SingularDerivative(d.y));
    }
    Ok(ImplicitPartials {
        df_dt: -d.t / d.y,
        df_dh: -d.h / d.y,
        y: gap.y,
    })
}

// 1 / (1 + cosh x)
fn inv_one_plus_cosh(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    2.0 * e / ((1.0 + e) * (1.0 + e))
}

// (sinh x / x - 1) / (1 + cosh x)
fn slope_denominator_integrand(x: f64) -> f64 {
    let u = x.abs();
    if u < 1.0 {
        let u2 = u * u;
        // (sinh u - u) / u = u^2 sum_k u^{2k} / (2k+3)!
        let mut term = 1.0 / 6.0;
        let mut sum = term;
        for k in 1..10 {
            let n = (2 * k + 3) as f64;
            term *= u2 / (n * (n - 1.0));
            sum += term;
        }
        u2 * sum / (1.0 + u.cosh())
    } else {
        let e = (-u).exp();
        ((1.0 - e * e) / u - 2.0 * e) / ((1.0 + e) * (1.0 + e))
    }
}

/// Closed-form slope `dH_c/dT` at `tau1`:
///
/// ```text
/// -(1 / (a tau1)) * int 1 / (1 + cosh(xi/tau1)) dxi
///                 / int (sinh(xi/tau1) / (xi/tau1) - 1) / (1 + cosh(xi/tau1)) dxi
/// ```
///
/// over `[-hbar_omega_D, hbar_omega_D]`.
pub fn hc_slope_at_tc(p: &MaterialParams, spec: &SolverSpec) -> Result<f64> {
    let tau1 = solve_tau1(p, spec)?;
    hc_slope_at_tau1(p, tau1, &spec.quad)
}

/// [`hc_slope_at_tc`] for a known `tau1`.
pub fn hc_slope_at_tau1(p: &MaterialParams, tau1: f64, quad: &QuadSpec) -> Result<f64> {
    let w = p.hbar_omega_d;
    let num = integrate(|xi| inv_one_plus_cosh(xi / tau1), -w, w, quad)?;
    let den = integrate(|xi| slope_denominator_integrand(xi / tau1), -w, w, quad)?;
    Ok(-1.0 / (p.a * tau1) * num / den)
}

/// `n` samples of `H_c` on a uniform grid over `[t0, tau1]`, plus the
/// closed-form slope at `tau1`. Samples are solved in parallel; the output
/// order is the grid order.
pub fn build_curve(
    p: &MaterialParams,
    dbox: &DomainBox,
    n: usize,
    spec: &SolverSpec,
) -> Result<CriticalFieldCurve> {
    if n < 2 {
        return Err(Error::Domain(format!("need at least 2 samples (got {n})")));
    }
    let temps = uniform_grid(dbox.t0, dbox.tau1, n);
    let samples = temps
        .par_iter()
        .map(|&t| solve_hc(t, p, dbox, spec).map(|h| (t, h)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CriticalFieldCurve {
        tau1: dbox.tau1,
        samples,
        slope_at_tau1: hc_slope_at_tau1(p, dbox.tau1, &spec.quad)?,
    })
}

/// `n >= 2` points from `lo` to `hi` inclusive; the last point is exactly `hi`.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + step * i as f64 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn setup() -> &'static (MaterialParams, DomainBox) {
        static CELL: OnceLock<(MaterialParams, DomainBox)> = OnceLock::new();
        CELL.get_or_init(|| {
            let p = MaterialParams::default();
            let d = default_domain(&p, &SolverSpec::default()).unwrap();
            (p, d)
        })
    }

    #[test]
    fn tau1_weak_coupling() {
        let (_, d) = setup();
        let p = MaterialParams::default();
        let wc = p.weak_coupling_tc();
        assert!((d.tau1 - 0.0405).abs() < 5e-4);
        assert!((d.tau1 / wc - 1.0).abs() < 0.02);
    }

    #[test]
    fn tau1_residual_and_monotone_in_coupling() {
        let spec = SolverSpec::default();
        let p = MaterialParams::default();
        let tau = solve_tau1(&p, &spec).unwrap();
        let r = f_zero_field(tau, &p, &spec.quad).unwrap();
        assert!(r.abs() <= 1e-10);
        let stronger = solve_tau1(&MaterialParams { u1: 0.2, ..p }, &spec).unwrap();
        assert!(stronger > tau);
    }

    #[test]
    fn tau1_for_strong_coupling_expands_downward_bracket_too() {
        let spec = SolverSpec::default();
        for u1 in [0.05, 0.3, 1.0, 3.0] {
            let p = MaterialParams {
                u1,
                ..MaterialParams::default()
            };
            let tau = solve_tau1(&p, &spec).unwrap();
            assert!(f_zero_field(tau, &p, &spec.quad).unwrap().abs() <= 1e-10);
        }
    }

    #[test]
    fn gap_vanishes_at_tau1() {
        let (p, d) = setup();
        let g = solve_gap_squared(d.tau1, 0.0, p, d, &SolverSpec::default()).unwrap();
        assert!(g.boundary);
        assert_eq!(g.y, 0.0);
        assert_eq!(g.delta, 0.0);
    }

    #[test]
    fn zero_temperature_gap_closed_form() {
        let (p, d) = setup();
        let g =
            solve_gap_squared(1e-4 * p.hbar_omega_d, 0.0, p, d, &SolverSpec::default()).unwrap();
        let expected = p.zero_temperature_gap();
        assert!((expected - 0.07141).abs() < 1e-4);
        assert!((g.delta / expected - 1.0).abs() < 1e-3);
        assert_eq!(g.delta, g.y.sqrt());
        assert!(g.y <= d.y0);
    }

    #[test]
    fn gap_zero_on_critical_curve() {
        let (p, d) = setup();
        let spec = SolverSpec::default();
        for t in uniform_grid(d.t0, d.tau1, 6) {
            let hc = solve_hc(t, p, d, &spec).unwrap();
            let g = solve_gap_squared(t, hc, p, d, &spec).unwrap();
            assert!(g.boundary, "T = {t}, H_c = {hc}: {g:?}");
            assert_eq!(g.y, 0.0);
        }
    }

    #[test]
    fn residual_contract() {
        let (p, d) = setup();
        let spec = SolverSpec::default();
        let g = solve_gap_squared(0.9 * d.tau1, 0.3 * d.h_max, p, d, &spec).unwrap();
        assert!(!g.boundary);
        assert!(g.residual.abs() <= spec.root.f_tol);
        let t = 0.9 * d.tau1;
        let hc = solve_hc(t, p, d, &spec).unwrap();
        let r = f_eval(&StatePoint::new(t, hc, 0.0).unwrap(), p, &spec.quad).unwrap();
        assert!(r.abs() <= 1e-10);
    }

    #[test]
    fn hc_is_zero_at_tau1_and_nonincreasing() {
        let (p, d) = setup();
        let spec = SolverSpec::default();
        assert_eq!(solve_hc(d.tau1, p, d, &spec).unwrap(), 0.0);
        let curve = build_curve(p, d, 50, &spec).unwrap();
        assert_eq!(curve.samples.len(), 50);
        assert_eq!(curve.samples.last().unwrap().1, 0.0);
        for w in curve.samples.windows(2) {
            assert!(w[1].0 > w[0].0);
            assert!(w[1].1 <= w[0].1, "{w:?}");
        }
    }

    #[test]
    fn two_point_curve_is_endpoints() {
        let (p, d) = setup();
        let c = build_curve(p, d, 2, &SolverSpec::default()).unwrap();
        assert_eq!(c.samples.len(), 2);
        assert_eq!(c.samples[0].0, d.t0);
        assert_eq!(c.samples[1].0, d.tau1);
        assert!(build_curve(p, d, 1, &SolverSpec::default()).is_err());
    }

    #[test]
    fn hc_above_cap_is_reported() {
        let (p, d) = setup();
        // at 0.6 tau1 the critical field exceeds 1.24 T0 / mu_B
        let err = solve_hc(0.6 * d.tau1, p, d, &SolverSpec::default()).unwrap_err();
        assert!(matches!(err, Error::CriticalFieldAboveCap { .. }));
    }

    #[test]
    fn small_y0_is_a_bracket_error() {
        let (p, d) = setup();
        let bad = d.with_y0(1e-8);
        let err = solve_gap_squared(d.t0, 0.0, p, &bad, &SolverSpec::default()).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn roots_do_not_depend_on_bracket() {
        let (p, d) = setup();
        let spec = SolverSpec::default();
        let t = 0.85 * d.tau1;
        let h = 0.4 * d.h_max;
        let a = solve_gap_squared(t, h, p, d, &spec).unwrap();
        let b = solve_gap_squared(t, h, p, &d.with_y0(3.7 * d.y0), &spec).unwrap();
        assert!((a.y - b.y).abs() <= 10.0 * spec.root.x_tol * 3.7 * d.y0 + 1e-13);
        let wide = DomainBox {
            h_max: 1.9 * d.h_max,
            ..*d
        };
        let ha = solve_hc(t, p, d, &spec).unwrap();
        let hb = solve_hc(t, p, &wide, &spec).unwrap();
        assert!((ha - hb).abs() <= 1e-11, "{ha} vs {hb}");
    }

    #[test]
    fn implicit_partials_negative_and_match_fd() {
        let (p, d) = setup();
        let spec = SolverSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..8 {
            let t = rng.gen_range(d.t0..0.97 * d.tau1);
            let hc = solve_hc(t, p, d, &spec).unwrap();
            let h = rng.gen_range(0.1..0.8) * hc;
            let ip = implicit_partials(t, h, p, d, &spec).unwrap();
            assert!(ip.df_dt < 0.0 && ip.df_dh < 0.0);
            let dt = 1e-5 * t;
            let fp = solve_gap_squared(t + dt, h, p, d, &spec).unwrap().y;
            let fm = solve_gap_squared(t - dt, h, p, d, &spec).unwrap().y;
            assert_relative_eq!(ip.df_dt, (fp - fm) / (2.0 * dt), max_relative = 1e-4);
        }
    }

    #[test]
    fn implicit_partials_rejects_normal_region() {
        let (p, d) = setup();
        let t = 0.9 * d.tau1;
        let hc = solve_hc(t, p, d, &SolverSpec::default()).unwrap();
        assert!(implicit_partials(t, 1.2 * hc, p, d, &SolverSpec::default()).is_err());
    }

    #[test]
    fn slope_formula_sign_and_scaling() {
        let spec = SolverSpec::default();
        let p = MaterialParams::default();
        let s1 = hc_slope_at_tc(&p, &spec).unwrap();
        let s2 = hc_slope_at_tc(&MaterialParams { a: 2.0 * p.a, ..p }, &spec).unwrap();
        assert!(s1 < 0.0);
        assert_eq!(s2, 0.5 * s1);
    }

    #[test]
    fn slope_integrand_branches_agree() {
        for &x in &[0.999f64, 1.0, 1.001, 0.5, 2.0] {
            let direct = (x.sinh() / x - 1.0) / (1.0 + x.cosh());
            assert_relative_eq!(slope_denominator_integrand(x), direct, max_relative = 1e-12);
            assert_relative_eq!(
                inv_one_plus_cosh(x),
                1.0 / (1.0 + x.cosh()),
                max_relative = 1e-14
            );
        }
        assert_eq!(slope_denominator_integrand(0.0), 0.0);
        assert!((slope_denominator_integrand(800.0) - 1.0 / 800.0).abs() < 1e-15);
    }

    #[test]
    fn gap_decreases_along_slices() {
        let (p, d) = setup();
        let spec = SolverSpec::default();
        let temps = uniform_grid(d.t0, d.tau1, 8);
        let fields = uniform_grid(0.0, d.h_max, 8);
        let grid: Vec<Vec<f64>> = temps
            .iter()
            .map(|&t| {
                fields
                    .iter()
                    .map(|&h| solve_gap_squared(t, h, p, d, &spec).unwrap().delta)
                    .collect()
            })
            .collect();
        for i in 0..temps.len() {
            for j in 0..fields.len() {
                if i + 1 < temps.len() {
                    let (a, b) = (grid[i][j], grid[i + 1][j]);
                    assert!(
                        b < a || (a == 0.0 && b == 0.0),
                        "T slice at {i},{j}: {a} -> {b}"
                    );
                }
                if j + 1 < fields.len() {
                    let (a, b) = (grid[i][j], grid[i][j + 1]);
                    assert!(
                        b < a || (a == 0.0 && b == 0.0),
                        "H slice at {i},{j}: {a} -> {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn gap_is_continuous_in_interior() {
        let (p, d) = setup();
        let spec = SolverSpec::default();
        let (t, h) = (0.88 * d.tau1, 0.2 * d.h_max);
        let base = solve_gap_squared(t, h, p, d, &spec).unwrap().delta;
        let mut prev = f64::INFINITY;
        for k in 2..7 {
            let step = 10f64.powi(-k) * t;
            let moved = solve_gap_squared(t + step, h, p, d, &spec).unwrap().delta;
            let jump = (moved - base).abs();
            assert!(jump < prev);
            prev = jump;
        }
        assert!(prev < 1e-6);
    }
}
