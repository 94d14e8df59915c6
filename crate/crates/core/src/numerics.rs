//! Adaptive quadrature, bracketed root finding for decreasing functions and
//! central differences. Every solver in the crate is built from these three.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances for [`integrate`].
///
/// The integral is accepted once the summed panel error estimate is at most
/// `max(abs_tol, rel_tol * |estimate|)`. A panel at `max_depth` bisections
/// that still needs refinement aborts the integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_depth: 40,
        }
    }
}

impl QuadSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidTolerance(format!(
                "quadrature tolerances must be > 0 (abs {}, rel {})",
                self.abs_tol, self.rel_tol
            )));
        }
        if self.max_depth < 1 {
            return Err(Error::InvalidTolerance("max_depth must be >= 1".into()));
        }
        Ok(())
    }

    /// Same spec with both tolerances multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> QuadSpec {
        QuadSpec {
            abs_tol: self.abs_tol * factor,
            rel_tol: self.rel_tol * factor,
            ..*self
        }
    }
}

/// Tolerances for [`find_root_decreasing`]. `x_tol` is absolute here; the
/// solvers scale it by the natural width of their bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootSpec {
    pub x_tol: f64,
    pub f_tol: f64,
    pub max_iter: usize,
}

impl Default for RootSpec {
    fn default() -> Self {
        RootSpec {
            x_tol: 1e-12,
            f_tol: 1e-10,
            max_iter: 200,
        }
    }
}

impl RootSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_tol > 0.0 && self.f_tol > 0.0) {
            return Err(Error::InvalidTolerance(format!(
                "root tolerances must be > 0 (x {}, f {})",
                self.x_tol, self.f_tol
            )));
        }
        Ok(())
    }

    /// Copy with `x_tol` interpreted relative to `scale`.
    pub fn with_scale(&self, scale: f64) -> RootSpec {
        RootSpec {
            x_tol: self.x_tol * scale,
            ..*self
        }
    }
}

// Gauss-Kronrod 7/15 abscissae and weights on [-1, 1] (QUADPACK qk15).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_PANELS: usize = 1 << 20;

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
    depth: u32,
    // creation index, breaks ties in the heap so the refinement order is fixed
    seq: u64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * resk;
    let mut resasc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = resk * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (value, err)
}

/// Integrates `f` over `[lo, hi]` with globally adaptive Gauss-Kronrod 7/15.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, spec: &QuadSpec) -> Result<f64> {
    integrate_with_breaks(f, lo, hi, &[], spec)
}

/// Like [`integrate`], with the interval pre-split at `breaks` (points
/// outside `(lo, hi)` are ignored). Use it for kinks and narrow peaks whose
/// location is known.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    spec: &QuadSpec,
) -> Result<f64> {
    spec.validate()?;
    if lo == hi {
        return Ok(0.0);
    }
    if lo > hi {
        return integrate_with_breaks(f, hi, lo, breaks, spec).map(|v| -v);
    }

    let mut nodes: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&b| b > lo && b < hi)
        .collect();
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    nodes.insert(0, lo);
    nodes.push(hi);

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in nodes.windows(2) {
        let (value, error) = kronrod15(&f, w[0], w[1]);
        total += value;
        total_err += error;
        heap.push(Panel {
            lo: w[0],
            hi: w[1],
            value,
            error,
            depth: 0,
            seq,
        });
        seq += 1;
    }

    loop {
        if !total.is_finite() || !total_err.is_finite() {
            let worst = heap.peek().copied();
            return Err(Error::NonFinite {
                x: worst.map_or(lo, |p| 0.5 * (p.lo + p.hi)),
                value: total,
            });
        }
        if total_err <= spec.abs_tol.max(spec.rel_tol * total.abs()) {
            // sum in interval order so the result does not depend on heap layout
            let mut panels = heap.into_vec();
            panels.sort_by(|a, b| a.lo.total_cmp(&b.lo));
            return Ok(panels.iter().map(|p| p.value).sum());
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let mid = 0.5 * (worst.lo + worst.hi);
        if worst.depth >= spec.max_depth
            || heap.len() >= MAX_PANELS
            || !(mid > worst.lo && mid < worst.hi)
        {
            return Err(Error::QuadratureFailure {
                lo: worst.lo,
                hi: worst.hi,
                error: worst.error,
            });
        }
        let (v1, e1) = kronrod15(&f, worst.lo, mid);
        let (v2, e2) = kronrod15(&f, mid, worst.hi);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        for (a, b, value, error) in [(worst.lo, mid, v1, e1), (mid, worst.hi, v2, e2)] {
            heap.push(Panel {
                lo: a,
                hi: b,
                value,
                error,
                depth: worst.depth + 1,
                seq,
            });
            seq += 1;
        }
    }
}

/// A converged root of a decreasing function, with the final bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub value: f64,
    /// Largest point seen with g > 0.
    pub lower: f64,
    /// Smallest point seen with g <= 0.
    pub upper: f64,
    pub iterations: usize,
}

fn eval_checked<G: FnMut(f64) -> Result<f64>>(g: &mut G, x: f64) -> Result<f64> {
    let v = g(x)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { x, value: v })
    }
}

/// Finds the root of a strictly decreasing `g` on `[lo, hi]`.
///
/// Both endpoints are evaluated first: `g(lo) <= 0` yields
/// [`Error::RootAtOrBelowLower`] and `g(hi) > 0` yields
/// [`Error::NoRootInBracket`]. Otherwise Illinois-modified secant steps are
/// taken inside a sign-changing bracket, with a bisection forced whenever two
/// consecutive steps fail to halve the bracket. `g` is never evaluated
/// outside `[lo, hi]`.
pub fn find_root_decreasing<G>(mut g: G, lo: f64, hi: f64, spec: &RootSpec) -> Result<Root>
where
    G: FnMut(f64) -> Result<f64>,
{
    spec.validate()?;
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(Error::Domain(format!("empty bracket [{lo}, {hi}]")));
    }
    let g_lo = eval_checked(&mut g, lo)?;
    if g_lo <= 0.0 {
        return Err(Error::RootAtOrBelowLower { lo, value: g_lo });
    }
    let g_hi = eval_checked(&mut g, hi)?;
    if g_hi > 0.0 {
        return Err(Error::NoRootInBracket { hi, value: g_hi });
    }
    if g_hi == 0.0 {
        return Ok(Root {
            x: hi,
            value: 0.0,
            lower: lo,
            upper: hi,
            iterations: 0,
        });
    }

    let (mut a, mut fa, mut b, mut fb) = (lo, g_lo, hi, g_hi);
    // secant weights; halved by the Illinois rule when an end is retained
    let (mut wa, mut wb) = (fa, fb);
    let mut last_side = 0i8;
    // bracket widths before the previous two steps
    let mut widths = [f64::INFINITY, f64::INFINITY];

    for iter in 1..=spec.max_iter {
        if b - a <= spec.x_tol {
            let (x, value) = if fa.abs() < fb.abs() {
                (a, fa)
            } else {
                (b, fb)
            };
            return Ok(Root {
                x,
                value,
                lower: a,
                upper: b,
                iterations: iter - 1,
            });
        }
        let mid = 0.5 * (a + b);
        let mut x = if b - a > 0.5 * widths[0] {
            mid
        } else {
            a + wa * (b - a) / (wa - wb)
        };
        if !(x > a && x < b) {
            x = mid;
        }
        let fx = eval_checked(&mut g, x)?;
        if fx.abs() <= spec.f_tol {
            let (lower, upper) = if fx > 0.0 { (x, b) } else { (a, x) };
            return Ok(Root {
                x,
                value: fx,
                lower,
                upper,
                iterations: iter,
            });
        }
        if fx > 0.0 {
            a = x;
            fa = fx;
            wa = fx;
            if last_side == 1 {
                wb *= 0.5;
            }
            last_side = 1;
        } else {
            b = x;
            fb = fx;
            wb = fx;
            if last_side == -1 {
                wa *= 0.5;
            }
            last_side = -1;
        }
        widths = [widths[1], b - a];
    }
    Err(Error::RootNotConverged {
        lo: a,
        hi: b,
        iterations: spec.max_iter,
    })
}

/// Symmetric difference quotient `(f(x + h) - f(x - h)) / 2h`.
pub fn central_diff<F: FnMut(f64) -> Result<f64>>(mut f: F, x: f64, h: f64) -> Result<f64> {
    if h.is_nan() || h <= 0.0 {
        return Err(Error::Domain(format!(
            "difference step must be > 0 (got {h})"
        )));
    }
    let plus = f(x + h)?;
    let minus = f(x - h)?;
    Ok((plus - minus) / (2.0 * h))
}
