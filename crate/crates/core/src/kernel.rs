//! The gap-equation kernel: quasiparticle energy, thermal weight, the
//! integrand `J`, the function `F(T, H, Y)` and its partial derivatives.
//!
//! With `x = xi + a H + b H^2`, `E = sqrt(x^2 + Y)`, `z = E / T` and
//! `z1 = mu_B H / T`:
//!
//! ```text
//! J(T, H, Y, xi) = sinh z / (E (cosh z + cosh z1))
//! F(T, H, Y)     = int_{-hbar_omega_D}^{hbar_omega_D} J dxi - 1 / U1
//! ```
//!
//! The partials are obtained by differentiating `J` under the integral.
//! Every integrand is written so that it stays finite and free of
//! cancellation at `E -> 0` and does not overflow for `E / T` large.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{integrate_with_breaks, QuadSpec};
use crate::params::MaterialParams;

/// Above this value of `E / T` the thermal weight is evaluated through
/// Fermi functions.
pub const FERMI_SWITCH: f64 = 30.0;

/// A point `(T, H, Y)` with `Y` the squared gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatePoint {
    pub t: f64,
    pub h: f64,
    pub y: f64,
}

impl StatePoint {
    pub fn new(t: f64, h: f64, y: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("temperature must be > 0 (got {t})")));
        }
        if !(h >= 0.0 && h.is_finite()) {
            return Err(Error::Domain(format!("field must be >= 0 (got {h})")));
        }
        if !(y >= 0.0 && y.is_finite()) {
            return Err(Error::Domain(format!("Y must be >= 0 (got {y})")));
        }
        Ok(StatePoint { t, h, y })
    }
}

/// Partial derivatives of `F` at one state point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FPartials {
    pub t: f64,
    pub h: f64,
    pub y: f64,
}

/// `sqrt((xi + a H + b H^2)^2 + Y)`.
#[inline]
pub fn quasiparticle_energy(xi: f64, h: f64, y: f64, p: &MaterialParams) -> f64 {
    let x = xi + p.orbital_shift(h);
    (x * x + y).sqrt()
}

/// Fermi function `1 / (e^u + 1)`.
#[inline]
pub fn fermi(u: f64) -> f64 {
    if u > 0.0 {
        let e = (-u).exp();
        e / (1.0 + e)
    } else {
        1.0 / (u.exp() + 1.0)
    }
}

/// `n(u) (1 - n(u))`, i.e. minus the derivative of the Fermi function.
#[inline]
fn fermi_slope(u: f64) -> f64 {
    let e = (-u.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// `sinh z / (cosh z + cosh z1)` evaluated literally.
#[inline]
pub fn thermal_weight_cosh(z: f64, z1: f64) -> f64 {
    z.sinh() / (z.cosh() + z1.cosh())
}

/// The same weight as `1 - n(z + z1) - n(z - z1)`.
#[inline]
pub fn thermal_weight_fermi(z: f64, z1: f64) -> f64 {
    1.0 - fermi(z + z1) - fermi(z - z1)
}

/// Thermal weight `sinh(E/T) / (cosh(E/T) + cosh(mu_B H / T))`, in `[0, 1)`.
pub fn thermal_weight(t: f64, e: f64, h: f64, p: &MaterialParams) -> f64 {
    weight(e / t, p.mu_b * h / t)
}

#[inline]
fn weight(z: f64, z1: f64) -> f64 {
    if z > FERMI_SWITCH {
        thermal_weight_fermi(z, z1)
    } else {
        thermal_weight_cosh(z, z1)
    }
}

/// The gap-equation integrand `J = weight / E`, with the `E -> 0` limit
/// `1 / (T (1 + cosh(mu_B H / T)))`.
pub fn integrand_j(t: f64, h: f64, y: f64, xi: f64, p: &MaterialParams) -> f64 {
    let e = quasiparticle_energy(xi, h, y, p);
    let z1 = p.mu_b * h / t;
    if e < 1e-8 * t.max(p.hbar_omega_d) {
        return 1.0 / (t * (1.0 + z1.cosh()));
    }
    weight(e / t, z1) / e
}

// (sinh u - u) / u^3
fn sinh_minus_id_cubed(u: f64) -> f64 {
    if u.abs() < 1.0 {
        let u2 = u * u;
        let mut term = 1.0 / 6.0;
        let mut sum = term;
        for k in 1..12 {
            let n = (2 * k + 3) as f64;
            term *= u2 / (n * (n - 1.0));
            sum += term;
        }
        sum
    } else {
        (u.sinh() - u) / (u * u * u)
    }
}

// (z cosh z - sinh z) / z^3
fn zcosh_minus_sinh_cubed(z: f64) -> f64 {
    if z.abs() < 1.0 {
        // sum_{n>=1} 2n z^(2n-2) / (2n+1)!
        let z2 = z * z;
        let mut pow = 1.0;
        let mut fact = 6.0;
        let mut sum = 0.0;
        for n in 1..13 {
            sum += 2.0 * n as f64 * pow / fact;
            pow *= z2;
            let m = (2 * n + 2) as f64;
            fact *= m * (m + 1.0);
        }
        sum
    } else {
        (z * z.cosh() - z.sinh()) / (z * z * z)
    }
}

#[inline]
fn sinhc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        1.0 + z * z / 6.0
    } else {
        z.sinh() / z
    }
}

/// Derivative pieces of `phi(z, z1) = sinh z / (cosh z + cosh z1)`.
///
/// `cubic = (z phi_z - phi) / z^3` and `over_z = phi_z1 / z`; both have
/// finite limits at `z = 0`.
struct PhiDerivs {
    phi_z: f64,
    cubic: f64,
    over_z: f64,
}

fn phi_derivs(z: f64, z1: f64) -> PhiDerivs {
    let phi_z = fermi_slope(z + z1) + fermi_slope(z - z1);
    if z > FERMI_SWITCH {
        let phi = thermal_weight_fermi(z, z1);
        let phi_z1 = fermi_slope(z + z1) - fermi_slope(z - z1);
        return PhiDerivs {
            phi_z,
            cubic: (z * phi_z - phi) / (z * z * z),
            over_z: phi_z1 / z,
        };
    }
    // scale by q = e^{-z1}: cosh z + cosh z1 = (1 + q^2 + 2 q cosh z) / 2q
    let q = (-z1).exp();
    let den = 1.0 + q * q + 2.0 * q * z.cosh();
    let den2 = den * den;
    let over_z = -sinhc(z) * 2.0 * q * (1.0 - q * q) / den2;
    let cubic = if z < 0.5 {
        (-16.0 * q * q * sinh_minus_id_cubed(2.0 * z)
            + 2.0 * q * (1.0 + q * q) * zcosh_minus_sinh_cubed(z))
            / den2
    } else {
        let phi = z.sinh() * 2.0 * q / den;
        (z * phi_z - phi) / (z * z * z)
    };
    PhiDerivs {
        phi_z,
        cubic,
        over_z,
    }
}

/// Integrands of `dF/dT`, `dF/dH` and `dF/dY` at one `xi`.
pub fn integrand_partials(t: f64, h: f64, y: f64, xi: f64, p: &MaterialParams) -> FPartials {
    let x = xi + p.orbital_shift(h);
    let e = (x * x + y).sqrt();
    let z = e / t;
    let z1 = p.mu_b * h / t;
    let d = phi_derivs(z, z1);
    let t2 = t * t;
    let j_y = d.cubic / (2.0 * t2 * t);
    FPartials {
        t: -(d.phi_z + z1 * d.over_z) / t2,
        h: 2.0 * x * (p.a + 2.0 * p.b * h) * j_y + p.mu_b * d.over_z / t2,
        y: j_y,
    }
}

fn breaks(s: &StatePoint, p: &MaterialParams) -> [f64; 1] {
    [-p.orbital_shift(s.h)]
}

/// `F(T, H, Y)`; the gap equation reads `F(T, H, Delta^2) = 0`.
pub fn f_eval(s: &StatePoint, p: &MaterialParams, quad: &QuadSpec) -> Result<f64> {
    let w = p.hbar_omega_d;
    let integral = integrate_with_breaks(
        |xi| integrand_j(s.t, s.h, s.y, xi, p),
        -w,
        w,
        &breaks(s, p),
        quad,
    )?;
    Ok(integral - 1.0 / p.u1)
}

/// Analytic `(dF/dT, dF/dH, dF/dY)`. At `Y = 0` the Y-derivative is the
/// one-sided derivative from `Y > 0`.
pub fn f_partials(s: &StatePoint, p: &MaterialParams, quad: &QuadSpec) -> Result<FPartials> {
    let w = p.hbar_omega_d;
    let br = breaks(s, p);
    let part = |pick: fn(&FPartials) -> f64| {
        integrate_with_breaks(
            |xi| pick(&integrand_partials(s.t, s.h, s.y, xi, p)),
            -w,
            w,
            &br,
            quad,
        )
    };
    Ok(FPartials {
        t: part(|d| d.t)?,
        h: part(|d| d.h)?,
        y: part(|d| d.y)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::central_diff;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> MaterialParams {
        MaterialParams::default()
    }

    // reference box used throughout: tau1 ~ 0.04045, T0 = 0.8 tau1
    const TAU1: f64 = 0.040_449_525_190_890_07;
    const T0: f64 = 0.8 * TAU1;

    fn quad() -> QuadSpec {
        QuadSpec {
            abs_tol: 1e-13,
            rel_tol: 1e-13,
            max_depth: 50,
        }
    }

    fn random_point(rng: &mut ChaCha8Rng, y_max: f64) -> StatePoint {
        let p = params();
        let h_max = 1.24 * T0 / p.mu_b;
        StatePoint {
            t: rng.gen_range(T0..TAU1),
            h: rng.gen_range(0.05 * h_max..h_max),
            y: rng.gen_range(0.02 * y_max..y_max),
        }
    }

    #[test]
    fn energy_examples() {
        let p = MaterialParams {
            a: 1.0,
            b: 0.0,
            ..params()
        };
        assert_eq!(quasiparticle_energy(3.0, 1.0, 9.0, &p), 5.0);
        assert_eq!(quasiparticle_energy(-0.37, 0.0, 0.0, &p), 0.37);
        assert_eq!(quasiparticle_energy(0.0, 0.0, 4.0, &p), 2.0);
    }

    #[test]
    fn weight_examples() {
        let p = params();
        assert_relative_eq!(
            thermal_weight(1.0, 2.0, 0.0, &p),
            1.0f64.tanh(),
            max_relative = 1e-15
        );
        assert!((thermal_weight(1.0, 2.0, 0.0, &p) - 0.761_594_156_0).abs() < 1e-10);
        assert_eq!(thermal_weight(0.3, 0.0, 0.01, &p), 0.0);
    }

    #[test]
    fn weight_forms_agree_across_switch() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let z = rng.gen_range(0.0..60.0);
            let z1 = rng.gen_range(0.0..5.0);
            let a = thermal_weight_cosh(z, z1);
            let b = thermal_weight_fermi(z, z1);
            assert!((a - b).abs() <= 1e-12, "z={z} z1={z1}: {a} vs {b}");
            assert!((0.0..=1.0).contains(&weight(z, z1)));
        }
        // overflow of the literal form is harmless once the Fermi form takes over
        assert!((weight(800.0, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn j_limit_at_zero_energy() {
        let p = params();
        let (t, h) = (0.03, 0.02);
        let shift = p.orbital_shift(h);
        let limit = integrand_j(t, h, 0.0, -shift, &p);
        let z1 = p.mu_b * h / t;
        assert_relative_eq!(limit, 1.0 / (t * (1.0 + z1.cosh())), max_relative = 1e-15);
        // approach from E = 1e-6 and 1e-7 through the regular branch
        let j6 = weight(1e-6 / t, z1) / 1e-6;
        let j7 = weight(1e-7 / t, z1) / 1e-7;
        assert!((j6 - limit).abs() / limit < 1e-9);
        assert!((j7 - limit).abs() / limit < 1e-11);
        assert!((j7 - limit).abs() <= (j6 - limit).abs());
    }

    #[test]
    fn j_reduces_to_tanh_at_zero_field() {
        let p = params();
        for &xi in &[-0.9f64, -0.01, 0.003, 0.5] {
            let t = 0.04;
            let expected = (xi.abs() / (2.0 * t)).tanh() / xi.abs();
            assert_relative_eq!(
                integrand_j(t, 0.0, 0.0, xi, &p),
                expected,
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn j_is_nonnegative() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let j = integrand_j(
                rng.gen_range(1e-4..1.0),
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.0..1.0),
                rng.gen_range(-1.0..1.0),
                &p,
            );
            assert!(j >= 0.0 && j.is_finite());
        }
    }

    #[test]
    fn series_helpers_match_direct_forms_near_switch() {
        for &u in &[0.6f64, 0.9, 0.999] {
            let direct = (u.sinh() - u) / (u * u * u);
            assert_relative_eq!(sinh_minus_id_cubed(u), direct, max_relative = 1e-12);
            let direct = (u * u.cosh() - u.sinh()) / (u * u * u);
            assert_relative_eq!(zcosh_minus_sinh_cubed(u), direct, max_relative = 1e-12);
        }
        assert_relative_eq!(sinh_minus_id_cubed(0.0), 1.0 / 6.0);
        assert_relative_eq!(zcosh_minus_sinh_cubed(0.0), 1.0 / 3.0);
    }

    #[test]
    fn y_integrand_limit_at_zero_energy() {
        // (c1 - 2) / (6 T^3 (1 + c1)^2) with c1 = cosh z1
        let p = params();
        let (t, h) = (0.035, 0.01);
        let xi = -p.orbital_shift(h);
        let c1 = (p.mu_b * h / t).cosh();
        let expected = (c1 - 2.0) / (6.0 * t.powi(3) * (1.0 + c1).powi(2));
        let got = integrand_partials(t, h, 0.0, xi, &p).y;
        assert_relative_eq!(got, expected, max_relative = 1e-12);
    }

    #[test]
    fn integrand_partials_match_finite_differences() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let t = rng.gen_range(0.01..0.05);
            let h = rng.gen_range(0.001..0.05);
            let y = rng.gen_range(1e-4..0.02);
            let xi = rng.gen_range(-1.0..1.0);
            let an = integrand_partials(t, h, y, xi, &p);
            let ft = central_diff(|v| Ok(integrand_j(v, h, y, xi, &p)), t, 1e-6 * t).unwrap();
            let fh = central_diff(|v| Ok(integrand_j(t, v, y, xi, &p)), h, 1e-6 * h).unwrap();
            let fy = central_diff(|v| Ok(integrand_j(t, h, v, xi, &p)), y, 1e-6 * y).unwrap();
            let j = integrand_j(t, h, y, xi, &p);
            for (a, f, step) in [
                (an.t, ft, 1e-6 * t),
                (an.h, fh, 1e-6 * h),
                (an.y, fy, 1e-6 * y),
            ] {
                // rounding floor of the difference quotient
                let noise = 1e-14 * j / step;
                assert!(
                    (a - f).abs() <= 1e-5 * a.abs() + noise,
                    "{a} vs {f} at t={t} h={h} y={y} xi={xi}"
                );
            }
        }
    }

    #[test]
    fn tau1_is_zero_of_f() {
        let p = params();
        let f = f_eval(&StatePoint::new(TAU1, 0.0, 0.0).unwrap(), &p, &quad()).unwrap();
        assert!(f.abs() < 1e-11, "{f}");
    }

    #[test]
    fn f_positive_below_tau1_at_zero_field() {
        let p = params();
        for k in 0..10 {
            let t = T0 + (TAU1 - T0) * k as f64 / 10.0;
            let f = f_eval(
                &StatePoint::new(t, 0.0, 0.0).unwrap(),
                &p,
                &QuadSpec::default(),
            )
            .unwrap();
            assert!(f > 0.0, "F({t}, 0, 0) = {f}");
        }
    }

    #[test]
    fn large_y_bound() {
        let p = params();
        for &y in &[0.01, 1.0, 100.0, 1e4] {
            for &(t, h) in &[(T0, 0.0), (TAU1, 0.03)] {
                let f =
                    f_eval(&StatePoint::new(t, h, y).unwrap(), &p, &QuadSpec::default()).unwrap();
                assert!(f + 1.0 / p.u1 <= 2.0 * p.hbar_omega_d / y.sqrt() + 1e-12);
                assert!(f > -1.0 / p.u1);
            }
        }
    }

    #[test]
    fn partials_negative_on_box() {
        let p = params();
        let y0 = crate::params::default_y0(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let s = random_point(&mut rng, y0);
            let d = f_partials(&s, &p, &QuadSpec::default()).unwrap();
            assert!(d.y < 0.0 && d.h < 0.0 && d.t < 0.0, "{d:?} at {s:?}");
        }
    }

    #[test]
    fn partials_match_finite_differences_of_f() {
        let p = params();
        let q = quad();
        let y0 = crate::params::default_y0(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let s = random_point(&mut rng, y0);
            let d = f_partials(&s, &p, &q).unwrap();
            let ft = central_diff(
                |v| f_eval(&StatePoint { t: v, ..s }, &p, &q),
                s.t,
                1e-5 * s.t,
            )
            .unwrap();
            let fh = central_diff(
                |v| f_eval(&StatePoint { h: v, ..s }, &p, &q),
                s.h,
                1e-5 * s.h,
            )
            .unwrap();
            let fy = central_diff(
                |v| f_eval(&StatePoint { y: v, ..s }, &p, &q),
                s.y,
                1e-5 * s.y,
            )
            .unwrap();
            assert_relative_eq!(d.t, ft, max_relative = 1e-6);
            assert_relative_eq!(d.h, fh, max_relative = 1e-6);
            assert_relative_eq!(d.y, fy, max_relative = 1e-6);
        }
    }

    #[test]
    fn monotone_in_y_h_and_t() {
        let p = params();
        let q = QuadSpec::default();
        let y0 = crate::params::default_y0(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..60 {
            let s = random_point(&mut rng, y0);
            let f = f_eval(&s, &p, &q).unwrap();
            let fy = f_eval(&StatePoint { y: s.y * 1.05, ..s }, &p, &q).unwrap();
            let fh = f_eval(&StatePoint { h: s.h * 0.95, ..s }, &p, &q).unwrap();
            let ft = f_eval(&StatePoint { t: s.t * 1.01, ..s }, &p, &q).unwrap();
            assert!(fy < f);
            assert!(fh > f);
            assert!(ft < f);
        }
    }

    #[test]
    fn ratio_cap_inequalities_on_grid() {
        let z1_max = crate::params::FIELD_RATIO_CAP;
        for i in 0..=62 {
            let z1 = z1_max * i as f64 / 62.0;
            let c1 = z1.cosh();
            for k in 0..=5000 {
                let z = 50.0 * k as f64 / 5000.0;
                let first = c1 * (z.sinh() - z * z.cosh()) + z.cosh() * z.sinh() - z;
                assert!(first >= -1e-9 * z.cosh().powi(2), "z={z} z1={z1}: {first}");
                let second = 1.0 + z.cosh() * c1 - z1 * z1.sinh() * sinhc(z);
                assert!(second > 0.0, "z={z} z1={z1}: {second}");
            }
        }
    }

    #[test]
    fn sampled_lipschitz_bound() {
        let p = params();
        let q = QuadSpec::default();
        let y0 = crate::params::default_y0(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let a = random_point(&mut rng, y0);
            let b = random_point(&mut rng, y0);
            let dist = (a.t - b.t).abs() + (a.h - b.h).abs() + (a.y - b.y).abs();
            let df = (f_eval(&a, &p, &q).unwrap() - f_eval(&b, &p, &q).unwrap()).abs();
            worst = worst.max(df / dist);
        }
        // max of |dF/dT|, |dF/dH|, |dF/dY| over the box is a few thousand
        assert!(worst.is_finite() && worst < 1e4, "{worst}");
    }
}
