//! Material constants and the domain box on which the monotonicity
//! guarantees of the gap equation hold.
//!
//! Units: k_B = 1, energies in units of the Debye energy by default, and the
//! Bohr magneton in energy per unit field so that `mu_b * h` is an energy.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{f_eval, StatePoint};
use crate::numerics::QuadSpec;

/// Upper bound on `mu_b * h / t` under which `F` is strictly decreasing in
/// `h` and `t`.
pub const FIELD_RATIO_CAP: f64 = 1.24;

const MAX_Y0_DOUBLINGS: usize = 60;

/// Physical constants of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Debye energy; half-width of the pairing shell.
    pub hbar_omega_d: f64,
    /// Chemical potential. Only shifts the density-of-states argument.
    pub mu: f64,
    /// Dimensionless pairing coupling.
    pub u1: f64,
    /// Linear orbital shift coefficient (energy per unit field).
    pub a: f64,
    /// Quadratic orbital shift coefficient (energy per unit field squared).
    pub b: f64,
    /// Bohr magneton (energy per unit field).
    pub mu_b: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams {
            hbar_omega_d: 1.0,
            mu: 10.0,
            u1: 0.15,
            a: 0.5,
            b: 0.1,
            mu_b: 1.0,
        }
    }
}

impl MaterialParams {
    pub const KEYS: [&'static str; 6] = ["hbar_omega_D", "mu", "U1", "a", "b", "mu_B"];

    /// Returns `self` if every required constant is positive and finite.
    pub fn validate(self) -> Result<Self> {
        let checks = [
            ("hbar_omega_D", self.hbar_omega_d),
            ("U1", self.u1),
            ("a", self.a),
            ("b", self.b),
            ("mu_B", self.mu_b),
        ];
        for (field, value) in checks {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter { field, value });
            }
        }
        if !self.mu.is_finite() {
            return Err(Error::Config {
                line: 0,
                message: format!("mu must be finite (got {})", self.mu),
            });
        }
        Ok(self)
    }

    /// Sets one constant by its config-file key.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let slot = match key {
            "hbar_omega_D" => &mut self.hbar_omega_d,
            "mu" => &mut self.mu,
            "U1" => &mut self.u1,
            "a" => &mut self.a,
            "b" => &mut self.b,
            "mu_B" => &mut self.mu_b,
            other => {
                return Err(Error::Config {
                    line: 0,
                    message: format!(
                        "unknown key `{other}` (expected one of {})",
                        Self::KEYS.join(", ")
                    ),
                })
            }
        };
        *slot = value;
        Ok(())
    }

    /// Parses `key = value` lines with `#` comments. Keys that are absent
    /// keep their default value; unknown keys are errors.
    pub fn parse_config(text: &str) -> Result<Self> {
        let mut params = MaterialParams::default();
        let mut seen = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            let value: f64 = value.trim().parse().map_err(|_| Error::Config {
                line: line_no,
                message: format!("`{}` is not a number", value.trim()),
            })?;
            if seen.contains(&key) {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("duplicate key `{key}`"),
                });
            }
            params.set(key, value).map_err(|e| match e {
                Error::Config { message, .. } => Error::Config {
                    line: line_no,
                    message,
                },
                other => other,
            })?;
            seen.push(key);
        }
        params.validate()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_config(&text)
    }

    /// Orbital shift `a h + b h^2` of the single-particle energy.
    #[inline]
    pub fn orbital_shift(&self, h: f64) -> f64 {
        self.a * h + self.b * h * h
    }

    /// Zero-temperature gap `hbar_omega_D / sinh(1 / (2 U1))` at zero field.
    pub fn zero_temperature_gap(&self) -> f64 {
        self.hbar_omega_d / (0.5 / self.u1).sinh()
    }

    /// Weak-coupling estimate `1.134 hbar_omega_D exp(-1 / (2 U1))` of the
    /// zero-field transition temperature.
    pub fn weak_coupling_tc(&self) -> f64 {
        1.134 * self.hbar_omega_d * (-0.5 / self.u1).exp()
    }
}

impl fmt::Display for MaterialParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "hbar_omega_D = {:?}", self.hbar_omega_d)?;
        writeln!(f, "mu = {:?}", self.mu)?;
        writeln!(f, "U1 = {:?}", self.u1)?;
        writeln!(f, "a = {:?}", self.a)?;
        writeln!(f, "b = {:?}", self.b)?;
        write!(f, "mu_B = {:?}", self.mu_b)
    }
}

/// The rectangle `[t0, tau1] x [0, h_max] x [0, y0]` in (T, H, Y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub t0: f64,
    pub tau1: f64,
    pub h_max: f64,
    pub y0: f64,
}

impl DomainBox {
    pub fn contains(&self, s: &StatePoint) -> bool {
        (self.t0..=self.tau1).contains(&s.t)
            && (0.0..=self.h_max).contains(&s.h)
            && (0.0..=self.y0).contains(&s.y)
    }

    /// Replaces the Y bracket bound without the corner check.
    pub fn with_y0(self, y0: f64) -> Self {
        DomainBox { y0, ..self }
    }
}

/// Default Y bound: four times the squared zero-temperature gap.
pub fn default_y0(params: &MaterialParams) -> f64 {
    let gap = params.zero_temperature_gap();
    4.0 * gap * gap
}

/// Builds the domain box for `t0 < tau1`.
///
/// `h_max = 1.24 t0 / mu_B`. `y0` starts from [`default_y0`] and is doubled
/// until `F(t0, 0, y0) < 0`; since `F` decreases in T and H this corner
/// bounds `F(., ., y0)` over the whole box.
pub fn domain_from(params: &MaterialParams, t0: f64, tau1: f64) -> Result<DomainBox> {
    domain_from_with(params, t0, tau1, &QuadSpec::default())
}

pub fn domain_from_with(
    params: &MaterialParams,
    t0: f64,
    tau1: f64,
    quad: &QuadSpec,
) -> Result<DomainBox> {
    let params = params.validate()?;
    if !(t0 > 0.0 && t0 < tau1) {
        return Err(Error::Domain(format!(
            "need 0 < T0 < tau1 (T0 = {t0}, tau1 = {tau1})"
        )));
    }
    let h_max = FIELD_RATIO_CAP * t0 / params.mu_b;
    let mut y0 = default_y0(&params);
    for _ in 0..=MAX_Y0_DOUBLINGS {
        let corner = f_eval(&StatePoint::new(t0, 0.0, y0)?, &params, quad)?;
        if corner < 0.0 {
            return Ok(DomainBox {
                t0,
                tau1,
                h_max,
                y0,
            });
        }
        y0 *= 2.0;
    }
    Err(Error::Domain(format!(
        "F(T0, 0, Y0) stayed >= 0 after {MAX_Y0_DOUBLINGS} doublings of Y0"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample() -> MaterialParams {
        MaterialParams {
            hbar_omega_d: 1.0,
            mu: 10.0,
            u1: 0.3,
            a: 0.5,
            b: 0.1,
            mu_b: 1.0,
        }
    }

    #[test]
    fn accepts_positive_constants() {
        assert_eq!(sample().validate().unwrap(), sample());
    }

    #[test]
    fn rejects_zero_a() {
        let p = MaterialParams { a: 0.0, ..sample() };
        let msg = p.validate().unwrap_err().to_string();
        assert!(msg.starts_with("a must be > 0"), "{msg}");
    }

    #[test]
    fn rejects_negative_coupling() {
        let p = MaterialParams {
            u1: -0.1,
            ..sample()
        };
        assert!(matches!(
            p.validate(),
            Err(Error::InvalidParameter { field: "U1", .. })
        ));
    }

    #[test]
    fn h_max_uses_ratio_cap() {
        let p = MaterialParams {
            u1: 0.15,
            ..sample()
        };
        let d = domain_from(&p, 0.02, 0.04).unwrap();
        assert_eq!(d.h_max, 1.24 * 0.02 / 1.0);
        assert!((d.h_max - 0.0248).abs() < 1e-15);
        assert_relative_eq!(d.h_max * p.mu_b / d.t0, 1.24, max_relative = 1e-15);
    }

    #[test]
    fn ordering_violation_is_domain_error() {
        assert!(matches!(
            domain_from(&sample(), 0.05, 0.04),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn default_y0_closed_form() {
        let p = MaterialParams {
            u1: 0.15,
            ..sample()
        };
        let y0 = default_y0(&p);
        let expected = 4.0 / (10.0f64 / 3.0).sinh().powi(2);
        assert_relative_eq!(y0, expected, max_relative = 1e-14);
        assert!((y0 - 0.0204).abs() < 5e-4);
        let d = domain_from(&p, 0.02, 0.04).unwrap();
        assert_eq!(d.y0, y0);
        let corner = f_eval(
            &StatePoint::new(0.02, 0.0, d.y0).unwrap(),
            &p,
            &QuadSpec::default(),
        )
        .unwrap();
        assert!(corner < 0.0);
    }

    #[test]
    fn ratio_cap_inequality() {
        let z1 = FIELD_RATIO_CAP;
        assert!(z1 * z1.sinh() < 2.0);
    }

    #[test]
    fn config_round_trip() {
        let text = "# material\nhbar_omega_D = 1.0\nmu = 10 # Fermi level\nU1 = 0.2\na=0.5\nb = 0.1\nmu_B = 2\n";
        let p = MaterialParams::parse_config(text).unwrap();
        assert_eq!(p.u1, 0.2);
        assert_eq!(p.mu_b, 2.0);
        assert_eq!(MaterialParams::parse_config(&p.to_string()).unwrap(), p);
    }

    #[test]
    fn config_rejects_unknown_key() {
        let err = MaterialParams::parse_config("U1 = 0.2\nkappa = 3\n").unwrap_err();
        match err {
            Error::Config { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("kappa"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn config_rejects_garbage() {
        assert!(MaterialParams::parse_config("U1 0.2").is_err());
        assert!(MaterialParams::parse_config("U1 = x").is_err());
        assert!(MaterialParams::parse_config("U1 = 0.2\nU1 = 0.3").is_err());
        assert!(MaterialParams::parse_config("a = -1").is_err());
    }
}
