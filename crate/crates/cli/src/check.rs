//! Invariant suite behind `gapfield check`. Hard checks decide the exit
//! code; soft checks are reported only.

use gapfield::kernel::{thermal_weight, thermal_weight_fermi};
use gapfield::params::FIELD_RATIO_CAP;
use gapfield::solvers::{
    build_curve, hc_slope_at_tau1, implicit_partials, solve_gap_squared, solve_hc, uniform_grid,
    GapSolution,
};
use gapfield::thermo::{
    entropy_gap, entropy_gap_fd, grand_potential_n, grand_potential_s, psi, DosModel,
    DEFAULT_FD_STEP_FRACTION,
};
use gapfield::{f_eval, f_partials, MaterialParams, Result, StatePoint};

use crate::report::{CheckLine, Report};
use crate::Setup;

type Verdict = Result<(bool, String)>;

struct Check<'a> {
    name: &'static str,
    property: &'static str,
    hard: bool,
    run: Box<dyn Fn() -> Verdict + 'a>,
}

fn f(s: &Setup, t: f64, h: f64, y: f64) -> Result<f64> {
    f_eval(&StatePoint::new(t, h, y)?, &s.params, &s.solver.quad)
}

// Deterministic points in [0, 1): a Halton sequence in bases 2, 3 and 5.
fn halton(i: usize, base: usize) -> f64 {
    let (mut f, mut r, mut i) = (1.0, 0.0, i + 1);
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

fn box_point(s: &Setup, i: usize) -> (f64, f64, f64) {
    let d = &s.dbox;
    (
        d.t0 + (d.tau1 - d.t0) * halton(i, 2),
        d.h_max * halton(i, 3),
        d.y0 * halton(i, 5),
    )
}

fn checks<'a>(s: &'a Setup, dos: &'a DosModel) -> Vec<Check<'a>> {
    let d = &s.dbox;
    let p = &s.params;
    let spec = &s.solver;
    let constant = DosModel::constant(1.0).expect("constant DOS");
    vec![
        Check {
            name: "tau1",
            property: "tau1 is the root of F(T, 0, 0) and close to the weak-coupling value",
            hard: true,
            run: Box::new(move || {
                let r = f(s, d.tau1, 0.0, 0.0)?;
                let dev = d.tau1 / p.weak_coupling_tc() - 1.0;
                Ok((
                    r.abs() <= 10.0 * spec.root.f_tol && dev.abs() <= 0.02,
                    format!(
                        "F(tau1, 0, 0) = {r:.1e}, weak-coupling deviation {:.3}%",
                        100.0 * dev
                    ),
                ))
            }),
        },
        Check {
            name: "domain box",
            property: "H_max mu_B / T0 = 1.24 and F(T0, 0, Y0) < 0",
            hard: true,
            run: Box::new(move || {
                let corner = f(s, d.t0, 0.0, d.y0)?;
                let ratio = d.h_max * p.mu_b / d.t0;
                Ok((
                    corner < 0.0 && (ratio - FIELD_RATIO_CAP).abs() <= 1e-14,
                    format!("F(T0, 0, Y0) = {corner:.3e}, ratio {ratio}"),
                ))
            }),
        },
        Check {
            name: "ratio cap",
            property: "z1 sinh z1 < 2 at z1 = 1.24",
            hard: true,
            run: Box::new(|| {
                let v = FIELD_RATIO_CAP * FIELD_RATIO_CAP.sinh();
                Ok((v < 2.0, format!("z1 sinh z1 = {v:.6}")))
            }),
        },
        Check {
            name: "thermal weight",
            property: "sinh/cosh weight equals 1 - n(z + z1) - n(z - z1)",
            hard: true,
            run: Box::new(|| {
                let p = MaterialParams::default();
                let mut worst: f64 = 0.0;
                for i in 0..500 {
                    let z = 60.0 * halton(i, 2);
                    let z1 = 3.0 * halton(i, 3);
                    let w = thermal_weight(1.0, z, z1 / p.mu_b, &p);
                    worst = worst.max((w - thermal_weight_fermi(z, z1)).abs());
                }
                Ok((
                    worst <= 1e-12,
                    format!("max |diff| {worst:.1e} over 500 points"),
                ))
            }),
        },
        Check {
            name: "F monotone",
            property: "F strictly decreasing in T, H and Y on the domain box",
            hard: true,
            run: Box::new(move || {
                let mut bad = 0;
                for i in 0..100 {
                    let (t, h, y) = box_point(s, i);
                    let g = f_partials(&StatePoint::new(t, h, y)?, p, &spec.quad)?;
                    if !(g.t < 0.0 && g.h < 0.0 && g.y < 0.0) {
                        bad += 1;
                    }
                }
                Ok((
                    bad == 0,
                    format!("{bad} of 100 points with a non-negative partial"),
                ))
            }),
        },
        Check {
            name: "F positive below tau1",
            property: "F(T, 0, 0) > 0 for T < tau1",
            hard: true,
            run: Box::new(move || {
                let mut bad = 0;
                for k in 1..=20 {
                    if f(s, d.tau1 * k as f64 / 21.0, 0.0, 0.0)? <= 0.0 {
                        bad += 1;
                    }
                }
                Ok((bad == 0, format!("{bad} of 20 temperatures violate it")))
            }),
        },
        Check {
            name: "critical field",
            property: "H_c(tau1) = 0 and H_c nonincreasing on [T0, tau1]",
            hard: true,
            run: Box::new(move || {
                let c = build_curve(p, d, 30, spec)?;
                let up = c.samples.windows(2).filter(|w| w[1].1 > w[0].1).count();
                let last = c.samples[c.samples.len() - 1].1;
                Ok((
                    last <= 1e-8 && up == 0,
                    format!(
                        "H_c(T0) = {:.6}, H_c(tau1) = {last:.1e}, {up} increases",
                        c.samples[0].1
                    ),
                ))
            }),
        },
        Check {
            name: "gap on critical curve",
            property: "the gap vanishes at H = H_c(T)",
            hard: true,
            run: Box::new(move || {
                let mut worst: f64 = 0.0;
                for t in uniform_grid(d.t0, d.tau1, 5) {
                    let hc = solve_hc(t, p, d, spec)?;
                    worst = worst.max(solve_gap_squared(t, hc, p, d, spec)?.delta);
                }
                Ok((worst <= 1e-6, format!("max Delta {worst:.1e}")))
            }),
        },
        Check {
            name: "gap monotone",
            property: "0 <= Y <= Y0 and Delta nonincreasing in T and in H",
            hard: true,
            run: Box::new(move || {
                let temps = uniform_grid(d.t0, d.tau1, 6);
                let fields = uniform_grid(0.0, d.h_max, 6);
                let mut grid = Vec::new();
                for &t in &temps {
                    let row = fields
                        .iter()
                        .map(|&h| solve_gap_squared(t, h, p, d, spec))
                        .collect::<Result<Vec<GapSolution>>>()?;
                    grid.push(row);
                }
                let mut bad = 0;
                for i in 0..6 {
                    for j in 0..6 {
                        let g = &grid[i][j];
                        bad += usize::from(!(0.0..=d.y0).contains(&g.y));
                        if i + 1 < 6 && grid[i + 1][j].delta > g.delta {
                            bad += 1;
                        }
                        if j + 1 < 6 && grid[i][j + 1].delta > g.delta {
                            bad += 1;
                        }
                    }
                }
                Ok((bad == 0, format!("{bad} violations on a 6 x 6 grid")))
            }),
        },
        Check {
            name: "implicit partials",
            property: "df/dT < 0 and df/dH < 0 inside the superconducting region",
            hard: true,
            run: Box::new(move || {
                let mut bad = 0;
                for i in 0..5 {
                    let t = d.t0 + (d.tau1 - d.t0) * (0.1 + 0.15 * i as f64);
                    let h = 0.5 * solve_hc(t, p, d, spec)?;
                    let ip = implicit_partials(t, h, p, d, spec)?;
                    bad += usize::from(!(ip.df_dt < 0.0 && ip.df_dh < 0.0));
                }
                Ok((bad == 0, format!("{bad} of 5 points")))
            }),
        },
        Check {
            name: "normal state potential",
            property: "Omega_S equals Omega_N exactly when the gap is zero",
            hard: true,
            run: Box::new(move || {
                let (t, h) = (0.9 * d.tau1, 0.5 * d.h_max);
                let zero = GapSolution::normal(t, h);
                let a = grand_potential_s(t, h, p, dos, &zero, spec)?;
                let b = grand_potential_n(t, h, p, dos, spec)?;
                Ok((a.to_bits() == b.to_bits(), format!("Omega = {a:.12e}")))
            }),
        },
        Check {
            name: "psi on critical curve",
            property: "Psi(T, H_c(T)) = 0",
            hard: true,
            run: Box::new(move || {
                let mut worst: f64 = 0.0;
                for t in uniform_grid(d.t0, d.tau1, 5) {
                    let hc = solve_hc(t, p, d, spec)?;
                    let tp = psi(t, hc, p, dos, d, spec)?;
                    worst = worst.max(tp.psi.abs() / tp.omega_n.abs());
                }
                Ok((worst <= 1e-8, format!("max |Psi| / |Omega_N| {worst:.1e}")))
            }),
        },
        Check {
            name: "entropy gap, constant DOS",
            property: "the entropy gap vanishes for a constant density of states",
            hard: true,
            run: Box::new(move || {
                let g = entropy_gap(d.t0, p, &constant, d, spec)?;
                Ok((g.ds.abs() <= 1e-12, format!("dS = {:.1e}", g.ds)))
            }),
        },
        Check {
            name: "entropy gap sign",
            property: "dS < 0 for an increasing density of states (first-order transition)",
            hard: true,
            run: Box::new(move || {
                if !dos.monotone_increasing {
                    return Ok((true, "skipped: model is not strictly increasing".into()));
                }
                let mut worst = f64::NEG_INFINITY;
                for t in uniform_grid(d.t0, d.tau1, 5).into_iter().take(4) {
                    let g = entropy_gap(t, p, dos, d, spec)?;
                    if !(g.df_dt < 0.0 && g.brace < 0.0) {
                        return Ok((false, format!("factor signs at T = {t}: {g:?}")));
                    }
                    worst = worst.max(g.ds);
                }
                Ok((worst < 0.0, format!("largest dS {worst:.3e}")))
            }),
        },
        Check {
            name: "slope formula",
            property: "closed-form dH_c/dT at tau1 is negative and scales as 1/a",
            hard: true,
            run: Box::new(move || {
                let s1 = hc_slope_at_tau1(p, d.tau1, &spec.quad)?;
                let doubled = MaterialParams { a: 2.0 * p.a, ..*p };
                let s2 = hc_slope_at_tau1(&doubled, d.tau1, &spec.quad)?;
                Ok((
                    s1 < 0.0 && s2 == 0.5 * s1,
                    format!("{s1:.6} (a), {s2:.6} (2a)"),
                ))
            }),
        },
        Check {
            name: "psi negative",
            property: "Psi < 0 below the critical field",
            hard: false,
            run: Box::new(move || {
                let mut bad = 0;
                for i in 0..10 {
                    let t = d.t0 + (d.tau1 - d.t0) * 0.9 * halton(i, 2);
                    let h = solve_hc(t, p, d, spec)? * 0.95 * halton(i, 3);
                    bad += usize::from(psi(t, h, p, dos, d, spec)?.psi >= 0.0);
                }
                Ok((bad == 0, format!("{bad} of 10 points with Psi >= 0")))
            }),
        },
        Check {
            name: "entropy gap vs finite difference",
            property: "formula and -dPsi/dT along H_c agree within 5%",
            hard: false,
            run: Box::new(move || {
                let formula = entropy_gap(d.t0, p, dos, d, spec)?.ds;
                let fd = entropy_gap_fd(d.t0, p, dos, d, spec, DEFAULT_FD_STEP_FRACTION * d.tau1)?;
                let scale = grand_potential_n(d.t0, 0.0, p, dos, spec)?.abs();
                let ok = if formula.abs() <= 1e-12 {
                    fd.abs() <= 1e-6 * scale
                } else {
                    (formula / fd - 1.0).abs() <= 0.05
                };
                Ok((
                    ok,
                    format!("formula {formula:.6e}, finite difference {fd:.6e}"),
                ))
            }),
        },
        Check {
            name: "slope vs finite difference",
            property: "closed-form slope matches backward differences of H_c near tau1",
            hard: false,
            run: Box::new(move || {
                let slope = hc_slope_at_tau1(p, d.tau1, &spec.quad)?;
                let mut fds = Vec::new();
                for k in [1e-3, 1e-4, 1e-5] {
                    fds.push(-solve_hc(d.tau1 * (1.0 - k), p, d, spec)? / (k * d.tau1));
                }
                Ok((
                    (fds[1] / slope - 1.0).abs() <= 0.01,
                    format!(
                        "formula {slope:.4}; steps 1e-3/1e-4/1e-5 tau1 give {:.4} / {:.4} / {:.4}",
                        fds[0], fds[1], fds[2]
                    ),
                ))
            }),
        },
    ]
}

/// Runs every check; returns whether all hard checks passed.
pub fn run(s: &Setup, dos: &DosModel, out: &mut Report) -> bool {
    let mut hard_failures = 0;
    let mut soft_failures = 0;
    for c in checks(s, dos) {
        let (passed, detail) = match (c.run)() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            if c.hard {
                hard_failures += 1;
            } else {
                soft_failures += 1;
            }
        }
        out.check(CheckLine {
            name: c.name,
            property: c.property,
            hard: c.hard,
            passed,
            detail,
        });
    }
    out.num("tau1", s.dbox.tau1);
    out.int("hard_failures", hard_failures);
    out.int("soft_failures", soft_failures);
    out.flag("passed", hard_failures == 0);
    hard_failures == 0
}

#[cfg(test)]
mod tests {
    use super::halton;

    #[test]
    fn halton_points_are_in_unit_interval_and_distinct() {
        let pts: Vec<f64> = (0..50).map(|i| halton(i, 3)).collect();
        assert!(pts.iter().all(|&x| (0.0..1.0).contains(&x)));
        assert_eq!(halton(0, 2), 0.5);
        assert_eq!(halton(1, 2), 0.25);
        let mut sorted = pts.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        assert_eq!(sorted.len(), 50);
    }
}
