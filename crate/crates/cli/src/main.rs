//! `gapfield`: transition temperature, critical field, gap, grand potentials
//! and entropy gap from the command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical
//! failure, 3 self-check failure.

mod args;
mod check;
mod report;

use std::path::Path;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::Parser;
use gapfield::phase_diagram::{self, EntropyRow, FieldGrid, Grid, HcRow, Output, SweepSpec};
use gapfield::solvers::{self, SolverSpec};
use gapfield::thermo::{self, DosModel, DEFAULT_FD_STEP_FRACTION};
use gapfield::{domain_from, DomainBox, MaterialParams};

use args::{Cli, Command, Temperature};
use report::Report;

/// Failure classes, mapped to exit codes.
enum Failure {
    Usage(anyhow::Error),
    Numerical(anyhow::Error),
    Check,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Check => 3,
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Usage(e.into())
}

fn numerical<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Numerical(e.into())
}

/// Everything a command needs after the configuration has been resolved.
pub struct Setup {
    pub params: MaterialParams,
    pub solver: SolverSpec,
    pub dbox: DomainBox,
}

impl Setup {
    fn tau1(&self) -> f64 {
        self.dbox.tau1
    }

    fn resolve(&self, t: Temperature) -> f64 {
        t.resolve(self.tau1())
    }
}

fn load_params(cli: &Cli) -> Outcome<MaterialParams> {
    let mut params = match &cli.params {
        Some(path) => MaterialParams::load(path).map_err(usage)?,
        None => MaterialParams::default(),
    };
    for (key, value) in &cli.set {
        params.set(key, *value).map_err(usage)?;
    }
    params.validate().map_err(usage)
}

fn solver_spec(cli: &Cli) -> Outcome<SolverSpec> {
    let mut spec = SolverSpec::default();
    if let Some(v) = cli.quad_abs_tol {
        spec.quad.abs_tol = v;
    }
    if let Some(v) = cli.quad_rel_tol {
        spec.quad.rel_tol = v;
    }
    if let Some(v) = cli.quad_max_depth {
        spec.quad.max_depth = v;
    }
    if let Some(v) = cli.root_x_tol {
        spec.root.x_tol = v;
    }
    if let Some(v) = cli.root_f_tol {
        spec.root.f_tol = v;
    }
    if let Some(v) = cli.root_max_iter {
        spec.root.max_iter = v;
    }
    spec.quad.validate().map_err(usage)?;
    spec.root.validate().map_err(usage)?;
    Ok(spec)
}

fn setup(cli: &Cli) -> Outcome<Setup> {
    let params = load_params(cli)?;
    let solver = solver_spec(cli)?;
    let tau1 = solvers::solve_tau1(&params, &solver).map_err(numerical)?;
    let t0 = cli
        .t0
        .unwrap_or(Temperature::Tau1Multiple(solvers::DEFAULT_T0_FRACTION))
        .resolve(tau1);
    let mut dbox = domain_from(&params, t0, tau1).map_err(|e| match e {
        gapfield::Error::Domain(_) => usage(e),
        other => numerical(other),
    })?;
    if let Some(y0) = cli.y0 {
        // deliberately unchecked, so that a bad bracket can be injected
        dbox = dbox.with_y0(y0);
    }
    Ok(Setup {
        params,
        solver,
        dbox,
    })
}

fn parse_dos(spec: &str) -> Outcome<DosModel> {
    spec.parse::<DosModel>()
        .with_context(|| format!("--dos {spec}"))
        .map_err(usage)
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> std::io::Result<()>,
) -> Outcome {
    let file = std::fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(usage)?;
    let mut w = std::io::BufWriter::new(file);
    f(&mut w)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(usage)
}

fn cmd_tc(s: &Setup, out: &mut Report) -> Outcome {
    let wc = s.params.weak_coupling_tc();
    out.num("tau1", s.tau1());
    out.num("tau1_weak_coupling", wc);
    out.num("deviation_percent", 100.0 * (s.tau1() / wc - 1.0));
    out.num("T0", s.dbox.t0);
    out.num("H_max", s.dbox.h_max);
    out.num("Y0", s.dbox.y0);
    Ok(())
}

fn cmd_gap(s: &Setup, t: Temperature, h: f64, out: &mut Report) -> Outcome {
    let t = s.resolve(t);
    let g = solvers::solve_gap_squared(t, h, &s.params, &s.dbox, &s.solver).map_err(numerical)?;
    out.num("T", g.t);
    out.num("H", g.h);
    out.num("delta", g.delta);
    out.num("Y", g.y);
    out.text("state", g.state());
    out.flag("boundary", g.boundary);
    out.num("residual", g.residual);
    out.int("iterations", g.iterations);
    Ok(())
}

fn cmd_hc(s: &Setup, n: usize, prefix: &Path, out: &mut Report) -> Outcome {
    if n < 2 {
        return Err(usage(anyhow!("-n must be at least 2 (got {n})")));
    }
    let curve = solvers::build_curve(&s.params, &s.dbox, n, &s.solver).map_err(numerical)?;
    let rows: Vec<HcRow> = curve
        .samples
        .iter()
        .map(|&(t, h_c)| HcRow { t, h_c })
        .collect();
    let path = phase_diagram::output_path(prefix, Output::HcCurve);
    write_file(&path, |w| phase_diagram::write_hc(w, &rows))?;
    out.num("tau1", curve.tau1);
    out.int("rows", rows.len());
    out.num("H_c_at_T0", curve.samples[0].1);
    out.num("slope_at_tau1", curve.slope_at_tau1);
    out.path("csv", &path);
    Ok(())
}

fn cmd_entropy(
    s: &Setup,
    t: Option<Temperature>,
    dos: &str,
    fd_step: Option<f64>,
    prefix: &Path,
    out: &mut Report,
) -> Outcome {
    let dos = parse_dos(dos)?;
    let t = t.map_or(s.dbox.t0, |t| s.resolve(t));
    let step = fd_step.unwrap_or(DEFAULT_FD_STEP_FRACTION) * s.tau1();
    let gap = thermo::entropy_gap(t, &s.params, &dos, &s.dbox, &s.solver).map_err(numerical)?;
    let fd =
        thermo::entropy_gap_fd(t, &s.params, &dos, &s.dbox, &s.solver, step).map_err(numerical)?;
    let row = EntropyRow {
        t,
        h_c: gap.h_c,
        ds_formula: gap.ds,
        ds_fd: fd,
    };
    let path = phase_diagram::output_path(prefix, Output::EntropyCurve);
    write_file(&path, |w| phase_diagram::write_entropy(w, &[row]))?;
    out.num("T", t);
    out.num("H_c", gap.h_c);
    out.num("dS_formula", gap.ds);
    out.num("dS_fd", fd);
    out.num("df_dT", gap.df_dt);
    out.num("brace", gap.brace);
    out.num("fd_step", step);
    out.flag("monotone_dos", dos.monotone_increasing);
    out.path("csv", &path);
    Ok(())
}

fn cmd_sweep(s: &Setup, a: &args::SweepArgs, prefix: &Path, out: &mut Report) -> Outcome {
    let dos = parse_dos(&a.dos)?;
    let t_min = a.t_min.map_or(s.dbox.t0, |t| s.resolve(t));
    let t_max = a.t_max.map_or(s.tau1(), |t| s.resolve(t));
    let t_grid = Grid::new(t_min, t_max, a.t_n).map_err(usage)?;
    let h_grid = match (a.h_min, a.h_max, a.h_n) {
        (None, None, None) => FieldGrid::Auto { n: a.h_auto },
        (lo, hi, n) => FieldGrid::Fixed(
            Grid::new(
                lo.unwrap_or(0.0),
                hi.unwrap_or(s.dbox.h_max),
                n.unwrap_or(a.h_auto),
            )
            .map_err(usage)?,
        ),
    };
    let outputs = if a.outputs.is_empty() {
        Output::ALL.into_iter().collect()
    } else {
        a.outputs.iter().copied().collect()
    };
    let spec = SweepSpec {
        t_grid,
        h_grid,
        outputs,
        fd_step: a.fd_step.map(|f| f * s.tau1()),
    };
    spec.validate(&s.dbox).map_err(usage)?;
    let data =
        phase_diagram::run_sweep(&spec, &s.params, &dos, &s.dbox, &s.solver).map_err(numerical)?;
    let paths = phase_diagram::write_csv(&data, prefix).map_err(usage)?;
    out.int("points", data.points);
    out.int("failures", data.failures);
    for p in &paths {
        let key = p
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.rsplit('_').next())
            .unwrap_or("csv");
        out.path(&format!("csv_{key}"), p);
    }
    Ok(())
}

fn run(cli: &Cli) -> Outcome {
    let s = setup(cli)?;
    let mut out = Report::new(cli.json);
    let prefix = cli.prefix.as_path();
    let result = match &cli.command {
        Command::Tc => cmd_tc(&s, &mut out),
        Command::Gap { t, h } => cmd_gap(&s, *t, *h, &mut out),
        Command::Hc { n } => cmd_hc(&s, *n, prefix, &mut out),
        Command::Entropy { t, dos, fd_step } => {
            cmd_entropy(&s, *t, dos, *fd_step, prefix, &mut out)
        }
        Command::Sweep(a) => cmd_sweep(&s, a, prefix, &mut out),
        Command::Check { dos } => {
            let dos = parse_dos(dos)?;
            let passed = check::run(&s, &dos, &mut out);
            out.print();
            return if passed { Ok(()) } else { Err(Failure::Check) };
        }
    };
    result?;
    out.print();
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(e) | Failure::Numerical(e) => eprintln!("error: {e:#}"),
                Failure::Check => eprintln!("error: self-check failed"),
            }
            ExitCode::from(f.code())
        }
    }
}
