use std::path::PathBuf;
use std::str::FromStr;

use clap::{ArgAction, Args, Parser, Subcommand};
use gapfield::phase_diagram::Output;
use gapfield::MaterialParams;

/// A temperature given either directly or as a multiple of `tau1`
/// (`0.8tau1`, `tau1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Temperature {
    Value(f64),
    Tau1Multiple(f64),
}

impl Temperature {
    pub fn resolve(self, tau1: f64) -> f64 {
        match self {
            Temperature::Value(t) => t,
            Temperature::Tau1Multiple(k) => k * tau1,
        }
    }
}

impl FromStr for Temperature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let (num, relative) = match s.strip_suffix("tau1") {
            Some(head) => (head.trim_end_matches('*').trim(), true),
            None => (s, false),
        };
        let value = if relative && num.is_empty() {
            1.0
        } else {
            num.parse::<f64>()
                .map_err(|_| format!("`{s}` is not a temperature (use e.g. 0.03 or 0.8tau1)"))?
        };
        if !(value > 0.0 && value.is_finite()) {
            return Err(format!("temperature must be > 0 (got `{s}`)"));
        }
        Ok(if relative {
            Temperature::Tau1Multiple(value)
        } else {
            Temperature::Value(value)
        })
    }
}

fn parse_override(s: &str) -> Result<(String, f64), String> {
    let (key, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))?;
    let key = key.trim();
    if !MaterialParams::KEYS.contains(&key) {
        return Err(format!(
            "unknown key `{key}` (expected one of {})",
            MaterialParams::KEYS.join(", ")
        ));
    }
    let value = value
        .trim()
        .parse::<f64>()
        .map_err(|_| format!("`{}` is not a number", value.trim()))?;
    Ok((key.to_string(), value))
}

#[derive(Debug, Parser)]
#[command(
    name = "gapfield",
    version,
    about = "Superconducting gap and critical field solver for a spin-split pairing model"
)]
pub struct Cli {
    /// Material constants file (`key = value` lines). Defaults apply to missing keys.
    #[arg(long, global = true, value_name = "PATH")]
    pub params: Option<PathBuf>,

    /// Override one constant; applied after the file. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE", value_parser = parse_override)]
    pub set: Vec<(String, f64)>,

    /// Lower temperature of the domain box [default: 0.8tau1].
    #[arg(long, global = true, value_name = "TEMP")]
    pub t0: Option<Temperature>,

    /// Replace the Y bracket bound without checking it.
    #[arg(long, global = true, value_name = "Y")]
    pub y0: Option<f64>,

    #[arg(long, global = true, value_name = "TOL")]
    pub quad_abs_tol: Option<f64>,
    #[arg(long, global = true, value_name = "TOL")]
    pub quad_rel_tol: Option<f64>,
    #[arg(long, global = true, value_name = "N")]
    pub quad_max_depth: Option<u32>,
    /// Root bracket tolerance, relative to the natural scale of each solve.
    #[arg(long, global = true, value_name = "TOL")]
    pub root_x_tol: Option<f64>,
    #[arg(long, global = true, value_name = "TOL")]
    pub root_f_tol: Option<f64>,
    #[arg(long, global = true, value_name = "N")]
    pub root_max_iter: Option<usize>,

    /// CSV output prefix; files are named `<prefix>_<kind>.csv`.
    #[arg(long, global = true, default_value = "gapfield", value_name = "PATH")]
    pub prefix: PathBuf,

    /// Print a single JSON object instead of `key = value` lines.
    #[arg(long, global = true)]
    pub json: bool,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Zero-field transition temperature.
    Tc,
    /// Gap at one (T, H) point.
    Gap {
        #[arg(long = "T", alias = "t", value_name = "TEMP")]
        t: Temperature,
        #[arg(long = "H", alias = "h", default_value_t = 0.0, value_name = "FIELD")]
        h: f64,
    },
    /// Critical field curve from T0 to tau1.
    Hc {
        #[arg(short, default_value_t = 50)]
        n: usize,
    },
    /// Entropy gap across the critical curve.
    Entropy {
        /// [default: T0]
        #[arg(long = "T", alias = "t", value_name = "TEMP")]
        t: Option<Temperature>,
        /// constant, linear:<slope>, sqrt or table:<path>, optionally `@<D0>`.
        #[arg(long, default_value = "linear:0.5")]
        dos: String,
        /// Finite-difference step as a fraction of tau1 [default: 1e-3].
        #[arg(long, value_name = "FRACTION")]
        fd_step: Option<f64>,
    },
    /// Evaluate curves and surfaces over a grid and write CSV files.
    Sweep(SweepArgs),
    /// Run the invariant suite and print a pass/fail table.
    Check {
        #[arg(long, default_value = "linear:0.5")]
        dos: String,
    },
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// [default: T0]
    #[arg(long, value_name = "TEMP")]
    pub t_min: Option<Temperature>,
    /// [default: tau1]
    #[arg(long, value_name = "TEMP")]
    pub t_max: Option<Temperature>,
    #[arg(long, default_value_t = 21)]
    pub t_n: usize,
    /// Fixed field grid; any of the three switches the auto grid off.
    #[arg(long)]
    pub h_min: Option<f64>,
    /// [default: H_max]
    #[arg(long)]
    pub h_max: Option<f64>,
    #[arg(long)]
    pub h_n: Option<usize>,
    /// Points per temperature of the auto grid from 0 to H_c(T).
    #[arg(long, default_value_t = 21)]
    pub h_auto: usize,
    /// Comma-separated subset of hc, gap, psi, entropy [default: all].
    #[arg(long, value_delimiter = ',')]
    pub outputs: Vec<Output>,
    #[arg(long, default_value = "linear:0.5")]
    pub dos: String,
    /// Finite-difference step as a fraction of tau1 [default: 1e-3].
    #[arg(long, value_name = "FRACTION")]
    pub fd_step: Option<f64>,
}
