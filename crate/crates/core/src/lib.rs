//! Numerical solver for the BCS gap equation in a constant external
//! magnetic field.
//!
//! The crate computes the zero-field transition temperature, the critical
//! field curve `H_c(T)`, the squared gap `Y = f(T, H)`, the grand potentials
//! of the superconducting and normal states and the entropy gap across the
//! critical curve.

pub mod error;
pub mod kernel;
pub mod numerics;
pub mod params;
pub mod phase_diagram;
pub mod solvers;
pub mod thermo;

pub use error::{Error, Result};
pub use kernel::{f_eval, f_partials, FPartials, StatePoint};
pub use numerics::{QuadSpec, RootSpec};
pub use params::{domain_from, DomainBox, MaterialParams};
pub use phase_diagram::{run_sweep, write_csv, Dataset, FieldGrid, Grid, Output, SweepSpec};
pub use solvers::{
    build_curve, default_domain, hc_slope_at_tc, implicit_partials, solve_gap_squared, solve_hc,
    solve_tau1, CriticalFieldCurve, GapSolution, ImplicitPartials, SolverSpec,
};
pub use thermo::{
    entropy_gap, entropy_gap_fd, grand_potential_n, grand_potential_s, psi, DosKind, DosModel,
    EntropyGap, ThermoPoint,
};
