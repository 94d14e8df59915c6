//! Shared fixtures for the criterion benches.

use gapfield::solvers::{default_domain, SolverSpec};
use gapfield::{DomainBox, MaterialParams};

/// Default material, default tolerances and the domain box built from them.
pub fn fixture() -> (MaterialParams, SolverSpec, DomainBox) {
    let p = MaterialParams::default();
    let spec = SolverSpec::default();
    let d = default_domain(&p, &spec).expect("default domain");
    (p, spec, d)
}
