//! Audit a solved field against random boundary-preserving perturbations:
//! single-node kicks and whole-interior noise over six decades of amplitude.
//!
//! ```text
//! cargo run --release --example minimality_audit
//! ```

use std::sync::Arc;

use ftlab::solver::{minimality_audit, solve, SolveOptions};
use ftlab::{CoefficientPair, Grid, ProblemSpec, SpatialFn};

fn main() -> ftlab::Result<()> {
    let grid = Arc::new(Grid::rectangle((0.0, 1.0), (0.0, 1.0), 33, 33)?);
    let problem = ProblemSpec::builder(grid.clone())
        .p(3.0)
        .diffusion(CoefficientPair::constant(1.0, 2.0))
        .source(SpatialFn::constant(4.0), SpatialFn::constant(-1.0))
        .compensation(0.5, 0.0)
        .boundary(SpatialFn::parse("y - 0.5")?)
        .build()?;
    let solved = solve(&problem, &SolveOptions { restarts: 2, ..Default::default() })?.minimizer;
    let audit = minimality_audit(&problem, &solved, 200, 1e-9, 42)?;
    println!("solved field : {} violations in {} trials, smallest gap {:.3e}", audit.violations.len(), audit.trials, audit.min_gap);

    // the boundary interpolant is not a minimizer, and the audit notices
    let naive = problem.boundary_blend();
    let audit = minimality_audit(&problem, &naive, 200, 1e-9, 42)?;
    let largest = audit.violations.iter().map(|v| v.1).fold(0.0, f64::max);
    println!("interpolant  : {} violations in {} trials, largest drop {largest:.3e}", audit.violations.len(), audit.trials);
    Ok(())
}
