//! Compare the discrete minimizer of a 1D jump problem with the exact
//! one-parameter minimizer over the kink position.
//!
//! ```text
//! cargo run --release --example oracle_comparison
//! ```

use std::sync::Arc;

use ftlab::experiments::first_zero;
use ftlab::oracle1d::{energy_of_kink, exact_minimizer, Oracle1DProblem};
use ftlab::solver::{solve, SolveOptions};
use ftlab::{CoefficientPair, Grid, ProblemSpec, SpatialFn};

fn main() -> ftlab::Result<()> {
    let oracle = Oracle1DProblem {
        interval: (-1.0, 1.0),
        boundary: (-1.0, 1.0),
        a_plus: 2.0,
        a_minus: 1.0,
        gamma_plus: 0.0,
        gamma_minus: 0.0,
        p: 2.0,
    };
    let exact = exact_minimizer(&oracle, 1e-12)?;
    println!("closed form  t* = {:.12}, E* = {:.12}", -(3.0 - 8f64.sqrt()), (1.0 + 2f64.sqrt()).powi(2) / 2.0);
    println!("oracle       t* = {:.12}, E* = {:.12}", exact.kink, exact.energy);
    println!("E(t) near t*: {:?}", [-0.3, -0.2, -0.1, 0.0].map(|t| energy_of_kink(&oracle, t).unwrap()));

    println!("\n{:>6} {:>14} {:>12} {:>14} {:>12}", "nodes", "zero", "gap / h", "energy", "gap / h");
    for nodes in [65, 129, 257, 513, 1025] {
        let grid = Arc::new(Grid::interval(-1.0, 1.0, nodes)?);
        let h = grid.h();
        let problem = ProblemSpec::builder(grid)
            .diffusion(CoefficientPair::constant(2.0, 1.0))
            .boundary(SpatialFn::parse("x")?)
            .build()?;
        let result = solve(&problem, &SolveOptions::default())?;
        let zero = first_zero(&result.minimizer).unwrap_or(f64::NAN);
        println!(
            "{nodes:>6} {zero:>14.8} {:>12.3} {:>14.10} {:>12.3}",
            (zero - exact.kink) / h,
            result.energy.total,
            (result.energy.total - exact.energy) / h
        );
    }
    Ok(())
}
