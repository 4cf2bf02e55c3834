//! Minimize a two-phase energy on the unit square and inspect the result.
//!
//! ```text
//! cargo run --release --example solve_two_phase
//! ```

use std::sync::Arc;

use ftlab::problem::energy_lower_bound;
use ftlab::solver::{solve, SolveOptions};
use ftlab::{CoefficientPair, Grid, ProblemSpec, SpatialFn};

fn main() -> ftlab::Result<()> {
    let grid = Arc::new(Grid::rectangle((0.0, 1.0), (0.0, 1.0), 33, 33)?);
    // stiffer positive phase, a compensation jump, and boundary data that
    // change sign along a tilted line
    let problem = ProblemSpec::builder(grid)
        .diffusion(CoefficientPair::constant(2.0, 1.0))
        .compensation(1.0, 0.0)
        .boundary(SpatialFn::parse("x - 0.5 + 0.2*(y - 0.5)")?)
        .build()?;

    let result = solve(&problem, &SolveOptions { restarts: 4, seed: 7, ..Default::default() })?;
    let e = &result.energy;
    println!("status        {:?}", result.status);
    println!("winning start {} of {}", result.winner, result.restarts.len());
    println!("energy        {:.10}", e.total);
    println!("  diffusion   {:.10} (+ {:.6}, − {:.6})", e.diffusion(), e.diffusion_plus, e.diffusion_minus);
    println!("  source      {:.10}", e.source());
    println!("  compensation{:.10}", e.compensation());
    println!("lower bound   {:.10}", energy_lower_bound(&problem));
    println!("\ncontinuation stages (σ, iterations, exact energy):");
    for s in &result.stage_history {
        println!("  {:>9.2e} {:>6} {:.10}{}", s.sigma, s.iterations, s.exact_energy, if s.accepted { "" } else { "  (rejected)" });
    }
    Ok(())
}
