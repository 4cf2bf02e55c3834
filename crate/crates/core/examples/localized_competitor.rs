//! Compare a minimizer with its truncation `u_ε` and with the localized
//! competitor `ηu + (1 − η)u_ε`, which agrees with `u` outside a ball and
//! therefore keeps the boundary data.
//!
//! ```text
//! cargo run --release --example localized_competitor
//! ```

use std::sync::Arc;

use ftlab::geometry::{localized_competitor, truncate};
use ftlab::regularity::free_boundary_centers;
use ftlab::solver::{solve, SolveOptions};
use ftlab::{assemble_energy, CoefficientPair, Grid, ProblemSpec, SpatialFn};

fn main() -> ftlab::Result<()> {
    let grid = Arc::new(Grid::rectangle((0.0, 1.0), (0.0, 1.0), 49, 49)?);
    let h = grid.h();
    let problem = ProblemSpec::builder(grid)
        .diffusion(CoefficientPair::constant(2.0, 1.0))
        .compensation(1.0, 0.0)
        .boundary(SpatialFn::parse("x - 0.5 + 0.2*y")?)
        .build()?;
    let u = solve(&problem, &SolveOptions { restarts: 2, ..Default::default() })?.minimizer;
    let energy = assemble_energy(&problem, &u)?.total;
    let center = free_boundary_centers(&u, 1, 0.3)?[0];
    let r = 0.12;
    println!("F(u) = {energy:.10}; ball B_{r}({:.3}, {:.3}) on the free boundary", center[0], center[1]);
    println!("{:>8} {:>16} {:>16}", "ε / h", "F(ũ_ε) − F(u)", "max |u − u_ε|");
    for k in [1.0, 2.0, 4.0, 8.0] {
        let eps = k * h;
        let local = localized_competitor(&u, eps, center, r)?;
        let gap = assemble_energy(&problem, &local)?.total - energy;
        let cut = truncate(&u, eps)?;
        let shift = u.values().iter().zip(cut.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("{k:>8} {gap:>16.3e} {shift:>16.3e}");
    }
    Ok(())
}
