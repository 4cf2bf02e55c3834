//! The blow-up `v(y) = r^{−α} u(x₀ + r y)` on the unit ball carries
//! `r^{p(1−α)−N}` times the Dirichlet energy of `u` on `B_r(x₀)`.
//!
//! ```text
//! cargo run --release --example rescaling
//! ```

use std::sync::Arc;

use ftlab::grid::distance;
use ftlab::problem::dirichlet_integral;
use ftlab::regularity::rescale;
use ftlab::{Grid, ScalarField};

fn main() -> ftlab::Result<()> {
    let grid = Arc::new(Grid::rectangle((0.0, 1.0), (0.0, 1.0), 129, 129)?);
    let u = ScalarField::from_fn(grid, |x| (x[0] - 0.5).abs().sqrt() * (x[0] - 0.5).signum() + 0.3 * x[1] * x[1]);
    let c = [0.5, 0.5];
    let p = 2.0;
    println!("{:>6} {:>6} {:>14} {:>14} {:>10}", "r", "α", "∫_B1 |∇v|²", "scaled ∫_Br", "rel. gap");
    for (r, alpha) in [(0.3, 0.5), (0.2, 0.5), (0.2, 0.8), (0.1, 1.0)] {
        let v = rescale(&u, c, r, alpha, 257)?;
        let lhs = dirichlet_integral(&v, p, |y| distance(y, [0.0, 0.0]) <= 1.0);
        let rhs = r.powf(p * (1.0 - alpha) - 2.0) * dirichlet_integral(&u, p, |x| distance(x, c) <= r);
        println!("{r:>6} {alpha:>6} {lhs:>14.6} {rhs:>14.6} {:>10.2e}", (lhs - rhs).abs() / rhs);
    }
    Ok(())
}
