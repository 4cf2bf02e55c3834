//! Oscillation decay and Hölder-exponent fits at free-boundary and interior
//! points of a solved field, plus the Harnack ratio inside the positive phase.
//!
//! ```text
//! cargo run --release --example regularity_fit
//! ```

use std::sync::Arc;

use ftlab::regularity::{free_boundary_centers, harnack_ratio, interior_centers, regularity_report, CenterKind};
use ftlab::solver::{solve, SolveOptions};
use ftlab::{CoefficientPair, Grid, ProblemSpec, SpatialFn};

fn main() -> ftlab::Result<()> {
    let grid = Arc::new(Grid::rectangle((0.0, 1.0), (0.0, 1.0), 97, 97)?);
    let h = grid.h();
    let f = SpatialFn::parse("3000*(0.1 - (x - 0.5)*(x - 0.5) - (y - 0.5)*(y - 0.5))")?;
    let problem = ProblemSpec::builder(grid)
        .diffusion(CoefficientPair::new(SpatialFn::parse("1.5 + 0.5*x")?, SpatialFn::parse("1.5 + 0.5*x")?, 1.0, 2.0))
        .source(f.clone(), f)
        .compensation(1.0, 0.0)
        .build()?;
    let u = solve(&problem, &SolveOptions { restarts: 2, seed: 11, ..Default::default() })?.minimizer;

    let margin = 16.0 * h;
    let mut centers: Vec<_> = free_boundary_centers(&u, 4, margin)?
        .into_iter()
        .map(|c| (c, CenterKind::FreeBoundary))
        .collect();
    centers.extend(interior_centers(&u, 2, margin)?.into_iter().map(|c| (c, CenterKind::Interior)));

    for (c, kind) in centers {
        let report = regularity_report(&u, c, kind, None)?;
        println!("{kind:?} centre ({:.3}, {:.3})", c[0], c[1]);
        for (r, osc) in report.radii.iter().zip(&report.oscillations) {
            println!("    r = {r:.5}  osc = {osc:.6e}");
        }
        match &report.fit {
            Some(fit) => println!("    α̂ = {:.4}, Ĉ = {:.4}, residual {:.4}", fit.alpha, fit.constant, fit.residual),
            None => println!("    not enough non-zero oscillations to fit"),
        }
    }

    // the ratio sup u / (inf u + r‖f₊‖) stays bounded on balls in {u > 0}
    let peak = (0..u.values().len()).max_by(|&a, &b| u.value(a).total_cmp(&u.value(b))).unwrap();
    let c = u.grid().point(peak);
    for r in [4.0 * h, 8.0 * h] {
        match harnack_ratio(&u, &problem, c, r) {
            Ok(ratio) => println!("Harnack ratio at the peak, r = {r:.4}: {ratio:.4}"),
            Err(e) => println!("Harnack ratio at r = {r:.4} unavailable: {e}"),
        }
    }
    Ok(())
}
