//! End-to-end checks on small solved problems: the worked examples that
//! tie the solver, geometry and regularity modules together.

use std::path::Path;
use std::sync::Arc;

use ftlab::config::{jump_family, rebuild_on, ExperimentConfig};
use ftlab::experiments::first_zero;
use ftlab::geometry::{coarea_scan, localized_competitor, truncate};
use ftlab::regularity::{free_boundary_centers, oscillation_decay, regularity_report, uniform_closeness, CenterKind, Subdomain};
use ftlab::solver::{solve, SolveOptions, SolveStatus};
use ftlab::{assemble_energy, CoefficientPair, Grid, ProblemSpec, ScalarField, SpatialFn};

fn config(name: &str) -> ExperimentConfig {
    ExperimentConfig::from_path(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)).unwrap()
}

/// The same problem on `nodes` points.
fn on_nodes(cfg: &ExperimentConfig, nodes: usize) -> ProblemSpec {
    let g = cfg.problem.grid();
    let e = g.extents()[0];
    rebuild_on(&cfg.problem, Arc::new(Grid::interval(e[0], e[1], nodes).unwrap())).unwrap()
}

#[test]
fn jump_minimizer_is_lipschitz_at_the_kink() {
    // piecewise affine in 1D, so the fitted exponent at the kink is 1
    let cfg = config("jump_1d.toml");
    let problem = on_nodes(&cfg, 1025);
    let result = solve(&problem, &cfg.solver).unwrap();
    assert_eq!(result.status, SolveStatus::Converged);
    let kink = first_zero(&result.minimizer).unwrap();
    let report = regularity_report(&result.minimizer, [kink, 0.0], CenterKind::FreeBoundary, None).unwrap();
    let alpha = report.alpha_hat().unwrap();
    assert!((alpha - 1.0).abs() <= 0.05, "alpha_hat = {alpha}");
}

#[test]
fn compensation_jump_has_one_crossing_per_level() {
    let cfg = config("gamma_1d.toml");
    let result = solve(&cfg.problem, &cfg.solver).unwrap();
    let u = &result.minimizer;
    let kink = first_zero(u).unwrap();
    assert!((0.22 - 2.0 * u.grid().h()..=0.23 + 2.0 * u.grid().h()).contains(&kink), "kink at {kink}");
    let eps = 0.25;
    let rep = coarea_scan(u, eps, 64, 2.0).unwrap();
    assert!(rep.perimeter_at_levels[1..].iter().all(|&(_, m)| m == 1.0));
    assert!((rep.coarea_integral - eps).abs() < 1e-12);
    assert!((rep.certified_bound - 1.0).abs() < 1e-12);
}

#[test]
fn constant_solution_has_no_measurable_decay() {
    let grid = Arc::new(Grid::rectangle((0.0, 1.0), (0.0, 1.0), 17, 17).unwrap());
    let problem = ProblemSpec::builder(grid)
        .compensation(1.0, 0.0)
        .build()
        .unwrap();
    let result = solve(&problem, &SolveOptions { restarts: 2, ..Default::default() }).unwrap();
    assert_eq!(result.minimizer.max_abs(), 0.0);
    let report = regularity_report(&result.minimizer, [0.5, 0.5], CenterKind::Interior, None).unwrap();
    assert!(report.oscillations.iter().all(|&o| o == 0.0));
    assert!(report.fit.is_none());
}

fn two_phase_square(nodes: usize) -> ProblemSpec {
    let grid = Arc::new(Grid::rectangle((0.0, 1.0), (0.0, 1.0), nodes, nodes).unwrap());
    ProblemSpec::builder(grid)
        .diffusion(CoefficientPair::constant(2.0, 1.0))
        .compensation(1.0, 0.0)
        .boundary(SpatialFn::parse("x - 0.5 + 0.2*y").unwrap())
        .ordering_constant(Some(0.5))
        .build()
        .unwrap()
}

#[test]
fn truncated_and_localized_competitors_cost_more() {
    let problem = two_phase_square(33);
    let result = solve(&problem, &SolveOptions { restarts: 2, ..Default::default() }).unwrap();
    let u = &result.minimizer;
    let e = assemble_energy(&problem, u).unwrap().total;
    let h = problem.grid().h();
    let center = free_boundary_centers(u, 1, 0.3).unwrap()[0];
    for eps in [h, 2.0 * h, 4.0 * h] {
        // the truncation changes the boundary trace, so compare energies directly
        let cut = truncate(u, eps).unwrap();
        let local = localized_competitor(u, eps, center, 0.12).unwrap();
        let el = assemble_energy(&problem, &local).unwrap().total;
        assert!(e <= el + 1e-12, "ε = {eps}: {e} > {el}");
        assert!(cut.values().iter().zip(u.values()).all(|(a, b)| a.abs() <= b.abs()));
    }
}

#[test]
fn solutions_approach_each_other_as_the_jump_closes() {
    let cfg = config("jump_1d.toml");
    let base = SpatialFn::constant(1.5);
    let problem = on_nodes(&cfg, 257);
    let solve_at = |delta: f64| {
        let p = jump_family(&problem, &base, delta).unwrap();
        solve(&p, &cfg.solver).unwrap().minimizer
    };
    let gap = |d: f64| {
        let (a, b): (ScalarField, ScalarField) = (solve_at(d), solve_at(d / 4.0));
        uniform_closeness(&a, &b, Subdomain::Whole).unwrap()
    };
    let (wide, narrow) = (gap(0.8), gap(0.2));
    assert!(narrow < wide, "closeness {narrow} at δ = 0.2 vs {wide} at δ = 0.8");
}

#[test]
fn affine_oscillation_matches_the_radius() {
    let grid = Arc::new(Grid::interval(-1.0, 1.0, 257).unwrap());
    let u = ScalarField::from_fn(grid, |x| x[0]);
    let rows = oscillation_decay(&u, [0.0, 0.0], &[0.5, 0.25, 0.125]).unwrap();
    for r in rows {
        assert!((r.oscillation - r.radius).abs() < 1e-12);
    }
}
