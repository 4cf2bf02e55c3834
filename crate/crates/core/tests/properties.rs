//! Property tests over random grids, fields and coefficients.

use std::sync::Arc;

use ftlab::geometry::{coarea_scan, level_set, transition_layer, truncate};
use ftlab::oracle1d::{energy_of_kink, exact_minimizer, Oracle1DProblem};
use ftlab::problem::{dirichlet_integral, integrand_bounds_check};
use ftlab::regularity::{fit_alpha, oscillation_decay, OscillationRow};
use ftlab::{assemble_energy, phase_of, CoefficientPair, Grid, Phase, ProblemSpec, ScalarField, SpatialFn};
use proptest::prelude::*;

fn square(n: usize) -> Arc<Grid> {
    Arc::new(Grid::rectangle((0.0, 1.0), (0.0, 1.0), n, n).unwrap())
}

fn affine(grid: &Arc<Grid>, a: f64, b: f64, c: f64) -> ScalarField {
    ScalarField::from_fn(grid.clone(), move |x| a * x[0] + b * x[1] + c)
}

prop_compose! {
    fn random_field()(n in 4usize..14, seed in prop::collection::vec(-1.0f64..1.0, 6)) -> ScalarField {
        let grid = square(n);
        ScalarField::from_fn(grid, move |x| {
            seed[0] + seed[1] * x[0] + seed[2] * x[1]
                + seed[3] * (3.0 * x[0]).sin() * (2.0 * x[1]).cos()
                + seed[4] * x[0] * x[1] + seed[5] * x[1] * x[1]
        })
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cells_tile_the_domain(nx in 2usize..20, ny in 2usize..20, w in 0.5f64..3.0, hgt in 0.5f64..3.0) {
        let grid = Grid::rectangle((0.0, w), (-1.0, hgt - 1.0), nx, ny).unwrap();
        let total = grid.cell_measure() * grid.cell_count() as f64;
        prop_assert!((total - w * hgt).abs() < 1e-12 * w * hgt);
        prop_assert_eq!(grid.cell_count(), 2 * (nx - 1) * (ny - 1));
    }

    #[test]
    fn interpolation_reproduces_affine_fields(
        a in -3.0f64..3.0, b in -3.0f64..3.0, c in -1.0f64..1.0,
        x in 0.0f64..1.0, y in 0.0f64..1.0, n in 3usize..12,
    ) {
        let grid = square(n);
        let u = affine(&grid, a, b, c);
        let v = u.value_at([x, y]).unwrap();
        prop_assert!((v - (a * x + b * y + c)).abs() < 1e-12);
        for cell in grid.cells() {
            let g = u.cell_gradient(cell);
            prop_assert!((g[0] - a).abs() < 1e-10 && (g[1] - b).abs() < 1e-10);
        }
    }

    #[test]
    fn energy_parts_add_up(u in random_field(), ap in 0.5f64..3.0, am in 0.5f64..3.0, f in -2.0f64..2.0, gp in 0.0f64..2.0) {
        let grid = u.grid().clone();
        let problem = ProblemSpec::builder(grid.clone())
            .diffusion(CoefficientPair::constant(ap, am))
            .source(SpatialFn::constant(f), SpatialFn::constant(-f))
            .compensation(gp, 0.0)
            .boundary(SpatialFn::parse("0.3*x - 0.2*y + 0.05").unwrap())
            .build()
            .unwrap();
        let blend = problem.boundary_blend();
        let values = blend
            .values()
            .iter()
            .zip(u.values())
            .enumerate()
            .map(|(n, (&b, &v))| if grid.is_boundary(n) { b } else { v })
            .collect();
        let field = blend.with_values(values).unwrap();
        let e = assemble_energy(&problem, &field).unwrap();
        prop_assert!((e.parts_sum() - e.total).abs() <= 1e-12 * e.total.abs().max(1.0));
        prop_assert!(e.diffusion() >= 0.0 && e.compensation() >= 0.0);
    }

    #[test]
    fn truncation_shrinks_towards_zero(u in random_field(), eps in 0.01f64..0.5) {
        let t = truncate(&u, eps).unwrap();
        for (&a, &b) in u.values().iter().zip(t.values()) {
            prop_assert!(b.abs() <= a.abs());
            prop_assert!((a - b).abs() <= eps + 1e-15);
            prop_assert!(b == 0.0 || phase_of(a) == phase_of(b));
        }
    }

    #[test]
    fn layers_grow_with_epsilon(u in random_field(), e1 in 0.01f64..0.3, e2 in 0.01f64..0.3) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let a = transition_layer(&u, lo).unwrap().measure;
        let b = transition_layer(&u, hi).unwrap().measure;
        prop_assert!(a >= 0.0 && a <= b + 1e-14 && b <= u.grid().measure() + 1e-12);
    }

    #[test]
    fn coarea_identity_on_piecewise_linear_fields(u in random_field(), eps in 0.05f64..0.6, levels in 2usize..40) {
        let rep = coarea_scan(&u, eps, levels, 2.0).unwrap();
        let scale = rep.layer_gradient_l1.max(1e-300);
        prop_assert!((rep.coarea_integral - rep.layer_gradient_l1).abs() <= 1e-10 * scale);
        prop_assert_eq!(rep.perimeter_at_levels.len(), levels);
        prop_assert!(rep.perimeter_at_levels.iter().all(|&(_, l)| l >= 0.0));
    }

    #[test]
    fn level_segments_lie_on_the_level(u in random_field(), t in -0.5f64..0.5) {
        let fb = level_set(&u, t).unwrap();
        for s in &fb.segments {
            for p in [s.a, s.b, s.midpoint()] {
                let v = u.value_at(p).unwrap();
                prop_assert!((v - t).abs() < 1e-9, "value {} at {:?} for level {}", v, p, t);
            }
        }
    }

    #[test]
    fn oscillation_is_monotone_in_the_radius(u in random_field(), cx in 0.4f64..0.6, cy in 0.4f64..0.6) {
        let h = u.grid().h();
        let mut radii = vec![];
        let mut r = 0.35;
        while r >= 2.0 * h {
            radii.push(r);
            r *= 0.7;
        }
        prop_assume!(!radii.is_empty());
        let rows = oscillation_decay(&u, [cx, cy], &radii).unwrap();
        prop_assert!(rows.windows(2).all(|w| w[0].radius < w[1].radius && w[0].oscillation <= w[1].oscillation));
        prop_assert!(rows.iter().all(|r| r.oscillation >= 0.0));
    }

    #[test]
    fn power_laws_are_recovered(alpha in 0.05f64..2.0, c in 0.01f64..100.0, k in 3usize..10) {
        let rows: Vec<_> = (0..k)
            .map(|i| {
                let r = 0.8 * 0.5f64.powi(i as i32);
                OscillationRow { radius: r, oscillation: c * r.powf(alpha) }
            })
            .collect();
        let fit = fit_alpha(&rows).unwrap();
        prop_assert!((fit.alpha - alpha).abs() < 1e-10);
        prop_assert!((fit.constant - c).abs() < 1e-9 * c);
        prop_assert!(fit.residual < 1e-10);
    }

    #[test]
    fn integrand_envelope_holds(u in random_field(), ap in 0.5f64..3.0, am in 0.5f64..3.0, f in -3.0f64..3.0, p in 2.0f64..4.0) {
        let grid = u.grid().clone();
        let problem = ProblemSpec::builder(grid)
            .p(p)
            .diffusion(CoefficientPair::constant(ap, am))
            .source(SpatialFn::constant(f), SpatialFn::constant(2.0 * f))
            .compensation(1.0, 0.5)
            .boundary(SpatialFn::constant(0.0))
            .build()
            .unwrap();
        let values = u
            .values()
            .iter()
            .enumerate()
            .map(|(n, &v)| if u.grid().is_boundary(n) { 0.0 } else { v })
            .collect();
        let field = u.with_values(values).unwrap();
        prop_assert!(integrand_bounds_check(&problem, &field).unwrap().passed());
    }

    #[test]
    fn oracle_kink_is_a_global_minimum(
        l in 0.2f64..2.0, r in 0.2f64..2.0, ap in 0.5f64..4.0, am in 0.5f64..4.0,
        gp in 0.0f64..1.0, gm in 0.0f64..1.0, probe in -0.99f64..0.99,
    ) {
        let o = Oracle1DProblem {
            interval: (-1.0, 1.0),
            boundary: (-l, r),
            a_plus: ap,
            a_minus: am,
            gamma_plus: gp,
            gamma_minus: gm,
            p: 2.0,
        };
        let sol = exact_minimizer(&o, 1e-10).unwrap();
        prop_assert!(sol.bracket.0 <= sol.kink && sol.kink <= sol.bracket.1);
        prop_assert!(sol.energy <= energy_of_kink(&o, probe).unwrap() + 1e-9);
    }
}

#[test]
fn zero_is_in_the_negative_phase() {
    assert_eq!(phase_of(0.0), Phase::Minus);
    assert_eq!(phase_of(1e-300), Phase::Plus);
    assert_eq!(phase_of(-0.0), Phase::Minus);
}

#[test]
fn dirichlet_integral_of_affine_field_is_area_times_slope() {
    let grid = square(17);
    let u = affine(&grid, 3.0, -4.0, 0.0);
    assert!((dirichlet_integral(&u, 2.0, |_| true) - 25.0).abs() < 1e-12);
    assert!((dirichlet_integral(&u, 1.0, |_| true) - 5.0).abs() < 1e-12);
}
