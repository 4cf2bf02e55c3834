//! Transmission problem data and the discrete energy
//! `F(v) = ∫ A(x,v)|∇v|^p − f(x,v)·v + γ(x,v) dx`.
//!
//! Every coefficient is split by phase: the `plus` function applies where
//! `v > 0` and the `minus` function where `v ≤ 0`. The quadrature is one
//! point per cell: the gradient is the cell constant, and phase, `A`, `f`,
//! `γ` and the factor `v` in the source term are evaluated at the cell
//! barycenter.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::expr::SpatialFn;
use crate::grid::{Grid, Point, ScalarField};
use crate::laplacian::DirichletLaplacian;

/// Constant `C` in `s ≤ s^p + C` (valid for every `p ≥ 1`, `s ≥ 0`).
pub const ENVELOPE_CONSTANT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Plus,
    Minus,
}

/// `Plus` iff `value > 0`; zero belongs to the minus phase.
pub fn phase_of(value: f64) -> Phase {
    if value > 0.0 {
        Phase::Plus
    } else {
        Phase::Minus
    }
}

#[derive(Debug, Clone)]
pub struct CoefficientPair {
    pub plus: SpatialFn,
    pub minus: SpatialFn,
    pub lambda: f64,
    pub upper: f64,
    /// Lipschitz constant `L` with `|A±(x) − A±(y)| ≤ L|x − y|`.
    pub modulus: Option<f64>,
}

impl CoefficientPair {
    pub fn new(plus: SpatialFn, minus: SpatialFn, lambda: f64, upper: f64) -> Self {
        CoefficientPair {
            plus,
            minus,
            lambda,
            upper,
            modulus: None,
        }
    }

    pub fn constant(plus: f64, minus: f64) -> Self {
        CoefficientPair::new(plus.into(), minus.into(), plus.min(minus), plus.max(minus))
    }
}

/// Coefficients sampled at a cell barycenter.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CellCoefficients {
    pub a_plus: f64,
    pub a_minus: f64,
    pub f_plus: f64,
    pub f_minus: f64,
    pub g_plus: f64,
    pub g_minus: f64,
}

#[derive(Debug, Clone)]
pub struct ProblemBuilder {
    grid: Arc<Grid>,
    p: f64,
    diffusion: CoefficientPair,
    source_plus: SpatialFn,
    source_minus: SpatialFn,
    compensation_plus: SpatialFn,
    compensation_minus: SpatialFn,
    boundary: SpatialFn,
    ordering_constant: Option<f64>,
}

impl ProblemBuilder {
    pub fn p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn diffusion(mut self, diffusion: CoefficientPair) -> Self {
        self.diffusion = diffusion;
        self
    }

    pub fn source(mut self, plus: impl Into<SpatialFn>, minus: impl Into<SpatialFn>) -> Self {
        self.source_plus = plus.into();
        self.source_minus = minus.into();
        self
    }

    pub fn compensation(
        mut self,
        plus: impl Into<SpatialFn>,
        minus: impl Into<SpatialFn>,
    ) -> Self {
        self.compensation_plus = plus.into();
        self.compensation_minus = minus.into();
        self
    }

    pub fn boundary(mut self, phi: impl Into<SpatialFn>) -> Self {
        self.boundary = phi.into();
        self
    }

    pub fn ordering_constant(mut self, c: Option<f64>) -> Self {
        self.ordering_constant = c;
        self
    }

    pub fn build(self) -> Result<ProblemSpec> {
        let grid = self.grid.clone();
        if !(self.p.is_finite() && self.p >= 2.0) {
            return Err(Error::Config(format!("p must be ≥ 2, got {}", self.p)));
        }
        let d = &self.diffusion;
        if !(d.lambda > 0.0 && d.lambda <= d.upper && d.upper.is_finite()) {
            return Err(Error::Config(format!(
                "ellipticity bounds must satisfy 0 < lambda ≤ Lambda < ∞, got {} and {}",
                d.lambda, d.upper
            )));
        }
        if let Some(c) = self.ordering_constant {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("ordering constant must be positive, got {c}")));
            }
        }

        let sample_points: Vec<(String, Point)> = grid
            .points()
            .enumerate()
            .map(|(n, p)| (format!("node {n}"), p))
            .chain(
                grid.cells()
                    .iter()
                    .enumerate()
                    .map(|(c, cell)| (format!("cell {c} barycenter"), grid.barycenter(cell))),
            )
            .collect();
        let tol = 1e-12 * d.upper;
        for (label, x) in &sample_points {
            for (name, f) in [("A_plus", &d.plus), ("A_minus", &d.minus)] {
                let a = f.eval(*x);
                if !(a >= d.lambda - tol && a <= d.upper + tol) {
                    return Err(Error::Constraint(format!(
                        "{name} = {a} at {label} violates {} ≤ A ≤ {}",
                        d.lambda, d.upper
                    )));
                }
            }
            if let Some(c) = self.ordering_constant {
                let gap = self.compensation_plus.eval(*x) - self.compensation_minus.eval(*x);
                if !(gap > c) {
                    return Err(Error::Constraint(format!(
                        "gamma_plus − gamma_minus = {gap} at {label} is not > {c}"
                    )));
                }
            }
            for (name, f) in [
                ("f_plus", &self.source_plus),
                ("f_minus", &self.source_minus),
                ("gamma_plus", &self.compensation_plus),
                ("gamma_minus", &self.compensation_minus),
                ("boundary", &self.boundary),
            ] {
                if !f.eval(*x).is_finite() {
                    return Err(Error::Numeric(format!("{name} is not finite at {label}")));
                }
            }
        }
        if let Some(l) = d.modulus {
            for cell in grid.cells() {
                let nodes = cell.nodes();
                for (k, &a) in nodes.iter().enumerate() {
                    for &b in &nodes[k + 1..] {
                        let (pa, pb) = (grid.point(a), grid.point(b));
                        let dist = crate::grid::distance(pa, pb);
                        for (name, f) in [("A_plus", &d.plus), ("A_minus", &d.minus)] {
                            let jump = (f.eval(pa) - f.eval(pb)).abs();
                            if jump > l * dist * (1.0 + 1e-12) + 1e-15 {
                                return Err(Error::Constraint(format!(
                                    "{name} jumps by {jump} between nodes {a} and {b} (modulus {l})"
                                )));
                            }
                        }
                    }
                }
            }
        }

        let coefficients = grid
            .cells()
            .iter()
            .map(|cell| {
                let x = grid.barycenter(cell);
                CellCoefficients {
                    a_plus: d.plus.eval(x),
                    a_minus: d.minus.eval(x),
                    f_plus: self.source_plus.eval(x),
                    f_minus: self.source_minus.eval(x),
                    g_plus: self.compensation_plus.eval(x),
                    g_minus: self.compensation_minus.eval(x),
                }
            })
            .collect();
        let boundary_values = grid.points().map(|x| self.boundary.eval(x)).collect();

        Ok(ProblemSpec {
            grid,
            boundary_values,
            coefficients,
            poincare: OnceLock::new(),
            spec: self,
        })
    }
}

/// Validated problem data on a fixed grid.
#[derive(Debug)]
pub struct ProblemSpec {
    grid: Arc<Grid>,
    spec: ProblemBuilder,
    boundary_values: Vec<f64>,
    coefficients: Vec<CellCoefficients>,
    poincare: OnceLock<f64>,
}

impl Clone for ProblemSpec {
    fn clone(&self) -> Self {
        ProblemSpec {
            grid: self.grid.clone(),
            spec: self.spec.clone(),
            boundary_values: self.boundary_values.clone(),
            coefficients: self.coefficients.clone(),
            poincare: self.poincare.clone(),
        }
    }
}

impl ProblemSpec {
    /// Starts a problem with `p = 2`, unit diffusion, no source, no
    /// compensation and zero boundary data.
    pub fn builder(grid: Arc<Grid>) -> ProblemBuilder {
        ProblemBuilder {
            grid,
            p: 2.0,
            diffusion: CoefficientPair::constant(1.0, 1.0),
            source_plus: 0.0.into(),
            source_minus: 0.0.into(),
            compensation_plus: 0.0.into(),
            compensation_minus: 0.0.into(),
            boundary: 0.0.into(),
            ordering_constant: None,
        }
    }

    /// A builder pre-filled with this problem's data.
    pub fn to_builder(&self) -> ProblemBuilder {
        self.spec.clone()
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn p(&self) -> f64 {
        self.spec.p
    }

    pub fn diffusion(&self) -> &CoefficientPair {
        &self.spec.diffusion
    }

    pub fn lambda(&self) -> f64 {
        self.spec.diffusion.lambda
    }

    pub fn upper(&self) -> f64 {
        self.spec.diffusion.upper
    }

    pub fn source(&self) -> (&SpatialFn, &SpatialFn) {
        (&self.spec.source_plus, &self.spec.source_minus)
    }

    pub fn compensation(&self) -> (&SpatialFn, &SpatialFn) {
        (&self.spec.compensation_plus, &self.spec.compensation_minus)
    }

    pub fn boundary_fn(&self) -> &SpatialFn {
        &self.spec.boundary
    }

    pub fn ordering_constant(&self) -> Option<f64> {
        self.spec.ordering_constant
    }

    /// φ evaluated at every node; only boundary entries constrain fields.
    pub fn boundary_values(&self) -> &[f64] {
        &self.boundary_values
    }

    pub(crate) fn cell_coefficients(&self) -> &[CellCoefficients] {
        &self.coefficients
    }

    /// Whether φ vanishes on every boundary node.
    pub fn has_zero_boundary(&self) -> bool {
        self.grid
            .boundary_mask()
            .iter()
            .zip(&self.boundary_values)
            .all(|(&b, &v)| !b || v == 0.0)
    }

    pub fn check_boundary(&self, field: &ScalarField) -> Result<()> {
        if **field.grid() != *self.grid {
            return Err(Error::Config("field is defined on a different grid".into()));
        }
        for n in 0..self.grid.node_count() {
            if self.grid.is_boundary(n) {
                let (v, phi) = (field.value(n), self.boundary_values[n]);
                if (v - phi).abs() > 1e-12 * phi.abs().max(1.0) {
                    return Err(Error::Constraint(format!(
                        "boundary node {n} holds {v}, boundary data is {phi}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Transfinite (Coons) blend of the boundary data: linear interpolation
    /// in 1D, bilinearly corrected edge interpolation in 2D. Reproduces
    /// affine data exactly.
    pub fn boundary_blend(&self) -> ScalarField {
        let g = &self.grid;
        let phi = &self.boundary_values;
        let values = if g.dimension() == 1 {
            let n = g.node_counts()[0];
            let (l, r) = (phi[0], phi[n - 1]);
            (0..n)
                .map(|i| {
                    let s = i as f64 / (n - 1) as f64;
                    match i {
                        0 => l,
                        _ if i == n - 1 => r,
                        _ => (1.0 - s) * l + s * r,
                    }
                })
                .collect()
        } else {
            let (nx, ny) = (g.node_counts()[0], g.node_counts()[1]);
            let at = |i: usize, j: usize| phi[g.node_index(i, j)];
            (0..g.node_count())
                .map(|n| {
                    if g.is_boundary(n) {
                        return phi[n];
                    }
                    let (i, j) = g.node_ij(n);
                    let s = i as f64 / (nx - 1) as f64;
                    let t = j as f64 / (ny - 1) as f64;
                    let edges = (1.0 - s) * at(0, j)
                        + s * at(nx - 1, j)
                        + (1.0 - t) * at(i, 0)
                        + t * at(i, ny - 1);
                    let corners = (1.0 - s) * (1.0 - t) * at(0, 0)
                        + s * (1.0 - t) * at(nx - 1, 0)
                        + (1.0 - s) * t * at(0, ny - 1)
                        + s * t * at(nx - 1, ny - 1);
                    edges - corners
                })
                .collect()
        };
        ScalarField::new(g.clone(), values).expect("blend of finite boundary data is finite")
    }

    /// Best constant `C` with `‖v̄‖_{L²} ≤ C‖∇v‖_{L²}` for fields vanishing on
    /// ∂Ω, where `v̄` is the per-cell barycentric value. Computed once by
    /// power iteration on `L⁻¹M` (stiffness `L`, barycentric mass `M`).
    pub fn poincare_constant(&self) -> f64 {
        *self.poincare.get_or_init(|| poincare_constant(&self.grid))
    }

    /// Discrete `‖|f₊| + |f₋|‖_{L^q}` over cells.
    pub fn source_norm(&self, q: f64) -> f64 {
        let m = self.grid.cell_measure();
        self.coefficients
            .iter()
            .map(|c| m * (c.f_plus.abs() + c.f_minus.abs()).powf(q))
            .sum::<f64>()
            .powf(1.0 / q)
    }
}

fn barycentric_mass(grid: &Grid, x: &[f64]) -> Vec<f64> {
    let m = grid.cell_measure();
    let mut out = vec![0.0; x.len()];
    for cell in grid.cells() {
        let nodes = cell.nodes();
        let k = nodes.len() as f64;
        let mean = nodes.iter().map(|&n| x[n]).sum::<f64>() / k;
        for &n in nodes {
            out[n] += m * mean / k;
        }
    }
    for n in 0..x.len() {
        if grid.is_boundary(n) {
            out[n] = 0.0;
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn poincare_constant(grid: &Arc<Grid>) -> f64 {
    if grid.interior_nodes().next().is_none() {
        return 0.0;
    }
    let lap = DirichletLaplacian::new(grid.clone());
    let mut x: Vec<f64> = (0..grid.node_count())
        .map(|n| if grid.is_boundary(n) { 0.0 } else { 1.0 })
        .collect();
    let mut rho = 0.0;
    for _ in 0..2000 {
        let mx = barycentric_mass(grid, &x);
        let next = lap.solve(&mx);
        let norm = dot(&next, &next).sqrt();
        x = next.iter().map(|v| v / norm).collect();
        let num = dot(&x, &barycentric_mass(grid, &x));
        let den = dot(&x, &lap.apply(&x));
        let est = num / den;
        let done = (est - rho).abs() <= 1e-14 * est;
        rho = est;
        if done {
            break;
        }
    }
    // Rayleigh quotients approach the top eigenvalue from below.
    (rho * (1.0 + 1e-9)).sqrt()
}

/// Phase-split energy terms. Source terms hold the signed contribution
/// `−∫ f·v`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyBreakdown {
    pub diffusion_plus: f64,
    pub diffusion_minus: f64,
    pub source_plus: f64,
    pub source_minus: f64,
    pub compensation_plus: f64,
    pub compensation_minus: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn diffusion(&self) -> f64 {
        self.diffusion_plus + self.diffusion_minus
    }

    pub fn source(&self) -> f64 {
        self.source_plus + self.source_minus
    }

    pub fn compensation(&self) -> f64 {
        self.compensation_plus + self.compensation_minus
    }

    pub fn parts_sum(&self) -> f64 {
        self.diffusion_plus
            + self.diffusion_minus
            + self.source_plus
            + self.source_minus
            + self.compensation_plus
            + self.compensation_minus
    }
}

/// `|g|^p`, exact for `p = 2`.
#[inline]
pub(crate) fn norm_pow(g: [f64; 2], p: f64) -> f64 {
    let s = g[0] * g[0] + g[1] * g[1];
    if p == 2.0 {
        s
    } else {
        s.powf(0.5 * p)
    }
}

pub fn assemble_energy(problem: &ProblemSpec, field: &ScalarField) -> Result<EnergyBreakdown> {
    problem.check_boundary(field)?;
    Ok(energy_of(problem, field)?)
}

/// Energy without the boundary-data check.
pub(crate) fn energy_of(problem: &ProblemSpec, field: &ScalarField) -> Result<EnergyBreakdown> {
    let grid = problem.grid();
    let m = grid.cell_measure();
    let p = problem.p();
    let mut e = EnergyBreakdown::default();
    for (c, (cell, k)) in grid
        .cells()
        .iter()
        .zip(problem.cell_coefficients())
        .enumerate()
    {
        let g = field.cell_gradient(cell);
        let ub = field.barycentric_value(cell);
        let gp = norm_pow(g, p);
        let (diff, src, comp) = match phase_of(ub) {
            Phase::Plus => (k.a_plus * gp, -k.f_plus * ub, k.g_plus),
            Phase::Minus => (k.a_minus * gp, -k.f_minus * ub, k.g_minus),
        };
        if !(diff.is_finite() && src.is_finite() && comp.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite integrand on cell {c} (gradient {g:?}, value {ub})"
            )));
        }
        match phase_of(ub) {
            Phase::Plus => {
                e.diffusion_plus += m * diff;
                e.source_plus += m * src;
                e.compensation_plus += m * comp;
            }
            Phase::Minus => {
                e.diffusion_minus += m * diff;
                e.source_minus += m * src;
                e.compensation_minus += m * comp;
            }
        }
    }
    e.total = e.parts_sum();
    Ok(e)
}

/// Discrete `∫_{region} |∇v|^p` over cells whose barycenter satisfies
/// `region`.
pub fn dirichlet_integral(field: &ScalarField, p: f64, region: impl Fn(Point) -> bool) -> f64 {
    let grid = field.grid();
    let m = grid.cell_measure();
    grid.cells()
        .iter()
        .filter(|cell| region(grid.barycenter(cell)))
        .map(|cell| m * norm_pow(field.cell_gradient(cell), p))
        .sum()
}

/// Lower bound `B ≤ F(v)` for every conforming `v`:
/// `B = min_{g ≥ 0} [λ g^p − C‖f‖ g] − ‖f‖·C_φ + Σ|cell| min(γ₊, γ₋)`,
/// with `‖f‖` the discrete L² norm of `max(|f₊|, |f₋|)`,
/// `C = C_P·|Ω|^{1/2 − 1/p}` from the discrete Poincaré constant `C_P`, and
/// `C_φ` collecting the boundary-data terms.
pub fn energy_lower_bound(problem: &ProblemSpec) -> f64 {
    let grid = problem.grid();
    let m = grid.cell_measure();
    let p = problem.p();
    let lambda = problem.lambda();
    let coeffs = problem.cell_coefficients();

    let gamma_floor: f64 = coeffs.iter().map(|k| m * k.g_plus.min(k.g_minus)).sum();
    let f_norm = coeffs
        .iter()
        .map(|k| {
            let f = k.f_plus.abs().max(k.f_minus.abs());
            m * f * f
        })
        .sum::<f64>()
        .sqrt();
    if f_norm == 0.0 {
        return gamma_floor;
    }

    let cp = problem.poincare_constant();
    let kappa = grid.measure().powf(0.5 - 1.0 / p);
    let blend = problem.boundary_blend();
    let blend_mean_l2 = grid
        .cells()
        .iter()
        .map(|c| m * blend.barycentric_value(c).powi(2))
        .sum::<f64>()
        .sqrt();
    let blend_grad_l2 = dirichlet_integral(&blend, 2.0, |_| true).sqrt();
    let c_phi = blend_mean_l2 + cp * blend_grad_l2;

    let slope = f_norm * cp * kappa;
    let g_star = (slope / (lambda * p)).powf(1.0 / (p - 1.0));
    let core = lambda * g_star.powf(p) - slope * g_star;
    core - f_norm * c_phi + gamma_floor
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundViolation {
    pub cell: usize,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Default)]
pub struct BoundsReport {
    pub cells_checked: usize,
    pub violations: Vec<BoundViolation>,
}

impl BoundsReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks per cell that
/// `λ|∇u|^p − |f||u|^p − (C|f| + |γ|) ≤ F(x,u,∇u) ≤ Λ|∇u|^p + |f||u|^p + (C|f| + |γ|)`
/// with `|f| = |f₊| + |f₋|`, `|γ| = |γ₊| + |γ₋|` and `C = 1`.
pub fn integrand_bounds_check(problem: &ProblemSpec, field: &ScalarField) -> Result<BoundsReport> {
    problem.check_boundary(field)?;
    let p = problem.p();
    let (lambda, upper) = (problem.lambda(), problem.upper());
    let mut report = BoundsReport::default();
    for (c, (cell, k)) in problem
        .grid()
        .cells()
        .iter()
        .zip(problem.cell_coefficients())
        .enumerate()
    {
        let gp = norm_pow(field.cell_gradient(cell), p);
        let u = field.barycentric_value(cell);
        let value = match phase_of(u) {
            Phase::Plus => k.a_plus * gp - k.f_plus * u + k.g_plus,
            Phase::Minus => k.a_minus * gp - k.f_minus * u + k.g_minus,
        };
        let f_abs = k.f_plus.abs() + k.f_minus.abs();
        let g_abs = k.g_plus.abs() + k.g_minus.abs();
        let slack = f_abs * u.abs().powf(p) + ENVELOPE_CONSTANT * f_abs + g_abs;
        let lower = lambda * gp - slack;
        let upper = upper * gp + slack;
        let tol = 1e-12 * (1.0 + value.abs() + lower.abs() + upper.abs());
        report.cells_checked += 1;
        if !(value >= lower - tol && value <= upper + tol) {
            report.violations.push(BoundViolation {
                cell: c,
                value,
                lower,
                upper,
            });
        }
    }
    Ok(report)
}

/// Discrete `‖A₊ − A₋‖_{L¹(Ω)}`.
pub fn coefficient_distance(problem: &ProblemSpec) -> f64 {
    let m = problem.grid().cell_measure();
    problem
        .cell_coefficients()
        .iter()
        .map(|k| m * (k.a_plus - k.a_minus).abs())
        .sum()
}
