//! Regularity diagnostics on solved fields: oscillation decay on nested
//! balls, Hölder-exponent fits, the rescaling `v(y) = r^{−α} u(x₀ + r y)`
//! and Harnack ratios inside the positive phase.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::level_set;
use crate::grid::{distance, Grid, Point, ScalarField};
use crate::problem::ProblemSpec;

/// One row of an oscillation table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationRow {
    pub radius: f64,
    pub oscillation: f64,
}

/// `osc(r) = max_{nodes in B_r(center)} |u − u(center)|` for each radius,
/// with `u(center)` interpolated. Returned sorted by increasing radius.
///
/// Radii must be strictly decreasing, at least `2h`, and the largest ball
/// must fit inside the domain.
pub fn oscillation_decay(
    field: &ScalarField,
    center: Point,
    radii: &[f64],
) -> Result<Vec<OscillationRow>> {
    let grid = field.grid();
    if radii.is_empty() {
        return Err(Error::Config("radius list must not be empty".into()));
    }
    if radii.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Config(format!("radii must be strictly decreasing: {radii:?}")));
    }
    let h = grid.h();
    let smallest = radii[radii.len() - 1];
    if !(smallest >= 2.0 * h * (1.0 - 1e-12)) {
        return Err(Error::Resolution(format!(
            "radius {smallest} is below 2h = {}",
            2.0 * h
        )));
    }
    if !grid.contains_ball(center, radii[0]) {
        return Err(Error::Geometry(format!(
            "B_{}({center:?}) is not contained in the domain",
            radii[0]
        )));
    }
    let u0 = field
        .value_at(center)
        .ok_or_else(|| Error::Geometry(format!("center {center:?} lies outside the domain")))?;
    // distances once, then a single pass per radius over the nodes of the
    // largest ball
    let mut near: Vec<(f64, f64)> = grid
        .restrict_to_ball(center, radii[0])
        .into_iter()
        .map(|n| (distance(grid.point(n), center), (field.value(n) - u0).abs()))
        .collect();
    near.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rows: Vec<OscillationRow> = radii
        .iter()
        .map(|&r| OscillationRow {
            radius: r,
            oscillation: near
                .iter()
                .take_while(|(d, _)| *d <= r)
                .map(|x| x.1)
                .fold(0.0, f64::max),
        })
        .collect();
    rows.reverse();
    Ok(rows)
}

/// Least-squares fit of `log osc = log C + α log r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaFit {
    pub alpha: f64,
    pub constant: f64,
    /// RMS of the log-space misfit.
    pub residual: f64,
    pub rows_used: usize,
    /// Rows discarded because their oscillation was zero.
    pub rows_dropped: usize,
}

pub fn fit_alpha(table: &[OscillationRow]) -> Result<AlphaFit> {
    let usable: Vec<(f64, f64)> = table
        .iter()
        .filter(|r| r.oscillation > 0.0 && r.radius > 0.0)
        .map(|r| (r.radius.ln(), r.oscillation.ln()))
        .collect();
    let dropped = table.len() - usable.len();
    if usable.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 rows with positive oscillation, have {} ({} dropped)",
            usable.len(),
            dropped
        )));
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|r| r.0).sum::<f64>() / n;
    let my = usable.iter().map(|r| r.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|r| (r.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|r| (r.0 - mx) * (r.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData("all usable radii coincide".into()));
    }
    let alpha = sxy / sxx;
    let intercept = my - alpha * mx;
    let residual = (usable
        .iter()
        .map(|r| (r.1 - intercept - alpha * r.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(AlphaFit {
        alpha,
        constant: intercept.exp(),
        residual,
        rows_used: usable.len(),
        rows_dropped: dropped,
    })
}

/// Dyadic radii `r₀·2^{−k}` down to `2h`. `r₀` defaults to half the
/// distance from `center` to the boundary.
pub fn dyadic_radii(grid: &Grid, center: Point, r0: Option<f64>) -> Vec<f64> {
    let r0 = r0.unwrap_or_else(|| 0.5 * grid.distance_to_boundary(center));
    let floor = 2.0 * grid.h() * (1.0 - 1e-12);
    let mut radii = Vec::new();
    let mut r = r0;
    while r >= floor && r > 0.0 {
        radii.push(r);
        r *= 0.5;
    }
    radii
}

/// `v(y) = r^{−α} u(center + r y)` sampled on `[−1, 1]^N` with `nodes`
/// points per axis. Images falling outside the domain (possible only
/// outside the unit ball) are clamped to the nearest domain point.
pub fn rescale(
    field: &ScalarField,
    center: Point,
    r: f64,
    alpha: f64,
    nodes: usize,
) -> Result<ScalarField> {
    let grid = field.grid();
    if !(r > 0.0 && r.is_finite() && alpha.is_finite()) {
        return Err(Error::Config(format!("invalid rescaling r = {r}, α = {alpha}")));
    }
    if !grid.contains_ball(center, r) {
        return Err(Error::Geometry(format!(
            "B_{r}({center:?}) is not contained in the domain"
        )));
    }
    let unit = match grid.dimension() {
        1 => Grid::interval(-1.0, 1.0, nodes)?,
        _ => Grid::rectangle((-1.0, 1.0), (-1.0, 1.0), nodes, nodes)?,
    };
    let scale = r.powf(-alpha);
    let extents = grid.extents().to_vec();
    let v = ScalarField::from_fn(Arc::new(unit), |y| {
        let mut x = [center[0] + r * y[0], center[1] + r * y[1]];
        for (axis, [lo, hi]) in extents.iter().enumerate() {
            x[axis] = x[axis].clamp(*lo, *hi);
        }
        scale * field.value_at(x).expect("clamped point lies in the domain")
    });
    Ok(v)
}

/// `sup_{B_r} u / (inf_{B_{r/2}} u + r‖f₊‖_{L^N(B_r)})`, sampled at nodes;
/// the source norm is the discrete `L^N` norm over cells with barycenter
/// in `B_r`.
pub fn harnack_ratio(
    field: &ScalarField,
    problem: &ProblemSpec,
    center: Point,
    r: f64,
) -> Result<f64> {
    let grid = field.grid();
    if **grid != **problem.grid() {
        return Err(Error::Config("field and problem use different grids".into()));
    }
    if !(r >= 4.0 * grid.h() * (1.0 - 1e-12)) {
        return Err(Error::Resolution(format!("radius {r} is below 4h = {}", 4.0 * grid.h())));
    }
    if !grid.contains_ball(center, r) {
        return Err(Error::Geometry(format!(
            "B_{r}({center:?}) is not contained in the domain"
        )));
    }
    let ball = grid.restrict_to_ball(center, r);
    if ball.iter().any(|&n| field.value(n) <= 0.0) {
        return Err(Error::Phase(format!(
            "B_{r}({center:?}) is not inside the positive phase"
        )));
    }
    let sup = ball.iter().map(|&n| field.value(n)).fold(f64::NEG_INFINITY, f64::max);
    let inf = ball
        .iter()
        .filter(|&&n| distance(grid.point(n), center) <= 0.5 * r)
        .map(|&n| field.value(n))
        .fold(f64::INFINITY, f64::min);
    let big_n = grid.dimension() as f64;
    let m = grid.cell_measure();
    let (source, _) = problem.source();
    let source_norm = grid
        .cells()
        .iter()
        .map(|c| grid.barycenter(c))
        .filter(|&x| distance(x, center) <= r)
        .map(|x| m * source.eval(x).abs().powf(big_n))
        .sum::<f64>()
        .powf(1.0 / big_n);
    Ok(sup / (inf + r * source_norm))
}

/// Region for [`uniform_closeness`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Subdomain {
    Whole,
    Ball { center: Point, radius: f64 },
    /// Nodes at distance at least `margin` from the boundary.
    Interior { margin: f64 },
}

impl Subdomain {
    fn contains(&self, grid: &Grid, x: Point) -> bool {
        match *self {
            Subdomain::Whole => true,
            Subdomain::Ball { center, radius } => distance(x, center) <= radius,
            Subdomain::Interior { margin } => grid.distance_to_boundary(x) >= margin,
        }
    }
}

/// `max |a − b|` over the nodes of `subdomain`.
pub fn uniform_closeness(a: &ScalarField, b: &ScalarField, subdomain: Subdomain) -> Result<f64> {
    if **a.grid() != **b.grid() {
        return Err(Error::Config("fields are defined on different grids".into()));
    }
    let grid = a.grid();
    Ok(grid
        .points()
        .zip(a.values().iter().zip(b.values()))
        .filter(|(x, _)| subdomain.contains(grid, *x))
        .map(|(_, (u, v))| (u - v).abs())
        .fold(0.0, f64::max))
}

/// Where a report was centered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CenterKind {
    /// Midpoint of a zero-level segment.
    FreeBoundary,
    /// A point inside one phase, away from the free boundary.
    Interior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub center: Point,
    pub kind: CenterKind,
    /// Decreasing.
    pub radii: Vec<f64>,
    /// `osc(radii[k])`.
    pub oscillations: Vec<f64>,
    /// `None` when fewer than three rows carry a positive oscillation.
    pub fit: Option<AlphaFit>,
    pub harnack_ratios: Option<Vec<f64>>,
}

impl RegularityReport {
    pub fn alpha_hat(&self) -> Option<f64> {
        self.fit.map(|f| f.alpha)
    }
}

/// Oscillation table and exponent fit at `center` over dyadic radii.
pub fn regularity_report(
    field: &ScalarField,
    center: Point,
    kind: CenterKind,
    r0: Option<f64>,
) -> Result<RegularityReport> {
    let radii = dyadic_radii(field.grid(), center, r0);
    if radii.is_empty() {
        return Err(Error::Resolution(format!(
            "no admissible radius at {center:?}: the center is within 4h of the boundary"
        )));
    }
    let rows = oscillation_decay(field, center, &radii)?;
    let fit = match fit_alpha(&rows) {
        Ok(f) => Some(f),
        Err(Error::InsufficientData(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(RegularityReport {
        center,
        kind,
        radii,
        oscillations: rows.iter().rev().map(|r| r.oscillation).collect(),
        fit,
        harnack_ratios: None,
    })
}

/// Up to `count` free-boundary centers: midpoints of zero-level segments at
/// distance at least `min_distance` from the boundary, spread evenly over
/// the eligible segments in index order.
pub fn free_boundary_centers(field: &ScalarField, count: usize, min_distance: f64) -> Result<Vec<Point>> {
    let grid = field.grid();
    let fb = level_set(field, 0.0)?;
    let eligible: Vec<Point> = fb
        .segments
        .iter()
        .map(|s| s.midpoint())
        .filter(|&x| grid.distance_to_boundary(x) >= min_distance)
        .collect();
    Ok(spread(&eligible, count))
}

/// Up to `count` nodes whose distance to both the boundary and the zero
/// level set is at least `min_distance`, spread evenly in index order.
pub fn interior_centers(field: &ScalarField, count: usize, min_distance: f64) -> Result<Vec<Point>> {
    let grid = field.grid();
    let fb = level_set(field, 0.0)?;
    let crossings: Vec<Point> = fb.segments.iter().map(|s| s.midpoint()).collect();
    let eligible: Vec<Point> = grid
        .points()
        .filter(|&x| grid.distance_to_boundary(x) >= min_distance)
        .filter(|&x| crossings.iter().all(|&c| distance(c, x) >= min_distance))
        .collect();
    Ok(spread(&eligible, count))
}

fn spread(points: &[Point], count: usize) -> Vec<Point> {
    if points.len() <= count {
        return points.to_vec();
    }
    (0..count)
        .map(|k| points[(2 * k + 1) * points.len() / (2 * count)])
        .collect()
}
