//! Structured interval and rectangle discretizations.
//!
//! Nodes are numbered row by row (`i + j * nx`). In two dimensions every
//! rectangle `(i, j)` is split along its `(i, j)`–`(i+1, j+1)` diagonal into a
//! [`CellKind::Lower`] triangle and an [`CellKind::Upper`] triangle, so that
//! fields are piecewise linear on every cell.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::error::{Error, Result};

/// A point of the domain. The second coordinate is zero in one dimension.
pub type Point = [f64; 2];

/// Shape of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    /// 1D segment `[x_i, x_{i+1}]`.
    Segment,
    /// Triangle `(i,j), (i+1,j), (i+1,j+1)`.
    Lower,
    /// Triangle `(i,j), (i+1,j+1), (i,j+1)`.
    Upper,
}

#[derive(Debug, Clone, Copy)]
pub struct Cell {
    pub kind: CellKind,
    nodes: [usize; 3],
}

impl Cell {
    pub fn nodes(&self) -> &[usize] {
        match self.kind {
            CellKind::Segment => &self.nodes[..2],
            _ => &self.nodes,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Grid {
    dimension: usize,
    extents: [[f64; 2]; 2],
    counts: [usize; 2],
    spacing: [f64; 2],
    cells: Vec<Cell>,
    boundary: Vec<bool>,
    grad_weights: [[[f64; 2]; 3]; 3],
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dimension == other.dimension
            && self.extents == other.extents
            && self.counts == other.counts
    }
}

impl Grid {
    /// Builds a uniform grid. `extents` and `node_counts` must both have
    /// `dimension` entries.
    pub fn new(dimension: usize, extents: &[(f64, f64)], node_counts: &[usize]) -> Result<Grid> {
        if dimension != 1 && dimension != 2 {
            return Err(Error::Config(format!(
                "dimension must be 1 or 2, got {dimension}"
            )));
        }
        if extents.len() != dimension || node_counts.len() != dimension {
            return Err(Error::Config(format!(
                "expected {dimension} extents and node counts, got {} and {}",
                extents.len(),
                node_counts.len()
            )));
        }
        let mut ext = [[0.0; 2]; 2];
        let mut counts = [1usize; 2];
        let mut spacing = [1.0; 2];
        for axis in 0..dimension {
            let (lo, hi) = extents[axis];
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::Config(format!(
                    "degenerate extent [{lo}, {hi}] on axis {axis}"
                )));
            }
            if node_counts[axis] < 2 {
                return Err(Error::Config(format!(
                    "axis {axis} needs at least 2 nodes, got {}",
                    node_counts[axis]
                )));
            }
            ext[axis] = [lo, hi];
            counts[axis] = node_counts[axis];
            spacing[axis] = (hi - lo) / (node_counts[axis] - 1) as f64;
        }

        let [nx, ny] = counts;
        let mut cells = Vec::new();
        let mut boundary = vec![false; nx * ny];
        if dimension == 1 {
            cells.extend((0..nx - 1).map(|i| Cell {
                kind: CellKind::Segment,
                nodes: [i, i + 1, i + 1],
            }));
            boundary[0] = true;
            boundary[nx - 1] = true;
        } else {
            cells.reserve(2 * (nx - 1) * (ny - 1));
            for j in 0..ny - 1 {
                for i in 0..nx - 1 {
                    let a = i + j * nx;
                    let b = a + 1;
                    let c = a + 1 + nx;
                    let d = a + nx;
                    cells.push(Cell {
                        kind: CellKind::Lower,
                        nodes: [a, b, c],
                    });
                    cells.push(Cell {
                        kind: CellKind::Upper,
                        nodes: [a, c, d],
                    });
                }
            }
            for j in 0..ny {
                for i in 0..nx {
                    boundary[i + j * nx] = i == 0 || j == 0 || i == nx - 1 || j == ny - 1;
                }
            }
        }

        let [hx, hy] = spacing;
        let mut grad_weights = [[[0.0; 2]; 3]; 3];
        grad_weights[CellKind::Segment as usize] = [[-1.0 / hx, 0.0], [1.0 / hx, 0.0], [0.0; 2]];
        grad_weights[CellKind::Lower as usize] =
            [[-1.0 / hx, 0.0], [1.0 / hx, -1.0 / hy], [0.0, 1.0 / hy]];
        grad_weights[CellKind::Upper as usize] =
            [[0.0, -1.0 / hy], [1.0 / hx, 0.0], [-1.0 / hx, 1.0 / hy]];

        Ok(Grid {
            dimension,
            extents: ext,
            counts,
            spacing,
            cells,
            boundary,
            grad_weights,
        })
    }

    pub fn interval(lo: f64, hi: f64, nodes: usize) -> Result<Grid> {
        Grid::new(1, &[(lo, hi)], &[nodes])
    }

    pub fn rectangle(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Result<Grid> {
        Grid::new(2, &[x, y], &[nx, ny])
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn extents(&self) -> &[[f64; 2]] {
        &self.extents[..self.dimension]
    }

    pub fn node_counts(&self) -> &[usize] {
        &self.counts[..self.dimension]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dimension]
    }

    /// Largest node spacing over all axes.
    pub fn h(&self) -> f64 {
        self.spacing().iter().cloned().fold(0.0, f64::max)
    }

    pub fn node_count(&self) -> usize {
        self.counts[0] * self.counts[1]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// Measure of a single cell (all cells are congruent up to reflection).
    pub fn cell_measure(&self) -> f64 {
        match self.dimension {
            1 => self.spacing[0],
            _ => 0.5 * self.spacing[0] * self.spacing[1],
        }
    }

    /// |Ω| accumulated over cells.
    pub fn measure(&self) -> f64 {
        let m = self.cell_measure();
        self.cells.iter().map(|_| m).sum()
    }

    pub fn diameter(&self) -> f64 {
        self.extents()
            .iter()
            .map(|[lo, hi]| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt()
    }

    pub fn node_ij(&self, node: usize) -> (usize, usize) {
        (node % self.counts[0], node / self.counts[0])
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.counts[0] && j < self.counts[1]);
        i + j * self.counts[0]
    }

    pub fn point(&self, node: usize) -> Point {
        let (i, j) = self.node_ij(node);
        let x = self.extents[0][0] + i as f64 * self.spacing[0];
        if self.dimension == 1 {
            [x, 0.0]
        } else {
            [x, self.extents[1][0] + j as f64 * self.spacing[1]]
        }
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.node_count()).map(move |n| self.point(n))
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(move |&n| !self.boundary[n])
    }

    pub fn barycenter(&self, cell: &Cell) -> Point {
        let nodes = cell.nodes();
        let k = nodes.len() as f64;
        let mut c = [0.0; 2];
        for &n in nodes {
            let p = self.point(n);
            c[0] += p[0];
            c[1] += p[1];
        }
        [c[0] / k, c[1] / k]
    }

    /// Gradient weights of the cell: `∇u = Σ_k w_k u(node_k)`.
    pub fn grad_weights(&self, kind: CellKind) -> &[[f64; 2]; 3] {
        &self.grad_weights[kind as usize]
    }

    pub fn contains(&self, p: Point) -> bool {
        self.extents()
            .iter()
            .zip(p)
            .all(|([lo, hi], x)| x >= *lo && x <= *hi)
    }

    /// Euclidean distance from an interior point to ∂Ω (negative outside).
    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        self.extents()
            .iter()
            .zip(p)
            .map(|([lo, hi], x)| (x - lo).min(hi - x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether the closed ball `B_radius(center)` lies inside the closed box.
    pub fn contains_ball(&self, center: Point, radius: f64) -> bool {
        self.distance_to_boundary(center) >= radius
    }

    /// Cell containing `p` and the barycentric weights of its nodes.
    pub fn locate(&self, p: Point) -> Option<(usize, [f64; 3])> {
        let tol = 1e-12 * self.diameter();
        let mut local = [0.0; 2];
        let mut idx = [0usize; 2];
        for axis in 0..self.dimension {
            let [lo, hi] = self.extents[axis];
            let x = p[axis];
            if x < lo - tol || x > hi + tol {
                return None;
            }
            let s = ((x - lo) / self.spacing[axis]).max(0.0);
            let cells = self.counts[axis] - 1;
            let i = (s.floor() as usize).min(cells - 1);
            idx[axis] = i;
            local[axis] = (s - i as f64).clamp(0.0, 1.0);
        }
        if self.dimension == 1 {
            let s = local[0];
            return Some((idx[0], [1.0 - s, s, 0.0]));
        }
        let rect = idx[0] + idx[1] * (self.counts[0] - 1);
        let [s, t] = local;
        if s >= t {
            Some((2 * rect, [1.0 - s, s - t, t]))
        } else {
            Some((2 * rect + 1, [1.0 - t, s, t - s]))
        }
    }

    /// Nodes with `|x - center| ≤ radius`, in index order.
    pub fn restrict_to_ball(&self, center: Point, radius: f64) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&n| distance(self.point(n), center) <= radius)
            .collect()
    }

    /// One-line description embedded in reports.
    pub fn describe(&self) -> String {
        let mut s = format!("dimension={}", self.dimension);
        for (axis, ([lo, hi], n)) in self.extents().iter().zip(self.node_counts()).enumerate() {
            let _ = write!(s, " axis{axis}=[{lo},{hi}]x{n}");
        }
        s
    }
}

pub fn distance(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Nodal values of a piecewise-linear function on a [`Grid`].
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != grid.node_count() {
            return Err(Error::Config(format!(
                "field has {} values but grid has {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(n) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite value at node {n}")));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> ScalarField {
        let n = grid.node_count();
        ScalarField {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(Point) -> f64) -> ScalarField {
        let values = grid.points().map(f).collect();
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn value(&self, node: usize) -> f64 {
        self.values[node]
    }

    /// Applies `f` to every nodal value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<ScalarField> {
        ScalarField::new(self.grid.clone(), values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Constant gradient of the interpolant on one cell.
    pub fn cell_gradient(&self, cell: &Cell) -> [f64; 2] {
        let w = self.grid.grad_weights(cell.kind);
        let mut g = [0.0; 2];
        for (k, &n) in cell.nodes().iter().enumerate() {
            g[0] += w[k][0] * self.values[n];
            g[1] += w[k][1] * self.values[n];
        }
        g
    }

    pub fn gradient_on_cells(&self) -> Vec<[f64; 2]> {
        self.grid
            .cells()
            .iter()
            .map(|c| self.cell_gradient(c))
            .collect()
    }

    /// Value of the interpolant at the cell barycenter.
    pub fn barycentric_value(&self, cell: &Cell) -> f64 {
        let nodes = cell.nodes();
        nodes.iter().map(|&n| self.values[n]).sum::<f64>() / nodes.len() as f64
    }

    /// Piecewise-linear interpolation; `None` outside the domain.
    pub fn value_at(&self, p: Point) -> Option<f64> {
        let (c, w) = self.grid.locate(p)?;
        let cell = &self.grid.cells()[c];
        Some(
            cell.nodes()
                .iter()
                .zip(w)
                .map(|(&n, w)| w * self.values[n])
                .sum(),
        )
    }

    /// Writes `x[,y],value` rows in node order, with a header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let two_d = self.grid.dimension() == 2;
        writeln!(out, "{}", if two_d { "x,y,value" } else { "x,value" })?;
        for (n, v) in self.values.iter().enumerate() {
            let p = self.grid.point(n);
            if two_d {
                writeln!(out, "{},{},{}", p[0], p[1], v)?;
            } else {
                writeln!(out, "{},{}", p[0], v)?;
            }
        }
        Ok(())
    }

    /// Reads a field written by [`ScalarField::write_csv`]; coordinates must
    /// match the grid nodes.
    pub fn read_csv<R: BufRead>(grid: Arc<Grid>, input: R) -> Result<ScalarField> {
        let dim = grid.dimension();
        let tol = 1e-9 * grid.h();
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Config("empty field csv".into()))??;
        let expected = if dim == 2 { "x,y,value" } else { "x,value" };
        if header.trim() != expected {
            return Err(Error::Config(format!(
                "field csv header `{}` (expected `{expected}`)",
                header.trim()
            )));
        }
        let mut values = Vec::with_capacity(grid.node_count());
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("field csv row {}: {e}", row + 2)))?;
            if cols.len() != dim + 1 {
                return Err(Error::Config(format!(
                    "field csv row {} has {} columns",
                    row + 2,
                    cols.len()
                )));
            }
            let node = values.len();
            if node >= grid.node_count() {
                return Err(Error::Config("field csv has more rows than nodes".into()));
            }
            let p = grid.point(node);
            if (0..dim).any(|a| (p[a] - cols[a]).abs() > tol) {
                return Err(Error::Config(format!(
                    "field csv row {} does not match node {node}",
                    row + 2
                )));
            }
            values.push(cols[dim]);
        }
        ScalarField::new(grid, values)
    }
}
