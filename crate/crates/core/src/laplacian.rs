//! Fast solver for the discrete Dirichlet Laplacian of a [`Grid`].
//!
//! For the P1 triangulation with a fixed diagonal, the stiffness form
//! `Σ_cells |cell|·|∇u|²` restricted to interior nodes is exactly the
//! 5-point operator `L = (hy/hx)·T_x ⊗ I + (hx/hy)·I ⊗ T_y` with
//! `T = tridiag(-1, 2, -1)`; in 1D it is `T / h`. We diagonalize `T_x` with a
//! type-I discrete sine transform and solve the remaining tridiagonal
//! systems directly.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

pub struct DirichletLaplacian {
    grid: Arc<Grid>,
    fft: Option<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for DirichletLaplacian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirichletLaplacian")
            .field("grid", &self.grid.describe())
            .finish()
    }
}

fn thomas(diag: f64, off: f64, rhs: &mut [f64], scratch: &mut Vec<f64>) {
    // Constant-coefficient symmetric tridiagonal solve, in place.
    let n = rhs.len();
    if n == 0 {
        return;
    }
    scratch.clear();
    scratch.resize(n, 0.0);
    let mut denom = diag;
    scratch[0] = off / denom;
    rhs[0] /= denom;
    for i in 1..n {
        denom = diag - off * scratch[i - 1];
        scratch[i] = off / denom;
        rhs[i] = (rhs[i] - off * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
}

impl DirichletLaplacian {
    pub fn new(grid: Arc<Grid>) -> DirichletLaplacian {
        let fft = if grid.dimension() == 2 && grid.node_counts()[0] > 2 {
            let m = grid.node_counts()[0] - 2;
            Some(FftPlanner::new().plan_fft_forward(2 * (m + 1)))
        } else {
            None
        };
        DirichletLaplacian { grid, fft }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// `L x` on interior nodes (boundary entries of `x` are treated as zero
    /// and boundary entries of the result are zero).
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let mut out = vec![0.0; g.node_count()];
        let at = |n: usize| if g.is_boundary(n) { 0.0 } else { x[n] };
        if g.dimension() == 1 {
            let h = g.spacing()[0];
            for n in g.interior_nodes() {
                out[n] = (2.0 * at(n) - at(n - 1) - at(n + 1)) / h;
            }
        } else {
            let (hx, hy) = (g.spacing()[0], g.spacing()[1]);
            let nx = g.node_counts()[0];
            for n in g.interior_nodes() {
                let lx = 2.0 * at(n) - at(n - 1) - at(n + 1);
                let ly = 2.0 * at(n) - at(n - nx) - at(n + nx);
                out[n] = hy / hx * lx + hx / hy * ly;
            }
        }
        out
    }

    /// Solves `L x = rhs` with homogeneous Dirichlet data. Boundary entries of
    /// `rhs` are ignored; boundary entries of the result are zero.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let mut out = vec![0.0; g.node_count()];
        let mut scratch = Vec::new();
        if g.dimension() == 1 {
            let n = g.node_counts()[0];
            if n <= 2 {
                return out;
            }
            let h = g.spacing()[0];
            let interior = &mut out[1..n - 1];
            interior.copy_from_slice(&rhs[1..n - 1]);
            thomas(2.0 / h, -1.0 / h, interior, &mut scratch);
            return out;
        }

        let (nx, ny) = (g.node_counts()[0], g.node_counts()[1]);
        if nx <= 2 || ny <= 2 {
            return out;
        }
        let (mx, my) = (nx - 2, ny - 2);
        let (hx, hy) = (g.spacing()[0], g.spacing()[1]);
        let fft = self.fft.as_ref().expect("fft planned for 2D grids");

        // coefficients[k][j]: sine coefficient k of interior row j
        let mut coeffs = vec![0.0; mx * my];
        let mut buf = vec![Complex::new(0.0, 0.0); 2 * (mx + 1)];
        let mut row = vec![0.0; mx];
        for j in 0..my {
            let base = (j + 1) * nx + 1;
            row.copy_from_slice(&rhs[base..base + mx]);
            dst1(fft.as_ref(), &mut row, &mut buf);
            for k in 0..mx {
                coeffs[k * my + j] = row[k];
            }
        }
        let off = -hx / hy;
        for k in 0..mx {
            let theta = std::f64::consts::PI * (k + 1) as f64 / (mx + 1) as f64;
            let mu = 2.0 - 2.0 * theta.cos();
            let diag = hy / hx * mu + 2.0 * hx / hy;
            thomas(diag, off, &mut coeffs[k * my..(k + 1) * my], &mut scratch);
        }
        let scale = 2.0 / (mx + 1) as f64;
        for j in 0..my {
            for k in 0..mx {
                row[k] = coeffs[k * my + j];
            }
            dst1(fft.as_ref(), &mut row, &mut buf);
            let base = (j + 1) * nx + 1;
            for i in 0..mx {
                out[base + i] = scale * row[i];
            }
        }
        out
    }
}

/// In-place type-I sine transform `V_k = Σ_j v_j sin(π j k / (m+1))`.
fn dst1(fft: &dyn Fft<f64>, v: &mut [f64], buf: &mut [Complex<f64>]) {
    let m = v.len();
    buf[0] = Complex::new(0.0, 0.0);
    buf[m + 1] = Complex::new(0.0, 0.0);
    for j in 0..m {
        buf[j + 1] = Complex::new(v[j], 0.0);
        buf[2 * (m + 1) - 1 - j] = Complex::new(-v[j], 0.0);
    }
    fft.process(buf);
    for k in 0..m {
        v[k] = -0.5 * buf[k + 1].im;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_inverse(grid: Grid) {
        let grid = Arc::new(grid);
        let lap = DirichletLaplacian::new(grid.clone());
        let rhs: Vec<f64> = (0..grid.node_count())
            .map(|n| if grid.is_boundary(n) { 0.0 } else { ((n * 7919) % 13) as f64 - 6.0 })
            .collect();
        let x = lap.solve(&rhs);
        let back = lap.apply(&x);
        for n in grid.interior_nodes() {
            assert!((back[n] - rhs[n]).abs() < 1e-9, "node {n}: {} vs {}", back[n], rhs[n]);
        }
    }

    #[test]
    fn solve_inverts_apply_1d() {
        check_inverse(Grid::interval(-1.0, 1.0, 17).unwrap());
    }

    #[test]
    fn solve_inverts_apply_2d_anisotropic() {
        check_inverse(Grid::rectangle((0.0, 2.0), (0.0, 1.0), 13, 9).unwrap());
        check_inverse(Grid::rectangle((0.0, 1.0), (0.0, 1.0), 3, 3).unwrap());
    }

    #[test]
    fn stiffness_matches_cell_quadrature() {
        // x^T L x = Σ |cell| |∇x|² for fields vanishing on ∂Ω
        let grid = Arc::new(Grid::rectangle((0.0, 1.0), (0.0, 1.5), 7, 6).unwrap());
        let lap = DirichletLaplacian::new(grid.clone());
        let x: Vec<f64> = (0..grid.node_count())
            .map(|n| if grid.is_boundary(n) { 0.0 } else { (n as f64 * 0.37).sin() })
            .collect();
        let field = crate::grid::ScalarField::new(grid.clone(), x.clone()).unwrap();
        let quad: f64 = field
            .gradient_on_cells()
            .iter()
            .map(|g| grid.cell_measure() * (g[0] * g[0] + g[1] * g[1]))
            .sum();
        let lx = lap.apply(&x);
        let form: f64 = x.iter().zip(&lx).map(|(a, b)| a * b).sum();
        assert!((form - quad).abs() < 1e-10 * quad);
    }
}
