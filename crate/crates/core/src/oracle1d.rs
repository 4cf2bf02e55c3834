//! Closed-form ground truth for 1D problems with constant coefficients and
//! no source term.
//!
//! With `f ≡ 0` the minimizer is monotone and affine on each side of its
//! single zero `t`, so the energy reduces to a scalar function of `t`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Oracle1DProblem {
    pub interval: (f64, f64),
    /// `(u(a), u(b))` with `u(a) < 0 < u(b)`.
    pub boundary: (f64, f64),
    pub a_plus: f64,
    pub a_minus: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub p: f64,
}

impl Oracle1DProblem {
    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.interval;
        if !(a < b) {
            return Err(Error::Config(format!("degenerate interval [{a}, {b}]")));
        }
        let (l, r) = self.boundary;
        if !(l < 0.0 && r > 0.0) {
            return Err(Error::Config(format!(
                "boundary values ({l}, {r}) must straddle zero with u(a) < 0 < u(b)"
            )));
        }
        if !(self.a_plus > 0.0 && self.a_minus > 0.0) {
            return Err(Error::Config("diffusion constants must be positive".into()));
        }
        if !(self.p >= 2.0) {
            return Err(Error::Config(format!("p must be ≥ 2, got {}", self.p)));
        }
        Ok(())
    }

    fn left_weight(&self) -> f64 {
        self.a_minus * (-self.boundary.0).powf(self.p)
    }

    fn right_weight(&self) -> f64 {
        self.a_plus * self.boundary.1.powf(self.p)
    }
}

/// Energy of the monotone piecewise-linear candidate vanishing at `t`.
pub fn energy_of_kink(problem: &Oracle1DProblem, t: f64) -> Result<f64> {
    let (a, b) = problem.interval;
    if !(t > a && t < b) {
        return Err(Error::Domain(format!("kink {t} must lie strictly inside ({a}, {b})")));
    }
    Ok(kink_energy(problem, t))
}

fn kink_energy(problem: &Oracle1DProblem, t: f64) -> f64 {
    let (a, b) = problem.interval;
    let p = problem.p;
    let (left, right) = (t - a, b - t);
    problem.left_weight() * left.powf(1.0 - p)
        + problem.right_weight() * right.powf(1.0 - p)
        + problem.gamma_minus * left
        + problem.gamma_plus * right
}

fn kink_derivative(problem: &Oracle1DProblem, t: f64) -> f64 {
    let (a, b) = problem.interval;
    let p = problem.p;
    (1.0 - p) * problem.left_weight() * (t - a).powf(-p)
        - (1.0 - p) * problem.right_weight() * (b - t).powf(-p)
        + problem.gamma_minus
        - problem.gamma_plus
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSolution {
    pub kink: f64,
    pub energy: f64,
    /// Interval of width ≤ tolerance certified to contain the argmin.
    pub bracket: (f64, f64),
    problem: Oracle1DProblem,
}

impl OracleSolution {
    pub fn value_at(&self, x: f64) -> f64 {
        let (a, b) = self.problem.interval;
        let (l, r) = self.problem.boundary;
        if x <= self.kink {
            l * (self.kink - x) / (self.kink - a)
        } else {
            r * (x - self.kink) / (b - self.kink)
        }
    }

    /// The piecewise-affine minimizer sampled at the nodes of `grid`.
    pub fn sample(&self, grid: Arc<Grid>) -> ScalarField {
        ScalarField::from_fn(grid, |p| self.value_at(p[0]))
    }
}

const SWEEP_POINTS: usize = 10_000;

fn golden_section(problem: &Oracle1DProblem, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = kink_energy(problem, c);
    let mut fd = kink_energy(problem, d);
    while hi - lo > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = kink_energy(problem, c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = kink_energy(problem, d);
        }
        if hi - lo <= f64::EPSILON * (lo.abs() + hi.abs()) {
            break;
        }
    }
    (lo, hi)
}

/// Global minimizer of [`energy_of_kink`] over `(a + tol, b − tol)`: a dense
/// sweep locates the basin, golden-section search narrows it and bisection
/// on the derivative sign certifies the final bracket.
pub fn exact_minimizer(problem: &Oracle1DProblem, tolerance: f64) -> Result<OracleSolution> {
    problem.validate()?;
    if !(tolerance > 0.0) {
        return Err(Error::Config("tolerance must be positive".into()));
    }
    let (a, b) = problem.interval;
    let (lo, hi) = (a + tolerance, b - tolerance);
    if !(lo < hi) {
        return Err(Error::Config("tolerance exceeds half the interval".into()));
    }

    // golden section over the full range, then guard with the sweep
    let (g_lo, g_hi) = golden_section(problem, lo, hi, tolerance);
    let golden_t = 0.5 * (g_lo + g_hi);
    let step = (hi - lo) / (SWEEP_POINTS - 1) as f64;
    let mut best = (0, f64::INFINITY);
    for i in 0..SWEEP_POINTS {
        let e = kink_energy(problem, lo + i as f64 * step);
        if e < best.1 {
            best = (i, e);
        }
    }
    let (g_lo, g_hi) = if kink_energy(problem, golden_t) <= best.1 + 1e-14 * best.1.abs() {
        (g_lo, g_hi)
    } else {
        let i = best.0;
        let l = lo + i.saturating_sub(1) as f64 * step;
        let h = (lo + (i + 1) as f64 * step).min(hi);
        golden_section(problem, l, h, tolerance)
    };

    // Function values are flat to O(√ε) near the minimum; the derivative
    // sign pins the argmin down to rounding.
    let center = 0.5 * (g_lo + g_hi);
    let (mut b_lo, mut b_hi) = ((center - step).max(lo), (center + step).min(hi));
    let (mut lo, mut hi) = (g_lo, g_hi);
    if kink_derivative(problem, b_lo) < 0.0 && kink_derivative(problem, b_hi) > 0.0 {
        for _ in 0..200 {
            let mid = 0.5 * (b_lo + b_hi);
            if mid <= b_lo || mid >= b_hi {
                break;
            }
            if kink_derivative(problem, mid) < 0.0 {
                b_lo = mid;
            } else {
                b_hi = mid;
            }
        }
        lo = b_lo;
        hi = b_hi;
    }
    let kink = 0.5 * (lo + hi);
    Ok(OracleSolution {
        kink,
        energy: kink_energy(problem, kink),
        bracket: (lo, hi),
        problem: *problem,
    })
}
