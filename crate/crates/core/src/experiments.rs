//! Experiment drivers behind the `ftlab` subcommands. Each driver turns a
//! validated [`ExperimentConfig`] into a report plus CSV tables in an output
//! directory; identical configs and seeds give byte-identical files.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::cells;
use crate::config::{jump_family, ExperimentConfig, ExperimentKind};
use crate::error::{Error, Result};
use crate::geometry::{
    certificate_hypotheses, finite_perimeter_certificate, level_set, PerimeterCertificate,
    PhaseCertificate,
};
use crate::grid::{Point, ScalarField};
use crate::oracle1d::exact_minimizer;
use crate::problem::{energy_lower_bound, ProblemSpec};
use crate::regularity::{
    free_boundary_centers, harnack_ratio, interior_centers, regularity_report, CenterKind,
    RegularityReport,
};
use crate::report::{write_atomic, Report, Table};
use crate::solver::{solve, SolveResult, SolveStatus};

/// What a driver produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub files: Vec<PathBuf>,
    /// `MaxIter` if any solve in the experiment hit the iteration limit.
    pub status: SolveStatus,
}

/// Runs the experiment named by `kind` (or the config's own kind).
pub fn run(config: &ExperimentConfig, kind: Option<ExperimentKind>, out: &Path) -> Result<Outcome> {
    match kind.unwrap_or(config.kind) {
        ExperimentKind::Solve => run_solve(config, out),
        ExperimentKind::Sweep => run_sweep(config, out),
        ExperimentKind::Perimeter => run_perimeter(config, out),
        ExperimentKind::Regularity => run_regularity(config, out),
        ExperimentKind::Oracle1d => run_oracle1d(config, out),
    }
}

fn header(config: &ExperimentConfig, kind: ExperimentKind, problem: &ProblemSpec) -> Report {
    let mut r = Report::new(kind.name(), &config.hash, &problem.grid().describe());
    r.push("seed", config.seed);
    r
}

fn field_csv(field: &ScalarField) -> Result<String> {
    let mut buf = Vec::new();
    field.write_csv(&mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

fn history_table(result: &SolveResult) -> Table {
    let mut t = Table::new([
        "start", "stage", "sigma", "iterations", "smoothed_energy", "exact_energy", "converged",
        "stalled", "accepted",
    ]);
    for r in &result.restarts {
        for (k, s) in r.stages.iter().enumerate() {
            t.row(cells![
                r.index,
                k,
                s.sigma,
                s.iterations,
                s.smoothed_energy,
                s.exact_energy,
                s.converged,
                s.stalled,
                s.accepted
            ]);
        }
    }
    t
}

fn push_solve_summary(r: &mut Report, result: &SolveResult, lower_bound: f64) {
    let e = &result.energy;
    r.push("status", result.status)
        .push("energy", e.total)
        .push("energy_diffusion", e.diffusion())
        .push("energy_source", e.source())
        .push("energy_compensation", e.compensation())
        .push("lower_bound", lower_bound)
        .push("lower_bound_holds", lower_bound <= e.total)
        .push("starts", result.restarts.len())
        .push("winner", result.winner);
}

/// Zero of a 1D field: the first sign-change crossing, if any.
pub fn first_zero(field: &ScalarField) -> Option<f64> {
    level_set(field, 0.0).ok()?.segments.first().map(|s| s.a[0])
}

/// Solve and write `field.csv`, `history.csv` and `report.txt`.
pub fn run_solve(config: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let problem = &config.problem;
    let result = solve(problem, &config.solver)?;
    let lb = energy_lower_bound(problem);
    let mut report = header(config, ExperimentKind::Solve, problem);
    push_solve_summary(&mut report, &result, lb);
    if config.dimension == 1 {
        if let Some(z) = first_zero(&result.minimizer) {
            report.push("zero", z);
        }
    }
    let files = vec![
        write_atomic(out, "field.csv", &field_csv(&result.minimizer)?)?,
        write_atomic(out, "history.csv", &history_table(&result).render())?,
        write_atomic(out, "report.txt", &report.render())?,
    ];
    Ok(Outcome {
        report,
        files,
        status: result.status,
    })
}

/// Exact 1D minimizer, compared against the discrete solver.
pub fn run_oracle1d(config: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let oracle_problem = config.oracle_problem()?;
    let sol = exact_minimizer(&oracle_problem, config.oracle_tolerance)?;
    let result = solve(&config.problem, &config.solver)?;
    let h = config.grid().h();
    let mut report = header(config, ExperimentKind::Oracle1d, &config.problem);
    report
        .push("kink", sol.kink)
        .push("energy", sol.energy)
        .push("bracket_lo", sol.bracket.0)
        .push("bracket_hi", sol.bracket.1)
        .push("solver_status", result.status)
        .push("solver_energy", result.energy.total)
        .push("energy_gap", (result.energy.total - sol.energy).abs())
        .push("energy_gap_over_h", (result.energy.total - sol.energy).abs() / h);
    if let Some(z) = first_zero(&result.minimizer) {
        report
            .push("solver_zero", z)
            .push("zero_gap_over_h", (z - sol.kink).abs() / h);
    }
    let mut t = Table::new(["x", "oracle", "solver"]);
    for (n, x) in config.grid().points().enumerate() {
        t.row(cells![x[0], sol.value_at(x[0]), result.minimizer.value(n)]);
    }
    let files = vec![
        write_atomic(out, "oracle.csv", &t.render())?,
        write_atomic(out, "report.txt", &report.render())?,
    ];
    Ok(Outcome {
        report,
        files,
        status: result.status,
    })
}

/// Median of the finite entries; `NaN` when there are none.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Minimum distance from the boundary for a center to support at least
/// three dyadic radii down to `2h` (with `r₀` = half that distance).
fn center_margin(problem: &ProblemSpec, r0: Option<f64>) -> f64 {
    let h = problem.grid().h();
    r0.unwrap_or(0.0).max(16.0 * h)
}

/// One δ of a sweep.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub delta: f64,
    /// The solved field for this jump.
    pub field: ScalarField,
    pub status: SolveStatus,
    pub energy: f64,
    pub reports: Vec<RegularityReport>,
    pub median_alpha: f64,
}

/// One grid level of a sweep.
#[derive(Debug, Clone)]
pub struct SweepLevel {
    pub h: f64,
    pub entries: Vec<SweepEntry>,
    /// RMS of the fit residuals over all centers and δ.
    pub pooled_residual: f64,
    /// Median α̂ non-decreasing as δ decreases, within the pooled residual.
    pub monotone: bool,
    /// Smallest median α̂ over δ.
    pub floor: f64,
}

/// Runs the jump sweep on `problem`'s grid.
pub fn sweep_level(config: &ExperimentConfig, problem: &ProblemSpec) -> Result<SweepLevel> {
    let sweep = &config.sweep;
    let margin = center_margin(problem, config.regularity.r0);
    let entries: Vec<SweepEntry> = sweep
        .deltas
        .par_iter()
        .map(|&delta| {
            let family = jump_family(problem, &sweep.base, delta)?;
            let result = solve(&family, &config.solver)?;
            let centers = free_boundary_centers(&result.minimizer, sweep.centers, margin)?;
            let reports = centers
                .iter()
                .map(|&c| {
                    regularity_report(&result.minimizer, c, CenterKind::FreeBoundary, config.regularity.r0)
                })
                .collect::<Result<Vec<_>>>()?;
            let alphas: Vec<f64> = reports.iter().filter_map(|r| r.alpha_hat()).collect();
            Ok(SweepEntry {
                delta,
                field: result.minimizer.clone(),
                status: result.status,
                energy: result.energy.total,
                median_alpha: median(&alphas),
                reports,
            })
        })
        .collect::<Result<_>>()?;
    let residuals: Vec<f64> = entries
        .iter()
        .flat_map(|e| e.reports.iter().filter_map(|r| r.fit.map(|f| f.residual)))
        .collect();
    let pooled_residual = if residuals.is_empty() {
        f64::NAN
    } else {
        (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt()
    };
    let monotone = entries.iter().all(|e| e.median_alpha.is_finite())
        && entries
            .windows(2)
            .all(|w| w[1].median_alpha >= w[0].median_alpha - pooled_residual);
    let floor = entries
        .iter()
        .map(|e| e.median_alpha)
        .fold(f64::INFINITY, f64::min);
    Ok(SweepLevel {
        h: problem.grid().h(),
        entries,
        pooled_residual,
        monotone,
        floor,
    })
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Jump sweep `A± = A* ± δ/2`: `sweep.csv` with the (δ, median α̂) curve,
/// `oscillations.csv` with every table, and the monotonicity verdict. With
/// `refine`, the sweep is repeated at `h/2` and the exponent floors compared.
pub fn run_sweep(config: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    if config.sweep.deltas.len() < 3 {
        return Err(Error::Config("a sweep needs at least three jumps".into()));
    }
    let mut problems = vec![config.problem.clone()];
    if config.sweep.refine {
        problems.push(config.refined_problem()?);
    }
    let levels = problems
        .iter()
        .map(|p| sweep_level(config, p))
        .collect::<Result<Vec<_>>>()?;

    let mut report = header(config, ExperimentKind::Sweep, &config.problem);
    report.push("base", config.sweep.base.source());
    let mut curve = Table::new(["level", "h", "delta", "median_alpha", "centers", "status", "energy"]);
    let mut osc = Table::new(["level", "delta", "center", "cx", "cy", "r", "osc"]);
    let mut status = SolveStatus::Converged;
    for (l, level) in levels.iter().enumerate() {
        for e in &level.entries {
            if e.status == SolveStatus::MaxIter {
                status = SolveStatus::MaxIter;
            }
            curve.row(cells![l, level.h, e.delta, e.median_alpha, e.reports.len(), e.status, e.energy]);
            for (k, r) in e.reports.iter().enumerate() {
                for (radius, o) in r.radii.iter().zip(&r.oscillations) {
                    osc.row(cells![l, e.delta, k, r.center[0], r.center[1], radius, o]);
                }
            }
        }
        report
            .push(format!("level{l}_h"), level.h)
            .push(format!("level{l}_pooled_residual"), level.pooled_residual)
            .push(format!("level{l}_floor"), level.floor)
            .push(format!("level{l}_monotone"), verdict(level.monotone));
    }
    if let [coarse, fine] = levels.as_slice() {
        report.push("floor_rises", verdict(fine.floor >= coarse.floor));
    }
    report.push("status", status);
    let files = vec![
        write_atomic(out, "sweep.csv", &curve.render())?,
        write_atomic(out, "oscillations.csv", &osc.render())?,
        write_atomic(out, "report.txt", &report.render())?,
    ];
    Ok(Outcome { report, files, status })
}

/// A solved problem with its certificate.
#[derive(Debug, Clone)]
pub struct PerimeterRun {
    pub result: SolveResult,
    pub certificate: PerimeterCertificate,
}

/// Solve `problem` and certify the perimeter with `ε = multiple·h`.
pub fn perimeter_level(config: &ExperimentConfig, problem: &ProblemSpec) -> Result<PerimeterRun> {
    let opts = &config.perimeter;
    certificate_hypotheses(problem, opts.certificate.variant)?;
    let h = problem.grid().h();
    let eps: Vec<f64> = opts.epsilon_multiples.iter().map(|m| m * h).collect();
    let result = solve(problem, &config.solver)?;
    let certificate = finite_perimeter_certificate(problem, &result.minimizer, &eps, &opts.certificate)?;
    Ok(PerimeterRun { result, certificate })
}

fn push_phase(r: &mut Report, prefix: &str, c: &PhaseCertificate) {
    r.push(format!("{prefix}_verdict"), c.verdict)
        .push(format!("{prefix}_fitted_constant"), c.fitted_constant)
        .push(format!("{prefix}_fit_relative_residual"), c.fit_relative_residual)
        .push(format!("{prefix}_perimeter_bound"), c.perimeter_bound)
        .push(format!("{prefix}_perimeter_sup"), c.perimeter_sup)
        .push(format!("{prefix}_perimeter_liminf_proxy"), c.perimeter_liminf_proxy)
        .push(format!("{prefix}_zero_level_measure"), c.zero_level_measure)
        .push(format!("{prefix}_plateau_levels"), c.plateau_levels)
        .push(
            format!("{prefix}_minimality"),
            verdict(c.entries.iter().all(|e| e.minimality_holds)),
        );
}

/// Solve, then the finite-perimeter certificate: `layers.csv` (one row per
/// ε), `levels.csv` (`t`, level-set measure) and the report. With `refine`,
/// the bound is recomputed at `h/2`.
pub fn run_perimeter(config: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let mut problems = vec![config.problem.clone()];
    if config.perimeter.refine {
        problems.push(config.refined_problem()?);
    }
    // fail on hypotheses before any solve
    certificate_hypotheses(&config.problem, config.perimeter.certificate.variant)?;
    let runs = problems
        .iter()
        .map(|p| perimeter_level(config, p))
        .collect::<Result<Vec<_>>>()?;

    let mut report = header(config, ExperimentKind::Perimeter, &config.problem);
    let mut layers = Table::new([
        "level", "side", "epsilon", "layer_measure", "layer_dirichlet", "layer_gradient_l1",
        "coarea_integral", "chain_lhs", "energy", "truncated_energy", "minimality",
    ]);
    let mut levels = Table::new(["level", "side", "epsilon", "t", "measure"]);
    let mut status = SolveStatus::Converged;
    for (l, run) in runs.iter().enumerate() {
        let cert = &run.certificate;
        if run.result.status == SolveStatus::MaxIter {
            status = SolveStatus::MaxIter;
        }
        let phases: Vec<&PhaseCertificate> =
            std::iter::once(&cert.positive).chain(cert.negative.as_ref()).collect();
        for c in &phases {
            for e in &c.entries {
                let a = &e.coarea;
                layers.row(cells![
                    l, c.side, a.epsilon, a.layer_measure, a.layer_dirichlet, a.layer_gradient_l1,
                    a.coarea_integral, e.chain_lhs, e.energy, e.truncated_energy, e.minimality_holds
                ]);
                for (t, m) in &a.perimeter_at_levels {
                    levels.row(cells![l, c.side, a.epsilon, t, m]);
                }
            }
        }
        report
            .push(format!("level{l}_h"), run.result.minimizer.grid().h())
            .push(format!("level{l}_status"), run.result.status)
            .push(format!("level{l}_energy"), run.result.energy.total)
            .push(format!("level{l}_verdict"), cert.verdict())
            .push(format!("level{l}_source_proxy"), cert.source_proxy);
        push_phase(&mut report, &format!("level{l}_positive"), &cert.positive);
        if let Some(n) = &cert.negative {
            push_phase(&mut report, &format!("level{l}_negative"), n);
        }
        if cert.source_proxy > 0.0 {
            report.push(
                format!("level{l}_constant_over_source_proxy"),
                cert.positive.fitted_constant / cert.source_proxy,
            );
        }
    }
    if let [coarse, fine] = runs.as_slice() {
        let (a, b) = (
            coarse.certificate.positive.perimeter_bound,
            fine.certificate.positive.perimeter_bound,
        );
        report.push("refinement_relative_change", (b - a).abs() / a.abs());
    }
    report.push("status", status);
    let files = vec![
        write_atomic(out, "field.csv", &field_csv(&runs[0].result.minimizer)?)?,
        write_atomic(out, "layers.csv", &layers.render())?,
        write_atomic(out, "levels.csv", &levels.render())?,
        write_atomic(out, "report.txt", &report.render())?,
    ];
    Ok(Outcome { report, files, status })
}

/// Solve, then oscillation tables and exponent fits at free-boundary and
/// interior centers (with optional Harnack ratios at interior ones).
pub fn run_regularity(config: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let problem = &config.problem;
    let opts = &config.regularity;
    let result = solve(problem, &config.solver)?;
    let u = &result.minimizer;
    let margin = center_margin(problem, opts.r0);
    let fb = free_boundary_centers(u, opts.centers, margin)?;
    let interior = interior_centers(u, opts.interior_centers, margin)?;
    let mut report = header(config, ExperimentKind::Regularity, problem);
    push_solve_summary(&mut report, &result, energy_lower_bound(problem));
    if fb.is_empty() {
        report.push("note", "no free boundary found; interior-only reports");
    }
    let centers: Vec<(Point, CenterKind)> = fb
        .iter()
        .map(|&c| (c, CenterKind::FreeBoundary))
        .chain(interior.iter().map(|&c| (c, CenterKind::Interior)))
        .collect();
    let mut reports = Vec::with_capacity(centers.len());
    for &(c, kind) in &centers {
        let mut r = regularity_report(u, c, kind, opts.r0)?;
        if opts.harnack && kind == CenterKind::Interior {
            let h = u.grid().h();
            let ratios: Vec<f64> = r
                .radii
                .iter()
                .filter(|&&radius| radius >= 4.0 * h)
                .filter_map(|&radius| harnack_ratio(u, problem, c, radius).ok())
                .collect();
            if !ratios.is_empty() {
                r.harnack_ratios = Some(ratios);
            }
        }
        reports.push(r);
    }

    let mut osc = Table::new(["center", "kind", "cx", "cy", "r", "osc"]);
    let mut fits = Table::new([
        "center", "kind", "cx", "cy", "alpha", "constant", "residual", "rows_used", "rows_dropped",
        "max_harnack",
    ]);
    let kind_name = |k: CenterKind| match k {
        CenterKind::FreeBoundary => "free_boundary",
        CenterKind::Interior => "interior",
    };
    for (k, r) in reports.iter().enumerate() {
        for (radius, o) in r.radii.iter().zip(&r.oscillations) {
            osc.row(cells![k, kind_name(r.kind), r.center[0], r.center[1], radius, o]);
        }
        let max_harnack = r
            .harnack_ratios
            .as_ref()
            .map(|v| v.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        let fmt_opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
        match r.fit {
            Some(f) => fits.row(cells![
                k, kind_name(r.kind), r.center[0], r.center[1], f.alpha, f.constant, f.residual,
                f.rows_used, f.rows_dropped, fmt_opt(max_harnack)
            ]),
            None => fits.row(cells![
                k, kind_name(r.kind), r.center[0], r.center[1], "NA", "NA", "NA", 0, r.radii.len(),
                fmt_opt(max_harnack)
            ]),
        };
    }
    let alphas = |kind| -> Vec<f64> {
        reports
            .iter()
            .filter(|r| r.kind == kind)
            .filter_map(|r| r.alpha_hat())
            .collect()
    };
    report
        .push("free_boundary_centers", fb.len())
        .push("interior_centers", interior.len())
        .push("median_alpha_free_boundary", median(&alphas(CenterKind::FreeBoundary)))
        .push("median_alpha_interior", median(&alphas(CenterKind::Interior)))
        .push(
            "insufficient_data_centers",
            reports.iter().filter(|r| r.fit.is_none()).count(),
        );
    let files = vec![
        write_atomic(out, "oscillations.csv", &osc.render())?,
        write_atomic(out, "fits.csv", &fits.render())?,
        write_atomic(out, "field.csv", &field_csv(u)?)?,
        write_atomic(out, "report.txt", &report.render())?,
    ];
    Ok(Outcome {
        report,
        files,
        status: result.status,
    })
}
