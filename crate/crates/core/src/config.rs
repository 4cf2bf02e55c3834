//! TOML experiment configuration.
//!
//! Problem keys live at the top level; every experiment kind reads its own
//! table:
//!
//! ```toml
//! dimension = 1
//! extents = [[-1.0, 1.0]]
//! nodes = [513]
//! p = 2
//! A_plus = 2
//! A_minus = 1
//! gamma_plus = "step(x)"
//! boundary = "x"
//!
//! [experiment]
//! kind = "solve"
//! seed = 7
//!
//! [solver]
//! restarts = 4
//! ```
//!
//! Coefficients accept either a number or an expression string in `x`
//! (and `y` in 2D).

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::expr::SpatialFn;
use crate::geometry::{CertificateOptions, PerimeterVariant};
use crate::grid::Grid;
use crate::oracle1d::Oracle1DProblem;
use crate::problem::{CoefficientPair, ProblemSpec};
use crate::solver::SolveOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Solve,
    Sweep,
    Perimeter,
    Regularity,
    Oracle1d,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Solve => "solve",
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::Perimeter => "perimeter",
            ExperimentKind::Regularity => "regularity",
            ExperimentKind::Oracle1d => "oracle1d",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum Coefficient {
    Number(f64),
    Expression(String),
}

impl Coefficient {
    fn to_fn(&self, field: &str) -> Result<SpatialFn> {
        match self {
            Coefficient::Number(v) => Ok(SpatialFn::constant(*v)),
            Coefficient::Expression(s) => SpatialFn::parse(s).map_err(|e| Error::Parse {
                field: field.to_string(),
                message: e.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dimension: Option<usize>,
    extents: Option<Vec<[f64; 2]>>,
    nodes: Option<Vec<usize>>,
    p: Option<f64>,
    lambda: Option<f64>,
    #[serde(rename = "Lambda")]
    upper: Option<f64>,
    #[serde(rename = "A_plus")]
    a_plus: Option<Coefficient>,
    #[serde(rename = "A_minus")]
    a_minus: Option<Coefficient>,
    f_plus: Option<Coefficient>,
    f_minus: Option<Coefficient>,
    gamma_plus: Option<Coefficient>,
    gamma_minus: Option<Coefficient>,
    boundary: Option<Coefficient>,
    ordering_constant: Option<f64>,
    #[serde(default)]
    experiment: ExperimentSection,
    #[serde(default)]
    solver: SolverSection,
    #[serde(default)]
    sweep: SweepSection,
    #[serde(default)]
    perimeter: PerimeterSection,
    #[serde(default)]
    regularity: RegularitySection,
    #[serde(default)]
    oracle1d: OracleSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    kind: Option<ExperimentKind>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    smoothing_widths: Option<Vec<f64>>,
    gradient_tolerance: Option<f64>,
    max_iterations: Option<usize>,
    restarts: Option<usize>,
    history: Option<usize>,
    perturbation: Option<f64>,
    polish: Option<bool>,
    interface_shifts: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    deltas: Option<Vec<f64>>,
    base: Option<Coefficient>,
    centers: Option<usize>,
    refine: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PerimeterSection {
    /// Multiples of `h`.
    epsilons: Option<Vec<f64>>,
    n_levels: Option<usize>,
    variant: Option<String>,
    max_fit_residual: Option<f64>,
    refine: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegularitySection {
    r0: Option<f64>,
    centers: Option<usize>,
    interior_centers: Option<usize>,
    harnack: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OracleSection {
    tolerance: Option<f64>,
}

/// Jump sweep parameters: `A± = A* ± δ/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Strictly decreasing positive jumps.
    pub deltas: Vec<f64>,
    /// The continuous base coefficient `A*`.
    pub base: SpatialFn,
    /// Free-boundary centers per δ.
    pub centers: usize,
    /// Repeat the sweep with `h/2`.
    pub refine: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerimeterConfig {
    /// Layer widths in units of `h`.
    pub epsilon_multiples: Vec<f64>,
    pub certificate: CertificateOptions,
    /// Repeat with `h/2` to test stability of the bound.
    pub refine: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityConfig {
    /// Largest radius; half the distance to the boundary when absent.
    pub r0: Option<f64>,
    pub centers: usize,
    pub interior_centers: usize,
    pub harnack: bool,
}

/// A validated experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub dimension: usize,
    pub extents: Vec<(f64, f64)>,
    pub nodes: Vec<usize>,
    pub problem: ProblemSpec,
    pub solver: SolveOptions,
    pub sweep: SweepConfig,
    pub perimeter: PerimeterConfig,
    pub regularity: RegularityConfig,
    pub oracle_tolerance: f64,
    /// SHA-256 of the source text.
    pub hash: String,
}

fn missing(field: &str) -> Error {
    Error::Parse {
        field: field.to_string(),
        message: "missing required field".into(),
    }
}

fn invalid(field: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        field: field.to_string(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        ExperimentConfig::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let field = e
                .message()
                .split('`')
                .nth(1)
                .unwrap_or("document")
                .to_string();
            Error::Parse {
                field,
                message: e.to_string().trim_end().replace('\n', " | "),
            }
        })?;
        let hash = Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        build(raw, hash)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.problem.grid()
    }

    /// The same problem on a grid with spacing halved.
    pub fn refined_problem(&self) -> Result<ProblemSpec> {
        let nodes: Vec<usize> = self.nodes.iter().map(|n| 2 * n - 1).collect();
        let grid = Arc::new(Grid::new(self.dimension, &self.extents, &nodes)?);
        rebuild_on(&self.problem, grid)
    }

    /// Constant-coefficient 1D data for the oracle.
    pub fn oracle_problem(&self) -> Result<Oracle1DProblem> {
        if self.dimension != 1 {
            return Err(Error::Config("oracle1d needs a 1D configuration".into()));
        }
        let pr = &self.problem;
        let constant = |f: &SpatialFn, name: &str| {
            f.as_constant()
                .ok_or_else(|| invalid(name, "oracle1d needs a constant coefficient"))
        };
        let d = pr.diffusion();
        let (fp, fm) = pr.source();
        if constant(fp, "f_plus")? != 0.0 || constant(fm, "f_minus")? != 0.0 {
            return Err(Error::Config("oracle1d needs f ≡ 0".into()));
        }
        let (gp, gm) = pr.compensation();
        let (a, b) = self.extents[0];
        let phi = pr.boundary_fn();
        let problem = Oracle1DProblem {
            interval: (a, b),
            boundary: (phi.eval([a, 0.0]), phi.eval([b, 0.0])),
            a_plus: constant(&d.plus, "A_plus")?,
            a_minus: constant(&d.minus, "A_minus")?,
            gamma_plus: constant(gp, "gamma_plus")?,
            gamma_minus: constant(gm, "gamma_minus")?,
            p: pr.p(),
        };
        problem.validate()?;
        Ok(problem)
    }
}

/// Rebuilds `problem` on another grid over the same domain.
pub fn rebuild_on(problem: &ProblemSpec, grid: Arc<Grid>) -> Result<ProblemSpec> {
    let (fp, fm) = problem.source();
    let (gp, gm) = problem.compensation();
    ProblemSpec::builder(grid)
        .p(problem.p())
        .diffusion(problem.diffusion().clone())
        .source(fp.clone(), fm.clone())
        .compensation(gp.clone(), gm.clone())
        .boundary(problem.boundary_fn().clone())
        .ordering_constant(problem.ordering_constant())
        .build()
}

/// `A± = A* ± δ/2` on the grid of `problem`, with ellipticity bounds taken
/// from the sampled range unless the problem's own bounds cover it.
pub fn jump_family(problem: &ProblemSpec, base: &SpatialFn, delta: f64) -> Result<ProblemSpec> {
    let plus = SpatialFn::parse(&format!("({}) + {}", base.source(), 0.5 * delta))?;
    let minus = SpatialFn::parse(&format!("({}) - {}", base.source(), 0.5 * delta))?;
    let (lo, hi) = sampled_range(problem.grid(), &[&plus, &minus]);
    let d = problem.diffusion();
    let pair = CoefficientPair {
        lambda: d.lambda.min(lo),
        upper: d.upper.max(hi),
        ..CoefficientPair::new(plus, minus, 1.0, 1.0)
    };
    problem.to_builder().diffusion(pair).build()
}

fn sampled_range(grid: &Grid, fns: &[&SpatialFn]) -> (f64, f64) {
    let points = grid
        .points()
        .chain(grid.cells().iter().map(|c| grid.barycenter(c)));
    let mut range = (f64::INFINITY, f64::NEG_INFINITY);
    for x in points {
        for f in fns {
            let v = f.eval(x);
            range = (range.0.min(v), range.1.max(v));
        }
    }
    range
}

fn build(raw: RawConfig, hash: String) -> Result<ExperimentConfig> {
    let dimension = raw.dimension.ok_or_else(|| missing("dimension"))?;
    if dimension != 1 && dimension != 2 {
        return Err(invalid("dimension", format!("must be 1 or 2, got {dimension}")));
    }
    let extents: Vec<(f64, f64)> = raw
        .extents
        .ok_or_else(|| missing("extents"))?
        .into_iter()
        .map(|[a, b]| (a, b))
        .collect();
    let nodes = raw.nodes.ok_or_else(|| missing("nodes"))?;
    if extents.len() != dimension || nodes.len() != dimension {
        return Err(invalid(
            "extents",
            format!("extents and nodes need {dimension} entries each"),
        ));
    }
    let grid = Arc::new(Grid::new(dimension, &extents, &nodes)?);
    let p = raw.p.ok_or_else(|| missing("p"))?;

    let coef = |c: &Option<Coefficient>, name: &str, default: Option<f64>| -> Result<SpatialFn> {
        match (c, default) {
            (Some(c), _) => c.to_fn(name),
            (None, Some(d)) => Ok(SpatialFn::constant(d)),
            (None, None) => Err(missing(name)),
        }
    };
    let a_plus = coef(&raw.a_plus, "A_plus", None)?;
    let a_minus = coef(&raw.a_minus, "A_minus", None)?;
    let (lo, hi) = sampled_range(&grid, &[&a_plus, &a_minus]);
    let diffusion = CoefficientPair {
        lambda: raw.lambda.unwrap_or(lo),
        upper: raw.upper.unwrap_or(hi),
        ..CoefficientPair::new(a_plus, a_minus, 1.0, 1.0)
    };
    let problem = ProblemSpec::builder(grid.clone())
        .p(p)
        .diffusion(diffusion)
        .source(
            coef(&raw.f_plus, "f_plus", Some(0.0))?,
            coef(&raw.f_minus, "f_minus", Some(0.0))?,
        )
        .compensation(
            coef(&raw.gamma_plus, "gamma_plus", Some(0.0))?,
            coef(&raw.gamma_minus, "gamma_minus", Some(0.0))?,
        )
        .boundary(coef(&raw.boundary, "boundary", Some(0.0))?)
        .ordering_constant(raw.ordering_constant)
        .build()?;

    let exp = raw.experiment;
    let seed = exp.seed.unwrap_or(0);
    let defaults = SolveOptions::default();
    let s = raw.solver;
    let solver = SolveOptions {
        smoothing_widths: s.smoothing_widths.unwrap_or(defaults.smoothing_widths),
        gradient_tolerance: s.gradient_tolerance.unwrap_or(defaults.gradient_tolerance),
        max_iterations: s.max_iterations.unwrap_or(defaults.max_iterations),
        restarts: s.restarts.unwrap_or(defaults.restarts),
        history: s.history.unwrap_or(defaults.history),
        perturbation: s.perturbation.unwrap_or(defaults.perturbation),
        polish: s.polish.unwrap_or(defaults.polish),
        interface_shifts: s.interface_shifts.unwrap_or(defaults.interface_shifts),
        seed,
        ..defaults
    };
    solver.validate()?;

    let sw = raw.sweep;
    let deltas = sw.deltas.unwrap_or_else(|| vec![0.8, 0.4, 0.2, 0.1, 0.05]);
    if deltas.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(invalid("sweep.deltas", "jumps must be positive"));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("sweep.deltas", "jumps must be strictly decreasing"));
    }
    let base = match &sw.base {
        Some(c) => c.to_fn("sweep.base")?,
        None => problem.diffusion().plus.clone(),
    };
    let sweep = SweepConfig {
        deltas,
        base,
        centers: sw.centers.unwrap_or(3),
        refine: sw.refine.unwrap_or(false),
    };

    let pe = raw.perimeter;
    let epsilon_multiples = pe.epsilons.unwrap_or_else(|| vec![2.0, 4.0, 8.0, 16.0]);
    if epsilon_multiples.is_empty() || epsilon_multiples.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(invalid("perimeter.epsilons", "need positive multiples of h"));
    }
    if epsilon_multiples.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("perimeter.epsilons", "multiples must be strictly increasing"));
    }
    let variant = match pe.variant.as_deref().unwrap_or("positive") {
        "positive" => PerimeterVariant::PositivePhase,
        "both" => PerimeterVariant::BothPhases,
        other => {
            return Err(invalid(
                "perimeter.variant",
                format!("expected \"positive\" or \"both\", got {other:?}"),
            ))
        }
    };
    let cert_defaults = CertificateOptions::default();
    let perimeter = PerimeterConfig {
        epsilon_multiples,
        certificate: CertificateOptions {
            variant,
            n_levels: pe.n_levels.unwrap_or(cert_defaults.n_levels),
            max_fit_residual: pe.max_fit_residual.unwrap_or(cert_defaults.max_fit_residual),
            ..cert_defaults
        },
        refine: pe.refine.unwrap_or(false),
    };

    let re = raw.regularity;
    if let Some(r0) = re.r0 {
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(invalid("regularity.r0", "must be positive"));
        }
    }
    let regularity = RegularityConfig {
        r0: re.r0,
        centers: re.centers.unwrap_or(3),
        interior_centers: re.interior_centers.unwrap_or(2),
        harnack: re.harnack.unwrap_or(false),
    };

    let oracle_tolerance = raw.oracle1d.tolerance.unwrap_or(1e-10);
    if !(oracle_tolerance > 0.0) {
        return Err(invalid("oracle1d.tolerance", "must be positive"));
    }

    Ok(ExperimentConfig {
        kind: exp.kind.unwrap_or(ExperimentKind::Solve),
        seed,
        out: exp.out,
        dimension,
        extents,
        nodes,
        problem,
        solver,
        sweep,
        perimeter,
        regularity,
        oracle_tolerance,
        hash,
    })
}
