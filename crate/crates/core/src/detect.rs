//! Loop-law diagnostics and gross-error correction.
//!
//! [`detect`] gauge-fixes a network, measures how far `diag A(z)^r` strays
//! from `diag A(1)^r` and grades the result. [`correct`] turns suspect arcs
//! into correction variables, builds `e(x) = tr A(z)^r − tr A(1)^r` and
//! minimizes it. `e` is a positively weighted sum of exponentials of affine
//! forms, hence convex.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::exppoly::{EvalError, ExpPoly, MAX_LOG_MAGNITUDE};
use crate::graph::{gauge_fix, GraphError, VertexId, WeightedDigraph};
use crate::matrix::{
    build_poly_matrix, evaluate_network, power_diagonals, symbolic_power, DeviationSeries, MatrixError,
    DEFAULT_TERM_BUDGET,
};
use crate::spectral::{spectrum, SpectralError};

/// Deviation norms at or below this are zero.
pub const DEFAULT_EPS_CLEAN: f64 = 1e-9;
/// Per-vertex deviation separating noise from gross errors, in meters.
pub const DEFAULT_TAU: f64 = 1e-2;
pub const DEFAULT_Z: f64 = 2.0;
/// Spectra are only computed up to this order; Newton's identities lose all
/// precision well before power sums of large networks overflow.
pub const SPECTRUM_MAX_ORDER: usize = 64;

const GRAD_TOL: f64 = 1e-9;
const MAX_ITERATIONS: usize = 10_000;
const ARMIJO_C: f64 = 1e-4;
const DIVERGENCE_BOUND: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("the network satisfies the loop law; there is nothing to rank")]
    CleanReport,
    #[error("removing the arcs disconnects the network; cut off: {}", .0.join(", "))]
    Disconnects(Vec<String>),
    #[error("suspect arc {0} lies on no closed walk of length {1}; increase r")]
    NoClosedWalk(String, usize),
    #[error("minimization diverged along suspect arc {0}")]
    Unbounded(String),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Clean,
    Minor,
    Gross,
}

impl Verdict {
    /// Process exit status for the verdict.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Clean => 0,
            Verdict::Minor => 2,
            Verdict::Gross => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectConfig {
    pub z: f64,
    /// Defaults to the number of vertices.
    pub r_max: Option<usize>,
    pub tau: f64,
    pub eps_clean: f64,
    pub term_budget: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            z: DEFAULT_Z,
            r_max: None,
            tau: DEFAULT_TAU,
            eps_clean: DEFAULT_EPS_CLEAN,
            term_budget: DEFAULT_TERM_BUDGET,
        }
    }
}

impl DetectConfig {
    pub fn with_z(mut self, z: f64) -> Self {
        self.z = z;
        self
    }

    pub fn with_r_max(mut self, r_max: usize) -> Self {
        self.r_max = Some(r_max);
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn validate(&self) -> Result<(), DetectError> {
        if !(self.z > 0.0) || self.z == 1.0 {
            return Err(DetectError::Usage(format!("z must be positive and different from 1, got {}", self.z)));
        }
        if self.r_max == Some(0) {
            return Err(DetectError::Usage("r_max must be at least 1".into()));
        }
        if !(self.tau > 0.0) {
            return Err(DetectError::Usage(format!("tau must be positive, got {}", self.tau)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub series: DeviationSeries,
    pub first_failing_r: Option<usize>,
    /// Vertices by deviation at `first_failing_r`, largest first; empty when
    /// clean.
    pub vertex_ranking: Vec<(VertexId, f64)>,
    /// Distance between the spectra of `A(z)` and `A(1)`; `None` above
    /// [`SPECTRUM_MAX_ORDER`].
    pub spectrum_deviation: Option<f64>,
    pub spectrum_non_real: bool,
    pub verdict: Verdict,
    pub tau: f64,
    pub eps_clean: f64,
}

impl DiagnosticsReport {
    /// Deviation vector at the first failing power.
    pub fn failing_diag(&self) -> Option<&[f64]> {
        self.first_failing_r
            .and_then(|r| self.series.step(r))
            .map(|s| s.diag.as_slice())
    }
}

/// Runs the diagonal and spectral loop-law checks on the gauge-fixed network.
pub fn detect(g: &WeightedDigraph, cfg: &DetectConfig) -> Result<DiagnosticsReport, DetectError> {
    cfg.validate()?;
    let (gauged, _) = gauge_fix(g)?;
    let r_max = cfg.r_max.unwrap_or(g.order()).max(1);
    let series = power_diagonals(&gauged, cfg.z, r_max)?;

    let first = series.series.iter().find(|s| s.norm > cfg.eps_clean);
    let first_failing_r = first.map(|s| s.r);
    let (verdict, vertex_ranking) = match first {
        None => (Verdict::Clean, Vec::new()),
        Some(step) => {
            let mut order: Vec<usize> = (0..g.order()).collect();
            // stable: ties keep input vertex order
            order.sort_by(|&a, &b| step.diag[b].abs().total_cmp(&step.diag[a].abs()));
            let ranking = order
                .into_iter()
                .map(|i| (g.vertices()[i].clone(), step.diag[i]))
                .collect();
            let worst = step.diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            let verdict = if worst < cfg.tau { Verdict::Minor } else { Verdict::Gross };
            (verdict, ranking)
        }
    };

    let (spectrum_deviation, spectrum_non_real) = if g.order() <= SPECTRUM_MAX_ORDER {
        let at_z = spectrum(&gauged, cfg.z)?;
        let at_one = spectrum(&gauged, 1.0)?;
        (Some(at_z.distance(&at_one)), at_z.non_real)
    } else {
        (None, false)
    };

    Ok(DiagnosticsReport {
        series,
        first_failing_r,
        vertex_ranking,
        spectrum_deviation,
        spectrum_non_real,
        verdict,
        tau: cfg.tau,
        eps_clean: cfg.eps_clean,
    })
}

/// Scores each arc by the summed deviation of its endpoints at the first
/// failing power and returns the `k` best, ties in arc input order.
///
/// This is a heuristic: a blunder on an arc inflates the closed walks through
/// both of its endpoints.
pub fn rank_suspect_arcs(
    g: &WeightedDigraph,
    report: &DiagnosticsReport,
    k: usize,
) -> Result<Vec<usize>, DetectError> {
    if report.verdict == Verdict::Clean {
        return Err(DetectError::CleanReport);
    }
    let deviation: HashMap<&VertexId, f64> = report.vertex_ranking.iter().map(|(v, d)| (v, d.abs())).collect();
    let score = |v: &VertexId| deviation.get(v).copied().unwrap_or(0.0);
    let mut arcs: Vec<(usize, f64)> = g
        .arcs()
        .iter()
        .enumerate()
        .map(|(i, a)| (i, score(&a.tail) + score(&a.head)))
        .collect();
    arcs.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(arcs.into_iter().take(k).map(|(i, _)| i).collect())
}

/// Drops the given arcs, refusing to disconnect the network.
pub fn remove_suspects(g: &WeightedDigraph, arcs: &[usize]) -> Result<WeightedDigraph, DetectError> {
    if let Some(&bad) = arcs.iter().find(|&&i| i >= g.arcs().len()) {
        return Err(MatrixError::UnknownSuspect(bad).into());
    }
    let reduced = g.without_arcs(arcs);
    let comps = reduced.components();
    if comps.len() > 1 {
        let cut = comps[1..]
            .iter()
            .flatten()
            .map(|&i| g.vertices()[i].to_string())
            .collect();
        return Err(DetectError::Disconnects(cut));
    }
    Ok(reduced)
}

/// `e(x) = tr A(z)^r − tr A(1)^r` over the suspect corrections.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorFunction {
    /// `tr A(z)^r` as an exponential sum in the correction variables.
    pub trace_poly: ExpPoly,
    /// `tr A(1)^r`, the number of closed `r`-walks.
    pub constant_ref: f64,
    pub z: f64,
    pub r: usize,
    pub suspects: Vec<usize>,
    num_vars: usize,
    /// `(dense variable coefficients, weight at z)` for variable-bearing parts.
    terms: Vec<(Vec<i32>, f64)>,
    /// Variable-free mass at `z` minus `constant_ref`.
    offset: f64,
    /// Set when the symbolic power exceeded the term budget; `e` is then
    /// evaluated from dense matrix powers.
    numeric: Option<NumericTrace>,
}

/// Dense evaluation of `tr A(z)^r` with the suspect weights shifted by `x`.
#[derive(Debug, Clone, PartialEq)]
struct NumericTrace {
    gauged: WeightedDigraph,
}

impl NumericTrace {
    fn matrix(&self, f: &ErrorFunction, x: &[f64]) -> Result<DMatrix<f64>, DetectError> {
        let mut w: Vec<f64> = self.gauged.arcs().iter().map(|a| a.weight).collect();
        for (&arc, xi) in f.suspects.iter().zip(x) {
            w[arc] += xi;
        }
        Ok(evaluate_network(&self.gauged.with_weights(&w), f.z)?.0)
    }

    /// `(A, A^{r−1})`
    fn powers(&self, f: &ErrorFunction, x: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>), DetectError> {
        let a = self.matrix(f, x)?;
        let n = a.nrows();
        let mut p = DMatrix::<f64>::identity(n, n);
        for _ in 1..f.r {
            p = &p * &a;
        }
        Ok((a, p))
    }

    fn value(&self, f: &ErrorFunction, x: &[f64]) -> Result<f64, DetectError> {
        let (a, p) = self.powers(f, x)?;
        Ok((&p * &a).trace() - f.constant_ref)
    }

    /// `∂ tr A^r / ∂A_uv = r·(A^{r−1})_vu`, and `x_i` scales `A_uv` by `z^{x_i}`
    /// and `A_vu` by `z^{−x_i}`.
    fn gradient(&self, f: &ErrorFunction, x: &[f64]) -> Result<Vec<f64>, DetectError> {
        let (a, p) = self.powers(f, x)?;
        let scale = f.r as f64 * f.z.ln();
        Ok(f.suspects
            .iter()
            .map(|&arc| {
                let (u, v) = self.gauged.endpoints(arc);
                scale * (p[(v, u)] * a[(u, v)] - p[(u, v)] * a[(v, u)])
            })
            .collect())
    }
}

impl ErrorFunction {
    pub fn new(
        trace_poly: ExpPoly,
        constant_ref: f64,
        z: f64,
        r: usize,
        suspects: Vec<usize>,
    ) -> Result<Self, DetectError> {
        let num_vars = suspects.len();
        if trace_poly.arity() > num_vars {
            return Err(DetectError::Usage(format!(
                "trace polynomial uses {} variables but {} suspects were given",
                trace_poly.arity(),
                num_vars
            )));
        }
        let mut terms = Vec::new();
        let mut offset = -constant_ref;
        for (coeffs, weight) in trace_poly.collapse_at(z)? {
            if coeffs.is_empty() {
                offset += weight;
            } else {
                let mut dense = vec![0; num_vars];
                for (v, c) in coeffs {
                    dense[v] = c;
                }
                terms.push((dense, weight));
            }
        }
        Ok(Self {
            trace_poly,
            constant_ref,
            z,
            r,
            suspects,
            num_vars,
            terms,
            offset,
            numeric: None,
        })
    }

    /// `e` evaluated from dense powers of the gauge-fixed network, for
    /// networks whose symbolic power would exceed the term budget.
    pub fn numeric(g: &WeightedDigraph, suspects: &[usize], z: f64, r: usize) -> Result<Self, DetectError> {
        validate_z(z)?;
        if let Some(&bad) = suspects.iter().find(|&&i| i >= g.arcs().len()) {
            return Err(MatrixError::UnknownSuspect(bad).into());
        }
        let (gauged, _) = gauge_fix(g)?;
        let at_one = evaluate_network(g, 1.0)?.0;
        let constant_ref = at_one.pow(r as u32).trace();
        Ok(Self {
            trace_poly: ExpPoly::zero(),
            constant_ref,
            z,
            r,
            suspects: suspects.to_vec(),
            num_vars: suspects.len(),
            terms: Vec::new(),
            offset: 0.0,
            numeric: Some(NumericTrace { gauged }),
        })
    }

    /// Whether `e` is evaluated from dense matrix powers.
    pub fn is_numeric(&self) -> bool {
        self.numeric.is_some()
    }

    /// Whether variable `var` affects `e`. Unknown for the numeric form.
    fn involves(&self, var: usize) -> bool {
        self.numeric.is_some() || self.terms.iter().any(|(c, _)| c[var] != 0)
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// `(variable coefficients, weight)` pairs: `e(x) = Σ w·z^{c·x} + offset`.
    pub fn terms(&self) -> &[(Vec<i32>, f64)] {
        &self.terms
    }

    /// Constant part of `e`.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    fn check_arity(&self, x: &[f64]) -> Result<(), DetectError> {
        if x.len() != self.num_vars {
            return Err(EvalError::Arity {
                needed: self.num_vars,
                given: x.len(),
            }
            .into());
        }
        Ok(())
    }

    fn term_value(&self, coeffs: &[i32], weight: f64, x: &[f64]) -> Result<f64, DetectError> {
        let exponent: f64 = coeffs.iter().zip(x).map(|(&c, xi)| f64::from(c) * xi).sum();
        let log = exponent * self.z.ln();
        if log > MAX_LOG_MAGNITUDE {
            return Err(EvalError::Overflow { exponent, z: self.z }.into());
        }
        Ok(weight * self.z.powf(exponent))
    }

    pub fn value(&self, x: &[f64]) -> Result<f64, DetectError> {
        self.check_arity(x)?;
        if let Some(n) = &self.numeric {
            return n.value(self, x);
        }
        let mut parts = Vec::with_capacity(self.terms.len() + 1);
        for (c, w) in &self.terms {
            parts.push(self.term_value(c, *w, x)?);
        }
        parts.push(self.offset);
        parts.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
        Ok(parts.into_iter().sum())
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, DetectError> {
        self.check_arity(x)?;
        if let Some(n) = &self.numeric {
            return n.gradient(self, x);
        }
        let ln_z = self.z.ln();
        let mut grad = vec![0.0; self.num_vars];
        for (c, w) in &self.terms {
            let v = self.term_value(c, *w, x)? * ln_z;
            for (g, &ci) in grad.iter_mut().zip(c) {
                *g += f64::from(ci) * v;
            }
        }
        Ok(grad)
    }
}

/// Builds `e(x)` from the exact `r`-th power of `A(z)` with the suspect arcs
/// carrying correction variables. Traces are similarity invariant, so the
/// network need not be gauge-fixed.
pub fn build_error_function(
    g: &WeightedDigraph,
    suspects: &[usize],
    z: f64,
    r: usize,
    term_budget: usize,
) -> Result<ErrorFunction, DetectError> {
    validate_z(z)?;
    let m = build_poly_matrix(g, suspects)?;
    let p = symbolic_power(&m, r, term_budget)?;
    let trace = p
        .diagonal()
        .into_iter()
        .fold(ExpPoly::zero(), |acc, d| acc.add(d));
    let constant_ref = trace.coeff_sum();
    ErrorFunction::new(trace, constant_ref, z, r, suspects.to_vec())
}

fn validate_z(z: f64) -> Result<(), DetectError> {
    if !(z > 0.0) || z == 1.0 || !z.is_finite() {
        return Err(DetectError::Usage(format!("z must be positive and different from 1, got {z}")));
    }
    Ok(())
}

/// Symbolic error function, or the numeric one if the symbolic power would
/// exceed the term budget.
fn error_function_with_fallback(
    g: &WeightedDigraph,
    suspects: &[usize],
    z: f64,
    r: usize,
    term_budget: usize,
) -> Result<ErrorFunction, DetectError> {
    match build_error_function(g, suspects, z, r, term_budget) {
        Err(DetectError::Matrix(MatrixError::BudgetExceeded { .. })) => ErrorFunction::numeric(g, suspects, z, r),
        other => other,
    }
}

/// Outcome of [`minimize_error`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Minimum {
    pub x_star: Vec<f64>,
    pub e_min: f64,
    pub e_zero: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `"gradient-descent"` or `"coordinate-bisection"`.
    pub method: &'static str,
}

fn arc_label(g: Option<&WeightedDigraph>, f: &ErrorFunction, var: usize) -> String {
    match g {
        Some(g) => {
            let a = &g.arcs()[f.suspects[var]];
            format!("{}-{}", a.tail, a.head)
        }
        None => format!("x{var}"),
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Minimizes `e` by steepest descent with Armijo backtracking, falling back
/// to cyclic coordinate bisection on the partial-derivative sign if descent
/// stalls.
pub fn minimize_error(f: &ErrorFunction, x0: Option<&[f64]>) -> Result<Minimum, DetectError> {
    minimize_labeled(f, x0, None)
}

fn minimize_labeled(
    f: &ErrorFunction,
    x0: Option<&[f64]>,
    g: Option<&WeightedDigraph>,
) -> Result<Minimum, DetectError> {
    let n = f.num_vars();
    for var in 0..n {
        if !f.involves(var) {
            return Err(DetectError::NoClosedWalk(arc_label(g, f, var), f.r));
        }
    }
    let zero = vec![0.0; n];
    let e_zero = f.value(&zero)?;
    let mut x = x0.map_or(zero, <[f64]>::to_vec);
    f.check_arity(&x)?;

    let mut value = f.value(&x)?;
    let mut grad = f.gradient(&x)?;
    let mut step = 1.0;
    let mut iterations = 0;
    while inf_norm(&grad) >= GRAD_TOL && iterations < MAX_ITERATIONS {
        iterations += 1;
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        step *= 2.0;
        let (next, next_value) = loop {
            let candidate: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi - step * gi).collect();
            match f.value(&candidate) {
                Ok(v) if v <= value - ARMIJO_C * step * g2 => break (candidate, v),
                _ => {}
            }
            step *= 0.5;
            if step < 1e-300 {
                break (x.clone(), value);
            }
        };
        if next == x {
            break;
        }
        x = next;
        value = next_value;
        grad = f.gradient(&x)?;
        if let Some(var) = x.iter().position(|xi| xi.abs() > DIVERGENCE_BOUND) {
            return Err(DetectError::Unbounded(arc_label(g, f, var)));
        }
    }
    if inf_norm(&grad) < GRAD_TOL {
        return Ok(Minimum {
            x_star: x,
            e_min: value,
            e_zero,
            iterations,
            converged: true,
            method: "gradient-descent",
        });
    }

    // Coordinate bisection: each partial derivative is increasing in its own
    // variable, so its root can be bracketed and bisected.
    for sweep in 0..200 {
        for var in 0..n {
            let partial = |t: f64, x: &mut Vec<f64>| -> Result<f64, DetectError> {
                x[var] = t;
                Ok(f.gradient(x)?[var])
            };
            let mut probe = x.clone();
            let start = x[var];
            let mut width = 1.0;
            let (mut lo, mut hi);
            if partial(start, &mut probe)? > 0.0 {
                hi = start;
                lo = start - width;
                while partial(lo, &mut probe)? > 0.0 {
                    width *= 2.0;
                    lo = start - width;
                    if width > DIVERGENCE_BOUND {
                        return Err(DetectError::Unbounded(arc_label(g, f, var)));
                    }
                }
            } else {
                lo = start;
                hi = start + width;
                while partial(hi, &mut probe)? < 0.0 {
                    width *= 2.0;
                    hi = start + width;
                    if width > DIVERGENCE_BOUND {
                        return Err(DetectError::Unbounded(arc_label(g, f, var)));
                    }
                }
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid == lo || mid == hi {
                    break;
                }
                if partial(mid, &mut probe)? > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            x[var] = 0.5 * (lo + hi);
        }
        grad = f.gradient(&x)?;
        if inf_norm(&grad) < GRAD_TOL {
            return Ok(Minimum {
                e_min: f.value(&x)?,
                x_star: x,
                e_zero,
                iterations: iterations + sweep + 1,
                converged: true,
                method: "coordinate-bisection",
            });
        }
    }
    Ok(Minimum {
        e_min: f.value(&x)?,
        x_star: x,
        e_zero,
        iterations: iterations + 200,
        converged: false,
        method: "coordinate-bisection",
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrectionResult {
    /// Suspect arc indices into the input network.
    pub suspects: Vec<usize>,
    pub z: f64,
    pub r: usize,
    pub x_star: Vec<f64>,
    pub e_zero: f64,
    pub e_min: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `e` was evaluated numerically because the term budget was exceeded.
    pub numeric: bool,
    #[serde(skip)]
    pub corrected: WeightedDigraph,
    pub pre_report: DiagnosticsReport,
    pub post_report: DiagnosticsReport,
}

/// Picks the walk length: the configured one, else the first failing power,
/// else the shortest `r ≤ r_max` at which every suspect lies on a closed
/// walk with a net traversal.
fn correction_length(
    g: &WeightedDigraph,
    suspects: &[usize],
    cfg: &DetectConfig,
    report: &DiagnosticsReport,
    r_override: Option<usize>,
) -> Result<usize, DetectError> {
    if let Some(r) = r_override.or(report.first_failing_r) {
        return Ok(r);
    }
    let r_max = cfg.r_max.unwrap_or(g.order()).max(1);
    for r in 1..=r_max {
        let f = error_function_with_fallback(g, suspects, cfg.z, r, cfg.term_budget)?;
        if (0..suspects.len()).all(|v| f.involves(v)) {
            return Ok(r);
        }
    }
    Ok(r_max)
}

/// Full correction pipeline: diagnose, build `e`, minimize, apply `x*` to the
/// suspect weights and diagnose again.
pub fn correct(
    g: &WeightedDigraph,
    suspects: &[usize],
    cfg: &DetectConfig,
    r_override: Option<usize>,
) -> Result<CorrectionResult, DetectError> {
    let pre_report = detect(g, cfg)?;
    let r = correction_length(g, suspects, cfg, &pre_report, r_override)?;
    let f = error_function_with_fallback(g, suspects, cfg.z, r, cfg.term_budget)?;
    let m = minimize_labeled(&f, None, Some(g))?;
    let mut weights: Vec<f64> = g.arcs().iter().map(|a| a.weight).collect();
    for (&arc, dx) in suspects.iter().zip(&m.x_star) {
        weights[arc] += dx;
    }
    let corrected = g.with_weights(&weights);
    let post_report = detect(&corrected, cfg)?;
    Ok(CorrectionResult {
        suspects: suspects.to_vec(),
        z: cfg.z,
        r,
        x_star: m.x_star,
        e_zero: m.e_zero,
        e_min: m.e_min,
        iterations: m.iterations,
        converged: m.converged,
        numeric: f.is_numeric(),
        corrected,
        pre_report,
        post_report,
    })
}

/// Inclusive sampling range of one correction variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl GridAxis {
    pub fn new(lo: f64, hi: f64, steps: usize) -> Self {
        Self { lo, hi, steps }
    }

    pub fn points(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.lo];
        }
        let h = (self.hi - self.lo) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.lo + h * i as f64).collect()
    }
}

impl std::str::FromStr for GridAxis {
    type Err = String;

    /// `lo:hi:steps`
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, steps] = parts[..] else {
            return Err(format!("expected lo:hi:steps, got '{s}'"));
        };
        let lo: f64 = lo.trim().parse().map_err(|_| format!("bad lower bound '{lo}'"))?;
        let hi: f64 = hi.trim().parse().map_err(|_| format!("bad upper bound '{hi}'"))?;
        let steps: usize = steps.trim().parse().map_err(|_| format!("bad step count '{steps}'"))?;
        if steps == 0 || !lo.is_finite() || !hi.is_finite() || hi < lo {
            return Err(format!("invalid grid '{s}'"));
        }
        Ok(Self { lo, hi, steps })
    }
}

/// Sampled values of `e` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceTable {
    pub rows: Vec<(Vec<f64>, f64)>,
    pub axes: Vec<GridAxis>,
}

impl SurfaceTable {
    /// Row with the smallest sampled value.
    pub fn argmin(&self) -> Option<&(Vec<f64>, f64)> {
        self.rows.iter().min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// CSV with header `x0[,x1],e`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (0..self.axes.len()).map(|i| format!("x{i}")).collect();
        out.push_str(&header.join(","));
        out.push_str(",e\n");
        for (x, e) in &self.rows {
            for xi in x {
                out.push_str(&crate::report::fmt_sig(*xi));
                out.push(',');
            }
            out.push_str(&crate::report::fmt_sig(*e));
            out.push('\n');
        }
        out
    }
}

/// Samples `e` on a one- or two-dimensional grid, first axis outermost.
pub fn sample_error_surface(f: &ErrorFunction, grid: &[GridAxis]) -> Result<SurfaceTable, DetectError> {
    if grid.len() > 2 {
        return Err(DetectError::Usage(format!(
            "surface export supports at most two variables, got {}; fix the others and sample a slice",
            grid.len()
        )));
    }
    if grid.len() != f.num_vars() {
        return Err(DetectError::Usage(format!(
            "grid has {} axes but the error function has {} variables",
            grid.len(),
            f.num_vars()
        )));
    }
    let mut rows = Vec::new();
    match grid {
        [] => rows.push((Vec::new(), f.value(&[])?)),
        [a] => {
            for x in a.points() {
                rows.push((vec![x], f.value(&[x])?));
            }
        }
        [a, b] => {
            for x in a.points() {
                for y in b.points() {
                    rows.push((vec![x, y], f.value(&[x, y])?));
                }
            }
        }
        _ => unreachable!(),
    }
    Ok(SurfaceTable {
        rows,
        axes: grid.to_vec(),
    })
}
