//! The polynomial adjacency matrix `A(z)`: construction, symbolic and numeric
//! powers, diagonal deviations from `A(1)^r`, and a brute-force walk oracle.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::exppoly::{AffineExponent, EvalError, ExpPoly, Term, MAX_LOG_MAGNITUDE};
use crate::graph::WeightedDigraph;

/// Default cap on the total number of stored terms in a symbolic power.
pub const DEFAULT_TERM_BUDGET: usize = 1_000_000;
/// Largest number of suspect arcs (correction variables).
pub const MAX_SUSPECTS: usize = 8;
pub const ORACLE_MAX_LENGTH: usize = 8;
pub const ORACLE_MAX_ORDER: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("suspect arc index {0} is not an arc of the network")]
    UnknownSuspect(usize),
    #[error("suspect arc index {0} listed twice")]
    RepeatedSuspect(usize),
    #[error("{0} suspect arcs given; at most {MAX_SUSPECTS} are supported")]
    TooManySuspects(usize),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("symbolic power needs more than {budget} terms; use the numeric path")]
    BudgetExceeded { budget: usize },
    #[error("walk enumeration limited to r <= {ORACLE_MAX_LENGTH} and n <= {ORACLE_MAX_ORDER}")]
    OracleLimits,
    #[error("z must be positive and different from 1, got {0}")]
    BadZ(f64),
    #[error("r_max must be at least 1")]
    BadRMax,
}

/// Square matrix of exponential sums.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMatrix {
    n: usize,
    entries: Vec<ExpPoly>,
}

impl PolyMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            entries: vec![ExpPoly::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.entries[i * n + i] = ExpPoly::one();
        }
        m
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn get(&self, u: usize, v: usize) -> &ExpPoly {
        &self.entries[u * self.n + v]
    }

    pub fn set(&mut self, u: usize, v: usize, p: ExpPoly) {
        self.entries[u * self.n + v] = p;
    }

    pub fn diagonal(&self) -> Vec<&ExpPoly> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn term_count(&self) -> usize {
        self.entries.iter().map(ExpPoly::len).sum()
    }

    /// Product with a term budget on the result.
    pub fn mul(&self, other: &Self, budget: usize) -> Result<Self, MatrixError> {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        let mut total = 0usize;
        for u in 0..n {
            for v in 0..n {
                let mut terms: Vec<Term> = Vec::new();
                for w in 0..n {
                    let left = self.get(u, w);
                    if left.is_empty() {
                        continue;
                    }
                    for t in other.get(w, v).terms() {
                        terms.extend(left.shifted_terms(t.coeff, &t.exponent));
                    }
                }
                let entry = ExpPoly::from_terms(terms);
                total += entry.len();
                if total > budget {
                    return Err(MatrixError::BudgetExceeded { budget });
                }
                out.set(u, v, entry);
            }
        }
        Ok(out)
    }

    /// Entrywise evaluation at `z` with correction values `x`.
    pub fn eval(&self, z: f64, x: &[f64]) -> Result<NumericMatrix, MatrixError> {
        let n = self.n;
        let mut m = DMatrix::zeros(n, n);
        for u in 0..n {
            for v in 0..n {
                m[(u, v)] = self.get(u, v).eval(z, x)?;
            }
        }
        Ok(NumericMatrix(m))
    }
}

/// A(z) evaluated at a concrete point.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericMatrix(pub DMatrix<f64>);

impl NumericMatrix {
    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.0.diagonal().iter().copied().collect()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }
}

/// `A(z)` for the network. The `i`-th suspect arc `u→v` gets exponent
/// `w + xᵢ` forward and `−w − xᵢ` backward.
pub fn build_poly_matrix(g: &WeightedDigraph, suspects: &[usize]) -> Result<PolyMatrix, MatrixError> {
    if suspects.len() > MAX_SUSPECTS {
        return Err(MatrixError::TooManySuspects(suspects.len()));
    }
    let mut var_of = vec![None; g.arcs().len()];
    for (var, &arc) in suspects.iter().enumerate() {
        let slot = var_of.get_mut(arc).ok_or(MatrixError::UnknownSuspect(arc))?;
        if slot.is_some() {
            return Err(MatrixError::RepeatedSuspect(arc));
        }
        *slot = Some(var);
    }
    let mut m = PolyMatrix::zeros(g.order());
    for (i, arc) in g.arcs().iter().enumerate() {
        let (t, h) = g.endpoints(i);
        let mut forward = AffineExponent::constant(arc.weight);
        if let Some(var) = var_of[i] {
            forward = forward.with_var(var, 1);
        }
        let backward = forward.negate();
        m.set(t, h, ExpPoly::monomial(1.0, forward));
        m.set(h, t, ExpPoly::monomial(1.0, backward));
    }
    Ok(m)
}

/// Entrywise evaluation, refusing exponents with `|L ln z| > 700`.
pub fn numeric_eval(m: &PolyMatrix, z: f64, x: &[f64]) -> Result<NumericMatrix, MatrixError> {
    m.eval(z, x)
}

/// `A(z)` of the network evaluated directly, without correction variables.
pub fn evaluate_network(g: &WeightedDigraph, z: f64) -> Result<NumericMatrix, MatrixError> {
    if !(z > 0.0) {
        return Err(EvalError::Domain(z).into());
    }
    let ln_z = z.ln();
    let n = g.order();
    let mut m = DMatrix::zeros(n, n);
    for (i, arc) in g.arcs().iter().enumerate() {
        let log = arc.weight * ln_z;
        if log.abs() > MAX_LOG_MAGNITUDE {
            return Err(EvalError::Overflow {
                exponent: arc.weight,
                z,
            }
            .into());
        }
        let (t, h) = g.endpoints(i);
        m[(t, h)] = z.powf(arc.weight);
        m[(h, t)] = z.powf(-arc.weight);
    }
    Ok(NumericMatrix(m))
}

/// Diagonal deviation of one power.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationStep {
    pub r: usize,
    /// ℓ1 norm of `diag`.
    pub norm: f64,
    /// ℓ2 norm of `diag`.
    pub norm_l2: f64,
    /// `diag A(z)^r − diag A(1)^r`.
    pub diag: Vec<f64>,
}

impl DeviationStep {
    pub fn max_entry(&self) -> f64 {
        self.diag.iter().copied().fold(0.0, f64::max)
    }
}

/// Deviation series over `r = 1..=r_max` at one `z`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationSeries {
    pub z: f64,
    pub series: Vec<DeviationStep>,
}

impl DeviationSeries {
    pub fn norms(&self) -> Vec<f64> {
        self.series.iter().map(|s| s.norm).collect()
    }

    pub fn norms_l2(&self) -> Vec<f64> {
        self.series.iter().map(|s| s.norm_l2).collect()
    }

    pub fn step(&self, r: usize) -> Option<&DeviationStep> {
        self.series.iter().find(|s| s.r == r)
    }
}

/// `diag A(z)^r − diag A(1)^r` for every `r ≤ r_max`, by iterated
/// multiplication of the evaluated matrices.
pub fn power_diagonals(g: &WeightedDigraph, z: f64, r_max: usize) -> Result<DeviationSeries, MatrixError> {
    if !(z > 0.0) || z == 1.0 {
        return Err(MatrixError::BadZ(z));
    }
    if r_max == 0 {
        return Err(MatrixError::BadRMax);
    }
    let a = evaluate_network(g, z)?.0;
    let a1 = evaluate_network(g, 1.0)?.0;
    let n = g.order();
    let mut p = DMatrix::<f64>::identity(n, n);
    let mut p1 = DMatrix::<f64>::identity(n, n);
    let mut series = Vec::with_capacity(r_max);
    for r in 1..=r_max {
        p = &p * &a;
        p1 = &p1 * &a1;
        let diag: Vec<f64> = (0..n).map(|i| p[(i, i)] - p1[(i, i)]).collect();
        let norm = diag.iter().map(|d| d.abs()).sum();
        let norm_l2 = diag.iter().map(|d| d * d).sum::<f64>().sqrt();
        series.push(DeviationStep { r, norm, norm_l2, diag });
    }
    Ok(DeviationSeries { z, series })
}

/// `M^r` with exact exponential-sum entries.
pub fn symbolic_power(m: &PolyMatrix, r: usize, budget: usize) -> Result<PolyMatrix, MatrixError> {
    let mut p = PolyMatrix::identity(m.order());
    for _ in 0..r {
        p = p.mul(m, budget)?;
    }
    Ok(p)
}

/// All symbolic powers `M^1..=M^r_max`.
pub fn symbolic_powers(m: &PolyMatrix, r_max: usize, budget: usize) -> Result<Vec<PolyMatrix>, MatrixError> {
    let mut out = Vec::with_capacity(r_max);
    let mut p = PolyMatrix::identity(m.order());
    for _ in 0..r_max {
        p = p.mul(m, budget)?;
        out.push(p.clone());
    }
    Ok(out)
}

/// Sum of `z^{w*(p)}` over every `r`-walk from `u` to `v` in the underlying
/// graph, built by explicit path recursion.
pub fn walk_oracle(g: &WeightedDigraph, u: usize, v: usize, r: usize) -> Result<ExpPoly, MatrixError> {
    walk_oracle_with_suspects(g, &[], u, v, r)
}

/// [`walk_oracle`] with suspect arcs carrying correction variables.
pub fn walk_oracle_with_suspects(
    g: &WeightedDigraph,
    suspects: &[usize],
    u: usize,
    v: usize,
    r: usize,
) -> Result<ExpPoly, MatrixError> {
    if r > ORACLE_MAX_LENGTH || g.order() > ORACLE_MAX_ORDER {
        return Err(MatrixError::OracleLimits);
    }
    // (neighbour, signed step exponent) per vertex
    let mut steps: Vec<Vec<(usize, AffineExponent)>> = vec![Vec::new(); g.order()];
    for (i, arc) in g.arcs().iter().enumerate() {
        let (t, h) = g.endpoints(i);
        let mut e = AffineExponent::constant(arc.weight);
        if let Some(var) = suspects.iter().position(|&s| s == i) {
            e = e.with_var(var, 1);
        }
        steps[h].push((t, e.negate()));
        steps[t].push((h, e));
    }

    fn walk(
        steps: &[Vec<(usize, AffineExponent)>],
        at: usize,
        target: usize,
        left: usize,
        acc: AffineExponent,
        out: &mut Vec<Term>,
    ) {
        if left == 0 {
            if at == target {
                out.push(Term {
                    exponent: acc,
                    coeff: 1.0,
                });
            }
            return;
        }
        for (next, e) in &steps[at] {
            walk(steps, *next, target, left - 1, acc.add(e), out);
        }
    }

    let mut terms = Vec::new();
    walk(&steps, u, v, r, AffineExponent::constant(0.0), &mut terms);
    Ok(ExpPoly::from_terms(terms))
}

/// Leading behaviour of `diag(A(z)^r − A(1)^r)` as `z → ∞`: the largest
/// exponent across all vertices and the per-vertex coefficient there.
pub fn asymptotic_diag_slope(g: &WeightedDigraph, r: usize, budget: usize) -> Result<(f64, Vec<f64>), MatrixError> {
    let p = symbolic_power(&build_poly_matrix(g, &[])?, r, budget)?;
    let deviations: Vec<ExpPoly> = p
        .diagonal()
        .into_iter()
        .map(|d| d.sub(&ExpPoly::constant(d.coeff_sum())))
        .collect();
    let mut e_max: Option<f64> = None;
    for d in &deviations {
        if d.is_empty() {
            continue;
        }
        let (e, _) = d.max_constant_exponent()?;
        e_max = Some(e_max.map_or(e, |m: f64| m.max(e)));
    }
    let Some(e_max) = e_max else {
        return Ok((0.0, vec![0.0; g.order()]));
    };
    Ok((e_max, deviations.iter().map(|d| d.coeff_at(e_max)).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle(w13: f64) -> WeightedDigraph {
        WeightedDigraph::from_triples(&[("1", "2", 1.0), ("2", "3", 2.0), ("1", "3", w13)]).unwrap()
    }

    #[test]
    fn build_with_suspect() {
        let g = triangle(4.0);
        let m = build_poly_matrix(&g, &[2]).unwrap();
        let fwd = ExpPoly::monomial(1.0, AffineExponent::constant(4.0).with_var(0, 1));
        assert_eq!(m.get(0, 2), &fwd);
        assert_eq!(m.get(2, 0), &ExpPoly::monomial(1.0, AffineExponent::constant(-4.0).with_var(0, -1)));
        assert!(m.get(0, 0).is_empty());
        assert_eq!(build_poly_matrix(&g, &[7]), Err(MatrixError::UnknownSuspect(7)));
        assert_eq!(build_poly_matrix(&g, &[1, 1]), Err(MatrixError::RepeatedSuspect(1)));
    }

    #[test]
    fn zero_weights_give_adjacency_at_any_z() {
        let g = WeightedDigraph::from_triples(&[("a", "b", 0.0), ("b", "c", 0.0)]).unwrap();
        let m = build_poly_matrix(&g, &[]).unwrap();
        for z in [0.5, 2.0, 9.0] {
            let a = numeric_eval(&m, z, &[]).unwrap().0;
            assert_eq!(a, DMatrix::from_row_slice(3, 3, &[0., 1., 0., 1., 0., 1., 0., 1., 0.]));
        }
    }

    #[test]
    fn numeric_eval_values_and_overflow() {
        let g = WeightedDigraph::from_triples(&[("a", "b", 3.0)]).unwrap();
        let m = build_poly_matrix(&g, &[]).unwrap();
        let a = numeric_eval(&m, 2.0, &[]).unwrap().0;
        assert_eq!(a[(0, 1)], 8.0);
        assert_eq!(a[(1, 0)], 0.125);
        let big = WeightedDigraph::from_triples(&[("a", "b", 5472.823)]).unwrap();
        let m = build_poly_matrix(&big, &[]).unwrap();
        assert!(matches!(numeric_eval(&m, 2.0, &[]), Err(MatrixError::Eval(EvalError::Overflow { .. }))));
        assert!(matches!(evaluate_network(&big, 2.0), Err(MatrixError::Eval(EvalError::Overflow { .. }))));
    }

    #[test]
    fn inconsistent_triangle_deviation() {
        let s = power_diagonals(&triangle(4.0), 2.0, 3).unwrap();
        assert_eq!(s.norms()[..2], [0.0, 0.0]);
        let d = &s.series[2];
        for v in &d.diag {
            assert!((v - 0.5).abs() < 1e-12);
        }
        assert!((d.norm - 1.5).abs() < 1e-12);
    }

    #[test]
    fn power_diagonals_rejects_bad_arguments() {
        let g = triangle(3.0);
        assert_eq!(power_diagonals(&g, 1.0, 3), Err(MatrixError::BadZ(1.0)));
        assert_eq!(power_diagonals(&g, -2.0, 3), Err(MatrixError::BadZ(-2.0)));
        assert_eq!(power_diagonals(&g, 2.0, 0), Err(MatrixError::BadRMax));
    }

    #[test]
    fn symbolic_power_identity_and_triangle() {
        let m = build_poly_matrix(&triangle(4.0), &[]).unwrap();
        assert_eq!(symbolic_power(&m, 0, DEFAULT_TERM_BUDGET).unwrap(), PolyMatrix::identity(3));
        let p3 = symbolic_power(&m, 3, DEFAULT_TERM_BUDGET).unwrap();
        let expect = ExpPoly::power(1.0, 1.0).add(&ExpPoly::power(1.0, -1.0));
        assert_eq!(p3.get(0, 0), &expect);
    }

    #[test]
    fn budget_is_enforced() {
        let m = build_poly_matrix(&triangle(4.0), &[]).unwrap();
        assert_eq!(symbolic_power(&m, 3, 5), Err(MatrixError::BudgetExceeded { budget: 5 }));
    }

    #[test]
    fn oracle_examples() {
        let g = triangle(3.0);
        assert_eq!(walk_oracle(&g, 0, 0, 3).unwrap(), ExpPoly::constant(2.0));
        assert_eq!(walk_oracle(&g, 0, 1, 1).unwrap(), ExpPoly::power(1.0, 1.0));
        let split = WeightedDigraph::from_triples(&[("1", "2", 1.0), ("3", "4", 1.0)]).unwrap();
        for r in 0..5 {
            assert!(walk_oracle(&split, 0, 3, r).unwrap().is_empty());
        }
        assert_eq!(walk_oracle(&g, 0, 0, 9), Err(MatrixError::OracleLimits));
    }

    #[test]
    fn asymptotic_slope_triangle_and_consistent() {
        let (e, c) = asymptotic_diag_slope(&triangle(4.0), 3, DEFAULT_TERM_BUDGET).unwrap();
        assert_eq!(e, 1.0);
        assert_eq!(c, vec![1.0, 1.0, 1.0]);
        let (e, c) = asymptotic_diag_slope(&triangle(3.0), 3, DEFAULT_TERM_BUDGET).unwrap();
        assert_eq!((e, c), (0.0, vec![0.0; 3]));
    }
}
