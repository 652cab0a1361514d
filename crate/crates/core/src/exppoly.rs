//! Finite exponential sums `Σ aⱼ·z^{Lⱼ}` whose exponents are affine forms
//! `c₀ + Σ cᵢ·xᵢ` in integer-coefficient correction variables.
//!
//! Every entry of a power of the polynomial adjacency matrix lives in this
//! algebra: a walk contributes `z` raised to its signed weight sum, and each
//! traversal of a suspect arc adds `±1` to that arc's variable coefficient.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Tolerance under which two exponent constants are the same exponent.
pub const EPS_EXP: f64 = 1e-9;
/// Coefficients at or below this magnitude are dropped.
pub const EPS_COEF: f64 = 1e-12;

/// Largest `|L·ln z|` for which `z^L` is evaluated.
pub const MAX_LOG_MAGNITUDE: f64 = 700.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("evaluation point z = {0} must be positive")]
    Domain(f64),
    #[error("polynomial uses variable x{needed} but only {given} values were supplied")]
    Arity { needed: usize, given: usize },
    #[error("exponent {exponent} at z = {z} overflows (|L ln z| > {MAX_LOG_MAGNITUDE}); gauge-fix the network first")]
    Overflow { exponent: f64, z: f64 },
    #[error("polynomial carries correction variables; substitute them first")]
    HasVariables,
}

/// `constant + Σ coeffs[i]·xᵢ`. Zero coefficients are never stored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineExponent {
    pub constant: f64,
    coeffs: BTreeMap<usize, i32>,
}

impl AffineExponent {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn with_var(mut self, var: usize, coeff: i32) -> Self {
        self.add_var(var, coeff);
        self
    }

    fn add_var(&mut self, var: usize, coeff: i32) {
        if coeff == 0 {
            return;
        }
        let slot = self.coeffs.entry(var).or_insert(0);
        *slot += coeff;
        if *slot == 0 {
            self.coeffs.remove(&var);
        }
    }

    pub fn coeffs(&self) -> &BTreeMap<usize, i32> {
        &self.coeffs
    }

    pub fn has_variables(&self) -> bool {
        !self.coeffs.is_empty()
    }

    /// One past the largest variable index used.
    pub fn arity(&self) -> usize {
        self.coeffs.keys().next_back().map_or(0, |&k| k + 1)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.constant += other.constant;
        for (&v, &c) in &other.coeffs {
            out.add_var(v, c);
        }
        out
    }

    pub fn negate(&self) -> Self {
        Self {
            constant: -self.constant,
            coeffs: self.coeffs.iter().map(|(&v, &c)| (v, -c)).collect(),
        }
    }

    /// Value of the affine form at `x`.
    pub fn at(&self, x: &[f64]) -> Result<f64, EvalError> {
        let mut value = self.constant;
        for (&v, &c) in &self.coeffs {
            let xv = x.get(v).ok_or(EvalError::Arity {
                needed: v,
                given: x.len(),
            })?;
            value += f64::from(c) * xv;
        }
        Ok(value)
    }

    fn cmp_coeffs(&self, other: &Self) -> Ordering {
        self.coeffs.iter().cmp(other.coeffs.iter())
    }
}

impl fmt::Display for AffineExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", fmt_num(self.constant))?;
        for (&v, &c) in &self.coeffs {
            if c < 0 {
                write!(f, " - {}*x{v}", -c)?;
            } else {
                write!(f, " + {c}*x{v}")?;
            }
        }
        Ok(())
    }
}

fn fmt_num(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub exponent: AffineExponent,
    pub coeff: f64,
}

/// Sparse variable coefficients of an exponent, `var -> coefficient`.
pub type VariablePart = BTreeMap<usize, i32>;

/// Canonical exponential sum. Terms are merged on equal exponents (same
/// integer coefficients, constants within [`EPS_EXP`]) and stored sorted by
/// descending constant, then by variable coefficients.
#[derive(Debug, Clone, Default)]
pub struct ExpPoly {
    terms: Vec<Term>,
}

impl ExpPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::monomial(1.0, AffineExponent::constant(0.0))
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(c, AffineExponent::constant(0.0))
    }

    pub fn monomial(coeff: f64, exponent: AffineExponent) -> Self {
        Self::from_terms(vec![Term { exponent, coeff }])
    }

    /// Single term `coeff·z^{constant}`.
    pub fn power(coeff: f64, constant: f64) -> Self {
        Self::monomial(coeff, AffineExponent::constant(constant))
    }

    pub fn from_terms(terms: Vec<Term>) -> Self {
        let mut p = Self { terms };
        p.normalize();
        p
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// One past the largest variable index used by any term.
    pub fn arity(&self) -> usize {
        self.terms.iter().map(|t| t.exponent.arity()).max().unwrap_or(0)
    }

    pub fn has_variables(&self) -> bool {
        self.terms.iter().any(|t| t.exponent.has_variables())
    }

    fn normalize(&mut self) {
        let mut terms = std::mem::take(&mut self.terms);
        terms.sort_by(|a, b| {
            a.exponent
                .cmp_coeffs(&b.exponent)
                .then(a.exponent.constant.total_cmp(&b.exponent.constant))
        });
        let mut merged: Vec<Term> = Vec::with_capacity(terms.len());
        for t in terms {
            if let Some(last) = merged.last_mut() {
                if last.exponent.cmp_coeffs(&t.exponent) == Ordering::Equal
                    && (t.exponent.constant - last.exponent.constant).abs() <= EPS_EXP
                {
                    last.coeff += t.coeff;
                    continue;
                }
            }
            merged.push(t);
        }
        merged.retain(|t| t.coeff.abs() > EPS_COEF);
        merged.sort_by(|a, b| {
            b.exponent
                .constant
                .total_cmp(&a.exponent.constant)
                .then(a.exponent.cmp_coeffs(&b.exponent))
        });
        self.terms = merged;
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = Vec::with_capacity(self.len() + other.len());
        terms.extend_from_slice(&self.terms);
        terms.extend_from_slice(&other.terms);
        Self::from_terms(terms)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .map(|t| Term {
                    exponent: t.exponent.clone(),
                    coeff: t.coeff * factor,
                })
                .collect(),
        )
    }

    /// Product: coefficients multiply, exponents add.
    pub fn mul(&self, other: &Self) -> Self {
        let mut terms = Vec::with_capacity(self.len() * other.len());
        for a in &self.terms {
            for b in &other.terms {
                terms.push(Term {
                    exponent: a.exponent.add(&b.exponent),
                    coeff: a.coeff * b.coeff,
                });
            }
        }
        Self::from_terms(terms)
    }

    /// Multiplies every term by `z^{shift}` and `factor`, without re-merging
    /// (a uniform shift preserves canonical order up to tolerance ties).
    pub(crate) fn shifted_terms<'a>(
        &'a self,
        factor: f64,
        shift: &'a AffineExponent,
    ) -> impl Iterator<Item = Term> + 'a {
        self.terms.iter().map(move |t| Term {
            exponent: t.exponent.add(shift),
            coeff: t.coeff * factor,
        })
    }

    /// `Σ aⱼ·z^{Lⱼ(x)}`, each term formed as `exp(L·ln z)` and summed in
    /// descending magnitude.
    pub fn eval(&self, z: f64, x: &[f64]) -> Result<f64, EvalError> {
        if !(z > 0.0) {
            return Err(EvalError::Domain(z));
        }
        let ln_z = z.ln();
        let mut values = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let exponent = t.exponent.at(x)?;
            let log = exponent * ln_z;
            if log.abs() > MAX_LOG_MAGNITUDE {
                return Err(EvalError::Overflow { exponent, z });
            }
            values.push(t.coeff * z.powf(exponent));
        }
        values.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
        Ok(values.into_iter().sum())
    }

    /// Exact gradient with respect to the correction variables; the result
    /// has one entry per element of `x`.
    pub fn gradient(&self, z: f64, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        if !(z > 0.0) {
            return Err(EvalError::Domain(z));
        }
        let ln_z = z.ln();
        let mut grad = vec![0.0; x.len()];
        for t in &self.terms {
            if !t.exponent.has_variables() {
                continue;
            }
            let exponent = t.exponent.at(x)?;
            let log = exponent * ln_z;
            if log.abs() > MAX_LOG_MAGNITUDE {
                return Err(EvalError::Overflow { exponent, z });
            }
            let value = t.coeff * ln_z * z.powf(exponent);
            for (&v, &c) in t.exponent.coeffs() {
                grad[v] += f64::from(c) * value;
            }
        }
        Ok(grad)
    }

    /// `Some(value)` when all mass sits on the zero exponent; the empty sum
    /// is the constant 0.
    pub fn as_constant(&self) -> Option<f64> {
        match self.terms.as_slice() {
            [] => Some(0.0),
            [t] if !t.exponent.has_variables() && t.exponent.constant.abs() <= EPS_EXP => Some(t.coeff),
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.as_constant().is_some()
    }

    /// Largest exponent of a variable-free sum together with the coefficient
    /// sitting there. `(0, 0)` for the empty sum.
    pub fn max_constant_exponent(&self) -> Result<(f64, f64), EvalError> {
        if self.has_variables() {
            return Err(EvalError::HasVariables);
        }
        // Terms are sorted by descending constant, so the head wins.
        Ok(self
            .terms
            .first()
            .map_or((0.0, 0.0), |t| (t.exponent.constant, t.coeff)))
    }

    /// Coefficient of the term at `exponent` (variable-free), 0 if absent.
    pub fn coeff_at(&self, exponent: f64) -> f64 {
        self.terms
            .iter()
            .filter(|t| !t.exponent.has_variables() && (t.exponent.constant - exponent).abs() <= EPS_EXP)
            .map(|t| t.coeff)
            .sum()
    }

    /// Sum of all coefficients, i.e. the value at `z = 1`.
    pub fn coeff_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff).sum()
    }

    /// Evaluates `z^{constant}` at a fixed `z` and groups the remaining
    /// variable parts: returns `(variable coefficients, weight)` pairs with
    /// the variable-free mass under the empty coefficient map.
    pub fn collapse_at(&self, z: f64) -> Result<Vec<(VariablePart, f64)>, EvalError> {
        if !(z > 0.0) {
            return Err(EvalError::Domain(z));
        }
        let ln_z = z.ln();
        let mut groups: BTreeMap<Vec<(usize, i32)>, f64> = BTreeMap::new();
        for t in &self.terms {
            let log = t.exponent.constant * ln_z;
            if log.abs() > MAX_LOG_MAGNITUDE {
                return Err(EvalError::Overflow {
                    exponent: t.exponent.constant,
                    z,
                });
            }
            let key: Vec<(usize, i32)> = t.exponent.coeffs().iter().map(|(&v, &c)| (v, c)).collect();
            *groups.entry(key).or_insert(0.0) += t.coeff * z.powf(t.exponent.constant);
        }
        Ok(groups
            .into_iter()
            .map(|(k, w)| (k.into_iter().collect(), w))
            .collect())
    }
}

impl PartialEq for ExpPoly {
    /// Canonical equality: same exponents up to [`EPS_EXP`] and coefficients
    /// equal up to 1e-9 relative.
    fn eq(&self, other: &Self) -> bool {
        self.terms.len() == other.terms.len()
            && self.terms.iter().zip(&other.terms).all(|(a, b)| {
                a.exponent.cmp_coeffs(&b.exponent) == Ordering::Equal
                    && (a.exponent.constant - b.exponent.constant).abs() <= EPS_EXP
                    && (a.coeff - b.coeff).abs() <= 1e-9 * a.coeff.abs().max(b.coeff.abs()).max(1.0)
            })
    }
}

impl fmt::Display for ExpPoly {
    /// `a1*z^(c0 + 1*x0 - 1*x1) + ...`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{}*z^({})", fmt_num(t.coeff), t.exponent)?;
        }
        Ok(())
    }
}
