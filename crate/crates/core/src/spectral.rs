//! Characteristic polynomials from trace power sums and the spectra they
//! determine.
//!
//! The monic polynomial whose roots have power sums `s₁..sₙ` is obtained two
//! ways: Newton's identities (used everywhere) and a literal Laplace
//! expansion of the `(n+1)`-dimensional determinant whose first row is
//! `zⁿ … z 1` and whose lower rows are the lower-Hessenberg Toeplitz band
//! `s_k … s₁ k` (kept as an independent cross-check for small `n`).

use nalgebra::{Complex, DMatrix, Schur, SymmetricEigen};
use serde::Serialize;
use thiserror::Error;

use crate::graph::WeightedDigraph;
use crate::matrix::{evaluate_network, MatrixError};

/// Roots with `|Im| ≤ IMAG_TOL` are treated as real.
pub const IMAG_TOL: f64 = 1e-6;
/// Real roots closer than this share a multiplicity cluster.
pub const CLUSTER_TOL: f64 = 1e-6;
/// Raw roots closer than `MERGE_RADIUS·max(1, |root|)` are treated as one
/// repeated root.
pub const MERGE_RADIUS: f64 = 2e-2;
const SCHUR_MAX_ITER: usize = 10_000;
const ABERTH_MAX_ITER: usize = 2_000;

/// Largest order accepted by the determinant cross-check.
pub const DETERMINANT_MAX_ORDER: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("power-sum vector is empty")]
    Empty,
    #[error("determinant expansion limited to n <= {DETERMINANT_MAX_ORDER}, got {0}")]
    TooLarge(usize),
}

/// `s_k = tr A(z)^k` for `k = 1..=n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PowerSums(pub Vec<f64>);

impl PowerSums {
    /// Power sums of an explicit root multiset.
    pub fn of_roots(roots: &[f64]) -> Self {
        let n = roots.len();
        Self(
            (1..=n)
                .map(|k| roots.iter().map(|r| r.powi(k as i32)).sum())
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Monic polynomial, coefficients of `zⁿ … z⁰`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct MonicPolynomial(pub Vec<f64>);

impl MonicPolynomial {
    pub fn degree(&self) -> usize {
        self.0.len() - 1
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.0
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.0.iter().fold(0.0, |acc, c| acc * z + c)
    }

    /// Coefficients of the `k`-th derivative (not monic in general).
    fn derivative_coeffs(&self, k: usize) -> Vec<f64> {
        let n = self.degree();
        let mut c = self.0.clone();
        for _ in 0..k {
            let d = c.len() - 1;
            c = c[..d].iter().enumerate().map(|(i, a)| a * (d - i) as f64).collect();
        }
        debug_assert!(c.len() == n + 1 - k.min(n + 1));
        c
    }

    /// `Σ |cᵢ|·max(1, |x|)^{deg−i}`, the scale against which residuals are
    /// judged.
    fn magnitude(coeffs: &[f64], x: f64) -> f64 {
        let x = x.abs().max(1.0);
        coeffs.iter().fold(0.0, |acc, c| acc * x + c.abs())
    }

    /// Roots with repeated roots resolved: raw companion roots that fall
    /// within [`MERGE_RADIUS`] of each other are candidates for one `k`-fold
    /// root. A real candidate is refined by Newton steps on the `(k−1)`-th
    /// derivative, where it is a simple root, and accepted only if `p` and its
    /// first `k−1` derivatives all vanish there; otherwise the raw roots stay.
    pub fn polished_roots(&self) -> Vec<(f64, f64)> {
        let raw = self.roots();
        let mut cluster_of: Vec<usize> = (0..raw.len()).collect();
        fn find(c: &mut [usize], i: usize) -> usize {
            let mut i = i;
            while c[i] != i {
                c[i] = c[c[i]];
                i = c[i];
            }
            i
        }
        for i in 0..raw.len() {
            for j in i + 1..raw.len() {
                let (a, b) = (raw[i], raw[j]);
                let scale = a.0.hypot(a.1).max(b.0.hypot(b.1)).max(1.0);
                if (a.0 - b.0).hypot(a.1 - b.1) <= MERGE_RADIUS * scale {
                    let (ri, rj) = (find(&mut cluster_of, i), find(&mut cluster_of, j));
                    cluster_of[ri.max(rj)] = ri.min(rj);
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; raw.len()];
        for i in 0..raw.len() {
            let root = find(&mut cluster_of, i);
            if slot[root] == usize::MAX {
                slot[root] = groups.len();
                groups.push(Vec::new());
            }
            groups[slot[root]].push(i);
        }
        let mut out = Vec::with_capacity(raw.len());
        for members in groups {
            let k = members.len();
            let re = members.iter().map(|&i| raw[i].0).sum::<f64>() / k as f64;
            let im = members.iter().map(|&i| raw[i].1).sum::<f64>() / k as f64;
            if k > 1 && im.abs() <= IMAG_TOL {
                let f = MonicPolynomial(self.derivative_coeffs(k - 1));
                let df = MonicPolynomial(self.derivative_coeffs(k));
                let mut x = re;
                for _ in 0..50 {
                    let slope = df.eval(x);
                    if slope == 0.0 {
                        break;
                    }
                    let step = f.eval(x) / slope;
                    x -= step;
                    if step.abs() <= 1e-15 * x.abs().max(1.0) {
                        break;
                    }
                }
                let vanishes = (0..k).all(|j| {
                    let c = self.derivative_coeffs(j);
                    MonicPolynomial(c.clone()).eval(x).abs() <= 1e-7 * Self::magnitude(&c, x).max(1e-300)
                });
                if vanishes && (x - re).abs() <= MERGE_RADIUS * re.abs().max(1.0) {
                    out.extend(std::iter::repeat_n((x, 0.0), k));
                } else {
                    out.extend(members.iter().map(|&i| raw[i]));
                }
            } else if k > 1 {
                out.extend(std::iter::repeat_n((re, im), k));
            } else {
                out.push(raw[members[0]]);
            }
        }
        out
    }

    /// All roots as `(re, im)`, from the eigenvalues of the companion matrix.
    pub fn roots(&self) -> Vec<(f64, f64)> {
        let n = self.degree();
        if n == 0 {
            return Vec::new();
        }
        let mut companion = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            companion[(0, j)] = -self.0[j + 1];
        }
        for i in 1..n {
            companion[(i, i - 1)] = 1.0;
        }
        // nalgebra's default Schur iteration is unbounded and can stall on
        // companion matrices with clustered roots.
        match Schur::try_new(companion, f64::EPSILON, SCHUR_MAX_ITER) {
            Some(schur) => schur.complex_eigenvalues().iter().map(|c| (c.re, c.im)).collect(),
            None => self.aberth_roots(),
        }
    }

    /// Aberth–Ehrlich simultaneous iteration, used when Schur does not converge.
    fn aberth_roots(&self) -> Vec<(f64, f64)> {
        let n = self.degree();
        let c: Vec<Complex<f64>> = self.0.iter().map(|&a| Complex::new(a, 0.0)).collect();
        let eval = |x: Complex<f64>| {
            let (mut p, mut dp) = (Complex::new(0.0, 0.0), Complex::new(0.0, 0.0));
            for a in &c {
                dp = dp * x + p;
                p = p * x + a;
            }
            (p, dp)
        };
        // Cauchy bound for the initial circle
        let radius = 1.0 + self.0[1..].iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let mut z: Vec<Complex<f64>> = (0..n)
            .map(|k| Complex::from_polar(radius, 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64))
            .collect();
        for _ in 0..ABERTH_MAX_ITER {
            let mut moved = 0.0f64;
            for i in 0..n {
                let (p, dp) = eval(z[i]);
                if p.norm() == 0.0 {
                    continue;
                }
                let ratio = p / dp;
                let repulsion: Complex<f64> =
                    (0..n).filter(|&j| j != i).map(|j| Complex::new(1.0, 0.0) / (z[i] - z[j])).sum();
                let step = ratio / (Complex::new(1.0, 0.0) - ratio * repulsion);
                if step.is_finite() {
                    z[i] -= step;
                    moved = moved.max(step.norm() / z[i].norm().max(1.0));
                }
            }
            if moved < 1e-15 {
                break;
            }
        }
        z.into_iter().map(|c| (c.re, c.im)).collect()
    }
}

/// Traces of `A(z)^k`, `k = 1..=n`.
pub fn power_sums(g: &WeightedDigraph, z: f64) -> Result<PowerSums, SpectralError> {
    let a = evaluate_network(g, z)?.0;
    let n = g.order();
    let mut p = DMatrix::<f64>::identity(n, n);
    let mut s = Vec::with_capacity(n);
    for _ in 0..n {
        p = &p * &a;
        s.push(p.trace());
    }
    Ok(PowerSums(s))
}

/// Newton's identities: `k·e_k = Σ_{i=1..k} (−1)^{i−1} e_{k−i} s_i`, and
/// `p(z) = Σ (−1)^k e_k z^{n−k}`.
pub fn charpoly_from_power_sums(s: &PowerSums) -> Result<MonicPolynomial, SpectralError> {
    if s.is_empty() {
        return Err(SpectralError::Empty);
    }
    let n = s.len();
    let mut e = vec![0.0; n + 1];
    e[0] = 1.0;
    for k in 1..=n {
        let mut acc = 0.0;
        for i in 1..=k {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            acc += sign * e[k - i] * s.0[i - 1];
        }
        e[k] = acc / k as f64;
    }
    Ok(MonicPolynomial(
        e.iter()
            .enumerate()
            .map(|(k, ek)| if k % 2 == 0 { *ek } else { -ek })
            .collect(),
    ))
}

/// The `(n+1)×(n+1)` numeric block of the determinant below its first row:
/// row `k` (1-based) is `s_k, s_{k−1}, …, s₁, k, 0, …`.
fn gould_lower_rows(s: &PowerSums) -> Vec<Vec<f64>> {
    let n = s.len();
    (1..=n)
        .map(|k| {
            let mut row = vec![0.0; n + 1];
            for (j, slot) in row.iter_mut().enumerate().take(k) {
                *slot = s.0[k - 1 - j];
            }
            row[k] = k as f64;
            row
        })
        .collect()
}

fn laplace_det(m: &[Vec<f64>]) -> f64 {
    match m.len() {
        0 => 1.0,
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        n => {
            let mut det = 0.0;
            for j in 0..n {
                if m[0][j] == 0.0 {
                    continue;
                }
                let minor: Vec<Vec<f64>> = m[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|&(c, _)| c != j).map(|(_, &v)| v).collect())
                    .collect();
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                det += sign * m[0][j] * laplace_det(&minor);
            }
            det
        }
    }
}

/// Coefficients of `det C(z) / n!` by cofactor expansion along the row of
/// powers of `z`; each cofactor is itself a Laplace-expanded minor.
pub fn charpoly_by_determinant(s: &PowerSums) -> Result<MonicPolynomial, SpectralError> {
    let n = s.len();
    if n == 0 {
        return Err(SpectralError::Empty);
    }
    if n > DETERMINANT_MAX_ORDER {
        return Err(SpectralError::TooLarge(n));
    }
    let rows = gould_lower_rows(s);
    let factorial: f64 = (1..=n).map(|k| k as f64).product();
    let coeffs = (0..=n)
        .map(|j| {
            let minor: Vec<Vec<f64>> = rows
                .iter()
                .map(|row| row.iter().enumerate().filter(|&(c, _)| c != j).map(|(_, &v)| v).collect())
                .collect();
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * laplace_det(&minor) / factorial
        })
        .collect();
    Ok(MonicPolynomial(coeffs))
}

/// Eigenvalues with multiplicities, sorted by descending real part.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub z: f64,
    /// Real parts, descending.
    pub eigenvalues: Vec<f64>,
    /// Imaginary parts matching `eigenvalues`; zero for real roots.
    pub imaginary: Vec<f64>,
    /// `(value, multiplicity)` clusters of the real roots.
    pub multiplicities: Vec<(f64, usize)>,
    /// Some root has `|Im| > IMAG_TOL`.
    pub non_real: bool,
}

impl Spectrum {
    pub fn from_roots(z: f64, roots: Vec<(f64, f64)>) -> Self {
        let mut roots: Vec<(f64, f64)> = roots
            .into_iter()
            .map(|(re, im)| if im.abs() <= IMAG_TOL { (re, 0.0) } else { (re, im) })
            .collect();
        roots.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
        let non_real = roots.iter().any(|r| r.1 != 0.0);
        let mut multiplicities: Vec<(f64, usize)> = Vec::new();
        let mut members: Vec<f64> = Vec::new();
        for &(re, im) in &roots {
            if im != 0.0 {
                continue;
            }
            match multiplicities.last_mut() {
                Some((value, count)) if (members.last().unwrap() - re).abs() <= CLUSTER_TOL => {
                    *count += 1;
                    members.push(re);
                    *value = members[members.len() - *count..].iter().sum::<f64>() / *count as f64;
                }
                _ => {
                    multiplicities.push((re, 1));
                    members.push(re);
                }
            }
        }
        Self {
            z,
            eigenvalues: roots.iter().map(|r| r.0).collect(),
            imaginary: roots.iter().map(|r| r.1).collect(),
            multiplicities,
            non_real,
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `Σ |θᵢ − θ'ᵢ|` over the sorted (complex) eigenvalues.
    pub fn distance(&self, other: &Spectrum) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.imaginary)
            .zip(other.eigenvalues.iter().zip(&other.imaginary))
            .map(|((a, ai), (b, bi))| (a - b).hypot(ai - bi))
            .sum()
    }
}

/// Spectrum of `A(z)` recovered from its trace power sums.
pub fn spectrum(g: &WeightedDigraph, z: f64) -> Result<Spectrum, SpectralError> {
    if g.order() == 0 {
        return Ok(Spectrum::from_roots(z, Vec::new()));
    }
    let poly = charpoly_from_power_sums(&power_sums(g, z)?)?;
    Ok(Spectrum::from_roots(z, poly.polished_roots()))
}

/// Distance between the spectra at `z` and at `1`.
pub fn spectrum_deviation(g: &WeightedDigraph, z: f64) -> Result<f64, SpectralError> {
    Ok(spectrum(g, z)?.distance(&spectrum(g, 1.0)?))
}

/// Eigenvalues of the symmetric `A(1)` by direct decomposition, descending.
pub fn adjacency_spectrum(g: &WeightedDigraph) -> Result<Vec<f64>, SpectralError> {
    let a = evaluate_network(g, 1.0)?.0;
    let mut values: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}
