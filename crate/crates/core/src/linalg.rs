//! Dense complex matrices with tensor-factor bookkeeping.
//!
//! Every object downstream — spiders, channels, dilations, protocol states —
//! is a [`ComplexMatrix`]: a row-major dense matrix of `Complex<f64>` entries.
//! This module provides the structural operations (Kronecker products,
//! composition, partial traces over tensor factors) and the two operator
//! norms the security bounds are phrased in (largest singular value and sum
//! of singular values), plus the Hermitian eigendecomposition and polar
//! decomposition that back purification and unitary fitting.
//!
//! Composite indices are big-endian throughout: for factor dimensions
//! `(d1, ..., dk)` the first factor is most significant, so the multi-index
//! `(i1, ..., ik)` maps to `((i1 * d2 + i2) * d3 + ...) ...`. All
//! tensor-aware operations in this crate assume this convention.

use nalgebra::DMatrix;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub type Complex64 = num_complex::Complex<f64>;

/// Shorthand for a real complex number.
pub fn cplx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Errors from the dense linear-algebra layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("entry count {found} does not match {rows}x{cols}")]
    BadEntryCount { rows: usize, cols: usize, found: usize },
    #[error("matrix entries must be finite")]
    NonFinite,
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian: deviation {deviation:e} exceeds tolerance {tol:e}")]
    NotHermitian { deviation: f64, tol: f64 },
    #[error("factor shape {factors:?} is inconsistent with dimension {dim}")]
    ShapeMismatch { factors: Vec<usize>, dim: usize },
    #[error("factor index {index} out of range for {count} factors")]
    FactorIndexOutOfRange { index: usize, count: usize },
    #[error("zero-sized matrix dimensions are not allowed")]
    ZeroDimension,
}

/// Ordered list of subsystem dimensions annotating a composite index.
///
/// The product of the factors must equal the matrix dimension it describes;
/// factor 0 is the most significant digit of the composite index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorShape {
    factors: Vec<usize>,
}

impl FactorShape {
    pub fn new(factors: Vec<usize>) -> Result<Self, LinalgError> {
        if factors.contains(&0) {
            return Err(LinalgError::ZeroDimension);
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    /// Total dimension, i.e. the product of all factors.
    pub fn total_dim(&self) -> usize {
        self.factors.iter().product()
    }

    /// Decompose a composite index into per-factor digits (big-endian).
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.factors.len()];
        for (slot, &d) in out.iter_mut().zip(&self.factors).rev() {
            *slot = index % d;
            index /= d;
        }
        out
    }

    /// Recombine per-factor digits into a composite index (big-endian).
    pub fn index(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.factors.len());
        digits
            .iter()
            .zip(&self.factors)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }
}

/// Dense complex matrix, row-major storage.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl std::fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            write!(f, "  ")?;
            for j in 0..self.cols.min(8) {
                let z = self[(i, j)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f, "{}", if self.cols > 8 { "..." } else { "" })?;
        }
        if self.rows > 8 {
            writeln!(f, "  ...")?;
        }
        write!(f, "]")
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

impl ComplexMatrix {
    /// Build a matrix from row-major entries, validating shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::ZeroDimension);
        }
        if data.len() != rows * cols {
            return Err(LinalgError::BadEntryCount { rows, cols, found: data.len() });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::ZERO; rows * cols] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Build from nested rows; all rows must have equal length.
    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self, LinalgError> {
        let r = rows.len();
        if r == 0 {
            return Err(LinalgError::ZeroDimension);
        }
        let c = rows[0].len();
        if rows.iter().any(|row| row.len() != c) {
            return Err(LinalgError::DimensionMismatch("ragged rows".into()));
        }
        Self::new(r, c, rows.into_iter().flatten().collect())
    }

    pub fn diagonal(entries: &[Complex64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &z) in entries.iter().enumerate() {
            m[(i, i)] = z;
        }
        m
    }

    /// The 1x1 matrix holding a single scalar.
    pub fn scalar(z: Complex64) -> Self {
        Self { rows: 1, cols: 1, data: vec![z] }
    }

    /// Standard basis column vector |i> of the given dimension.
    pub fn basis_column(dim: usize, i: usize) -> Self {
        let mut m = Self::zeros(dim, 1);
        m[(i, 0)] = Complex64::ONE;
        m
    }

    /// Column vector from entries.
    pub fn column(entries: &[Complex64]) -> Self {
        Self { rows: entries.len(), cols: 1, data: entries.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    fn require_square(&self) -> Result<(), LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare { rows: self.rows, cols: self.cols });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&z| f(z)).collect() }
    }

    pub fn scale(&self, z: Complex64) -> Self {
        self.map(|w| w * z)
    }

    pub fn add(&self, other: &Self) -> Result<Self, LinalgError> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, LinalgError> {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self, LinalgError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Matrix product `self * g`, i.e. `self` applied after `g` in diagram order.
    pub fn compose(&self, g: &Self) -> Result<Self, LinalgError> {
        if self.cols != g.rows {
            return Err(LinalgError::DimensionMismatch(format!(
                "compose: inner dimensions {} vs {}",
                self.cols, g.rows
            )));
        }
        let (m, k, n) = (self.rows, self.cols, g.cols);
        let mut out = vec![Complex64::ZERO; m * n];
        // i-k-j loop order keeps both operands streaming row-major.
        let work = |(i, out_row): (usize, &mut [Complex64])| {
            let a_row = &self.data[i * k..(i + 1) * k];
            for (kk, &a) in a_row.iter().enumerate() {
                if a == Complex64::ZERO {
                    continue;
                }
                let g_row = &g.data[kk * n..(kk + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(g_row) {
                    *o += a * b;
                }
            }
        };
        if m * k * n >= 1 << 21 {
            use rayon::prelude::*;
            out.par_chunks_mut(n).enumerate().for_each(work);
        } else {
            out.chunks_mut(n).enumerate().for_each(work);
        }
        Ok(Self { rows: m, cols: n, data: out })
    }

    /// Kronecker product with `self`'s indices most significant.
    pub fn tensor(&self, b: &Self) -> Self {
        let rows = self.rows * b.rows;
        let cols = self.cols * b.cols;
        let mut data = vec![Complex64::ZERO; rows * cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                if a == Complex64::ZERO {
                    continue;
                }
                for p in 0..b.rows {
                    let dst = (i * b.rows + p) * cols + j * b.cols;
                    let src = p * b.cols;
                    for q in 0..b.cols {
                        data[dst + q] = a * b.data[src + q];
                    }
                }
            }
        }
        Self { rows, cols, data }
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn trace(&self) -> Result<Complex64, LinalgError> {
        self.require_square()?;
        Ok((0..self.rows).map(|i| self[(i, i)]).sum())
    }

    /// Hilbert-Schmidt inner product `Tr(self^dagger * other)`.
    pub fn hs_inner(&self, other: &Self) -> Result<Complex64, LinalgError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(LinalgError::DimensionMismatch("hs_inner".into()));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest absolute entry-wise difference; errors on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64, LinalgError> {
        Ok(self.sub(other)?.max_abs())
    }

    /// Trace over the listed tensor factors; remaining factors keep their order.
    ///
    /// `shape` must describe both the row and column index of a square matrix.
    /// Tracing over every factor leaves a 1x1 matrix holding the full trace.
    pub fn partial_trace(&self, shape: &FactorShape, traced: &[usize]) -> Result<Self, LinalgError> {
        self.require_square()?;
        if shape.total_dim() != self.rows {
            return Err(LinalgError::ShapeMismatch {
                factors: shape.factors().to_vec(),
                dim: self.rows,
            });
        }
        for &t in traced {
            if t >= shape.num_factors() {
                return Err(LinalgError::FactorIndexOutOfRange {
                    index: t,
                    count: shape.num_factors(),
                });
            }
        }
        let is_traced: Vec<bool> = (0..shape.num_factors()).map(|f| traced.contains(&f)).collect();
        let kept_dims: Vec<usize> = shape
            .factors()
            .iter()
            .zip(&is_traced)
            .filter(|(_, &t)| !t)
            .map(|(&d, _)| d)
            .collect();
        let traced_dims: Vec<usize> = shape
            .factors()
            .iter()
            .zip(&is_traced)
            .filter(|(_, &t)| t)
            .map(|(&d, _)| d)
            .collect();
        let kept_total: usize = kept_dims.iter().product();
        let traced_total: usize = traced_dims.iter().product();

        // Precompute the full composite index for (kept digits, traced digits).
        let kept_shape = FactorShape::new(if kept_dims.is_empty() { vec![1] } else { kept_dims })?;
        let traced_shape =
            FactorShape::new(if traced_dims.is_empty() { vec![1] } else { traced_dims })?;
        let full_index = |kept: usize, tr: usize| -> usize {
            let kd = kept_shape.digits(kept);
            let td = traced_shape.digits(tr);
            let (mut ki, mut ti) = (0, 0);
            let mut digits = Vec::with_capacity(shape.num_factors());
            for &traced_here in &is_traced {
                if traced_here {
                    digits.push(td[ti]);
                    ti += 1;
                } else {
                    digits.push(kd[ki]);
                    ki += 1;
                }
            }
            shape.index(&digits)
        };

        let mut out = Self::zeros(kept_total.max(1), kept_total.max(1));
        for r in 0..kept_total {
            for c in 0..kept_total {
                let mut acc = Complex64::ZERO;
                for t in 0..traced_total {
                    acc += self[(full_index(r, t), full_index(c, t))];
                }
                out[(r, c)] = acc;
            }
        }
        Ok(out)
    }

    /// Reorder tensor factors of an operator: factor `perm[k]` of the input
    /// becomes factor `k` of the output (rows and columns alike).
    pub fn permute_factors(&self, shape: &FactorShape, perm: &[usize]) -> Result<Self, LinalgError> {
        let p = permutation_matrix(shape, perm)?;
        if self.is_square() && self.rows == shape.total_dim() {
            p.compose(self)?.compose(&p.dagger())
        } else {
            Err(LinalgError::ShapeMismatch {
                factors: shape.factors().to_vec(),
                dim: self.rows,
            })
        }
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_iterator(self.rows, self.cols, self.data.iter().copied())
    }

    /// Singular values in descending order, as square roots of the Gram
    /// matrix spectrum. The Gram route keeps left/right singular spaces
    /// consistent under degeneracies, which the plain complex SVD does not
    /// guarantee numerically.
    pub fn singular_values(&self) -> Vec<f64> {
        let gram = self.dagger().compose(self).expect("gram product");
        let eig = gram.hermitian_eig().expect("gram is Hermitian");
        eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect()
    }

    /// Operator norm: the largest singular value.
    pub fn operator_norm(&self) -> f64 {
        self.singular_values().first().copied().unwrap_or(0.0)
    }

    /// Trace norm of a square matrix: the sum of singular values.
    ///
    /// Hermitian inputs take the exact eigenvalue route, which avoids the
    /// sqrt(eps) noise floor of the Gram spectrum on small singular values.
    pub fn trace_norm(&self) -> Result<f64, LinalgError> {
        self.require_square()?;
        if let Ok(eig) = self.hermitian_eig() {
            return Ok(eig.eigenvalues.iter().map(|l| l.abs()).sum());
        }
        Ok(self.singular_values().iter().sum())
    }

    /// Hermitian eigendecomposition `self = V diag(lambda) V^dagger`.
    ///
    /// The input must be Hermitian up to `1e-12` relative to its operator
    /// norm; it is symmetrized as `(m + m^dagger)/2` before decomposition.
    /// Eigenvalues come out in descending order with matching eigenvector
    /// columns.
    pub fn hermitian_eig(&self) -> Result<HermitianEig, LinalgError> {
        self.require_square()?;
        let deviation = self.sub(&self.dagger())?.max_abs();
        let scale = self.max_abs().max(1.0);
        let tol = HERMITICITY_TOL * scale;
        if deviation > tol {
            return Err(LinalgError::NotHermitian { deviation, tol });
        }
        let sym = self.add(&self.dagger())?.scale(cplx(0.5, 0.0));
        let eig = sym.to_nalgebra().symmetric_eigen();
        let n = self.rows;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let eigenvectors = Self::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Ok(HermitianEig { eigenvalues, eigenvectors })
    }

    /// Unitary polar factor `W = P Q^dagger` from the singular decomposition
    /// `self = P S Q^dagger`; `W` maximizes `Re Tr(W^dagger * self)` over
    /// all unitaries.
    ///
    /// Built from the Gram eigendecomposition: right singular vectors from
    /// `M^dagger M`, left ones as `M q_i / s_i`, with the null space
    /// completed to a unitary by orthogonalization. This pairing stays
    /// consistent when singular values are degenerate.
    pub fn polar_unitary(&self) -> Result<Self, LinalgError> {
        self.require_square()?;
        let n = self.rows;
        let gram = self.dagger().compose(self)?;
        let eig = gram.hermitian_eig()?;
        let sigma_max = eig.eigenvalues.first().copied().unwrap_or(0.0).max(0.0).sqrt();
        let cutoff = (sigma_max * 1e-12).max(1e-300);
        let mut left_cols: Vec<Option<ComplexMatrix>> = Vec::with_capacity(n);
        for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
            let sigma = lambda.max(0.0).sqrt();
            if sigma > cutoff {
                let q = eig.eigenvector(i);
                left_cols.push(Some(self.compose(&q)?.scale(cplx(1.0 / sigma, 0.0))));
            } else {
                left_cols.push(None);
            }
        }
        complete_orthonormal(&mut left_cols, n);
        let mut p = Self::zeros(n, n);
        for (j, col) in left_cols.iter().enumerate() {
            let col = col.as_ref().expect("completed column");
            for i in 0..n {
                p[(i, j)] = col[(i, 0)];
            }
        }
        p.compose(&eig.eigenvectors.dagger())
    }
}

/// Result of a Hermitian eigendecomposition; eigenvalues descending,
/// eigenvector `j` in column `j`.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEig {
    /// Column `j` of the eigenvector matrix.
    pub fn eigenvector(&self, j: usize) -> ComplexMatrix {
        let n = self.eigenvectors.rows();
        ComplexMatrix::from_fn(n, 1, |i, _| self.eigenvectors[(i, j)])
    }
}

/// Absolute Hermiticity tolerance, relative to the operator scale.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Fill `None` slots with unit vectors orthogonal to every present column.
/// Each slot takes the canonical basis vector with the largest remainder
/// after two Gram-Schmidt passes.
fn complete_orthonormal(cols: &mut [Option<ComplexMatrix>], n: usize) {
    for slot in 0..cols.len() {
        if cols[slot].is_some() {
            continue;
        }
        let mut best: Option<(f64, ComplexMatrix)> = None;
        for cand in 0..n {
            let mut v = ComplexMatrix::basis_column(n, cand);
            for _ in 0..2 {
                for other in cols.iter().flatten() {
                    let overlap = other.hs_inner(&v).expect("inner");
                    v = v.sub(&other.scale(overlap)).expect("projection");
                }
            }
            let norm = v.frobenius_norm();
            if best.as_ref().is_none_or(|(b, _)| norm > *b) {
                best = Some((norm, v));
            }
        }
        let (norm, v) = best.expect("candidate exists");
        assert!(norm > 1e-8, "orthogonal completion degenerated");
        cols[slot] = Some(v.scale(cplx(1.0 / norm, 0.0)));
    }
}

/// Unitary permutation matrix sending basis vector `|i_0 ... i_{k-1}>` of the
/// input factor order to the output order described by `perm` (output factor
/// `k` is input factor `perm[k]`).
pub fn permutation_matrix(shape: &FactorShape, perm: &[usize]) -> Result<ComplexMatrix, LinalgError> {
    let k = shape.num_factors();
    if perm.len() != k {
        return Err(LinalgError::DimensionMismatch(format!(
            "permutation length {} vs {} factors",
            perm.len(),
            k
        )));
    }
    let mut seen = vec![false; k];
    for &p in perm {
        if p >= k || seen[p] {
            return Err(LinalgError::FactorIndexOutOfRange { index: p, count: k });
        }
        seen[p] = true;
    }
    let out_dims: Vec<usize> = perm.iter().map(|&p| shape.factors()[p]).collect();
    let out_shape = FactorShape::new(out_dims)?;
    let dim = shape.total_dim();
    let mut m = ComplexMatrix::zeros(dim, dim);
    for src in 0..dim {
        let digits = shape.digits(src);
        let permuted: Vec<usize> = perm.iter().map(|&p| digits[p]).collect();
        m[(out_shape.index(&permuted), src)] = Complex64::ONE;
    }
    Ok(m)
}

/// Unnormalized maximally entangled column vector `sum_i |ii>` on dim^2.
pub fn unnormalized_omega(dim: usize) -> ComplexMatrix {
    let mut v = ComplexMatrix::zeros(dim * dim, 1);
    for i in 0..dim {
        v[(i * dim + i, 0)] = Complex64::ONE;
    }
    v
}

// Serialize as row-major nested arrays of [re, im] pairs.
impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.rows)
            .map(|i| (0..self.cols).map(|j| [self[(i, j)].re, self[(i, j)].im]).collect())
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(deserializer)?;
        let nested: Vec<Vec<Complex64>> = rows
            .into_iter()
            .map(|r| r.into_iter().map(|[re, im]| cplx(re, im)).collect())
            .collect();
        ComplexMatrix::from_rows(nested).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use rand::Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
        let mut rng = substream(seed, 0);
        ComplexMatrix::from_fn(rows, cols, |_, _| {
            cplx(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn random_hermitian(dim: usize, seed: u64) -> ComplexMatrix {
        let m = random_matrix(dim, dim, seed);
        m.add(&m.dagger()).unwrap().scale(cplx(0.5, 0.0))
    }

    #[test]
    fn tensor_identities() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(i2.tensor(&i2), ComplexMatrix::identity(4));
        let a = ComplexMatrix::diagonal(&[cplx(1.0, 0.0), cplx(2.0, 0.0)]);
        let b = ComplexMatrix::diagonal(&[cplx(3.0, 0.0), cplx(4.0, 0.0)]);
        let expected =
            ComplexMatrix::diagonal(&[cplx(3.0, 0.0), cplx(4.0, 0.0), cplx(6.0, 0.0), cplx(8.0, 0.0)]);
        assert_eq!(a.tensor(&b), expected);
    }

    #[test]
    fn tensor_matches_index_oracle() {
        let a = random_matrix(2, 2, 11);
        let b = random_matrix(3, 3, 12);
        let t = a.tensor(&b);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..3 {
                    for l in 0..3 {
                        let got = t[(i * 3 + k, j * 3 + l)];
                        let want = a[(i, j)] * b[(k, l)];
                        assert!((got - want).norm() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn compose_identity_and_inner_product() {
        let m = random_matrix(3, 3, 13);
        let id = ComplexMatrix::identity(3);
        assert!(id.compose(&m).unwrap().max_abs_diff(&m).unwrap() < 1e-15);
        let bra = ComplexMatrix::from_fn(1, 2, |_, j| cplx(j as f64, 1.0));
        let ket = ComplexMatrix::from_fn(2, 1, |i, _| cplx(1.0, i as f64));
        let s = bra.compose(&ket).unwrap();
        assert_eq!(s.rows(), 1);
        assert_eq!(s.cols(), 1);
        let want = cplx(0.0, 1.0) * cplx(1.0, 0.0) + cplx(1.0, 1.0) * cplx(1.0, 1.0);
        assert!((s[(0, 0)] - want).norm() < 1e-14);
    }

    #[test]
    fn compose_associativity() {
        let a = random_matrix(3, 4, 21);
        let b = random_matrix(4, 2, 22);
        let c = random_matrix(2, 5, 23);
        let left = a.compose(&b).unwrap().compose(&c).unwrap();
        let right = a.compose(&b.compose(&c).unwrap()).unwrap();
        assert!(left.max_abs_diff(&right).unwrap() < 1e-12);
    }

    #[test]
    fn compose_dimension_mismatch() {
        let a = random_matrix(2, 3, 1);
        let b = random_matrix(2, 3, 2);
        assert!(matches!(a.compose(&b), Err(LinalgError::DimensionMismatch(_))));
    }

    #[test]
    fn dagger_involution_and_cases() {
        let i3 = ComplexMatrix::identity(3);
        assert_eq!(i3.dagger(), i3);
        let n = ComplexMatrix::from_rows(vec![
            vec![Complex64::ZERO, Complex64::ONE],
            vec![Complex64::ZERO, Complex64::ZERO],
        ])
        .unwrap();
        let nt = ComplexMatrix::from_rows(vec![
            vec![Complex64::ZERO, Complex64::ZERO],
            vec![Complex64::ONE, Complex64::ZERO],
        ])
        .unwrap();
        assert_eq!(n.dagger(), nt);
        let m = random_matrix(4, 3, 31);
        assert!(m.dagger().dagger().max_abs_diff(&m).unwrap() == 0.0);
    }

    #[test]
    fn partial_trace_product_state() {
        let a = random_hermitian(2, 41);
        let b = random_hermitian(3, 42);
        let ab = a.tensor(&b);
        let shape = FactorShape::new(vec![2, 3]).unwrap();
        let got = ab.partial_trace(&shape, &[1]).unwrap();
        let want = a.scale(b.trace().unwrap());
        assert!(got.max_abs_diff(&want).unwrap() < 1e-12);
        // Tracing the first factor instead leaves Tr(a) * b.
        let got0 = ab.partial_trace(&shape, &[0]).unwrap();
        assert!(got0.max_abs_diff(&b.scale(a.trace().unwrap())).unwrap() < 1e-12);
    }

    #[test]
    fn partial_trace_maximally_entangled() {
        let d = 3;
        let omega = unnormalized_omega(d).scale(cplx(1.0 / (d as f64).sqrt(), 0.0));
        let rho = omega.compose(&omega.dagger()).unwrap();
        let shape = FactorShape::new(vec![d, d]).unwrap();
        let marginal = rho.partial_trace(&shape, &[1]).unwrap();
        let want = ComplexMatrix::identity(d).scale(cplx(1.0 / d as f64, 0.0));
        assert!(marginal.max_abs_diff(&want).unwrap() < 1e-12);
    }

    #[test]
    fn partial_trace_index_sum_oracle() {
        let rho = random_hermitian(4, 43);
        let shape = FactorShape::new(vec![2, 2]).unwrap();
        let got = rho.partial_trace(&shape, &[1]).unwrap();
        // Independent index-sum oracle: (tr_2 rho)[i][j] = sum_k rho[ik][jk].
        for i in 0..2 {
            for j in 0..2 {
                let want: Complex64 = (0..2).map(|k| rho[(2 * i + k, 2 * j + k)]).sum();
                assert!((got[(i, j)] - want).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn partial_trace_all_factors_is_trace() {
        let rho = random_hermitian(6, 44);
        let shape = FactorShape::new(vec![2, 3]).unwrap();
        let t = rho.partial_trace(&shape, &[0, 1]).unwrap();
        assert_eq!(t.rows(), 1);
        assert!((t[(0, 0)] - rho.trace().unwrap()).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_errors() {
        let rho = random_hermitian(4, 45);
        let shape = FactorShape::new(vec![2, 2]).unwrap();
        assert!(matches!(
            rho.partial_trace(&shape, &[2]),
            Err(LinalgError::FactorIndexOutOfRange { .. })
        ));
        let bad = FactorShape::new(vec![3, 2]).unwrap();
        assert!(matches!(rho.partial_trace(&bad, &[0]), Err(LinalgError::ShapeMismatch { .. })));
    }

    #[test]
    fn operator_norm_cases() {
        assert!((ComplexMatrix::identity(5).operator_norm() - 1.0).abs() < 1e-12);
        let d = ComplexMatrix::diagonal(&[cplx(3.0, 0.0), cplx(-4.0, 0.0)]);
        assert!((d.operator_norm() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn operator_norm_matches_eigen_oracle() {
        for seed in 0..5 {
            let m = random_matrix(5, 5, 100 + seed);
            let gram = m.dagger().compose(&m).unwrap();
            let top = gram.hermitian_eig().unwrap().eigenvalues[0].max(0.0).sqrt();
            let rel = (m.operator_norm() - top).abs() / top.max(1e-300);
            assert!(rel < 1e-10, "relative error {rel}");
        }
    }

    #[test]
    fn trace_norm_cases() {
        let d = ComplexMatrix::diagonal(&[Complex64::ONE, -Complex64::ONE]);
        assert!((d.trace_norm().unwrap() - 2.0).abs() < 1e-12);
        // A density matrix has trace norm 1.
        let h = random_hermitian(3, 51);
        let sq = h.compose(&h.dagger()).unwrap();
        let rho = sq.scale(cplx(1.0 / sq.trace().unwrap().re, 0.0));
        assert!((rho.trace_norm().unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn trace_norm_matches_eigen_oracle() {
        let h = random_hermitian(5, 52);
        let want: f64 = h.hermitian_eig().unwrap().eigenvalues.iter().map(|l| l.abs()).sum();
        assert!((h.trace_norm().unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn trace_norm_at_least_operator_norm() {
        for seed in 0..5 {
            let m = random_matrix(4, 4, 200 + seed);
            assert!(m.trace_norm().unwrap() >= m.operator_norm() - 1e-12);
        }
    }

    #[test]
    fn hermitian_eig_cases() {
        let eig = ComplexMatrix::identity(2).hermitian_eig().unwrap();
        assert!((eig.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!((eig.eigenvalues[1] - 1.0).abs() < 1e-12);
        let z = ComplexMatrix::diagonal(&[Complex64::ONE, -Complex64::ONE]);
        let eig = z.hermitian_eig().unwrap();
        assert!((eig.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!((eig.eigenvalues[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn hermitian_eig_reconstruction() {
        let h = random_hermitian(6, 61);
        let eig = h.hermitian_eig().unwrap();
        let v = &eig.eigenvectors;
        let vtv = v.dagger().compose(v).unwrap();
        assert!(vtv.max_abs_diff(&ComplexMatrix::identity(6)).unwrap() < 1e-10);
        let lambda =
            ComplexMatrix::diagonal(&eig.eigenvalues.iter().map(|&l| cplx(l, 0.0)).collect::<Vec<_>>());
        let recon = v.compose(&lambda).unwrap().compose(&v.dagger()).unwrap();
        let err = recon.max_abs_diff(&h).unwrap();
        assert!(err <= 1e-10 * h.operator_norm().max(1.0), "reconstruction error {err}");
        // Descending order.
        for w in eig.eigenvalues.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn hermitian_eig_rejects_non_hermitian() {
        let m = random_matrix(3, 3, 62);
        assert!(matches!(m.hermitian_eig(), Err(LinalgError::NotHermitian { .. })));
    }

    #[test]
    fn polar_unitary_fixed_points() {
        // A unitary input is returned unchanged.
        let h = random_hermitian(3, 71);
        let u = {
            let eig = h.hermitian_eig().unwrap();
            let phases = ComplexMatrix::diagonal(
                &eig.eigenvalues.iter().map(|&l| cplx(0.0, l).exp()).collect::<Vec<_>>(),
            );
            eig.eigenvectors.compose(&phases).unwrap().compose(&eig.eigenvectors.dagger()).unwrap()
        };
        let w = u.polar_unitary().unwrap();
        assert!(w.max_abs_diff(&u).unwrap() < 1e-10);
        // A positive scaling of the identity gives the identity.
        let two_i = ComplexMatrix::identity(4).scale(cplx(2.0, 0.0));
        assert!(two_i.polar_unitary().unwrap().max_abs_diff(&ComplexMatrix::identity(4)).unwrap() < 1e-12);
    }

    #[test]
    fn polar_unitary_maximizes_overlap() {
        let m = random_matrix(3, 3, 72);
        let w = m.polar_unitary().unwrap();
        let wtw = w.dagger().compose(&w).unwrap();
        assert!(wtw.max_abs_diff(&ComplexMatrix::identity(3)).unwrap() < 1e-10);
        let best = w.dagger().compose(&m).unwrap().trace().unwrap().re;
        let mut rng = substream(73, 0);
        for _ in 0..200 {
            let g = ComplexMatrix::from_fn(3, 3, |_, _| {
                cplx(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let sample = g.polar_unitary().unwrap();
            let val = sample.dagger().compose(&m).unwrap().trace().unwrap().re;
            assert!(best >= val - 1e-9, "sampled unitary beat the polar factor");
        }
    }

    #[test]
    fn polar_unitary_of_weighted_phase_permutation() {
        // Regression: a phase-permutation with pairwise-degenerate weights.
        // The polar factor must be the bare phase-permutation; an SVD with
        // inconsistently paired singular subspaces returns something else.
        let r = 0.9249859095529;
        let s = 0.0750140904471;
        let phase = cplx(-0.523, 0.852);
        let phase = phase.unscale(phase.norm());
        let mut x = ComplexMatrix::zeros(4, 4);
        x[(0, 1)] = cplx(r, 0.0);
        x[(1, 0)] = phase * r;
        x[(2, 3)] = cplx(s, 0.0);
        x[(3, 2)] = phase * s;
        let w = x.polar_unitary().unwrap();
        let mut want = ComplexMatrix::zeros(4, 4);
        want[(0, 1)] = Complex64::ONE;
        want[(1, 0)] = phase;
        want[(2, 3)] = Complex64::ONE;
        want[(3, 2)] = phase;
        assert!(w.max_abs_diff(&want).unwrap() < 1e-10, "{w:?}");
    }

    #[test]
    fn polar_unitary_of_rank_deficient_matrix() {
        // Zero singular directions are completed to a genuine unitary.
        let mut x = ComplexMatrix::zeros(3, 3);
        x[(0, 0)] = cplx(2.0, 0.0);
        let w = x.polar_unitary().unwrap();
        let gram = w.dagger().compose(&w).unwrap();
        assert!(gram.max_abs_diff(&ComplexMatrix::identity(3)).unwrap() < 1e-12);
        assert!((w[(0, 0)] - Complex64::ONE).norm() < 1e-12);
    }

    #[test]
    fn permutation_matrix_swaps_factors() {
        let a = random_matrix(2, 2, 81);
        let b = random_matrix(3, 3, 82);
        let ab = a.tensor(&b);
        let shape = FactorShape::new(vec![2, 3]).unwrap();
        let swapped = ab.permute_factors(&shape, &[1, 0]).unwrap();
        assert!(swapped.max_abs_diff(&b.tensor(&a)).unwrap() < 1e-12);
    }

    #[test]
    fn interchange_law() {
        // compose(tensor(A,B), tensor(C,D)) = tensor(compose(A,C), compose(B,D))
        for seed in 0..5 {
            let a = random_matrix(2, 3, 300 + seed);
            let b = random_matrix(3, 2, 310 + seed);
            let c = random_matrix(3, 2, 320 + seed);
            let d = random_matrix(2, 4, 330 + seed);
            let lhs = a.tensor(&b).compose(&c.tensor(&d)).unwrap();
            let rhs = a.compose(&c).unwrap().tensor(&b.compose(&d).unwrap());
            assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-10);
        }
    }

    #[test]
    fn norm_product_rules() {
        for seed in 0..5 {
            let f = random_matrix(3, 3, 400 + seed);
            let g = random_matrix(3, 3, 410 + seed);
            let prod = f.compose(&g).unwrap();
            assert!(prod.operator_norm() <= f.operator_norm() * g.operator_norm() + 1e-9);
            let tens = f.tensor(&g);
            let want = f.operator_norm() * g.operator_norm();
            assert!((tens.operator_norm() - want).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_nonfinite_entries() {
        let res = ComplexMatrix::new(1, 1, vec![cplx(f64::NAN, 0.0)]);
        assert!(matches!(res, Err(LinalgError::NonFinite)));
    }

    #[test]
    fn serde_round_trip() {
        let m = random_matrix(2, 3, 91);
        let json = serde_json::to_string(&m).unwrap();
        let back: ComplexMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(m, back);
    }
}
