//! Dense linear algebra for the small matrices that show up in this crate
//! (dimension at most a few dozen): Jacobi symmetric eigendecomposition,
//! Cholesky, LU solves, and weighted norms.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};

/// Off-diagonal Frobenius threshold for Jacobi, relative to `‖S‖_F`.
pub const JACOBI_OFF_TOL: f64 = 1e-12;
/// Jacobi sweep cap.
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// LU singularity threshold, relative to the largest entry of the input.
pub const LU_PIVOT_TOL: f64 = 1e-12;

/// Dense row-major real matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting length mismatches
    /// and non-finite values.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(dim_mismatch(
                "Matrix::from_row_major",
                rows * cols,
                data.len(),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows. An empty outer slice gives a 0x0
    /// matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != ncols {
                return Err(dim_mismatch("Matrix::from_rows", ncols, r.len()));
            }
            data.extend_from_slice(r);
        }
        Self::from_row_major(nrows, ncols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Column vector.
    pub fn column_vector(v: &[f64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Matrix-vector product; panics on mismatched lengths.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "mul_vec: length mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// Checked matrix product.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(dim_mismatch(
                "Matrix::matmul",
                format!("{} rows on the right", self.cols),
                rhs.rows,
            ));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        Ok(out)
    }

    /// Copies `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Matrix) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    /// Kronecker product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &Matrix) -> Matrix {
        Matrix::from_fn(self.rows * rhs.rows, self.cols * rhs.cols, |i, j| {
            self[(i / rhs.rows, j / rhs.cols)] * rhs[(i % rhs.rows, j % rhs.cols)]
        })
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix{}x{} ", self.rows, self.cols)?;
        f.debug_list().entries(self.to_rows()).finish()
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs).expect("matrix product dimension mismatch")
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "matrix sum dimension mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            self.shape(),
            rhs.shape(),
            "matrix difference dimension mismatch"
        );
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

/// Real symmetric matrix stored as its packed lower triangle, so symmetry
/// holds exactly.
#[derive(Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    lower: Vec<f64>,
}

#[inline]
fn packed(i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    r * (r + 1) / 2 + c
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            lower: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diag(&vec![1.0; dim])
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut s = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            s.set(i, i, v);
        }
        s
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut s = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..=i {
                s.lower[packed(i, j)] = f(i, j);
            }
        }
        s
    }

    /// Symmetric part `(M + Mᵀ)/2` of a square matrix.
    pub fn from_matrix_sym_part(m: &Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(dim_mismatch(
                "SymmetricMatrix",
                "square",
                format!("{:?}", m.shape()),
            ));
        }
        if !m.is_finite() {
            return Err(Error::NonFinite("symmetric matrix"));
        }
        Ok(Self::from_fn(m.nrows(), |i, j| {
            0.5 * (m[(i, j)] + m[(j, i)])
        }))
    }

    /// Accepts a square matrix whose asymmetry is within `tol · (1 + ‖M‖_F)`.
    pub fn from_matrix(m: &Matrix, tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(dim_mismatch(
                "SymmetricMatrix",
                "square",
                format!("{:?}", m.shape()),
            ));
        }
        let scale = tol * (1.0 + m.frobenius_norm());
        for i in 0..m.nrows() {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > scale {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Self::from_matrix_sym_part(m)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::from_matrix(&Matrix::from_rows(rows)?, 1e-12)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.lower[packed(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.lower[packed(i, j)] = v;
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            lower: self.lower.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, rhs: &SymmetricMatrix) -> Self {
        assert_eq!(self.dim, rhs.dim);
        Self {
            dim: self.dim,
            lower: self
                .lower
                .iter()
                .zip(&rhs.lower)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..=i {
                let v = self.get(i, j);
                s += if i == j { v * v } else { 2.0 * v * v };
            }
        }
        s.sqrt()
    }

    /// Frobenius inner product `tr(S·T)`.
    pub fn inner(&self, rhs: &SymmetricMatrix) -> f64 {
        assert_eq!(self.dim, rhs.dim);
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..=i {
                let p = self.get(i, j) * rhs.get(i, j);
                s += if i == j { p } else { 2.0 * p };
            }
        }
        s
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim);
        let mut s = 0.0;
        for i in 0..self.dim {
            s += self.get(i, i) * x[i] * x[i];
            for j in 0..i {
                s += 2.0 * self.get(i, j) * x[i] * x[j];
            }
        }
        s
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.lower.iter().all(|v| v.is_finite())
    }

    /// Row-major full entries (the certificate wire format).
    pub fn to_row_major(&self) -> Vec<f64> {
        self.to_matrix().as_slice().to_vec()
    }
}

impl fmt::Debug for SymmetricMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sym{} ", self.dim)?;
        f.debug_list().entries(self.to_matrix().to_rows()).finish()
    }
}

/// Eigenpairs of a symmetric matrix: ascending eigenvalues, orthonormal
/// eigenvectors stored as the columns of `eigenvectors`.
#[derive(Clone, Debug)]
pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl EigenResult {
    pub fn max(&self) -> f64 {
        *self.eigenvalues.last().unwrap_or(&f64::NEG_INFINITY)
    }

    pub fn min(&self) -> f64 {
        *self.eigenvalues.first().unwrap_or(&f64::INFINITY)
    }

    /// Eigenvector of the largest eigenvalue.
    pub fn top_vector(&self) -> Vec<f64> {
        self.eigenvectors.column(self.eigenvalues.len() - 1)
    }
}

/// Cyclic Jacobi eigendecomposition.
pub fn sym_eig(s: &SymmetricMatrix) -> Result<EigenResult> {
    if !s.is_finite() {
        return Err(Error::NonFinite("sym_eig input"));
    }
    let n = s.dim();
    let mut a = s.to_matrix();
    let mut v = Matrix::identity(n);
    let threshold = JACOBI_OFF_TOL * s.frobenius_norm();

    let off = |a: &Matrix| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..i {
                acc += 2.0 * a[(i, j)] * a[(i, j)];
            }
        }
        acc.sqrt()
    };

    let mut sweeps = 0;
    loop {
        let residual = off(&a);
        if residual <= threshold {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::EigNoConvergence {
                dim: n,
                off_residual: residual,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                // A <- Jᵀ A J, touching rows/cols p and q only.
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let eigenvalues = order.iter().map(|&i| a[(i, i)]).collect();
    let eigenvectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(EigenResult {
        eigenvalues,
        eigenvectors,
    })
}

/// Largest eigenvalue.
pub fn max_eigenvalue(s: &SymmetricMatrix) -> Result<f64> {
    Ok(sym_eig(s)?.max())
}

/// `(λ_max(S) ≤ tol, λ_max(S))`.
pub fn is_neg_semidefinite(s: &SymmetricMatrix, tol: f64) -> Result<(bool, f64)> {
    if tol < 0.0 {
        return Err(Error::Precondition(format!(
            "tolerance must be >= 0, got {tol}"
        )));
    }
    let lmax = max_eigenvalue(s)?;
    Ok((lmax <= tol, lmax))
}

/// Lower-triangular Cholesky factor `L` with `L·Lᵀ = S`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// `√(xᵀ S x) = ‖Lᵀ x‖₂`.
    pub fn weighted_norm(&self, x: &[f64]) -> Result<f64> {
        weighted_norm(x, self)
    }
}

pub fn cholesky(s: &SymmetricMatrix) -> Result<Cholesky> {
    let n = s.dim();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = s.get(j, j);
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { index: j, value: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut acc = s.get(i, j);
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = acc / djj;
        }
    }
    Ok(Cholesky { l })
}

/// Weighted norm `‖x‖_P` given a Cholesky factor of `P`.
pub fn weighted_norm(x: &[f64], p_chol: &Cholesky) -> Result<f64> {
    let n = p_chol.dim();
    if x.len() != n {
        return Err(dim_mismatch("weighted_norm", n, x.len()));
    }
    let l = &p_chol.l;
    let mut acc = 0.0;
    for j in 0..n {
        // (Lᵀx)_j = Σ_{i≥j} L_ij x_i
        let mut s = 0.0;
        for i in j..n {
            s += l[(i, j)] * x[i];
        }
        acc += s * s;
    }
    Ok(acc.sqrt())
}

/// LU with partial pivoting, then forward/back substitution.
pub fn solve_linear(m: &Matrix, rhs: &[f64]) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(dim_mismatch(
            "solve_linear",
            "square",
            format!("{:?}", m.shape()),
        ));
    }
    let n = m.nrows();
    if rhs.len() != n {
        return Err(dim_mismatch("solve_linear rhs", n, rhs.len()));
    }
    let mut a = m.clone();
    let mut b = rhs.to_vec();
    let tol = LU_PIVOT_TOL * m.max_abs();
    for k in 0..n {
        let (piv, pmag) = (k..n)
            .map(|i| (i, a[(i, k)].abs()))
            .fold(
                (k, -1.0),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            );
        if pmag <= tol || pmag == 0.0 {
            return Err(Error::Singular { pivot: pmag });
        }
        if piv != k {
            for j in 0..n {
                let t = a[(k, j)];
                a[(k, j)] = a[(piv, j)];
                a[(piv, j)] = t;
            }
            b.swap(k, piv);
        }
        let akk = a[(k, k)];
        for i in (k + 1)..n {
            let f = a[(i, k)] / akk;
            if f == 0.0 {
                continue;
            }
            a[(i, k)] = 0.0;
            for j in (k + 1)..n {
                a[(i, j)] -= f * a[(k, j)];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in (i + 1)..n {
            s -= a[(i, j)] * x[j];
        }
        x[i] = s / a[(i, i)];
    }
    Ok(x)
}

/// Solves `M X = R` column by column.
pub fn solve_matrix(m: &Matrix, r: &Matrix) -> Result<Matrix> {
    if r.nrows() != m.nrows() {
        return Err(dim_mismatch("solve_matrix", m.nrows(), r.nrows()));
    }
    let mut out = Matrix::zeros(m.ncols(), r.ncols());
    for j in 0..r.ncols() {
        let x = solve_linear(m, &r.column(j))?;
        for (i, v) in x.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// `a + s·b`
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(rows: &[&[f64]]) -> SymmetricMatrix {
        SymmetricMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn eig_diagonal() {
        let r = sym_eig(&SymmetricMatrix::from_diag(&[1.0, 2.0])).unwrap();
        assert_eq!(r.eigenvalues, vec![1.0, 2.0]);
        assert_eq!(r.eigenvectors, Matrix::identity(2));
    }

    #[test]
    fn eig_two_by_two() {
        // char. poly (2-λ)² - 1 = 0
        let r = sym_eig(&sym(&[&[2.0, 1.0], &[1.0, 2.0]])).unwrap();
        assert!((r.eigenvalues[0] - 1.0).abs() < 1e-14);
        assert!((r.eigenvalues[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn eig_zero() {
        let r = sym_eig(&SymmetricMatrix::zeros(2)).unwrap();
        assert_eq!(r.eigenvalues, vec![0.0, 0.0]);
    }

    #[test]
    fn eig_rejects_nan() {
        let mut s = SymmetricMatrix::zeros(2);
        s.set(0, 1, f64::NAN);
        assert!(sym_eig(&s).is_err());
    }

    #[test]
    fn nsd_checks() {
        let neg = SymmetricMatrix::identity(2).scale(-1.0);
        assert_eq!(is_neg_semidefinite(&neg, 0.0).unwrap(), (true, -1.0));
        assert_eq!(
            is_neg_semidefinite(&SymmetricMatrix::identity(2), 0.0).unwrap(),
            (false, 1.0)
        );
        let (ok, l) = is_neg_semidefinite(&sym(&[&[0.0, 1.0], &[1.0, 0.0]]), 1e-9).unwrap();
        assert!(!ok);
        assert!((l - 1.0).abs() < 1e-14);
        assert!(is_neg_semidefinite(&neg, -1.0).is_err());
    }

    #[test]
    fn cholesky_cases() {
        let c = cholesky(&SymmetricMatrix::identity(3)).unwrap();
        assert_eq!(c.factor(), &Matrix::identity(3));
        let c = cholesky(&sym(&[&[4.0, 2.0], &[2.0, 5.0]])).unwrap();
        assert_eq!(c.factor().to_rows(), vec![vec![2.0, 0.0], vec![1.0, 2.0]]);
        assert!(matches!(
            cholesky(&sym(&[&[1.0, 2.0], &[2.0, 1.0]])),
            Err(Error::NotPositiveDefinite { index: 1, .. })
        ));
    }

    #[test]
    fn solve_cases() {
        assert_eq!(
            solve_linear(&Matrix::identity(2), &[3.0, 4.0]).unwrap(),
            vec![3.0, 4.0]
        );
        let d = Matrix::from_diag(&[2.0, 4.0]);
        assert_eq!(solve_linear(&d, &[2.0, 8.0]).unwrap(), vec![1.0, 2.0]);
        let r1 = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(matches!(
            solve_linear(&r1, &[1.0, 0.0]),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn weighted_norms() {
        let i2 = cholesky(&SymmetricMatrix::identity(2)).unwrap();
        assert_eq!(weighted_norm(&[3.0, 4.0], &i2).unwrap(), 5.0);
        let d = cholesky(&SymmetricMatrix::from_diag(&[4.0, 1.0])).unwrap();
        assert_eq!(weighted_norm(&[1.0, 0.0], &d).unwrap(), 2.0);
        assert_eq!(weighted_norm(&[0.0, 0.0], &d).unwrap(), 0.0);
        assert!(weighted_norm(&[1.0], &d).is_err());
    }

    #[test]
    fn kron_small() {
        let a = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let b = Matrix::identity(2);
        let k = a.kron(&b);
        assert_eq!(
            k.to_rows(),
            vec![vec![1.0, 0.0, 2.0, 0.0], vec![0.0, 1.0, 0.0, 2.0]]
        );
    }
}
