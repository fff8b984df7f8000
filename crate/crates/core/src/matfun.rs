//! Dense row-major matrices and the matrix functions the rest of the crate
//! is built on: exponential, pseudo-inverse, LU solves, Cholesky and
//! symmetrization.
//!
//! Products go through `matrixmultiply`'s blocked dgemm; the SVD behind
//! [`pinv`] and the symmetric eigensolver come from `nalgebra`. Everything
//! else is implemented here.

use std::fmt;
use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data, rejecting shape mismatches and
    /// non-finite entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::dim(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::numeric(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds from nested rows. Panics on ragged input; meant for literals.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

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
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
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

    /// Column vector (`cols == 1`).
    pub fn column(v: &[f64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    /// Row vector (`rows == 1`).
    pub fn row(v: &[f64]) -> Self {
        Self {
            rows: 1,
            cols: v.len(),
            data: v.to_vec(),
        }
    }

    /// Outer product `u vᵀ`.
    pub fn outer(u: &[f64], v: &[f64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
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

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row_slice(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col_vec(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self.data[i * self.cols + i])
            .collect()
    }

    pub fn trace(&self) -> f64 {
        self.diag().iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// `self · rhs`.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::dim(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(self.mul_unchecked(rhs))
    }

    pub(crate) fn mul_unchecked(&self, rhs: &Matrix) -> Matrix {
        let (m, k, n) = (self.rows, self.cols, rhs.cols);
        let mut out = Matrix::zeros(m, n);
        if m == 0 || n == 0 || k == 0 {
            return out;
        }
        // SAFETY: the pointers cover m*k, k*n and m*n contiguous row-major
        // elements with the strides passed alongside them.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                self.data.as_ptr(),
                k as isize,
                1,
                rhs.data.as_ptr(),
                n as isize,
                1,
                0.0,
                out.data.as_mut_ptr(),
                n as isize,
                1,
            );
        }
        out
    }

    /// `self · v` for a plain vector.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.cols != v.len() {
            return Err(Error::dim(format!(
                "cannot multiply {}x{} by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok(self.matvec_unchecked(v))
    }

    pub(crate) fn matvec_unchecked(&self, v: &[f64]) -> Vec<f64> {
        self.data
            .chunks_exact(self.cols.max(1))
            .take(self.rows)
            .map(|row| dot(row, v))
            .collect()
    }

    /// `selfᵀ · v`.
    pub fn tr_matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.rows != v.len() {
            return Err(Error::dim(format!(
                "cannot multiply transpose of {}x{} by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (row, &vi) in self.data.chunks_exact(self.cols.max(1)).zip(v) {
            for (o, &r) in out.iter_mut().zip(row) {
                *o += r * vi;
            }
        }
        Ok(out)
    }

    pub fn add(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with(rhs, |a, b| a - b)
    }

    fn zip_with(&self, rhs: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != rhs.shape() {
            return Err(Error::dim(format!(
                "shape {:?} does not match {:?}",
                self.shape(),
                rhs.shape()
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self + s·I`.
    pub fn add_identity(&self, s: f64) -> Matrix {
        let mut out = self.clone();
        for i in 0..self.rows.min(self.cols) {
            out.data[i * self.cols + i] += s;
        }
        out
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest elementwise absolute difference.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row_slice(i))?;
        }
        write!(f, "]")
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn require_square(a: &Matrix, what: &str) -> Result<()> {
    if a.is_square() {
        Ok(())
    } else {
        Err(Error::dim(format!(
            "{what} needs a square matrix, got {}x{}",
            a.rows, a.cols
        )))
    }
}

/// LU factorization with partial pivoting, `P·A = L·U`.
#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &Matrix) -> Result<Self> {
        require_square(a, "LU")?;
        let n = a.rows;
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax == 0.0 || !pmax.is_finite() {
                return Err(Error::numeric(format!(
                    "singular matrix in LU (pivot column {k})"
                )));
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            let (head, tail) = lu.split_at_mut((k + 1) * n);
            let row_k = &head[k * n..];
            for row_i in tail.chunks_exact_mut(n) {
                let factor = row_i[k] / pivot;
                row_i[k] = factor;
                if factor != 0.0 {
                    for j in k + 1..n {
                        row_i[j] -= factor * row_k[j];
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::dim(format!(
                "right-hand side has length {}, expected {}",
                b.len(),
                self.n
            )));
        }
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s = dot(&self.lu[i * n..i * n + i], &x[..i]);
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s = dot(&self.lu[i * n + i + 1..(i + 1) * n], &x[i + 1..]);
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        Ok(x)
    }

    /// Solves `A X = B` for all columns of `B` at once.
    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        if b.rows != self.n {
            return Err(Error::dim(format!(
                "right-hand side has {} rows, expected {}",
                b.rows, self.n
            )));
        }
        let (n, m) = (self.n, b.cols);
        let mut x = Matrix::zeros(n, m);
        for (i, &p) in self.perm.iter().enumerate() {
            x.data[i * m..(i + 1) * m].copy_from_slice(b.row_slice(p));
        }
        // Row-oriented substitution keeps the inner loops contiguous.
        for i in 0..n {
            let (done, rest) = x.data.split_at_mut(i * m);
            let xi = &mut rest[..m];
            for k in 0..i {
                let l = self.lu[i * n + k];
                if l != 0.0 {
                    for (t, &s) in xi.iter_mut().zip(&done[k * m..(k + 1) * m]) {
                        *t -= l * s;
                    }
                }
            }
        }
        for i in (0..n).rev() {
            let (head, tail) = x.data.split_at_mut((i + 1) * m);
            let xi = &mut head[i * m..];
            for k in i + 1..n {
                let u = self.lu[i * n + k];
                if u != 0.0 {
                    let xk = &tail[(k - i - 1) * m..(k - i) * m];
                    for (t, &s) in xi.iter_mut().zip(xk) {
                        *t -= u * s;
                    }
                }
            }
            let d = self.lu[i * n + i];
            for t in xi.iter_mut() {
                *t /= d;
            }
        }
        if !x.is_finite() {
            return Err(Error::numeric("LU solve produced non-finite values"));
        }
        Ok(x)
    }
}

/// Solves `A X = B`.
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    Lu::factor(a)?.solve(b)
}

pub fn solve_vec(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    Lu::factor(a)?.solve_vec(b)
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    solve(a, &Matrix::identity(a.rows))
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`. Fails if a pivot is
/// not strictly positive.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    require_square(a, "Cholesky")?;
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let s = dot(&l.data[j * n..j * n + j], &l.data[j * n..j * n + j]);
        let d = a[(j, j)] - s;
        if !(d > 0.0) {
            return Err(Error::numeric(format!(
                "matrix not positive definite (pivot {j} = {d:e})"
            )));
        }
        let d = d.sqrt();
        l.data[j * n + j] = d;
        for i in j + 1..n {
            let s = dot(&l.data[i * n..i * n + j], &l.data[j * n..j * n + j]);
            l.data[i * n + j] = (a[(i, j)] - s) / d;
        }
    }
    Ok(l)
}

/// `(p + pᵀ) / 2`, exactly symmetric: the lower triangle is computed and
/// mirrored into the upper one.
pub fn symmetrize(p: &Matrix) -> Result<Matrix> {
    require_square(p, "symmetrize")?;
    let n = p.rows;
    let mut out = p.clone();
    for i in 0..n {
        for j in 0..i {
            let v = (p.data[i * n + j] + p.data[j * n + i]) / 2.0;
            out.data[i * n + j] = v;
            out.data[j * n + i] = v;
        }
    }
    Ok(out)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue_symmetric(p: &Matrix) -> Result<f64> {
    require_square(p, "eigenvalues")?;
    let eig = nalgebra::SymmetricEigen::new(p.to_nalgebra());
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Default relative cutoff for [`pinv`].
pub const PINV_REL_TOL: f64 = 1e-12;

/// Thin SVD of a tall matrix whose recomposition is verified. nalgebra can
/// return an unconverged factorization without reporting it, most often for
/// rank-deficient inputs; a looser convergence threshold usually recovers.
fn checked_svd(a: &Matrix) -> Result<nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    let na = a.to_nalgebra();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for eps in [5.0 * f64::EPSILON, 1e-13, 1e-12] {
        let Some(svd) = na.clone().try_svd(true, true, eps, 0) else {
            continue;
        };
        if let Ok(rec) = svd.clone().recompose() {
            let err = (rec - &na).abs().max() / scale;
            if err < 1e-11 {
                return Ok(svd);
            }
            worst = worst.max(err);
        }
    }
    Err(Error::numeric(format!(
        "SVD did not converge (relative recomposition error {worst:e})"
    )))
}

/// Moore–Penrose pseudo-inverse via SVD. Singular values below
/// `rel_tol · σ_max` are treated as zero.
pub fn pinv(a: &Matrix, rel_tol: f64) -> Result<Matrix> {
    if !(rel_tol >= 0.0) {
        return Err(Error::Domain(format!(
            "pinv tolerance must be nonnegative, got {rel_tol}"
        )));
    }
    if !a.is_finite() {
        return Err(Error::numeric("pinv input has non-finite entries"));
    }
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok(Matrix::zeros(n, m));
    }
    if m < n {
        // The tall orientation is the one the SVD handles reliably.
        return Ok(pinv(&a.transpose(), rel_tol)?.transpose());
    }
    let svd = checked_svd(a)?;
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::numeric("SVD did not return singular vectors")),
    };
    let s = svd.singular_values;
    let cutoff = rel_tol * s.iter().copied().fold(0.0, f64::max);
    let k = s.len();
    // a† = V Σ⁺ Uᵀ, assembled as (V Σ⁺) · Uᵀ.
    let mut v_scaled = Matrix::zeros(n, k);
    for r in 0..k {
        let inv = if s[r] > cutoff && s[r] > 0.0 { 1.0 / s[r] } else { 0.0 };
        for i in 0..n {
            v_scaled.data[i * k + r] = v_t[(r, i)] * inv;
        }
    }
    let u_t = Matrix::from_fn(k, m, |r, j| u[(j, r)]);
    Ok(v_scaled.mul_unchecked(&u_t))
}

// Padé [m/m] numerator coefficients and the 1-norm bounds below which each
// degree reaches double precision without scaling.
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539398330063230e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068;
const THETA13: f64 = 5.371920351148152;

/// Inputs with 1-norm above this are rejected up front: the result would
/// overflow for all but very special matrices.
pub const EXPM_NORM_LIMIT: f64 = 1e6;

/// Matrix exponential by scaling and squaring with a Padé approximant of
/// degree 3, 5, 7, 9 or 13, chosen from the 1-norm of the input.
///
/// The result is finite whenever `‖a‖₁` stays below roughly 700 (beyond that
/// `e^‖a‖` itself overflows); inputs above [`EXPM_NORM_LIMIT`] are refused.
pub fn expm(a: &Matrix) -> Result<Matrix> {
    require_square(a, "expm")?;
    let n = a.rows;
    if !a.is_finite() {
        return Err(Error::numeric("expm input has non-finite entries"));
    }
    let norm = a.norm_1();
    if norm > EXPM_NORM_LIMIT {
        return Err(Error::numeric(format!(
            "expm input norm {norm:e} exceeds limit {EXPM_NORM_LIMIT:e}"
        )));
    }
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }

    let result = if norm <= THETA3 {
        pade_low(a, &PADE3)?
    } else if norm <= THETA5 {
        pade_low(a, &PADE5)?
    } else if norm <= THETA7 {
        pade_low(a, &PADE7)?
    } else if norm <= THETA9 {
        pade_low(a, &PADE9)?
    } else {
        let s = if norm > THETA13 {
            (norm / THETA13).log2().ceil() as i32
        } else {
            0
        };
        let scaled = a.scale(2f64.powi(-s));
        let mut r = pade13(&scaled)?;
        for _ in 0..s {
            r = r.mul_unchecked(&r);
        }
        r
    };
    if !result.is_finite() {
        return Err(Error::numeric(format!(
            "expm overflowed for input with 1-norm {norm:e}"
        )));
    }
    Ok(result)
}

/// Odd/even split evaluation for degrees up to 9: builds even powers and
/// forms `U = A·Σ b_odd A^2k`, `V = Σ b_even A^2k`.
fn pade_low(a: &Matrix, b: &[f64]) -> Result<Matrix> {
    let n = a.rows;
    let m = b.len() - 1;
    let a2 = a.mul_unchecked(a);
    let mut powers = vec![Matrix::identity(n), a2.clone()];
    while powers.len() <= m / 2 {
        let next = powers.last().unwrap().mul_unchecked(&a2);
        powers.push(next);
    }
    let mut u_inner = Matrix::zeros(n, n);
    let mut v = Matrix::zeros(n, n);
    for (k, p) in powers.iter().enumerate() {
        if 2 * k + 1 <= m {
            axpy(&mut u_inner, b[2 * k + 1], p);
        }
        if 2 * k <= m {
            axpy(&mut v, b[2 * k], p);
        }
    }
    let u = a.mul_unchecked(&u_inner);
    pade_solve(&u, &v)
}

fn pade13(a: &Matrix) -> Result<Matrix> {
    let b = &PADE13;
    let n = a.rows;
    let ident = Matrix::identity(n);
    let a2 = a.mul_unchecked(a);
    let a4 = a2.mul_unchecked(&a2);
    let a6 = a4.mul_unchecked(&a2);

    let mut w1 = Matrix::zeros(n, n);
    axpy(&mut w1, b[13], &a6);
    axpy(&mut w1, b[11], &a4);
    axpy(&mut w1, b[9], &a2);
    let mut w2 = Matrix::zeros(n, n);
    axpy(&mut w2, b[7], &a6);
    axpy(&mut w2, b[5], &a4);
    axpy(&mut w2, b[3], &a2);
    axpy(&mut w2, b[1], &ident);
    let mut u_inner = a6.mul_unchecked(&w1);
    axpy(&mut u_inner, 1.0, &w2);
    let u = a.mul_unchecked(&u_inner);

    let mut z1 = Matrix::zeros(n, n);
    axpy(&mut z1, b[12], &a6);
    axpy(&mut z1, b[10], &a4);
    axpy(&mut z1, b[8], &a2);
    let mut v = a6.mul_unchecked(&z1);
    axpy(&mut v, b[6], &a6);
    axpy(&mut v, b[4], &a4);
    axpy(&mut v, b[2], &a2);
    axpy(&mut v, b[0], &ident);
    pade_solve(&u, &v)
}

/// Solves `(V − U) R = V + U`.
fn pade_solve(u: &Matrix, v: &Matrix) -> Result<Matrix> {
    let p = v.add(u)?;
    let q = v.sub(u)?;
    solve(&q, &p)
}

fn axpy(y: &mut Matrix, alpha: f64, x: &Matrix) {
    for (yi, &xi) in y.data.iter_mut().zip(&x.data) {
        *yi += alpha * xi;
    }
}
