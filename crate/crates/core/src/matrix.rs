//! Dense row-major `f64` matrices, permutations, and the SPD solver used by
//! every other module.

use crate::error::{Error, Result};

/// Dense real matrix with explicit row/column counts, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from a row-major value buffer.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "buffer of length {} cannot fill a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from nested rows; rejects ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::Shape(format!(
                    "ragged rows: expected {} columns, found {}",
                    c,
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { rows: r, cols: c, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// 1xN matrix view of a slice.
    pub fn row_vector(values: &[f64]) -> Self {
        Matrix {
            rows: 1,
            cols: values.len(),
            data: values.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Standard product `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        // i-k-j order keeps the inner loops on contiguous rows.
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &aik) in a_row.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                let b_row = other.row(k);
                for (o, &bkj) in out_row.iter_mut().zip(b_row) {
                    *o += aik * bkj;
                }
            }
        }
        Ok(out)
    }

    /// `self * other^T`; rows of both operands dot against each other.
    pub fn matmul_transpose(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by transposed {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a_row = self.row(i);
            for j in 0..other.rows {
                let b_row = other.row(j);
                let mut acc = 0.0;
                for (a, b) in a_row.iter().zip(b_row) {
                    acc += a * b;
                }
                out[(i, j)] = acc;
            }
        }
        Ok(out)
    }

    /// Matrix-vector product `self * x`.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.cols != x.len() {
            return Err(Error::Shape(format!(
                "cannot apply {}x{} to vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Transposed matrix-vector product `self^T * x`.
    pub fn transpose_mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.rows != x.len() {
            return Err(Error::Shape(format!(
                "cannot apply transposed {}x{} to vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, &aij) in out.iter_mut().zip(self.row(i)) {
                *o += xi * aij;
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape(format!(
                "elementwise op on {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Rank-one product `u * v^T`.
    pub fn outer(u: &[f64], v: &[f64]) -> Matrix {
        let mut out = Matrix::zeros(u.len(), v.len());
        for (i, &ui) in u.iter().enumerate() {
            for (j, &vj) in v.iter().enumerate() {
                out[(i, j)] = ui * vj;
            }
        }
        out
    }

    /// Copy of the half-open block `[r0, r1) x [c0, c1)`.
    pub fn submatrix(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Matrix {
        debug_assert!(r0 <= r1 && r1 <= self.rows && c0 <= c1 && c1 <= self.cols);
        let mut out = Matrix::zeros(r1 - r0, c1 - c0);
        for i in r0..r1 {
            for j in c0..c1 {
                out[(i - r0, j - c0)] = self[(i, j)];
            }
        }
        out
    }

    /// Stacks `bottom` below `self`.
    pub fn vstack(&self, bottom: &Matrix) -> Result<Matrix> {
        if self.rows > 0 && bottom.rows > 0 && self.cols != bottom.cols {
            return Err(Error::Shape(format!(
                "vstack of {}x{} and {}x{}",
                self.rows, self.cols, bottom.rows, bottom.cols
            )));
        }
        let cols = if self.rows == 0 { bottom.cols } else { self.cols };
        let mut data = Vec::with_capacity((self.rows + bottom.rows) * cols);
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&bottom.data);
        Ok(Matrix {
            rows: self.rows + bottom.rows,
            cols,
            data,
        })
    }

    /// Concatenates `right` to the right of `self`.
    pub fn hstack(&self, right: &Matrix) -> Result<Matrix> {
        if self.cols > 0 && right.cols > 0 && self.rows != right.rows {
            return Err(Error::Shape(format!(
                "hstack of {}x{} and {}x{}",
                self.rows, self.cols, right.rows, right.cols
            )));
        }
        let rows = self.rows.max(right.rows);
        let mut out = Matrix::zeros(rows, self.cols + right.cols);
        for i in 0..rows {
            for j in 0..self.cols {
                out[(i, j)] = self[(i, j)];
            }
            for j in 0..right.cols {
                out[(i, self.cols + j)] = right[(i, j)];
            }
        }
        Ok(out)
    }

    /// Reorders rows so output row `i` is input row `perm[i]`.
    pub fn permute_rows(&self, perm: &Permutation) -> Result<Matrix> {
        if perm.len() != self.rows {
            return Err(Error::Shape(format!(
                "permutation of length {} on {} rows",
                perm.len(),
                self.rows
            )));
        }
        let mut out = Matrix::zeros(self.rows, self.cols);
        for (new, &old) in perm.map().iter().enumerate() {
            out.data[new * self.cols..(new + 1) * self.cols].copy_from_slice(self.row(old));
        }
        Ok(out)
    }

    /// Reorders columns so output column `j` is input column `perm[j]`.
    pub fn permute_cols(&self, perm: &Permutation) -> Result<Matrix> {
        if perm.len() != self.cols {
            return Err(Error::Shape(format!(
                "permutation of length {} on {} columns",
                perm.len(),
                self.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (new, &old) in perm.map().iter().enumerate() {
                out[(i, new)] = self[(i, old)];
            }
        }
        Ok(out)
    }

    /// Symmetric permutation `P * self * P^T` for square matrices.
    pub fn permute_symmetric(&self, perm: &Permutation) -> Result<Matrix> {
        if self.rows != self.cols || perm.len() != self.rows {
            return Err(Error::Shape(
                "symmetric permutation needs a square matrix of matching size".into(),
            ));
        }
        let map = perm.map();
        let mut out = Matrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self[(map[i], map[j])];
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute entry of `self - self^T`.
    pub fn symmetry_error(&self) -> f64 {
        let mut err: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                err = err.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        err
    }

    pub fn is_symmetric_within(&self, rel_tol: f64) -> bool {
        self.rows == self.cols && self.symmetry_error() <= rel_tol * (1.0 + self.max_abs())
    }

    /// Replaces the matrix by `(A + A^T) / 2`, making it exactly symmetric.
    pub fn symmetrize(&mut self) {
        debug_assert_eq!(self.rows, self.cols);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }

    /// `max ||a_ij - b_ij||_F / (1 + ||b||_F)`, the relative deviation used by
    /// all oracle comparisons.
    pub fn relative_deviation(&self, reference: &Matrix) -> f64 {
        debug_assert_eq!(self.rows, reference.rows);
        debug_assert_eq!(self.cols, reference.cols);
        let mut diff = 0.0;
        for (a, b) in self.data.iter().zip(&reference.data) {
            diff += (a - b) * (a - b);
        }
        diff.sqrt() / (1.0 + reference.frobenius_norm())
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Bijection on `{0..n-1}`, stored as the list of source indices in output
/// order: applying the permutation puts input element `map[i]` at position `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation {
            map: (0..n).collect(),
        }
    }

    pub fn from_map(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &i in &map {
            if i >= n || seen[i] {
                return Err(Error::InvalidArgument(format!(
                    "index list is not a permutation of 0..{}",
                    n
                )));
            }
            seen[i] = true;
        }
        Ok(Permutation { map })
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &m)| i == m)
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.map.len()];
        for (new, &old) in self.map.iter().enumerate() {
            inv[old] = new;
        }
        Permutation { map: inv }
    }
}

/// Permutation that moves `removed` (in the given order) to the tail
/// positions `n-removed.len()..n` and keeps every other index in its original
/// relative order.
pub fn permute_to_tail(n: usize, removed: &[usize]) -> Result<Permutation> {
    let mut is_removed = vec![false; n];
    for &i in removed {
        if i >= n {
            return Err(Error::InvalidArgument(format!(
                "index {} out of range for size {}",
                i, n
            )));
        }
        if is_removed[i] {
            return Err(Error::InvalidArgument(format!("duplicate index {}", i)));
        }
        is_removed[i] = true;
    }
    let mut map = Vec::with_capacity(n);
    map.extend((0..n).filter(|&i| !is_removed[i]));
    map.extend_from_slice(removed);
    Ok(Permutation { map })
}

/// Solves `a * x = b` for symmetric positive definite `a` via a Cholesky
/// factorization. `a` must be symmetric to within `1e-12` relative.
pub fn spd_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows() != a.cols() {
        return Err(Error::Shape(format!(
            "spd_solve needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if b.rows() != a.rows() {
        return Err(Error::Shape(format!(
            "right-hand side has {} rows, matrix has {}",
            b.rows(),
            a.rows()
        )));
    }
    if !a.is_symmetric_within(1e-12) {
        return Err(Error::Shape(
            "spd_solve input is not symmetric within tolerance".into(),
        ));
    }
    let chol = cholesky(a)?;
    Ok(cholesky_solve_with(&chol, b))
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub(crate) fn cholesky(a: &Matrix) -> Result<Matrix> {
    cholesky_with_floor(a, 1e-14 * (1.0 + a.max_abs()))
}

/// Cholesky factorization that rejects any diagonal pivot at or below
/// `floor` (before the square root), so callers can pick their own
/// degeneracy threshold.
pub(crate) fn cholesky_with_floor(a: &Matrix, floor: f64) -> Result<Matrix> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if sum <= floor {
                    return Err(Error::Singular(format!(
                        "non-positive pivot {:.3e} at row {}",
                        sum, i
                    )));
                }
                l[(i, i)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Solves with a precomputed lower Cholesky factor (forward then back
/// substitution, column by column of the right-hand side).
pub(crate) fn cholesky_solve_with(l: &Matrix, b: &Matrix) -> Matrix {
    let n = l.rows();
    let mut x = b.clone();
    for c in 0..b.cols() {
        // L y = b
        for i in 0..n {
            let mut sum = x[(i, c)];
            for k in 0..i {
                sum -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = sum / l[(i, i)];
        }
        // L^T x = y
        for i in (0..n).rev() {
            let mut sum = x[(i, c)];
            for k in (i + 1)..n {
                sum -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = sum / l[(i, i)];
        }
    }
    x
}
