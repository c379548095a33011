//! Direct, non-incremental solvers: the regularized Gram matrix, its inverse,
//! the inverse-LDL factors, the regularized pseudo-inverse, and the ridge
//! weights. These are the ground truth every incremental path is checked
//! against, so weights are always obtained through an SPD solve, never by
//! forming an explicit inverse.

use crate::error::{Error, Result};
use crate::matrix::{spd_solve, Matrix};

/// `R = H H^T + ridge * I` together with the ridge that produced it.
#[derive(Debug, Clone)]
pub struct RegularizedGram {
    r: Matrix,
    ridge: f64,
}

impl RegularizedGram {
    pub fn matrix(&self) -> &Matrix {
        &self.r
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn order(&self) -> usize {
        self.r.rows()
    }
}

/// Unit upper-triangular `L` and positive diagonal `D` with
/// `L * diag(D) * L^T` equal to the inverse of the regularized Gram matrix.
#[derive(Debug, Clone)]
pub struct InverseLdl {
    l: Matrix,
    d: Vec<f64>,
}

impl InverseLdl {
    pub fn new(l: Matrix, d: Vec<f64>) -> Result<Self> {
        if l.rows() != l.cols() || l.rows() != d.len() {
            return Err(Error::Shape(format!(
                "factor is {}x{} with {} diagonal entries",
                l.rows(),
                l.cols(),
                d.len()
            )));
        }
        for i in 0..l.rows() {
            if l[(i, i)] != 1.0 {
                return Err(Error::InvalidArgument(
                    "triangular factor must have an exact unit diagonal".into(),
                ));
            }
            for j in 0..i {
                if l[(i, j)] != 0.0 {
                    return Err(Error::InvalidArgument(
                        "triangular factor must be exactly upper triangular".into(),
                    ));
                }
            }
        }
        if d.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "diagonal entries must be positive and finite".into(),
            ));
        }
        Ok(InverseLdl { l, d })
    }

    pub fn order(&self) -> usize {
        self.d.len()
    }

    pub fn triangular(&self) -> &Matrix {
        &self.l
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.d
    }

    /// Dense `L * diag(D) * L^T`.
    pub fn product(&self) -> Matrix {
        let n = self.order();
        let mut out = Matrix::zeros(n, n);
        // Entry (i, j) sums over k >= max(i, j) because L is upper triangular.
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for k in j..n {
                    acc += self.l[(i, k)] * self.d[k] * self.l[(j, k)];
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc;
            }
        }
        out
    }

    /// `L * diag(D) * L^T * p` evaluated as three cheap sweeps, never forming
    /// the dense product.
    pub fn apply_vec(&self, p: &[f64]) -> Result<Vec<f64>> {
        let mut u = self.l.transpose_mul_vec(p)?;
        for (ui, di) in u.iter_mut().zip(&self.d) {
            *ui *= di;
        }
        self.l.mul_vec(&u)
    }

    /// Quadratic form `p^T (L D L^T) p`, always nonnegative for positive `D`.
    pub fn quadratic_form(&self, p: &[f64]) -> Result<f64> {
        let u = self.l.transpose_mul_vec(p)?;
        Ok(u.iter().zip(&self.d).map(|(ui, di)| di * ui * ui).sum())
    }

    /// `L * diag(D) * L^T * P` for a dense right-hand block.
    pub fn apply_matrix(&self, p: &Matrix) -> Result<Matrix> {
        let mut u = self.l.transpose().matmul(p)?;
        for i in 0..u.rows() {
            for j in 0..u.cols() {
                u[(i, j)] *= self.d[i];
            }
        }
        self.l.matmul(&u)
    }
}

/// `R = H H^T + ridge * I`, symmetrized.
pub fn build_gram(h: &Matrix, ridge: f64) -> Result<RegularizedGram> {
    if ridge < 0.0 || !ridge.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "regularization factor must be finite and nonnegative, got {}",
            ridge
        )));
    }
    let mut r = h.matmul_transpose(h)?;
    for i in 0..r.rows() {
        r[(i, i)] += ridge;
    }
    r.symmetrize();
    Ok(RegularizedGram { r, ridge })
}

/// Dense inverse of the regularized Gram matrix, symmetrized.
pub fn invert_to_q(gram: &RegularizedGram) -> Result<Matrix> {
    let n = gram.order();
    let mut q = spd_solve(&gram.r, &Matrix::identity(n))?;
    q.symmetrize();
    Ok(q)
}

/// Ridge regression weights `W = Y H^T (H H^T + ridge I)^{-1}`, computed by
/// solving the SPD system for `W^T`. This is the reference every update path
/// is compared against.
pub fn direct_weights(h: &Matrix, y: &Matrix, ridge: f64) -> Result<Matrix> {
    if y.cols() != h.cols() {
        return Err(Error::Shape(format!(
            "targets have {} samples, hidden matrix has {}",
            y.cols(),
            h.cols()
        )));
    }
    let gram = build_gram(h, ridge)?;
    let rhs = h.matmul_transpose(y)?;
    let wt = spd_solve(&gram.r, &rhs)?;
    Ok(wt.transpose())
}

/// Regularized pseudo-inverse `B = H^T (H H^T + ridge I)^{-1}`; the weights
/// satisfy `W = Y B`. Provided for cross-checks only.
pub fn pseudo_inverse(h: &Matrix, ridge: f64) -> Result<Matrix> {
    let gram = build_gram(h, ridge)?;
    let qh = spd_solve(&gram.r, h)?;
    Ok(qh.transpose())
}

/// Inverse-LDL factors of the regularized Gram matrix: factors the matrix
/// itself as `Lc * diag(Dc) * Lc^T` with unit lower-triangular `Lc`, then
/// inverts and transposes so that the result multiplies out to the inverse.
pub fn inverse_ldl_factorize(gram: &RegularizedGram) -> Result<InverseLdl> {
    inverse_ldl_of_spd(&gram.r, 0.0)
}

/// Same construction for any SPD matrix. `min_pivot` is the smallest
/// acceptable diagonal pivot; at or below it the factorization is rejected.
pub(crate) fn inverse_ldl_of_spd(a: &Matrix, min_pivot: f64) -> Result<InverseLdl> {
    let (lc, dc) = ldl_lower(a, min_pivot)?;
    let l = invert_transpose_unit_lower(&lc);
    let d = dc.iter().map(|v| 1.0 / v).collect();
    Ok(InverseLdl { l, d })
}

/// Conventional `L D L^T` factorization with unit lower-triangular `L`.
pub(crate) fn ldl_lower(a: &Matrix, min_pivot: f64) -> Result<(Matrix, Vec<f64>)> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Shape(format!(
            "factorization needs a square matrix, got {}x{}",
            n,
            a.cols()
        )));
    }
    let floor = min_pivot.max(1e-14 * (1.0 + a.max_abs()));
    let mut l = Matrix::identity(n);
    let mut d = vec![0.0; n];
    for j in 0..n {
        let mut dj = a[(j, j)];
        for k in 0..j {
            dj -= l[(j, k)] * l[(j, k)] * d[k];
        }
        if dj <= floor {
            return Err(Error::Singular(format!(
                "non-positive pivot {:.3e} at row {}",
                dj, j
            )));
        }
        d[j] = dj;
        for i in (j + 1)..n {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)] * d[k];
            }
            l[(i, j)] = v / dj;
        }
    }
    Ok((l, d))
}

/// Inverse-transpose of a unit lower-triangular matrix; the result is unit
/// upper triangular with exact ones and zeros in the structural positions.
fn invert_transpose_unit_lower(lc: &Matrix) -> Matrix {
    let n = lc.rows();
    // Column c of inv(Lc) solves Lc * x = e_c by forward substitution;
    // transposing lands it in row c of the output.
    let mut out = Matrix::identity(n);
    for c in 0..n {
        let mut x = vec![0.0; n];
        x[c] = 1.0;
        for i in (c + 1)..n {
            let mut sum = 0.0;
            for k in c..i {
                sum -= lc[(i, k)] * x[k];
            }
            x[i] = sum;
        }
        for i in (c + 1)..n {
            out[(c, i)] = x[i];
        }
    }
    out
}

/// Relative deviation used by verification reports:
/// `||a - b||_F / (1 + ||b||_F)`.
pub fn relative_deviation(a: &Matrix, b: &Matrix) -> f64 {
    a.relative_deviation(b)
}
