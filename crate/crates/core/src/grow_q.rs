//! Node insertion for the variant that maintains the dense inverse of the
//! regularized Gram matrix. Adding nodes never re-inverts the full matrix:
//! only the small Schur complement of the new block is factored.

use crate::error::{Error, Result};
use crate::matrix::{cholesky_solve_with, cholesky_with_floor, Matrix};
use crate::model::NodeBlock;
use crate::solve::{build_gram, direct_weights, invert_to_q};

/// Training state for the Gram-inverse variant: the hidden matrix, targets,
/// ridge factor, the maintained inverse, and the current output weights.
#[derive(Debug, Clone)]
pub struct QState {
    hidden: Matrix,
    targets: Matrix,
    ridge: f64,
    gram_inv: Matrix,
    weights: Matrix,
}

impl QState {
    /// Initializes the state from scratch with the direct solver.
    pub fn new(hidden: Matrix, targets: Matrix, ridge: f64) -> Result<Self> {
        if targets.cols() != hidden.cols() {
            return Err(Error::Shape(format!(
                "targets have {} samples, hidden matrix has {}",
                targets.cols(),
                hidden.cols()
            )));
        }
        let gram = build_gram(&hidden, ridge)?;
        let gram_inv = invert_to_q(&gram)?;
        let weights = direct_weights(&hidden, &targets, ridge)?;
        Ok(QState {
            hidden,
            targets,
            ridge,
            gram_inv,
            weights,
        })
    }

    /// Reassembles a state from previously computed pieces (model restore).
    pub fn from_parts(
        hidden: Matrix,
        targets: Matrix,
        ridge: f64,
        gram_inv: Matrix,
        weights: Matrix,
    ) -> Result<Self> {
        let l = hidden.rows();
        if targets.cols() != hidden.cols()
            || gram_inv.rows() != l
            || gram_inv.cols() != l
            || weights.cols() != l
            || weights.rows() != targets.rows()
        {
            return Err(Error::Shape(
                "state pieces have inconsistent dimensions".into(),
            ));
        }
        if !gram_inv.is_symmetric_within(1e-12) {
            return Err(Error::InvalidArgument(
                "stored gram inverse is not symmetric".into(),
            ));
        }
        Ok(QState {
            hidden,
            targets,
            ridge,
            gram_inv,
            weights,
        })
    }

    pub fn node_count(&self) -> usize {
        self.hidden.rows()
    }

    pub fn sample_count(&self) -> usize {
        self.hidden.cols()
    }

    pub fn hidden(&self) -> &Matrix {
        &self.hidden
    }

    pub fn targets(&self) -> &Matrix {
        &self.targets
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn gram_inv(&self) -> &Matrix {
        &self.gram_inv
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    /// Adds one node given its hidden-row response, using the scalar rank-one
    /// recursion: with `p = H h`, the new corner of the inverse is
    /// `tau = 1 / (h.h + ridge - p' Q p)`, its column is `t = -tau Q p`, and
    /// the old block becomes `Q + t t' / tau`.
    pub fn grow_single(&self, new_row: &[f64]) -> Result<QState> {
        let l = self.node_count();
        let k = self.sample_count();
        if new_row.len() != k {
            return Err(Error::Shape(format!(
                "new hidden row has {} samples, state has {}",
                new_row.len(),
                k
            )));
        }
        let p = self.hidden.mul_vec(new_row)?;
        let self_energy: f64 = new_row.iter().map(|v| v * v).sum::<f64>() + self.ridge;
        let qp = self.gram_inv.mul_vec(&p)?;
        let schur = self_energy - dot(&p, &qp);
        if schur <= 1e-12 * self_energy {
            return Err(Error::Degenerate(format!(
                "new node is numerically dependent on the existing ones (pivot {:.3e})",
                schur
            )));
        }
        let tau = 1.0 / schur;
        let t: Vec<f64> = qp.iter().map(|v| -tau * v).collect();

        let mut gram_inv = Matrix::zeros(l + 1, l + 1);
        for i in 0..l {
            for j in 0..l {
                gram_inv[(i, j)] = self.gram_inv[(i, j)] + t[i] * t[j] / tau;
            }
            gram_inv[(i, l)] = t[i];
            gram_inv[(l, i)] = t[i];
        }
        gram_inv[(l, l)] = tau;
        gram_inv.symmetrize();

        let y_h = self.targets.mul_vec(new_row)?;
        let w_p = self.weights.mul_vec(&p)?;
        let new_col: Vec<f64> = y_h
            .iter()
            .zip(&w_p)
            .map(|(a, b)| tau * (a - b))
            .collect();
        let m = self.weights.rows();
        let mut weights = Matrix::zeros(m, l + 1);
        for r in 0..m {
            let shift = new_col[r] / tau;
            for c in 0..l {
                weights[(r, c)] = self.weights[(r, c)] + shift * t[c];
            }
            weights[(r, l)] = new_col[r];
        }

        let hidden = self.hidden.vstack(&Matrix::row_vector(new_row))?;
        Ok(QState {
            hidden,
            targets: self.targets.clone(),
            ridge: self.ridge,
            gram_inv,
            weights,
        })
    }

    /// Adds a block of nodes in one step. The inverse grows by the Schur
    /// complement of the new block: with `P = H Hnew'` and
    /// `F = Hnew Hnew' + ridge I`,
    ///
    /// ```text
    /// G = (F - P' Q P)^{-1}       (dense solve on the small block)
    /// T = -Q P G
    /// Qtop = Q - Q P T'
    /// ```
    ///
    /// and the weights update reuses the same pieces.
    pub fn grow_block(&self, block: &NodeBlock) -> Result<QState> {
        let l = self.node_count();
        let delta = block.count();
        let k = self.sample_count();
        if block.hidden_rows.cols() != k {
            return Err(Error::Shape(format!(
                "block rows have {} samples, state has {}",
                block.hidden_rows.cols(),
                k
            )));
        }
        let p = self.hidden.matmul_transpose(&block.hidden_rows)?;
        let mut f = block.hidden_rows.matmul_transpose(&block.hidden_rows)?;
        let mut trace_f = 0.0;
        for i in 0..delta {
            f[(i, i)] += self.ridge;
            trace_f += f[(i, i)];
        }
        f.symmetrize();

        let qp = self.gram_inv.matmul(&p)?;
        let mut schur = f.sub(&p.transpose().matmul(&qp)?)?;
        schur.symmetrize();
        let floor = 1e-12 * (trace_f / delta as f64);
        let chol = cholesky_with_floor(&schur, floor).map_err(|_| {
            Error::Degenerate(format!(
                "block of {} nodes is numerically dependent on the existing ones",
                delta
            ))
        })?;
        let mut schur_inv = cholesky_solve_with(&chol, &Matrix::identity(delta));
        schur_inv.symmetrize();

        let coupling = qp.matmul(&schur_inv)?.scaled(-1.0); // T, l x delta
        let q_top = self.gram_inv.sub(&qp.matmul_transpose(&coupling)?)?;

        let mut gram_inv = Matrix::zeros(l + delta, l + delta);
        for i in 0..l {
            for j in 0..l {
                gram_inv[(i, j)] = q_top[(i, j)];
            }
            for j in 0..delta {
                gram_inv[(i, l + j)] = coupling[(i, j)];
                gram_inv[(l + j, i)] = coupling[(i, j)];
            }
        }
        for i in 0..delta {
            for j in 0..delta {
                gram_inv[(l + i, l + j)] = schur_inv[(i, j)];
            }
        }
        gram_inv.symmetrize();

        let weights = weights_after_growth(
            &self.weights,
            &self.targets,
            &block.hidden_rows,
            &p,
            &coupling,
            &schur_inv,
        )?;
        let hidden = self.hidden.vstack(&block.hidden_rows)?;
        Ok(QState {
            hidden,
            targets: self.targets.clone(),
            ridge: self.ridge,
            gram_inv,
            weights,
        })
    }
}

/// Weight update for a block insertion, kept separate so it can be checked
/// against the plain product of targets, grown hidden matrix, and grown
/// inverse:
///
/// ```text
/// Wnew = [ W + (Y Hnew' - W P) T'  |  (Y Hnew' - W P) G ]
/// ```
pub fn weights_after_growth(
    weights: &Matrix,
    targets: &Matrix,
    new_rows: &Matrix,
    cross_gram: &Matrix,
    coupling: &Matrix,
    schur_inv: &Matrix,
) -> Result<Matrix> {
    let residual = targets
        .matmul_transpose(new_rows)?
        .sub(&weights.matmul(cross_gram)?)?; // M x delta
    let top = weights.add(&residual.matmul_transpose(coupling)?)?;
    let new_cols = residual.matmul(schur_inv)?;
    top.hstack(&new_cols)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
