//! Node insertion for the variant that maintains unit upper-triangular `L`
//! and positive diagonal `D` with `L D L'` equal to the Gram inverse. The
//! factored form is the numerically stable choice for long update runs; the
//! dense inverse is never materialized here — every product with it is
//! evaluated as two triangular sweeps and a diagonal scaling.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::NodeBlock;
use crate::solve::{
    build_gram, direct_weights, inverse_ldl_factorize, inverse_ldl_of_spd, InverseLdl,
};

/// Training state for the factored variant.
#[derive(Debug, Clone)]
pub struct LdlState {
    hidden: Matrix,
    targets: Matrix,
    ridge: f64,
    factors: InverseLdl,
    weights: Matrix,
}

impl LdlState {
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
        let factors = inverse_ldl_factorize(&gram)?;
        let weights = direct_weights(&hidden, &targets, ridge)?;
        Ok(LdlState {
            hidden,
            targets,
            ridge,
            factors,
            weights,
        })
    }

    /// Reassembles a state from previously computed pieces (model restore).
    pub fn from_parts(
        hidden: Matrix,
        targets: Matrix,
        ridge: f64,
        factors: InverseLdl,
        weights: Matrix,
    ) -> Result<Self> {
        let l = hidden.rows();
        if targets.cols() != hidden.cols()
            || factors.order() != l
            || weights.cols() != l
            || weights.rows() != targets.rows()
        {
            return Err(Error::Shape(
                "state pieces have inconsistent dimensions".into(),
            ));
        }
        Ok(LdlState {
            hidden,
            targets,
            ridge,
            factors,
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

    pub fn factors(&self) -> &InverseLdl {
        &self.factors
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    /// Adds one node. The factor gains one column: `tcol = -(L D L') p`
    /// evaluated through the factors, and the diagonal gains
    /// `tau = 1 / (h.h + ridge - p' (L D L') p)`.
    pub fn grow_single(&self, new_row: &[f64]) -> Result<LdlState> {
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
        let schur = self_energy - self.factors.quadratic_form(&p)?;
        if schur <= 1e-12 * self_energy {
            return Err(Error::Degenerate(format!(
                "new node is numerically dependent on the existing ones (pivot {:.3e})",
                schur
            )));
        }
        let tau = 1.0 / schur;
        let tcol: Vec<f64> = self.factors.apply_vec(&p)?.iter().map(|v| -v).collect();

        let mut tri = Matrix::identity(l + 1);
        for i in 0..l {
            for j in (i + 1)..l {
                tri[(i, j)] = self.factors.triangular()[(i, j)];
            }
            tri[(i, l)] = tcol[i];
        }
        let mut diag = self.factors.diagonal().to_vec();
        diag.push(tau);

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
            for c in 0..l {
                weights[(r, c)] = self.weights[(r, c)] + new_col[r] * tcol[c];
            }
            weights[(r, l)] = new_col[r];
        }

        let hidden = self.hidden.vstack(&Matrix::row_vector(new_row))?;
        Ok(LdlState {
            hidden,
            targets: self.targets.clone(),
            ridge: self.ridge,
            factors: InverseLdl::new(tri, diag)?,
            weights,
        })
    }

    /// Adds a block of nodes. The new corner factors `(V, S)` are the
    /// inverse-LDL factors of the block's Schur complement, and the new
    /// off-diagonal strip is `U = -(L D L') P V`:
    ///
    /// ```text
    /// Lnew = [ L  U ]    Dnew = [ D    ]
    ///        [ 0  V ]           [    S ]
    /// ```
    pub fn grow_block(&self, block: &NodeBlock) -> Result<LdlState> {
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

        // Z = L' P, then the quadratic term is Z' D Z.
        let z = self.factors.triangular().transpose().matmul(&p)?;
        let mut dz = z.clone();
        for i in 0..l {
            let di = self.factors.diagonal()[i];
            for j in 0..delta {
                dz[(i, j)] *= di;
            }
        }
        let mut schur = f.sub(&z.transpose().matmul(&dz)?)?;
        schur.symmetrize();

        let floor = 1e-12 * (trace_f / delta as f64);
        let corner = inverse_ldl_of_spd(&schur, floor).map_err(|_| {
            Error::Degenerate(format!(
                "block of {} nodes is numerically dependent on the existing ones",
                delta
            ))
        })?;
        let (v, s) = (corner.triangular(), corner.diagonal());

        let ldl_p = self.factors.triangular().matmul(&dz)?; // (L D L') P
        let strip = ldl_p.matmul(v)?.scaled(-1.0); // U, l x delta

        let mut tri = Matrix::identity(l + delta);
        for i in 0..l {
            for j in (i + 1)..l {
                tri[(i, j)] = self.factors.triangular()[(i, j)];
            }
            for j in 0..delta {
                tri[(i, l + j)] = strip[(i, j)];
            }
        }
        for i in 0..delta {
            for j in (i + 1)..delta {
                tri[(l + i, l + j)] = v[(i, j)];
            }
        }
        let mut diag = self.factors.diagonal().to_vec();
        diag.extend_from_slice(s);

        // weight update from the same pieces: VS V' is the Schur inverse and
        // VS U' plays the coupling role
        let residual = self
            .targets
            .matmul_transpose(&block.hidden_rows)?
            .sub(&self.weights.matmul(&p)?)?; // M x delta
        let mut vs = v.clone();
        for i in 0..delta {
            for j in 0..delta {
                vs[(i, j)] *= s[j];
            }
        }
        let rvs = residual.matmul(&vs)?;
        let top = self.weights.add(&rvs.matmul_transpose(&strip)?)?;
        let new_cols = rvs.matmul_transpose(v)?;
        let weights = top.hstack(&new_cols)?;

        let hidden = self.hidden.vstack(&block.hidden_rows)?;
        Ok(LdlState {
            hidden,
            targets: self.targets.clone(),
            ridge: self.ridge,
            factors: InverseLdl::new(tri, diag)?,
            weights,
        })
    }
}
