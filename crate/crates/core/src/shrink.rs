//! Node removal. The inverse-based state is downdated through a block
//! partition of the permuted inverse; the factored state is downdated by
//! permuting the triangular factor's rows to move the doomed nodes to the
//! tail and re-triangularizing with diagonal-preserving plane rotations, so
//! the diagonal never has to be recomputed.

use crate::error::{Error, Result};
use crate::grow_q::QState;
use crate::grow_ldl::LdlState;
use crate::matrix::{permute_to_tail, spd_solve, Matrix, Permutation};
use crate::solve::InverseLdl;

/// Which nodes to drop and the permutation that sends them to the tail.
#[derive(Debug, Clone)]
pub struct RemovalPlan {
    indices: Vec<usize>,
    perm: Permutation,
    total: usize,
}

impl RemovalPlan {
    /// Validates and sorts the doomed indices for a state with `total` nodes.
    /// Removing every node is rejected.
    pub fn new(total: usize, indices: &[usize]) -> Result<Self> {
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != indices.len() {
            return Err(Error::InvalidArgument("duplicate removal index".into()));
        }
        if let Some(&bad) = sorted.iter().find(|&&i| i >= total) {
            return Err(Error::InvalidArgument(format!(
                "removal index {} out of range for {} nodes",
                bad, total
            )));
        }
        if sorted.len() >= total && total > 0 {
            return Err(Error::InvalidArgument(
                "cannot remove every hidden node".into(),
            ));
        }
        let perm = permute_to_tail(total, &sorted)?;
        Ok(RemovalPlan {
            indices: sorted,
            perm,
            total,
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn permutation(&self) -> &Permutation {
        &self.perm
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn removed_count(&self) -> usize {
        self.indices.len()
    }

    pub fn kept_count(&self) -> usize {
        self.total - self.indices.len()
    }
}

/// One step of the re-triangularization sweep.
#[derive(Debug, Clone)]
pub enum GivensStep {
    /// Plane rotation of columns `col` and `col + 1` by the stored block.
    Rotate { col: usize, block: [[f64; 2]; 2] },
    /// Exchange of columns `col` and `col + 1` together with their diagonal
    /// weights; used when the rotation pivot vanishes.
    Swap { col: usize },
}

/// Audit record of a re-triangularization: the ordered column operations and
/// the positive factor each diagonal weight was multiplied by when the unit
/// diagonal was restored.
#[derive(Debug, Clone)]
pub struct GivensPlan {
    pub steps: Vec<GivensStep>,
    pub column_scales: Vec<f64>,
}

/// Plane rotation acting on columns `j, j+1` that zeroes the row entry
/// `lj` against `ljp1` while leaving `diag(dj, djp1)` invariant under
/// `psi * diag * psi'`. Returns `None` when `ljp1 == 0`; the caller must swap
/// the columns (and their weights) instead.
///
/// The block is
///
/// ```text
///        1   [  ljp1^2 * djp1     dj * lj * ljp1  ]
/// psi = --- *[                                    ]
///       rho  [ -djp1 * lj * ljp1   ljp1^2 * djp1  ]
/// ```
///
/// with `rho = |ljp1| * sqrt(djp1 * (ljp1^2 * djp1 + lj^2 * dj))`, which makes
/// both properties hold exactly in algebra.
pub fn wide_givens(lj: f64, ljp1: f64, dj: f64, djp1: f64) -> Option<[[f64; 2]; 2]> {
    debug_assert!(dj > 0.0 && djp1 > 0.0);
    if ljp1 == 0.0 {
        return None;
    }
    let rho = ljp1.abs() * (djp1 * (ljp1 * ljp1 * djp1 + lj * lj * dj)).sqrt();
    Some([
        [ljp1 * ljp1 * djp1 / rho, dj * lj * ljp1 / rho],
        [-djp1 * lj * ljp1 / rho, ljp1 * ljp1 * djp1 / rho],
    ])
}

/// Re-triangularizes the row-permuted factor. The rows of `tri` are permuted
/// by the plan (the diagonal is not: its weights belong to columns), then the
/// displaced tail rows are cleared bottom-up — each pass sweeps
/// adjacent-column rotations left to right across one row, which confines
/// fill-in to diagonal positions — and finally every column is rescaled to a
/// unit diagonal, folding the squared pivot into the diagonal weights.
///
/// The output satisfies `Lnew diag(Dnew) Lnew' = P (L diag(D) L') P'` and is
/// exactly unit upper triangular.
pub fn retriangularize(
    tri: &Matrix,
    diag: &[f64],
    plan: &RemovalPlan,
) -> Result<(Matrix, Vec<f64>, GivensPlan)> {
    let n = tri.rows();
    if tri.cols() != n || diag.len() != n || plan.total() != n {
        return Err(Error::Shape(
            "factor, diagonal, and plan sizes disagree".into(),
        ));
    }
    for i in 0..n {
        if tri[(i, i)] != 1.0 {
            return Err(Error::InvalidArgument(
                "factor must have a unit diagonal".into(),
            ));
        }
        for j in 0..i {
            if tri[(i, j)] != 0.0 {
                return Err(Error::InvalidArgument(
                    "factor must be upper triangular".into(),
                ));
            }
        }
    }
    if diag.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidArgument(
            "diagonal weights must be positive".into(),
        ));
    }

    let mut l = tri.permute_rows(plan.permutation())?;
    let mut d = diag.to_vec();
    let mut steps = Vec::new();
    let tau = plan.removed_count();

    // Clear the displaced rows bottom-up; each pass only touches columns
    // left of the rows already cleared, so their zeros survive.
    for p in ((n - tau)..n).rev() {
        for j in 0..p {
            let target = l[(p, j)];
            if target == 0.0 {
                continue;
            }
            match wide_givens(target, l[(p, j + 1)], d[j], d[j + 1]) {
                None => {
                    for r in 0..=p {
                        let a = l[(r, j)];
                        l[(r, j)] = l[(r, j + 1)];
                        l[(r, j + 1)] = a;
                    }
                    d.swap(j, j + 1);
                    steps.push(GivensStep::Swap { col: j });
                }
                Some(psi) => {
                    for r in 0..=p {
                        let a = l[(r, j)];
                        let b = l[(r, j + 1)];
                        l[(r, j)] = a * psi[0][0] + b * psi[1][0];
                        l[(r, j + 1)] = a * psi[0][1] + b * psi[1][1];
                    }
                    l[(p, j)] = 0.0; // exact by construction of the rotation
                    steps.push(GivensStep::Rotate { col: j, block: psi });
                }
            }
        }
    }

    // Restore the unit diagonal: scaling column c by 1/pivot while
    // multiplying d[c] by pivot^2 leaves the three-factor product unchanged.
    let mut column_scales = vec![1.0; n];
    for c in 0..n {
        let pivot = l[(c, c)];
        if pivot.abs() <= 1e-14 {
            return Err(Error::Degenerate(format!(
                "vanishing diagonal {:.3e} in column {} after re-triangularization",
                pivot, c
            )));
        }
        for r in 0..c {
            l[(r, c)] /= pivot;
        }
        l[(c, c)] = 1.0;
        d[c] *= pivot * pivot;
        column_scales[c] = pivot * pivot;
    }

    Ok((l, d, GivensPlan {
        steps,
        column_scales,
    }))
}

impl QState {
    /// Removes the planned nodes from the inverse-based state. The permuted
    /// inverse splits as `[[Qk, T],[T', G]]`; the surviving inverse is
    /// `Qk - T G^{-1} T'` and the surviving weights drop the tail columns
    /// after subtracting `Wtail G^{-1} T'`.
    pub fn shrink(&self, plan: &RemovalPlan) -> Result<QState> {
        let l = self.node_count();
        if plan.total() != l {
            return Err(Error::Shape(format!(
                "plan built for {} nodes, state has {}",
                plan.total(),
                l
            )));
        }
        if plan.removed_count() == 0 {
            return Ok(self.clone());
        }
        let kept = plan.kept_count();
        let perm = plan.permutation();

        let qp = self.gram_inv().permute_symmetric(perm)?;
        let q_kept = qp.submatrix(0, kept, 0, kept);
        let cross = qp.submatrix(0, kept, kept, l); // kept x tau
        let corner = qp.submatrix(kept, l, kept, l); // tau x tau

        // corner is a principal block of a positive definite matrix; failure
        // here means the stored state itself is inconsistent
        let solved = spd_solve(&corner, &cross.transpose())
            .map_err(|e| Error::State(format!("inconsistent state in removal: {}", e)))?;

        let mut gram_inv = q_kept.sub(&cross.matmul(&solved)?)?;
        gram_inv.symmetrize();

        let wp = self.weights().permute_cols(perm)?;
        let m = wp.rows();
        let w_kept = wp.submatrix(0, m, 0, kept);
        let w_tail = wp.submatrix(0, m, kept, l);
        let weights = w_kept.sub(&w_tail.matmul(&solved)?)?;

        let hidden = self
            .hidden()
            .permute_rows(perm)?
            .submatrix(0, kept, 0, self.sample_count());
        QState::from_parts(
            hidden,
            self.targets().clone(),
            self.ridge(),
            gram_inv,
            weights,
        )
    }
}

impl LdlState {
    /// Removes the planned nodes from the factored state: re-triangularize
    /// the permuted factor, keep its leading blocks, and downdate the weights
    /// with a triangular solve against the tail corner
    /// (`Wnew = Wkept - Wtail V^{-T} U'`).
    pub fn shrink(&self, plan: &RemovalPlan) -> Result<LdlState> {
        let l = self.node_count();
        if plan.total() != l {
            return Err(Error::Shape(format!(
                "plan built for {} nodes, state has {}",
                plan.total(),
                l
            )));
        }
        if plan.removed_count() == 0 {
            return Ok(self.clone());
        }
        let kept = plan.kept_count();
        let perm = plan.permutation();

        let (lnew, dnew, _audit) =
            retriangularize(self.factors().triangular(), self.factors().diagonal(), plan)?;
        let tri_kept = lnew.submatrix(0, kept, 0, kept);
        let strip = lnew.submatrix(0, kept, kept, l); // U, kept x tau
        let corner = lnew.submatrix(kept, l, kept, l); // V, tau x tau unit upper
        let diag_kept = dnew[..kept].to_vec();

        // solve V' X = U' by forward substitution (V' is unit lower)
        let solved = unit_upper_transposed_solve(&corner, &strip.transpose())?;

        let wp = self.weights().permute_cols(perm)?;
        let m = wp.rows();
        let w_kept = wp.submatrix(0, m, 0, kept);
        let w_tail = wp.submatrix(0, m, kept, l);
        let weights = w_kept.sub(&w_tail.matmul(&solved)?)?;

        let hidden = self
            .hidden()
            .permute_rows(perm)?
            .submatrix(0, kept, 0, self.sample_count());
        LdlState::from_parts(
            hidden,
            self.targets().clone(),
            self.ridge(),
            InverseLdl::new(tri_kept, diag_kept)?,
            weights,
        )
    }
}

/// Solves `V' X = B` where `V` is unit upper triangular (so `V'` is unit
/// lower triangular), by forward substitution on each column of `B`.
fn unit_upper_transposed_solve(v: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = v.rows();
    if v.cols() != n || b.rows() != n {
        return Err(Error::Shape("triangular solve dimensions disagree".into()));
    }
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in 0..n {
            let mut sum = x[(i, c)];
            for k in 0..i {
                // (V')[i][k] = V[k][i]
                sum -= v[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = sum;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NodeBlock;
    use crate::solve::{build_gram, direct_weights, inverse_ldl_factorize, invert_to_q};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..=1.0))
    }

    fn block_from_rows(rows: Matrix) -> NodeBlock {
        let count = rows.rows();
        NodeBlock {
            input_weights: Matrix::zeros(count, 1),
            biases: vec![0.0; count],
            hidden_rows: rows,
        }
    }

    fn dense_product(tri: &Matrix, diag: &[f64]) -> Matrix {
        let n = tri.rows();
        let mut scaled = tri.clone();
        for i in 0..n {
            for j in 0..n {
                scaled[(i, j)] *= diag[j];
            }
        }
        scaled.matmul_transpose(tri).unwrap()
    }

    #[test]
    fn plan_validates_inputs() {
        assert!(RemovalPlan::new(3, &[3]).is_err());
        assert!(RemovalPlan::new(3, &[1, 1]).is_err());
        assert!(RemovalPlan::new(3, &[0, 1, 2]).is_err());
        let plan = RemovalPlan::new(4, &[2, 0]).unwrap();
        assert_eq!(plan.indices(), &[0, 2]);
        assert_eq!(plan.permutation().map(), &[1, 3, 0, 2]);
    }

    #[test]
    fn rotation_matches_worked_block() {
        let psi = wide_givens(1.0, 1.0, 1.0, 1.0).unwrap();
        let s = 1.0 / 2.0f64.sqrt();
        assert!((psi[0][0] - s).abs() <= 1e-15);
        assert!((psi[0][1] - s).abs() <= 1e-15);
        assert!((psi[1][0] + s).abs() <= 1e-15);
        assert!((psi[1][1] - s).abs() <= 1e-15);
        // the row (1, 1) rotates to (0, sqrt(2))
        let zeroed = 1.0 * psi[0][0] + 1.0 * psi[1][0];
        let kept = 1.0 * psi[0][1] + 1.0 * psi[1][1];
        assert!(zeroed.abs() <= 1e-15);
        assert!((kept - 2.0f64.sqrt()).abs() <= 1e-15);
    }

    #[test]
    fn rotation_with_nothing_to_zero_is_identity() {
        let psi = wide_givens(0.0, 2.0, 0.7, 1.3).unwrap();
        assert_eq!(psi[0][0], 1.0);
        assert_eq!(psi[0][1], 0.0);
        assert_eq!(psi[1][0], 0.0);
        assert_eq!(psi[1][1], 1.0);
    }

    #[test]
    fn rotation_zero_pivot_requires_swap() {
        assert!(wide_givens(1.0, 0.0, 1.0, 1.0).is_none());
    }

    #[test]
    fn rotation_preserves_diagonal_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let lj = rng.gen_range(-3.0..=3.0);
            let ljp1 = rng.gen_range(0.01..=3.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let dj = rng.gen_range(0.01..=10.0);
            let djp1 = rng.gen_range(0.01..=10.0);
            let psi = wide_givens(lj, ljp1, dj, djp1).unwrap();
            // psi * diag * psi' must reproduce the diagonal
            let p00 = psi[0][0] * dj * psi[0][0] + psi[0][1] * djp1 * psi[0][1];
            let p01 = psi[0][0] * dj * psi[1][0] + psi[0][1] * djp1 * psi[1][1];
            let p11 = psi[1][0] * dj * psi[1][0] + psi[1][1] * djp1 * psi[1][1];
            assert!((p00 - dj).abs() <= 1e-13 * dj.max(1.0));
            assert!(p01.abs() <= 1e-13 * (dj + djp1));
            assert!((p11 - djp1).abs() <= 1e-13 * djp1.max(1.0));
            // and zero the target entry against the row scale
            let zeroed = lj * psi[0][0] + ljp1 * psi[1][0];
            assert!(zeroed.abs() <= 1e-12 * lj.hypot(ljp1));
        }
    }

    #[test]
    fn retriangularize_last_node_is_trivial() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_matrix(&mut rng, 4, 12);
        let f = inverse_ldl_factorize(&build_gram(&h, 1.0).unwrap()).unwrap();
        let plan = RemovalPlan::new(4, &[3]).unwrap();
        let (lnew, dnew, audit) =
            retriangularize(f.triangular(), f.diagonal(), &plan).unwrap();
        assert_eq!(&lnew, f.triangular());
        assert_eq!(&dnew[..], f.diagonal());
        assert!(audit.steps.is_empty());
        assert!(audit.column_scales.iter().all(|&s| s == 1.0));
    }

    #[test]
    fn retriangularize_worked_two_by_two() {
        // factors of the inverse of [[2,1],[1,2]]
        let tri = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        let diag = vec![0.5, 2.0 / 3.0];
        let product = dense_product(&tri, &diag);
        let plan = RemovalPlan::new(2, &[0]).unwrap();
        let (lnew, dnew, _) = retriangularize(&tri, &diag, &plan).unwrap();
        let permuted = product.permute_symmetric(plan.permutation()).unwrap();
        assert!(dense_product(&lnew, &dnew).relative_deviation(&permuted) <= 1e-12);
        assert_eq!(lnew[(1, 0)], 0.0);
        assert_eq!(lnew[(0, 0)], 1.0);
        assert_eq!(lnew[(1, 1)], 1.0);
    }

    #[test]
    fn retriangularize_preserves_product_and_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (l, removed) in [
            (12usize, vec![3usize, 7, 8]),
            (6, vec![0]),
            (9, vec![0, 1, 2, 3]),
            (16, vec![2, 5, 6, 11, 14]),
        ] {
            let h = random_matrix(&mut rng, l, 3 * l);
            let f = inverse_ldl_factorize(&build_gram(&h, 0.5).unwrap()).unwrap();
            let plan = RemovalPlan::new(l, &removed).unwrap();
            let (lnew, dnew, _) = retriangularize(f.triangular(), f.diagonal(), &plan).unwrap();

            for i in 0..l {
                assert_eq!(lnew[(i, i)], 1.0);
                for j in 0..i {
                    assert_eq!(lnew[(i, j)], 0.0);
                }
            }
            assert!(dnew.iter().all(|&v| v > 0.0));

            let permuted = dense_product(f.triangular(), f.diagonal())
                .permute_symmetric(plan.permutation())
                .unwrap();
            assert!(
                dense_product(&lnew, &dnew).relative_deviation(&permuted) <= 1e-12,
                "product drifted for l={} removed={:?}",
                l,
                removed
            );

            // leading block must match the direct factorization of the
            // surviving rows
            let kept = plan.kept_count();
            let hk = h
                .permute_rows(plan.permutation())
                .unwrap()
                .submatrix(0, kept, 0, h.cols());
            let fk = inverse_ldl_factorize(&build_gram(&hk, 0.5).unwrap()).unwrap();
            let lead = lnew.submatrix(0, kept, 0, kept);
            assert!(lead.relative_deviation(fk.triangular()) <= 1e-9);
            for (a, b) in dnew[..kept].iter().zip(fk.diagonal()) {
                assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn corner_blocks_reproduce_permuted_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let l = 10;
        let h = random_matrix(&mut rng, l, 40);
        let gram = build_gram(&h, 0.8).unwrap();
        let f = inverse_ldl_factorize(&gram).unwrap();
        let q = invert_to_q(&gram).unwrap();
        let plan = RemovalPlan::new(l, &[1, 4, 6]).unwrap();
        let (lnew, dnew, _) = retriangularize(f.triangular(), f.diagonal(), &plan).unwrap();
        let kept = plan.kept_count();

        let strip = lnew.submatrix(0, kept, kept, l);
        let corner = lnew.submatrix(kept, l, kept, l);
        let s_tail = &dnew[kept..];

        let mut corner_s = corner.clone();
        let mut strip_s = strip.clone();
        for j in 0..(l - kept) {
            for i in 0..(l - kept) {
                corner_s[(i, j)] *= s_tail[j];
            }
            for i in 0..kept {
                strip_s[(i, j)] *= s_tail[j];
            }
        }
        let qp = q.permute_symmetric(plan.permutation()).unwrap();
        let cross_ref = qp.submatrix(0, kept, kept, l);
        let corner_ref = qp.submatrix(kept, l, kept, l);
        assert!(strip_s.matmul_transpose(&corner).unwrap().relative_deviation(&cross_ref) <= 1e-10);
        assert!(corner_s.matmul_transpose(&corner).unwrap().relative_deviation(&corner_ref) <= 1e-10);
    }

    #[test]
    fn shrink_decoupled_node() {
        let state = QState::new(Matrix::identity(2), Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap(), 1.0).unwrap();
        let plan = RemovalPlan::new(2, &[1]).unwrap();
        let shrunk = state.shrink(&plan).unwrap();
        assert_eq!(shrunk.node_count(), 1);
        assert!((shrunk.gram_inv()[(0, 0)] - 0.5).abs() <= 1e-15);
        assert!((shrunk.weights()[(0, 0)] - 0.5).abs() <= 1e-15);

        let lstate = LdlState::new(Matrix::identity(2), Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap(), 1.0).unwrap();
        let shrunk = lstate.shrink(&plan).unwrap();
        assert_eq!(shrunk.factors().triangular(), &Matrix::identity(1));
        assert!((shrunk.factors().diagonal()[0] - 0.5).abs() <= 1e-15);
        assert!((shrunk.weights()[(0, 0)] - 0.5).abs() <= 1e-15);
    }

    #[test]
    fn grow_then_shrink_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let hidden = random_matrix(&mut rng, 5, 30);
        let targets = random_matrix(&mut rng, 2, 30);
        let rows = random_matrix(&mut rng, 3, 30);

        let q0 = QState::new(hidden.clone(), targets.clone(), 0.7).unwrap();
        let grown = q0.grow_block(&block_from_rows(rows.clone())).unwrap();
        let plan = RemovalPlan::new(8, &[5, 6, 7]).unwrap();
        let back = grown.shrink(&plan).unwrap();
        assert!(back.gram_inv().relative_deviation(q0.gram_inv()) <= 1e-9);
        assert!(back.weights().relative_deviation(q0.weights()) <= 1e-9);
        assert!(back.hidden().relative_deviation(q0.hidden()) <= 1e-15);

        let l0 = LdlState::new(hidden, targets, 0.7).unwrap();
        let grown = l0.grow_block(&block_from_rows(rows)).unwrap();
        let back = grown.shrink(&plan).unwrap();
        assert!(
            back.factors()
                .triangular()
                .relative_deviation(l0.factors().triangular())
                <= 1e-9
        );
        for (a, b) in back.factors().diagonal().iter().zip(l0.factors().diagonal()) {
            assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
        assert!(back.weights().relative_deviation(l0.weights()) <= 1e-9);
    }

    #[test]
    fn shrink_matches_retrained_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let hidden = random_matrix(&mut rng, 10, 50);
        let targets = random_matrix(&mut rng, 2, 50);
        let plan = RemovalPlan::new(10, &[2, 5, 6]).unwrap();

        let q = QState::new(hidden.clone(), targets.clone(), 0.9).unwrap();
        let qs = q.shrink(&plan).unwrap();
        let w_oracle = direct_weights(qs.hidden(), qs.targets(), 0.9).unwrap();
        let q_oracle = invert_to_q(&build_gram(qs.hidden(), 0.9).unwrap()).unwrap();
        assert!(qs.weights().relative_deviation(&w_oracle) <= 1e-9);
        assert!(qs.gram_inv().relative_deviation(&q_oracle) <= 1e-9);

        let l = LdlState::new(hidden, targets, 0.9).unwrap();
        let ls = l.shrink(&plan).unwrap();
        assert!(ls.weights().relative_deviation(&w_oracle) <= 1e-9);
        assert!(ls.factors().product().relative_deviation(&q_oracle) <= 1e-9);
        // cross-path agreement is tighter than either against the oracle
        assert!(ls.weights().relative_deviation(qs.weights()) <= 1e-10);
    }

    #[test]
    fn removal_order_does_not_matter() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let hidden = random_matrix(&mut rng, 8, 32);
        let targets = random_matrix(&mut rng, 1, 32);
        let state = QState::new(hidden.clone(), targets.clone(), 0.5).unwrap();

        let both = state.shrink(&RemovalPlan::new(8, &[2, 6]).unwrap()).unwrap();
        let first = state.shrink(&RemovalPlan::new(8, &[2]).unwrap()).unwrap();
        // index 6 shifts to 5 once row 2 is gone
        let sequential = first.shrink(&RemovalPlan::new(7, &[5]).unwrap()).unwrap();
        assert!(both.gram_inv().relative_deviation(sequential.gram_inv()) <= 1e-10);
        assert!(both.weights().relative_deviation(sequential.weights()) <= 1e-10);

        let lstate = LdlState::new(hidden, targets, 0.5).unwrap();
        let both_l = lstate.shrink(&RemovalPlan::new(8, &[2, 6]).unwrap()).unwrap();
        let seq_l = lstate
            .shrink(&RemovalPlan::new(8, &[2]).unwrap())
            .unwrap()
            .shrink(&RemovalPlan::new(7, &[5]).unwrap())
            .unwrap();
        assert!(both_l.weights().relative_deviation(seq_l.weights()) <= 1e-10);
    }

    #[test]
    fn cross_path_agreement_over_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..12 {
            let l = rng.gen_range(4..=24);
            let k = 2 * l + rng.gen_range(0..20);
            let tau = rng.gen_range(1..=l / 2);
            let mut indices: Vec<usize> = (0..l).collect();
            for i in (1..l).rev() {
                let j = rng.gen_range(0..=i);
                indices.swap(i, j);
            }
            indices.truncate(tau);
            let hidden = random_matrix(&mut rng, l, k);
            let targets = random_matrix(&mut rng, 2, k);
            let plan = RemovalPlan::new(l, &indices).unwrap();

            let qs = QState::new(hidden.clone(), targets.clone(), 0.3)
                .unwrap()
                .shrink(&plan)
                .unwrap();
            let ls = LdlState::new(hidden, targets, 0.3)
                .unwrap()
                .shrink(&plan)
                .unwrap();
            assert!(ls.weights().relative_deviation(qs.weights()) <= 1e-10);
            let w_oracle = direct_weights(qs.hidden(), qs.targets(), 0.3).unwrap();
            assert!(qs.weights().relative_deviation(&w_oracle) <= 1e-9);
            assert!(ls.weights().relative_deviation(&w_oracle) <= 1e-9);
        }
    }

    #[test]
    fn shrink_rejects_mismatched_plan() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let state = QState::new(
            random_matrix(&mut rng, 4, 10),
            random_matrix(&mut rng, 1, 10),
            1.0,
        )
        .unwrap();
        let plan = RemovalPlan::new(5, &[1]).unwrap();
        assert!(matches!(state.shrink(&plan), Err(Error::Shape(_))));
    }

    #[test]
    fn retriangularize_handles_zero_pivot_with_swap() {
        // craft a factor whose permuted sweep hits an exactly zero pivot:
        // removing node 0 of an identity factor forces column swaps
        let tri = Matrix::identity(3);
        let diag = vec![0.5, 0.25, 0.125];
        let plan = RemovalPlan::new(3, &[0]).unwrap();
        let (lnew, dnew, audit) = retriangularize(&tri, &diag, &plan).unwrap();
        assert!(audit
            .steps
            .iter()
            .any(|s| matches!(s, GivensStep::Swap { .. })));
        let permuted = dense_product(&tri, &diag)
            .permute_symmetric(plan.permutation())
            .unwrap();
        assert!(dense_product(&lnew, &dnew).relative_deviation(&permuted) <= 1e-13);
        assert_eq!(dnew, vec![0.25, 0.125, 0.5]);
    }
}
