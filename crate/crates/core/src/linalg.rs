//! Dense linear-algebra substrate: numeric rank, kernels, PSD tests and
//! exact integer rank.
//!
//! Every floating-point decision goes through a [`Tolerances`] value so the
//! same policy applies to ranks, residual checks and eigenvalue signs.

use nalgebra::{DMatrix, SymmetricEigen};
use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Singular-value ratio at the rank cut below which a rank is flagged marginal.
pub const MARGINAL_GAP: f64 = 1e3;

/// Numeric policy threaded through every floating-point decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rank_rel_tol: f64,
    pub psd_slack: f64,
    pub residual_tol: f64,
    pub rng_seed: u64,
    pub generic_trials: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank_rel_tol: 1e-9,
            psd_slack: 1e-9,
            residual_tol: 1e-9,
            rng_seed: 0x5eed,
            generic_trials: 3,
        }
    }
}

impl Tolerances {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    /// Sets all three floating tolerances to `tol`.
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.rank_rel_tol = tol;
        self.psd_slack = tol;
        self.residual_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !(ok(self.rank_rel_tol) && ok(self.psd_slack) && ok(self.residual_tol)) {
            return Err(Error::HypothesisFailed(
                "tolerances must be finite and strictly positive".into(),
            ));
        }
        if self.generic_trials == 0 {
            return Err(Error::HypothesisFailed("generic_trials must be at least 1".into()));
        }
        Ok(())
    }
}

/// Result of a numeric rank computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankInfo {
    pub rank: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
    /// The gap between the last kept and first dropped singular value is
    /// smaller than [`MARGINAL_GAP`].
    pub marginal: bool,
}

impl RankInfo {
    pub fn nullity(&self, cols: usize) -> usize {
        cols - self.rank
    }
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if !m[(r, c)].is_finite() {
                return Err(Error::NonFiniteEntry { row: r, col: c });
            }
        }
    }
    Ok(())
}

/// Pads `m` with zero rows so that it has at least as many rows as columns.
/// The full right-singular basis is then available from a thin SVD.
fn pad_rows(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() >= m.ncols() {
        return m.clone();
    }
    let mut p = DMatrix::zeros(m.ncols(), m.ncols());
    p.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
    p
}

/// Singular values (descending) and matching right singular vectors as columns.
fn sorted_svd(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.ncols();
    if n == 0 || m.nrows() == 0 {
        return (Vec::new(), DMatrix::identity(n, n));
    }
    let padded = pad_rows(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested v_t");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v = DMatrix::zeros(n, order.len());
    for (k, &i) in order.iter().enumerate() {
        for j in 0..n {
            v[(j, k)] = v_t[(i, j)];
        }
    }
    (values, v)
}

fn rank_from_values(values: &[f64], rows: usize, cols: usize, scale: f64, tol: &Tolerances) -> RankInfo {
    let sigma1 = values.first().copied().unwrap_or(0.0);
    let threshold = tol.rank_rel_tol * rows.max(cols) as f64 * sigma1.max(scale);
    let rank = if sigma1 == 0.0 {
        0
    } else {
        values.iter().filter(|&&s| s > threshold).count()
    };
    let kept_all = rank == values.len().min(rows.min(cols));
    let marginal = if rank == 0 || kept_all {
        false
    } else {
        let next = values.get(rank).copied().unwrap_or(0.0);
        next > 0.0 && values[rank - 1] / next < MARGINAL_GAP
    };
    RankInfo {
        rank,
        singular_values: values[..values.len().min(rows.min(cols))].to_vec(),
        marginal,
    }
}

/// Numeric rank: singular values above `rank_rel_tol * max(rows, cols) * sigma_1`.
pub fn numeric_rank(m: &DMatrix<f64>, tol: &Tolerances) -> Result<RankInfo> {
    check_finite(m)?;
    let (values, _) = sorted_svd(m);
    Ok(rank_from_values(&values, m.nrows(), m.ncols(), 0.0, tol))
}

/// Like [`numeric_rank`], but the cut is taken relative to `max(sigma_1, scale)`.
/// Use it when `m` has a known natural size, so that a matrix that should vanish
/// but carries roundoff is reported as rank 0.
pub fn numeric_rank_scaled(m: &DMatrix<f64>, scale: f64, tol: &Tolerances) -> Result<RankInfo> {
    check_finite(m)?;
    let (values, _) = sorted_svd(m);
    Ok(rank_from_values(&values, m.nrows(), m.ncols(), scale.abs(), tol))
}

/// Which kernel to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Right,
    Left,
}

/// Orthonormal basis (as columns) of the right or left kernel of `m`.
pub fn nullspace(m: &DMatrix<f64>, side: Side, tol: &Tolerances) -> Result<DMatrix<f64>> {
    Ok(nullspace_with_rank(m, side, tol)?.0)
}

/// Same as [`nullspace`] but also returns the rank information it was cut from.
pub fn nullspace_with_rank(
    m: &DMatrix<f64>,
    side: Side,
    tol: &Tolerances,
) -> Result<(DMatrix<f64>, RankInfo)> {
    check_finite(m)?;
    let a = match side {
        Side::Right => m.clone(),
        Side::Left => m.transpose(),
    };
    let (values, v) = sorted_svd(&a);
    let info = rank_from_values(&values, a.nrows(), a.ncols(), 0.0, tol);
    let n = a.ncols();
    let k = n - info.rank;
    let basis = v.columns(info.rank, k).into_owned();
    Ok((basis, info))
}

/// Outcome of a semidefiniteness test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsdInfo {
    pub is_psd: bool,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Symmetric eigenvalues in ascending order.
pub fn sym_eigenvalues(s: &DMatrix<f64>) -> Vec<f64> {
    if s.nrows() == 0 {
        return Vec::new();
    }
    let sym = (s + s.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// PSD test: `lambda_min >= -psd_slack * max(1, lambda_max)` after symmetrizing.
pub fn psd_check(s: &DMatrix<f64>, tol: &Tolerances) -> Result<PsdInfo> {
    check_finite(s)?;
    if s.nrows() != s.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "psd_check needs a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    let asym = max_abs(&(s - s.transpose()));
    if asym > tol.residual_tol * (1.0 + max_abs(s)) {
        return Err(Error::AsymmetricInput { asymmetry: asym });
    }
    let ev = sym_eigenvalues(s);
    let min = ev.first().copied().unwrap_or(0.0);
    let max = ev.last().copied().unwrap_or(0.0);
    Ok(PsdInfo {
        is_psd: min >= -tol.psd_slack * max.max(1.0),
        min_eigenvalue: min,
        max_eigenvalue: max,
    })
}

/// Exact rank over the rationals of an integer matrix (rows given as slices),
/// by fraction-free Bareiss elimination on arbitrary-precision integers.
pub fn integer_rank<R: AsRef<[i64]>>(rows: &[R]) -> usize {
    let mut a: Vec<Vec<BigInt>> = rows
        .iter()
        .map(|r| r.as_ref().iter().map(|&x| BigInt::from(x)).collect())
        .collect();
    let m = a.len();
    let n = a.iter().map(Vec::len).max().unwrap_or(0);
    for row in a.iter_mut() {
        row.resize(n, BigInt::zero());
    }
    let mut rank = 0;
    let mut prev = BigInt::from(1);
    for col in 0..n {
        if rank == m {
            break;
        }
        let Some(pivot) = (rank..m).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, pivot);
        for r in rank + 1..m {
            for c in col + 1..n {
                let v = (&a[rank][col] * &a[r][c] - &a[r][col] * &a[rank][c]) / &prev;
                a[r][c] = v;
            }
            a[r][col] = BigInt::zero();
        }
        prev = a[rank][col].clone();
        rank += 1;
    }
    rank
}

/// Exact rank of an integer matrix; same as [`integer_rank`].
pub fn smith_rank(rows: &[Vec<i64>]) -> usize {
    integer_rank(rows)
}

/// Converts a slice-of-rows description into a dense matrix.
pub fn from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(r, c, |i, j| rows[i][j])
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Inverse square root of a symmetric positive definite matrix. Eigenvalues
/// below `floor * lambda_max` are rejected.
pub fn inv_sqrt_spd(s: &DMatrix<f64>, floor: f64) -> Option<DMatrix<f64>> {
    let sym = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let max = eig.eigenvalues.iter().fold(0.0_f64, |a, &x| a.max(x));
    if max <= 0.0 || eig.eigenvalues.iter().any(|&x| x <= floor * max) {
        return None;
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|x| 1.0 / x.sqrt()));
    Some(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn identity_has_full_rank() {
        let info = numeric_rank(&DMatrix::identity(3, 3), &tol()).unwrap();
        assert_eq!(info.rank, 3);
        assert!(!info.marginal);
    }

    #[test]
    fn zero_matrix_rank_and_kernel() {
        let z = DMatrix::<f64>::zeros(2, 2);
        assert_eq!(numeric_rank(&z, &tol()).unwrap().rank, 0);
        assert_eq!(nullspace(&z, Side::Right, &tol()).unwrap().ncols(), 2);
    }

    #[test]
    fn empty_matrix_rank_zero() {
        let e = DMatrix::<f64>::zeros(0, 4);
        assert_eq!(numeric_rank(&e, &tol()).unwrap().rank, 0);
        assert_eq!(nullspace(&e, Side::Right, &tol()).unwrap().ncols(), 4);
        assert_eq!(integer_rank::<Vec<i64>>(&[]), 0);
    }

    #[test]
    fn nan_is_rejected() {
        let mut m = DMatrix::<f64>::zeros(2, 2);
        m[(1, 0)] = f64::NAN;
        assert_eq!(
            numeric_rank(&m, &tol()),
            Err(Error::NonFiniteEntry { row: 1, col: 0 })
        );
    }

    #[test]
    fn wide_matrix_right_kernel_is_complete() {
        // 1x3 row (1, 1, 0): kernel is 2-dimensional.
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let k = nullspace(&m, Side::Right, &tol()).unwrap();
        assert_eq!(k.ncols(), 2);
        assert!(max_abs(&(&m * &k)) < 1e-14);
        let gram = k.transpose() * &k;
        assert!(max_abs(&(gram - DMatrix::identity(2, 2))) < 1e-12);
    }

    #[test]
    fn left_kernel() {
        let m = DMatrix::from_row_slice(3, 1, &[1.0, -1.0, 0.0]);
        let k = nullspace(&m, Side::Left, &tol()).unwrap();
        assert_eq!(k.ncols(), 2);
        assert!(max_abs(&(k.transpose() * &m)) < 1e-14);
    }

    #[test]
    fn psd_examples() {
        let z = psd_check(&DMatrix::zeros(3, 3), &tol()).unwrap();
        assert!(z.is_psd);
        assert_eq!(z.min_eigenvalue, 0.0);
        let d = psd_check(&DMatrix::from_diagonal_element(1, 1, 1.0).resize(2, 2, 0.0), &tol());
        assert!(d.unwrap().is_psd);
        let ind = psd_check(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]), &tol()).unwrap();
        assert!(!ind.is_psd);
        assert!((ind.min_eigenvalue + 1.0).abs() < 1e-14);
    }

    #[test]
    fn asymmetric_input_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(psd_check(&m, &tol()), Err(Error::AsymmetricInput { .. })));
    }

    #[test]
    fn integer_rank_examples() {
        assert_eq!(integer_rank(&[vec![1, 0], vec![0, 1]]), 2);
        assert_eq!(integer_rank(&[vec![1, 0], vec![1, 1], vec![-1, 1]]), 2);
        assert_eq!(integer_rank(&[vec![2, 4], vec![1, 2]]), 1);
        assert_eq!(integer_rank(&[vec![0, 0, 0]]), 0);
    }

    #[test]
    fn scaled_rank_ignores_roundoff() {
        let noise = DMatrix::from_row_slice(2, 2, &[3e-17, -1e-17, 2e-17, 4e-17]);
        assert_eq!(numeric_rank(&noise, &tol()).unwrap().rank, 2);
        assert_eq!(numeric_rank_scaled(&noise, 1.0, &tol()).unwrap().rank, 0);
        let m = DMatrix::from_row_slice(2, 2, &[1e-3, 0.0, 0.0, 0.0]);
        assert_eq!(numeric_rank_scaled(&m, 1.0, &tol()).unwrap().rank, 1);
    }

    #[test]
    fn marginal_cut_is_flagged() {
        // cut threshold is 3e-9 for a 3x3 matrix
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1e-8, 2e-9]));
        let info = numeric_rank(&m, &tol()).unwrap();
        assert_eq!(info.rank, 2);
        assert!(info.marginal);
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1e-2, 1e-16]));
        let info = numeric_rank(&m, &tol()).unwrap();
        assert_eq!(info.rank, 2);
        assert!(!info.marginal);
    }

    #[test]
    fn inv_sqrt_whitens() {
        let s = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let w = inv_sqrt_spd(&s, 1e-12).unwrap();
        let id = &w * &s * &w;
        assert!(max_abs(&(id - DMatrix::identity(2, 2))) < 1e-12);
        assert!(inv_sqrt_spd(&DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]), 1e-12).is_none());
    }

    #[test]
    fn tolerances_validate() {
        assert!(tol().validate().is_ok());
        let mut t = tol();
        t.generic_trials = 0;
        assert!(t.validate().is_err());
        assert!(tol().with_tol(0.0).validate().is_err());
    }
}
