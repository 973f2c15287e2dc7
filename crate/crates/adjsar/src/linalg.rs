//! Dense linear-algebra helpers shared by the modules.
//!
//! nalgebra is the working matrix type; the eigen and singular value
//! decompositions are delegated to faer.

use crate::error::{Error, Result};
use faer::Side;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub(crate) fn to_faer(a: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(a: &faer::Mat<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// `A⁻¹B` by partially pivoted LU; `None` if the result is not finite.
pub fn lu_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    use faer::linalg::solvers::Solve;
    let x = to_faer(a).partial_piv_lu().solve(to_faer(b));
    let out = from_faer(&x);
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// `AB`.
pub fn matmul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    from_faer(&(to_faer(a) * to_faer(b)))
}

/// `A'B`.
pub fn matmul_tn(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    from_faer(&(to_faer(a).transpose() * to_faer(b)))
}

/// Eigen-decomposition of a symmetric matrix; eigenvalues ascending.
pub fn sym_eigen(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let e = to_faer(a)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = e.S();
    let u = e.U();
    let vals: Vec<f64> = (0..n).map(|i| s[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |i, j| u[(i, j)]);
    Ok((vals, vecs))
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    to_faer(a)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))
}

/// General (complex) eigen-decomposition `A H = H diag(values)`.
pub fn general_eigen(a: &DMatrix<f64>) -> Result<(Vec<Complex64>, DMatrix<Complex64>)> {
    let n = a.nrows();
    let e = to_faer(a).eigen().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = e.S();
    let u = e.U();
    let vals: Vec<Complex64> = (0..n).map(|i| s[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |i, j| u[(i, j)]);
    Ok((vals, vecs))
}

/// Eigenvalues of a general real matrix.
pub fn general_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    to_faer(a)
        .eigenvalues()
        .map_err(|e| Error::Eigen(format!("{e:?}")))
}

/// Full SVD `A = U diag(s) V'`, singular values descending.
pub fn svd(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let (m, n) = a.shape();
    let d = to_faer(a).svd().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let u = d.U();
    let v = d.V();
    let s = d.S();
    let r = m.min(n);
    Ok((
        DMatrix::from_fn(m, m, |i, j| u[(i, j)]),
        (0..r).map(|i| s[i]).collect(),
        DMatrix::from_fn(n, n, |i, j| v[(i, j)]),
    ))
}

/// Singular values, descending.
pub fn singular_values(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    let mut s = to_faer(a)
        .singular_values()
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

/// Orthonormal basis of the right null space of `a` at relative threshold `rel_tol`.
pub fn null_space(a: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    let n = a.ncols();
    let (_, s, v) = svd(a)?;
    let smax = s.first().copied().unwrap_or(0.0);
    let thresh = rel_tol * smax.max(f64::MIN_POSITIVE);
    let rank = s.iter().filter(|&&x| x > thresh).count();
    Ok(v.columns(rank, n - rank).into_owned())
}

/// Numeric rank at relative threshold `rel_tol`.
pub fn numeric_rank(a: &DMatrix<f64>, rel_tol: f64) -> Result<usize> {
    let s = singular_values(a)?;
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&x| x > rel_tol * smax).count())
}

pub fn is_symmetric(a: &DMatrix<f64>, tol: f64) -> bool {
    if a.nrows() != a.ncols() {
        return false;
    }
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (a[(i, j)] - a[(j, i)]).abs() > tol {
                return false;
            }
        }
    }
    true
}

pub fn trace(a: &DMatrix<f64>) -> f64 {
    a.diagonal().sum()
}

/// Spectral (operator 2-) norm.
pub fn norm2(a: &DMatrix<f64>) -> Result<f64> {
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

/// The orthogonal projector `M_X = I − X(X'X)⁻¹X'` held in factored form.
#[derive(Debug, Clone)]
pub struct Annihilator {
    q: DMatrix<f64>,
}

impl Annihilator {
    /// Builds `M_X`; fails with [`Error::RankDeficient`] if `rank(X) < k`.
    pub fn new(x: &DMatrix<f64>) -> Result<Self> {
        let (n, k) = x.shape();
        if k == 0 {
            return Ok(Self { q: DMatrix::zeros(n, 0) });
        }
        if k > n {
            return Err(Error::RankDeficient);
        }
        let svd = x.clone().svd(true, false);
        let s = &svd.singular_values;
        let smax = s.max();
        let smin = s.min();
        if !(smax > 0.0) || smin <= 1e-10 * smax {
            return Err(Error::RankDeficient);
        }
        let u = svd.u.ok_or(Error::RankDeficient)?;
        Ok(Self { q: u.columns(0, k).into_owned() })
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn k(&self) -> usize {
        self.q.ncols()
    }

    /// Orthonormal basis of `col(X)`.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.k() == 0 {
            return v.clone();
        }
        let c = self.q.tr_mul(v);
        v - &self.q * c
    }

    pub fn apply_mat(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        if self.k() == 0 {
            return a.clone();
        }
        let c = self.q.tr_mul(a);
        a - &self.q * c
    }

    /// `tr(M_X A)`.
    pub fn trace_of(&self, a: &DMatrix<f64>) -> f64 {
        if self.k() == 0 {
            return trace(a);
        }
        let qa = self.q.tr_mul(a);
        let mut t = trace(a);
        for j in 0..self.k() {
            t -= qa.row(j).dot(&self.q.column(j).transpose());
        }
        t
    }

    /// Dense `M_X`.
    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::identity(n, n) - &self.q * self.q.transpose()
    }
}

/// Least-squares coefficients `(X'X)⁻¹X'v` for full-column-rank `X`.
pub fn ols(x: &DMatrix<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    if x.ncols() == 0 {
        return Ok(DVector::zeros(0));
    }
    let xtx = x.tr_mul(x);
    let xtv = x.tr_mul(v);
    let chol = xtx.cholesky().ok_or(Error::RankDeficient)?;
    Ok(chol.solve(&xtv))
}

pub(crate) fn hstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let n = blocks.first().map(|b| b.nrows()).unwrap_or(0);
    let k: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(n, k);
    let mut c = 0;
    for b in blocks {
        assert_eq!(b.nrows(), n, "hstack row mismatch");
        out.columns_mut(c, b.ncols()).copy_from(b);
        c += b.ncols();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, k: usize, seed: u64) -> DMatrix<f64> {
        DMatrix::from_fn(n, k, |i, j| {
            let t = (i as f64 + 1.0) * 0.7 + (j as f64 + 1.0) * 1.3 + seed as f64;
            (t * t).sin()
        })
    }

    #[test]
    fn annihilator_is_idempotent_and_kills_x() {
        let x = sample(12, 3, 1);
        let m = Annihilator::new(&x).unwrap();
        let d = m.dense();
        assert!((&d * &d - &d).norm() < 1e-12);
        assert!((&d - d.transpose()).norm() < 1e-12);
        assert!((&d * &x).norm() < 1e-12);
        assert!((m.trace_of(&DMatrix::identity(12, 12)) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn annihilator_rejects_rank_deficient() {
        let mut x = sample(10, 3, 2);
        let c0 = x.column(0).into_owned();
        x.set_column(2, &(c0 * 2.0));
        assert!(matches!(Annihilator::new(&x), Err(Error::RankDeficient)));
    }

    #[test]
    fn sym_eigen_reconstructs() {
        let a = sample(8, 8, 3);
        let s = &a + a.transpose();
        let (vals, vecs) = sym_eigen(&s).unwrap();
        let d = DMatrix::from_diagonal(&DVector::from_vec(vals.clone()));
        assert!((&vecs * d * vecs.transpose() - &s).norm() < 1e-10);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn general_eigen_satisfies_definition() {
        let a = sample(7, 7, 4);
        let (vals, h) = general_eigen(&a).unwrap();
        let ac = a.map(|v| Complex64::new(v, 0.0));
        for (j, &v) in vals.iter().enumerate() {
            let col = h.column(j);
            let r = &ac * col - col * v;
            assert!(r.norm() < 1e-9);
        }
    }

    #[test]
    fn faer_products_match_nalgebra() {
        let a = sample(9, 9, 5) + DMatrix::identity(9, 9) * 4.0;
        let b = sample(9, 4, 6);
        assert!((matmul(&a, &b) - &a * &b).norm() < 1e-12);
        assert!((matmul_tn(&b, &a) - b.transpose() * &a).norm() < 1e-12);
        let x = lu_solve(&a, &b).unwrap();
        assert!((&a * x - &b).norm() < 1e-10);
    }

    #[test]
    fn null_space_of_rank_one() {
        let u = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let a = &u * u.transpose();
        let ns = null_space(&a, 1e-10).unwrap();
        assert_eq!(ns.ncols(), 2);
        assert!((&a * &ns).norm() < 1e-12);
    }
}
