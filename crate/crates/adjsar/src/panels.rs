//! Network fixed-effects panels with the LLL within transformation, and the
//! spatial error model with its REML-equivalent adjusted likelihood.

use crate::error::{Error, Result};
use crate::estimate::{self, EstimateOptions, EstimateResult, Method};
use crate::io::DataTable;
use crate::linalg::{self, Annihilator};
use crate::optim::{brent_max, refined_grid};
use crate::sar::{SarData, SpatialContext};
use crate::spectral::ParamSpace;
use crate::weights::{self, WeightsMatrix};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// Householder completion `F` (`m × (m−1)`) of `ι_m/√m`: `F'F = I`, `FF' = I − ιι'/m`.
pub fn centering_basis(m: usize) -> DMatrix<f64> {
    if m <= 1 {
        return DMatrix::zeros(m, 0);
    }
    let mut v = DVector::from_element(m, 1.0 / (m as f64).sqrt());
    v[0] -= 1.0;
    let vv = v.norm_squared();
    let h = DMatrix::identity(m, m) - &v * v.transpose() * (2.0 / vv);
    h.columns(1, m - 1).into_owned()
}

/// Helmert completion of `ι_m/√m`, an alternative to [`centering_basis`].
pub fn helmert_basis(m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, m.saturating_sub(1), |i, j| {
        let c = (j + 1) as f64;
        let norm = (c * (c + 1.0)).sqrt();
        if i <= j {
            1.0 / norm
        } else if i == j + 1 {
            -c / norm
        } else {
            0.0
        }
    })
}

/// Block-diagonal matrix of the per-network bases.
fn block_basis(sizes: &[usize], basis: fn(usize) -> DMatrix<f64>) -> DMatrix<f64> {
    let n: usize = sizes.iter().sum();
    let nstar = n - sizes.len();
    let mut f = DMatrix::zeros(n, nstar);
    let (mut r, mut c) = (0, 0);
    for &m in sizes {
        f.view_mut((r, c), (m, m - 1)).copy_from(&basis(m));
        r += m;
        c += m - 1;
    }
    f
}

/// Fixed part of a network design: the blocks `W_r`, `W = ⊕W_r`, and the transformed `W*`.
#[derive(Debug, Clone)]
pub struct NetworkDesign {
    blocks: Vec<WeightsMatrix>,
    sizes: Vec<usize>,
    ctx: Arc<SpatialContext>,
    lll: std::result::Result<LllContext, usize>,
}

/// `F = ⊕F_r` and the context of `W* = F'WF`.
#[derive(Debug, Clone)]
pub struct LllContext {
    pub f: DMatrix<f64>,
    pub ctx: Arc<SpatialContext>,
}

impl NetworkDesign {
    pub fn new(blocks: Vec<WeightsMatrix>) -> Result<Self> {
        Self::with_basis(blocks, centering_basis)
    }

    /// Uses `basis(m)` as the completion of `ι_m` in the within transformation.
    pub fn with_basis(blocks: Vec<WeightsMatrix>, basis: fn(usize) -> DMatrix<f64>) -> Result<Self> {
        if blocks.iter().any(|b| b.n() < 2) {
            return Err(Error::InvalidArgument("every network needs at least two members".into()));
        }
        let sizes: Vec<usize> = blocks.iter().map(WeightsMatrix::n).collect();
        let w = weights::block_diag(&blocks)?;
        let ctx = SpatialContext::new(w.clone())?;
        let lll = match blocks.iter().position(|b| b.row_sums().iter().any(|s| (s - 1.0).abs() > 1e-10)) {
            Some(r) => Err(r),
            None => {
                let f = block_basis(&sizes, basis);
                let wstar = linalg::matmul_tn(&f, &linalg::matmul(w.entries(), &f));
                let ctx = SpatialContext::new(WeightsMatrix::general(wstar, w.normalization()))?;
                Ok(LllContext { f, ctx })
            }
        };
        Ok(Self { blocks, sizes, ctx, lll })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn blocks(&self) -> &[WeightsMatrix] {
        &self.blocks
    }

    pub fn n(&self) -> usize {
        self.ctx.n()
    }

    pub fn ctx(&self) -> &Arc<SpatialContext> {
        &self.ctx
    }

    /// Fails with [`Error::LllInapplicable`] unless every `W_r ι = ι`.
    pub fn lll(&self) -> Result<&LllContext> {
        self.lll.as_ref().map_err(|&block| Error::LllInapplicable { block })
    }

    /// `⊕ι_{m_r}`.
    pub fn group_dummies(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n(), self.sizes.len());
        let mut r = 0;
        for (j, &m) in self.sizes.iter().enumerate() {
            d.view_mut((r, j), (m, 1)).fill(1.0);
            r += m;
        }
        d
    }

    /// `X = (X̃, WX̃, ⊕ι)`.
    pub fn design_matrix(&self, xt: &DMatrix<f64>) -> DMatrix<f64> {
        let wx = linalg::matmul(self.ctx.w().entries(), xt);
        linalg::hstack(&[xt, &wx, &self.group_dummies()])
    }
}

/// Observed network panel `y = λWy + X̃γ + WX̃δ + (⊕ι)α + σε`.
#[derive(Debug, Clone)]
pub struct NetworkPanel {
    design: Arc<NetworkDesign>,
    xt: DMatrix<f64>,
    y: DVector<f64>,
}

/// The LLL-transformed system `y* = λW*y* + X*β* + σε*`.
#[derive(Debug, Clone)]
pub struct LllSystem {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub data: SarData,
}

impl NetworkPanel {
    pub fn new(design: Arc<NetworkDesign>, xt: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let n = design.n();
        if xt.nrows() != n || y.len() != n {
            return Err(Error::Dimension(format!("panel has {n} units, data has {} rows", xt.nrows())));
        }
        Ok(Self { design, xt, y })
    }

    /// Reads a long-format table with columns `network_id, unit_id, y, x1..xk̃`,
    /// sorted by network; block sizes are validated against `blocks`.
    pub fn from_long_table(table: &DataTable, blocks: Vec<WeightsMatrix>) -> Result<Self> {
        let net = table.column("network_id")?;
        let mut sizes = Vec::new();
        let mut last = f64::NAN;
        for &g in net.iter() {
            if g != last {
                sizes.push(0usize);
                last = g;
            }
            *sizes.last_mut().expect("nonempty") += 1;
        }
        let expect: Vec<usize> = blocks.iter().map(WeightsMatrix::n).collect();
        if sizes != expect {
            return Err(Error::Dimension(format!("network sizes {sizes:?} do not match weights blocks {expect:?}")));
        }
        let y = table.column("y")?;
        let xt = table.matrix_without(&["network_id", "unit_id", "y"]);
        Self::new(Arc::new(NetworkDesign::new(blocks)?), xt, y)
    }

    pub fn design(&self) -> &Arc<NetworkDesign> {
        &self.design
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn xt(&self) -> &DMatrix<f64> {
        &self.xt
    }

    pub fn k_tilde(&self) -> usize {
        self.xt.ncols()
    }

    /// The full-sample SAR data with `X = (X̃, WX̃, ⊕ι)`.
    pub fn sar_data(&self) -> Result<SarData> {
        SarData::new(self.design.ctx.clone(), self.design.design_matrix(&self.xt), self.y.clone())
    }

    /// `y*_r = F'_r y_r`, `W*_r = F'_r W_r F_r`, `X* = (F'X̃, W*F'X̃)`.
    pub fn lll_transform(&self) -> Result<LllSystem> {
        let lll = self.design.lll()?;
        let y = lll.f.tr_mul(&self.y);
        let xs = lll.f.tr_mul(&self.xt);
        let wxs = linalg::matmul(lll.ctx.w().entries(), &xs);
        let x = linalg::hstack(&[&xs, &wxs]);
        let data = SarData::new(lll.ctx.clone(), x.clone(), y.clone())?;
        Ok(LllSystem { y, x, data })
    }
}

/// `l_LLL(σ², λ)`, the Gaussian log-likelihood of the transformed system with `β*` profiled out.
pub fn lll_loglik(sys: &LllSystem, sigma2: f64, lambda: f64) -> f64 {
    sys.data.loglik_sigma(sigma2, lambda)
}

/// `λ̂_LLL`: the QMLE of the transformed system over `Λ(W*)`.
pub fn lll_estimator(sys: &LllSystem, opts: &EstimateOptions) -> Result<EstimateResult> {
    estimate::qmle_with(&sys.data, opts)
}

/// True iff `‖M_X W X‖ < tol·‖WX‖`, i.e. `col(X)` is invariant under `W`.
pub fn invariant_subspace_check(w: &WeightsMatrix, x: &DMatrix<f64>, tol: f64) -> Result<bool> {
    let wx = linalg::matmul(w.entries(), x);
    let m = Annihilator::new(x)?;
    Ok(m.apply_mat(&wx).norm() < tol * wx.norm().max(f64::MIN_POSITIVE))
}

/// Gaussian log-likelihood of `Dy` for `D` with `DX = 0`, up to a constant,
/// when `y` has covariance `σ²(A'A)⁻¹` with `A = S(λ)`.
pub fn dy_loglik(ctx: &SpatialContext, d: &DMatrix<f64>, y: &DVector<f64>, sigma2: f64, lambda: f64) -> Result<f64> {
    let st = ctx.s_matrix(lambda).transpose();
    let z = st.lu().solve(&d.transpose()).ok_or(Error::SingularS(lambda))?;
    let r = z.qr().r();
    let dy = d * y;
    let v = r.tr_solve_upper_triangular(&dy).ok_or(Error::SingularS(lambda))?;
    let logdet: f64 = 2.0 * r.diagonal().iter().map(|v| v.abs().ln()).sum::<f64>();
    let rows = d.nrows() as f64;
    Ok(-0.5 * (rows * sigma2.ln() + logdet) - 0.5 * v.norm_squared() / sigma2)
}

/// Spatial error model `y = Xβ + u`, `u = λWu + σε`.
#[derive(Debug, Clone)]
pub struct SemModel {
    ctx: Arc<SpatialContext>,
    x: DMatrix<f64>,
    y: DVector<f64>,
    wy: DVector<f64>,
    wx: DMatrix<f64>,
}

/// Per-`λ` quantities of the SEM likelihoods.
struct SemEval {
    yuy: f64,
    logdet_a: f64,
    logdet_zz: f64,
}

impl SemModel {
    pub fn new(ctx: Arc<SpatialContext>, x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let n = ctx.n();
        if x.nrows() != n || y.len() != n {
            return Err(Error::Dimension("SEM data do not match W".into()));
        }
        if x.ncols() + 2 > n {
            return Err(Error::Dimension("need k <= n - 2".into()));
        }
        Annihilator::new(&x)?;
        let wy = ctx.w().mul_vec(&y);
        let wx = linalg::matmul(ctx.w().entries(), &x);
        Ok(Self { ctx, x, y, wy, wx })
    }

    pub fn with_y(&self, y: DVector<f64>) -> Result<Self> {
        Self::new(self.ctx.clone(), self.x.clone(), y)
    }

    pub fn n(&self) -> usize {
        self.ctx.n()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn ctx(&self) -> &Arc<SpatialContext> {
        &self.ctx
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// `(Ay, AX)` with `A = S(λ)`.
    fn transformed(&self, lambda: f64) -> (DVector<f64>, DMatrix<f64>) {
        (&self.y - &self.wy * lambda, &self.x - &self.wx * lambda)
    }

    fn eval(&self, lambda: f64) -> Result<SemEval> {
        let (ay, z) = self.transformed(lambda);
        let m = Annihilator::new(&z)?;
        let zz = z.tr_mul(&z);
        let chol = zz.cholesky().ok_or(Error::RankDeficient)?;
        let logdet_zz = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(SemEval { yuy: m.apply(&ay).norm_squared(), logdet_a: self.ctx.log_det_s(lambda), logdet_zz })
    }

    /// `y'U(λ)y` with `U = A'M_{AX}A`.
    pub fn yuy(&self, lambda: f64) -> Result<f64> {
        Ok(self.eval(lambda)?.yuy)
    }

    /// `−(n/2) log σ² − y'Uy/(2σ²) + log|det A|`.
    pub fn profile_loglik(&self, sigma2: f64, lambda: f64) -> Result<f64> {
        let e = self.eval(lambda)?;
        Ok(-0.5 * self.n() as f64 * sigma2.ln() - e.yuy / (2.0 * sigma2) + e.logdet_a)
    }

    /// `−((n−k)/2) log σ² − y'Uy/(2σ²) + log|det A| − ½ log det(X'A'AX)`.
    pub fn adjusted_loglik(&self, sigma2: f64, lambda: f64) -> Result<f64> {
        let e = self.eval(lambda)?;
        let nk = (self.n() - self.k()) as f64;
        Ok(-0.5 * nk * sigma2.ln() - e.yuy / (2.0 * sigma2) + e.logdet_a - 0.5 * e.logdet_zz)
    }

    /// `−((n−k)/2) log(y'Uy) + log|det A| − ½ log det(X'A'AX)`.
    pub fn adjusted_profile(&self, lambda: f64) -> Result<f64> {
        let e = self.eval(lambda)?;
        let nk = (self.n() - self.k()) as f64;
        Ok(-0.5 * nk * e.yuy.ln() + e.logdet_a - 0.5 * e.logdet_zz)
    }

    /// `σ̂²_a(λ) = y'Uy/(n−k)`.
    pub fn sigma2_adjusted(&self, lambda: f64) -> Result<f64> {
        Ok(self.yuy(lambda)? / (self.n() - self.k()) as f64)
    }

    /// Score of [`SemModel::adjusted_loglik`] in `(σ², λ)`.
    pub fn adjusted_score(&self, sigma2: f64, lambda: f64) -> Result<[f64; 2]> {
        let (ay, z) = self.transformed(lambda);
        let zz = z.tr_mul(&z);
        let chol = zz.cholesky().ok_or(Error::RankDeficient)?;
        let gamma = chol.solve(&z.tr_mul(&ay));
        let e = &ay - &z * &gamma;
        let yuy = e.norm_squared();
        let v = &self.y - &self.x * &gamma;
        let wv = self.ctx.w().mul_vec(&v);
        let tr_zwx = chol.solve(&z.tr_mul(&self.wx)).trace();
        let nk = (self.n() - self.k()) as f64;
        Ok([
            -nk / (2.0 * sigma2) + yuy / (2.0 * sigma2 * sigma2),
            e.dot(&wv) / sigma2 - self.ctx.tr_g(lambda) + tr_zwx,
        ])
    }

    /// Maximizer of [`SemModel::adjusted_profile`] over the padded `Λ`.
    pub fn estimate(&self, opts: &EstimateOptions) -> Result<SemEstimate> {
        let space = self.ctx.lambda_space()?.clone();
        let (lo, hi) = space.padded(opts.pad);
        let f = |l: f64| self.adjusted_profile(l).unwrap_or(f64::NEG_INFINITY);
        let xs = refined_grid(lo, hi, opts.grid_size, opts.refine_levels);
        let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let i = (0..fs.len()).max_by(|&a, &b| fs[a].total_cmp(&fs[b])).ok_or(Error::PerfectFit(0.0))?;
        let (a, b) = (xs[i.saturating_sub(1)], xs[(i + 1).min(xs.len() - 1)]);
        let (lambda, _) = brent_max(f, a, b, opts.xtol_max, 200);
        let (ay, z) = self.transformed(lambda);
        let beta = linalg::ols(&z, &ay)?;
        Ok(SemEstimate {
            lambda_hat: lambda,
            beta_hat: beta.as_slice().to_vec(),
            sigma2_hat: self.sigma2_adjusted(lambda)?,
            space_used: space,
            boundary: i == 0 || i + 1 == xs.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SemEstimate {
    pub lambda_hat: f64,
    pub beta_hat: Vec<f64>,
    pub sigma2_hat: f64,
    pub space_used: ParamSpace,
    pub boundary: bool,
}

/// Convenience: aML and LLL estimates for one panel.
pub fn panel_estimates(panel: &NetworkPanel, opts: &EstimateOptions) -> Result<(EstimateResult, EstimateResult)> {
    let aml = estimate::estimate(&panel.sar_data()?, Method::Aqmle, opts)?;
    let lll = lll_estimator(&panel.lll_transform()?, opts)?;
    Ok((aml, lll))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sar::{ErrorDist, ReducedForm};
    use crate::weights::Normalization;
    use rand::{Rng, SeedableRng};

    fn blocks(r: usize, m: usize, seed: u64, mode: Normalization) -> Vec<WeightsMatrix> {
        (0..r)
            .map(|i| {
                let g = weights::watts_strogatz(m, 2, 0.3, seed * 100 + i as u64).unwrap();
                weights::normalize(&g, mode).unwrap()
            })
            .collect()
    }

    #[test]
    fn centering_bases_are_orthonormal_completions() {
        for basis in [centering_basis, helmert_basis] {
            let f = basis(7);
            assert!((f.transpose() * &f - DMatrix::identity(6, 6)).amax() < 1e-12);
            let m = DMatrix::identity(7, 7) - DMatrix::from_element(7, 7, 1.0 / 7.0);
            assert!((&f * f.transpose() - m).amax() < 1e-12);
            assert!((f.transpose() * DVector::from_element(7, 1.0)).amax() < 1e-12);
        }
    }

    #[test]
    fn spectral_blocks_reject_lll() {
        let d = NetworkDesign::new(blocks(2, 8, 1, Normalization::Spectral)).unwrap();
        let e = d.lll().unwrap_err();
        assert!(matches!(e, Error::LllInapplicable { .. }));
    }

    #[test]
    fn pure_panel_likelihoods_agree() {
        let design = Arc::new(NetworkDesign::new(blocks(3, 8, 2, Normalization::Row)).unwrap());
        let n = design.n();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let y = DVector::from_fn(n, |_, _| rng.random::<f64>());
        let panel = NetworkPanel::new(design.clone(), DMatrix::zeros(n, 0), y).unwrap();
        let sar = SarData::new(design.ctx().clone(), design.group_dummies(), panel.y().clone()).unwrap();
        let sys = panel.lll_transform().unwrap();
        let mut diffs = Vec::new();
        for i in 1..40 {
            let l = -0.9 + 1.8 * i as f64 / 40.0;
            diffs.push(sar.adjusted_loglik_sigma(1.3, l) - lll_loglik(&sys, 1.3, l));
        }
        let spread = diffs.iter().fold(0.0f64, |a, d| a.max((d - diffs[0]).abs()));
        assert!(spread < 1e-8, "{spread}");
    }

    #[test]
    fn likelihood_is_basis_invariant() {
        let b = blocks(2, 6, 3, Normalization::Row);
        let d1 = Arc::new(NetworkDesign::new(b.clone()).unwrap());
        let d2 = Arc::new(NetworkDesign::with_basis(b, helmert_basis).unwrap());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let xt = DMatrix::from_fn(12, 1, |_, _| rng.random::<f64>());
        let y = DVector::from_fn(12, |_, _| rng.random::<f64>());
        let s1 = NetworkPanel::new(d1, xt.clone(), y.clone()).unwrap().lll_transform().unwrap();
        let s2 = NetworkPanel::new(d2, xt, y).unwrap().lll_transform().unwrap();
        for l in [-0.5, 0.0, 0.7] {
            assert!((lll_loglik(&s1, 0.8, l) - lll_loglik(&s2, 0.8, l)).abs() < 1e-9);
        }
    }

    #[test]
    fn estimators_differ_with_covariates() {
        let design = Arc::new(NetworkDesign::new(blocks(3, 10, 4, Normalization::Row)).unwrap());
        let n = design.n();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let xt = DMatrix::from_fn(n, 2, |_, _| rng.random::<f64>());
        let x = design.design_matrix(&xt);
        let rf = ReducedForm::new(design.ctx(), 0.4).unwrap();
        let eps = ErrorDist::Normal.sample_vec(n, &mut rng);
        let y = rf.apply(&(&x * DVector::from_element(x.ncols(), 1.0)), 1.0, &eps);
        let panel = NetworkPanel::new(design, xt, y).unwrap();
        let (a, l) = panel_estimates(&panel, &EstimateOptions::default()).unwrap();
        assert!((a.lambda_hat - l.lambda_hat).abs() > 1e-6);
    }

    #[test]
    fn invariant_subspace_examples() {
        let w = weights::group_interaction(3, 4).unwrap();
        let d = NetworkDesign::new(vec![weights::group_interaction(1, 4).unwrap(); 3]).unwrap();
        assert!(invariant_subspace_check(&w, &d.group_dummies(), 1e-10).unwrap());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x = DMatrix::from_fn(12, 2, |_, _| rng.random::<f64>());
        assert!(!invariant_subspace_check(&w, &x, 1e-10).unwrap());
    }

    #[test]
    fn sar_with_invariant_design_matches_dy_likelihood() {
        let w = weights::group_interaction(3, 5).unwrap();
        let ctx = SpatialContext::new(w).unwrap();
        let d = NetworkDesign::new(vec![weights::group_interaction(1, 5).unwrap(); 3]).unwrap();
        let x = d.group_dummies();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let y = DVector::from_fn(15, |_, _| rng.random::<f64>());
        let data = SarData::new(ctx.clone(), x.clone(), y.clone()).unwrap();
        let k = DMatrix::from_fn(15, 12, |_, _| rng.random::<f64>() - 0.5);
        let dm = Annihilator::new(&x).unwrap().apply_mat(&k).transpose();
        let diffs: Vec<f64> = [-0.3, 0.1, 0.5]
            .iter()
            .map(|&l| data.adjusted_loglik_sigma(0.9, l) - dy_loglik(&ctx, &dm, &y, 0.9, l).unwrap())
            .collect();
        assert!(diffs.iter().all(|v| (v - diffs[0]).abs() < 1e-8), "{diffs:?}");
    }

    fn sem_instance(seed: u64) -> SemModel {
        let g = weights::watts_strogatz(20, 2, 0.3, seed).unwrap();
        let ctx = SpatialContext::new(weights::normalize(&g, Normalization::Row).unwrap()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(20, 2, |_, j| if j == 0 { 1.0 } else { rng.random::<f64>() });
        let y = DVector::from_fn(20, |_, _| rng.random::<f64>());
        SemModel::new(ctx, x, y).unwrap()
    }

    #[test]
    fn sem_score_matches_finite_differences() {
        let m = sem_instance(3);
        let h = 1e-6;
        for l in [-0.5, 0.1, 0.6] {
            let s = m.adjusted_score(0.7, l).unwrap();
            let d0 = (m.adjusted_loglik(0.7 + h, l).unwrap() - m.adjusted_loglik(0.7 - h, l).unwrap()) / (2.0 * h);
            let d1 = (m.adjusted_loglik(0.7, l + h).unwrap() - m.adjusted_loglik(0.7, l - h).unwrap()) / (2.0 * h);
            assert!((s[0] - d0).abs() < 1e-6 * d0.abs().max(1.0), "{s:?} {d0}");
            assert!((s[1] - d1).abs() < 1e-6 * d1.abs().max(1.0), "{s:?} {d1}");
        }
    }

    #[test]
    fn sem_at_zero_is_classical_reml() {
        let m = sem_instance(4);
        let ann = Annihilator::new(m.x()).unwrap();
        let expect = ann.apply(m.y()).norm_squared() / 18.0;
        assert!((m.sigma2_adjusted(0.0).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn sem_matches_dy_likelihood() {
        let m = sem_instance(5);
        let f = Annihilator::new(m.x()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let k = DMatrix::from_fn(20, 18, |_, _| rng.random::<f64>() - 0.5);
        let d = f.apply_mat(&k).transpose();
        let diffs: Vec<f64> = [-0.6, -0.1, 0.3, 0.8]
            .iter()
            .map(|&l| m.adjusted_loglik(1.1, l).unwrap() - dy_loglik(m.ctx(), &d, m.y(), 1.1, l).unwrap())
            .collect();
        assert!(diffs.iter().all(|v| (v - diffs[0]).abs() < 1e-8), "{diffs:?}");
    }

    #[test]
    fn sem_estimate_in_space() {
        let m = sem_instance(6);
        let e = m.estimate(&EstimateOptions::default()).unwrap();
        assert!(e.space_used.contains(e.lambda_hat));
        assert!(e.sigma2_hat > 0.0);
    }
}
