//! SAR model objects, likelihoods, scores and the estimating function.
//!
//! Every `λ`-evaluation runs in `O(n)`: the residual quadratic form is
//! `Q(λ) = a − 2λb + λ²c` with `a = y'My`, `b = y'MWy`, `c = (Wy)'M(Wy)`, and
//! all traces come from the eigen-kernels of [`SpectralInfo`].

use crate::error::{Error, Result};
use crate::linalg::{self, Annihilator};
use crate::spectral::{self, AdjustedSpaceReport, EigenKernel, ParamSpace, SpectralInfo, TraceSign};
use crate::weights::WeightsMatrix;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// `W` together with its cached spectral analysis.
#[derive(Debug, Clone)]
pub struct SpatialContext {
    w: WeightsMatrix,
    info: SpectralInfo,
    unit: EigenKernel,
    lambda: Option<ParamSpace>,
}

impl SpatialContext {
    pub fn new(w: WeightsMatrix) -> Result<Arc<Self>> {
        let info = SpectralInfo::new(&w)?;
        let unit = info.unit_kernel();
        let lambda = spectral::lambda_space(&info).ok();
        Ok(Arc::new(Self { w, info, unit, lambda }))
    }

    pub fn w(&self) -> &WeightsMatrix {
        &self.w
    }

    pub fn info(&self) -> &SpectralInfo {
        &self.info
    }

    pub fn n(&self) -> usize {
        self.w.n()
    }

    /// `Λ`.
    pub fn lambda_space(&self) -> Result<&ParamSpace> {
        self.lambda.as_ref().ok_or(Error::MissingSignedEigenvalue)
    }

    /// `log|det S(λ)|`.
    pub fn log_det_s(&self, lambda: f64) -> f64 {
        self.unit.tr_log(lambda)
    }

    /// `tr G(λ)`.
    pub fn tr_g(&self, lambda: f64) -> f64 {
        self.unit.tr_g(lambda)
    }

    /// `tr G(λ)²`.
    pub fn tr_g2(&self, lambda: f64) -> f64 {
        self.unit.tr_g2(lambda)
    }

    /// Dense `S(λ) = I − λW`.
    pub fn s_matrix(&self, lambda: f64) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::identity(n, n) - self.w.entries() * lambda
    }

    /// Dense `S(λ)⁻¹`.
    pub fn s_inverse(&self, lambda: f64) -> Result<DMatrix<f64>> {
        let n = self.n();
        linalg::lu_solve(&self.s_matrix(lambda), &DMatrix::identity(n, n)).ok_or(Error::SingularS(lambda))
    }

    /// Dense `G(λ) = W S(λ)⁻¹`.
    pub fn g_matrix(&self, lambda: f64) -> Result<DMatrix<f64>> {
        linalg::lu_solve(&self.s_matrix(lambda), self.w.entries()).ok_or(Error::SingularS(lambda))
    }

    /// Reciprocals of the nonzero real eigenvalues, ascending.
    pub fn real_poles(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self
            .info
            .real_eigenvalues()
            .iter()
            .filter(|e| e.value.abs() > 1e-12)
            .map(|e| 1.0 / e.value)
            .collect();
        p.sort_by(f64::total_cmp);
        p
    }
}

/// Parameters `(λ, β, σ²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarParams {
    pub lambda: f64,
    pub beta: Vec<f64>,
    pub sigma2: f64,
}

/// Observed SAR data `(y, X, W)` with cached projector and kernels.
#[derive(Debug, Clone)]
pub struct SarData {
    ctx: Arc<SpatialContext>,
    x: DMatrix<f64>,
    ann: Annihilator,
    kernel: EigenKernel,
    adjusted: AdjustedSpaceReport,
    y: DVector<f64>,
    wy: DVector<f64>,
    my: DVector<f64>,
    mwy: DVector<f64>,
    quad: (f64, f64, f64),
}

impl SarData {
    /// Builds the data object; `X` must have full column rank and `k ≤ n − 2`.
    pub fn new(ctx: Arc<SpatialContext>, x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let mut d = Self::design(ctx, x)?;
        d.set_y(y)?;
        Ok(d)
    }

    /// Builds the design part only; `y` is zero until [`SarData::set_y`].
    pub fn design(ctx: Arc<SpatialContext>, x: DMatrix<f64>) -> Result<Self> {
        let n = ctx.n();
        if x.nrows() != n {
            return Err(Error::Dimension(format!("X has {} rows, W is {n}x{n}", x.nrows())));
        }
        if x.ncols() + 2 > n {
            return Err(Error::Dimension(format!("need k <= n - 2 (k = {}, n = {n})", x.ncols())));
        }
        let ann = Annihilator::new(&x)?;
        let mut kernel = ctx.info.kernel(&ann);
        let adjusted = spectral::adjusted_space_report(&ctx.info, &kernel, spectral::default_trace_tol(n));
        let ctol = spectral::TOL_CLUSTER * ctx.info.norm().max(f64::MIN_POSITIVE);
        for r in &adjusted.visited {
            if r.sign != TraceSign::Zero {
                continue;
            }
            let spread = ctx
                .info
                .real_eigenvalues()
                .iter()
                .find(|e| e.value == r.omega)
                .map_or(0.0, |e| {
                    e.indices.iter().map(|&i| (ctx.info.values()[i].re - e.value).abs()).fold(0.0, f64::max)
                });
            kernel.snap_zero(r.omega, spread + ctol);
        }
        Ok(Self {
            ctx,
            x,
            ann,
            kernel,
            adjusted,
            y: DVector::zeros(n),
            wy: DVector::zeros(n),
            my: DVector::zeros(n),
            mwy: DVector::zeros(n),
            quad: (0.0, 0.0, 0.0),
        })
    }

    /// Replaces `y`, updating the quadratic coefficients.
    pub fn set_y(&mut self, y: DVector<f64>) -> Result<()> {
        if y.len() != self.n() {
            return Err(Error::Dimension(format!("y has length {}, expected {}", y.len(), self.n())));
        }
        self.wy = self.ctx.w.mul_vec(&y);
        self.my = self.ann.apply(&y);
        self.mwy = self.ann.apply(&self.wy);
        self.quad = (self.my.norm_squared(), self.my.dot(&self.mwy), self.mwy.norm_squared());
        self.y = y;
        Ok(())
    }

    pub fn with_y(&self, y: DVector<f64>) -> Result<Self> {
        let mut d = self.clone();
        d.set_y(y)?;
        Ok(d)
    }

    pub fn ctx(&self) -> &Arc<SpatialContext> {
        &self.ctx
    }

    pub fn n(&self) -> usize {
        self.ctx.n()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn wy(&self) -> &DVector<f64> {
        &self.wy
    }

    pub fn annihilator(&self) -> &Annihilator {
        &self.ann
    }

    /// Eigen-kernel of `M_X` with removable singularities snapped to zero weight.
    pub fn m_kernel(&self) -> &EigenKernel {
        &self.kernel
    }

    /// `(a, b, c)` of `Q(λ) = a − 2λb + λ²c`.
    pub fn quad(&self) -> (f64, f64, f64) {
        self.quad
    }

    /// `Λ`.
    pub fn lambda_space(&self) -> Result<&ParamSpace> {
        self.ctx.lambda_space()
    }

    /// `Λ_a`.
    pub fn adjusted_space(&self) -> Result<&ParamSpace> {
        if self.ctx.info.omega_min().map_or(true, |v| v >= 0.0)
            || self.ctx.info.omega_max_real().map_or(true, |v| v <= 0.0)
        {
            return Err(Error::MissingSignedEigenvalue);
        }
        self.adjusted
            .space
            .as_ref()
            .ok_or_else(|| Error::Assumption2(self.adjusted.failure.clone().unwrap_or_default()))
    }

    pub fn adjusted_report(&self) -> &AdjustedSpaceReport {
        &self.adjusted
    }

    /// `Q(λ) = y'S'(λ) M_X S(λ) y`.
    pub fn resid_qf(&self, lambda: f64) -> f64 {
        let (a, b, c) = self.quad;
        (a - 2.0 * lambda * b + lambda * lambda * c).max(0.0)
    }

    /// `y'W' M_X S(λ) y`.
    pub fn cross_qf(&self, lambda: f64) -> f64 {
        let (_, b, c) = self.quad;
        b - lambda * c
    }

    fn checked_qf(&self, lambda: f64) -> Result<f64> {
        let q = self.resid_qf(lambda);
        if q <= 1e-14 * self.y.norm_squared().max(f64::MIN_POSITIVE) {
            return Err(Error::PerfectFit(lambda));
        }
        Ok(q)
    }

    /// `S(λ)y`.
    pub fn sy(&self, lambda: f64) -> DVector<f64> {
        &self.y - &self.wy * lambda
    }

    /// `β̂(λ) = (X'X)⁻¹X'S(λ)y`.
    pub fn beta_hat(&self, lambda: f64) -> Result<DVector<f64>> {
        linalg::ols(&self.x, &self.sy(lambda))
    }

    /// `σ̂²_ML(λ) = Q(λ)/n`.
    pub fn sigma2_ml(&self, lambda: f64) -> Result<f64> {
        Ok(self.checked_qf(lambda)? / self.n() as f64)
    }

    /// `σ̂²_aML(λ) = n/(n−k)·σ̂²_ML(λ)`.
    pub fn sigma2_aml(&self, lambda: f64) -> Result<f64> {
        let n = self.n() as f64;
        Ok(self.sigma2_ml(lambda)? * (n / (n - self.k() as f64)))
    }

    /// Profile log-likelihood `−(n/2) log σ̂²_ML(λ) + log|det S(λ)|`.
    pub fn profile_loglik(&self, lambda: f64) -> Result<f64> {
        let n = self.n() as f64;
        let q = self.checked_qf(lambda)?;
        Ok(-0.5 * n * (q / n).ln() + self.ctx.log_det_s(lambda))
    }

    /// Profile log-likelihood without the perfect-fit check (for optimizers).
    pub fn profile_loglik_raw(&self, lambda: f64) -> f64 {
        let n = self.n() as f64;
        -0.5 * n * (self.resid_qf(lambda) / n).ln() + self.ctx.log_det_s(lambda)
    }

    /// `dl/dλ = n·y'W'MSy/Q − tr G`.
    pub fn profile_score(&self, lambda: f64) -> f64 {
        self.n() as f64 * self.cross_qf(lambda) / self.resid_qf(lambda) - self.ctx.tr_g(lambda)
    }

    /// Score of `l(σ², λ)` with `β` profiled out.
    pub fn profile_score_pair(&self, sigma2: f64, lambda: f64) -> [f64; 2] {
        let n = self.n() as f64;
        let q = self.resid_qf(lambda);
        [
            -n / (2.0 * sigma2) + q / (2.0 * sigma2 * sigma2),
            self.cross_qf(lambda) / sigma2 - self.ctx.tr_g(lambda),
        ]
    }

    /// `E s(σ², λ) = [−k/(2σ²), tr(M_X G) − tr G]`, independent of `β`.
    pub fn score_expectation(&self, sigma2: f64, lambda: f64) -> [f64; 2] {
        [-(self.k() as f64) / (2.0 * sigma2), self.kernel.tr_g(lambda) - self.ctx.tr_g(lambda)]
    }

    /// Recentered score `s(σ², λ) − E s(σ², λ)`.
    pub fn adjusted_score_pair(&self, sigma2: f64, lambda: f64) -> [f64; 2] {
        let nk = (self.n() - self.k()) as f64;
        let q = self.resid_qf(lambda);
        [
            -nk / (2.0 * sigma2) + q / (2.0 * sigma2 * sigma2),
            self.cross_qf(lambda) / sigma2 - self.kernel.tr_g(lambda),
        ]
    }

    /// `tr(M_X G(λ))`.
    pub fn tr_mg(&self, lambda: f64) -> f64 {
        self.kernel.tr_g(lambda)
    }

    /// `s_a2(λ) = (n−k)·y'W'MSy/Q − tr(M_X G)`.
    pub fn adjusted_score(&self, lambda: f64) -> f64 {
        let nk = (self.n() - self.k()) as f64;
        nk * self.cross_qf(lambda) / self.resid_qf(lambda) - self.kernel.tr_g(lambda)
    }

    /// `l_a(λ) = −((n−k)/2) log Q(λ) + Re tr(M_X log S(λ))`.
    pub fn adjusted_loglik(&self, lambda: f64) -> Result<f64> {
        let q = self.checked_qf(lambda)?;
        Ok(self.adjusted_loglik_from_qf(lambda, q))
    }

    /// `l_a(λ)` without the perfect-fit check.
    pub fn adjusted_loglik_raw(&self, lambda: f64) -> f64 {
        self.adjusted_loglik_from_qf(lambda, self.resid_qf(lambda))
    }

    fn adjusted_loglik_from_qf(&self, lambda: f64, q: f64) -> f64 {
        let nk = (self.n() - self.k()) as f64;
        -0.5 * nk * q.ln() + self.kernel.tr_log(lambda)
    }

    /// `−(n/2) log σ² − Q(λ)/(2σ²) + log|det S(λ)|`.
    pub fn loglik_sigma(&self, sigma2: f64, lambda: f64) -> f64 {
        -0.5 * self.n() as f64 * sigma2.ln() - self.resid_qf(lambda) / (2.0 * sigma2) + self.ctx.log_det_s(lambda)
    }

    /// `l_a(σ², λ) = −((n−k)/2) log σ² − Q/(2σ²) + Re tr(M_X log S(λ))`.
    pub fn adjusted_loglik_sigma(&self, sigma2: f64, lambda: f64) -> f64 {
        let nk = (self.n() - self.k()) as f64;
        -0.5 * nk * sigma2.ln() - self.resid_qf(lambda) / (2.0 * sigma2) + self.kernel.tr_log(lambda)
    }

    /// Estimating function `q(λ) = y'S'(λ)R(λ)S(λ)y`.
    ///
    /// Uses `GS = W`, so `q(λ) = y'W'MSy − tr(MG)/(n−k)·Q(λ)`.
    pub fn estimating_fn(&self, lambda: f64) -> f64 {
        let nk = (self.n() - self.k()) as f64;
        self.cross_qf(lambda) - self.kernel.tr_g(lambda) / nk * self.resid_qf(lambda)
    }

    /// Dense `R(λ) = M_X(G(λ) − tr(M_X G(λ))/(n−k)·I)`.
    pub fn r_matrix(&self, lambda: f64) -> Result<DMatrix<f64>> {
        let g = self.ctx.g_matrix(lambda)?;
        let t = self.ann.trace_of(&g) / (self.n() - self.k()) as f64;
        let n = self.n();
        Ok(self.ann.apply_mat(&(g - DMatrix::identity(n, n) * t)))
    }

    /// `q(λ)` from dense matrices.
    pub fn estimating_fn_dense(&self, lambda: f64) -> Result<f64> {
        let r = self.r_matrix(lambda)?;
        let sy = self.sy(lambda);
        Ok(sy.dot(&(r * &sy)))
    }
}

/// Error laws for simulation, each with mean 0 and variance 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorDist {
    Normal,
    /// `gamma(1, 1) − 1`.
    GammaCentered,
    /// `(gamma(1/2, 1) − 1/2)/√(1/2)`.
    GammaHalfStd,
    /// `Laplace(0, 2^{−1/2})`.
    Laplace,
    /// `(χ²₃ − 3)/√6`.
    Chi2Std,
}

impl ErrorDist {
    pub const ALL: [ErrorDist; 5] =
        [Self::Normal, Self::GammaCentered, Self::GammaHalfStd, Self::Laplace, Self::Chi2Std];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Normal => "normal",
            Self::GammaCentered => "gamma",
            Self::GammaHalfStd => "gamma_half",
            Self::Laplace => "laplace",
            Self::Chi2Std => "chi2",
        }
    }

    /// Theoretical `(skewness, kurtosis)`.
    pub fn moments(&self) -> (f64, f64) {
        match self {
            Self::Normal => (0.0, 3.0),
            Self::GammaCentered => (2.0, 9.0),
            Self::GammaHalfStd => (8f64.sqrt(), 15.0),
            Self::Laplace => (0.0, 6.0),
            Self::Chi2Std => ((8.0f64 / 3.0).sqrt(), 7.0),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Normal => rng.sample(StandardNormal),
            Self::GammaCentered => {
                let e: f64 = rng.sample(Exp1);
                e - 1.0
            }
            Self::GammaHalfStd => {
                let g = Gamma::new(0.5, 1.0).expect("valid gamma").sample(rng);
                (g - 0.5) / 0.5f64.sqrt()
            }
            Self::Laplace => {
                let e: f64 = rng.sample(Exp1);
                let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                s * e * std::f64::consts::FRAC_1_SQRT_2
            }
            Self::Chi2Std => {
                let c = ChiSquared::new(3.0).expect("valid chi2").sample(rng);
                (c - 3.0) / 6f64.sqrt()
            }
        }
    }

    pub fn sample_vec<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DVector<f64> {
        DVector::from_fn(n, |_, _| self.sample(rng))
    }
}

impl std::str::FromStr for ErrorDist {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::Unknown { kind: "error distribution", name: s.into() })
    }
}

/// Reduced form `y = S(λ)⁻¹(Xβ + σε)` with `S(λ)⁻¹` cached.
#[derive(Debug, Clone)]
pub struct ReducedForm {
    sinv: DMatrix<f64>,
    lambda: f64,
}

impl ReducedForm {
    pub fn new(ctx: &SpatialContext, lambda: f64) -> Result<Self> {
        Ok(Self { sinv: ctx.s_inverse(lambda)?, lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn sinv(&self) -> &DMatrix<f64> {
        &self.sinv
    }

    /// `S⁻¹(Xβ + σε)` for a given error draw.
    pub fn apply(&self, mean: &DVector<f64>, sigma: f64, eps: &DVector<f64>) -> DVector<f64> {
        &self.sinv * (mean + eps * sigma)
    }
}

/// Simulates `y = S(λ)⁻¹(Xβ + σε)` with i.i.d. errors from `dist`.
pub fn simulate_y(
    ctx: &SpatialContext,
    x: &DMatrix<f64>,
    params: &SarParams,
    dist: ErrorDist,
    seed: u64,
) -> Result<DVector<f64>> {
    if params.beta.len() != x.ncols() {
        return Err(Error::Dimension("beta length does not match X".into()));
    }
    let rf = ReducedForm::new(ctx, params.lambda)?;
    let mut rng = crate::rng::stream_rng(seed, 0);
    let eps = dist.sample_vec(ctx.n(), &mut rng);
    let mean = x * DVector::from_column_slice(&params.beta);
    Ok(rf.apply(&mean, params.sigma2.sqrt(), &eps))
}

/// `Re tr(M_X log S(λ))` by adaptive Simpson quadrature of `−tr(M_X G(t))` on `[0, λ]`.
///
/// Dense fallback for matrices without a usable eigenvector basis.
pub fn tr_m_log_s_quadrature(ctx: &SpatialContext, m: &Annihilator, lambda: f64, tol: f64) -> Result<f64> {
    let f = |t: f64| -> Result<f64> { Ok(-m.trace_of(&ctx.g_matrix(t)?)) };
    fn simpson<F: Fn(f64) -> Result<f64>>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm)?, f(rm)?);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return Ok(left + right + (left + right - whole) / 15.0);
        }
        Ok(simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
            + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let (fa, fm, fb) = (f(0.0)?, f(0.5 * lambda)?, f(lambda)?);
    let whole = lambda / 6.0 * (fa + 4.0 * fm + fb);
    simpson(&f, 0.0, lambda, fa, fm, fb, whole, tol, 30)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{self, Normalization};

    fn instance(n: usize, k: usize, seed: u64) -> SarData {
        let g = weights::watts_strogatz(n, 2, 0.3, seed).unwrap();
        let ctx = SpatialContext::new(weights::normalize(&g, Normalization::Row).unwrap()).unwrap();
        let mut rng = crate::rng::stream_rng(seed, 1);
        let x = DMatrix::from_fn(n, k, |_, j| if j == 0 { 1.0 } else { rng.random::<f64>() });
        let p = SarParams { lambda: 0.4, beta: vec![1.0; k], sigma2: 1.0 };
        let y = simulate_y(&ctx, &x, &p, ErrorDist::Normal, seed).unwrap();
        SarData::new(ctx, x, y).unwrap()
    }

    #[test]
    fn beta_hat_matches_qr_oracle() {
        let d = instance(40, 3, 1);
        let lam = 0.3;
        let b = d.beta_hat(lam).unwrap();
        let qr = d.x().clone().qr();
        let rhs = qr.q().transpose() * d.sy(lam);
        let oracle = qr.r().solve_upper_triangular(&rhs).unwrap();
        assert!((b - oracle).amax() < 1e-10);
    }

    #[test]
    fn beta_hat_ols_at_zero_and_exact_fit() {
        let d = instance(30, 3, 2);
        let y = d.x() * DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let e = d.with_y(y).unwrap();
        let b = e.beta_hat(0.0).unwrap();
        assert!((b - DVector::from_vec(vec![1.0, -2.0, 0.5])).amax() < 1e-10);
        assert!(e.resid_qf(0.0) < 1e-20);
        assert!(matches!(e.sigma2_ml(0.0), Err(Error::PerfectFit(_))));
    }

    #[test]
    fn sigma2_ratio_and_oracle() {
        let d = instance(100, 10, 3);
        let lam = 0.2;
        let ml = d.sigma2_ml(lam).unwrap();
        let aml = d.sigma2_aml(lam).unwrap();
        assert!((aml / ml - 10.0 / 9.0).abs() < 1e-15);
        let r = d.sy(lam) - d.x() * d.beta_hat(lam).unwrap();
        assert!((ml - r.norm_squared() / 100.0).abs() < 1e-10 * ml);
    }

    #[test]
    fn pure_model_sigmas_coincide() {
        let d = instance(30, 1, 4);
        let ctx = d.ctx().clone();
        let e = SarData::new(ctx, DMatrix::zeros(30, 0), d.y().clone()).unwrap();
        assert_eq!(e.sigma2_ml(0.1).unwrap(), e.sigma2_aml(0.1).unwrap());
        for lam in [-0.5, 0.0, 0.5] {
            let diff = e.adjusted_loglik(lam).unwrap() - e.profile_loglik(lam).unwrap();
            let base = e.adjusted_loglik(0.0).unwrap() - e.profile_loglik(0.0).unwrap();
            assert!((diff - base).abs() < 1e-9);
            assert!((e.adjusted_score(lam) - e.profile_score(lam)).abs() < 1e-9);
        }
    }

    #[test]
    fn profile_loglik_at_zero() {
        let d = instance(30, 2, 5);
        let a = d.quad().0;
        let expect = -15.0 * (a / 30.0).ln();
        assert!((d.profile_loglik(0.0).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn scores_match_finite_differences() {
        let d = instance(40, 3, 6);
        let space = d.lambda_space().unwrap().clone();
        let h = 1e-6;
        for i in 1..20 {
            let lam = space.lo + space.width() * i as f64 / 20.0;
            let fd = (d.profile_loglik(lam + h).unwrap() - d.profile_loglik(lam - h).unwrap()) / (2.0 * h);
            assert!((fd - d.profile_score(lam)).abs() < 1e-6 * fd.abs().max(1.0));
            let fa = (d.adjusted_loglik(lam + h).unwrap() - d.adjusted_loglik(lam - h).unwrap()) / (2.0 * h);
            assert!((fa - d.adjusted_score(lam)).abs() < 1e-6 * fa.abs().max(1.0));
        }
    }

    #[test]
    fn estimating_fn_matches_dense_and_sign() {
        let d = instance(30, 3, 7);
        for lam in [-0.6, 0.0, 0.4, 0.8] {
            let q = d.estimating_fn(lam);
            let qd = d.estimating_fn_dense(lam).unwrap();
            assert!((q - qd).abs() < 1e-8 * qd.abs().max(1.0), "{q} vs {qd}");
            assert_eq!(q.signum(), d.adjusted_score(lam).signum());
        }
    }

    #[test]
    fn score_expectation_first_entry_and_pure() {
        let d = instance(30, 3, 8);
        assert_eq!(d.score_expectation(2.0, 0.3)[0], -3.0 / 4.0);
        let e = SarData::new(d.ctx().clone(), DMatrix::zeros(30, 0), d.y().clone()).unwrap();
        let ex = e.score_expectation(1.0, 0.3);
        assert_eq!(ex[0], 0.0);
        assert!(ex[1].abs() < 1e-10);
    }

    #[test]
    fn simulate_noiseless() {
        let d = instance(20, 2, 9);
        let p = SarParams { lambda: 0.3, beta: vec![1.0, 2.0], sigma2: 0.0 };
        let y = simulate_y(d.ctx(), d.x(), &p, ErrorDist::Normal, 1).unwrap();
        let direct = d.ctx().s_inverse(0.3).unwrap() * (d.x() * DVector::from_vec(vec![1.0, 2.0]));
        assert!((y - direct).amax() < 1e-12);
    }

    #[test]
    fn quadrature_matches_kernel() {
        let d = instance(25, 2, 10);
        for lam in [-0.5, 0.4] {
            let qv = tr_m_log_s_quadrature(d.ctx(), d.annihilator(), lam, 1e-10).unwrap();
            assert!((qv - d.m_kernel().tr_log(lam)).abs() < 1e-7);
        }
    }

    #[test]
    fn error_dist_parse() {
        for d in ErrorDist::ALL {
            assert_eq!(d.name().parse::<ErrorDist>().unwrap(), d);
        }
        assert!("cauchy".parse::<ErrorDist>().is_err());
    }
}
