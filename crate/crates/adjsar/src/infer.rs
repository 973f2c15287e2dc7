//! Confidence intervals for `λ`: the Lugannani–Rice saddlepoint approximation
//! to the cdf of the adjusted QMLE, its inversion, and Wald intervals.
//!
//! Under single-peakedness `P(λ̂_aML ≤ z) = P(q(z) ≤ 0)`, and with
//! `y = S(λ)⁻¹(Xβ + σε)` the estimating function is the quadratic form
//! `q(z)/σ² = u'B(z, λ)u`, `u ~ N(Xβ/σ, I)`, where
//! `B(z, λ) = ½ A'(R(z) + R(z)')A` and `A = S(z)S(λ)⁻¹`.

use crate::error::{Error, Result};
use crate::estimate::{EstimateResult, Method};
use crate::linalg::{self, sym_eigen};
use crate::optim::{brent_root, linspace, newton_increasing};
use crate::sar::SarData;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

/// `|ŝ|` below which the mean-point formula replaces the general one.
pub const MEAN_BRANCH_THRESHOLD: f64 = 1e-5;

/// Quadratic form `V = Σ bᵢ (zᵢ + cᵢ)²`, `zᵢ` i.i.d. standard normal.
#[derive(Debug, Clone)]
pub struct QformSpec {
    /// `B(z, λ)`.
    pub b_matrix: DMatrix<f64>,
    /// Eigenvalues of `B`, ascending.
    pub b: Vec<f64>,
    /// Mean vector `Xβ/σ` rotated into the eigenbasis of `B`.
    pub c: Vec<f64>,
}

impl QformSpec {
    /// Builds the form directly from eigenvalues and noncentralities.
    pub fn from_parts(b: Vec<f64>, c: Vec<f64>) -> Self {
        let mut idx: Vec<usize> = (0..b.len()).collect();
        idx.sort_by(|&i, &j| b[i].total_cmp(&b[j]));
        let bs: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
        let cs: Vec<f64> = idx.iter().map(|&i| c[i]).collect();
        Self { b_matrix: DMatrix::from_diagonal(&DVector::from_vec(bs.clone())), b: bs, c: cs }
    }

    pub fn b_min(&self) -> f64 {
        self.b.first().copied().unwrap_or(0.0)
    }

    pub fn b_max(&self) -> f64 {
        self.b.last().copied().unwrap_or(0.0)
    }

    /// Open interval `(1/(2b_min), 1/(2b_max))` on which the cgf exists.
    pub fn strip(&self) -> (f64, f64) {
        let lo = if self.b_min() < 0.0 { 0.5 / self.b_min() } else { f64::NEG_INFINITY };
        let hi = if self.b_max() > 0.0 { 0.5 / self.b_max() } else { f64::INFINITY };
        (lo, hi)
    }

    /// `E V = Σ bᵢ(1 + cᵢ²)`.
    pub fn mean(&self) -> f64 {
        self.b.iter().zip(&self.c).map(|(b, c)| b * (1.0 + c * c)).sum()
    }

    fn in_strip(&self, s: f64) -> bool {
        let (lo, hi) = self.strip();
        s > lo && s < hi
    }

    /// `K(s) = Σ −½ log(1 − 2sbᵢ) + cᵢ² s bᵢ/(1 − 2sbᵢ)`.
    pub fn cgf(&self, s: f64) -> Result<f64> {
        self.strip_guard(s)?;
        Ok(self
            .b
            .iter()
            .zip(&self.c)
            .map(|(&b, &c)| {
                let d = 1.0 - 2.0 * s * b;
                -0.5 * d.ln() + c * c * s * b / d
            })
            .sum())
    }

    /// `(K'(s), K''(s), K'''(s))`.
    pub fn cgf_derivatives(&self, s: f64) -> Result<(f64, f64, f64)> {
        self.strip_guard(s)?;
        let (mut k1, mut k2, mut k3) = (0.0, 0.0, 0.0);
        for (&b, &c) in self.b.iter().zip(&self.c) {
            let d = 1.0 - 2.0 * s * b;
            let (c2, r) = (c * c, b / d);
            k1 += r + c2 * r / d;
            k2 += 2.0 * r * r + 4.0 * c2 * r * r / d;
            k3 += 8.0 * r * r * r + 24.0 * c2 * r * r * r / d;
        }
        Ok((k1, k2, k3))
    }

    fn strip_guard(&self, s: f64) -> Result<()> {
        if self.in_strip(s) {
            Ok(())
        } else {
            let (lo, hi) = self.strip();
            Err(Error::Saddlepoint(format!("s = {s} outside the strip ({lo}, {hi})")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CdfBranch {
    General,
    MeanPoint,
    /// `B` is semidefinite, so `P(V ≤ 0)` is 0 or 1.
    Degenerate,
}

/// A saddlepoint evaluation of `P(V ≤ 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfApprox {
    pub z: f64,
    pub prob: f64,
    pub s_hat: f64,
    pub w_hat: f64,
    pub u_hat: f64,
    pub branch: CdfBranch,
    /// The raw formula fell outside `[0, 1]` and was clamped.
    pub clamped: bool,
}

/// `B(z, λ)` with its eigendecomposition and the noncentralities `V'Xβ/σ`.
pub fn build_qform(data: &SarData, z: f64, lambda: f64, beta: &[f64], sigma2: f64) -> Result<QformSpec> {
    let n = data.n();
    let ctx = data.ctx();
    let ann = data.annihilator();
    let gl = ctx.g_matrix(lambda)?;
    let gz = ctx.g_matrix(z)?;
    let a = DMatrix::identity(n, n) + gl * (lambda - z);
    let t = ann.trace_of(&gz) / (n - data.k()) as f64;
    let r = ann.apply_mat(&(gz - DMatrix::identity(n, n) * t));
    let c = &r + r.transpose();
    let mut bm = linalg::matmul_tn(&a, &linalg::matmul(&c, &a)) * 0.5;
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (bm[(i, j)] + bm[(j, i)]);
            bm[(i, j)] = v;
            bm[(j, i)] = v;
        }
    }
    let (b, v) = sym_eigen(&bm)?;
    if beta.len() != data.k() {
        return Err(Error::Dimension("beta length does not match X".into()));
    }
    let mean = if sigma2 > 0.0 {
        data.x() * DVector::from_column_slice(beta) / sigma2.sqrt()
    } else {
        return Err(Error::InvalidArgument("sigma2 must be positive".into()));
    };
    let cvec = v.tr_mul(&mean);
    Ok(QformSpec { b_matrix: bm, b, c: cvec.as_slice().to_vec() })
}

/// Lugannani–Rice approximation to `P(V ≤ 0)`.
pub fn lr_cdf_at_zero(spec: &QformSpec) -> Result<CdfApprox> {
    let nan = f64::NAN;
    let scale: f64 = spec.b.iter().zip(&spec.c).map(|(b, c)| b.abs() * (1.0 + c * c)).sum();
    if scale == 0.0 || spec.b_min() >= 0.0 || spec.b_max() <= 0.0 {
        let prob = if spec.b_max() <= 0.0 { 1.0 } else { 0.0 };
        return Ok(CdfApprox { z: nan, prob, s_hat: 0.0, w_hat: nan, u_hat: nan, branch: CdfBranch::Degenerate, clamped: false });
    }
    let (lo, hi) = spec.strip();
    let (s_hat, _) = newton_increasing(
        |s| spec.cgf_derivatives(s).map_or(f64::NAN, |d| d.0),
        |s| spec.cgf_derivatives(s).map_or(f64::NAN, |d| d.1),
        lo,
        hi,
        0.0,
        1e-13 * scale,
        200,
    )
    .or_else(|_| {
        brent_root(|s| spec.cgf_derivatives(s).map_or(f64::NAN, |d| d.0), 0.999_999 * lo, 0.999_999 * hi, 1e-15, 500)
            .map(|s| (s, 0))
    })?;
    let (_, k2, _) = spec.cgf_derivatives(s_hat)?;
    let normal = Normal::standard();
    let (raw, w_hat, u_hat, branch) = if s_hat.abs() < MEAN_BRANCH_THRESHOLD {
        let (_, k2_0, k3_0) = spec.cgf_derivatives(0.0)?;
        let p = 0.5 + k3_0 / (6.0 * (2.0 * std::f64::consts::PI).sqrt() * k2_0.powf(1.5));
        (p, 0.0, 0.0, CdfBranch::MeanPoint)
    } else {
        let k = spec.cgf(s_hat)?;
        let w = s_hat.signum() * (-2.0 * k).max(0.0).sqrt();
        let u = s_hat * k2.sqrt();
        (normal.cdf(w) + normal.pdf(w) * (1.0 / w - 1.0 / u), w, u, CdfBranch::General)
    };
    let prob = raw.clamp(0.0, 1.0);
    Ok(CdfApprox { z: nan, prob, s_hat, w_hat, u_hat, branch, clamped: prob != raw })
}

/// `P(λ̂_aML ≤ z)` at parameters `(λ, β, σ²)`.
pub fn cdf_at(data: &SarData, z: f64, lambda: f64, beta: &[f64], sigma2: f64) -> Result<CdfApprox> {
    let spec = build_qform(data, z, lambda, beta, sigma2)?;
    let mut a = lr_cdf_at_zero(&spec)?;
    a.z = z;
    Ok(a)
}

/// Plug-in `P̂(λ̂_aML ≤ z)` under `λ`, with `β̂_ML(λ)` and `σ̂²_aML(λ)` from the data.
pub fn cdf_hat(data: &SarData, z: f64, lambda: f64) -> Result<CdfApprox> {
    let beta = data.beta_hat(lambda)?;
    let sigma2 = data.sigma2_aml(lambda)?;
    cdf_at(data, z, lambda, beta.as_slice(), sigma2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Two,
    Right,
}

impl std::str::FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two" | "two-sided" => Ok(Self::Two),
            "right" | "right-sided" => Ok(Self::Right),
            _ => Err(Error::Unknown { kind: "interval side", name: s.into() }),
        }
    }
}

/// A confidence interval with diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    /// The lower bound is the parameter-space endpoint rather than a level crossing.
    pub lo_open: bool,
    pub hi_open: bool,
    /// Saddlepoint inversion saw a non-monotone cdf on the grid.
    pub non_monotone: bool,
    pub clamped_evaluations: usize,
}

impl Interval {
    pub fn contains(&self, lambda: f64) -> bool {
        lambda >= self.lo && lambda <= self.hi
    }
}

/// Saddlepoint interval `[λ₁, λ₂]` with `λ₁ = inf{λ : cdf_hat = 1 − α₁}` and
/// `λ₂ = sup{λ : cdf_hat = α₂}`; `α₁ = 0` gives the right-sided interval.
pub fn saddlepoint_ci(data: &SarData, lambda_obs: f64, alpha1: f64, alpha2: f64) -> Result<Interval> {
    saddlepoint_ci_with(data, lambda_obs, alpha1, alpha2, 40, 1e-6)
}

pub fn saddlepoint_ci_with(
    data: &SarData,
    lambda_obs: f64,
    alpha1: f64,
    alpha2: f64,
    grid: usize,
    xtol: f64,
) -> Result<Interval> {
    let space = data.adjusted_space()?.clone();
    let (lo, hi) = space.padded(1e-6);
    let xs = linspace(lo, hi, grid.max(3));
    let mut clamped = 0usize;
    let mut ps = Vec::with_capacity(xs.len());
    for &l in &xs {
        let c = cdf_hat(data, lambda_obs, l)?;
        clamped += c.clamped as usize;
        ps.push(c.prob);
    }
    let non_monotone = ps.windows(2).any(|w| w[1] > w[0] + 1e-9);
    let eval = |l: f64| cdf_hat(data, lambda_obs, l).map_or(f64::NAN, |c| c.prob);
    let (lam1, lo_open) = if alpha1 <= 0.0 {
        (space.lo, true)
    } else {
        let target = 1.0 - alpha1;
        match (0..xs.len() - 1).find(|&i| ps[i] >= target && ps[i + 1] < target) {
            Some(i) => (brent_root(|l| eval(l) - target, xs[i], xs[i + 1], xtol, 100)?, false),
            None if ps[0] < target => (space.lo, true),
            None => (space.hi, false),
        }
    };
    let (lam2, hi_open) = {
        let target = alpha2;
        match (0..xs.len() - 1).rev().find(|&i| ps[i] > target && ps[i + 1] <= target) {
            Some(i) => (brent_root(|l| eval(l) - target, xs[i], xs[i + 1], xtol, 100)?, false),
            None if ps[xs.len() - 1] > target => (space.hi, true),
            None => (space.lo, false),
        }
    };
    Ok(Interval { lo: lam1, hi: lam2, lo_open, hi_open, non_monotone, clamped_evaluations: clamped })
}

/// Dual form of the saddlepoint interval: `λ₀` is covered iff
/// `α₂ ≤ cdf_hat(λ̂_obs; λ₀) ≤ 1 − α₁`.
pub fn saddlepoint_covers(data: &SarData, lambda_obs: f64, lambda0: f64, alpha1: f64, alpha2: f64) -> Result<bool> {
    let p = cdf_hat(data, lambda_obs, lambda0)?.prob;
    Ok(p >= alpha2 && p <= 1.0 - alpha1)
}

/// Which expected information the Wald variance inverts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaldKind {
    /// Gaussian log-likelihood in `(β, σ², λ)`.
    Ml,
    /// Adjusted log-likelihood in `(σ², λ)`.
    Aml,
}

/// Inverse-information variance of `λ̂`.
///
/// `Ml`:  `1/[(GXβ)'M(GXβ)/σ² + tr(G'G) + tr(G²) − 2tr(G)²/n]`.
/// `Aml`: `1/[(GXβ)'M(GXβ)/σ² + tr(G'MG) + tr(MG²) − 2tr(MG)²/(n−k)]`.
pub fn wald_variance(data: &SarData, lambda: f64, beta: &[f64], sigma2: f64, kind: WaldKind) -> Result<f64> {
    let n = data.n();
    let ann = data.annihilator();
    let g = data.ctx().g_matrix(lambda)?;
    let gxb = &g * (data.x() * DVector::from_column_slice(beta));
    let mean_term = ann.apply(&gxb).norm_squared() / sigma2;
    let info = match kind {
        WaldKind::Ml => {
            let tg = linalg::trace(&g);
            let tgg = g.norm_squared();
            let tg2 = (0..n).map(|i| g.row(i).dot(&g.column(i).transpose())).sum::<f64>();
            mean_term + tgg + tg2 - 2.0 * tg * tg / n as f64
        }
        WaldKind::Aml => {
            let mg = ann.apply_mat(&g);
            let tmg = linalg::trace(&mg);
            let tgmg = mg.norm_squared();
            let tmg2 = (0..n).map(|i| mg.row(i).dot(&g.column(i).transpose())).sum::<f64>();
            mean_term + tgmg + tmg2 - 2.0 * tmg * tmg / (n - data.k()) as f64
        }
    };
    if !(info > 0.0) || !info.is_finite() {
        return Err(Error::SingularInformation);
    }
    Ok(1.0 / info)
}

/// Normal quantile used by the Wald interval at `level`.
pub fn wald_multiplier(level: f64, side: Side) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level must lie in (0, 1), got {level}")));
    }
    let p = match side {
        Side::Two => 1.0 - 0.5 * (1.0 - level),
        Side::Right => level,
    };
    Ok(Normal::standard().inverse_cdf(p))
}

/// Wald interval `λ̂ ± z√v̂` (right-sided: `(−∞, λ̂ + z√v̂]`).
pub fn wald_ci(data: &SarData, result: &EstimateResult, level: f64, side: Side) -> Result<Interval> {
    let kind = match result.method {
        Method::Aqmle | Method::AqmleCensored => WaldKind::Aml,
        Method::Qmle | Method::Uqmle => WaldKind::Ml,
    };
    let sigma2 = match kind {
        WaldKind::Aml => data.sigma2_aml(result.lambda_hat)?,
        WaldKind::Ml => data.sigma2_ml(result.lambda_hat)?,
    };
    let v = wald_variance(data, result.lambda_hat, &result.beta_hat, sigma2, kind)?;
    let half = wald_multiplier(level, side)? * v.sqrt();
    Ok(match side {
        Side::Two => Interval {
            lo: result.lambda_hat - half,
            hi: result.lambda_hat + half,
            lo_open: false,
            hi_open: false,
            non_monotone: false,
            clamped_evaluations: 0,
        },
        Side::Right => Interval {
            lo: f64::NEG_INFINITY,
            hi: result.lambda_hat + half,
            lo_open: true,
            hi_open: false,
            non_monotone: false,
            clamped_evaluations: 0,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sar::{simulate_y, ErrorDist, SarParams, SpatialContext};
    use crate::weights::{self, Normalization};
    use rand::Rng;

    fn instance(n: usize, k: usize, seed: u64) -> (SarData, SarParams) {
        let g = weights::watts_strogatz(n, 2, 0.3, seed).unwrap();
        let ctx = SpatialContext::new(weights::normalize(&g, Normalization::Row).unwrap()).unwrap();
        let mut rng = crate::rng::stream_rng(seed, 3);
        let x = DMatrix::from_fn(n, k, |_, j| if j == 0 { 1.0 } else { rng.random::<f64>() });
        let p = SarParams { lambda: 0.4, beta: vec![1.0; k], sigma2: 1.0 };
        let y = simulate_y(&ctx, &x, &p, ErrorDist::Normal, seed).unwrap();
        (SarData::new(ctx, x, y).unwrap(), p)
    }

    #[test]
    fn qform_at_truth_has_zero_mean_and_is_indefinite() {
        let (d, p) = instance(40, 3, 1);
        let spec = build_qform(&d, p.lambda, p.lambda, &p.beta, p.sigma2).unwrap();
        assert!(spec.mean().abs() < 1e-9 * spec.b.iter().map(|b| b.abs()).sum::<f64>());
        assert!((&spec.b_matrix - spec.b_matrix.transpose()).amax() < 1e-10);
        let spec = build_qform(&d, 0.1, p.lambda, &p.beta, p.sigma2).unwrap();
        assert!(spec.b_min() < 0.0 && spec.b_max() > 0.0);
        assert!(spec.b.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn zero_beta_is_central() {
        let (d, p) = instance(30, 2, 2);
        let spec = build_qform(&d, 0.2, p.lambda, &[0.0, 0.0], 1.0).unwrap();
        assert!(spec.c.iter().all(|c| *c == 0.0));
    }

    #[test]
    fn cgf_derivatives_match_finite_differences() {
        let (d, p) = instance(30, 2, 3);
        let spec = build_qform(&d, 0.25, p.lambda, &p.beta, p.sigma2).unwrap();
        assert_eq!(spec.cgf(0.0).unwrap(), 0.0);
        assert!((spec.cgf_derivatives(0.0).unwrap().0 - spec.mean()).abs() < 1e-12);
        let (lo, hi) = spec.strip();
        let h = 1e-5 * (hi - lo);
        for i in 1..=20 {
            let s = lo + (hi - lo) * (0.1 + 0.8 * i as f64 / 21.0);
            let (k1, k2, k3) = spec.cgf_derivatives(s).unwrap();
            let f = |x: f64| spec.cgf(x).unwrap();
            let d1 = (f(s + h) - f(s - h)) / (2.0 * h);
            let g = |x: f64| spec.cgf_derivatives(x).unwrap();
            let d2 = (g(s + h).0 - g(s - h).0) / (2.0 * h);
            let d3 = (g(s + h).1 - g(s - h).1) / (2.0 * h);
            assert!(k2 > 0.0);
            assert!((d1 - k1).abs() < 1e-6 * k1.abs().max(1.0), "{d1} {k1}");
            assert!((d2 - k2).abs() < 1e-6 * k2.abs().max(1.0), "{d2} {k2}");
            assert!((d3 - k3).abs() < 1e-6 * k3.abs().max(1.0), "{d3} {k3}");
        }
        assert!(spec.cgf(hi + 1.0).is_err());
    }

    #[test]
    fn mean_branch_at_truth_with_zero_beta() {
        let (d, p) = instance(30, 2, 4);
        let spec = build_qform(&d, p.lambda, p.lambda, &[0.0, 0.0], 1.0).unwrap();
        let a = lr_cdf_at_zero(&spec).unwrap();
        assert_eq!(a.branch, CdfBranch::MeanPoint);
        let (_, k2, k3) = spec.cgf_derivatives(0.0).unwrap();
        let expect = 0.5 + k3 / (6.0 * (2.0 * std::f64::consts::PI).sqrt() * k2.powf(1.5));
        assert!((a.prob - expect).abs() < 1e-15);
    }

    #[test]
    fn saddlepoint_residual_and_monotone_in_z() {
        let (d, p) = instance(40, 2, 5);
        let mut prev = 0.0;
        for z in linspace(-0.2, 0.9, 12) {
            let spec = build_qform(&d, z, p.lambda, &p.beta, p.sigma2).unwrap();
            let a = lr_cdf_at_zero(&spec).unwrap();
            if a.branch == CdfBranch::General {
                let scale: f64 = spec.b.iter().zip(&spec.c).map(|(b, c)| b.abs() * (1.0 + c * c)).sum();
                assert!(spec.cgf_derivatives(a.s_hat).unwrap().0.abs() < 1e-10 * scale);
            }
            assert!(a.prob >= prev - 1e-9, "z = {z}: {} < {prev}", a.prob);
            prev = a.prob;
        }
    }

    #[test]
    fn lr_is_invariant_to_joint_rescaling() {
        let (d, p) = instance(30, 2, 6);
        let a = cdf_at(&d, 0.3, p.lambda, &p.beta, p.sigma2).unwrap();
        let b = cdf_at(&d, 0.3, p.lambda, &[3.0, 3.0], 9.0).unwrap();
        assert!((a.prob - b.prob).abs() < 1e-10);
        let e = d.with_y(d.y() * 4.0).unwrap();
        assert!((cdf_hat(&d, 0.3, 0.35).unwrap().prob - cdf_hat(&e, 0.3, 0.35).unwrap().prob).abs() < 1e-10);
    }

    #[test]
    fn ci_inversion_agrees_with_dual_test() {
        let (d, _) = instance(40, 2, 7);
        let est = crate::estimate::adjusted_qmle(&d).unwrap();
        let ci = saddlepoint_ci(&d, est.lambda_hat, 0.025, 0.025).unwrap();
        assert!(ci.lo < est.lambda_hat && est.lambda_hat < ci.hi);
        for l0 in linspace(ci.lo - 0.1, ci.hi + 0.1, 9) {
            if (l0 - ci.lo).abs() < 1e-4 || (l0 - ci.hi).abs() < 1e-4 {
                continue;
            }
            assert_eq!(saddlepoint_covers(&d, est.lambda_hat, l0, 0.025, 0.025).unwrap(), ci.contains(l0));
        }
        let right = saddlepoint_ci(&d, est.lambda_hat, 0.0, 0.05).unwrap();
        assert!(right.lo_open && right.hi < ci.hi);
    }

    #[test]
    fn wald_multipliers_and_positive_variance() {
        assert!((wald_multiplier(0.95, Side::Two).unwrap() - 1.959964).abs() < 1e-6);
        assert!((wald_multiplier(0.95, Side::Right).unwrap() - 1.644854).abs() < 1e-6);
        let (d, p) = instance(40, 3, 8);
        for kind in [WaldKind::Ml, WaldKind::Aml] {
            assert!(wald_variance(&d, 0.3, &p.beta, 1.0, kind).unwrap() > 0.0);
        }
        let est = crate::estimate::adjusted_qmle(&d).unwrap();
        let ci = wald_ci(&d, &est, 0.95, Side::Two).unwrap();
        assert!(ci.contains(est.lambda_hat));
    }

    #[test]
    fn wald_ml_matches_full_information_inverse() {
        let (d, p) = instance(25, 3, 9);
        let n = d.n();
        let k = d.k();
        let lam = 0.3;
        let s2 = 1.7;
        let g = d.ctx().g_matrix(lam).unwrap();
        let x = d.x();
        let gxb = &g * (x * DVector::from_column_slice(&p.beta));
        let dim = k + 2;
        let mut info = DMatrix::zeros(dim, dim);
        info.view_mut((0, 0), (k, k)).copy_from(&(x.transpose() * x / s2));
        let xgxb = x.transpose() * &gxb / s2;
        for i in 0..k {
            info[(i, k + 1)] = xgxb[i];
            info[(k + 1, i)] = xgxb[i];
        }
        info[(k, k)] = n as f64 / (2.0 * s2 * s2);
        let tg = linalg::trace(&g);
        info[(k, k + 1)] = tg / s2;
        info[(k + 1, k)] = tg / s2;
        info[(k + 1, k + 1)] = gxb.norm_squared() / s2 + g.norm_squared() + linalg::trace(&(&g * &g));
        let inv = info.try_inverse().unwrap();
        let v = wald_variance(&d, lam, &p.beta, s2, WaldKind::Ml).unwrap();
        assert!((inv[(k + 1, k + 1)] - v).abs() < 1e-10 * v);
    }
}
