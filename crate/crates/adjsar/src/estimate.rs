//! The four `λ` estimators: QMLE over `Λ`, adjusted QMLE over `Λ_a`, the
//! censored adjusted QMLE over the closure of `Λ`, and the unrestricted QMLE.

use crate::error::{Error, Result};
use crate::optim::{brent_max, brent_root, refined_grid};
use crate::sar::SarData;
use crate::spectral::{self, Assumption1, C1Status, EndpointClass, ParamSpace};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Qmle,
    Aqmle,
    AqmleCensored,
    Uqmle,
}

impl Method {
    pub const ALL: [Method; 4] = [Self::Qmle, Self::Aqmle, Self::AqmleCensored, Self::Uqmle];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Qmle => "qmle",
            Self::Aqmle => "aqmle",
            Self::AqmleCensored => "aqmle_censored",
            Self::Uqmle => "uqmle",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qmle" | "ml" => Ok(Self::Qmle),
            "aqmle" | "aml" => Ok(Self::Aqmle),
            "censored" | "aqmle_censored" => Ok(Self::AqmleCensored),
            "uqmle" | "uml" => Ok(Self::Uqmle),
            _ => Err(Error::Unknown { kind: "estimation method", name: s.into() }),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimateFlags {
    /// `λ̂ ∉ Λ`.
    pub outside_lambda: bool,
    /// The censored estimator clamped `λ̂_aML` to the closure of `Λ`.
    pub censored: bool,
    /// More than one local maximum (or score sign change) was seen on the search grid.
    pub multi_peak_detected: bool,
    /// Condition C1 held on the search grid, so the objective is single-peaked.
    pub single_peak_verified: bool,
    /// The optimum sits at the edge of the search interval.
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub lambda_hat: f64,
    pub beta_hat: Vec<f64>,
    pub sigma2_hat: f64,
    pub method: Method,
    pub space_used: ParamSpace,
    pub flags: EstimateFlags,
    /// Objective value at `λ̂` (profile or adjusted log-likelihood).
    pub objective: f64,
}

/// Numerical settings shared by the estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimateOptions {
    pub grid_size: usize,
    /// Extra geometric grid points near each endpoint.
    pub refine_levels: usize,
    pub xtol_max: f64,
    pub xtol_root: f64,
    /// Relative endpoint padding `δ/(hi − lo)`.
    pub pad: f64,
    /// `None` checks C1 on the search grid; `Some(g)` on a separate `g`-point grid.
    pub c1_grid: Option<usize>,
    pub check_assumption1: bool,
    /// Unrestricted search window `[f/ω_min, f/ω_max]`.
    pub window_factor: f64,
    pub interval_grid: usize,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            grid_size: 512,
            refine_levels: 6,
            xtol_max: 1e-9,
            xtol_root: 1e-10,
            pad: 1e-8,
            c1_grid: None,
            check_assumption1: true,
            window_factor: 20.0,
            interval_grid: 128,
        }
    }
}

pub fn estimate(data: &SarData, method: Method, opts: &EstimateOptions) -> Result<EstimateResult> {
    match method {
        Method::Qmle => qmle_with(data, opts),
        Method::Aqmle => adjusted_qmle_with(data, opts),
        Method::AqmleCensored => censored_adjusted_qmle_with(data, opts),
        Method::Uqmle => unrestricted_qmle_with(data, opts),
    }
}

#[derive(Debug, Clone, Copy)]
struct Peak {
    x: f64,
    f: f64,
    multi: bool,
    boundary: bool,
}

/// Index of the largest value, ties resolved towards the point closest to 0.
fn best_index(xs: &[f64], fs: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for i in 0..fs.len() {
        if !fs[i].is_finite() {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(j) => {
                let tie = (fs[i] - fs[j]).abs() <= 1e-12 * fs[j].abs().max(1.0);
                if (tie && xs[i].abs() < xs[j].abs()) || (!tie && fs[i] > fs[j]) {
                    Some(i)
                } else {
                    Some(j)
                }
            }
        };
    }
    best
}

fn count_local_maxima(fs: &[f64]) -> usize {
    let n = fs.len();
    (0..n)
        .filter(|&i| {
            let l = if i == 0 { f64::NEG_INFINITY } else { fs[i - 1] };
            let r = if i + 1 == n { f64::NEG_INFINITY } else { fs[i + 1] };
            fs[i].is_finite() && fs[i] > l && fs[i] >= r
        })
        .count()
}

/// Global maximization of `f` on `[lo, hi]`: grid scan, then Brent around the best point.
fn maximize<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize, levels: usize, xtol: f64) -> Option<Peak> {
    let xs = refined_grid(lo, hi, n, levels);
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let i = best_index(&xs, &fs)?;
    let multi = count_local_maxima(&fs) > 1;
    let a = xs[i.saturating_sub(1)];
    let b = xs[(i + 1).min(xs.len() - 1)];
    let (x, fx) = brent_max(&f, a, b, xtol, 200);
    let (x, fx) = if fx.is_finite() && fx >= fs[i] { (x, fx) } else { (xs[i], fs[i]) };
    let boundary = i == 0 || i + 1 == xs.len();
    Some(Peak { x, f: fx, multi, boundary })
}

/// Sharpens an interior maximizer of `l` to a root of the profile score.
fn polish_with_score(data: &SarData, x: f64, lo: f64, hi: f64) -> f64 {
    let d = 1e-6 * x.abs().max(1.0);
    let (a, b) = ((x - d).max(lo), (x + d).min(hi));
    let s = |l: f64| data.profile_score(l);
    if !(s(a) > 0.0 && s(b) < 0.0) {
        return x;
    }
    match brent_root(s, a, b, 1e-14, 100) {
        Ok(r) if data.profile_loglik_raw(r) >= data.profile_loglik_raw(x) - 1e-12 => r,
        _ => x,
    }
}

fn assumption1_guard(data: &SarData, opts: &EstimateOptions) -> Result<()> {
    if !opts.check_assumption1 {
        return Ok(());
    }
    let ctx = data.ctx();
    let tol = spectral::default_assumption1_tol(ctx.info());
    match spectral::check_assumption1(ctx.w(), ctx.info(), data.annihilator(), tol)? {
        Assumption1::Ok => Ok(()),
        Assumption1::ViolatedAt(omega) => Err(Error::Assumption1 { omega }),
    }
}

/// The exact-fit point `λ* = b/c` when `Q(λ*)` vanishes inside `space`.
fn exact_fit(data: &SarData, space: &ParamSpace, method: Method) -> Option<EstimateResult> {
    let (_, b, c) = data.quad();
    if !(c > 0.0) {
        return None;
    }
    let l = b / c;
    if !space.contains(l) || data.resid_qf(l) > 1e-14 * data.y().norm_squared() {
        return None;
    }
    Some(EstimateResult {
        lambda_hat: l,
        beta_hat: data.beta_hat(l).ok()?.as_slice().to_vec(),
        sigma2_hat: 0.0,
        method,
        space_used: space.clone(),
        flags: EstimateFlags { outside_lambda: outside(data, l), ..Default::default() },
        objective: f64::INFINITY,
    })
}

fn outside(data: &SarData, lambda: f64) -> bool {
    data.lambda_space().is_ok_and(|s| !s.contains(lambda))
}

/// Restricted QMLE `λ̂_ML = argmax_{λ∈Λ} l(λ)` with default options.
pub fn qmle(data: &SarData) -> Result<EstimateResult> {
    qmle_with(data, &EstimateOptions::default())
}

pub fn qmle_with(data: &SarData, opts: &EstimateOptions) -> Result<EstimateResult> {
    assumption1_guard(data, opts)?;
    let space = data.lambda_space()?.clone();
    if let Some(r) = exact_fit(data, &space, Method::Qmle) {
        return Ok(r);
    }
    let (lo, hi) = space.padded(opts.pad);
    let peak = maximize(|l| data.profile_loglik_raw(l), lo, hi, opts.grid_size, opts.refine_levels, opts.xtol_max)
        .ok_or(Error::PerfectFit(0.0))?;
    let lambda = if peak.boundary { peak.x } else { polish_with_score(data, peak.x, lo, hi) };
    let peak = Peak { x: lambda, f: data.profile_loglik_raw(lambda), ..peak };
    Ok(EstimateResult {
        lambda_hat: lambda,
        beta_hat: data.beta_hat(lambda)?.as_slice().to_vec(),
        sigma2_hat: data.sigma2_ml(lambda)?,
        method: Method::Qmle,
        space_used: space,
        flags: EstimateFlags {
            multi_peak_detected: peak.multi,
            boundary: peak.boundary,
            ..Default::default()
        },
        objective: peak.f,
    })
}

/// Adjusted QMLE `λ̂_aML = argmax_{λ∈Λ_a} l_a(λ)` with default options.
pub fn adjusted_qmle(data: &SarData) -> Result<EstimateResult> {
    adjusted_qmle_with(data, &EstimateOptions::default())
}

pub fn adjusted_qmle_with(data: &SarData, opts: &EstimateOptions) -> Result<EstimateResult> {
    assumption1_guard(data, opts)?;
    let space = data.adjusted_space()?.clone();
    if let Some(r) = exact_fit(data, &space, Method::Aqmle) {
        return Ok(r);
    }
    let (lo, hi) = space.padded(opts.pad);
    let nk = (data.n() - data.k()) as f64;
    let kernel = data.m_kernel();
    let xs = refined_grid(lo, hi, opts.grid_size, opts.refine_levels);
    let mut scores = Vec::with_capacity(xs.len());
    let mut c1 = true;
    for &l in &xs {
        let (t1, t2) = kernel.tr_g_g2(l);
        scores.push(nk * data.cross_qf(l) / data.resid_qf(l) - t1);
        if !(nk * t2 - t1 * t1 > 0.0) {
            c1 = false;
        }
    }
    if let Some(g) = opts.c1_grid {
        c1 = spectral::check_c1(data.ctx().info(), kernel, data.n() - data.k(), &space, g) == C1Status::Holds;
    }
    let changes: Vec<usize> = (0..xs.len() - 1)
        .filter(|&i| scores[i] > 0.0 && scores[i + 1] <= 0.0 || scores[i] < 0.0 && scores[i + 1] >= 0.0)
        .collect();
    let down: Vec<usize> = changes.iter().copied().filter(|&i| scores[i] > 0.0).collect();
    let mut flags = EstimateFlags { single_peak_verified: c1, ..Default::default() };
    let root = if c1 && down.len() == 1 && changes.len() == 1 {
        let i = down[0];
        brent_root(|l| data.adjusted_score(l), xs[i], xs[i + 1], opts.xtol_root, 200).ok()
    } else {
        None
    };
    let lambda = match root {
        Some(r) => r,
        None => {
            flags.multi_peak_detected = true;
            let peak = maximize(
                |l| data.adjusted_loglik_raw(l),
                lo,
                hi,
                opts.grid_size.max(2048),
                opts.refine_levels,
                opts.xtol_max,
            )
            .ok_or(Error::PerfectFit(0.0))?;
            flags.boundary = peak.boundary;
            peak.x
        }
    };
    flags.outside_lambda = outside(data, lambda);
    Ok(EstimateResult {
        lambda_hat: lambda,
        beta_hat: data.beta_hat(lambda)?.as_slice().to_vec(),
        sigma2_hat: data.sigma2_aml(lambda)?,
        method: Method::Aqmle,
        objective: data.adjusted_loglik(lambda)?,
        space_used: space,
        flags,
    })
}

/// Censored adjusted QMLE `λ̄_aML`, the maximizer of `l_a` over the closure of `Λ`.
pub fn censored_adjusted_qmle(data: &SarData) -> Result<EstimateResult> {
    censored_adjusted_qmle_with(data, &EstimateOptions::default())
}

pub fn censored_adjusted_qmle_with(data: &SarData, opts: &EstimateOptions) -> Result<EstimateResult> {
    let a = adjusted_qmle_with(data, opts)?;
    let lam = data.lambda_space()?.clone();
    let adj = &a.space_used;
    let removable = |x: f64| adj.interior_singularities.iter().any(|s| (s - x).abs() <= 1e-9 * x.abs().max(1.0));
    let closure = ParamSpace {
        lo: lam.lo,
        hi: lam.hi,
        lo_class: if removable(lam.lo) { EndpointClass::Removable } else { lam.lo_class },
        hi_class: if removable(lam.hi) { EndpointClass::Removable } else { lam.hi_class },
        interior_singularities: Vec::new(),
    };
    let mut flags = a.flags;
    flags.outside_lambda = false;
    if lam.contains(a.lambda_hat) {
        return Ok(EstimateResult { method: Method::AqmleCensored, space_used: closure, flags, ..a });
    }
    let lambda = if a.flags.single_peak_verified && !a.flags.multi_peak_detected {
        a.lambda_hat.clamp(lam.lo, lam.hi)
    } else {
        let d = opts.pad * lam.width();
        let lo = if closure.lo_class == EndpointClass::Removable { lam.lo } else { lam.lo + d };
        let hi = if closure.hi_class == EndpointClass::Removable { lam.hi } else { lam.hi - d };
        maximize(|l| data.adjusted_loglik_raw(l), lo, hi, opts.grid_size, opts.refine_levels, opts.xtol_max)
            .ok_or(Error::PerfectFit(0.0))?
            .x
    };
    flags.censored = lambda != a.lambda_hat;
    flags.boundary = lambda == lam.lo || lambda == lam.hi;
    Ok(EstimateResult {
        lambda_hat: lambda,
        beta_hat: data.beta_hat(lambda)?.as_slice().to_vec(),
        sigma2_hat: data.sigma2_aml(lambda).unwrap_or(0.0),
        method: Method::AqmleCensored,
        objective: data.adjusted_loglik(lambda).unwrap_or(f64::INFINITY),
        space_used: closure,
        flags,
    })
}

/// Unrestricted QMLE `λ̂_uML` over the finite window `[f/ω_min, f/ω_max]`.
pub fn unrestricted_qmle(data: &SarData) -> Result<EstimateResult> {
    unrestricted_qmle_with(data, &EstimateOptions::default())
}

pub fn unrestricted_qmle_with(data: &SarData, opts: &EstimateOptions) -> Result<EstimateResult> {
    assumption1_guard(data, opts)?;
    let lam = data.lambda_space()?.clone();
    let wlo = opts.window_factor * lam.lo;
    let whi = opts.window_factor * lam.hi;
    let window = ParamSpace {
        lo: wlo,
        hi: whi,
        lo_class: EndpointClass::Divergent,
        hi_class: EndpointClass::Divergent,
        interior_singularities: Vec::new(),
    };
    if let Some(r) = exact_fit(data, &window, Method::Uqmle) {
        return Ok(r);
    }
    let mut cuts = vec![wlo];
    cuts.extend(data.ctx().real_poles().into_iter().filter(|&p| p > wlo && p < whi));
    cuts.push(whi);
    let mut best: Option<Peak> = None;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a <= 0.0 {
            continue;
        }
        let inside = (a == lam.lo) && (b == lam.hi);
        let (lo, hi, grid) = if inside {
            let (lo, hi) = lam.padded(opts.pad);
            (lo, hi, opts.grid_size)
        } else {
            let d = opts.pad * (b - a);
            (a + d, b - d, opts.interval_grid)
        };
        let Some(p) = maximize(|l| data.profile_loglik_raw(l), lo, hi, grid, opts.refine_levels, opts.xtol_max) else {
            continue;
        };
        let p = if p.boundary {
            Peak { boundary: inside || a == wlo || b == whi, ..p }
        } else {
            let x = polish_with_score(data, p.x, lo, hi);
            Peak { x, f: data.profile_loglik_raw(x), ..p }
        };
        best = match best {
            None => Some(p),
            Some(q) => {
                let tie = (p.f - q.f).abs() <= 1e-12 * q.f.abs().max(1.0);
                Some(if (tie && p.x.abs() < q.x.abs()) || (!tie && p.f > q.f) { p } else { q })
            }
        };
    }
    let peak = best.ok_or(Error::PerfectFit(0.0))?;
    let lambda = peak.x;
    Ok(EstimateResult {
        lambda_hat: lambda,
        beta_hat: data.beta_hat(lambda)?.as_slice().to_vec(),
        sigma2_hat: data.sigma2_ml(lambda)?,
        method: Method::Uqmle,
        space_used: window,
        flags: EstimateFlags {
            outside_lambda: !lam.contains(lambda),
            multi_peak_detected: peak.multi,
            boundary: peak.boundary,
            ..Default::default()
        },
        objective: peak.f,
    })
}
