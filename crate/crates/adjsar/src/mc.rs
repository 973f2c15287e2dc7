//! Monte Carlo harness for the bias, exceedance and coverage experiments.
//!
//! Replication `r` of an experiment draws everything it needs from
//! `stream_rng(seed, r)`, and results are folded in replication order, so a
//! summary is bit-identical for any thread count.

use crate::error::{Error, Result};
use crate::estimate::{self, EstimateOptions, EstimateResult, Method};
use crate::infer::{self, Side};
use crate::linalg;
use crate::panels::{self, NetworkDesign, NetworkPanel};
use crate::rng::{derive_seed, stream_rng};
use crate::sar::{ErrorDist, ReducedForm, SarData, SpatialContext};
use crate::weights::{self, Normalization, WeightsMatrix};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::sync::Arc;

const GRAPH_LABEL: u64 = 0x4752_4150_48;
const X_LABEL: u64 = 0x58;
const CHUNK: usize = 2048;

/// Network layout of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Design {
    /// One Watts-Strogatz graph of size `n`; `X = (ι, X̃, WX̃)`.
    SingleNetwork { n: usize, h: usize, p: f64, normalization: Normalization },
    /// `R` Watts-Strogatz graphs of size `m`; `X = (X̃, WX̃, ⊕ι)` with fixed effects `α_r ~ N(0, 1)`.
    NetworkFe { r: usize, m: usize, h: usize, p: f64, normalization: Normalization },
}

impl Design {
    pub fn n(&self) -> usize {
        match *self {
            Design::SingleNetwork { n, .. } => n,
            Design::NetworkFe { r, m, .. } => r * m,
        }
    }

    pub fn normalization(&self) -> Normalization {
        match *self {
            Design::SingleNetwork { normalization, .. } | Design::NetworkFe { normalization, .. } => normalization,
        }
    }

    fn is_network(&self) -> bool {
        matches!(self, Design::NetworkFe { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XPolicy {
    RedrawEachRep,
    Fixed,
}

/// Distribution of the columns of `X̃`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressorLaw {
    /// First `⌈k̃/2⌉` columns `N(0, 1)`, the rest `U(0, 1)`.
    Mixed,
    /// All columns `N(0, 1)`.
    Normal,
}

/// Point estimators tracked by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Ml,
    Aml,
    AmlCensored,
    Uml,
    Lll,
}

impl Estimator {
    pub const ALL: [Estimator; 5] = [Self::Ml, Self::Aml, Self::AmlCensored, Self::Uml, Self::Lll];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Ml => "ml",
            Self::Aml => "aml",
            Self::AmlCensored => "aml_censored",
            Self::Uml => "uml",
            Self::Lll => "lll",
        }
    }

    fn index(&self) -> usize {
        *self as usize
    }
}

/// Confidence intervals whose coverage is tracked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    WaldMl,
    WaldAml,
    WaldLll,
    SaddlepointAml,
}

impl CiMethod {
    pub fn name(&self) -> &'static str {
        match self {
            Self::WaldMl => "w_ml",
            Self::WaldAml => "w_aml",
            Self::WaldLll => "w_lll",
            Self::SaddlepointAml => "s_aml",
        }
    }

    fn estimator(&self) -> Estimator {
        match self {
            Self::WaldMl => Estimator::Ml,
            Self::WaldAml | Self::SaddlepointAml => Estimator::Aml,
            Self::WaldLll => Estimator::Lll,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub design: Design,
    pub k_tilde: usize,
    pub lambda: f64,
    pub sigma: f64,
    pub error: ErrorDist,
    pub reps: usize,
    pub seed: u64,
    pub x_policy: XPolicy,
    pub regressors: RegressorLaw,
    pub estimators: Vec<Estimator>,
    pub ci_methods: Vec<CiMethod>,
    /// Nominal coverage of the intervals.
    pub level: f64,
    pub options: EstimateOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            design: Design::SingleNetwork { n: 200, h: 5, p: 0.0, normalization: Normalization::Row },
            k_tilde: 2,
            lambda: 0.5,
            sigma: 1.0,
            error: ErrorDist::Normal,
            reps: 1000,
            seed: 1,
            x_policy: XPolicy::RedrawEachRep,
            regressors: RegressorLaw::Mixed,
            estimators: vec![Estimator::Ml, Estimator::Aml],
            ci_methods: Vec::new(),
            level: 0.95,
            options: EstimateOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.reps == 0 {
            return bad("replication count must be at least 1".into());
        }
        if !(self.sigma >= 0.0) || !self.lambda.is_finite() {
            return bad("need finite lambda and sigma >= 0".into());
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return bad(format!("level must lie in (0, 1), got {}", self.level));
        }
        let (size, h, p) = match self.design {
            Design::SingleNetwork { n, h, p, .. } => (n, h, p),
            Design::NetworkFe { r, m, h, p, .. } => {
                if r == 0 {
                    return bad("need at least one network".into());
                }
                (m, h, p)
            }
        };
        if !(0.0..=1.0).contains(&p) || h == 0 || size < 2 * h + 1 {
            return bad(format!("invalid graph parameters n = {size}, h = {h}, p = {p}"));
        }
        let k = match self.design {
            Design::SingleNetwork { .. } => 2 * self.k_tilde + 1,
            Design::NetworkFe { r, .. } => 2 * self.k_tilde + r,
        };
        if k + 2 > self.design.n() {
            return bad(format!("{k} regressors leave too few degrees of freedom"));
        }
        let lll = self.estimators.contains(&Estimator::Lll) || self.ci_methods.contains(&CiMethod::WaldLll);
        if lll && !self.design.is_network() {
            return bad("the LLL estimator needs a network fixed-effects design".into());
        }
        if self.estimators.is_empty() && self.ci_methods.is_empty() {
            return bad("nothing to estimate".into());
        }
        Ok(())
    }

    fn needed(&self) -> [bool; 5] {
        let mut need = [false; 5];
        for e in &self.estimators {
            need[e.index()] = true;
        }
        for c in &self.ci_methods {
            need[c.estimator().index()] = true;
        }
        need
    }
}

/// Fixed parts of an experiment: graph, reduced form and (optionally) `X̃`.
struct Prepared {
    ctx: Arc<SpatialContext>,
    network: Option<Arc<NetworkDesign>>,
    rf: ReducedForm,
    fixed_xt: Option<DMatrix<f64>>,
    need: [bool; 5],
}

fn ws_weights(n: usize, h: usize, p: f64, seed: u64, mode: Normalization) -> Result<WeightsMatrix> {
    weights::normalize(&weights::watts_strogatz(n, h, p, seed)?, mode)
}

/// The weights matrix of `design` drawn from `seed` (each block from its own derived seed).
pub fn design_weights(design: &Design, seed: u64) -> Result<Vec<WeightsMatrix>> {
    let base = derive_seed(seed, GRAPH_LABEL);
    match *design {
        Design::SingleNetwork { n, h, p, normalization } => Ok(vec![ws_weights(n, h, p, base, normalization)?]),
        Design::NetworkFe { r, m, h, p, normalization } => {
            (0..r).map(|i| ws_weights(m, h, p, derive_seed(base, i as u64 + 1), normalization)).collect()
        }
    }
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let mut blocks = design_weights(&cfg.design, cfg.seed)?;
    let (ctx, network) = if cfg.design.is_network() {
        let d = Arc::new(NetworkDesign::new(blocks)?);
        (d.ctx().clone(), Some(d))
    } else {
        (SpatialContext::new(blocks.remove(0))?, None)
    };
    let rf = ReducedForm::new(&ctx, cfg.lambda)?;
    let fixed_xt = match cfg.x_policy {
        XPolicy::Fixed => Some(draw_regressors(ctx.n(), cfg.k_tilde, cfg.regressors, &mut stream_rng(derive_seed(cfg.seed, X_LABEL), 0))),
        XPolicy::RedrawEachRep => None,
    };
    let need = cfg.needed();
    if need[Estimator::Lll.index()] {
        network.as_ref().expect("validated").lll()?;
    }
    Ok(Prepared { ctx, network, rf, fixed_xt, need })
}

/// `n × k̃` regressors drawn column by column from `law`.
pub fn draw_regressors<R: Rng + ?Sized>(n: usize, k_tilde: usize, law: RegressorLaw, rng: &mut R) -> DMatrix<f64> {
    let normal_cols = match law {
        RegressorLaw::Mixed => k_tilde - k_tilde / 2,
        RegressorLaw::Normal => k_tilde,
    };
    let mut x = DMatrix::zeros(n, k_tilde);
    for j in 0..k_tilde {
        for i in 0..n {
            x[(i, j)] = if j < normal_cols { rng.sample(StandardNormal) } else { rng.random::<f64>() };
        }
    }
    x
}

/// One simulated sample: the SAR data and, for network designs, the panel.
pub struct Sample {
    pub data: SarData,
    pub panel: Option<NetworkPanel>,
}

fn simulate(cfg: &ExperimentConfig, prep: &Prepared, rep: u64) -> Result<Sample> {
    let mut rng = stream_rng(cfg.seed, rep);
    let n = prep.ctx.n();
    let xt = match &prep.fixed_xt {
        Some(x) => x.clone(),
        None => draw_regressors(n, cfg.k_tilde, cfg.regressors, &mut rng),
    };
    let wxt = linalg::matmul(prep.ctx.w().entries(), &xt);
    let ones = DVector::from_element(cfg.k_tilde, 1.0);
    let (x, mean) = match &prep.network {
        None => {
            let x = linalg::hstack(&[&DMatrix::from_element(n, 1, 1.0), &xt, &wxt]);
            let mean = &x * DVector::from_element(x.ncols(), 1.0);
            (x, mean)
        }
        Some(d) => {
            let dummies = d.group_dummies();
            let alpha = DVector::from_fn(dummies.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
            let mean = &xt * &ones + &wxt * &ones + &dummies * alpha;
            (d.design_matrix(&xt), mean)
        }
    };
    let eps = cfg.error.sample_vec(n, &mut rng);
    let y = prep.rf.apply(&mean, cfg.sigma, &eps);
    let panel = match &prep.network {
        Some(d) => Some(NetworkPanel::new(d.clone(), xt, y.clone())?),
        None => None,
    };
    Ok(Sample { data: SarData::new(prep.ctx.clone(), x, y)?, panel })
}

/// Simulates replication `rep` of `cfg` (for oracles and diagnostics).
pub fn simulate_replication(cfg: &ExperimentConfig, rep: u64) -> Result<Sample> {
    simulate(cfg, &prepare(cfg)?, rep)
}

#[derive(Debug, Clone, Default)]
struct RepOutcome {
    est: [Option<f64>; 5],
    cover: Vec<Option<[bool; 2]>>,
}

fn run_rep(cfg: &ExperimentConfig, prep: &Prepared, rep: u64) -> RepOutcome {
    let mut out = RepOutcome { est: [None; 5], cover: vec![None; cfg.ci_methods.len()] };
    let Ok(sample) = simulate(cfg, prep, rep) else {
        return out;
    };
    let data = &sample.data;
    let lll_sys = if prep.need[Estimator::Lll.index()] {
        sample.panel.as_ref().and_then(|p| p.lll_transform().ok())
    } else {
        None
    };
    let mut results: [Option<EstimateResult>; 5] = Default::default();
    for e in Estimator::ALL {
        if !prep.need[e.index()] {
            continue;
        }
        let r = match e {
            Estimator::Ml => estimate::estimate(data, Method::Qmle, &cfg.options),
            Estimator::Aml => estimate::estimate(data, Method::Aqmle, &cfg.options),
            Estimator::AmlCensored => estimate::estimate(data, Method::AqmleCensored, &cfg.options),
            Estimator::Uml => estimate::estimate(data, Method::Uqmle, &cfg.options),
            Estimator::Lll => match &lll_sys {
                Some(sys) => panels::lll_estimator(sys, &cfg.options),
                None => Err(Error::LllInapplicable { block: 0 }),
            },
        };
        results[e.index()] = r.ok();
    }
    for e in &cfg.estimators {
        out.est[e.index()] = results[e.index()].as_ref().map(|r| r.lambda_hat);
    }
    let half = 0.5 * (1.0 - cfg.level);
    for (slot, ci) in out.cover.iter_mut().zip(&cfg.ci_methods) {
        let Some(res) = &results[ci.estimator().index()] else { continue };
        *slot = match ci {
            CiMethod::SaddlepointAml => infer::cdf_hat(data, res.lambda_hat, cfg.lambda)
                .ok()
                .filter(|c| c.prob.is_finite())
                .map(|c| [c.prob >= half && c.prob <= 1.0 - half, c.prob >= 1.0 - cfg.level]),
            _ => {
                let d = if *ci == CiMethod::WaldLll { lll_sys.as_ref().map(|s| &s.data) } else { Some(data) };
                d.and_then(|d| {
                    let two = infer::wald_ci(d, res, cfg.level, Side::Two).ok()?;
                    let right = infer::wald_ci(d, res, cfg.level, Side::Right).ok()?;
                    Some([two.contains(cfg.lambda), right.contains(cfg.lambda)])
                })
            }
        };
    }
    out
}

/// Streaming moments of one estimator.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
    sq_err: f64,
    gt1: u64,
}

impl Moments {
    fn push(&mut self, x: f64, truth: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let d = x - self.mean;
        let dn = d / n;
        let dn2 = dn * dn;
        let t = d * dn * n1;
        self.mean += dn;
        self.m4 += t * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * self.m2 - 4.0 * dn * self.m3;
        self.m3 += t * dn * (n - 2.0) - 3.0 * dn * self.m2;
        self.m2 += t;
        self.sq_err += (x - truth) * (x - truth);
        self.gt1 += u64::from(x > 1.0);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: Estimator,
    pub reps: u64,
    pub failures: u64,
    pub mean: f64,
    pub bias: f64,
    /// Standard deviation across replications (divisor `reps`).
    pub sd: f64,
    pub rmse: f64,
    /// Monte Carlo standard error of `bias`.
    pub mc_se: f64,
    /// Delta-method Monte Carlo standard error of `sd`.
    pub sd_se: f64,
    pub frac_gt1: f64,
    pub frac_gt1_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub method: CiMethod,
    pub reps: u64,
    pub failures: u64,
    pub two_sided: f64,
    pub two_sided_se: f64,
    pub right_sided: f64,
    pub right_sided_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub config: ExperimentConfig,
    pub estimators: Vec<EstimatorSummary>,
    pub coverage: Vec<CoverageSummary>,
    /// `100(|bias_aML| − |bias_base|)/|bias_base|`, with base ML or LLL.
    pub delta_abs_bias_pct: Option<f64>,
    pub delta_rmse_pct: Option<f64>,
    /// `1/ω₂` for row-normalized `W`.
    pub omega2_inv: Option<f64>,
    /// `P(λ̂_uML > 1 | λ̂_aML > 1)`.
    pub ua: Option<f64>,
    /// `P(λ̂_aML > 1 | λ̂_uML > 1)`.
    pub au: Option<f64>,
    /// Replications in which every requested quantity failed.
    pub failed_reps: u64,
}

impl SummaryRow {
    pub fn estimator(&self, e: Estimator) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|s| s.estimator == e)
    }

    pub fn coverage_of(&self, m: CiMethod) -> Option<&CoverageSummary> {
        self.coverage.iter().find(|s| s.method == m)
    }
}

/// `1/ω₂`, the reciprocal of the largest real eigenvalue below `ω_max = 1`.
pub fn omega2_inverse(ctx: &SpatialContext) -> Option<f64> {
    let real = ctx.info().real_eigenvalues();
    let top = real.last()?.value;
    real.iter().rev().map(|r| r.value).find(|&v| v < top - 1e-8 && v > 0.0).map(|v| 1.0 / v)
}

#[derive(Debug, Default)]
struct Accumulator {
    moments: [Moments; 5],
    cover: Vec<(u64, u64, u64)>,
    joint: (u64, u64, u64),
    failed_reps: u64,
}

impl Accumulator {
    fn push(&mut self, cfg: &ExperimentConfig, o: &RepOutcome) {
        for e in &cfg.estimators {
            if let Some(v) = o.est[e.index()] {
                self.moments[e.index()].push(v, cfg.lambda);
            }
        }
        for (acc, c) in self.cover.iter_mut().zip(&o.cover) {
            if let Some([two, right]) = c {
                acc.0 += 1;
                acc.1 += u64::from(*two);
                acc.2 += u64::from(*right);
            }
        }
        if let (Some(u), Some(a)) = (o.est[Estimator::Uml.index()], o.est[Estimator::Aml.index()]) {
            self.joint.0 += u64::from(u > 1.0 && a > 1.0);
            self.joint.1 += u64::from(a > 1.0);
            self.joint.2 += u64::from(u > 1.0);
        }
        let any = o.est.iter().any(Option::is_some) || o.cover.iter().any(Option::is_some);
        self.failed_reps += u64::from(!any);
    }
}

fn finish(cfg: &ExperimentConfig, prep: &Prepared, acc: Accumulator) -> SummaryRow {
    let reps = cfg.reps as u64;
    let estimators: Vec<EstimatorSummary> = cfg
        .estimators
        .iter()
        .map(|&e| {
            let m = acc.moments[e.index()];
            let cnt = m.n.max(1) as f64;
            let sd = (m.m2 / cnt).max(0.0).sqrt();
            let frac = m.gt1 as f64 / cnt;
            let var = sd * sd;
            let sd_se = if var > 0.0 { ((m.m4 / cnt - var * var).max(0.0) / (4.0 * cnt * var)).sqrt() } else { 0.0 };
            EstimatorSummary {
                estimator: e,
                reps: m.n,
                failures: reps - m.n,
                mean: m.mean,
                bias: m.mean - cfg.lambda,
                sd,
                rmse: (m.sq_err / cnt).sqrt(),
                mc_se: sd / cnt.sqrt(),
                sd_se,
                frac_gt1: frac,
                frac_gt1_se: (frac * (1.0 - frac) / cnt).sqrt(),
            }
        })
        .collect();
    let prop = |k: u64, n: u64| {
        let p = k as f64 / n.max(1) as f64;
        (p, (p * (1.0 - p) / n.max(1) as f64).sqrt())
    };
    let coverage = cfg
        .ci_methods
        .iter()
        .zip(&acc.cover)
        .map(|(&method, &(n, two, right))| {
            let (t, tse) = prop(two, n);
            let (r, rse) = prop(right, n);
            CoverageSummary {
                method,
                reps: n,
                failures: reps - n,
                two_sided: t,
                two_sided_se: tse,
                right_sided: r,
                right_sided_se: rse,
            }
        })
        .collect();
    let find = |e: Estimator| estimators.iter().find(|s| s.estimator == e);
    let base = find(Estimator::Ml).or_else(|| find(Estimator::Lll));
    let (dbias, drmse) = match (base, find(Estimator::Aml)) {
        (Some(b), Some(a)) => (
            Some(100.0 * (a.bias.abs() - b.bias.abs()) / b.bias.abs()),
            Some(100.0 * (a.rmse - b.rmse) / b.rmse),
        ),
        _ => (None, None),
    };
    let joint = cfg.estimators.contains(&Estimator::Uml) && cfg.estimators.contains(&Estimator::Aml);
    let (both, a_gt, u_gt) = acc.joint;
    let ratio = |k: u64, n: u64| if n == 0 { None } else { Some(k as f64 / n as f64) };
    SummaryRow {
        config: cfg.clone(),
        estimators,
        coverage,
        delta_abs_bias_pct: dbias,
        delta_rmse_pct: drmse,
        omega2_inv: if cfg.design.normalization() == Normalization::Row { omega2_inverse(&prep.ctx) } else { None },
        ua: if joint { ratio(both, a_gt) } else { None },
        au: if joint { ratio(both, u_gt) } else { None },
        failed_reps: acc.failed_reps,
    }
}

fn run(cfg: &ExperimentConfig) -> Result<SummaryRow> {
    let prep = prepare(cfg)?;
    let mut acc = Accumulator { cover: vec![(0, 0, 0); cfg.ci_methods.len()], ..Default::default() };
    let mut start = 0;
    while start < cfg.reps {
        let end = (start + CHUNK).min(cfg.reps);
        let outcomes: Vec<RepOutcome> =
            (start..end).into_par_iter().map(|r| run_rep(cfg, &prep, r as u64)).collect();
        for o in &outcomes {
            acc.push(cfg, o);
        }
        start = end;
    }
    Ok(finish(cfg, &prep, acc))
}

/// Bias, s.d., RMSE and exceedance frequencies of the configured estimators.
pub fn run_bias_experiment(cfg: &ExperimentConfig) -> Result<SummaryRow> {
    if cfg.estimators.is_empty() {
        return Err(Error::InvalidArgument("bias experiment needs at least one estimator".into()));
    }
    run(cfg)
}

/// Two-sided and right-sided coverage of the configured intervals.
pub fn run_coverage_experiment(cfg: &ExperimentConfig) -> Result<SummaryRow> {
    if cfg.ci_methods.is_empty() {
        return Err(Error::InvalidArgument("coverage experiment needs at least one interval".into()));
    }
    run(cfg)
}

/// Runs `f` on a pool of `threads` workers (`None`: all cores).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        b = b.num_threads(t.max(1));
    }
    let pool = b.build().map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Published tables the harness can regenerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableId {
    T1,
    T2,
    T3,
    T4,
    /// Unrestricted vs adjusted exceedance cross-tabs.
    S1,
    /// Network fixed effects with `R = 100`.
    S2,
    /// Coverage with `R = 100`.
    S3,
    /// Coverage under Laplace, `χ²₃` and `gamma(1/2, 1)` errors.
    S4,
}

impl TableId {
    pub const ALL: [TableId; 8] = [Self::T1, Self::T2, Self::T3, Self::T4, Self::S1, Self::S2, Self::S3, Self::S4];

    pub fn name(&self) -> &'static str {
        match self {
            Self::T1 => "1",
            Self::T2 => "2",
            Self::T3 => "3",
            Self::T4 => "4",
            Self::S1 => "S1",
            Self::S2 => "S2",
            Self::S3 => "S3",
            Self::S4 => "S4",
        }
    }
}

impl std::str::FromStr for TableId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_uppercase().replace(['.', ' '], "");
        let t = t.strip_prefix("TABLE").unwrap_or(&t);
        Self::ALL
            .into_iter()
            .find(|id| id.name() == t)
            .ok_or_else(|| Error::Unknown { kind: "table", name: s.into() })
    }
}

fn single(p: f64, h: usize, lambda: f64, k_tilde: usize, mode: Normalization, est: Vec<Estimator>) -> ExperimentConfig {
    ExperimentConfig {
        design: Design::SingleNetwork { n: 200, h, p, normalization: mode },
        k_tilde,
        lambda,
        estimators: est,
        ..Default::default()
    }
}

fn network(r: usize, m: usize, k_tilde: usize, lambda: f64, mode: Normalization) -> ExperimentConfig {
    ExperimentConfig {
        design: Design::NetworkFe { r, m, h: 5, p: 0.2, normalization: mode },
        k_tilde,
        lambda,
        ..Default::default()
    }
}

fn coverage_cell(r: usize, m: usize, k_tilde: usize, error: ErrorDist) -> ExperimentConfig {
    ExperimentConfig {
        error,
        estimators: Vec::new(),
        ci_methods: vec![CiMethod::WaldLll, CiMethod::WaldAml, CiMethod::SaddlepointAml],
        ..network(r, m, k_tilde, 0.0, Normalization::Row)
    }
}

/// The grid of cells of `id`, with `reps = 1`.
pub fn table_cells(id: TableId) -> Vec<ExperimentConfig> {
    use Estimator::*;
    use Normalization::{Row, Spectral};
    let ps = [0.0, 0.2, 0.5, 1.0];
    let rm = [(10, 20), (10, 30), (20, 20), (20, 30), (30, 20), (30, 30)];
    let mut cells = Vec::new();
    match id {
        TableId::T1 => {
            for &p in &ps {
                for h in [5, 10, 50] {
                    for lambda in [0.0, 0.5, 0.9] {
                        for (mode, est) in [(Row, vec![Ml, Aml, AmlCensored]), (Spectral, vec![Ml, Aml])] {
                            cells.push(ExperimentConfig { regressors: RegressorLaw::Normal, ..single(p, h, lambda, 2, mode, est) });
                        }
                    }
                }
            }
        }
        TableId::T2 => {
            for &p in &ps {
                for k in [2, 6, 10] {
                    for mode in [Row, Spectral] {
                        cells.push(single(p, 5, 0.5, k, mode, vec![Ml, Aml]));
                    }
                }
            }
        }
        TableId::T3 => {
            for k in [2, 6, 10] {
                for &(r, m) in &rm {
                    cells.push(ExperimentConfig { estimators: vec![Lll, Aml], ..network(r, m, k, 0.5, Row) });
                    cells.push(ExperimentConfig { estimators: vec![Aml], ..network(r, m, k, 0.5, Spectral) });
                }
            }
        }
        TableId::T4 => {
            for k in [2, 6, 10] {
                for &(r, m) in &rm {
                    for e in [ErrorDist::Normal, ErrorDist::GammaCentered] {
                        cells.push(coverage_cell(r, m, k, e));
                    }
                }
            }
        }
        TableId::S1 => {
            for &p in &ps {
                for h in [5, 10, 50, 75] {
                    for k in [1, 3, 5] {
                        cells.push(single(p, h, 0.5, k, Row, vec![Uml, Aml]));
                    }
                }
            }
        }
        TableId::S2 => {
            for k in [2, 10, 20, 30] {
                for m in [20, 30] {
                    cells.push(ExperimentConfig { estimators: vec![Lll, Aml], ..network(100, m, k, 0.5, Row) });
                }
            }
        }
        TableId::S3 => {
            for k in [2, 10, 20, 30, 50] {
                for m in [20, 30] {
                    cells.push(coverage_cell(100, m, k, ErrorDist::Normal));
                }
            }
        }
        TableId::S4 => {
            for k in [2, 6, 10] {
                for &(r, m) in &rm {
                    for e in [ErrorDist::Laplace, ErrorDist::Chi2Std, ErrorDist::GammaHalfStd] {
                        cells.push(coverage_cell(r, m, k, e));
                    }
                }
            }
        }
    }
    for c in &mut cells {
        c.reps = 1;
    }
    cells
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub table: TableId,
    pub reps: usize,
    pub rows: Vec<SummaryRow>,
}

/// Regenerates table `id` at `10⁶/scale_factor` replications per cell.
pub fn replicate_table(id: TableId, scale_factor: f64) -> Result<TableReport> {
    replicate_table_with(id, scale_factor, 1, |_, _| {})
}

/// As [`replicate_table`], with a base seed and a callback run after each cell.
pub fn replicate_table_with(
    id: TableId,
    scale_factor: f64,
    seed: u64,
    mut progress: impl FnMut(usize, &SummaryRow),
) -> Result<TableReport> {
    if !(scale_factor >= 1.0) {
        return Err(Error::InvalidArgument(format!("scale factor must be at least 1, got {scale_factor}")));
    }
    let reps = ((1e6 / scale_factor).round() as usize).max(1);
    let mut rows = Vec::new();
    for (i, mut cell) in table_cells(id).into_iter().enumerate() {
        cell.reps = reps;
        cell.seed = derive_seed(seed, i as u64);
        let row = run(&cell)?;
        progress(i, &row);
        rows.push(row);
    }
    Ok(TableReport { table: id, reps, rows })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x}"))
}

/// Flattened `(column, value)` pairs of one row.
pub fn row_fields(row: &SummaryRow) -> Vec<(String, String)> {
    let c = &row.config;
    let mut f: Vec<(String, String)> = Vec::new();
    let mut put = |k: &str, v: String| f.push((k.to_owned(), v));
    match c.design {
        Design::SingleNetwork { n, h, p, normalization } => {
            put("design", "single".into());
            put("n", n.to_string());
            put("R", String::new());
            put("m", String::new());
            put("h", h.to_string());
            put("p", p.to_string());
            put("normalization", format!("{normalization:?}").to_lowercase());
        }
        Design::NetworkFe { r, m, h, p, normalization } => {
            put("design", "network_fe".into());
            put("n", (r * m).to_string());
            put("R", r.to_string());
            put("m", m.to_string());
            put("h", h.to_string());
            put("p", p.to_string());
            put("normalization", format!("{normalization:?}").to_lowercase());
        }
    }
    put("k_tilde", c.k_tilde.to_string());
    put("lambda", c.lambda.to_string());
    put("error", c.error.name().into());
    put("reps", c.reps.to_string());
    for s in &row.estimators {
        let e = s.estimator.name();
        put(&format!("{e}_bias"), format!("{:.6}", s.bias));
        put(&format!("{e}_sd"), format!("{:.6}", s.sd));
        put(&format!("{e}_rmse"), format!("{:.6}", s.rmse));
        put(&format!("{e}_mc_se"), format!("{:.6}", s.mc_se));
        put(&format!("{e}_sd_mc_se"), format!("{:.6}", s.sd_se));
        put(&format!("{e}_pct_gt1"), format!("{:.4}", 100.0 * s.frac_gt1));
        put(&format!("{e}_failures"), s.failures.to_string());
    }
    put("delta_abs_bias_pct", fmt_opt(row.delta_abs_bias_pct));
    put("delta_rmse_pct", fmt_opt(row.delta_rmse_pct));
    put("omega2_inv", fmt_opt(row.omega2_inv));
    put("ua_pct", fmt_opt(row.ua.map(|v| 100.0 * v)));
    put("au_pct", fmt_opt(row.au.map(|v| 100.0 * v)));
    for s in &row.coverage {
        let m = s.method.name();
        put(&format!("{m}_two"), format!("{:.4}", s.two_sided));
        put(&format!("{m}_two_mc_se"), format!("{:.4}", s.two_sided_se));
        put(&format!("{m}_right"), format!("{:.4}", s.right_sided));
        put(&format!("{m}_right_mc_se"), format!("{:.4}", s.right_sided_se));
        put(&format!("{m}_failures"), s.failures.to_string());
    }
    f
}

impl TableReport {
    /// CSV with one line per cell; columns are the union over cells.
    pub fn to_csv(&self) -> String {
        let fields: Vec<Vec<(String, String)>> = self.rows.iter().map(row_fields).collect();
        let mut header: Vec<String> = Vec::new();
        for row in &fields {
            for (k, _) in row {
                if !header.contains(k) {
                    header.push(k.clone());
                }
            }
        }
        let mut out = format!("table,{}\n", header.join(","));
        for row in &fields {
            let cells: Vec<&str> = header
                .iter()
                .map(|h| row.iter().find(|(k, _)| k == h).map_or("", |(_, v)| v.as_str()))
                .collect();
            writeln!(out, "{},{}", self.table.name(), cells.join(",")).expect("string write");
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(reps: usize, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            design: Design::SingleNetwork { n: 40, h: 2, p: 0.2, normalization: Normalization::Row },
            k_tilde: 2,
            reps,
            seed,
            estimators: vec![Estimator::Ml, Estimator::Aml, Estimator::Uml],
            ..Default::default()
        }
    }

    #[test]
    fn reproducible_across_thread_counts() {
        let cfg = small(64, 3);
        let a = with_threads(Some(1), || run_bias_experiment(&cfg)).unwrap().unwrap();
        let b = with_threads(Some(3), || run_bias_experiment(&cfg)).unwrap().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rmse_identity_per_row() {
        let row = run_bias_experiment(&small(80, 5)).unwrap();
        for s in &row.estimators {
            assert!((s.rmse * s.rmse - s.bias * s.bias - s.sd * s.sd).abs() < 1e-12, "{s:?}");
        }
        assert!(row.ua.is_some() || row.estimator(Estimator::Aml).unwrap().frac_gt1 == 0.0);
    }

    #[test]
    fn noiseless_regime_has_no_error() {
        let cfg = ExperimentConfig { sigma: 1e-9, ..small(10, 2) };
        let row = run_bias_experiment(&cfg).unwrap();
        for s in &row.estimators {
            assert!(s.bias.abs() < 1e-6 && s.sd < 1e-6, "{s:?}");
        }
    }

    #[test]
    fn regressor_mix_half_normal_half_uniform() {
        let x = draw_regressors(4000, 3, RegressorLaw::Mixed, &mut stream_rng(1, 0));
        for j in 0..3 {
            let c = x.column(j);
            let (lo, hi) = (c.min(), c.max());
            if j < 2 {
                assert!(lo < -2.0 && hi > 2.0);
            } else {
                assert!(lo >= 0.0 && hi < 1.0 && (c.mean() - 0.5).abs() < 0.02);
            }
        }
    }

    #[test]
    fn mc_se_shrinks_with_reps() {
        let a = run_bias_experiment(&small(50, 9)).unwrap();
        let b = run_bias_experiment(&small(200, 9)).unwrap();
        for (x, y) in a.estimators.iter().zip(&b.estimators) {
            let r = x.mc_se / y.mc_se;
            assert!(r > 1.4 && r < 2.8, "{r}");
        }
    }

    #[test]
    fn streaming_moments_match_two_pass() {
        let xs: Vec<f64> = (0..500).map(|i| ((i * 37 % 101) as f64 / 7.0).sin() * 3.0 + 10.0).collect();
        let mut m = Moments::default();
        for &x in &xs {
            m.push(x, 0.0);
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let c = |p: i32| xs.iter().map(|x| (x - mean).powi(p)).sum::<f64>();
        assert!((m.mean - mean).abs() < 1e-12);
        assert!((m.m2 - c(2)).abs() < 1e-9 * c(2));
        assert!((m.m3 - c(3)).abs() < 1e-8 * c(2).powf(1.5));
        assert!((m.m4 - c(4)).abs() < 1e-9 * c(4));
    }

    #[test]
    fn quantile_oracle_interval_covers_nominally() {
        let cfg = ExperimentConfig { estimators: vec![Estimator::Aml], ..small(1, 11) };
        let prep = prepare(&cfg).unwrap();
        let draws = |offset: u64, k: u64| -> Vec<f64> {
            (0..k).filter_map(|r| run_rep(&cfg, &prep, offset + r).est[Estimator::Aml.index()]).collect()
        };
        let mut pilot: Vec<f64> = draws(0, 400).iter().map(|v| v - cfg.lambda).collect();
        pilot.sort_by(f64::total_cmp);
        let q = |p: f64| pilot[((pilot.len() - 1) as f64 * p).round() as usize];
        let (lo, hi) = (q(0.025), q(0.975));
        let fresh = draws(10_000, 400);
        let cover = fresh.iter().filter(|&&l| l - hi <= cfg.lambda && cfg.lambda <= l - lo).count() as f64
            / fresh.len() as f64;
        assert!((cover - 0.95).abs() < 0.04, "{cover}");
    }

    #[test]
    fn coverage_smoke_network() {
        let cfg = ExperimentConfig {
            design: Design::NetworkFe { r: 3, m: 12, h: 2, p: 0.2, normalization: Normalization::Row },
            k_tilde: 2,
            lambda: 0.0,
            reps: 20,
            estimators: vec![Estimator::Lll, Estimator::Aml],
            ci_methods: vec![CiMethod::WaldLll, CiMethod::WaldAml, CiMethod::SaddlepointAml],
            ..Default::default()
        };
        let row = run_coverage_experiment(&cfg).unwrap();
        assert_eq!(row.coverage.len(), 3);
        for c in &row.coverage {
            assert_eq!(c.reps + c.failures, 20);
            assert!(c.two_sided > 0.5, "{c:?}");
        }
        assert!(row.delta_abs_bias_pct.is_some());
    }

    #[test]
    fn lll_requires_network_design() {
        let cfg = ExperimentConfig { estimators: vec![Estimator::Lll], ..small(1, 1) };
        assert!(run_bias_experiment(&cfg).is_err());
    }

    #[test]
    fn table_ids_and_grids() {
        assert_eq!("S.1".parse::<TableId>().unwrap(), TableId::S1);
        assert_eq!("table3".parse::<TableId>().unwrap(), TableId::T3);
        assert!("9".parse::<TableId>().is_err());
        assert_eq!(table_cells(TableId::T1).len(), 72);
        assert_eq!(table_cells(TableId::T4).len(), 36);
        for id in TableId::ALL {
            for c in table_cells(id) {
                c.validate().unwrap();
            }
        }
    }

    #[test]
    fn delta_columns_follow_caption_formula() {
        let row = run_bias_experiment(&small(40, 4)).unwrap();
        let (m, a) = (row.estimator(Estimator::Ml).unwrap(), row.estimator(Estimator::Aml).unwrap());
        let d = 100.0 * (a.bias.abs() - m.bias.abs()) / m.bias.abs();
        assert_eq!(row.delta_abs_bias_pct, Some(d));
        let report = TableReport { table: TableId::T2, reps: 40, rows: vec![row] };
        let csv = report.to_csv();
        assert!(csv.starts_with("table,design,n"));
        assert!(csv.lines().nth(1).unwrap().starts_with("2,single,40"));
    }
}
