//! Eigen-analysis of `W`: real eigenvalues, spectral projectors, Assumption 1
//! diagnostics, and the parameter spaces `Λ` and `Λ_a`.

use crate::error::{Error, Result};
use crate::linalg::{self, Annihilator};
use crate::weights::WeightsMatrix;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Realness tolerance, relative to `‖W‖`.
pub const TOL_IMAG: f64 = 1e-8;
/// Clustering tolerance, relative to `‖W‖`.
pub const TOL_CLUSTER: f64 = 1e-7;
/// Relative singular-value threshold for numeric rank.
pub const TOL_RANK: f64 = 1e-8;
/// `tr(M_X Q_ω)` counts as zero when below this multiple of `n`.
pub const TOL_TRACE_PER_N: f64 = 1e-6;

/// A distinct real eigenvalue of `W` with its multiplicities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealEigenvalue {
    pub value: f64,
    pub algebraic_mult: usize,
    pub geometric_mult: usize,
    pub semisimple: bool,
    /// Positions of the cluster members in [`SpectralInfo::values`].
    #[serde(skip)]
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone)]
enum Basis {
    /// `W = V Ω V'`.
    Symmetric { v: DMatrix<f64> },
    /// `W = D^{-1/2} V Ω V' D^{1/2}`.
    Similar { v: DMatrix<f64>, d_sqrt: DVector<f64> },
    /// `W = H Ω H⁻¹`.
    General { h: DMatrix<Complex64>, hinv: DMatrix<Complex64> },
}

/// Cached eigen-decomposition of a weights matrix.
#[derive(Debug, Clone)]
pub struct SpectralInfo {
    values: Vec<Complex64>,
    basis: Basis,
    real: Vec<RealEigenvalue>,
    norm_w: f64,
    diagonalizable: bool,
}

impl SpectralInfo {
    /// Decomposes `W` with the default tolerances.
    pub fn new(w: &WeightsMatrix) -> Result<Self> {
        Self::with_tolerances(w, TOL_IMAG, TOL_CLUSTER)
    }

    pub fn with_tolerances(w: &WeightsMatrix, tol_imag: f64, tol_cluster: f64) -> Result<Self> {
        let a = w.entries();
        let n = w.n();
        if n == 0 {
            return Err(Error::Dimension("empty weights matrix".into()));
        }
        let (values, basis, norm_w) = if w.is_symmetric() {
            let (vals, v) = linalg::sym_eigen(a)?;
            let norm = vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            (vals.into_iter().map(|x| Complex64::new(x, 0.0)).collect(), Basis::Symmetric { v }, norm)
        } else if let Some(d) = w.symmetrizer() {
            let ds = d.map(f64::sqrt);
            let t = DMatrix::from_fn(n, n, |i, j| ds[i] * a[(i, j)] / ds[j]);
            let t = (&t + t.transpose()) * 0.5;
            let (vals, v) = linalg::sym_eigen(&t)?;
            let norm = linalg::norm2(a)?;
            (
                vals.into_iter().map(|x| Complex64::new(x, 0.0)).collect(),
                Basis::Similar { v, d_sqrt: ds },
                norm,
            )
        } else {
            let (vals, h) = linalg::general_eigen(a)?;
            let hinv = h
                .clone()
                .lu()
                .try_inverse()
                .ok_or_else(|| Error::Eigen("eigenvector matrix is singular".into()))?;
            let norm = linalg::norm2(a)?;
            (vals, Basis::General { h, hinv }, norm)
        };
        let scale = norm_w.max(f64::MIN_POSITIVE);
        let mut real_idx: Vec<(f64, usize)> = values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.im.abs() < tol_imag * scale)
            .map(|(i, v)| (v.re, i))
            .collect();
        real_idx.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut clusters: Vec<Vec<(f64, usize)>> = Vec::new();
        for item in real_idx {
            match clusters.last_mut() {
                Some(c) if item.0 - c.last().expect("nonempty").0 < tol_cluster * scale => c.push(item),
                _ => clusters.push(vec![item]),
            }
        }
        let normal = !matches!(basis, Basis::General { .. });
        let mut real = Vec::with_capacity(clusters.len());
        let mut diagonalizable = true;
        for c in clusters {
            let alg = c.len();
            let value = c.iter().map(|x| x.0).sum::<f64>() / alg as f64;
            let geo = if normal {
                alg
            } else {
                let mut m = a.clone();
                for i in 0..n {
                    m[(i, i)] -= value;
                }
                n - linalg::numeric_rank(&m, TOL_RANK)?
            };
            let geo = geo.min(alg);
            diagonalizable &= geo == alg;
            real.push(RealEigenvalue {
                value,
                algebraic_mult: alg,
                geometric_mult: geo,
                semisimple: geo == alg,
                indices: c.into_iter().map(|x| x.1).collect(),
            });
        }
        Ok(Self { values, basis, real, norm_w, diagonalizable })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// All eigenvalues, aligned with the eigenvector basis.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Distinct real eigenvalues, ascending.
    pub fn real_eigenvalues(&self) -> &[RealEigenvalue] {
        &self.real
    }

    pub fn norm(&self) -> f64 {
        self.norm_w
    }

    /// Whether every real eigenvalue passed the semisimplicity check.
    pub fn real_semisimple(&self) -> bool {
        self.diagonalizable
    }

    pub fn omega_min(&self) -> Option<f64> {
        self.real.first().map(|r| r.value)
    }

    pub fn omega_max_real(&self) -> Option<f64> {
        self.real.last().map(|r| r.value)
    }

    /// Diagonal of `H⁻¹ M_X H` (the eigen-weights of `M_X`).
    ///
    /// `tr(M_X f(W)) = Σ wᵢ f(ωᵢ)` for diagonalizable `W`.
    pub fn eigen_weights(&self, m: &Annihilator) -> Vec<Complex64> {
        let n = self.n();
        let q = m.basis();
        let k = q.ncols();
        if k == 0 {
            return vec![Complex64::new(1.0, 0.0); n];
        }
        match &self.basis {
            Basis::Symmetric { v } => {
                let p = v.tr_mul(q);
                (0..n).map(|i| Complex64::new(1.0 - p.row(i).norm_squared(), 0.0)).collect()
            }
            Basis::Similar { v, d_sqrt } => {
                let mut qa = q.clone();
                let mut qb = q.clone();
                for i in 0..n {
                    qa.row_mut(i).scale_mut(d_sqrt[i]);
                    qb.row_mut(i).scale_mut(1.0 / d_sqrt[i]);
                }
                let pa = v.tr_mul(&qa);
                let pb = v.tr_mul(&qb);
                (0..n)
                    .map(|i| Complex64::new(1.0 - pa.row(i).dot(&pb.row(i)), 0.0))
                    .collect()
            }
            Basis::General { h, hinv } => {
                let qc = q.map(|x| Complex64::new(x, 0.0));
                let left = hinv * &qc;
                let right = qc.transpose() * h;
                (0..n)
                    .map(|i| {
                        let mut s = Complex64::new(0.0, 0.0);
                        for j in 0..k {
                            s += left[(i, j)] * right[(j, i)];
                        }
                        Complex64::new(1.0, 0.0) - s
                    })
                    .collect()
            }
        }
    }

    /// Kernel for `tr(M_X f(W))` evaluations in `O(n)` per `λ`.
    pub fn kernel(&self, m: &Annihilator) -> EigenKernel {
        EigenKernel::new(self, &self.eigen_weights(m), self.norm_w)
    }

    /// Kernel with unit weights, i.e. for `tr f(W)`.
    pub fn unit_kernel(&self) -> EigenKernel {
        EigenKernel::new(self, &vec![Complex64::new(1.0, 0.0); self.n()], self.norm_w)
    }

    /// Projector onto the eigenspace of a real eigenvalue assembled from the cached basis.
    pub fn projector_from_basis(&self, ev: &RealEigenvalue) -> Result<DMatrix<f64>> {
        if !ev.semisimple {
            return Err(Error::NotSemisimple {
                omega: ev.value,
                algebraic: ev.algebraic_mult,
                geometric: ev.geometric_mult,
            });
        }
        let n = self.n();
        let mut q = DMatrix::zeros(n, n);
        for &i in &ev.indices {
            match &self.basis {
                Basis::Symmetric { v } => {
                    let c = v.column(i);
                    q += c * c.transpose();
                }
                Basis::Similar { v, d_sqrt } => {
                    let c = v.column(i);
                    let h = c.component_div(d_sqrt);
                    let l = c.component_mul(d_sqrt);
                    q += h * l.transpose();
                }
                Basis::General { h, hinv } => {
                    let c = h.column(i);
                    let r = hinv.row(i);
                    q += (c * r).map(|z| z.re);
                }
            }
        }
        Ok(q)
    }
}

/// Eigenvalues paired with `M_X` eigen-weights; evaluates the traces used by
/// the likelihoods and scores.
#[derive(Debug, Clone)]
pub struct EigenKernel {
    real: Vec<(f64, f64)>,
    complex: Vec<(Complex64, Complex64)>,
}

impl EigenKernel {
    fn new(info: &SpectralInfo, weights: &[Complex64], norm: f64) -> Self {
        let tol = TOL_IMAG * norm.max(f64::MIN_POSITIVE);
        let mut real = Vec::new();
        let mut complex = Vec::new();
        for (v, w) in info.values.iter().zip(weights) {
            if v.im.abs() < tol {
                real.push((v.re, w.re));
            } else {
                complex.push((*v, *w));
            }
        }
        Self { real, complex }
    }

    /// Drops the eigenvalues within `tol` of `omega` (their weights sum to zero).
    pub fn snap_zero(&mut self, omega: f64, tol: f64) {
        self.real.retain(|(v, _)| (*v - omega).abs() > tol);
    }

    /// `Σ wᵢ` over eigenvalues within `tol` of `omega`.
    pub fn weight_near(&self, omega: f64, tol: f64) -> f64 {
        self.real.iter().filter(|(v, _)| (v - omega).abs() <= tol).map(|(_, w)| w).sum()
    }

    /// `Re Σ wᵢ log(1 − λωᵢ)` with the principal logarithm; real terms use `log|·|`.
    pub fn tr_log(&self, lambda: f64) -> f64 {
        let mut s = 0.0;
        for &(v, w) in &self.real {
            if w != 0.0 {
                s += w * (1.0 - lambda * v).abs().ln();
            }
        }
        for &(v, w) in &self.complex {
            s += (w * (Complex64::new(1.0, 0.0) - v * lambda).ln()).re;
        }
        s
    }

    /// `Re Σ wᵢ ωᵢ/(1 − λωᵢ)`.
    pub fn tr_g(&self, lambda: f64) -> f64 {
        let mut s = 0.0;
        for &(v, w) in &self.real {
            s += w * v / (1.0 - lambda * v);
        }
        for &(v, w) in &self.complex {
            s += (w * v / (Complex64::new(1.0, 0.0) - v * lambda)).re;
        }
        s
    }

    /// `Re Σ wᵢ ωᵢ²/(1 − λωᵢ)²`.
    pub fn tr_g2(&self, lambda: f64) -> f64 {
        let mut s = 0.0;
        for &(v, w) in &self.real {
            let g = v / (1.0 - lambda * v);
            s += w * g * g;
        }
        for &(v, w) in &self.complex {
            let g = v / (Complex64::new(1.0, 0.0) - v * lambda);
            s += (w * g * g).re;
        }
        s
    }

    /// `(tr_g, tr_g2)` in one pass.
    pub fn tr_g_g2(&self, lambda: f64) -> (f64, f64) {
        let (mut s1, mut s2) = (0.0, 0.0);
        for &(v, w) in &self.real {
            let g = v / (1.0 - lambda * v);
            s1 += w * g;
            s2 += w * g * g;
        }
        for &(v, w) in &self.complex {
            let g = v / (Complex64::new(1.0, 0.0) - v * lambda);
            s1 += (w * g).re;
            s2 += (w * g * g).re;
        }
        (s1, s2)
    }

    /// `Σ wᵢ`, i.e. `tr(M_X)`.
    pub fn total_weight(&self) -> f64 {
        self.real.iter().map(|x| x.1).sum::<f64>() + self.complex.iter().map(|x| x.1.re).sum::<f64>()
    }
}

/// Spectral projector `Q_ω` onto `null(W − ωI)` along `col(W − ωI)`.
#[derive(Debug, Clone)]
pub struct SpectralProjector {
    pub eigenvalue: f64,
    pub q: DMatrix<f64>,
}

/// Builds `Q_ω = H (L'H)⁻¹ L'` from right and left null-space bases.
pub fn spectral_projector(w: &WeightsMatrix, ev: &RealEigenvalue) -> Result<SpectralProjector> {
    if !ev.semisimple {
        return Err(Error::NotSemisimple {
            omega: ev.value,
            algebraic: ev.algebraic_mult,
            geometric: ev.geometric_mult,
        });
    }
    let n = w.n();
    let mut a = w.entries().clone();
    for i in 0..n {
        a[(i, i)] -= ev.value;
    }
    let h = linalg::null_space(&a, TOL_RANK)?;
    let l = linalg::null_space(&a.transpose(), TOL_RANK)?;
    if h.ncols() != l.ncols() || h.ncols() == 0 {
        return Err(Error::NotSemisimple {
            omega: ev.value,
            algebraic: ev.algebraic_mult,
            geometric: h.ncols(),
        });
    }
    let p = l.tr_mul(&h);
    let sv = linalg::singular_values(&p)?;
    let pivot = sv.last().copied().unwrap_or(0.0);
    if pivot < 1e-10 {
        return Err(Error::IllConditionedProjector { omega: ev.value, pivot });
    }
    let pinv = p.lu().try_inverse().ok_or(Error::IllConditionedProjector { omega: ev.value, pivot })?;
    Ok(SpectralProjector { eigenvalue: ev.value, q: h * pinv * l.transpose() })
}

/// Sign class of `tr(M_X Q_ω)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceSign {
    Negative,
    Zero,
    Positive,
}

fn classify(value: f64, tol: f64) -> TraceSign {
    if value.abs() < tol {
        TraceSign::Zero
    } else if value > 0.0 {
        TraceSign::Positive
    } else {
        TraceSign::Negative
    }
}

/// `tr(M_X Q)` and its classification at tolerance `tol`.
pub fn trace_mq(m: &Annihilator, q: &SpectralProjector, tol: f64) -> (TraceSign, f64) {
    let t = m.trace_of(&q.q);
    (classify(t, tol), t)
}

/// Default zero band for `tr(M_X Q_ω)`.
pub fn default_trace_tol(n: usize) -> f64 {
    TOL_TRACE_PER_N * n as f64
}

/// Outcome of the Assumption 1 scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "omega")]
pub enum Assumption1 {
    Ok,
    ViolatedAt(f64),
}

/// Assumption 1 fails iff `‖M_X(ωI − W)‖ < tol` for a real eigenvalue `ω`.
pub fn check_assumption1(w: &WeightsMatrix, info: &SpectralInfo, m: &Annihilator, tol: f64) -> Result<Assumption1> {
    let n = w.n();
    let k = m.k();
    for ev in info.real_eigenvalues() {
        if ev.algebraic_mult + k < n {
            continue;
        }
        let mut a = -w.entries().clone();
        for i in 0..n {
            a[(i, i)] += ev.value;
        }
        let r = m.apply_mat(&a);
        if linalg::norm2(&r)? < tol {
            return Ok(Assumption1::ViolatedAt(ev.value));
        }
    }
    Ok(Assumption1::Ok)
}

/// Default Assumption 1 tolerance.
pub fn default_assumption1_tol(info: &SpectralInfo) -> f64 {
    1e-8 * info.norm().max(1.0)
}

/// Behaviour of the adjusted likelihood at an endpoint of the parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointClass {
    Divergent,
    Removable,
    UnboundedAbove,
}

/// Open interval of admissible `λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub lo: f64,
    pub hi: f64,
    pub lo_class: EndpointClass,
    pub hi_class: EndpointClass,
    /// Removable singularities strictly inside the interval.
    pub interior_singularities: Vec<f64>,
}

impl ParamSpace {
    pub fn contains(&self, lambda: f64) -> bool {
        lambda > self.lo && lambda < self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Closed interval `[lo + δ, hi − δ]` with `δ = rel·(hi − lo)`.
    pub fn padded(&self, rel: f64) -> (f64, f64) {
        let d = rel * self.width();
        (self.lo + d, self.hi - d)
    }
}

/// `Λ = (1/ω_min, 1/ω_max)`.
pub fn lambda_space(info: &SpectralInfo) -> Result<ParamSpace> {
    let lo = info.omega_min().ok_or(Error::MissingSignedEigenvalue)?;
    let hi = info.omega_max_real().ok_or(Error::MissingSignedEigenvalue)?;
    if !(lo < 0.0 && hi > 0.0) {
        return Err(Error::MissingSignedEigenvalue);
    }
    Ok(ParamSpace {
        lo: 1.0 / lo,
        hi: 1.0 / hi,
        lo_class: EndpointClass::Divergent,
        hi_class: EndpointClass::Divergent,
        interior_singularities: Vec::new(),
    })
}

/// Classification of one real eigenvalue for the adjusted likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointReport {
    pub omega: f64,
    pub reciprocal: f64,
    pub trace_mq: f64,
    pub sign: TraceSign,
}

/// Full diagnostic outcome of the `Λ_a` walk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdjustedSpaceReport {
    pub space: Option<ParamSpace>,
    pub visited: Vec<EndpointReport>,
    pub failure: Option<String>,
}

/// Walks outward from the origin past removable singularities.
pub fn adjusted_space_report(info: &SpectralInfo, kernel: &EigenKernel, tol: f64) -> AdjustedSpaceReport {
    let ctol = TOL_CLUSTER * info.norm().max(f64::MIN_POSITIVE);
    let mut visited = Vec::new();
    let mut removable = Vec::new();
    let mut side = |evs: &mut dyn Iterator<Item = &RealEigenvalue>| -> std::result::Result<(f64, EndpointClass), String> {
        for ev in evs {
            if !ev.semisimple {
                visited.push(EndpointReport {
                    omega: ev.value,
                    reciprocal: 1.0 / ev.value,
                    trace_mq: f64::NAN,
                    sign: TraceSign::Positive,
                });
                return Ok((1.0 / ev.value, EndpointClass::Divergent));
            }
            let spread = ev
                .indices
                .iter()
                .map(|&i| (info.values[i].re - ev.value).abs())
                .fold(0.0f64, f64::max);
            let t = kernel.weight_near(ev.value, spread + ctol.max(f64::EPSILON));
            let sign = classify(t, tol);
            visited.push(EndpointReport { omega: ev.value, reciprocal: 1.0 / ev.value, trace_mq: t, sign });
            match sign {
                TraceSign::Zero => removable.push(1.0 / ev.value),
                TraceSign::Positive => return Ok((1.0 / ev.value, EndpointClass::Divergent)),
                TraceSign::Negative => {
                    return Err(format!(
                        "tr(M_X Q) = {t:.3e} < 0 at omega = {}: adjusted likelihood unbounded above",
                        ev.value
                    ))
                }
            }
        }
        Err("no divergent endpoint found".into())
    };
    let evs = info.real_eigenvalues();
    let hi = side(&mut evs.iter().rev().filter(|e| e.value > 0.0));
    let lo = side(&mut evs.iter().filter(|e| e.value < 0.0));
    match (lo, hi) {
        (Ok((lo, lo_class)), Ok((hi, hi_class))) => {
            removable.sort_by(f64::total_cmp);
            AdjustedSpaceReport {
                space: Some(ParamSpace { lo, hi, lo_class, hi_class, interior_singularities: removable }),
                visited,
                failure: None,
            }
        }
        (lo, hi) => {
            let mut msg = Vec::new();
            if let Err(e) = lo {
                msg.push(format!("left side: {e}"));
            }
            if let Err(e) = hi {
                msg.push(format!("right side: {e}"));
            }
            AdjustedSpaceReport { space: None, visited, failure: Some(msg.join("; ")) }
        }
    }
}

/// `Λ_a`, the shortest interval around the origin bounded by divergent singularities.
pub fn adjusted_space(info: &SpectralInfo, kernel: &EigenKernel, tol: f64) -> Result<ParamSpace> {
    if info.omega_min().map_or(true, |v| v >= 0.0) || info.omega_max_real().map_or(true, |v| v <= 0.0) {
        return Err(Error::MissingSignedEigenvalue);
    }
    let r = adjusted_space_report(info, kernel, tol);
    r.space.ok_or_else(|| Error::Assumption2(r.failure.unwrap_or_default()))
}

/// Outcome of the condition C1 scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "lambda")]
pub enum C1Status {
    Holds,
    FailsAt(f64),
}

/// Evaluates `(n−k) tr(M G²) − [tr(M G)]²` on a grid over `space`, skipping
/// points within `1e−6` of a real reciprocal eigenvalue.
pub fn check_c1(info: &SpectralInfo, kernel: &EigenKernel, n_minus_k: usize, space: &ParamSpace, grid_size: usize) -> C1Status {
    let (lo, hi) = space.padded(1e-8);
    let poles: Vec<f64> = info
        .real_eigenvalues()
        .iter()
        .filter(|e| e.value != 0.0)
        .map(|e| 1.0 / e.value)
        .collect();
    let g = grid_size.max(2);
    for i in 0..g {
        let lam = lo + (hi - lo) * i as f64 / (g - 1) as f64;
        if poles.iter().any(|p| (p - lam).abs() < 1e-6) {
            continue;
        }
        let (t1, t2) = kernel.tr_g_g2(lam);
        let delta = n_minus_k as f64 * t2 - t1 * t1;
        if !(delta > 0.0) {
            return C1Status::FailsAt(lam);
        }
    }
    C1Status::Holds
}
