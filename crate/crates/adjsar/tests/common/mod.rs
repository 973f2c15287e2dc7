#![allow(dead_code)]

use adjsar::rng::stream_rng;
use adjsar::sar::{ReducedForm, SpatialContext};
use adjsar::weights::{erdos_renyi_connected, normalize, watts_strogatz};
use adjsar::{ErrorDist, Normalization, SarData, WeightsMatrix};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::sync::Arc;

pub fn ws_ctx(n: usize, h: usize, p: f64, seed: u64, mode: Normalization) -> Arc<SpatialContext> {
    SpatialContext::new(normalize(&watts_strogatz(n, h, p, seed).unwrap(), mode).unwrap()).unwrap()
}

/// `(ι, N(0,1) columns)` with `k` columns in total.
pub fn design_with_intercept(n: usize, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, k, |_, j| if j == 0 { 1.0 } else { rng.sample(StandardNormal) })
}

pub fn simulate(ctx: &SpatialContext, x: &DMatrix<f64>, lambda: f64, dist: ErrorDist, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let rf = ReducedForm::new(ctx, lambda).unwrap();
    let mean = x * DVector::from_element(x.ncols(), 1.0);
    rf.apply(&mean, 1.0, &dist.sample_vec(ctx.n(), rng))
}

pub fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> WeightsMatrix {
    let mode = if rng.random::<bool>() { Normalization::Row } else { Normalization::Spectral };
    if rng.random::<f64>() < 0.7 {
        let h = rng.random_range(1..=3);
        let p = rng.random_range(0.05..0.6);
        normalize(&watts_strogatz(n, h, p, rng.random()).unwrap(), mode).unwrap()
    } else {
        let (g, _) = erdos_renyi_connected(n, 6.0 / n as f64, rng.random(), 200).unwrap();
        normalize(&g, mode).unwrap()
    }
}

/// A random SAR instance: graph, intercept plus regressors, and one draw of `y`.
pub fn random_instance(seed: u64) -> SarData {
    let mut rng = stream_rng(seed, 0);
    let n = rng.random_range(20..=60);
    let w = random_weights(&mut rng, n);
    let ctx = SpatialContext::new(w).unwrap();
    let k = rng.random_range(1..=4);
    let x = design_with_intercept(n, k, &mut rng);
    let lambda = rng.random_range(-0.4..0.7);
    let y = simulate(&ctx, &x, lambda, ErrorDist::Normal, &mut rng);
    SarData::new(ctx, x, y).unwrap()
}
