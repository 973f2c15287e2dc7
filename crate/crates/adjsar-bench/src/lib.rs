//! Shared inputs for the benchmarks.

use adjsar::mc::{draw_regressors, RegressorLaw};
use adjsar::rng::stream_rng;
use adjsar::sar::{simulate_y, SpatialContext};
use adjsar::weights::{normalize, watts_strogatz};
use adjsar::{ErrorDist, Normalization, SarData, SarParams, WeightsMatrix};
use nalgebra::DMatrix;

/// Row-normalized Watts-Strogatz weights.
pub fn ws_weights(n: usize, h: usize, p: f64, seed: u64) -> WeightsMatrix {
    normalize(&watts_strogatz(n, h, p, seed).expect("valid graph"), Normalization::Row).expect("no isolated vertex")
}

/// `y = 0.5Wy + Xι + ε` with `X = (ι, X̃)`, `k̃ = 2`.
pub fn instance(n: usize, seed: u64) -> SarData {
    let ctx = SpatialContext::new(ws_weights(n, 5, 0.2, seed)).expect("spectral decomposition");
    let xt = draw_regressors(n, 2, RegressorLaw::Mixed, &mut stream_rng(seed, 1));
    let x = DMatrix::from_fn(n, 3, |i, j| if j == 0 { 1.0 } else { xt[(i, j - 1)] });
    let params = SarParams { lambda: 0.5, beta: vec![1.0; 3], sigma2: 1.0 };
    let y = simulate_y(&ctx, &x, &params, ErrorDist::Normal, seed).expect("nonsingular S");
    SarData::new(ctx, x, y).expect("full rank design")
}
