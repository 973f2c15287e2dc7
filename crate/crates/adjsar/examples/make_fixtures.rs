//! Writes the group-interaction and network fixed-effects fixtures.
//!
//! Usage: `make_fixtures <fixtures_dir>`

use adjsar::estimate::{estimate, EstimateOptions};
use adjsar::io::{write_matrix_market_file, write_table, DataTable};
use adjsar::mc::{design_weights, simulate_replication, Design, ExperimentConfig};
use adjsar::panels::{lll_estimator, NetworkDesign};
use adjsar::rng::stream_rng;
use adjsar::sar::{simulate_y, SpatialContext};
use adjsar::weights::{block_diag, group_interaction};
use adjsar::{ErrorDist, Method, Normalization, SarParams};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use std::path::Path;

fn write_json(path: &Path, v: &serde_json::Value) {
    std::fs::write(path, serde_json::to_string_pretty(v).unwrap() + "\n").unwrap();
}

fn group(dir: &Path) {
    let (r, m) = (4, 5);
    let n = r * m;
    let w = group_interaction(r, m).unwrap();
    let mut rng = stream_rng(11, 0);
    let mut x = DMatrix::zeros(n, r + 1);
    for i in 0..n {
        x[(i, i / m)] = 1.0;
        x[(i, r)] = rng.sample(StandardNormal);
    }
    let ctx = SpatialContext::new(w.clone()).unwrap();
    let beta = vec![1.0, -0.5, 0.5, 0.0, 1.0];
    let params = SarParams { lambda: 0.3, beta, sigma2: 1.0 };
    let y = simulate_y(&ctx, &x, &params, ErrorDist::Normal, 12).unwrap();
    std::fs::create_dir_all(dir).unwrap();
    write_matrix_market_file(dir.join("weights.mtx"), w.entries()).unwrap();
    let mut names = vec!["y".to_string()];
    names.extend((1..=r).map(|g| format!("g{g}")));
    names.push("x1".into());
    let mut values = DMatrix::zeros(n, r + 2);
    values.set_column(0, &y);
    values.view_mut((0, 1), (n, r + 1)).copy_from(&x);
    write_table(std::fs::File::create(dir.join("data.csv")).unwrap(), &DataTable { names, values }).unwrap();
    write_json(
        &dir.join("expected.json"),
        &serde_json::json!({
            "groups": r, "group_size": m,
            "normalization": "none",
            "assumption1_violated_at": -1.0 / (m as f64 - 1.0),
            "exit_code": 2,
        }),
    );
}

fn network(dir: &Path) {
    let cfg = ExperimentConfig {
        design: Design::NetworkFe { r: 10, m: 20, h: 5, p: 0.2, normalization: Normalization::Row },
        k_tilde: 2,
        lambda: 0.4,
        seed: 21,
        ..Default::default()
    };
    let sample = simulate_replication(&cfg, 0).unwrap();
    let panel = sample.panel.unwrap();
    let opts = EstimateOptions::default();
    let aml = estimate(&sample.data, Method::Aqmle, &opts).unwrap();
    let lll = lll_estimator(&panel.lll_transform().unwrap(), &opts).unwrap();
    let blocks = design_weights(&cfg.design, cfg.seed).unwrap();
    let sizes = NetworkDesign::new(blocks.clone()).unwrap().sizes().to_vec();
    std::fs::create_dir_all(dir).unwrap();
    write_matrix_market_file(dir.join("weights.mtx"), block_diag(&blocks).unwrap().entries()).unwrap();
    let n = panel.y().len();
    let k = panel.k_tilde();
    let mut names = vec!["network_id".to_string(), "unit_id".into(), "y".into()];
    names.extend((1..=k).map(|j| format!("x{j}")));
    let mut values = DMatrix::zeros(n, 3 + k);
    let mut row = 0;
    for (g, &s) in sizes.iter().enumerate() {
        for u in 0..s {
            values[(row, 0)] = (g + 1) as f64;
            values[(row, 1)] = (u + 1) as f64;
            row += 1;
        }
    }
    values.set_column(2, panel.y());
    values.view_mut((0, 3), (n, k)).copy_from(panel.xt());
    write_table(std::fs::File::create(dir.join("panel.csv")).unwrap(), &DataTable { names, values }).unwrap();
    write_json(
        &dir.join("expected.json"),
        &serde_json::json!({
            "sizes": sizes, "k_tilde": k,
            "normalization": "row",
            "true_lambda": cfg.lambda,
            "lambda_aml": aml.lambda_hat,
            "lambda_lll": lll.lambda_hat,
        }),
    );
}

fn main() {
    let root = std::env::args().nth(1).expect("fixtures directory");
    let root = Path::new(&root);
    group(&root.join("group_interaction"));
    network(&root.join("network_fe"));
}
