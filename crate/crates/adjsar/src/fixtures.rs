//! Bundled instances with expected outputs, embedded at compile time.

use crate::error::Result;
use crate::io::{read_matrix_market, read_table};
use crate::panels::NetworkPanel;
use crate::sar::{SarData, SpatialContext};
use crate::weights::{normalize_matrix, Normalization, WeightsMatrix};
use serde::Deserialize;

/// Source directory of the fixture files.
pub const FIXTURE_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");

const FIG1_ADJ: &str = include_str!("../fixtures/figure1/adjacency.mtx");
const FIG1_DATA: &str = include_str!("../fixtures/figure1/data.csv");
const FIG1_EXPECTED: &str = include_str!("../fixtures/figure1/expected.json");
const GROUP_W: &str = include_str!("../fixtures/group_interaction/weights.mtx");
const GROUP_DATA: &str = include_str!("../fixtures/group_interaction/data.csv");
const GROUP_EXPECTED: &str = include_str!("../fixtures/group_interaction/expected.json");
const NET_W: &str = include_str!("../fixtures/network_fe/weights.mtx");
const NET_PANEL: &str = include_str!("../fixtures/network_fe/panel.csv");
const NET_EXPECTED: &str = include_str!("../fixtures/network_fe/expected.json");

/// Connected `G(100, 0.04)` graph, row normalized, with one draw of
/// `y = 0.5Wy + ι + ε`.
#[derive(Debug, Clone, Deserialize)]
pub struct Figure1Expected {
    pub n: usize,
    pub p: f64,
    pub graph_seed: u64,
    pub draw_seed: u64,
    pub lambda_space: [f64; 2],
    pub adjusted_space: [f64; 2],
    pub lambda_ml: f64,
    pub lambda_aml: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct GroupExpected {
    pub groups: usize,
    pub group_size: usize,
    pub assumption1_violated_at: f64,
    pub exit_code: i32,
}

#[derive(Debug, Clone, Deserialize)]
pub struct NetworkExpected {
    pub sizes: Vec<usize>,
    pub k_tilde: usize,
    pub true_lambda: f64,
    pub lambda_aml: f64,
    pub lambda_lll: f64,
}

pub fn figure1_weights() -> Result<WeightsMatrix> {
    normalize_matrix(&read_matrix_market(FIG1_ADJ.as_bytes())?, Normalization::Row)
}

pub fn figure1() -> Result<SarData> {
    let table = read_table(FIG1_DATA.as_bytes())?;
    let ctx = SpatialContext::new(figure1_weights()?)?;
    SarData::new(ctx, table.matrix_without(&["y"]), table.column("y")?)
}

pub fn figure1_expected() -> Figure1Expected {
    serde_json::from_str(FIG1_EXPECTED).expect("bundled fixture")
}

/// Group-interaction weights with a full set of group dummies plus one regressor,
/// which violates Assumption 1.
pub fn group_interaction() -> Result<(WeightsMatrix, SarData)> {
    let table = read_table(GROUP_DATA.as_bytes())?;
    let w = WeightsMatrix::new(read_matrix_market(GROUP_W.as_bytes())?, Normalization::Row)?;
    let ctx = SpatialContext::new(w.clone())?;
    Ok((w, SarData::new(ctx, table.matrix_without(&["y"]), table.column("y")?)?))
}

pub fn group_interaction_expected() -> GroupExpected {
    serde_json::from_str(GROUP_EXPECTED).expect("bundled fixture")
}

/// Ten row-normalized Watts-Strogatz networks of 20 units with two regressors.
pub fn network_fe() -> Result<NetworkPanel> {
    let table = read_table(NET_PANEL.as_bytes())?;
    let w = read_matrix_market(NET_W.as_bytes())?;
    let sizes = network_fe_expected().sizes;
    NetworkPanel::from_long_table(&table, split_blocks(&w, &sizes, Normalization::Row)?)
}

pub fn network_fe_expected() -> NetworkExpected {
    serde_json::from_str(NET_EXPECTED).expect("bundled fixture")
}

/// Splits a block-diagonal matrix into its diagonal blocks.
pub fn split_blocks(w: &nalgebra::DMatrix<f64>, sizes: &[usize], mode: Normalization) -> Result<Vec<WeightsMatrix>> {
    let mut off = 0;
    sizes
        .iter()
        .map(|&m| {
            let b = w.view((off, off), (m, m)).into_owned();
            off += m;
            WeightsMatrix::new(b, mode)
        })
        .collect()
}
