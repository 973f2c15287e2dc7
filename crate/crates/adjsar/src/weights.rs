//! Adjacency matrices, random graph generators, and weights-matrix normalization.

use crate::error::{Error, Result};
use crate::linalg;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Binary adjacency matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix {
    entries: DMatrix<f64>,
}

impl AdjacencyMatrix {
    /// Wraps a matrix after checking it is square, binary and has zero diagonal.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::Dimension("adjacency matrix must be square".into()));
        }
        for i in 0..entries.nrows() {
            if entries[(i, i)] != 0.0 {
                return Err(Error::InvalidArgument(format!("nonzero diagonal at {i}")));
            }
        }
        if entries.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidArgument("adjacency entries must be 0 or 1".into()));
        }
        Ok(Self { entries })
    }

    fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut entries = DMatrix::zeros(n, n);
        for (i, j) in edges {
            entries[(i, j)] = 1.0;
            entries[(j, i)] = 1.0;
        }
        Self { entries }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    /// Number of undirected edges (half the number of ones).
    pub fn edge_count(&self) -> usize {
        let ones = self.entries.iter().filter(|&&v| v != 0.0).count();
        ones / 2
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.entries
            .row_iter()
            .map(|r| r.iter().filter(|&&v| v != 0.0).count())
            .collect()
    }
}

/// Normalization applied to an adjacency matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    Row,
    Spectral,
    None,
}

impl std::str::FromStr for Normalization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "row" => Ok(Self::Row),
            "spectral" => Ok(Self::Spectral),
            "none" => Ok(Self::None),
            other => Err(Error::Unknown { kind: "normalization", name: other.into() }),
        }
    }
}

/// Spatial weights matrix `W`.
#[derive(Debug, Clone)]
pub struct WeightsMatrix {
    entries: DMatrix<f64>,
    normalization: Normalization,
    block_sizes: Option<Vec<usize>>,
    /// Positive `d` with `diag(d)·W` symmetric, when known.
    symmetrizer: Option<DVector<f64>>,
}

impl WeightsMatrix {
    /// Wraps a square matrix with zero diagonal.
    pub fn new(entries: DMatrix<f64>, normalization: Normalization) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::Dimension("weights matrix must be square".into()));
        }
        for i in 0..entries.nrows() {
            if entries[(i, i)] != 0.0 {
                return Err(Error::InvalidArgument(format!("nonzero diagonal at {i}")));
            }
        }
        Ok(Self::general(entries, normalization))
    }

    /// Wraps any square matrix (diagonal unchecked), e.g. a transformed `F'WF`.
    pub fn general(entries: DMatrix<f64>, normalization: Normalization) -> Self {
        let symmetrizer = if linalg::is_symmetric(&entries, 0.0) {
            Some(DVector::from_element(entries.nrows(), 1.0))
        } else {
            None
        };
        Self { entries, normalization, block_sizes: None, symmetrizer }
    }

    /// Records a positive `d` such that `diag(d)·W` is symmetric; ignored if the check fails.
    pub fn with_symmetrizer(mut self, d: DVector<f64>) -> Self {
        if d.len() == self.n() && d.iter().all(|&v| v > 0.0) {
            let n = self.n();
            let scale = self.entries.amax().max(f64::MIN_POSITIVE) * d.amax();
            let ok = (0..n).all(|i| {
                (i + 1..n).all(|j| {
                    (d[i] * self.entries[(i, j)] - d[j] * self.entries[(j, i)]).abs() <= 1e-13 * scale
                })
            });
            if ok {
                self.symmetrizer = Some(d);
            }
        }
        self
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn block_sizes(&self) -> Option<&[usize]> {
        self.block_sizes.as_deref()
    }

    pub fn symmetrizer(&self) -> Option<&DVector<f64>> {
        self.symmetrizer.as_ref()
    }

    pub fn is_symmetric(&self) -> bool {
        linalg::is_symmetric(&self.entries, 0.0)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.entries.row_iter().map(|r| r.sum()).collect()
    }

    /// `W v`.
    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.entries * v
    }
}

/// Ring lattice in which each vertex is linked to the `h` vertices ahead and `h` behind.
pub fn circulant_ahead_behind(n: usize, h: usize) -> Result<AdjacencyMatrix> {
    if h == 0 || n < 2 * h + 1 {
        return Err(Error::InvalidArgument(format!(
            "circulant graph needs h >= 1 and n >= 2h + 1 (n = {n}, h = {h})"
        )));
    }
    let edges = (0..n).flat_map(move |i| (1..=h).map(move |j| (i, (i + j) % n)));
    Ok(AdjacencyMatrix::from_edges(n, edges))
}

fn check_prob(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("probability must lie in [0, 1], got {p}")));
    }
    Ok(())
}

/// Order in which the circulant edges are rewired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rewiring {
    /// Vertex by vertex, the clockwise edges of a vertex jointly: the switched
    /// edges get distinct targets drawn uniformly from the vertices that are
    /// neither the source, nor linked to it by an incoming edge, nor a kept target.
    #[default]
    PerVertex,
    /// Lattice distance `j = 1..=h` outer, vertex inner; each target is drawn
    /// uniformly from the vertices not currently adjacent to the source.
    Sequential,
}

/// Watts–Strogatz small-world graph with [`Rewiring::PerVertex`].
///
/// Every undirected edge `(i, i+j)` of the circulant base graph is switched with
/// probability `p`; the source `i` is kept and the target is redrawn. The edge
/// count is preserved.
pub fn watts_strogatz(n: usize, h: usize, p: f64, seed: u64) -> Result<AdjacencyMatrix> {
    watts_strogatz_with(n, h, p, seed, Rewiring::PerVertex)
}

pub fn watts_strogatz_with(n: usize, h: usize, p: f64, seed: u64, order: Rewiring) -> Result<AdjacencyMatrix> {
    check_prob(p)?;
    let a = circulant_ahead_behind(n, h)?;
    if p == 0.0 {
        return Ok(a);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match order {
        Rewiring::PerVertex => Ok(rewire_per_vertex(n, h, p, &mut rng)),
        Rewiring::Sequential => Ok(rewire_sequential(a, p, &mut rng)),
    }
}

fn rewire_per_vertex(n: usize, h: usize, p: f64, rng: &mut ChaCha8Rng) -> AdjacencyMatrix {
    let mut targets: Vec<Vec<usize>> = (0..n).map(|i| (1..=h).map(|j| (i + j) % n).collect()).collect();
    for src in 0..n {
        let switch: Vec<bool> = (0..h).map(|_| rng.random::<f64>() < p).collect();
        if !switch.contains(&true) {
            continue;
        }
        let mut excluded = vec![false; n];
        excluded[src] = true;
        for (v, t) in targets.iter().enumerate() {
            if t.contains(&src) {
                excluded[v] = true;
            }
        }
        for (j, &s) in switch.iter().enumerate() {
            if !s {
                excluded[targets[src][j]] = true;
            }
        }
        let candidates: Vec<usize> = (0..n).filter(|&v| !excluded[v]).collect();
        let slots: Vec<usize> = (0..h).filter(|&j| switch[j]).take(candidates.len()).collect();
        let picks = rand::seq::index::sample(rng, candidates.len(), slots.len());
        for (j, c) in slots.into_iter().zip(picks.iter()) {
            targets[src][j] = candidates[c];
        }
    }
    let edges = targets.into_iter().enumerate().flat_map(|(i, t)| t.into_iter().map(move |k| (i, k)));
    AdjacencyMatrix::from_edges(n, edges)
}

fn rewire_sequential(mut a: AdjacencyMatrix, p: f64, rng: &mut ChaCha8Rng) -> AdjacencyMatrix {
    let n = a.n();
    let h = a.degrees()[0] / 2;
    let m = &mut a.entries;
    for j in 1..=h {
        for i in 0..n {
            let t = (i + j) % n;
            if rng.random::<f64>() >= p {
                continue;
            }
            if m[(i, t)] == 0.0 {
                continue;
            }
            let degree = m.row(i).iter().filter(|&&v| v != 0.0).count();
            if degree >= n - 1 {
                continue;
            }
            let k = loop {
                let k = rng.random_range(0..n);
                if k != i && m[(i, k)] == 0.0 {
                    break k;
                }
            };
            m[(i, t)] = 0.0;
            m[(t, i)] = 0.0;
            m[(i, k)] = 1.0;
            m[(k, i)] = 1.0;
        }
    }
    a
}

/// Erdős–Rényi graph `G(n, p)`.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<AdjacencyMatrix> {
    check_prob(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Ok(AdjacencyMatrix::from_edges(n, edges))
}

/// Draws `G(n, p)` graphs with derived seeds until one is connected.
///
/// Returns the graph and the number of draws that were rejected.
pub fn erdos_renyi_connected(n: usize, p: f64, seed: u64, max_tries: usize) -> Result<(AdjacencyMatrix, usize)> {
    for t in 0..max_tries {
        let g = erdos_renyi(n, p, crate::rng::derive_seed(seed, t as u64))?;
        if is_irreducible(g.entries()) {
            return Ok((g, t));
        }
    }
    Err(Error::InvalidArgument(format!("no connected G({n}, {p}) draw in {max_tries} tries")))
}

/// Group-interaction weights `I_R ⊗ (ιι' − I)/(m − 1)`.
pub fn group_interaction(r: usize, m: usize) -> Result<WeightsMatrix> {
    if r == 0 {
        return Err(Error::InvalidArgument("need at least one group".into()));
    }
    group_interaction_sizes(&vec![m; r])
}

/// Group-interaction weights with possibly unequal group sizes.
pub fn group_interaction_sizes(sizes: &[usize]) -> Result<WeightsMatrix> {
    if sizes.is_empty() {
        return Err(Error::InvalidArgument("need at least one group".into()));
    }
    let blocks = sizes
        .iter()
        .map(|&m| {
            if m <= 1 {
                return Err(Error::InvalidArgument(format!("group size must exceed 1, got {m}")));
            }
            let v = 1.0 / (m as f64 - 1.0);
            let b = DMatrix::from_fn(m, m, |i, j| if i == j { 0.0 } else { v });
            WeightsMatrix::new(b, Normalization::Row)
        })
        .collect::<Result<Vec<_>>>()?;
    block_diag(&blocks)
}

/// Direct sum of square blocks.
pub fn block_diag(blocks: &[WeightsMatrix]) -> Result<WeightsMatrix> {
    if blocks.is_empty() {
        return Err(Error::InvalidArgument("block_diag needs at least one block".into()));
    }
    let n: usize = blocks.iter().map(|b| b.n()).sum();
    let mut entries = DMatrix::zeros(n, n);
    let mut off = 0;
    let mut sizes = Vec::with_capacity(blocks.len());
    for b in blocks {
        let m = b.n();
        entries.view_mut((off, off), (m, m)).copy_from(b.entries());
        sizes.push(m);
        off += m;
    }
    let normalization = if blocks.iter().all(|b| b.normalization == blocks[0].normalization) {
        blocks[0].normalization
    } else {
        Normalization::None
    };
    let sym = if blocks.iter().all(|b| b.symmetrizer.is_some()) {
        let mut d = DVector::zeros(n);
        let mut off = 0;
        for b in blocks {
            let s = b.symmetrizer.as_ref().expect("checked");
            d.rows_mut(off, b.n()).copy_from(s);
            off += b.n();
        }
        Some(d)
    } else {
        None
    };
    Ok(WeightsMatrix { entries, normalization, block_sizes: Some(sizes), symmetrizer: sym })
}

fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    if linalg::is_symmetric(a, 0.0) {
        let v = linalg::sym_eigenvalues(a)?;
        Ok(v.iter().fold(0.0f64, |m, x| m.max(x.abs())))
    } else {
        let v = linalg::general_eigenvalues(a)?;
        Ok(v.iter().fold(0.0f64, |m, x| m.max(x.norm())))
    }
}

/// Normalizes an adjacency matrix by rows or by its spectral radius.
pub fn normalize(a: &AdjacencyMatrix, mode: Normalization) -> Result<WeightsMatrix> {
    normalize_matrix(a.entries(), mode)
}

/// Normalizes a nonnegative zero-diagonal matrix.
pub fn normalize_matrix(a: &DMatrix<f64>, mode: Normalization) -> Result<WeightsMatrix> {
    let symmetric = linalg::is_symmetric(a, 0.0);
    match mode {
        Normalization::Row => {
            let sums: Vec<f64> = a.row_iter().map(|r| r.sum()).collect();
            if let Some(row) = sums.iter().position(|&s| s == 0.0) {
                return Err(Error::ZeroRow { row });
            }
            let mut w = a.clone();
            for (i, s) in sums.iter().enumerate() {
                w.row_mut(i).scale_mut(1.0 / s);
            }
            let out = WeightsMatrix::new(w, Normalization::Row)?;
            Ok(if symmetric { out.with_symmetrizer(DVector::from_vec(sums)) } else { out })
        }
        Normalization::Spectral => {
            let rho = spectral_radius(a)?;
            if !(rho > 0.0) {
                return Err(Error::ZeroSpectralRadius);
            }
            WeightsMatrix::new(a / rho, Normalization::Spectral)
        }
        Normalization::None => WeightsMatrix::new(a.clone(), Normalization::None),
    }
}

fn reaches_all(a: &DMatrix<f64>, transpose: bool) -> bool {
    let n = a.nrows();
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            let e = if transpose { a[(j, i)] } else { a[(i, j)] };
            if e != 0.0 && !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// True iff the directed graph of the nonzero pattern is strongly connected.
pub fn is_irreducible(a: &DMatrix<f64>) -> bool {
    a.nrows() == a.ncols() && reaches_all(a, false) && reaches_all(a, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn union_find_connected(a: &AdjacencyMatrix) -> bool {
        let n = a.n();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut Vec<usize>, x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut c = x;
            while p[c] != r {
                let nx = p[c];
                p[c] = r;
                c = nx;
            }
            r
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if a.entries()[(i, j)] != 0.0 {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    parent[ri] = rj;
                }
            }
        }
        let r0 = find(&mut parent, 0);
        (0..n).all(|i| find(&mut parent, i) == r0)
    }

    #[test]
    fn circulant_small() {
        let a = circulant_ahead_behind(6, 1).unwrap();
        assert!(a.degrees().iter().all(|&d| d == 2));
        assert_eq!(a.entries()[(0, 5)], 1.0);
        assert_eq!(a.entries()[(0, 1)], 1.0);
        assert_eq!(a.entries()[(0, 2)], 0.0);
    }

    #[test]
    fn circulant_200_5() {
        let a = circulant_ahead_behind(200, 5).unwrap();
        assert!(a.degrees().iter().all(|&d| d == 10));
        assert_eq!(a.entries(), &a.entries().transpose());
    }

    #[test]
    fn circulant_saturated_is_complete() {
        let a = circulant_ahead_behind(5, 2).unwrap();
        let complete = DMatrix::from_fn(5, 5, |i, j| if i == j { 0.0 } else { 1.0 });
        assert_eq!(a.entries(), &complete);
        assert!(circulant_ahead_behind(4, 2).is_err());
    }

    #[test]
    fn ws_p0_is_circulant() {
        assert_eq!(watts_strogatz(50, 3, 0.0, 9).unwrap(), circulant_ahead_behind(50, 3).unwrap());
        let seq = watts_strogatz_with(50, 3, 0.0, 9, Rewiring::Sequential).unwrap();
        assert_eq!(seq, circulant_ahead_behind(50, 3).unwrap());
    }

    #[test]
    fn ws_dense_full_rewiring_keeps_simple_graph() {
        let a = watts_strogatz(40, 15, 1.0, 3).unwrap();
        assert_eq!(a.edge_count(), 600);
        assert!((0..40).all(|i| a.entries()[(i, i)] == 0.0));
    }

    #[test]
    fn ws_deterministic_given_seed() {
        assert_eq!(watts_strogatz(60, 2, 1.0, 5).unwrap(), watts_strogatz(60, 2, 1.0, 5).unwrap());
        assert_ne!(watts_strogatz(60, 2, 1.0, 5).unwrap(), watts_strogatz(60, 2, 1.0, 6).unwrap());
        assert!(watts_strogatz(10, 1, 1.5, 0).is_err());
    }

    #[test]
    fn ws_preserves_edge_count() {
        for seed in 0..200 {
            let order = if seed % 2 == 0 { Rewiring::PerVertex } else { Rewiring::Sequential };
            let a = watts_strogatz_with(100, 2, 0.5, seed, order).unwrap();
            let mut count = 0;
            for i in 0..100 {
                for j in (i + 1)..100 {
                    if a.entries()[(i, j)] != 0.0 {
                        count += 1;
                    }
                }
            }
            assert_eq!(count, 200);
            assert_eq!(a.entries(), &a.entries().transpose());
        }
    }

    #[test]
    fn er_extremes() {
        assert_eq!(erdos_renyi(10, 0.0, 1).unwrap().edge_count(), 0);
        assert_eq!(erdos_renyi(10, 1.0, 1).unwrap().edge_count(), 45);
    }

    #[test]
    fn er_mean_edge_count() {
        let reps = 200;
        let mean = (0..reps).map(|s| erdos_renyi(100, 0.05, s).unwrap().edge_count() as f64).sum::<f64>()
            / reps as f64;
        let var = 4950.0 * 0.05 * 0.95;
        let se = (var / reps as f64).sqrt();
        assert!((mean - 247.5).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn group_interaction_r1_m2() {
        let w = group_interaction(1, 2).unwrap();
        assert_eq!(w.entries(), &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert!(group_interaction(2, 1).is_err());
    }

    #[test]
    fn group_interaction_spectrum() {
        let w = group_interaction(2, 3).unwrap();
        let mut v = linalg::sym_eigenvalues(w.entries()).unwrap();
        v.sort_by(f64::total_cmp);
        let expect = [-0.5, -0.5, -0.5, -0.5, 1.0, 1.0];
        for (a, b) in v.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(w.block_sizes(), Some(&[3usize, 3][..]));
    }

    #[test]
    fn block_diag_structure() {
        let b = group_interaction(1, 2).unwrap();
        let one = block_diag(std::slice::from_ref(&b)).unwrap();
        assert_eq!(one.entries(), b.entries());
        let two = block_diag(&[b.clone(), b]).unwrap();
        assert_eq!(two.n(), 4);
        assert_eq!(two.entries()[(0, 2)], 0.0);
        assert_eq!(two.entries()[(2, 3)], 1.0);
        assert!(block_diag(&[]).is_err());
    }

    #[test]
    fn block_diag_of_row_stochastic_is_row_stochastic() {
        let blocks: Vec<_> = (0..4)
            .map(|s| normalize(&watts_strogatz(12, 2, 0.3, s).unwrap(), Normalization::Row).unwrap())
            .collect();
        let w = block_diag(&blocks).unwrap();
        assert!(w.row_sums().iter().all(|s| (s - 1.0).abs() < 1e-12));
    }

    #[test]
    fn row_and_spectral_coincide_on_regular_graph() {
        let a = circulant_ahead_behind(30, 3).unwrap();
        let r = normalize(&a, Normalization::Row).unwrap();
        let s = normalize(&a, Normalization::Spectral).unwrap();
        assert!((r.entries() - s.entries()).amax() < 1e-12);
    }

    #[test]
    fn spectral_normalization_radius_one() {
        let (g, _) = erdos_renyi_connected(100, 0.05, 3, 100).unwrap();
        let w = normalize(&g, Normalization::Spectral).unwrap();
        let mut v = DVector::from_element(100, 1.0);
        let mut rho = 0.0;
        for _ in 0..2000 {
            let nv = w.entries() * &v;
            rho = nv.norm() / v.norm();
            v = nv.normalize();
        }
        assert!((rho - 1.0).abs() < 1e-10, "rho {rho}");
    }

    #[test]
    fn row_normalization_errors_on_isolated_vertex() {
        let a = AdjacencyMatrix::new(DMatrix::from_row_slice(3, 3, &[0., 1., 0., 1., 0., 0., 0., 0., 0.])).unwrap();
        assert!(matches!(normalize(&a, Normalization::Row), Err(Error::ZeroRow { row: 2 })));
        let z = AdjacencyMatrix::new(DMatrix::zeros(3, 3)).unwrap();
        assert!(matches!(normalize(&z, Normalization::Spectral), Err(Error::ZeroSpectralRadius)));
    }

    #[test]
    fn irreducibility() {
        assert!(is_irreducible(circulant_ahead_behind(10, 1).unwrap().entries()));
        let b = group_interaction(2, 3).unwrap();
        assert!(!is_irreducible(b.entries()));
        for seed in 0..30 {
            let g = erdos_renyi(40, 0.06, seed).unwrap();
            assert_eq!(is_irreducible(g.entries()), union_find_connected(&g));
        }
    }

    #[test]
    fn symmetrizer_recorded_for_row_normalized_symmetric_graph() {
        let g = watts_strogatz(30, 2, 0.4, 1).unwrap();
        let w = normalize(&g, Normalization::Row).unwrap();
        assert!(w.symmetrizer().is_some());
    }
}
