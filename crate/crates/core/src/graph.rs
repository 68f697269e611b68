//! Random dot product graphs, stochastic block models and latent structure
//! graphs: latent position and adjacency types plus the samplers.

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::curve::ArclengthCurve;
use crate::distribution::{categorical, cumulative, Underlying};
use crate::error::{Error, Result};
use crate::rng::{rng_for_stream, Rng};

/// Tolerance applied to the `[0, 1]` range check on inner products.
pub const INNER_PRODUCT_TOL: f64 = 1e-12;

const LATENT_STREAM: u64 = 0;
const EDGE_STREAM: u64 = 1;

/// `n x d` matrix whose rows are latent positions, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPositionMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl LatentPositionMatrix {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * d {
            return Err(Error::validation(format!(
                "latent matrix data has {} entries, expected {n}x{d}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "latent matrix entry ({}, {}) is not finite",
                pos / d.max(1),
                pos % d.max(1)
            )));
        }
        Ok(LatentPositionMatrix { n, d, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::validation("latent rows have differing lengths"));
        }
        Self::new(rows.len(), d, rows.concat())
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Result<Self> {
        let (n, d) = m.shape();
        let mut data = Vec::with_capacity(n * d);
        for i in 0..n {
            data.extend(m.row(i).iter());
        }
        Self::new(n, d, data)
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.d, &self.data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.d.max(1)).take(self.n)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Rows reordered so that new row `i` is old row `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let data = perm.iter().flat_map(|&p| self.row(p).iter().copied()).collect();
        LatentPositionMatrix {
            n: self.n,
            d: self.d,
            data,
        }
    }

    pub fn inner(&self, i: usize, j: usize) -> f64 {
        dot(self.row(i), self.row(j))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdjacencyKind {
    BinaryUndirected,
    WeightedDirected,
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    /// One bit per entry, `words` u64 per row.
    Bits { words: usize, bits: Vec<u64> },
    Dense(Vec<f64>),
}

/// Observed graph.
///
/// Binary undirected graphs are stored as a symmetric bit matrix (8 MB at
/// n = 8000); weighted directed graphs as a dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix {
    n: usize,
    storage: Storage,
}

impl AdjacencyMatrix {
    /// Empty binary undirected graph on `n` vertices.
    pub fn empty_binary(n: usize) -> Self {
        let words = n.div_ceil(64);
        AdjacencyMatrix {
            n,
            storage: Storage::Bits {
                words,
                bits: vec![0; words * n],
            },
        }
    }

    /// Binary undirected graph from an edge list; self loops are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut a = Self::empty_binary(n);
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::validation(format!(
                    "edge ({i}, {j}) out of range for {n} vertices"
                )));
            }
            if i == j {
                return Err(Error::validation(format!("self loop at vertex {i}")));
            }
            a.set_edge(i, j);
        }
        Ok(a)
    }

    /// Weighted directed graph from a dense row-major matrix. The diagonal
    /// must be zero and entries finite and nonnegative.
    pub fn from_weighted(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::validation(format!(
                "weighted matrix has {} entries, expected {n}x{n}",
                entries.len()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let w = entries[i * n + j];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::validation(format!(
                        "weight ({i}, {j}) = {w} must be finite and nonnegative"
                    )));
                }
                if i == j && w != 0.0 {
                    return Err(Error::validation(format!(
                        "diagonal entry ({i}, {i}) = {w}; graphs must be hollow"
                    )));
                }
            }
        }
        Ok(AdjacencyMatrix {
            n,
            storage: Storage::Dense(entries),
        })
    }

    /// Binary undirected graph from a dense 0/1 matrix, validating symmetry.
    pub fn from_binary_dense(n: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::validation("binary matrix has the wrong size"));
        }
        let mut a = Self::empty_binary(n);
        for i in 0..n {
            for j in 0..n {
                let v = entries[i * n + j];
                if v != 0.0 && v != 1.0 {
                    return Err(Error::validation(format!(
                        "entry ({i}, {j}) = {v} is not binary"
                    )));
                }
                if v != entries[j * n + i] {
                    return Err(Error::validation(format!("matrix not symmetric at ({i}, {j})")));
                }
                if i == j && v != 0.0 {
                    return Err(Error::validation(format!("self loop at vertex {i}")));
                }
                if v == 1.0 && i < j {
                    a.set_edge(i, j);
                }
            }
        }
        Ok(a)
    }

    fn set_edge(&mut self, i: usize, j: usize) {
        if let Storage::Bits { words, bits } = &mut self.storage {
            bits[i * *words + j / 64] |= 1 << (j % 64);
            bits[j * *words + i / 64] |= 1 << (i % 64);
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> AdjacencyKind {
        match self.storage {
            Storage::Bits { .. } => AdjacencyKind::BinaryUndirected,
            Storage::Dense(_) => AdjacencyKind::WeightedDirected,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Bits { words, bits } => ((bits[i * words + j / 64] >> (j % 64)) & 1) as f64,
            Storage::Dense(v) => v[i * self.n + j],
        }
    }

    /// Exact symmetry check (always true for binary storage).
    pub fn is_symmetric(&self) -> bool {
        match &self.storage {
            Storage::Bits { .. } => true,
            Storage::Dense(v) => {
                (0..self.n).all(|i| (i + 1..self.n).all(|j| v[i * self.n + j] == v[j * self.n + i]))
            }
        }
    }

    /// Number of undirected edges (binary) or nonzero entries (weighted).
    pub fn edge_count(&self) -> usize {
        match &self.storage {
            Storage::Bits { bits, .. } => {
                bits.iter().map(|w| w.count_ones() as usize).sum::<usize>() / 2
            }
            Storage::Dense(v) => v.iter().filter(|w| **w != 0.0).count(),
        }
    }

    /// Row sums.
    pub fn degrees(&self) -> Vec<f64> {
        match &self.storage {
            Storage::Bits { words, bits } => bits
                .chunks(*words.max(&1))
                .take(self.n)
                .map(|row| row.iter().map(|w| w.count_ones() as f64).sum())
                .collect(),
            Storage::Dense(v) => v.chunks(self.n.max(1)).take(self.n).map(|r| r.iter().sum()).collect(),
        }
    }

    /// Neighbors of `i` in a binary graph, ascending.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| self.get(i, j) != 0.0).collect()
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        match &self.storage {
            Storage::Bits { words, bits } => {
                for (i, yi) in y.iter_mut().enumerate() {
                    let row = &bits[i * words..(i + 1) * words];
                    let mut acc = 0.0;
                    for (w, &word) in row.iter().enumerate() {
                        let mut word = word;
                        while word != 0 {
                            let b = word.trailing_zeros() as usize;
                            acc += x[w * 64 + b];
                            word &= word - 1;
                        }
                    }
                    *yi = acc;
                }
            }
            Storage::Dense(v) => {
                for (i, yi) in y.iter_mut().enumerate() {
                    *yi = dot(&v[i * self.n..(i + 1) * self.n], x);
                }
            }
        }
    }

    /// `y = A^T x`.
    pub fn matvec_transpose(&self, x: &[f64], y: &mut [f64]) {
        match &self.storage {
            Storage::Bits { .. } => self.matvec(x, y),
            Storage::Dense(v) => {
                y.iter_mut().for_each(|e| *e = 0.0);
                for (i, &xi) in x.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    for (yj, a) in y.iter_mut().zip(&v[i * self.n..(i + 1) * self.n]) {
                        *yj += a * xi;
                    }
                }
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Edge list `(i, j, w)`; binary graphs list each edge once with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        match self.kind() {
            AdjacencyKind::BinaryUndirected => {
                for i in 0..self.n {
                    for j in i + 1..self.n {
                        if self.get(i, j) != 0.0 {
                            out.push((i, j, 1.0));
                        }
                    }
                }
            }
            AdjacencyKind::WeightedDirected => {
                for i in 0..self.n {
                    for j in 0..self.n {
                        let w = self.get(i, j);
                        if w != 0.0 {
                            out.push((i, j, w));
                        }
                    }
                }
            }
        }
        out
    }

    /// Relabels vertices so that new vertex `i` is old vertex `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::validation("permutation length differs from vertex count"));
        }
        match &self.storage {
            Storage::Bits { .. } => {
                let mut out = Self::empty_binary(self.n);
                for i in 0..self.n {
                    for j in i + 1..self.n {
                        if self.get(perm[i], perm[j]) != 0.0 {
                            out.set_edge(i, j);
                        }
                    }
                }
                Ok(out)
            }
            Storage::Dense(_) => {
                let n = self.n;
                let entries = (0..n * n).map(|k| self.get(perm[k / n], perm[k % n])).collect();
                Self::from_weighted(n, entries)
            }
        }
    }
}

/// Block model parameters: block positions, mixing weights and an optional
/// fixed assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmSpec {
    pub block_points: Vec<Vec<f64>>,
    pub mixing: Vec<f64>,
    #[serde(default)]
    pub assignment: BlockAssignment,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BlockAssignment {
    /// i.i.d. categorical draws from the mixing weights.
    #[default]
    Random,
    /// Caller-supplied memberships, one per vertex.
    Fixed { tau: Vec<usize> },
    /// Deterministic assignment covering every block, with block sizes
    /// proportional to the mixing weights (largest remainder rounding).
    Covering,
}

impl SbmSpec {
    /// Block points from the Cholesky factor of a positive definite block
    /// probability matrix `b`, so that `nu_k . nu_l = b[k][l]`.
    pub fn from_block_matrix(b: &[Vec<f64>], mixing: Vec<f64>) -> Result<Self> {
        let k = b.len();
        let m = DMatrix::from_fn(k, k, |i, j| b[i][j]);
        let chol = nalgebra::Cholesky::new(m)
            .ok_or_else(|| Error::validation("block matrix is not positive definite"))?;
        let l = chol.l();
        let block_points = (0..k).map(|i| l.row(i).iter().copied().collect()).collect();
        let spec = SbmSpec {
            block_points,
            mixing,
            assignment: BlockAssignment::Random,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn k(&self) -> usize {
        self.block_points.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 || self.mixing.len() != k {
            return Err(Error::validation("sbm needs K >= 1 block points and K mixing weights"));
        }
        let d = self.block_points[0].len();
        if self.block_points.iter().any(|p| p.len() != d) {
            return Err(Error::validation("block points have differing dimensions"));
        }
        if self.mixing.iter().any(|&w| !(0.0..=1.0).contains(&w)) {
            return Err(Error::validation("mixing weights must lie in [0, 1]"));
        }
        let total: f64 = self.mixing.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!("mixing weights sum to {total}, expected 1")));
        }
        for a in 0..k {
            for b in a..k {
                let v = dot(&self.block_points[a], &self.block_points[b]);
                if !(-INNER_PRODUCT_TOL..=1.0 + INNER_PRODUCT_TOL).contains(&v) {
                    return Err(Error::validation(format!(
                        "block inner product nu_{a}.nu_{b} = {v} outside [0, 1]"
                    )));
                }
                if a != b && self.block_points[a] == self.block_points[b] {
                    return Err(Error::validation(format!("block points {a} and {b} coincide")));
                }
            }
        }
        Ok(())
    }
}

/// Latent structure model: latent positions are `p(t)` for `t ~ G`.
#[derive(Debug, Clone)]
pub struct LsmSpec {
    pub curve: Arc<ArclengthCurve>,
    pub underlying: Underlying,
    pub n: usize,
    pub sparsity: f64,
}

impl LsmSpec {
    pub fn validate(&self) -> Result<()> {
        self.underlying.validate()?;
        validate_sparsity(self.sparsity)?;
        let report = self.curve.inner_product_check(256);
        if !report.ok {
            return Err(Error::validation(format!(
                "support curve is not an inner-product curve (worst value {:?})",
                report.worst_value
            )));
        }
        Ok(())
    }
}

fn validate_sparsity(sparsity: f64) -> Result<()> {
    if !(sparsity > 0.0 && sparsity <= 1.0) {
        return Err(Error::validation(format!("sparsity {sparsity} outside (0, 1]")));
    }
    Ok(())
}

/// Outcome of the pairwise inner-product scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerProductReport {
    pub ok: bool,
    /// Pair with the largest violation of `[0, 1]`, if any.
    pub worst_pair: Option<(usize, usize)>,
    pub worst_value: Option<f64>,
}

/// Checks `0 <= X_i . X_j <= 1` for all pairs including `i = j`.
pub fn validate_inner_product(x: &LatentPositionMatrix) -> InnerProductReport {
    let mut worst: Option<(usize, usize, f64, f64)> = None;
    for i in 0..x.n() {
        for j in i..x.n() {
            let v = x.inner(i, j);
            let violation = (-v).max(v - 1.0);
            if violation > INNER_PRODUCT_TOL && worst.is_none_or(|w| violation > w.3) {
                worst = Some((i, j, v, violation));
            }
        }
    }
    InnerProductReport {
        ok: worst.is_none(),
        worst_pair: worst.map(|w| (w.0, w.1)),
        worst_value: worst.map(|w| w.2),
    }
}

fn checked_probability(x: &LatentPositionMatrix, i: usize, j: usize, sparsity: f64) -> Result<f64> {
    let p = sparsity * x.inner(i, j);
    if !(-INNER_PRODUCT_TOL..=1.0 + INNER_PRODUCT_TOL).contains(&p) {
        return Err(Error::validation(format!(
            "edge probability P[{i}][{j}] = {p} outside [0, 1]"
        )));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// `P = sparsity * X X^T`, diagonal included.
pub fn probability_matrix(x: &LatentPositionMatrix, sparsity: f64) -> Result<DMatrix<f64>> {
    validate_sparsity(sparsity)?;
    let n = x.n();
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = checked_probability(x, i, j, sparsity)?;
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
    }
    Ok(p)
}

/// Samples a hollow symmetric binary graph with independent
/// `Bernoulli(P_ij)` edges above the diagonal, visited in row-major order.
pub fn sample_rdpg(x: &LatentPositionMatrix, sparsity: f64, seed: u64) -> Result<AdjacencyMatrix> {
    validate_sparsity(sparsity)?;
    let mut rng = rng_for_stream(seed, EDGE_STREAM);
    sample_rdpg_with(x, sparsity, &mut rng)
}

fn sample_rdpg_with(x: &LatentPositionMatrix, sparsity: f64, rng: &mut Rng) -> Result<AdjacencyMatrix> {
    let n = x.n();
    let mut a = AdjacencyMatrix::empty_binary(n);
    for i in 0..n {
        for j in i + 1..n {
            let p = checked_probability(x, i, j, sparsity)?;
            if rng.random::<f64>() < p {
                a.set_edge(i, j);
            }
        }
    }
    Ok(a)
}

#[derive(Debug, Clone)]
pub struct SbmSample {
    pub adjacency: AdjacencyMatrix,
    pub assignment: Vec<usize>,
    pub latent: LatentPositionMatrix,
}

pub fn sample_sbm(spec: &SbmSpec, n: usize, seed: u64) -> Result<SbmSample> {
    spec.validate()?;
    let k = spec.k();
    let assignment = match &spec.assignment {
        BlockAssignment::Random => {
            let mut rng = rng_for_stream(seed, LATENT_STREAM);
            let cum = cumulative(&spec.mixing);
            (0..n).map(|_| categorical(&cum, rng.random::<f64>())).collect()
        }
        BlockAssignment::Fixed { tau } => {
            if tau.len() != n {
                return Err(Error::validation(format!(
                    "fixed assignment has {} entries for {n} vertices",
                    tau.len()
                )));
            }
            if let Some(bad) = tau.iter().find(|&&b| b >= k) {
                return Err(Error::validation(format!("assignment refers to block {bad} >= K={k}")));
            }
            tau.clone()
        }
        BlockAssignment::Covering => covering_assignment(&spec.mixing, n)?,
    };
    let d = spec.block_points[0].len();
    let data = assignment
        .iter()
        .flat_map(|&b| spec.block_points[b].iter().copied())
        .collect();
    let latent = LatentPositionMatrix::new(n, d, data)?;
    let adjacency = sample_rdpg(&latent, 1.0, seed)?;
    Ok(SbmSample {
        adjacency,
        assignment,
        latent,
    })
}

fn covering_assignment(mixing: &[f64], n: usize) -> Result<Vec<usize>> {
    let k = mixing.len();
    if n < k {
        return Err(Error::validation(format!(
            "covering assignment needs n >= K, got n={n}, K={k}"
        )));
    }
    // one vertex per block, the rest by largest remainder
    let rest = (n - k) as f64;
    let mut sizes: Vec<usize> = mixing.iter().map(|w| 1 + (w * rest).floor() as usize).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        let ra = mixing[a] * rest - (mixing[a] * rest).floor();
        let rb = mixing[b] * rest - (mixing[b] * rest).floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut missing = n - sizes.iter().sum::<usize>();
    for &b in order.iter().cycle() {
        if missing == 0 {
            break;
        }
        sizes[b] += 1;
        missing -= 1;
    }
    Ok(sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect())
}

#[derive(Debug, Clone)]
pub struct LsmSample {
    pub adjacency: AdjacencyMatrix,
    pub latent: LatentPositionMatrix,
    /// Arclength parameters `t_i` of the latent positions.
    pub t: Vec<f64>,
}

/// Draws `t_i ~ G`, places `X_i = p(t_i)` and samples the graph.
pub fn sample_lsm(spec: &LsmSpec, seed: u64) -> Result<LsmSample> {
    spec.validate()?;
    let mut rng = rng_for_stream(seed, LATENT_STREAM);
    let t = spec.underlying.sample(spec.n, &mut rng)?;
    let latent = lsm_latent_positions(&spec.curve, &t)?;
    let adjacency = sample_rdpg(&latent, spec.sparsity, seed)?;
    Ok(LsmSample { adjacency, latent, t })
}

/// Latent positions `p(t_i)` without sampling a graph.
pub fn lsm_latent_positions(curve: &ArclengthCurve, t: &[f64]) -> Result<LatentPositionMatrix> {
    let d = curve.ambient_dim();
    let mut data = Vec::with_capacity(t.len() * d);
    for &ti in t {
        data.extend(curve.point(ti)?);
    }
    LatentPositionMatrix::new(t.len(), d, data)
}
