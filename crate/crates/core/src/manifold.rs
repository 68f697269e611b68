//! Isomap onto the unit interval: k-nearest-neighbor graphs, graph geodesics
//! and one-dimensional classical scaling.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use crate::error::{Error, Result};
use crate::linalg::{top_eigenpairs, EigenSolver, Which};

/// Weight given to edges between coincident points.
pub const DUPLICATE_WEIGHT: f64 = 1e-12;

/// Symmetric k-nearest-neighbor graph with Euclidean edge weights.
#[derive(Debug, Clone)]
pub struct NeighborhoodGraph {
    pub n: usize,
    pub k_requested: usize,
    /// Neighbor count after the connectivity fallback.
    pub k_used: usize,
    /// Sorted adjacency lists `(neighbor, weight)`.
    pub adjacency: Vec<Vec<(usize, f64)>>,
    pub connected: bool,
}

/// `max(10, ceil(log2 n))`, capped at `n - 1`.
pub fn default_k(n: usize) -> usize {
    let lg = (n.max(2) as f64).log2().ceil() as usize;
    lg.max(10).min(n.saturating_sub(1)).max(1)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// The `k` nearest other points of `i`, ties broken by index.
fn nearest(points: &[Vec<f64>], i: usize, k: usize) -> Vec<(usize, f64)> {
    let mut cand: Vec<(usize, f64)> = points
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(j, p)| (j, dist(&points[i], p)))
        .collect();
    let by = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, by);
        cand.truncate(k);
    }
    cand.sort_by(by);
    cand
}

fn is_connected(adj: &[Vec<(usize, f64)>]) -> bool {
    let n = adj.len();
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &(v, _) in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == n
}

fn build(points: &[Vec<f64>], k: usize) -> Vec<Vec<(usize, f64)>> {
    let n = points.len();
    let lists: Vec<Vec<(usize, f64)>> = (0..n).into_par_iter().map(|i| nearest(points, i, k)).collect();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, list) in lists.into_iter().enumerate() {
        for (j, d) in list {
            let w = if d > 0.0 { d } else { DUPLICATE_WEIGHT };
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
    }
    for list in &mut adj {
        list.sort_by(|a, b| a.0.cmp(&b.0));
        list.dedup_by_key(|e| e.0);
    }
    adj
}

/// Union-symmetrized k-NN graph. A disconnected graph is rebuilt with `k`
/// doubled (at most `n - 1`) until it connects.
pub fn knn_graph(points: &[Vec<f64>], k: usize) -> Result<NeighborhoodGraph> {
    let n = points.len();
    if k == 0 || n <= k {
        return Err(Error::validation(format!("need 1 <= k < n, got k={k} with n={n}")));
    }
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d || p.iter().any(|v| !v.is_finite())) {
        return Err(Error::validation("points must be finite and of equal dimension"));
    }
    let mut k_used = k;
    loop {
        let adjacency = build(points, k_used);
        let connected = is_connected(&adjacency);
        if connected || k_used == n - 1 {
            return Ok(NeighborhoodGraph {
                n,
                k_requested: k,
                k_used,
                adjacency,
                connected,
            });
        }
        k_used = (2 * k_used).min(n - 1);
    }
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut d = vec![f64::INFINITY; adj.len()];
    d[source] = 0.0;
    let mut heap = BinaryHeap::from([Entry(0.0, source)]);
    while let Some(Entry(du, u)) = heap.pop() {
        if du > d[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = du + w;
            if nd < d[v] {
                d[v] = nd;
                heap.push(Entry(nd, v));
            }
        }
    }
    d
}

/// All-pairs shortest path lengths, one Dijkstra search per source.
pub fn geodesic_distances(g: &NeighborhoodGraph) -> Result<DMatrix<f64>> {
    if !g.connected {
        return Err(Error::validation("neighborhood graph is disconnected"));
    }
    let rows: Vec<Vec<f64>> = (0..g.n).into_par_iter().map(|s| dijkstra(&g.adjacency, s)).collect();
    let n = g.n;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            // both directions are path lengths; the smaller is the shortest
            m[(i, j)] = rows[i][j].min(rows[j][i]);
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    AsIs,
    Flipped,
}

/// Points mapped to `[0, 1]` by isomap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitIntervalEmbedding {
    pub values: Vec<f64>,
    /// `sqrt(sum (|z_i - z_j| - D_ij)^2 / sum D_ij^2)` over pairs.
    pub stress: f64,
    pub orientation: Orientation,
    pub k_used: usize,
    /// Always `"min-max"`: the 1-D coordinate is affinely mapped onto [0, 1].
    pub scaling: String,
}

impl UnitIntervalEmbedding {
    /// `y -> 1 - y`, toggling the orientation tag.
    pub fn flipped(&self) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = 1.0 - *v);
        out.orientation = match self.orientation {
            Orientation::AsIs => Orientation::Flipped,
            Orientation::Flipped => Orientation::AsIs,
        };
        out
    }

    /// Flip if the values correlate negatively with `covariate`. Returns the
    /// correlation before any flip; when it is (numerically) zero nothing
    /// changes.
    pub fn orient_by(&mut self, covariate: &[f64]) -> f64 {
        let r = correlation(&self.values, covariate);
        if r < -1e-12 {
            let mut flipped = self.flipped();
            flipped.orientation = self.orientation;
            *self = flipped;
        }
        r
    }
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Isomap to the unit interval.
///
/// Classical scaling of the geodesic matrix (top eigenvector of
/// `-J D.D J / 2` times the root of its eigenvalue), then min-max scaling.
/// Of the two extreme points the one with the smaller index is sent to 0.
/// `k = None` uses [`default_k`].
pub fn isomap_unit_interval(points: &[Vec<f64>], k: Option<usize>) -> Result<UnitIntervalEmbedding> {
    let n = points.len();
    if n < 2 {
        return Err(Error::validation("isomap needs at least two points"));
    }
    if points.iter().all(|p| p == &points[0]) {
        return Err(Error::numerical("all points coincide"));
    }
    let k = k.unwrap_or_else(|| default_k(n)).min(n - 1);
    let g = knn_graph(points, k)?;
    let d = geodesic_distances(&g)?;

    let d2 = d.map(|v| v * v);
    let row_means: Vec<f64> = (0..n).map(|i| d2.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (d2[(i, j)] - row_means[i] - row_means[j] + grand));
    let pair = top_eigenpairs(&b, 1, Which::LargestAlgebraic, EigenSolver::Auto)?;
    let lambda = pair.values[0];
    if !(lambda > 0.0) {
        return Err(Error::numerical("classical scaling found no positive eigenvalue"));
    }
    let z: Vec<f64> = pair.vectors.column(0).iter().map(|v| v * lambda.sqrt()).collect();

    let (mut imin, mut imax) = (0, 0);
    for i in 0..n {
        if z[i] < z[imin] {
            imin = i;
        }
        if z[i] > z[imax] {
            imax = i;
        }
    }
    let range = z[imax] - z[imin];
    if !(range > 0.0) {
        return Err(Error::numerical("all points coincide after scaling"));
    }
    let mut values: Vec<f64> = z.iter().map(|v| (v - z[imin]) / range).collect();
    if imax < imin {
        values.iter_mut().for_each(|v| *v = 1.0 - *v);
    }
    values[imin.min(imax)] = 0.0;
    values[imin.max(imax)] = 1.0;

    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            num += ((z[i] - z[j]).abs() - d[(i, j)]).powi(2);
            den += d[(i, j)].powi(2);
        }
    }
    Ok(UnitIntervalEmbedding {
        values,
        stress: if den > 0.0 { (num / den).sqrt() } else { 0.0 },
        orientation: Orientation::AsIs,
        k_used: g.k_used,
        scaling: "min-max".into(),
    })
}

/// The pair untouched and the pair with `e2` flipped.
pub fn orientation_pair(
    e1: &UnitIntervalEmbedding,
    e2: &UnitIntervalEmbedding,
) -> (
    (UnitIntervalEmbedding, UnitIntervalEmbedding),
    (UnitIntervalEmbedding, UnitIntervalEmbedding),
) {
    ((e1.clone(), e2.clone()), (e1.clone(), e2.flipped()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::hardy_weinberg_arclength;
    use crate::rng::rng_from_seed;
    use rand::Rng as _;

    #[test]
    fn collinear_path() {
        let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
        let g = knn_graph(&pts, 1).unwrap();
        assert!(g.connected);
        assert_eq!(g.k_used, 1);
        assert_eq!(g.adjacency[0], vec![(1, 1.0)]);
        assert_eq!(g.adjacency[1], vec![(0, 1.0), (2, 1.0)]);
        let d = geodesic_distances(&g).unwrap();
        assert_eq!(d[(0, 2)], 2.0);
    }

    #[test]
    fn outlier_triggers_fallback() {
        let mut pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 0.01, 0.0]).collect();
        pts.push(vec![100.0, 0.0]);
        pts.push(vec![100.5, 0.0]);
        let g = knn_graph(&pts, 1).unwrap();
        assert!(g.connected);
        assert!(g.k_used > 1);
    }

    #[test]
    fn neighbors_match_brute_force() {
        let mut rng = rng_from_seed(3);
        let pts: Vec<Vec<f64>> = (0..80).map(|_| vec![rng.random(), rng.random(), rng.random()]).collect();
        let k = 5;
        let g = knn_graph(&pts, k).unwrap();
        for i in 0..80 {
            let mut order: Vec<usize> = (0..80).filter(|&j| j != i).collect();
            order.sort_by(|&a, &b| dist(&pts[i], &pts[a]).total_cmp(&dist(&pts[i], &pts[b])));
            for &j in &order[..k] {
                assert!(g.adjacency[i].iter().any(|e| e.0 == j));
                assert!(g.adjacency[j].iter().any(|e| e.0 == i));
            }
            // union symmetrization: every listed neighbor is a k-NN in one direction
            for &(j, _) in &g.adjacency[i] {
                let mut oj: Vec<usize> = (0..80).filter(|&m| m != j).collect();
                oj.sort_by(|&a, &b| dist(&pts[j], &pts[a]).total_cmp(&dist(&pts[j], &pts[b])));
                assert!(order[..k].contains(&j) || oj[..k].contains(&i));
            }
        }
    }

    #[test]
    fn duplicates_get_tiny_weight() {
        let pts = vec![vec![0.0], vec![0.0], vec![1.0]];
        let g = knn_graph(&pts, 1).unwrap();
        assert!(g.adjacency[0].contains(&(1, DUPLICATE_WEIGHT)));
    }

    #[test]
    fn line_geodesics_are_euclidean() {
        let pts: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64 / 199.0 * 0.6, i as f64 / 199.0 * 0.8]).collect();
        let g = knn_graph(&pts, 4).unwrap();
        let d = geodesic_distances(&g).unwrap();
        for i in (0..200).step_by(17) {
            for j in (0..200).step_by(13) {
                assert!((d[(i, j)] - dist(&pts[i], &pts[j])).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn metric_axioms() {
        let mut rng = rng_from_seed(8);
        let pts: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.random(), rng.random()]).collect();
        let d = geodesic_distances(&knn_graph(&pts, 4).unwrap()).unwrap();
        for i in 0..60 {
            assert_eq!(d[(i, i)], 0.0);
            for j in 0..60 {
                assert_eq!(d[(i, j)], d[(j, i)]);
                for k in 0..60 {
                    assert!(d[(i, j)] <= d[(i, k)] + d[(k, j)] + 1e-9);
                }
            }
        }
    }

    #[test]
    fn arc_geodesic_matches_arclength() {
        let n = 2000;
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let a = std::f64::consts::PI * i as f64 / (n - 1) as f64;
                vec![a.cos(), a.sin()]
            })
            .collect();
        let d = geodesic_distances(&knn_graph(&pts, 10).unwrap()).unwrap();
        assert!((d[(0, n - 1)] - std::f64::consts::PI).abs() / std::f64::consts::PI < 0.02);
    }

    #[test]
    fn segment_equispaced() {
        let pts: Vec<Vec<f64>> = (0..50).map(|i| vec![3.0 - i as f64 * 0.1, 1.0 + i as f64 * 0.05]).collect();
        let e = isomap_unit_interval(&pts, Some(3)).unwrap();
        for (i, v) in e.values.iter().enumerate() {
            assert!((v - i as f64 / 49.0).abs() < 1e-6);
        }
        assert_eq!(e.values[0], 0.0);
        assert!(e.stress < 1e-8);
    }

    #[test]
    fn two_points() {
        let e = isomap_unit_interval(&[vec![0.3, 0.1], vec![0.9, 0.4]], None).unwrap();
        assert_eq!(e.values, vec![0.0, 1.0]);
    }

    #[test]
    fn hardy_weinberg_recovers_arclength() {
        let curve = hardy_weinberg_arclength();
        let n = 1000;
        let t: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let pts: Vec<Vec<f64>> = t.iter().map(|&s| curve.point(s).unwrap()).collect();
        let e = isomap_unit_interval(&pts, Some(10)).unwrap();
        let err = e.values.iter().zip(&t).map(|(y, s)| (y - s).abs()).fold(0.0, f64::max);
        let err_flip = e.values.iter().zip(&t).map(|(y, s)| (y - (1.0 - s)).abs()).fold(0.0, f64::max);
        assert!(err.min(err_flip) < 0.02, "{err} {err_flip}");
    }

    #[test]
    fn rigid_motion_invariance() {
        let mut rng = rng_from_seed(14);
        let curve = hardy_weinberg_arclength();
        let pts: Vec<Vec<f64>> = (0..300)
            .map(|_| curve.point(rng.random()).unwrap().iter().map(|v| v + 0.01 * (rng.random::<f64>() - 0.5)).collect())
            .collect();
        let q = DMatrix::from_fn(3, 3, |_, _| rng.random::<f64>() - 0.5).qr().q();
        let moved: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| {
                let v = &q * nalgebra::DVector::from_column_slice(p);
                vec![v[0] + 5.0, v[1] - 2.0, v[2] + 0.5]
            })
            .collect();
        let a = isomap_unit_interval(&pts, None).unwrap();
        let b = isomap_unit_interval(&moved, None).unwrap();
        let diff = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn monotone_on_curve() {
        let curve = hardy_weinberg_arclength();
        let pts: Vec<Vec<f64>> = (0..400).map(|i| curve.point(i as f64 / 399.0).unwrap()).collect();
        let e = isomap_unit_interval(&pts, None).unwrap();
        let up = e.values.windows(2).all(|w| w[1] > w[0]);
        let down = e.values.windows(2).all(|w| w[1] < w[0]);
        assert!(up || down);
    }

    #[test]
    fn orientation_pairs() {
        let pts: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let e1 = isomap_unit_interval(&pts, Some(2)).unwrap();
        let e2 = e1.flipped();
        let (as_is, flipped) = orientation_pair(&e1, &e2);
        assert_eq!(flipped.1.values.iter().map(|v| (v * 1e9).round()).collect::<Vec<_>>(),
                   e1.values.iter().map(|v| (v * 1e9).round()).collect::<Vec<_>>());
        assert_eq!(as_is.1.orientation, Orientation::Flipped);
        assert_eq!(flipped.1.orientation, Orientation::AsIs);
    }

    #[test]
    fn orient_by_covariate() {
        let pts: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let mut e = isomap_unit_interval(&pts, Some(2)).unwrap();
        let cov: Vec<f64> = (0..20).map(|i| -(i as f64)).collect();
        let r = e.orient_by(&cov);
        assert!(r < 0.0);
        assert_eq!(e.values[19], 0.0);
    }
}
