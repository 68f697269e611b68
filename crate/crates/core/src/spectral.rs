//! Adjacency spectral embedding, dimension selection, Procrustes alignment
//! and the limiting covariance of embedded rows.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AdjacencyMatrix, LatentPositionMatrix};
use crate::linalg::{
    dense_top_eigenpairs, top_eigenpairs_partial, EigenSolver, GramOperator, SymmetricOperator, Which,
    DENSE_LIMIT,
};

/// Magnitude gap below which the selected subspace is reported as ill-defined.
pub const TIE_TOL: f64 = 1e-8;
/// Number of eigenvalues past `d` kept for diagnostics.
pub const TAIL_LEN: usize = 3;
/// Largest accepted condition number of the second moment matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// Result of an adjacency spectral embedding.
#[derive(Debug, Clone)]
pub struct EmbeddingResult {
    pub xhat: LatentPositionMatrix,
    /// Top-`d` magnitudes, descending.
    pub eigenvalues: Vec<f64>,
    /// The same eigenvalues with their signs.
    pub signed_eigenvalues: Vec<f64>,
    pub d_used: usize,
    /// Signed eigenvalues following the selected ones.
    pub spectrum_tail: Vec<f64>,
    pub warnings: Vec<String>,
}

/// JSON sidecar written next to an embedding CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingSidecar {
    pub eigenvalues: Vec<f64>,
    pub signed_eigenvalues: Vec<f64>,
    pub d_used: usize,
    pub spectrum_tail: Vec<f64>,
    pub warnings: Vec<String>,
}

impl EmbeddingResult {
    pub fn sidecar(&self) -> EmbeddingSidecar {
        EmbeddingSidecar {
            eigenvalues: self.eigenvalues.clone(),
            signed_eigenvalues: self.signed_eigenvalues.clone(),
            d_used: self.d_used,
            spectrum_tail: self.spectrum_tail.clone(),
            warnings: self.warnings.clone(),
        }
    }
}

/// Flip each column so that its largest-magnitude entry is positive.
/// Ties go to the smallest row index. Returns the applied signs.
fn fix_signs(u: &mut DMatrix<f64>) -> Vec<f64> {
    let mut signs = Vec::with_capacity(u.ncols());
    for mut col in u.column_iter_mut() {
        let mut best = 0.0f64;
        for &v in col.iter() {
            if v.abs() > best.abs() {
                best = v;
            }
        }
        let s = if best < 0.0 { -1.0 } else { 1.0 };
        if s < 0.0 {
            col.neg_mut();
        }
        signs.push(s);
    }
    signs
}

fn scaled_rows(u: &DMatrix<f64>, magnitudes: &[f64]) -> Result<LatentPositionMatrix> {
    let (n, d) = u.shape();
    let roots: Vec<f64> = magnitudes.iter().map(|m| m.sqrt()).collect();
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n {
        for j in 0..d {
            data.push(u[(i, j)] * roots[j]);
        }
    }
    LatentPositionMatrix::new(n, d, data)
}

/// Adjacency spectral embedding of a symmetric adjacency matrix.
pub fn ase(a: &AdjacencyMatrix, d: usize) -> Result<EmbeddingResult> {
    ase_with(a, d, EigenSolver::Auto)
}

pub fn ase_with(a: &AdjacencyMatrix, d: usize, solver: EigenSolver) -> Result<EmbeddingResult> {
    if !a.is_symmetric() {
        return Err(Error::validation("ase requires a symmetric adjacency matrix; use ase_directed"));
    }
    embed_symmetric(a, d, solver)
}

/// Embedding of an arbitrary real symmetric matrix, for example an edge
/// probability matrix given directly.
pub fn ase_matrix(m: &DMatrix<f64>, d: usize) -> Result<EmbeddingResult> {
    if !m.is_square() {
        return Err(Error::validation("matrix is not square"));
    }
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * (1.0 + m[(i, j)].abs()) {
                return Err(Error::validation(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    embed_symmetric(m, d, EigenSolver::Auto)
}

/// Embedding through any symmetric operator.
pub fn embed_symmetric<O: SymmetricOperator + ?Sized>(
    op: &O,
    d: usize,
    solver: EigenSolver,
) -> Result<EmbeddingResult> {
    let n = op.dim();
    if d == 0 || d > n {
        return Err(Error::validation(format!("embedding dimension {d} outside 1..={n}")));
    }
    let k = (d + TAIL_LEN).min(n);
    let pairs = top_eigenpairs_partial(op, k, (d + 1).min(k), Which::LargestMagnitude, solver)?;
    let signed: Vec<f64> = pairs.values[..d].to_vec();
    let magnitudes: Vec<f64> = signed.iter().map(|v| v.abs()).collect();
    let tail = pairs.values[d..].to_vec();
    let mut warnings = Vec::new();
    if let Some(next) = tail.first() {
        let scale = magnitudes[0].max(1.0);
        if magnitudes[d - 1] - next.abs() <= TIE_TOL * scale {
            warnings.push(format!(
                "eigenvalue magnitudes {d} and {} are tied within {TIE_TOL:e}; embedding subspace is ill-defined",
                d + 1
            ));
        }
    }
    let negatives: Vec<usize> = (0..d).filter(|&i| signed[i] < 0.0).collect();
    if !negatives.is_empty() {
        warnings.push(format!(
            "selected eigenvalues {:?} are negative; a dot product model may not fit",
            negatives.iter().map(|i| i + 1).collect::<Vec<_>>()
        ));
    }
    let mut u = pairs.vectors.columns(0, d).into_owned();
    fix_signs(&mut u);
    let xhat = scaled_rows(&u, &magnitudes)?;
    Ok(EmbeddingResult {
        xhat,
        eigenvalues: magnitudes,
        signed_eigenvalues: signed,
        d_used: d,
        spectrum_tail: tail,
        warnings,
    })
}

/// Left and right embeddings of a possibly directed graph.
#[derive(Debug, Clone)]
pub struct DirectedEmbedding {
    pub left: LatentPositionMatrix,
    pub right: LatentPositionMatrix,
    pub singular_values: Vec<f64>,
    pub d_used: usize,
    pub warnings: Vec<String>,
}

impl DirectedEmbedding {
    /// `[left | right]`, one `2d`-dimensional row per vertex.
    pub fn concatenated(&self) -> LatentPositionMatrix {
        let n = self.left.n();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| [self.left.row(i), self.right.row(i)].concat()).collect();
        LatentPositionMatrix::from_rows(&rows).expect("finite rows of equal length")
    }
}

/// Top-`d` singular value embedding `A ~ U S V^T`: left `U S^{1/2}`, right
/// `V S^{1/2}`. Signs follow the left vectors, the right ones flip with them.
pub fn ase_directed(a: &AdjacencyMatrix, d: usize) -> Result<DirectedEmbedding> {
    let n = a.n();
    if d == 0 || d > n {
        return Err(Error::validation(format!("embedding dimension {d} outside 1..={n}")));
    }
    let k = (d + 1).min(n);
    let (u, v, s) = if n <= DENSE_LIMIT {
        let svd = a.to_dense().svd(true, true);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]).then(x.cmp(&y)));
        let uu = svd.u.as_ref().ok_or_else(|| Error::numerical("svd failed"))?;
        let vt = svd.v_t.as_ref().ok_or_else(|| Error::numerical("svd failed"))?;
        let u = DMatrix::from_fn(n, k, |r, c| uu[(r, order[c])]);
        let v = DMatrix::from_fn(n, k, |r, c| vt[(order[c], r)]);
        let s: Vec<f64> = order[..k].iter().map(|&i| svd.singular_values[i]).collect();
        (u, v, s)
    } else {
        let gram = GramOperator(a);
        let pairs = top_eigenpairs_partial(&gram, k, k, Which::LargestAlgebraic, EigenSolver::Lanczos)?;
        let s: Vec<f64> = pairs.values.iter().map(|l| l.max(0.0).sqrt()).collect();
        let v = pairs.vectors;
        let mut u = DMatrix::zeros(n, k);
        let mut av = vec![0.0; n];
        for c in 0..k {
            let col: Vec<f64> = v.column(c).iter().copied().collect();
            a.matvec(&col, &mut av);
            if s[c] > 0.0 {
                for r in 0..n {
                    u[(r, c)] = av[r] / s[c];
                }
            }
        }
        (u, v, s)
    };
    let mut warnings = Vec::new();
    if k > d && s[d - 1] - s[d] <= TIE_TOL * s[0].max(1.0) {
        warnings.push(format!(
            "singular values {d} and {} are tied within {TIE_TOL:e}; embedding subspace is ill-defined",
            d + 1
        ));
    }
    let mut u = u.columns(0, d).into_owned();
    let mut v = v.columns(0, d).into_owned();
    let signs = fix_signs(&mut u);
    for (c, sg) in signs.iter().enumerate() {
        if *sg < 0.0 {
            v.column_mut(c).neg_mut();
        }
    }
    let s = s[..d].to_vec();
    Ok(DirectedEmbedding {
        left: scaled_rows(&u, &s)?,
        right: scaled_rows(&v, &s)?,
        singular_values: s,
        d_used: d,
        warnings,
    })
}

/// Outcome of [`select_dimension`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimensionChoice {
    pub d: usize,
    pub magnitudes: Vec<f64>,
    pub profile_loglik: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Profile likelihood elbow of a decreasing sequence of magnitudes.
///
/// For each split `q` in `1..p` the two groups are modelled as Gaussians with
/// their own means and a pooled variance; the split with the largest profile
/// log-likelihood wins, smallest `q` on ties. A spectrum with (numerically) no
/// spread returns 1 with a warning.
pub fn profile_likelihood_elbow(values: &[f64]) -> DimensionChoice {
    let p = values.len();
    let mut warnings = Vec::new();
    if p < 2 {
        return DimensionChoice {
            d: 1,
            magnitudes: values.to_vec(),
            profile_loglik: vec![],
            warnings: vec!["fewer than two eigenvalues; returning 1".into()],
        };
    }
    let mean = values.iter().sum::<f64>() / p as f64;
    let total: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let floor = 1e-12 * scale * scale;
    if total / (p as f64) <= floor {
        warnings.push("spectrum is flat; returning 1".into());
        return DimensionChoice {
            d: 1,
            magnitudes: values.to_vec(),
            profile_loglik: vec![],
            warnings,
        };
    }
    let ss = |s: &[f64]| {
        let m = s.iter().sum::<f64>() / s.len() as f64;
        s.iter().map(|v| (v - m).powi(2)).sum::<f64>()
    };
    let mut lls = Vec::with_capacity(p - 1);
    let mut best = (1usize, f64::NEG_INFINITY);
    for q in 1..p {
        let var = ((ss(&values[..q]) + ss(&values[q..])) / p as f64).max(floor);
        let ll = -0.5 * p as f64 * ((2.0 * std::f64::consts::PI * var).ln() + 1.0);
        lls.push(ll);
        if ll > best.1 {
            best = (q, ll);
        }
    }
    DimensionChoice {
        d: best.0,
        magnitudes: values.to_vec(),
        profile_loglik: lls,
        warnings,
    }
}

/// Embedding dimension by the profile likelihood elbow of the top `d_max`
/// eigenvalue magnitudes of `A` (singular values for directed graphs).
pub fn select_dimension(a: &AdjacencyMatrix, d_max: usize) -> Result<DimensionChoice> {
    let n = a.n();
    if d_max == 0 || d_max > n {
        return Err(Error::validation(format!("d_max {d_max} outside 1..={n}")));
    }
    let values: Vec<f64> = if a.is_symmetric() {
        top_eigenpairs_partial(a, d_max, d_max, Which::LargestMagnitude, EigenSolver::Auto)?
            .values
            .iter()
            .map(|v| v.abs())
            .collect()
    } else {
        ase_directed(a, d_max)?.singular_values
    };
    Ok(profile_likelihood_elbow(&values))
}

/// Orthogonal Procrustes alignment of `xhat` onto `x`.
#[derive(Debug, Clone)]
pub struct AlignmentResult {
    pub w: DMatrix<f64>,
    /// `||xhat W - x||_F`.
    pub residual: f64,
}

impl AlignmentResult {
    pub fn apply(&self, xhat: &LatentPositionMatrix) -> LatentPositionMatrix {
        LatentPositionMatrix::from_dmatrix(&(xhat.to_dmatrix() * &self.w)).expect("finite product")
    }
}

/// `W = U V^T` from the SVD `xhat^T x = U S V^T`.
pub fn procrustes(xhat: &LatentPositionMatrix, x: &LatentPositionMatrix) -> Result<AlignmentResult> {
    if xhat.n() != x.n() || xhat.d() != x.d() {
        return Err(Error::validation(format!(
            "shape mismatch: {}x{} against {}x{}",
            xhat.n(),
            xhat.d(),
            x.n(),
            x.d()
        )));
    }
    let a = xhat.to_dmatrix();
    let b = x.to_dmatrix();
    let m = a.transpose() * &b;
    let svd = m.svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::numerical("svd of cross product failed")),
    };
    let w = u * vt;
    let residual = (a * &w - b).norm();
    Ok(AlignmentResult { w, residual })
}

/// Largest row norm of `a - b` (the two-to-infinity distance).
pub fn two_to_infinity(a: &LatentPositionMatrix, b: &LatentPositionMatrix) -> f64 {
    (0..a.n())
        .map(|i| a.row(i).iter().zip(b.row(i)).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Latent position law used by [`asymptotic_covariance`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LatentLaw {
    /// Finite mixture, expectation computed exactly.
    Discrete { points: Vec<Vec<f64>>, weights: Vec<f64> },
    /// Draws from the law, expectation by the sample mean.
    Sample { points: Vec<Vec<f64>> },
}

impl LatentLaw {
    fn atoms(&self) -> Result<(Vec<&Vec<f64>>, Vec<f64>)> {
        match self {
            LatentLaw::Discrete { points, weights } => {
                if points.len() != weights.len() || points.is_empty() {
                    return Err(Error::validation("discrete law needs one weight per point"));
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return Err(Error::validation("weights must be finite and nonnegative"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::validation(format!("weights sum to {total}, expected 1")));
                }
                Ok((points.iter().collect(), weights.clone()))
            }
            LatentLaw::Sample { points } => {
                if points.is_empty() {
                    return Err(Error::validation("empty sample"));
                }
                let w = 1.0 / points.len() as f64;
                Ok((points.iter().collect(), vec![w; points.len()]))
            }
        }
    }
}

/// Second moment matrix `E[X X^T]` of a law.
pub fn second_moment(law: &LatentLaw) -> Result<DMatrix<f64>> {
    let (pts, w) = law.atoms()?;
    let d = pts[0].len();
    if pts.iter().any(|p| p.len() != d) {
        return Err(Error::validation("points have differing dimensions"));
    }
    let mut delta = DMatrix::zeros(d, d);
    for (p, wk) in pts.iter().zip(&w) {
        let v = DVector::from_column_slice(p);
        delta += *wk * &v * v.transpose();
    }
    Ok(delta)
}

/// Limiting covariance of an embedded row with latent position `x`:
/// `D^{-1} E[(x.X - (x.X)^2) X X^T] D^{-1}` with `D = E[X X^T]`.
pub fn asymptotic_covariance(law: &LatentLaw, x: &[f64]) -> Result<DMatrix<f64>> {
    let delta = second_moment(law)?;
    let d = delta.nrows();
    if x.len() != d {
        return Err(Error::validation(format!("x has dimension {}, law has {d}", x.len())));
    }
    let eig = SymmetricEigen::new(delta.clone());
    let hi = eig.eigenvalues.max();
    let lo = eig.eigenvalues.min();
    if !(lo > 0.0) || hi / lo > MAX_CONDITION {
        return Err(Error::validation(format!(
            "second moment matrix is singular (eigenvalues in [{lo:e}, {hi:e}])"
        )));
    }
    let inv = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v))
        * eig.eigenvectors.transpose();
    let (pts, w) = law.atoms()?;
    let mut mid = DMatrix::zeros(d, d);
    for (p, wk) in pts.iter().zip(&w) {
        let v = DVector::from_column_slice(p);
        let ip: f64 = x.iter().zip(p.iter()).map(|(a, b)| a * b).sum();
        mid += (*wk * (ip - ip * ip)) * &v * v.transpose();
    }
    let sigma = &inv * mid * &inv;
    Ok((&sigma + sigma.transpose()) * 0.5)
}

/// Dense top-`k` magnitudes of a symmetric matrix, exposed for diagnostics.
pub fn dense_spectrum(m: &DMatrix<f64>, k: usize) -> Result<Vec<f64>> {
    Ok(dense_top_eigenpairs(m.clone(), k, Which::LargestMagnitude)?.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{sample_rdpg, sample_sbm, SbmSpec};
    use crate::rng::rng_from_seed;
    use rand::Rng as _;

    fn random_orthogonal(d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rng_from_seed(seed);
        let m = DMatrix::from_fn(d, d, |_, _| rng.random::<f64>() - 0.5);
        m.qr().q()
    }

    #[test]
    fn rank_one_recovered_with_positive_sign() {
        let x = DVector::from_fn(40, |i, _| 0.2 + 0.015 * i as f64);
        let p = &x * x.transpose();
        let e = ase_matrix(&p, 1).unwrap();
        for i in 0..40 {
            assert!((e.xhat.row(i)[0] - x[i]).abs() < 1e-10);
        }
        let e = ase_matrix(&(-1.0 * &p), 1).unwrap();
        assert!(e.warnings.iter().any(|w| w.contains("negative")));
        assert!(e.xhat.row(0)[0] > 0.0);
    }

    #[test]
    fn full_dense_reconstruction() {
        let mut rng = rng_from_seed(11);
        let rows: Vec<Vec<f64>> = (0..50).map(|_| vec![0.3 + 0.4 * rng.random::<f64>(), 0.2 * rng.random::<f64>()]).collect();
        let x = LatentPositionMatrix::from_rows(&rows).unwrap();
        let a = sample_rdpg(&x, 1.0, 5).unwrap();
        let dense = a.to_dense();
        let eig = SymmetricEigen::new(dense.clone());
        let mut recon = DMatrix::zeros(50, 50);
        for i in 0..50 {
            let u = eig.eigenvectors.column(i);
            recon += eig.eigenvalues[i] * u * u.transpose();
        }
        assert!((dense - recon).norm() < 1e-6);
    }

    #[test]
    fn embedding_columns_orthogonal_and_magnitudes_sorted() {
        let mut rng = rng_from_seed(3);
        let rows: Vec<Vec<f64>> = (0..400)
            .map(|_| {
                let t: f64 = rng.random();
                vec![t * t, 2.0 * t * (1.0 - t), (1.0 - t) * (1.0 - t)]
            })
            .collect();
        let x = LatentPositionMatrix::from_rows(&rows).unwrap();
        let a = sample_rdpg(&x, 1.0, 9).unwrap();
        for solver in [EigenSolver::Dense, EigenSolver::Lanczos] {
            let e = ase_with(&a, 3, solver).unwrap();
            let m = e.xhat.to_dmatrix();
            let g = m.transpose() * &m;
            for i in 0..3 {
                assert!((g[(i, i)] - e.eigenvalues[i]).abs() < 1e-8 * e.eigenvalues[i]);
                for j in 0..3 {
                    if i != j {
                        assert!(g[(i, j)].abs() < 1e-8 * g[(i, i)]);
                    }
                }
            }
            assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
            assert_eq!(e.spectrum_tail.len(), TAIL_LEN);
        }
        let dense = ase_with(&a, 3, EigenSolver::Dense).unwrap();
        let lz = ase_with(&a, 3, EigenSolver::Lanczos).unwrap();
        assert!(two_to_infinity(&dense.xhat, &lz.xhat) < 1e-7);
    }

    #[test]
    fn tie_warning() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 2.0, 1.0]));
        let e = ase_matrix(&m, 2).unwrap();
        assert!(e.warnings.iter().any(|w| w.contains("tied")));
        assert!(ase_matrix(&m, 5).is_err());
        assert!(ase_matrix(&m, 0).is_err());
    }

    #[test]
    fn directed_rank_one_and_symmetric_agreement() {
        let u: Vec<f64> = (0..30).map(|i| 0.1 + 0.02 * i as f64).collect();
        let v: Vec<f64> = (0..30).map(|i| 0.9 - 0.01 * i as f64).collect();
        let mut entries = vec![0.0; 900];
        for i in 0..30 {
            for j in 0..30 {
                if i != j {
                    entries[i * 30 + j] = u[i] * v[j];
                }
            }
        }
        // hollow rank-one is not exactly rank one, so compare directions loosely
        let a = AdjacencyMatrix::from_weighted(30, entries).unwrap();
        let e = ase_directed(&a, 1).unwrap();
        let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let cos: f64 = (0..30).map(|i| e.left.row(i)[0] * u[i]).sum::<f64>()
            / (nu * (0..30).map(|i| e.left.row(i)[0].powi(2)).sum::<f64>().sqrt());
        assert!(cos > 0.99);

        let mut rng = rng_from_seed(21);
        let rows: Vec<Vec<f64>> = (0..60).map(|_| vec![0.5 + 0.3 * rng.random::<f64>(), 0.3 * rng.random::<f64>()]).collect();
        let x = LatentPositionMatrix::from_rows(&rows).unwrap();
        let g = sample_rdpg(&x, 1.0, 2).unwrap();
        let sym = ase(&g, 2).unwrap();
        let dir = ase_directed(&g, 2).unwrap();
        for c in 0..2 {
            let mut same = 0.0f64;
            let mut flip = 0.0f64;
            for i in 0..60 {
                same = same.max((sym.xhat.row(i)[c] - dir.left.row(i)[c]).abs());
                flip = flip.max((sym.xhat.row(i)[c] + dir.left.row(i)[c]).abs());
            }
            assert!(same.min(flip) < 1e-8);
        }
    }

    #[test]
    fn directed_singular_values_match_dense_svd() {
        let mut rng = rng_from_seed(8);
        let n = 100;
        let l: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let r: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let entries: Vec<f64> = (0..n * n)
            .map(|k| {
                let (i, j) = (k / n, k % n);
                if i == j {
                    0.0
                } else {
                    l[i] * r[j] + 0.05 * rng.random::<f64>()
                }
            })
            .collect();
        let a = AdjacencyMatrix::from_weighted(n, entries).unwrap();
        let oracle = a.to_dense().singular_values();
        let mut sorted: Vec<f64> = oracle.iter().copied().collect();
        sorted.sort_by(|x, y| y.total_cmp(x));
        let e = ase_directed(&a, 3).unwrap();
        for i in 0..3 {
            assert!((e.singular_values[i] - sorted[i]).abs() < 1e-8);
        }
        // the Krylov path on the Gram operator agrees too
        let pairs = top_eigenpairs_partial(&GramOperator(&a), 3, 3, Which::LargestAlgebraic, EigenSolver::Lanczos).unwrap();
        for i in 0..3 {
            assert!((pairs.values[i].sqrt() - sorted[i]).abs() < 1e-8);
        }
    }

    fn exhaustive_elbow(values: &[f64]) -> usize {
        // brute force with explicit likelihood evaluation
        let p = values.len() as f64;
        let mut best = (0, f64::NEG_INFINITY);
        for q in 1..values.len() {
            let (g1, g2) = values.split_at(q);
            let m1 = g1.iter().sum::<f64>() / g1.len() as f64;
            let m2 = g2.iter().sum::<f64>() / g2.len() as f64;
            let var = (g1.iter().map(|v| (v - m1).powi(2)).sum::<f64>()
                + g2.iter().map(|v| (v - m2).powi(2)).sum::<f64>())
                / p;
            let ll: f64 = g1
                .iter()
                .map(|v| -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (v - m1).powi(2) / (2.0 * var))
                .chain(g2.iter().map(|v| -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (v - m2).powi(2) / (2.0 * var)))
                .sum();
            if ll > best.1 {
                best = (q, ll);
            }
        }
        best.0
    }

    #[test]
    fn elbow_examples() {
        let v = [10.0, 9.5, 9.0, 0.1, 0.1, 0.1, 0.1, 0.1];
        assert_eq!(exhaustive_elbow(&v), 3);
        assert_eq!(profile_likelihood_elbow(&v).d, 3);
        let single = [5.0, 1e-9, 2e-9, 0.0, 1e-9];
        assert_eq!(profile_likelihood_elbow(&single).d, 1);
        let flat = profile_likelihood_elbow(&[2.0; 6]);
        assert_eq!(flat.d, 1);
        assert!(!flat.warnings.is_empty());
        let mut rng = rng_from_seed(4);
        for _ in 0..200 {
            let mut v: Vec<f64> = (0..8).map(|_| rng.random::<f64>() * 10.0).collect();
            v.sort_by(|a, b| b.total_cmp(a));
            assert_eq!(profile_likelihood_elbow(&v).d, exhaustive_elbow(&v));
        }
    }

    #[test]
    fn procrustes_recovers_rotation() {
        let mut rng = rng_from_seed(12);
        let rows: Vec<Vec<f64>> = (0..80).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
        let x = LatentPositionMatrix::from_rows(&rows).unwrap();
        let w0 = random_orthogonal(3, 5);
        let xhat = LatentPositionMatrix::from_dmatrix(&(x.to_dmatrix() * &w0)).unwrap();
        let al = procrustes(&xhat, &x).unwrap();
        assert!(al.residual < 1e-10);
        assert!((&al.w - w0.transpose()).norm() < 1e-10);
        assert!((al.w.transpose() * &al.w - DMatrix::identity(3, 3)).norm() < 1e-10);
        let same = procrustes(&x, &x).unwrap();
        assert!((same.w - DMatrix::identity(3, 3)).norm() < 1e-10);

        let noisy = xhat.to_dmatrix().map(|v| v + 1e-6 * (rng.random::<f64>() - 0.5) * 2.0);
        let noisy = LatentPositionMatrix::from_dmatrix(&noisy).unwrap();
        let al = procrustes(&noisy, &x).unwrap();
        assert!(al.residual < 1e-4);
        for s in 0..100 {
            let r = random_orthogonal(3, 1000 + s);
            assert!(al.residual <= (noisy.to_dmatrix() * r - x.to_dmatrix()).norm());
        }
        let identity_resid = (noisy.to_dmatrix() - x.to_dmatrix()).norm();
        assert!(al.residual <= identity_resid);
        let bad = LatentPositionMatrix::from_rows(&rows[..10]).unwrap();
        assert!(procrustes(&bad, &x).is_err());
    }

    #[test]
    fn covariance_closed_forms() {
        let c = 0.6;
        let law = LatentLaw::Discrete {
            points: vec![vec![c]],
            weights: vec![1.0],
        };
        let s = asymptotic_covariance(&law, &[c]).unwrap();
        assert!((s[(0, 0)] - (1.0 - c * c)).abs() < 1e-12);

        let law = LatentLaw::Discrete {
            points: vec![vec![0.5, 0.0], vec![0.0, 0.5]],
            weights: vec![0.5, 0.5],
        };
        // x orthogonal to the first atom and zero on the second
        let s = asymptotic_covariance(&law, &[0.0, 0.0]).unwrap();
        assert!(s.norm() == 0.0);

        let singular = LatentLaw::Discrete {
            points: vec![vec![0.3, 0.3]],
            weights: vec![1.0],
        };
        assert!(asymptotic_covariance(&singular, &[0.3, 0.3]).is_err());
    }

    #[test]
    fn covariance_matches_monte_carlo() {
        let spec = SbmSpec::from_block_matrix(&[vec![0.5, 0.2], vec![0.2, 0.5]], vec![0.5, 0.5]).unwrap();
        let pts = spec.block_points.clone();
        let law = LatentLaw::Discrete {
            points: pts.clone(),
            weights: vec![0.5, 0.5],
        };
        let mut rng = rng_from_seed(77);
        let sample: Vec<Vec<f64>> = (0..1_000_000).map(|_| pts[usize::from(rng.random::<bool>())].clone()).collect();
        let mc = LatentLaw::Sample { points: sample };
        for x in &pts {
            let exact = asymptotic_covariance(&law, x).unwrap();
            let approx = asymptotic_covariance(&mc, x).unwrap();
            assert!((&exact - &approx).norm() / exact.norm() < 0.01);
        }
    }

    #[test]
    fn sbm_embedding_separates_blocks() {
        let spec = SbmSpec::from_block_matrix(&[vec![0.5, 0.2], vec![0.2, 0.5]], vec![0.5, 0.5]).unwrap();
        let s = sample_sbm(&spec, 1000, 3).unwrap();
        let e = ase(&s.adjacency, 2).unwrap();
        let al = procrustes(&e.xhat, &s.latent).unwrap();
        let aligned = al.apply(&e.xhat);
        let n = 1000f64;
        let delta = s.adjacency.degrees().iter().cloned().fold(0.0, f64::max);
        let bound = n.ln().powi(2) / delta.sqrt();
        assert!(two_to_infinity(&aligned, &s.latent) < bound);
    }
}
