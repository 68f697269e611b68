//! Two-sample Kolmogorov-Smirnov testing of latent structure graphs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::curve::hardy_weinberg_arclength;
use crate::distribution::{BetaParams, Underlying};
use crate::error::{Error, Result};
use crate::graph::{sample_lsm, AdjacencyMatrix, LsmSpec};
use crate::inference::{clamp_to_interior, DEFAULT_EPSILON};
use crate::manifold::{isomap_unit_interval, orientation_pair, UnitIntervalEmbedding};
use crate::rng::derive_seed;
use crate::spectral::{ase, ase_directed, select_dimension};

/// Series terms smaller than this end the Kolmogorov tail sum.
pub const SERIES_TOL: f64 = 1e-12;
/// Below this `lambda` the Kolmogorov tail equals 1 to double precision.
const LAMBDA_FLOOR: f64 = 0.15;
const PVALUE_TAG: u64 = 0x4B53;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub m: usize,
}

fn sorted(y: &[f64]) -> Vec<f64> {
    let mut v = y.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Largest gap between the two empirical distribution functions.
///
/// Both ECDFs are evaluated right-continuously after every distinct pooled
/// value; the gap is formed in integers as `|i m - j n| / (n m)`.
pub fn ks_statistic(y1: &[f64], y2: &[f64]) -> f64 {
    let (a, b) = (sorted(y1), sorted(y2));
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return 0.0;
    }
    let (mut i, mut j) = (0usize, 0usize);
    let mut best: u128 = 0;
    while i < n || j < m {
        let x = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => break,
        };
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        let gap = (i as i128 * m as i128 - j as i128 * n as i128).unsigned_abs();
        best = best.max(gap);
    }
    best as f64 / (n as f64 * m as f64)
}

/// Asymptotic Kolmogorov tail `2 sum (-1)^(j-1) exp(-2 j^2 lambda^2)`.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < LAMBDA_FLOOR {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut j = 1.0f64;
    loop {
        let term = (-2.0 * j * j * lambda * lambda).exp();
        if term < SERIES_TOL {
            break;
        }
        sum += if (j as u64) % 2 == 1 { term } else { -term };
        j += 1.0;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample p-value at `lambda = D sqrt(n m / (n + m))`.
pub fn ks_pvalue(d: f64, n: usize, m: usize) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    kolmogorov_tail(d * (nf * mf / (nf + mf)).sqrt())
}

pub fn ks_test(y1: &[f64], y2: &[f64]) -> Result<KsResult> {
    if y1.is_empty() || y2.is_empty() {
        return Err(Error::validation("both samples must be nonempty"));
    }
    let statistic = ks_statistic(y1, y2);
    Ok(KsResult {
        statistic,
        p_value: ks_pvalue(statistic, y1.len(), y2.len()),
        n: y1.len(),
        m: y2.len(),
    })
}

/// One-sample test against Uniform(0, 1), asymptotic p-value.
pub fn ks_uniform(y: &[f64]) -> Result<KsResult> {
    if y.is_empty() {
        return Err(Error::validation("sample must be nonempty"));
    }
    let v = sorted(y);
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        let f = x.clamp(0.0, 1.0);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_tail(d * n.sqrt()),
        n: v.len(),
        m: 0,
    })
}

/// Mann-Whitney test that `x` is stochastically smaller than `y`.
/// Returns `(U_x, one-sided p)` using the normal approximation with tie
/// correction.
pub fn mann_whitney_less(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let (n1, n2) = (x.len(), y.len());
    if n1 == 0 || n2 == 0 {
        return Err(Error::validation("both samples must be nonempty"));
    }
    let mut pooled: Vec<(f64, bool)> = x.iter().map(|&v| (v, true)).chain(y.iter().map(|&v| (v, false))).collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total = pooled.len();
    let mut rank_x = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < total {
        let mut j = i;
        while j < total && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        for e in &pooled[i..j] {
            if e.1 {
                rank_x += avg;
            }
        }
        i = j;
    }
    let (a, b) = (n1 as f64, n2 as f64);
    let u = rank_x - a * (a + 1.0) / 2.0;
    let mean = a * b / 2.0;
    let nn = a + b;
    let var = a * b / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
    if var <= 0.0 {
        return Ok((u, 0.5));
    }
    // continuity correction toward the mean
    let z = (u - mean + 0.5) / var.sqrt();
    Ok((u, normal_cdf(z)))
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// Embedding dimension: fixed or chosen by the profile likelihood elbow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DimensionChoiceMode {
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleConfig {
    pub dimension: DimensionChoiceMode,
    /// Largest dimension examined when `dimension` is `Auto`.
    #[serde(default = "default_d_max")]
    pub d_max: usize,
    /// Isomap neighbors; `None` means the default rule.
    #[serde(default)]
    pub isomap_k: Option<usize>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_d_max() -> usize {
    10
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl Default for TwoSampleConfig {
    fn default() -> Self {
        TwoSampleConfig {
            dimension: DimensionChoiceMode::Auto,
            d_max: default_d_max(),
            isomap_k: None,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDiagnostics {
    /// Dimension picked by the elbow rule, when `Auto`.
    pub d_hat: Option<usize>,
    pub d_used: usize,
    pub isomap_k: usize,
    pub clamped: usize,
    pub stress: f64,
    /// Correlation between the isomap coordinate and vertex degree, before
    /// the embedding was oriented to make it nonnegative.
    pub degree_correlation: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleReport {
    pub as_is: KsResult,
    pub flipped: KsResult,
    pub graphs: [GraphDiagnostics; 2],
    /// Unit-interval coordinates of each graph (canonical orientation).
    #[serde(skip)]
    pub values: [Vec<f64>; 2],
}

/// Embed one graph and map it to the unit interval.
///
/// The isomap coordinate is oriented so that it correlates nonnegatively
/// with vertex degree. That choice is invariant to vertex relabeling and to
/// rotations of the embedding, so two graphs from the same model receive the
/// same orientation; it replaces the index-based rule of
/// [`isomap_unit_interval`] whenever the correlation is not zero.
pub fn embed_to_interval(
    a: &AdjacencyMatrix,
    config: &TwoSampleConfig,
) -> Result<(UnitIntervalEmbedding, Vec<f64>, GraphDiagnostics)> {
    let n = a.n();
    let mut warnings = Vec::new();
    let (d_hat, d) = match config.dimension {
        DimensionChoiceMode::Fixed(d) => (None, d),
        DimensionChoiceMode::Auto => {
            let choice = select_dimension(a, config.d_max.min(n))?;
            warnings.extend(choice.warnings.iter().cloned());
            (Some(choice.d), choice.d)
        }
    };
    let degrees = a.degrees();
    if degrees.iter().filter(|&&v| v == 0.0).count() * 10 > n {
        warnings.push("more than 10% of vertices are isolated; the embedding may be unreliable".into());
    }
    let points = if a.is_symmetric() {
        let e = ase(a, d)?;
        warnings.extend(e.warnings.iter().cloned());
        e.xhat.to_rows()
    } else {
        let e = ase_directed(a, d)?;
        warnings.extend(e.warnings.iter().cloned());
        e.concatenated().to_rows()
    };
    let mut emb = isomap_unit_interval(&points, config.isomap_k)?;
    let corr = emb.orient_by(&degrees);
    let (values, clamped) = clamp_to_interior(&emb.values, config.epsilon)?;
    let diag = GraphDiagnostics {
        d_hat,
        d_used: d,
        isomap_k: emb.k_used,
        clamped,
        stress: emb.stress,
        degree_correlation: corr,
        warnings,
    };
    Ok((emb, values, diag))
}

/// Embed both graphs, map each to the unit interval, and run the KS test for
/// the pair as is and with the second sample flipped.
pub fn two_sample_lsm_test(a1: &AdjacencyMatrix, a2: &AdjacencyMatrix, config: &TwoSampleConfig) -> Result<TwoSampleReport> {
    let (e1, v1, g1) = embed_to_interval(a1, config).map_err(|e| e.context("graph 1"))?;
    let (e2, v2, g2) = embed_to_interval(a2, config).map_err(|e| e.context("graph 2"))?;
    let (_, (_, f2)) = orientation_pair(&e1, &e2);
    let (f2, _) = clamp_to_interior(&f2.values, config.epsilon)?;
    Ok(TwoSampleReport {
        as_is: ks_test(&v1, &v2)?,
        flipped: ks_test(&v1, &f2)?,
        graphs: [g1, g2],
        values: [v1, v2],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueConfig {
    pub theta_null: BetaParams,
    pub theta_alt: BetaParams,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "default_test")]
    pub test: TwoSampleConfig,
}

fn default_test() -> TwoSampleConfig {
    TwoSampleConfig {
        dimension: DimensionChoiceMode::Fixed(3),
        ..TwoSampleConfig::default()
    }
}

impl PValueConfig {
    pub fn new(theta_null: BetaParams, theta_alt: BetaParams, n: usize, replicates: usize, seed: u64) -> Self {
        PValueConfig {
            theta_null,
            theta_alt,
            n,
            replicates,
            seed,
            test: default_test(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueFailure {
    pub index: usize,
    pub message: String,
}

/// p-values from repeated null and alternative two-sample tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueSamples {
    pub config: PValueConfig,
    /// As-is p-values, both graphs under the null parameters.
    pub p_null: Vec<f64>,
    /// As-is p-values, second graph under the alternative.
    pub p_alt: Vec<f64>,
    /// Null pairs with the second sample flipped.
    pub p_null_flipped: Vec<f64>,
    pub failures: Vec<PValueFailure>,
}

/// Repeats [`two_sample_lsm_test`] on Hardy-Weinberg graphs. Replicate `r`
/// samples three graphs: two under the null and one under the alternative;
/// the null test pairs the first two, the alternative the first and third.
pub fn pvalue_distribution_experiment(config: &PValueConfig) -> Result<PValueSamples> {
    config.theta_null.validate()?;
    config.theta_alt.validate()?;
    if config.replicates < 20 {
        return Err(Error::validation("replicates must be at least 20"));
    }
    if config.n < 10 {
        return Err(Error::validation("n must be at least 10"));
    }
    let curve = Arc::new(hardy_weinberg_arclength());
    let graph = |theta: BetaParams, r: usize, slot: u64| -> Result<AdjacencyMatrix> {
        let spec = LsmSpec {
            curve: curve.clone(),
            underlying: Underlying::Beta(theta),
            n: config.n,
            sparsity: 1.0,
        };
        let seed = derive_seed(config.seed, PVALUE_TAG, 3 * r as u64 + slot);
        Ok(sample_lsm(&spec, seed)?.adjacency)
    };
    let outcomes: Vec<std::result::Result<(f64, f64, f64), PValueFailure>> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let run = || -> Result<(f64, f64, f64)> {
                let g1 = graph(config.theta_null, r, 0)?;
                let g2 = graph(config.theta_null, r, 1)?;
                let g3 = graph(config.theta_alt, r, 2)?;
                let null = two_sample_lsm_test(&g1, &g2, &config.test)?;
                let alt = two_sample_lsm_test(&g1, &g3, &config.test)?;
                Ok((null.as_is.p_value, alt.as_is.p_value, null.flipped.p_value))
            };
            run().map_err(|e| PValueFailure {
                index: r,
                message: e.to_string(),
            })
        })
        .collect();
    let mut out = PValueSamples {
        config: config.clone(),
        p_null: vec![],
        p_alt: vec![],
        p_null_flipped: vec![],
        failures: vec![],
    };
    for o in outcomes {
        match o {
            Ok((a, b, c)) => {
                out.p_null.push(a);
                out.p_alt.push(b);
                out.p_null_flipped.push(c);
            }
            Err(f) => out.failures.push(f),
        }
    }
    if out.p_null.is_empty() {
        return Err(Error::numerical("every replicate failed"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng as _;

    #[test]
    fn statistic_examples() {
        assert_eq!(ks_statistic(&[0.1, 0.5, 0.7], &[0.7, 0.1, 0.5]), 0.0);
        assert_eq!(ks_statistic(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert_eq!(ks_statistic(&[1.0, 3.0], &[2.0, 4.0]), 0.5);
    }

    #[test]
    fn statistic_symmetric_and_monotone_invariant() {
        let mut rng = rng_from_seed(1);
        for _ in 0..50 {
            let a: Vec<f64> = (0..rng.random_range(1..30)).map(|_| rng.random()).collect();
            let b: Vec<f64> = (0..rng.random_range(1..30)).map(|_| rng.random()).collect();
            let d = ks_statistic(&a, &b);
            assert_eq!(d, ks_statistic(&b, &a));
            let ta: Vec<f64> = a.iter().map(|v| v.powi(3) + 2.0).collect();
            let tb: Vec<f64> = b.iter().map(|v| v.powi(3) + 2.0).collect();
            assert_eq!(d, ks_statistic(&ta, &tb));
        }
    }

    #[test]
    fn pvalue_examples() {
        assert_eq!(ks_pvalue(0.0, 10, 10), 1.0);
        assert!(ks_pvalue(1.0, 100, 100) < 1e-12);
        // classic table value: P(K > 1.36) ~ 0.049
        assert!((kolmogorov_tail(1.36) - 0.0494).abs() < 5e-4);
        let p: Vec<f64> = (0..200).map(|i| kolmogorov_tail(i as f64 * 0.02)).collect();
        assert!(p.windows(2).all(|w| w[1] <= w[0]));
        // the floor shortcut joins the series continuously, up to the
        // truncation error of about twice the first omitted term
        assert!((kolmogorov_tail(0.1500001) - 1.0).abs() < 2e-12);
    }

    #[test]
    fn uniform_and_rank_tests() {
        let grid: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let r = ks_uniform(&grid).unwrap();
        assert!((r.statistic - 0.005).abs() < 1e-12);
        assert!(r.p_value > 0.99);
        let low: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let high: Vec<f64> = (0..40).map(|i| i as f64 + 30.0).collect();
        let (_, p) = mann_whitney_less(&low, &high).unwrap();
        assert!(p < 1e-6);
        let (_, p) = mann_whitney_less(&high, &low).unwrap();
        assert!(p > 0.999);
        let (u, p) = mann_whitney_less(&low, &low).unwrap();
        assert_eq!(u, 800.0);
        assert!((p - 0.5).abs() < 0.05);
    }

    #[test]
    fn same_graph_twice_gives_zero_statistic() {
        let curve = Arc::new(hardy_weinberg_arclength());
        let spec = LsmSpec {
            curve,
            underlying: Underlying::Beta(BetaParams::new(2.0, 5.0).unwrap()),
            n: 150,
            sparsity: 1.0,
        };
        let g = sample_lsm(&spec, 3).unwrap().adjacency;
        let r = two_sample_lsm_test(&g, &g, &TwoSampleConfig::default()).unwrap();
        assert_eq!(r.as_is.statistic, 0.0);
        assert_eq!(r.as_is.p_value, 1.0);
        assert!(r.flipped.statistic > 0.0);
    }

    #[test]
    fn failing_graph_is_named() {
        let curve = Arc::new(hardy_weinberg_arclength());
        let spec = LsmSpec {
            curve,
            underlying: Underlying::Beta(BetaParams::new(2.0, 5.0).unwrap()),
            n: 60,
            sparsity: 1.0,
        };
        let g = sample_lsm(&spec, 3).unwrap().adjacency;
        let empty = AdjacencyMatrix::empty_binary(60);
        let err = two_sample_lsm_test(&g, &empty, &TwoSampleConfig::default()).unwrap_err();
        assert!(err.to_string().contains("graph 2"), "{err}");
    }
}
