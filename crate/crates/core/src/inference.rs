//! Beta M-estimation from true or estimated latent positions, and the
//! replicated mean-squared-error experiments built on it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use std::time::Instant;

use crate::curve::{bezier_arclength, fit_quadratic_bezier, hardy_weinberg_arclength, ArclengthCurve, TubeConfig};
use crate::distribution::{digamma, ln_gamma, trigamma, BetaParams, Underlying, THETA_MAX, THETA_MIN};
use crate::error::{Error, Result};
use crate::graph::{sample_lsm, LatentPositionMatrix, LsmSpec};
use crate::rng::derive_seed;
use crate::spectral::{ase, procrustes, AlignmentResult};
use nalgebra::DMatrix;

/// Default interior clamp for pulled-back parameters.
pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const FIT_TOL: f64 = 1e-8;
pub const FIT_MAX_ITER: usize = 100;
/// Fraction of points outside the tube above which the support is flagged.
pub const MISFIT_FRACTION: f64 = 0.2;

const MSE_TAG: u64 = 0x4D5345;

fn check_interior(y: &[f64]) -> Result<()> {
    if let Some(i) = y.iter().position(|v| !(*v > 0.0 && *v < 1.0)) {
        return Err(Error::validation(format!(
            "y[{i}] = {} is not strictly inside (0, 1); clamp first",
            y[i]
        )));
    }
    Ok(())
}

/// `sum_i log g(y_i; a, b)` for the Beta density `g`.
pub fn beta_loglik(y: &[f64], theta: &BetaParams) -> Result<f64> {
    theta.validate()?;
    check_interior(y)?;
    let (s1, s2) = log_sums(y);
    Ok(loglik_from_sums(s1, s2, y.len() as f64, theta.a, theta.b))
}

fn log_sums(y: &[f64]) -> (f64, f64) {
    y.iter().fold((0.0, 0.0), |(s1, s2), &v| (s1 + v.ln(), s2 + (-v).ln_1p()))
}

fn loglik_from_sums(s1: f64, s2: f64, n: f64, a: f64, b: f64) -> f64 {
    // B(1, b) = 1/b exactly; avoids log-gamma rounding at the uniform
    let ln_b = if a == 1.0 {
        -b.ln()
    } else if b == 1.0 {
        -a.ln()
    } else {
        ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
    };
    (a - 1.0) * s1 + (b - 1.0) * s2 - n * ln_b
}

/// Maps each value into `[eps, 1 - eps]`; also returns how many moved.
pub fn clamp_to_interior(y: &[f64], eps: f64) -> Result<(Vec<f64>, usize)> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::validation(format!("epsilon {eps} outside (0, 0.5)")));
    }
    let mut moved = 0;
    let out = y
        .iter()
        .map(|&v| {
            let c = v.clamp(eps, 1.0 - eps);
            if c != v {
                moved += 1;
            }
            c
        })
        .collect();
    Ok((out, moved))
}

/// Outcome of a Beta maximum likelihood fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta: BetaParams,
    /// Total log-likelihood at `theta`.
    pub loglik: f64,
    pub iterations: usize,
    /// Euclidean norm of the per-observation score at `theta`.
    pub score_norm: f64,
    /// Per-observation hessian of the log-likelihood at `theta`; it does not
    /// depend on the data, so it equals minus the Fisher information.
    pub hessian: [[f64; 2]; 2],
    pub converged: bool,
}

fn mean_score(m1: f64, m2: f64, a: f64, b: f64) -> [f64; 2] {
    let dab = digamma(a + b);
    [dab - digamma(a) + m1, dab - digamma(b) + m2]
}

fn mean_hessian(a: f64, b: f64) -> [[f64; 2]; 2] {
    let tab = trigamma(a + b);
    [[tab - trigamma(a), tab], [tab, tab - trigamma(b)]]
}

fn norm(g: [f64; 2]) -> f64 {
    g[0].hypot(g[1])
}

fn project_box(v: f64) -> f64 {
    v.clamp(THETA_MIN, THETA_MAX)
}

/// Method-of-moments starting point, projected into the parameter box.
pub fn beta_moments(y: &[f64]) -> BetaParams {
    let n = y.len() as f64;
    let m = y.iter().sum::<f64>() / n;
    let v = y.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let common = m * (1.0 - m) / v - 1.0;
    if v > 0.0 && common > 0.0 && common.is_finite() {
        BetaParams::clamped(m * common, (1.0 - m) * common)
    } else {
        BetaParams::clamped(1.0, 1.0)
    }
}

/// Beta maximum likelihood by safeguarded Newton iteration on the digamma
/// score equations, started at the method-of-moments estimate.
///
/// Steps are halved until the likelihood does not decrease and iterates are
/// projected back into the parameter box. Stops when the per-observation
/// score norm drops below [`FIT_TOL`] or after [`FIT_MAX_ITER`] iterations;
/// in the latter case the best iterate is returned with `converged = false`.
pub fn fit_beta(y: &[f64]) -> Result<FitResult> {
    if y.len() < 2 {
        return Err(Error::validation("fit_beta needs at least two observations"));
    }
    check_interior(y)?;
    let first = y[0];
    if y.iter().all(|&v| v == first) {
        return Err(Error::validation("all observations are identical; the fit is degenerate"));
    }
    let n = y.len() as f64;
    let (s1, s2) = log_sums(y);
    let (m1, m2) = (s1 / n, s2 / n);
    let ll = |a: f64, b: f64| loglik_from_sums(m1, m2, 1.0, a, b);

    let start = beta_moments(y);
    let (mut a, mut b) = (start.a, start.b);
    let mut cur = ll(a, b);
    let mut g = mean_score(m1, m2, a, b);
    let mut iterations = 0;
    while iterations < FIT_MAX_ITER && norm(g) >= FIT_TOL {
        iterations += 1;
        let h = mean_hessian(a, b);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        // Beta log-likelihood is strictly concave, so det > 0 and the
        // Newton direction is an ascent direction
        let (da, db) = if det.is_finite() && det > 0.0 {
            (
                -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
                -(-h[1][0] * g[0] + h[0][0] * g[1]) / det,
            )
        } else {
            (g[0], g[1])
        };
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let na = project_box(a + step * da);
            let nb = project_box(b + step * db);
            let cand = ll(na, nb);
            // Near the optimum the likelihood change drops below rounding;
            // a step that is flat to rounding but shrinks the score is taken.
            let flat = cand >= cur - 1e-13 * (1.0 + cur.abs())
                && norm(mean_score(m1, m2, na, nb)) < norm(g);
            if cand >= cur || flat {
                moved = na != a || nb != b;
                a = na;
                b = nb;
                cur = cand;
                break;
            }
            step *= 0.5;
        }
        g = mean_score(m1, m2, a, b);
        if !moved {
            break;
        }
    }
    let score_norm = norm(g);
    Ok(FitResult {
        theta: BetaParams { a, b },
        loglik: cur * n,
        iterations,
        score_norm,
        hessian: mean_hessian(a, b),
        converged: score_norm < FIT_TOL,
    })
}

/// Smooth bump: 1 within `r1` of the curve, 0 beyond `r2`, quintic
/// smoothstep in between.
pub fn mollifier(distance: f64, tube: &TubeConfig) -> f64 {
    if distance <= tube.r1 {
        1.0
    } else if distance >= tube.r2 {
        0.0
    } else {
        let u = (tube.r2 - distance) / (tube.r2 - tube.r1);
        u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
    }
}

/// Pulled-back log density of `x`, multiplied by the mollifier of its
/// distance to the curve. Pullbacks are clamped by [`DEFAULT_EPSILON`].
pub fn mollified_loglik(x: &[f64], theta: &BetaParams, curve: &ArclengthCurve, tube: &TubeConfig) -> f64 {
    let proj = curve.project(x);
    let h = mollifier(proj.distance, tube);
    if h == 0.0 {
        return 0.0;
    }
    let y = proj.s.clamp(DEFAULT_EPSILON, 1.0 - DEFAULT_EPSILON);
    theta.ln_pdf(y) * h
}

/// M-estimate from (estimated) latent positions and a support curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MEstimate {
    pub fit: FitResult,
    /// `p^{-1}(pi(x_i))` before clamping.
    pub pullbacks: Vec<f64>,
    pub clamped: usize,
    pub outside_tube_fraction: f64,
    /// More than [`MISFIT_FRACTION`] of the points lie outside the tube.
    pub support_misfit: bool,
}

/// Project every row onto the curve, pull back to `[0, 1]`, clamp and fit.
pub fn lsm_m_estimate(xhat: &LatentPositionMatrix, curve: &ArclengthCurve, eps: f64) -> Result<MEstimate> {
    if xhat.n() == 0 {
        return Err(Error::validation("no latent positions"));
    }
    if xhat.d() != curve.ambient_dim() {
        return Err(Error::validation(format!(
            "positions have dimension {}, curve lives in {}",
            xhat.d(),
            curve.ambient_dim()
        )));
    }
    let projections: Vec<(f64, bool)> = (0..xhat.n())
        .into_par_iter()
        .map(|i| {
            let p = curve.project(xhat.row(i));
            (p.s, p.outside_tube)
        })
        .collect();
    let pullbacks: Vec<f64> = projections.iter().map(|p| p.0).collect();
    let outside = projections.iter().filter(|p| p.1).count();
    let (y, clamped) = clamp_to_interior(&pullbacks, eps)?;
    let fit = fit_beta(&y)?;
    let outside_tube_fraction = outside as f64 / xhat.n() as f64;
    Ok(MEstimate {
        fit,
        pullbacks,
        clamped,
        outside_tube_fraction,
        support_misfit: outside_tube_fraction > MISFIT_FRACTION,
    })
}

/// Which support curves the experiment uses for estimated positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveMode {
    /// The known Hardy-Weinberg curve only.
    TrueHw,
    /// Both the known curve and a quadratic Bezier fitted to the embedding.
    FittedBezier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    TrueX,
    InverseHw,
    InverseBezier,
}

impl Estimator {
    pub fn label(&self) -> &'static str {
        match self {
            Estimator::TrueX => "X",
            Estimator::InverseHw => "Xhat (inverse HW)",
            Estimator::InverseBezier => "Xhat (inverse Bezier)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseConfig {
    pub curve_mode: CurveMode,
    pub theta0: BetaParams,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_dimension() -> usize {
    3
}

impl MseConfig {
    pub fn new(curve_mode: CurveMode, theta0: BetaParams, n: usize, replicates: usize, seed: u64) -> Self {
        MseConfig {
            curve_mode,
            theta0,
            n,
            replicates,
            seed,
            epsilon: DEFAULT_EPSILON,
            dimension: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.theta0.validate()?;
        if self.replicates < 2 {
            return Err(Error::validation("replicates must be at least 2"));
        }
        if self.n < 10 {
            return Err(Error::validation("n must be at least 10"));
        }
        if self.dimension != 3 {
            return Err(Error::validation("the Hardy-Weinberg experiments embed in dimension 3"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::validation("epsilon must lie in (0, 0.5)"));
        }
        Ok(())
    }

    pub fn estimators(&self) -> Vec<Estimator> {
        match self.curve_mode {
            CurveMode::TrueHw => vec![Estimator::TrueX, Estimator::InverseHw],
            CurveMode::FittedBezier => vec![Estimator::TrueX, Estimator::InverseHw, Estimator::InverseBezier],
        }
    }
}

/// Estimates from one replicate, in [`MseConfig::estimators`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateEstimates {
    pub index: usize,
    pub seed: u64,
    pub estimates: Vec<[f64; 2]>,
    pub clamped: Vec<usize>,
    pub outside_tube_fraction: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub index: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorMse {
    pub estimator: Estimator,
    pub label: String,
    /// Mean squared error of `(a, b)`.
    pub mse: [f64; 2],
    /// MSE relative to the true-X baseline.
    pub relative_efficiency: [f64; 2],
    pub mean_clamped: f64,
    pub mean_outside_tube_fraction: f64,
}

/// Result of [`mse_experiment`]. Runtime is kept out of the serialized form
/// so reruns produce identical bytes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MseReport {
    pub config: MseConfig,
    pub replicates_completed: usize,
    pub rows: Vec<EstimatorMse>,
    pub failures: Vec<ReplicateFailure>,
    pub replicates: Vec<ReplicateEstimates>,
    #[serde(skip)]
    pub runtime_secs: f64,
}

impl MseReport {
    pub fn row(&self, e: Estimator) -> Option<&EstimatorMse> {
        self.rows.iter().find(|r| r.estimator == e)
    }
}

/// One replicate: sample the graph, embed, align, estimate.
pub fn mse_replicate(config: &MseConfig, curve: &Arc<ArclengthCurve>, index: usize) -> Result<ReplicateEstimates> {
    let seed = derive_seed(config.seed, MSE_TAG, index as u64);
    let spec = LsmSpec {
        curve: curve.clone(),
        underlying: Underlying::Beta(config.theta0),
        n: config.n,
        sparsity: 1.0,
    };
    let sample = sample_lsm(&spec, seed)?;
    let mut estimates = Vec::new();
    let mut clamped = Vec::new();
    let mut outside = Vec::new();

    let (y, c) = clamp_to_interior(&sample.t, config.epsilon)?;
    let truth = fit_beta(&y)?;
    estimates.push(truth.theta.as_array());
    clamped.push(c);
    outside.push(0.0);

    let emb = ase(&sample.adjacency, config.dimension)?;
    let aligned = procrustes(&emb.xhat, &sample.latent)?.apply(&emb.xhat);
    let hw = lsm_m_estimate(&aligned, curve, config.epsilon)?;
    estimates.push(hw.fit.theta.as_array());
    clamped.push(hw.clamped);
    outside.push(hw.outside_tube_fraction);

    if config.curve_mode == CurveMode::FittedBezier {
        let fit = fit_quadratic_bezier(&aligned.to_rows())?;
        let start = curve.point(0.0)?;
        let end = curve.point(1.0)?;
        let bez = bezier_arclength(&fit.curve.oriented_like(&start, &end))?;
        let est = lsm_m_estimate(&aligned, &bez, config.epsilon)?;
        estimates.push(est.fit.theta.as_array());
        clamped.push(est.clamped);
        outside.push(est.outside_tube_fraction);
    }
    Ok(ReplicateEstimates {
        index,
        seed,
        estimates,
        clamped,
        outside_tube_fraction: outside,
    })
}

/// Replicated MSE of the Beta estimates on Hardy-Weinberg graphs.
///
/// Replicates run in parallel with seeds derived from `config.seed` and the
/// replicate index, so the report does not depend on the thread count. A
/// replicate in which any estimator fails is excluded and recorded.
pub fn mse_experiment(config: &MseConfig) -> Result<MseReport> {
    config.validate()?;
    let started = Instant::now();
    let curve = Arc::new(hardy_weinberg_arclength());
    let outcomes: Vec<std::result::Result<ReplicateEstimates, ReplicateFailure>> = (0..config.replicates)
        .into_par_iter()
        .map(|i| {
            mse_replicate(config, &curve, i).map_err(|e| ReplicateFailure {
                index: i,
                seed: derive_seed(config.seed, MSE_TAG, i as u64),
                message: e.to_string(),
            })
        })
        .collect();
    let mut replicates = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => replicates.push(r),
            Err(f) => failures.push(f),
        }
    }
    if replicates.is_empty() {
        return Err(Error::numerical(format!(
            "all {} replicates failed; first error: {}",
            config.replicates,
            failures.first().map_or("none", |f| f.message.as_str())
        )));
    }
    let estimators = config.estimators();
    let theta0 = config.theta0.as_array();
    let m = replicates.len() as f64;
    let mut rows: Vec<EstimatorMse> = estimators
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let mut mse = [0.0; 2];
            for r in &replicates {
                for c in 0..2 {
                    mse[c] += (r.estimates[k][c] - theta0[c]).powi(2) / m;
                }
            }
            EstimatorMse {
                estimator: *e,
                label: e.label().to_string(),
                mse,
                relative_efficiency: [1.0, 1.0],
                mean_clamped: replicates.iter().map(|r| r.clamped[k] as f64).sum::<f64>() / m,
                mean_outside_tube_fraction: replicates.iter().map(|r| r.outside_tube_fraction[k]).sum::<f64>() / m,
            }
        })
        .collect();
    let base = rows[0].mse;
    for row in &mut rows {
        row.relative_efficiency = [row.mse[0] / base[0], row.mse[1] / base[1]];
    }
    Ok(MseReport {
        config: config.clone(),
        replicates_completed: replicates.len(),
        rows,
        failures,
        replicates,
        runtime_secs: started.elapsed().as_secs_f64(),
    })
}

fn fmt_pair(v: [f64; 2]) -> String {
    format!("\"({},{})\"", fmt_num(v[0]), fmt_num(v[1]))
}

fn fmt_num(v: f64) -> String {
    if v == 0.0 || (1e-3..1e4).contains(&v.abs()) {
        format!("{}", (v * 1e6).round() / 1e6)
    } else {
        format!("{v:.3e}")
    }
}

/// CSV with estimator rows and one column per parameter setting, each cell
/// an `(a, b)` pair, followed by relative-efficiency rows.
pub fn mse_table_csv(reports: &[MseReport]) -> String {
    let mut out = String::from("MSE");
    for r in reports {
        out.push_str(&format!(",\"a={},b={}\"", r.config.theta0.a, r.config.theta0.b));
    }
    out.push('\n');
    let all = [Estimator::TrueX, Estimator::InverseHw, Estimator::InverseBezier];
    let present: Vec<Estimator> = all
        .into_iter()
        .filter(|e| reports.iter().any(|r| r.row(*e).is_some()))
        .collect();
    let cell = |r: &MseReport, e: Estimator, re: bool| match r.row(e) {
        Some(row) => fmt_pair(if re { row.relative_efficiency } else { row.mse }),
        None => String::new(),
    };
    for e in &present {
        out.push_str(&format!("\"{}\"", e.label()));
        for r in reports {
            out.push(',');
            out.push_str(&cell(r, *e, false));
        }
        out.push('\n');
    }
    for e in present.iter().skip(1) {
        let name = match e {
            Estimator::InverseHw => "inverse HW",
            _ => "inverse Bezier",
        };
        out.push_str(&format!("\"RE(true X, {name})\""));
        for r in reports {
            out.push(',');
            out.push_str(&cell(r, *e, true));
        }
        out.push('\n');
    }
    out
}

/// Two-row layout for a single known-curve setting: `MSE(theta_hat)` from
/// the true positions and `MSE(theta_tilde)` from the estimated ones.
pub fn mse_table1_csv(report: &MseReport) -> String {
    let mut out = String::from(",a,b\n");
    for (name, e) in [("MSE(theta_hat)", Estimator::TrueX), ("MSE(theta_tilde)", Estimator::InverseHw)] {
        if let Some(row) = report.row(e) {
            out.push_str(&format!("\"{name}\",{},{}\n", fmt_num(row.mse[0]), fmt_num(row.mse[1])));
        }
    }
    out
}

pub const ALIGN_MAX_ITER: usize = 200;
pub const ALIGN_TOL: f64 = 1e-10;

/// Rotation of an embedding onto a known curve without reference positions.
#[derive(Debug, Clone)]
pub struct CurveAlignment {
    pub alignment: AlignmentResult,
    pub iterations: usize,
    pub converged: bool,
}

/// Aligns `xhat` to `curve` by alternating projection and Procrustes.
///
/// The start rotation matches a quadratic Bezier fitted to `xhat` against
/// the curve at equal arclength fractions, trying both orientations. Curves
/// that are mapped onto themselves by an orthogonal reversal (Hardy-Weinberg
/// is one) leave the orientation, and hence `(a, b)` versus `(b, a)`,
/// undetermined.
pub fn align_to_curve(xhat: &LatentPositionMatrix, curve: &ArclengthCurve) -> Result<CurveAlignment> {
    let d = xhat.d();
    if d != curve.ambient_dim() {
        return Err(Error::validation(format!(
            "embedding dimension {d} differs from curve dimension {}",
            curve.ambient_dim()
        )));
    }
    let mut w = initial_rotation(xhat, curve).unwrap_or_else(|| DMatrix::identity(d, d));
    let x = xhat.to_dmatrix();
    for iter in 1..=ALIGN_MAX_ITER {
        let aligned = &x * &w;
        let proj: Vec<f64> = (0..xhat.n())
            .into_par_iter()
            .map(|i| curve.project(&aligned.row(i).iter().copied().collect::<Vec<_>>()).point)
            .collect::<Vec<_>>()
            .concat();
        let target = LatentPositionMatrix::new(xhat.n(), d, proj)?;
        let next = procrustes(xhat, &target)?;
        let change = (&next.w - &w).norm();
        w = next.w.clone();
        if change < ALIGN_TOL {
            return Ok(CurveAlignment {
                alignment: next,
                iterations: iter,
                converged: true,
            });
        }
    }
    let residual = {
        let aligned = &x * &w;
        (0..xhat.n())
            .map(|i| curve.project(&aligned.row(i).iter().copied().collect::<Vec<_>>()).distance.powi(2))
            .sum::<f64>()
            .sqrt()
    };
    Ok(CurveAlignment {
        alignment: AlignmentResult { w, residual },
        iterations: ALIGN_MAX_ITER,
        converged: false,
    })
}

fn initial_rotation(xhat: &LatentPositionMatrix, curve: &ArclengthCurve) -> Option<DMatrix<f64>> {
    const GRID: usize = 9;
    let fit = fit_quadratic_bezier(&xhat.to_rows()).ok()?;
    let bez = bezier_arclength(&fit.curve).ok()?;
    let sample = |c: &ArclengthCurve| -> Option<Vec<f64>> {
        let mut v = Vec::new();
        for i in 0..GRID {
            v.extend(c.point(i as f64 / (GRID - 1) as f64).ok()?);
        }
        Some(v)
    };
    let from = LatentPositionMatrix::new(GRID, xhat.d(), sample(&bez)?).ok()?;
    let to = LatentPositionMatrix::new(GRID, xhat.d(), sample(curve)?).ok()?;
    let forward = procrustes(&from, &to).ok()?;
    let reversed_rows: Vec<Vec<f64>> = to.to_rows().into_iter().rev().collect();
    let backward = procrustes(&from, &LatentPositionMatrix::from_rows(&reversed_rows).ok()?).ok()?;
    Some(if backward.residual < forward.residual { backward.w } else { forward.w })
}
