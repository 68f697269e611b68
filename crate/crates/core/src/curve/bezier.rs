//! Quadratic Bezier curves and their least-squares fit to point clouds.

use nalgebra::{DMatrix, Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::parametric::dist;
use crate::error::{Error, Result};

/// `B(t) = (1-t)^2 P0 + 2t(1-t) P1 + t^2 P2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticBezier {
    control: [Vec<f64>; 3],
}

impl QuadraticBezier {
    pub fn new(p0: Vec<f64>, p1: Vec<f64>, p2: Vec<f64>) -> Result<Self> {
        let d = p0.len();
        if d == 0 || p1.len() != d || p2.len() != d {
            return Err(Error::validation("control points must share a nonzero dimension"));
        }
        if [&p0, &p1, &p2].iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::validation("control points must be finite"));
        }
        Ok(QuadraticBezier { control: [p0, p1, p2] })
    }

    pub fn dim(&self) -> usize {
        self.control[0].len()
    }

    pub fn control_points(&self) -> &[Vec<f64>; 3] {
        &self.control
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let (b0, b1, b2) = ((1.0 - t) * (1.0 - t), 2.0 * t * (1.0 - t), t * t);
        let [p0, p1, p2] = &self.control;
        for k in 0..self.dim() {
            out[k] = b0 * p0[k] + b1 * p1[k] + b2 * p2[k];
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, &mut out);
        out
    }

    pub fn derivative_into(&self, t: f64, out: &mut [f64]) {
        let [p0, p1, p2] = &self.control;
        for k in 0..self.dim() {
            out[k] = 2.0 * (1.0 - t) * (p1[k] - p0[k]) + 2.0 * t * (p2[k] - p1[k]);
        }
    }

    pub fn second_derivative_into(&self, out: &mut [f64]) {
        let [p0, p1, p2] = &self.control;
        for k in 0..self.dim() {
            out[k] = 2.0 * (p0[k] - 2.0 * p1[k] + p2[k]);
        }
    }

    /// Sub-curve on `[u, v]` reparameterized to `[0, 1]`, via blossoming.
    pub fn restricted(&self, u: f64, v: f64) -> Self {
        let [p0, p1, p2] = &self.control;
        let blossom = |a: f64, b: f64| -> Vec<f64> {
            let w0 = (1.0 - a) * (1.0 - b);
            let w1 = (1.0 - a) * b + a * (1.0 - b);
            let w2 = a * b;
            (0..self.dim()).map(|k| w0 * p0[k] + w1 * p1[k] + w2 * p2[k]).collect()
        };
        QuadraticBezier {
            control: [blossom(u, u), blossom(u, v), blossom(v, v)],
        }
    }

    /// Same curve traversed from `P2` to `P0`.
    pub fn reversed(&self) -> Self {
        let [p0, p1, p2] = self.control.clone();
        QuadraticBezier { control: [p2, p1, p0] }
    }

    /// Orientation with `start`/`end` closest to the given reference points.
    pub fn oriented_like(&self, start: &[f64], end: &[f64]) -> Self {
        let [p0, _, p2] = &self.control;
        let keep = dist(p0, start) + dist(p2, end);
        let flip = dist(p2, start) + dist(p0, end);
        if flip < keep {
            self.reversed()
        } else {
            self.clone()
        }
    }

    /// Bezier parameter of the nearest point to `x`.
    ///
    /// The stationarity condition `(B(t) - x) . B'(t) = 0` is a cubic in
    /// `t`; its roots in `[0, 1]` are bracketed between the critical points
    /// of the cubic and polished by bisection, then compared against the
    /// endpoints.
    pub fn closest_parameter(&self, x: &[f64]) -> f64 {
        let [p0, p1, p2] = &self.control;
        let mut da = 0.0;
        let mut dc = 0.0;
        let mut aa = 0.0;
        let mut ac = 0.0;
        let mut cc = 0.0;
        for k in 0..self.dim() {
            let a = p1[k] - p0[k];
            let c = p0[k] - 2.0 * p1[k] + p2[k];
            let d = p0[k] - x[k];
            da += d * a;
            dc += d * c;
            aa += a * a;
            ac += a * c;
            cc += c * c;
        }
        // f(t)/2 = cc t^3 + 3ac t^2 + (dc + 2aa) t + da
        let coef = [da, dc + 2.0 * aa, 3.0 * ac, cc];
        let f = |t: f64| ((coef[3] * t + coef[2]) * t + coef[1]) * t + coef[0];
        let mut breaks = vec![0.0, 1.0];
        // f'(t) = 3cc t^2 + 6ac t + (dc + 2aa)
        for r in quadratic_roots(3.0 * coef[3], 2.0 * coef[2], coef[1]) {
            if r > 0.0 && r < 1.0 {
                breaks.push(r);
            }
        }
        breaks.sort_by(f64::total_cmp);
        let mut candidates = vec![0.0, 1.0];
        for w in breaks.windows(2) {
            let (mut lo, mut hi) = (w[0], w[1]);
            let (flo, fhi) = (f(lo), f(hi));
            if flo == 0.0 {
                candidates.push(lo);
                continue;
            }
            if flo.signum() == fhi.signum() {
                continue;
            }
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if f(mid).signum() == flo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            candidates.push(0.5 * (lo + hi));
        }
        let mut buf = vec![0.0; self.dim()];
        let mut best = (f64::INFINITY, 0.0);
        for t in candidates {
            self.eval_into(t, &mut buf);
            let d2: f64 = buf.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 < best.0 || (d2 == best.0 && t < best.1) {
                best = (d2, t);
            }
        }
        best.1
    }
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b != 0.0 { vec![-c / b] } else { vec![] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let mut roots = vec![q / a];
    if q != 0.0 {
        roots.push(c / q);
    }
    roots
}

/// Result of [`fit_quadratic_bezier`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BezierFit {
    pub curve: QuadraticBezier,
    /// Bezier parameter of each point's nearest curve point.
    pub params: Vec<f64>,
    /// Sum of squared distances from the points to the curve.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub const BEZIER_MAX_ITER: usize = 50;
pub const BEZIER_TOL: f64 = 1e-8;

/// Least-squares quadratic Bezier through a point cloud by alternating
/// minimization.
///
/// Parameters start as the first principal component scores rescaled to
/// `[0, 1]`. Each round solves the linear least-squares problem for the
/// control points given the parameters, then moves every parameter to its
/// nearest point on the new curve. Iteration stops once no control point
/// coordinate moves more than `1e-8`, or after 50 rounds. The returned
/// curve is oriented so that the first coordinate in which `P0` and `P2`
/// differ is smaller at `P0`.
pub fn fit_quadratic_bezier(points: &[Vec<f64>]) -> Result<BezierFit> {
    let n = points.len();
    if n < 3 {
        return Err(Error::validation(format!("bezier fit needs at least 3 points, got {n}")));
    }
    let d = points[0].len();
    if d < 2 || points.iter().any(|p| p.len() != d) {
        return Err(Error::validation("bezier fit needs points of a common dimension d >= 2"));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::validation("bezier fit points must be finite"));
    }

    let mut params = principal_scores(points);
    let mut curve: Option<QuadraticBezier> = None;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < BEZIER_MAX_ITER {
        iterations += 1;
        let next = solve_controls(points, &params, curve.as_ref())?;
        let change = curve.as_ref().map_or(f64::INFINITY, |c| max_control_change(c, &next));
        for (t, p) in params.iter_mut().zip(points) {
            *t = next.closest_parameter(p);
        }
        curve = Some(next);
        if change < BEZIER_TOL {
            converged = true;
            break;
        }
    }
    let mut curve = curve.expect("at least one iteration");
    // zero-residual fits are only unique up to extending the arc along the
    // same parabola; restrict to the span of the projected parameters
    let (t_lo, t_hi) = params
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &t| (l.min(t), h.max(t)));
    if t_hi > t_lo && (t_lo > 0.0 || t_hi < 1.0) {
        curve = curve.restricted(t_lo, t_hi);
        params.iter_mut().for_each(|t| *t = ((*t - t_lo) / (t_hi - t_lo)).clamp(0.0, 1.0));
    }
    if should_flip(&curve) {
        curve = curve.reversed();
        params.iter_mut().for_each(|t| *t = 1.0 - *t);
    }
    let mut buf = vec![0.0; d];
    let residual = params
        .iter()
        .zip(points)
        .map(|(&t, p)| {
            curve.eval_into(t, &mut buf);
            buf.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        })
        .sum();
    Ok(BezierFit {
        curve,
        params,
        residual,
        iterations,
        converged,
    })
}

/// Sum of squared distances from `points` to their nearest points on `curve`.
pub fn bezier_residual(curve: &QuadraticBezier, points: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .map(|p| {
            let q = curve.eval(curve.closest_parameter(p));
            q.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        })
        .sum()
}

fn should_flip(curve: &QuadraticBezier) -> bool {
    let [p0, _, p2] = curve.control_points();
    for (a, b) in p0.iter().zip(p2) {
        if (a - b).abs() > 1e-12 {
            return a > b;
        }
    }
    false
}

fn max_control_change(a: &QuadraticBezier, b: &QuadraticBezier) -> f64 {
    a.control
        .iter()
        .flatten()
        .zip(b.control.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn principal_scores(points: &[Vec<f64>]) -> Vec<f64> {
    let n = points.len();
    let d = points[0].len();
    let mut mean = vec![0.0; d];
    for p in points {
        for k in 0..d {
            mean[k] += p[k] / n as f64;
        }
    }
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for p in points {
        for a in 0..d {
            for b in 0..d {
                cov[(a, b)] += (p[a] - mean[a]) * (p[b] - mean[b]);
            }
        }
    }
    let eig = SymmetricEigen::new(cov);
    let top = eig.eigenvalues.imax();
    let dir = eig.eigenvectors.column(top);
    let scores: Vec<f64> = points
        .iter()
        .map(|p| (0..d).map(|k| (p[k] - mean[k]) * dir[k]).sum())
        .collect();
    let (lo, hi) = scores
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &s| (l.min(s), h.max(s)));
    if hi - lo <= 0.0 {
        return vec![0.5; n];
    }
    scores.iter().map(|s| (s - lo) / (hi - lo)).collect()
}

/// Weight of the tangential error component in the control-point solve.
const TANGENTIAL_WEIGHT: f64 = 0.01;

/// Least-squares control points for fixed parameters.
///
/// Without a current curve this is the plain point-to-point problem. With
/// one, each point's error is measured in the metric
/// `I - (1 - w) T T^T` built from the unit tangent `T` of the current curve
/// at that point's parameter, which damps the tangential sliding mode that
/// makes point-to-point alternation crawl. Points whose nearest curve point
/// is an end of the curve keep the plain metric.
fn solve_controls(points: &[Vec<f64>], params: &[f64], current: Option<&QuadraticBezier>) -> Result<QuadraticBezier> {
    let d = points[0].len();
    let mut gram = Matrix3::<f64>::zeros();
    for &t in params {
        let basis = bernstein(t);
        for a in 0..3 {
            for b in 0..3 {
                gram[(a, b)] += basis[a] * basis[b];
            }
        }
    }
    let eig = gram.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 1e-12 * hi) {
        return Err(Error::numerical(format!(
            "bezier design matrix is rank deficient (eigenvalues {:.3e}..{:.3e}); points need at least three distinct parameters",
            lo, hi
        )));
    }

    let m = 3 * d;
    let mut normal = DMatrix::<f64>::zeros(m, m);
    let mut rhs = nalgebra::DVector::<f64>::zeros(m);
    let mut tangent = vec![0.0; d];
    let mut metric = DMatrix::<f64>::identity(d, d);
    for (p, &t) in points.iter().zip(params) {
        let basis = bernstein(t);
        if let Some(c) = current {
            c.derivative_into(t, &mut tangent);
            let len = tangent.iter().map(|v| v * v).sum::<f64>().sqrt();
            metric.fill_with_identity();
            // at a clamped end the error is tangential and must keep full weight
            if len > 0.0 && t > 0.0 && t < 1.0 {
                for a in 0..d {
                    for b in 0..d {
                        metric[(a, b)] -= (1.0 - TANGENTIAL_WEIGHT) * tangent[a] * tangent[b] / (len * len);
                    }
                }
            }
        }
        for ja in 0..3 {
            for jb in 0..3 {
                let w = basis[ja] * basis[jb];
                for a in 0..d {
                    for b in 0..d {
                        normal[(ja * d + a, jb * d + b)] += w * metric[(a, b)];
                    }
                }
            }
            for a in 0..d {
                let mx: f64 = (0..d).map(|b| metric[(a, b)] * p[b]).sum();
                rhs[ja * d + a] += basis[ja] * mx;
            }
        }
    }
    let chol = normal
        .cholesky()
        .ok_or_else(|| Error::numerical("bezier normal equations not positive definite"))?;
    let sol = chol.solve(&rhs);
    let control = |j: usize| (0..d).map(|a| sol[j * d + a]).collect::<Vec<f64>>();
    QuadraticBezier::new(control(0), control(1), control(2))
}

fn bernstein(t: f64) -> [f64; 3] {
    [(1.0 - t) * (1.0 - t), 2.0 * t * (1.0 - t), t * t]
}
