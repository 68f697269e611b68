use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

use super::bezier::QuadraticBezier;
use crate::error::{Error, Result};

/// A map `[0, 1] -> R^k` with a first derivative.
pub trait CurveMap: Send + Sync {
    fn ambient_dim(&self) -> usize;
    fn eval_into(&self, t: f64, out: &mut [f64]);
    fn derivative_into(&self, t: f64, out: &mut [f64]);

    /// Central difference of the first derivative unless overridden.
    fn second_derivative_into(&self, t: f64, out: &mut [f64]) {
        let h = 1e-5;
        let (lo, hi) = ((t - h).max(0.0), (t + h).min(1.0));
        let k = self.ambient_dim();
        let mut a = vec![0.0; k];
        let mut b = vec![0.0; k];
        self.derivative_into(lo, &mut a);
        self.derivative_into(hi, &mut b);
        for i in 0..k {
            out[i] = (b[i] - a[i]) / (hi - lo);
        }
    }
}

/// Parametric support curve.
#[derive(Clone)]
pub enum ParametricCurve {
    /// `r(t) = (t^2, 2t(1-t), (1-t)^2)`.
    HardyWeinberg,
    Bezier(QuadraticBezier),
    Table(TabulatedCurve),
    Custom(Arc<dyn CurveMap>),
}

impl fmt::Debug for ParametricCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParametricCurve::HardyWeinberg => write!(f, "HardyWeinberg"),
            ParametricCurve::Bezier(b) => f.debug_tuple("Bezier").field(b).finish(),
            ParametricCurve::Table(t) => write!(f, "Table({} rows)", t.t.len()),
            ParametricCurve::Custom(c) => write!(f, "Custom(dim {})", c.ambient_dim()),
        }
    }
}

/// The Hardy-Weinberg curve in the 2-simplex.
pub fn hardy_weinberg() -> ParametricCurve {
    ParametricCurve::HardyWeinberg
}

impl CurveMap for ParametricCurve {
    fn ambient_dim(&self) -> usize {
        match self {
            ParametricCurve::HardyWeinberg => 3,
            ParametricCurve::Bezier(b) => b.dim(),
            ParametricCurve::Table(t) => t.dim,
            ParametricCurve::Custom(c) => c.ambient_dim(),
        }
    }

    fn eval_into(&self, t: f64, out: &mut [f64]) {
        match self {
            ParametricCurve::HardyWeinberg => {
                out[0] = t * t;
                out[1] = 2.0 * t * (1.0 - t);
                out[2] = (1.0 - t) * (1.0 - t);
            }
            ParametricCurve::Bezier(b) => b.eval_into(t, out),
            ParametricCurve::Table(tab) => tab.eval_into(t, out),
            ParametricCurve::Custom(c) => c.eval_into(t, out),
        }
    }

    fn derivative_into(&self, t: f64, out: &mut [f64]) {
        match self {
            ParametricCurve::HardyWeinberg => {
                out[0] = 2.0 * t;
                out[1] = 2.0 - 4.0 * t;
                out[2] = -2.0 * (1.0 - t);
            }
            ParametricCurve::Bezier(b) => b.derivative_into(t, out),
            ParametricCurve::Table(tab) => tab.derivative_into(t, out),
            ParametricCurve::Custom(c) => c.derivative_into(t, out),
        }
    }

    fn second_derivative_into(&self, t: f64, out: &mut [f64]) {
        match self {
            ParametricCurve::HardyWeinberg => out.copy_from_slice(&[2.0, -4.0, 2.0]),
            ParametricCurve::Bezier(b) => b.second_derivative_into(out),
            ParametricCurve::Table(tab) => tab.second_derivative_into(t, out),
            ParametricCurve::Custom(c) => c.second_derivative_into(t, out),
        }
    }
}

impl ParametricCurve {
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.ambient_dim()];
        self.eval_into(t, &mut out);
        out
    }

    pub fn derivative(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.ambient_dim()];
        self.derivative_into(t, &mut out);
        out
    }

    pub fn second_derivative(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.ambient_dim()];
        self.second_derivative_into(t, &mut out);
        out
    }

    pub fn speed(&self, t: f64) -> f64 {
        norm(&self.derivative(t))
    }

    /// Curvature `sqrt(|g'|^2 |g''|^2 - (g'.g'')^2) / |g'|^3`.
    pub fn curvature(&self, t: f64) -> f64 {
        let d1 = self.derivative(t);
        let d2 = self.second_derivative(t);
        let s2: f64 = d1.iter().map(|v| v * v).sum();
        let a2: f64 = d2.iter().map(|v| v * v).sum();
        let c: f64 = d1.iter().zip(&d2).map(|(a, b)| a * b).sum();
        (s2 * a2 - c * c).max(0.0).sqrt() / s2.powf(1.5)
    }

    /// Numerical checks of regularity: nonzero speed, bounded second
    /// derivative and no self intersection on a probe grid.
    pub fn validate(&self) -> Result<()> {
        const GRID: usize = 512;
        let ts: Vec<f64> = (0..=GRID).map(|i| i as f64 / GRID as f64).collect();
        for &t in &ts {
            if !(self.speed(t) > 1e-12) {
                return Err(Error::validation(format!("curve is not regular at t={t}")));
            }
            if self.second_derivative(t).iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(format!("second derivative not finite at t={t}")));
            }
        }
        let pts: Vec<Vec<f64>> = ts.iter().map(|&t| self.eval(t)).collect();
        // minimal step between neighbors sets the scale for "well separated"
        let step = pts
            .windows(2)
            .map(|w| dist(&w[0], &w[1]))
            .fold(f64::INFINITY, f64::min);
        let sep = 8;
        for i in 0..pts.len() {
            for j in i + sep..pts.len() {
                if dist(&pts[i], &pts[j]) < 0.5 * step {
                    return Err(Error::validation(format!(
                        "curve self-intersects near t={} and t={}",
                        ts[i], ts[j]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Serializable description, unavailable for custom maps.
    pub fn to_spec(&self) -> Option<CurveSpec> {
        match self {
            ParametricCurve::HardyWeinberg => Some(CurveSpec::HardyWeinberg),
            ParametricCurve::Bezier(b) => Some(CurveSpec::Bezier2 {
                control_points: b.control_points().to_vec(),
            }),
            ParametricCurve::Table(t) => Some(CurveSpec::Table { rows: t.rows() }),
            ParametricCurve::Custom(_) => None,
        }
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Curve given by sample rows `(t, x_1..x_k)`, interpolated by cubic
/// Hermite segments with finite-difference tangents.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCurve {
    t: Vec<f64>,
    points: Vec<Vec<f64>>,
    tangents: Vec<Vec<f64>>,
    dim: usize,
}

impl TabulatedCurve {
    /// Rows must start at `t = 0`, end at `t = 1` and be strictly increasing.
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::validation("tabulated curve needs at least two rows"));
        }
        let dim = rows[0].len().saturating_sub(1);
        if dim == 0 || rows.iter().any(|r| r.len() != dim + 1) {
            return Err(Error::validation("tabulated rows must all be (t, x_1..x_k) with k >= 1"));
        }
        let t: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        if t[0] != 0.0 || *t.last().unwrap() != 1.0 {
            return Err(Error::validation("tabulated curve must span t in [0, 1]"));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::validation("tabulated t values must be strictly increasing"));
        }
        let points: Vec<Vec<f64>> = rows.iter().map(|r| r[1..].to_vec()).collect();
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::validation("tabulated coordinates must be finite"));
        }
        let m = t.len();
        let tangents = (0..m)
            .map(|i| {
                let (a, b) = if i == 0 {
                    (0, 1)
                } else if i == m - 1 {
                    (m - 2, m - 1)
                } else {
                    (i - 1, i + 1)
                };
                (0..dim)
                    .map(|k| (points[b][k] - points[a][k]) / (t[b] - t[a]))
                    .collect()
            })
            .collect();
        Ok(TabulatedCurve {
            t,
            points,
            tangents,
            dim,
        })
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.t
            .iter()
            .zip(&self.points)
            .map(|(&t, p)| std::iter::once(t).chain(p.iter().copied()).collect())
            .collect()
    }

    fn segment(&self, t: f64) -> (usize, f64, f64) {
        let t = t.clamp(0.0, 1.0);
        let k = match self.t.partition_point(|&v| v <= t) {
            0 => 0,
            p => (p - 1).min(self.t.len() - 2),
        };
        let h = self.t[k + 1] - self.t[k];
        (k, (t - self.t[k]) / h, h)
    }

    fn eval_into(&self, t: f64, out: &mut [f64]) {
        let (k, u, h) = self.segment(t);
        let (u2, u3) = (u * u, u * u * u);
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        for i in 0..self.dim {
            out[i] = h00 * self.points[k][i]
                + h10 * h * self.tangents[k][i]
                + h01 * self.points[k + 1][i]
                + h11 * h * self.tangents[k + 1][i];
        }
    }

    fn derivative_into(&self, t: f64, out: &mut [f64]) {
        let (k, u, h) = self.segment(t);
        let u2 = u * u;
        let d00 = 6.0 * u2 - 6.0 * u;
        let d10 = 3.0 * u2 - 4.0 * u + 1.0;
        let d01 = -6.0 * u2 + 6.0 * u;
        let d11 = 3.0 * u2 - 2.0 * u;
        for i in 0..self.dim {
            out[i] = (d00 * self.points[k][i] + d01 * self.points[k + 1][i]) / h
                + d10 * self.tangents[k][i]
                + d11 * self.tangents[k + 1][i];
        }
    }

    fn second_derivative_into(&self, t: f64, out: &mut [f64]) {
        let (k, u, h) = self.segment(t);
        let e00 = 12.0 * u - 6.0;
        let e10 = 6.0 * u - 4.0;
        let e01 = -12.0 * u + 6.0;
        let e11 = 6.0 * u - 2.0;
        for i in 0..self.dim {
            out[i] = (e00 * self.points[k][i] + e01 * self.points[k + 1][i]) / (h * h)
                + (e10 * self.tangents[k][i] + e11 * self.tangents[k + 1][i]) / h;
        }
    }
}

/// JSON exchange record for curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CurveSpec {
    HardyWeinberg,
    #[serde(rename = "bezier2")]
    Bezier2 { control_points: Vec<Vec<f64>> },
    Table { rows: Vec<Vec<f64>> },
}

impl CurveSpec {
    pub fn build(&self) -> Result<ParametricCurve> {
        match self {
            CurveSpec::HardyWeinberg => Ok(ParametricCurve::HardyWeinberg),
            CurveSpec::Bezier2 { control_points } => {
                if control_points.len() != 3 {
                    return Err(Error::validation(format!(
                        "bezier2 needs 3 control points, got {}",
                        control_points.len()
                    )));
                }
                Ok(ParametricCurve::Bezier(QuadraticBezier::new(
                    control_points[0].clone(),
                    control_points[1].clone(),
                    control_points[2].clone(),
                )?))
            }
            CurveSpec::Table { rows } => Ok(ParametricCurve::Table(TabulatedCurve::new(rows)?)),
        }
    }
}

/// Numerical rank of the matrix whose rows are `grid_size` equispaced curve
/// samples: the number of singular values above `tol * sigma_max`.
pub fn minimal_subspace_dimension(curve: &ParametricCurve, grid_size: usize, tol: f64) -> Result<usize> {
    if grid_size < 10 {
        return Err(Error::validation("grid_size must be at least 10"));
    }
    let k = curve.ambient_dim();
    let mut m = DMatrix::zeros(grid_size, k);
    for i in 0..grid_size {
        let p = curve.eval(i as f64 / (grid_size - 1) as f64);
        for j in 0..k {
            m[(i, j)] = p[j];
        }
    }
    let sv = m.singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > tol * smax).count())
}
