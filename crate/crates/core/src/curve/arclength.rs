use serde::{Deserialize, Serialize};

use super::parametric::{CurveMap, ParametricCurve};
use super::quadrature::{adaptive_simpson, gauss_legendre8};
use crate::error::{Error, Result};
use crate::graph::{validate_inner_product, InnerProductReport, LatentPositionMatrix};

/// Number of segments in the cumulative arclength table.
const TABLE_SEGMENTS: usize = 1024;
/// Coarse projection grid size.
pub const PROJECTION_GRID: usize = 1024;
/// Golden-section stopping width in the base parameter.
const GOLDEN_TOL: f64 = 1e-11;
/// Default distance tolerance accepted by [`ArclengthCurve::pullback`].
pub const PULLBACK_TOL: f64 = 1e-6;

/// Tubular neighborhood radii `0 < r1 < r2 < r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TubeConfig {
    pub r1: f64,
    pub r2: f64,
    pub r: f64,
}

impl TubeConfig {
    pub fn new(r1: f64, r2: f64, r: f64) -> Result<Self> {
        if !(0.0 < r1 && r1 < r2 && r2 < r) || !r.is_finite() {
            return Err(Error::validation(format!(
                "tube radii must satisfy 0 < r1 < r2 < r, got ({r1}, {r2}, {r})"
            )));
        }
        Ok(TubeConfig { r1, r2, r })
    }

    /// `r` is half the smallest radius of curvature on a parameter grid,
    /// capped at half the curve length; `r1 = r/2`, `r2 = 0.8 r`.
    pub fn for_curve(curve: &ParametricCurve, length: f64) -> Self {
        let max_curv = (0..=512)
            .map(|i| curve.curvature(i as f64 / 512.0))
            .fold(0.0, f64::max);
        let r = if max_curv > 0.0 {
            (0.5 / max_curv).min(0.5 * length)
        } else {
            0.5 * length
        };
        TubeConfig {
            r1: 0.5 * r,
            r2: 0.8 * r,
            r,
        }
    }
}

/// Nearest point on a curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub point: Vec<f64>,
    /// Normalized arclength of `point`.
    pub s: f64,
    pub distance: f64,
    /// Set when `distance` exceeds the tube radius `r2`.
    pub outside_tube: bool,
}

/// Unit-speed reparameterization `p: [0, 1] -> C` of a parametric curve,
/// with `s` the fraction of total arclength.
#[derive(Debug, Clone)]
pub struct ArclengthCurve {
    base: ParametricCurve,
    t_grid: Vec<f64>,
    cum: Vec<f64>,
    length: f64,
    reversed: bool,
    tube: TubeConfig,
    // coarse projection grid, base parameter and points at s = k / M
    probe_t: Vec<f64>,
    probe_points: Vec<f64>,
}

impl ArclengthCurve {
    /// Builds the cumulative length table by adaptive Simpson quadrature of
    /// `|g'(t)|` on 1024 uniform segments with total tolerance `tol`.
    pub fn new(base: ParametricCurve, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::validation("arclength tolerance must be positive"));
        }
        for i in 0..=TABLE_SEGMENTS {
            let t = i as f64 / TABLE_SEGMENTS as f64;
            if !(base.speed(t) > 1e-12) {
                return Err(Error::validation(format!(
                    "curve is not regular: zero speed at t={t}"
                )));
            }
        }
        let t_grid: Vec<f64> = (0..=TABLE_SEGMENTS).map(|i| i as f64 / TABLE_SEGMENTS as f64).collect();
        let seg_tol = tol / TABLE_SEGMENTS as f64;
        let mut cum = Vec::with_capacity(t_grid.len());
        cum.push(0.0);
        let speed = |t: f64| base.speed(t);
        for w in t_grid.windows(2) {
            let prev = *cum.last().unwrap();
            cum.push(prev + adaptive_simpson(&speed, w[0], w[1], seg_tol));
        }
        let length = *cum.last().unwrap();
        if cum.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::numerical("cumulative arclength table not increasing"));
        }
        let tube = TubeConfig::for_curve(&base, length);
        let mut curve = ArclengthCurve {
            base,
            t_grid,
            cum,
            length,
            reversed: false,
            tube,
            probe_t: Vec::new(),
            probe_points: Vec::new(),
        };
        curve.build_probe();
        Ok(curve)
    }

    fn build_probe(&mut self) {
        let d = self.ambient_dim();
        self.probe_t = (0..=PROJECTION_GRID)
            .map(|k| self.base_param(k as f64 / PROJECTION_GRID as f64))
            .collect();
        self.probe_points = vec![0.0; (PROJECTION_GRID + 1) * d];
        for (k, &t) in self.probe_t.iter().enumerate() {
            self.base.eval_into(t, &mut self.probe_points[k * d..(k + 1) * d]);
        }
    }

    pub fn base(&self) -> &ParametricCurve {
        &self.base
    }

    pub fn ambient_dim(&self) -> usize {
        self.base.ambient_dim()
    }

    /// Total length `L` of the curve.
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn is_reversed(&self) -> bool {
        self.reversed
    }

    pub fn tube(&self) -> &TubeConfig {
        &self.tube
    }

    pub fn with_tube(mut self, tube: TubeConfig) -> Self {
        self.tube = tube;
        self
    }

    /// Arclength from `t = 0` to base parameter `t` (unnormalized).
    fn length_to(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        let k = ((t * TABLE_SEGMENTS as f64) as usize).min(TABLE_SEGMENTS - 1);
        let t0 = self.t_grid[k];
        if t == t0 {
            return self.cum[k];
        }
        self.cum[k] + gauss_legendre8(&|u: f64| self.base.speed(u), t0, t)
    }

    /// Normalized arclength of base parameter `t`, in the curve's orientation.
    pub fn s_of_t(&self, t: f64) -> f64 {
        let s = (self.length_to(t) / self.length).clamp(0.0, 1.0);
        if self.reversed {
            1.0 - s
        } else {
            s
        }
    }

    /// Base parameter at normalized arclength `s` (orientation applied).
    pub fn base_param(&self, s: f64) -> f64 {
        let s = if self.reversed { 1.0 - s } else { s };
        if s <= 0.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return 1.0;
        }
        let target = s * self.length;
        let k = (self.cum.partition_point(|&c| c <= target) - 1).min(TABLE_SEGMENTS - 1);
        let (mut lo, mut hi) = (self.t_grid[k], self.t_grid[k + 1]);
        let (c_lo, c_hi) = (self.cum[k], self.cum[k + 1]);
        let mut t = lo + (hi - lo) * (target - c_lo) / (c_hi - c_lo);
        for _ in 0..60 {
            let f = self.length_to(t) - target;
            if f.abs() <= 1e-15 * self.length {
                break;
            }
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let newton = t - f / self.base.speed(t);
            t = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-16 {
                break;
            }
        }
        t
    }

    /// `p(s)`.
    pub fn point(&self, s: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::validation(format!("arclength parameter {s} outside [0, 1]")));
        }
        Ok(self.base.eval(self.base_param(s)))
    }

    /// Curve with the opposite orientation, `p'(s) = p(1 - s)`.
    pub fn reversed(&self) -> Self {
        let mut out = self.clone();
        out.reversed = !self.reversed;
        let d = self.ambient_dim();
        out.probe_t.reverse();
        let m = PROJECTION_GRID + 1;
        out.probe_points = (0..m)
            .flat_map(|k| self.probe_points[(m - 1 - k) * d..(m - k) * d].iter().copied())
            .collect();
        out
    }

    /// Nearest point on the curve: best of the 1025-point grid in `s`
    /// (smallest `s` on ties), refined by golden-section search over the
    /// neighboring grid cells.
    pub fn project(&self, x: &[f64]) -> Projection {
        let d = self.ambient_dim();
        debug_assert_eq!(x.len(), d);
        let mut best = (f64::INFINITY, 0usize);
        for (k, p) in self.probe_points.chunks(d).enumerate() {
            let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 < best.0 {
                best = (d2, k);
            }
        }
        let k = best.1;
        let ta = self.probe_t[k.saturating_sub(1)];
        let tb = self.probe_t[(k + 1).min(PROJECTION_GRID)];
        let (lo, hi) = if ta <= tb { (ta, tb) } else { (tb, ta) };
        let mut buf = vec![0.0; d];
        let mut dist2 = |t: f64| {
            self.base.eval_into(t, &mut buf);
            buf.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        };
        let (t_star, d_star) = golden_section(&mut dist2, lo, hi, GOLDEN_TOL);
        let (t_best, d_best) = if d_star <= best.0 {
            (t_star, d_star)
        } else {
            (self.probe_t[k], best.0)
        };
        let point = self.base.eval(t_best);
        let distance = d_best.sqrt();
        Projection {
            point,
            s: self.s_of_t(t_best),
            distance,
            outside_tube: distance > self.tube.r2,
        }
    }

    /// `p^{-1}(x)` for a point within `tol` of the curve.
    pub fn pullback(&self, x: &[f64], tol: f64) -> Result<f64> {
        if x.len() != self.ambient_dim() {
            return Err(Error::validation("point dimension differs from curve dimension"));
        }
        let proj = self.project(x);
        if proj.distance > tol {
            return Err(Error::validation(format!(
                "point is {:.3e} from the curve, beyond tolerance {tol:.1e}",
                proj.distance
            )));
        }
        Ok(proj.s)
    }

    /// Inner-product check on `grid + 1` equispaced curve points.
    pub fn inner_product_check(&self, grid: usize) -> InnerProductReport {
        let d = self.ambient_dim();
        let data: Vec<f64> = (0..=grid)
            .flat_map(|k| self.base.eval(k as f64 / grid as f64))
            .collect();
        match LatentPositionMatrix::new(grid + 1, d, data) {
            Ok(x) => validate_inner_product(&x),
            Err(_) => InnerProductReport {
                ok: false,
                worst_pair: None,
                worst_value: None,
            },
        }
    }

    /// `count` points equally spaced in arclength, for plotting.
    pub fn polyline(&self, count: usize) -> Vec<Vec<f64>> {
        let denom = (count.max(2) - 1) as f64;
        (0..count)
            .map(|i| self.base.eval(self.base_param(i as f64 / denom)))
            .collect()
    }
}

fn golden_section<F: FnMut(f64) -> f64>(f: &mut F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    // include the bracket ends so endpoint minima are exact
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    for t in [a, b] {
        let v = f(t);
        if v < best.1 {
            best = (t, v);
        }
    }
    best
}
