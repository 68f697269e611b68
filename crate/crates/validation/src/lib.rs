//! Independent reference computations for the acceptance checks. Nothing
//! here calls into `lsgraph`.

use rand::seq::SliceRandom;
use rand::Rng;

/// Hardy-Weinberg point `(t^2, 2t(1-t), (1-t)^2)`.
pub fn hw_point(t: f64) -> [f64; 3] {
    [t * t, 2.0 * t * (1.0 - t), (1.0 - t) * (1.0 - t)]
}

/// Arclength of the Hardy-Weinberg curve from 0 to `t`, in closed form.
///
/// The speed is `sqrt(8) sqrt(3 u^2 + 1/4)` with `u = t - 1/2`, whose
/// antiderivative is elementary.
pub fn hw_arclength(t: f64) -> f64 {
    let a2 = 1.0 / 12.0;
    let prim = |u: f64| {
        let r = (u * u + a2).sqrt();
        0.5 * u * r + 0.5 * a2 * (u + r).ln()
    };
    8f64.sqrt() * 3f64.sqrt() * (prim(t - 0.5) - prim(-0.5))
}

/// Normalized arclength of the grid point nearest to `x`, scanning `grid + 1`
/// equally spaced native parameters.
pub fn hw_brute_force_projection(x: &[f64; 3], grid: usize) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..=grid {
        let t = k as f64 / grid as f64;
        let p = hw_point(t);
        let d2 = (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2) + (p[2] - x[2]).powi(2);
        if d2 < best.0 {
            best = (d2, t);
        }
    }
    hw_arclength(best.1) / hw_arclength(1.0)
}

/// Two-sample KS statistic by direct ECDF evaluation at every pooled value,
/// returned as `(max |c1 m - c2 n|, n m)`.
pub fn ks_brute_force(y1: &[f64], y2: &[f64]) -> (u64, u64) {
    let (n, m) = (y1.len() as i64, y2.len() as i64);
    let mut best = 0u64;
    for &v in y1.iter().chain(y2) {
        let c1 = y1.iter().filter(|&&y| y <= v).count() as i64;
        let c2 = y2.iter().filter(|&&y| y <= v).count() as i64;
        best = best.max((c1 * m - c2 * n).unsigned_abs());
    }
    (best, (n * m) as u64)
}

/// Monte Carlo estimate of `P(D >= d_num / size)` for two samples of equal
/// `size` under the null, from uniformly random label interleavings.
pub fn ks_tail_monte_carlo<R: Rng>(size: usize, d_num: usize, draws: usize, rng: &mut R) -> f64 {
    let mut labels: Vec<bool> = (0..2 * size).map(|i| i < size).collect();
    let mut hits = 0usize;
    for _ in 0..draws {
        labels.shuffle(rng);
        let mut walk = 0i64;
        let mut peak = 0i64;
        for &first in &labels {
            walk += if first { 1 } else { -1 };
            peak = peak.max(walk.abs());
        }
        if peak as usize >= d_num {
            hits += 1;
        }
    }
    hits as f64 / draws as f64
}

/// Sample covariance (divisor `len - 1`) of equal-length rows.
pub fn sample_covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = rows[0].len();
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..d).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n).collect();
    let mut cov = vec![vec![0.0; d]; d];
    for r in rows {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    for row in &mut cov {
        for v in row {
            *v /= n - 1.0;
        }
    }
    cov
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}
