//! Underlying distributions on the unit interval and the special functions
//! the Beta family needs.

use rand::Rng as _;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Lower edge of the admissible parameter box for each Beta shape.
pub const THETA_MIN: f64 = 1e-3;
/// Upper edge of the admissible parameter box for each Beta shape.
pub const THETA_MAX: f64 = 1e3;

/// Shape parameters `(a, b)` of a Beta distribution, restricted to the box
/// `[THETA_MIN, THETA_MAX]^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub a: f64,
    pub b: f64,
}

impl BetaParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        let p = BetaParams { a, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("b", self.b)] {
            if !v.is_finite() || !(THETA_MIN..=THETA_MAX).contains(&v) {
                return Err(Error::validation(format!(
                    "beta parameter {name}={v} outside [{THETA_MIN}, {THETA_MAX}]"
                )));
            }
        }
        Ok(())
    }

    /// Projects onto the parameter box.
    pub fn clamped(a: f64, b: f64) -> Self {
        BetaParams {
            a: a.clamp(THETA_MIN, THETA_MAX),
            b: b.clamp(THETA_MIN, THETA_MAX),
        }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.a, self.b]
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    pub fn variance(&self) -> f64 {
        let s = self.a + self.b;
        self.a * self.b / (s * s * (s + 1.0))
    }

    pub fn ln_beta_fn(&self) -> f64 {
        ln_gamma(self.a) + ln_gamma(self.b) - ln_gamma(self.a + self.b)
    }

    /// Log density at an interior point `y` in (0, 1).
    pub fn ln_pdf(&self, y: f64) -> f64 {
        (self.a - 1.0) * y.ln() + (self.b - 1.0) * (-y).ln_1p() - self.ln_beta_fn()
    }

    /// Per-observation Fisher information matrix.
    pub fn fisher_information(&self) -> [[f64; 2]; 2] {
        let t_ab = trigamma(self.a + self.b);
        [
            [trigamma(self.a) - t_ab, -t_ab],
            [-t_ab, trigamma(self.b) - t_ab],
        ]
    }
}

impl std::fmt::Display for BetaParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Beta({}, {})", self.a, self.b)
    }
}

/// Distribution `G` of the curve parameter of each vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Underlying {
    Beta(BetaParams),
    /// Finitely many atoms; the resulting graph is a stochastic block model.
    Discrete { points: Vec<f64>, weights: Vec<f64> },
    /// Resampling with replacement from observed values.
    Empirical { values: Vec<f64> },
}

impl Underlying {
    pub fn point_mass(t: f64) -> Self {
        Underlying::Discrete {
            points: vec![t],
            weights: vec![1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: &f64| (0.0..=1.0).contains(v);
        match self {
            Underlying::Beta(p) => p.validate(),
            Underlying::Discrete { points, weights } => {
                if points.is_empty() || points.len() != weights.len() {
                    return Err(Error::validation(
                        "discrete distribution needs matching, nonempty points and weights",
                    ));
                }
                if !points.iter().all(in_unit) {
                    return Err(Error::validation("discrete atoms must lie in [0, 1]"));
                }
                if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
                    return Err(Error::validation("discrete weights must be nonnegative"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::validation(format!(
                        "discrete weights sum to {total}, expected 1"
                    )));
                }
                Ok(())
            }
            Underlying::Empirical { values } => {
                if values.is_empty() || !values.iter().all(in_unit) {
                    return Err(Error::validation(
                        "empirical distribution needs nonempty values in [0, 1]",
                    ));
                }
                Ok(())
            }
        }
    }

    /// Draws `n` i.i.d. values.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Result<Vec<f64>> {
        self.validate()?;
        match self {
            Underlying::Beta(p) => {
                let dist = Beta::new(p.a, p.b)
                    .map_err(|e| Error::validation(format!("beta distribution: {e}")))?;
                Ok((0..n).map(|_| dist.sample(rng)).collect())
            }
            Underlying::Discrete { points, weights } => {
                let cum = cumulative(weights);
                Ok((0..n)
                    .map(|_| points[categorical(&cum, rng.random::<f64>())])
                    .collect())
            }
            Underlying::Empirical { values } => Ok((0..n)
                .map(|_| values[rng.random_range(0..values.len())])
                .collect()),
        }
    }
}

pub(crate) fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

/// Index of the first cumulative weight exceeding `u`.
pub(crate) fn categorical(cum: &[f64], u: f64) -> usize {
    let total = *cum.last().expect("nonempty weights");
    let target = u * total;
    cum.iter()
        .position(|&c| target < c)
        .unwrap_or(cum.len() - 1)
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

pub fn digamma(x: f64) -> f64 {
    statrs::function::gamma::digamma(x)
}

/// Trigamma function for `x > 0`: upward recurrence to `x >= 12`, then the
/// asymptotic Bernoulli series through `x^-13`.
pub fn trigamma(mut x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut acc = 0.0;
    while x < 12.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let r = 1.0 / x;
    let r2 = r * r;
    let series = r2
        * (1.0 / 6.0
            + r2 * (-1.0 / 30.0
                + r2 * (1.0 / 42.0 + r2 * (-1.0 / 30.0 + r2 * (5.0 / 66.0 - r2 * 691.0 / 2730.0)))));
    acc + r + 0.5 * r2 + r * series
}
