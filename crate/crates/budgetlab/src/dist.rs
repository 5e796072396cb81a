//! Chain-length distribution laws: analytic CDF/quantile for the
//! continuous families and step lookup for empirical curves. The simulator
//! draws lengths by pushing one uniform through `quantile`, which is what
//! keeps a question's length identical across budgets.

use serde::{Deserialize, Serialize};

use crate::chainstats::SurvivalCurve;
use crate::stats::normal_quantile;

/// A chain-length law with positive support.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ChainLengthLaw {
    Lognormal { mu: f64, sigma: f64 },
    Weibull { shape: f64, scale: f64 },
    Pareto { alpha: f64, x_m: f64 },
    Empirical { curve: SurvivalCurve },
}

impl ChainLengthLaw {
    /// CDF at `t` (token count).
    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            ChainLengthLaw::Lognormal { mu, sigma } => normal_cdf((t.ln() - mu) / sigma),
            ChainLengthLaw::Weibull { shape, scale } => 1.0 - (-(t / scale).powf(*shape)).exp(),
            ChainLengthLaw::Pareto { alpha, x_m } => {
                if t < *x_m {
                    0.0
                } else {
                    1.0 - (x_m / t).powf(*alpha)
                }
            }
            ChainLengthLaw::Empirical { curve } => curve.cdf_at(t.floor() as u64),
        }
    }

    /// Quantile (generalized inverse CDF) at `u` in (0,1).
    pub fn quantile(&self, u: f64) -> f64 {
        assert!(u > 0.0 && u < 1.0, "quantile requires u in (0,1)");
        match self {
            ChainLengthLaw::Lognormal { mu, sigma } => (mu + sigma * normal_quantile(u)).exp(),
            ChainLengthLaw::Weibull { shape, scale } => scale * (-(1.0 - u).ln()).powf(1.0 / shape),
            ChainLengthLaw::Pareto { alpha, x_m } => x_m * (1.0 - u).powf(-1.0 / alpha),
            ChainLengthLaw::Empirical { curve } => {
                // smallest step t with F(t) >= u; u above the attained
                // maximum maps to the last step.
                for (t, f) in curve.steps() {
                    if *f >= u {
                        return *t as f64;
                    }
                }
                curve.steps().last().map(|(t, _)| *t as f64).unwrap_or(1.0)
            }
        }
    }

    /// Draw an integer token count (>= 1) from one uniform.
    pub fn sample_tokens(&self, u: f64) -> u64 {
        (self.quantile(u).ceil() as u64).max(1)
    }

    /// Analytic hazard rate f(t)/(1-F(t)) for the continuous families.
    /// Returns `None` for empirical curves.
    pub fn hazard(&self, t: f64) -> Option<f64> {
        match self {
            ChainLengthLaw::Lognormal { mu, sigma } => {
                let z = (t.ln() - mu) / sigma;
                let pdf = (-0.5 * z * z).exp() / (t * sigma * (2.0 * std::f64::consts::PI).sqrt());
                let surv = 1.0 - normal_cdf(z);
                (surv > 0.0).then(|| pdf / surv)
            }
            ChainLengthLaw::Weibull { shape, scale } => {
                Some(shape / scale * (t / scale).powf(shape - 1.0))
            }
            ChainLengthLaw::Pareto { alpha, x_m } => (t >= *x_m).then(|| alpha / t),
            ChainLengthLaw::Empirical { .. } => None,
        }
    }
}

/// Standard normal CDF via the complementary error function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Complementary error function (W. J. Cody-style rational approximation,
/// absolute error below 1.2e-7 — ample for the oracle comparisons here).
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}
