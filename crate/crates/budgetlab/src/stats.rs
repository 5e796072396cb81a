//! Exact and asymptotic statistics used by the reports: Wilson score
//! intervals, exact paired McNemar tests, Hoeffding lower bounds, paired
//! percentile bootstrap, and RMSE.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Aligned per-question outcomes for two methods, keyed by stable ids.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PairedOutcomes {
    pub ids: Vec<String>,
    pub a: Vec<bool>,
    pub b: Vec<bool>,
}

impl PairedOutcomes {
    pub fn new(ids: Vec<String>, a: Vec<bool>, b: Vec<bool>) -> Result<Self> {
        if ids.len() != a.len() || a.len() != b.len() {
            return Err(Error::InvalidInput(format!(
                "paired outcomes misaligned: {} ids, {} A, {} B",
                ids.len(),
                a.len(),
                b.len()
            )));
        }
        Ok(Self { ids, a, b })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Questions where A is correct and B is not.
    pub fn wins_a(&self) -> usize {
        self.a.iter().zip(&self.b).filter(|(a, b)| **a && !**b).count()
    }

    /// Questions where B is correct and A is not.
    pub fn wins_b(&self) -> usize {
        self.a.iter().zip(&self.b).filter(|(a, b)| !**a && **b).count()
    }
}

/// Inverse standard-normal CDF (Wichura's algorithm AS 241, PPND16).
///
/// Rational approximations on three regions; documented maximum relative
/// error is about 2.5e-16, far inside the 1e-9 requirement for the Wilson
/// z quantile.
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "normal_quantile requires p in (0,1), got {p}");
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r
            + 6.726_577_092_700_87e4)
            * r
            + 4.592_195_393_154_987e4)
            * r
            + 1.373_169_376_550_946e4)
            * r
            + 1.971_590_950_306_551_3e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_5;
        let den = ((((((5.226_495_278_852_545e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return q * num / den;
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_8e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_8e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_ci(successes: u64, n: u64, confidence: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidInput("wilson_ci requires n >= 1".into()));
    }
    if successes > n {
        return Err(Error::InvalidInput(format!(
            "wilson_ci: successes {successes} > n {n}"
        )));
    }
    if !(0.0 < confidence && confidence < 1.0) {
        return Err(Error::InvalidInput(format!(
            "wilson_ci: confidence must be in (0,1), got {confidence}"
        )));
    }
    let z = normal_quantile(0.5 + confidence / 2.0);
    let nf = n as f64;
    let p_hat = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p_hat + z2 / (2.0 * nf)) / denom;
    let half = z * (p_hat * (1.0 - p_hat) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    Ok(((center - half).max(0.0), (center + half).min(1.0)))
}

/// Exact two-sided McNemar test on discordant pair counts.
///
/// Two-sided convention: double the smaller exact binomial tail at p=0.5
/// and cap at 1. Computed in log space so large discordant counts do not
/// underflow.
pub fn mcnemar_exact(wins_a: u64, wins_b: u64) -> Result<f64> {
    let n = wins_a + wins_b;
    if n == 0 {
        return Err(Error::InvalidInput(
            "mcnemar_exact undefined with no discordant pairs".into(),
        ));
    }
    let k = wins_a.min(wins_b);
    // ln P(X <= k) for X ~ Binomial(n, 1/2), via log-sum-exp over ln C(n,i).
    let ln_half_n = -(n as f64) * std::f64::consts::LN_2;
    let mut ln_c = 0.0_f64;
    let mut ln_terms = Vec::with_capacity(k as usize + 1);
    ln_terms.push(ln_c);
    for i in 0..k {
        ln_c += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
        ln_terms.push(ln_c);
    }
    let max = ln_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = ln_terms.iter().map(|t| (t - max).exp()).sum();
    let ln_tail = ln_half_n + max + sum.ln();
    let p = 2.0 * ln_tail.exp();
    Ok(p.min(1.0))
}

/// Hoeffding lower confidence bound on a Bernoulli mean.
pub fn hoeffding_lower(p_hat: f64, n: u64, delta: f64) -> f64 {
    assert!(n >= 1, "hoeffding_lower requires n >= 1");
    assert!(delta > 0.0 && delta < 1.0, "hoeffding_lower requires delta in (0,1)");
    (p_hat - ((1.0 / delta).ln() / (2.0 * n as f64)).sqrt()).max(0.0)
}

/// Percentile bootstrap CI (95%) on mean(A) - mean(B), in percentage points.
///
/// Resamples question indices with replacement; bit-reproducible given
/// (pairs, iterations, seed).
pub fn paired_bootstrap_diff(pairs: &PairedOutcomes, iterations: u64, seed: u64) -> Result<(f64, f64)> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("paired_bootstrap_diff on empty pairs".into()));
    }
    if iterations == 0 {
        return Err(Error::InvalidInput("paired_bootstrap_diff requires iterations >= 1".into()));
    }
    let n = pairs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let diffs_base: Vec<f64> = pairs
        .a
        .iter()
        .zip(&pairs.b)
        .map(|(a, b)| (*a as i8 - *b as i8) as f64)
        .collect();
    let mut stats = Vec::with_capacity(iterations as usize);
    for _ in 0..iterations {
        let mut acc = 0.0;
        for _ in 0..n {
            acc += diffs_base[rng.gen_range(0..n)];
        }
        stats.push(100.0 * acc / n as f64);
    }
    stats.sort_by(|a, b| a.partial_cmp(b).expect("bootstrap stats are finite"));
    let idx = |q: f64| -> usize {
        let raw = (q * iterations as f64).ceil() as usize;
        raw.saturating_sub(1).min(stats.len() - 1)
    };
    Ok((stats[idx(0.025)], stats[idx(0.975)]))
}

/// Root-mean-square difference between two equally long sequences.
pub fn rmse(predicted: &[f64], observed: &[f64]) -> Result<f64> {
    if predicted.is_empty() || predicted.len() != observed.len() {
        return Err(Error::InvalidInput(format!(
            "rmse requires equal nonempty lengths, got {} and {}",
            predicted.len(),
            observed.len()
        )));
    }
    let ssq: f64 = predicted
        .iter()
        .zip(observed)
        .map(|(p, o)| (p - o) * (p - o))
        .sum();
    Ok((ssq / predicted.len() as f64).sqrt())
}
