//! Chain-length distribution estimation from possibly right-censored
//! observations: Kaplan-Meier product-limit CDF, quantiles, and a windowed
//! hazard estimator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observed reasoning chain. `censored = true` means generation hit the
/// budget ceiling, so the true length is at least the recorded length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainObservation {
    pub length: u64,
    pub censored: bool,
}

impl ChainObservation {
    pub fn observed(length: u64) -> Self {
        ChainObservation { length, censored: false }
    }

    pub fn censored(length: u64) -> Self {
        ChainObservation { length, censored: true }
    }
}

/// Estimated CDF of the chain-length distribution: a right-continuous step
/// function with steps at death times only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    steps: Vec<CurveStep>,
    pub n_total: usize,
    pub n_censored: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveStep {
    pub t: u64,
    #[serde(rename = "F")]
    pub f: f64,
}

impl SurvivalCurve {
    /// Build a curve directly from (t, F) step pairs. Steps must be
    /// strictly increasing in t with F nondecreasing in [0, 1].
    pub fn from_steps(pairs: Vec<(u64, f64)>, n_total: usize, n_censored: usize) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidInput("survival curve needs at least one step".into()));
        }
        let mut prev_t = 0u64;
        let mut prev_f = 0.0f64;
        for (i, (t, f)) in pairs.iter().enumerate() {
            if i > 0 && *t <= prev_t {
                return Err(Error::InvalidInput(format!(
                    "curve steps must be strictly increasing in t ({prev_t} then {t})"
                )));
            }
            if *f < prev_f - 1e-12 || *f < 0.0 || *f > 1.0 + 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "curve F must be nondecreasing in [0,1], got {f} after {prev_f}"
                )));
            }
            prev_t = *t;
            prev_f = *f;
        }
        Ok(SurvivalCurve {
            steps: pairs.into_iter().map(|(t, f)| CurveStep { t, f: f.min(1.0) }).collect(),
            n_total,
            n_censored,
        })
    }

    pub fn steps(&self) -> impl ExactSizeIterator<Item = (u64, f64)> + '_ {
        self.steps.iter().map(|s| (s.t, s.f))
    }

    /// Right-continuous evaluation: F at the largest step t <= b, or 0.
    pub fn cdf_at(&self, b: u64) -> f64 {
        match self.steps.binary_search_by(|s| s.t.cmp(&b)) {
            Ok(i) => self.steps[i].f,
            Err(0) => 0.0,
            Err(i) => self.steps[i - 1].f,
        }
    }

    /// Largest F the curve attains (below 1.0 when the tail is censored).
    pub fn max_attained(&self) -> f64 {
        self.steps.last().map(|s| s.f).unwrap_or(0.0)
    }

    /// Smallest t with F(t) >= q (left-continuous generalized inverse).
    pub fn quantile(&self, q: f64) -> Result<u64> {
        if !(q > 0.0) {
            return Err(Error::InvalidInput(format!("quantile requires q > 0, got {q}")));
        }
        let max_f = self.max_attained();
        if q > max_f + 1e-12 {
            return Err(Error::QuantileOutOfRange { q, max_f });
        }
        for s in &self.steps {
            if s.f >= q - 1e-12 {
                return Ok(s.t);
            }
        }
        Err(Error::QuantileOutOfRange { q, max_f })
    }

    /// Step pairs as (t, F) tuples.
    pub fn step_pairs(&self) -> Vec<(u64, f64)> {
        self.steps.iter().map(|s| (s.t, s.f)).collect()
    }

    /// Serialize as a JSON array of {t, F} records.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.steps).expect("curve steps serialize")
    }

    /// Parse a JSON array of {t, F} records.
    pub fn from_json(json: &str) -> Result<Self> {
        let steps: Vec<CurveStep> = serde_json::from_str(json)?;
        let n = steps.len();
        Self::from_steps(steps.into_iter().map(|s| (s.t, s.f)).collect(), n, 0)
    }
}

/// Windowed per-token hazard estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardCurve {
    /// (window start t, hazard rate) points, present only for windows with
    /// a positive at-risk count and at least one death.
    pub points: Vec<(u64, f64)>,
    pub bandwidth: u64,
}

impl HazardCurve {
    /// Hazard at the window containing `t`, if defined.
    pub fn at(&self, t: u64) -> Option<f64> {
        self.points
            .iter()
            .find(|(start, _)| *start <= t && t < start.saturating_add(self.bandwidth))
            .map(|(_, h)| *h)
    }
}

/// Kaplan-Meier product-limit estimator of the chain-length CDF.
///
/// Deaths at equal times are aggregated; censoring tied with a death time
/// is processed after the death (the standard convention), so tied
/// censored observations still count in that death's risk set.
pub fn km_estimate(observations: &[ChainObservation]) -> Result<SurvivalCurve> {
    if observations.is_empty() {
        return Err(Error::InvalidInput("km_estimate on empty observations".into()));
    }
    if let Some(bad) = observations.iter().find(|o| o.length == 0) {
        return Err(Error::InvalidInput(format!("chain length must be >= 1, got {bad:?}")));
    }
    let n_total = observations.len();
    let n_censored = observations.iter().filter(|o| o.censored).count();
    if n_censored == n_total {
        return Err(Error::Unidentifiable("all observations are censored".into()));
    }

    // Sort by time; at equal times deaths come before censorings.
    let mut sorted: Vec<ChainObservation> = observations.to_vec();
    sorted.sort_by_key(|o| (o.length, o.censored));

    let mut steps: Vec<(u64, f64)> = Vec::new();
    let mut survival = 1.0f64;
    let mut at_risk = n_total as f64;
    let mut i = 0usize;
    while i < sorted.len() {
        let t = sorted[i].length;
        let mut deaths = 0usize;
        let mut censored = 0usize;
        while i < sorted.len() && sorted[i].length == t {
            if sorted[i].censored {
                censored += 1;
            } else {
                deaths += 1;
            }
            i += 1;
        }
        if deaths > 0 {
            survival *= 1.0 - deaths as f64 / at_risk;
            steps.push((t, 1.0 - survival));
        }
        at_risk -= (deaths + censored) as f64;
    }
    SurvivalCurve::from_steps(steps, n_total, n_censored)
}

/// Windowed hazard estimator on a grid of `bandwidth`-wide windows:
/// h(t) ~= deaths in [t, t+bandwidth) / (at_risk(t) * bandwidth).
/// Censored observations leave the risk set at their recorded length;
/// windows with no deaths or an empty risk set are omitted.
pub fn hazard_estimate(observations: &[ChainObservation], bandwidth: u64) -> Result<HazardCurve> {
    if bandwidth == 0 {
        return Err(Error::InvalidInput("hazard bandwidth must be >= 1".into()));
    }
    if observations.is_empty() {
        return Err(Error::InvalidInput("hazard_estimate on empty observations".into()));
    }
    let mut sorted: Vec<ChainObservation> = observations.to_vec();
    sorted.sort_by_key(|o| (o.length, o.censored));
    let max_t = sorted.last().map(|o| o.length).unwrap_or(0);

    let mut points = Vec::new();
    let mut idx = 0usize; // first observation with length >= current window
    let mut at_risk = sorted.len();
    let mut start = 0u64;
    while start <= max_t && idx < sorted.len() {
        // skip straight to the window containing the next observation
        let next_len = sorted[idx].length;
        if next_len >= start.saturating_add(bandwidth) {
            start += (next_len - start) / bandwidth * bandwidth;
        }
        let end = start.saturating_add(bandwidth);
        let mut deaths = 0usize;
        let mut j = idx;
        while j < sorted.len() && sorted[j].length < end {
            if !sorted[j].censored {
                deaths += 1;
            }
            j += 1;
        }
        if at_risk > 0 && deaths > 0 {
            let h = deaths as f64 / (at_risk as f64 * bandwidth as f64);
            points.push((start, h));
        }
        at_risk -= j - idx;
        idx = j;
        start = end;
    }
    Ok(HazardCurve { points, bandwidth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::ChainLengthLaw;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ecdf(lengths: &[u64]) -> Vec<(u64, f64)> {
        let mut sorted = lengths.to_vec();
        sorted.sort_unstable();
        let n = sorted.len() as f64;
        let mut out: Vec<(u64, f64)> = Vec::new();
        let mut seen = 0usize;
        let mut i = 0usize;
        while i < sorted.len() {
            let t = sorted[i];
            while i < sorted.len() && sorted[i] == t {
                seen += 1;
                i += 1;
            }
            out.push((t, seen as f64 / n));
        }
        out
    }

    #[test]
    fn km_without_censoring_is_ecdf_bit_exact() {
        let lengths = [50u64, 60, 70, 60, 90, 50, 55];
        let obs: Vec<ChainObservation> =
            lengths.iter().map(|&l| ChainObservation::observed(l)).collect();
        let curve = km_estimate(&obs).unwrap();
        assert_eq!(curve.step_pairs(), ecdf(&lengths));
    }

    #[test]
    fn km_hand_worked_censored_case() {
        // {(100, uncensored), (200, censored)}: F(100) = 1/2, flat after.
        let obs = [ChainObservation::observed(100), ChainObservation::censored(200)];
        let curve = km_estimate(&obs).unwrap();
        assert_eq!(curve.step_pairs(), vec![(100, 0.5)]);
        assert_abs_diff_eq!(curve.cdf_at(100), 0.5);
        assert_abs_diff_eq!(curve.cdf_at(10_000), 0.5);
        assert_eq!(curve.n_censored, 1);
    }

    #[test]
    fn km_three_uncensored() {
        let obs = [
            ChainObservation::observed(50),
            ChainObservation::observed(60),
            ChainObservation::observed(70),
        ];
        let curve = km_estimate(&obs).unwrap();
        let steps = curve.step_pairs();
        assert_abs_diff_eq!(steps[0].1, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(steps[1].1, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(steps[2].1, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn km_death_before_censor_at_tie() {
        // tied death+censor at t=100: the censored one is still at risk
        // for the death, so F(100) = 1/3 with n=3.
        let obs = [
            ChainObservation::observed(100),
            ChainObservation::censored(100),
            ChainObservation::observed(200),
        ];
        let curve = km_estimate(&obs).unwrap();
        let steps = curve.step_pairs();
        assert_abs_diff_eq!(steps[0].1, 1.0 / 3.0, epsilon = 1e-15);
        // risk set at 200 is the single remaining observation
        assert_abs_diff_eq!(steps[1].1, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn km_rejects_degenerate_inputs() {
        assert!(km_estimate(&[]).is_err());
        let all_censored = [ChainObservation::censored(10), ChainObservation::censored(20)];
        assert!(matches!(km_estimate(&all_censored), Err(Error::Unidentifiable(_))));
        assert!(km_estimate(&[ChainObservation::observed(0)]).is_err());
    }

    #[test]
    fn delaying_a_censored_tail_never_changes_f_below_it() {
        // Moving a censored observation from time c to any later time
        // leaves F unchanged below c: it was in every earlier risk set
        // either way.
        let mut obs: Vec<ChainObservation> =
            (1..=50).map(|i| ChainObservation::observed(i * 10)).collect();
        obs.push(ChainObservation::censored(250));
        let before = km_estimate(&obs).unwrap();
        *obs.last_mut().unwrap() = ChainObservation::censored(10_000);
        let after = km_estimate(&obs).unwrap();
        for (t, f) in before.step_pairs() {
            if t < 250 {
                assert_abs_diff_eq!(after.cdf_at(t), f, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn censored_observations_create_no_steps() {
        let mut obs = vec![ChainObservation::observed(100), ChainObservation::observed(300)];
        obs.extend((0..10).map(|_| ChainObservation::censored(500)));
        let curve = km_estimate(&obs).unwrap();
        assert_eq!(curve.step_pairs().len(), 2);
        assert!(curve.max_attained() < 1.0);
    }

    #[test]
    fn quantile_step_semantics() {
        let curve =
            SurvivalCurve::from_steps(vec![(100, 0.25), (200, 0.5), (300, 1.0)], 4, 0).unwrap();
        assert_eq!(curve.quantile(0.5).unwrap(), 200);
        assert_eq!(curve.quantile(0.6).unwrap(), 300);
        assert_eq!(curve.quantile(0.25).unwrap(), 100);
        assert_eq!(curve.quantile(1.0).unwrap(), 300);
        assert!(curve.quantile(0.0).is_err());
        let censored_ceiling = SurvivalCurve::from_steps(vec![(100, 0.4)], 10, 6).unwrap();
        assert!(matches!(
            censored_ceiling.quantile(0.9),
            Err(Error::QuantileOutOfRange { .. })
        ));
    }

    #[test]
    fn cdf_at_below_first_step_is_zero() {
        let curve = SurvivalCurve::from_steps(vec![(100, 1.0)], 1, 0).unwrap();
        assert_eq!(curve.cdf_at(0), 0.0);
        assert_eq!(curve.cdf_at(99), 0.0);
        assert_eq!(curve.cdf_at(100), 1.0);
    }

    #[test]
    fn quantile_monotone_and_inverse_bound() {
        let curve = SurvivalCurve::from_steps(
            vec![(10, 0.1), (20, 0.35), (40, 0.8), (80, 1.0)],
            20,
            0,
        )
        .unwrap();
        let mut prev = 0;
        for q in [0.05, 0.1, 0.3, 0.35, 0.5, 0.8, 0.99, 1.0] {
            let t = curve.quantile(q).unwrap();
            assert!(t >= prev, "quantile must be nondecreasing in q");
            prev = t;
        }
        for (t, _) in curve.step_pairs() {
            let f = curve.cdf_at(t);
            assert!(curve.quantile(f).unwrap() <= t);
        }
    }

    #[test]
    fn km_recovers_analytic_lognormal_quantile() {
        let law = ChainLengthLaw::Lognormal { mu: 6.2, sigma: 0.45 };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let obs: Vec<ChainObservation> = (0..100_000)
            .map(|_| ChainObservation::observed(law.sample_tokens(rng.gen_range(1e-12..1.0))))
            .collect();
        let curve = km_estimate(&obs).unwrap();
        let q90 = curve.quantile(0.9).unwrap() as f64;
        let analytic = law.quantile(0.9);
        assert!(
            (q90 - analytic).abs() / analytic < 0.02,
            "q90 {q90} vs analytic {analytic}"
        );
    }

    #[test]
    fn hazard_single_death_definition() {
        let mut obs = vec![ChainObservation::observed(100)];
        obs.extend((0..99).map(|_| ChainObservation::censored(1_000)));
        let hz = hazard_estimate(&obs, 10).unwrap();
        let h = hz.at(100).unwrap();
        assert_abs_diff_eq!(h, 1.0 / (100.0 * 10.0), epsilon = 1e-15);
    }

    #[test]
    fn hazard_flat_for_exponential() {
        // exponential = Weibull shape 1; lambda = 1/scale
        let law = ChainLengthLaw::Weibull { shape: 1.0, scale: 1000.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let obs: Vec<ChainObservation> = (0..100_000)
            .map(|_| ChainObservation::observed(law.sample_tokens(rng.gen_range(1e-12..1.0))))
            .collect();
        let hz = hazard_estimate(&obs, 100).unwrap();
        let (q10, q90) = (law.quantile(0.1), law.quantile(0.9));
        let lambda = 1.0 / 1000.0;
        let mut checked = 0;
        for (t, h) in &hz.points {
            let t = *t as f64;
            if t >= q10 && t + 100.0 <= q90 {
                assert!(
                    (h - lambda).abs() / lambda < 0.10,
                    "hazard {h} at t={t} deviates >10% from {lambda}"
                );
                checked += 1;
            }
        }
        assert!(checked >= 5, "expected several central windows, got {checked}");
    }

    #[test]
    fn hazard_nonincreasing_for_pareto() {
        let law = ChainLengthLaw::Pareto { alpha: 1.5, x_m: 200.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let obs: Vec<ChainObservation> = (0..100_000)
            .map(|_| ChainObservation::observed(law.sample_tokens(rng.gen_range(1e-12..1.0))))
            .collect();
        let hz = hazard_estimate(&obs, 200).unwrap();
        let (q10, q90) = (law.quantile(0.1), law.quantile(0.9));
        let central: Vec<(u64, f64)> = hz
            .points
            .iter()
            .filter(|(t, _)| (*t as f64) >= q10 && (*t as f64) <= q90)
            .cloned()
            .collect();
        assert!(central.len() >= 3);
        // monotone trend within sampling noise: compare first vs last third
        let third = central.len() / 3;
        let head: f64 = central[..third].iter().map(|(_, h)| h).sum::<f64>() / third as f64;
        let tail: f64 =
            central[central.len() - third..].iter().map(|(_, h)| h).sum::<f64>() / third as f64;
        assert!(tail < head, "Pareto hazard should decrease: head {head}, tail {tail}");
    }

    #[test]
    fn curve_json_round_trip() {
        let curve =
            SurvivalCurve::from_steps(vec![(100, 0.25), (200, 0.5), (300, 1.0)], 4, 0).unwrap();
        let json = curve.to_json();
        assert!(json.contains("\"t\":100") && json.contains("\"F\":0.25"));
        let back = SurvivalCurve::from_json(&json).unwrap();
        assert_eq!(back.step_pairs(), curve.step_pairs());
    }
}
