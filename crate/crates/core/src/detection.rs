//! Planted-versus-null tests: the normalized minimum residual and the
//! linear correlation statistic, plus Monte Carlo risk.

use serde::{Deserialize, Serialize};

use crate::combinatorics::{enumerate_supports, ln_choose};
use crate::error::{Error, Result};
use crate::estimators::residual_profile;
use crate::model::{sample_null, sample_planted, Instance, ModelParams, Seed};
use crate::numeric::run_trials;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    ResidualRatio,
    LinearCorr,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub threshold: f64,
    pub decide_planted: bool,
    pub rule: Rule,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub type1: f64,
    pub type2: f64,
    pub sum: f64,
    pub se: f64,
    pub trials_per_model: usize,
}

/// min over supports of ‖Y - X beta'‖² / ‖Y‖².
pub fn residual_ratio_stat(inst: &Instance, params: &ModelParams) -> Result<f64> {
    inst.check_shape(params)?;
    let y2: f64 = inst.y().iter().map(|y| y * y).sum();
    if inst.n() == 0 || y2 == 0.0 {
        return Err(Error::ZeroObservation);
    }
    let profile = residual_profile(inst, params.k)?;
    let min = profile.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(min / y2)
}

/// 1 / ((1 - alpha/2)(1 + k/sigma2)).
pub fn residual_threshold(params: &ModelParams, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::OutOfRange(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(1.0 / ((1.0 - alpha / 2.0) * (1.0 + params.snr())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleCondition {
    /// log n - (2/n) log C(p,k).
    pub growth: f64,
    pub cond1: bool,
    /// 2 log C(p,k) / (log(1 + k/sigma2) + log(1 - alpha)).
    pub required_n: f64,
    pub cond2: bool,
}

pub const DEFAULT_GROWTH_SLACK: f64 = 1.0;

/// The two sample-size conditions under which the residual test succeeds.
pub fn detection_sample_condition(params: &ModelParams, alpha: f64, slack: f64) -> Result<SampleCondition> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let denom = params.snr().ln_1p() + (-alpha).ln_1p();
    if denom <= 0.0 {
        return Err(Error::InvalidAlpha(alpha));
    }
    let lc = ln_choose(params.p, params.k);
    let n = params.n as f64;
    let growth = if params.n == 0 { f64::NEG_INFINITY } else { n.ln() - 2.0 * lc / n };
    let required_n = 2.0 * lc / denom;
    Ok(SampleCondition {
        growth,
        cond1: growth >= slack,
        required_n,
        cond2: n >= required_n,
    })
}

/// <Y, X beta_bar> with beta_bar = (k/p) 1.
pub fn linear_stat(inst: &Instance, params: &ModelParams) -> Result<f64> {
    inst.check_shape(params)?;
    let x = inst.x();
    let dot: f64 = inst
        .y()
        .iter()
        .enumerate()
        .map(|(i, &y)| y * x.row(i).iter().sum::<f64>())
        .sum();
    Ok(dot * params.k as f64 / params.p as f64)
}

pub fn run_test(inst: &Instance, params: &ModelParams, rule: Rule, alpha: f64) -> Result<TestOutcome> {
    match rule {
        Rule::ResidualRatio => {
            let threshold = residual_threshold(params, alpha)?;
            let statistic = residual_ratio_stat(inst, params)?;
            Ok(TestOutcome { statistic, threshold, decide_planted: statistic < threshold, rule })
        }
        Rule::LinearCorr => {
            let statistic = linear_stat(inst, params)?;
            Ok(TestOutcome { statistic, threshold: 0.0, decide_planted: statistic >= 0.0, rule })
        }
    }
}

/// Type-I error (planted draws called null) plus Type-II error (null draws
/// at `params.lambda` called planted).
pub fn test_risk_mc(params: &ModelParams, rule: Rule, alpha: f64, trials: usize, seed: Seed) -> Result<RiskReport> {
    if trials < 100 {
        return Err(Error::Precondition(format!("test_risk_mc needs at least 100 trials, got {trials}")));
    }
    if rule == Rule::ResidualRatio {
        residual_threshold(params, alpha)?;
        enumerate_supports(params.p, params.k)?;
        if params.n == 0 {
            return Err(Error::ZeroObservation);
        }
    }
    let planted = seed.derive(0x5450_4c4e);
    let null = seed.derive(0x544e_554c);
    let [miss] = run_trials(trials, |t| {
        let inst = sample_planted(params, planted.trial(t));
        Ok([if run_test(&inst, params, rule, alpha)?.decide_planted { 0.0 } else { 1.0 }])
    })?;
    let [false_alarm] = run_trials(trials, |t| {
        let inst = sample_null(params, null.trial(t));
        Ok([if run_test(&inst, params, rule, alpha)?.decide_planted { 1.0 } else { 0.0 }])
    })?;
    let (t1, t2) = (miss.mean, false_alarm.mean);
    let m = trials as f64;
    Ok(RiskReport {
        type1: t1,
        type2: t2,
        sum: t1 + t2,
        se: (t1 * (1.0 - t1) / m + t2 * (1.0 - t2) / m).sqrt(),
        trials_per_model: trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{mle_with_residual, residual};
    use crate::model::{Matrix, Origin};

    #[test]
    fn residual_stat_perfect_fit() {
        let params = ModelParams::new(6, 2, 1.0, 3).unwrap();
        let planted = sample_planted(&params, Seed::new(1));
        let y = planted.x().mul_support(&[1, 4]);
        let inst = Instance::new(planted.x().clone(), y, None, Origin::Null).unwrap();
        assert_eq!(residual_ratio_stat(&inst, &params).unwrap(), 0.0);
    }

    #[test]
    fn residual_stat_brute_force() {
        let x = Matrix::from_rows(
            &[
                vec![0.3, -1.2, 0.8, 2.0, -0.4, 1.1],
                vec![1.5, 0.2, -0.7, 0.0, 0.9, -1.3],
                vec![-0.6, 0.4, 1.9, -1.0, 0.5, 0.7],
            ],
            6,
        )
        .unwrap();
        let y = vec![1.0, -0.5, 2.2];
        let inst = Instance::new(x, y.clone(), None, Origin::Null).unwrap();
        let params = ModelParams::new(6, 2, 1.0, 3).unwrap();
        let mut best = f64::INFINITY;
        for a in 0..6 {
            for b in a + 1..6 {
                best = best.min(residual(&inst, &[a, b]));
            }
        }
        let y2: f64 = y.iter().map(|v| v * v).sum();
        let stat = residual_ratio_stat(&inst, &params).unwrap();
        assert_eq!(stat, best / y2);
        let (_, r) = mle_with_residual(&inst, &params).unwrap();
        assert_eq!(stat, r / y2);
        let mut it = enumerate_supports(6, 2).unwrap();
        let mut count = 0;
        while it.next_indices().is_some() {
            count += 1;
        }
        assert_eq!(count, 15);
    }

    #[test]
    fn residual_stat_below_noise_ratio() {
        let params = ModelParams::new(8, 2, 0.5, 4).unwrap();
        for s in 0..25 {
            let inst = sample_planted(&params, Seed::new(s));
            let truth = inst.truth().unwrap();
            let w2 = residual(&inst, truth.indices());
            let y2: f64 = inst.y().iter().map(|v| v * v).sum();
            assert!(residual_ratio_stat(&inst, &params).unwrap() <= w2 / y2);
        }
    }

    #[test]
    fn residual_stat_rejects_empty() {
        let params = ModelParams::new(6, 2, 1.0, 0).unwrap();
        let inst = sample_planted(&params, Seed::new(0));
        assert!(matches!(residual_ratio_stat(&inst, &params), Err(Error::ZeroObservation)));
        let p1 = params.with_n(2);
        let x = sample_planted(&p1, Seed::new(0)).x().clone();
        let zero = Instance::new(x, vec![0.0, 0.0], None, Origin::Null).unwrap();
        assert!(matches!(residual_ratio_stat(&zero, &p1), Err(Error::ZeroObservation)));
    }

    #[test]
    fn threshold_examples() {
        let params = ModelParams::new(10, 3, 1.0, 1).unwrap();
        assert!((residual_threshold(&params, 0.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let tiny = residual_threshold(&params, 1e-12).unwrap();
        assert!((tiny - 0.25).abs() < 1e-12);
        assert!(residual_threshold(&params, 0.0).is_err());
        assert!(residual_threshold(&params, 1.0).is_err());
    }

    #[test]
    fn threshold_monotone() {
        let alphas = [0.05, 0.1, 0.3, 0.6, 0.9];
        let sigmas = [4.0, 1.0, 0.3, 0.03];
        for &s2 in &sigmas {
            let params = ModelParams::new(10, 3, s2, 1).unwrap();
            for w in alphas.windows(2) {
                assert!(residual_threshold(&params, w[0]).unwrap() < residual_threshold(&params, w[1]).unwrap());
            }
        }
        for &a in &alphas {
            let t: Vec<f64> = sigmas
                .iter()
                .map(|&s2| residual_threshold(&ModelParams::new(10, 3, s2, 1).unwrap(), a).unwrap())
                .collect();
            assert!(t.windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn sample_condition_examples() {
        let params = ModelParams::new(24, 3, 0.03, 4).unwrap();
        let c = detection_sample_condition(&params, 0.1, DEFAULT_GROWTH_SLACK).unwrap();
        let expected = 2.0 * 2024f64.ln() / (101f64.ln() + 0.9f64.ln());
        assert!((c.required_n - expected).abs() < 1e-9);
        assert!((c.required_n - 3.376).abs() < 1e-3);
        assert!(c.cond2);
        assert!(!detection_sample_condition(&params.with_n(3), 0.1, 1.0).unwrap().cond2);

        let big = ModelParams::new(8, 2, 1.0, 28).unwrap();
        assert!(detection_sample_condition(&big, 0.1, 1.0).unwrap().cond1);

        // (1 - alpha)(1 + snr) <= 1
        let weak = ModelParams::new(10, 1, 1.0, 5).unwrap();
        assert!(matches!(detection_sample_condition(&weak, 0.5, 1.0), Err(Error::InvalidAlpha(_))));
        assert!(matches!(detection_sample_condition(&weak, 0.6, 1.0), Err(Error::InvalidAlpha(_))));
        assert!(detection_sample_condition(&weak, 0.4, 1.0).is_ok());
        assert!(!detection_sample_condition(&weak.with_n(0), 0.4, 1.0).unwrap().cond1);
    }

    #[test]
    fn linear_stat_properties() {
        let x = Matrix::from_rows(&[vec![1.0, -1.0], vec![2.0, 0.0]], 2).unwrap();
        // X 1 = (0, 2); Y orthogonal
        let inst = Instance::new(x.clone(), vec![5.0, 0.0], None, Origin::Null).unwrap();
        let params = ModelParams::new(2, 1, 1.0, 2).unwrap();
        assert_eq!(linear_stat(&inst, &params).unwrap(), 0.0);

        let params = ModelParams::new(9, 3, 1.0, 5).unwrap();
        let inst = sample_null(&params, Seed::new(8));
        let base = run_test(&inst, &params, Rule::LinearCorr, 0.1).unwrap();
        let scaled_y: Vec<f64> = inst.y().iter().map(|v| 3.5 * v).collect();
        let scaled = Instance::new(inst.x().clone(), scaled_y, None, Origin::Null).unwrap();
        let other = run_test(&scaled, &params, Rule::LinearCorr, 0.1).unwrap();
        assert!((other.statistic - 3.5 * base.statistic).abs() < 1e-12 * base.statistic.abs().max(1.0));
        assert_eq!(other.decide_planted, base.decide_planted);
    }

    #[test]
    fn risk_no_data() {
        let params = ModelParams::new(8, 2, 1.0, 0).unwrap();
        let r = test_risk_mc(&params, Rule::LinearCorr, 0.1, 200, Seed::new(2)).unwrap();
        assert_eq!(r.sum, 1.0);
        assert!(test_risk_mc(&params, Rule::ResidualRatio, 0.1, 200, Seed::new(2)).is_err());
        assert!(test_risk_mc(&params, Rule::LinearCorr, 0.1, 50, Seed::new(2)).is_err());
    }

    #[test]
    fn risk_ranges() {
        let params = ModelParams::new(10, 2, 0.1, 6).unwrap();
        for rule in [Rule::ResidualRatio, Rule::LinearCorr] {
            let r = test_risk_mc(&params, rule, 0.1, 200, Seed::new(3)).unwrap();
            assert!((0.0..=1.0).contains(&r.type1) && (0.0..=1.0).contains(&r.type2));
            assert_eq!(r.sum, r.type1 + r.type2);
            assert_eq!(r.trials_per_model, 200);
        }
    }
}
