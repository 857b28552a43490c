//! Exhaustive MLE, exact posterior over supports, and the recovery-side
//! bounds (MSE lower bound via KL, pairwise error bound, MLE tail bound).

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{enumerate_supports, rank, SupportEnumerator};
use crate::error::{Error, Result};
use crate::model::{sample_planted, Instance, ModelParams, Seed, SupportVector};
use crate::numeric::{log_sum_exp, run_trials, Estimate};

/// ‖y - X beta‖² for a binary support, streamed row by row.
pub fn residual(inst: &Instance, support: &[usize]) -> f64 {
    let x = inst.x();
    inst.y()
        .iter()
        .enumerate()
        .map(|(i, &yi)| {
            let row = x.row(i);
            let fit: f64 = support.iter().map(|&j| row[j]).sum();
            let r = yi - fit;
            r * r
        })
        .sum()
}

/// Residuals of every k-subset, indexed by colexicographic rank.
pub fn residual_profile(inst: &Instance, k: usize) -> Result<Vec<f64>> {
    let mut it: SupportEnumerator = enumerate_supports(inst.p(), k)?;
    let mut out = Vec::with_capacity(it.total() as usize);
    while let Some(s) = it.next_indices() {
        out.push(residual(inst, s));
    }
    Ok(out)
}

fn argmin_first(values: &[f64]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < best.1 {
            best = (i, v);
        }
    }
    best
}

/// Least-squares support; ties go to the lowest colexicographic rank.
pub fn mle(inst: &Instance, params: &ModelParams) -> Result<SupportVector> {
    Ok(mle_with_residual(inst, params)?.0)
}

pub fn mle_with_residual(inst: &Instance, params: &ModelParams) -> Result<(SupportVector, f64)> {
    inst.check_shape(params)?;
    let profile = residual_profile(inst, params.k)?;
    let (r, v) = argmin_first(&profile);
    let support = crate::combinatorics::unrank(r as u128, params.k);
    Ok((SupportVector::new(support, params.p)?, v))
}

/// Normalized log posterior weights over supports (uniform prior, known sigma2).
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTable {
    pub log_weights: Vec<f64>,
    pub params: ModelParams,
}

impl PosteriorTable {
    pub fn weight(&self, rank: usize) -> f64 {
        self.log_weights[rank].exp()
    }
}

pub fn posterior(inst: &Instance, params: &ModelParams) -> Result<PosteriorTable> {
    inst.check_shape(params)?;
    let profile = residual_profile(inst, params.k)?;
    Ok(posterior_from_residuals(&profile, params))
}

pub(crate) fn posterior_from_residuals(profile: &[f64], params: &ModelParams) -> PosteriorTable {
    let scale = -0.5 / params.sigma2;
    let mut log_weights: Vec<f64> = profile.iter().map(|r| r * scale).collect();
    let norm = log_sum_exp(&log_weights);
    for w in &mut log_weights {
        *w -= norm;
    }
    PosteriorTable { log_weights, params: *params }
}

/// E[beta | X, Y] from a posterior table.
pub fn bayes_mean(table: &PosteriorTable) -> Result<Vec<f64>> {
    let p = table.params.p;
    let mut mean = vec![0.0; p];
    let mut it = enumerate_supports(p, table.params.k)?;
    if it.total() as usize != table.log_weights.len() {
        return Err(Error::DimensionMismatch {
            expected: it.total() as usize,
            got: table.log_weights.len(),
        });
    }
    let mut r = 0;
    while let Some(s) = it.next_indices() {
        let w = table.log_weights[r].exp();
        for &j in s {
            mean[j] += w;
        }
        r += 1;
    }
    Ok(mean)
}

/// Outcome of running both estimators on one planted instance.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub mle_support: SupportVector,
    pub bayes_mean: Vec<f64>,
    pub mle_sq_err: usize,
    pub bayes_sq_err: f64,
}

/// MLE and posterior mean from a single enumeration pass.
pub fn recover(inst: &Instance, params: &ModelParams) -> Result<RecoveryResult> {
    inst.check_shape(params)?;
    let truth = inst
        .truth()
        .ok_or_else(|| Error::Precondition("recovery error needs a planted instance".into()))?;
    let profile = residual_profile(inst, params.k)?;
    let (r, _) = argmin_first(&profile);
    let mle_support =
        SupportVector::new(crate::combinatorics::unrank(r as u128, params.k), params.p)?;
    let table = posterior_from_residuals(&profile, params);
    let bayes_mean = bayes_mean(&table)?;
    let common = crate::combinatorics::overlap(&mle_support, truth)?;
    let mle_sq_err = 2 * (params.k - common);
    let bayes_sq_err = bayes_mean
        .iter()
        .enumerate()
        .map(|(j, &m)| {
            let b = if truth.contains(j) { 1.0 } else { 0.0 };
            (b - m) * (b - m)
        })
        .sum();
    Ok(RecoveryResult { mle_support, bayes_mean, mle_sq_err, bayes_sq_err })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmseReport {
    pub mmse: f64,
    pub se: f64,
    pub ratio: f64,
    pub ratio_se: f64,
    pub mse0: f64,
    /// Mean ‖beta_mle - beta‖² over the same draws.
    pub mle_sq_err: Estimate,
    pub trials: usize,
}

/// Monte Carlo MMSE of the exact posterior mean over planted draws.
pub fn mmse_mc(params: &ModelParams, trials: usize, seed: Seed) -> Result<MmseReport> {
    if trials < 30 {
        return Err(Error::Precondition(format!("mmse_mc needs at least 30 trials, got {trials}")));
    }
    enumerate_supports(params.p, params.k)?;
    let base = seed.derive(0x4d4d_5345);
    let [bayes, mle] = run_trials(trials, |t| {
        let inst = sample_planted(params, base.trial(t));
        let rec = recover(&inst, params)?;
        Ok([rec.bayes_sq_err, rec.mle_sq_err as f64])
    })?;
    let mse0 = params.mse0();
    let (ratio, ratio_se) = if mse0 > 0.0 {
        (bayes.mean / mse0, bayes.se / mse0)
    } else {
        (0.0, 0.0)
    };
    Ok(MmseReport {
        mmse: bayes.mean,
        se: bayes.se,
        ratio,
        ratio_se,
        mse0,
        mle_sq_err: mle,
        trials,
    })
}

/// Fraction of planted draws where the MLE misses by at least `threshold`
/// in squared error.
pub fn mle_failure_mc(params: &ModelParams, threshold: usize, trials: usize, seed: Seed) -> Result<Estimate> {
    if trials == 0 {
        return Err(Error::Precondition("need at least one trial".into()));
    }
    enumerate_supports(params.p, params.k)?;
    let base = seed.derive(0x4d4c_4546);
    let [fail] = run_trials(trials, |t| {
        let inst = sample_planted(params, base.trial(t));
        let est = mle(&inst, params)?;
        let common = crate::combinatorics::overlap(&est, inst.truth().unwrap())?;
        Ok([if 2 * (params.k - common) >= threshold { 1.0 } else { 0.0 }])
    })?;
    Ok(fail)
}

/// exp(-2 kl / (n - m)) (sigma2 + k) - sigma2: the MSE floor for any
/// estimator that sees only the first m of n observations.
pub fn mse_lower_bound(kl: f64, n: usize, m: usize, k: f64, sigma2: f64) -> Result<f64> {
    if m < 1 || m + 1 > n {
        return Err(Error::OutOfRange(format!("need 1 <= m <= n - 1, got n={n}, m={m}")));
    }
    if kl < 0.0 || kl.is_nan() {
        return Err(Error::OutOfRange(format!("kl must be nonnegative, got {kl}")));
    }
    Ok((-2.0 * kl / (n - m) as f64).exp() * (sigma2 + k) - sigma2)
}

/// (1 + ell / (2 sigma2))^(-n/2).
pub fn pairwise_error_bound(ell: usize, sigma2: f64, n: usize) -> Result<f64> {
    if ell == 0 {
        return Err(Error::OutOfRange("ell must be at least 1".into()));
    }
    Ok((-(n as f64) / 2.0 * (ell as f64 / (2.0 * sigma2)).ln_1p()).exp())
}

/// Monte Carlo frequency of ‖W + X(beta - beta')‖² <= ‖W‖² for a fixed pair
/// of k-sparse vectors at squared distance 2 ell.
pub fn pairwise_error_mc(
    p: usize,
    k: usize,
    ell: usize,
    n: usize,
    sigma2: f64,
    trials: usize,
    seed: Seed,
) -> Result<Estimate> {
    if ell == 0 || ell > k || k + ell > p {
        return Err(Error::OutOfRange(format!(
            "need 1 <= ell <= k and k + ell <= p, got p={p}, k={k}, ell={ell}"
        )));
    }
    if trials == 0 {
        return Err(Error::Precondition("need at least one trial".into()));
    }
    // beta = {0..k}, beta' swaps {0..ell} for {k..k+ell}
    let plus: Vec<usize> = (0..ell).collect();
    let minus: Vec<usize> = (k..k + ell).collect();
    let sd = sigma2.sqrt();
    let base = seed.derive(0x5041_4952);
    let [freq] = run_trials(trials, |t| {
        let mut rng = base.trial(t).rng();
        let x: Vec<f64> = (0..n * p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for i in 0..n {
            let w = sd * rng.sample::<f64, _>(StandardNormal);
            let row = &x[i * p..(i + 1) * p];
            let d: f64 = plus.iter().map(|&j| row[j]).sum::<f64>() - minus.iter().map(|&j| row[j]).sum::<f64>();
            lhs += (w + d) * (w + d);
            rhs += w * w;
        }
        Ok([if lhs <= rhs { 1.0 } else { 0.0 }])
    })?;
    Ok(freq)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleTailBound {
    /// d = ceil(k / log(p/k)).
    pub d: usize,
    /// Failure threshold 2d on ‖beta_mle - beta‖².
    pub threshold: usize,
    /// e² / (log²(p/k) (1 - 1/e)).
    pub bound: f64,
    pub vacuous: bool,
    /// log log(p/k) >= 1.
    pub loglog_condition: bool,
    /// Sample size the recovery guarantee asks for.
    pub required_n: f64,
    pub sample_condition: bool,
}

/// The probability bound as a function of log(p/k) alone.
pub fn mle_tail_bound_value(log_ratio: f64) -> f64 {
    let e = std::f64::consts::E;
    e * e / (log_ratio * log_ratio * (1.0 - (-1.0f64).exp()))
}

pub fn mle_tail_bound(params: &ModelParams) -> Result<MleTailBound> {
    if params.k >= params.p {
        return Err(Error::Precondition(format!(
            "need p/k > 1, got p={}, k={}",
            params.p, params.k
        )));
    }
    let k = params.k as f64;
    let log_ratio = (params.p as f64 / k).ln();
    let loglog = log_ratio.ln();
    let d = (k / log_ratio).ceil() as usize;
    let bound = mle_tail_bound_value(log_ratio);
    let n_star = params.critical_sample_size()?;
    let inflation = 1.0 + std::f64::consts::LN_2 / (k / (2.0 * params.sigma2)).ln_1p();
    let required_n = inflation * (1.0 + 4.0 * loglog / log_ratio) * n_star;
    Ok(MleTailBound {
        d,
        threshold: 2 * d,
        bound,
        vacuous: bound >= 1.0,
        loglog_condition: loglog >= 1.0,
        required_n,
        sample_condition: params.n as f64 >= required_n,
    })
}

/// Rank of a support in the colexicographic order used by posterior tables.
pub fn support_rank(s: &SupportVector) -> usize {
    rank(s.indices()) as usize
}
