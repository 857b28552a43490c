//! Exact chi-square divergence between the planted and null models, its
//! truncated moments, likelihood-ratio Monte Carlo for chi-square, KL and TV,
//! and the conditioning event used to tame the second moment.

use serde::{Deserialize, Serialize};

use crate::combinatorics::{enumerate_supports, ln_choose, OverlapLaw};
use crate::error::{Error, Result};
use crate::estimators::residual_profile;
use crate::model::{sample_null, sample_planted, Instance, Matrix, ModelParams, Seed, SupportVector};
use crate::numeric::{log_sum_exp, run_trials, Estimate};

/// Distance from the validity boundary of the exact formula below which
/// lambda is rejected.
pub const POLE_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditioningParams {
    pub gamma: f64,
    pub tau: f64,
    pub eta: f64,
}

impl ConditioningParams {
    pub fn new(gamma: f64, tau: f64, k: usize) -> Result<Self> {
        if gamma.is_nan() || gamma < 0.0 {
            return Err(Error::InvalidParams(format!("gamma must be >= 0, got {gamma}")));
        }
        if k == 0 || !(0.0..=k as f64).contains(&tau) {
            return Err(Error::InvalidParams(format!("tau must lie in [0, {k}], got {tau}")));
        }
        Ok(ConditioningParams { gamma, tau, eta: 1.0 - tau / k as f64 })
    }

    /// Checks that eta was derived from the same k as `params`.
    pub fn check_for(&self, params: &ModelParams) -> Result<()> {
        let k = params.k as f64;
        if self.tau > k || (1.0 - self.tau / k - self.eta).abs() > 1e-12 {
            return Err(Error::InvalidParams(format!(
                "conditioning parameters (tau={}, eta={}) do not match k={}",
                self.tau, self.eta, params.k
            )));
        }
        Ok(())
    }

    /// Smallest overlap that the event constrains.
    pub fn min_overlap(&self) -> usize {
        self.tau.ceil().max(0.0) as usize
    }
}

/// Both sides of an inequality and whether it holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl BoundCheck {
    pub fn le(lhs: f64, rhs: f64) -> Self {
        BoundCheck { lhs, rhs, holds: lhs <= rhs }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub chi2_exact: Option<f64>,
    pub chi2_mc: f64,
    pub kl_mc: f64,
    pub tv_mc: f64,
    pub chi2_se: f64,
    pub kl_se: f64,
    pub tv_se: f64,
    pub trials: usize,
    pub lambda: f64,
}

fn check_lambda(params: &ModelParams, lambda: f64) -> Result<()> {
    let bound = params.snr() + 0.5;
    if !(lambda.is_finite() && lambda - bound.sqrt() > POLE_GUARD) {
        return Err(Error::LambdaTooSmall { lambda, bound });
    }
    Ok(())
}

/// Log of the integrand at overlap s, before weighting by the overlap law.
fn chi2_log_term(params: &ModelParams, lambda: f64, s: usize) -> f64 {
    let n = params.n as f64;
    let (k, s, v) = (params.k as f64, s as f64, params.sigma2);
    let a = 2.0 * lambda * lambda - 1.0 - (k + s) / v;
    let b = 1.0 + (k - s) / v;
    2.0 * n * lambda.ln() - 0.5 * n * (a.ln() + b.ln())
}

/// chi-square divergence between the planted law and the null law at
/// `lambda`, summed exactly over the overlap distribution.
pub fn chi2_exact(params: &ModelParams, lambda: f64) -> Result<f64> {
    check_lambda(params, lambda)?;
    if params.n == 0 {
        return Ok(0.0);
    }
    let law = OverlapLaw::new(params.p, params.k)?;
    let mut total = 0.0;
    for s in 0..=params.k {
        let w = law.pmf(s);
        if w > 0.0 {
            total += w * chi2_log_term(params, lambda, s).exp_m1();
        }
    }
    Ok(total)
}

/// log(1 + chi2), which stays finite where the divergence itself overflows.
pub fn ln_one_plus_chi2_exact(params: &ModelParams, lambda: f64) -> Result<f64> {
    check_lambda(params, lambda)?;
    if params.n == 0 {
        return Ok(0.0);
    }
    let law = OverlapLaw::new(params.p, params.k)?;
    let terms: Vec<f64> = (0..=params.k)
        .map(|s| law.log_pmf()[s] + chi2_log_term(params, lambda, s))
        .collect();
    Ok(log_sum_exp(&terms))
}

/// Contribution of the full-overlap event alone; always below `chi2_exact`
/// at the matched lambda.
pub fn chi2_blowup_lower_bound(params: &ModelParams) -> f64 {
    (params.n as f64 * params.snr().ln_1p() - ln_choose(params.p, params.k)).exp_m1()
}

/// E[(1 - S/(k + sigma2))^(-n_eff) ; s_lo <= S <= s_hi] for S the overlap
/// of two independent supports.
pub fn truncated_moment(params: &ModelParams, n_eff: f64, s_lo: usize, s_hi: usize) -> Result<f64> {
    if s_hi > params.k {
        return Err(Error::OutOfRange(format!("s_hi = {s_hi} exceeds k = {}", params.k)));
    }
    if s_lo > s_hi {
        return Ok(0.0);
    }
    let law = OverlapLaw::new(params.p, params.k)?;
    let denom = params.k as f64 + params.sigma2;
    let terms: Vec<f64> = (s_lo..=s_hi)
        .map(|s| law.log_pmf()[s] - n_eff * (-(s as f64) / denom).ln_1p())
        .collect();
    Ok(log_sum_exp(&terms).exp())
}

/// Both sides of the large-overlap moment bound under n <= (1 - alpha) n* / 2
/// and k <= c p.
pub fn check_lemma_a3(params: &ModelParams, alpha: f64, c: f64) -> Result<BoundCheck> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::Precondition(format!("c must lie in (0, 1), got {c}")));
    }
    if params.k as f64 > c * params.p as f64 {
        return Err(Error::Precondition(format!(
            "need k <= c p, got k={}, c p={}",
            params.k,
            c * params.p as f64
        )));
    }
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::Precondition(format!("alpha must lie in (0, 1/2], got {alpha}")));
    }
    let n_star = params.critical_sample_size()?;
    let cap = 0.5 * (1.0 - alpha) * n_star;
    if params.n as f64 > cap {
        return Err(Error::Precondition(format!(
            "need n <= (1 - alpha) n*/2 = {cap:.6}, got n = {}",
            params.n
        )));
    }
    let lo = large_overlap_start(params);
    let lhs = truncated_moment(params, params.n as f64, lo, params.k)?;
    let k = params.k as f64;
    let rhs = (-alpha * k * (params.p as f64 / k).ln() + ((2.0 - c) / (1.0 - c)).ln()).exp();
    Ok(BoundCheck::le(lhs, rhs))
}

/// tau = k (1 - 1/log²(1 + k/sigma2)).
pub fn theorem_tau(params: &ModelParams) -> f64 {
    let l = params.snr().ln_1p();
    params.k as f64 * (1.0 - 1.0 / (l * l))
}

/// First integer overlap at or above tau, clamped to 0.
fn large_overlap_start(params: &ModelParams) -> usize {
    theorem_tau(params).ceil().max(0.0) as usize
}

/// log[P(Y | X) / Q_lambda(Y | X)], the design matrix having the same law
/// under both models.
pub fn log_likelihood_ratio(inst: &Instance, params: &ModelParams, lambda: f64) -> Result<f64> {
    inst.check_shape(params)?;
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::InvalidParams(format!("lambda must be positive, got {lambda}")));
    }
    let profile = residual_profile(inst, params.k)?;
    let scale = -0.5 / params.sigma2;
    let logs: Vec<f64> = profile.iter().map(|r| r * scale).collect();
    let y2: f64 = inst.y().iter().map(|y| y * y).sum();
    let n = params.n as f64;
    Ok(log_sum_exp(&logs) - ln_choose(params.p, params.k)
        + n * lambda.ln()
        + y2 / (2.0 * lambda * lambda * params.sigma2))
}

const NULL_STREAM: u64 = 0x4e55_4c4c;
const PLANTED_STREAM: u64 = 0x504c_4e54;

/// chi-square and TV from null draws, KL from planted draws.
pub fn mc_divergences(params: &ModelParams, lambda: f64, trials: usize, seed: Seed) -> Result<DivergenceReport> {
    if trials < 100 {
        return Err(Error::Precondition(format!("mc_divergences needs at least 100 trials, got {trials}")));
    }
    let null_params = params.with_lambda(lambda)?;
    enumerate_supports(params.p, params.k)?;
    let chi2_exact = chi2_exact(params, lambda).ok();
    if params.n == 0 {
        return Ok(DivergenceReport {
            chi2_exact,
            chi2_mc: 0.0,
            kl_mc: 0.0,
            tv_mc: 0.0,
            chi2_se: 0.0,
            kl_se: 0.0,
            tv_se: 0.0,
            trials,
            lambda,
        });
    }
    let null_seed = seed.derive(NULL_STREAM);
    let [sq, abs] = run_trials(trials, |t| {
        let inst = sample_null(&null_params, null_seed.trial(t));
        let l = log_likelihood_ratio(&inst, params, lambda)?;
        Ok([(2.0 * l).exp(), l.exp_m1().abs()])
    })?;
    let planted_seed = seed.derive(PLANTED_STREAM);
    let [kl] = run_trials(trials, |t| {
        let inst = sample_planted(params, planted_seed.trial(t));
        Ok([log_likelihood_ratio(&inst, params, lambda)?])
    })?;
    Ok(DivergenceReport {
        chi2_exact,
        chi2_mc: sq.mean - 1.0,
        kl_mc: kl.mean,
        tv_mc: 0.5 * abs.mean,
        chi2_se: sq.se,
        kl_se: kl.se,
        tv_se: 0.5 * abs.se,
        trials,
        lambda,
    })
}

/// Outcome of the Pinsker/Jensen chain on one report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinskerCheck {
    /// tv² - 2 kl, and its allowed slack.
    pub tv_gap: f64,
    pub tv_slack: f64,
    /// kl - log(1 + chi2), and its allowed slack.
    pub kl_gap: f64,
    pub kl_slack: f64,
    pub holds: bool,
}

/// tv <= sqrt(2 kl) <= sqrt(2 log(1 + chi2)), each link allowed `z` combined
/// standard errors. The first link is compared as tv² <= 2 kl and the second
/// on the log scale so that a near-zero kl estimate does not need a square root.
pub fn pinsker_check(r: &DivergenceReport, z: f64) -> PinskerCheck {
    let tv_gap = r.tv_mc * r.tv_mc - 2.0 * r.kl_mc;
    let tv_slack = z * ((2.0 * r.tv_mc * r.tv_se).powi(2) + (2.0 * r.kl_se).powi(2)).sqrt();
    let one_plus = (1.0 + r.chi2_mc).max(f64::MIN_POSITIVE);
    let kl_gap = r.kl_mc - one_plus.ln();
    let kl_slack = z * (r.kl_se.powi(2) + (r.chi2_se / one_plus).powi(2)).sqrt();
    PinskerCheck {
        tv_gap,
        tv_slack,
        kl_gap,
        kl_slack,
        holds: tv_gap <= tv_slack && kl_gap <= kl_slack,
    }
}

/// Whether ‖X(beta + beta')‖² <= (2 + gamma) 2n(k + s) for every support
/// beta' whose overlap s with beta is at least tau.
pub fn event_holds(x: &Matrix, beta: &SupportVector, params: &ModelParams, cond: &ConditioningParams) -> Result<bool> {
    cond.check_for(params)?;
    if x.rows() != params.n || x.cols() != params.p || beta.p() != params.p || beta.k() != params.k {
        return Err(Error::DimensionMismatch { expected: params.n * params.p, got: x.rows() * x.cols() });
    }
    if params.n == 0 || cond.gamma == f64::INFINITY {
        return Ok(true);
    }
    let base = x.mul_support(beta.indices());
    let min_s = cond.min_overlap();
    let n = params.n as f64;
    let k = params.k;
    let mut it = enumerate_supports(params.p, k)?;
    while let Some(other) = it.next_indices() {
        let s = other.iter().filter(|j| beta.contains(**j)).count();
        if s < min_s {
            continue;
        }
        let norm: f64 = (0..params.n)
            .map(|i| {
                let row = x.row(i);
                let v = base[i] + other.iter().map(|&j| row[j]).sum::<f64>();
                v * v
            })
            .sum();
        if norm > (2.0 + cond.gamma) * 2.0 * n * (k + s) as f64 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// exp(-n gamma/4 + eta k log(e² p/(eta² k))), an upper bound on the
/// probability that the conditioning event fails.
pub fn conditioning_prob_bound(params: &ModelParams, cond: &ConditioningParams) -> f64 {
    let base = -(params.n as f64) * cond.gamma / 4.0;
    if cond.eta <= 0.0 {
        return base.exp();
    }
    let (p, k, eta) = (params.p as f64, params.k as f64, cond.eta);
    (base + eta * k * (std::f64::consts::E.powi(2) * p / (eta * eta * k)).ln()).exp()
}

/// Monte Carlo frequency of the conditioning event failing under the
/// planted model.
pub fn conditioning_failure_mc(
    params: &ModelParams,
    cond: &ConditioningParams,
    trials: usize,
    seed: Seed,
) -> Result<Estimate> {
    if trials == 0 {
        return Err(Error::Precondition("need at least one trial".into()));
    }
    cond.check_for(params)?;
    enumerate_supports(params.p, params.k)?;
    let base = seed.derive(0x434f_4e44);
    let [fail] = run_trials(trials, |t| {
        let inst = sample_planted(params, base.trial(t));
        let ok = event_holds(inst.x(), inst.truth().unwrap(), params, cond)?;
        Ok([if ok { 0.0 } else { 1.0 }])
    })?;
    Ok(fail)
}

/// (eps n/2) log(1 + k/sigma2) + sqrt(eps) (2 + n), the bound on
/// eps KL(P restricted to the complement of the event || Q) at the matched lambda.
pub fn kl_tail_bound(params: &ModelParams, epsilon: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::OutOfRange(format!("epsilon must lie in [0, 1], got {epsilon}")));
    }
    let n = params.n as f64;
    Ok(0.5 * epsilon * n * params.snr().ln_1p() + epsilon.sqrt() * (2.0 + n))
}

/// max(8/log(1 + snr), 32 loglog(p/k)/log(p/k)).
pub fn theorem_alpha(snr: f64, p_over_k: f64) -> f64 {
    let l = p_over_k.ln();
    (8.0 / snr.ln_1p()).max(32.0 * l.ln() / l)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremParams {
    pub alpha: f64,
    pub cond: ConditioningParams,
    /// alpha <= 1/2.
    pub alpha_in_regime: bool,
    /// k <= p^(1/2 - delta).
    pub sparsity_in_regime: bool,
    /// n <= (1 - alpha) n*.
    pub samples_in_regime: bool,
}

impl TheoremParams {
    pub fn in_regime(&self) -> bool {
        self.alpha_in_regime && self.sparsity_in_regime && self.samples_in_regime
    }
}

/// alpha, gamma = alpha k log(p/k)/n and tau = k(1 - 1/log²(1 + k/sigma2)),
/// with flags for each side condition of the impossibility result.
pub fn make_theorem_params(params: &ModelParams, delta: f64) -> Result<TheoremParams> {
    if params.n == 0 {
        return Err(Error::Precondition("gamma is undefined at n = 0".into()));
    }
    if !(0.0..0.5).contains(&delta) {
        return Err(Error::Precondition(format!("delta must lie in [0, 1/2), got {delta}")));
    }
    let (p, k) = (params.p as f64, params.k as f64);
    if p / k <= std::f64::consts::E {
        return Err(Error::Precondition(format!("need p/k > e, got p/k = {}", p / k)));
    }
    let alpha = theorem_alpha(params.snr(), p / k);
    let gamma = alpha * k * (p / k).ln() / params.n as f64;
    let tau = theorem_tau(params);
    if tau < 0.0 {
        return Err(Error::Precondition(format!(
            "tau = {tau} is negative; need log(1 + k/sigma2) >= 1"
        )));
    }
    let cond = ConditioningParams::new(gamma, tau, params.k)?;
    Ok(TheoremParams {
        alpha,
        cond,
        alpha_in_regime: alpha <= 0.5,
        sparsity_in_regime: k <= p.powf(0.5 - delta),
        samples_in_regime: params.n as f64 <= (1.0 - alpha) * params.critical_sample_size()?,
    })
}

/// loglog(p/k) / (2 log(p/k)), the split point between small and
/// intermediate overlaps (as a fraction of k).
pub fn overlap_split_epsilon(p: usize, k: usize) -> Result<f64> {
    let r = p as f64 / k as f64;
    if r <= std::f64::consts::E {
        return Err(Error::Precondition(format!("need p/k > e, got {r}")));
    }
    Ok(r.ln().ln() / (2.0 * r.ln()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Origin;
    use proptest::prelude::*;

    fn mp(p: usize, k: usize, s2: f64, n: usize) -> ModelParams {
        ModelParams::new(p, k, s2, n).unwrap()
    }

    #[test]
    fn chi2_examples() {
        let params = mp(6, 2, 1.0, 1);
        let v = chi2_exact(&params, params.lambda0()).unwrap();
        assert!((v - 0.4).abs() < 1e-14, "{v}");
        assert_eq!(chi2_exact(&params.with_n(0), 2.0).unwrap(), 0.0);

        let params = mp(16, 2, 2.0 / 3.0, 6);
        let lb = chi2_blowup_lower_bound(&params);
        assert!((lb - (4096.0 / 120.0 - 1.0)).abs() < 1e-9);
        assert!(chi2_exact(&params, 2.0).unwrap() >= lb);
    }

    #[test]
    fn chi2_pole_guard() {
        let params = mp(6, 2, 1.0, 1);
        let edge = 2.5f64.sqrt();
        assert!(matches!(chi2_exact(&params, edge), Err(Error::LambdaTooSmall { .. })));
        assert!(chi2_exact(&params, edge + 1e-10).is_err());
        assert!(chi2_exact(&params, 1.0).is_err());
        assert!(chi2_exact(&params, edge + 1e-3).unwrap().is_finite());
    }

    #[test]
    fn ln_one_plus_matches() {
        let params = mp(10, 2, 0.5, 3);
        let l0 = params.lambda0();
        let a = chi2_exact(&params, l0).unwrap().ln_1p();
        let b = ln_one_plus_chi2_exact(&params, l0).unwrap();
        assert!((a - b).abs() < 1e-12);
        // stays finite where the divergence overflows
        let big = mp(10, 2, 0.01, 400);
        assert!(ln_one_plus_chi2_exact(&big, big.lambda0()).unwrap().is_finite());
    }

    #[test]
    fn blowup_bound_examples() {
        let params = mp(9, 2, 1.0, 0);
        assert!((chi2_blowup_lower_bound(&params) - (1.0 / 36.0 - 1.0)).abs() < 1e-14);
        // n = log C(p,k)/log(1+snr): C(9,1)=9 = 3², snr=2
        let params = mp(9, 1, 0.5, 2);
        assert!(chi2_blowup_lower_bound(&params).abs() < 1e-14);
    }

    #[test]
    fn truncated_moment_examples() {
        let params = mp(6, 2, 1.0, 1);
        assert!((truncated_moment(&params, 0.0, 0, 2).unwrap() - 1.0).abs() < 1e-14);
        assert!((truncated_moment(&params, 3.7, 0, 0).unwrap() - 0.4).abs() < 1e-14);
        assert!((truncated_moment(&params, 1.0, 0, 2).unwrap() - 1.4).abs() < 1e-14);
        assert_eq!(truncated_moment(&params, 1.0, 2, 1).unwrap(), 0.0);
        assert!(truncated_moment(&params, 1.0, 0, 3).is_err());
    }

    #[test]
    fn lemma_a3_examples() {
        let params = mp(40, 2, 0.02, 0);
        let check = check_lemma_a3(&params, 0.5, 0.5).unwrap();
        assert!(check.holds);
        assert!(check.lhs <= 1.0);
        assert!(check_lemma_a3(&params.with_n(1), 0.5, 0.5).is_err());
        assert!(check_lemma_a3(&params, 0.6, 0.5).is_err());
        assert!(check_lemma_a3(&params, 0.5, 1.0).is_err());
        assert!(check_lemma_a3(&params, 0.5, 0.01).is_err());
    }

    #[test]
    fn llr_single_support() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![-0.5, 0.25], vec![0.3, 0.3]], 2).unwrap();
        let beta = [0, 1];
        let y = x.mul_support(&beta);
        let inst = Instance::new(x, y.clone(), None, Origin::Null).unwrap();
        let params = ModelParams::with_all(2, 2, 0.7, 3, 1.0).unwrap();
        let l = log_likelihood_ratio(&inst, &params, 1.0).unwrap();
        let xb2: f64 = y.iter().map(|v| v * v).sum();
        assert!((l - xb2 / 1.4).abs() < 1e-12);
    }

    #[test]
    fn mc_divergences_no_data() {
        let params = mp(8, 2, 1.0, 0);
        let r = mc_divergences(&params, params.lambda0(), 100, Seed::new(1)).unwrap();
        assert_eq!((r.chi2_mc, r.kl_mc, r.tv_mc), (0.0, 0.0, 0.0));
        assert_eq!(r.chi2_exact, Some(0.0));
        assert!(mc_divergences(&params, 2.0, 99, Seed::new(1)).is_err());
    }

    #[test]
    fn mc_divergences_report_ranges() {
        let params = mp(8, 1, 1.0, 2);
        let r = mc_divergences(&params, params.lambda0(), 2000, Seed::new(9)).unwrap();
        assert!((0.0..=1.0).contains(&r.tv_mc));
        assert!(r.kl_mc >= -4.0 * r.kl_se);
        assert!(r.chi2_mc >= -4.0 * r.chi2_se);
        assert!(pinsker_check(&r, 3.0).holds);
        // explicit lambda below the pole still yields MC values
        let low = mc_divergences(&params, 1.0, 200, Seed::new(9)).unwrap();
        assert!(low.chi2_exact.is_none());
    }

    #[test]
    fn event_trivial_cases() {
        let params = mp(5, 2, 1.0, 3);
        let inst = sample_planted(&params, Seed::new(3));
        let truth = inst.truth().unwrap();
        let inf = ConditioningParams::new(f64::INFINITY, 0.0, 2).unwrap();
        assert!(event_holds(inst.x(), truth, &params, &inf).unwrap());
        let none = params.with_n(0);
        let empty = sample_planted(&none, Seed::new(3));
        let strict = ConditioningParams::new(0.0, 0.0, 2).unwrap();
        assert!(event_holds(empty.x(), empty.truth().unwrap(), &none, &strict).unwrap());
    }

    #[test]
    fn event_single_candidate() {
        // tau = k: only beta' = beta, so the check is ‖2 X beta‖² <= (2+gamma) 4nk
        let x = Matrix::from_rows(&[vec![1.0, 1.0, 0.0], vec![2.0, 0.0, 5.0]], 3).unwrap();
        let beta = SupportVector::new(vec![0, 1], 3).unwrap();
        let params = mp(3, 2, 1.0, 2);
        // X beta = (2, 2): ‖2 X beta‖² = 32; 4nk = 16
        let at = |g: f64| event_holds(&x, &beta, &params, &ConditioningParams::new(g, 2.0, 2).unwrap()).unwrap();
        assert!(at(0.0));
        let tight = ConditioningParams::new(0.0, 2.0, 2).unwrap();
        let x2 = Matrix::from_rows(&[vec![3.0, 1.0, 0.0], vec![2.0, 0.0, 5.0]], 3).unwrap();
        // X beta = (4, 2): ‖2 X beta‖² = 80 > 32
        assert!(!event_holds(&x2, &beta, &params, &tight).unwrap());
        assert!(event_holds(&x2, &beta, &params, &ConditioningParams::new(3.0, 2.0, 2).unwrap()).unwrap());
        assert!(!event_holds(&x2, &beta, &params, &ConditioningParams::new(2.9, 2.0, 2).unwrap()).unwrap());
    }

    #[test]
    fn conditioning_bound_examples() {
        let params = mp(4, 1, 1.0, 4);
        let cond = ConditioningParams::new(4.0, 0.0, 1).unwrap();
        let v = conditioning_prob_bound(&params, &cond);
        assert!((v - 4.0 * (-2.0f64).exp()).abs() < 1e-14);
        let zero = ConditioningParams::new(0.0, 0.0, 1).unwrap();
        assert!(conditioning_prob_bound(&params, &zero) >= 1.0);
        let full = ConditioningParams::new(2.0, 1.0, 1).unwrap();
        assert!((conditioning_prob_bound(&params, &full) - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn kl_tail_examples() {
        let params = mp(6, 3, 1.0, 2);
        assert_eq!(kl_tail_bound(&params, 0.0).unwrap(), 0.0);
        let v = kl_tail_bound(&params, 1.0).unwrap();
        assert!((v - (4f64.ln() + 4.0)).abs() < 1e-12);
        let mut prev = -1.0;
        for i in 0..=20 {
            let b = kl_tail_bound(&params, i as f64 / 20.0).unwrap();
            assert!(b > prev);
            prev = b;
        }
        assert!(kl_tail_bound(&params, 1.5).is_err());
    }

    #[test]
    fn theorem_params() {
        let e8 = 8f64.exp();
        assert!((theorem_alpha(e8 - 1.0, 1e90) - 1.0).abs() < 1e-12);
        for &snr in &[0.5, 3.0, 100.0, 1e4] {
            for &r in &[3.0, 10.0, 1e3, 1e6] {
                let a = theorem_alpha(snr, r);
                let b1 = 8.0 / snr.ln_1p();
                let b2 = 32.0 * r.ln().ln() / r.ln();
                assert_eq!(a, b1.max(b2));
            }
        }
        let tp = make_theorem_params(&mp(1000, 2, 0.01, 3), 0.1).unwrap();
        assert!(!tp.alpha_in_regime);
        assert!(!tp.in_regime());
        let expected_gamma = tp.alpha * 2.0 * 500f64.ln() / 3.0;
        assert!((tp.cond.gamma - expected_gamma).abs() < 1e-12);
        assert!(make_theorem_params(&mp(5, 2, 0.01, 3), 0.1).is_err());
        assert!(make_theorem_params(&mp(100, 2, 0.01, 0), 0.1).is_err());
        assert!(make_theorem_params(&mp(100, 2, 10.0, 3), 0.1).is_err());
    }

    #[test]
    fn split_epsilon() {
        let e = overlap_split_epsilon(1000, 1).unwrap();
        let l = 1000f64.ln();
        assert!((e - l.ln() / (2.0 * l)).abs() < 1e-15);
        assert!(overlap_split_epsilon(5, 2).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn matched_lambda_identity(p in 3usize..30, k in 1usize..4, s2 in 0.05f64..5.0, n in 0usize..12) {
            prop_assume!(k < p);
            let params = mp(p, k, s2, n);
            let chi2 = chi2_exact(&params, params.lambda0()).unwrap();
            let tm = truncated_moment(&params, n as f64, 0, k).unwrap() - 1.0;
            prop_assert!((chi2 - tm).abs() <= 1e-10 * chi2.abs().max(1e-300) + 1e-14);
            prop_assert!(chi2 >= chi2_blowup_lower_bound(&params));
        }

        #[test]
        fn chi2_nondecreasing_in_n(p in 3usize..30, k in 1usize..4, s2 in 0.05f64..5.0, n in 0usize..20, bump in 1.0f64..2.0) {
            prop_assume!(k < p);
            let params = mp(p, k, s2, n);
            let lambda = params.lambda0() * bump;
            let a = chi2_exact(&params, lambda).unwrap();
            let b = chi2_exact(&params.with_n(n + 1), lambda).unwrap();
            prop_assert!(b >= a - 1e-12 * a.abs());
        }

        #[test]
        fn event_monotone_in_tau(seed in 0u64..1000, gamma in 0.0f64..2.0) {
            let params = mp(7, 2, 1.0, 4);
            let inst = sample_planted(&params, Seed::new(seed));
            let truth = inst.truth().unwrap();
            let loose = ConditioningParams::new(gamma, 2.0, 2).unwrap();
            let mid = ConditioningParams::new(gamma, 1.0, 2).unwrap();
            let strict = ConditioningParams::new(gamma, 0.0, 2).unwrap();
            let a = event_holds(inst.x(), truth, &params, &strict).unwrap();
            let b = event_holds(inst.x(), truth, &params, &mid).unwrap();
            let c = event_holds(inst.x(), truth, &params, &loose).unwrap();
            prop_assert!(!a || b);
            prop_assert!(!b || c);
        }
    }
}
