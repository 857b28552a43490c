//! Numerical checks of the exact identities and finite-sample bounds, each
//! reported as a row with both sides of the inequality.

use serde::{Deserialize, Serialize};

use crate::combinatorics::{hyp_log_pmf, hyp_pmf_upper_bound};
use crate::divergence::{
    chi2_blowup_lower_bound, chi2_exact, check_lemma_a3, conditioning_failure_mc, conditioning_prob_bound,
    mc_divergences, truncated_moment, ConditioningParams,
};
use crate::error::Result;
use crate::estimators::{mmse_mc, mse_lower_bound, pairwise_error_bound, pairwise_error_mc};
use crate::model::{ModelParams, Seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub check: String,
    pub case: String,
    /// The side that should be smaller.
    pub lhs: f64,
    pub rhs: f64,
    /// Statistical allowance added to `rhs`; zero for exact checks.
    pub slack: f64,
    pub pass: bool,
}

impl BoundRow {
    fn new(check: &str, case: String, lhs: f64, rhs: f64, slack: f64) -> Self {
        BoundRow { check: check.into(), case, lhs, rhs, slack, pass: lhs <= rhs + slack }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsOptions {
    pub seed: Seed,
    pub conditioning_trials: usize,
    pub pairwise_trials: usize,
    pub area_trials: usize,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        BoundsOptions { seed: Seed::new(0), conditioning_trials: 10_000, pairwise_trials: 100_000, area_trials: 4_000 }
    }
}

impl BoundsOptions {
    /// A tenth of the default Monte Carlo effort.
    pub fn quick(seed: Seed) -> Self {
        BoundsOptions { seed, conditioning_trials: 1_000, pairwise_trials: 10_000, area_trials: 400 }
    }
}

/// The grid shared by the divergence identities.
pub fn divergence_grid() -> Vec<ModelParams> {
    let mut out = Vec::new();
    for p in [8, 10, 12] {
        for k in [1, 2] {
            for s2 in [0.5, 1.0] {
                for n in [1, 2, 3] {
                    out.push(ModelParams::new(p, k, s2, n).expect("grid parameters are valid"));
                }
            }
        }
    }
    out
}

/// Largest pmf / bound ratio over s in [1, k], all k <= p <= `max_p`,
/// compared in the log domain with a relative allowance of 1e-12.
pub fn pmf_bound_rows(max_p: usize) -> Result<Vec<BoundRow>> {
    let mut worst = (f64::NEG_INFINITY, String::new());
    for p in 1..=max_p {
        for k in 1..=p {
            for s in 1..=k {
                let lp = hyp_log_pmf(p, k, s)?;
                let lb = hyp_pmf_upper_bound(p, k, s)?.ln();
                let gap = (lp - lb) / lb.abs().max(1.0);
                if gap > worst.0 {
                    worst = (gap, format!("p={p} k={k} s={s}"));
                }
            }
        }
    }
    Ok(vec![BoundRow::new(
        "overlap-pmf-bound",
        format!("p<={max_p}, all k, s; largest relative log gap at {}", worst.1),
        worst.0,
        0.0,
        1e-12,
    )])
}

pub fn divergence_identity_rows() -> Result<Vec<BoundRow>> {
    let mut rows = Vec::new();
    let mut worst_rel = 0.0f64;
    let mut worst_gap = f64::NEG_INFINITY;
    for params in divergence_grid() {
        let chi2 = chi2_exact(&params, params.lambda0())?;
        let tm = truncated_moment(&params, params.n as f64, 0, params.k)? - 1.0;
        worst_rel = worst_rel.max((chi2 - tm).abs() / chi2.abs());
        worst_gap = worst_gap.max(chi2_blowup_lower_bound(&params) - chi2);
    }
    rows.push(BoundRow::new("matched-lambda-identity", "relative error over 72 grid points".into(), worst_rel, 1e-10, 0.0));
    rows.push(BoundRow::new("blowup-lower-bound", "max(bound - chi2) over grid".into(), worst_gap, 0.0, 0.0));
    let params = ModelParams::new(16, 2, 2.0 / 3.0, 6)?;
    let lb = chi2_blowup_lower_bound(&params);
    rows.push(BoundRow::new(
        "blowup-lower-bound",
        "p=16 k=2 sigma2=2/3 n=6: |bound - 4096/120 + 1|".into(),
        (lb - (4096.0 / 120.0 - 1.0)).abs(),
        1e-9,
        0.0,
    ));
    Ok(rows)
}

pub fn lemma_a3_rows() -> Result<Vec<BoundRow>> {
    let mut rows = Vec::new();
    let c = 0.5;
    for p in [200usize, 1000, 100_000] {
        for k in [2usize, 3, 5] {
            for snr in [5.0, 20.0, 100.0] {
                for alpha in [0.25, 0.5] {
                    let base = ModelParams::new(p, k, k as f64 / snr, 0)?;
                    let cap = 0.5 * (1.0 - alpha) * base.critical_sample_size()?;
                    let n = cap.floor() as usize;
                    let params = base.with_n(n);
                    let check = check_lemma_a3(&params, alpha, c)?;
                    rows.push(BoundRow::new(
                        "large-overlap-moment",
                        format!("p={p} k={k} k/sigma2={snr} alpha={alpha} c={c} n={n}"),
                        check.lhs,
                        check.rhs,
                        0.0,
                    ));
                }
            }
        }
    }
    Ok(rows)
}

pub fn conditioning_rows(opts: &BoundsOptions) -> Result<Vec<BoundRow>> {
    let params = ModelParams::new(10, 2, 1.0, 5)?;
    let mut rows = Vec::new();
    for (i, gamma) in [2.0, 4.0, 8.0].into_iter().enumerate() {
        for tau in [0.0, 1.0, 2.0] {
            let cond = ConditioningParams::new(gamma, tau, 2)?;
            let seed = opts.seed.derive(0xb1).derive((i * 3) as u64 + tau as u64);
            let mc = conditioning_failure_mc(&params, &cond, opts.conditioning_trials, seed)?;
            rows.push(BoundRow::new(
                "conditioning-failure",
                format!("p=10 k=2 n=5 gamma={gamma} tau={tau}, {} trials", opts.conditioning_trials),
                mc.mean,
                conditioning_prob_bound(&params, &cond),
                4.0 * mc.se,
            ));
        }
    }
    Ok(rows)
}

pub fn pairwise_rows(opts: &BoundsOptions) -> Result<Vec<BoundRow>> {
    let mut rows = Vec::new();
    for ell in [1usize, 2] {
        for n in [1usize, 4, 8] {
            let seed = opts.seed.derive(0x51).derive((ell * 16 + n) as u64);
            let mc = pairwise_error_mc(6, 2, ell, n, 1.0, opts.pairwise_trials, seed)?;
            rows.push(BoundRow::new(
                "pairwise-error",
                format!("p=6 k=2 ell={ell} n={n} sigma2=1, {} trials", opts.pairwise_trials),
                mc.mean,
                pairwise_error_bound(ell, 1.0, n)?,
                4.0 * mc.se,
            ));
        }
    }
    Ok(rows)
}

/// MMSE with n - 1 observations against the floor implied by the KL at n
/// observations. The bound is on the left so that the row reads bound <= MMSE.
pub fn area_theorem_rows(opts: &BoundsOptions) -> Result<Vec<BoundRow>> {
    let mut rows = Vec::new();
    for p in [8usize, 10] {
        for s2 in [0.5, 1.0] {
            for n in [2usize, 3, 4] {
                let params = ModelParams::new(p, 2, s2, n)?;
                let seed = opts.seed.derive(0x41).derive((p * 100 + n * 10) as u64 + (s2 * 2.0) as u64);
                let div = mc_divergences(&params, params.lambda0(), opts.area_trials.max(100), seed.derive(1))?;
                let mm = mmse_mc(&params.with_n(n - 1), opts.area_trials.max(30), seed.derive(2))?;
                let floor = mse_lower_bound((div.kl_mc + 3.0 * div.kl_se).max(0.0), n, n - 1, 2.0, s2)?;
                rows.push(BoundRow::new(
                    "area-theorem",
                    format!("p={p} k=2 sigma2={s2} n={n}: bound vs MMSE at n-1"),
                    floor,
                    mm.mmse,
                    3.0 * mm.se,
                ));
            }
        }
    }
    Ok(rows)
}

pub fn run_bounds(opts: &BoundsOptions) -> Result<Vec<BoundRow>> {
    let mut rows = pmf_bound_rows(200)?;
    rows.extend(divergence_identity_rows()?);
    rows.extend(lemma_a3_rows()?);
    rows.extend(conditioning_rows(opts)?);
    rows.extend(pairwise_rows(opts)?);
    rows.extend(area_theorem_rows(opts)?);
    Ok(rows)
}

/// Fixed-width table, one row per check.
pub fn render_table(rows: &[BoundRow]) -> String {
    let mut out = format!("{:<6} {:<24} {:>14} {:>14} {:>12}  case\n", "result", "check", "lhs", "rhs", "slack");
    for r in rows {
        out.push_str(&format!(
            "{:<6} {:<24} {:>14.6e} {:>14.6e} {:>12.3e}  {}\n",
            if r.pass { "PASS" } else { "FAIL" },
            r.check,
            r.lhs,
            r.rhs,
            r.slack,
            r.case
        ));
    }
    out
}
