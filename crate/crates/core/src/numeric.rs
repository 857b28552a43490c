//! Log-domain helpers and the batched Monte Carlo runner shared by every
//! estimator in the crate.
//!
//! Trials are split into at most [`MAX_BATCHES`] contiguous batches. Each
//! batch walks its trials in index order and the batch sums are combined in
//! batch order, so the result is bit-identical for any thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const MAX_BATCHES: usize = 50;

/// `log(sum(exp(xs)))`, returning `-inf` for an empty or all `-inf` slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

/// A Monte Carlo mean with its batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { mean: value, se: 0.0 }
    }
}

/// Runs `trials` independent evaluations of `f` (indexed by trial number)
/// and returns per-component estimates.
pub fn run_trials<const N: usize, F>(trials: usize, f: F) -> Result<[Estimate; N]>
where
    F: Fn(u64) -> Result<[f64; N]> + Sync,
{
    assert!(trials >= 1, "run_trials needs at least one trial");
    let batches = trials.min(MAX_BATCHES);
    let bounds = |b: usize| b * trials / batches;

    let sums: Vec<(usize, [f64; N])> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let (lo, hi) = (bounds(b), bounds(b + 1));
            let mut acc = [0.0; N];
            for t in lo..hi {
                let v = f(t as u64)?;
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += x;
                }
            }
            Ok((hi - lo, acc))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = [Estimate::exact(0.0); N];
    for (c, est) in out.iter_mut().enumerate() {
        let total: f64 = sums.iter().map(|(_, s)| s[c]).sum();
        let mean = total / trials as f64;
        let se = if batches < 2 {
            0.0
        } else {
            let var: f64 = sums
                .iter()
                .map(|(cnt, s)| {
                    let d = s[c] / *cnt as f64 - mean;
                    d * d
                })
                .sum::<f64>()
                / (batches - 1) as f64;
            (var / batches as f64).sqrt()
        };
        *est = Estimate { mean, se };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_naive() {
        let xs = [0.1, -2.0, 3.5];
        let naive = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - naive).abs() < 1e-14);
    }

    #[test]
    fn lse_handles_extremes() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn run_trials_mean_and_se() {
        let [e] = run_trials(100, |t| Ok([t as f64])).unwrap();
        assert!((e.mean - 49.5).abs() < 1e-12);
        assert!(e.se > 0.0);
        let [c] = run_trials(7, |_| Ok([2.0])).unwrap();
        assert_eq!(c, Estimate { mean: 2.0, se: 0.0 });
    }

    #[test]
    fn run_trials_thread_independent() {
        let f = |t: u64| Ok([((t * 2654435761) % 1000) as f64 / 7.0, (t as f64).sin()]);
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_trials(1234, f).unwrap());
        let parallel = rayon::ThreadPoolBuilder::new()
            .num_threads(8)
            .build()
            .unwrap()
            .install(|| run_trials(1234, f).unwrap());
        assert_eq!(serial, parallel);
    }
}
