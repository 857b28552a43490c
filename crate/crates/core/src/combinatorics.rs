//! Hypergeometric overlap law and colexicographic k-subset enumeration.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::SupportVector;

/// Largest C(p, k) that exhaustive routines will walk by default.
pub const DEFAULT_ENUMERATION_BUDGET: u128 = 10_000_000;

/// Exact binomial coefficient, `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1)
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Above this n the floating-point product may overflow and log-gamma is used.
const PRODUCT_LIMIT: usize = 1000;

/// log C(n, k); `-inf` when k > n. Exact integers while they fit, then a
/// floating-point product, then log-gamma for large n.
pub fn ln_choose(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    if k == 0 {
        return 0.0;
    }
    if let Some(c) = binomial(n as u64, k as u64) {
        return (c as f64).ln();
    }
    if n <= PRODUCT_LIMIT {
        let c: f64 = (1..=k).map(|i| (n - k + i) as f64 / i as f64).product();
        return c.ln();
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// |supp(a) ∩ supp(b)|.
pub fn overlap(a: &SupportVector, b: &SupportVector) -> Result<usize> {
    if a.p() != b.p() {
        return Err(Error::DimensionMismatch { expected: a.p(), got: b.p() });
    }
    let (mut i, mut j, mut count) = (0, 0, 0);
    let (x, y) = (a.indices(), b.indices());
    while i < x.len() && j < y.len() {
        match x[i].cmp(&y[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    Ok(count)
}

/// log P(S = s) for S ~ Hyp(p, k, k).
pub fn hyp_log_pmf(p: usize, k: usize, s: usize) -> Result<f64> {
    if k > p || s > k {
        return Err(Error::OutOfRange(format!("need 0 <= s <= k <= p, got p={p}, k={k}, s={s}")));
    }
    if k - s > p - k {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(ln_choose(k, s) + ln_choose(p - k, k - s) - ln_choose(p, k))
}

/// C(k, s) (k / (p - k + 1))^s, an upper bound on P(S = s) for s >= 1.
pub fn hyp_pmf_upper_bound(p: usize, k: usize, s: usize) -> Result<f64> {
    if s == 0 {
        return Err(Error::OutOfRange("the pmf bound is stated for s in 1..=k".into()));
    }
    if k > p || s > k {
        return Err(Error::OutOfRange(format!("need 1 <= s <= k <= p, got p={p}, k={k}, s={s}")));
    }
    let ratio = k as f64 / (p - k + 1) as f64;
    Ok((ln_choose(k, s) + s as f64 * ratio.ln()).exp())
}

/// The law of the overlap between two independent uniform k-subsets of [0, p).
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapLaw {
    p: usize,
    k: usize,
    log_pmf: Vec<f64>,
}

impl OverlapLaw {
    pub fn new(p: usize, k: usize) -> Result<Self> {
        if k > p {
            return Err(Error::OutOfRange(format!("need k <= p, got p={p}, k={k}")));
        }
        let log_pmf = (0..=k).map(|s| hyp_log_pmf(p, k, s)).collect::<Result<_>>()?;
        Ok(OverlapLaw { p, k, log_pmf })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn log_pmf(&self) -> &[f64] {
        &self.log_pmf
    }

    pub fn pmf(&self, s: usize) -> f64 {
        self.log_pmf.get(s).map_or(0.0, |l| l.exp())
    }
}

/// Colexicographic rank of a sorted k-subset: sum_i C(a_i, i + 1).
pub fn rank(indices: &[usize]) -> u128 {
    indices
        .iter()
        .enumerate()
        .map(|(i, &a)| binomial(a as u64, i as u64 + 1).expect("rank overflow"))
        .sum()
}

/// Inverse of [`rank`] for subsets of size `k`.
pub fn unrank(mut r: u128, k: usize) -> Vec<usize> {
    let mut out = vec![0; k];
    for i in (0..k).rev() {
        // largest a with C(a, i + 1) <= r
        let mut a = i;
        while binomial(a as u64 + 1, i as u64 + 1).is_some_and(|c| c <= r) {
            a += 1;
        }
        r -= binomial(a as u64, i as u64 + 1).unwrap();
        out[i] = a;
    }
    out
}

/// Walks every k-subset of [0, p) once, in colexicographic order.
#[derive(Debug, Clone)]
pub struct SupportEnumerator {
    p: usize,
    k: usize,
    total: u128,
    cursor: u128,
    current: Vec<usize>,
}

impl SupportEnumerator {
    pub fn total(&self) -> u128 {
        self.total
    }

    pub fn cursor(&self) -> u128 {
        self.cursor
    }

    /// Advances and returns the next subset as a borrowed slice.
    pub fn next_indices(&mut self) -> Option<&[usize]> {
        if self.cursor >= self.total {
            return None;
        }
        if self.cursor > 0 {
            let k = self.k;
            let c = &mut self.current;
            let mut i = 0;
            while i + 1 < k && c[i] + 1 == c[i + 1] {
                i += 1;
            }
            c[i] += 1;
            for (j, v) in c.iter_mut().enumerate().take(i) {
                *v = j;
            }
        }
        self.cursor += 1;
        Some(&self.current)
    }
}

impl Iterator for SupportEnumerator {
    type Item = SupportVector;

    fn next(&mut self) -> Option<SupportVector> {
        let p = self.p;
        self.next_indices()
            .map(|s| SupportVector::from_sorted_unchecked(s.to_vec(), p))
    }
}

pub fn enumerate_supports(p: usize, k: usize) -> Result<SupportEnumerator> {
    enumerate_supports_with_budget(p, k, DEFAULT_ENUMERATION_BUDGET)
}

pub fn enumerate_supports_with_budget(p: usize, k: usize, budget: u128) -> Result<SupportEnumerator> {
    if k == 0 || k > p {
        return Err(Error::InvalidParams(format!("need 1 <= k <= p, got p={p}, k={k}")));
    }
    let total = check_budget(p, k, budget)?;
    Ok(SupportEnumerator { p, k, total, cursor: 0, current: (0..k).collect() })
}

/// C(p, k), or `BudgetExceeded` when it is over `budget`.
pub fn check_budget(p: usize, k: usize, budget: u128) -> Result<u128> {
    match binomial(p as u64, k as u64) {
        Some(total) if total <= budget => Ok(total),
        other => Err(Error::BudgetExceeded {
            what: format!("enumerating all {k}-subsets of {p} coordinates"),
            needed: other.unwrap_or(u128::MAX),
            budget,
            hint: "reduce p or k".into(),
        }),
    }
}
