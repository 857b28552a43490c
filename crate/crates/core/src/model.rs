//! Problem parameters, supports, instances and the three samplers
//! (planted, null, conditioned planted).

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::divergence::{event_holds, ConditioningParams};
use crate::error::{Error, Result};

/// Dimensions and noise level of one regression problem.
///
/// `lambda` is the scale of the null model `Y = lambda * W`; [`ModelParams::new`]
/// sets it to the covariance-matched value `lambda0 = sqrt(k/sigma2 + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub p: usize,
    pub k: usize,
    pub sigma2: f64,
    pub n: usize,
    pub lambda: f64,
}

impl ModelParams {
    pub fn new(p: usize, k: usize, sigma2: f64, n: usize) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::InvalidParams(format!(
                "sigma2 must be a positive finite real, got {sigma2}"
            )));
        }
        let lambda = (k as f64 / sigma2 + 1.0).sqrt();
        Self::with_all(p, k, sigma2, n, lambda)
    }

    pub fn with_all(p: usize, k: usize, sigma2: f64, n: usize, lambda: f64) -> Result<Self> {
        if k == 0 || k > p {
            return Err(Error::InvalidParams(format!("need 1 <= k <= p, got p={p}, k={k}")));
        }
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::InvalidParams(format!(
                "sigma2 must be a positive finite real, got {sigma2}"
            )));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParams(format!("lambda must be positive, got {lambda}")));
        }
        Ok(ModelParams { p, k, sigma2, n, lambda })
    }

    pub fn with_n(self, n: usize) -> Self {
        ModelParams { n, ..self }
    }

    pub fn with_lambda(self, lambda: f64) -> Result<Self> {
        Self::with_all(self.p, self.k, self.sigma2, self.n, lambda)
    }

    /// k / sigma2.
    pub fn snr(&self) -> f64 {
        self.k as f64 / self.sigma2
    }

    pub fn lambda0(&self) -> f64 {
        (self.snr() + 1.0).sqrt()
    }

    /// Error of the trivial estimator `E[beta] = (k/p) * 1`.
    pub fn mse0(&self) -> f64 {
        let k = self.k as f64;
        k * (1.0 - k / self.p as f64)
    }

    pub fn critical_sample_size(&self) -> Result<f64> {
        critical_sample_size(self)
    }
}

/// n* = 2k log(p/k) / log(1 + k/sigma2).
pub fn critical_sample_size(params: &ModelParams) -> Result<f64> {
    if params.k >= params.p {
        return Err(Error::Precondition(format!(
            "critical sample size needs k < p, got p={}, k={}",
            params.p, params.k
        )));
    }
    let k = params.k as f64;
    Ok(2.0 * k * (params.p as f64 / k).ln() / params.snr().ln_1p())
}

/// A binary k-sparse vector stored as its strictly increasing support.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SupportVector {
    indices: Vec<usize>,
    p: usize,
}

impl SupportVector {
    pub fn new(indices: Vec<usize>, p: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidParams("support must be nonempty".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParams(format!(
                "support indices must be strictly increasing: {indices:?}"
            )));
        }
        if let Some(&last) = indices.last() {
            if last >= p {
                return Err(Error::OutOfRange(format!("index {last} >= p = {p}")));
            }
        }
        Ok(SupportVector { indices, p })
    }

    /// Builds from any ordering of distinct indices.
    pub fn from_unsorted(mut indices: Vec<usize>, p: usize) -> Result<Self> {
        indices.sort_unstable();
        Self::new(indices, p)
    }

    pub(crate) fn from_sorted_unchecked(indices: Vec<usize>, p: usize) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        SupportVector { indices, p }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> usize {
        self.indices.len()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.p];
        for &j in &self.indices {
            v[j] = 1.0;
        }
        v
    }
}

/// Row-major dense matrix; rows are observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// X * beta for a binary support.
    pub fn mul_support(&self, support: &[usize]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| {
                let row = self.row(i);
                support.iter().map(|&j| row[j]).sum()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    Planted,
    Null,
    ConditionedPlanted,
}

/// One draw of (X, Y), with the hidden support when there is one.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    x: Matrix,
    y: Vec<f64>,
    truth: Option<SupportVector>,
    origin: Origin,
}

impl Instance {
    pub fn new(x: Matrix, y: Vec<f64>, truth: Option<SupportVector>, origin: Origin) -> Result<Self> {
        if y.len() != x.rows() {
            return Err(Error::DimensionMismatch { expected: x.rows(), got: y.len() });
        }
        match (&truth, origin) {
            (None, Origin::Planted | Origin::ConditionedPlanted) => {
                return Err(Error::InvalidParams("planted instance requires a truth support".into()))
            }
            (Some(_), Origin::Null) => {
                return Err(Error::InvalidParams("null instance cannot carry a truth support".into()))
            }
            (Some(t), _) if t.p() != x.cols() => {
                return Err(Error::DimensionMismatch { expected: x.cols(), got: t.p() })
            }
            _ => {}
        }
        Ok(Instance { x, y, truth, origin })
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn truth(&self) -> Option<&SupportVector> {
        self.truth.as_ref()
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    /// Checks that the instance has the shape `params` describes.
    pub fn check_shape(&self, params: &ModelParams) -> Result<()> {
        if self.p() != params.p {
            return Err(Error::DimensionMismatch { expected: params.p, got: self.p() });
        }
        if self.n() != params.n {
            return Err(Error::DimensionMismatch { expected: params.n, got: self.n() });
        }
        Ok(())
    }
}

/// Reproducible RNG key. Stream `t` of a given value is trial `t` of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed {
    pub value: u64,
    pub stream: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Seed {
    pub fn new(value: u64) -> Self {
        Seed { value, stream: 0 }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.value);
        rng.set_stream(self.stream);
        rng
    }

    /// Same key, different stream.
    pub fn trial(&self, t: u64) -> Seed {
        Seed { value: self.value, stream: t }
    }

    /// A child key for a labelled sub-task; mixes the current stream in so
    /// that `derive` on different trials gives unrelated children.
    pub fn derive(&self, label: u64) -> Seed {
        let mixed = splitmix64(self.value ^ splitmix64(label ^ splitmix64(self.stream)));
        Seed { value: mixed, stream: 0 }
    }
}

/// Uniform k-subset of [0, p) by a partial Fisher-Yates shuffle that only
/// records the displaced positions.
pub fn sample_support<R: Rng + ?Sized>(rng: &mut R, p: usize, k: usize) -> SupportVector {
    let mut swaps: Vec<(usize, usize)> = Vec::with_capacity(k);
    let lookup = |swaps: &[(usize, usize)], i: usize| {
        swaps.iter().rev().find(|(pos, _)| *pos == i).map_or(i, |&(_, v)| v)
    };
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let j = rng.random_range(i..p);
        let vj = lookup(&swaps, j);
        let vi = lookup(&swaps, i);
        swaps.push((j, vi));
        out.push(vj);
    }
    out.sort_unstable();
    SupportVector::from_sorted_unchecked(out, p)
}

fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Matrix { rows, cols, data }
}

fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn draw_planted<R: Rng + ?Sized>(rng: &mut R, params: &ModelParams) -> (Matrix, Vec<f64>, SupportVector) {
    let truth = sample_support(rng, params.p, params.k);
    let x = gaussian_matrix(rng, params.n, params.p);
    let w = gaussian_vec(rng, params.n, params.sigma2.sqrt());
    let signal = x.mul_support(truth.indices());
    let y = signal.iter().zip(&w).map(|(s, w)| s + w).collect();
    (x, y, truth)
}

/// Y = X beta + W with beta uniform over k-subsets.
pub fn sample_planted(params: &ModelParams, seed: Seed) -> Instance {
    let mut rng = seed.rng();
    let (x, y, truth) = draw_planted(&mut rng, params);
    Instance { x, y, truth: Some(truth), origin: Origin::Planted }
}

/// Y = lambda W, independent of X.
pub fn sample_null(params: &ModelParams, seed: Seed) -> Instance {
    let mut rng = seed.rng();
    let x = gaussian_matrix(&mut rng, params.n, params.p);
    let y = gaussian_vec(&mut rng, params.n, params.lambda * params.sigma2.sqrt());
    Instance { x, y, truth: None, origin: Origin::Null }
}

/// Planted draws restricted to the conditioning event, by rejection.
pub fn sample_conditioned_planted(
    params: &ModelParams,
    cond: &ConditioningParams,
    seed: Seed,
    max_rejects: usize,
) -> Result<Instance> {
    if max_rejects == 0 {
        return Err(Error::Precondition("max_rejects must be at least 1".into()));
    }
    cond.check_for(params)?;
    let mut rng = seed.rng();
    for _ in 0..max_rejects {
        let (x, y, truth) = draw_planted(&mut rng, params);
        if event_holds(&x, &truth, params, cond)? {
            return Ok(Instance { x, y, truth: Some(truth), origin: Origin::ConditionedPlanted });
        }
    }
    Err(Error::RejectionBudgetExhausted { attempts: max_rejects })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: usize, k: usize, sigma2: f64, n: usize) -> ModelParams {
        ModelParams::new(p, k, sigma2, n).unwrap()
    }

    #[test]
    fn derived_quantities() {
        let m = params(16, 2, 2.0 / 3.0, 6);
        assert!((m.snr() - 3.0).abs() < 1e-12);
        assert!((m.lambda0() - 2.0).abs() < 1e-12);
        assert!((m.mse0() - 2.0 * (1.0 - 2.0 / 16.0)).abs() < 1e-12);
        assert_eq!(m.lambda, m.lambda0());
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ModelParams::new(4, 0, 1.0, 1).is_err());
        assert!(ModelParams::new(4, 5, 1.0, 1).is_err());
        assert!(ModelParams::new(4, 2, 0.0, 1).is_err());
        assert!(ModelParams::new(4, 2, f64::NAN, 1).is_err());
        assert!(ModelParams::with_all(4, 2, 1.0, 1, -1.0).is_err());
    }

    #[test]
    fn critical_sample_size_examples() {
        // 4 log 8 / log 4 = 6 exactly
        let n_star = params(16, 2, 2.0 / 3.0, 0).critical_sample_size().unwrap();
        assert!((n_star - 6.0).abs() < 1e-12);

        // 6 ln 8 / ln 101 = 2.7034...
        let n_star = params(24, 3, 0.03, 0).critical_sample_size().unwrap();
        assert!((n_star - 2.703).abs() < 5e-4);

        assert!(params(4, 4, 1.0, 0).critical_sample_size().is_err());
    }

    #[test]
    fn critical_sample_size_unit_logs() {
        // log(p/k) = 1 and log(1 + k/sigma2) = 1 gives n* = 2k. p must be an
        // integer, so evaluate the formula through the real-valued route.
        let k = 3.0_f64;
        let e = std::f64::consts::E;
        let sigma2 = k / (e - 1.0);
        let n_star = 2.0 * k * (e * k / k).ln() / (k / sigma2).ln_1p();
        assert!((n_star - 2.0 * k).abs() < 1e-12);
    }

    #[test]
    fn support_validation() {
        assert!(SupportVector::new(vec![0, 2, 5], 6).is_ok());
        assert!(SupportVector::new(vec![0, 2, 2], 6).is_err());
        assert!(SupportVector::new(vec![3, 1], 6).is_err());
        assert!(SupportVector::new(vec![6], 6).is_err());
        let s = SupportVector::from_unsorted(vec![4, 1], 5).unwrap();
        assert_eq!(s.indices(), &[1, 4]);
        assert_eq!(s.to_dense(), vec![0.0, 1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn planted_with_zero_rows() {
        let m = params(6, 2, 1.0, 0);
        let inst = sample_planted(&m, Seed::new(3));
        assert_eq!(inst.n(), 0);
        assert_eq!(inst.p(), 6);
        assert!(inst.y().is_empty());
        assert_eq!(inst.truth().unwrap().k(), 2);
    }

    #[test]
    fn planted_is_deterministic() {
        let m = params(10, 3, 0.5, 4);
        let a = sample_planted(&m, Seed { value: 11, stream: 5 });
        let b = sample_planted(&m, Seed { value: 11, stream: 5 });
        assert_eq!(a, b);
        let c = sample_planted(&m, Seed { value: 11, stream: 6 });
        assert_ne!(a, c);
    }

    #[test]
    fn full_support_when_k_equals_p() {
        let m = params(4, 4, 1.0, 2);
        for s in 0..20 {
            let inst = sample_planted(&m, Seed::new(s));
            assert_eq!(inst.truth().unwrap().indices(), &[0, 1, 2, 3]);
        }
    }

    #[test]
    fn planted_y_is_signal_plus_noise() {
        let m = params(8, 2, 1e-30, 3);
        let inst = sample_planted(&m, Seed::new(1));
        let xb = inst.x().mul_support(inst.truth().unwrap().indices());
        for (a, b) in xb.iter().zip(inst.y()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn null_is_deterministic_and_truthless() {
        let m = params(5, 2, 1.0, 3);
        let a = sample_null(&m, Seed::new(9));
        assert_eq!(a, sample_null(&m, Seed::new(9)));
        assert!(a.truth().is_none());
        assert_eq!(a.origin(), Origin::Null);
    }

    #[test]
    fn instance_invariants_enforced() {
        let x = Matrix::zeros(2, 3);
        let t = SupportVector::new(vec![1], 3).unwrap();
        assert!(Instance::new(x.clone(), vec![0.0; 2], None, Origin::Planted).is_err());
        assert!(Instance::new(x.clone(), vec![0.0; 2], Some(t.clone()), Origin::Null).is_err());
        assert!(Instance::new(x.clone(), vec![0.0; 3], Some(t.clone()), Origin::Planted).is_err());
        assert!(Instance::new(x, vec![0.0; 2], Some(t), Origin::Planted).is_ok());
    }

    #[test]
    fn seed_streams_differ() {
        let s = Seed::new(42);
        let a: u64 = s.trial(0).rng().random();
        let b: u64 = s.trial(1).rng().random();
        let c: u64 = s.derive(1).rng().random();
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(s.derive(7), s.derive(7));
        assert_ne!(s.trial(1).derive(7), s.trial(2).derive(7));
    }

    #[test]
    fn conditioned_rejects_zero_budget() {
        let m = params(6, 2, 1.0, 2);
        let cond = ConditioningParams::new(1.0, 1.0, 2).unwrap();
        assert!(matches!(
            sample_conditioned_planted(&m, &cond, Seed::new(1), 0),
            Err(Error::Precondition(_))
        ));
    }
}
