//! Sweeps over the sample size, TOML configuration, and CSV/JSON output.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::combinatorics::binomial;
use crate::detection::{test_risk_mc, Rule};
use crate::divergence::mc_divergences;
use crate::error::{Error, Result};
use crate::estimators::{mle_failure_mc, mle_tail_bound, mmse_mc};
use crate::model::{ModelParams, Seed};

pub const DEFAULT_RATIOS: [f64; 8] = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 3.0];
pub const DEFAULT_COMPUTE_BUDGET: u64 = 1_000_000_000;

pub const CSV_HEADER: &str = "n,n_over_nstar,mmse_ratio,mmse_se,mle_fail_rate,detect_risk_residual,\
detect_risk_linear,chi2_exact,kl_mc,tv_mc,wall_time_s";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Mmse,
    MleRisk,
    DetectResidual,
    DetectLinear,
    Divergence,
}

impl Task {
    pub const ALL: [Task; 5] = [Task::Mmse, Task::MleRisk, Task::DetectResidual, Task::DetectLinear, Task::Divergence];

    fn label(self) -> u64 {
        self as u64 + 1
    }

    pub fn parse(s: &str) -> Result<Task> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "mmse" => Ok(Task::Mmse),
            "mle_risk" => Ok(Task::MleRisk),
            "detect_residual" => Ok(Task::DetectResidual),
            "detect_linear" => Ok(Task::DetectLinear),
            "divergence" => Ok(Task::Divergence),
            other => Err(Error::Config(format!(
                "unknown task '{other}' (expected mmse, mle_risk, detect_residual, detect_linear, divergence)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpec {
    Counts(Vec<usize>),
    /// Multiples of n*, rounded up.
    Ratios(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaChoice {
    MatchedLambda0,
    Explicit(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub p: usize,
    pub k: usize,
    pub sigma2: f64,
    pub grid: GridSpec,
    pub trials: usize,
    pub seed: u64,
    pub tasks: Vec<Task>,
    pub lambda: LambdaChoice,
    pub alpha: f64,
    /// Cap on C(p,k) * trials * grid points.
    pub budget: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            p: 24,
            k: 3,
            sigma2: 0.03,
            grid: GridSpec::Ratios(DEFAULT_RATIOS.to_vec()),
            trials: 200,
            seed: 0,
            tasks: Task::ALL.to_vec(),
            lambda: LambdaChoice::MatchedLambda0,
            alpha: 0.1,
            budget: DEFAULT_COMPUTE_BUDGET,
        }
    }
}

/// On-disk configuration. Every key is optional; missing keys take the
/// defaults of [`SweepConfig`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub p: Option<usize>,
    pub k: Option<usize>,
    pub sigma2: Option<f64>,
    /// Only read by the single-point commands.
    pub n: Option<usize>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub ratios: Option<Vec<f64>>,
    pub counts: Option<Vec<usize>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub tasks: Option<Vec<String>>,
    pub alpha: Option<f64>,
    pub budget: Option<u64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_sweep_config(&self) -> Result<SweepConfig> {
        let mut c = SweepConfig::default();
        let m = &self.model;
        let s = &self.sweep;
        c.p = m.p.unwrap_or(c.p);
        c.k = m.k.unwrap_or(c.k);
        c.sigma2 = m.sigma2.unwrap_or(c.sigma2);
        if let Some(l) = m.lambda {
            c.lambda = LambdaChoice::Explicit(l);
        }
        c.grid = match (&s.ratios, &s.counts) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either sweep.ratios or sweep.counts, not both".into()))
            }
            (Some(r), None) => GridSpec::Ratios(r.clone()),
            (None, Some(n)) => GridSpec::Counts(n.clone()),
            (None, None) => c.grid,
        };
        c.trials = s.trials.unwrap_or(c.trials);
        c.seed = s.seed.unwrap_or(c.seed);
        if let Some(t) = &s.tasks {
            c.tasks = t.iter().map(|x| Task::parse(x)).collect::<Result<_>>()?;
        }
        c.alpha = s.alpha.unwrap_or(c.alpha);
        c.budget = s.budget.unwrap_or(c.budget);
        c.normalize();
        Ok(c)
    }
}

impl SweepConfig {
    /// Sorts and deduplicates the task list.
    pub fn normalize(&mut self) {
        self.tasks.sort();
        self.tasks.dedup();
    }

    pub fn base_params(&self) -> Result<ModelParams> {
        let base = ModelParams::new(self.p, self.k, self.sigma2, 0)?;
        match self.lambda {
            LambdaChoice::MatchedLambda0 => Ok(base),
            LambdaChoice::Explicit(l) => base.with_lambda(l),
        }
    }

    /// Sample sizes of the grid, in order.
    pub fn grid_counts(&self) -> Result<Vec<usize>> {
        let base = self.base_params()?;
        let n_star = base.critical_sample_size()?;
        let counts = match &self.grid {
            GridSpec::Counts(c) => c.clone(),
            GridSpec::Ratios(r) => r
                .iter()
                .map(|&x| {
                    if x.is_finite() && x >= 0.0 {
                        Ok((x * n_star).ceil() as usize)
                    } else {
                        Err(Error::Config(format!("grid ratios must be finite and >= 0, got {x}")))
                    }
                })
                .collect::<Result<_>>()?,
        };
        if counts.is_empty() {
            return Err(Error::Config("the sample-size grid is empty".into()));
        }
        Ok(counts)
    }

    pub fn validate(&self) -> Result<Vec<usize>> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        let counts = self.grid_counts()?;
        if self.tasks.is_empty() {
            return Ok(counts);
        }
        let supports = binomial(self.p as u64, self.k as u64).unwrap_or(u128::MAX);
        let needed = supports
            .saturating_mul(self.trials as u128)
            .saturating_mul(counts.len() as u128);
        if needed > self.budget as u128 {
            return Err(Error::BudgetExceeded {
                what: format!(
                    "sweep (C({},{}) = {supports} supports x {} trials x {} grid points)",
                    self.p,
                    self.k,
                    self.trials,
                    counts.len()
                ),
                needed,
                budget: self.budget as u128,
                hint: "lower trials, shorten the grid, or shrink p or k; raise --budget only if the run time is acceptable"
                    .into(),
            });
        }
        Ok(counts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub n_over_nstar: f64,
    pub mmse_ratio: Option<f64>,
    /// Standard error of `mmse_ratio`.
    pub mmse_se: Option<f64>,
    pub mle_fail_rate: Option<f64>,
    pub detect_risk_residual: Option<f64>,
    pub detect_risk_linear: Option<f64>,
    pub chi2_exact: Option<f64>,
    pub kl_mc: Option<f64>,
    pub tv_mc: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Zeroes the timing column so that outputs compare byte for byte.
    pub fn without_timing(mut self) -> Self {
        for r in &mut self.rows {
            r.wall_time_s = 0.0;
        }
        self
    }
}

pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    let mut config = config.clone();
    config.normalize();
    let counts = config.validate()?;
    let base = config.base_params()?;
    let n_star = base.critical_sample_size()?;
    let lambda = base.lambda;
    let root = Seed::new(config.seed);
    let mut rows = Vec::with_capacity(counts.len());

    for (i, &n) in counts.iter().enumerate() {
        let start = Instant::now();
        let params = base.with_n(n);
        let seed_for = |t: Task| root.derive(t.label()).derive(i as u64);
        let mut row = SweepRow {
            n,
            n_over_nstar: n as f64 / n_star,
            mmse_ratio: None,
            mmse_se: None,
            mle_fail_rate: None,
            detect_risk_residual: None,
            detect_risk_linear: None,
            chi2_exact: None,
            kl_mc: None,
            tv_mc: None,
            wall_time_s: 0.0,
        };
        for &task in &config.tasks {
            let seed = seed_for(task);
            match task {
                Task::Mmse => {
                    let r = mmse_mc(&params, config.trials, seed)?;
                    row.mmse_ratio = Some(r.ratio);
                    row.mmse_se = Some(r.ratio_se);
                }
                Task::MleRisk => {
                    let threshold = mle_tail_bound(&params)?.threshold;
                    row.mle_fail_rate = Some(mle_failure_mc(&params, threshold, config.trials, seed)?.mean);
                }
                Task::DetectResidual => {
                    if n > 0 {
                        let r = test_risk_mc(&params, Rule::ResidualRatio, config.alpha, config.trials, seed)?;
                        row.detect_risk_residual = Some(r.sum);
                    }
                }
                Task::DetectLinear => {
                    let r = test_risk_mc(&params, Rule::LinearCorr, config.alpha, config.trials, seed)?;
                    row.detect_risk_linear = Some(r.sum);
                }
                Task::Divergence => {
                    let r = mc_divergences(&params, lambda, config.trials, seed)?;
                    row.chi2_exact = r.chi2_exact;
                    row.kl_mc = Some(r.kl_mc);
                    row.tv_mc = Some(r.tv_mc);
                }
            }
        }
        row.wall_time_s = start.elapsed().as_secs_f64();
        rows.push(row);
    }
    Ok(SweepResult { config, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

/// printf-style `%.{digits}g`.
pub fn format_g(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if exp < -4 || exp >= digits as i32 {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp) as usize;
        strip_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format_g(v, 10)).unwrap_or_default()
}

pub fn to_csv(result: &SweepResult) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &result.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            format_g(r.n_over_nstar, 10),
            opt(r.mmse_ratio),
            opt(r.mmse_se),
            opt(r.mle_fail_rate),
            opt(r.detect_risk_residual),
            opt(r.detect_risk_linear),
            opt(r.chi2_exact),
            opt(r.kl_mc),
            opt(r.tv_mc),
            format_g(r.wall_time_s, 10),
        );
    }
    out
}

pub fn to_json(result: &SweepResult) -> Result<String> {
    let mut s = serde_json::to_string_pretty(result).map_err(|e| Error::Serialization(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn render(result: &SweepResult, format: Format) -> Result<String> {
    match format {
        Format::Csv => Ok(to_csv(result)),
        Format::Json => to_json(result),
    }
}

pub fn emit(result: &SweepResult, format: Format, path: &Path) -> Result<()> {
    std::fs::write(path, render(result, format)?)?;
    Ok(())
}

pub fn parse_json(text: &str) -> Result<SweepResult> {
    serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))
}
