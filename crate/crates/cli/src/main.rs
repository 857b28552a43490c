use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use aon_core::bounds::{render_table, run_bounds, BoundsOptions};
use aon_core::combinatorics::binomial;
use aon_core::detection::{detection_sample_condition, residual_threshold, test_risk_mc, Rule, DEFAULT_GROWTH_SLACK};
use aon_core::divergence::{mc_divergences, pinsker_check};
use aon_core::estimators::{mle_failure_mc, mle_tail_bound, mmse_mc};
use aon_core::sweep::{self, ConfigFile, Format, GridSpec, LambdaChoice, SweepConfig, Task, DEFAULT_COMPUTE_BUDGET};
use aon_core::{Error, ModelParams, Result, Seed};

#[derive(Parser, Debug)]
#[command(name = "aon", version, about = "Sparse regression phase-transition laboratory")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML configuration file with [model] and [sweep] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 picks automatically.
    #[arg(long, global = true, env = "AON_THREADS", default_value_t = 0)]
    threads: usize,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutFormat>,
    /// Cap on C(p,k) x trials x grid points.
    #[arg(long, global = true)]
    budget: Option<u64>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    /// Null-model noise scale; defaults to the covariance-matched value.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every configured task across a grid of sample sizes.
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        /// Grid as multiples of n* (comma separated).
        #[arg(long, value_delimiter = ',', conflicts_with = "counts")]
        ratios: Option<Vec<f64>>,
        /// Grid as sample counts (comma separated).
        #[arg(long, value_delimiter = ',')]
        counts: Option<Vec<usize>>,
        /// Tasks to run (comma separated).
        #[arg(long, value_delimiter = ',')]
        tasks: Option<Vec<String>>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Write 0 in the timing column so reruns compare byte for byte.
        #[arg(long)]
        omit_wall_time: bool,
    },
    /// Exact and Monte Carlo chi-square, KL and TV at one sample size.
    Divergence {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Detection risk of one rule at one sample size.
    Detect {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "residual")]
        rule: RuleArg,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
    },
    /// MMSE and MLE failure rate at one sample size.
    Estimate {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Check every identity and bound and print a PASS/FAIL table.
    Bounds {
        /// A tenth of the default Monte Carlo effort.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum RuleArg {
    Residual,
    Linear,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_user_error() { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.global.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.global.threads)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
    }
    let file = match &cli.global.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let g = &cli.global;
    let text = match cli.command {
        Command::Sweep { model, ratios, counts, tasks, alpha, omit_wall_time } => {
            let mut c = file.to_sweep_config()?;
            apply_model(&mut c, &model);
            if let Some(r) = ratios {
                c.grid = GridSpec::Ratios(r);
            }
            if let Some(n) = counts {
                c.grid = GridSpec::Counts(n);
            }
            if let Some(t) = tasks {
                c.tasks = t.iter().map(|x| Task::parse(x)).collect::<Result<_>>()?;
            }
            if let Some(a) = alpha {
                c.alpha = a;
            }
            if let Some(s) = g.seed {
                c.seed = s;
            }
            if let Some(b) = g.budget {
                c.budget = b;
            }
            let mut result = sweep::run_sweep(&c)?;
            if omit_wall_time {
                result = result.without_timing();
            }
            let format = match g.format.unwrap_or(OutFormat::Csv) {
                OutFormat::Csv => Format::Csv,
                OutFormat::Json => Format::Json,
            };
            sweep::render(&result, format)?
        }
        Command::Divergence { model } => {
            let (params, trials, seed) = point(&file, &model, g, 10_000)?;
            let r = mc_divergences(&params, params.lambda, trials, seed)?;
            let chain = pinsker_check(&r, 3.0);
            let mut kv = vec![
                ("p", params.p as f64),
                ("k", params.k as f64),
                ("sigma2", params.sigma2),
                ("n", params.n as f64),
                ("lambda", r.lambda),
                ("trials", trials as f64),
            ];
            if let Some(c) = r.chi2_exact {
                kv.push(("chi2_exact", c));
            }
            kv.extend([
                ("chi2_mc", r.chi2_mc),
                ("chi2_se", r.chi2_se),
                ("kl_mc", r.kl_mc),
                ("kl_se", r.kl_se),
                ("tv_mc", r.tv_mc),
                ("tv_se", r.tv_se),
                ("pinsker_chain_holds", chain.holds as u8 as f64),
            ]);
            render_kv(&kv, g.format)
        }
        Command::Detect { model, rule, alpha } => {
            let (params, trials, seed) = point(&file, &model, g, 1_000)?;
            let rule = match rule {
                RuleArg::Residual => Rule::ResidualRatio,
                RuleArg::Linear => Rule::LinearCorr,
            };
            let r = test_risk_mc(&params, rule, alpha, trials, seed)?;
            let mut kv = vec![
                ("n", params.n as f64),
                ("lambda", params.lambda),
                ("trials_per_model", trials as f64),
                ("type1", r.type1),
                ("type2", r.type2),
                ("sum", r.sum),
                ("se", r.se),
            ];
            if rule == Rule::ResidualRatio {
                kv.push(("threshold", residual_threshold(&params, alpha)?));
                if let Ok(c) = detection_sample_condition(&params, alpha, DEFAULT_GROWTH_SLACK) {
                    kv.push(("required_n", c.required_n));
                    kv.push(("sample_condition_holds", (c.cond1 && c.cond2) as u8 as f64));
                }
            }
            render_kv(&kv, g.format)
        }
        Command::Estimate { model } => {
            let (params, trials, seed) = point(&file, &model, g, 500)?;
            let r = mmse_mc(&params, trials, seed.derive(1))?;
            let tail = mle_tail_bound(&params)?;
            let fail = mle_failure_mc(&params, tail.threshold, trials, seed.derive(2))?;
            let kv = vec![
                ("n", params.n as f64),
                ("n_over_nstar", params.n as f64 / params.critical_sample_size()?),
                ("mse0", r.mse0),
                ("mmse", r.mmse),
                ("mmse_se", r.se),
                ("mmse_ratio", r.ratio),
                ("mmse_ratio_se", r.ratio_se),
                ("mle_sq_err", r.mle_sq_err.mean),
                ("mle_sq_err_se", r.mle_sq_err.se),
                ("mle_fail_threshold", tail.threshold as f64),
                ("mle_fail_rate", fail.mean),
                ("mle_fail_bound", tail.bound),
            ];
            render_kv(&kv, g.format)
        }
        Command::Bounds { quick } => {
            let seed = Seed::new(g.seed.unwrap_or(0));
            let opts = if quick { BoundsOptions::quick(seed) } else { BoundsOptions { seed, ..BoundsOptions::default() } };
            let rows = run_bounds(&opts)?;
            match g.format {
                Some(OutFormat::Json) => {
                    serde_json::to_string_pretty(&rows).map_err(|e| Error::Serialization(e.to_string()))? + "\n"
                }
                Some(OutFormat::Csv) => {
                    let mut s = String::from("result,check,lhs,rhs,slack,case\n");
                    for r in &rows {
                        s.push_str(&format!(
                            "{},{},{},{},{},\"{}\"\n",
                            if r.pass { "PASS" } else { "FAIL" },
                            r.check,
                            sweep::format_g(r.lhs, 10),
                            sweep::format_g(r.rhs, 10),
                            sweep::format_g(r.slack, 10),
                            r.case
                        ));
                    }
                    s
                }
                None => render_table(&rows),
            }
        }
    };
    match &cli.global.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn apply_model(c: &mut SweepConfig, m: &ModelArgs) {
    if let Some(p) = m.p {
        c.p = p;
    }
    if let Some(k) = m.k {
        c.k = k;
    }
    if let Some(s) = m.sigma2 {
        c.sigma2 = s;
    }
    if let Some(l) = m.lambda {
        c.lambda = LambdaChoice::Explicit(l);
    }
    if let Some(t) = m.trials {
        c.trials = t;
    }
}

/// Parameters for the single-point commands: flags over config over defaults.
fn point(file: &ConfigFile, m: &ModelArgs, g: &Global, default_trials: usize) -> Result<(ModelParams, usize, Seed)> {
    let defaults = SweepConfig::default();
    let p = m.p.or(file.model.p).unwrap_or(defaults.p);
    let k = m.k.or(file.model.k).unwrap_or(defaults.k);
    let sigma2 = m.sigma2.or(file.model.sigma2).unwrap_or(defaults.sigma2);
    let n = m
        .n
        .or(file.model.n)
        .ok_or_else(|| Error::Config("the sample size is required (--n or model.n)".into()))?;
    let mut params = ModelParams::new(p, k, sigma2, n)?;
    if let Some(l) = m.lambda.or(file.model.lambda) {
        params = params.with_lambda(l)?;
    }
    let trials = m.trials.or(file.sweep.trials).unwrap_or(default_trials);
    let budget = g.budget.or(file.sweep.budget).unwrap_or(DEFAULT_COMPUTE_BUDGET);
    let supports = binomial(p as u64, k as u64).unwrap_or(u128::MAX);
    let needed = supports.saturating_mul(trials as u128);
    if needed > budget as u128 {
        return Err(Error::BudgetExceeded {
            what: format!("C({p},{k}) = {supports} supports x {trials} trials"),
            needed,
            budget: budget as u128,
            hint: "lower --trials or shrink p or k, or raise --budget".into(),
        });
    }
    let seed = Seed::new(g.seed.or(file.sweep.seed).unwrap_or(0));
    Ok((params, trials, seed))
}

/// Integral values print without a fractional part.
fn json_number(v: f64) -> serde_json::Value {
    if v.fract() == 0.0 && v.abs() < 9.007_199_254_740_992e15 {
        serde_json::json!(v as i64)
    } else {
        serde_json::json!(v)
    }
}

fn render_kv(kv: &[(&str, f64)], format: Option<OutFormat>) -> String {
    match format.unwrap_or(OutFormat::Json) {
        OutFormat::Csv => {
            let names: Vec<&str> = kv.iter().map(|(k, _)| *k).collect();
            let values: Vec<String> = kv.iter().map(|(_, v)| sweep::format_g(*v, 10)).collect();
            format!("{}\n{}\n", names.join(","), values.join(","))
        }
        OutFormat::Json => {
            let map: serde_json::Map<String, serde_json::Value> =
                kv.iter().map(|(k, v)| (k.to_string(), json_number(*v))).collect();
            serde_json::to_string_pretty(&map).unwrap_or_default() + "\n"
        }
    }
}
