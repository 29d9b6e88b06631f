//! Single-binary laboratory: simulate / estimate / rates / lowerbound / mc /
//! slope subcommands over the estimation library.
//!
//! Exit codes: 0 success, 2 usage error, 3 domain or precondition error,
//! 4 i/o error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nlinv_core::error::Error as CoreError;
use nlinv_core::estimators::{self, EstimatorConfig};
use nlinv_core::harness::{self, ExperimentConfig};
use nlinv_core::links::LinkKind;
use nlinv_core::lower_bounds;
use nlinv_core::model;
use nlinv_core::rates::{self, RateQuery};
use nlinv_core::spaces::parse_descriptor;
use nlinv_core::wavelet::{WaveletBasis, WaveletFamily};

#[derive(Parser)]
#[command(
    name = "nlinv",
    version,
    about = "Wavelet-threshold estimation lab for white-noise models with nonlinear links",
    max_term_width = 100
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one sequence-space observation; write the coefficient tree as CSV
    Simulate(SimulateArgs),
    /// Run the estimation pipeline on one simulated observation; write a grid CSV
    Estimate(EstimateArgs),
    /// Print the local rates and regime at a query value, or sweep a CSV table
    Rates(RatesArgs),
    /// Build a two-point lower-bound pair and verify its budget conditions
    Lowerbound(LowerboundArgs),
    /// Monte Carlo study: sup-ratio quantiles, coverage, and event frequencies
    Mc(McArgs),
    /// Fit log-log error slopes against the sample-size grid
    Slope(SlopeArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Link function
    #[arg(long, value_parser = parse_link)]
    link: LinkKind,
    /// Signal descriptor, e.g. "powerbump:x0=0.5,beta=2" or "constant:c=1"
    #[arg(long = "f", visible_alias = "fstar")]
    f: String,
    /// Sample size
    #[arg(long)]
    n: u64,
    /// RNG seed
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long, value_parser = parse_link)]
    link: LinkKind,
    #[arg(long = "f", visible_alias = "fstar")]
    f: String,
    #[arg(long)]
    n: u64,
    /// Threshold multiplier (> 2 sqrt 2)
    #[arg(long, default_value_t = 4.0)]
    tau: f64,
    /// Detector multiplier (> 1); log link only
    #[arg(long, default_value_t = 1.5)]
    sigma: f64,
    /// Smoothness input; required by the non-adaptive log-link estimator
    #[arg(long)]
    beta: Option<f64>,
    /// Output grid resolution
    #[arg(long, default_value_t = (1 << 12) + 1)]
    grid_size: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RatesArgs {
    #[arg(long, value_parser = parse_link)]
    link: LinkKind,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    n: u64,
    /// Signal value at the query point
    #[arg(long)]
    fx: Option<f64>,
    /// Detector multiplier entering the subpolynomial factor (log link)
    #[arg(long, default_value_t = 1.5)]
    sigma: f64,
    /// Constant C in the subpolynomial factor
    #[arg(long, default_value_t = 1.0)]
    mn_constant: f64,
    /// Emit a CSV sweep over fx instead of a single query
    #[arg(long)]
    table: bool,
    /// Sweep upper end (the sweep runs over [0, fx_max])
    #[arg(long, default_value_t = 1.0)]
    fx_max: f64,
    /// Sweep step count
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LowerboundArgs {
    #[arg(long, value_parser = parse_link)]
    link: LinkKind,
    /// Base function descriptor
    #[arg(long = "fstar", visible_alias = "f")]
    fstar: String,
    /// Query point
    #[arg(long, default_value_t = 0.5)]
    x0: f64,
    #[arg(long)]
    beta: f64,
    /// Class-ball radius
    #[arg(long = "R")]
    r_budget: f64,
    /// Sample size (single build), or the sweep start when --sweep is set
    #[arg(long)]
    n: u64,
    /// Sweep over this many doublings of n, emitting CSV rows
    #[arg(long, default_value_t = 0)]
    sweep: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Default)]
struct StudyArgs {
    /// Flat key=value config file; flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_link)]
    link: Option<LinkKind>,
    #[arg(long = "f", visible_alias = "fstar")]
    f: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long = "R")]
    r_budget: Option<f64>,
    /// Single sample size (shorthand for a one-point grid)
    #[arg(long)]
    n: Option<u64>,
    /// Comma-separated sample sizes
    #[arg(long)]
    n_grid: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated probe points
    #[arg(long)]
    probes: Option<String>,
    /// Worker threads (0 = library default)
    #[arg(long)]
    jobs: Option<usize>,
    /// Run with the noise turned off (diagnostic hook)
    #[arg(long)]
    noise_off: bool,
    /// CSV output path
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON mirror output path
    #[arg(long)]
    json: Option<PathBuf>,
    /// Directory for SVG plots
    #[arg(long)]
    plots: Option<PathBuf>,
    /// Include measured wall-clock times in outputs (breaks byte reproducibility)
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct McArgs {
    #[command(flatten)]
    study: StudyArgs,
}

#[derive(Args)]
struct SlopeArgs {
    #[command(flatten)]
    study: StudyArgs,
}

fn parse_link(s: &str) -> Result<LinkKind, String> {
    LinkKind::parse(s).map_err(|e| e.to_string())
}

struct Failure {
    code: u8,
    message: String,
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        let code = match e {
            CoreError::Io(_) => 4,
            CoreError::Parse(_) => 2,
            _ => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Rates(args) => cmd_rates(args),
        Command::Lowerbound(args) => cmd_lowerbound(args),
        Command::Mc(args) => cmd_mc(args.study),
        Command::Slope(args) => cmd_slope(args.study),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure {
            code: 4,
            message: format!("writing {}: {e}", path.display()),
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn basis_for(n: u64) -> Result<WaveletBasis, Failure> {
    Ok(WaveletBasis::new(
        WaveletFamily::Haar,
        model::finest_level(n).max(1),
    )?)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let f = parse_descriptor(&args.f)?;
    let basis = basis_for(args.n)?;
    let obs = model::simulate(&f, args.link, args.n, &basis, args.seed)?;
    let mut text = String::from("level,k,clean,noisy\n");
    for ((lvl, k, d), (_, _, y)) in obs.clean_tree.entries().zip(obs.y_tree.entries()) {
        let level = lvl.map_or(-1i64, |j| j as i64);
        text.push_str(&format!("{level},{k},{d},{y}\n"));
    }
    emit(args.out.as_ref(), &text)
}

fn cmd_estimate(args: EstimateArgs) -> Result<(), Failure> {
    if args.link == LinkKind::GaussVar && args.beta.is_none() {
        return Err(usage(
            "--beta is required with --link gaussvar (the log-link estimator is non-adaptive)",
        ));
    }
    let f = parse_descriptor(&args.f)?;
    let basis = basis_for(args.n)?;
    let obs = model::simulate(&f, args.link, args.n, &basis, args.seed)?;
    let cfg = EstimatorConfig {
        tau: args.tau,
        sigma: args.sigma,
        beta: args.beta.unwrap_or(2.0),
        grid_size: args.grid_size,
        mn_constant: 1.0,
    };
    cfg.validate()?;
    let xs: Vec<f64> = (0..args.grid_size)
        .map(|i| i as f64 / (args.grid_size - 1) as f64)
        .collect();
    let h_hat = estimators::estimate_h(&obs, &basis, &cfg, &xs)?;

    let mut text = String::new();
    match args.link {
        LinkKind::Poisson => {
            let f_hat = estimators::plugin_estimate(&obs, &basis, &cfg, &xs)?;
            let f_tilde = estimators::bias_corrected_poisson(&obs, &basis, &cfg, &xs)?;
            text.push_str("x,f_true,h_hat,f_hat,f_tilde\n");
            for (i, &x) in xs.iter().enumerate() {
                text.push_str(&format!(
                    "{x},{},{},{},{}\n",
                    f.evaluate(x),
                    h_hat[i],
                    f_hat[i],
                    f_tilde[i]
                ));
            }
        }
        LinkKind::Bernoulli => {
            let f_hat = estimators::plugin_estimate(&obs, &basis, &cfg, &xs)?;
            text.push_str("x,f_true,h_hat,f_hat\n");
            for (i, &x) in xs.iter().enumerate() {
                text.push_str(&format!(
                    "{x},{},{},{}\n",
                    f.evaluate(x),
                    h_hat[i],
                    f_hat[i]
                ));
            }
        }
        LinkKind::GaussVar => {
            let f_hat = estimators::gaussvar_estimate(&obs, &basis, &cfg, &xs)?;
            let zn = estimators::zn_process(&obs)?;
            let cutoff = estimators::zn_threshold(obs.n, cfg.beta, cfg.sigma);
            text.push_str("x,f_true,h_hat,f_hat,z_n,detector\n");
            for (i, &x) in xs.iter().enumerate() {
                let window = ((x * obs.n as f64).floor() as usize).min(obs.n as usize - 1);
                let z = zn[window];
                let on = u8::from(z >= cutoff);
                text.push_str(&format!(
                    "{x},{},{},{},{z},{on}\n",
                    f.evaluate(x),
                    h_hat[i],
                    f_hat[i]
                ));
            }
        }
    }
    emit(args.out.as_ref(), &text)
}

fn cmd_rates(args: RatesArgs) -> Result<(), Failure> {
    let build = |fx: f64| -> Result<RateQuery, Failure> {
        let mut q = RateQuery::new(args.link, args.beta, args.n, fx)?;
        q.sigma = args.sigma;
        q.mn_constant = args.mn_constant;
        Ok(q)
    };
    if args.table {
        let mut text = String::from("fx,rate_upper,rate_lower,regime\n");
        for i in 0..=args.steps {
            let fx = args.fx_max * i as f64 / args.steps as f64;
            let q = build(fx)?;
            text.push_str(&format!(
                "{fx},{},{},{:?}\n",
                rates::rate_upper(&q),
                rates::rate_lower(&q),
                rates::regime(&q)
            ));
        }
        emit(args.out.as_ref(), &text)
    } else {
        let fx = args
            .fx
            .ok_or_else(|| usage("--fx is required unless --table is set"))?;
        let q = build(fx)?;
        let text = format!(
            "rate_upper = {}\nrate_lower = {}\nregime = {:?}\n",
            rates::rate_upper(&q),
            rates::rate_lower(&q),
            rates::regime(&q)
        );
        emit(args.out.as_ref(), &text)
    }
}

fn cmd_lowerbound(args: LowerboundArgs) -> Result<(), Failure> {
    let fstar = parse_descriptor(&args.fstar)?;
    if args.sweep > 0 {
        let mut text = String::from(
            "n,case,h_n,c0,eta,kl,separation,rate_f0,rate_f1,norm_f0,norm_f1,cond_i,cond_ii,cond_iii\n",
        );
        let mut n = args.n;
        for _ in 0..args.sweep {
            let pair =
                lower_bounds::build_pair(args.link, &fstar, args.x0, args.beta, args.r_budget, n)?;
            let report =
                lower_bounds::verify_conditions(&pair, args.link, n, args.r_budget, args.beta)?;
            text.push_str(&format!(
                "{n},{:?},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                pair.case,
                pair.h_n,
                pair.c0,
                pair.eta,
                pair.kl,
                pair.separation,
                pair.rate_at_f0,
                pair.rate_at_f1,
                report.norm_f0,
                report.norm_f1,
                u8::from(report.cond_i),
                u8::from(report.cond_ii),
                u8::from(report.cond_iii)
            ));
            n = n.saturating_mul(2);
        }
        emit(args.out.as_ref(), &text)
    } else {
        let pair =
            lower_bounds::build_pair(args.link, &fstar, args.x0, args.beta, args.r_budget, args.n)?;
        let report =
            lower_bounds::verify_conditions(&pair, args.link, args.n, args.r_budget, args.beta)?;
        let mut text = format!(
            "case = {:?}\nx0 = {}\nh_n = {}\nc0 = {}\neta = {}\nkl = {}\nseparation = {}\n\
             rate_at_f0 = {}\nrate_at_f1 = {}\nnorm_f0 = {}\nnorm_f1 = {}\n\
             cond_i = {}\ncond_ii = {}\ncond_iii = {}\npass = {}\n",
            pair.case,
            pair.x0,
            pair.h_n,
            pair.c0,
            pair.eta,
            pair.kl,
            pair.separation,
            pair.rate_at_f0,
            pair.rate_at_f1,
            report.norm_f0,
            report.norm_f1,
            report.cond_i,
            report.cond_ii,
            report.cond_iii,
            report.pass()
        );
        for w in &pair.warnings {
            text.push_str(&format!("warning: {w}\n"));
        }
        emit(args.out.as_ref(), &text)
    }
}

fn resolve_config(study: &StudyArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &study.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure {
                code: 4,
                message: format!("reading {}: {e}", path.display()),
            })?;
            ExperimentConfig::from_kv_text(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(link) = study.link {
        cfg.link = link;
    }
    if let Some(f) = &study.f {
        cfg.descriptor = f.clone();
    }
    if let Some(beta) = study.beta {
        cfg.beta = beta;
    }
    if let Some(r) = study.r_budget {
        cfg.r_budget = r;
    }
    if let Some(n) = study.n {
        cfg.n_grid = vec![n];
    }
    if let Some(grid) = &study.n_grid {
        cfg.set_key("n_grid", grid)?;
    }
    if let Some(reps) = study.reps {
        cfg.replications = reps;
    }
    if let Some(tau) = study.tau {
        cfg.tau = tau;
    }
    if let Some(sigma) = study.sigma {
        cfg.sigma = sigma;
    }
    if let Some(seed) = study.seed {
        cfg.seed = seed;
    }
    if let Some(probes) = &study.probes {
        cfg.set_key("probes", probes)?;
    }
    if let Some(jobs) = study.jobs {
        cfg.jobs = jobs;
    }
    if study.noise_off {
        cfg.noise_off = true;
    }
    if let Some(out) = &study.out {
        cfg.out_csv = Some(out.display().to_string());
    }
    if let Some(json) = &study.json {
        cfg.out_json = Some(json.display().to_string());
    }
    if let Some(plots) = &study.plots {
        cfg.plots_dir = Some(plots.display().to_string());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_mc(study_args: StudyArgs) -> Result<(), Failure> {
    let cfg = resolve_config(&study_args)?;
    let study = harness::mc_study(&cfg)?;
    harness::write_outputs(
        &study,
        cfg.out_csv.as_deref().map(std::path::Path::new),
        cfg.out_json.as_deref().map(std::path::Path::new),
        study_args.timing,
    )?;
    if let Some(dir) = &cfg.plots_dir {
        harness::emit_plots(&study, std::path::Path::new(dir))?;
    }
    let mut text = String::new();
    for s in &study.summaries {
        let detector = s
            .detector_off_frequency
            .map_or(String::new(), |v| format!(" detector_off={v}"));
        text.push_str(&format!(
            "n={} q50={} q90={} q95={} coverage={} an_freq={}{} failed={}\n",
            s.n, s.q50, s.q90, s.q95, s.coverage, s.an_frequency, detector, s.failed_replications
        ));
    }
    print!("{text}");
    Ok(())
}

fn cmd_slope(study_args: StudyArgs) -> Result<(), Failure> {
    let cfg = resolve_config(&study_args)?;
    let report = harness::rate_slope(&cfg)?;
    if let Some(path) = &cfg.out_json {
        let text = serde_json::to_string_pretty(&report).map_err(|e| Failure {
            code: 4,
            message: e.to_string(),
        })?;
        std::fs::write(path, text).map_err(|e| Failure {
            code: 4,
            message: format!("writing {path}: {e}"),
        })?;
    }
    let mut text = String::new();
    for p in &report.per_probe {
        if p.exact_recovery {
            text.push_str(&format!("probe={} exact-recovery\n", p.probe_x));
        } else {
            text.push_str(&format!(
                "probe={} slope={} stderr={}\n",
                p.probe_x, p.slope, p.stderr
            ));
        }
        for (n, med) in &p.medians {
            text.push_str(&format!("  n={n} median_err={med}\n"));
        }
    }
    let out_path = cfg.out_csv.as_ref().map(PathBuf::from);
    emit(out_path.as_ref(), &text)
}
