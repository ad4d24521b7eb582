//! `klr`: kernel log-rank test of independence for right-censored data.
//!
//! Subcommands: `test` runs the Wild Bootstrap test on a CSV file,
//! `simulate` runs Monte Carlo rejection studies on registered scenarios,
//! `calibrate` solves for censoring parameters hitting target observed
//! fractions.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use kernel_logrank::bootstrap::BootstrapConfig;
use kernel_logrank::data::{load_csv, standardize_covariates, CsvSchema};
use kernel_logrank::error::Error;
use kernel_logrank::kernels::{
    BandwidthPolicy, CovariateKernel, KernelSpec, TimeBandwidthSource, TimeKernel,
};
use kernel_logrank::simulate::{
    calibrate_censoring, rejection_study, scenario_by_id, scenario_ids, RejectionReport,
    StudyConfig, ThetaChoice,
};

#[derive(Parser)]
#[command(
    name = "klr",
    version,
    about = "Kernel log-rank independence test for right-censored data"
)]
struct Cli {
    /// Worker threads (default: KLR_THREADS env var, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test independence between survival times and covariates in a CSV file.
    Test(TestArgs),
    /// Monte Carlo rejection-rate study on a registered scenario.
    Simulate(SimulateArgs),
    /// Calibrate the censoring parameter of a scenario to target observed fractions.
    Calibrate(CalibrateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
    Human,
}

#[derive(Clone, Copy, ValueEnum)]
enum StandardizeMode {
    /// Standardize for Gaussian covariate kernels, leave linear/Fisher raw.
    Auto,
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum BandwidthSourceArg {
    All,
    Events,
}

#[derive(Args)]
struct TestArgs {
    /// Input CSV file (header row required).
    #[arg(long)]
    data: PathBuf,
    /// Time column name.
    #[arg(long, default_value = "time")]
    time_col: String,
    /// Event column name (0/1 or true/false).
    #[arg(long, default_value = "event")]
    event_col: String,
    /// Comma-separated covariate columns; entries may be globs like `x*`.
    #[arg(long, default_value = "x*")]
    covariate_cols: String,
    /// Kernel label: lin1, gau1, fis1 or gaugau.
    #[arg(long, default_value = "gaugau")]
    kernel: String,
    /// Gaussian covariate bandwidth sigma^2: "median" or a positive number.
    #[arg(long, default_value = "median")]
    covariate_bandwidth: String,
    /// Gaussian time bandwidth sigma^2: "median" or a positive number.
    #[arg(long, default_value = "median")]
    time_bandwidth: String,
    /// Observations feeding the time-kernel median heuristic.
    #[arg(long, value_enum, default_value_t = BandwidthSourceArg::All)]
    time_bandwidth_source: BandwidthSourceArg,
    /// Significance level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Number of Wild Bootstrap replicates.
    #[arg(short = 'M', long, default_value_t = 1999)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Covariate standardization before testing.
    #[arg(long, value_enum, default_value_t = StandardizeMode::Auto)]
    standardize: StandardizeMode,
    /// Write the result to this file (runtime field omitted for byte-stable output).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Human)]
    format: OutputFormat,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario id (D1..D30).
    #[arg(long)]
    scenario: String,
    /// Single sample size.
    #[arg(long)]
    n: Option<usize>,
    /// Sample-size grid start:stop:step, e.g. 50:350:50.
    #[arg(long)]
    n_grid: Option<String>,
    /// Monte Carlo runs per cell.
    #[arg(long, default_value_t = 1000)]
    runs: usize,
    /// Comma-separated kernel labels.
    #[arg(long, default_value = "lin1,gau1,gaugau")]
    kernels: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(short = 'M', long, default_value_t = 1999)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Calibrate theta so this fraction of events is observed.
    #[arg(long)]
    observed: Option<f64>,
    /// Override the scenario's censoring parameter theta.
    #[arg(long)]
    theta: Option<f64>,
    /// Disable censoring entirely (the 100%-observed column).
    #[arg(long, default_value_t = false)]
    no_censoring: bool,
    /// Pilot sample size for calibration.
    #[arg(long, default_value_t = 200_000)]
    pilot: usize,
    /// Redraw the covariance factor per run instead of per study.
    #[arg(long, value_parser = ["per-study", "per-run"], default_value = "per-study")]
    redraw_cov: String,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Scenario id (D1..D30).
    #[arg(long)]
    scenario: String,
    /// Comma-separated target observed fractions, e.g. 0.15,0.30,0.60.
    #[arg(long, default_value = "0.15,0.30,0.45,0.60,0.75,0.90,1.00")]
    targets: String,
    /// Pilot sample size per evaluation.
    #[arg(long, default_value_t = 200_000)]
    pilot: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let threads = cli.threads.or_else(|| {
        std::env::var("KLR_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(t) = threads {
        if t == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(2);
        }
        // Ignore failure if a pool already exists (tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }

    let outcome = match cli.command {
        Command::Test(args) => cmd_test(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Calibrate(args) => cmd_calibrate(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn parse_bandwidth(raw: &str, what: &str) -> Result<BandwidthPolicy, Error> {
    if raw == "median" {
        return Ok(BandwidthPolicy::MedianHeuristic);
    }
    let v: f64 = raw.parse().map_err(|_| {
        Error::Validation(format!("{what} must be 'median' or a number, got '{raw}'"))
    })?;
    if v.is_finite() && v > 0.0 {
        Ok(BandwidthPolicy::Fixed(v))
    } else {
        Err(Error::Validation(format!(
            "{what} must be strictly positive and finite, got {v}"
        )))
    }
}

fn build_kernel_spec(args: &TestArgs) -> Result<KernelSpec, Error> {
    let mut spec = KernelSpec::from_label(&args.kernel)?;
    if let CovariateKernel::Gaussian(_) = spec.covariate_kernel {
        spec.covariate_kernel = CovariateKernel::Gaussian(parse_bandwidth(
            &args.covariate_bandwidth,
            "--covariate-bandwidth",
        )?);
    }
    if let TimeKernel::Gaussian(_) = spec.time_kernel {
        spec.time_kernel =
            TimeKernel::Gaussian(parse_bandwidth(&args.time_bandwidth, "--time-bandwidth")?);
    }
    spec.time_bandwidth_source = match args.time_bandwidth_source {
        BandwidthSourceArg::All => TimeBandwidthSource::All,
        BandwidthSourceArg::Events => TimeBandwidthSource::Events,
    };
    Ok(spec)
}

fn validate_alpha(alpha: f64) -> Result<(), Error> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "alpha must be in (0,1), got {alpha}"
        )))
    }
}

fn write_or_print(path: &Option<PathBuf>, content: &str) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, content).map_err(Error::from),
        None => {
            println!("{content}");
            Ok(())
        }
    }
}

fn cmd_test(args: TestArgs) -> Result<(), Error> {
    validate_alpha(args.alpha)?;
    let spec = build_kernel_spec(&args)?;
    let schema = CsvSchema {
        time_col: args.time_col.clone(),
        event_col: args.event_col.clone(),
        covariate_cols: args
            .covariate_cols
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect(),
    };
    let raw = load_csv(&args.data, &schema)?;
    let standardize = match args.standardize {
        StandardizeMode::On => true,
        StandardizeMode::Off => false,
        StandardizeMode::Auto => spec.covariate_is_gaussian(),
    };
    let ds = if standardize {
        standardize_covariates(&raw)?.0
    } else {
        raw
    };

    let cfg = BootstrapConfig {
        m_replicates: args.replicates,
        alpha: args.alpha,
        seed: args.seed,
    };
    let result = kernel_logrank::run_test(&ds, &spec, &cfg)?;

    match args.format {
        OutputFormat::Json => {
            // Files omit the runtime so identical invocations are byte-identical.
            let value = result.json_value(args.output.is_none());
            write_or_print(&args.output, &serde_json::to_string_pretty(&value).unwrap())?;
        }
        OutputFormat::Csv => {
            let mut s = String::from(
                "statistic,p_value,quantile,reject,alpha,m_replicates,seed,kernel,n,d\n",
            );
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                result.statistic,
                result.p_value,
                result.quantile,
                result.reject,
                result.config.alpha,
                result.config.m_replicates,
                result.config.seed,
                result.kernel.label(),
                result.n,
                result.dim
            ));
            write_or_print(&args.output, &s)?;
        }
        OutputFormat::Human => {
            let mut s = String::new();
            s.push_str(&format!(
                "Kernel log-rank test ({} kernel, n={}, d={})\n",
                result.kernel.label(),
                result.n,
                result.dim
            ));
            s.push_str(&format!(
                "  statistic  n*Psi^2 = {:.6e}\n",
                result.statistic
            ));
            s.push_str(&format!(
                "  bootstrap {}%-quantile = {:.6e}  (M={}, seed={})\n",
                100.0 * (1.0 - result.config.alpha),
                result.quantile,
                result.config.m_replicates,
                result.config.seed
            ));
            s.push_str(&format!("  p-value = {:.6}\n", result.p_value));
            s.push_str(&format!(
                "  decision at alpha={}: {}\n",
                result.config.alpha,
                if result.reject {
                    "REJECT independence"
                } else {
                    "do not reject independence"
                }
            ));
            write_or_print(&args.output, s.trim_end())?;
        }
    }
    Ok(())
}

fn parse_n_grid(raw: &str) -> Result<Vec<usize>, Error> {
    let parts: Vec<&str> = raw.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Validation(format!(
            "--n-grid expects start:stop:step, got '{raw}'"
        )));
    }
    let nums: Vec<usize> = parts
        .iter()
        .map(|p| {
            p.parse::<usize>()
                .map_err(|_| Error::Validation(format!("bad n-grid component '{p}'")))
        })
        .collect::<Result<_, _>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if step == 0 || start < 2 || stop < start {
        return Err(Error::Validation(format!("bad n-grid '{raw}'")));
    }
    Ok((start..=stop).step_by(step).collect())
}

fn report_csv(reports: &[RejectionReport]) -> String {
    let mut s = String::from(
        "scenario,kernel,n,runs,rejections,rate,wilson_low,wilson_high,seed,theta,censoring_disabled\n",
    );
    for r in reports {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.scenario,
            r.kernel,
            r.n,
            r.runs,
            r.rejections,
            r.rate,
            r.wilson_low,
            r.wilson_high,
            r.seed,
            r.theta,
            r.censoring_disabled
        ));
    }
    s
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Error> {
    validate_alpha(args.alpha)?;
    let scenario = scenario_by_id(&args.scenario).map_err(|e| match e {
        Error::UnknownScenario(id) => {
            Error::UnknownScenario(format!("{id}; known ids: {}", scenario_ids().join(", ")))
        }
        other => other,
    })?;
    let kernels: Vec<KernelSpec> = args
        .kernels
        .split(',')
        .map(|l| KernelSpec::from_label(l.trim()))
        .collect::<Result<_, _>>()?;

    let sizes = match (&args.n, &args.n_grid) {
        (Some(n), None) => vec![*n],
        (None, Some(grid)) => parse_n_grid(grid)?,
        (None, None) => vec![200],
        (Some(_), Some(_)) => {
            return Err(Error::Validation(
                "pass either --n or --n-grid, not both".into(),
            ))
        }
    };

    let theta = match (args.no_censoring, args.observed, args.theta) {
        (true, None, None) => ThetaChoice::NoCensoring,
        (false, Some(target), None) => ThetaChoice::Calibrate {
            target,
            pilot: args.pilot,
        },
        (false, None, Some(v)) => ThetaChoice::Fixed(v),
        (false, None, None) => ThetaChoice::Default,
        _ => {
            return Err(Error::Validation(
                "--no-censoring, --observed and --theta are mutually exclusive".into(),
            ))
        }
    };

    let mut reports = Vec::new();
    for n in sizes {
        let cfg = StudyConfig {
            n,
            runs: args.runs,
            m_replicates: args.replicates,
            alpha: args.alpha,
            seed: args.seed,
            theta,
            redraw_covariance_per_run: args.redraw_cov == "per-run",
        };
        reports.extend(rejection_study(&scenario, &kernels, &cfg)?);
    }

    match args.format {
        OutputFormat::Csv => write_or_print(&args.output, &report_csv(&reports))?,
        OutputFormat::Json => {
            let value = serde_json::to_value(&reports).unwrap();
            write_or_print(&args.output, &serde_json::to_string_pretty(&value).unwrap())?;
        }
        OutputFormat::Human => {
            let mut s = String::new();
            for r in &reports {
                s.push_str(&format!(
                    "{} n={} {}: rate {:.3} ({}/{})  95% CI [{:.3}, {:.3}]\n",
                    r.scenario,
                    r.n,
                    r.kernel,
                    r.rate,
                    r.rejections,
                    r.runs,
                    r.wilson_low,
                    r.wilson_high
                ));
            }
            write_or_print(&args.output, s.trim_end())?;
        }
    }
    Ok(())
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<(), Error> {
    let scenario = scenario_by_id(&args.scenario).map_err(|e| match e {
        Error::UnknownScenario(id) => {
            Error::UnknownScenario(format!("{id}; known ids: {}", scenario_ids().join(", ")))
        }
        other => other,
    })?;
    let targets: Vec<f64> = args
        .targets
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Validation(format!("bad target '{p}'")))
        })
        .collect::<Result<_, _>>()?;

    let resolved = scenario.resolve(args.seed);
    println!("scenario {} (seed {})", scenario.id, args.seed);
    println!("target,theta,achieved,status");
    for target in targets {
        if target >= 1.0 {
            println!("{target},,,disable censoring");
            continue;
        }
        match calibrate_censoring(&resolved, target, args.pilot, args.seed) {
            Ok(theta) => {
                // Re-estimate the achieved fraction at the returned theta.
                let check = kernel_logrank::simulate::sample_scenario(
                    &resolved.clone().with_theta(theta),
                    args.pilot.max(1000),
                    args.seed ^ 0x5eed,
                )?;
                let achieved = check.event_count() as f64 / check.len() as f64;
                println!("{target},{theta:.6},{achieved:.4},ok");
            }
            Err(err) => {
                println!("{target},,,unreachable: {err}");
            }
        }
    }
    Ok(())
}
