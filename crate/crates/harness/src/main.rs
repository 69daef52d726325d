//! `manoma` command-line entry point.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use manoma::config::ExperimentConfig;
use manoma::experiments::{
    compare_indicators, compare_orders, parse_schemes, parse_values, schema, sweep, write_csv, Axis,
};
use manoma::verify::{run_all, summary_table, VerifyPlan};
use manoma::HarnessError;
use manoma_core::benchmarks::{run_scheme_with, Scheme};
use manoma_core::channel::sample_realization;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "manoma", version, about = "Movable-antenna NOMA sum-rate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Monte-Carlo trials per point.
    #[arg(long, global = true, default_value_t = 100)]
    trials: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Comma-separated schemes (NOMA-MA, NOMA-FPA, SDMA-MA, SDMA-FPA) or `all`.
    #[arg(long, global = true, default_value = "all")]
    schemes: String,
    /// Sweep axis: M, K or P (dBm).
    #[arg(long, global = true, default_value = "M")]
    axis: String,
    /// Comma-separated sweep values.
    #[arg(long, global = true, default_value = "2,3,4,5")]
    values: String,
    /// Write every conic subproblem of a `run` to the output directory.
    #[arg(long, global = true)]
    debug_dump_conic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// One run of a scheme (the first in `--schemes`, NOMA-MA for `all`).
    Run,
    /// Mean sum rate per scheme along an axis.
    Sweep,
    /// Finite-difference, surrogate, solver, oracle and invariant suites.
    Verify,
    /// Proposed, exhaustive and random decoding orders.
    CompareOrders,
    /// Proposed, exhaustive and fixed decoding indicators.
    CompareIndicators,
}

#[derive(Serialize)]
struct RunOutput<'a> {
    scheme: &'a str,
    seed: u64,
    config: &'a ExperimentConfig,
    report: &'a manoma_core::orchestrator::RunReport,
}

fn out_dir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| HarnessError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(|e| HarnessError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), HarnessError> {
    let c = &cli.common;
    let cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if c.trials == 0 {
        return Err(HarnessError::Validation("--trials must be at least 1".into()));
    }
    match cli.command {
        Command::Run => {
            let scheme = parse_schemes(&c.schemes)?.first().copied().unwrap_or(Scheme::NomaMa);
            let real = sample_realization(&cfg.system, c.seed);
            let mut report = run_scheme_with(scheme, &real, &cfg.system, &cfg.ga, c.seed, c.debug_dump_conic)?;
            out_dir(&c.out)?;
            if c.debug_dump_conic {
                let dumps = std::mem::take(&mut report.conic_dumps);
                write_text(&c.out.join(format!("conic_seed{}.txt", c.seed)), &dumps.join("\n"))?;
            }
            let payload = RunOutput {
                scheme: scheme.name(),
                seed: c.seed,
                config: &cfg,
                report: &report,
            };
            let json = serde_json::to_string_pretty(&payload).map_err(|e| HarnessError::Runtime(e.to_string()))?;
            write_text(&c.out.join(format!("run_seed{}.json", c.seed)), &json)?;
            println!(
                "{} sum rate {:.4} bits/s/Hz (initial {:.4}), {} iterations{}",
                scheme,
                report.sum_rate,
                report.initial_sum_rate(),
                report.iterations,
                if report.excluded { ", excluded" } else { "" }
            );
        }
        Command::Sweep => {
            let axis: Axis = c.axis.parse()?;
            let values = parse_values(&c.values)?;
            let schemes = parse_schemes(&c.schemes)?;
            let (rows, trials) = sweep(&cfg, axis, &values, &schemes, c.trials, c.seed)?;
            out_dir(&c.out)?;
            let path = c.out.join(format!("sweep_{}.csv", axis.name()));
            write_csv(&path, &rows, &schema::SWEEP)?;
            println!("wrote {}", path.display());
            let path = c.out.join(format!("sweep_{}_trials.csv", axis.name()));
            write_csv(&path, &trials, &schema::SWEEP_TRIALS)?;
            println!("wrote {}", path.display());
            for r in &rows {
                println!(
                    "{}={:<6} {:<9} {:.4} ± {:.4} ({} trials, {} dropped)",
                    r.axis, r.value, r.scheme, r.mean_sum_rate, r.std_err, r.trials, r.dropped
                );
            }
        }
        Command::Verify => {
            let plan = VerifyPlan {
                master: c.seed,
                ..VerifyPlan::default()
            };
            let reports = run_all(&plan, &cfg.ga);
            print!("{}", summary_table(&reports));
            out_dir(&c.out)?;
            let json = serde_json::to_string_pretty(&reports).map_err(|e| HarnessError::Runtime(e.to_string()))?;
            write_text(&c.out.join("verify.json"), &json)?;
            let failed: Vec<&str> = reports.iter().filter(|r| !r.passed()).map(|r| r.suite.as_str()).collect();
            if !failed.is_empty() {
                return Err(HarnessError::Verify(failed.join(", ")));
            }
        }
        Command::CompareOrders => {
            let (rows, sums) = compare_orders(&cfg, c.trials, c.seed)?;
            out_dir(&c.out)?;
            write_csv(&c.out.join("orders.csv"), &rows, &schema::ORDERS)?;
            write_csv(&c.out.join("orders_summary.csv"), &sums, &schema::SUMMARY)?;
            print_summary(&c.out, "orders", &sums);
        }
        Command::CompareIndicators => {
            let (rows, sums) = compare_indicators(&cfg, c.trials, c.seed)?;
            out_dir(&c.out)?;
            write_csv(&c.out.join("indicators.csv"), &rows, &schema::INDICATORS)?;
            write_csv(&c.out.join("indicators_summary.csv"), &sums, &schema::SUMMARY)?;
            print_summary(&c.out, "indicators", &sums);
        }
    }
    Ok(())
}

fn print_summary(dir: &Path, stem: &str, rows: &[manoma::experiments::SummaryRow]) {
    println!("wrote {0}/{stem}.csv and {0}/{stem}_summary.csv", dir.display());
    for r in rows {
        println!(
            "{:<11} {:.4} ± {:.4} ({} trials, {} dropped)",
            r.scheme, r.mean_sum_rate, r.std_err, r.trials, r.dropped
        );
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
