//! Monte-Carlo trials: scheme sweeps and the order and indicator comparisons.
//!
//! Trial `t` uses the channel realization and algorithm seed
//! `trial_seed(master, t)`, so every scheme sees the same channels. Trials run
//! on the rayon pool and are merged by trial index.

use std::path::Path;

use manoma_core::benchmarks::{
    exhaustive_indicator, exhaustive_order, fixed_indicator_run, random_order_run, run_scheme, Scheme,
};
use manoma_core::channel::{dbm_to_watt, sample_realization, trial_seed, SystemConfig};
use manoma_core::ga::{FitnessContext, GaConfig};
use manoma_core::orchestrator::{run_two_stage, RunReport};
use manoma_core::CoreError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    M,
    K,
    P,
}

impl std::str::FromStr for Axis {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "M" | "m" => Ok(Axis::M),
            "K" | "k" => Ok(Axis::K),
            "P" | "p" => Ok(Axis::P),
            other => Err(HarnessError::Validation(format!("axis `{other}` is not one of M, K, P"))),
        }
    }
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::M => "M",
            Axis::K => "K",
            Axis::P => "P_dBm",
        }
    }

    /// The configuration with this axis set to `value` (`P` in dBm).
    pub fn apply(self, base: &SystemConfig, value: f64) -> Result<SystemConfig, HarnessError> {
        let mut cfg = base.clone();
        let count = |v: f64| -> Result<usize, HarnessError> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(HarnessError::Validation(format!("axis value {v} must be a positive integer")))
            }
        };
        match self {
            Axis::M => cfg.num_antennas = count(value)?,
            Axis::K => cfg.num_users = count(value)?,
            Axis::P => cfg.max_power = dbm_to_watt(value),
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn parse_values(text: &str) -> Result<Vec<f64>, HarnessError> {
    let vals: Result<Vec<f64>, _> = text.split(',').map(|v| v.trim().parse::<f64>()).collect();
    match vals {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(HarnessError::Validation(format!("`{text}` is not a comma-separated list of numbers"))),
    }
}

pub fn parse_schemes(text: &str) -> Result<Vec<Scheme>, HarnessError> {
    if text.trim().eq_ignore_ascii_case("all") {
        return Ok(Scheme::ALL.to_vec());
    }
    text.split(',')
        .map(|s| s.parse::<Scheme>().map_err(HarnessError::from))
        .collect()
}

/// Runs `f(trial, seed)` for every trial, in parallel, ordered by trial.
pub fn run_trials<T, F>(master: u64, trials: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, u64) -> T + Sync + Send,
{
    (0..trials)
        .into_par_iter()
        .map(|t| f(t, trial_seed(master, t as u64)))
        .collect()
}

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Sum rate of a trial, or `None` when it is dropped.
fn usable(result: &Result<RunReport, CoreError>, what: &str, seed: u64) -> Option<f64> {
    match result {
        Ok(r) if !r.excluded => Some(r.sum_rate),
        Ok(r) => {
            log::warn!(
                "{what} seed {seed} dropped: {}",
                r.exclusion_reason.as_deref().unwrap_or("excluded")
            );
            None
        }
        Err(e) => {
            log::warn!("{what} seed {seed} failed: {e}");
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub scheme: String,
    pub mean_sum_rate: f64,
    pub std_err: f64,
    pub trials: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeTrial {
    pub value: f64,
    pub scheme: String,
    pub trial: usize,
    pub seed: u64,
    pub sum_rate: Option<f64>,
}

/// Average sum rate per (axis value, scheme), with the per-trial rates.
pub fn sweep(
    base: &ExperimentConfig,
    axis: Axis,
    values: &[f64],
    schemes: &[Scheme],
    trials: usize,
    master: u64,
) -> Result<(Vec<SweepRow>, Vec<SchemeTrial>), HarnessError> {
    let mut rows = Vec::new();
    let mut per_trial = Vec::new();
    for &value in values {
        let cfg = axis.apply(&base.system, value)?;
        let ga = &base.ga;
        let results = run_trials(master, trials, |t, seed| {
            let real = sample_realization(&cfg, seed);
            schemes
                .iter()
                .map(|&s| (t, seed, usable(&run_scheme(s, &real, &cfg, ga, seed), s.name(), seed)))
                .collect::<Vec<_>>()
        });
        for (n, &s) in schemes.iter().enumerate() {
            let rates: Vec<f64> = results.iter().filter_map(|r| r[n].2).collect();
            let (mean, se) = mean_stderr(&rates);
            rows.push(SweepRow {
                axis: axis.name().into(),
                value,
                scheme: s.name().into(),
                mean_sum_rate: mean,
                std_err: se,
                trials: rates.len(),
                dropped: trials - rates.len(),
            });
            per_trial.extend(results.iter().map(|r| SchemeTrial {
                value,
                scheme: s.name().into(),
                trial: r[n].0,
                seed: r[n].1,
                sum_rate: r[n].2,
            }));
        }
    }
    Ok((rows, per_trial))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderTrial {
    pub trial: usize,
    pub seed: u64,
    pub proposed: Option<f64>,
    pub exhaustive: Option<f64>,
    pub random: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorTrial {
    pub trial: usize,
    pub seed: u64,
    pub proposed: Option<f64>,
    pub exhaustive: Option<f64>,
    pub fixed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scheme: String,
    pub mean_sum_rate: f64,
    pub std_err: f64,
    pub trials: usize,
    pub dropped: usize,
}

fn summary(name: &str, xs: impl Iterator<Item = Option<f64>>) -> SummaryRow {
    let all: Vec<Option<f64>> = xs.collect();
    let vals: Vec<f64> = all.iter().flatten().copied().collect();
    let (mean, se) = mean_stderr(&vals);
    SummaryRow {
        scheme: name.into(),
        mean_sum_rate: mean,
        std_err: se,
        trials: vals.len(),
        dropped: all.len() - vals.len(),
    }
}

fn check_cap(cfg: &SystemConfig, cap: usize, what: &str) -> Result<(), HarnessError> {
    if cfg.num_users > cap {
        return Err(HarnessError::Validation(format!(
            "{what} supports at most {cap} users, configuration has {}",
            cfg.num_users
        )));
    }
    Ok(())
}

/// Proposed, exhaustive and random decoding orders on the same channels.
pub fn compare_orders(base: &ExperimentConfig, trials: usize, master: u64) -> Result<(Vec<OrderTrial>, Vec<SummaryRow>), HarnessError> {
    let cfg = &base.system;
    let ga = &base.ga;
    base.validate()?;
    check_cap(cfg, manoma_core::benchmarks::MAX_ORDER_USERS, "the exhaustive order search")?;
    let rows = run_trials(master, trials, |trial, seed| {
        let real = sample_realization(cfg, seed);
        let ex = exhaustive_order(&real, cfg, ga, seed).map(|s| s.best);
        OrderTrial {
            trial,
            seed,
            proposed: usable(&run_two_stage(&real, cfg, ga, seed), "proposed order", seed),
            exhaustive: usable(&ex, "exhaustive order", seed),
            random: usable(&random_order_run(&real, cfg, ga, seed), "random order", seed),
        }
    });
    let sums = vec![
        summary("proposed", rows.iter().map(|r| r.proposed)),
        summary("exhaustive", rows.iter().map(|r| r.exhaustive)),
        summary("random", rows.iter().map(|r| r.random)),
    ];
    Ok((rows, sums))
}

/// Best indicator matrix by enumeration at the final beamformers and
/// positions of a run, as a sum rate.
pub fn exhaustive_indicator_rate(
    report: &RunReport,
    realization: &manoma_core::channel::ChannelRealization,
    cfg: &SystemConfig,
    ga: &GaConfig,
) -> Result<f64, CoreError> {
    let ctx = FitnessContext::new(
        &report.beamformer_vectors(),
        &report.apv,
        &realization.reordered(&report.order),
        cfg,
        report.min_rate,
        ga.penalty,
    );
    Ok(exhaustive_indicator(&ctx)?.sum_rate)
}

/// Proposed (GA), exhaustive and fixed indicators on the same channels.
pub fn compare_indicators(
    base: &ExperimentConfig,
    trials: usize,
    master: u64,
) -> Result<(Vec<IndicatorTrial>, Vec<SummaryRow>), HarnessError> {
    let cfg = &base.system;
    let ga = &base.ga;
    base.validate()?;
    let bits = cfg.num_users * cfg.num_users.saturating_sub(1) / 2;
    if bits > manoma_core::benchmarks::MAX_INDICATOR_BITS {
        return Err(HarnessError::Validation(format!(
            "the exhaustive indicator search supports at most {} bits, {} users need {bits}",
            manoma_core::benchmarks::MAX_INDICATOR_BITS,
            cfg.num_users
        )));
    }
    let rows = run_trials(master, trials, |trial, seed| {
        let real = sample_realization(cfg, seed);
        let proposed = run_two_stage(&real, cfg, ga, seed);
        let exhaustive = match &proposed {
            Ok(r) if !r.excluded => exhaustive_indicator_rate(r, &real, cfg, ga).ok(),
            _ => None,
        };
        IndicatorTrial {
            trial,
            seed,
            proposed: usable(&proposed, "proposed indicator", seed),
            exhaustive,
            fixed: usable(&fixed_indicator_run(&real, cfg, ga, seed), "fixed indicator", seed),
        }
    });
    let sums = vec![
        summary("proposed", rows.iter().map(|r| r.proposed)),
        summary("exhaustive", rows.iter().map(|r| r.exhaustive)),
        summary("fixed", rows.iter().map(|r| r.fixed)),
    ];
    Ok((rows, sums))
}

/// Column names of each CSV file, in order.
pub mod schema {
    pub const SWEEP: [&str; 7] = ["axis", "value", "scheme", "mean_sum_rate", "std_err", "trials", "dropped"];
    pub const SWEEP_TRIALS: [&str; 5] = ["value", "scheme", "trial", "seed", "sum_rate"];
    pub const ORDERS: [&str; 5] = ["trial", "seed", "proposed", "exhaustive", "random"];
    pub const INDICATORS: [&str; 5] = ["trial", "seed", "proposed", "exhaustive", "fixed"];
    pub const SUMMARY: [&str; 5] = ["scheme", "mean_sum_rate", "std_err", "trials", "dropped"];
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| HarnessError::Runtime(format!("cannot create {}: {e}", path.display())))?;
    let io = |e: csv::Error| HarnessError::Runtime(format!("writing {}: {e}", path.display()));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush()
        .map_err(|e| HarnessError::Runtime(format!("writing {}: {e}", path.display())))?;
    Ok(())
}

/// Reads a CSV file back, checking its header against `header`.
pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path, header: &[&str]) -> Result<Vec<T>, HarnessError> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| HarnessError::Runtime(format!("cannot open {}: {e}", path.display())))?;
    let found: Vec<String> = r
        .headers()
        .map_err(|e| HarnessError::Runtime(format!("reading {}: {e}", path.display())))?
        .iter()
        .map(String::from)
        .collect();
    if found != header {
        return Err(HarnessError::Runtime(format!(
            "{} has columns {found:?}, expected {header:?}",
            path.display()
        )));
    }
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| HarnessError::Runtime(format!("reading {}: {e}", path.display())))
}
