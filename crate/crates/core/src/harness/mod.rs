//! Scenario configuration, the per-period simulation loop, metrics,
//! Monte-Carlo sweeps and report output.
//!
//! Each period runs: truth update → path synthesis → dynamic-path split →
//! measurements → filter step → beam prediction (tracked, oracle, fixed) →
//! UT SNR → mismatch check → overhead accounting.

mod config;
mod metrics;
mod report;
mod run;

pub use config::{
    BeamSection, FilterSection, GeometrySection, ReinitPrior, ScenarioConfig, ScenarioKind, ScenarioSection,
    SensingSection,
    StaticSpec,
};
pub use metrics::{assign, rmse_metric, rmse_over, PeriodMetrics, DEFAULT_GATE};
pub use report::{emit, read_metrics_csv, sweep_csv, write_metrics_csv, EmitOptions};
pub use run::{
    overhead_account, run_scenario, run_trial, trial_seed, Overhead, Prepared, RunOptions, RunReport, TrackSnapshot,
};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// How Monte-Carlo trials are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// Trials on the rayon pool; sequential when built without `parallel`.
    #[default]
    Parallel,
    Sequential,
}

fn map_trials<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Per-period averages over trials. RMSE means skip trials where it is
/// undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodMeans {
    pub k: usize,
    pub true_count: f64,
    pub est_count: f64,
    /// Fraction of trials whose estimated count equals the truth.
    pub count_hit_rate: f64,
    pub rmse_m: Option<f64>,
    pub angle_rmse_rad: Option<f64>,
    pub snr_fixed_db: f64,
    pub snr_tracked_db: f64,
    pub snr_oracle_db: f64,
    pub overhead: f64,
}

/// Whole-run aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub trials: usize,
    pub periods: usize,
    pub count_hit_rate: f64,
    pub mean_rmse_m: Option<f64>,
    pub mean_angle_rmse_rad: Option<f64>,
    pub mean_snr_fixed_db: f64,
    pub mean_snr_tracked_db: f64,
    pub mean_snr_oracle_db: f64,
    pub mean_overhead: f64,
    pub reinits: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub config: ScenarioConfig,
    pub base_seed: u64,
    pub trials: Vec<RunReport>,
    pub means: Vec<PeriodMeans>,
    pub aggregates: Aggregates,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn summarize(rows: &[&PeriodMetrics]) -> (f64, Option<f64>, Option<f64>, [f64; 3], f64) {
    let hit = mean(rows.iter().map(|r| f64::from(u8::from(r.true_count == r.est_count)))).unwrap_or(0.0);
    let rmse = mean(rows.iter().filter_map(|r| r.rmse_m));
    let angle = mean(rows.iter().filter_map(|r| r.angle_rmse_rad));
    let snr = [
        mean(rows.iter().map(|r| r.snr_fixed_db)).unwrap_or(f64::NAN),
        mean(rows.iter().map(|r| r.snr_tracked_db)).unwrap_or(f64::NAN),
        mean(rows.iter().map(|r| r.snr_oracle_db)).unwrap_or(f64::NAN),
    ];
    let overhead = mean(rows.iter().map(|r| r.overhead as f64)).unwrap_or(0.0);
    (hit, rmse, angle, snr, overhead)
}

impl MonteCarloReport {
    fn assemble(config: ScenarioConfig, base_seed: u64, trials: Vec<RunReport>) -> Self {
        let periods = config.scenario.periods;
        let means = (1..=periods)
            .map(|k| {
                let rows: Vec<&PeriodMetrics> =
                    trials.iter().flat_map(|t| t.periods.iter().filter(move |p| p.k == k)).collect();
                let (hit, rmse, angle, snr, overhead) = summarize(&rows);
                PeriodMeans {
                    k,
                    true_count: mean(rows.iter().map(|r| r.true_count as f64)).unwrap_or(0.0),
                    est_count: mean(rows.iter().map(|r| r.est_count as f64)).unwrap_or(0.0),
                    count_hit_rate: hit,
                    rmse_m: rmse,
                    angle_rmse_rad: angle,
                    snr_fixed_db: snr[0],
                    snr_tracked_db: snr[1],
                    snr_oracle_db: snr[2],
                    overhead,
                }
            })
            .collect();
        let all: Vec<&PeriodMetrics> = trials.iter().flat_map(|t| &t.periods).collect();
        let (hit, rmse, angle, snr, overhead) = summarize(&all);
        let aggregates = Aggregates {
            trials: trials.len(),
            periods,
            count_hit_rate: hit,
            mean_rmse_m: rmse,
            mean_angle_rmse_rad: angle,
            mean_snr_fixed_db: snr[0],
            mean_snr_tracked_db: snr[1],
            mean_snr_oracle_db: snr[2],
            mean_overhead: overhead,
            reinits: all.iter().filter(|r| r.reinit).count(),
        };
        Self { config, base_seed, trials, means, aggregates }
    }

    /// Every period row of every trial, trial-major.
    pub fn rows(&self) -> impl Iterator<Item = &PeriodMetrics> {
        self.trials.iter().flat_map(|t| &t.periods)
    }
}

/// `trials` independent runs; trial `i` uses seed `base + i`.
pub fn monte_carlo(config: &ScenarioConfig, trials: usize, exec: Execution) -> Result<MonteCarloReport> {
    monte_carlo_with(config, trials, exec, RunOptions::default())
}

pub fn monte_carlo_with(
    config: &ScenarioConfig,
    trials: usize,
    exec: Execution,
    opts: RunOptions,
) -> Result<MonteCarloReport> {
    if trials == 0 {
        return Err(Error::Contract("monte_carlo needs at least one trial".into()));
    }
    let prep = Prepared::new(config)?;
    let base = config.scenario.seed;
    let runs = map_trials(trials, exec, |i| run_trial(&prep, i, trial_seed(base, i), opts));
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(MonteCarloReport::assemble(config.clone(), base, runs))
}

/// Parameters a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Angle-noise standard deviation, degrees.
    AngleStdDeg,
    VMax,
    InitialTargets,
    ClutterMean,
}

impl SweepParam {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "angle_rmse" | "angle_std" | "angle_std_deg" => Ok(Self::AngleStdDeg),
            "v_max" | "velocity" => Ok(Self::VMax),
            "targets" | "initial_targets" => Ok(Self::InitialTargets),
            "clutter" | "clutter_mean" => Ok(Self::ClutterMean),
            other => Err(Error::Parse(format!(
                "unknown sweep parameter `{other}` (expected angle_rmse, v_max, targets or clutter)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::AngleStdDeg => "angle_std_deg",
            Self::VMax => "v_max",
            Self::InitialTargets => "initial_targets",
            Self::ClutterMean => "clutter_mean",
        }
    }

    pub fn apply(self, config: &mut ScenarioConfig, value: f64) -> Result<()> {
        match self {
            Self::AngleStdDeg => config.sensing.angle_std_deg = value,
            Self::VMax => config.scenario.v_max = value,
            Self::InitialTargets => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::Parse(format!("target count must be a whole number, got {value}")));
                }
                config.scenario.initial_targets = value as usize;
            }
            Self::ClutterMean => config.sensing.clutter_mean = value,
        }
        config.validate()
    }
}

/// One Monte-Carlo report per value, same base seed for all.
pub fn sweep(
    config: &ScenarioConfig,
    param: SweepParam,
    values: &[f64],
    trials: usize,
    exec: Execution,
) -> Result<Vec<(f64, MonteCarloReport)>> {
    values
        .iter()
        .map(|&v| {
            let mut cfg = config.clone();
            param.apply(&mut cfg, v)?;
            Ok((v, monte_carlo(&cfg, trials, exec)?))
        })
        .collect()
}
