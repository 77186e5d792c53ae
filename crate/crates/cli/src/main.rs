use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use staris_core::harness::{
    emit, monte_carlo_with, overhead_account, run_trial, sweep, sweep_csv, EmitOptions, Execution, Prepared,
    RunOptions, ScenarioConfig, ScenarioKind, SweepParam,
};

#[derive(Parser)]
#[command(name = "staris", version, about = "Track dynamic scatterers and predict beams for a surface-aided indoor link")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// TOML scenario file; defaults are used for anything it leaves out.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of ISAC periods (overrides the config).
    #[arg(long)]
    periods: Option<usize>,
    /// Use the variable-cardinality script instead of the config's scenario.
    #[arg(long)]
    variable_cardinality: bool,
    /// Run trials one after another.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn load(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(p) => ScenarioConfig::from_file(p).with_context(|| format!("loading {}", p.display()))?,
            None => ScenarioConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.scenario.seed = s;
        }
        if let Some(k) = self.periods {
            cfg.scenario.periods = k;
        }
        if self.variable_cardinality {
            cfg.scenario.kind = ScenarioKind::VariableCardinality;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn execution(&self) -> Execution {
        if self.sequential { Execution::Sequential } else { Execution::Parallel }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run Monte-Carlo trials and write metrics.csv and summary.txt.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write intensity_<k>.txt snapshots of the first trial.
        #[arg(long)]
        dump_intensity: bool,
    },
    /// Repeat the simulation over a list of parameter values.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// angle_rmse (degrees), v_max, targets or clutter.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Training sequences for a full scan, or per period under tracking.
    Overhead {
        #[command(flatten)]
        common: Common,
        /// Report the reduced scan of a tracked run.
        #[arg(long)]
        tracked: bool,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate { common, trials, out, dump_intensity } => {
            let cfg = common.load()?;
            let opts = RunOptions { keep_intensities: dump_intensity, ..RunOptions::default() };
            let report = monte_carlo_with(&cfg, trials, common.execution(), opts)?;
            let files = emit(&report, &out, EmitOptions { intensity_dumps: dump_intensity })?;
            let a = &report.aggregates;
            println!(
                "{} trial(s) x {} periods: count hit rate {:.3}, mean RMSE {}, SNR fixed/tracked/oracle {:.2}/{:.2}/{:.2} dB",
                a.trials,
                a.periods,
                a.count_hit_rate,
                a.mean_rmse_m.map_or("undefined".into(), |v| format!("{v:.4} m")),
                a.mean_snr_fixed_db,
                a.mean_snr_tracked_db,
                a.mean_snr_oracle_db
            );
            for f in files.iter().take(2) {
                println!("wrote {}", f.display());
            }
        }
        Command::Sweep { common, param, values, trials, out } => {
            let cfg = common.load()?;
            let param = SweepParam::parse(&param)?;
            if trials == 0 {
                bail!("--trials must be at least 1");
            }
            let results = sweep(&cfg, param, &values, trials, common.execution())?;
            fs::create_dir_all(&out)?;
            let path = out.join("sweep.csv");
            sweep_csv(param, &results, fs::File::create(&path)?)?;
            for (v, rep) in &results {
                let a = &rep.aggregates;
                println!(
                    "{} = {v}: mean RMSE {}, count hit rate {:.3}",
                    param.name(),
                    a.mean_rmse_m.map_or("undefined".into(), |x| format!("{x:.5} m")),
                    a.count_hit_rate
                );
            }
            println!("wrote {}", path.display());
        }
        Command::Overhead { common, tracked } => {
            let cfg = common.load()?;
            let full = overhead_account(&cfg, None)?;
            println!("full scan: L_B = {}, L_U = {}, total = {}", full.l_b, full.l_u, full.total());
            if tracked {
                let prep = Prepared::new(&cfg)?;
                let run = run_trial(&prep, 0, cfg.scenario.seed, RunOptions::default())?;
                for p in &run.periods {
                    println!("k = {:>3}: {} sequences{}", p.k, p.overhead, if p.reinit { " (full scan)" } else { "" });
                }
                let mean = run.periods.iter().map(|p| p.overhead as f64).sum::<f64>() / run.periods.len() as f64;
                println!("tracked mean = {mean:.2}");
            }
        }
    }
    Ok(())
}
