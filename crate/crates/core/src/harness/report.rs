use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::{MonteCarloReport, PeriodMetrics, SweepParam};
use crate::Result;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EmitOptions {
    /// Write `intensity_<k>.txt` for the first trial (needs kept intensities).
    pub intensity_dumps: bool,
}

/// One header row naming every metric, then one row per (trial, period).
pub fn write_metrics_csv<W: Write>(rows: impl IntoIterator<Item = impl std::borrow::Borrow<PeriodMetrics>>, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r.borrow())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_metrics_csv<R: Read>(r: R) -> Result<Vec<PeriodMetrics>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize().map(|row| row.map_err(Into::into)).collect()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| x.to_string())
}

fn summary_text(report: &MonteCarloReport) -> Result<String> {
    let a = &report.aggregates;
    let mut s = String::new();
    let _ = writeln!(s, "seed = {}", report.base_seed);
    let _ = writeln!(s, "config_sha256 = {}", report.config.hash()?);
    let _ = writeln!(s, "trials = {}", a.trials);
    let _ = writeln!(s, "periods = {}", a.periods);
    let _ = writeln!(s, "count_hit_rate = {}", a.count_hit_rate);
    let _ = writeln!(s, "mean_rmse_m = {}", opt(a.mean_rmse_m));
    let _ = writeln!(s, "mean_angle_rmse_rad = {}", opt(a.mean_angle_rmse_rad));
    let _ = writeln!(s, "mean_snr_fixed_db = {}", a.mean_snr_fixed_db);
    let _ = writeln!(s, "mean_snr_tracked_db = {}", a.mean_snr_tracked_db);
    let _ = writeln!(s, "mean_snr_oracle_db = {}", a.mean_snr_oracle_db);
    let _ = writeln!(s, "mean_overhead = {}", a.mean_overhead);
    let _ = writeln!(s, "reinits = {}", a.reinits);
    let _ = writeln!(s, "\n# per-period means: k, true, est, hit, rmse_m, snr_fixed, snr_tracked, snr_oracle, overhead");
    for m in &report.means {
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {} {} {}",
            m.k,
            m.true_count,
            m.est_count,
            m.count_hit_rate,
            opt(m.rmse_m),
            m.snr_fixed_db,
            m.snr_tracked_db,
            m.snr_oracle_db,
            m.overhead
        );
    }
    let _ = writeln!(s, "\n# config\n{}", report.config.to_toml()?);
    Ok(s)
}

/// Write `metrics.csv`, `summary.txt` and optional intensity dumps into
/// `dir`, creating it if needed. Returns the written paths.
pub fn emit(report: &MonteCarloReport, dir: &Path, opts: EmitOptions) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let metrics = dir.join("metrics.csv");
    write_metrics_csv(report.rows(), fs::File::create(&metrics)?)?;
    written.push(metrics);

    let summary = dir.join("summary.txt");
    fs::write(&summary, summary_text(report)?)?;
    written.push(summary);

    if opts.intensity_dumps {
        if let Some(first) = report.trials.first() {
            for (i, v) in first.intensities.iter().enumerate() {
                let p = dir.join(format!("intensity_{}.txt", i + 1));
                fs::write(&p, v.to_json()?)?;
                written.push(p);
            }
        }
    }
    Ok(written)
}

/// Per-period means of a sweep, one row per (value, period).
pub fn sweep_csv<W: Write>(param: SweepParam, results: &[(f64, MonteCarloReport)], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        param.name(),
        "k",
        "true_count",
        "est_count",
        "count_hit_rate",
        "rmse_m",
        "angle_rmse_rad",
        "snr_fixed_db",
        "snr_tracked_db",
        "snr_oracle_db",
        "overhead",
    ])?;
    let o = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    for (v, rep) in results {
        for m in &rep.means {
            out.write_record([
                v.to_string(),
                m.k.to_string(),
                m.true_count.to_string(),
                m.est_count.to_string(),
                m.count_hit_rate.to_string(),
                o(m.rmse_m),
                o(m.angle_rmse_rad),
                m.snr_fixed_db.to_string(),
                m.snr_tracked_db.to_string(),
                m.snr_oracle_db.to_string(),
                m.overhead.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}
