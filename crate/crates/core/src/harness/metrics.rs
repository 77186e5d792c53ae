use pathfinding::matrix::Matrix;
use pathfinding::prelude::kuhn_munkres_min;
use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;

/// Association gate for the localisation RMSE, metres.
pub const DEFAULT_GATE: f64 = 10.0;

/// Squared distances are assigned on an integer grid of this resolution (m²).
const COST_QUANTUM: f64 = 1e-9;

/// One row of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodMetrics {
    pub trial: usize,
    pub k: usize,
    pub true_count: usize,
    pub est_count: usize,
    /// Empty when nothing was matched.
    pub rmse_m: Option<f64>,
    pub angle_rmse_rad: Option<f64>,
    pub snr_fixed_db: f64,
    pub snr_tracked_db: f64,
    pub snr_oracle_db: f64,
    /// BS plus UT training sequences spent this period.
    pub overhead: usize,
    pub reinit: bool,
    pub measurements: usize,
}

/// Minimum-cost matching of `estimates` to `truth` on squared Euclidean
/// distance, each pair capped at `gate²`. Pairs further apart than `gate`
/// are dropped. Returns `(estimate, truth, distance)`.
pub fn assign(estimates: &[Vec2], truth: &[Vec2], gate: f64) -> Vec<(usize, usize, f64)> {
    if estimates.is_empty() || truth.is_empty() {
        return Vec::new();
    }
    let transpose = estimates.len() > truth.len();
    let (rows, cols) = if transpose { (truth, estimates) } else { (estimates, truth) };
    let cap = gate * gate;
    let cost = Matrix::from_fn(rows.len(), cols.len(), |(i, j)| {
        let d2 = (rows[i] - cols[j]).norm_squared().min(cap);
        (d2 / COST_QUANTUM).round() as i64
    });
    let (_, cols_of_rows) = kuhn_munkres_min(&cost);
    cols_of_rows
        .into_iter()
        .enumerate()
        .map(|(i, j)| if transpose { (j, i) } else { (i, j) })
        .map(|(e, t)| (e, t, (estimates[e] - truth[t]).norm()))
        .filter(|&(_, _, d)| d <= gate)
        .collect()
}

/// Root mean square of the matched distances, `None` without matches.
pub fn rmse_over(pairs: &[(usize, usize, f64)]) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    Some((pairs.iter().map(|p| p.2 * p.2).sum::<f64>() / pairs.len() as f64).sqrt())
}

/// Localisation RMSE under optimal assignment with the default gate.
pub fn rmse_metric(estimates: &[Vec2], truth: &[Vec2]) -> Option<f64> {
    rmse_over(&assign(estimates, truth, DEFAULT_GATE))
}
