//! Multi-run experiments: paired controller comparisons and tracking-gain sweeps.

use std::cmp::Ordering;

use crate::error::{ConfigError, Result};
use crate::exec::{self, Execution};
use crate::harness::config::ScenarioConfig;
use crate::harness::metrics::{compute_metrics, Metrics};
use crate::harness::scenario::run_scenario;
use crate::tracking::TrackingGains;

/// `b / a`, with `0 / 0` (and any `a == b`) read as 1.
fn ratio(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else {
        b / a
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratios {
    pub rms_velocity_error: [f64; 2],
    pub rms_velocity_error_norm: f64,
    pub sup_velocity_error_after_transient: f64,
    pub final_error_norm: f64,
    /// `None` unless both runs settle.
    pub settling_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub a: Metrics,
    pub b: Metrics,
    /// B relative to A.
    pub ratios: Ratios,
}

/// Run two scenarios on the same reference and report B's metrics relative to A's.
pub fn compare_controllers(a: &ScenarioConfig, b: &ScenarioConfig, exec: Execution) -> Result<Comparison> {
    a.validate()?;
    b.validate()?;
    if a.duration != b.duration || a.dt != b.dt {
        return Err(ConfigError::Mismatch(format!(
            "run lengths differ: {} s at dt {} vs {} s at dt {}",
            a.duration, a.dt, b.duration, b.dt
        ))
        .into());
    }
    if a.reference_profile()? != b.reference_profile()? {
        return Err(ConfigError::Mismatch("reference trajectories differ".into()).into());
    }

    let (ma, mb) = exec::join(
        exec,
        || run_scenario(a).and_then(|log| compute_metrics(&log, &a.metrics)),
        || run_scenario(b).and_then(|log| compute_metrics(&log, &b.metrics)),
    );
    let (ma, mb) = (ma?, mb?);
    let ratios = Ratios {
        rms_velocity_error: [
            ratio(ma.rms_velocity_error[0], mb.rms_velocity_error[0]),
            ratio(ma.rms_velocity_error[1], mb.rms_velocity_error[1]),
        ],
        rms_velocity_error_norm: ratio(ma.rms_velocity_error_norm, mb.rms_velocity_error_norm),
        sup_velocity_error_after_transient: ratio(
            ma.sup_velocity_error_after_transient,
            mb.sup_velocity_error_after_transient,
        ),
        final_error_norm: ratio(ma.final_error_norm, mb.final_error_norm),
        settling_time: match (ma.settling_time, mb.settling_time) {
            (Some(x), Some(y)) => Some(ratio(x, y)),
            _ => None,
        },
    };
    Ok(Comparison { a: ma, b: mb, ratios })
}

/// Candidate values for each tracking gain; the sweep runs their Cartesian product.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GainGrid {
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
    pub k3: Vec<f64>,
}

impl GainGrid {
    pub fn points(&self) -> Vec<TrackingGains> {
        let mut out = Vec::with_capacity(self.k1.len() * self.k2.len() * self.k3.len());
        for &k1 in &self.k1 {
            for &k2 in &self.k2 {
                for &k3 in &self.k3 {
                    out.push(TrackingGains { k1, k2, k3 });
                }
            }
        }
        out
    }

    fn validate(&self) -> Result<(), ConfigError> {
        for (name, values) in [("k1", &self.k1), ("k2", &self.k2), ("k3", &self.k3)] {
            if values.is_empty() {
                return Err(ConfigError::EmptyGrid(format!("no values for {name}")));
            }
            if let Some(bad) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return Err(ConfigError::invariant(
                    name,
                    format!("grid values must be > 0, got {bad}"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub gains: TrackingGains,
    pub metrics: Metrics,
}

/// Settling time (unsettled last), then final error, then `(k1, k2, k3)`.
fn rank(a: &SweepRow, b: &SweepRow) -> Ordering {
    let settle = match (a.metrics.settling_time, b.metrics.settling_time) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    };
    settle
        .then(a.metrics.final_error_norm.total_cmp(&b.metrics.final_error_norm))
        .then(a.gains.k1.total_cmp(&b.gains.k1))
        .then(a.gains.k2.total_cmp(&b.gains.k2))
        .then(a.gains.k3.total_cmp(&b.gains.k3))
}

/// Run `base` once per grid point and rank the results.
pub fn gain_sweep(base: &ScenarioConfig, grid: &GainGrid, exec: Execution) -> Result<Vec<SweepRow>> {
    grid.validate()?;
    base.validate()?;
    let points = grid.points();
    let results = exec::map(exec, &points, |&gains| -> Result<SweepRow> {
        let cfg = ScenarioConfig { gains, ..base.clone() };
        let log = run_scenario(&cfg)?;
        Ok(SweepRow {
            gains,
            metrics: compute_metrics(&log, &cfg.metrics)?,
        })
    });
    let mut rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    // stable sort keeps duplicate grid points in grid order
    rows.sort_by(rank);
    Ok(rows)
}
