use crate::error::{Error, Result};
use crate::harness::config::Thresholds;
use crate::harness::scenario::SimLog;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// First time after which `‖e_p‖` stays below the threshold; `None` if it never settles.
    pub settling_time: Option<f64>,
    /// Same, for `|e_x|` alone.
    pub settling_time_ex: Option<f64>,
    /// RMS of `(v_c − v, w_c − w)` over the trailing window.
    pub rms_velocity_error: [f64; 2],
    /// RMS of `‖e_c‖` over the trailing window.
    pub rms_velocity_error_norm: f64,
    pub sup_velocity_error: f64,
    pub sup_velocity_error_after_transient: f64,
    pub final_error_norm: f64,
    /// Steps where `V` grew by more than the tolerance.
    pub lyapunov_increases: usize,
}

fn settling(log: &SimLog, threshold: f64, value: impl Fn(usize) -> f64) -> Option<f64> {
    let n = log.records.len();
    match (0..n).rev().find(|&k| value(k) >= threshold) {
        None => Some(log.records[0].t),
        Some(k) if k + 1 < n => Some(log.records[k + 1].t),
        Some(_) => None,
    }
}

/// Summary statistics of a run.
///
/// Windows are clamped to the run: a transient longer than the run leaves an
/// empty post-transient window, reported as 0.
pub fn compute_metrics(log: &SimLog, th: &Thresholds) -> Result<Metrics> {
    let recs = &log.records;
    let last = recs
        .last()
        .ok_or_else(|| Error::Domain("cannot compute metrics of an empty log".into()))?;

    let window_start = last.t * (1.0 - th.window);
    let mut sum = [0.0; 2];
    let mut count = 0usize;
    let mut sup = 0.0f64;
    let mut sup_late = 0.0f64;
    for r in recs {
        let ev = r.eta_c.v - r.eta.v;
        let ew = r.eta_c.w - r.eta.w;
        let norm = ev.hypot(ew);
        sup = sup.max(norm);
        if r.t >= th.transient {
            sup_late = sup_late.max(norm);
        }
        if r.t >= window_start {
            sum[0] += ev * ev;
            sum[1] += ew * ew;
            count += 1;
        }
    }
    let rms = sum.map(|s| (s / count as f64).sqrt());

    let lyapunov_increases = recs
        .windows(2)
        .filter(|w| w[1].lyapunov > w[0].lyapunov + th.lyapunov_tolerance)
        .count();

    Ok(Metrics {
        settling_time: settling(log, th.settle, |k| recs[k].error.norm()),
        settling_time_ex: settling(log, th.settle, |k| recs[k].error.ex.abs()),
        rms_velocity_error: rms,
        rms_velocity_error_norm: ((sum[0] + sum[1]) / count as f64).sqrt(),
        sup_velocity_error: sup,
        sup_velocity_error_after_transient: sup_late,
        final_error_norm: last.error.norm(),
        lyapunov_increases,
    })
}
