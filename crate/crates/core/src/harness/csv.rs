//! CSV output for run logs and sweep tables.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::batch::SweepRow;
use crate::harness::scenario::SimLog;

pub const LOG_HEADER: &str = "t,x,y,theta,x_r,y_r,theta_r,e_x,e_y,e_theta,v_r,w_r,v_c,w_c,v,w,e_c_norm,u_fb1,u_fb2,u_ff1,u_ff2,u1,u2,V_lyap,Vdot_lyap";

pub const SWEEP_HEADER: &str = "rank,k1,k2,k3,settling_time,settling_time_ex,final_error_norm,rms_v,rms_w,sup_e_c_after_transient,lyapunov_increases";

/// Nine significant digits, `%g` style: fixed notation for moderate
/// magnitudes, scientific otherwise, trailing zeros trimmed.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_owned();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp) as usize;
        let fixed = format!("{x:.decimals$}");
        if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.').to_owned()
        } else {
            fixed
        }
    } else {
        let m = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{m}e{exp}")
    }
}

pub fn log_to_csv(log: &SimLog) -> String {
    let mut out = String::with_capacity(64 + log.len() * 25 * 12);
    out.push_str(LOG_HEADER);
    out.push('\n');
    for r in &log.records {
        let row = [
            r.t,
            r.pose.x,
            r.pose.y,
            r.pose.theta,
            r.reference.x,
            r.reference.y,
            r.reference.theta,
            r.error.ex,
            r.error.ey,
            r.error.etheta,
            r.eta_r.v,
            r.eta_r.w,
            r.eta_c.v,
            r.eta_c.w,
            r.eta.v,
            r.eta.w,
            r.velocity_error_norm(),
            r.u_fb[0],
            r.u_fb[1],
            r.u_ff[0],
            r.u_ff[1],
            r.command.right,
            r.command.left,
            r.lyapunov,
            r.lyapunov_rate,
        ];
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format_sig9(*v));
        }
        out.push('\n');
    }
    out
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let opt = |v: Option<f64>| v.map(format_sig9).unwrap_or_default();
    let mut out = String::new();
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for (i, row) in rows.iter().enumerate() {
        let m = &row.metrics;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            i + 1,
            format_sig9(row.gains.k1),
            format_sig9(row.gains.k2),
            format_sig9(row.gains.k3),
            opt(m.settling_time),
            opt(m.settling_time_ex),
            format_sig9(m.final_error_norm),
            format_sig9(m.rms_velocity_error[0]),
            format_sig9(m.rms_velocity_error[1]),
            format_sig9(m.sup_velocity_error_after_transient),
            m.lyapunov_increases,
        );
    }
    out
}

/// Write CSV text to `path`, or to stdout when `path` is `None`.
pub fn write_output(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

/// Write a run log as CSV to `path`.
pub fn emit_csv(log: &SimLog, path: &Path) -> Result<()> {
    if log.is_empty() {
        return Err(Error::Domain("refusing to write an empty log".into()));
    }
    write_output(&log_to_csv(log), Some(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenario::StepRecord;

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(-0.5), "-0.5");
        assert_eq!(format_sig9(0.1 + 0.2), "0.3");
        assert_eq!(format_sig9(std::f64::consts::PI), "3.14159265");
        assert_eq!(format_sig9(123456789.0), "123456789");
        assert_eq!(format_sig9(1234567891.0), "1.23456789e9");
        assert_eq!(format_sig9(1.5e-7), "1.5e-7");
        assert_eq!(format_sig9(0.00012345678912), "0.000123456789");
    }

    #[test]
    fn one_step_log() {
        let log = SimLog {
            dt: 0.1,
            records: vec![StepRecord::default()],
        };
        let text = log_to_csv(&log);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], LOG_HEADER);
        assert_eq!(lines[1].split(',').count(), 25);
        assert!(text.ends_with('\n') && !text.contains('\r'));
    }

    #[test]
    fn empty_log_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let log = SimLog {
            dt: 0.1,
            records: vec![],
        };
        assert!(emit_csv(&log, &dir.path().join("x.csv")).is_err());
    }

    #[test]
    fn io_errors_carry_the_path() {
        let log = SimLog {
            dt: 0.1,
            records: vec![StepRecord::default()],
        };
        let err = emit_csv(&log, Path::new("/nonexistent-dir/out.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/out.csv"));
    }
}
