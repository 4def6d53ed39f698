//! Outer-loop trajectory tracking: the tracking control law, the error
//! dynamics it drives, and the Lyapunov function used to monitor it.
//!
//! With `s = e_y + k3·e_θ` the control law is
//!
//! ```text
//! v_c = k1·e_x + v_r·cos e_θ
//! w_c = w_r + (v_r/2)·k2·s + (v_r/(2·k3))·sin e_θ
//! ```
//!
//! and the monitored function is
//!
//! ```text
//! V = ½e_x² + ½s² + (1 − cos e_θ)/k2
//! ```
//!
//! Its time derivative along the closed loop is computed by the chain rule
//! (`∇V · ė`). Working that out by hand gives
//! `−k1·e_x² − (v_r·k2·k3/2)·s² − (v_r/(2·k2·k3))·sin²e_θ − k3·e_θ·e_x·w_c`;
//! the last term is sign-indefinite, which is what [`lyapunov_sign_scan`]
//! characterises.
//!
//! The classic Kanayama law (`w_c = w_r + v_r(k2·e_y + k3·sin e_θ)`, with
//! `V = ½(e_x² + e_y²) + (1 − cos e_θ)/k2`) is available as a baseline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::kinematics::{PostureError, VelocityPair};

/// Tracking gains `[k1, k2, k3]`, all strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingGains {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl TrackingGains {
    pub fn new(k1: f64, k2: f64, k3: f64) -> Result<Self> {
        let g = TrackingGains { k1, k2, k3 };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, k) in [("k1", self.k1), ("k2", self.k2), ("k3", self.k3)] {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::Domain(format!("{name} must be > 0, got {k}")));
            }
        }
        Ok(())
    }
}

/// Which outer-loop control law to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ControllerVariant {
    /// Control law with the `(e_y + k3·e_θ)` coupling term.
    #[default]
    Coupled,
    /// Classic Kanayama tracking law.
    Kanayama,
}

impl ControllerVariant {
    pub fn name(&self) -> &'static str {
        match self {
            ControllerVariant::Coupled => "coupled",
            ControllerVariant::Kanayama => "kanayama",
        }
    }

    pub fn control(&self, e: &PostureError, eta_r: VelocityPair, k: &TrackingGains) -> Result<VelocityPair> {
        match self {
            ControllerVariant::Coupled => tracking_control(e, eta_r, k),
            ControllerVariant::Kanayama => kanayama_control(e, eta_r, k),
        }
    }

    pub fn lyapunov_value(&self, e: &PostureError, k: &TrackingGains) -> f64 {
        match self {
            ControllerVariant::Coupled => lyapunov_value(e, k),
            ControllerVariant::Kanayama => 0.5 * (e.ex * e.ex + e.ey * e.ey) + (1.0 - e.etheta.cos()) / k.k2,
        }
    }

    pub fn lyapunov_gradient(&self, e: &PostureError, k: &TrackingGains) -> [f64; 3] {
        match self {
            ControllerVariant::Coupled => {
                let s = e.ey + k.k3 * e.etheta;
                [e.ex, s, k.k3 * s + e.etheta.sin() / k.k2]
            }
            ControllerVariant::Kanayama => [e.ex, e.ey, e.etheta.sin() / k.k2],
        }
    }

    /// `dV/dt` along the closed loop formed with this variant's control law.
    pub fn lyapunov_rate(&self, e: &PostureError, eta_r: VelocityPair, k: &TrackingGains) -> Result<f64> {
        let eta_c = self.control(e, eta_r, k)?;
        let de = error_dynamics(e, eta_r, eta_c);
        let g = self.lyapunov_gradient(e, k);
        Ok(g[0] * de[0] + g[1] * de[1] + g[2] * de[2])
    }
}

fn check_gains(k: &TrackingGains) -> Result<()> {
    if k.k3 == 0.0 {
        return Err(Error::Domain("k3 = 0 divides by zero in the heading term".into()));
    }
    k.validate()
}

/// Velocity command for the coupled tracking law.
pub fn tracking_control(e: &PostureError, eta_r: VelocityPair, k: &TrackingGains) -> Result<VelocityPair> {
    check_gains(k)?;
    let vr = eta_r.v;
    let v = k.k1 * e.ex + vr * e.etheta.cos();
    let w = eta_r.w + 0.5 * vr * k.k2 * (e.ey + k.k3 * e.etheta) + vr / (2.0 * k.k3) * e.etheta.sin();
    Ok(VelocityPair::new(v, w))
}

/// Velocity command for the Kanayama baseline.
pub fn kanayama_control(e: &PostureError, eta_r: VelocityPair, k: &TrackingGains) -> Result<VelocityPair> {
    k.validate()?;
    let vr = eta_r.v;
    Ok(VelocityPair::new(
        k.k1 * e.ex + vr * e.etheta.cos(),
        eta_r.w + vr * (k.k2 * e.ey + k.k3 * e.etheta.sin()),
    ))
}

/// Input matrix of the error dynamics, rows `(e_x, e_y, e_θ)`, columns `(v, w)`.
pub fn input_matrix(e: &PostureError) -> [[f64; 2]; 3] {
    [[-1.0, e.ey], [0.0, -e.ex], [0.0, -1.0]]
}

/// `ė = f(e) + g(e)·η_c`.
pub fn error_dynamics(e: &PostureError, eta_r: VelocityPair, eta_c: VelocityPair) -> [f64; 3] {
    let (s, c) = e.etheta.sin_cos();
    let f = [eta_r.v * c, eta_r.v * s, eta_r.w];
    let g = input_matrix(e);
    std::array::from_fn(|i| f[i] + g[i][0] * eta_c.v + g[i][1] * eta_c.w)
}

pub fn lyapunov_value(e: &PostureError, k: &TrackingGains) -> f64 {
    let s = e.ey + k.k3 * e.etheta;
    0.5 * e.ex * e.ex + 0.5 * s * s + (1.0 - e.etheta.cos()) / k.k2
}

pub fn lyapunov_rate(e: &PostureError, eta_r: VelocityPair, k: &TrackingGains) -> Result<f64> {
    ControllerVariant::Coupled.lyapunov_rate(e, eta_r, k)
}

/// Axis-aligned box of tracking errors, bounds inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRegion {
    pub ex: (f64, f64),
    pub ey: (f64, f64),
    pub etheta: (f64, f64),
}

impl ErrorRegion {
    /// `‖e‖∞ ≤ r`.
    pub fn cube(r: f64) -> Self {
        ErrorRegion {
            ex: (-r, r),
            ey: (-r, r),
            etheta: (-r, r),
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("ex", self.ex), ("ey", self.ey), ("etheta", self.etheta)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Domain(format!("empty scan region on {name}: [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSample {
    pub index: usize,
    pub error: PostureError,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignScanReport {
    pub samples: usize,
    pub min_rate: f64,
    pub max_rate: f64,
    pub positive_fraction: f64,
    /// Largest rates, descending.
    pub worst: Vec<ScanSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignScan {
    pub variant: ControllerVariant,
    pub eta_r: VelocityPair,
    pub gains: TrackingGains,
    pub region: ErrorRegion,
    pub samples: usize,
    pub seed: u64,
    pub worst_count: usize,
}

const SCAN_CHUNK: usize = 4096;

/// Sample the region uniformly and report the sign of `dV/dt`.
///
/// Samples are drawn in fixed-size chunks with one generator per chunk, so
/// the report does not depend on the execution mode or thread count.
pub fn lyapunov_sign_scan(scan: &SignScan, exec: Execution) -> Result<SignScanReport> {
    if scan.samples == 0 {
        return Err(Error::Domain("sign scan needs at least one sample".into()));
    }
    scan.region.validate()?;
    check_gains(&scan.gains)?;

    let chunks: Vec<usize> = (0..scan.samples.div_ceil(SCAN_CHUNK)).collect();
    let per_chunk = exec::map(exec, &chunks, |&c| -> Result<Vec<ScanSample>> {
        let mut rng = ChaCha8Rng::seed_from_u64(scan.seed);
        rng.set_stream(c as u64);
        let start = c * SCAN_CHUNK;
        let end = (start + SCAN_CHUNK).min(scan.samples);
        let r = &scan.region;
        (start..end)
            .map(|index| {
                let error = PostureError::new(
                    rng.gen_range(r.ex.0..=r.ex.1),
                    rng.gen_range(r.ey.0..=r.ey.1),
                    rng.gen_range(r.etheta.0..=r.etheta.1),
                );
                let rate = scan.variant.lyapunov_rate(&error, scan.eta_r, &scan.gains)?;
                Ok(ScanSample { index, error, rate })
            })
            .collect()
    });

    let mut min_rate = f64::INFINITY;
    let mut max_rate = f64::NEG_INFINITY;
    let mut positive = 0usize;
    let mut worst: Vec<ScanSample> = Vec::with_capacity(scan.worst_count + 1);
    for chunk in per_chunk {
        for s in chunk? {
            min_rate = min_rate.min(s.rate);
            max_rate = max_rate.max(s.rate);
            if s.rate > 0.0 {
                positive += 1;
            }
            if scan.worst_count > 0 {
                worst.push(s);
                if worst.len() > 4 * scan.worst_count {
                    rank_worst(&mut worst, scan.worst_count);
                }
            }
        }
    }
    rank_worst(&mut worst, scan.worst_count);
    Ok(SignScanReport {
        samples: scan.samples,
        min_rate,
        max_rate,
        positive_fraction: positive as f64 / scan.samples as f64,
        worst,
    })
}

fn rank_worst(v: &mut Vec<ScanSample>, keep: usize) {
    v.sort_by(|a, b| b.rate.total_cmp(&a.rate).then(a.index.cmp(&b.index)));
    v.truncate(keep);
}
