//! Planar poses, angle arithmetic, the unicycle model and reference
//! trajectories built from piecewise-constant velocity profiles.
//!
//! Everything here is a plain value type; all operations are pure.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul};

use crate::error::{Error, Result};

/// Wrap an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::Domain(format!("cannot wrap non-finite angle {a}")));
    }
    Ok(wrap(a))
}

/// Infallible wrap for internal use on values already known to be finite.
pub(crate) fn wrap(a: f64) -> f64 {
    // in-range angles pass through untouched; shifting by π would round them
    if a > -PI && a <= PI {
        return a;
    }
    let r = (a + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        PI
    } else {
        r
    }
}

/// Robot configuration `(x, y, θ)` in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Heading in radians, always in `(-π, π]`.
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose {
            x,
            y,
            theta: wrap(theta),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

/// Body-frame velocities: linear speed along the main axis and yaw rate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VelocityPair {
    /// m/s
    pub v: f64,
    /// rad/s
    pub w: f64,
}

impl VelocityPair {
    pub const ZERO: VelocityPair = VelocityPair { v: 0.0, w: 0.0 };

    pub fn new(v: f64, w: f64) -> Self {
        VelocityPair { v, w }
    }

    pub fn norm(&self) -> f64 {
        self.v.hypot(self.w)
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.w.is_finite()
    }
}

/// Time derivative of a pose.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PoseRate {
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
}

impl Add for PoseRate {
    type Output = PoseRate;
    fn add(self, o: PoseRate) -> PoseRate {
        PoseRate {
            dx: self.dx + o.dx,
            dy: self.dy + o.dy,
            dtheta: self.dtheta + o.dtheta,
        }
    }
}

impl Mul<f64> for PoseRate {
    type Output = PoseRate;
    fn mul(self, k: f64) -> PoseRate {
        PoseRate {
            dx: self.dx * k,
            dy: self.dy * k,
            dtheta: self.dtheta * k,
        }
    }
}

/// Unicycle kinematics: `(v cos θ, v sin θ, w)`.
pub fn unicycle_derivative(q: &Pose, eta: VelocityPair) -> PoseRate {
    let (s, c) = q.theta.sin_cos();
    PoseRate {
        dx: eta.v * c,
        dy: eta.v * s,
        dtheta: eta.w,
    }
}

/// RK4 displacement over one step of the unicycle model with `eta` held.
/// θ is integrated unwrapped inside the step.
pub fn pose_increment(q: &Pose, eta: VelocityPair, dt: f64) -> PoseRate {
    let shift = |r: PoseRate, h: f64| Pose {
        x: q.x + r.dx * h,
        y: q.y + r.dy * h,
        theta: q.theta + r.dtheta * h,
    };
    let k1 = unicycle_derivative(q, eta);
    let k2 = unicycle_derivative(&shift(k1, dt / 2.0), eta);
    let k3 = unicycle_derivative(&shift(k2, dt / 2.0), eta);
    let k4 = unicycle_derivative(&shift(k3, dt), eta);
    (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// One fixed-step RK4 step of the unicycle model with `eta` held over the step.
pub fn integrate_pose(q: &Pose, eta: VelocityPair, dt: f64) -> Pose {
    let d = pose_increment(q, eta, dt);
    Pose::new(q.x + d.dx, q.y + d.dy, q.theta + d.dtheta)
}

/// Tracking error expressed in the robot frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PostureError {
    pub ex: f64,
    pub ey: f64,
    /// Wrapped into `(-π, π]`.
    pub etheta: f64,
}

impl PostureError {
    pub const ZERO: PostureError = PostureError {
        ex: 0.0,
        ey: 0.0,
        etheta: 0.0,
    };

    pub fn new(ex: f64, ey: f64, etheta: f64) -> Self {
        PostureError {
            ex,
            ey,
            etheta: wrap(etheta),
        }
    }

    /// Mixed-unit Euclidean norm (radians weighted as 1 m/rad).
    pub fn norm(&self) -> f64 {
        (self.ex * self.ex + self.ey * self.ey + self.etheta * self.etheta).sqrt()
    }

    pub fn planar_norm(&self) -> f64 {
        self.ex.hypot(self.ey)
    }
}

/// Reference-minus-actual pose, rotated into the frame of the actual pose.
pub fn pose_error(reference: &Pose, actual: &Pose) -> PostureError {
    let dx = reference.x - actual.x;
    let dy = reference.y - actual.y;
    let (s, c) = actual.theta.sin_cos();
    PostureError::new(c * dx + s * dy, -s * dx + c * dy, reference.theta - actual.theta)
}

/// Constant-velocity piece of a reference profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub duration: f64,
    pub v: f64,
    pub w: f64,
}

impl Segment {
    pub fn new(duration: f64, v: f64, w: f64) -> Self {
        Segment { duration, v, w }
    }

    pub fn velocity(&self) -> VelocityPair {
        VelocityPair::new(self.v, self.w)
    }
}

/// Exact end pose after driving `(v, w)` for `tau` seconds from `start`.
fn arc(start: &Pose, v: f64, w: f64, tau: f64) -> Pose {
    // chord form: stable for w -> 0 and exact for w == 0
    let half = 0.5 * w * tau;
    let sinc = if half == 0.0 { 1.0 } else { half.sin() / half };
    let chord = v * tau * sinc;
    let mid = start.theta + half;
    Pose::new(
        start.x + chord * mid.cos(),
        start.y + chord * mid.sin(),
        start.theta + w * tau,
    )
}

/// A reference trajectory defined by an initial pose and consecutive
/// constant-velocity segments. Poses are obtained in closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceProfile {
    initial_pose: Pose,
    segments: Vec<Segment>,
    // start time and start pose of each segment
    starts: Vec<(f64, Pose)>,
    total: f64,
}

impl ReferenceProfile {
    pub fn new(initial_pose: Pose, segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Domain("reference profile needs at least one segment".into()));
        }
        if !initial_pose.is_finite() {
            return Err(Error::Domain("reference initial pose must be finite".into()));
        }
        for (i, s) in segments.iter().enumerate() {
            if !(s.duration > 0.0 && s.duration.is_finite()) {
                return Err(Error::Domain(format!(
                    "segment {i}: duration must be > 0, got {}",
                    s.duration
                )));
            }
            if !(s.v > 0.0 && s.v.is_finite()) {
                return Err(Error::Domain(format!(
                    "segment {i}: reference speed must be > 0, got {}",
                    s.v
                )));
            }
            if !s.w.is_finite() {
                return Err(Error::Domain(format!("segment {i}: turn rate must be finite")));
            }
        }
        let mut starts = Vec::with_capacity(segments.len());
        let mut t = 0.0;
        let mut pose = Pose::new(initial_pose.x, initial_pose.y, initial_pose.theta);
        for s in &segments {
            starts.push((t, pose));
            pose = arc(&pose, s.v, s.w, s.duration);
            t += s.duration;
        }
        Ok(ReferenceProfile {
            initial_pose: starts[0].1,
            segments,
            starts,
            total: t,
        })
    }

    /// A single constant-curvature segment.
    pub fn circle(initial_pose: Pose, v: f64, w: f64, duration: f64) -> Result<Self> {
        Self::new(initial_pose, vec![Segment::new(duration, v, w)])
    }

    pub fn initial_pose(&self) -> Pose {
        self.initial_pose
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn duration(&self) -> f64 {
        self.total
    }

    fn segment_index(&self, t: f64) -> usize {
        // last segment whose start is <= t
        self.starts.partition_point(|(s, _)| *s <= t).saturating_sub(1)
    }

    /// Reference pose and velocity at time `t`.
    pub fn state_at(&self, t: f64) -> Result<(Pose, VelocityPair)> {
        if !(0.0..=self.total).contains(&t) {
            return Err(Error::Range(format!(
                "t = {t} outside reference profile [0, {}]",
                self.total
            )));
        }
        let i = self.segment_index(t);
        let (t0, start) = self.starts[i];
        let seg = self.segments[i];
        Ok((arc(&start, seg.v, seg.w, t - t0), seg.velocity()))
    }
}

/// Free-function form of [`ReferenceProfile::state_at`].
pub fn reference_state(profile: &ReferenceProfile, t: f64) -> Result<(Pose, VelocityPair)> {
    profile.state_at(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_angle(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI).unwrap(), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-1.5 * PI).unwrap(), PI / 2.0, epsilon = 1e-12);
        assert_eq!(wrap_angle(-PI).unwrap(), PI);
        assert!(wrap_angle(f64::NAN).is_err());
        assert!(wrap_angle(f64::INFINITY).is_err());
    }

    #[test]
    fn unicycle_examples() {
        let r = unicycle_derivative(&Pose::new(0.0, 0.0, 0.0), VelocityPair::new(1.0, 0.0));
        assert_eq!((r.dx, r.dy, r.dtheta), (1.0, 0.0, 0.0));
        let r = unicycle_derivative(&Pose::new(0.0, 0.0, PI / 2.0), VelocityPair::new(1.0, 0.0));
        assert_abs_diff_eq!(r.dx, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.dy, 1.0, epsilon = 1e-15);
        let r = unicycle_derivative(&Pose::new(5.0, -2.0, 0.3), VelocityPair::new(0.0, 2.0));
        assert_eq!((r.dx, r.dy, r.dtheta), (0.0, 0.0, 2.0));
    }

    #[test]
    fn pose_error_examples() {
        let q = Pose::new(1.0, 2.0, 0.5);
        assert_eq!(pose_error(&q, &q), PostureError::ZERO);

        let e = pose_error(&Pose::new(1.0, 2.0, 0.3), &Pose::new(0.0, 0.0, 0.0));
        assert_abs_diff_eq!(e.ex, 1.0);
        assert_abs_diff_eq!(e.ey, 2.0);
        assert_abs_diff_eq!(e.etheta, 0.3);

        let e = pose_error(&Pose::new(1.0, 0.0, PI / 2.0), &Pose::new(0.0, 0.0, PI / 2.0));
        assert_abs_diff_eq!(e.ex, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e.ey, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e.etheta, 0.0);
    }

    #[test]
    fn reference_examples() {
        let line = ReferenceProfile::circle(Pose::default(), 0.5, 0.0, 10.0).unwrap();
        let (p, eta) = line.state_at(2.0).unwrap();
        assert_abs_diff_eq!(p.x, 1.0, epsilon = 1e-15);
        assert_eq!((p.y, p.theta), (0.0, 0.0));
        assert_eq!(eta, VelocityPair::new(0.5, 0.0));

        let circ = ReferenceProfile::circle(Pose::default(), 0.5, 0.5, 10.0).unwrap();
        let (p, eta) = circ.state_at(PI).unwrap();
        assert_abs_diff_eq!(p.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.theta, PI / 2.0, epsilon = 1e-12);
        assert_eq!(eta, VelocityPair::new(0.5, 0.5));

        let start = Pose::new(1.0, -1.0, 0.2);
        let prof =
            ReferenceProfile::new(start, vec![Segment::new(1.0, 0.3, 0.1), Segment::new(2.0, 0.4, -0.2)]).unwrap();
        let (p, eta) = prof.state_at(0.0).unwrap();
        assert_eq!(p, start);
        assert_eq!(eta, VelocityPair::new(0.3, 0.1));

        assert!(matches!(prof.state_at(3.5), Err(Error::Range(_))));
        assert!(matches!(prof.state_at(-0.1), Err(Error::Range(_))));
        assert!(prof.state_at(3.0).is_ok());
    }

    #[test]
    fn reference_rejects_bad_segments() {
        let p = Pose::default();
        assert!(ReferenceProfile::new(p, vec![]).is_err());
        assert!(ReferenceProfile::circle(p, 0.0, 0.1, 1.0).is_err());
        assert!(ReferenceProfile::circle(p, -0.2, 0.1, 1.0).is_err());
        assert!(ReferenceProfile::circle(p, 0.2, 0.1, 0.0).is_err());
    }

    #[test]
    fn reference_continuous_across_boundaries() {
        let prof = ReferenceProfile::new(
            Pose::new(0.3, 0.1, 2.9),
            vec![
                Segment::new(3.0, 0.5, 0.7),
                Segment::new(2.5, 0.2, 0.0),
                Segment::new(4.0, 0.3, -1.1),
            ],
        )
        .unwrap();
        let mut t = 0.0;
        for seg in &prof.segments()[..2] {
            t += seg.duration;
            // left limit by evaluating the previous segment's arc at its full duration
            let i = prof.segment_index(t) - 1;
            let (_, start) = prof.starts[i];
            let left = arc(&start, seg.v, seg.w, seg.duration);
            let (right, _) = prof.state_at(t).unwrap();
            assert!((left.x - right.x).abs() < 1e-12);
            assert!((left.y - right.y).abs() < 1e-12);
            assert!(wrap(left.theta - right.theta).abs() < 1e-12);
        }
    }

    #[test]
    fn integrate_pose_examples() {
        let q = integrate_pose(&Pose::default(), VelocityPair::new(1.0, 0.0), 0.1);
        assert_eq!(q, Pose::new(0.1, 0.0, 0.0));
        let q0 = Pose::new(-3.0, 2.0, 1.0);
        assert_eq!(integrate_pose(&q0, VelocityPair::ZERO, 0.37), q0);
    }

    #[test]
    fn integrate_pose_tracks_closed_form_arc() {
        let eta = VelocityPair::new(0.5, 0.5);
        let prof = ReferenceProfile::circle(Pose::default(), eta.v, eta.w, 10.0).unwrap();
        let dt = 1e-3;
        let mut q = Pose::default();
        let mut worst: f64 = 0.0;
        for k in 1..=10_000 {
            q = integrate_pose(&q, eta, dt);
            let (exact, _) = prof.state_at(k as f64 * dt).unwrap();
            worst = worst.max((q.x - exact.x).hypot(q.y - exact.y));
        }
        assert!(worst < 1e-9, "max position error {worst}");
    }

    proptest! {
        #[test]
        fn wrap_is_in_range_and_congruent(a in -1e4f64..1e4) {
            let r = wrap_angle(a).unwrap();
            prop_assert!(r > -PI && r <= PI);
            let k = ((a - r) / TAU).round();
            prop_assert!((a - r - k * TAU).abs() < 1e-9);
        }

        #[test]
        fn pose_error_of_self_is_zero(x in -50.0f64..50.0, y in -50.0f64..50.0, th in -4.0f64..4.0) {
            let q = Pose::new(x, y, th);
            prop_assert_eq!(pose_error(&q, &q), PostureError::ZERO);
        }

        #[test]
        fn pose_error_preserves_planar_norm(
            x in -50.0f64..50.0, y in -50.0f64..50.0, th in -4.0f64..4.0,
            xr in -50.0f64..50.0, yr in -50.0f64..50.0, thr in -4.0f64..4.0,
        ) {
            let e = pose_error(&Pose::new(xr, yr, thr), &Pose::new(x, y, th));
            let direct = (xr - x).hypot(yr - y);
            prop_assert!((e.planar_norm() - direct).abs() <= 1e-12 * direct.max(1.0));
            prop_assert!(e.etheta > -PI && e.etheta <= PI);
        }
    }
}
