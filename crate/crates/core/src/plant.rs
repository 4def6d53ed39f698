//! Simulated differential-drive robot driven by two DC motors.
//!
//! Each motor is a first-order armature model (inductance neglected):
//! `τ = n·kt·(u − n·ke·ω_wheel)/R`, plus an optional disturbance torque.
//! The body obeys
//!
//! ```text
//! m·v̇ = (τ_R + τ_L)/r − f_v·v
//! I·ẇ = b·(τ_R − τ_L)/r − f_w·w
//! ```
//!
//! where the wheel-side inertia `J` of each drive (wheel plus reflected rotor)
//! adds to the effective mass and yaw inertia. Pose follows the unicycle model.

use crate::error::{Error, Result};
use crate::kinematics::{unicycle_derivative, Pose, VelocityPair};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorParams {
    /// N·m/A
    pub torque_constant: f64,
    /// V·s/rad
    pub back_emf_constant: f64,
    /// Ω
    pub resistance: f64,
    pub gear_ratio: f64,
    /// Wheel plus reflected rotor inertia, kg·m²
    pub inertia: f64,
}

impl Default for MotorParams {
    fn default() -> Self {
        MotorParams {
            torque_constant: 0.05,
            back_emf_constant: 0.05,
            resistance: 1.0,
            gear_ratio: 20.0,
            inertia: 0.002,
        }
    }
}

impl MotorParams {
    /// Wheel torque at wheel speed `omega` under armature voltage `u`.
    pub fn torque(&self, u: f64, omega: f64) -> f64 {
        let n = self.gear_ratio;
        n * self.torque_constant * (u - n * self.back_emf_constant * omega) / self.resistance
    }

    /// No-load wheel speed for voltage `u`.
    pub fn free_speed(&self, u: f64) -> f64 {
        u / (self.gear_ratio * self.back_emf_constant)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantParams {
    /// kg
    pub mass: f64,
    /// kg·m²
    pub inertia: f64,
    /// m
    pub wheel_radius: f64,
    /// m
    pub half_track: f64,
    pub right: MotorParams,
    pub left: MotorParams,
    /// N·s/m
    pub friction_linear: f64,
    /// N·m·s/rad
    pub friction_angular: f64,
    /// V
    pub command_limit: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        PlantParams {
            mass: 10.0,
            inertia: 0.5,
            wheel_radius: 0.05,
            half_track: 0.20,
            right: MotorParams::default(),
            left: MotorParams::default(),
            friction_linear: 2.0,
            friction_angular: 0.4,
            command_limit: 12.0,
        }
    }
}

impl PlantParams {
    fn fields(&self) -> [(&'static str, f64); 17] {
        [
            ("mass", self.mass),
            ("inertia", self.inertia),
            ("wheel_radius", self.wheel_radius),
            ("half_track", self.half_track),
            ("right.kt", self.right.torque_constant),
            ("right.ke", self.right.back_emf_constant),
            ("right.resistance", self.right.resistance),
            ("right.gear_ratio", self.right.gear_ratio),
            ("right.wheel_inertia", self.right.inertia),
            ("left.kt", self.left.torque_constant),
            ("left.ke", self.left.back_emf_constant),
            ("left.resistance", self.left.resistance),
            ("left.gear_ratio", self.left.gear_ratio),
            ("left.wheel_inertia", self.left.inertia),
            ("friction_linear", self.friction_linear),
            ("friction_angular", self.friction_angular),
            ("command_limit", self.command_limit),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in self.fields() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Domain(format!(
                    "plant parameter {name} must be > 0, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Body mass matrix including wheel-side inertias, rows `(v, w)`.
    fn mass_matrix(&self) -> [[f64; 2]; 2] {
        let r2 = self.wheel_radius * self.wheel_radius;
        let b = self.half_track;
        let (jr, jl) = (self.right.inertia, self.left.inertia);
        let off = b * (jr - jl) / r2;
        [
            [self.mass + (jr + jl) / r2, off],
            [off, self.inertia + b * b * (jr + jl) / r2],
        ]
    }
}

/// `(ω_R, ω_L)` → body velocities.
pub fn wheel_to_body(omega_right: f64, omega_left: f64, p: &PlantParams) -> VelocityPair {
    let r = p.wheel_radius;
    VelocityPair::new(
        r * (omega_right + omega_left) / 2.0,
        r * (omega_right - omega_left) / (2.0 * p.half_track),
    )
}

/// Body velocities → `(ω_R, ω_L)`.
pub fn body_to_wheel(eta: VelocityPair, p: &PlantParams) -> (f64, f64) {
    let r = p.wheel_radius;
    let b = p.half_track;
    ((eta.v + b * eta.w) / r, (eta.v - b * eta.w) / r)
}

/// Motor voltages `[U1, U2]` for the right and left drive.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CommandPair {
    pub right: f64,
    pub left: f64,
}

impl CommandPair {
    pub fn new(right: f64, left: f64) -> Self {
        CommandPair { right, left }
    }
}

/// Additive wheel torques, N·m.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WheelTorques {
    pub right: f64,
    pub left: f64,
}

/// Constant torque bias on each wheel, optionally restricted to `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Disturbance {
    pub right: f64,
    pub left: f64,
    pub window: Option<(f64, f64)>,
}

impl Disturbance {
    pub fn at(&self, t: f64) -> WheelTorques {
        let active = match self.window {
            Some((start, end)) => t >= start && t < end,
            None => true,
        };
        if active {
            WheelTorques {
                right: self.right,
                left: self.left,
            }
        } else {
            WheelTorques::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.right.is_finite()
            && self.left.is_finite()
            && self
                .window
                .is_none_or(|(a, b)| a.is_finite() && b.is_finite() && a <= b);
        if ok {
            Ok(())
        } else {
            Err(Error::Domain("disturbance must be finite with start <= end".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    pub pose: Pose,
    pub velocity: VelocityPair,
    /// rad/s, derived from `velocity`
    pub wheel_right: f64,
    /// rad/s, derived from `velocity`
    pub wheel_left: f64,
}

impl PlantState {
    pub fn at_rest(pose: Pose) -> Self {
        PlantState {
            pose,
            ..Default::default()
        }
    }

    pub fn new(pose: Pose, velocity: VelocityPair, p: &PlantParams) -> Self {
        let (wheel_right, wheel_left) = body_to_wheel(velocity, p);
        PlantState {
            pose,
            velocity,
            wheel_right,
            wheel_left,
        }
    }

    /// ½·m·v² + ½·I·w² with the body (not effective) mass and inertia.
    pub fn kinetic_energy(&self, p: &PlantParams) -> f64 {
        0.5 * p.mass * self.velocity.v.powi(2) + 0.5 * p.inertia * self.velocity.w.powi(2)
    }
}

/// Time derivative of `(x, y, θ, v, w)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantRate {
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
    pub dv: f64,
    pub dw: f64,
}

pub fn plant_derivative(s: &PlantState, u: CommandPair, d: WheelTorques, p: &PlantParams) -> PlantRate {
    let (omega_r, omega_l) = body_to_wheel(s.velocity, p);
    let tau_r = p.right.torque(u.right, omega_r) + d.right;
    let tau_l = p.left.torque(u.left, omega_l) + d.left;
    let r = p.wheel_radius;
    let force = (tau_r + tau_l) / r - p.friction_linear * s.velocity.v;
    let moment = p.half_track * (tau_r - tau_l) / r - p.friction_angular * s.velocity.w;

    let [[a, b], [c, dd]] = p.mass_matrix();
    let det = a * dd - b * c;
    let pose_rate = unicycle_derivative(&s.pose, s.velocity);
    PlantRate {
        dx: pose_rate.dx,
        dy: pose_rate.dy,
        dtheta: pose_rate.dtheta,
        dv: (dd * force - b * moment) / det,
        dw: (a * moment - c * force) / det,
    }
}

/// One RK4 step with the command and disturbance held over the step.
pub fn step_plant(s: &PlantState, u: CommandPair, d: WheelTorques, p: &PlantParams, dt: f64) -> PlantState {
    let shift = |k: &PlantRate, h: f64| PlantState {
        pose: Pose {
            x: s.pose.x + k.dx * h,
            y: s.pose.y + k.dy * h,
            theta: s.pose.theta + k.dtheta * h,
        },
        velocity: VelocityPair::new(s.velocity.v + k.dv * h, s.velocity.w + k.dw * h),
        ..*s
    };
    let k1 = plant_derivative(s, u, d, p);
    let k2 = plant_derivative(&shift(&k1, dt / 2.0), u, d, p);
    let k3 = plant_derivative(&shift(&k2, dt / 2.0), u, d, p);
    let k4 = plant_derivative(&shift(&k3, dt), u, d, p);
    let avg = |f: fn(&PlantRate) -> f64| (f(&k1) + 2.0 * f(&k2) + 2.0 * f(&k3) + f(&k4)) / 6.0;
    let pose = Pose::new(
        s.pose.x + avg(|k| k.dx) * dt,
        s.pose.y + avg(|k| k.dy) * dt,
        s.pose.theta + avg(|k| k.dtheta) * dt,
    );
    let velocity = VelocityPair::new(s.velocity.v + avg(|k| k.dv) * dt, s.velocity.w + avg(|k| k.dw) * dt);
    PlantState::new(pose, velocity, p)
}

/// Multiplicative factors applied by [`perturb_params`]. All default to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamFactors {
    pub mass: f64,
    pub inertia: f64,
    pub wheel_radius: f64,
    pub half_track: f64,
    pub torque_constant: f64,
    pub back_emf_constant: f64,
    pub resistance: f64,
    pub gear_ratio: f64,
    pub wheel_inertia: f64,
    pub friction_linear: f64,
    pub friction_angular: f64,
}

impl Default for ParamFactors {
    fn default() -> Self {
        ParamFactors {
            mass: 1.0,
            inertia: 1.0,
            wheel_radius: 1.0,
            half_track: 1.0,
            torque_constant: 1.0,
            back_emf_constant: 1.0,
            resistance: 1.0,
            gear_ratio: 1.0,
            wheel_inertia: 1.0,
            friction_linear: 1.0,
            friction_angular: 1.0,
        }
    }
}

/// Scaled copy of `p`. Motor factors apply to both drives.
pub fn perturb_params(p: &PlantParams, f: &ParamFactors) -> Result<PlantParams> {
    let motor = |m: &MotorParams| MotorParams {
        torque_constant: m.torque_constant * f.torque_constant,
        back_emf_constant: m.back_emf_constant * f.back_emf_constant,
        resistance: m.resistance * f.resistance,
        gear_ratio: m.gear_ratio * f.gear_ratio,
        inertia: m.inertia * f.wheel_inertia,
    };
    let out = PlantParams {
        mass: p.mass * f.mass,
        inertia: p.inertia * f.inertia,
        wheel_radius: p.wheel_radius * f.wheel_radius,
        half_track: p.half_track * f.half_track,
        right: motor(&p.right),
        left: motor(&p.left),
        friction_linear: p.friction_linear * f.friction_linear,
        friction_angular: p.friction_angular * f.friction_angular,
        command_limit: p.command_limit,
    };
    out.validate()?;
    Ok(out)
}
