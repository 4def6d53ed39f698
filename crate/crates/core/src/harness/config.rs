//! Scenario description and its flat `key = value` text format.
//!
//! One assignment per line, `#` starts a comment, keys are dotted. Angles
//! (`initial.theta`, `reference.theta`, `scan.etheta`) take radians, or
//! degrees with a `deg` suffix. Unknown keys are rejected. Every key and its
//! default:
//!
//! ```text
//! sim.mode = kinematic          # kinematic | dynamic
//! sim.dt = 0.001                # s
//! sim.duration = 30             # s
//! sim.seed = 0
//!
//! initial.x = 0                 # robot start pose
//! initial.y = 0
//! initial.theta = 0
//!
//! reference.x = 0               # reference start pose
//! reference.y = 0
//! reference.theta = 0
//! reference.v = 0.5             # default circle, lasts sim.duration
//! reference.w = 0.2
//! reference.segments =          # `duration:v:w, ...` replaces the circle
//! reference.repeat = 1          # segment list repetitions
//!
//! tracking.k1 = 2.3
//! tracking.k2 = 0.3
//! tracking.k3 = 3.8
//! tracking.variant = coupled    # coupled | kanayama
//!
//! pid.linear.kp = 20            # V per m/s
//! pid.linear.ki = 60
//! pid.linear.kd = 0
//! pid.angular.kp = 8            # V per rad/s
//! pid.angular.ki = 24
//! pid.angular.kd = 0
//! pid.windup = <command limit>  # bound on |ki * integral|, V
//!
//! nn.hidden = 12                # comma list of hidden widths
//! nn.init = 0.1                 # uniform weight init amplitude (0 = zero net)
//! nn.learning_rate = 0.001
//! nn.learning = true
//! nn.weights =                  # CSV snapshot to start from
//! nn.scale.v = 0.5              # feature normalization
//! nn.scale.w = 1.0
//! nn.scale.dv = 2.0
//! nn.scale.dw = 4.0
//!
//! plant.mass = 10               # kg
//! plant.inertia = 0.5           # kg m^2
//! plant.wheel_radius = 0.05     # m
//! plant.half_track = 0.2        # m
//! plant.friction_linear = 2     # N s/m
//! plant.friction_angular = 0.4  # N m s/rad
//! plant.command_limit = 12      # V
//! plant.motor.kt = 0.05         # both motors; plant.right.* / plant.left.* for one
//! plant.motor.ke = 0.05
//! plant.motor.resistance = 1
//! plant.motor.gear_ratio = 20
//! plant.motor.wheel_inertia = 0.002
//!
//! perturb.<field> = 1           # multiplicative factor; fields: mass inertia
//!                               # wheel_radius half_track kt ke resistance
//!                               # gear_ratio wheel_inertia friction_linear
//!                               # friction_angular, and `friction` for both
//!
//! disturbance.right = 0         # N m
//! disturbance.left = 0
//! disturbance.start =           # optional window [start, end)
//! disturbance.end =
//!
//! metrics.threshold = 0.001     # settling threshold on |e_p|
//! metrics.transient = 10        # s, start of the sup |e_c| window
//! metrics.window = 0.25         # trailing fraction for RMS velocity error
//! metrics.lyapunov_tolerance = 1e-8
//!
//! scan.ex = 0.2                 # half-widths of the sign-scan box
//! scan.ey = 0.2
//! scan.etheta = 0.2
//! scan.samples = 100000
//! scan.worst = 5
//! ```

use std::path::PathBuf;

use crate::error::ConfigError;
use crate::kinematics::{Pose, ReferenceProfile, Segment, VelocityPair};
use crate::plant::{Disturbance, MotorParams, ParamFactors, PlantParams};
use crate::tracking::{ControllerVariant, ErrorRegion, SignScan, TrackingGains};
use crate::velocity_loop::LoopConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoopMode {
    /// Velocities follow the outer-loop command exactly.
    #[default]
    KinematicIdeal,
    /// Commands go through the velocity loop and the simulated plant.
    FullDynamics,
}

impl LoopMode {
    pub fn name(&self) -> &'static str {
        match self {
            LoopMode::KinematicIdeal => "kinematic",
            LoopMode::FullDynamics => "dynamic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSpec {
    pub start: Pose,
    pub v: f64,
    pub w: f64,
    pub segments: Option<Vec<Segment>>,
    pub repeat: usize,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        ReferenceSpec {
            start: Pose::default(),
            v: 0.5,
            w: 0.2,
            segments: None,
            repeat: 1,
        }
    }
}

impl ReferenceSpec {
    /// The profile described here, for a run of `duration` seconds.
    pub fn build(&self, duration: f64) -> crate::Result<ReferenceProfile> {
        match &self.segments {
            None => ReferenceProfile::circle(self.start, self.v, self.w, duration),
            Some(segs) => {
                let all: Vec<Segment> = std::iter::repeat_n(segs.iter().copied(), self.repeat)
                    .flatten()
                    .collect();
                ReferenceProfile::new(self.start, all)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetSettings {
    pub hidden: Vec<usize>,
    pub init_amplitude: f64,
    pub weights: Option<PathBuf>,
}

impl Default for NetSettings {
    fn default() -> Self {
        NetSettings {
            hidden: vec![12],
            init_amplitude: 0.1,
            weights: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Settling threshold on `‖e_p‖` (and on `|e_x|`).
    pub settle: f64,
    /// Start time of the post-transient window, s.
    pub transient: f64,
    /// Trailing fraction of the run used for RMS velocity error.
    pub window: f64,
    pub lyapunov_tolerance: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            settle: 1e-3,
            transient: 10.0,
            window: 0.25,
            lyapunov_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSettings {
    pub ex: f64,
    pub ey: f64,
    pub etheta: f64,
    pub samples: usize,
    pub worst: usize,
}

impl Default for ScanSettings {
    fn default() -> Self {
        ScanSettings {
            ex: 0.2,
            ey: 0.2,
            etheta: 0.2,
            samples: 100_000,
            worst: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub mode: LoopMode,
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
    pub initial_pose: Pose,
    pub reference: ReferenceSpec,
    pub gains: TrackingGains,
    pub variant: ControllerVariant,
    pub velocity_loop: LoopConfig,
    /// `None` means "same as the plant command limit".
    pub windup_bound: Option<f64>,
    pub net: NetSettings,
    pub plant: PlantParams,
    pub perturbation: ParamFactors,
    pub disturbance: Disturbance,
    pub metrics: Thresholds,
    pub scan: ScanSettings,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            mode: LoopMode::default(),
            dt: 1e-3,
            duration: 30.0,
            seed: 0,
            initial_pose: Pose::default(),
            reference: ReferenceSpec::default(),
            gains: TrackingGains {
                k1: 2.3,
                k2: 0.3,
                k3: 3.8,
            },
            variant: ControllerVariant::default(),
            velocity_loop: LoopConfig::default(),
            windup_bound: None,
            net: NetSettings::default(),
            plant: PlantParams::default(),
            perturbation: ParamFactors::default(),
            disturbance: Disturbance::default(),
            metrics: Thresholds::default(),
            scan: ScanSettings::default(),
        }
    }
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invariant(key, format!("must be > 0, got {v}")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<(), ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invariant(key, format!("must be >= 0, got {v}")))
    }
}

impl ScenarioConfig {
    /// Number of integration steps; the log holds one more record.
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn reference_profile(&self) -> Result<ReferenceProfile, ConfigError> {
        self.reference
            .build(self.duration)
            .map_err(|e| ConfigError::invariant("reference", e.to_string()))
    }

    /// Plant parameters after applying the perturbation factors.
    pub fn effective_plant(&self) -> Result<PlantParams, ConfigError> {
        crate::plant::perturb_params(&self.plant, &self.perturbation)
            .map_err(|e| ConfigError::invariant("perturb", e.to_string()))
    }

    /// Inner-loop settings with the plant's command limit and windup bound filled in.
    pub fn effective_loop(&self) -> LoopConfig {
        LoopConfig {
            command_limit: self.plant.command_limit,
            windup_bound: self.windup_bound.unwrap_or(self.plant.command_limit),
            ..self.velocity_loop
        }
    }

    /// Sign scan of the configured controller around the circle `reference.v/w`.
    pub fn sign_scan(&self) -> SignScan {
        SignScan {
            variant: self.variant,
            eta_r: VelocityPair::new(self.reference.v, self.reference.w),
            gains: self.gains,
            region: ErrorRegion {
                ex: (-self.scan.ex, self.scan.ex),
                ey: (-self.scan.ey, self.scan.ey),
                etheta: (-self.scan.etheta, self.scan.etheta),
            },
            samples: self.scan.samples,
            seed: self.seed,
            worst_count: self.scan.worst,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("sim.dt", self.dt)?;
        positive("sim.duration", self.duration)?;
        if self.duration < self.dt {
            return Err(ConfigError::invariant("sim.duration", "must be >= sim.dt"));
        }
        if !self.initial_pose.is_finite() {
            return Err(ConfigError::invariant("initial", "pose must be finite"));
        }
        positive("tracking.k1", self.gains.k1)?;
        positive("tracking.k2", self.gains.k2)?;
        positive("tracking.k3", self.gains.k3)?;

        if self.reference.segments.is_none() {
            positive("reference.v", self.reference.v)?;
            if !self.reference.w.is_finite() {
                return Err(ConfigError::invariant("reference.w", "must be finite"));
            }
        }
        if self.reference.repeat == 0 {
            return Err(ConfigError::invariant("reference.repeat", "must be >= 1"));
        }
        let profile = self.reference_profile()?;
        let needed = self.steps() as f64 * self.dt;
        if profile.duration() + 1e-9 < needed {
            return Err(ConfigError::invariant(
                "reference.segments",
                format!("profile lasts {} s but the run needs {needed} s", profile.duration()),
            ));
        }

        for (key, g) in [
            ("pid.linear", self.velocity_loop.linear),
            ("pid.angular", self.velocity_loop.angular),
        ] {
            non_negative(&format!("{key}.kp"), g.kp)?;
            non_negative(&format!("{key}.ki"), g.ki)?;
            non_negative(&format!("{key}.kd"), g.kd)?;
        }
        if self.velocity_loop.linear.is_zero() && self.velocity_loop.angular.is_zero() {
            return Err(ConfigError::invariant("pid", "all PID gains are zero"));
        }
        if let Some(w) = self.windup_bound {
            positive("pid.windup", w)?;
        }
        non_negative("nn.learning_rate", self.velocity_loop.learning_rate)?;
        positive("nn.scale.v", self.velocity_loop.scales.v)?;
        positive("nn.scale.w", self.velocity_loop.scales.w)?;
        positive("nn.scale.dv", self.velocity_loop.scales.dv)?;
        positive("nn.scale.dw", self.velocity_loop.scales.dw)?;
        non_negative("nn.init", self.net.init_amplitude)?;
        if self.net.hidden.contains(&0) {
            return Err(ConfigError::invariant("nn.hidden", "layer widths must be >= 1"));
        }

        self.plant
            .validate()
            .map_err(|e| ConfigError::invariant("plant", e.to_string()))?;
        self.effective_plant()?;
        self.disturbance
            .validate()
            .map_err(|e| ConfigError::invariant("disturbance", e.to_string()))?;

        positive("metrics.threshold", self.metrics.settle)?;
        non_negative("metrics.transient", self.metrics.transient)?;
        if !(self.metrics.window > 0.0 && self.metrics.window <= 1.0) {
            return Err(ConfigError::invariant("metrics.window", "must be in (0, 1]"));
        }
        non_negative("metrics.lyapunov_tolerance", self.metrics.lyapunov_tolerance)?;

        non_negative("scan.ex", self.scan.ex)?;
        non_negative("scan.ey", self.scan.ey)?;
        non_negative("scan.etheta", self.scan.etheta)?;
        if self.scan.samples == 0 {
            return Err(ConfigError::invariant("scan.samples", "must be >= 1"));
        }
        Ok(())
    }
}

struct Entry<'a> {
    line: usize,
    key: &'a str,
    value: &'a str,
}

impl Entry<'_> {
    fn bad(&self, message: impl Into<String>) -> ConfigError {
        ConfigError::BadValue {
            line: self.line,
            key: self.key.to_owned(),
            message: message.into(),
        }
    }

    fn real(&self) -> Result<f64, ConfigError> {
        let v: f64 = self
            .value
            .parse()
            .map_err(|_| self.bad(format!("expected a number, got `{}`", self.value)))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.bad("must be finite"))
        }
    }

    fn angle(&self) -> Result<f64, ConfigError> {
        match self.value.strip_suffix("deg") {
            Some(deg) => {
                let d: f64 = deg
                    .trim()
                    .parse()
                    .map_err(|_| self.bad(format!("expected degrees, got `{}`", self.value)))?;
                Ok(d.to_radians())
            }
            None => self.real(),
        }
    }

    fn integer(&self) -> Result<u64, ConfigError> {
        self.value
            .parse()
            .map_err(|_| self.bad(format!("expected a non-negative integer, got `{}`", self.value)))
    }

    fn boolean(&self) -> Result<bool, ConfigError> {
        match self.value {
            "true" | "yes" | "on" | "1" => Ok(true),
            "false" | "no" | "off" | "0" => Ok(false),
            other => Err(self.bad(format!("expected true or false, got `{other}`"))),
        }
    }

    fn optional_real(&self) -> Result<Option<f64>, ConfigError> {
        if self.value.is_empty() {
            Ok(None)
        } else {
            self.real().map(Some)
        }
    }

    fn segments(&self) -> Result<Vec<Segment>, ConfigError> {
        self.value
            .split(',')
            .map(|item| {
                let parts: Vec<&str> = item.trim().split(':').map(str::trim).collect();
                let nums: Vec<f64> = parts
                    .iter()
                    .map(|p| p.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| self.bad(format!("segment `{}` is not duration:v:w", item.trim())))?;
                match nums[..] {
                    [d, v, w] => Ok(Segment::new(d, v, w)),
                    _ => Err(self.bad(format!("segment `{}` is not duration:v:w", item.trim()))),
                }
            })
            .collect()
    }

    fn widths(&self) -> Result<Vec<usize>, ConfigError> {
        if self.value.is_empty() {
            return Ok(Vec::new());
        }
        self.value
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| self.bad("expected a comma list of layer widths"))
    }
}

fn motor_field(m: &mut MotorParams, field: &str, e: &Entry) -> Result<bool, ConfigError> {
    let slot = match field {
        "kt" => &mut m.torque_constant,
        "ke" => &mut m.back_emf_constant,
        "resistance" => &mut m.resistance,
        "gear_ratio" => &mut m.gear_ratio,
        "wheel_inertia" => &mut m.inertia,
        _ => return Ok(false),
    };
    *slot = e.real()?;
    Ok(true)
}

fn apply(cfg: &mut ScenarioConfig, e: &Entry) -> Result<(), ConfigError> {
    let lp = &mut cfg.velocity_loop;
    match e.key {
        "sim.mode" => {
            cfg.mode = match e.value {
                "kinematic" | "kinematic-ideal" => LoopMode::KinematicIdeal,
                "dynamic" | "full-dynamics" => LoopMode::FullDynamics,
                other => return Err(e.bad(format!("unknown mode `{other}`"))),
            }
        }
        "sim.dt" => cfg.dt = e.real()?,
        "sim.duration" => cfg.duration = e.real()?,
        "sim.seed" => cfg.seed = e.integer()?,

        "initial.x" => cfg.initial_pose.x = e.real()?,
        "initial.y" => cfg.initial_pose.y = e.real()?,
        "initial.theta" => cfg.initial_pose = Pose::new(cfg.initial_pose.x, cfg.initial_pose.y, e.angle()?),

        "reference.x" => cfg.reference.start.x = e.real()?,
        "reference.y" => cfg.reference.start.y = e.real()?,
        "reference.theta" => {
            let s = cfg.reference.start;
            cfg.reference.start = Pose::new(s.x, s.y, e.angle()?);
        }
        "reference.v" => cfg.reference.v = e.real()?,
        "reference.w" => cfg.reference.w = e.real()?,
        "reference.segments" => cfg.reference.segments = Some(e.segments()?),
        "reference.repeat" => cfg.reference.repeat = e.integer()? as usize,

        "tracking.k1" => cfg.gains.k1 = e.real()?,
        "tracking.k2" => cfg.gains.k2 = e.real()?,
        "tracking.k3" => cfg.gains.k3 = e.real()?,
        "tracking.variant" => {
            cfg.variant = match e.value {
                "coupled" => ControllerVariant::Coupled,
                "kanayama" => ControllerVariant::Kanayama,
                other => return Err(e.bad(format!("unknown variant `{other}`"))),
            }
        }

        "pid.linear.kp" => lp.linear.kp = e.real()?,
        "pid.linear.ki" => lp.linear.ki = e.real()?,
        "pid.linear.kd" => lp.linear.kd = e.real()?,
        "pid.angular.kp" => lp.angular.kp = e.real()?,
        "pid.angular.ki" => lp.angular.ki = e.real()?,
        "pid.angular.kd" => lp.angular.kd = e.real()?,
        "pid.windup" => cfg.windup_bound = Some(e.real()?),

        "nn.hidden" => cfg.net.hidden = e.widths()?,
        "nn.init" => cfg.net.init_amplitude = e.real()?,
        "nn.learning_rate" => lp.learning_rate = e.real()?,
        "nn.learning" => lp.learning = e.boolean()?,
        "nn.weights" => {
            cfg.net.weights = (!e.value.is_empty()).then(|| PathBuf::from(e.value));
        }
        "nn.scale.v" => lp.scales.v = e.real()?,
        "nn.scale.w" => lp.scales.w = e.real()?,
        "nn.scale.dv" => lp.scales.dv = e.real()?,
        "nn.scale.dw" => lp.scales.dw = e.real()?,

        "plant.mass" => cfg.plant.mass = e.real()?,
        "plant.inertia" => cfg.plant.inertia = e.real()?,
        "plant.wheel_radius" => cfg.plant.wheel_radius = e.real()?,
        "plant.half_track" => cfg.plant.half_track = e.real()?,
        "plant.friction_linear" => cfg.plant.friction_linear = e.real()?,
        "plant.friction_angular" => cfg.plant.friction_angular = e.real()?,
        "plant.command_limit" => cfg.plant.command_limit = e.real()?,

        "disturbance.right" => cfg.disturbance.right = e.real()?,
        "disturbance.left" => cfg.disturbance.left = e.real()?,
        "disturbance.start" | "disturbance.end" => {
            let (mut start, mut end) = cfg.disturbance.window.unwrap_or((0.0, f64::MAX));
            let v = e.optional_real()?;
            if e.key == "disturbance.start" {
                start = v.unwrap_or(0.0);
            } else {
                end = v.unwrap_or(f64::MAX);
            }
            cfg.disturbance.window = Some((start, end));
        }

        "metrics.threshold" => cfg.metrics.settle = e.real()?,
        "metrics.transient" => cfg.metrics.transient = e.real()?,
        "metrics.window" => cfg.metrics.window = e.real()?,
        "metrics.lyapunov_tolerance" => cfg.metrics.lyapunov_tolerance = e.real()?,

        "scan.ex" => cfg.scan.ex = e.real()?,
        "scan.ey" => cfg.scan.ey = e.real()?,
        "scan.etheta" => cfg.scan.etheta = e.angle()?,
        "scan.samples" => cfg.scan.samples = e.integer()? as usize,
        "scan.worst" => cfg.scan.worst = e.integer()? as usize,

        key => {
            let unknown = || ConfigError::UnknownKey {
                line: e.line,
                key: key.to_owned(),
            };
            if let Some(rest) = key.strip_prefix("plant.") {
                let (side, field) = rest.split_once('.').ok_or_else(unknown)?;
                let hit = match side {
                    "motor" => {
                        let mut probe = cfg.plant.right;
                        let hit = motor_field(&mut probe, field, e)?;
                        if hit {
                            motor_field(&mut cfg.plant.right, field, e)?;
                            motor_field(&mut cfg.plant.left, field, e)?;
                        }
                        hit
                    }
                    "right" => motor_field(&mut cfg.plant.right, field, e)?,
                    "left" => motor_field(&mut cfg.plant.left, field, e)?,
                    _ => false,
                };
                return if hit { Ok(()) } else { Err(unknown()) };
            }
            if let Some(field) = key.strip_prefix("perturb.") {
                let f = &mut cfg.perturbation;
                let v = e.real()?;
                match field {
                    "mass" => f.mass = v,
                    "inertia" => f.inertia = v,
                    "wheel_radius" => f.wheel_radius = v,
                    "half_track" => f.half_track = v,
                    "kt" => f.torque_constant = v,
                    "ke" => f.back_emf_constant = v,
                    "resistance" => f.resistance = v,
                    "gear_ratio" => f.gear_ratio = v,
                    "wheel_inertia" => f.wheel_inertia = v,
                    "friction_linear" => f.friction_linear = v,
                    "friction_angular" => f.friction_angular = v,
                    "friction" => {
                        f.friction_linear = v;
                        f.friction_angular = v;
                    }
                    _ => return Err(unknown()),
                }
                return Ok(());
            }
            return Err(unknown());
        }
    }
    Ok(())
}

/// Parse and validate a scenario. Empty text yields the defaults.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let key = key.trim();
        let valid_key = !key.is_empty()
            && key
                .split('.')
                .all(|part| !part.is_empty() && part.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'));
        if !valid_key {
            return Err(ConfigError::Syntax {
                line,
                message: format!("malformed key `{key}`"),
            });
        }
        apply(
            &mut cfg,
            &Entry {
                line,
                key,
                value: value.trim(),
            },
        )?;
    }
    cfg.validate()?;
    Ok(cfg)
}
