//! Inner velocity loop: PID feedback on the linear and angular channels plus
//! a neural feedforward term, trained online by feedback-error learning.
//!
//! Per step the loop computes `U_fb` from the velocity errors, evaluates the
//! network on normalized features to get `U_ff`, and sends
//! `clamp(mix(U_fb + U_ff))` to the motors, where `mix(u_v, u_w) =
//! (u_v + u_w, u_v − u_w)`. The network is then nudged along the gradient of
//! `⟨U_ff, U_fb⟩`, so it absorbs whatever correction the PID still has to make.

use crate::error::{Error, Result};
use crate::kinematics::VelocityPair;
use crate::nn::MlpNet;
use crate::plant::CommandPair;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    pub fn new(kp: f64, ki: f64, kd: f64) -> Self {
        PidGains { kp, ki, kd }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.kp, self.ki, self.kd].iter().all(|g| *g >= 0.0 && g.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("PID gains must be finite and >= 0: {self:?}")))
        }
    }

    pub fn is_zero(&self) -> bool {
        self.kp == 0.0 && self.ki == 0.0 && self.kd == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    /// Trapezoidal integral of the error.
    pub integral: f64,
    pub prev_error: f64,
}

/// One PID update. The integral is clamped so that `|ki·∫e| ≤ windup_bound`.
pub fn pid_step(state: &PidState, g: &PidGains, error: f64, dt: f64, windup_bound: f64) -> (f64, PidState) {
    let mut integral = state.integral + 0.5 * (error + state.prev_error) * dt;
    if g.ki > 0.0 {
        let cap = windup_bound / g.ki;
        integral = integral.clamp(-cap, cap);
    }
    let derivative = (error - state.prev_error) / dt;
    let u = g.kp * error + g.ki * integral + g.kd * derivative;
    (
        u,
        PidState {
            integral,
            prev_error: error,
        },
    )
}

/// Normalization constants for the network inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureScales {
    /// m/s, used for commanded and measured linear velocity
    pub v: f64,
    /// rad/s, used for commanded and measured angular velocity
    pub w: f64,
    /// m/s²
    pub dv: f64,
    /// rad/s²
    pub dw: f64,
}

impl Default for FeatureScales {
    fn default() -> Self {
        FeatureScales {
            v: 0.5,
            w: 1.0,
            dv: 2.0,
            dw: 4.0,
        }
    }
}

impl FeatureScales {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.v, self.w, self.dv, self.dw]
            .iter()
            .all(|s| *s > 0.0 && s.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("feature scales must be > 0: {self:?}")))
        }
    }
}

pub const FEATURE_COUNT: usize = 6;

/// `(v_c, w_c, v̇_c, ẇ_c, v, w)`, each divided by its scale.
pub fn build_features(
    eta_c: VelocityPair,
    eta_c_rate: VelocityPair,
    eta_meas: VelocityPair,
    scales: &FeatureScales,
) -> [f64; FEATURE_COUNT] {
    [
        eta_c.v / scales.v,
        eta_c.w / scales.w,
        eta_c_rate.v / scales.dv,
        eta_c_rate.w / scales.dw,
        eta_meas.v / scales.v,
        eta_meas.w / scales.w,
    ]
}

/// Sum feedback and feedforward per channel, mix to motors and saturate.
/// The flag is true when either motor command was clipped.
pub fn compose_command(u_fb: [f64; 2], u_ff: [f64; 2], limit: f64) -> (CommandPair, bool) {
    let uv = u_fb[0] + u_ff[0];
    let uw = u_fb[1] + u_ff[1];
    let (right, left) = (uv + uw, uv - uw);
    let saturated = right.abs() > limit || left.abs() > limit;
    (
        CommandPair::new(right.clamp(-limit, limit), left.clamp(-limit, limit)),
        saturated,
    )
}

/// One feedback-error learning update: ascend `⟨net(features), u_fb⟩`.
///
/// Returns whether an update was applied; nothing changes while the command
/// is saturated or when the step would be a no-op.
pub fn feedback_error_learning_step(
    net: &mut MlpNet,
    features: &[f64],
    u_fb: [f64; 2],
    lr: f64,
    saturated: bool,
) -> Result<bool> {
    if net.output_size() != 2 {
        return Err(Error::Shape(format!(
            "feedforward network must have 2 outputs, has {}",
            net.output_size()
        )));
    }
    if saturated || lr == 0.0 || u_fb == [0.0, 0.0] {
        return Ok(false);
    }
    let grads = net.gradient(features, &u_fb)?;
    net.apply_update(&grads, lr)?;
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopConfig {
    pub linear: PidGains,
    pub angular: PidGains,
    /// Bound on `|ki·∫e|`, V.
    pub windup_bound: f64,
    pub scales: FeatureScales,
    pub learning_rate: f64,
    pub learning: bool,
    pub command_limit: f64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            linear: PidGains::new(20.0, 60.0, 0.0),
            angular: PidGains::new(8.0, 24.0, 0.0),
            windup_bound: 12.0,
            scales: FeatureScales::default(),
            learning_rate: 1e-3,
            learning: true,
            command_limit: 12.0,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        self.linear.validate()?;
        self.angular.validate()?;
        if self.linear.is_zero() && self.angular.is_zero() {
            return Err(Error::Domain("at least one PID gain must be non-zero".into()));
        }
        self.scales.validate()?;
        if !(self.command_limit > 0.0 && self.command_limit.is_finite()) {
            return Err(Error::Domain("command limit must be > 0".into()));
        }
        if !(self.windup_bound > 0.0) {
            return Err(Error::Domain("anti-windup bound must be > 0".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Domain("learning rate must be >= 0".into()));
        }
        Ok(())
    }
}

/// Everything one loop step produced.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LoopOutput {
    pub command: CommandPair,
    pub u_fb: [f64; 2],
    pub u_ff: [f64; 2],
    pub saturated: bool,
    pub learned: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LearningStats {
    pub updates: u64,
    pub skipped_saturated: u64,
    /// Updates applied on a saturated step. Stays zero.
    pub updates_while_saturated: u64,
}

/// Owned state of one inner loop.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityLoop {
    config: LoopConfig,
    net: MlpNet,
    linear: PidState,
    angular: PidState,
    prev_command: Option<VelocityPair>,
    stats: LearningStats,
}

impl VelocityLoop {
    pub fn new(config: LoopConfig, net: MlpNet) -> Result<Self> {
        config.validate()?;
        if net.input_size() != FEATURE_COUNT || net.output_size() != 2 {
            return Err(Error::Shape(format!(
                "feedforward network must map {FEATURE_COUNT} features to 2 outputs, got {:?}",
                net.layer_sizes()
            )));
        }
        Ok(VelocityLoop {
            config,
            net,
            linear: PidState::default(),
            angular: PidState::default(),
            prev_command: None,
            stats: LearningStats::default(),
        })
    }

    pub fn config(&self) -> &LoopConfig {
        &self.config
    }

    pub fn net(&self) -> &MlpNet {
        &self.net
    }

    pub fn stats(&self) -> LearningStats {
        self.stats
    }

    pub fn step(&mut self, eta_c: VelocityPair, eta_meas: VelocityPair, dt: f64) -> Result<LoopOutput> {
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("time step must be > 0, got {dt}")));
        }
        let cfg = &self.config;
        let (fb_v, linear) = pid_step(&self.linear, &cfg.linear, eta_c.v - eta_meas.v, dt, cfg.windup_bound);
        let (fb_w, angular) = pid_step(&self.angular, &cfg.angular, eta_c.w - eta_meas.w, dt, cfg.windup_bound);
        let rate = match self.prev_command {
            Some(prev) => VelocityPair::new((eta_c.v - prev.v) / dt, (eta_c.w - prev.w) / dt),
            None => VelocityPair::ZERO,
        };
        let features = build_features(eta_c, rate, eta_meas, &cfg.scales);
        let ff = self.net.forward(&features)?;
        let u_fb = [fb_v, fb_w];
        let u_ff = [ff[0], ff[1]];
        let (command, saturated) = compose_command(u_fb, u_ff, cfg.command_limit);

        let learned =
            cfg.learning && feedback_error_learning_step(&mut self.net, &features, u_fb, cfg.learning_rate, saturated)?;
        if learned {
            self.stats.updates += 1;
            if saturated {
                self.stats.updates_while_saturated += 1;
            }
        } else if cfg.learning && saturated {
            self.stats.skipped_saturated += 1;
        }

        self.linear = linear;
        self.angular = angular;
        self.prev_command = Some(eta_c);
        Ok(LoopOutput {
            command,
            u_fb,
            u_ff,
            saturated,
            learned,
        })
    }
}

/// Free-function form of [`VelocityLoop::step`].
pub fn velocity_loop_step(
    state: &mut VelocityLoop,
    eta_c: VelocityPair,
    eta_meas: VelocityPair,
    dt: f64,
) -> Result<LoopOutput> {
    state.step(eta_c, eta_meas, dt)
}
