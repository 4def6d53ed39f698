//! End-to-end closed-loop runs: reference → tracking law → (velocity loop →
//! plant) → pose, with every signal recorded per step.

use crate::error::{Error, Result};
use crate::harness::config::{LoopMode, ScenarioConfig};
use crate::kinematics::{pose_error, pose_increment, Pose, PostureError, VelocityPair};
use crate::nn::MlpNet;
use crate::plant::{step_plant, CommandPair, PlantState};
use crate::velocity_loop::{LearningStats, VelocityLoop, FEATURE_COUNT};

/// Signals recorded at one sample instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepRecord {
    pub t: f64,
    pub pose: Pose,
    pub reference: Pose,
    pub error: PostureError,
    pub eta_r: VelocityPair,
    pub eta_c: VelocityPair,
    /// Measured body velocity.
    pub eta: VelocityPair,
    pub u_fb: [f64; 2],
    pub u_ff: [f64; 2],
    pub command: CommandPair,
    pub lyapunov: f64,
    pub lyapunov_rate: f64,
}

impl StepRecord {
    /// `‖η_c − η‖`.
    pub fn velocity_error_norm(&self) -> f64 {
        (self.eta_c.v - self.eta.v).hypot(self.eta_c.w - self.eta.w)
    }
}

/// Uniformly sampled run record; `records[k].t == k·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    pub dt: f64,
    pub records: Vec<StepRecord>,
}

impl SimLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&StepRecord> {
        self.records.last()
    }
}

/// Pose accumulated with Neumaier compensation, so that thousands of tiny
/// steps do not build up rounding bias.
#[derive(Debug, Clone, Copy)]
struct CompensatedPose {
    sum: [f64; 3],
    carry: [f64; 3],
}

impl CompensatedPose {
    fn new(q: Pose) -> Self {
        CompensatedPose {
            sum: [q.x, q.y, q.theta],
            carry: [0.0; 3],
        }
    }

    fn pose(&self) -> Pose {
        Pose::new(
            self.sum[0] + self.carry[0],
            self.sum[1] + self.carry[1],
            self.sum[2] + self.carry[2],
        )
    }

    fn add(&mut self, d: [f64; 3]) {
        for ((sum, carry), d) in self.sum.iter_mut().zip(&mut self.carry).zip(d) {
            let t = *sum + d;
            *carry += if sum.abs() >= d.abs() {
                (*sum - t) + d
            } else {
                (d - t) + *sum
            };
            *sum = t;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub log: SimLog,
    /// Feedforward network at the end of a full-dynamics run.
    pub net: Option<MlpNet>,
    pub learning: LearningStats,
}

/// The initial feedforward network a scenario starts from.
pub fn initial_net(cfg: &ScenarioConfig) -> Result<MlpNet> {
    if let Some(path) = &cfg.net.weights {
        return MlpNet::load(path);
    }
    let mut sizes = vec![FEATURE_COUNT];
    sizes.extend(&cfg.net.hidden);
    sizes.push(2);
    MlpNet::random(&sizes, cfg.net.init_amplitude, cfg.seed)
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimLog> {
    Ok(run_scenario_full(cfg)?.log)
}

pub fn run_scenario_full(cfg: &ScenarioConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let profile = cfg.reference_profile()?;
    let plant = cfg.effective_plant()?;
    let steps = cfg.steps();
    let dt = cfg.dt;
    let gains = cfg.gains;
    let variant = cfg.variant;

    let mut inner = match cfg.mode {
        LoopMode::KinematicIdeal => None,
        LoopMode::FullDynamics => Some(VelocityLoop::new(cfg.effective_loop(), initial_net(cfg)?)?),
    };
    let mut state = PlantState::at_rest(cfg.initial_pose);
    let mut kinematic_pose = CompensatedPose::new(cfg.initial_pose);
    let mut records = Vec::with_capacity(steps + 1);

    for k in 0..=steps {
        let t = (k as f64 * dt).min(profile.duration());
        let (reference, eta_r) = profile.state_at(t)?;
        let error = pose_error(&reference, &state.pose);
        let eta_c = variant.control(&error, eta_r, &gains)?;

        let mut rec = StepRecord {
            t: k as f64 * dt,
            pose: state.pose,
            reference,
            error,
            eta_r,
            eta_c,
            lyapunov: variant.lyapunov_value(&error, &gains),
            lyapunov_rate: variant.lyapunov_rate(&error, eta_r, &gains)?,
            ..Default::default()
        };

        match inner.as_mut() {
            None => {
                rec.eta = eta_c;
                if k < steps {
                    let d = pose_increment(&state.pose, eta_c, dt);
                    kinematic_pose.add([d.dx, d.dy, d.dtheta]);
                    state.pose = kinematic_pose.pose();
                }
            }
            Some(lp) => {
                rec.eta = state.velocity;
                let out = lp.step(eta_c, state.velocity, dt)?;
                rec.u_fb = out.u_fb;
                rec.u_ff = out.u_ff;
                rec.command = out.command;
                if k < steps {
                    state = step_plant(&state, out.command, cfg.disturbance.at(rec.t), &plant, dt);
                }
            }
        }
        if !(rec.pose.is_finite() && rec.eta.is_finite() && rec.eta_c.is_finite()) {
            return Err(Error::Domain(format!("simulation diverged at t = {}", rec.t)));
        }
        records.push(rec);
    }

    let (net, learning) = match inner {
        Some(lp) => (Some(lp.net().clone()), lp.stats()),
        None => (None, LearningStats::default()),
    };
    Ok(RunOutput {
        log: SimLog { dt, records },
        net,
        learning,
    })
}
