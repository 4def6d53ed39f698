//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use neurotrack::harness::{
    compare_controllers, compute_metrics, gain_sweep, parse_config, run_scenario, GainGrid, LoopMode, ScenarioConfig,
};
use neurotrack::kinematics::{integrate_pose, pose_error, Pose, PostureError, ReferenceProfile, Segment, VelocityPair};
use neurotrack::nn::{grad_check_suite, MlpNet};
use neurotrack::plant::{step_plant, CommandPair, PlantParams, PlantState, WheelTorques};
use neurotrack::tracking::{error_dynamics, lyapunov_rate, lyapunov_value, tracking_control, TrackingGains};
use neurotrack::velocity_loop::{compose_command, pid_step, PidState, FEATURE_COUNT};
use neurotrack::Execution;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn scenario_a() -> ScenarioConfig {
    parse_config("initial.x = 0.3\ninitial.theta = -5deg\ntracking.k1 = 2.3\ntracking.k2 = 0.3\ntracking.k3 = 3.8\n")
        .unwrap()
}

fn scenario_b() -> ScenarioConfig {
    parse_config("initial.y = 0.1\ninitial.theta = -10deg\ntracking.k1 = 5\ntracking.k2 = 5\ntracking.k3 = 0.1\n")
        .unwrap()
}

fn c1_convergence() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for (name, cfg) in [("a", scenario_a()), ("b", scenario_b())] {
        let start = Instant::now();
        let log = run_scenario(&cfg).map_err(|e| e.to_string())?;
        let elapsed = start.elapsed().as_secs_f64();
        let m = compute_metrics(&log, &cfg.metrics).map_err(|e| e.to_string())?;
        let settled = matches!(m.settling_time, Some(t) if t <= 30.0);
        ok &= settled && elapsed < 1.0 && cfg.dt == 1e-3;
        details.push(format!(
            "{name}: settle {:?} s, runtime {elapsed:.3} s",
            m.settling_time
        ));
    }
    check(ok, details.join("; "))
}

fn c2_lyapunov_decrease() -> Outcome {
    let mut counts = Vec::new();
    for cfg in [scenario_a(), scenario_b()] {
        let log = run_scenario(&cfg).map_err(|e| e.to_string())?;
        counts.push(
            compute_metrics(&log, &cfg.metrics)
                .map_err(|e| e.to_string())?
                .lyapunov_increases,
        );
    }
    check(
        counts.iter().all(|&c| c == 0),
        format!("increases a={} b={}", counts[0], counts[1]),
    )
}

fn c3_chain_rule() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let e = PostureError::new(
            rng.gen_range(-0.5..=0.5),
            rng.gen_range(-0.5..=0.5),
            rng.gen_range(-0.5..=0.5),
        );
        let eta_r = VelocityPair::new(1.0 - rng.gen::<f64>(), rng.gen_range(-1.0..=1.0));
        let k = TrackingGains {
            k1: 5.0 - 5.0 * rng.gen::<f64>(),
            k2: 5.0 - 5.0 * rng.gen::<f64>(),
            k3: 5.0 - 5.0 * rng.gen::<f64>(),
        };
        let analytic = lyapunov_rate(&e, eta_r, &k).map_err(|e| e.to_string())?;
        let eta_c = tracking_control(&e, eta_r, &k).map_err(|e| e.to_string())?;
        let d = error_dynamics(&e, eta_r, eta_c);
        let shifted = |s: f64| PostureError {
            ex: e.ex + s * d[0],
            ey: e.ey + s * d[1],
            etheta: e.etheta + s * d[2],
        };
        // fourth-order central stencil, step scaled to the flow speed
        let h = 1e-3 / (d[0].hypot(d[1]).hypot(d[2])).max(1.0);
        let v = |s: f64| lyapunov_value(&shifted(s), &k);
        let fd = (8.0 * (v(h) - v(-h)) - (v(2.0 * h) - v(-2.0 * h))) / (12.0 * h);
        let diff = (analytic - fd).abs();
        if diff > 0.0 {
            worst = worst.max(diff / analytic.abs().max(fd.abs()));
        }
    }
    check(worst < 1e-6, format!("max relative error {worst:.3e} over 1e4 states"))
}

fn c4_equilibrium() -> Outcome {
    let k = TrackingGains {
        k1: 2.3,
        k2: 0.3,
        k3: 3.8,
    };
    let eta_r = VelocityPair::new(0.5, 0.2);
    let eta = tracking_control(&PostureError::ZERO, eta_r, &k).map_err(|e| e.to_string())?;
    let d = error_dynamics(&PostureError::ZERO, eta_r, eta);
    let log = run_scenario(&ScenarioConfig::default()).map_err(|e| e.to_string())?;
    let sup = log.records.iter().map(|r| r.error.norm()).fold(0.0, f64::max);
    check(
        eta == eta_r && d == [0.0; 3] && sup < 1e-12,
        format!(
            "control exact: {}, dynamics zero: {}, sup |e_p| = {sup:.2e}",
            eta == eta_r,
            d == [0.0; 3]
        ),
    )
}

fn c5_k1_monotone() -> Outcome {
    let grid = GainGrid {
        k1: vec![1.0, 3.0],
        k2: vec![0.3],
        k3: vec![3.8],
    };
    let rows = gain_sweep(&scenario_a(), &grid, Execution::default()).map_err(|e| e.to_string())?;
    let ts = |k1: f64| {
        rows.iter()
            .find(|r| r.gains.k1 == k1)
            .and_then(|r| r.metrics.settling_time_ex)
    };
    let (slow, fast) = (ts(1.0), ts(3.0));
    let ok = matches!((slow, fast), (Some(a), Some(b)) if b < a);
    check(ok, format!("e_x settling k1=1: {slow:?} s, k1=3: {fast:?} s"))
}

fn c6_velocity_error() -> Outcome {
    let cfg = ScenarioConfig {
        mode: LoopMode::FullDynamics,
        ..scenario_a()
    };
    let log = run_scenario(&cfg).map_err(|e| e.to_string())?;
    let m = compute_metrics(&log, &cfg.metrics).map_err(|e| e.to_string())?;
    check(
        m.sup_velocity_error.is_finite() && m.sup_velocity_error_after_transient < 0.05,
        format!(
            "sup |e_c| = {:.4}, after 10 s = {:.3e}",
            m.sup_velocity_error, m.sup_velocity_error_after_transient
        ),
    )
}

fn perturbed_cycle(learning: bool) -> ScenarioConfig {
    let mut text = String::from(
        "sim.mode = dynamic\nsim.duration = 60\n\
         reference.segments = 5:0.3:0, 5:0.3:0.3, 5:0.15:-0.2, 5:0.4:0.1\nreference.repeat = 3\n\
         perturb.mass = 1.2\nperturb.friction = 1.3\n",
    );
    if !learning {
        text.push_str("nn.learning = false\nnn.init = 0\n");
    }
    parse_config(&text).unwrap()
}

fn c7_feedforward_benefit() -> Outcome {
    let pid = perturbed_cycle(false);
    let nn = perturbed_cycle(true);
    let c = compare_controllers(&pid, &nn, Execution::default()).map_err(|e| e.to_string())?;
    let r = c.ratios.rms_velocity_error_norm;
    check(
        r <= 0.7,
        format!(
            "RMS |e_c| PID {:.4e}, PID+NN {:.4e}, ratio {r:.4} (v {:.4}, w {:.4})",
            c.a.rms_velocity_error_norm,
            c.b.rms_velocity_error_norm,
            c.ratios.rms_velocity_error[0],
            c.ratios.rms_velocity_error[1]
        ),
    )
}

fn c8_pid_equivalence() -> Outcome {
    let mut cfg = perturbed_cycle(false);
    cfg.duration = 20.0;
    let log = run_scenario(&cfg).map_err(|e| e.to_string())?;

    // hand-rolled PID-only loop on the same plant
    let profile = cfg.reference_profile().map_err(|e| e.to_string())?;
    let plant = cfg.effective_plant().map_err(|e| e.to_string())?;
    let lc = cfg.effective_loop();
    let mut state = PlantState::at_rest(cfg.initial_pose);
    let (mut sv, mut sw) = (PidState::default(), PidState::default());
    let mut mismatches = 0usize;
    for (k, rec) in log.records.iter().enumerate() {
        let t = (k as f64 * cfg.dt).min(profile.duration());
        let (reference, eta_r) = profile.state_at(t).map_err(|e| e.to_string())?;
        let e = pose_error(&reference, &state.pose);
        let eta_c = tracking_control(&e, eta_r, &cfg.gains).map_err(|e| e.to_string())?;
        let (uv, nv) = pid_step(&sv, &lc.linear, eta_c.v - state.velocity.v, cfg.dt, lc.windup_bound);
        let (uw, nw) = pid_step(&sw, &lc.angular, eta_c.w - state.velocity.w, cfg.dt, lc.windup_bound);
        let (u, _) = compose_command([uv, uw], [0.0, 0.0], lc.command_limit);
        if u.right.to_bits() != rec.command.right.to_bits() || u.left.to_bits() != rec.command.left.to_bits() {
            mismatches += 1;
        }
        sv = nv;
        sw = nw;
        state = step_plant(&state, u, WheelTorques::default(), &plant, cfg.dt);
    }
    check(
        mismatches == 0,
        format!("{mismatches} of {} commands differ", log.len()),
    )
}

fn c9_gradients() -> Outcome {
    let s = grad_check_suite(9, 100, 1e-6).map_err(|e| e.to_string())?;
    // the network used by the loop as well
    let net = MlpNet::random(&[FEATURE_COUNT, 12, 2], 0.1, 0).map_err(|e| e.to_string())?;
    let own = neurotrack::nn::grad_check(&net, &[0.4, -0.2, 0.1, 0.0, 0.5, -0.3], &[1.0, -0.5], 1e-6)
        .map_err(|e| e.to_string())?;
    let worst = s.max_deviation.max(own);
    check(
        worst < 1e-6,
        format!("max relative deviation {worst:.3e} over {} nets", s.trials + 1),
    )
}

fn kinematic_error(dt: f64) -> f64 {
    let eta = VelocityPair::new(0.8, 1.3);
    let start = Pose::new(0.2, -0.1, 0.4);
    let t_end = 4.0;
    let exact = ReferenceProfile::new(start, vec![Segment::new(t_end, eta.v, eta.w)])
        .unwrap()
        .state_at(t_end)
        .unwrap()
        .0;
    let mut q = start;
    for _ in 0..(t_end / dt).round() as usize {
        q = integrate_pose(&q, eta, dt);
    }
    (q.x - exact.x).hypot(q.y - exact.y)
}

fn plant_error(dt: f64) -> f64 {
    let p = PlantParams::default();
    let u = 6.0;
    let t_end = 0.2;
    // straight-line motion from rest is first order in v
    let m = &p.right;
    let r = p.wheel_radius;
    let mass = p.mass + 2.0 * m.inertia / (r * r);
    let drive = 2.0 * m.gear_ratio * m.torque_constant / (m.resistance * r);
    let damping = 2.0 * m.gear_ratio * m.gear_ratio * m.torque_constant * m.back_emf_constant / (m.resistance * r * r)
        + p.friction_linear;
    let c = damping / mass;
    let v_ss = drive * u / damping;
    let v_exact = v_ss * (1.0 - (-c * t_end).exp());
    let x_exact = v_ss * (t_end - (1.0 - (-c * t_end).exp()) / c);

    let mut s = PlantState::at_rest(Pose::default());
    for _ in 0..(t_end / dt).round() as usize {
        s = step_plant(&s, CommandPair::new(u, u), WheelTorques::default(), &p, dt);
    }
    (s.velocity.v - v_exact).abs().max((s.pose.x - x_exact).abs())
}

fn c10_integrator_order() -> Outcome {
    let kin = kinematic_error(0.1) / kinematic_error(0.05);
    let plant = plant_error(0.004) / plant_error(0.002);
    let within = |r: f64| (12.0..=20.0).contains(&r);
    check(
        within(kin) && within(plant),
        format!("error ratio kinematic {kin:.2}, plant {plant:.2}"),
    )
}

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_neurotrack"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn c11_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let cfg = p("run.cfg");
    std::fs::write(
        &cfg,
        "sim.mode = dynamic\nsim.duration = 12\ninitial.x = 0.3\ninitial.theta = -5deg\n",
    )
    .map_err(|e| e.to_string())?;
    let read = |f: &str| std::fs::read(Path::new(f)).map_err(|e| e.to_string());

    cli(&["run", &cfg, "--out", &p("run1.csv")])?;
    cli(&["run", &cfg, "--out", &p("run2.csv")])?;
    let sweep = ["sweep", &cfg, "--k1", "1,3", "--k2", "0.3", "--k3", "1,3.8"];
    cli(&[&sweep[..], &["--out", &p("sweep1.csv")]].concat())?;
    cli(&[&sweep[..], &["--out", &p("sweep2.csv")]].concat())?;
    cli(&[&sweep[..], &["--sequential", "--out", &p("sweep3.csv")]].concat())?;

    let runs_equal = read(&p("run1.csv"))? == read(&p("run2.csv"))?;
    let s1 = read(&p("sweep1.csv"))?;
    let sweeps_equal = s1 == read(&p("sweep2.csv"))? && s1 == read(&p("sweep3.csv"))?;
    check(
        runs_equal && sweeps_equal,
        format!("run identical: {runs_equal}, sweep identical (incl. sequential): {sweeps_equal}"),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("scenario convergence", c1_convergence),
        ("Lyapunov decrease along trajectories", c2_lyapunov_decrease),
        ("chain-rule vs finite-difference rate", c3_chain_rule),
        ("equilibrium exactness", c4_equilibrium),
        ("k1 monotonicity", c5_k1_monotone),
        ("bounded small velocity error", c6_velocity_error),
        ("feedforward benefit", c7_feedforward_benefit),
        ("PID-equivalence degeneracy", c8_pid_equivalence),
        ("neural gradient correctness", c9_gradients),
        ("integrator order", c10_integrator_order),
        ("determinism", c11_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
