//! Closed-form oracles for the integrators and the CSV log format.

use approx::assert_relative_eq;

use neurotrack::harness::csv::LOG_HEADER;
use neurotrack::harness::{log_to_csv, parse_config, run_scenario};
use neurotrack::kinematics::{integrate_pose, Pose, ReferenceProfile, Segment, VelocityPair};
use neurotrack::plant::{step_plant, CommandPair, PlantParams, PlantState, WheelTorques};

/// Straight-line response from rest to equal wheel voltages `u`: `(v(t), x(t))`.
fn first_order_response(p: &PlantParams, u: f64, t: f64) -> (f64, f64) {
    let m = &p.right;
    let r = p.wheel_radius;
    let mass = p.mass + 2.0 * m.inertia / (r * r);
    let drive = 2.0 * m.gear_ratio * m.torque_constant / (m.resistance * r);
    let damping = 2.0 * m.gear_ratio * m.gear_ratio * m.torque_constant * m.back_emf_constant / (m.resistance * r * r)
        + p.friction_linear;
    let c = damping / mass;
    let v_ss = drive * u / damping;
    let decay = 1.0 - (-c * t).exp();
    (v_ss * decay, v_ss * (t - decay / c))
}

fn simulate_step(p: &PlantParams, u: f64, t_end: f64, dt: f64) -> PlantState {
    let mut s = PlantState::at_rest(Pose::default());
    for _ in 0..(t_end / dt).round() as usize {
        s = step_plant(&s, CommandPair::new(u, u), WheelTorques::default(), p, dt);
    }
    s
}

#[test]
fn plant_step_response_matches_first_order_solution() {
    let p = PlantParams::default();
    for u in [-8.0, 3.0, 12.0] {
        for t in [0.01, 0.05, 0.5] {
            let s = simulate_step(&p, u, t, 1e-3);
            let (v, x) = first_order_response(&p, u, t);
            assert!((s.velocity.v - v).abs() < 1e-6, "u={u} t={t}: {} vs {v}", s.velocity.v);
            assert!((s.pose.x - x).abs() < 1e-6);
            assert_eq!(s.velocity.w, 0.0);
            assert_eq!(s.pose.y, 0.0);
        }
    }
}

#[test]
fn plant_rk4_is_fourth_order() {
    let p = PlantParams::default();
    let err = |dt: f64| {
        let s = simulate_step(&p, 6.0, 0.2, dt);
        (s.velocity.v - first_order_response(&p, 6.0, 0.2).0).abs()
    };
    let ratio = err(0.004) / err(0.002);
    assert!((12.0..=20.0).contains(&ratio), "{ratio}");
}

#[test]
fn kinematic_rk4_is_fourth_order() {
    let eta = VelocityPair::new(0.8, 1.3);
    let start = Pose::new(0.2, -0.1, 0.4);
    let exact = ReferenceProfile::new(start, vec![Segment::new(4.0, eta.v, eta.w)])
        .unwrap()
        .state_at(4.0)
        .unwrap()
        .0;
    let err = |dt: f64| {
        let mut q = start;
        for _ in 0..(4.0 / dt).round() as usize {
            q = integrate_pose(&q, eta, dt);
        }
        (q.x - exact.x).hypot(q.y - exact.y)
    };
    let ratio = err(0.1) / err(0.05);
    assert!((12.0..=20.0).contains(&ratio), "{ratio}");
}

#[test]
fn csv_log_roundtrips_to_nine_digits() {
    let cfg = parse_config("sim.mode = dynamic\nsim.duration = 2\ninitial.x = 0.3\ninitial.theta = -5deg\n").unwrap();
    let log = run_scenario(&cfg).unwrap();
    let text = log_to_csv(&log);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(LOG_HEADER));
    let mut n = 0;
    for (line, r) in lines.zip(&log.records) {
        let vals: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        let expected = [
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
        assert_eq!(vals.len(), expected.len());
        for (a, b) in vals.iter().zip(expected) {
            assert_relative_eq!(*a, b, max_relative = 1e-8, epsilon = 1e-300);
        }
        n += 1;
    }
    assert_eq!(n, log.len());
}
