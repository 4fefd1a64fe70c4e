use std::f64::consts::PI;

use fdsmc_core::dde_sim::{
    desired_trajectory, inject_uncertainty, integrate_open_loop, rk4_step, simulate, Mode, ScenarioConfig,
};
use fdsmc_core::robot_model::{
    bias_torque, coriolis, coriolis_dot, forward_dynamics, inertia, inertia_dot, mech_energy, JointState,
    RobotParams,
};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = RobotParams> {
    (0.05..1.0f64, 0.05..1.0f64, 0.1..5.0f64, 0.1..5.0f64, 0.0..2.0f64, 0.0..2.0f64).prop_map(
        |(l1, l2, m1, m2, d1, d2)| {
            if d1 == 0.0 || d2 == 0.0 {
                RobotParams::frictionless(l1, l2, m1, m2).unwrap()
            } else {
                RobotParams::new(l1, l2, m1, m2, d1, d2).unwrap()
            }
        },
    )
}

proptest! {
    #[test]
    fn inertia_is_symmetric_positive_definite(p in params(), th in -10.0..10.0f64) {
        let m = inertia(&p, th);
        prop_assert!(m.is_symmetric());
        prop_assert!(m.det() > 0.0 && m.trace() > 0.0);
    }

    #[test]
    fn forward_dynamics_inverts_equation_of_motion(
        p in params(), th in prop::array::uniform2(-3.0..3.0f64), w in prop::array::uniform2(-5.0..5.0f64),
        tau in prop::array::uniform2(-10.0..10.0f64),
    ) {
        let st = JointState { theta: th, theta_dot: w };
        let acc = forward_dynamics(&p, &st, tau).unwrap();
        let lhs = inertia(&p, th[1]).mul_vec(acc);
        let b = bias_torque(&p, &st);
        for i in 0..2 {
            prop_assert!((lhs[i] + b[i] - tau[i]).abs() < 1e-9 * (1.0 + tau[i].abs()));
        }
    }

    #[test]
    fn kinetic_energy_is_non_negative(p in params(), th2 in -4.0..4.0f64, w in prop::array::uniform2(-9.0..9.0f64)) {
        let st = JointState { theta: [0.0, th2], theta_dot: w };
        prop_assert!(mech_energy(&p, &st) >= 0.0);
    }
}

#[test]
fn mass_matrix_positive_definite_on_grid() {
    for p in [RobotParams::nominal(), RobotParams::uncertain()] {
        for k in 0..10_000 {
            let th = -PI + 2.0 * PI * k as f64 / 9_999.0;
            assert!(inertia(&p, th).det() > 0.0, "theta2 = {th}");
        }
    }
}

#[test]
fn uncertain_coupling_constant() {
    assert!((inject_uncertainty(true).s() - 0.018).abs() < 1e-15);
    assert_eq!(inject_uncertainty(false), RobotParams::nominal());
}

fn chirp(t: f64) -> JointState {
    JointState {
        theta: [0.8 * (1.3 * t).sin(), 1.1 * (0.7 * t).cos() + 0.2 * t],
        theta_dot: [1.04 * (1.3 * t).cos(), -0.77 * (0.7 * t).sin() + 0.2],
    }
}

fn chirp_acc(t: f64) -> [f64; 2] {
    [-1.352 * (1.3 * t).sin(), -0.539 * (0.7 * t).cos()]
}

#[test]
fn rate_terms_match_central_differences() {
    let p = RobotParams::nominal();
    let eps = 1e-5;
    for k in 0..20 {
        let t = 0.37 * k as f64;
        let st = chirp(t);
        let md = inertia_dot(&p, st.theta[1], st.theta_dot[1]);
        let (a, b) = (inertia(&p, chirp(t + eps).theta[1]), inertia(&p, chirp(t - eps).theta[1]));
        for r in 0..2 {
            for c in 0..2 {
                let fd = (a.0[r][c] - b.0[r][c]) / (2.0 * eps);
                assert!((md.0[r][c] - fd).abs() < 1e-6, "t={t} M[{r}][{c}]: {} vs {fd}", md.0[r][c]);
            }
        }

        let cd = coriolis_dot(&p, &st, chirp_acc(t));
        let (a, b) = (coriolis(&p, &chirp(t + eps)), coriolis(&p, &chirp(t - eps)));
        for i in 0..2 {
            let fd = (a[i] - b[i]) / (2.0 * eps);
            assert!((cd[i] - fd).abs() < 1e-6 * (1.0 + fd.abs()), "t={t} i={i}: {} vs {fd}", cd[i]);
        }
    }
}

#[test]
fn frictionless_energy_conserved_over_ten_seconds() {
    let p = RobotParams::frictionless(0.25, 0.25, 1.0, 1.0).unwrap();
    let y0 = JointState { theta: [0.3, -1.2], theta_dot: [2.0, -3.0] };
    let e0 = mech_energy(&p, &y0);
    let traj = integrate_open_loop(&p, y0, 5e-4, 20_000, |_| [0.0, 0.0]).unwrap();
    let worst = traj.iter().map(|s| ((mech_energy(&p, s) - e0) / e0).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "relative drift {worst}");
}

#[test]
fn friction_never_adds_energy() {
    let p = RobotParams::nominal();
    let y0 = JointState { theta: [0.0, 0.4], theta_dot: [3.0, -2.0] };
    let traj = integrate_open_loop(&p, y0, 5e-4, 10_000, |_| [0.0, 0.0]).unwrap();
    for w in traj.windows(2) {
        assert!(mech_energy(&p, &w[1]) <= mech_energy(&p, &w[0]) + 1e-12);
    }
}

#[test]
fn rk4_is_fourth_order() {
    let p = RobotParams::frictionless(0.25, 0.25, 1.0, 1.0).unwrap();
    let y0 = JointState { theta: [0.1, 0.9], theta_dot: [4.0, -6.0] };
    let run = |h: f64| {
        let n = (1.0 / h).round() as usize;
        *integrate_open_loop(&p, y0, h, n, |_| [0.0, 0.0]).unwrap().last().unwrap()
    };
    let reference = run(1.25e-4);
    let err = |s: JointState| (s.theta[0] - reference.theta[0]).abs().max((s.theta[1] - reference.theta[1]).abs());
    let e1 = err(run(2e-3));
    let e2 = err(run(1e-3));
    let ratio = e1 / e2;
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn rest_without_torque_stays_at_rest() {
    let p = RobotParams::nominal();
    let y = rk4_step(&p, &JointState::rest(), [0.0, 0.0], 5e-4).unwrap();
    assert_eq!(y, JointState::rest());
}

#[test]
fn step_refinement_converges_in_periodic_regime() {
    let run = |h: f64| {
        let cfg = ScenarioConfig { mode: Mode::SinglePd, h, t_end: 10.0, l_slave: 0.001, ..Default::default() };
        simulate(&cfg).unwrap().plant.records.last().unwrap().state
    };
    let (a, b) = (run(1e-3), run(5e-4));
    for i in 0..2 {
        assert!((a.theta[i] - b.theta[i]).abs() < 1e-4, "joint {i}: {} vs {}", a.theta[i], b.theta[i]);
    }
}

#[test]
fn simulation_is_deterministic_and_delay_exact() {
    let cfg = ScenarioConfig { t_end: 2.0, ..Default::default() };
    let a = simulate(&cfg).unwrap();
    let b = simulate(&cfg).unwrap();
    assert_eq!(a, b);
    let d = 30;
    let r = &a.plant.records;
    for j in 0..r.len() {
        let want = if j >= d { r[j - d].tau_cmd } else { [0.0, 0.0] };
        assert_eq!(r[j].tau_applied, want, "step {j}");
    }
    let m = &a.master.as_ref().unwrap().records;
    for j in 10..m.len() {
        assert_eq!(m[j].tau_applied, m[j - 10].tau_cmd);
    }
}

#[test]
fn chaotic_pd_run_stays_bounded() {
    let cfg = ScenarioConfig { mode: Mode::SinglePd, t_end: 200.0, ..Default::default() };
    let out = simulate(&cfg).unwrap();
    let th2 = out.plant.theta(1);
    assert!(th2.iter().all(|v| v.is_finite() && v.abs() < 50.0));
    // Aperiodic: late maxima do not settle to one value.
    let late = &th2[th2.len() / 2..];
    let maxima: Vec<f64> = (1..late.len() - 1)
        .filter(|&i| late[i - 1] < late[i] && late[i] > late[i + 1])
        .map(|i| late[i])
        .collect();
    let spread = maxima.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - maxima.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread > 0.1, "spread {spread}");
}

#[test]
fn desired_trajectory_bounded() {
    for k in 0..10_000 {
        let (q, _, _) = desired_trajectory(k as f64 * 0.0137);
        assert!(q[0].abs() <= PI / 4.0 + 1e-15);
    }
}

#[test]
fn divergence_is_reported() {
    let cfg = ScenarioConfig {
        mode: Mode::SinglePd,
        t_end: 10.0,
        divergence_bound: 1.0,
        ..Default::default()
    };
    let err = simulate(&cfg).unwrap_err();
    assert!(matches!(err, fdsmc_core::dde_sim::SimError::Diverged { .. }), "{err}");
}

#[test]
fn uncertainty_leaves_master_untouched() {
    let base = ScenarioConfig { t_end: 0.09, ..Default::default() };
    let a = simulate(&base).unwrap();
    let b = simulate(&ScenarioConfig { uncertain_slave: true, ..base }).unwrap();
    assert_eq!(a.master, b.master);
    assert_ne!(a.plant, b.plant);
}
