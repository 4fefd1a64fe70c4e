//! Fixed-step simulation of robots whose actuator input lags the command by
//! a constant dead time.
//!
//! The state is integrated with classical RK4; the torque acting over each
//! step is the command issued `L/h` steps earlier, held constant across the
//! step. Commands before `t = 0` are zero.

use std::f64::consts::PI;
use std::io::{self, Write};

use thiserror::Error;

use crate::controllers::{
    model_acceleration, pd_torque, smc_baseline_torque, ControlError, FdsmcGains, FdsmcState,
    MasterSnapshot, PdGains, SmcGains,
};
use crate::frac_ops::DEFAULT_MEMORY_LEN;
use crate::robot_model::{add, forward_dynamics, scale, JointState, ModelError, RobotParams, Vec2};

pub const DEFAULT_STEP: f64 = 5e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("state diverged at step {step} (t = {t})")]
    Diverged { step: usize, t: f64 },
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Delayed-command store: `lookup(j)` returns the command written at step
/// `j − delay`, or zero before the first write.
#[derive(Debug, Clone)]
pub struct TorqueRingBuffer {
    delay: usize,
    buf: Vec<Vec2>,
    written: usize,
}

impl TorqueRingBuffer {
    pub fn new(delay_steps: usize) -> Self {
        Self { delay: delay_steps, buf: vec![[0.0; 2]; delay_steps + 1], written: 0 }
    }

    /// Delay in steps for dead time `l` on grid `h`; `l/h` must be an
    /// integer to within 1e-9 relative.
    pub fn delay_steps(l: f64, h: f64) -> Result<usize, SimError> {
        if !(l >= 0.0) || !l.is_finite() {
            return Err(SimError::Config(format!("delay must be finite and non-negative, got {l}")));
        }
        let r = l / h;
        let n = r.round();
        if (r - n).abs() > 1e-9 * r.max(1.0) {
            return Err(SimError::Config(format!("delay {l} is not a multiple of the step {h}")));
        }
        Ok(n as usize)
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    /// Store the command for the next step index.
    pub fn push(&mut self, tau: Vec2) {
        let n = self.buf.len();
        self.buf[self.written % n] = tau;
        self.written += 1;
    }

    /// Command acting at the most recently pushed step.
    pub fn delayed(&self) -> Vec2 {
        if self.written == 0 || self.written - 1 < self.delay {
            return [0.0; 2];
        }
        let n = self.buf.len();
        self.buf[(self.written - 1 - self.delay) % n]
    }
}

/// `θ_d = (π/4) sin(πt/2)` on both joints, with its first two derivatives.
pub fn desired_trajectory(t: f64) -> (Vec2, Vec2, Vec2) {
    let w = 0.5 * PI;
    let (s, c) = (w * t).sin_cos();
    let a = 0.25 * PI;
    ([a * s; 2], [a * w * c; 2], [-a * w * w * s; 2])
}

/// Parameters of the robot actually simulated on the slave side.
pub fn inject_uncertainty(uncertain: bool) -> RobotParams {
    if uncertain {
        RobotParams::uncertain()
    } else {
        RobotParams::nominal()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// One robot under delayed PD tracking of the desired trajectory; the
    /// robot uses the slave dead time.
    SinglePd,
    /// Master under delayed PD, slave under FDSMC after activation.
    MasterSlaveFdsmc,
    /// Master under delayed PD, slave under the classical SMC after
    /// activation.
    MasterSlaveSmcBaseline,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::SinglePd, Mode::MasterSlaveFdsmc, Mode::MasterSlaveSmcBaseline];

    pub fn name(self) -> &'static str {
        match self {
            Mode::SinglePd => "single_pd",
            Mode::MasterSlaveFdsmc => "master_slave_fdsmc",
            Mode::MasterSlaveSmcBaseline => "master_slave_smc_baseline",
        }
    }

    pub fn from_name(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub h: f64,
    pub t_end: f64,
    pub l_master: f64,
    pub l_slave: f64,
    pub pd: PdGains,
    pub fdsmc: FdsmcGains,
    pub smc: SmcGains,
    /// Time at which the sliding controller takes over from PD.
    pub activation_time: f64,
    /// Simulate the slave with the perturbed link parameters while the
    /// controller keeps the nominal model.
    pub uncertain_slave: bool,
    pub memory_len: usize,
    /// Route the sliding controller's command through the slave dead time.
    pub delay_applies_to_control: bool,
    /// Initial state of every robot.
    pub initial: JointState,
    /// Any |θ| or |θ̇| above this is reported as divergence.
    pub divergence_bound: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            mode: Mode::MasterSlaveFdsmc,
            h: DEFAULT_STEP,
            t_end: 100.0,
            l_master: 0.005,
            l_slave: 0.015,
            pd: PdGains::default(),
            fdsmc: FdsmcGains::default(),
            smc: SmcGains::default(),
            activation_time: 0.1,
            uncertain_slave: false,
            memory_len: DEFAULT_MEMORY_LEN,
            delay_applies_to_control: true,
            initial: JointState::rest(),
            divergence_bound: 1e6,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if !(self.h > 0.0) || !self.h.is_finite() {
            return bad(format!("step must be positive, got {}", self.h));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if self.memory_len == 0 {
            return bad("memory_len must be positive".into());
        }
        if self.activation_time.is_nan() || self.activation_time < 0.0 {
            return bad(format!("activation_time must be non-negative, got {}", self.activation_time));
        }
        if !self.initial.is_finite() {
            return bad("initial state must be finite".into());
        }
        if !(self.divergence_bound > 0.0) {
            return bad("divergence_bound must be positive".into());
        }
        TorqueRingBuffer::delay_steps(self.l_master, self.h)?;
        TorqueRingBuffer::delay_steps(self.l_slave, self.h)?;
        self.steps()?;
        Ok(())
    }

    /// Number of integration steps; `t_end/h` must be an integer.
    pub fn steps(&self) -> Result<usize, SimError> {
        let r = self.t_end / self.h;
        let n = r.round();
        if (r - n).abs() > 1e-9 * r.max(1.0) {
            return Err(SimError::Config(format!(
                "t_end {} is not a multiple of the step {}",
                self.t_end, self.h
            )));
        }
        Ok(n as usize)
    }

    /// First grid index at or after the activation time.
    pub fn activation_step(&self) -> usize {
        let r = self.activation_time / self.h;
        let n = r.round();
        if (r - n).abs() <= 1e-9 * r.max(1.0) {
            n as usize
        } else {
            r.ceil() as usize
        }
    }
}

/// One grid sample of a robot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub t: f64,
    pub state: JointState,
    /// Torque acting over the step starting here.
    pub tau_applied: Vec2,
    /// Command issued here.
    pub tau_cmd: Vec2,
    /// Sliding variable while a sliding controller is active.
    pub surface: Option<Vec2>,
    /// Torque rate of an active dynamic controller.
    pub tau_rate: Option<Vec2>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub h: f64,
    pub records: Vec<Record>,
}

pub const TRAJECTORY_HEADER: &str =
    "t,theta1,theta2,omega1,omega2,tau1_applied,tau2_applied,tau1_cmd,tau2_cmd,S1,S2";

/// Scientific notation with 17 significant digits; parses back to the same
/// bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn theta(&self, joint: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.state.theta[joint]).collect()
    }

    pub fn omega(&self, joint: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.state.theta_dot[joint]).collect()
    }

    pub fn tau_cmd(&self, joint: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.tau_cmd[joint]).collect()
    }

    /// Records with `t` in `[t0, t1]`.
    pub fn window(&self, t0: f64, t1: f64) -> &[Record] {
        let tol = 1e-9 * self.h;
        let a = self.records.partition_point(|r| r.t < t0 - tol);
        let b = self.records.partition_point(|r| r.t <= t1 + tol);
        &self.records[a..b.max(a)]
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{TRAJECTORY_HEADER}")?;
        for r in &self.records {
            let (s1, s2) = match r.surface {
                Some(s) => (fmt_f64(s[0]), fmt_f64(s[1])),
                None => (String::new(), String::new()),
            };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                fmt_f64(r.t),
                fmt_f64(r.state.theta[0]),
                fmt_f64(r.state.theta[1]),
                fmt_f64(r.state.theta_dot[0]),
                fmt_f64(r.state.theta_dot[1]),
                fmt_f64(r.tau_applied[0]),
                fmt_f64(r.tau_applied[1]),
                fmt_f64(r.tau_cmd[0]),
                fmt_f64(r.tau_cmd[1]),
                s1,
                s2
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    /// Present in the master-slave modes.
    pub master: Option<Trajectory>,
    /// The slave, or the single robot in [`Mode::SinglePd`].
    pub plant: Trajectory,
}

impl SimOutput {
    /// `θ_master − θ_slave` on one joint, sample by sample.
    pub fn sync_error(&self, joint: usize) -> Option<Vec<f64>> {
        let m = self.master.as_ref()?;
        Some(
            m.records
                .iter()
                .zip(&self.plant.records)
                .map(|(a, b)| a.state.theta[joint] - b.state.theta[joint])
                .collect(),
        )
    }
}

fn deriv(p: &RobotParams, y: &JointState, tau: Vec2) -> Result<(Vec2, Vec2), ModelError> {
    Ok((y.theta_dot, forward_dynamics(p, y, tau)?))
}

fn offset(y: &JointState, k: &(Vec2, Vec2), a: f64) -> JointState {
    JointState { theta: add(y.theta, scale(a, k.0)), theta_dot: add(y.theta_dot, scale(a, k.1)) }
}

/// One classical RK4 step with the torque held constant.
pub fn rk4_step(p: &RobotParams, y: &JointState, tau: Vec2, h: f64) -> Result<JointState, ModelError> {
    let k1 = deriv(p, y, tau)?;
    let k2 = deriv(p, &offset(y, &k1, 0.5 * h), tau)?;
    let k3 = deriv(p, &offset(y, &k2, 0.5 * h), tau)?;
    let k4 = deriv(p, &offset(y, &k3, h), tau)?;
    let comb = |a: Vec2, b: Vec2, c: Vec2, d: Vec2| -> Vec2 {
        [
            (a[0] + 2.0 * b[0] + 2.0 * c[0] + d[0]) * h / 6.0,
            (a[1] + 2.0 * b[1] + 2.0 * c[1] + d[1]) * h / 6.0,
        ]
    };
    Ok(JointState {
        theta: add(y.theta, comb(k1.0, k2.0, k3.0, k4.0)),
        theta_dot: add(y.theta_dot, comb(k1.1, k2.1, k3.1, k4.1)),
    })
}

/// Open-loop integration of one robot under a torque schedule sampled on the
/// grid; `torque(j)` acts over step `j`. Returns `n + 1` states.
pub fn integrate_open_loop(
    p: &RobotParams,
    initial: JointState,
    h: f64,
    n: usize,
    mut torque: impl FnMut(usize) -> Vec2,
) -> Result<Vec<JointState>, SimError> {
    let mut out = Vec::with_capacity(n + 1);
    let mut y = initial;
    out.push(y);
    for j in 0..n {
        y = rk4_step(p, &y, torque(j), h)?;
        if !y.is_finite() {
            return Err(SimError::Diverged { step: j + 1, t: (j + 1) as f64 * h });
        }
        out.push(y);
    }
    Ok(out)
}

struct DelayedPdRobot {
    params: RobotParams,
    state: JointState,
    buf: TorqueRingBuffer,
}

enum SlaveLaw {
    Pd,
    Fdsmc(Box<FdsmcState>),
    Smc,
}

fn check_bound(st: &JointState, bound: f64) -> bool {
    st.is_finite() && st.theta.iter().chain(&st.theta_dot).all(|v| v.abs() <= bound)
}

/// Run a scenario to `t_end`.
pub fn simulate(cfg: &ScenarioConfig) -> Result<SimOutput, SimError> {
    cfg.validate()?;
    let n = cfg.steps()?;
    let h = cfg.h;
    let nominal = RobotParams::nominal();
    let ja = cfg.activation_step();

    let mut master = match cfg.mode {
        Mode::SinglePd => None,
        _ => Some(DelayedPdRobot {
            params: nominal,
            state: cfg.initial,
            buf: TorqueRingBuffer::new(TorqueRingBuffer::delay_steps(cfg.l_master, h)?),
        }),
    };
    let mut slave = DelayedPdRobot {
        params: if cfg.mode == Mode::SinglePd { nominal } else { inject_uncertainty(cfg.uncertain_slave) },
        state: cfg.initial,
        buf: TorqueRingBuffer::new(TorqueRingBuffer::delay_steps(cfg.l_slave, h)?),
    };
    let mut law = match cfg.mode {
        Mode::SinglePd => SlaveLaw::Pd,
        Mode::MasterSlaveFdsmc => {
            SlaveLaw::Fdsmc(Box::new(FdsmcState::new(cfg.fdsmc, nominal, h, cfg.memory_len)?))
        }
        Mode::MasterSlaveSmcBaseline => SlaveLaw::Smc,
    };

    let mut m_rec = master.as_ref().map(|_| Vec::with_capacity(n + 1));
    let mut s_rec = Vec::with_capacity(n + 1);
    let mut last_cmd = [0.0; 2];

    for j in 0..=n {
        let t = j as f64 * h;
        let (qd, qd_dot, _) = desired_trajectory(t);

        let mut snapshot = None;
        if let Some(m) = master.as_mut() {
            let cmd = pd_torque(&cfg.pd, qd, qd_dot, &m.state);
            m.buf.push(cmd);
            let applied = m.buf.delayed();
            let acc = model_acceleration(&m.params, &m.state, applied)?;
            snapshot = Some(MasterSnapshot { state: m.state, acc });
            if let Some(r) = m_rec.as_mut() {
                r.push(Record { t, state: m.state, tau_applied: applied, tau_cmd: cmd, surface: None, tau_rate: None });
            }
        }

        let active = j >= ja;
        let pd_cmd = pd_torque(&cfg.pd, qd, qd_dot, &slave.state);
        let (cmd, surface, rate, direct) = match (&mut law, snapshot) {
            (SlaveLaw::Pd, _) | (_, None) => (pd_cmd, None, None, false),
            (SlaveLaw::Fdsmc(ctl), Some(ms)) => {
                if active && !ctl.is_active() {
                    ctl.activate(last_cmd);
                }
                // Model acceleration under the torque the slave will feel.
                let felt = if active && !cfg.delay_applies_to_control {
                    ctl.torque()
                } else {
                    slave.buf.delayed_after(if active { ctl.torque() } else { pd_cmd })
                };
                let acc = model_acceleration(&nominal, &slave.state, felt)?;
                let out = ctl.update(t, &ms, &slave.state, acc)?;
                if active {
                    (out.torque, Some(out.surface), Some(out.rate), !cfg.delay_applies_to_control)
                } else {
                    (pd_cmd, None, None, false)
                }
            }
            (SlaveLaw::Smc, Some(ms)) => {
                if active {
                    let (tau, sigma) = smc_baseline_torque(&cfg.smc, &nominal, &ms, &slave.state);
                    (tau, Some(sigma), None, !cfg.delay_applies_to_control)
                } else {
                    (pd_cmd, None, None, false)
                }
            }
        };
        slave.buf.push(cmd);
        let applied = if direct { cmd } else { slave.buf.delayed() };
        last_cmd = cmd;
        s_rec.push(Record { t, state: slave.state, tau_applied: applied, tau_cmd: cmd, surface, tau_rate: rate });

        if j == n {
            break;
        }
        if let Some(m) = master.as_mut() {
            let applied_m = m.buf.delayed();
            m.state = rk4_step(&m.params, &m.state, applied_m, h)?;
            if !check_bound(&m.state, cfg.divergence_bound) {
                return Err(SimError::Diverged { step: j + 1, t: (j + 1) as f64 * h });
            }
        }
        slave.state = rk4_step(&slave.params, &slave.state, applied, h)?;
        if !check_bound(&slave.state, cfg.divergence_bound) {
            return Err(SimError::Diverged { step: j + 1, t: (j + 1) as f64 * h });
        }
    }

    Ok(SimOutput {
        master: m_rec.map(|records| Trajectory { h, records }),
        plant: Trajectory { h, records: s_rec },
    })
}

impl TorqueRingBuffer {
    /// Command that would act at the next step if `tau` were pushed now.
    pub fn delayed_after(&self, tau: Vec2) -> Vec2 {
        if self.delay == 0 {
            return tau;
        }
        let next = self.written;
        if next < self.delay {
            return [0.0; 2];
        }
        let n = self.buf.len();
        self.buf[(next - self.delay) % n]
    }
}
