//! Joint-space controllers: the PD loop that produces the chaotic regime,
//! the fractional dynamic sliding mode controller (FDSMC) and a classical
//! first-order sliding mode controller used as the chattering comparator.
//!
//! Sign convention: the tracking error is `e = θ_master − θ_slave`.

use thiserror::Error;

use crate::frac_ops::{FracError, GlKernel, GlStream, FracOrder, StreamMode};
use crate::robot_model::{
    add, bias_torque, bias_torque_dot, forward_dynamics, inertia, inertia_inv_dot, scale, sub,
    JointState, ModelError, RobotParams, Vec2,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("gain {name} must be finite and positive, got {value}")]
    BadGain { name: &'static str, value: f64 },
    #[error(transparent)]
    Frac(#[from] FracError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Strict signum with `sgn(0) = 0`.
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn sgn2(v: Vec2) -> Vec2 {
    [sgn(v[0]), sgn(v[1])]
}

fn check_positive(name: &'static str, value: f64) -> Result<(), ControlError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ControlError::BadGain { name, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdGains {
    pub kp: f64,
    pub kd: f64,
}

impl PdGains {
    pub fn new(kp: f64, kd: f64) -> Result<Self, ControlError> {
        check_positive("kp", kp)?;
        check_positive("kd", kd)?;
        Ok(Self { kp, kd })
    }
}

impl Default for PdGains {
    fn default() -> Self {
        Self { kp: 4.0, kd: 4.0 }
    }
}

/// `τ = Kp (θ_d − θ) + Kd (θ̇_d − θ̇)` on each joint.
pub fn pd_torque(g: &PdGains, theta_d: Vec2, theta_dot_d: Vec2, st: &JointState) -> Vec2 {
    let e = sub(theta_d, st.theta);
    let ed = sub(theta_dot_d, st.theta_dot);
    add(scale(g.kp, e), scale(g.kd, ed))
}

/// Backward difference of the master acceleration; zero until a previous
/// sample exists.
pub fn third_derivative_estimate(prev: Option<Vec2>, current: Vec2, h: f64) -> Vec2 {
    match prev {
        Some(p) => scale(1.0 / h, sub(current, p)),
        None => [0.0, 0.0],
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdsmcGains {
    pub ks: f64,
    pub kp: f64,
    pub kd: f64,
    pub kf: f64,
    /// Fractional order of the surface, in (0, 1).
    pub lambda: f64,
}

impl FdsmcGains {
    pub fn new(ks: f64, kp: f64, kd: f64, kf: f64, lambda: f64) -> Result<Self, ControlError> {
        check_positive("ks", ks)?;
        check_positive("kp", kp)?;
        check_positive("kd", kd)?;
        check_positive("kf", kf)?;
        FracOrder::caputo(lambda)?;
        Ok(Self { ks, kp, kd, kf, lambda })
    }

    /// Same as [`FdsmcGains::new`] but admits `ks = 0` (no switching term).
    pub fn without_switching(kp: f64, kd: f64, kf: f64, lambda: f64) -> Result<Self, ControlError> {
        let g = Self::new(1.0, kp, kd, kf, lambda)?;
        Ok(Self { ks: 0.0, ..g })
    }
}

impl Default for FdsmcGains {
    fn default() -> Self {
        Self { ks: 1.0, kp: 2.0, kd: 10.0, kf: 0.1, lambda: 0.7 }
    }
}

/// Fractional quantities the torque-rate law needs at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateTerms {
    /// `D^{1−λ} ė`.
    pub d_edot: Vec2,
    /// `ë = θ̈_m − θ̈_s`.
    pub e_ddot: Vec2,
    /// Estimated master jerk `θ_m⁽³⁾`.
    pub master_jerk: Vec2,
    /// `D^{1−λ} sgn(S)`.
    pub d_sign: Vec2,
}

/// Torque-rate law of the dynamic sliding mode controller:
///
/// ```text
/// Ṫ = M { (Kp/Kf) D^{1−λ}ė + (Kd/Kf) ë + θ_m⁽³⁾ − d(M⁻¹)/dt (T − h) + M⁻¹ ḣ + (Ks/Kf) D^{1−λ} sgn(S) }
/// ```
///
/// On the nominal model this gives `D^{1−λ} Ṡ = −Ks D^{1−λ} sgn(S)` per joint.
///
/// `M`, `h = H + Dθ̇` and their derivatives come from `model` evaluated at the
/// measured slave state, with `slave_acc` the model acceleration.
pub fn fdsmc_torque_rate(
    g: &FdsmcGains,
    model: &RobotParams,
    slave: &JointState,
    slave_acc: Vec2,
    torque: Vec2,
    terms: &RateTerms,
) -> Result<Vec2, ControlError> {
    let m = inertia(model, slave.theta[1]);
    let minv = m.inverse()?;
    let minv_dot = inertia_inv_dot(model, slave.theta[1], slave.theta_dot[1])?;
    let h = bias_torque(model, slave);
    let h_dot = bias_torque_dot(model, slave, slave_acc);

    let mut inner = add(scale(g.kp / g.kf, terms.d_edot), scale(g.kd / g.kf, terms.e_ddot));
    inner = add(inner, terms.master_jerk);
    inner = sub(inner, minv_dot.mul_vec(sub(torque, h)));
    inner = add(inner, minv.mul_vec(h_dot));
    inner = add(inner, scale(g.ks / g.kf, terms.d_sign));
    Ok(m.mul_vec(inner))
}

/// Explicit Euler accumulation of the torque rate.
pub fn fdsmc_step(torque: Vec2, rate: Vec2, h: f64) -> Vec2 {
    add(torque, scale(h, rate))
}

/// What the controller sees of the master at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MasterSnapshot {
    pub state: JointState,
    pub acc: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdsmcOutput {
    pub surface: Vec2,
    /// Torque to command at this grid point.
    pub torque: Vec2,
    /// Torque rate computed at this grid point (zero while inactive).
    pub rate: Vec2,
}

/// Controller memory: fractional evaluators over the error history, the
/// integrated torque and the previous master acceleration.
///
/// The evaluators are fed from the first grid point of the run so their
/// lower terminal is `t = 0`, where the error and its derivatives vanish for
/// a master and slave starting from the same state.
#[derive(Debug, Clone)]
pub struct FdsmcState {
    gains: FdsmcGains,
    model: RobotParams,
    h: f64,
    d_lam_e: [GlStream; 2],
    d_lam_edot: [GlStream; 2],
    d_comp_edot: [GlStream; 2],
    d_comp_sign: [GlStream; 2],
    torque: Vec2,
    prev_master_acc: Option<Vec2>,
    active: bool,
    t: Option<f64>,
}

impl FdsmcState {
    pub fn new(gains: FdsmcGains, model: RobotParams, h: f64, memory_len: usize) -> Result<Self, ControlError> {
        let lam = FracOrder::caputo(gains.lambda)?;
        let comp = FracOrder::caputo(1.0 - gains.lambda)?;
        let caputo = |q| -> Result<GlStream, FracError> {
            GlStream::new(GlKernel::new(q, h, memory_len)?, StreamMode::Caputo)
        };
        // The switching history is zero until activation, so the plain GL
        // derivative is used: a Caputo evaluator would cancel a constant sign.
        let plain = |q| -> Result<GlStream, FracError> {
            GlStream::new(GlKernel::new(q, h, memory_len)?, StreamMode::Plain)
        };
        Ok(Self {
            gains,
            model,
            h,
            d_lam_e: [caputo(lam)?, caputo(lam)?],
            d_lam_edot: [caputo(lam)?, caputo(lam)?],
            d_comp_edot: [caputo(comp)?, caputo(comp)?],
            d_comp_sign: [plain(comp)?, plain(comp)?],
            torque: [0.0, 0.0],
            prev_master_acc: None,
            active: false,
            t: None,
        })
    }

    pub fn gains(&self) -> &FdsmcGains {
        &self.gains
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    /// Integrated torque `T_s`.
    pub fn torque(&self) -> Vec2 {
        self.torque
    }

    /// Switch the controller on, starting the integrated torque from
    /// `initial_torque` (the last command of the previous controller).
    pub fn activate(&mut self, initial_torque: Vec2) {
        self.active = true;
        self.torque = initial_torque;
    }

    /// Advance the surface evaluators with the error sample at grid time `t`
    /// and return `S = Kp e + Kd D^λ e + Kf D^λ ė`.
    ///
    /// `D^{λ+1} e` is realized as the order-λ Caputo derivative of the
    /// measured `ė`.
    pub fn fdsmc_surface(&mut self, t: f64, e: Vec2, e_dot: Vec2) -> Result<Vec2, ControlError> {
        let g = self.gains;
        let mut s = [0.0; 2];
        for i in 0..2 {
            let de = self.d_lam_e[i].push(t, e[i])?;
            let ded = self.d_lam_edot[i].push(t, e_dot[i])?;
            s[i] = g.kp * e[i] + g.kd * de + g.kf * ded;
        }
        Ok(s)
    }

    /// One grid point of the controller.
    ///
    /// `slave_acc` is the nominal-model acceleration of the slave at its
    /// measured state under the torque currently acting on it. While
    /// inactive only the fractional histories advance and the returned
    /// torque is meaningless.
    pub fn update(
        &mut self,
        t: f64,
        master: &MasterSnapshot,
        slave: &JointState,
        slave_acc: Vec2,
    ) -> Result<FdsmcOutput, ControlError> {
        if let Some(last) = self.t {
            debug_assert!(t > last);
        }
        self.t = Some(t);
        let e = sub(master.state.theta, slave.theta);
        let e_dot = sub(master.state.theta_dot, slave.theta_dot);
        let surface = self.fdsmc_surface(t, e, e_dot)?;
        let jerk = third_derivative_estimate(self.prev_master_acc, master.acc, self.h);
        self.prev_master_acc = Some(master.acc);

        let mut d_edot = [0.0; 2];
        let mut d_sign = [0.0; 2];
        let sign = if self.active { sgn2(surface) } else { [0.0, 0.0] };
        for i in 0..2 {
            d_edot[i] = self.d_comp_edot[i].push(t, e_dot[i])?;
            d_sign[i] = self.d_comp_sign[i].push(t, sign[i])?;
        }
        if !self.active {
            return Ok(FdsmcOutput { surface, torque: self.torque, rate: [0.0, 0.0] });
        }
        let terms = RateTerms {
            d_edot,
            e_ddot: sub(master.acc, slave_acc),
            master_jerk: jerk,
            d_sign,
        };
        let rate = fdsmc_torque_rate(&self.gains, &self.model, slave, slave_acc, self.torque, &terms)?;
        let torque = self.torque;
        self.torque = fdsmc_step(self.torque, rate, self.h);
        Ok(FdsmcOutput { surface, torque, rate })
    }
}

/// Classical sliding mode controller on `σ = ė + c e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmcGains {
    /// Surface slope `c` (1/s).
    pub c: f64,
    /// Switching gain `K` (rad/s²).
    pub k: f64,
}

impl SmcGains {
    pub fn new(c: f64, k: f64) -> Result<Self, ControlError> {
        check_positive("smc_c", c)?;
        check_positive("smc_k", k)?;
        Ok(Self { c, k })
    }
}

impl Default for SmcGains {
    fn default() -> Self {
        Self { c: 5.0, k: 5.0 }
    }
}

/// Computed-torque equivalent control plus `M K sgn(σ)`:
/// `τ = M (θ̈_m + c ė + K sgn(σ)) + H + D θ̇`, which gives `σ̇ = −K sgn(σ)`
/// on the nominal model. Returns the torque and `σ`.
pub fn smc_baseline_torque(
    g: &SmcGains,
    model: &RobotParams,
    master: &MasterSnapshot,
    slave: &JointState,
) -> (Vec2, Vec2) {
    let e = sub(master.state.theta, slave.theta);
    let e_dot = sub(master.state.theta_dot, slave.theta_dot);
    let sigma = add(e_dot, scale(g.c, e));
    let accel = add(add(master.acc, scale(g.c, e_dot)), scale(g.k, sgn2(sigma)));
    let m = inertia(model, slave.theta[1]);
    (add(m.mul_vec(accel), bias_torque(model, slave)), sigma)
}

/// Nominal-model slave acceleration, as used by both sliding controllers.
pub fn model_acceleration(model: &RobotParams, st: &JointState, torque: Vec2) -> Result<Vec2, ControlError> {
    Ok(forward_dynamics(model, st, torque)?)
}
