//! Planar two-link manipulator: inertia, centripetal/Coriolis torque,
//! viscous friction, their time derivatives, forward dynamics, kinematics.
//!
//! The arm moves in a horizontal plane, so there is no gravity term.

use thiserror::Error;

pub type Vec2 = [f64; 2];

/// Determinant below which the inertia matrix is treated as singular.
pub const SINGULAR_DET: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("robot parameter {name} must be finite and positive, got {value}")]
    BadParam { name: &'static str, value: f64 },
    #[error("inertia matrix is near-singular (det = {0:e})")]
    SingularInertia(f64),
}

/// Row-major 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[0.0; 2]; 2]);

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        let m = &self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        let (a, b) = (&self.0, &o.0);
        let mut c = [[0.0; 2]; 2];
        for (i, row) in c.iter_mut().enumerate() {
            for (j, cij) in row.iter_mut().enumerate() {
                *cij = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(c)
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        let m = &self.0;
        Mat2([[s * m[0][0], s * m[0][1]], [s * m[1][0], s * m[1][1]]])
    }

    /// Closed-form inverse, refusing determinants below [`SINGULAR_DET`].
    pub fn inverse(&self) -> Result<Mat2, ModelError> {
        let det = self.det();
        if !(det.abs() > SINGULAR_DET) {
            return Err(ModelError::SingularInertia(det));
        }
        let m = &self.0;
        let inv = 1.0 / det;
        Ok(Mat2([
            [m[1][1] * inv, -m[0][1] * inv],
            [-m[1][0] * inv, m[0][0] * inv],
        ]))
    }

    pub fn is_symmetric(&self) -> bool {
        self.0[0][1] == self.0[1][0]
    }
}

pub(crate) fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

pub(crate) fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

pub(crate) fn scale(s: f64, a: Vec2) -> Vec2 {
    [s * a[0], s * a[1]]
}

/// Physical constants of the arm plus the derived inertia terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotParams {
    pub l1: f64,
    pub l2: f64,
    pub m1: f64,
    pub m2: f64,
    pub d1: f64,
    pub d2: f64,
    i1: f64,
    i2: f64,
    j1: f64,
    j2: f64,
    s: f64,
}

impl RobotParams {
    pub fn new(l1: f64, l2: f64, m1: f64, m2: f64, d1: f64, d2: f64) -> Result<Self, ModelError> {
        for (name, value) in [("l1", l1), ("l2", l2), ("m1", m1), ("m2", m2), ("d1", d1), ("d2", d2)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::BadParam { name, value });
            }
        }
        Ok(Self::derive(l1, l2, m1, m2, d1, d2))
    }

    /// Like [`RobotParams::new`] but allows zero friction, for conservation
    /// checks.
    pub fn frictionless(l1: f64, l2: f64, m1: f64, m2: f64) -> Result<Self, ModelError> {
        let p = Self::new(l1, l2, m1, m2, 1.0, 1.0)?;
        Ok(Self { d1: 0.0, d2: 0.0, ..p })
    }

    fn derive(l1: f64, l2: f64, m1: f64, m2: f64, d1: f64, d2: f64) -> Self {
        let i1 = m1 * l1 * l1 / 3.0;
        let i2 = m2 * l2 * l2 / 3.0;
        Self {
            l1,
            l2,
            m1,
            m2,
            d1,
            d2,
            i1,
            i2,
            j1: i1 + (m1 + 4.0 * m2) * l1 * l1,
            j2: i2 + m2 * l2 * l2,
            s: 2.0 * m2 * l1 * l2,
        }
    }

    /// l1 = l2 = 0.25 m, m1 = m2 = 1 kg, D1 = D2 = 0.5 N·m·s.
    pub fn nominal() -> Self {
        Self::derive(0.25, 0.25, 1.0, 1.0, 0.5, 0.5)
    }

    /// The 60 % uncertain plant: l1 = l2 = 0.15 m, m1 = 0.7 kg, m2 = 0.4 kg,
    /// friction unchanged.
    pub fn uncertain() -> Self {
        Self::derive(0.15, 0.15, 0.7, 0.4, 0.5, 0.5)
    }

    pub fn i1(&self) -> f64 {
        self.i1
    }
    pub fn i2(&self) -> f64 {
        self.i2
    }
    pub fn j1(&self) -> f64 {
        self.j1
    }
    pub fn j2(&self) -> f64 {
        self.j2
    }
    /// Coupling coefficient `2 m2 l1 l2`.
    pub fn s(&self) -> f64 {
        self.s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointState {
    pub theta: Vec2,
    pub theta_dot: Vec2,
}

impl JointState {
    pub fn rest() -> Self {
        Self::default()
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().chain(&self.theta_dot).all(|v| v.is_finite())
    }
}

pub fn inertia(p: &RobotParams, theta2: f64) -> Mat2 {
    let c = theta2.cos();
    let off = p.j2 + p.s * c;
    Mat2([[p.j1 + p.j2 + 2.0 * p.s * c, off], [off, p.j2]])
}

/// Centripetal and Coriolis torque.
pub fn coriolis(p: &RobotParams, st: &JointState) -> Vec2 {
    let [w1, w2] = st.theta_dot;
    let sn = st.theta[1].sin();
    [-p.s * (2.0 * w1 * w2 + w2 * w2) * sn, p.s * w1 * w1 * sn]
}

pub fn friction(p: &RobotParams, theta_dot: Vec2) -> Vec2 {
    [p.d1 * theta_dot[0], p.d2 * theta_dot[1]]
}

/// `H + D θ̇`, everything on the left-hand side besides `M θ̈`.
pub fn bias_torque(p: &RobotParams, st: &JointState) -> Vec2 {
    add(coriolis(p, st), friction(p, st.theta_dot))
}

/// `θ̈ = M⁻¹ (τ − H − D θ̇)`.
pub fn forward_dynamics(p: &RobotParams, st: &JointState, torque: Vec2) -> Result<Vec2, ModelError> {
    let minv = inertia(p, st.theta[1]).inverse()?;
    Ok(minv.mul_vec(sub(torque, bias_torque(p, st))))
}

/// `dM/dt` along the motion.
pub fn inertia_dot(p: &RobotParams, theta2: f64, theta2_dot: f64) -> Mat2 {
    let a = -p.s * theta2.sin() * theta2_dot;
    Mat2([[2.0 * a, a], [a, 0.0]])
}

/// `d(M⁻¹)/dt = −M⁻¹ Ṁ M⁻¹`.
pub fn inertia_inv_dot(p: &RobotParams, theta2: f64, theta2_dot: f64) -> Result<Mat2, ModelError> {
    let minv = inertia(p, theta2).inverse()?;
    Ok(minv.mul(&inertia_dot(p, theta2, theta2_dot)).mul(&minv).scale(-1.0))
}

/// Time derivative of [`coriolis`] given the accelerations.
pub fn coriolis_dot(p: &RobotParams, st: &JointState, theta_ddot: Vec2) -> Vec2 {
    let [w1, w2] = st.theta_dot;
    let [a1, a2] = theta_ddot;
    let (sn, c) = st.theta[1].sin_cos();
    let h1 = -p.s * (2.0 * a1 * w2 + 2.0 * w1 * a2 + 2.0 * w2 * a2) * sn
        - p.s * (2.0 * w1 * w2 + w2 * w2) * c * w2;
    let h2 = 2.0 * p.s * w1 * a1 * sn + p.s * w1 * w1 * c * w2;
    [h1, h2]
}

/// Time derivative of [`bias_torque`].
pub fn bias_torque_dot(p: &RobotParams, st: &JointState, theta_ddot: Vec2) -> Vec2 {
    add(coriolis_dot(p, st, theta_ddot), friction(p, theta_ddot))
}

/// End-effector position in the plane.
pub fn fk_endeffector(p: &RobotParams, theta: Vec2) -> (f64, f64) {
    let a = theta[0] + theta[1];
    (
        p.l1 * theta[0].cos() + p.l2 * a.cos(),
        p.l1 * theta[0].sin() + p.l2 * a.sin(),
    )
}

/// Kinetic energy `½ θ̇ᵀ M θ̇`.
pub fn mech_energy(p: &RobotParams, st: &JointState) -> f64 {
    let mv = inertia(p, st.theta[1]).mul_vec(st.theta_dot);
    0.5 * (st.theta_dot[0] * mv[0] + st.theta_dot[1] * mv[1])
}
