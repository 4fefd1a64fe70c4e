//! Fractional-order synchronization of delayed two-link manipulators.
//!
//! * [`frac_ops`]: Grünwald–Letnikov operators, batch and streaming.
//! * [`robot_model`]: planar two-link arm dynamics.
//! * [`dde_sim`]: RK4 simulation with dead-time actuators.
//! * [`controllers`]: PD, fractional dynamic sliding mode and classical SMC.
//! * [`chaos_kit`]: Lyapunov, Poincaré and bifurcation diagnostics.

// Negated float comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chaos_kit;
pub mod controllers;
pub mod dde_sim;
pub mod frac_ops;
pub mod robot_model;
