//! Solvers for path planning games: chance-constrained single-agent plans,
//! best responses against moving agents, best-response dynamics, the joint
//! social optimum and Monte Carlo validation of the collision bounds.

// `!(x > 0.0)` is used on purpose so NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod game;
pub mod geometry;
pub mod milp;
pub mod montecarlo;
pub mod planner;
pub mod scenario;
pub mod stochastic;

pub use error::{Error, Result};

/// Planar vector (positions, controls, face normals).
pub type Vec2 = nalgebra::Vector2<f64>;
/// 2×2 matrix (dynamics, covariances).
pub type Mat2 = nalgebra::Matrix2<f64>;
