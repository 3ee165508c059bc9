//! Numerical toolkit for controlled rough paths driven by Gaussian signals.
//!
//! The layers build on each other:
//!
//! * [`tensor`]: truncated tensor algebra and grid rough paths,
//! * [`gaussian`]: exact fBm sampling, piecewise-linear lifts, Cameron–Martin elements,
//! * [`controls`]: partition-sup control tables and greedy points,
//! * [`spectral`]: the scale E_α and the evolution family U_{t,s},
//! * [`controlled`]: Gubinelli levels, remainders and their norms,
//! * [`sewing`]: dyadic rough integrals, Young sewing and drift convolution,
//! * [`solver`]: Picard solution of the mild equation and the a-priori bound,
//! * [`translation`]: translated rough paths T_h(X),
//! * [`experiments`]: configuration, Monte Carlo tail and moment studies, CSV/SVG output.

pub mod controlled;
pub mod controls;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod gaussian;
pub mod sewing;
pub mod solver;
pub mod spectral;
pub mod tensor;
pub mod translation;

pub use error::{Result, RoughError};
pub use exec::Execution;
