//! Structure-preserving discretisation of SKT-type cross-diffusion systems
//! and the reversible particle model behind them.
//!
//! * [`model`]: parameters, detailed balance, micro/macro rate conversion.
//! * [`grid`]: periodic grid functions, difference operators, P1 interpolants.
//! * [`master`]: the semi-discrete system, its solver and entropy diagnostics.
//! * [`particles`]: exact stochastic simulation and the enumerated oracle.
//! * [`meanfield`]: the mean-field equation and propagation-of-chaos studies.
//! * [`convergence`]: grid refinement, weak residuals and monitors.
//! * [`config`], [`output`], [`app`]: the batch front end.

// `!(x > 0.0)` is how NaN gets rejected throughout
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod app;
pub mod config;
pub mod convergence;
pub mod grid;
pub mod master;
pub mod meanfield;
pub mod model;
pub mod output;
pub mod particles;
