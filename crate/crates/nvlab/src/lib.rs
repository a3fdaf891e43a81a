// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics_lab;
pub mod cli_runner;
pub mod cplane_quadrature;
pub mod dbar_solver;
pub mod error;
pub mod linearized_flow;
pub mod phase_geometry;
pub mod scattering_data;

pub use error::{NvError, Result};
