#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod discretize;
pub mod error;
pub mod evolve;
pub mod expr;
pub mod model;
pub mod periodic;
pub mod r0;
pub mod spectral;
pub mod zika;

pub use error::{Error, Result};
pub use evolve::EPS_POS;
