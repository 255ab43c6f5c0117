//! Numerical evaluation of Michael-Simon type Sobolev inequalities for
//! symmetric positive-definite tensor fields on discretized submanifolds,
//! together with an executable ABP (Alexandrov-Bakelman-Pucci) construction.

pub mod abp;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod poly;
pub mod scenarios;
pub mod sobolev;
pub mod stencil;
pub mod tensorfield;

pub use error::{Error, Result};
