//! Besov-type sequence and function spaces on multiscale grids.
//!
//! The crate is organized bottom-up: [`grid`] builds and checks multiscale index sets,
//! [`seq`] evaluates the `b^α_{p,q}` quasi-norms on them, [`admat`] handles almost-diagonal
//! matrices, [`geometry`] and [`wavelet`] provide patchwise spline wavelet systems, and
//! [`funcspace`] / [`nterm`] run change-of-basis and approximation experiments.

pub mod admat;
pub mod error;
pub mod funcspace;
pub mod fit;
pub mod geometry;
pub mod grid;
pub mod nterm;
pub mod quad;
pub mod report;
pub mod seq;
pub mod wavelet;

pub use error::{Error, Result};
