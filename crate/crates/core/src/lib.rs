//! Dependence between random vectors through collapsing functions.
//!
//! Each random vector is collapsed to a scalar (weighted average, extremes,
//! pairwise distance or kernel similarity, multivariate rank, or the
//! multivariate probability integral transform) and a bivariate measure of
//! association is applied to the collapsed pair. The crate also evaluates and
//! samples Kendall distributions and Kendall copulas of Archimedean models,
//! provides asymptotic and bootstrap confidence intervals, and builds the
//! pairwise pseudo-observation panels used for graphical independence checks.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod archimedean;
pub mod assess;
pub mod asymptotics;
pub mod collapse;
pub mod data;
pub mod error;
pub mod kendall;
pub mod measures;
pub mod normal;
pub mod rank;

pub use data::{Group, GroupView, GroupedData, Matrix};
pub use error::{Error, Result};
