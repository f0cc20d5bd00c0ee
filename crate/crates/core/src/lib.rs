//! Estimating the number of autoregressive modes in a non-stationary time series.
//!
//! The series is modelled as a mixture of `M` stable AR(`L`) filters. For each
//! candidate `M` the mixture is fitted by EM and its one-step prediction error
//! is compared against a data-independent reference curve. The reference is
//! built by k-medoids clustering of filters drawn uniformly from the stable
//! coefficient region under the mean-squared-prediction-error distance. The
//! selected `M` maximises the gap between the two curves.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod error;
pub mod filter_core;
pub mod gapstat;
pub mod io;
pub mod mixture_em;
pub mod sampler;
pub mod seed;
pub mod simgen;

pub use error::{Error, Result};
pub use filter_core::{Filter, RootSet};
