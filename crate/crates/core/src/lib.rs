//! EEG distraction detection from a single electrode: packet ingestion,
//! spectral and wavelet features, the distraction index, classifiers,
//! nonparametric statistics, streaming alerts and a synthetic generator.

// `!(x > 0.0)` style checks are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arff;
pub mod classify;
pub mod dsp;
pub mod error;
pub mod index;
pub mod model;
pub mod protocol;
pub mod session_io;
pub mod stats;
pub mod stream;
pub mod synth;

pub use error::{Error, Result};
