//! Frequency estimation of multiple complex sinusoids from sub-Nyquist
//! sampling channels whose undersampling ratios are pairwise coprime.
//!
//! - [`signal`] synthesizes the noisy multi-tone signal and samples it on
//!   each channel.
//! - [`ambiguity`] unfolds aliased frequencies, matches candidates across
//!   two channels and predicts when that matching is ambiguous.
//! - [`music`] assembles joint multi-channel snapshots and runs MUSIC on
//!   them.
//! - [`harness`] reproduces the matching, indistinguishability and
//!   channel-subset experiments and runs Monte Carlo sweeps.

pub mod ambiguity;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod music;
pub mod signal;

pub use error::{Error, Result};
pub use num_complex::Complex64;
