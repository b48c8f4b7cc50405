//! Detection of gait intention from the instantaneous phase and amplitude of
//! movement-related cortical potentials (MRCPs).
//!
//! The crate is `no_std` + `alloc`. It holds the numerical pipeline only:
//!
//! ```text
//! Recording ──filtfilt──▶ onsets ──reject──▶ Epoch (−6..0 s)
//!                                             │
//!                       analytic signal ◀─────┤
//!                        │                    │
//!            phase (cos/sin) features   amplitude features
//!                        │                    │
//!                        └──▶ RBF-SVM + Platt ◀┘ ──▶ LDA fusion
//!                                             │
//!                       nested chronological CV, threshold selection
//!                                             │
//!                     ROC/AUC, kappa, trial metric, detection latency
//! ```
//!
//! File formats, configuration and the command-line front end live in the
//! companion `mrcp` crate. A ground-truth session generator ([`synth`]) lets
//! the whole chain run without recorded data.
//!
//! Enable the `parallel` feature to spread grid-search cells over a rayon
//! pool; results are identical either way.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod dsp;
pub mod error;
pub mod eval;
pub mod features;
pub mod learn;
mod linalg;
pub mod model;
pub mod preprocess;
pub mod synth;

pub use error::{Error, Result};
pub use model::{Epoch, Event, EventKind, Recording, SessionSet};
