//! Completion of positive low-rank matrices from local determinantal
//! circuits.
//!
//! The local estimators ([`rank1`], [`rankr`]) solve small minors through a
//! target entry and merge the candidate values with inverse-squared
//! deviation weights ([`combine`]). Their output seeds the spectral
//! meta-algorithms in [`spectral`]; [`baselines`] holds the nuclear-norm and
//! Riegel comparison methods.
//!
//! Per-entry and per-row work fans out over rayon when the default
//! `parallel` feature is enabled; without it the same code runs
//! sequentially and produces identical results.

pub mod baselines;
pub mod combine;
pub mod error;
pub mod io;
pub mod linalg;
pub mod matrix;
pub mod metrics;
pub mod par;
pub mod rank1;
pub mod rankr;
pub mod record;
pub mod seed;
pub mod simgen;
pub mod spectral;

pub use combine::{combine_min_variance, Candidate, EntryEstimate};
pub use error::{CompletionError, Result};
pub use matrix::{Completion, Grid, Mask, MaskedMatrix};
pub use record::ExperimentRecord;
pub use simgen::{NoiseKind, SimConfig, SimDraw};
