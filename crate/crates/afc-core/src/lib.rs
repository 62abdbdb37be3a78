//! Simulation and scheduling library for atomic-frequency-comb optical
//! memories in rare-earth-doped crystals: spectral hole burning, optical
//! pumping dynamics, echo propagation, commensurate field search, and RF
//! pump-sequence compilation.

// Validation deliberately uses `!(x > 0.0)` so NaN fails closed.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod afc;
pub mod commensurate;
pub mod error;
pub mod material;
pub mod pumping;
pub mod seqcompile;
pub mod spectrum;

pub use afc::{AfcSpec, CombMetrics, CountStats, EchoTrace, Pulse};
pub use commensurate::{CommensurateResidues, FieldCandidate, MismatchMap};
pub use error::{Error, Result};
pub use material::{FieldConfig, HolePattern, IonClass};
pub use pumping::{NoiseModel, PulseTrain, PumpResult, PumpTarget, Window};
pub use seqcompile::{HardwareLimits, RFSchedule};
pub use spectrum::{Grid, Spectrum};
