//! Quantum measurements as instruments: outcome-labelled completely positive
//! maps, their composition, and the decomposition of every outcome into an
//! ideal measurement followed by a channel.
//!
//! Matrices are dense `nalgebra` complex matrices ([`matkit::Matrix`]).
//! Numerical comparisons take a [`Tolerance`].

pub mod channels;
pub mod error;
pub mod harness;
pub mod lemma;
pub mod matkit;
pub mod measure;
pub mod states;
pub mod tol;

pub use channels::{ChoiMatrix, KrausChannel, LinearMap, QuantumMap, Superoperator};
pub use error::{Error, Result};
pub use matkit::{Matrix, C64};
pub use measure::{Effect, Instrument, Povm};
pub use states::{BipartiteState, DensityOperator, Ensemble};
pub use tol::Tolerance;
