//! Continuous-variable state benchmarking in a truncated Fock basis.
//!
//! The crate builds non-Gaussian states (photon-subtracted squeezed vacua,
//! squeezed Fock states, cat states), computes their Wigner functions and
//! integrated negativity, and measures how quickly their displacement fidelity
//! decays along every phase-space direction.

pub mod bench;
pub mod error;
pub mod expm;
pub mod fock;
pub mod matching;
pub mod response;
pub mod spec;
pub mod wigner;

pub use error::{Error, Result};
pub use fock::{FockVector, SqueezeParams};
pub use matching::{Family, MatchSolution};
pub use spec::{StateFamily, StateSpec};

/// Shortest round-trip-stable rendering used in every tabular export.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
