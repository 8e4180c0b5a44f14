//! Photon-polarization dephasing in a birefringent crystal.
//!
//! The crate models the polarization of a photon as a qubit whose frequency
//! distribution acts as the environment. From a (fitted or preset) optical
//! spectrum it builds the decoherence factor κ, the process matrix of the
//! resulting dephasing channel, and classifies the dynamics with five
//! non-Markovianity criteria:
//!
//! * composition/robustness based criteria (`W` and `N`), using a small
//!   dense conic solver ([`quantumness`]),
//! * trace-distance revival (BLP), concurrence revival (RHP) and
//!   mutual-information revival (LFS) ([`criteria`]).
//!
//! Module map:
//!
//! * [`qcore`]: Hermitian eigensolver, density matrices, entropies, concurrence.
//! * [`spectra`]: Gaussian-mixture spectra, CSV ingest, Levenberg–Marquardt fit, presets.
//! * [`dynamics`]: κ, process/Choi matrices, composition, oracles.
//! * [`quantumness`]: classical-process set, cone solver, α and β.
//! * [`criteria`]: positive variation and the five criteria.

pub mod criteria;
pub mod dynamics;
pub mod error;
pub mod qcore;
pub mod quantumness;
pub mod spectra;

pub use error::{Error, Result};
