//! Energy spectra and wavefunctions of two ultracold atoms interacting through
//! an s-wave Fermi pseudopotential inside an axisymmetric harmonic trap.
//!
//! Everything inside the library works in trap units: energies in ħω and
//! lengths in d = √(ħ/μω), where ω is the mean-square trap frequency.
//! Physical units appear only in [`trapgeom`] and at the CLI boundary.

pub mod blocktri;
pub mod busch;
pub mod cli;
pub mod eigensolve;
pub mod error;
pub mod hamiltonian;
pub mod lanczos;
pub mod lowdim;
pub mod pchip;
pub mod quad;
pub mod roots;
pub mod selfconsistent;
pub mod specfun;
pub mod trapgeom;
pub mod wavefn;

pub use error::{Error, Result};
