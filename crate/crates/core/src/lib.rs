//! Frequency-domain reduced-order modeling of parametric parabolic PDEs.
//!
//! Time is Fourier-transformed into a frequency parameter, the resulting
//! complex elliptic problems are split by a two-subdomain Schur complement,
//! and every parametric piece (local Schur complements, interface solution,
//! interior solutions) is approximated by a greedy variable-separation
//! expansion whose coefficients are cheap to evaluate online.

pub mod artifact;
pub mod bench;
pub mod complex_vs;
pub mod error;
pub mod frequency;
pub mod interface_rom;
pub mod linalg;
pub mod mesh_fem;
pub mod model;
pub mod reference;
pub mod schur_dd;
pub mod subdomain_rom;

pub use error::{Error, Result};
