//! Equatorial waves on the betaplane: the eigenbasis of the rotation operator,
//! wave resonances, and solvers for the fast-rotation shallow-water system in
//! filtered form and for its resonant limit.

pub mod cli;
pub mod dispersion;
pub mod eigenbasis;
pub mod error;
pub mod fields;
pub mod hermite;
pub mod operators;
pub mod resonance;
pub mod solver;

pub use dispersion::{classify, roots, ModeIndex, RootTriple, WaveClass};
pub use eigenbasis::{apply_l, build_mode, Basis, EigenMode, Overflow};
pub use error::{Error, Result};
pub use fields::{ModeCoefficients, ModeLayout, SpectralField, Truncation};
pub use hermite::HermiteContext;
pub use operators::{DiffusionMatrix, GeostrophicDiffusion, InteractionTensor, TensorBuilder};
pub use resonance::{ResonantSet, TriadClass, TriadRecord};
