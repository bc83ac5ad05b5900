//! Harmonic fields under Lorentz boosts: kinematics, boosted field evaluation,
//! spectral extraction, equation certification and reference PDE solvers.

pub mod cli;
pub mod error;
pub mod fields;
pub mod fit;
pub mod kinematics;
pub mod pde;
pub mod profile;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use fields::{FieldSpec, HarmonicComponent, MassParameters};
pub use kinematics::{BoostParameters, FourPosition};
pub use profile::AmplitudeProfile;
