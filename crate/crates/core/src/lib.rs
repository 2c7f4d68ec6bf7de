//! Numerical laboratory for the weakly disordered Anderson model on the
//! periodic lattice `Z^d_L`.

pub mod acceptance;
pub mod cli;
pub mod continuum;
pub mod disorder;
pub mod ensemble;
pub mod error;
pub mod lattice;
pub mod sce;
pub mod spectra;
pub mod spectral;
pub mod util;

pub use error::{Error, Result};
