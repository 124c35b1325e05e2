//! Finite-truncation numerics for focusing NLS Gibbs measures on the circle
//! with an `L²` cutoff: Gaussian field samplers, Gibbs log-weights, Hessians
//! of the regularized Hamiltonian with Bakry–Émery bounds, Monte Carlo and
//! Boué–Dupuis variational estimators, and the experiment drivers built on
//! them.

pub mod boue_dupuis;
pub mod eigen;
pub mod error;
pub mod experiments;
pub mod hessian;
pub mod io;
pub mod mc;
pub mod measures;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
pub use measures::GibbsParams;
pub use rng::RngStream;
pub use spectral::{SpectralField, SpectralSpace};
