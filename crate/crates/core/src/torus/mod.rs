//! The flat torus `R^{4n} / Z^{4n}` with its standard hypercomplex
//! structure, discretized spectrally on a subset of active coordinates.

mod field;
mod forms;
mod grid;
mod harmonic;
pub mod io;

use thiserror::Error;

pub use field::{complex_derivative, spectral_derivative, ScalarField};
pub use forms::{
    complex_hessian, del, del_and_del_j_components, del_bar, del_del_j, del_j, density_of,
    gradient_energy, gradient_energy_coordinate, ma_density, ma_density_eigen, ma_density_exterior,
    omega_phi, relative_eigenvalues, trace_weights, two_form_of_hessian, wedge_pair_ratio,
    FormField, TwoFormField,
};
pub use grid::{SpectralGrid, MAX_SAMPLES};
pub use harmonic::{band_limited, Harmonic, HarmonicSum};

#[derive(Debug, Error)]
pub enum TorusError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("expected {expected} samples, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },
    #[error("malformed field file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
