//! Generative models over fixed-length token sequences — tensor-network
//! factorizations (nonnegative MPS, Born machines, locally purified states)
//! and an MLP GAN baseline — together with the machinery to train them,
//! sample them, and compare the samples: Fréchet feature distance,
//! fidelity/novelty under criteria filters, and the exact hypervolume
//! indicator over multiple objectives, plus fold-based model combination and
//! exhaustive subset selection.
//!
//! All numeric code is generic over the scalar type via [`Scalar`]
//! (`f32`/`f64`); the complex model kinds plug in `num_complex::Complex<T>`
//! through [`Amplitude`]. The concrete aliases below pin the default
//! double-precision instantiations.

pub mod adam;
pub mod checkpoint;
pub mod data;
pub mod fsio;
pub mod gan;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod scalar;
pub mod tn;
pub mod train;

pub use scalar::{Amplitude, Scalar};

/// Default scalar type.
pub type Real = f64;

pub type TnModel64 = tn::TnModel<f64>;
pub type TnModel32 = tn::TnModel<f32>;
pub type GanModel64 = gan::GanModel<f64>;
pub type GanModel32 = gan::GanModel<f32>;
