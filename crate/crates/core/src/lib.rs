//! Kernel methods with random Fourier features.
//!
//! The crate covers exact kernels and Gram matrices ([`kernels`]), frequency
//! samplers for shift-invariant kernels ([`spectral`]), the trigonometric
//! feature maps built from them ([`features`]), linear and kernel ridge
//! solvers ([`regression`]) and synthetic benchmark data ([`data`]).
//!
//! ```
//! use rff_core::{kernels::KernelSpec, spectral, features, seeded_rng};
//! use nalgebra::DMatrix;
//!
//! let spec = KernelSpec::squared_exponential(1.0, 1.0);
//! let x = DMatrix::from_row_slice(2, 1, &[0.0, 0.5]);
//! let omega = spectral::sample_frequencies_iid(&spec, 2048, 1, &mut seeded_rng(7)).unwrap();
//! let phi = features::feature_map(&x, &omega).unwrap();
//! let k = features::approx_kernel(&phi).unwrap();
//! assert!((k[(0, 1)] - (-0.125f64).exp()).abs() < 0.1);
//! ```

pub mod data;
pub mod error;
pub mod features;
pub mod kernels;
mod linalg;
pub mod par;
pub mod regression;
pub mod special;
pub mod spectral;

pub use error::{Error, Result};
pub use linalg::MAX_CONDITION;
pub use par::Parallelism;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Row-major-agnostic `N x d` design matrix.
pub type DesignMatrix = nalgebra::DMatrix<f64>;

/// The generator used throughout the crate and its tests.
pub type Rng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// An independent stream of the generator seeded with `seed`.
///
/// Experiments that need several decorrelated draws per seed (data, split,
/// frequencies) take one stream each so adding a draw to one stage never
/// shifts the others.
pub fn seeded_stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
