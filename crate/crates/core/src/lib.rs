//! Numerical laboratory for the Gaussian entire function
//! `G(z) = Σ ξₙ zⁿ / √n!` and its covariant derivative `F = z̄G − ∂G`.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: complex Gaussian vectors (Cholesky, regression, sampling).
//! * [`kernel`]: exact covariance kernels of derivative functionals.
//! * [`field`]: truncated samples and weighted jet evaluation.
//! * [`landmarks`]: zeros and critical points, index classification.
//! * [`estimators`]: Monte Carlo moments and exponent fits.
//! * [`kacrice`]: two-point Kac–Rice intensities by conditioned sampling.
//! * [`spectrogram`]: Gaussian-window STFT of white noise.

pub mod estimators;
pub mod field;
pub mod io;
pub mod kacrice;
pub mod kernel;
pub mod landmarks;
pub mod linalg;
pub mod rng;
pub mod spectrogram;
pub mod stats;

pub use num_complex::Complex64 as C64;

pub use estimators::{ExponentFit, PairKind, RadialProfile};
pub use field::{GefSample, JetEvaluator, WeightedJet};
pub use kernel::{DerivDescriptor, PolyExpKernel};

pub use landmarks::{Landmark, LandmarkKind, LandmarkSet};
pub use linalg::{CholFactor, ComplexNormalSample, HermitianCov};
pub use rng::StreamRng;
