//! Wavelet density estimation under Besov integral probability metric losses.
//!
//! The crate is organised bottom-up: [`wavelet`] builds orthonormal bases,
//! [`coeff`] works in coefficient space (Besov norms, the exact dual IPM),
//! [`estimation`] implements the linear and hard-thresholded estimators,
//! [`rates`] evaluates closed-form minimax exponents, [`adversarial`]
//! audits lower-bound constructions, [`sampling`] draws reproducible
//! samples and [`experiments`] ties everything into a Monte-Carlo harness.

pub mod adversarial;
pub mod coeff;
pub mod error;
pub mod estimation;
pub mod experiments;
mod filters;
pub mod rates;
pub mod sampling;
pub mod util;
pub mod wavelet;

pub use coeff::{besov_norm, dual_ipm, extremal_witness, BesovBall, CoefficientTree, UniformGrid};
pub use error::{Error, Result};
pub use wavelet::{Family, WaveletBasis, WaveletIndex};
