//! Tracking of dynamic outdoor scatterers from a refracting/reflecting
//! surface, and beam prediction for the indoor user it serves.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: coordinates, planar-array steering vectors and the
//!   position-to-angle measurement map with its Jacobian.
//! - [`scene`]: ground-truth scatterer timeline, RCS classes, dynamic-path
//!   identification and noisy measurement sets.
//! - [`channel`]: geometric path synthesis and received-signal models.
//! - [`gmphd`]: the Gaussian-mixture PHD filter with EKF linearisation.
//! - [`beam`]: track-driven BS beamforming, surface phase design, mismatch
//!   detection and path-collision prediction.
//! - [`harness`]: scenario configuration, the per-period simulation loop,
//!   metrics, Monte-Carlo sweeps and report output.

pub mod beam;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod gmphd;
pub mod harness;
pub mod scene;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
