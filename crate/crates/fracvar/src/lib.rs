//! Estimation of the Hurst index and of noise-vector-field coefficients of
//! fractional diffusions from a single discretely observed sample path.
//!
//! The crate provides four layers, each usable on its own:
//!
//! * [`fbm`] — exact sampling of fractional Brownian motion on dyadic grids
//!   via Davies–Harte circulant embedding, plus the analytic covariance.
//! * [`variation`] — dyadic partitions, subsampling, and scaled quadratic
//!   variation / covariation of sampled paths.
//! * [`rde`] — a third-order Runge–Kutta solver for multi-noise diffusions
//!   driven by piecewise-linear paths, and the exact solution of the
//!   commuting 2d linear system.
//! * [`estimators`] — the scaling-exponent / Hurst estimators and
//!   least-squares recovery of the noise coefficients, with known or
//!   estimated Hurst index.
//!
//! [`harness`] ties these together into reproducible convergence experiments
//! with box-plot statistics, exposed on the command line as `fracvar`.
//!
//! ```
//! use fracvar::{estimators, fbm, variation};
//!
//! let request = fbm::FbmSampleRequest {
//!     hurst: fbm::HurstIndex::new(0.7)?,
//!     num_components: 1,
//!     fine_level: 10,
//!     horizon: 1.0,
//!     seed: 7,
//! };
//! let path = fbm::sample_fbm(&request)?;
//! let hurst = estimators::estimate_hurst(&path, 8)?;
//! assert!((hurst.value - 0.7).abs() < 0.2);
//!
//! // The scaled quadratic variation at the non-trivial exponent tends to t.
//! let qv = variation::total_scaled_qv(&path, 1.0 - 2.0 * 0.7);
//! assert!((qv - 1.0).abs() < 0.5);
//! # Ok::<(), fracvar::Error>(())
//! ```

mod error;

pub mod estimators;
pub mod fbm;
pub mod harness;
pub mod rde;
pub mod variation;

pub use error::{Error, Result};
pub use estimators::{
    build_design, estimate_hurst, estimate_scaling_exponent, estimate_theta_known_hurst,
    estimate_theta_unknown_hurst, solve_theta, DesignSystem, HurstEstimate, ThetaEstimate,
};
pub use fbm::{fbm_covariance, sample_fbm, FbmSampleRequest, HurstIndex, SampledPath};
pub use rde::{field_action, solve_2d_linear_exact, solve_heun3, RdeProblem, VectorFieldSet};
pub use variation::{scaled_cov, scaled_qv, subsample, total_scaled_qv, ScaledVariationCurve};
