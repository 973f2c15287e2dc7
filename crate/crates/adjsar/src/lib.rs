//! Adjusted quasi-maximum likelihood estimation for spatial autoregressive models.
//!
//! The crate covers the whole pipeline: weights matrices and random graph
//! generators, spectral analysis of `W` (real eigenvalues, spectral projectors,
//! the parameter spaces `Λ` and `Λ_a`), the SAR likelihoods and scores, the
//! QMLE / adjusted QMLE estimators, saddlepoint and Wald confidence intervals,
//! the network fixed-effects and spatial error models, and a Monte Carlo
//! harness.

pub mod error;
pub mod estimate;
pub mod fixtures;
pub mod infer;
pub mod io;
pub mod linalg;
pub mod mc;
pub mod optim;
pub mod panels;
pub mod rng;
pub mod sar;
pub mod spectral;
pub mod weights;

pub use error::{Error, Result};
pub use estimate::{EstimateFlags, EstimateResult, Method};
pub use infer::{CdfApprox, CdfBranch, QformSpec};
pub use panels::{NetworkPanel, SemModel};
pub use sar::{ErrorDist, SarData, SarParams};
pub use spectral::{EndpointClass, ParamSpace, RealEigenvalue, SpectralInfo, SpectralProjector};
pub use weights::{AdjacencyMatrix, Normalization, WeightsMatrix};
