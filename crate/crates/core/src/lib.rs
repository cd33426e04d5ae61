//! Geometric multigrid for lowest-order hexahedral Nédélec discretizations of
//! `curl(alpha curl u) + beta u = f` on lattice domains, with nonoverlapping
//! edge- and vertex-based Schwarz smoothers and a contraction-number harness.

pub mod assembly;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod mesh;
pub mod patches;
pub mod scalar;
pub mod smoother;
pub mod spectral;
pub mod transfer;
pub mod vcycle;

pub use assembly::{assemble, CoefficientField, Color, DofMap, ElementMatrices};
pub use error::{MgError, Result};
pub use linalg::{CholeskyFactor, CsrMatrix, DenseMatrix, SparseSym};
pub use mesh::{Axis, Domain, EntityKey, EntityKind, LatticeMesh};
pub use scalar::Scalar;
pub use smoother::{SchwarzSmoother, SmootherConfig, SmootherKind};
pub use spectral::{contraction_number, PowerOptions, SpectralResult};
pub use transfer::TransferOperator;
pub use vcycle::{Hierarchy, VCycleConfig};

pub type Hierarchy64 = Hierarchy<f64>;
pub type Hierarchy32 = Hierarchy<f32>;
pub type Matrix64 = SparseSym<f64>;
pub type Smoother64 = SchwarzSmoother<f64>;
