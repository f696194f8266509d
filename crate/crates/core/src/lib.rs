//! Classical Gaussian field ensembles on a truncated real Hilbert space and
//! their correspondence with quantum trace-formula averages.
//!
//! The crate is organized bottom-up:
//!
//! * [`linalg`]: vectors, symmetric operators, Jacobi eigendecomposition.
//! * [`gaussian`]: zero-mean Gaussian states, scaling, seeded sampling.
//! * [`forms`] and [`functional`]: symmetric multilinear forms and the
//!   classical variables built from them.
//! * [`wick`]: pairing enumeration and Gaussian moment contractions.
//! * [`quantum`]: density operators and the correspondence map.
//! * [`experiment`]: Monte-Carlo and analytic experiment drivers.
//! * [`io`] and [`runner`]: configuration, manifests, CSV output.

pub mod error;
pub mod experiment;
pub mod forms;
pub mod functional;
pub mod gaussian;
pub mod io;
pub mod linalg;
pub mod quantum;
pub mod runner;
pub mod stats;
pub mod wick;

pub use error::{Error, Result};
pub use forms::SymmetricForm;
pub use functional::Functional;
pub use gaussian::{AlphaClass, GaussianState, SampleBatch, ToleranceMode};
pub use linalg::{FieldVector, HilbertDim, SpectralDecomposition, SymmetricOperator};
pub use quantum::{DensityOperator, ObservableMultiple};
