//! Direct and inverse Sturm-Liouville spectral problems on `[0, π]` with
//! Robin boundary conditions.

pub mod error;
pub mod forward;
pub mod gelfand_levitan;
pub mod grid;
pub mod harness;
pub mod io;
pub mod types;

pub use error::{Error, Result};
pub use forward::{CharacteristicValue, Direction, ForwardSolver, SolutionTrace};
pub use grid::Grid;
pub use harness::{CertificateReport, TheoremId, Tolerances, Verdict};
pub use types::{OperatorSpec, PerturbationSeq, Potential, RobinAngles, SpectralDatum, SpectrumTable};
