pub mod deblur;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod lls;
pub mod metrics;
pub mod numerics;
pub mod pgm;
pub mod sensing;
pub mod spectral;
pub mod system;
pub mod verify;

pub use error::{Error, Result};
pub use lls::{solve_lls, LlsConfig, SolveReport};
pub use metrics::{rel_error_report, ErrorReport};
pub use numerics::{RandomStream, C64};
pub use sensing::{SensingKind, SensingSpec};
pub use spectral::{solve_spectral, SpectralConfig};
pub use system::{ModelKind, ProblemConfig, ProblemInstance, StackedSystem};
