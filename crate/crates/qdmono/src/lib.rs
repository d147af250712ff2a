//! Model files, verification reports, SVG figures and the command-line driver around `qdmono-core`.

pub mod cli;
pub mod model_file;
pub mod report;
pub mod svg;
pub mod verify;

use qdmono_core::frobenius::ModelError;
use qdmono_core::ktheory::KError;
use qdmono_core::paths::PathError;
use qdmono_core::periods::PeriodError;
use qdmono_core::stokes::StokesError;

/// Engine version, `git describe` style.
pub const VERSION: &str = env!("QDMONO_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid model: {0}")]
    Model(#[from] ModelError),
    #[error("{0}")]
    Period(#[from] PeriodError),
    #[error("{0}")]
    Stokes(#[from] StokesError),
    #[error("{0}")]
    Path(#[from] PathError),
    #[error("{0}")]
    KTheory(#[from] KError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}
