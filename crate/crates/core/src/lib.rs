//! Neumann-Neumann and Dirichlet-Neumann waveform relaxation for the 1D
//! heat equation, in classical and pipeline-parallel orderings.
//!
//! The solvers run one thread per logical worker and exchange interface
//! waveforms through tagged in-process channels. A deterministic schedule
//! simulator and a set of reference solutions support the test suite.

pub mod dnwr;
pub mod error;
pub mod grid;
pub mod measure;
pub mod heat;
pub mod nnwr;
pub mod oracle;
pub mod problem;
pub mod report;
pub mod runtime;
pub mod schedule;
pub mod traces;
pub mod transport;

pub use error::{Error, Result};
pub use heat::FluxStencil;
pub use grid::{decompose, Decomposition, PivotPolicy, SpaceTimeGrid};
pub use problem::HeatProblem;
pub use report::RunReport;
pub use traces::{InitialGuess, TraceSet};

// The guide's code blocks run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/grid.md")]
    mod grid {}
    #[doc = include_str!("../../../book/src/nnwr.md")]
    mod nnwr {}
    #[doc = include_str!("../../../book/src/dnwr.md")]
    mod dnwr {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/schedule.md")]
    mod schedule {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
