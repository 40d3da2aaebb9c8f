//! Command-line front end for the federated-learning scheduling
//! simulator: run experiments, sweep parameters, and compare strategies.
//!
//! Everything the binary does is exposed as library functions so the
//! pipeline (run, trace, summarize, compare) stays testable.

pub mod compare;
pub mod error;
pub mod run;
pub mod summary;
pub mod sweep;
pub mod trace;

pub use error::CliError;
