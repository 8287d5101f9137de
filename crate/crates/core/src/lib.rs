pub mod corpus;
pub mod error;
pub mod features;
pub mod graph;
pub mod pipeline;
pub mod scaler;
pub mod synth;

pub use error::{Error, ErrorKind, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
