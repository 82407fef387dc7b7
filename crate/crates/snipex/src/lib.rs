//! Runtime half of snipex: everything that touches files, processes, the
//! network or a database. The algorithms themselves live in `snipex_core`.

pub mod config;
pub mod coordinator;
pub mod error;
pub mod ingest;
pub mod local;
pub mod report;
pub mod resolver;
pub mod sandbox;
pub mod store;
pub mod wire;
pub mod worker;

pub use error::{Error, Result};
