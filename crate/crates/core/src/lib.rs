//! Core algorithms for measuring whether Q&A code snippets execute.
//!
//! Everything in this crate is pure computation over owned data and builds
//! without `std`; process spawning, files, HTTP and persistence live in the
//! companion `snipex` crate.
//!
//! - [`taxonomy`]: the frozen table of status codes.
//! - [`classify`]: mapping a finished execution onto one status code.
//! - [`source`]: turning dump text into a runnable program.
//! - [`imports`]: import-statement counting for environment provisioning.
//! - [`corpus`]: the posts/blocks join that produces snippets.
//! - [`resolve`]: the run/install/re-run loop, generic over an executor.
//! - [`jobs`]: lease bookkeeping for distributing evaluation work.
//! - [`stats`]: truth tables, rates, trends, bootstrap and rank-sum tests.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod classify;
pub mod corpus;
pub mod imports;
pub mod jobs;
pub mod resolve;
mod serde_util;
pub mod source;
pub mod stats;
pub mod taxonomy;

pub use classify::{classify, extract_missing_module, RawExecution};

pub use corpus::{PostBlockRecord, PostRecord, Snippet};
pub use resolve::{Attempt, ExecutionOutcome, InstallRecord};
pub use taxonomy::{Category, StatusCode, TAXONOMY_VERSION};
