//! File formats, backend client, batch pipeline, CLI and review service
//! built on [`boxmask_core`].

pub mod cli;
pub mod config;
pub mod corpus;
mod error;
pub mod fsio;
pub mod http_backend;
pub mod manifest;
pub mod ops;
pub mod pipeline;
pub mod protocol;
pub mod report;
pub mod review;

pub use boxmask_core as core;
pub use error::{Error, Result};
