//! IO, persistence, HTTP backends, evaluation runs, service and CLI around
//! [`troubleshoot_core`].

pub mod cache;
pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod evaluate;
pub mod http;
pub mod index_file;
pub mod io;
pub mod service;

pub use config::ServiceConfig;
pub use engine::Engine;
pub use error::{AppError, Result};
