//! Core primitives for ticket troubleshooting: corpus curation, multi-ranker
//! consensus retrieval, team routing, fault-analysis generation and ranking,
//! preference-dataset construction and evaluation metrics.
//!
//! The crate is `no_std` and only needs `alloc`. Anything touching files,
//! sockets or clocks lives in the `troubleshoot` companion crate; backends are
//! reached through the [`backend::Embedder`] and [`backend::Generator`] traits.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod backend;
pub mod curation;
pub mod domain;
pub mod error;
pub mod fault_analysis;
pub mod judge;
pub mod metrics;
pub mod mock;
pub mod prompts;
pub mod retrieval;
pub mod rlrf;
pub mod routing;
pub mod synthetic;
pub mod text;

pub use backend::{
    Adapter, BackendError, ChatMessage, Embedder, EmbeddingVector, GenerationParams,
    GenerationRequest, Generator, Role,
};
pub use curation::{Corpus, IdfTable, PairSet};
pub use domain::{FaultAnalysis, LabelSet, TeamLabel, Ticket, TicketFaultLink};
pub use error::Error;
pub use retrieval::{RankerEnsemble, ScoredItem, VectorIndex};

pub type Result<T, E = Error> = core::result::Result<T, E>;
