//! Zero-shot extreme multi-label classification by generate-then-rerank.
//!
//! For each test instance a language model produces pseudo demonstrations,
//! then raw label guesses conditioned on them; a zero-shot retriever maps the
//! guesses onto the label space to form a shortlist, and a reranker picks the
//! final top-K from that shortlist.

pub mod corpus;
pub mod demogen;
pub mod error;
pub mod eval;
pub mod llm;
pub mod pipeline;
pub mod rerank;
pub mod retrieval;
pub mod shortlist;

pub use error::{Error, Result};
