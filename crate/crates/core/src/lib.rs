//! Dual-source singing-critique tooling: build (music, reaction text, speech)
//! datasets from reaction recordings and MLLM generation, curate them, train a
//! desk-scale joint text/audio reward model, and benchmark reaction quality
//! with an LLM-as-judge harness.
//!
//! The crate is organized around the pipeline stages:
//!
//! - [`model`] — shared domain types and the JSONL dataset format
//! - [`audio`] / [`wav`] — clip manipulation, the μ-law toy tokenizer, WAV I/O
//! - [`segment`] — music-interval geometry over ASR transcripts and triplet
//!   assembly
//! - [`clients`] — ASR / separation / chat / embedding service clients with
//!   deterministic mock backends
//! - [`critique`] — persona-conditioned critique generation
//! - [`curate`] — similarity de-duplication, rule filtering, holdout splits
//! - [`train`] — the shared-encoder, two-head toy model and its training loop
//! - [`judge`] — SCQ administration and the three-rubric OEQ judging harness

pub mod audio;
pub mod clients;
pub mod critique;
pub mod curate;
pub mod judge;
pub mod model;
pub mod segment;
pub mod train;
pub mod wav;
