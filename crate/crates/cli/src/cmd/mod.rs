//! Subcommand implementations.

pub mod bench;
pub mod curate;
pub mod generate;
pub mod gradcheck;
pub mod segment;
pub mod stats;
pub mod train_toy;
