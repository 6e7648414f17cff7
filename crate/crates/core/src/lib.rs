pub mod error;
pub mod ingest;
pub mod warc;
pub mod heuristics;
pub mod tokens;
pub mod llm;
pub mod eval;
pub mod stats;
pub mod mock;
pub mod pipeline;
pub mod synth;
