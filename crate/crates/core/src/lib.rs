pub mod geometry;
pub mod refine;
pub mod ingest;
pub mod loceval;
pub mod embedder;
pub mod reideval;
pub mod synth;
pub mod pipeline;
pub mod report;
pub mod cli;
