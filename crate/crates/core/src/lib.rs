pub mod badapprox;
pub mod config;
pub mod engine;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod matseq;
pub mod numeric;
pub mod poly;
pub mod strategies;
pub mod supports;
pub mod targets;
pub mod transcript;
