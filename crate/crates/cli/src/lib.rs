//! Command-line front end: configuration, claims ingestion, pipelines and
//! byte-stable output files.

pub mod commands;
pub mod config;
pub mod ingest;
pub mod output;
