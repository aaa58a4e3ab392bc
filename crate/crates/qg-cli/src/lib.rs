//! Library surface of the `qg` binary: scenario ingestion, run
//! orchestration, and manifest handling. Kept as a lib so integration
//! tests drive the same code paths as the binary.

pub mod manifest;
pub mod orchestrate;
pub mod scenario;
