//! Vulnerability evaluation pipeline: CVSS handling, CVE ingestion, the
//! asset/notification/evaluation corpus, instruction dataset construction,
//! budgeted inference with rule-based correction, metrics and the expert
//! review queue.

pub mod corpus;
pub mod cvss;
pub mod inference;
pub mod instruction;
pub mod metrics;
pub mod nvd;
pub mod review;
pub mod split;
