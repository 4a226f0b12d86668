//! Network-facing parts of the pipeline: the NVD client, the HTTP
//! completion backend and the review queue API.

pub mod api;
pub mod completion;
pub mod nvd;
