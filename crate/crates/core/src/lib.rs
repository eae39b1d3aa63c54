//! Fairness-gated model governance for tabular risk models.
//!
//! The crate covers the whole lifecycle of a binary risk classifier:
//! data preparation ([`tabular`]), training ([`models`]), group fairness
//! auditing and mitigation ([`fairness`]), explanation artifacts
//! ([`explain`]), distribution drift ([`drift`]), decision-curve utility
//! ([`utility`]) and the policy gates, registry and orchestration that tie
//! them together ([`governance`]).

pub mod drift;
pub mod explain;
pub mod fairness;
pub mod governance;
pub mod hashing;
pub mod linalg;
pub mod models;
pub mod synth;
pub mod tabular;
pub mod utility;
