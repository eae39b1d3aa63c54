//! Group fairness: parity metrics, audits against policy thresholds, and
//! two mitigations (instance reweighting, adversarial-penalty logistic).

mod adversarial;
mod audit;
mod metrics;
mod reweigh;

use thiserror::Error;

use crate::models::ModelError;

pub use adversarial::{adversarial_debias_logistic, DebiasConfig, DebiasOutcome};
pub use audit::{audit, label_parity, AuditThresholds, FairnessReport, Status};
pub use metrics::{
    demographic_parity_difference, equalized_odds, EoResult, GroupConfusion, GroupCounts,
    LabelClass, UndefinedRate,
};
pub use reweigh::{reweigh, CellStat, ReweightingPlan};

#[derive(Debug, Error)]
pub enum FairnessError {
    #[error("sensitive group {0} has no rows")]
    EmptyGroup(u8),
    #[error("{what}: expected length {expected}, got {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{what} must be 0/1, found {value} at position {index}")]
    NonBinary {
        what: &'static str,
        index: usize,
        value: u8,
    },
    #[error("empty input")]
    Empty,
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub(crate) fn check_binary(what: &'static str, v: &[u8]) -> Result<(), FairnessError> {
    match v.iter().position(|&x| x > 1) {
        Some(index) => Err(FairnessError::NonBinary {
            what,
            index,
            value: v[index],
        }),
        None => Ok(()),
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, v: usize) -> Result<(), FairnessError> {
    if expected == v {
        Ok(())
    } else {
        Err(FairnessError::LengthMismatch {
            what,
            expected,
            found: v,
        })
    }
}
