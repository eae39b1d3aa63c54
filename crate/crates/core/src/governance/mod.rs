//! Policy gates, the model registry, assurance packs and the
//! audit/mitigate/gate/monitor loop.

use thiserror::Error;

mod gate;
mod monitor;
mod pack;
mod pipeline;
mod policy;
mod registry;

pub use gate::{evaluate_drift_gate, evaluate_gate, GateDecision, GateReason, Verdict};
pub use monitor::{monitor_tick, simulate_windows, FairnessCheck, MonitorState, RetrainEvent, TickOutcome, PROBA_FEATURE};
pub use pack::{build_assurance_pack, AssurancePack, Attestation, PackInputs};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineOutcome, StageRecord};
pub use policy::{AuditSection, DriftSection, Gates, Policy, UtilitySection};
pub use registry::{
    content_hash, version_id_of, Artifact, Fault, Manifest, ManifestFile, Registry, RegistryEntry, ScanFinding,
    Stage, VerifyReport, ATTESTATION, MANIFEST, STAGE,
};

use crate::drift::DriftError;
use crate::explain::ExplainError;
use crate::fairness::FairnessError;
use crate::models::ModelError;
use crate::tabular::TabularError;
use crate::utility::UtilityError;

#[derive(Debug, Error)]
pub enum GovernanceError {
    #[error("malformed policy at `{0}`")]
    MalformedPolicy(String),
    #[error("invalid threshold `{0}`")]
    InvalidThreshold(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("report incompatible with policy: {0}")]
    IncompatibleReport(String),
    #[error("version id {0} already used by different content")]
    HashCollision(String),
    #[error("partial write: {0}")]
    PartialWrite(String),
    #[error("stage violation: {0}")]
    StageViolation(String),
    #[error("missing artifact `{0}`")]
    MissingArtifact(String),
    #[error("registry locked ({0})")]
    Locked(String),
    #[error("unknown version `{0}`")]
    UnknownVersion(String),
    #[error("corrupt registry entry: {0}")]
    CorruptEntry(String),
    #[error("no deployed model")]
    NoDeployedModel,
    #[error("gate still blocks after mitigation")]
    HardBlock(Box<PipelineOutcome>),
    #[error(transparent)]
    Tabular(#[from] TabularError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Fairness(#[from] FairnessError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Drift(#[from] DriftError),
    #[error(transparent)]
    Utility(#[from] UtilityError),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}
