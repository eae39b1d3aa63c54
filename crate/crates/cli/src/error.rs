use fairgate::drift::DriftError;
use fairgate::explain::ExplainError;
use fairgate::fairness::FairnessError;
use fairgate::governance::GovernanceError;
use fairgate::models::ModelError;
use fairgate::tabular::TabularError;
use fairgate::utility::UtilityError;

use crate::exit;

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: exit::INPUT,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            code: exit::INTERNAL,
            message: message.into(),
        }
    }
}

impl From<TabularError> for CliError {
    fn from(e: TabularError) -> Self {
        Self::input(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::NonfiniteLoss => Self::internal(e.to_string()),
            other => Self::input(other.to_string()),
        }
    }
}

impl From<FairnessError> for CliError {
    fn from(e: FairnessError) -> Self {
        match e {
            FairnessError::Model(m) => m.into(),
            other => Self::input(other.to_string()),
        }
    }
}

impl From<ExplainError> for CliError {
    fn from(e: ExplainError) -> Self {
        match e {
            ExplainError::Model(m) => m.into(),
            ExplainError::MissingCover { .. } => Self::internal(e.to_string()),
            other => Self::input(other.to_string()),
        }
    }
}

impl From<DriftError> for CliError {
    fn from(e: DriftError) -> Self {
        Self::input(e.to_string())
    }
}

impl From<UtilityError> for CliError {
    fn from(e: UtilityError) -> Self {
        Self::input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::input(format!("invalid JSON: {e}"))
    }
}

impl From<GovernanceError> for CliError {
    fn from(e: GovernanceError) -> Self {
        use GovernanceError as G;
        match e {
            G::Tabular(t) => t.into(),
            G::Model(m) => m.into(),
            G::Fairness(f) => f.into(),
            G::Explain(x) => x.into(),
            G::Drift(d) => d.into(),
            G::Utility(u) => u.into(),
            G::Json(j) => j.into(),
            G::HashCollision(_) | G::PartialWrite(_) => Self::internal(e.to_string()),
            G::HardBlock(_) => Self {
                code: exit::BLOCK,
                message: e.to_string(),
            },
            other => Self::input(other.to_string()),
        }
    }
}
