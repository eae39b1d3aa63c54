use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TabularError;
use crate::hashing;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Target,
    Sensitive,
}

/// One column of a dataset schema.
///
/// Sensitive columns come in two flavours. The audited attribute must be
/// binary and is used for fairness metrics and stratification; any other
/// sensitive column is monitoring-only and is treated as a numeric feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit: Option<bool>,
    /// Whether the column feeds the model. Only meaningful for sensitive
    /// columns; defaults to true.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<bool>,
}

impl ColumnSchema {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Self {
            name: name.into(),
            kind,
            categories: None,
            units: None,
            audit: None,
            feature: None,
        }
    }

    pub fn numeric(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Numeric)
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Categorical)
    }

    pub fn target(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Target)
    }

    pub fn sensitive(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Sensitive)
    }

    pub fn with_categories<I, S>(mut self, cats: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.categories = Some(cats.into_iter().map(Into::into).collect());
        self
    }

    pub fn with_units(mut self, units: impl Into<String>) -> Self {
        self.units = Some(units.into());
        self
    }
}

/// Ordered column list. Serializes as a bare JSON array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schema {
    pub columns: Vec<ColumnSchema>,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSchema>) -> Result<Self, TabularError> {
        let schema = Self { columns };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_json(text: &str) -> Result<Self, TabularError> {
        let schema: Schema = serde_json::from_str(text)
            .map_err(|e| TabularError::InvalidSchema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self, TabularError> {
        let text = std::fs::read_to_string(path).map_err(|source| TabularError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), TabularError> {
        let mut names = HashSet::new();
        for col in &self.columns {
            if !names.insert(col.name.as_str()) {
                return Err(TabularError::InvalidSchema(format!(
                    "duplicate column `{}`",
                    col.name
                )));
            }
            match (&col.categories, col.kind) {
                (Some(cats), ColumnKind::Categorical) => {
                    let mut seen = HashSet::new();
                    for c in cats {
                        if !seen.insert(c.as_str()) {
                            return Err(TabularError::InvalidSchema(format!(
                                "duplicate category `{c}` in column `{}`",
                                col.name
                            )));
                        }
                    }
                }
                (Some(_), _) => {
                    return Err(TabularError::InvalidSchema(format!(
                        "categories given for non-categorical column `{}`",
                        col.name
                    )))
                }
                (None, _) => {}
            }
        }
        let targets = self
            .columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Target)
            .count();
        if targets != 1 {
            return Err(TabularError::InvalidSchema(format!(
                "expected exactly one target column, found {targets}"
            )));
        }
        self.audited_index()?;
        Ok(())
    }

    fn audited_index(&self) -> Result<usize, TabularError> {
        let sensitive: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == ColumnKind::Sensitive)
            .map(|(i, _)| i)
            .collect();
        let flagged: Vec<usize> = sensitive
            .iter()
            .copied()
            .filter(|&i| self.columns[i].audit == Some(true))
            .collect();
        match (flagged.len(), sensitive.len()) {
            (1, _) => Ok(flagged[0]),
            (0, 1) if self.columns[sensitive[0]].audit.is_none() => Ok(sensitive[0]),
            _ => Err(TabularError::InvalidSchema(format!(
                "expected exactly one audited sensitive column ({} sensitive, {} flagged)",
                sensitive.len(),
                flagged.len()
            ))),
        }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn target_index(&self) -> usize {
        self.columns
            .iter()
            .position(|c| c.kind == ColumnKind::Target)
            .expect("validated schema has a target")
    }

    /// Index of the audited (binary) sensitive column.
    pub fn sensitive_index(&self) -> usize {
        self.audited_index().expect("validated schema has an audited column")
    }

    pub fn target_name(&self) -> &str {
        &self.columns[self.target_index()].name
    }

    pub fn sensitive_name(&self) -> &str {
        &self.columns[self.sensitive_index()].name
    }

    /// Whether the column is read as a binary 0/1 value.
    pub(crate) fn is_binary(&self, idx: usize) -> bool {
        let kind = self.columns[idx].kind;
        kind == ColumnKind::Target || (kind == ColumnKind::Sensitive && idx == self.sensitive_index())
    }

    pub fn hash(&self) -> String {
        hashing::content_hash(self).expect("schema serializes")
    }
}
