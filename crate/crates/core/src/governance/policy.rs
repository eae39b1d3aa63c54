use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_yaml::Value;

use super::GovernanceError;
use crate::fairness::AuditThresholds;
use crate::hashing;

/// Deployment policy. Read from YAML with nested sections:
///
/// ```yaml
/// gates: { dpd_max: 0.05, eo_max: 0.05 }
/// audit: { dpd_warn: 0.10 }
/// drift: { ks_max: 0.20 }
/// utility: { band: [0.10, 0.20], delta_nb_max: 0.001 }
/// protected_attribute: sex
/// label_threshold: 0.5
/// seed: 42
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub gates: Gates,
    pub audit: AuditSection,
    pub drift: DriftSection,
    pub utility: UtilitySection,
    pub protected_attribute: String,
    pub label_threshold: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gates {
    pub dpd_max: f64,
    pub eo_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditSection {
    pub dpd_warn: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSection {
    pub ks_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilitySection {
    pub band: [f64; 2],
    pub delta_nb_max: f64,
}

impl Default for Policy {
    fn default() -> Self {
        Self {
            gates: Gates {
                dpd_max: 0.05,
                eo_max: 0.05,
            },
            audit: AuditSection { dpd_warn: 0.10 },
            drift: DriftSection { ks_max: 0.20 },
            utility: UtilitySection {
                band: [0.10, 0.20],
                delta_nb_max: 0.001,
            },
            protected_attribute: "sex".into(),
            label_threshold: 0.5,
            seed: 42,
        }
    }
}

fn malformed(key: &str) -> GovernanceError {
    GovernanceError::MalformedPolicy(key.to_string())
}

fn number(v: &Value, key: &str) -> Result<f64, GovernanceError> {
    v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| malformed(key))
}

fn section<'a>(
    v: &'a Value,
    key: &str,
    allowed: &[&str],
) -> Result<Vec<(&'a str, &'a Value)>, GovernanceError> {
    match v {
        Value::Null => Ok(Vec::new()),
        Value::Mapping(m) => m
            .iter()
            .map(|(k, val)| {
                let k = k.as_str().ok_or_else(|| malformed(key))?;
                if allowed.contains(&k) {
                    Ok((k, val))
                } else {
                    Err(malformed(&format!("{key}.{k}")))
                }
            })
            .collect(),
        _ => Err(malformed(key)),
    }
}

impl Policy {
    pub fn from_yaml(text: &str) -> Result<Self, GovernanceError> {
        let root: Value = serde_yaml::from_str(text).map_err(|e| GovernanceError::MalformedPolicy(e.to_string()))?;
        let mut p = Policy::default();
        let top = section(
            &root,
            "policy",
            &["gates", "audit", "drift", "utility", "protected_attribute", "label_threshold", "seed"],
        )?;
        for (k, v) in top {
            match k {
                "gates" => {
                    for (g, val) in section(v, "gates", &["dpd_max", "eo_max"])? {
                        let key = format!("gates.{g}");
                        match g {
                            "dpd_max" => p.gates.dpd_max = number(val, &key)?,
                            _ => p.gates.eo_max = number(val, &key)?,
                        }
                    }
                }
                "audit" => {
                    for (_, val) in section(v, "audit", &["dpd_warn"])? {
                        p.audit.dpd_warn = number(val, "audit.dpd_warn")?;
                    }
                }
                "drift" => {
                    for (_, val) in section(v, "drift", &["ks_max"])? {
                        p.drift.ks_max = number(val, "drift.ks_max")?;
                    }
                }
                "utility" => {
                    for (u, val) in section(v, "utility", &["band", "delta_nb_max"])? {
                        match u {
                            "band" => {
                                let seq = val.as_sequence().filter(|s| s.len() == 2).ok_or_else(|| malformed("utility.band"))?;
                                p.utility.band = [number(&seq[0], "utility.band")?, number(&seq[1], "utility.band")?];
                            }
                            _ => p.utility.delta_nb_max = number(val, "utility.delta_nb_max")?,
                        }
                    }
                }
                "protected_attribute" => {
                    p.protected_attribute = v.as_str().ok_or_else(|| malformed(k))?.to_string();
                }
                "label_threshold" => p.label_threshold = number(v, k)?,
                _ => p.seed = v.as_u64().ok_or_else(|| malformed(k))?,
            }
        }
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, GovernanceError> {
        let text = std::fs::read_to_string(path).map_err(|e| GovernanceError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_yaml(&text)
    }

    pub fn validate(&self) -> Result<(), GovernanceError> {
        let bad = |k: &str| Err(GovernanceError::InvalidThreshold(k.to_string()));
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(self.gates.dpd_max) {
            return bad("gates.dpd_max");
        }
        if !unit(self.gates.eo_max) {
            return bad("gates.eo_max");
        }
        if !unit(self.audit.dpd_warn) || self.audit.dpd_warn < self.gates.dpd_max {
            return bad("audit.dpd_warn");
        }
        if !unit(self.drift.ks_max) {
            return bad("drift.ks_max");
        }
        let [lo, hi] = self.utility.band;
        if !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return bad("utility.band");
        }
        if !(self.utility.delta_nb_max >= 0.0) {
            return bad("utility.delta_nb_max");
        }
        if !(self.label_threshold > 0.0 && self.label_threshold < 1.0) {
            return bad("label_threshold");
        }
        if self.protected_attribute.is_empty() {
            return bad("protected_attribute");
        }
        Ok(())
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("policy serializes")
    }

    pub fn hash(&self) -> String {
        hashing::content_hash(self).expect("policy serializes")
    }

    pub fn thresholds(&self) -> AuditThresholds {
        AuditThresholds {
            dpd_gate: self.gates.dpd_max,
            dpd_warn: self.audit.dpd_warn,
            eo_gate: self.gates.eo_max,
        }
    }

    pub fn band(&self) -> (f64, f64) {
        (self.utility.band[0], self.utility.band[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let p = Policy::from_yaml("").unwrap();
        assert_eq!(p, Policy::default());
        assert_eq!((p.gates.dpd_max, p.gates.eo_max, p.audit.dpd_warn, p.drift.ks_max), (0.05, 0.05, 0.10, 0.20));
        assert_eq!(p.utility.band, [0.10, 0.20]);
    }

    #[test]
    fn partial_sections_merge_with_defaults() {
        let p = Policy::from_yaml("gates:\n  eo_max: 0.08\nseed: 7\n").unwrap();
        assert_eq!(p.gates.eo_max, 0.08);
        assert_eq!(p.gates.dpd_max, 0.05);
        assert_eq!(p.seed, 7);
    }

    #[test]
    fn warn_below_gate_is_invalid() {
        let e = Policy::from_yaml("gates: {dpd_max: 0.2}\naudit: {dpd_warn: 0.1}\n").unwrap_err();
        assert!(matches!(e, GovernanceError::InvalidThreshold(k) if k == "audit.dpd_warn"));
    }

    #[test]
    fn malformed_keys() {
        assert!(matches!(
            Policy::from_yaml("gates: {dpd_mx: 0.1}").unwrap_err(),
            GovernanceError::MalformedPolicy(k) if k == "gates.dpd_mx"
        ));
        assert!(matches!(
            Policy::from_yaml("drift: {ks_max: high}").unwrap_err(),
            GovernanceError::MalformedPolicy(k) if k == "drift.ks_max"
        ));
        assert!(matches!(Policy::from_yaml("[1, 2]").unwrap_err(), GovernanceError::MalformedPolicy(_)));
        assert!(matches!(Policy::from_yaml("utility: {band: [0.3, 0.1]}").unwrap_err(), GovernanceError::InvalidThreshold(_)));
    }

    #[test]
    fn round_trip_is_byte_stable() {
        let p = Policy::from_yaml("gates: {dpd_max: 0.04, eo_max: 0.03}\nutility: {band: [0.1, 0.25], delta_nb_max: 0.01}\nprotected_attribute: gender\n").unwrap();
        let text = p.to_yaml();
        let q = Policy::from_yaml(&text).unwrap();
        assert_eq!(p, q);
        assert_eq!(text, q.to_yaml());
        assert_eq!(p.hash(), q.hash());
    }
}
