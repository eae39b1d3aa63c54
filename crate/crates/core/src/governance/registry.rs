//! Content-addressed filesystem registry.
//!
//! ```text
//! <root>/<version>/{model.json, preprocessor.json, fairness_report.json,
//!                   shap_global.json, decision_curve.csv,
//!                   assurance/{model_card.md, datasheet.md, attestation.json},
//!                   manifest.json, stage}
//! ```
//!
//! A version directory only ever appears through a rename of a fully
//! written and re-verified temporary directory, so readers never see a
//! partial entry. Writers serialise on `<root>/.lock`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{GateDecision, GovernanceError, Policy};
use crate::fairness::FairnessReport;
use crate::hashing::{self, sha256_hex};
use crate::models::Model;
use crate::tabular::FittedPreprocessor;

pub const MANIFEST: &str = "manifest.json";
pub const STAGE: &str = "stage";
pub const ATTESTATION: &str = "assurance/attestation.json";
const LOCK: &str = ".lock";
const TMP: &str = ".tmp";
const QUARANTINE: &str = ".quarantine";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Candidate,
    Approved,
    Deployed,
    Retired,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Candidate => "candidate",
            Stage::Approved => "approved",
            Stage::Deployed => "deployed",
            Stage::Retired => "retired",
        }
    }

    pub fn is_live(&self) -> bool {
        matches!(self, Stage::Approved | Stage::Deployed)
    }
}

impl std::str::FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "candidate" => Ok(Stage::Candidate),
            "approved" => Ok(Stage::Approved),
            "deployed" => Ok(Stage::Deployed),
            "retired" => Ok(Stage::Retired),
            other => Err(format!("unknown stage `{other}`")),
        }
    }
}

/// A file to be stored in a version directory, by relative path.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub path: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn new(path: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Self {
        Self {
            path: path.into(),
            bytes: bytes.into(),
        }
    }

    pub fn json<T: Serialize + ?Sized>(path: impl Into<String>, value: &T) -> Self {
        Self::new(path, hashing::to_artifact_json(value).expect("artifact serializes"))
    }

    pub fn sha256(&self) -> String {
        sha256_hex(&self.bytes)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub version_id: String,
    /// Full hash of model plus preprocessor; the version id is its prefix.
    pub content_hash: String,
    pub files: Vec<ManifestFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub version_id: String,
    pub stage: Stage,
    pub manifest: Manifest,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub version_id: String,
    pub ok: bool,
    pub problems: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanFinding {
    pub version_id: String,
    pub stage: Stage,
    pub problem: String,
}

/// Content hash of what a version is: the fitted model and preprocessor
/// (the model embeds its training configuration).
pub fn content_hash(model: &Model, prep: &FittedPreprocessor) -> String {
    hashing::content_hash(&serde_json::json!({ "model": model, "preprocessor": prep })).expect("serializes")
}

pub fn version_id_of(content_hash: &str) -> String {
    content_hash[..16].to_string()
}

/// Test hook for crash-safety checks.
#[doc(hidden)]
#[derive(Debug, Clone, PartialEq)]
pub enum Fault {
    /// Stop after writing this many files, as if the process died.
    AfterFiles(usize),
    /// Flip a byte of this file after writing it.
    Corrupt(String),
}

pub struct Registry {
    root: PathBuf,
    #[doc(hidden)]
    pub fault: Option<Fault>,
}

struct LockGuard(PathBuf);

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn io_err(path: &Path, source: std::io::Error) -> GovernanceError {
    GovernanceError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_synced(path: &Path, bytes: &[u8]) -> Result<(), GovernanceError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(bytes).map_err(|e| io_err(path, e))?;
    f.sync_all().map_err(|e| io_err(path, e))
}

impl Registry {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, GovernanceError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| io_err(&root, e))?;
        Ok(Self { root, fault: None })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn lock(&self) -> Result<LockGuard, GovernanceError> {
        let path = self.root.join(LOCK);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(LockGuard(path))
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(GovernanceError::Locked(path.display().to_string()))
            }
            Err(e) => Err(io_err(&path, e)),
        }
    }

    fn version_dir(&self, version: &str) -> PathBuf {
        self.root.join(version)
    }

    fn read_manifest(&self, version: &str) -> Result<Manifest, GovernanceError> {
        let path = self.version_dir(version).join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        serde_json::from_str(&text).map_err(|e| GovernanceError::CorruptEntry(format!("{}: {e}", path.display())))
    }

    fn read_stage(&self, version: &str) -> Result<Stage, GovernanceError> {
        let path = self.version_dir(version).join(STAGE);
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        text.parse().map_err(GovernanceError::CorruptEntry)
    }

    pub fn show(&self, version: &str) -> Result<RegistryEntry, GovernanceError> {
        if !self.version_dir(version).join(MANIFEST).is_file() {
            return Err(GovernanceError::UnknownVersion(version.to_string()));
        }
        Ok(RegistryEntry {
            version_id: version.to_string(),
            stage: self.read_stage(version)?,
            manifest: self.read_manifest(version)?,
            path: self.version_dir(version),
        })
    }

    pub fn list(&self) -> Result<Vec<RegistryEntry>, GovernanceError> {
        let mut out = Vec::new();
        let rd = fs::read_dir(&self.root).map_err(|e| io_err(&self.root, e))?;
        let mut names: Vec<String> = rd
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| !n.starts_with('.'))
            .collect();
        names.sort();
        for n in names {
            out.push(self.show(&n)?);
        }
        Ok(out)
    }

    pub fn read_file(&self, version: &str, path: &str) -> Result<Vec<u8>, GovernanceError> {
        let p = self.version_dir(version).join(path);
        fs::read(&p).map_err(|e| io_err(&p, e))
    }

    /// Store a version. `artifacts` must not include [`MANIFEST`] or
    /// [`STAGE`]. Re-registering identical content returns the existing
    /// entry unchanged.
    pub fn register(
        &self,
        model: &Model,
        prep: &FittedPreprocessor,
        artifacts: &[Artifact],
        stage: Stage,
        decision: Option<&GateDecision>,
    ) -> Result<RegistryEntry, GovernanceError> {
        let full = content_hash(model, prep);
        let version = version_id_of(&full);
        check_stage_entry(&version, stage, decision)?;
        let _lock = self.lock()?;

        let dir = self.version_dir(&version);
        if dir.exists() {
            let existing = self.read_manifest(&version)?;
            if existing.content_hash != full {
                return Err(GovernanceError::HashCollision(version));
            }
            log::info!("version {version} already registered; leaving it unchanged");
            return self.show(&version);
        }

        let mut files = vec![Artifact::json("model.json", model), Artifact::json("preprocessor.json", prep)];
        for a in artifacts {
            if a.path == MANIFEST || a.path == STAGE || a.path.starts_with('/') || a.path.contains("..") {
                return Err(GovernanceError::CorruptEntry(format!("reserved or unsafe artifact path `{}`", a.path)));
            }
            if !files.iter().any(|f| f.path == a.path) {
                files.push(a.clone());
            }
        }
        files.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            version_id: version.clone(),
            content_hash: full,
            files: files
                .iter()
                .map(|f| ManifestFile {
                    path: f.path.clone(),
                    sha256: f.sha256(),
                    bytes: f.bytes.len() as u64,
                })
                .collect(),
        };

        let tmp_root = self.root.join(TMP);
        let tmp = tmp_root.join(format!("{version}-{}", std::process::id()));
        if tmp.exists() {
            fs::remove_dir_all(&tmp).map_err(|e| io_err(&tmp, e))?;
        }
        match self.write_tmp(&tmp, &files, &manifest, stage) {
            Ok(()) => {}
            Err(e) => return Err(self.quarantine(&tmp, &version, e)),
        }
        if let Err(problems) = verify_dir(&tmp, &manifest) {
            let e = GovernanceError::PartialWrite(format!("verification failed: {}", problems.join("; ")));
            return Err(self.quarantine(&tmp, &version, e));
        }
        fs::rename(&tmp, &dir).map_err(|e| io_err(&dir, e))?;
        log::info!("registered {version} as {}", stage.as_str());
        self.show(&version)
    }

    fn write_tmp(&self, tmp: &Path, files: &[Artifact], manifest: &Manifest, stage: Stage) -> Result<(), GovernanceError> {
        fs::create_dir_all(tmp).map_err(|e| io_err(tmp, e))?;
        for (k, f) in files.iter().enumerate() {
            if self.fault == Some(Fault::AfterFiles(k)) {
                return Err(GovernanceError::PartialWrite(format!("interrupted after {k} files")));
            }
            write_synced(&tmp.join(&f.path), &f.bytes)?;
            if self.fault == Some(Fault::Corrupt(f.path.clone())) {
                let mut b = f.bytes.clone();
                if let Some(x) = b.first_mut() {
                    *x ^= 0xff;
                }
                write_synced(&tmp.join(&f.path), &b)?;
            }
        }
        write_synced(&tmp.join(MANIFEST), hashing::to_artifact_json(manifest).expect("manifest").as_bytes())?;
        write_synced(&tmp.join(STAGE), format!("{}\n", stage.as_str()).as_bytes())
    }

    fn quarantine(&self, tmp: &Path, version: &str, err: GovernanceError) -> GovernanceError {
        let q = self.root.join(QUARANTINE);
        if tmp.exists() {
            let _ = fs::create_dir_all(&q);
            let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.f");
            let dest = q.join(format!("{version}-{stamp}"));
            if fs::rename(tmp, &dest).is_ok() {
                log::warn!("partial write moved to {}", dest.display());
            }
        }
        err
    }

    /// Change the stage of an existing version.
    pub fn promote(
        &self,
        version: &str,
        stage: Stage,
        decision: Option<&GateDecision>,
    ) -> Result<RegistryEntry, GovernanceError> {
        let _lock = self.lock()?;
        let current = self.show(version)?;
        let allowed = matches!(
            (current.stage, stage),
            (Stage::Candidate, Stage::Approved)
                | (Stage::Approved, Stage::Deployed)
                | (Stage::Approved, Stage::Retired)
                | (Stage::Deployed, Stage::Retired)
                | (Stage::Candidate, Stage::Retired)
        ) || current.stage == stage;
        if !allowed {
            return Err(GovernanceError::StageViolation(format!(
                "cannot move {version} from {} to {}",
                current.stage.as_str(),
                stage.as_str()
            )));
        }
        if stage == Stage::Approved && current.stage != Stage::Approved {
            check_stage_entry(version, stage, decision)?;
        }
        if stage == Stage::Deployed && current.stage == Stage::Approved {
            let report = self.verify(version)?;
            if !report.ok {
                return Err(GovernanceError::StageViolation(format!(
                    "{version} fails verification: {}",
                    report.problems.join("; ")
                )));
            }
        }
        let dir = self.version_dir(version);
        let tmp = dir.join(".stage.tmp");
        write_synced(&tmp, format!("{}\n", stage.as_str()).as_bytes())?;
        fs::rename(&tmp, dir.join(STAGE)).map_err(|e| io_err(&dir, e))?;
        self.show(version)
    }

    /// Re-hash every manifest file, the attestation's artifact list and the
    /// version id itself.
    pub fn verify(&self, version: &str) -> Result<VerifyReport, GovernanceError> {
        let entry = self.show(version)?;
        let mut problems = verify_dir(&entry.path, &entry.manifest).err().unwrap_or_default();
        if entry.manifest.version_id != version {
            problems.push(format!("manifest names version {}", entry.manifest.version_id));
        }
        let model = fs::read(entry.path.join("model.json")).ok();
        let prep = fs::read(entry.path.join("preprocessor.json")).ok();
        match (model, prep) {
            (Some(m), Some(p)) => {
                let m: serde_json::Value = serde_json::from_slice(&m).unwrap_or_default();
                let p: serde_json::Value = serde_json::from_slice(&p).unwrap_or_default();
                let h = hashing::content_hash(&serde_json::json!({ "model": m, "preprocessor": p })).expect("value");
                if h != entry.manifest.content_hash || version_id_of(&h) != version {
                    problems.push("model/preprocessor content hash does not match the version id".into());
                }
            }
            _ => problems.push("model.json or preprocessor.json missing".into()),
        }
        if let Ok(bytes) = fs::read(entry.path.join(ATTESTATION)) {
            match serde_json::from_slice::<super::Attestation>(&bytes) {
                Ok(att) => {
                    if att.version_id != version {
                        problems.push("attestation refers to another version".into());
                    }
                    for (path, sha) in &att.artifacts {
                        match fs::read(entry.path.join(path)) {
                            Ok(b) if &sha256_hex(&b) == sha => {}
                            Ok(_) => problems.push(format!("attestation hash mismatch for {path}")),
                            Err(_) => problems.push(format!("attested artifact {path} missing")),
                        }
                    }
                }
                Err(e) => problems.push(format!("attestation unreadable: {e}")),
            }
        } else if entry.stage.is_live() {
            problems.push("live entry has no attestation".into());
        }
        Ok(VerifyReport {
            version_id: version.to_string(),
            ok: problems.is_empty(),
            problems,
        })
    }

    /// Every approved or deployed entry must verify, carry a passing
    /// attestation and a fairness report within the policy gates.
    pub fn scan(&self, policy: &Policy) -> Result<Vec<ScanFinding>, GovernanceError> {
        let mut findings = Vec::new();
        for entry in self.list()? {
            if !entry.stage.is_live() {
                continue;
            }
            let mut flag = |problem: String| {
                findings.push(ScanFinding {
                    version_id: entry.version_id.clone(),
                    stage: entry.stage,
                    problem,
                })
            };
            let v = self.verify(&entry.version_id)?;
            for p in v.problems {
                flag(p);
            }
            match fs::read(entry.path.join("fairness_report.json"))
                .ok()
                .and_then(|b| serde_json::from_slice::<FairnessReport>(&b).ok())
            {
                Some(r) => {
                    if r.dpd > policy.gates.dpd_max {
                        flag(format!("dpd {} exceeds {}", r.dpd, policy.gates.dpd_max));
                    }
                    if r.eo > policy.gates.eo_max {
                        flag(format!("eo {} exceeds {}", r.eo, policy.gates.eo_max));
                    }
                }
                None => flag("fairness report missing or unreadable".into()),
            }
            match fs::read(entry.path.join(ATTESTATION))
                .ok()
                .and_then(|b| serde_json::from_slice::<super::Attestation>(&b).ok())
            {
                Some(a) if a.verdict == super::Verdict::Pass => {}
                Some(a) => flag(format!("attested verdict is {:?}", a.verdict)),
                None => flag("attestation missing".into()),
            }
        }
        Ok(findings)
    }
}

fn check_stage_entry(version: &str, stage: Stage, decision: Option<&GateDecision>) -> Result<(), GovernanceError> {
    if stage == Stage::Candidate {
        return Ok(());
    }
    match decision {
        Some(d) if d.passed() && d.version_id.as_deref() == Some(version) => Ok(()),
        Some(d) if !d.passed() => Err(GovernanceError::StageViolation(format!(
            "{version} cannot enter {} with a {:?} decision",
            stage.as_str(),
            d.verdict
        ))),
        Some(_) => Err(GovernanceError::StageViolation(format!(
            "gate decision does not reference version {version}"
        ))),
        None => Err(GovernanceError::StageViolation(format!(
            "{version} cannot enter {} without a gate decision",
            stage.as_str()
        ))),
    }
}

fn verify_dir(dir: &Path, manifest: &Manifest) -> Result<(), Vec<String>> {
    let mut problems = Vec::new();
    for f in &manifest.files {
        match fs::read(dir.join(&f.path)) {
            Ok(b) if sha256_hex(&b) == f.sha256 && b.len() as u64 == f.bytes => {}
            Ok(_) => problems.push(format!("hash mismatch for {}", f.path)),
            Err(_) => problems.push(format!("missing {}", f.path)),
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(problems)
    }
}
