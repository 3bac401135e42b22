//! Run manifest: which stage wrote which artifact, with content digests, so
//! reruns can reuse outputs and stale inputs are caught.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Relations,
    Forest,
    Mine,
    Regions,
    Longterm,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] =
        [Stage::Ingest, Stage::Relations, Stage::Forest, Stage::Mine, Stage::Regions, Stage::Longterm, Stage::Report];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Relations => "relations",
            Stage::Forest => "forest",
            Stage::Mine => "mine",
            Stage::Regions => "regions",
            Stage::Longterm => "longterm",
            Stage::Report => "report",
        }
    }

    /// The subcommand that runs this stage.
    pub fn command(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Relations => "extract-relations",
            Stage::Forest => "build-forest",
            Stage::Mine => "mine-short",
            Stage::Regions => "cluster-regions",
            Stage::Longterm => "mine-long",
            Stage::Report => "report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Digest over the config and every input digest.
    pub key: String,
    pub inputs: Vec<ArtifactRecord>,
    pub outputs: Vec<ArtifactRecord>,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: String,
    pub stages: BTreeMap<Stage, StageRecord>,
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> std::io::Result<String> {
    fs::read(path).map(|b| digest_bytes(&b))
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::from(e.error))?;
    Ok(())
}

/// One file produced by a stage; `name` is relative to the output dir.
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn new(name: impl Into<String>, bytes: Vec<u8>) -> Self {
        Artifact { name: name.into(), bytes }
    }
}

/// An input the stage reads, either a raw file or another stage's output.
pub enum Input {
    Raw(PathBuf),
    Upstream(Stage, &'static str),
}

pub struct Driver {
    pub out: PathBuf,
    pub manifest: RunManifest,
    pub config_text: String,
}

pub enum Outcome {
    Ran,
    Cached,
}

impl Driver {
    pub fn open(out: &Path, config_text: String) -> Result<Driver, CliError> {
        fs::create_dir_all(out)?;
        let path = out.join(MANIFEST_FILE);
        let manifest = if path.exists() {
            serde_json::from_slice(&fs::read(&path)?)
                .map_err(|e| CliError::data(format!("unreadable manifest {}: {e}", path.display())))?
        } else {
            RunManifest::default()
        };
        Ok(Driver { out: out.to_path_buf(), manifest, config_text })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn save(&self) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(&self.manifest).map_err(|e| CliError::internal(e.to_string()))?;
        bytes.push(b'\n');
        write_atomic(&self.out.join(MANIFEST_FILE), &bytes)
    }

    /// Checks an upstream artifact against the manifest and returns its
    /// path and digest.
    fn resolve(&self, stage: Stage, input: &Input) -> Result<ArtifactRecord, CliError> {
        match input {
            Input::Raw(p) => {
                let digest = digest_file(p)
                    .map_err(|e| CliError::data(format!("cannot read input {}: {e}", p.display())))?;
                Ok(ArtifactRecord { path: p.display().to_string(), digest })
            }
            Input::Upstream(up, name) => {
                let rerun = || {
                    format!("; rerun `geopattern {}`", up.command())
                };
                let rec = self
                    .manifest
                    .stages
                    .get(up)
                    .and_then(|r| r.outputs.iter().find(|o| o.path == *name))
                    .ok_or_else(|| {
                        CliError::data(format!(
                            "stage {} needs {name} from stage {}, which has not run{}",
                            stage.as_str(),
                            up.as_str(),
                            rerun()
                        ))
                    })?;
                let actual = digest_file(&self.path(name)).map_err(|_| {
                    CliError::data(format!("artifact {name} of stage {} is missing{}", up.as_str(), rerun()))
                })?;
                if actual != rec.digest {
                    return Err(CliError::data(format!(
                        "digest mismatch for {name} of stage {} (recorded {}, found {}){}",
                        up.as_str(),
                        &rec.digest[..12],
                        &actual[..12],
                        rerun()
                    )));
                }
                Ok(rec.clone())
            }
        }
    }

    fn outputs_intact(&self, rec: &StageRecord) -> bool {
        rec.outputs.iter().all(|o| digest_file(&self.path(&o.path)).is_ok_and(|d| d == o.digest))
    }

    /// Runs `stage` unless a previous run with the same config and input
    /// digests left intact outputs.
    pub fn run_stage(
        &mut self,
        stage: Stage,
        inputs: &[Input],
        exec: impl FnOnce(&Driver) -> Result<Vec<Artifact>, CliError>,
    ) -> Result<Outcome, CliError> {
        let resolved: Vec<ArtifactRecord> = inputs.iter().map(|i| self.resolve(stage, i)).collect::<Result<_, _>>()?;
        let mut h = Sha256::new();
        h.update(stage.as_str());
        h.update(&self.config_text);
        for r in &resolved {
            h.update(&r.digest);
        }
        let key = hex::encode(h.finalize());
        if let Some(prev) = self.manifest.stages.get(&stage) {
            if prev.key == key && self.outputs_intact(prev) {
                log::info!("stage {}: cached", stage.as_str());
                return Ok(Outcome::Cached);
            }
        }

        let t0 = Instant::now();
        let artifacts = exec(self)?;
        let mut outputs = Vec::with_capacity(artifacts.len());
        for a in &artifacts {
            write_atomic(&self.path(&a.name), &a.bytes)?;
            outputs.push(ArtifactRecord { path: a.name.clone(), digest: digest_bytes(&a.bytes) });
        }
        let wall_ms = t0.elapsed().as_millis() as u64;
        log::info!("stage {}: {} artifact(s) in {wall_ms} ms", stage.as_str(), outputs.len());
        self.manifest.config = self.config_text.clone();
        self.manifest.stages.insert(stage, StageRecord { key, inputs: resolved, outputs, wall_ms });
        self.save()?;
        Ok(Outcome::Ran)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_and_staleness() {
        let dir = tempfile::tempdir().unwrap();
        let mut d = Driver::open(dir.path(), "seed = 1\n".into()).unwrap();
        let mut runs = 0;
        let ingest = |d: &mut Driver, runs: &mut i32| {
            d.run_stage(Stage::Ingest, &[], |_| {
                *runs += 1;
                Ok(vec![Artifact::new("a.txt", b"hello".to_vec())])
            })
        };
        ingest(&mut d, &mut runs).unwrap();
        ingest(&mut d, &mut runs).unwrap();
        assert_eq!(runs, 1);

        let next = |d: &mut Driver| {
            d.run_stage(Stage::Relations, &[Input::Upstream(Stage::Ingest, "a.txt")], |_| {
                Ok(vec![Artifact::new("b.txt", b"world".to_vec())])
            })
        };
        assert!(matches!(next(&mut d).unwrap(), Outcome::Ran));
        assert!(matches!(next(&mut d).unwrap(), Outcome::Cached));

        fs::write(dir.path().join("a.txt"), b"tampered").unwrap();
        let err = next(&mut d).err().unwrap();
        assert!(err.message.contains("digest mismatch"));
        assert!(err.message.contains("rerun `geopattern ingest`"));
        assert_eq!(err.code, 1);

        // the stage's own damaged output is rebuilt
        ingest(&mut d, &mut runs).unwrap();
        assert_eq!(runs, 2);
        let reopened = Driver::open(dir.path(), "seed = 1\n".into()).unwrap();
        assert_eq!(reopened.manifest.stages.len(), 2);
    }

    #[test]
    fn missing_upstream_names_the_stage() {
        let dir = tempfile::tempdir().unwrap();
        let mut d = Driver::open(dir.path(), String::new()).unwrap();
        let err = d
            .run_stage(Stage::Forest, &[Input::Upstream(Stage::Relations, "relations.csv")], |_| Ok(vec![]))
            .err()
            .unwrap();
        assert!(err.message.contains("extract-relations"));
    }
}
