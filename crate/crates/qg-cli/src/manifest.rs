//! Run manifests: a deterministic, self-digesting record of what a run
//! produced.
//!
//! The manifest body lists the scenario digest, build version, run status,
//! every artifact with byte size and SHA-256, and the verdict summary. The
//! final line is the SHA-256 of everything above it, so the file is a pure
//! function of (config bytes, seed, build version) and two runs of the same
//! scenario produce byte-identical manifests. Wall-clock times are recorded
//! in a separate `timing.txt` sidecar that is deliberately not listed as an
//! artifact.

use qg_core::norms::InequalityVerdict;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;

pub const MANIFEST_HEADER: &str = "qg-manifest v1";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const TIMING_FILE: &str = "timing.txt";

#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: u64,
    pub digest: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub scenario_name: String,
    pub scenario_digest: String,
    pub build: String,
    /// `running`, `complete`, or `aborted: <reason> @ t=<time>`.
    pub status: String,
    pub artifacts: Vec<Artifact>,
    pub verdicts: Vec<InequalityVerdict>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hashes a produced file into an artifact record.
pub fn artifact_of(dir: &Path, name: &str) -> Result<Artifact, String> {
    let path = dir.join(name);
    let bytes = std::fs::read(&path)
        .map_err(|e| format!("cannot read artifact `{}`: {e}", path.display()))?;
    Ok(Artifact {
        name: name.to_string(),
        bytes: bytes.len() as u64,
        digest: sha256_hex(&bytes),
    })
}

impl RunManifest {
    /// Deterministic body, without the trailing self-digest line.
    fn body(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MANIFEST_HEADER}");
        let _ = writeln!(s, "scenario = {}", self.scenario_name);
        let _ = writeln!(s, "scenario_digest = {}", self.scenario_digest);
        let _ = writeln!(s, "build = {}", self.build);
        let _ = writeln!(s, "status = {}", self.status);
        for a in &self.artifacts {
            let _ = writeln!(s, "artifact = {} {} {}", a.name, a.bytes, a.digest);
        }
        for v in &self.verdicts {
            let _ = writeln!(
                s,
                "verdict = {} {} lhs={} rhs={} constant={}",
                v.name,
                if v.satisfied { "PASS" } else { "FAIL" },
                v.lhs,
                v.rhs,
                v.constant
            );
        }
        s
    }

    pub fn serialize(&self) -> String {
        let body = self.body();
        let digest = sha256_hex(body.as_bytes());
        format!("{body}manifest_digest = {digest}\n")
    }

    pub fn write(&self, dir: &Path) -> Result<(), String> {
        std::fs::write(dir.join(MANIFEST_FILE), self.serialize())
            .map_err(|e| format!("cannot write manifest: {e}"))
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.satisfied)
    }

    /// Parses a manifest file, checking the self-digest. A `running`
    /// (partial) manifest parses fine; a tampered one is rejected with
    /// the digest detail.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut scenario_name = None;
        let mut scenario_digest = None;
        let mut build = None;
        let mut status = None;
        let mut artifacts = Vec::new();
        let mut verdicts = Vec::new();
        let mut claimed_digest = None;
        let mut body = String::new();
        let mut lines = text.lines().peekable();
        if lines.next() != Some(MANIFEST_HEADER) {
            return Err(format!("not a manifest: missing `{MANIFEST_HEADER}` header"));
        }
        body.push_str(MANIFEST_HEADER);
        body.push('\n');
        for line in lines {
            if let Some(v) = line.strip_prefix("manifest_digest = ") {
                claimed_digest = Some(v.trim().to_string());
                continue;
            }
            body.push_str(line);
            body.push('\n');
            let Some((key, value)) = line.split_once(" = ") else {
                return Err(format!("malformed manifest line `{line}`"));
            };
            match key {
                "scenario" => scenario_name = Some(value.to_string()),
                "scenario_digest" => scenario_digest = Some(value.to_string()),
                "build" => build = Some(value.to_string()),
                "status" => status = Some(value.to_string()),
                "artifact" => {
                    let parts: Vec<&str> = value.split_whitespace().collect();
                    if parts.len() != 3 {
                        return Err(format!("malformed artifact line `{line}`"));
                    }
                    artifacts.push(Artifact {
                        name: parts[0].to_string(),
                        bytes: parts[1]
                            .parse()
                            .map_err(|_| format!("malformed artifact size in `{line}`"))?,
                        digest: parts[2].to_string(),
                    });
                }
                "verdict" => {
                    let parts: Vec<&str> = value.split_whitespace().collect();
                    if parts.len() != 5 {
                        return Err(format!("malformed verdict line `{line}`"));
                    }
                    let num = |s: &str, tag: &str| -> Result<f64, String> {
                        s.strip_prefix(tag)
                            .and_then(|v| v.parse().ok())
                            .ok_or_else(|| format!("malformed verdict field `{s}`"))
                    };
                    verdicts.push(InequalityVerdict {
                        name: parts[0].to_string(),
                        satisfied: parts[1] == "PASS",
                        lhs: num(parts[2], "lhs=")?,
                        rhs: num(parts[3], "rhs=")?,
                        constant: num(parts[4], "constant=")?,
                    });
                }
                other => return Err(format!("unknown manifest key `{other}`")),
            }
        }
        let m = RunManifest {
            scenario_name: scenario_name.ok_or("manifest missing `scenario`")?,
            scenario_digest: scenario_digest.ok_or("manifest missing `scenario_digest`")?,
            build: build.ok_or("manifest missing `build`")?,
            status: status.ok_or("manifest missing `status`")?,
            artifacts,
            verdicts,
        };
        match claimed_digest {
            None => Err("manifest missing `manifest_digest`".to_string()),
            Some(claimed) => {
                let actual = sha256_hex(body.as_bytes());
                if claimed != actual {
                    Err(format!(
                        "manifest digest mismatch: recorded {claimed}, recomputed {actual}"
                    ))
                } else {
                    Ok(m)
                }
            }
        }
    }

    pub fn read(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read manifest `{}`: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Re-hashes every listed artifact in `dir`; errors carry the digest
    /// detail of the first mismatch.
    pub fn verify_artifacts(&self, dir: &Path) -> Result<(), String> {
        for a in &self.artifacts {
            let actual = artifact_of(dir, &a.name)?;
            if actual.digest != a.digest || actual.bytes != a.bytes {
                return Err(format!(
                    "artifact `{}` digest mismatch: manifest has {} ({} bytes), file has {} ({} bytes)",
                    a.name, a.digest, a.bytes, actual.digest, actual.bytes
                ));
            }
        }
        Ok(())
    }
}
