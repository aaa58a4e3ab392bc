//! Strict key=value scenario files.
//!
//! A scenario is a flat UTF-8 text file, one `key = value` pair per line,
//! `#` starting a comment. Unknown keys are rejected so a misspelled
//! tolerance dial cannot silently fall back to a default. Every error
//! names the offending key and line.
//!
//! Recognized keys and defaults:
//!
//! | key            | default    | meaning                                          |
//! |----------------|------------|--------------------------------------------------|
//! | `name`         | (required) | run identifier, nonempty                          |
//! | `n1`, `n2`     | 64         | horizontal grid points (powers of two)            |
//! | `nz`           | 8          | vertical levels                                   |
//! | `z_max`        | 2π         | slab height                                       |
//! | `dt`           | 0.002      | time step                                         |
//! | `t_end`        | 0.5        | final time                                        |
//! | `dealias_frac` | 2/3        | kept fraction of the Nyquist band                 |
//! | `cadence`      | 25         | steps between recorded diagnostics                |
//! | `seed`         | 0          | RNG seed for random initial data                  |
//! | `theta_init`   | zero       | `zero` \| `mode:k1,k2,amp` \| `band:kmin,kmax,amp` |
//! | `pv_init`      | zero       | `zero` \| `separable:m,k1,k2,amp` \| `band:kmin,kmax,mmax,amp` |
//! | `forcing`      | true       | boundary forcing `Δ̄Ψ₂\|₀` on/off                  |
//! | `diagnostics`  | apriori    | comma list of `apriori,degiorgi,bootstrap,norms`, or `none` |
//! | `output_dir`   | out        | output root (overridden by `QG_OUTPUT_DIR`)       |

use qg_core::dynamics::{FieldSpec, PvSpec, RunConfig};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Diagnostic families a run can compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Diagnostic {
    Apriori,
    Degiorgi,
    Bootstrap,
    Norms,
}

impl Diagnostic {
    pub fn label(self) -> &'static str {
        match self {
            Diagnostic::Apriori => "apriori",
            Diagnostic::Degiorgi => "degiorgi",
            Diagnostic::Bootstrap => "bootstrap",
            Diagnostic::Norms => "norms",
        }
    }
}

/// A fully validated run description.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub config: RunConfig,
    pub diagnostics: BTreeSet<Diagnostic>,
    pub output_dir: PathBuf,
}

impl Scenario {
    /// Canonical serialization: every key on its own line in fixed order,
    /// values printed with full precision. The digest is computed over
    /// these bytes, so it is a pure function of the configuration.
    pub fn canonical(&self) -> String {
        let c = &self.config;
        let theta = match &c.theta_init {
            FieldSpec::Zero => "zero".to_string(),
            FieldSpec::Mode { k1, k2, amp } => format!("mode:{k1},{k2},{amp}"),
            FieldSpec::RandomBand {
                k_min,
                k_max,
                amplitude,
            } => format!("band:{k_min},{k_max},{amplitude}"),
        };
        let pv = match &c.pv_init {
            PvSpec::Zero => "zero".to_string(),
            PvSpec::Separable { m, k1, k2, amp } => format!("separable:{m},{k1},{k2},{amp}"),
            PvSpec::RandomBand {
                k_min,
                k_max,
                m_max,
                amplitude,
            } => format!("band:{k_min},{k_max},{m_max},{amplitude}"),
        };
        let diags = if self.diagnostics.is_empty() {
            "none".to_string()
        } else {
            self.diagnostics
                .iter()
                .map(|d| d.label())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut s = String::new();
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "n1 = {}", c.n1);
        let _ = writeln!(s, "n2 = {}", c.n2);
        let _ = writeln!(s, "nz = {}", c.nz);
        let _ = writeln!(s, "z_max = {:?}", c.z_max);
        let _ = writeln!(s, "dt = {:?}", c.dt);
        let _ = writeln!(s, "t_end = {:?}", c.t_end);
        let _ = writeln!(s, "dealias_frac = {:?}", c.dealias_frac);
        let _ = writeln!(s, "cadence = {}", c.cadence);
        let _ = writeln!(s, "seed = {}", c.seed);
        let _ = writeln!(s, "theta_init = {theta}");
        let _ = writeln!(s, "pv_init = {pv}");
        let _ = writeln!(s, "forcing = {}", c.forcing);
        let _ = writeln!(s, "diagnostics = {diags}");
        s
    }

    /// SHA-256 over the canonical serialization plus the build version,
    /// so artifacts from different builds never alias.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.canonical().as_bytes());
        h.update(build_version().as_bytes());
        hex::encode(h.finalize())
    }

    /// Resolved output directory for this run: `QG_OUTPUT_DIR` (if set)
    /// or the scenario's `output_dir`, with the run name appended.
    pub fn resolved_output_dir(&self) -> PathBuf {
        let root = std::env::var_os("QG_OUTPUT_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| self.output_dir.clone());
        root.join(&self.name)
    }
}

pub fn build_version() -> String {
    format!("qg {}", env!("CARGO_PKG_VERSION"))
}

fn parse_num<T: std::str::FromStr>(key: &str, line: usize, raw: &str) -> Result<T, String> {
    raw.trim()
        .parse::<T>()
        .map_err(|_| format!("line {line}: key `{key}`: invalid value `{}`", raw.trim()))
}

fn parse_field_spec(key: &str, line: usize, raw: &str) -> Result<FieldSpec, String> {
    let raw = raw.trim();
    if raw == "zero" {
        return Ok(FieldSpec::Zero);
    }
    if let Some(rest) = raw.strip_prefix("mode:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() != 3 {
            return Err(format!(
                "line {line}: key `{key}`: `mode:` needs k1,k2,amp"
            ));
        }
        return Ok(FieldSpec::Mode {
            k1: parse_num(key, line, parts[0])?,
            k2: parse_num(key, line, parts[1])?,
            amp: parse_num(key, line, parts[2])?,
        });
    }
    if let Some(rest) = raw.strip_prefix("band:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() != 3 {
            return Err(format!(
                "line {line}: key `{key}`: `band:` needs kmin,kmax,amp"
            ));
        }
        return Ok(FieldSpec::RandomBand {
            k_min: parse_num(key, line, parts[0])?,
            k_max: parse_num(key, line, parts[1])?,
            amplitude: parse_num(key, line, parts[2])?,
        });
    }
    Err(format!(
        "line {line}: key `{key}`: expected zero | mode:k1,k2,amp | band:kmin,kmax,amp, got `{raw}`"
    ))
}

fn parse_pv_spec(key: &str, line: usize, raw: &str) -> Result<PvSpec, String> {
    let raw = raw.trim();
    if raw == "zero" {
        return Ok(PvSpec::Zero);
    }
    if let Some(rest) = raw.strip_prefix("separable:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() != 4 {
            return Err(format!(
                "line {line}: key `{key}`: `separable:` needs m,k1,k2,amp"
            ));
        }
        return Ok(PvSpec::Separable {
            m: parse_num(key, line, parts[0])?,
            k1: parse_num(key, line, parts[1])?,
            k2: parse_num(key, line, parts[2])?,
            amp: parse_num(key, line, parts[3])?,
        });
    }
    if let Some(rest) = raw.strip_prefix("band:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() != 4 {
            return Err(format!(
                "line {line}: key `{key}`: `band:` needs kmin,kmax,mmax,amp"
            ));
        }
        return Ok(PvSpec::RandomBand {
            k_min: parse_num(key, line, parts[0])?,
            k_max: parse_num(key, line, parts[1])?,
            m_max: parse_num(key, line, parts[2])?,
            amplitude: parse_num(key, line, parts[3])?,
        });
    }
    Err(format!(
        "line {line}: key `{key}`: expected zero | separable:m,k1,k2,amp | band:kmin,kmax,mmax,amp, got `{raw}`"
    ))
}

/// Parses scenario text; errors name the offending key and line.
pub fn parse_scenario(text: &str) -> Result<Scenario, String> {
    let mut name: Option<String> = None;
    let mut config = RunConfig {
        n1: 64,
        n2: 64,
        nz: 8,
        z_max: 2.0 * PI,
        dt: 2e-3,
        t_end: 0.5,
        dealias_frac: 2.0 / 3.0,
        cadence: 25,
        seed: 0,
        theta_init: FieldSpec::Zero,
        pv_init: PvSpec::Zero,
        forcing: true,
    };
    let mut diagnostics: BTreeSet<Diagnostic> = [Diagnostic::Apriori].into();
    let mut output_dir = PathBuf::from("out");
    let mut seen: BTreeSet<String> = BTreeSet::new();

    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        let stripped = raw_line.split('#').next().unwrap_or("").trim();
        if stripped.is_empty() {
            continue;
        }
        let Some((key, value)) = stripped.split_once('=') else {
            return Err(format!("line {line}: expected `key = value`, got `{stripped}`"));
        };
        let key = key.trim();
        let value = value.trim();
        if !seen.insert(key.to_string()) {
            return Err(format!("line {line}: duplicate key `{key}`"));
        }
        match key {
            "name" => {
                if value.is_empty() {
                    return Err(format!("line {line}: key `name`: must be nonempty"));
                }
                if !value
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
                {
                    return Err(format!(
                        "line {line}: key `name`: only [A-Za-z0-9_-] allowed, got `{value}`"
                    ));
                }
                name = Some(value.to_string());
            }
            "n1" => config.n1 = parse_num(key, line, value)?,
            "n2" => config.n2 = parse_num(key, line, value)?,
            "nz" => config.nz = parse_num(key, line, value)?,
            "z_max" => config.z_max = parse_num(key, line, value)?,
            "dt" => config.dt = parse_num(key, line, value)?,
            "t_end" => config.t_end = parse_num(key, line, value)?,
            "dealias_frac" => config.dealias_frac = parse_num(key, line, value)?,
            "cadence" => config.cadence = parse_num(key, line, value)?,
            "seed" => config.seed = parse_num(key, line, value)?,
            "theta_init" => config.theta_init = parse_field_spec(key, line, value)?,
            "pv_init" => config.pv_init = parse_pv_spec(key, line, value)?,
            "forcing" => {
                config.forcing = match value {
                    "true" => true,
                    "false" => false,
                    _ => {
                        return Err(format!(
                            "line {line}: key `forcing`: expected true|false, got `{value}`"
                        ))
                    }
                }
            }
            "diagnostics" => {
                diagnostics.clear();
                if value != "none" {
                    for part in value.split(',') {
                        diagnostics.insert(match part.trim() {
                            "apriori" => Diagnostic::Apriori,
                            "degiorgi" => Diagnostic::Degiorgi,
                            "bootstrap" => Diagnostic::Bootstrap,
                            "norms" => Diagnostic::Norms,
                            other => {
                                return Err(format!(
                                    "line {line}: key `diagnostics`: unknown diagnostic `{other}`"
                                ))
                            }
                        });
                    }
                }
            }
            "output_dir" => {
                if value.is_empty() {
                    return Err(format!("line {line}: key `output_dir`: must be nonempty"));
                }
                output_dir = PathBuf::from(value);
            }
            other => return Err(format!("line {line}: unknown key `{other}`")),
        }
    }

    let Some(name) = name else {
        return Err("missing required key `name`".to_string());
    };
    // surface solver-side validation with the key names used here
    config
        .validate()
        .map_err(|e| format!("invalid scenario: {e}"))?;
    config
        .grid()
        .map_err(|e| format!("invalid scenario grid: {e}"))?;
    Ok(Scenario {
        name,
        config,
        diagnostics,
        output_dir,
    })
}

/// Loads and parses a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read scenario `{}`: {e}", path.display()))?;
    parse_scenario(&text).map_err(|e| format!("{}: {e}", path.display()))
}
