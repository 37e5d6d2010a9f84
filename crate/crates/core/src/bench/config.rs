use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mesh_fem::{ProblemDefinition, ProblemId};
use crate::model::OfflineSettings;

const HEAT: &str = include_str!("../../presets/heat.toml");
const RD1: &str = include_str!("../../presets/rd1.toml");
const RD2: &str = include_str!("../../presets/rd2.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    /// Number of parameter draws in the training set.
    pub n_xi: usize,
    /// Frequencies drawn per parameter draw.
    pub n_omega_per_xi: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub x: f64,
    pub interface: f64,
    pub interior: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Caps {
    pub n_s: [usize; 2],
    pub n_f: [usize; 2],
    pub n_gamma: usize,
    pub n_i: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemId,
    pub nx: usize,
    pub ny: usize,
    pub tau: f64,
    pub omega_max: f64,
    pub n_omega: usize,
    pub seed: u64,
    /// Online evaluation samples `M`.
    pub samples: usize,
    /// Validation points for term-count sweeps.
    pub validation_samples: usize,
    /// Worker threads for reference solves; online timing is always sequential.
    pub threads: usize,
    pub output_dir: PathBuf,
    pub training: TrainingConfig,
    pub tolerances: Tolerances,
    pub caps: Caps,
    /// Full problem description, required when `problem = "custom"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub definition: Option<ProblemDefinition>,
}

impl RunConfig {
    pub fn preset(id: ProblemId) -> Result<Self> {
        let text = match id {
            ProblemId::Heat => HEAT,
            ProblemId::Rd1 => RD1,
            ProblemId::Rd2 => RD2,
            ProblemId::Custom => return Err(Error::Config("the custom problem has no preset; pass a config file".into())),
        };
        Self::from_toml(text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Applies `key=value` overrides with dotted keys (`caps.n_gamma=3`,
    /// `caps.n_i=[2,2]`). Values are parsed as TOML, falling back to a string.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        let mut root = toml::Value::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not of the form key=value")))?;
            let value = parse_value(raw.trim());
            let path: Vec<&str> = key.trim().split('.').collect();
            let (last, parents) = path.split_last().expect("split yields one element");
            let mut node = &mut root;
            for part in parents {
                node = node
                    .as_table_mut()
                    .and_then(|t| t.get_mut(*part))
                    .ok_or_else(|| Error::Config(format!("unknown config section `{part}` in `{key}`")))?;
            }
            let table = node
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("`{key}` is not inside a table")))?;
            let old = table
                .get(*last)
                .ok_or_else(|| Error::Config(format!("unknown config key `{key}`")))?;
            let v = coerce(old, value);
            table.insert((*last).to_string(), v);
        }
        let c: RunConfig = root.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("{what} must be positive")));
        if self.nx < 2 || self.ny < 2 {
            return bad("nx and ny (at least 2)");
        }
        if !(self.tau > 0.0) {
            return bad("tau");
        }
        if !(self.omega_max > 0.0) {
            return bad("omega_max");
        }
        if self.n_omega < 2 {
            return bad("n_omega (at least 2)");
        }
        if self.samples == 0 || self.validation_samples == 0 || self.threads == 0 {
            return bad("samples, validation_samples and threads");
        }
        if self.training.n_xi == 0 || self.training.n_omega_per_xi == 0 {
            return bad("training set sizes");
        }
        let t = &self.tolerances;
        if !(t.x > 0.0 && t.interface > 0.0 && t.interior > 0.0) {
            return bad("tolerances");
        }
        let c = &self.caps;
        if c.n_s.iter().chain(&c.n_f).chain(&c.n_i).any(|&n| n == 0) || c.n_gamma == 0 {
            return Err(Error::Config("every term cap must be at least 1".into()));
        }
        if self.problem == ProblemId::Custom && self.definition.is_none() {
            return Err(Error::Config("problem = \"custom\" needs a [definition] section".into()));
        }
        Ok(())
    }

    pub fn problem_definition(&self) -> Result<ProblemDefinition> {
        match &self.definition {
            Some(d) => {
                d.validate()?;
                Ok(d.clone())
            }
            None => ProblemDefinition::preset(self.problem),
        }
    }

    pub fn offline_settings(&self) -> OfflineSettings {
        OfflineSettings {
            eps_x: self.tolerances.x,
            eps_interface: self.tolerances.interface,
            eps_interior: self.tolerances.interior,
            n_s: self.caps.n_s,
            n_f: self.caps.n_f,
            n_gamma: self.caps.n_gamma,
            n_i: self.caps.n_i,
            seed: self.seed,
        }
    }

    /// Hex SHA-256 of the canonical JSON form, excluding the output directory
    /// and thread count, which do not affect results.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        c.threads = 1;
        let json = serde_json::to_vec(&c).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn short_hash(&self) -> String {
        self.hash()[..12].to_string()
    }

    /// Seeds of independent random streams derived from the base seed.
    pub fn stream_seed(&self, stream: u64) -> u64 {
        self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stream)
    }
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Integer literals overriding a float field become floats.
fn coerce(old: &toml::Value, new: toml::Value) -> toml::Value {
    match (old, &new) {
        (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(*i as f64),
        _ => new,
    }
}
