//! Versioned on-disk form of a trained model.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::RunConfig;
use crate::error::{Error, Result};
use crate::model::FtDdVsModel;

pub const ARTIFACT_VERSION: u32 = 1;

/// Term counts and training histories, echoed for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSummary {
    pub n_s: [usize; 2],
    pub n_f: [usize; 2],
    pub m_s: usize,
    pub m_f: usize,
    pub n_gamma: usize,
    pub n_i: [usize; 2],
    pub interface_history: Vec<f64>,
    pub interior_history: [Vec<f64>; 2],
}

impl TermSummary {
    pub fn of(model: &FtDdVsModel) -> Self {
        Self {
            n_s: [model.xs[0].n_terms(), model.xs[1].n_terms()],
            n_f: [model.xf[0].n_terms(), model.xf[1].n_terms()],
            m_s: model.affine_s.m_s(),
            m_f: model.affine_f.m_f(),
            n_gamma: model.interface.n_terms(),
            n_i: [model.interior[0].n_terms(), model.interior[1].n_terms()],
            interface_history: model.interface.model.solution.status.history.clone(),
            interior_history: [
                model.interior[0].solution.status.history.clone(),
                model.interior[1].solution.status.history.clone(),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineArtifact {
    pub version: u32,
    pub config_hash: String,
    pub config: RunConfig,
    pub terms: TermSummary,
    pub offline_seconds: f64,
    pub model: FtDdVsModel,
}

impl OfflineArtifact {
    pub fn new(config: &RunConfig, model: FtDdVsModel, offline_seconds: f64) -> Self {
        Self {
            version: ARTIFACT_VERSION,
            config_hash: config.hash(),
            config: config.clone(),
            terms: TermSummary::of(&model),
            offline_seconds,
            model,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let w = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let r = std::io::BufReader::new(std::fs::File::open(path)?);
        let a: OfflineArtifact = serde_json::from_reader(r)?;
        if a.version != ARTIFACT_VERSION {
            return Err(Error::ArtifactMismatch(format!(
                "artifact version {} but this build reads version {ARTIFACT_VERSION}",
                a.version
            )));
        }
        Ok(a)
    }

    /// Checks that an online configuration can use this model: same problem,
    /// mesh and frequency grid. Sampling settings may differ.
    pub fn check_compatible(&self, config: &RunConfig) -> Result<()> {
        let a = &self.config;
        let mut diffs = Vec::new();
        if a.problem != config.problem {
            diffs.push(format!("problem {} vs {}", a.problem.name(), config.problem.name()));
        }
        if (a.nx, a.ny) != (config.nx, config.ny) {
            diffs.push(format!("mesh {}x{} vs {}x{}", a.nx, a.ny, config.nx, config.ny));
        }
        if a.definition != config.definition {
            diffs.push("problem definition differs".into());
        }
        if diffs.is_empty() {
            Ok(())
        } else {
            Err(Error::ArtifactMismatch(diffs.join("; ")))
        }
    }
}
