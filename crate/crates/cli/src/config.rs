use std::path::PathBuf;

use gkm_core::pipeline::{CSelector, CharSelection, PipelineRequest};
use gkm_core::roots::{build_datum, REGISTRY};
use serde::Serialize;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Text,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Compute,
    Verify,
    Sheaf,
}

/// A validated invocation of `compute`.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub group: String,
    pub g: usize,
    pub c: CSelector,
    pub characters: CharSelection,
    pub truncation: Option<u32>,
    pub workers: Option<usize>,
    pub format: Format,
    pub output: Option<PathBuf>,
}

/// Parses `reps`, `all`, or a comma separated list of `±1` values.
pub fn parse_characters(s: &str) -> Result<CharSelection, CliError> {
    match s {
        "reps" | "representatives" => Ok(CharSelection::Representatives),
        "all" => Ok(CharSelection::All),
        _ => {
            let signs: Result<Vec<i64>, _> = s.split(',').map(|x| x.trim().parse::<i64>()).collect();
            match signs {
                Ok(v) if !v.is_empty() && v.iter().all(|x| x.abs() == 1) => Ok(CharSelection::One(v)),
                _ => Err(CliError::usage(format!("bad character selection {s:?}; use reps, all, or signs like 1,-1"))),
            }
        }
    }
}

impl RunConfig {
    /// Checks the request against the registry before anything is computed.
    pub fn validate(&self) -> Result<(), CliError> {
        let datum = build_datum(&self.group)
            .map_err(|_| CliError::usage(format!("unknown group {:?}; known groups: {}", self.group, REGISTRY.join(", "))))?;
        if self.g == 0 {
            return Err(CliError::usage("g must be at least 1"));
        }
        if let CSelector::Central(label) = &self.c {
            if datum.central(label).is_err() {
                let known: Vec<&str> = datum.centrals.iter().map(|c| c.label.as_str()).collect();
                return Err(CliError::usage(format!(
                    "unknown central element {label:?} for {}; use regular or one of: {}",
                    self.group,
                    known.join(", ")
                )));
            }
        }
        if let CharSelection::One(v) = &self.characters {
            if v.len() != datum.rank {
                return Err(CliError::usage(format!("character needs {} signs, got {}", datum.rank, v.len())));
            }
        }
        Ok(())
    }

    pub fn request(&self) -> PipelineRequest {
        PipelineRequest {
            group: self.group.clone(),
            g: self.g,
            c: self.c.clone(),
            characters: self.characters.clone(),
            truncation: self.truncation,
        }
    }
}
