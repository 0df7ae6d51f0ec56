//! JSON sheaf descriptors.

use std::path::Path;

use gkm_core::pipeline::Numerator;
use gkm_core::sheaf::{from_bm, from_monodromy, global_sections, BMSheafSpec, MonodromySpec, SheafModel};
use gkm_core::FreenessCertificate;
use serde::{Deserialize, Serialize};
use serde_path_to_error::{Path as JsonPath, Segment};

use crate::CliError;

/// Exactly one of `monodromy` or `bm` must be present.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SheafDescriptor {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub truncation: Option<u32>,
    #[serde(default)]
    pub monodromy: Option<MonodromySpec>,
    #[serde(default)]
    pub bm: Option<BMSheafSpec>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SheafReport {
    pub name: Option<String>,
    pub numerator: Numerator,
    pub generator_degrees: Vec<u32>,
    pub certificate: FreenessCertificate,
}

/// RFC 6901 pointer for a serde path.
pub fn json_pointer(path: &JsonPath) -> String {
    let mut s = String::new();
    for seg in path.iter() {
        s.push('/');
        match seg {
            Segment::Seq { index } => s.push_str(&index.to_string()),
            Segment::Map { key } => s.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => s.push_str(variant),
            Segment::Unknown => s.push('?'),
        }
    }
    if s.is_empty() {
        s.push('/');
    }
    s
}

pub fn parse(text: &str) -> Result<SheafDescriptor, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = json_pointer(e.path());
        CliError::usage(format!("schema error at {pointer}: {}", e.inner()))
    })
}

pub fn load(path: &Path) -> Result<SheafDescriptor, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

impl SheafDescriptor {
    pub fn model(&self) -> Result<SheafModel, CliError> {
        let bad = |e: gkm_core::sheaf::SheafError| CliError::usage(format!("invalid sheaf: {e}"));
        match (&self.monodromy, &self.bm) {
            (Some(m), None) => from_monodromy(m).map_err(bad),
            (None, Some(b)) => from_bm(b).map_err(bad),
            _ => Err(CliError::usage("schema error at /: exactly one of \"monodromy\" or \"bm\" is required")),
        }
    }

    /// Sections contain the product of all weights times every stalk, so
    /// generators sit at most that far above the top fiber degree.
    pub fn default_truncation(&self, model: &SheafModel) -> u32 {
        let top = model.stalks.iter().flat_map(|s| s.basis().iter().map(|b| b.degree)).max().unwrap_or(0);
        top + 2 * model.supported_weights().len() as u32 + 4
    }
}

pub fn run(desc: &SheafDescriptor, truncation: Option<u32>) -> Result<SheafReport, CliError> {
    let model = desc.model()?;
    let d = truncation.or(desc.truncation).unwrap_or_else(|| desc.default_truncation(&model));
    let sections = global_sections(&model, d);
    let h = sections.hilbert_numerator(d);
    Ok(SheafReport {
        name: desc.name.clone(),
        numerator: Numerator { coefficients: h.trimmed(), truncation: d, stable: h.stable },
        generator_degrees: sections.generator_degrees(d),
        certificate: sections.certify_free(d),
    })
}
