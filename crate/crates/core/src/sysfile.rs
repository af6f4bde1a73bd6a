//! JSON system files: loading, validating, and round-tripping generator
//! systems.
//!
//! A system file names the domain, the composition mode, and the ordered
//! generator list. Each generator entry is a tagged map family plus an
//! optional regularity block; omitted regularity data is derived on load
//! exactly as [`SmoothMap1D::new`] does. All data re-passes constructor
//! validation on load, so a file can never smuggle in an invalid spline
//! or out-of-range parameter.

use crate::domain::{DomainKind, DomainSpace};
use crate::error::{Error, Result};
use crate::map::{HolderData, MapFamily, SmoothMap1D};
use crate::spline::MonotoneSpline;
use crate::system::{GeneratorSystem, Mode};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One generator entry: a tagged family, optionally with explicit
/// regularity data (otherwise derived on load).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorEntry {
    #[serde(flatten)]
    pub family: MapFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holder: Option<HolderData>,
}

/// The on-disk shape of a generator system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemFile {
    pub domain: DomainKind,
    pub mode: Mode,
    pub generators: Vec<GeneratorEntry>,
}

impl SystemFile {
    /// Parses JSON text. Malformed JSON surfaces with line/column intact.
    pub fn parse(text: &str) -> Result<SystemFile> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads and parses a file.
    pub fn load(path: &Path) -> Result<SystemFile> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::SystemFile(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    /// Builds the validated in-memory system. Every family re-passes its
    /// constructor checks; splines are rebuilt through
    /// [`MonotoneSpline::new`] so deserialization cannot bypass the
    /// monotonicity box conditions.
    pub fn build(&self) -> Result<GeneratorSystem> {
        let domain = DomainSpace { kind: self.domain };
        let mut generators = Vec::with_capacity(self.generators.len());
        for (i, entry) in self.generators.iter().enumerate() {
            let family = match &entry.family {
                MapFamily::Spline { spline } => MapFamily::Spline {
                    spline: MonotoneSpline::new(
                        spline.knots.clone(),
                        spline.values.clone(),
                        spline.derivs.clone(),
                    )
                    .map_err(|e| {
                        Error::SystemFile(format!("generator {}: {e}", i + 1))
                    })?,
                },
                other => other.clone(),
            };
            let map = SmoothMap1D::new(domain, family, entry.holder)
                .map_err(|e| Error::SystemFile(format!("generator {}: {e}", i + 1)))?;
            generators.push(map);
        }
        GeneratorSystem::new(domain, generators, self.mode)
    }

    /// The on-disk shape of an in-memory system (regularity data included,
    /// so the round trip is lossless).
    pub fn from_system(system: &GeneratorSystem) -> SystemFile {
        SystemFile {
            domain: system.domain.kind,
            mode: system.mode,
            generators: system
                .generators
                .iter()
                .map(|g| GeneratorEntry {
                    family: g.family.clone(),
                    holder: Some(g.holder),
                })
                .collect(),
        }
    }
}

/// Convenience: load + build in one step.
pub fn load_system(path: &Path) -> Result<GeneratorSystem> {
    SystemFile::load(path)?.build()
}
