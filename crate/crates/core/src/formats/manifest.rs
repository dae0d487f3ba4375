use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::files::write_text;
use crate::error::{Error, Result};
use crate::preprocess::{Aggregation, FootSide, Label};

/// What a manifest entry points at.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ManifestKind {
    Raw,
    Image(Aggregation),
}

impl fmt::Display for ManifestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManifestKind::Raw => f.write_str("raw"),
            ManifestKind::Image(a) => a.fmt(f),
        }
    }
}

impl FromStr for ManifestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(ManifestKind::Raw),
            other => other.parse().map(ManifestKind::Image),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestRecord {
    /// As written in the manifest; relative paths resolve against its directory.
    pub path: PathBuf,
    pub foot_side: FootSide,
    pub label: Label,
    pub case_id: String,
    pub kind: ManifestKind,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    /// Directory relative paths are resolved against.
    pub base: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn new(base: impl Into<PathBuf>) -> Self {
        Manifest {
            base: base.into(),
            records: Vec::new(),
        }
    }

    pub fn resolve(&self, record: &ManifestRecord) -> PathBuf {
        if record.path.is_absolute() {
            record.path.clone()
        } else {
            self.base.join(&record.path)
        }
    }

    /// Tab-separated, one record per line.
    pub fn to_text(&self) -> String {
        self.records
            .iter()
            .map(|r| {
                format!(
                    "{}\t{}\t{}\t{}\t{}\n",
                    r.path.display(),
                    r.foot_side,
                    r.label,
                    r.case_id,
                    r.kind
                )
            })
            .collect()
    }

    pub fn parse(text: &str, base: impl Into<PathBuf>, origin: &Path) -> Result<Self> {
        let mut m = Manifest::new(base);
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                return Err(Error::parse(
                    origin,
                    i + 1,
                    format!("expected 5 tab-separated fields, got {}", f.len()),
                ));
            }
            let bad = |e: Error| Error::parse(origin, i + 1, e.to_string());
            m.records.push(ManifestRecord {
                path: PathBuf::from(f[0]),
                foot_side: f[1].parse().map_err(bad)?,
                label: f[2].parse().map_err(bad)?,
                case_id: f[3].to_string(),
                kind: f[4].parse().map_err(bad)?,
            });
        }
        Ok(m)
    }

    /// Reads a manifest and checks that every referenced file exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let m = Self::parse(&text, base, path)?;
        for (i, r) in m.records.iter().enumerate() {
            let p = m.resolve(r);
            if !p.is_file() {
                return Err(Error::parse(path, i + 1, format!("{} does not exist", p.display())));
            }
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_text())
    }
}
