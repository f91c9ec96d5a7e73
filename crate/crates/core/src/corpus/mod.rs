//! Collections of artworks: manifest I/O, class statistics, balancing,
//! per-material class descriptions and zero-shot splits.

mod balance;
mod describe;
mod split;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::Token;

pub use balance::balance;
pub use describe::{
    build_class_descriptions, read_descriptions, read_descriptions_file, write_descriptions,
    write_descriptions_file, ClassDescription, DescriptionSet,
};
pub use split::{heldout_count, zsl_split, ZslSplit};

/// Dimension of the precomputed image feature vectors.
pub const DEFAULT_FEATURE_DIM: usize = 100;

/// One collection object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artwork {
    pub id: String,
    pub features: Vec<f64>,
    pub description: String,
    pub materials: BTreeSet<String>,
    /// Filtered description tokens, present once the artwork has been preprocessed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<Token>>,
}

impl Artwork {
    pub fn has_material(&self, material: &str) -> bool {
        self.materials.contains(material)
    }
}

/// A list of artworks together with the union of their materials.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    artworks: Vec<Artwork>,
    classes: BTreeSet<String>,
}

impl Dataset {
    pub fn new(artworks: Vec<Artwork>) -> Self {
        let classes = artworks
            .iter()
            .flat_map(|a| a.materials.iter().cloned())
            .collect();
        Dataset { artworks, classes }
    }

    pub fn artworks(&self) -> &[Artwork] {
        &self.artworks
    }

    pub fn into_artworks(self) -> Vec<Artwork> {
        self.artworks
    }

    pub fn classes(&self) -> &BTreeSet<String> {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.artworks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.artworks.is_empty()
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.artworks.first().map(|a| a.features.len())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestRow {
    id: Option<String>,
    features: Option<Vec<f64>>,
    features_path: Option<PathBuf>,
    description: Option<String>,
    materials: Option<Vec<String>>,
    tokens: Option<Vec<Token>>,
}

fn row_err(row: usize, message: impl Into<String>) -> Error {
    Error::Manifest {
        row,
        message: message.into(),
    }
}

fn read_feature_file(path: &Path, row: usize) -> Result<Vec<f64>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(row_err(
            row,
            format!(
                "{}: length {} is not a multiple of 4",
                path.display(),
                bytes.len()
            ),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64)
        .collect())
}

/// Parses a JSON-lines manifest. `base_dir` resolves relative
/// `features_path` entries. Row numbers in errors are 1-based; blank lines
/// are skipped.
pub fn load_manifest<R: BufRead>(
    reader: R,
    feature_dim: usize,
    base_dir: Option<&Path>,
) -> Result<Dataset> {
    let mut artworks = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let row = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: ManifestRow =
            serde_json::from_str(&line).map_err(|e| row_err(row, e.to_string()))?;
        let id = raw.id.ok_or_else(|| row_err(row, "missing field `id`"))?;
        if id.is_empty() {
            return Err(row_err(row, "empty `id`"));
        }
        if !ids.insert(id.clone()) {
            return Err(row_err(row, format!("duplicate id {id:?}")));
        }
        let features = match (raw.features, raw.features_path) {
            (Some(f), None) => f,
            (None, Some(p)) => {
                let path = match base_dir {
                    Some(base) if p.is_relative() => base.join(p),
                    _ => p,
                };
                read_feature_file(&path, row)?
            }
            (Some(_), Some(_)) => {
                return Err(row_err(row, "both `features` and `features_path` given"))
            }
            (None, None) => {
                return Err(row_err(row, "missing field `features` or `features_path`"))
            }
        };
        if features.len() != feature_dim {
            return Err(row_err(
                row,
                format!("expected {feature_dim} features, found {}", features.len()),
            ));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(row_err(row, "non-finite feature value"));
        }
        let description = raw
            .description
            .ok_or_else(|| row_err(row, "missing field `description`"))?;
        let list = raw
            .materials
            .ok_or_else(|| row_err(row, "missing field `materials`"))?;
        if list.is_empty() {
            return Err(row_err(row, "empty material list"));
        }
        let mut materials = BTreeSet::new();
        for m in list {
            if m.is_empty() {
                return Err(row_err(row, "empty material name"));
            }
            if !materials.insert(m.clone()) {
                return Err(row_err(row, format!("duplicate material {m:?}")));
            }
        }
        artworks.push(Artwork {
            id,
            features,
            description,
            materials,
            tokens: raw.tokens,
        });
    }
    Ok(Dataset::new(artworks))
}

pub fn load_manifest_file(path: &Path, feature_dim: usize) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_manifest(std::io::BufReader::new(file), feature_dim, path.parent())
}

/// Writes one JSON object per artwork with features inline.
pub fn write_manifest<W: Write>(ds: &Dataset, mut out: W) -> Result<()> {
    for a in ds.artworks() {
        serde_json::to_writer(&mut out, a).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_manifest_file(ds: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_manifest(ds, std::io::BufWriter::new(file))
}

/// Number of artworks carrying each material; an artwork counts once for
/// every material it has.
pub fn class_histogram(ds: &Dataset) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for a in ds.artworks() {
        for m in &a.materials {
            *counts.entry(m.clone()).or_insert(0) += 1;
        }
    }
    counts
}

/// Like [`class_histogram`] but each artwork contributes a total weight of
/// one, split evenly over its materials. The values sum to the artwork count.
pub fn class_histogram_fractional(ds: &Dataset) -> BTreeMap<String, f64> {
    let mut counts = BTreeMap::new();
    for a in ds.artworks() {
        let w = 1.0 / a.materials.len() as f64;
        for m in &a.materials {
            *counts.entry(m.clone()).or_insert(0.0) += w;
        }
    }
    counts
}

#[cfg(test)]
pub(crate) fn artwork(id: &str, materials: &[&str], description: &str, dim: usize) -> Artwork {
    Artwork {
        id: id.to_string(),
        features: vec![0.0; dim],
        description: description.to_string(),
        materials: materials.iter().map(|m| m.to_string()).collect(),
        tokens: None,
    }
}
