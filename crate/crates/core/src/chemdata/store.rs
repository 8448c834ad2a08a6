use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::manifest::{parse_manifest, Modality, PairKind, PairManifest};
use super::sdf::{parse_sdf_bundle, write_sdf_bundle};
use super::types::{Conformation, MoleculeGraph, PocketStructure};
use super::xyz::{parse_xyz_bundle, parse_xyz_pocket_bundle, write_xyz_bundle};
use crate::error::{Error, Result};

pub const TEXTS_FILE: &str = "texts.jsonl";
pub const GRAPHS_FILE: &str = "graphs.sdf";
pub const CONFORMATIONS_FILE: &str = "conformations.xyz";
pub const POCKETS_FILE: &str = "pockets.xyz";
pub const MANIFEST_DIR: &str = "manifests";

pub fn manifest_path(dir: &Path, kind: PairKind) -> std::path::PathBuf {
    dir.join(MANIFEST_DIR).join(format!("{}.jsonl", kind.as_str()))
}

#[derive(Serialize, Deserialize)]
struct TextRecord {
    id: String,
    text: String,
}

/// Records of all four modalities keyed by ID, plus the pair manifests that
/// reference them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub texts: BTreeMap<String, String>,
    pub graphs: BTreeMap<String, MoleculeGraph>,
    pub conformations: BTreeMap<String, Conformation>,
    pub pockets: BTreeMap<String, PocketStructure>,
    pub manifests: BTreeMap<PairKind, PairManifest>,
}

fn read(path: &Path) -> Result<Option<String>> {
    match std::fs::read_to_string(path) {
        Ok(s) => Ok(Some(s)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(path, e)),
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn keyed<T>(items: Vec<T>, id: impl Fn(&T) -> Option<&str>, what: &str) -> Result<BTreeMap<String, T>> {
    let mut out = BTreeMap::new();
    for (k, item) in items.into_iter().enumerate() {
        let key = id(&item)
            .ok_or_else(|| Error::Data(format!("{what} record {k} has no ID")))?
            .to_string();
        if out.insert(key.clone(), item).is_some() {
            return Err(Error::Data(format!("duplicate {what} ID {key}")));
        }
    }
    Ok(out)
}

impl Dataset {
    pub fn contains(&self, modality: Modality, id: &str) -> bool {
        match modality {
            Modality::Language => self.texts.contains_key(id),
            Modality::Graph => self.graphs.contains_key(id),
            Modality::Conformation => self.conformations.contains_key(id),
            Modality::Protein => self.pockets.contains_key(id),
        }
    }

    pub fn manifest(&self, kind: PairKind) -> Result<&PairManifest> {
        self.manifests
            .get(&kind)
            .ok_or_else(|| Error::Data(format!("no {kind} manifest in dataset")))
    }

    pub fn validate(&self) -> Result<()> {
        for m in self.manifests.values() {
            m.check_refs(|md, id| self.contains(md, id))?;
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir.join(MANIFEST_DIR)).map_err(|e| Error::io(dir, e))?;
        let mut texts = String::new();
        for (id, text) in &self.texts {
            let rec = TextRecord {
                id: id.clone(),
                text: text.clone(),
            };
            texts.push_str(&serde_json::to_string(&rec)?);
            texts.push('\n');
        }
        write(&dir.join(TEXTS_FILE), &texts)?;
        write(&dir.join(GRAPHS_FILE), &write_sdf_bundle(self.graphs.values()))?;
        write(
            &dir.join(CONFORMATIONS_FILE),
            &write_xyz_bundle(self.conformations.values()),
        )?;
        write(&dir.join(POCKETS_FILE), &write_xyz_bundle(self.pockets.values()))?;
        for m in self.manifests.values() {
            m.write(&manifest_path(dir, m.kind))?;
        }
        Ok(())
    }

    /// Loads whatever record files and manifests exist under `dir` and
    /// checks every manifest ref.
    pub fn load(dir: &Path) -> Result<Self> {
        if !dir.is_dir() {
            return Err(Error::Data(format!("{} is not a directory", dir.display())));
        }
        let mut ds = Dataset::default();
        if let Some(text) = read(&dir.join(TEXTS_FILE))? {
            for (k, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let rec: TextRecord = serde_json::from_str(line)
                    .map_err(|e| Error::parse(k + 1, format!("{TEXTS_FILE}: {e}")))?;
                if ds.texts.insert(rec.id.clone(), rec.text).is_some() {
                    return Err(Error::Data(format!("duplicate text ID {}", rec.id)));
                }
            }
        }
        if let Some(text) = read(&dir.join(GRAPHS_FILE))? {
            ds.graphs = keyed(parse_sdf_bundle(&text)?, |g| g.molecule_id.as_deref(), "graph")?;
        }
        if let Some(text) = read(&dir.join(CONFORMATIONS_FILE))? {
            ds.conformations = keyed(
                parse_xyz_bundle(&text)?,
                |c| c.molecule_id.as_deref(),
                "conformation",
            )?;
        }
        if let Some(text) = read(&dir.join(POCKETS_FILE))? {
            ds.pockets = keyed(parse_xyz_pocket_bundle(&text)?, |p| p.pocket_id.as_deref(), "pocket")?;
        }
        for kind in PairKind::ALL {
            let path = manifest_path(dir, kind);
            if path.exists() {
                let m = parse_manifest(&path)?;
                if m.kind != kind {
                    return Err(Error::Validation(vec![format!(
                        "{} holds {} records",
                        path.display(),
                        m.kind
                    )]));
                }
                ds.manifests.insert(kind, m);
            }
        }
        ds.validate()?;
        Ok(ds)
    }
}
