use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Parameterized, Tensor};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Versioned JSON envelope holding named parameter blocks.
///
/// Serialization is deterministic (sorted names, shortest round-trip float
/// formatting); wall-clock metadata lives in a sidecar file instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub seed: u64,
    pub config: serde_json::Value,
    pub params: BTreeMap<String, ParamBlock>,
}

#[derive(Serialize)]
struct Sidecar {
    checkpoint: String,
    written_at_unix: u64,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

impl Checkpoint {
    pub fn capture(seed: u64, config: serde_json::Value, model: &dyn Parameterized) -> Self {
        let mut params = BTreeMap::new();
        model.visit_params(&mut |name, t| {
            params.insert(
                name.to_string(),
                ParamBlock {
                    shape: t.shape().to_vec(),
                    data: t.data().to_vec(),
                },
            );
        });
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            seed,
            config,
            params,
        }
    }

    /// Copies every block into the model. Names and shapes must match the
    /// model exactly, with nothing missing or left over.
    pub fn restore_into(&self, model: &mut dyn Parameterized) -> Result<()> {
        let mut problems = Vec::new();
        let mut seen = 0usize;
        model.visit_params_mut(&mut |name, t: &mut Tensor| match self.params.get(name) {
            Some(block) if block.shape == t.shape() && block.data.len() == t.len() => {
                t.data_mut().copy_from_slice(&block.data);
                t.zero_grad();
                seen += 1;
            }
            Some(block) => problems.push(format!(
                "{name}: checkpoint shape {:?}, model shape {:?}",
                block.shape,
                t.shape()
            )),
            None => problems.push(format!("{name}: missing from checkpoint")),
        });
        if problems.is_empty() && seen != self.params.len() {
            problems.push(format!(
                "checkpoint holds {} blocks, model has {seen}",
                self.params.len()
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Checkpoint(problems.join("; ")))
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("not valid JSON: {e}")))?;
        match raw.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == CHECKPOINT_FORMAT_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::Checkpoint(format!(
                    "unsupported format_version {v} (expected {CHECKPOINT_FORMAT_VERSION})"
                )))
            }
            None => return Err(Error::Checkpoint("missing format_version".into())),
        }
        let ck: Checkpoint =
            serde_json::from_value(raw).map_err(|e| Error::Checkpoint(format!("malformed envelope: {e}")))?;
        for (name, block) in &ck.params {
            if block.shape.iter().product::<usize>() != block.data.len() {
                return Err(Error::Checkpoint(format!("{name}: shape does not match data length")));
            }
        }
        Ok(ck)
    }

    /// Writes the envelope and a `.meta.json` sidecar with the write time.
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))?;
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let meta = Sidecar {
            checkpoint: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
            written_at_unix: now,
        };
        let side = sidecar_path(path);
        std::fs::write(&side, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(side, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::ProjectionHead;
    use crate::numerics::SeedRng;

    #[test]
    fn round_trip_is_lossless() {
        let head = ProjectionHead::new(&mut SeedRng::new(1), 4, 3);
        let ck = Checkpoint::capture(1, serde_json::json!({"d": 3}), &head);
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        assert_eq!(ck, back);
        let mut other = ProjectionHead::new(&mut SeedRng::new(2), 4, 3);
        back.restore_into(&mut other).unwrap();
        assert_eq!(other, head);
    }

    #[test]
    fn rejects_unknown_version_and_shape_mismatch() {
        let head = ProjectionHead::new(&mut SeedRng::new(1), 4, 3);
        let mut ck = Checkpoint::capture(1, serde_json::Value::Null, &head);
        ck.format_version = 99;
        assert!(matches!(Checkpoint::from_json(&ck.to_json().unwrap()), Err(Error::Checkpoint(_))));
        let ck = Checkpoint::capture(1, serde_json::Value::Null, &head);
        let mut wrong = ProjectionHead::new(&mut SeedRng::new(1), 3, 3);
        assert!(ck.restore_into(&mut wrong).is_err());
        assert!(Checkpoint::from_json("{\"format_version\": 1, \"seed\": ").is_err());
    }
}
