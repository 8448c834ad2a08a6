//! Per-modality encoders and the projection heads that map their outputs
//! into one normalized embedding space.

mod checkpoint;
mod graph;
mod head;
mod layers;
mod text;
mod unimol;

use serde::{Deserialize, Serialize};

pub use checkpoint::{sidecar_path, Checkpoint, ParamBlock, CHECKPOINT_FORMAT_VERSION};
pub use graph::{GinLayer, GraphEncoder};
pub use head::ProjectionHead;
pub use layers::{FeedForward, LayerNorm, Linear, Mlp};
pub use text::{TextBlock, TextEncoder};
pub use unimol::{PairBias, UniMolEncoder, UniMolLayer, KERNEL_RANGE};

/// Encoder sizes. `embed_dim` is the shared output width `D` and also the
/// 3D encoders' atom width and kernel count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub embed_dim: usize,
    pub hidden: usize,
    pub text_layers: usize,
    pub graph_layers: usize,
    pub unimol_layers: usize,
    pub heads: usize,
    pub max_text_len: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            embed_dim: 64,
            hidden: 64,
            text_layers: 2,
            graph_layers: 1,
            unimol_layers: 1,
            heads: 4,
            max_text_len: 128,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let mut problems = Vec::new();
        if self.embed_dim == 0 || self.hidden == 0 {
            problems.push("embed_dim and hidden must be positive".to_string());
        }
        if self.heads == 0 || self.embed_dim % self.heads != 0 {
            problems.push(format!("heads ({}) must divide embed_dim ({})", self.heads, self.embed_dim));
        }
        if self.max_text_len == 0 {
            problems.push("max_text_len must be positive".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(crate::Error::Config(problems.join("; ")))
        }
    }
}
