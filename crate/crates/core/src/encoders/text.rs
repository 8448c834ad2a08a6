use crate::chemdata::TokenSequence;
use crate::error::{Error, Result};
use crate::numerics::{visit_prefixed, visit_prefixed_mut, Parameterized, SeedRng, Tape, Tensor, Var};

use super::layers::{init_embedding, visit_list, visit_list_mut, FeedForward, LayerNorm, Linear};

/// Pre-norm transformer block with single-head self-attention.
#[derive(Debug, Clone, PartialEq)]
pub struct TextBlock {
    pub norm: LayerNorm,
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub ffn: FeedForward,
}

impl TextBlock {
    fn new(rng: &mut SeedRng, width: usize) -> Self {
        TextBlock {
            norm: LayerNorm::new(width),
            query: Linear::new(rng, width, width, false),
            key: Linear::new(rng, width, width, false),
            value: Linear::new(rng, width, width, false),
            ffn: FeedForward::new(rng, width),
        }
    }

    fn forward(&self, tape: &mut Tape, h: Var) -> Result<Var> {
        let width = self.query.out_dim() as f64;
        let x = self.norm.forward(tape, h)?;
        let q = self.query.forward(tape, x)?;
        let k = self.key.forward(tape, x)?;
        let v = self.value.forward(tape, x)?;
        let kt = tape.transpose(k)?;
        let logits = tape.matmul(q, kt)?;
        let logits = tape.scale(logits, 1.0 / width.sqrt());
        let attn = tape.softmax_rows(logits);
        let mixed = tape.matmul(attn, v)?;
        let h = tape.add(h, mixed)?;
        self.ffn.forward(tape, h)
    }
}

impl Parameterized for TextBlock {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        visit_prefixed("norm", &self.norm, f);
        visit_prefixed("query", &self.query, f);
        visit_prefixed("key", &self.key, f);
        visit_prefixed("value", &self.value, f);
        visit_prefixed("ffn", &self.ffn, f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        visit_prefixed_mut("norm", &mut self.norm, f);
        visit_prefixed_mut("query", &mut self.query, f);
        visit_prefixed_mut("key", &mut self.key, f);
        visit_prefixed_mut("value", &mut self.value, f);
        visit_prefixed_mut("ffn", &mut self.ffn, f);
    }
}

/// Small transformer over word tokens with learned absolute positions.
/// Sequences longer than the position table are truncated.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEncoder {
    pub token_embedding: Tensor,
    pub positions: Tensor,
    pub blocks: Vec<TextBlock>,
}

impl TextEncoder {
    pub fn new(rng: &mut SeedRng, vocab_size: usize, width: usize, layers: usize, max_len: usize) -> Self {
        TextEncoder {
            token_embedding: init_embedding(rng, vocab_size.max(1), width, 1.0),
            positions: init_embedding(rng, max_len, width, 0.5),
            blocks: (0..layers).map(|_| TextBlock::new(rng, width)).collect(),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.token_embedding.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.token_embedding.shape()[1]
    }

    pub fn max_len(&self) -> usize {
        self.positions.shape()[0]
    }

    /// Mean-pooled final token states, shape `[H]`.
    pub fn encode(&self, tape: &mut Tape, seq: &TokenSequence) -> Result<Var> {
        let vocab = self.vocab_size();
        if let Some(&bad) = seq.token_ids.iter().find(|&&t| t >= vocab) {
            return Err(Error::contract(format!(
                "token ID {bad} out of range for vocabulary of {vocab}"
            )));
        }
        let n = seq.token_ids.len().min(self.max_len());
        if n == 0 {
            return Err(Error::contract("cannot encode an empty token sequence"));
        }
        let table = tape.leaf(&self.token_embedding);
        let tokens = tape.gather_rows(table, &seq.token_ids[..n])?;
        let pos_table = tape.leaf(&self.positions);
        let idx: Vec<usize> = (0..n).collect();
        let pos = tape.gather_rows(pos_table, &idx)?;
        let mut h = tape.add(tokens, pos)?;
        for block in &self.blocks {
            h = block.forward(tape, h)?;
        }
        tape.mean_pool(h, None)
    }
}

impl Parameterized for TextEncoder {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("token_embedding", &self.token_embedding);
        f("positions", &self.positions);
        visit_list("blocks", &self.blocks, f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("token_embedding", &mut self.token_embedding);
        f("positions", &mut self.positions);
        visit_list_mut("blocks", &mut self.blocks, f);
    }
}
