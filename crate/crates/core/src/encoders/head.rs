use crate::error::{Error, Result};
use crate::numerics::{Parameterized, SeedRng, Tape, Tensor, Var};

use super::layers::init_weight;

/// Modality-specific linear map (no bias) followed by L2 normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead {
    pub weight: Tensor,
}

impl ProjectionHead {
    pub fn new(rng: &mut SeedRng, input: usize, output: usize) -> Self {
        ProjectionHead {
            weight: init_weight(rng, input, output),
        }
    }

    pub fn from_weight(weight: Tensor) -> Result<Self> {
        if weight.shape().len() != 2 {
            return Err(Error::contract(format!(
                "projection weight must be a matrix, got shape {:?}",
                weight.shape()
            )));
        }
        Ok(ProjectionHead {
            weight: weight.with_requires_grad(true),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    /// Projects a `[H]` vector to `[D]`, or a `[B×H]` batch to `[B×D]`,
    /// normalizing every output row.
    pub fn project(&self, tape: &mut Tape, e: Var) -> Result<Var> {
        let shape = tape.shape(e).to_vec();
        let width = *shape.last().unwrap_or(&0);
        if width != self.input_dim() || shape.len() > 2 || shape.is_empty() {
            return Err(Error::Dimension {
                op: "project",
                lhs: shape,
                rhs: self.weight.shape().to_vec(),
            });
        }
        let x = if shape.len() == 1 { tape.reshape(e, vec![1, width])? } else { e };
        let w = tape.leaf(&self.weight);
        let y = tape.matmul(x, w)?;
        let y = tape.l2_normalize(y)?;
        if shape.len() == 1 {
            tape.reshape(y, vec![self.output_dim()])
        } else {
            Ok(y)
        }
    }
}

impl Parameterized for ProjectionHead {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("weight", &self.weight);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("weight", &mut self.weight);
    }
}
