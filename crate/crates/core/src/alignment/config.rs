use serde::{Deserialize, Serialize};

use crate::chemdata::PairKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// One batch of each active kind per cycle; kinds that run out of
    /// batches drop out until the epoch ends.
    #[default]
    RoundRobin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignmentConfig {
    pub temperature: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub active_pairs: Vec<PairKind>,
    pub schedule: Schedule,
    pub seed: u64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub learnable_temperature: bool,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        AlignmentConfig {
            temperature: 1.0,
            batch_size: 16,
            max_epochs: 100,
            learning_rate: 0.001,
            active_pairs: PairKind::ALL.to_vec(),
            schedule: Schedule::RoundRobin,
            seed: 0,
            patience: 10,
            learnable_temperature: false,
        }
    }
}

impl AlignmentConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            problems.push(format!("temperature must be > 0, got {}", self.temperature));
        }
        if self.batch_size < 2 {
            problems.push(format!("batch_size must be >= 2, got {}", self.batch_size));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            problems.push(format!("learning_rate must be >= 0, got {}", self.learning_rate));
        }
        if self.active_pairs.is_empty() {
            problems.push("active_pairs is empty".to_string());
        }
        let mut seen = self.active_pairs.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.active_pairs.len() {
            problems.push("active_pairs lists a kind twice".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Active kinds in canonical order.
    pub fn kinds(&self) -> Vec<PairKind> {
        PairKind::ALL
            .into_iter()
            .filter(|k| self.active_pairs.contains(k))
            .collect()
    }
}
