use serde::{Deserialize, Serialize};

use crate::chemdata::{
    Conformation, Dataset, Modality, MoleculeGraph, PocketStructure, Split, Vocabulary, DEFAULT_MIN_FREQ,
};
use crate::encoders::{
    Checkpoint, EncoderConfig, GraphEncoder, ProjectionHead, TextEncoder, UniMolEncoder,
};
use crate::error::{Error, Result};
use crate::numerics::{
    visit_prefixed, visit_prefixed_mut, AdamConfig, AdamState, Parameterized, SeedRng, Tape, Tensor, Var,
};

/// Kernel widths are clamped to at least this after every update.
pub const MIN_KERNEL_SIGMA: f64 = 1e-3;

/// One record of any modality.
#[derive(Debug, Clone, Copy)]
pub enum ModalityInput<'a> {
    Text(&'a str),
    Graph(&'a MoleculeGraph),
    Conformation(&'a Conformation),
    Pocket(&'a PocketStructure),
}

impl ModalityInput<'_> {
    pub fn modality(&self) -> Modality {
        match self {
            ModalityInput::Text(_) => Modality::Language,
            ModalityInput::Graph(_) => Modality::Graph,
            ModalityInput::Conformation(_) => Modality::Conformation,
            ModalityInput::Pocket(_) => Modality::Protein,
        }
    }
}

/// Looks up a record by modality and ID.
pub fn lookup<'a>(ds: &'a Dataset, modality: Modality, id: &str) -> Result<ModalityInput<'a>> {
    let missing = || Error::Data(format!("no {modality} record with ID {id}"));
    Ok(match modality {
        Modality::Language => ModalityInput::Text(ds.texts.get(id).ok_or_else(missing)?),
        Modality::Graph => ModalityInput::Graph(ds.graphs.get(id).ok_or_else(missing)?),
        Modality::Conformation => ModalityInput::Conformation(ds.conformations.get(id).ok_or_else(missing)?),
        Modality::Protein => ModalityInput::Pocket(ds.pockets.get(id).ok_or_else(missing)?),
    })
}

/// Vocabulary over the language side of every pretrain pair, each text
/// counted once.
pub fn pretrain_vocabulary(ds: &Dataset) -> Vocabulary {
    let mut ids = std::collections::BTreeSet::new();
    for m in ds.manifests.values() {
        let (l, r) = m.kind.modalities();
        for e in m.entries.iter().filter(|e| e.split == Split::Pretrain) {
            if l == Modality::Language {
                ids.insert(e.left.as_str());
            }
            if r == Modality::Language {
                ids.insert(e.right.as_str());
            }
        }
    }
    let texts = ids.into_iter().filter_map(|id| ds.texts.get(id).map(String::as_str));
    Vocabulary::build(texts, DEFAULT_MIN_FREQ)
}

/// An encoder plus its projection head.
#[derive(Debug, Clone, PartialEq)]
pub struct Tower<E> {
    pub encoder: E,
    pub head: ProjectionHead,
}

impl<E: Parameterized> Parameterized for Tower<E> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        visit_prefixed("encoder", &self.encoder, f);
        visit_prefixed("head", &self.head, f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        visit_prefixed_mut("encoder", &mut self.encoder, f);
        visit_prefixed_mut("head", &mut self.head, f);
    }
}

/// Everything needed to rebuild a [`JointModel`] before loading weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoders: EncoderConfig,
    pub vocabulary: Vocabulary,
    pub learnable_temperature: bool,
    pub adam: AdamConfig,
}

/// Four encoders with their heads, one Adam state per tower, and an
/// optional learnable log-temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct JointModel {
    pub config: ModelConfig,
    pub seed: u64,
    pub text: Tower<TextEncoder>,
    pub graph: Tower<GraphEncoder>,
    pub conformation: Tower<UniMolEncoder>,
    pub pocket: Tower<UniMolEncoder>,
    pub log_temperature: Option<Tensor>,
    optimizers: [AdamState; 5],
}

fn slot(m: Modality) -> usize {
    match m {
        Modality::Language => 0,
        Modality::Graph => 1,
        Modality::Conformation => 2,
        Modality::Protein => 3,
    }
}

impl JointModel {
    /// Fresh weights; each tower draws from its own stream of `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let e = config.encoders;
        e.validate()?;
        let d = e.embed_dim;
        let rng = |s: u64| SeedRng::stream(seed, 1000 + s);
        let text = {
            let mut r = rng(0);
            Tower {
                encoder: TextEncoder::new(&mut r, config.vocabulary.len(), e.hidden, e.text_layers, e.max_text_len),
                head: ProjectionHead::new(&mut r, e.hidden, d),
            }
        };
        let graph = {
            let mut r = rng(1);
            Tower {
                encoder: GraphEncoder::new(&mut r, e.hidden, e.graph_layers),
                head: ProjectionHead::new(&mut r, e.hidden, d),
            }
        };
        let unimol = |mut r: SeedRng| -> Result<Tower<UniMolEncoder>> {
            Ok(Tower {
                encoder: UniMolEncoder::new(&mut r, d, e.unimol_layers, e.heads)?,
                head: ProjectionHead::new(&mut r, d, d),
            })
        };
        let conformation = unimol(rng(2))?;
        let pocket = unimol(rng(3))?;
        let log_temperature = config
            .learnable_temperature
            .then(|| Tensor::param(vec![1], vec![0.0]).expect("scalar"));
        let adam = AdamState::new(config.adam);
        Ok(JointModel {
            optimizers: std::array::from_fn(|_| adam.clone()),
            config,
            seed,
            text,
            graph,
            conformation,
            pocket,
            log_temperature,
        })
    }

    /// Builds the vocabulary from the texts of pretrain pairs only, with
    /// the default minimum frequency.
    pub fn for_dataset(ds: &Dataset, encoders: EncoderConfig, learnable_temperature: bool, adam: AdamConfig, seed: u64) -> Result<Self> {
        let vocabulary = pretrain_vocabulary(ds);
        JointModel::new(
            ModelConfig {
                encoders,
                vocabulary,
                learnable_temperature,
                adam,
            },
            seed,
        )
    }

    pub fn embed_dim(&self) -> usize {
        self.config.encoders.embed_dim
    }

    pub fn tower(&self, m: Modality) -> &dyn Parameterized {
        match m {
            Modality::Language => &self.text,
            Modality::Graph => &self.graph,
            Modality::Conformation => &self.conformation,
            Modality::Protein => &self.pocket,
        }
    }

    fn tower_mut(&mut self, m: Modality) -> &mut dyn Parameterized {
        match m {
            Modality::Language => &mut self.text,
            Modality::Graph => &mut self.graph,
            Modality::Conformation => &mut self.conformation,
            Modality::Protein => &mut self.pocket,
        }
    }

    /// Encoder output before the head, shape `[H]` (or `[D]` for 3D towers).
    pub fn encode(&self, tape: &mut Tape, input: ModalityInput<'_>) -> Result<Var> {
        match input {
            ModalityInput::Text(s) => {
                let seq = self.config.vocabulary.tokenize(s);
                self.text.encoder.encode(tape, &seq)
            }
            ModalityInput::Graph(g) => self.graph.encoder.encode(tape, g),
            ModalityInput::Conformation(c) => self.conformation.encoder.encode(tape, c),
            ModalityInput::Pocket(p) => self.pocket.encoder.encode(tape, p),
        }
    }

    pub fn head(&self, m: Modality) -> &ProjectionHead {
        match m {
            Modality::Language => &self.text.head,
            Modality::Graph => &self.graph.head,
            Modality::Conformation => &self.conformation.head,
            Modality::Protein => &self.pocket.head,
        }
    }

    /// Normalized `[B×D]` embeddings of same-modality inputs.
    pub fn embed_batch(&self, tape: &mut Tape, modality: Modality, inputs: &[ModalityInput<'_>]) -> Result<Var> {
        let mut rows = Vec::with_capacity(inputs.len());
        for input in inputs {
            if input.modality() != modality {
                return Err(Error::contract(format!(
                    "{} input in a {modality} batch",
                    input.modality()
                )));
            }
            let e = self.encode(tape, *input)?;
            let w = tape.shape(e)[0];
            rows.push(tape.reshape(e, vec![1, w])?);
        }
        let stacked = tape.concat(&rows, 0)?;
        self.head(modality).project(tape, stacked)
    }

    /// Normalized embedding of one input as plain numbers.
    pub fn embed(&self, input: ModalityInput<'_>) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let e = self.encode(&mut tape, input)?;
        let y = self.head(input.modality()).project(&mut tape, e)?;
        Ok(tape.value(y).to_vec())
    }

    /// Row-major `[N×D]` embeddings, each input on its own tape.
    pub fn embed_all(&self, inputs: &[ModalityInput<'_>]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(inputs.len() * self.embed_dim());
        for input in inputs {
            out.extend(self.embed(*input)?);
        }
        Ok(out)
    }

    pub fn temperature(&self, base_tau: f64) -> f64 {
        match &self.log_temperature {
            Some(t) => base_tau * t.data()[0].exp(),
            None => base_tau,
        }
    }

    /// `1/tau` as a tape node, differentiable when the temperature is learned.
    pub fn inverse_temperature(&self, tape: &mut Tape, base_tau: f64) -> Result<Var> {
        match &self.log_temperature {
            Some(t) => {
                let lt = tape.leaf(t);
                let neg = tape.scale(lt, -1.0);
                let e = tape.exp(neg);
                let r = tape.reshape(e, vec![])?;
                Ok(tape.scale(r, 1.0 / base_tau))
            }
            None => tape.constant(vec![], vec![1.0 / base_tau]),
        }
    }

    /// Applies one Adam step to the towers of `modalities` (and the
    /// temperature when learned). Parameters not reached by the backward
    /// pass get a zero gradient first.
    pub fn step(&mut self, modalities: &[Modality]) -> Result<()> {
        for &m in modalities {
            let idx = slot(m);
            let mut opt = std::mem::replace(&mut self.optimizers[idx], AdamState::new(self.config.adam));
            let tower = self.tower_mut(m);
            tower.visit_params_mut(&mut |_, t| {
                if t.grad().is_none() {
                    let z = vec![0.0; t.len()];
                    t.accumulate_grad(&z).expect("same length");
                }
            });
            let r = opt.step(tower);
            self.optimizers[idx] = opt;
            r?;
        }
        if let Some(t) = &mut self.log_temperature {
            if t.grad().is_some() {
                self.optimizers[4].step(t)?;
            }
        }
        self.conformation.encoder.clamp_kernel_widths(MIN_KERNEL_SIGMA);
        self.pocket.encoder.clamp_kernel_widths(MIN_KERNEL_SIGMA);
        Ok(())
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.config.adam.lr = lr;
        for opt in &mut self.optimizers {
            opt.config.lr = lr;
        }
    }

    pub fn optimizer_steps(&self, m: Modality) -> u64 {
        self.optimizers[slot(m)].steps_taken()
    }

    pub fn checkpoint(&self) -> Result<Checkpoint> {
        Ok(Checkpoint::capture(self.seed, serde_json::to_value(&self.config)?, self))
    }

    /// Rebuilds the model described by a checkpoint and loads its weights.
    /// Optimizer moments are not stored and start fresh.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let config: ModelConfig = serde_json::from_value(ck.config.clone())
            .map_err(|e| Error::Checkpoint(format!("bad model config: {e}")))?;
        let mut model = JointModel::new(config, ck.seed)?;
        ck.restore_into(&mut model)?;
        Ok(model)
    }

    /// True when every parameter block matches bit for bit.
    pub fn weights_equal(&self, other: &JointModel) -> bool {
        let mut a = Vec::new();
        self.visit_params(&mut |n, t| a.push((n.to_string(), t.data().to_vec())));
        let mut b = Vec::new();
        other.visit_params(&mut |n, t| b.push((n.to_string(), t.data().to_vec())));
        a == b
    }
}

impl Parameterized for JointModel {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        visit_prefixed("text", &self.text, f);
        visit_prefixed("graph", &self.graph, f);
        visit_prefixed("conformation", &self.conformation, f);
        visit_prefixed("pocket", &self.pocket, f);
        if let Some(t) = &self.log_temperature {
            f("log_temperature", t);
        }
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        visit_prefixed_mut("text", &mut self.text, f);
        visit_prefixed_mut("graph", &mut self.graph, f);
        visit_prefixed_mut("conformation", &mut self.conformation, f);
        visit_prefixed_mut("pocket", &mut self.pocket, f);
        if let Some(t) = &mut self.log_temperature {
            f("log_temperature", t);
        }
    }
}
