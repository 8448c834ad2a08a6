use crate::chemdata::{pairwise_distances, PairType, Structure3d, NUM_ATOM_TYPES};
use crate::error::{Error, Result};
use crate::numerics::{visit_prefixed, visit_prefixed_mut, Parameterized, SeedRng, Tape, Tensor, Var};

use super::layers::{filled, init_embedding, visit_list, visit_list_mut, FeedForward, LayerNorm, Linear};

/// Upper end of the interval on which kernel centers are spread, in Å.
pub const KERNEL_RANGE: f64 = 12.0;

/// What the attention logits are biased with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairBias {
    /// Pair channels initialized from Gaussian distance features.
    Geometric,
    /// No pair channels at all: a distance-blind transformer.
    Zero,
}

/// One atom update plus one pair update.
///
/// The attention sublayer is pre-norm with a residual; a pre-norm residual
/// feed-forward sublayer follows it.
#[derive(Debug, Clone, PartialEq)]
pub struct UniMolLayer {
    pub norm: LayerNorm,
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub ffn: FeedForward,
}

impl UniMolLayer {
    fn new(rng: &mut SeedRng, width: usize) -> Self {
        UniMolLayer {
            norm: LayerNorm::new(width),
            query: Linear::new(rng, width, width, false),
            key: Linear::new(rng, width, width, false),
            value: Linear::new(rng, width, width, false),
            ffn: FeedForward::new(rng, width),
        }
    }

    /// Attention with per-head pair bias. `q` holds one `N×N` channel per
    /// head, or is empty for the distance-blind variant (no pair update).
    ///
    /// Per head: `softmax(Q_h K_hᵀ / sqrt(d_head) + q_h) V_h`, heads
    /// concatenated and added to `h`; the pair channel becomes
    /// `q_h + Q_h K_hᵀ / sqrt(D)`.
    pub fn attention(&self, tape: &mut Tape, h: Var, q: &[Var], heads: usize) -> Result<(Var, Vec<Var>)> {
        let width = self.query.out_dim();
        if heads == 0 || width % heads != 0 {
            return Err(Error::contract(format!("{heads} heads do not divide width {width}")));
        }
        if !q.is_empty() && q.len() != heads {
            return Err(Error::contract(format!(
                "pair representation has {} channels for {heads} heads",
                q.len()
            )));
        }
        let dh = width / heads;
        let x = self.norm.forward(tape, h)?;
        let qm = self.query.forward(tape, x)?;
        let km = self.key.forward(tape, x)?;
        let vm = self.value.forward(tape, x)?;
        let mut outs = Vec::with_capacity(heads);
        let mut next_q = Vec::with_capacity(q.len());
        for hd in 0..heads {
            let qh = tape.slice_cols(qm, hd * dh, dh)?;
            let kh = tape.slice_cols(km, hd * dh, dh)?;
            let vh = tape.slice_cols(vm, hd * dh, dh)?;
            let kt = tape.transpose(kh)?;
            let s = tape.matmul(qh, kt)?;
            let mut logits = tape.scale(s, 1.0 / (dh as f64).sqrt());
            if let Some(&bias) = q.get(hd) {
                logits = tape.add(logits, bias)?;
                let upd = tape.scale(s, 1.0 / (width as f64).sqrt());
                next_q.push(tape.add(bias, upd)?);
            }
            let attn = tape.softmax_rows(logits);
            outs.push(tape.matmul(attn, vh)?);
        }
        let mixed = tape.concat(&outs, 1)?;
        Ok((tape.add(h, mixed)?, next_q))
    }

    pub fn forward(&self, tape: &mut Tape, h: Var, q: &[Var], heads: usize) -> Result<(Var, Vec<Var>)> {
        let (h, q) = self.attention(tape, h, q, heads)?;
        Ok((self.ffn.forward(tape, h)?, q))
    }
}

impl Parameterized for UniMolLayer {
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

/// Transformer over atoms whose attention is biased by pair channels built
/// from interatomic distances, so the output depends on geometry only
/// through distances. Used for both ligand conformations and pockets.
#[derive(Debug, Clone, PartialEq)]
pub struct UniMolEncoder {
    /// `W_h`: one row per atom type.
    pub atom_embedding: Tensor,
    /// Per pair type `a_t` in `a_t d + b_t`.
    pub pair_scale: Tensor,
    /// Per pair type `b_t`.
    pub pair_shift: Tensor,
    pub kernel_mu: Tensor,
    pub kernel_sigma: Tensor,
    /// Maps the `K` kernel features of a pair to one channel per head.
    pub pair_projection: Linear,
    pub layers: Vec<UniMolLayer>,
    pub heads: usize,
}

impl UniMolEncoder {
    /// `width` is both the atom state width and the kernel count.
    pub fn new(rng: &mut SeedRng, width: usize, layers: usize, heads: usize) -> Result<Self> {
        if heads == 0 || width % heads != 0 {
            return Err(Error::Config(format!("{heads} heads do not divide width {width}")));
        }
        let k = width;
        let mu: Vec<f64> = (0..k)
            .map(|i| if k == 1 { 0.0 } else { KERNEL_RANGE * i as f64 / (k - 1) as f64 })
            .collect();
        Ok(UniMolEncoder {
            atom_embedding: init_embedding(rng, NUM_ATOM_TYPES, width, 1.0),
            pair_scale: filled(vec![PairType::COUNT], 1.0),
            pair_shift: filled(vec![PairType::COUNT], 0.0),
            kernel_mu: Tensor::param(vec![k], mu)?,
            kernel_sigma: filled(vec![k], KERNEL_RANGE / k as f64),
            pair_projection: Linear::new(rng, k, heads, false),
            layers: (0..layers).map(|_| UniMolLayer::new(rng, width)).collect(),
            heads,
        })
    }

    pub fn width(&self) -> usize {
        self.atom_embedding.shape()[1]
    }

    pub fn num_kernels(&self) -> usize {
        self.kernel_mu.len()
    }

    /// `[P×K]` Gaussian features of `P` pairs, row `p` holding
    /// `G(a_t d + b_t; mu_k, sigma_k)` for pair type `t = types[p]`.
    pub fn gaussian_pair_features(&self, tape: &mut Tape, distances: &[f64], types: &[PairType]) -> Result<Var> {
        if distances.len() != types.len() {
            return Err(Error::Dimension {
                op: "gaussian_pair_features",
                lhs: vec![distances.len()],
                rhs: vec![types.len()],
            });
        }
        if let Some(d) = distances.iter().find(|d| !(**d >= 0.0)) {
            return Err(Error::contract(format!("pair distance must be >= 0, got {d}")));
        }
        let idx: Vec<usize> = types.iter().map(|t| t.index()).collect();
        let a = tape.leaf(&self.pair_scale);
        let b = tape.leaf(&self.pair_shift);
        let a = tape.gather_elements(a, &idx)?;
        let b = tape.gather_elements(b, &idx)?;
        let d = tape.constant(vec![distances.len()], distances.to_vec())?;
        let x = tape.mul(a, d)?;
        let x = tape.add(x, b)?;
        let mu = tape.leaf(&self.kernel_mu);
        let sigma = tape.leaf(&self.kernel_sigma);
        tape.gaussian_kernel(x, mu, sigma)
    }

    /// Kernel features of a single pair as plain numbers.
    pub fn pair_features(&self, distance: f64, pair_type: PairType) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let v = self.gaussian_pair_features(&mut tape, &[distance], &[pair_type])?;
        Ok(tape.value(v).to_vec())
    }

    /// Initial pair channels `q⁰`: one `N×N` matrix per head.
    pub fn initial_pair_bias(&self, tape: &mut Tape, s: &dyn Structure3d) -> Result<Vec<Var>> {
        let n = s.num_atoms();
        let dist = pairwise_distances(s);
        let types = s.atom_types();
        let mut pair_types = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                pair_types.push(PairType::of(types[i], types[j]));
            }
        }
        let feats = self.gaussian_pair_features(tape, dist.data(), &pair_types)?;
        let per_head = self.pair_projection.forward(tape, feats)?;
        (0..self.heads)
            .map(|hd| {
                let col = tape.slice_cols(per_head, hd, 1)?;
                tape.reshape(col, vec![n, n])
            })
            .collect()
    }

    /// Mean-pooled final atom states, shape `[D]`.
    pub fn encode_with(&self, tape: &mut Tape, s: &dyn Structure3d, bias: PairBias) -> Result<Var> {
        let table = tape.leaf(&self.atom_embedding);
        let mut h = tape.gather_rows(table, s.atom_types())?;
        let mut q = match bias {
            PairBias::Geometric => self.initial_pair_bias(tape, s)?,
            PairBias::Zero => Vec::new(),
        };
        for layer in &self.layers {
            let (h2, q2) = layer.forward(tape, h, &q, self.heads)?;
            h = h2;
            q = q2;
        }
        tape.mean_pool(h, None)
    }

    pub fn encode(&self, tape: &mut Tape, s: &dyn Structure3d) -> Result<Var> {
        self.encode_with(tape, s, PairBias::Geometric)
    }

    /// Restores `sigma > 0` after an optimizer step.
    pub fn clamp_kernel_widths(&mut self, min_sigma: f64) {
        for s in self.kernel_sigma.data_mut() {
            if *s < min_sigma {
                *s = min_sigma;
            }
        }
    }
}

impl Parameterized for UniMolEncoder {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("atom_embedding", &self.atom_embedding);
        f("pair_scale", &self.pair_scale);
        f("pair_shift", &self.pair_shift);
        f("kernel_mu", &self.kernel_mu);
        f("kernel_sigma", &self.kernel_sigma);
        visit_prefixed("pair_projection", &self.pair_projection, f);
        visit_list("layers", &self.layers, f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("atom_embedding", &mut self.atom_embedding);
        f("pair_scale", &mut self.pair_scale);
        f("pair_shift", &mut self.pair_shift);
        f("kernel_mu", &mut self.kernel_mu);
        f("kernel_sigma", &mut self.kernel_sigma);
        visit_prefixed_mut("pair_projection", &mut self.pair_projection, f);
        visit_list_mut("layers", &mut self.layers, f);
    }
}
