//! Synthetic four-modality corpus.
//!
//! Every sample owns a latent `z` in `[0, 1)^K`. Each modality renders its
//! own noisy copy of `z`:
//!
//! * text: one code word `f{k}q{b}` per latent coordinate, where `b` is the
//!   coordinate quantized into [`QUANT_LEVELS`] buckets, plus a sentence
//!   naming the scaffold motif;
//! * graph: one marker atom per coordinate (the element identifies `k`)
//!   carrying a branch of `b` further atoms of the same element, so the
//!   bucket is an atom count; markers are joined as a chain or, for the
//!   ring motif, an aromatic ring;
//! * conformation: the marker backbone in 3D plus one atom of the marker's
//!   element per coordinate at distance `1 + 2 z_k` Å from its marker,
//!   then randomly rotated and translated;
//! * pocket: marker atoms with partners of the same element at the
//!   complementary distance `3 + 2 (1 - z_k)` Å.
//!
//! No element identifies a bucket on its own: the value of a coordinate is
//! only readable together with the marker it is attached to.
//!
//! The same sample index lands in the same split for all four pair kinds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::manifest::{PairEntry, PairKind, PairManifest, Split};
use super::store::Dataset;
use super::types::{Bond, BondOrder, Conformation, MoleculeGraph, PocketStructure};
use super::UNK_TYPE;
use crate::error::{Error, Result};
use crate::numerics::SeedRng;

pub const QUANT_LEVELS: usize = 8;

/// C, N, O, F, P, S, Cl, Br: marks which latent coordinate a site encodes.
const MARKER_TYPES: [usize; 8] = [1, 2, 3, 4, 5, 6, 7, 8];

const MOLECULE_BOND_SPACING: f64 = 1.5;
const POCKET_SITE_SPACING: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub latent_dim: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_samples: 2000,
            latent_dim: 8,
            noise_sigma: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticM4 {
    pub config: SynthConfig,
    pub dataset: Dataset,
    /// Noise-free latent of every sample.
    pub latents: Vec<Vec<f64>>,
    /// Split of every sample.
    pub splits: Vec<Split>,
    /// Class name rendered from the noise-free latent; the text records
    /// embed a noisy version of it.
    pub names: Vec<String>,
}

pub fn text_id(i: usize) -> String {
    format!("L{i:06}")
}
pub fn graph_id(i: usize) -> String {
    format!("G{i:06}")
}
pub fn conformation_id(i: usize) -> String {
    format!("C{i:06}")
}
pub fn pocket_id(i: usize) -> String {
    format!("P{i:06}")
}

fn buckets(z: &[f64]) -> Vec<usize> {
    z.iter()
        .map(|v| ((v * QUANT_LEVELS as f64).floor().max(0.0) as usize).min(QUANT_LEVELS - 1))
        .collect()
}

fn is_ring(z: &[f64]) -> bool {
    z.len() >= 3 && buckets(&z[..1])[0] >= QUANT_LEVELS / 2
}

/// Space-separated code words for a latent.
pub fn render_name(z: &[f64]) -> String {
    buckets(z)
        .iter()
        .enumerate()
        .map(|(k, b)| format!("f{k}q{b}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn render_text(z: &[f64]) -> String {
    let motif = if is_ring(z) { "ring" } else { "chain" };
    format!(
        "The molecule is {}. It is built on a {motif} scaffold.",
        render_name(z)
    )
}

fn marker(k: usize) -> usize {
    MARKER_TYPES[k % MARKER_TYPES.len()]
}

/// Marker backbone: a closed aromatic ring, or a single-bonded chain
/// capped with an unknown atom.
fn backbone(z: &[f64]) -> (Vec<usize>, Vec<Bond>) {
    let k_dim = z.len();
    let ring = is_ring(z);
    let types: Vec<usize> = (0..k_dim).map(marker).collect();
    let order = if ring { BondOrder::Aromatic } else { BondOrder::Single };
    let mut bonds: Vec<Bond> = (0..k_dim - 1).map(|k| Bond { i: k, j: k + 1, order }).collect();
    if ring {
        bonds.push(Bond { i: k_dim - 1, j: 0, order });
    }
    (types, bonds)
}

fn graph_layout(z: &[f64]) -> (Vec<usize>, Vec<Bond>) {
    let (mut types, mut bonds) = backbone(z);
    for (k, &q) in buckets(z).iter().enumerate() {
        let mut prev = k;
        for _ in 0..q {
            types.push(marker(k));
            bonds.push(Bond { i: prev, j: types.len() - 1, order: BondOrder::Single });
            prev = types.len() - 1;
        }
    }
    if !is_ring(z) {
        types.push(UNK_TYPE);
        bonds.push(Bond { i: z.len() - 1, j: types.len() - 1, order: BondOrder::Single });
    }
    (types, bonds)
}

pub fn render_graph(z: &[f64], id: Option<String>) -> MoleculeGraph {
    let (types, bonds) = graph_layout(z);
    MoleculeGraph::new(types, bonds, id).expect("layout is a valid graph")
}

fn circle_radius(k_dim: usize, spacing: f64) -> f64 {
    if k_dim <= 2 {
        spacing / 2.0
    } else {
        spacing / (2.0 * (std::f64::consts::PI / k_dim as f64).sin())
    }
}

fn direction(k: usize, k_dim: usize) -> [f64; 3] {
    let theta = 2.0 * std::f64::consts::PI * k as f64 / k_dim as f64;
    [theta.cos(), theta.sin(), 0.0]
}

/// Pose RNG keyed on the rendered latent, so equal latents get equal poses.
fn pose_rng(z: &[f64], seed: u64, salt: u64) -> SeedRng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed.rotate_left(17) ^ salt;
    for v in z {
        h ^= v.to_bits();
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
        h ^= h >> 29;
    }
    SeedRng::new(h)
}

fn place(local: Vec<[f64; 3]>, rng: &mut SeedRng) -> Vec<[f64; 3]> {
    let r = rng.rotation();
    let t = [rng.uniform_in(-5.0, 5.0), rng.uniform_in(-5.0, 5.0), rng.uniform_in(-5.0, 5.0)];
    local
        .into_iter()
        .map(|p| {
            let mut q = [0.0; 3];
            for i in 0..3 {
                q[i] = r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2] + t[i];
            }
            q
        })
        .collect()
}

pub fn render_conformation(z: &[f64], seed: u64, id: Option<String>) -> Conformation {
    let k_dim = z.len();
    let (mut types, _) = backbone(z);
    types.extend((0..k_dim).map(marker));
    let radius = circle_radius(k_dim, MOLECULE_BOND_SPACING);
    let mut local = Vec::with_capacity(types.len());
    for k in 0..k_dim {
        let u = direction(k, k_dim);
        local.push([radius * u[0], radius * u[1], 0.0]);
    }
    for k in 0..k_dim {
        let u = direction(k, k_dim);
        let r = radius + 1.0 + 2.0 * z[k];
        local.push([r * u[0], r * u[1], 0.0]);
    }
    if !is_ring(z) {
        types.push(UNK_TYPE);
        let m = local[k_dim - 1];
        local.push([m[0], m[1], 1.2]);
    }
    let coords = place(local, &mut pose_rng(z, seed, 1));
    Conformation::new(types, coords, id).expect("finite layout")
}

pub fn render_pocket(z: &[f64], seed: u64, id: Option<String>) -> PocketStructure {
    let k_dim = z.len();
    let radius = circle_radius(k_dim, POCKET_SITE_SPACING);
    let mut types = Vec::with_capacity(2 * k_dim);
    let mut local = Vec::with_capacity(2 * k_dim);
    for k in 0..k_dim {
        let u = direction(k, k_dim);
        types.push(marker(k));
        local.push([radius * u[0], radius * u[1], 0.0]);
    }
    for k in 0..k_dim {
        let u = direction(k, k_dim);
        let r = radius + 3.0 + 2.0 * (1.0 - z[k]);
        types.push(marker(k));
        local.push([r * u[0], r * u[1], 0.0]);
    }
    let coords = place(local, &mut pose_rng(z, seed, 2));
    PocketStructure::new(types, coords, id).expect("finite layout")
}

fn noisy(z: &[f64], sigma: f64, rng: &mut SeedRng) -> Vec<f64> {
    z.iter()
        .map(|v| {
            let e = rng.normal();
            (v + sigma * e).clamp(0.0, 1.0 - 1e-12)
        })
        .collect()
}

fn assign_splits(n: usize, seed: u64) -> Vec<Split> {
    let mut order: Vec<usize> = (0..n).collect();
    SeedRng::stream(seed, 100).shuffle(&mut order);
    let n_pretrain = n * 8 / 10;
    let n_validation = n / 10;
    let mut splits = vec![Split::Test; n];
    for (rank, &i) in order.iter().enumerate() {
        splits[i] = if rank < n_pretrain {
            Split::Pretrain
        } else if rank < n_pretrain + n_validation {
            Split::Validation
        } else {
            Split::Test
        };
    }
    splits
}

/// Generates records, manifests (80/10/10 splits) and latents.
pub fn generate_synthetic_m4(cfg: SynthConfig) -> Result<SyntheticM4> {
    if cfg.n_samples < 2 {
        return Err(Error::Config(format!(
            "need at least 2 samples for in-batch negatives, got {}",
            cfg.n_samples
        )));
    }
    if cfg.latent_dim < 2 {
        return Err(Error::Config(format!("latent_dim must be at least 2, got {}", cfg.latent_dim)));
    }
    if !(cfg.noise_sigma >= 0.0 && cfg.noise_sigma.is_finite()) {
        return Err(Error::Config(format!("noise_sigma must be >= 0, got {}", cfg.noise_sigma)));
    }
    let (n, k_dim, seed) = (cfg.n_samples, cfg.latent_dim, cfg.seed);
    let mut latent_rng = SeedRng::stream(seed, 0);
    let latents: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..k_dim).map(|_| latent_rng.uniform()).collect())
        .collect();
    let mut noise: Vec<SeedRng> = (1..=4).map(|s| SeedRng::stream(seed, s)).collect();

    let mut ds = Dataset::default();
    let mut names = Vec::with_capacity(n);
    for (i, z) in latents.iter().enumerate() {
        let zt = noisy(z, cfg.noise_sigma, &mut noise[0]);
        ds.texts.insert(text_id(i), render_text(&zt));
        let zg = noisy(z, cfg.noise_sigma, &mut noise[1]);
        ds.graphs.insert(graph_id(i), render_graph(&zg, Some(graph_id(i))));
        let zc = noisy(z, cfg.noise_sigma, &mut noise[2]);
        ds.conformations
            .insert(conformation_id(i), render_conformation(&zc, seed, Some(conformation_id(i))));
        let zp = noisy(z, cfg.noise_sigma, &mut noise[3]);
        ds.pockets.insert(pocket_id(i), render_pocket(&zp, seed, Some(pocket_id(i))));
        names.push(render_name(z));
    }

    let splits = assign_splits(n, seed);
    let id_of = |m: super::Modality, i: usize| match m {
        super::Modality::Language => text_id(i),
        super::Modality::Graph => graph_id(i),
        super::Modality::Conformation => conformation_id(i),
        super::Modality::Protein => pocket_id(i),
    };
    let mut manifests = BTreeMap::new();
    for kind in PairKind::ALL {
        let (lm, rm) = kind.modalities();
        let entries = (0..n)
            .map(|i| PairEntry {
                left: id_of(lm, i),
                right: id_of(rm, i),
                split: splits[i],
            })
            .collect();
        manifests.insert(kind, PairManifest::new(kind, entries)?);
    }
    ds.manifests = manifests;

    Ok(SyntheticM4 {
        config: cfg,
        dataset: ds,
        latents,
        splits,
        names,
    })
}
