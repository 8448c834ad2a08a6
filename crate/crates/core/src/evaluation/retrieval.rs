use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::alignment::{lookup, JointModel};
use crate::chemdata::{Dataset, Modality, PairKind, Split};
use crate::error::{Error, Result};
use crate::numerics::{SeedRng, Tensor};

/// In-batch evaluation batch size used throughout.
pub const EVAL_BATCH_SIZE: usize = 64;
/// Seed of the shuffle that assigns samples to in-batch evaluation batches.
pub const EVAL_SHUFFLE_SEED: u64 = 0x5eed_ba7c;
/// Cut-offs reported by [`RetrievalReport`].
pub const REPORTED_KS: [usize; 2] = [1, 20];

/// Query-by-candidate score matrix plus the correct candidate per query.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub scores: Vec<f64>,
    pub n_queries: usize,
    pub n_candidates: usize,
    pub query_ids: Vec<String>,
    pub candidate_ids: Vec<String>,
    pub ground_truth: Vec<usize>,
}

impl SimilarityMatrix {
    pub fn new(scores: Vec<f64>, n_queries: usize, n_candidates: usize, ground_truth: Vec<usize>) -> Result<Self> {
        if scores.len() != n_queries * n_candidates {
            return Err(Error::Dimension {
                op: "similarity_matrix",
                lhs: vec![n_queries, n_candidates],
                rhs: vec![scores.len()],
            });
        }
        if ground_truth.len() != n_queries {
            return Err(Error::contract(format!(
                "{} ground-truth entries for {n_queries} queries",
                ground_truth.len()
            )));
        }
        if let Some(&g) = ground_truth.iter().find(|&&g| g >= n_candidates) {
            return Err(Error::contract(format!(
                "ground-truth index {g} out of range for {n_candidates} candidates"
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::contract("similarity scores must be finite"));
        }
        Ok(SimilarityMatrix {
            scores,
            n_queries,
            n_candidates,
            query_ids: (0..n_queries).map(|i| i.to_string()).collect(),
            candidate_ids: (0..n_candidates).map(|i| i.to_string()).collect(),
            ground_truth,
        })
    }

    pub fn score(&self, q: usize, c: usize) -> f64 {
        self.scores[q * self.n_candidates + c]
    }

    /// Candidates ranked strictly ahead of the ground truth of query `q`:
    /// higher scores, and equal scores at lower candidate indices.
    pub fn rank_of_truth(&self, q: usize) -> usize {
        let g = self.ground_truth[q];
        let row = &self.scores[q * self.n_candidates..(q + 1) * self.n_candidates];
        let s = row[g];
        row.iter()
            .enumerate()
            .filter(|&(c, &v)| v > s || (v == s && c < g))
            .count()
    }

    pub fn transposed(&self) -> Result<SimilarityMatrix> {
        let mut scores = vec![0.0; self.scores.len()];
        for q in 0..self.n_queries {
            for c in 0..self.n_candidates {
                scores[c * self.n_queries + q] = self.score(q, c);
            }
        }
        let mut gt = vec![usize::MAX; self.n_candidates];
        for (q, &g) in self.ground_truth.iter().enumerate() {
            gt[g] = q;
        }
        if gt.contains(&usize::MAX) {
            return Err(Error::contract("ground truth is not a bijection; cannot transpose"));
        }
        SimilarityMatrix::new(scores, self.n_candidates, self.n_queries, gt)
    }
}

fn dot_rows(a: &[f64], b: &[f64], dim: usize) -> Vec<f64> {
    let (na, nb) = (a.len() / dim, b.len() / dim);
    let mut out = Vec::with_capacity(na * nb);
    for i in 0..na {
        let x = &a[i * dim..(i + 1) * dim];
        for j in 0..nb {
            let y = &b[j * dim..(j + 1) * dim];
            out.push(x.iter().zip(y).map(|(p, q)| p * q).sum());
        }
    }
    out
}

/// Dot products of normalized rows; query `i` is matched with candidate `i`.
pub fn similarity_matrix(queries: &Tensor, candidates: &Tensor) -> Result<SimilarityMatrix> {
    let (sq, sc) = (queries.shape(), candidates.shape());
    if sq.len() != 2 || sc.len() != 2 || sq[1] != sc[1] {
        return Err(Error::contract(format!(
            "query shape {sq:?} and candidate shape {sc:?} differ in width"
        )));
    }
    let (nq, nc, d) = (sq[0], sc[0], sq[1]);
    if nq > nc {
        return Err(Error::contract(format!(
            "{nq} queries but only {nc} candidates for a one-to-one ground truth"
        )));
    }
    SimilarityMatrix::new(dot_rows(queries.data(), candidates.data(), d), nq, nc, (0..nq).collect())
}

/// Percentage of queries whose ground truth ranks within the top `k`
/// (ties broken by ascending candidate index).
pub fn recall_at_k(sim: &SimilarityMatrix, k: usize) -> Result<f64> {
    if k == 0 || k > sim.n_candidates {
        return Err(Error::contract(format!(
            "K = {k} outside 1..={} candidates",
            sim.n_candidates
        )));
    }
    if sim.n_queries == 0 {
        return Err(Error::Data("no queries".into()));
    }
    let hits = (0..sim.n_queries).filter(|&q| sim.rank_of_truth(q) < k).count();
    Ok(100.0 * hits as f64 / sim.n_queries as f64)
}

/// Retrieval from one modality into another, e.g. `L2G`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Direction {
    pub query: Modality,
    pub candidate: Modality,
}

impl Direction {
    pub fn new(query: Modality, candidate: Modality) -> Result<Self> {
        if PairKind::between(query, candidate).is_none() {
            return Err(Error::Config(format!("no pair kind links {query} and {candidate}")));
        }
        Ok(Direction { query, candidate })
    }

    pub fn kind(self) -> PairKind {
        PairKind::between(self.query, self.candidate).expect("checked at construction")
    }

    /// Left-to-right direction of a pair kind.
    pub fn forward(kind: PairKind) -> Self {
        let (l, r) = kind.modalities();
        Direction { query: l, candidate: r }
    }

    pub fn reversed(self) -> Self {
        Direction {
            query: self.candidate,
            candidate: self.query,
        }
    }

    pub fn label(self) -> String {
        format!("{}2{}", self.query.letter(), self.candidate.letter())
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

fn modality_of_letter(c: char) -> Option<Modality> {
    [Modality::Language, Modality::Graph, Modality::Conformation, Modality::Protein]
        .into_iter()
        .find(|m| m.letter() == c.to_ascii_uppercase())
}

impl FromStr for Direction {
    type Err = Error;

    /// Accepts `g2l`, `L2C`, etc.
    fn from_str(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.trim().chars().collect();
        let bad = || Error::Config(format!("unknown direction {s:?}"));
        if chars.len() != 3 || chars[1] != '2' {
            return Err(bad());
        }
        let q = modality_of_letter(chars[0]).ok_or_else(bad)?;
        let c = modality_of_letter(chars[2]).ok_or_else(bad)?;
        Direction::new(q, c).map_err(|_| bad())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetrievalMode {
    /// Fixed-seed batches of this size; a final partial batch is dropped.
    InBatch(usize),
    FullSet,
}

impl RetrievalMode {
    pub fn name(self) -> &'static str {
        match self {
            RetrievalMode::InBatch(_) => "in_batch",
            RetrievalMode::FullSet => "full_set",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub direction: String,
    pub mode: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub batch_size: Option<usize>,
    /// Percentages keyed by K. K is capped at the candidate count.
    pub recall: BTreeMap<String, f64>,
    pub n_queries: usize,
    pub n_candidates: usize,
    /// Set when there is only one candidate, so retrieval is trivial.
    pub degenerate: bool,
}

impl RetrievalReport {
    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.recall.get(&k.to_string()).copied()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Embeddings of both sides of one split of a pair kind, rows aligned.
#[derive(Debug, Clone)]
pub struct SplitEmbeddings {
    pub kind: PairKind,
    pub dim: usize,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub n: usize,
}

impl SplitEmbeddings {
    pub fn side(&self, m: Modality) -> &[f64] {
        if self.kind.modalities().0 == m {
            &self.left
        } else {
            &self.right
        }
    }
}

pub fn embed_split(model: &JointModel, ds: &Dataset, kind: PairKind, split: Split) -> Result<SplitEmbeddings> {
    let manifest = ds.manifest(kind)?.split_filter(split);
    if manifest.is_empty() {
        return Err(Error::Data(format!("{kind} has no {split} pairs")));
    }
    let (lm, rm) = kind.modalities();
    let lefts = manifest
        .entries
        .iter()
        .map(|e| lookup(ds, lm, &e.left))
        .collect::<Result<Vec<_>>>()?;
    let rights = manifest
        .entries
        .iter()
        .map(|e| lookup(ds, rm, &e.right))
        .collect::<Result<Vec<_>>>()?;
    Ok(SplitEmbeddings {
        kind,
        dim: model.embed_dim(),
        left: model.embed_all(&lefts)?,
        right: model.embed_all(&rights)?,
        n: manifest.len(),
    })
}

fn gather(rows: &[f64], idx: &[usize], dim: usize) -> Vec<f64> {
    idx.iter().flat_map(|&i| rows[i * dim..(i + 1) * dim].iter().copied()).collect()
}

/// Recall report from precomputed embeddings.
pub fn report_from_embeddings(emb: &SplitEmbeddings, direction: Direction, mode: RetrievalMode) -> Result<RetrievalReport> {
    if direction.kind() != emb.kind {
        return Err(Error::contract(format!(
            "direction {direction} does not belong to {}",
            emb.kind
        )));
    }
    let (q, c) = (emb.side(direction.query), emb.side(direction.candidate));
    let d = emb.dim;
    let n = emb.n;
    let (batches, size): (Vec<Vec<usize>>, usize) = match mode {
        RetrievalMode::FullSet => (vec![(0..n).collect()], n),
        RetrievalMode::InBatch(b) => {
            if b < 1 {
                return Err(Error::Config("batch size must be positive".into()));
            }
            if n < b {
                return Err(Error::Data(format!(
                    "in-batch evaluation with B = {b} needs at least {b} pairs, got {n}"
                )));
            }
            let mut order: Vec<usize> = (0..n).collect();
            SeedRng::stream(EVAL_SHUFFLE_SEED, 0).shuffle(&mut order);
            (order.chunks_exact(b).map(|c| c.to_vec()).collect(), b)
        }
    };
    let mut recall = BTreeMap::new();
    for k in REPORTED_KS {
        let kk = k.min(size);
        let mut total = 0.0;
        for idx in &batches {
            let scores = dot_rows(&gather(q, idx, d), &gather(c, idx, d), d);
            let sim = SimilarityMatrix::new(scores, idx.len(), idx.len(), (0..idx.len()).collect())?;
            total += recall_at_k(&sim, kk)?;
        }
        recall.insert(k.to_string(), total / batches.len() as f64);
    }
    Ok(RetrievalReport {
        direction: direction.label(),
        mode: mode.name().to_string(),
        batch_size: match mode {
            RetrievalMode::InBatch(b) => Some(b),
            RetrievalMode::FullSet => None,
        },
        recall,
        n_queries: batches.len() * size,
        n_candidates: size,
        degenerate: size == 1,
    })
}

/// Embeds one split and scores retrieval in `direction`.
pub fn evaluate_retrieval(
    model: &JointModel,
    ds: &Dataset,
    split: Split,
    direction: Direction,
    mode: RetrievalMode,
) -> Result<RetrievalReport> {
    let emb = embed_split(model, ds, direction.kind(), split)?;
    report_from_embeddings(&emb, direction, mode)
}
