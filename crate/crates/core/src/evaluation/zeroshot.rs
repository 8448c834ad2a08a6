use crate::alignment::{JointModel, ModalityInput};
use crate::chemdata::MoleculeGraph;
use crate::error::{Error, Result};

/// Prompt wrapped around each class name.
pub fn class_prompt(name: &str) -> String {
    format!("The molecule is {name}.")
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Class-name text embeddings, reusable across queries.
pub fn embed_class_names(model: &JointModel, names: &[String]) -> Result<Vec<Vec<f64>>> {
    if names.is_empty() {
        return Err(Error::contract("zero-shot classification needs at least one class name"));
    }
    names
        .iter()
        .map(|n| model.embed(ModalityInput::Text(&class_prompt(n))))
        .collect()
}

/// Softmax over `g·t_i / tau` for precomputed name embeddings `t_i`.
pub fn classify_embedding(graph_embedding: &[f64], name_embeddings: &[Vec<f64>], tau: f64) -> Result<Vec<f64>> {
    if name_embeddings.is_empty() {
        return Err(Error::contract("zero-shot classification needs at least one class name"));
    }
    if !(tau > 0.0) {
        return Err(Error::contract(format!("temperature must be positive, got {tau}")));
    }
    let logits: Vec<f64> = name_embeddings.iter().map(|t| dot(graph_embedding, t) / tau).collect();
    Ok(softmax(&logits))
}

/// Class probabilities for one graph against candidate names.
pub fn zero_shot_classify(model: &JointModel, graph: &MoleculeGraph, names: &[String], tau: f64) -> Result<Vec<f64>> {
    let names_emb = embed_class_names(model, names)?;
    let g = model.embed(ModalityInput::Graph(graph))?;
    classify_embedding(&g, &names_emb, tau)
}

/// Top-1 accuracy (percent) of classifying each graph among `names`, where
/// `truth[i]` indexes the correct name of `graphs[i]`. Ties go to the lower
/// name index.
pub fn zero_shot_accuracy(
    model: &JointModel,
    graphs: &[&MoleculeGraph],
    names: &[String],
    truth: &[usize],
    tau: f64,
) -> Result<f64> {
    if graphs.len() != truth.len() || graphs.is_empty() {
        return Err(Error::contract("need one truth label per graph and at least one graph"));
    }
    let names_emb = embed_class_names(model, names)?;
    let mut hits = 0;
    for (g, &t) in graphs.iter().zip(truth) {
        let ge = model.embed(ModalityInput::Graph(g))?;
        let p = classify_embedding(&ge, &names_emb, tau)?;
        let best = p
            .iter()
            .enumerate()
            .fold(0, |b, (i, v)| if *v > p[b] { i } else { b });
        if best == t {
            hits += 1;
        }
    }
    Ok(100.0 * hits as f64 / graphs.len() as f64)
}
