//! Saves a trained model, reloads it and embeds one record per modality
//! from the restored checkpoint.

use bindcore::alignment::{train, AlignmentConfig, JointModel, ModalityInput};
use bindcore::chemdata::{conformation_id, generate_synthetic_m4, graph_id, pocket_id, text_id, SynthConfig};
use bindcore::encoders::{Checkpoint, EncoderConfig};
use bindcore::numerics::AdamConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let synth = generate_synthetic_m4(SynthConfig { n_samples: 120, ..SynthConfig::default() })?;
    let ds = &synth.dataset;
    let enc = EncoderConfig { embed_dim: 16, hidden: 16, ..EncoderConfig::default() };
    let cfg = AlignmentConfig { max_epochs: 2, ..AlignmentConfig::default() };
    let model = JointModel::for_dataset(ds, enc, false, AdamConfig::default(), 0)?;
    let trained = train(model, ds, &cfg, None)?.best;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("model.ckpt");
    trained.checkpoint()?.save(&path)?;
    let restored = JointModel::from_checkpoint(&Checkpoint::load(&path)?)?;
    println!("restored weights identical: {}", restored.weights_equal(&trained));

    let inputs = [
        ModalityInput::Text(&ds.texts[&text_id(0)]),
        ModalityInput::Graph(&ds.graphs[&graph_id(0)]),
        ModalityInput::Conformation(&ds.conformations[&conformation_id(0)]),
        ModalityInput::Pocket(&ds.pockets[&pocket_id(0)]),
    ];
    let embs: Vec<Vec<f64>> = inputs.iter().map(|i| restored.embed(*i)).collect::<Result<_, _>>()?;
    for (input, e) in inputs.iter().zip(&embs) {
        let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        println!("{:<13} dim {} norm {norm:.6} first {:.4?}", input.modality().to_string(), e.len(), &e[..4]);
    }
    let cos = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    println!("text-graph cosine for sample 0: {:.4}", cos(&embs[0], &embs[1]));
    Ok(())
}
