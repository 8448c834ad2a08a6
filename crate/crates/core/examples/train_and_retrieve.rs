//! Trains all four pair kinds on a synthetic corpus and scores every
//! retrieval direction in-batch and over the full test set.
//!
//! `cargo run --release --example train_and_retrieve -- 600 15`

use bindcore::alignment::{train, AlignmentConfig, JointModel};
use bindcore::chemdata::{generate_synthetic_m4, PairKind, Split, SynthConfig};
use bindcore::encoders::EncoderConfig;
use bindcore::evaluation::{chance_recall_at_1, embed_split, report_from_embeddings, Direction, RetrievalMode};
use bindcore::numerics::AdamConfig;

fn main() -> bindcore::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<usize>().expect("integer argument"));
    let n = args.next().unwrap_or(600);
    let epochs = args.next().unwrap_or(15);

    let synth = generate_synthetic_m4(SynthConfig { n_samples: n, ..SynthConfig::default() })?;
    let ds = &synth.dataset;
    let cfg = AlignmentConfig { max_epochs: epochs, ..AlignmentConfig::default() };
    let model = JointModel::for_dataset(ds, EncoderConfig::default(), false, AdamConfig::default(), cfg.seed)?;
    let start = std::time::Instant::now();
    let outcome = train(model, ds, &cfg, None)?;
    println!(
        "{} epochs in {:.0} s, best epoch {:?} (mean validation R@1 {:.1})",
        outcome.epochs_run,
        start.elapsed().as_secs_f64(),
        outcome.best_epoch,
        outcome.best_val_recall.unwrap_or(f64::NAN)
    );

    let n_test = ds.manifest(PairKind::LanguageGraph)?.counts().test;
    let batch = n_test.min(64);
    println!("{:<5} {:>14} {:>14}", "dir", format!("R@1 (B={batch})"), "R@1 full set");
    for kind in PairKind::ALL {
        let emb = embed_split(&outcome.best, ds, kind, Split::Test)?;
        for dir in [Direction::forward(kind), Direction::forward(kind).reversed()] {
            let in_batch = report_from_embeddings(&emb, dir, RetrievalMode::InBatch(batch))?;
            let full = report_from_embeddings(&emb, dir, RetrievalMode::FullSet)?;
            println!(
                "{:<5} {:>14.1} {:>14.1}",
                dir.label(),
                in_batch.recall_at(1).unwrap_or(0.0),
                full.recall_at(1).unwrap_or(0.0)
            );
        }
    }
    println!("chance: {:.2} in-batch, {:.2} full set", chance_recall_at_1(batch), chance_recall_at_1(n_test));
    Ok(())
}

