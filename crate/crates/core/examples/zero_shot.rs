//! Zero-shot naming: after language-graph training, each test graph is
//! assigned the closest class name among all test-set names.

use bindcore::alignment::{train, AlignmentConfig, JointModel};
use bindcore::chemdata::{generate_synthetic_m4, graph_id, PairKind, Split, SynthConfig};
use bindcore::encoders::EncoderConfig;
use bindcore::evaluation::{chance_recall_at_1, zero_shot_accuracy, zero_shot_classify};
use bindcore::numerics::AdamConfig;

fn main() -> bindcore::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(600, |s| s.parse().expect("sample count"));
    let synth = generate_synthetic_m4(SynthConfig { n_samples: n, ..SynthConfig::default() })?;
    let ds = &synth.dataset;
    let cfg = AlignmentConfig {
        active_pairs: vec![PairKind::LanguageGraph],
        max_epochs: 20,
        ..AlignmentConfig::default()
    };
    let model = JointModel::for_dataset(ds, EncoderConfig::default(), false, AdamConfig::default(), cfg.seed)?;
    let model = train(model, ds, &cfg, None)?.best;

    let test: Vec<usize> = (0..n).filter(|&i| synth.splits[i] == Split::Test).collect();
    let names: Vec<String> = test.iter().map(|&i| synth.names[i].clone()).collect();
    let graphs: Vec<_> = test.iter().map(|&i| &ds.graphs[&graph_id(i)]).collect();
    let truth: Vec<usize> = (0..test.len()).collect();

    let probs = zero_shot_classify(&model, graphs[0], &names, cfg.temperature)?;
    let top = probs.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    println!("graph {} -> {:?} (p = {:.3}); true name {:?}", graph_id(test[0]), names[top.0], top.1, names[0]);

    let acc = zero_shot_accuracy(&model, &graphs, &names, &truth, cfg.temperature)?;
    println!(
        "zero-shot top-1 over {} names: {acc:.1}% (chance {:.2}%)",
        names.len(),
        chance_recall_at_1(names.len())
    );
    Ok(())
}
