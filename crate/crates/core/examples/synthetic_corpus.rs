//! Generates a small four-modality corpus, writes it to disk and shows one
//! record of each modality.

use bindcore::chemdata::{
    conformation_id, generate_synthetic_m4, graph_id, pocket_id, text_id, write_sdf, write_xyz, Dataset, SynthConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args().nth(1).map_or(200, |s| s.parse().expect("sample count"));
    let synth = generate_synthetic_m4(SynthConfig { n_samples: n, seed: 7, ..SynthConfig::default() })?;
    let ds = &synth.dataset;

    println!("latent of sample 0: {:.3?}", synth.latents[0]);
    println!("class name: {}", synth.names[0]);
    println!("text: {}", ds.texts[&text_id(0)]);
    println!("graph:\n{}", write_sdf(&ds.graphs[&graph_id(0)]));
    println!("conformation:\n{}", write_xyz(&ds.conformations[&conformation_id(0)]));
    println!("pocket:\n{}", write_xyz(&ds.pockets[&pocket_id(0)]));

    let dir = tempfile::tempdir()?;
    ds.save(dir.path())?;
    let back = Dataset::load(dir.path())?;
    for (kind, m) in &back.manifests {
        let c = m.counts();
        println!("{kind}: {} pretrain / {} validation / {} test", c.pretrain, c.validation, c.test);
    }
    Ok(())
}
