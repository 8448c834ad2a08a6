//! Molecular domain types, file formats, pair manifests and the synthetic
//! four-modality corpus.

mod elements;
mod manifest;
mod sdf;
mod store;
mod synth;
mod tokenizer;
mod types;
mod xyz;

pub use elements::{symbol_of_type, type_of_symbol, ELEMENTS, NUM_ATOM_TYPES, UNK_TYPE};
pub use manifest::{
    count_table, parse_manifest, parse_manifest_str, reference_counts, Conformance, Modality,
    PairEntry, PairKind, PairManifest, Split, SplitCounts, REFERENCE_COUNTS,
};
pub use sdf::{parse_sdf_bundle, parse_sdf_subset, write_sdf, write_sdf_bundle};
pub use store::{manifest_path, Dataset};
pub use synth::{
    conformation_id, generate_synthetic_m4, graph_id, pocket_id, render_conformation, render_graph,
    render_name, render_pocket, render_text, text_id, SynthConfig, SyntheticM4, QUANT_LEVELS,
};
pub use tokenizer::{words, Vocabulary, DEFAULT_MIN_FREQ, OOV_ID, OOV_TOKEN};
pub use types::{
    pairwise_distances, Bond, BondOrder, Conformation, MoleculeGraph, PairType, PocketStructure,
    Structure3d, TokenSequence, NUM_BOND_ORDERS,
};
pub use xyz::{
    parse_xyz, parse_xyz_bundle, parse_xyz_pocket, parse_xyz_pocket_bundle, write_xyz,
    write_xyz_bundle,
};
