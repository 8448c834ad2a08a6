mod common;

use bindcore::chemdata::*;
use bindcore::numerics::SeedRng;
use common::{random_coords, random_graph};
use proptest::prelude::*;

const FUZZ_TRIALS: usize = 1000;
const POISON: u8 = b'#';

fn mutate(text: &str, pos: usize) -> String {
    let mut bytes = text.as_bytes().to_vec();
    bytes[pos] = POISON;
    String::from_utf8(bytes).unwrap()
}

/// Byte offsets of the count line and every coordinate column.
fn xyz_structural(text: &str) -> Vec<usize> {
    let mut out = Vec::new();
    let mut offset = 0;
    for (k, line) in text.split_inclusive('\n').enumerate() {
        let body = line.trim_end_matches('\n');
        match k {
            0 => out.extend(offset..offset + body.len()),
            1 => {}
            _ => {
                let start = body.find(' ').unwrap();
                out.extend(offset + start + 1..offset + body.len());
            }
        }
        offset += line.len();
    }
    out
}

/// Counts-line fields, the V2000 tag, coordinate columns, bond fields and
/// the terminator.
fn sdf_structural(text: &str, n_atoms: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut offset = 0;
    for (k, line) in text.split_inclusive('\n').enumerate() {
        let body = line.trim_end_matches('\n');
        if k == 3 {
            out.extend(offset..offset + 6);
            let tag = body.find("V2000").unwrap();
            out.extend(offset + tag..offset + tag + 5);
        } else if k >= 4 && k < 4 + n_atoms {
            out.extend(offset..offset + 30);
        } else if k >= 4 + n_atoms && body.starts_with("M  END") {
            out.extend(offset..offset + 6);
        } else if k >= 4 + n_atoms {
            out.extend(offset..offset + 9);
        }
        offset += line.len();
    }
    out
}

/// Everything except the two reference strings.
fn manifest_structural(text: &str) -> Vec<usize> {
    let mut out = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let body = line.trim_end_matches('\n');
        let mut data = Vec::new();
        for key in ["\"left\":\"", "\"right\":\""] {
            let s = body.find(key).unwrap() + key.len();
            let e = s + body[s..].find('"').unwrap();
            data.push(s..e);
        }
        out.extend((0..body.len()).filter(|p| !data.iter().any(|r| r.contains(p))).map(|p| offset + p));
        offset += line.len();
    }
    out
}

fn random_conformation_text(rng: &mut SeedRng) -> String {
    let n = 1 + rng.below(8);
    let types = (0..n).map(|_| rng.below(NUM_ATOM_TYPES)).collect();
    write_xyz(&Conformation::new(types, random_coords(rng, n), Some("c1".into())).unwrap())
}

#[test]
fn xyz_rejects_any_structural_mutation() {
    let mut rng = SeedRng::new(20);
    for _ in 0..FUZZ_TRIALS {
        let text = random_conformation_text(&mut rng);
        let sites = xyz_structural(&text);
        let pos = sites[rng.below(sites.len())];
        let bad = mutate(&text, pos);
        assert!(matches!(parse_xyz(&bad), Err(bindcore::Error::Parse { .. })), "accepted:\n{bad}");
        assert!(parse_xyz_pocket(&bad).is_err());
    }
}

#[test]
fn sdf_rejects_any_structural_mutation() {
    let mut rng = SeedRng::new(21);
    for _ in 0..FUZZ_TRIALS {
        let g = random_graph(&mut rng, 8);
        let text = write_sdf(&g);
        let sites = sdf_structural(&text, g.num_atoms());
        let pos = sites[rng.below(sites.len())];
        let bad = mutate(&text, pos);
        assert!(matches!(parse_sdf_subset(&bad), Err(bindcore::Error::Parse { .. })), "accepted:\n{bad}");
    }
}

#[test]
fn manifest_rejects_any_structural_mutation() {
    let mut rng = SeedRng::new(22);
    for _ in 0..FUZZ_TRIALS {
        let kind = PairKind::ALL[rng.below(4)];
        let entries = (0..1 + rng.below(4))
            .map(|i| PairEntry {
                left: format!("a{i}"),
                right: format!("b{i}"),
                split: [Split::Pretrain, Split::Validation, Split::Test][rng.below(3)],
            })
            .collect();
        let text = PairManifest::new(kind, entries).unwrap().to_jsonl();
        let sites = manifest_structural(&text);
        let pos = sites[rng.below(sites.len())];
        let bad = mutate(&text, pos);
        assert!(parse_manifest_str(&bad).is_err(), "accepted:\n{bad}");
    }
}

fn atom_type() -> impl Strategy<Value = usize> {
    0..NUM_ATOM_TYPES
}

fn micro_coord() -> impl Strategy<Value = f64> {
    (-50_000_000i64..50_000_000).prop_map(|v| v as f64 / 1e6)
}

proptest! {
    #[test]
    fn xyz_round_trips(
        atoms in prop::collection::vec((atom_type(), micro_coord(), micro_coord(), micro_coord()), 1..20),
        id in "[A-Za-z0-9_]{0,12}",
    ) {
        let types = atoms.iter().map(|a| a.0).collect();
        let coords = atoms.iter().map(|a| [a.1, a.2, a.3]).collect();
        let id = (!id.is_empty()).then_some(id);
        let c = Conformation::new(types, coords, id).unwrap();
        prop_assert_eq!(parse_xyz(&write_xyz(&c)).unwrap(), c);
    }

    #[test]
    fn sdf_round_trips(seed in any::<u64>(), id in "[A-Za-z0-9_]{1,12}") {
        let mut rng = SeedRng::new(seed);
        let g = random_graph(&mut rng, 12);
        let g = MoleculeGraph::new(g.atom_types().to_vec(), g.bonds().to_vec(), Some(id)).unwrap();
        prop_assert_eq!(parse_sdf_subset(&write_sdf(&g)).unwrap(), g.clone());
        let bundle = write_sdf_bundle([&g, &g]);
        prop_assert_eq!(parse_sdf_bundle(&bundle).unwrap(), vec![g.clone(), g]);
    }

    #[test]
    fn manifest_round_trips(n in 1usize..30, k in 0usize..4, seed in any::<u64>()) {
        let mut rng = SeedRng::new(seed);
        let entries = (0..n)
            .map(|i| PairEntry {
                left: format!("L{i}"),
                right: format!("R{i}"),
                split: [Split::Pretrain, Split::Validation, Split::Test][rng.below(3)],
            })
            .collect();
        let m = PairManifest::new(PairKind::ALL[k], entries).unwrap();
        prop_assert_eq!(parse_manifest_str(&m.to_jsonl()).unwrap(), m);
    }

    #[test]
    fn distances_survive_rigid_motion(seed in any::<u64>()) {
        let mut rng = SeedRng::new(seed);
        let n = 1 + rng.below(10);
        let c = Conformation::new(vec![1; n], random_coords(&mut rng, n), None).unwrap();
        let r = rng.rotation();
        let moved = c.transformed(&r, [rng.uniform_in(-9.0, 9.0), 3.0, -2.0]);
        let (a, b) = (pairwise_distances(&c), pairwise_distances(&moved));
        for (x, y) in a.data().iter().zip(b.data()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}
