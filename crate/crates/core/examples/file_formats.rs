//! Parses a molfile and an XYZ frame, writes them back out and computes
//! the pairwise distance matrix that the 3D encoders see.

use bindcore::chemdata::{pairwise_distances, parse_sdf_subset, parse_xyz, write_sdf, write_xyz, Structure3d};

const ETHANOL: &str = "ethanol
  hand-written

  3  2  0  0  0  0  0  0  0  0999 V2000
    0.0000    0.0000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
    1.5200    0.0000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
    2.0300    1.3400    0.0000 O   0  0  0  0  0  0  0  0  0  0  0  0
  1  2  1  0  0  0  0
  2  3  1  0  0  0  0
M  END
";

const WATER: &str = "3
water
O 0.000 0.000 0.000
H 0.957 0.000 0.000
H -0.240 0.927 0.000
";

fn main() -> bindcore::Result<()> {
    let g = parse_sdf_subset(ETHANOL)?;
    println!("{:?}: atom types {:?}, {} bonds", g.molecule_id, g.atom_types(), g.bonds().len());
    assert_eq!(parse_sdf_subset(&write_sdf(&g))?, g);

    let w = parse_xyz(WATER)?;
    let d = pairwise_distances(&w);
    let n = w.num_atoms();
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| format!("{:.3}", d.data()[i * n + j])).collect();
        println!("{}", row.join("  "));
    }
    print!("{}", write_xyz(&w));

    match parse_xyz("2\nbroken\nO 0 0 0\n") {
        Err(e) => println!("truncated frame rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
