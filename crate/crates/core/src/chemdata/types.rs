use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::elements::NUM_ATOM_TYPES;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BondOrder {
    Single = 1,
    Double = 2,
    Triple = 3,
    Aromatic = 4,
}

impl BondOrder {
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(BondOrder::Single),
            2 => Some(BondOrder::Double),
            3 => Some(BondOrder::Triple),
            4 => Some(BondOrder::Aromatic),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    /// Zero-based index for embedding lookup.
    pub fn index(self) -> usize {
        self as usize - 1
    }
}

pub const NUM_BOND_ORDERS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub order: BondOrder,
}

/// Atoms as typed nodes and bonds as typed undirected edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoleculeGraph {
    atom_types: Vec<usize>,
    bonds: Vec<Bond>,
    pub molecule_id: Option<String>,
}

impl MoleculeGraph {
    pub fn new(atom_types: Vec<usize>, bonds: Vec<Bond>, molecule_id: Option<String>) -> Result<Self> {
        if atom_types.is_empty() {
            return Err(Error::Data("molecule graph needs at least one atom".into()));
        }
        check_types(&atom_types)?;
        let n = atom_types.len();
        let mut seen = HashSet::new();
        for b in &bonds {
            if b.i >= n || b.j >= n {
                return Err(Error::Data(format!(
                    "bond ({}, {}) references an atom outside 0..{n}",
                    b.i, b.j
                )));
            }
            if b.i == b.j {
                return Err(Error::Data(format!("self bond on atom {}", b.i)));
            }
            if !seen.insert((b.i.min(b.j), b.i.max(b.j))) {
                return Err(Error::Data(format!("duplicate bond ({}, {})", b.i, b.j)));
            }
        }
        Ok(MoleculeGraph {
            atom_types,
            bonds,
            molecule_id,
        })
    }

    pub fn atom_types(&self) -> &[usize] {
        &self.atom_types
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn num_atoms(&self) -> usize {
        self.atom_types.len()
    }

    /// Relabels atoms so that old atom `i` becomes atom `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_atoms();
        if perm.len() != n || (0..n).collect::<HashSet<_>>() != perm.iter().copied().collect() {
            return Err(Error::contract("permutation does not cover every atom"));
        }
        let mut types = vec![0; n];
        for (old, &new) in perm.iter().enumerate() {
            types[new] = self.atom_types[old];
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond {
                i: perm[b.i],
                j: perm[b.j],
                order: b.order,
            })
            .collect();
        MoleculeGraph::new(types, bonds, self.molecule_id.clone())
    }
}

fn check_types(types: &[usize]) -> Result<()> {
    match types.iter().find(|&&t| t >= NUM_ATOM_TYPES) {
        Some(t) => Err(Error::Data(format!("atom type {t} outside 0..{NUM_ATOM_TYPES}"))),
        None => Ok(()),
    }
}

fn check_coords(types: &[usize], coords: &[[f64; 3]]) -> Result<()> {
    if types.is_empty() {
        return Err(Error::Data("structure needs at least one atom".into()));
    }
    check_types(types)?;
    if coords.len() != types.len() {
        return Err(Error::Data(format!(
            "{} coordinate rows for {} atoms",
            coords.len(),
            types.len()
        )));
    }
    if coords.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::Data("non-finite coordinate".into()));
    }
    Ok(())
}

/// Atom types with Cartesian coordinates in Ångströms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conformation {
    atom_types: Vec<usize>,
    coords: Vec<[f64; 3]>,
    pub molecule_id: Option<String>,
}

impl Conformation {
    pub fn new(atom_types: Vec<usize>, coords: Vec<[f64; 3]>, molecule_id: Option<String>) -> Result<Self> {
        check_coords(&atom_types, &coords)?;
        Ok(Conformation {
            atom_types,
            coords,
            molecule_id,
        })
    }
}

/// A protein binding pocket. Same content as a [`Conformation`]; kept as its
/// own type because it feeds the pocket encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PocketStructure {
    atom_types: Vec<usize>,
    coords: Vec<[f64; 3]>,
    pub pocket_id: Option<String>,
}

impl PocketStructure {
    pub fn new(atom_types: Vec<usize>, coords: Vec<[f64; 3]>, pocket_id: Option<String>) -> Result<Self> {
        check_coords(&atom_types, &coords)?;
        Ok(PocketStructure {
            atom_types,
            coords,
            pocket_id,
        })
    }
}

/// Typed point cloud consumed by the 3D encoders.
pub trait Structure3d {
    fn atom_types(&self) -> &[usize];
    fn coords(&self) -> &[[f64; 3]];
    fn id(&self) -> Option<&str>;

    fn num_atoms(&self) -> usize {
        self.atom_types().len()
    }
}

macro_rules! impl_structure {
    ($ty:ty, $id:ident) => {
        impl Structure3d for $ty {
            fn atom_types(&self) -> &[usize] {
                &self.atom_types
            }
            fn coords(&self) -> &[[f64; 3]] {
                &self.coords
            }
            fn id(&self) -> Option<&str> {
                self.$id.as_deref()
            }
        }

        impl $ty {
            /// Applies `x -> R x + t` to every atom.
            pub fn transformed(&self, rotation: &[[f64; 3]; 3], translation: [f64; 3]) -> Self {
                let mut out = self.clone();
                for c in out.coords.iter_mut() {
                    let p = *c;
                    for r in 0..3 {
                        c[r] = rotation[r][0] * p[0]
                            + rotation[r][1] * p[1]
                            + rotation[r][2] * p[2]
                            + translation[r];
                    }
                }
                out
            }

            /// Moves old atom `i` to position `perm[i]`.
            pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
                let n = self.atom_types.len();
                if perm.len() != n
                    || (0..n).collect::<HashSet<_>>() != perm.iter().copied().collect()
                {
                    return Err(Error::contract("permutation does not cover every atom"));
                }
                let mut out = self.clone();
                for (old, &new) in perm.iter().enumerate() {
                    out.atom_types[new] = self.atom_types[old];
                    out.coords[new] = self.coords[old];
                }
                Ok(out)
            }
        }
    };
}

impl_structure!(Conformation, molecule_id);
impl_structure!(PocketStructure, pocket_id);

/// Index of an unordered pair of atom types, `min * T + max` over the
/// `T` known types, so it lies in `[0, T^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PairType(usize);

impl PairType {
    pub const COUNT: usize = NUM_ATOM_TYPES * NUM_ATOM_TYPES;

    pub fn of(a: usize, b: usize) -> Self {
        PairType(a.min(b) * NUM_ATOM_TYPES + a.max(b))
    }

    pub fn index(self) -> usize {
        self.0
    }
}

/// Token IDs for one text plus the text they came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub token_ids: Vec<usize>,
    pub raw_text: String,
}

/// `N×N` Euclidean distance matrix of a structure.
pub fn pairwise_distances(s: &dyn Structure3d) -> Tensor {
    let c = s.coords();
    let n = c.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = ((c[i][0] - c[j][0]).powi(2)
                + (c[i][1] - c[j][1]).powi(2)
                + (c[i][2] - c[j][2]).powi(2))
            .sqrt();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    Tensor::new(vec![n, n], d).expect("n*n entries")
}
