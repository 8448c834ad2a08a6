use crate::chemdata::{MoleculeGraph, NUM_ATOM_TYPES, NUM_BOND_ORDERS};
use crate::error::Result;
use crate::numerics::{visit_prefixed, visit_prefixed_mut, Parameterized, SeedRng, Tape, Tensor, Var};

use super::layers::{filled, init_embedding, visit_list, visit_list_mut, Mlp};

/// `h'_v = MLP((1 + eps) h_v + sum_u (h_u + bond(e_uv)))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GinLayer {
    pub eps: Tensor,
    pub mlp: Mlp,
}

impl Parameterized for GinLayer {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("eps", &self.eps);
        visit_prefixed("mlp", &self.mlp, f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("eps", &mut self.eps);
        visit_prefixed_mut("mlp", &mut self.mlp, f);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEncoder {
    pub atom_embedding: Tensor,
    pub bond_embedding: Tensor,
    pub layers: Vec<GinLayer>,
}

impl GraphEncoder {
    pub fn new(rng: &mut SeedRng, width: usize, layers: usize) -> Self {
        GraphEncoder {
            atom_embedding: init_embedding(rng, NUM_ATOM_TYPES, width, 1.0),
            bond_embedding: init_embedding(rng, NUM_BOND_ORDERS, width, 0.5),
            layers: (0..layers)
                .map(|_| GinLayer {
                    eps: filled(vec![1], 0.0),
                    mlp: Mlp::new(rng, width, width, width),
                })
                .collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.atom_embedding.shape()[1]
    }

    /// Mean-pooled node states after all GIN layers, shape `[H]`.
    pub fn encode(&self, tape: &mut Tape, g: &MoleculeGraph) -> Result<Var> {
        let n = g.num_atoms();
        let atoms = tape.leaf(&self.atom_embedding);
        let mut h = tape.gather_rows(atoms, g.atom_types())?;
        let mut src = Vec::with_capacity(2 * g.bonds().len());
        let mut dst = Vec::with_capacity(2 * g.bonds().len());
        let mut orders = Vec::with_capacity(2 * g.bonds().len());
        for b in g.bonds() {
            src.extend([b.i, b.j]);
            dst.extend([b.j, b.i]);
            orders.extend([b.order.index(), b.order.index()]);
        }
        let bond_table = tape.leaf(&self.bond_embedding);
        let bond_msgs = if src.is_empty() {
            None
        } else {
            Some(tape.gather_rows(bond_table, &orders)?)
        };
        for (l, layer) in self.layers.iter().enumerate() {
            let eps = tape.leaf(&layer.eps);
            let scaled = tape.mul_scalar(h, eps)?;
            let mut z = tape.add(h, scaled)?;
            if let Some(bond_msgs) = bond_msgs {
                let neigh = tape.gather_rows(h, &src)?;
                let msgs = tape.add(neigh, bond_msgs)?;
                let agg = tape.scatter_sum(msgs, &dst, n)?;
                z = tape.add(z, agg)?;
            }
            h = layer.mlp.forward(tape, z)?;
            if l + 1 < self.layers.len() {
                h = tape.relu(h);
            }
        }
        tape.mean_pool(h, None)
    }
}

impl Parameterized for GraphEncoder {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("atom_embedding", &self.atom_embedding);
        f("bond_embedding", &self.bond_embedding);
        visit_list("layers", &self.layers, f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("atom_embedding", &mut self.atom_embedding);
        f("bond_embedding", &mut self.bond_embedding);
        visit_list_mut("layers", &mut self.layers, f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chemdata::{Bond, BondOrder};

    fn run(enc: &GraphEncoder, g: &MoleculeGraph) -> Vec<f64> {
        let mut tape = Tape::new();
        let out = enc.encode(&mut tape, g).unwrap();
        tape.value(out).to_vec()
    }

    fn bond(i: usize, j: usize) -> Bond {
        Bond { i, j, order: BondOrder::Single }
    }

    #[test]
    fn path_and_triangle_differ() {
        let enc = GraphEncoder::new(&mut SeedRng::new(1), 16, 2);
        let path = MoleculeGraph::new(vec![1, 1, 1], vec![bond(0, 1), bond(1, 2)], None).unwrap();
        let tri = MoleculeGraph::new(vec![1, 1, 1], vec![bond(0, 1), bond(1, 2), bond(2, 0)], None).unwrap();
        let (a, b) = (run(&enc, &path), run(&enc, &tri));
        let dist: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!(dist > 1e-6);
    }

    #[test]
    fn single_atom_is_mlp_stack_of_embedding() {
        let enc = GraphEncoder::new(&mut SeedRng::new(2), 8, 1);
        let g = MoleculeGraph::new(vec![3], vec![], None).unwrap();
        let mut tape = Tape::new();
        let table = tape.leaf(&enc.atom_embedding);
        let row = tape.gather_rows(table, &[3]).unwrap();
        let expect = enc.layers[0].mlp.forward(&mut tape, row).unwrap();
        assert_eq!(run(&enc, &g), tape.value(expect).to_vec());
    }
}
