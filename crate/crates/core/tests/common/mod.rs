//! Shared oracles for the integration tests: central finite differences,
//! random fixtures, and the gradient/invariance suites reused by the
//! acceptance target.
#![allow(dead_code)]

use bindcore::alignment::{info_nce, info_nce_value, symmetric_loss};
use bindcore::chemdata::{Bond, BondOrder, Conformation, MoleculeGraph, PocketStructure, Structure3d, TokenSequence, NUM_ATOM_TYPES};
use bindcore::encoders::{GraphEncoder, ProjectionHead, TextEncoder, UniMolEncoder};
use bindcore::numerics::{Parameterized, SeedRng, Tape, Tensor, Var};
use bindcore::Result;

pub const FD_STEP: f64 = 1e-5;
pub const FD_STEP_END_TO_END: f64 = 1e-5;
/// Gradients smaller than this are compared absolutely: their central
/// difference is dominated by rounding.
pub const GRAD_FLOOR: f64 = 1e-6;

/// `‖a − b‖ / max(‖a‖, ‖b‖, GRAD_FLOOR)`.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(GRAD_FLOOR)
}

pub fn random_tensor(rng: &mut SeedRng, shape: Vec<usize>, scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, rng.normal_vec(n, scale)).unwrap()
}

/// Entries with magnitude in `[0.2, 1.2]` and random sign, keeping ReLU
/// inputs away from the kink.
pub fn away_from_zero(rng: &mut SeedRng, shape: Vec<usize>) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.uniform_in(0.2, 1.2);
            if rng.uniform() < 0.5 {
                -m
            } else {
                m
            }
        })
        .collect();
    Tensor::new(shape, data).unwrap()
}

pub fn positive(rng: &mut SeedRng, shape: Vec<usize>) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.uniform_in(0.3, 2.0)).collect()).unwrap()
}

type Build<'a> = dyn Fn(&mut Tape, &[Var]) -> Result<Var> + 'a;

fn weighted_loss(tape: &mut Tape, out: Var, weights: &[f64]) -> Result<Var> {
    if tape.value(out).len() == 1 {
        return Ok(tape.reshape(out, vec![])?);
    }
    let shape = tape.shape(out).to_vec();
    let w = tape.constant(shape, weights.to_vec())?;
    let prod = tape.mul(out, w)?;
    Ok(tape.sum(prod))
}

fn eval_loss(build: &Build<'_>, inputs: &[Tensor], weights: &[f64]) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t)).collect();
    let out = build(&mut tape, &vars).unwrap();
    let l = weighted_loss(&mut tape, out, weights).unwrap();
    tape.scalar_value(l).unwrap()
}

/// Autodiff versus central differences of `sum(w ∘ f(inputs))` for a fixed
/// random `w`, over every element of every input. Returns the worst
/// per-input relative error.
pub fn fd_check(rng: &mut SeedRng, inputs: &[Tensor], build: &Build<'_>) -> f64 {
    let params: Vec<Tensor> = inputs.iter().map(|t| t.clone().with_requires_grad(true)).collect();
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|t| tape.leaf(t)).collect();
    let out = build(&mut tape, &vars).unwrap();
    let n_out = tape.value(out).len();
    let weights = rng.normal_vec(n_out, 1.0);
    let loss = weighted_loss(&mut tape, out, &weights).unwrap();
    let grads = tape.backward(loss).unwrap();
    let mut worst: f64 = 0.0;
    for (k, p) in params.iter().enumerate() {
        let analytic = grads.wrt(vars[k]).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; p.len()]);
        let mut numeric = vec![0.0; p.len()];
        for i in 0..p.len() {
            let mut plus: Vec<Tensor> = params.clone();
            plus[k].data_mut()[i] += FD_STEP;
            let mut minus: Vec<Tensor> = params.clone();
            minus[k].data_mut()[i] -= FD_STEP;
            numeric[i] = (eval_loss(build, &plus, &weights) - eval_loss(build, &minus, &weights)) / (2.0 * FD_STEP);
        }
        worst = worst.max(rel_error(&analytic, &numeric));
    }
    worst
}

/// One seeded trial of every differentiable primitive.
pub fn primitive_trial(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = SeedRng::stream(seed, 77);
    let r = &mut rng;
    let mut out = Vec::new();
    macro_rules! check {
        ($name:expr, [$($t:expr),*], $f:expr) => {{
            let inputs = vec![$($t),*];
            let e = fd_check(r, &inputs, &$f);
            out.push(($name, e));
        }};
    }
    let a34 = random_tensor(r, vec![3, 4], 1.0);
    let b42 = random_tensor(r, vec![4, 2], 1.0);
    check!("matmul", [a34.clone(), b42], |t: &mut Tape, v: &[Var]| t.matmul(v[0], v[1]));
    let x = random_tensor(r, vec![2, 3], 1.0);
    let y = random_tensor(r, vec![2, 3], 1.0);
    check!("add", [x.clone(), y.clone()], |t: &mut Tape, v: &[Var]| t.add(v[0], v[1]));
    check!("sub", [x.clone(), y.clone()], |t: &mut Tape, v: &[Var]| t.sub(v[0], v[1]));
    check!("mul", [x.clone(), y.clone()], |t: &mut Tape, v: &[Var]| t.mul(v[0], v[1]));
    let bias = random_tensor(r, vec![3], 1.0);
    check!("add_bias", [x.clone(), bias], |t: &mut Tape, v: &[Var]| t.add_bias(v[0], v[1]));
    check!("scale", [x.clone()], |t: &mut Tape, v: &[Var]| Ok(t.scale(v[0], -1.7)));
    let s = random_tensor(r, vec![1], 1.0);
    check!("mul_scalar", [x.clone(), s], |t: &mut Tape, v: &[Var]| t.mul_scalar(v[0], v[1]));
    let kinked = away_from_zero(r, vec![3, 3]);
    check!("relu", [kinked], |t: &mut Tape, v: &[Var]| Ok(t.relu(v[0])));
    check!("exp", [x.clone()], |t: &mut Tape, v: &[Var]| Ok(t.exp(v[0])));
    let pos = positive(r, vec![2, 3]);
    check!("log", [pos], |t: &mut Tape, v: &[Var]| Ok(t.log(v[0])));
    check!("sum", [x.clone()], |t: &mut Tape, v: &[Var]| Ok(t.sum(v[0])));
    check!("mean", [x.clone()], |t: &mut Tape, v: &[Var]| Ok(t.mean(v[0])));
    check!("transpose", [a34.clone()], |t: &mut Tape, v: &[Var]| t.transpose(v[0]));
    check!("reshape", [a34.clone()], |t: &mut Tape, v: &[Var]| t.reshape(v[0], vec![6, 2]));
    let z = random_tensor(r, vec![2, 2], 1.0);
    check!("concat_rows", [x.clone(), random_tensor(r, vec![1, 3], 1.0)], |t: &mut Tape, v: &[Var]| t
        .concat(&[v[0], v[1]], 0));
    check!("concat_cols", [x.clone(), z], |t: &mut Tape, v: &[Var]| t.concat(&[v[0], v[1]], 1));
    check!("slice_cols", [a34.clone()], |t: &mut Tape, v: &[Var]| t.slice_cols(v[0], 1, 2));
    let table = random_tensor(r, vec![5, 3], 1.0);
    check!("gather_rows", [table.clone()], |t: &mut Tape, v: &[Var]| t.gather_rows(v[0], &[4, 0, 4, 2]));
    check!("gather_elements", [table.clone()], |t: &mut Tape, v: &[Var]| t.gather_elements(v[0], &[14, 3, 3, 0]));
    check!("scatter_sum", [table], |t: &mut Tape, v: &[Var]| t.scatter_sum(v[0], &[1, 0, 1, 3, 1], 4));
    check!("softmax_rows", [a34.clone()], |t: &mut Tape, v: &[Var]| Ok(t.softmax_rows(v[0])));
    check!("log_softmax_rows", [a34.clone()], |t: &mut Tape, v: &[Var]| Ok(t.log_softmax_rows(v[0])));
    check!("l2_normalize", [a34.clone()], |t: &mut Tape, v: &[Var]| t.l2_normalize(v[0]));
    check!("mean_pool", [a34.clone()], |t: &mut Tape, v: &[Var]| t.mean_pool(v[0], Some(&[true, false, true])));
    let gain = random_tensor(r, vec![4], 1.0);
    let lnb = random_tensor(r, vec![4], 1.0);
    check!("layer_norm", [a34.clone(), gain, lnb], |t: &mut Tape, v: &[Var]| t.layer_norm(v[0], v[1], v[2]));
    let d = Tensor::new(vec![5], (0..5).map(|_| r.uniform_in(0.0, 6.0)).collect()).unwrap();
    let mu = Tensor::new(vec![3], vec![1.0, 3.0, 5.0]).unwrap();
    let sigma = Tensor::new(vec![3], (0..3).map(|_| r.uniform_in(0.8, 2.0)).collect()).unwrap();
    check!("gaussian_kernel", [d, mu, sigma], |t: &mut Tape, v: &[Var]| t.gaussian_kernel(v[0], v[1], v[2]));
    let w1 = random_tensor(r, vec![4, 5], 0.5);
    let w2 = random_tensor(r, vec![5, 2], 0.5);
    check!("mlp", [a34, w1, w2], |t: &mut Tape, v: &[Var]| {
        let h = t.matmul(v[0], v[1])?;
        let h = t.exp(h);
        let h = t.log(h);
        let h = t.matmul(h, v[2])?;
        Ok(t.sum(h))
    });
    out
}

/// One seeded trial of both contrastive losses on normalized rows.
pub fn loss_trial(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = SeedRng::stream(seed, 78);
    let x = random_tensor(&mut rng, vec![4, 3], 1.0);
    let y = random_tensor(&mut rng, vec![4, 3], 1.0);
    let tau = rng.uniform_in(0.3, 2.0);
    let e1 = fd_check(&mut rng, &[x.clone(), y.clone()], &|t: &mut Tape, v: &[Var]| {
        let a = t.l2_normalize(v[0])?;
        let b = t.l2_normalize(v[1])?;
        info_nce(t, a, b, tau)
    });
    let e2 = fd_check(&mut rng, &[x, y], &|t: &mut Tape, v: &[Var]| {
        let a = t.l2_normalize(v[0])?;
        let b = t.l2_normalize(v[1])?;
        symmetric_loss(t, a, b, tau)
    });
    vec![("info_nce", e1), ("symmetric_loss", e2)]
}

pub fn random_graph(rng: &mut SeedRng, max_atoms: usize) -> MoleculeGraph {
    let n = 1 + rng.below(max_atoms);
    let types: Vec<usize> = (0..n).map(|_| rng.below(NUM_ATOM_TYPES)).collect();
    let mut bonds = Vec::new();
    for j in 1..n {
        let i = rng.below(j);
        bonds.push(Bond { i, j, order: BondOrder::from_code(1 + rng.below(4) as u8).unwrap() });
    }
    for _ in 0..n / 2 {
        let (i, j) = (rng.below(n), rng.below(n));
        if i != j && !bonds.iter().any(|b| (b.i, b.j) == (i, j) || (b.i, b.j) == (j, i)) {
            bonds.push(Bond { i, j, order: BondOrder::Single });
        }
    }
    MoleculeGraph::new(types, bonds, None).unwrap()
}

pub fn random_coords(rng: &mut SeedRng, n: usize) -> Vec<[f64; 3]> {
    (0..n)
        .map(|_| [rng.uniform_in(-3.0, 3.0), rng.uniform_in(-3.0, 3.0), rng.uniform_in(-3.0, 3.0)])
        .collect()
}

pub fn random_conformation(rng: &mut SeedRng, max_atoms: usize) -> Conformation {
    let n = 1 + rng.below(max_atoms);
    let types = (0..n).map(|_| rng.below(NUM_ATOM_TYPES)).collect();
    Conformation::new(types, random_coords(rng, n), None).unwrap()
}

pub fn random_pocket(rng: &mut SeedRng, max_atoms: usize) -> PocketStructure {
    let n = 1 + rng.below(max_atoms);
    let types = (0..n).map(|_| rng.below(NUM_ATOM_TYPES)).collect();
    PocketStructure::new(types, random_coords(rng, n), None).unwrap()
}

pub fn random_tokens(rng: &mut SeedRng, vocab: usize, max_len: usize) -> TokenSequence {
    let n = 1 + rng.below(max_len);
    TokenSequence {
        token_ids: (0..n).map(|_| rng.below(vocab)).collect(),
        raw_text: String::new(),
    }
}

/// Directional-derivative check of `loss = sum(head(encode(input)))`,
/// separately along a random direction in each parameter tensor. Returns
/// the worst relative error.
pub fn end_to_end_check<M: Parameterized + Clone>(
    rng: &mut SeedRng,
    model: &M,
    forward: &dyn Fn(&M, &mut Tape) -> Result<Var>,
) -> f64 {
    let mut tape = Tape::new();
    let out = forward(model, &mut tape).unwrap();
    let loss = tape.sum(out);
    let grads = tape.backward(loss).unwrap();
    let mut names = Vec::new();
    let mut analytic_grads = Vec::new();
    model.visit_params(&mut |name, t| {
        names.push(name.to_string());
        analytic_grads.push(grads.for_tensor(t).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; t.len()]));
    });
    let eval = |m: &M| {
        let mut tape = Tape::new();
        let out = forward(m, &mut tape).unwrap();
        let l = tape.sum(out);
        tape.scalar_value(l).unwrap()
    };
    let mut worst: f64 = 0.0;
    for (k, name) in names.iter().enumerate() {
        let dir = rng.normal_vec(analytic_grads[k].len(), 1.0);
        let analytic: f64 = analytic_grads[k].iter().zip(&dir).map(|(g, d)| g * d).sum();
        let shifted = |sign: f64| {
            let mut m = model.clone();
            m.visit_params_mut(&mut |n, t| {
                if n == name {
                    for (v, d) in t.data_mut().iter_mut().zip(&dir) {
                        *v += sign * FD_STEP_END_TO_END * d;
                    }
                }
            });
            eval(&m)
        };
        let numeric = (shifted(1.0) - shifted(-1.0)) / (2.0 * FD_STEP_END_TO_END);
        if std::env::var("FD_DEBUG").is_ok() {
            eprintln!("{name}: {analytic} vs {numeric}");
        }
        worst = worst.max(rel_error(&[analytic], &[numeric]));
    }
    worst
}

#[derive(Clone)]
pub struct WithHead<E> {
    pub encoder: E,
    pub head: ProjectionHead,
}

impl<E: Parameterized> Parameterized for WithHead<E> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        bindcore::numerics::visit_prefixed("encoder", &self.encoder, f);
        bindcore::numerics::visit_prefixed("head", &self.head, f);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        bindcore::numerics::visit_prefixed_mut("encoder", &mut self.encoder, f);
        bindcore::numerics::visit_prefixed_mut("head", &mut self.head, f);
    }
}

pub const SMALL_WIDTH: usize = 8;

/// One end-to-end trial per encoder with small random models and inputs.
pub fn encoder_trial(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = SeedRng::stream(seed, 79);
    let r = &mut rng;
    let w = SMALL_WIDTH;
    let text = WithHead {
        encoder: TextEncoder::new(r, 12, w, 2, 16),
        head: ProjectionHead::new(r, w, 6),
    };
    let seq = random_tokens(r, 12, 10);
    let e_text = end_to_end_check(r, &text, &|m, t| {
        let e = m.encoder.encode(t, &seq)?;
        m.head.project(t, e)
    });
    let graph = WithHead {
        encoder: GraphEncoder::new(r, w, 2),
        head: ProjectionHead::new(r, w, 6),
    };
    let g = random_graph(r, 7);
    let e_graph = end_to_end_check(r, &graph, &|m, t| {
        let e = m.encoder.encode(t, &g)?;
        m.head.project(t, e)
    });
    let unimol = |r: &mut SeedRng| WithHead {
        encoder: UniMolEncoder::new(r, w, 2, 2).unwrap(),
        head: ProjectionHead::new(r, w, 6),
    };
    let conf_model = unimol(r);
    let c = random_conformation(r, 6);
    let e_conf = end_to_end_check(r, &conf_model, &|m, t| {
        let e = m.encoder.encode(t, &c)?;
        m.head.project(t, e)
    });
    let pocket_model = unimol(r);
    let p = random_pocket(r, 6);
    let e_pocket = end_to_end_check(r, &pocket_model, &|m, t| {
        let e = m.encoder.encode(t, &p)?;
        m.head.project(t, e)
    });
    vec![
        ("encode_text", e_text),
        ("encode_graph", e_graph),
        ("encode_conformation", e_conf),
        ("encode_pocket", e_pocket),
    ]
}

/// Worst error per name over `trials` seeds.
pub fn worst_by_name(trials: u64, f: impl Fn(u64) -> Vec<(&'static str, f64)>) -> Vec<(&'static str, f64)> {
    let mut worst: Vec<(&'static str, f64)> = Vec::new();
    for seed in 0..trials {
        for (name, e) in f(seed) {
            match worst.iter_mut().find(|(n, _)| *n == name) {
                Some(w) => w.1 = w.1.max(e),
                None => worst.push((name, e)),
            }
        }
    }
    worst
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn random_permutation(rng: &mut SeedRng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut p);
    p
}

fn graph_output(enc: &GraphEncoder, g: &MoleculeGraph) -> Vec<f64> {
    let mut tape = Tape::new();
    let v = enc.encode(&mut tape, g).unwrap();
    tape.value(v).to_vec()
}

fn structure_output(enc: &UniMolEncoder, s: &dyn Structure3d) -> Vec<f64> {
    let mut tape = Tape::new();
    let v = enc.encode(&mut tape, s).unwrap();
    tape.value(v).to_vec()
}

/// Worst pooled-output change over `trials` graphs of at most 8 nodes,
/// each relabeled by a fresh random permutation.
pub fn graph_permutation_error(seed: u64, trials: usize) -> f64 {
    let mut rng = SeedRng::stream(seed, 80);
    let enc = GraphEncoder::new(&mut rng, 16, 2);
    (0..trials)
        .map(|_| {
            let g = random_graph(&mut rng, 8);
            let perm = random_permutation(&mut rng, g.num_atoms());
            max_abs_diff(&graph_output(&enc, &g), &graph_output(&enc, &g.permuted(&perm).unwrap()))
        })
        .fold(0.0, f64::max)
}

/// Random rotation, with an axis flipped half the time.
pub fn random_orthogonal3(rng: &mut SeedRng) -> [[f64; 3]; 3] {
    let mut r = rng.rotation();
    if rng.uniform() < 0.5 {
        for row in r.iter_mut() {
            row[0] = -row[0];
        }
    }
    r
}

/// Worst output change of both 3D encoders under random rigid motions
/// including reflections.
pub fn e3_error(seed: u64, trials: usize) -> f64 {
    let mut rng = SeedRng::stream(seed, 81);
    let enc = UniMolEncoder::new(&mut rng, 16, 2, 2).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let r = random_orthogonal3(&mut rng);
        let t = [rng.uniform_in(-10.0, 10.0), rng.uniform_in(-10.0, 10.0), rng.uniform_in(-10.0, 10.0)];
        let c = random_conformation(&mut rng, 10);
        worst = worst.max(max_abs_diff(&structure_output(&enc, &c), &structure_output(&enc, &c.transformed(&r, t))));
        let p = random_pocket(&mut rng, 10);
        worst = worst.max(max_abs_diff(&structure_output(&enc, &p), &structure_output(&enc, &p.transformed(&r, t))));
    }
    worst
}

pub fn atom_permutation_error(seed: u64, trials: usize) -> f64 {
    let mut rng = SeedRng::stream(seed, 82);
    let enc = UniMolEncoder::new(&mut rng, 16, 2, 2).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let c = random_conformation(&mut rng, 10);
        let perm = random_permutation(&mut rng, c.num_atoms());
        worst = worst.max(max_abs_diff(&structure_output(&enc, &c), &structure_output(&enc, &c.permuted(&perm).unwrap())));
        let p = random_pocket(&mut rng, 10);
        let perm = random_permutation(&mut rng, p.num_atoms());
        worst = worst.max(max_abs_diff(&structure_output(&enc, &p), &structure_output(&enc, &p.permuted(&perm).unwrap())));
    }
    worst
}

/// Worst `|‖head(e)‖ − 1|` over random inputs at random scales.
pub fn head_norm_error(seed: u64, trials: usize) -> f64 {
    let mut rng = SeedRng::stream(seed, 83);
    let head = ProjectionHead::new(&mut rng, 32, 64);
    (0..trials)
        .map(|_| {
            let scale = 10f64.powf(rng.uniform_in(-3.0, 3.0));
            let e = Tensor::new(vec![32], rng.normal_vec(32, scale)).unwrap();
            let mut tape = Tape::new();
            let v = tape.leaf(&e);
            let out = head.project(&mut tape, v).unwrap();
            let norm = tape.value(out).iter().map(|x| x * x).sum::<f64>().sqrt();
            (norm - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

/// Random `d×d` orthogonal matrix by Gram-Schmidt on Gaussian columns.
pub fn random_orthogonal(rng: &mut SeedRng, d: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
    while basis.len() < d {
        let mut v = rng.normal_vec(d, 1.0);
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    basis
}

pub fn rotate_rows(rows: &[f64], q: &[Vec<f64>]) -> Vec<f64> {
    let d = q.len();
    rows.chunks(d)
        .flat_map(|r| q.iter().map(move |qrow| qrow.iter().zip(r).map(|(a, b)| a * b).sum::<f64>()))
        .collect()
}

pub fn unit_rows(rng: &mut SeedRng, b: usize, d: usize) -> Vec<f64> {
    let mut v = rng.normal_vec(b * d, 1.0);
    for row in v.chunks_mut(d) {
        let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        row.iter_mut().for_each(|x| *x /= n);
    }
    v
}

/// Worst change of info_nce when every row of `x` and `y` is rotated by
/// the same orthogonal matrix.
pub fn info_nce_rotation_error(seed: u64, trials: usize) -> f64 {
    let mut rng = SeedRng::stream(seed, 84);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let (b, d) = (2 + rng.below(15), 2 + rng.below(15));
        let tau = rng.uniform_in(0.1, 2.0);
        let x = unit_rows(&mut rng, b, d);
        let y = unit_rows(&mut rng, b, d);
        let q = random_orthogonal(&mut rng, d);
        let before = info_nce_value(&x, &y, d, tau).unwrap();
        let after = info_nce_value(&rotate_rows(&x, &q), &rotate_rows(&y, &q), d, tau).unwrap();
        worst = worst.max((before - after).abs());
    }
    worst
}
