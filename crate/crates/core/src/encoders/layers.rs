use crate::error::Result;
use crate::numerics::{visit_prefixed, visit_prefixed_mut, Parameterized, SeedRng, Tape, Tensor, Var};

/// Weight matrix with entries drawn from N(0, 1/fan_in).
pub(crate) fn init_weight(rng: &mut SeedRng, fan_in: usize, fan_out: usize) -> Tensor {
    let data = rng.normal_vec(fan_in * fan_out, 1.0 / (fan_in as f64).sqrt());
    Tensor::param(vec![fan_in, fan_out], data).expect("shape matches data")
}

pub(crate) fn init_embedding(rng: &mut SeedRng, rows: usize, width: usize, scale: f64) -> Tensor {
    Tensor::param(vec![rows, width], rng.normal_vec(rows * width, scale)).expect("shape matches data")
}

pub(crate) fn filled(shape: Vec<usize>, value: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::param(shape, vec![value; n]).expect("shape matches data")
}

/// `x W + b`, bias optional.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Option<Tensor>,
}

impl Linear {
    pub fn new(rng: &mut SeedRng, fan_in: usize, fan_out: usize, bias: bool) -> Self {
        Linear {
            weight: init_weight(rng, fan_in, fan_out),
            bias: bias.then(|| filled(vec![fan_out], 0.0)),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let w = tape.leaf(&self.weight);
        let y = tape.matmul(x, w)?;
        match &self.bias {
            Some(b) => {
                let b = tape.leaf(b);
                tape.add_bias(y, b)
            }
            None => Ok(y),
        }
    }
}

impl Parameterized for Linear {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("weight", &self.weight);
        if let Some(b) = &self.bias {
            f("bias", b);
        }
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("weight", &mut self.weight);
        if let Some(b) = &mut self.bias {
            f("bias", b);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gain: Tensor,
    pub bias: Tensor,
}

impl LayerNorm {
    pub fn new(width: usize) -> Self {
        LayerNorm {
            gain: filled(vec![width], 1.0),
            bias: filled(vec![width], 0.0),
        }
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let g = tape.leaf(&self.gain);
        let b = tape.leaf(&self.bias);
        tape.layer_norm(x, g, b)
    }
}

impl Parameterized for LayerNorm {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("gain", &self.gain);
        f("bias", &self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("gain", &mut self.gain);
        f("bias", &mut self.bias);
    }
}

/// Two linear layers with a ReLU between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub first: Linear,
    pub second: Linear,
}

impl Mlp {
    pub fn new(rng: &mut SeedRng, input: usize, hidden: usize, output: usize) -> Self {
        Mlp {
            first: Linear::new(rng, input, hidden, true),
            second: Linear::new(rng, hidden, output, true),
        }
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let h = self.first.forward(tape, x)?;
        let h = tape.relu(h);
        self.second.forward(tape, h)
    }
}

impl Parameterized for Mlp {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        visit_prefixed("first", &self.first, f);
        visit_prefixed("second", &self.second, f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        visit_prefixed_mut("first", &mut self.first, f);
        visit_prefixed_mut("second", &mut self.second, f);
    }
}

/// Pre-norm residual feed-forward sublayer: `x + MLP(LN(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForward {
    pub norm: LayerNorm,
    pub mlp: Mlp,
}

impl FeedForward {
    pub fn new(rng: &mut SeedRng, width: usize) -> Self {
        FeedForward {
            norm: LayerNorm::new(width),
            mlp: Mlp::new(rng, width, width, width),
        }
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let n = self.norm.forward(tape, x)?;
        let y = self.mlp.forward(tape, n)?;
        tape.add(x, y)
    }
}

impl Parameterized for FeedForward {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        visit_prefixed("norm", &self.norm, f);
        visit_prefixed("mlp", &self.mlp, f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        visit_prefixed_mut("norm", &mut self.norm, f);
        visit_prefixed_mut("mlp", &mut self.mlp, f);
    }
}

pub(crate) fn visit_list<T: Parameterized>(
    prefix: &str,
    items: &[T],
    f: &mut dyn FnMut(&str, &Tensor),
) {
    for (i, item) in items.iter().enumerate() {
        visit_prefixed(&format!("{prefix}.{i}"), item, f);
    }
}

pub(crate) fn visit_list_mut<T: Parameterized>(
    prefix: &str,
    items: &mut [T],
    f: &mut dyn FnMut(&str, &mut Tensor),
) {
    for (i, item) in items.iter_mut().enumerate() {
        visit_prefixed_mut(&format!("{prefix}.{i}"), item, f);
    }
}
