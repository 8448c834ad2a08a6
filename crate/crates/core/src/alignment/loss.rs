use crate::error::{Error, Result};
use crate::numerics::{Tape, Var};

/// Rows must have unit norm within this tolerance.
pub const NORM_TOLERANCE: f64 = 1e-3;

fn check_pair(tape: &Tape, x: Var, y: Var) -> Result<usize> {
    let (sx, sy) = (tape.shape(x), tape.shape(y));
    if sx.len() != 2 || sx != sy {
        return Err(Error::Dimension {
            op: "info_nce",
            lhs: sx.to_vec(),
            rhs: sy.to_vec(),
        });
    }
    let (b, d) = (sx[0], sx[1]);
    if b < 2 {
        return Err(Error::contract(format!(
            "in-batch contrastive loss needs at least 2 rows, got {b}"
        )));
    }
    for (name, v) in [("x", x), ("y", y)] {
        for (i, row) in tape.value(v).chunks(d).enumerate() {
            let norm = row.iter().map(|a| a * a).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::contract(format!(
                    "{name} row {i} has norm {norm}, expected unit rows"
                )));
            }
        }
    }
    Ok(b)
}

/// `mean_i -log softmax_j(x_i·y_j * inv_tau)[i]`, with `inv_tau` a scalar
/// node so the temperature can be learned.
pub fn info_nce_scaled(tape: &mut Tape, x: Var, y: Var, inv_tau: Var) -> Result<Var> {
    let b = check_pair(tape, x, y)?;
    let inv = tape.value(inv_tau);
    if inv.len() != 1 || !(inv[0] > 0.0 && inv[0].is_finite()) {
        return Err(Error::contract(format!("temperature must be positive and finite, got 1/{inv:?}")));
    }
    let yt = tape.transpose(y)?;
    let sims = tape.matmul(x, yt)?;
    let logits = tape.mul_scalar(sims, inv_tau)?;
    let logp = tape.log_softmax_rows(logits);
    let diag: Vec<usize> = (0..b).map(|i| i * b + i).collect();
    let picked = tape.gather_elements(logp, &diag)?;
    let m = tape.mean(picked);
    Ok(tape.scale(m, -1.0))
}

/// InfoNCE with in-batch negatives `x_i·y_j` only, averaged over the batch.
pub fn info_nce(tape: &mut Tape, x: Var, y: Var, tau: f64) -> Result<Var> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::contract(format!("temperature must be positive, got {tau}")));
    }
    let inv = tape.constant(vec![], vec![1.0 / tau])?;
    info_nce_scaled(tape, x, y, inv)
}

pub fn symmetric_loss_scaled(tape: &mut Tape, x: Var, y: Var, inv_tau: Var) -> Result<Var> {
    let a = info_nce_scaled(tape, x, y, inv_tau)?;
    let b = info_nce_scaled(tape, y, x, inv_tau)?;
    tape.add(a, b)
}

/// `info_nce(x, y) + info_nce(y, x)`, equal weights.
pub fn symmetric_loss(tape: &mut Tape, x: Var, y: Var, tau: f64) -> Result<Var> {
    let a = info_nce(tape, x, y, tau)?;
    let b = info_nce(tape, y, x, tau)?;
    tape.add(a, b)
}

/// Loss value for plain row-major matrices, without a caller-visible tape.
pub fn info_nce_value(x: &[f64], y: &[f64], dim: usize, tau: f64) -> Result<f64> {
    let mut tape = Tape::new();
    let b = x.len() / dim.max(1);
    let xv = tape.constant(vec![b, dim], x.to_vec())?;
    let yv = tape.constant(vec![y.len() / dim.max(1), dim], y.to_vec())?;
    let l = info_nce(&mut tape, xv, yv, tau)?;
    tape.scalar_value(l)
}
