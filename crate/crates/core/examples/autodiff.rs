//! Fits a small MLP to a noisy sine with the tape and Adam, then checks
//! one gradient against a central difference.

use bindcore::encoders::Mlp;
use bindcore::numerics::{AdamConfig, AdamState, Parameterized, SeedRng, Tape, Tensor};

fn loss(mlp: &Mlp, tape: &mut Tape, x: &Tensor, y: &Tensor) -> bindcore::Result<bindcore::numerics::Var> {
    let xv = tape.leaf(x);
    let yv = tape.leaf(y);
    let pred = mlp.forward(tape, xv)?;
    let err = tape.sub(pred, yv)?;
    let sq = tape.mul(err, err)?;
    Ok(tape.mean(sq))
}

fn main() -> bindcore::Result<()> {
    let mut rng = SeedRng::new(1);
    let n = 64;
    let xs: Vec<f64> = (0..n).map(|i| -3.0 + 6.0 * i as f64 / (n - 1) as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x.sin() + 0.05 * rng.normal()).collect();
    let x = Tensor::new(vec![n, 1], xs)?;
    let y = Tensor::new(vec![n, 1], ys)?;

    let mut mlp = Mlp::new(&mut rng, 1, 32, 1);
    let mut adam = AdamState::new(AdamConfig { lr: 1e-2, ..AdamConfig::default() });
    for step in 0..=2000 {
        let mut tape = Tape::new();
        let l = loss(&mlp, &mut tape, &x, &y)?;
        if step % 400 == 0 {
            println!("step {step:4}  mse {:.5}", tape.scalar_value(l)?);
        }
        tape.backward(l)?.accumulate(&mut mlp)?;
        adam.step(&mut mlp)?;
    }

    // one coordinate of the analytic gradient against (f(w+h) - f(w-h)) / 2h
    let mut tape = Tape::new();
    let l = loss(&mlp, &mut tape, &x, &y)?;
    tape.backward(l)?.accumulate(&mut mlp)?;
    let mut analytic = 0.0;
    mlp.visit_params(&mut |name, t| {
        if analytic == 0.0 && name.ends_with("weight") {
            analytic = t.grad().map_or(0.0, |g| g[0]);
        }
    });
    let h = 1e-6;
    let probe = |delta: f64| -> f64 {
        let mut m = mlp.clone();
        let mut done = false;
        m.visit_params_mut(&mut |name, t| {
            if !done && name.ends_with("weight") {
                t.data_mut()[0] += delta;
                done = true;
            }
        });
        let mut tape = Tape::new();
        let l = loss(&m, &mut tape, &x, &y).unwrap();
        tape.scalar_value(l).unwrap()
    };
    let numeric = (probe(h) - probe(-h)) / (2.0 * h);
    println!("first weight gradient: analytic {analytic:.8e}, central difference {numeric:.8e}");
    Ok(())
}
