//! Build a small graph on the tape, backpropagate, and compare the
//! gradient against central differences.
//!
//!     cargo run -p vars-core --example autodiff

use vars_core::tensor::{grad_check_many, Tape, Tensor};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let x = Tensor::new(&[2, 3], vec![0.5, -1.0, 2.0, 1.5, 0.0, -0.5])?;
    let w = Tensor::new(&[3, 4], (0..12).map(|i| (i as f64 - 6.0) / 10.0).collect())?;
    let b = Tensor::new(&[4], vec![0.1, 0.0, -0.1, 0.2])?;
    let labels = [2, 0];

    let mut tape = Tape::new();
    // only leaves that ask for a gradient get one
    let xv = tape.constant(x.clone());
    let wv = tape.leaf(w.clone().with_requires_grad(true));
    let bv = tape.leaf(b.clone().with_requires_grad(true));
    let logits = tape.linear(xv, wv, bv)?;
    let loss = tape.softmax_cross_entropy(logits, &labels)?;
    tape.backward(loss)?;
    println!("loss = {:.6}", tape.data(loss)[0]);
    println!("dL/db = {:.4?}", tape.grad(bv).unwrap_or_default());
    println!("x has a gradient: {}", tape.grad(xv).is_some());

    let report = grad_check_many(
        |tape, v| {
            let logits = tape.linear(v[0], v[1], v[2])?;
            tape.softmax_cross_entropy(logits, &labels)
        },
        &[x, w, b],
        1e-6,
    )?;
    println!("{} coordinates checked, max relative error {:.2e}", report.coordinates, report.max_rel_error);
    Ok(())
}
