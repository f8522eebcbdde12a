//! The differentiation substrate on its own: build a custom scalar loss on
//! the tape, take gradients, and verify them against central differences.
//!
//! ```bash
//! cargo run -p modl --example gradient_check
//! ```

use modl::gradcheck::{grad_check, grad_check_params};
use modl::graph::Graph;
use modl::losses::bce_loss_node;
use modl::net::{forward_on_graph, Activation, ModelSpec, Parameters};
use modl::tensor::Tensor;

fn main() -> modl::Result<()> {
    // A scalar function of three variables: sum of sigmoid(w * x) terms.
    let err = grad_check(
        |g, x| {
            let scaled = g.scale(x, 1.7);
            let s = g.sigmoid(scaled);
            Ok(g.sum(s))
        },
        &[0.2, -1.4, 0.8],
        1e-5,
    )?;
    println!("sigmoid chain       max relative error {err:.2e}");

    // A quadratic with a known gradient: d/dx sum(x^2) = 2x.
    let mut g = Graph::new();
    let x = g.param(Tensor::new(vec![3], vec![1.0, -2.0, 3.0])?);
    let sq = g.mul(x, x)?;
    let loss = g.sum(sq);
    let grads = g.backward(loss)?;
    println!(
        "quadratic gradient  analytic {:?} (expected [2, -4, 6])",
        grads.wrt(&g, x).data()
    );

    // The full masked-BCE training loss through a model, over every weight.
    let spec = ModelSpec::new("demo", 4, vec![6], 2, Activation::Tanh, 5)?;
    let params = Parameters::init(&spec)?;
    let feats = Tensor::matrix(3, 4, (0..12).map(|i| (i as f64 * 0.37).sin()).collect())?;
    let targets = [1.0, 0.0, 0.0, 1.0, 1.0, 0.0];
    let mask = [true, true, true, false, true, true];
    let err = grad_check_params(
        |g, nodes| {
            let x = g.value(feats.clone());
            let preds = forward_on_graph(g, &spec, nodes, x)?;
            bce_loss_node(g, preds, &targets, &mask)
        },
        &params,
        1e-5,
    )?;
    println!("masked BCE model    max relative error {err:.2e} over {} parameters", params.count());
    Ok(())
}
