//! Central-difference verification of reverse-mode gradients.

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::net::{ParamNodes, Parameters};
use crate::tensor::Tensor;

/// Compare the tape gradient of a scalar function against central
/// differences at `point`. `build` receives a fresh graph and the flat
/// parameter leaf and must return the scalar loss node.
///
/// Returns the max over coordinates of `|analytic - numeric| / max(1, |numeric|)`.
pub fn grad_check<F>(build: F, point: &[f64], step: f64) -> Result<f64>
where
    F: Fn(&mut Graph, NodeId) -> Result<NodeId>,
{
    if step <= 0.0 {
        return Err(Error::contract("grad_check step must be > 0"));
    }
    let eval = |coords: &[f64]| -> Result<f64> {
        let mut g = Graph::new();
        let leaf = g.param(Tensor::new(vec![coords.len()], coords.to_vec())?);
        let loss = build(&mut g, leaf)?;
        let v = g.output(loss);
        if !v.is_scalar() {
            return Err(Error::contract("grad_check function must be scalar-valued"));
        }
        let out = v.item();
        if !out.is_finite() {
            return Err(Error::contract(format!("non-finite evaluation: {out}")));
        }
        Ok(out)
    };

    // Analytic pass.
    let analytic = {
        let mut g = Graph::new();
        let leaf = g.param(Tensor::new(vec![point.len()], point.to_vec())?);
        let loss = build(&mut g, leaf)?;
        if !g.output(loss).is_scalar() {
            return Err(Error::contract("grad_check function must be scalar-valued"));
        }
        if !g.output(loss).item().is_finite() {
            return Err(Error::contract("non-finite evaluation at base point"));
        }
        let grads = g.backward(loss)?;
        grads.wrt(&g, leaf).data().to_vec()
    };

    let mut worst = 0.0f64;
    let mut probe = point.to_vec();
    for i in 0..point.len() {
        let orig = probe[i];
        probe[i] = orig + step;
        let plus = eval(&probe)?;
        probe[i] = orig - step;
        let minus = eval(&probe)?;
        probe[i] = orig;
        let numeric = (plus - minus) / (2.0 * step);
        if !numeric.is_finite() {
            return Err(Error::contract("non-finite central difference"));
        }
        let rel = (analytic[i] - numeric).abs() / numeric.abs().max(1.0);
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// [`grad_check`] over a structured parameter set: `build` registers the given
/// parameters on a graph and returns the loss; every coordinate of every
/// tensor is perturbed.
pub fn grad_check_params<F>(build: F, params: &Parameters, step: f64) -> Result<f64>
where
    F: Fn(&mut Graph, &ParamNodes) -> Result<NodeId>,
{
    if step <= 0.0 {
        return Err(Error::contract("grad_check step must be > 0"));
    }
    let eval = |p: &Parameters| -> Result<f64> {
        let mut g = Graph::new();
        let nodes = ParamNodes::register(&mut g, p);
        let loss = build(&mut g, &nodes)?;
        let v = g.output(loss);
        if !v.is_scalar() {
            return Err(Error::contract("grad_check function must be scalar-valued"));
        }
        let out = v.item();
        if !out.is_finite() {
            return Err(Error::contract(format!("non-finite evaluation: {out}")));
        }
        Ok(out)
    };

    let analytic: Vec<Tensor> = {
        let mut g = Graph::new();
        let nodes = ParamNodes::register(&mut g, params);
        let loss = build(&mut g, &nodes)?;
        let grads = g.backward(loss)?;
        nodes.gradients(&g, &grads)
    };

    let mut worst = 0.0f64;
    let mut probe = params.clone();
    for (ti, analytic_tensor) in analytic.iter().enumerate() {
        for j in 0..params.tensors()[ti].len() {
            let orig = probe.tensors()[ti].data()[j];
            probe.tensors_mut()[ti].data_mut()[j] = orig + step;
            let plus = eval(&probe)?;
            probe.tensors_mut()[ti].data_mut()[j] = orig - step;
            let minus = eval(&probe)?;
            probe.tensors_mut()[ti].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let rel = (analytic_tensor.data()[j] - numeric).abs() / numeric.abs().max(1.0);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
