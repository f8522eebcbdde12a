//! Reverse-mode differentiation over an eager operation tape.
//!
//! Every builder method evaluates its output immediately and records the
//! operation; insertion order is therefore a valid topological order, and
//! [`Graph::backward`] walks it in reverse accumulating adjoints. Tensors are
//! `f64` throughout and all loops run in a fixed order, so forward and
//! backward are bitwise deterministic for identical inputs.

use crate::error::{Error, Result};
use crate::tensor::{matmul_into, matmul_nt_acc, matmul_tn_acc, sigmoid, Tensor};

/// Probabilities are clamped to this band before any logarithm.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    /// Constant leaf; never receives gradient.
    Value,
    /// Trainable leaf.
    Param,
    /// `a @ b` for `m x k` times `k x n`.
    MatMul,
    /// Row-broadcast bias add: `m x n` plus length-`n` vector.
    AddBias,
    Add,
    Sub,
    Mul,
    Scale(f64),
    /// Constant kept for Debug output; backward is pass-through.
    AddScalar(#[allow(dead_code)] f64),
    /// `1 - x` elementwise.
    OneMinus,
    Relu,
    Tanh,
    Sigmoid,
    Ln,
    Clamp { lo: f64, hi: f64 },
    /// Full reduction to a scalar.
    Sum,
    /// Repeat each row `times` times: `m x n` becomes `(m*times) x n`.
    RepeatRows(usize),
    /// Same data, new dims.
    Reshape,
    /// Identity forward, blocks gradient flow.
    Detach,
}

#[derive(Debug)]
struct Node {
    op: Op,
    inputs: Vec<NodeId>,
    value: Tensor,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Per-node adjoints produced by [`Graph::backward`]. Nodes the loss does not
/// reach report a zero gradient.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `id`, as a tensor shaped like the
    /// node's output. Unreached nodes yield zeros.
    pub fn wrt(&self, graph: &Graph, id: NodeId) -> Tensor {
        let dims = graph.nodes[id.0].value.dims().to_vec();
        match &self.grads[id.0] {
            Some(g) => Tensor::new(dims, g.clone()).expect("gradient shape tracks node shape"),
            None => Tensor::zeros(dims),
        }
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn output(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, inputs: Vec<NodeId>, value: Tensor) -> NodeId {
        let needs_grad = match op {
            Op::Param => true,
            Op::Value | Op::Detach => false,
            _ => inputs.iter().any(|i| self.nodes[i.0].needs_grad),
        };
        self.nodes.push(Node {
            op,
            inputs,
            value,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&mut self, t: Tensor) -> NodeId {
        self.push(Op::Value, vec![], t)
    }

    pub fn param(&mut self, t: Tensor) -> NodeId {
        self.push(Op::Param, vec![], t)
    }

    /// `a @ b` where `a` is `m x k` and `b` is `k x n`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if ta.dims().len() != 2 || tb.dims().len() != 2 || ta.cols() != tb.rows() {
            return Err(Error::shape(
                "matmul",
                format!("{:?} x {:?}", ta.dims(), tb.dims()),
            ));
        }
        let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
        let mut out = Tensor::zeros(vec![m, n]);
        matmul_into(ta.data(), tb.data(), m, k, n, out.data_mut());
        Ok(self.push(Op::MatMul, vec![a, b], out))
    }

    /// Add a length-`n` bias vector to every row of an `m x n` matrix.
    pub fn add_bias(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[bias.0].value);
        if ta.dims().len() != 2 || tb.dims() != [ta.cols()] {
            return Err(Error::shape(
                "add_bias",
                format!("{:?} + {:?}", ta.dims(), tb.dims()),
            ));
        }
        let (m, n) = (ta.rows(), ta.cols());
        let mut data = ta.data().to_vec();
        for i in 0..m {
            for j in 0..n {
                data[i * n + j] += tb.data()[j];
            }
        }
        let out = Tensor::new(vec![m, n], data)?;
        Ok(self.push(Op::AddBias, vec![a, bias], out))
    }

    fn elementwise_pair(&mut self, op: Op, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if ta.dims() != tb.dims() {
            return Err(Error::shape(
                format!("{:?}", op),
                format!("{:?} vs {:?}", ta.dims(), tb.dims()),
            ));
        }
        let data: Vec<f64> = match op {
            Op::Add => ta.data().iter().zip(tb.data()).map(|(x, y)| x + y).collect(),
            Op::Sub => ta.data().iter().zip(tb.data()).map(|(x, y)| x - y).collect(),
            Op::Mul => ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect(),
            _ => unreachable!(),
        };
        let out = Tensor::new(ta.dims().to_vec(), data)?;
        Ok(self.push(op, vec![a, b], out))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise_pair(Op::Add, a, b)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise_pair(Op::Sub, a, b)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise_pair(Op::Mul, a, b)
    }

    fn map(&mut self, op: Op, a: NodeId, f: impl Fn(f64) -> f64) -> NodeId {
        let ta = &self.nodes[a.0].value;
        let data: Vec<f64> = ta.data().iter().map(|&x| f(x)).collect();
        let out = Tensor::new(ta.dims().to_vec(), data).expect("same shape");
        self.push(op, vec![a], out)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        self.map(Op::Scale(c), a, |x| c * x)
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        self.map(Op::AddScalar(c), a, |x| x + c)
    }

    pub fn one_minus(&mut self, a: NodeId) -> NodeId {
        self.map(Op::OneMinus, a, |x| 1.0 - x)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.map(Op::Relu, a, |x| if x > 0.0 { x } else { 0.0 })
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.map(Op::Tanh, a, f64::tanh)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.map(Op::Sigmoid, a, sigmoid)
    }

    /// Natural log. Inputs must already be positive; losses clamp first.
    pub fn ln(&mut self, a: NodeId) -> NodeId {
        self.map(Op::Ln, a, f64::ln)
    }

    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        self.map(Op::Clamp { lo, hi }, a, |x| x.clamp(lo, hi))
    }

    /// Clamp into the open probability band used before logarithms.
    pub fn clamp_prob(&mut self, a: NodeId) -> NodeId {
        self.clamp(a, PROB_CLAMP, 1.0 - PROB_CLAMP)
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let total: f64 = self.nodes[a.0].value.data().iter().sum();
        self.push(Op::Sum, vec![a], Tensor::scalar(total))
    }

    /// Mean over all elements.
    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let n = self.nodes[a.0].value.len().max(1);
        let s = self.sum(a);
        self.scale(s, 1.0 / n as f64)
    }

    pub fn repeat_rows(&mut self, a: NodeId, times: usize) -> Result<NodeId> {
        let ta = &self.nodes[a.0].value;
        if ta.dims().len() != 2 {
            return Err(Error::shape("repeat_rows", format!("{:?}", ta.dims())));
        }
        let (m, n) = (ta.rows(), ta.cols());
        let mut data = Vec::with_capacity(m * times * n);
        for i in 0..m {
            for _ in 0..times {
                data.extend_from_slice(ta.row(i));
            }
        }
        let out = Tensor::new(vec![m * times, n], data)?;
        Ok(self.push(Op::RepeatRows(times), vec![a], out))
    }

    pub fn reshape(&mut self, a: NodeId, dims: Vec<usize>) -> Result<NodeId> {
        let ta = &self.nodes[a.0].value;
        let expected: usize = dims.iter().product();
        if expected != ta.len() {
            return Err(Error::shape(
                "reshape",
                format!("{:?} to {:?}", ta.dims(), dims),
            ));
        }
        let t = Tensor::new(dims, ta.data().to_vec())?;
        Ok(self.push(Op::Reshape, vec![a], t))
    }

    /// Forward identity that stops gradients.
    pub fn detach(&mut self, a: NodeId) -> NodeId {
        let t = self.nodes[a.0].value.clone();
        self.push(Op::Detach, vec![a], t)
    }

    /// Reverse pass from a scalar loss node. Returns adjoints for every node;
    /// parameters the loss never touches get zeros from [`Gradients::wrt`].
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let loss_node = &self.nodes[loss.0];
        if !loss_node.value.is_scalar() {
            return Err(Error::contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                loss_node.value.dims()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(up) = grads[idx].take() else { continue };
            self.accumulate(idx, &up, &mut grads);
            grads[idx] = Some(up);
        }
        Ok(Gradients { grads })
    }

    /// Fetch (initializing to zeros) the adjoint buffer for `input`, or None
    /// when that branch does not need gradients.
    fn grad_slot<'a>(
        &self,
        grads: &'a mut [Option<Vec<f64>>],
        input: NodeId,
    ) -> Option<&'a mut Vec<f64>> {
        if !self.nodes[input.0].needs_grad {
            return None;
        }
        let slot = &mut grads[input.0];
        if slot.is_none() {
            *slot = Some(vec![0.0; self.nodes[input.0].value.len()]);
        }
        slot.as_mut()
    }

    fn accumulate(&self, idx: usize, up: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        match node.op {
            Op::Value | Op::Param => {}
            Op::MatMul => {
                let (a, b) = (node.inputs[0], node.inputs[1]);
                let ta = &self.nodes[a.0].value;
                let tb = &self.nodes[b.0].value;
                let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                if let Some(g) = self.grad_slot(grads, a) {
                    matmul_nt_acc(up, tb.data(), m, n, k, g);
                }
                if let Some(g) = self.grad_slot(grads, b) {
                    matmul_tn_acc(ta.data(), up, m, k, n, g);
                }
            }
            Op::AddBias => {
                let (a, bias) = (node.inputs[0], node.inputs[1]);
                let n = self.nodes[bias.0].value.len();
                if let Some(g) = self.grad_slot(grads, a) {
                    for (gi, ui) in g.iter_mut().zip(up) {
                        *gi += ui;
                    }
                }
                if let Some(g) = self.grad_slot(grads, bias) {
                    for chunk in up.chunks_exact(n) {
                        for j in 0..n {
                            g[j] += chunk[j];
                        }
                    }
                }
            }
            Op::Add => {
                for &input in &node.inputs {
                    if let Some(g) = self.grad_slot(grads, input) {
                        for (gi, ui) in g.iter_mut().zip(up) {
                            *gi += ui;
                        }
                    }
                }
            }
            Op::Sub => {
                let (a, b) = (node.inputs[0], node.inputs[1]);
                if let Some(g) = self.grad_slot(grads, a) {
                    for (gi, ui) in g.iter_mut().zip(up) {
                        *gi += ui;
                    }
                }
                if let Some(g) = self.grad_slot(grads, b) {
                    for (gi, ui) in g.iter_mut().zip(up) {
                        *gi -= ui;
                    }
                }
            }
            Op::Mul => {
                let (a, b) = (node.inputs[0], node.inputs[1]);
                let ta = self.nodes[a.0].value.data();
                let tb = self.nodes[b.0].value.data();
                if let Some(g) = self.grad_slot(grads, a) {
                    for i in 0..g.len() {
                        g[i] += up[i] * tb[i];
                    }
                }
                if let Some(g) = self.grad_slot(grads, b) {
                    for i in 0..g.len() {
                        g[i] += up[i] * ta[i];
                    }
                }
            }
            Op::Scale(c) => {
                if let Some(g) = self.grad_slot(grads, node.inputs[0]) {
                    for (gi, ui) in g.iter_mut().zip(up) {
                        *gi += c * ui;
                    }
                }
            }
            Op::AddScalar(_) => {
                if let Some(g) = self.grad_slot(grads, node.inputs[0]) {
                    for (gi, ui) in g.iter_mut().zip(up) {
                        *gi += ui;
                    }
                }
            }
            Op::OneMinus => {
                if let Some(g) = self.grad_slot(grads, node.inputs[0]) {
                    for (gi, ui) in g.iter_mut().zip(up) {
                        *gi -= ui;
                    }
                }
            }
            Op::Relu => {
                let x = self.nodes[node.inputs[0].0].value.data();
                if let Some(g) = self.grad_slot(grads, node.inputs[0]) {
                    for i in 0..g.len() {
                        if x[i] > 0.0 {
                            g[i] += up[i];
                        }
                    }
                }
            }
            Op::Tanh => {
                let y = node.value.data();
                if let Some(g) = self.grad_slot(grads, node.inputs[0]) {
                    for i in 0..g.len() {
                        g[i] += up[i] * (1.0 - y[i] * y[i]);
                    }
                }
            }
            Op::Sigmoid => {
                let y = node.value.data();
                if let Some(g) = self.grad_slot(grads, node.inputs[0]) {
                    for i in 0..g.len() {
                        g[i] += up[i] * y[i] * (1.0 - y[i]);
                    }
                }
            }
            Op::Ln => {
                let x = self.nodes[node.inputs[0].0].value.data();
                if let Some(g) = self.grad_slot(grads, node.inputs[0]) {
                    for i in 0..g.len() {
                        g[i] += up[i] / x[i];
                    }
                }
            }
            Op::Clamp { lo, hi } => {
                let x = self.nodes[node.inputs[0].0].value.data();
                if let Some(g) = self.grad_slot(grads, node.inputs[0]) {
                    for i in 0..g.len() {
                        if x[i] > lo && x[i] < hi {
                            g[i] += up[i];
                        }
                    }
                }
            }
            Op::Sum => {
                let u = up[0];
                if let Some(g) = self.grad_slot(grads, node.inputs[0]) {
                    for gi in g.iter_mut() {
                        *gi += u;
                    }
                }
            }
            Op::RepeatRows(times) => {
                let n = node.value.cols();
                if let Some(g) = self.grad_slot(grads, node.inputs[0]) {
                    for (out_row, chunk) in up.chunks_exact(n).enumerate() {
                        let src_row = out_row / times;
                        for j in 0..n {
                            g[src_row * n + j] += chunk[j];
                        }
                    }
                }
            }
            Op::Reshape => {
                if let Some(g) = self.grad_slot(grads, node.inputs[0]) {
                    for (gi, ui) in g.iter_mut().zip(up) {
                        *gi += ui;
                    }
                }
            }
            Op::Detach => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_node(g: &mut Graph, v: f64) -> NodeId {
        g.param(Tensor::new(vec![1, 1], vec![v]).unwrap())
    }

    #[test]
    fn square_gradient_is_two_x() {
        // loss = x^2 at x = 3 -> dloss/dx = 6
        let mut g = Graph::new();
        let x = scalar_node(&mut g, 3.0);
        let sq = g.mul(x, x).unwrap();
        let loss = g.sum(sq);
        assert_eq!(g.output(loss).item(), 9.0);
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.wrt(&g, x).data(), &[6.0]);
    }

    #[test]
    fn sigmoid_gradient_at_zero_is_quarter() {
        let mut g = Graph::new();
        let x = scalar_node(&mut g, 0.0);
        let y = g.sigmoid(x);
        let loss = g.sum(y);
        let grads = g.backward(loss).unwrap();
        assert!((grads.wrt(&g, x).data()[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn untouched_parameter_gets_zero_gradient() {
        let mut g = Graph::new();
        let x = scalar_node(&mut g, 2.0);
        let unused = g.param(Tensor::new(vec![2, 2], vec![1.0; 4]).unwrap());
        let loss = g.sum(x);
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.wrt(&g, unused).data(), &[0.0; 4]);
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut g = Graph::new();
        let x = g.param(Tensor::new(vec![2, 1], vec![1.0, 2.0]).unwrap());
        assert!(matches!(g.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn detach_blocks_gradient() {
        let mut g = Graph::new();
        let x = scalar_node(&mut g, 2.0);
        let d = g.detach(x);
        let sq = g.mul(d, d).unwrap();
        let loss = g.sum(sq);
        assert_eq!(g.output(loss).item(), 4.0);
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.wrt(&g, x).data(), &[0.0]);
    }

    #[test]
    fn repeat_rows_sums_gradients_back() {
        let mut g = Graph::new();
        let x = g.param(Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let r = g.repeat_rows(x, 3).unwrap();
        assert_eq!(g.output(r).dims(), &[6, 2]);
        assert_eq!(g.output(r).row(2), &[1.0, 2.0]);
        assert_eq!(g.output(r).row(3), &[3.0, 4.0]);
        let loss = g.sum(r);
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.wrt(&g, x).data(), &[3.0; 4]);
    }

    #[test]
    fn matmul_shape_mismatch_is_error() {
        let mut g = Graph::new();
        let a = g.value(Tensor::zeros(vec![2, 3]));
        let b = g.value(Tensor::zeros(vec![2, 3]));
        assert!(matches!(g.matmul(a, b), Err(Error::Shape { .. })));
    }

    #[test]
    fn forward_is_deterministic() {
        let build = || {
            let mut g = Graph::new();
            let a = g.param(Tensor::new(vec![2, 2], vec![0.3, -1.2, 0.7, 2.4]).unwrap());
            let b = g.value(Tensor::new(vec![2, 2], vec![1.5, 0.25, -0.5, 3.0]).unwrap());
            let m = g.matmul(a, b).unwrap();
            let s = g.sigmoid(m);
            let loss = g.sum(s);
            let grads = g.backward(loss).unwrap();
            (g.output(loss).item(), grads.wrt(&g, a).data().to_vec())
        };
        let (l1, g1) = build();
        let (l2, g2) = build();
        assert_eq!(l1.to_bits(), l2.to_bits());
        for (x, y) in g1.iter().zip(&g2) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
