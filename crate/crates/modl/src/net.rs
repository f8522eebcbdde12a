//! Feed-forward multi-label models: layer layout, seeded initialization,
//! inference and graph-recorded forward passes, and bit-exact checkpoints.
//!
//! Every model is a stack of dense layers with an elementwise activation and
//! an independent per-class sigmoid head, so outputs are per-class
//! probabilities rather than a normalized distribution over classes.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::bytes::{self, Cursor, Fnv1a, Payload};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::tensor::{matmul_into, sigmoid, Tensor};

const CHECKPOINT_MAGIC: &[u8; 8] = b"MODLCKP1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

/// Layer layout of one model. Width/depth/seed variation is how the
/// reference zoo gets its heterogeneity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
    pub init_seed: u64,
}

impl ModelSpec {
    pub fn new(
        name: impl Into<String>,
        input_dim: usize,
        hidden: Vec<usize>,
        output_dim: usize,
        activation: Activation,
        init_seed: u64,
    ) -> Result<Self> {
        let spec = ModelSpec {
            name: name.into(),
            input_dim,
            hidden,
            output_dim,
            activation,
            init_seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() {
            return Err(Error::contract(format!(
                "model `{}` needs at least one hidden layer",
                self.name
            )));
        }
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::contract(format!(
                "model `{}` has a zero-width layer",
                self.name
            )));
        }
        Ok(())
    }

    /// Successive (fan_in, fan_out) pairs, input through output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut prev = self.input_dim;
        for &h in &self.hidden {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.output_dim));
        dims
    }

    /// Exact trainable parameter count (weights + biases).
    pub fn param_count(&self) -> usize {
        self.layer_dims()
            .iter()
            .map(|&(fi, fo)| fi * fo + fo)
            .sum()
    }

    /// Stable content hash; keys checkpoints and stage-1 caches.
    pub fn hash(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.update_str(&self.name);
        h.update_u64(self.input_dim as u64);
        h.update_u64(self.hidden.len() as u64);
        for &w in &self.hidden {
            h.update_u64(w as u64);
        }
        h.update_u64(self.output_dim as u64);
        h.update_u64(match self.activation {
            Activation::Relu => 0,
            Activation::Tanh => 1,
        });
        h.update_u64(self.init_seed);
        h.finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `fan_in x fan_out`, row-major.
    pub weights: Tensor,
    /// Length `fan_out`.
    pub bias: Tensor,
}

/// Trainable weights of one model, layer by layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub layers: Vec<DenseLayer>,
}

impl Parameters {
    /// Seeded Glorot-uniform weights, zero biases.
    pub fn init(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.init_seed);
        let layers = spec
            .layer_dims()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data: Vec<f64> = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-bound..bound))
                    .collect();
                DenseLayer {
                    weights: Tensor::new(vec![fan_in, fan_out], data).expect("sized above"),
                    bias: Tensor::zeros(vec![fan_out]),
                }
            })
            .collect();
        Ok(Parameters { layers })
    }

    pub fn zeros(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layer_dims()
            .into_iter()
            .map(|(fan_in, fan_out)| DenseLayer {
                weights: Tensor::zeros(vec![fan_in, fan_out]),
                bias: Tensor::zeros(vec![fan_out]),
            })
            .collect();
        Ok(Parameters { layers })
    }

    /// Flat view over all tensors: weights then bias, per layer.
    pub fn tensors(&self) -> Vec<&Tensor> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weights, &l.bias])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weights, &mut l.bias])
            .collect()
    }

    pub fn count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Content checksum over the raw little-endian parameter bytes.
    pub fn checksum(&self) -> u64 {
        let mut h = Fnv1a::new();
        for t in self.tensors() {
            h.update_u64(t.len() as u64);
            for &v in t.data() {
                h.update_f64(v);
            }
        }
        h.finish()
    }
}

fn check_features(spec: &ModelSpec, features: &Tensor) -> Result<()> {
    if features.dims().len() != 2 || features.cols() != spec.input_dim {
        return Err(Error::shape(
            format!("forward({})", spec.name),
            format!(
                "features {:?} do not match input width {}",
                features.dims(),
                spec.input_dim
            ),
        ));
    }
    Ok(())
}

fn check_params(spec: &ModelSpec, params: &Parameters) -> Result<()> {
    let dims = spec.layer_dims();
    if params.layers.len() != dims.len() {
        return Err(Error::shape(
            format!("forward({})", spec.name),
            format!(
                "parameters have {} layers, spec defines {}",
                params.layers.len(),
                dims.len()
            ),
        ));
    }
    for (i, ((fi, fo), layer)) in dims.iter().zip(&params.layers).enumerate() {
        if layer.weights.dims() != [*fi, *fo] || layer.bias.dims() != [*fo] {
            return Err(Error::shape(
                format!("forward({})", spec.name),
                format!(
                    "layer {} expects {}x{} weights, got {:?}",
                    i,
                    fi,
                    fo,
                    layer.weights.dims()
                ),
            ));
        }
    }
    Ok(())
}

/// Inference forward pass: `batch x D` features to `batch x C` per-class
/// probabilities. Pure and deterministic; shares its kernels with the graph
/// path so both produce identical values.
pub fn forward(spec: &ModelSpec, params: &Parameters, features: &Tensor) -> Result<Tensor> {
    check_features(spec, features)?;
    check_params(spec, params)?;
    let batch = features.rows();
    let mut cur = features.data().to_vec();
    let mut cur_width = spec.input_dim;
    let last = params.layers.len() - 1;
    for (i, layer) in params.layers.iter().enumerate() {
        let out_width = layer.bias.len();
        let mut next = vec![0.0; batch * out_width];
        matmul_into(&cur, layer.weights.data(), batch, cur_width, out_width, &mut next);
        for r in 0..batch {
            for c in 0..out_width {
                next[r * out_width + c] += layer.bias.data()[c];
            }
        }
        if i == last {
            for v in next.iter_mut() {
                *v = sigmoid(*v);
            }
        } else {
            match spec.activation {
                Activation::Relu => {
                    for v in next.iter_mut() {
                        if *v < 0.0 {
                            *v = 0.0;
                        }
                    }
                }
                Activation::Tanh => {
                    for v in next.iter_mut() {
                        *v = v.tanh();
                    }
                }
            }
        }
        cur = next;
        cur_width = out_width;
    }
    Tensor::new(vec![batch, spec.output_dim], cur)
}

/// Graph node handles for one model's parameters, in layer order.
#[derive(Debug, Clone)]
pub struct ParamNodes {
    pub layers: Vec<(NodeId, NodeId)>,
}

impl ParamNodes {
    /// Register every parameter tensor as a trainable graph leaf.
    pub fn register(graph: &mut Graph, params: &Parameters) -> Self {
        let layers = params
            .layers
            .iter()
            .map(|l| (graph.param(l.weights.clone()), graph.param(l.bias.clone())))
            .collect();
        ParamNodes { layers }
    }

    /// Collect gradients in the same flat order as [`Parameters::tensors`].
    pub fn gradients(&self, graph: &Graph, grads: &crate::graph::Gradients) -> Vec<Tensor> {
        self.layers
            .iter()
            .flat_map(|&(w, b)| [grads.wrt(graph, w), grads.wrt(graph, b)])
            .collect()
    }
}

/// Record the forward pass on a graph; returns the `batch x C` probability
/// node. The sigmoid head output is in (0,1); losses clamp before logs.
pub fn forward_on_graph(
    graph: &mut Graph,
    spec: &ModelSpec,
    nodes: &ParamNodes,
    features: NodeId,
) -> Result<NodeId> {
    let feat = graph.output(features);
    if feat.dims().len() != 2 || feat.cols() != spec.input_dim {
        return Err(Error::shape(
            format!("forward({})", spec.name),
            format!(
                "features {:?} do not match input width {}",
                feat.dims(),
                spec.input_dim
            ),
        ));
    }
    if nodes.layers.len() != spec.hidden.len() + 1 {
        return Err(Error::shape(
            format!("forward({})", spec.name),
            "parameter nodes do not match spec depth".to_string(),
        ));
    }
    let mut cur = features;
    let last = nodes.layers.len() - 1;
    for (i, &(w, b)) in nodes.layers.iter().enumerate() {
        let z = graph.matmul(cur, w)?;
        let z = graph.add_bias(z, b)?;
        cur = if i == last {
            graph.sigmoid(z)
        } else {
            match spec.activation {
                Activation::Relu => graph.relu(z),
                Activation::Tanh => graph.tanh(z),
            }
        };
    }
    Ok(cur)
}

/// Serialize parameters: header (spec hash, layer count), then per-layer
/// shape and raw little-endian values. Round-trips bit-exactly.
pub fn save_checkpoint(path: &Path, spec: &ModelSpec, params: &Parameters) -> Result<()> {
    check_params(spec, params)?;
    let mut p = Payload::new();
    p.put_u64(spec.hash());
    p.put_u32(params.layers.len() as u32);
    for layer in &params.layers {
        p.put_u64(layer.weights.rows() as u64);
        p.put_u64(layer.weights.cols() as u64);
        p.put_f64_slice(layer.weights.data());
        p.put_f64_slice(layer.bias.data());
    }
    bytes::write_framed(path, CHECKPOINT_MAGIC, &p.into_bytes())
}

/// Load a checkpoint, returning the stored spec hash and parameters.
pub fn load_checkpoint(path: &Path) -> Result<(u64, Parameters)> {
    let payload = bytes::read_framed(path, CHECKPOINT_MAGIC)?;
    let mut c = Cursor::new(path, &payload);
    let spec_hash = c.get_u64()?;
    let layer_count = c.get_u32()? as usize;
    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let rows = c.get_u64()? as usize;
        let cols = c.get_u64()? as usize;
        let weights = Tensor::new(vec![rows, cols], c.get_f64_vec(rows * cols)?)?;
        let bias = Tensor::new(vec![cols], c.get_f64_vec(cols)?)?;
        layers.push(DenseLayer { weights, bias });
    }
    c.expect_end()?;
    Ok((spec_hash, Parameters { layers }))
}

/// Load a checkpoint and verify it belongs to `spec`.
pub fn load_checkpoint_for(path: &Path, spec: &ModelSpec) -> Result<Parameters> {
    let (hash, params) = load_checkpoint(path)?;
    if hash != spec.hash() {
        return Err(Error::corrupt(
            path,
            format!("checkpoint belongs to a different model than `{}`", spec.name),
        ));
    }
    check_params(spec, &params)?;
    Ok(params)
}
