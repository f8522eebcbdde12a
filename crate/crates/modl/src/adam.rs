//! Adam with bias correction, operating directly on [`Parameters`].

use crate::error::{Error, Result};
use crate::net::Parameters;
use crate::tensor::Tensor;

pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Optimizer state: step count plus first/second moment buffers shaped like
/// the parameters (flat order: weights then bias, per layer).
#[derive(Debug, Clone)]
pub struct AdamState {
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &Parameters, beta1: f64, beta2: f64) -> Self {
        let shapes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
        AdamState {
            step: 0,
            beta1,
            beta2,
            epsilon: DEFAULT_EPSILON,
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// One bias-corrected Adam update. Gradients arrive in the same flat order as
/// [`Parameters::tensors`]. A non-finite gradient rejects the whole update and
/// leaves both parameters and state untouched.
pub fn adam_step(
    params: &mut Parameters,
    grads: &[Tensor],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    let tensors = params.tensors_mut();
    if grads.len() != tensors.len() {
        return Err(Error::shape(
            "adam_step",
            format!("{} gradient tensors for {} parameters", grads.len(), tensors.len()),
        ));
    }
    for (i, (t, g)) in tensors.iter().zip(grads).enumerate() {
        if t.dims() != g.dims() {
            return Err(Error::shape(
                "adam_step",
                format!("tensor {}: {:?} vs gradient {:?}", i, t.dims(), g.dims()),
            ));
        }
        if !g.all_finite() {
            return Err(Error::contract(format!(
                "non-finite gradient in tensor {i}; update rejected"
            )));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);

    for (ti, (tensor, grad)) in tensors.into_iter().zip(grads).enumerate() {
        let m = &mut state.first[ti];
        let v = &mut state.second[ti];
        let data = tensor.data_mut();
        for j in 0..data.len() {
            let g = grad.data()[j];
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            data[j] -= lr * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Activation, ModelSpec, Parameters};

    fn setup() -> (ModelSpec, Parameters) {
        let spec = ModelSpec::new("t", 2, vec![3], 1, Activation::Relu, 5).unwrap();
        let params = Parameters::init(&spec).unwrap();
        (spec, params)
    }

    fn zero_grads(params: &Parameters) -> Vec<Tensor> {
        params
            .tensors()
            .iter()
            .map(|t| Tensor::zeros(t.dims().to_vec()))
            .collect()
    }

    #[test]
    fn zero_gradient_is_identity_for_many_steps() {
        let (_, mut params) = setup();
        let before = params.clone();
        let mut state = AdamState::new(&params, 0.9, 0.999);
        let grads = zero_grads(&params);
        for _ in 0..17 {
            adam_step(&mut params, &grads, &mut state, 0.001).unwrap();
        }
        assert_eq!(params, before);
        assert_eq!(state.step, 17);
    }

    #[test]
    fn first_step_magnitude_is_lr_times_sign() {
        let (_, mut params) = setup();
        let before = params.clone();
        let mut state = AdamState::new(&params, 0.9, 0.999);
        let grads: Vec<Tensor> = params
            .tensors()
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let v: Vec<f64> = (0..t.len())
                    .map(|j| if (i + j) % 2 == 0 { 0.7 } else { -1.3 })
                    .collect();
                Tensor::new(t.dims().to_vec(), v).unwrap()
            })
            .collect();
        let lr = 0.001;
        adam_step(&mut params, &grads, &mut state, lr).unwrap();

        // Closed-form first step: m_hat = g, v_hat = g^2, so the update is
        // lr * g / (|g| + eps) which is lr * sign(g) up to epsilon.
        for ((old, new), g) in before
            .tensors()
            .iter()
            .zip(params.tensors())
            .zip(&grads)
        {
            for ((&o, &n), &gv) in old.data().iter().zip(new.data()).zip(g.data()) {
                let expected = o - lr * gv / (gv.abs() + DEFAULT_EPSILON);
                assert!((n - expected).abs() < 1e-15);
                assert!(((o - n).abs() - lr).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn same_seed_is_bitwise_reproducible() {
        let run = || {
            let (_, mut params) = setup();
            let mut state = AdamState::new(&params, 0.9, 0.999);
            for step in 0..25u64 {
                let grads: Vec<Tensor> = params
                    .tensors()
                    .iter()
                    .map(|t| {
                        let v: Vec<f64> = t
                            .data()
                            .iter()
                            .map(|&x| (x * 3.7 + step as f64 * 0.11).sin())
                            .collect();
                        Tensor::new(t.dims().to_vec(), v).unwrap()
                    })
                    .collect();
                adam_step(&mut params, &grads, &mut state, 0.01).unwrap();
            }
            params
        };
        let a = run();
        let b = run();
        assert_eq!(a.checksum(), b.checksum());
    }

    #[test]
    fn non_finite_gradient_rejected_without_side_effects() {
        let (_, mut params) = setup();
        let before = params.clone();
        let mut state = AdamState::new(&params, 0.9, 0.999);
        let mut grads = zero_grads(&params);
        grads[1].data_mut()[0] = f64::NAN;
        let err = adam_step(&mut params, &grads, &mut state, 0.001).unwrap_err();
        assert!(err.to_string().contains("non-finite"));
        assert_eq!(params, before);
        assert_eq!(state.step, 0);
    }
}
