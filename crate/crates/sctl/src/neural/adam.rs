//! Bias-corrected Adam over the MLP parameter shapes.

use nalgebra::{DMatrix, DVector};

use super::mlp::{Mlp, MlpGrads};
use crate::error::{Result, SctlError};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m_w: Vec<DMatrix<f64>>,
    pub v_w: Vec<DMatrix<f64>>,
    pub m_b: Vec<DVector<f64>>,
    pub v_b: Vec<DVector<f64>>,
}

impl AdamState {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m_w: net.weights.iter().map(|w| DMatrix::zeros(w.nrows(), w.ncols())).collect(),
            v_w: net.weights.iter().map(|w| DMatrix::zeros(w.nrows(), w.ncols())).collect(),
            m_b: net.biases.iter().map(|b| DVector::zeros(b.nrows())).collect(),
            v_b: net.biases.iter().map(|b| DVector::zeros(b.nrows())).collect(),
        }
    }
}

/// One Adam update of `net` in place; descends along `grads`.
pub fn adam_step(net: &mut Mlp, grads: &MlpGrads, st: &mut AdamState) -> Result<()> {
    if grads.weights.len() != net.weights.len() || grads.biases.len() != net.biases.len() {
        return Err(SctlError::Shape("adam_step: gradient layout mismatch".into()));
    }
    for (li, (w, g)) in net.weights.iter().zip(&grads.weights).enumerate() {
        if w.shape() != g.shape() {
            return Err(SctlError::Shape(format!(
                "adam_step: weight grad shape mismatch in layer {li}"
            )));
        }
    }
    st.step += 1;
    let bc1 = 1.0 - st.beta1.powi(st.step as i32);
    let bc2 = 1.0 - st.beta2.powi(st.step as i32);
    let (b1, b2, lr, eps) = (st.beta1, st.beta2, st.lr, st.eps);
    // tight zipped-slice loops so the compiler can vectorize the hot path
    let update = move |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    };
    for li in 0..net.weights.len() {
        update(
            net.weights[li].as_mut_slice(),
            grads.weights[li].as_slice(),
            st.m_w[li].as_mut_slice(),
            st.v_w[li].as_mut_slice(),
        );
        update(
            net.biases[li].as_mut_slice(),
            grads.biases[li].as_slice(),
            st.m_b[li].as_mut_slice(),
            st.v_b[li].as_mut_slice(),
        );
    }
    Ok(())
}
