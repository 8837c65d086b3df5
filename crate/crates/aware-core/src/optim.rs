//! Adam with bias correction.

use crate::error::{Error, Result};
use crate::scalar::{sc, Scalar};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy)]
pub struct AdamHyper<T: Scalar> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Scalar> AdamHyper<T> {
    pub fn with_lr(lr: T) -> Self {
        AdamHyper {
            lr,
            beta1: sc(0.9),
            beta2: sc(0.999),
            epsilon: sc(1e-8),
        }
    }
}

/// Per-parameter first/second moment accumulators.
#[derive(Debug, Clone)]
pub struct AdamState<T: Scalar> {
    pub first_moment: Vec<Matrix<T>>,
    pub second_moment: Vec<Matrix<T>>,
    pub step_count: u64,
    pub hyper: AdamHyper<T>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &[Matrix<T>], hyper: AdamHyper<T>) -> Self {
        AdamState {
            first_moment: params
                .iter()
                .map(|p| Matrix::zeros(p.rows(), p.cols()))
                .collect(),
            second_moment: params
                .iter()
                .map(|p| Matrix::zeros(p.rows(), p.cols()))
                .collect(),
            step_count: 0,
            hyper,
        }
    }
}

/// One Adam update over a parameter list, in place. Deterministic.
pub fn adam_step<T: Scalar>(
    params: &mut [Matrix<T>],
    grads: &[Matrix<T>],
    state: &mut AdamState<T>,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(Error::Contract(
            "adam_step: parameter/gradient/state count mismatch".into(),
        ));
    }
    for (p, g) in params.iter().zip(grads.iter()) {
        if p.shape() != g.shape() {
            return Err(Error::shape("adam_step", p.shape_str(), g.shape_str()));
        }
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let h = state.hyper;
    let bc1 = T::one() - h.beta1.powi(t);
    let bc2 = T::one() - h.beta2.powi(t);
    for i in 0..params.len() {
        let m = &mut state.first_moment[i];
        let v = &mut state.second_moment[i];
        let p = &mut params[i];
        let g = &grads[i];
        for e in 0..p.len() {
            let ge = g.data()[e];
            let me = h.beta1 * m.data()[e] + (T::one() - h.beta1) * ge;
            let ve = h.beta2 * v.data()[e] + (T::one() - h.beta2) * ge * ge;
            m.data_mut()[e] = me;
            v.data_mut()[e] = ve;
            let m_hat = me / bc1;
            let v_hat = ve / bc2;
            p.data_mut()[e] = p.data()[e] - h.lr * m_hat / (v_hat.sqrt() + h.epsilon);
        }
    }
    Ok(())
}
