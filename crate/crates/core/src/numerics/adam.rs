use super::matrix::{DenseMatrix, Scalar};
use crate::error::{Error, Result};

/// Adam with bias-corrected moment estimates.
#[derive(Clone, Debug)]
pub struct AdamState<T: Scalar = f32> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update to every parameter tensor, in the given order.
    /// Moments are allocated on the first call and shape-checked afterwards.
    pub fn step(&mut self, params: Vec<&mut DenseMatrix<T>>, grads: Vec<&DenseMatrix<T>>) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Dimension(format!(
                "{} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        if self.first.is_empty() {
            self.first = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
            self.second = self.first.clone();
        }
        if self.first.len() != params.len() {
            return Err(Error::Dimension("parameter set changed between steps".into()));
        }
        self.step += 1;
        let t = self.step as i32;
        let b1 = T::of(self.beta1);
        let b2 = T::of(self.beta2);
        let one = T::one();
        let correction1 = T::of(1.0 - self.beta1.powi(t));
        let correction2 = T::of(1.0 - self.beta2.powi(t));
        let lr = T::of(self.learning_rate);
        let eps = T::of(self.epsilon);

        for (k, (p, g)) in params.into_iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || self.first[k].len() != p.len() {
                return Err(Error::Dimension(format!("tensor {k}: parameter/gradient shape mismatch")));
            }
            let m = &mut self.first[k];
            let v = &mut self.second[k];
            for (((w, &gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + (one - b1) * gi;
                *vi = b2 * *vi + (one - b2) * gi * gi;
                let m_hat = *mi / correction1;
                let v_hat = *vi / correction2;
                *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
