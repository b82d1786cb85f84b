use super::Params;
use crate::error::{Error, Result};

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first: Params,
    second: Params,
    steps: u64,
}

impl Adam {
    pub fn new(like: &Params) -> Self {
        let mut first = like.clone();
        for s in first.slices_mut() {
            s.fill(0.0);
        }
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            second: first.clone(),
            first,
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One update. The embedding (tensor 0) is left untouched unless
    /// `train_embedding`. Fails with `Divergence` if the gradient or the
    /// updated parameters contain a non-finite value.
    pub fn step(&mut self, params: &mut Params, grads: &Params, lr: f64, train_embedding: bool) -> Result<()> {
        if params.shapes() != grads.shapes() || params.shapes() != self.first.shapes() {
            return Err(Error::Shape("gradient shapes do not match parameters".into()));
        }
        if !grads.all_finite() {
            return Err(Error::Divergence(format!("non-finite gradient at step {}", self.steps + 1)));
        }
        self.steps += 1;
        let t = self.steps as i32;
        let correct1 = 1.0 - self.beta1.powi(t);
        let correct2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let grads = grads.slices();
        let firsts = self.first.slices_mut();
        let seconds = self.second.slices_mut();
        for (idx, ((p, m), v)) in params.slices_mut().into_iter().zip(firsts).zip(seconds).enumerate() {
            if idx == 0 && !train_embedding {
                continue;
            }
            for (((w, m), v), &g) in p.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(grads[idx]) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *w -= lr * (*m / correct1) / ((*v / correct2).sqrt() + eps);
            }
        }
        if !params.all_finite() {
            return Err(Error::Divergence(format!("non-finite parameter after step {}", self.steps)));
        }
        Ok(())
    }
}
