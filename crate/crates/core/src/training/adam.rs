use ndarray::{Array2, Zip};

use crate::tcn::Parameters;

/// Adaptive moment estimation with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    moments: Vec<(Array2<f64>, Array2<f64>)>,
}

impl Adam {
    pub fn new(learning_rate: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            learning_rate,
            beta1,
            beta2,
            eps,
            step: 0,
            moments: Vec::new(),
        }
    }

    pub fn steps(&self) -> i32 {
        self.step
    }

    /// Applies one update from the accumulated gradients.
    pub fn step<M: Parameters + ?Sized>(&mut self, model: &mut M) {
        self.step += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let lr = self.learning_rate * (1.0 - b2.powi(self.step)).sqrt() / (1.0 - b1.powi(self.step));
        let moments = &mut self.moments;
        let mut i = 0;
        model.visit_mut("", &mut |_, p| {
            if moments.len() == i {
                moments.push((Array2::zeros(p.value.raw_dim()), Array2::zeros(p.value.raw_dim())));
            }
            let (m, v) = &mut moments[i];
            Zip::from(&mut p.value)
                .and(&p.grad)
                .and(m)
                .and(v)
                .for_each(|w, &g, m, v| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *w -= lr * *m / (v.sqrt() + eps);
                });
            i += 1;
        });
    }
}
