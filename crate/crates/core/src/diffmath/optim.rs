use super::params::ParamStore;
use super::tensor::Tensor;

/// AdamW with decoupled weight decay and bias-corrected moments.
#[derive(Clone, Debug)]
pub struct AdamW {
    pub learning_rate: f64,
    pub betas: (f64, f64),
    pub epsilon: f64,
    pub weight_decay: f64,
    step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl AdamW {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        Self {
            learning_rate,
            betas: (0.9, 0.999),
            epsilon: 1e-8,
            weight_decay,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update; `grads[i]` pairs with parameter `i` of `params`.
    pub fn step(&mut self, params: &mut ParamStore, grads: &[Tensor]) {
        assert_eq!(params.len(), grads.len(), "one gradient per parameter");
        if self.first.is_empty() {
            self.first = (0..params.len()).map(|i| Tensor::zeros(params.get(i).shape())).collect();
            self.second = self.first.clone();
        }
        self.step += 1;
        let (b1, b2) = self.betas;
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        let (lr, eps, wd) = (self.learning_rate, self.epsilon, self.weight_decay);
        for (i, g) in grads.iter().enumerate() {
            let m = self.first[i].data_mut();
            let v = self.second[i].data_mut();
            let p = params.get_mut(i).data_mut();
            for k in 0..p.len() {
                m[k] = b1 * m[k] + (1.0 - b1) * g.data()[k];
                v[k] = b2 * v[k] + (1.0 - b2) * g.data()[k] * g.data()[k];
                let mh = m[k] / c1;
                let vh = v[k] / c2;
                p[k] -= lr * (mh / (vh.sqrt() + eps) + wd * p[k]);
            }
        }
    }
}
