use super::params::ModelParams;
use super::tensor::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 1e-5 }
    }
}

#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub m: ModelParams<T>,
    pub v: ModelParams<T>,
    pub t: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &ModelParams<T>) -> Self {
        AdamState { m: params.zeros_like(), v: params.zeros_like(), t: 0 }
    }
}

/// One Adam update. The L2 term is folded into the gradient
/// (`g + weight_decay * p`) before the moment updates.
pub fn adam_step<T: Real>(params: &mut ModelParams<T>, grads: &ModelParams<T>, state: &mut AdamState<T>, cfg: &AdamConfig) {
    state.t += 1;
    let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
    let lr = T::lit(cfg.lr);
    let eps = T::lit(cfg.eps);
    let wd = T::lit(cfg.weight_decay);
    let c1 = T::one() - T::lit(cfg.beta1.powi(state.t as i32));
    let c2 = T::one() - T::lit(cfg.beta2.powi(state.t as i32));
    let g_all = grads.named_tensors();
    let tensors = params.tensors_mut().into_iter().zip(state.m.tensors_mut()).zip(state.v.tensors_mut());
    for (((p, m), v), (_, g)) in tensors.zip(g_all) {
        for i in 0..p.len() {
            let gi = g[i] + wd * p[i];
            m[i] = b1 * m[i] + (T::one() - b1) * gi;
            v[i] = b2 * v[i] + (T::one() - b2) * gi * gi;
            let mhat = m[i] / c1;
            let vhat = v[i] / c2;
            p[i] -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
}
