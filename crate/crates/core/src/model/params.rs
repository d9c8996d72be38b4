use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tensor::{Mat, Real};
use crate::error::{Error, Result};

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub layers: usize,
    pub hidden: usize,
    /// Always 1; kept so checkpoints state it explicitly.
    pub heads: usize,
    pub mlp_hidden: usize,
    pub use_layernorm: bool,
    /// Aggregate `relu(h_u + e_vu)` over neighbors `u` instead of the default
    /// `relu(h_v + e_vu)`.
    pub gine_neighbor_variant: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            layers: 4,
            hidden: 32,
            heads: 1,
            mlp_hidden: 32,
            use_layernorm: true,
            gine_neighbor_variant: false,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::Config("layers must be >= 1".into()));
        }
        if self.hidden == 0 || self.mlp_hidden == 0 {
            return Err(Error::Config("hidden sizes must be >= 1".into()));
        }
        if self.heads != 1 {
            return Err(Error::Config(format!("only single-head attention is supported, got {}", self.heads)));
        }
        Ok(())
    }

    /// Same architecture (ignores the init seed).
    pub fn same_architecture(&self, other: &ModelConfig) -> bool {
        let strip = |c: &ModelConfig| ModelConfig { seed: 0, ..c.clone() };
        strip(self) == strip(other)
    }

    pub fn param_count(&self) -> usize {
        let d = self.hidden;
        let lin = |i: usize, o: usize| i * o + o;
        let per_layer = lin(2, d) + 2 * lin(d, d) + 3 * d * d + 2 * lin(d, d) + if self.use_layernorm { 2 * d } else { 0 };
        lin(3, d) + self.layers * per_layer + lin(d, self.mlp_hidden) + lin(self.mlp_hidden, 1)
    }
}

/// `y = x W + b` with `W` stored `in x out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<T> {
    pub w: Mat<T>,
    pub b: Vec<T>,
}

impl<T: Real> Linear<T> {
    pub fn zeros(inp: usize, out: usize) -> Self {
        Linear { w: Mat::zeros(inp, out), b: vec![T::zero(); out] }
    }

    fn glorot(inp: usize, out: usize, rng: &mut ChaCha8Rng) -> Self {
        Linear { w: glorot(inp, out, rng), b: vec![T::zero(); out] }
    }
}

fn glorot<T: Real>(inp: usize, out: usize, rng: &mut ChaCha8Rng) -> Mat<T> {
    let limit = (6.0 / (inp + out) as f64).sqrt();
    let data = (0..inp * out).map(|_| T::lit(rng.gen_range(-limit..limit))).collect();
    Mat::from_vec(inp, out, data)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<T> {
    /// Edge displacement projection, 2 -> d.
    pub edge: Linear<T>,
    pub gine_in: Linear<T>,
    pub gine_out: Linear<T>,
    pub wq: Mat<T>,
    pub wk: Mat<T>,
    pub wv: Mat<T>,
    pub fuse_in: Linear<T>,
    pub fuse_out: Linear<T>,
    /// Empty when layernorm is disabled.
    pub norm_gain: Vec<T>,
    pub norm_bias: Vec<T>,
}

/// All trainable tensors. Gradients and Adam moments reuse this type.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    pub config: ModelConfig,
    pub embed: Linear<T>,
    pub layers: Vec<LayerParams<T>>,
    pub head_in: Linear<T>,
    pub head_out: Linear<T>,
}

impl<T: Real> ModelParams<T> {
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let d = config.hidden;
        let ln = if config.use_layernorm { d } else { 0 };
        let layers = (0..config.layers)
            .map(|_| LayerParams {
                edge: Linear::zeros(2, d),
                gine_in: Linear::zeros(d, d),
                gine_out: Linear::zeros(d, d),
                wq: Mat::zeros(d, d),
                wk: Mat::zeros(d, d),
                wv: Mat::zeros(d, d),
                fuse_in: Linear::zeros(d, d),
                fuse_out: Linear::zeros(d, d),
                norm_gain: vec![T::zero(); ln],
                norm_bias: vec![T::zero(); ln],
            })
            .collect();
        Ok(ModelParams {
            config: config.clone(),
            embed: Linear::zeros(3, d),
            layers,
            head_in: Linear::zeros(d, config.mlp_hidden),
            head_out: Linear::zeros(config.mlp_hidden, 1),
        })
    }

    /// Glorot-uniform weights, zero biases, unit layernorm gains; seeded by
    /// `config.seed`.
    pub fn init(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d = config.hidden;
        let ln = if config.use_layernorm { d } else { 0 };
        let embed = Linear::glorot(3, d, &mut rng);
        let layers = (0..config.layers)
            .map(|_| LayerParams {
                edge: Linear::glorot(2, d, &mut rng),
                gine_in: Linear::glorot(d, d, &mut rng),
                gine_out: Linear::glorot(d, d, &mut rng),
                wq: glorot(d, d, &mut rng),
                wk: glorot(d, d, &mut rng),
                wv: glorot(d, d, &mut rng),
                fuse_in: Linear::glorot(d, d, &mut rng),
                fuse_out: Linear::glorot(d, d, &mut rng),
                norm_gain: vec![T::one(); ln],
                norm_bias: vec![T::zero(); ln],
            })
            .collect();
        Ok(ModelParams {
            config: config.clone(),
            embed,
            layers,
            head_in: Linear::glorot(d, config.mlp_hidden, &mut rng),
            head_out: Linear::glorot(config.mlp_hidden, 1, &mut rng),
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.config).expect("validated config")
    }

    /// Tensors in canonical serialization order, with stable names.
    pub fn named_tensors(&self) -> Vec<(String, &[T])> {
        let mut out: Vec<(String, &[T])> = vec![("embed.w".into(), &self.embed.w.data), ("embed.b".into(), &self.embed.b)];
        for (i, l) in self.layers.iter().enumerate() {
            let linears = [
                ("edge", &l.edge),
                ("gine_in", &l.gine_in),
                ("gine_out", &l.gine_out),
            ];
            for (name, lin) in linears {
                out.push((format!("layer{i}.{name}.w"), &lin.w.data));
                out.push((format!("layer{i}.{name}.b"), &lin.b));
            }
            out.push((format!("layer{i}.wq"), &l.wq.data));
            out.push((format!("layer{i}.wk"), &l.wk.data));
            out.push((format!("layer{i}.wv"), &l.wv.data));
            for (name, lin) in [("fuse_in", &l.fuse_in), ("fuse_out", &l.fuse_out)] {
                out.push((format!("layer{i}.{name}.w"), &lin.w.data));
                out.push((format!("layer{i}.{name}.b"), &lin.b));
            }
            if self.config.use_layernorm {
                out.push((format!("layer{i}.norm_gain"), &l.norm_gain));
                out.push((format!("layer{i}.norm_bias"), &l.norm_bias));
            }
        }
        out.push(("head_in.w".into(), &self.head_in.w.data));
        out.push(("head_in.b".into(), &self.head_in.b));
        out.push(("head_out.w".into(), &self.head_out.w.data));
        out.push(("head_out.b".into(), &self.head_out.b));
        out
    }

    /// Mutable tensors, same order as [`Self::named_tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let use_ln = self.config.use_layernorm;
        let mut out: Vec<&mut [T]> = vec![&mut self.embed.w.data, &mut self.embed.b];
        for l in &mut self.layers {
            out.push(&mut l.edge.w.data);
            out.push(&mut l.edge.b);
            out.push(&mut l.gine_in.w.data);
            out.push(&mut l.gine_in.b);
            out.push(&mut l.gine_out.w.data);
            out.push(&mut l.gine_out.b);
            out.push(&mut l.wq.data);
            out.push(&mut l.wk.data);
            out.push(&mut l.wv.data);
            out.push(&mut l.fuse_in.w.data);
            out.push(&mut l.fuse_in.b);
            out.push(&mut l.fuse_out.w.data);
            out.push(&mut l.fuse_out.b);
            if use_ln {
                out.push(&mut l.norm_gain);
                out.push(&mut l.norm_bias);
            }
        }
        out.push(&mut self.head_in.w.data);
        out.push(&mut self.head_in.b);
        out.push(&mut self.head_out.w.data);
        out.push(&mut self.head_out.b);
        out
    }

    pub fn flat(&self) -> Vec<T> {
        self.named_tensors().into_iter().flat_map(|(_, t)| t.iter().copied()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn load_flat(&mut self, values: &[T]) -> Result<()> {
        let expected = self.param_count();
        if values.len() != expected {
            return Err(Error::Shape(format!("expected {expected} parameters, got {}", values.len())));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&values[offset..offset + t.len()]);
            offset += t.len();
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        let mut out = ModelParams::<U>::zeros(&self.config).expect("validated config");
        let flat: Vec<U> = self.flat().into_iter().map(|v| U::from(v).unwrap()).collect();
        out.load_flat(&flat).expect("same shapes");
        out
    }

    pub fn is_finite(&self) -> bool {
        self.named_tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    /// `self += other`, tensor by tensor.
    pub fn add_assign(&mut self, other: &Self) {
        let others = other.named_tensors();
        for (dst, (_, src)) in self.tensors_mut().into_iter().zip(others) {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    pub fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v = T::zero());
        }
    }
}

/// Draws uniform noise into every tensor; test helper for gradient checks.
pub fn randomize<T: Real>(params: &mut ModelParams<T>, scale: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in params.tensors_mut() {
        for v in t.iter_mut() {
            *v = T::lit(rng.gen_range(-scale..scale));
        }
    }
}
