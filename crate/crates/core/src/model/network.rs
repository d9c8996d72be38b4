use super::batch::GraphBatch;
use super::layers::{
    attention_backward, embed, fuse, fuse_backward, gine_backward, gine_layer, global_attention, head_backward,
    linear_backward, output_logits, AttentionCache, FuseCache, GineCache, HeadCache,
};
use super::params::ModelParams;
use super::tensor::{add_assign, Mat, Real};

struct LayerTrace<T> {
    x: Mat<T>,
    gine: GineCache<T>,
    attn: AttentionCache<T>,
    fuse: FuseCache<T>,
}

/// Everything the backward pass needs from a forward pass.
pub struct Trace<T> {
    input: Mat<T>,
    edge_feats: Mat<T>,
    layers: Vec<LayerTrace<T>>,
    last: Mat<T>,
    head: HeadCache<T>,
    pub logits: Vec<T>,
}

impl<T: Real> Trace<T> {
    /// Attention matrices of layer `l`, one per segment.
    pub fn attention(&self, l: usize) -> &[Mat<T>] {
        &self.layers[l].attn.probs
    }

    /// Node embeddings entering layer `l`; `l == layers` gives the output.
    pub fn node_states(&self, l: usize) -> &Mat<T> {
        self.layers.get(l).map_or(&self.last, |t| &t.x)
    }

    /// Sign of every ReLU pre-activation in the pass. Two passes with equal
    /// patterns lie on the same linear piece of every ReLU.
    pub fn activation_pattern(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for t in &self.layers {
            for m in [&t.gine.pre, &t.gine.g1, &t.fuse.f1] {
                out.extend(m.data.iter().map(|&v| v > T::zero()));
            }
        }
        out.extend(self.head.o1.data.iter().map(|&v| v > T::zero()));
        out
    }
}

fn inputs<T: Real>(batch: &GraphBatch) -> (Mat<T>, Mat<T>) {
    let input = Mat::from_vec(batch.node_count(), 3, batch.features.iter().flatten().map(|&v| T::from(v).unwrap()).collect());
    let edge_feats = Mat::from_vec(batch.edges.len(), 2, batch.edge_disp.iter().flatten().map(|&v| T::from(v).unwrap()).collect());
    (input, edge_feats)
}

fn run<T: Real>(params: &ModelParams<T>, batch: &GraphBatch, keep: bool) -> Trace<T> {
    let cfg = &params.config;
    let (input, edge_feats) = inputs::<T>(batch);
    let mut x = embed(&input, &params.embed);
    let mut layers = Vec::with_capacity(if keep { cfg.layers } else { 0 });
    for lp in &params.layers {
        let (x_loc, gine) = gine_layer(&x, &batch.edges, &edge_feats, lp, cfg.gine_neighbor_variant);
        let (x_glob, attn) = global_attention(&x, lp, &batch.segments);
        let (next, fuse) = fuse(&x, &x_loc, &x_glob, lp, cfg.use_layernorm);
        let prev = std::mem::replace(&mut x, next);
        if keep {
            layers.push(LayerTrace { x: prev, gine, attn, fuse });
        }
    }
    let (logits, head) = output_logits(&x, &params.head_in, &params.head_out);
    Trace { input, edge_feats, layers, last: x, head, logits }
}

/// Full forward pass, keeping intermediate activations for [`backward`].
pub fn forward<T: Real>(params: &ModelParams<T>, batch: &GraphBatch) -> Trace<T> {
    run(params, batch, true)
}

/// Logits only; drops per-layer caches as it goes.
pub fn infer<T: Real>(params: &ModelParams<T>, batch: &GraphBatch) -> Vec<T> {
    run(params, batch, false).logits
}

/// Reverse-mode gradients of a scalar loss given `dL/dlogits`.
pub fn backward<T: Real>(params: &ModelParams<T>, batch: &GraphBatch, trace: &Trace<T>, dlogits: &[T]) -> ModelParams<T> {
    let mut grads = params.zeros_like();
    backward_into(params, batch, trace, dlogits, &mut grads);
    grads
}

pub(crate) fn backward_into<T: Real>(
    params: &ModelParams<T>,
    batch: &GraphBatch,
    trace: &Trace<T>,
    dlogits: &[T],
    grads: &mut ModelParams<T>,
) {
    assert_eq!(trace.layers.len(), params.layers.len(), "backward needs a recorded forward pass");
    let cfg = &params.config;
    let mut dx = head_backward(
        dlogits,
        &trace.last,
        &params.head_in,
        &params.head_out,
        &trace.head,
        &mut grads.head_in,
        &mut grads.head_out,
    );
    for ((lp, lt), lg) in params.layers.iter().zip(&trace.layers).zip(grads.layers.iter_mut()).rev() {
        let (dres, du) = fuse_backward(&dx, lp, &lt.fuse, lg);
        let mut dprev = attention_backward(&du, &lt.x, lp, &batch.segments, &lt.attn, lg);
        let dg = gine_backward(&du, &batch.edges, &trace.edge_feats, lp, &lt.gine, cfg.gine_neighbor_variant, lg);
        add_assign(&mut dprev, &dg);
        if let Some(r) = dres {
            add_assign(&mut dprev, &r);
        }
        dx = dprev;
    }
    linear_backward(&trace.input, &params.embed, &dx, &mut grads.embed, false);
}

pub fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

fn softplus<T: Real>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

/// Mean binary cross-entropy over masked nodes, from raw logits, and its
/// gradient. `N = 0` yields a zero loss and gradient.
pub fn bce_loss<T: Real>(logits: &[T], labels: &[f32], mask: &[bool]) -> (T, Vec<T>) {
    let n = mask.iter().filter(|&&m| m).count();
    bce_terms(logits, labels, mask, T::one(), n)
}

/// BCE summed over masked nodes and divided by `denom`; positives are
/// weighted by `pos_weight`.
pub(crate) fn bce_terms<T: Real>(logits: &[T], labels: &[f32], mask: &[bool], pos_weight: T, denom: usize) -> (T, Vec<T>) {
    let mut grad = vec![T::zero(); logits.len()];
    if denom == 0 {
        return (T::zero(), grad);
    }
    let inv = T::one() / T::lit(denom as f64);
    let mut loss = T::zero();
    for i in 0..logits.len() {
        if !mask[i] {
            continue;
        }
        let (z, y) = (logits[i], T::from(labels[i]).unwrap());
        let s = sigmoid(z);
        loss += pos_weight * y * softplus(-z) + (T::one() - y) * softplus(z);
        grad[i] = (pos_weight * y * (s - T::one()) + (T::one() - y) * s) * inv;
    }
    (loss * inv, grad)
}
