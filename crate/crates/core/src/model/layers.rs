//! Forward and backward passes of the individual graph-transformer blocks.
//!
//! Every `*_backward` takes the cache produced by its forward, accumulates
//! parameter gradients into a [`ModelParams`]-shaped buffer and returns the
//! gradient with respect to its node-matrix input.

use std::ops::Range;

use super::params::{LayerParams, Linear};
use super::tensor::{add_assign, add_rows, col_sums_into, gemm, matmul, relu, relu_backward, Mat, Real};

const NORM_EPS: f64 = 1e-5;

pub(crate) fn linear<T: Real>(x: &Mat<T>, lin: &Linear<T>) -> Mat<T> {
    let mut y = matmul(x, &lin.w);
    add_rows(&mut y, &lin.b);
    y
}

/// Accumulates `dW += x^T dy`, `db += colsum(dy)`; returns `dy W^T` when
/// `want_input_grad`.
pub(crate) fn linear_backward<T: Real>(
    x: &Mat<T>,
    lin: &Linear<T>,
    dy: &Mat<T>,
    grad: &mut Linear<T>,
    want_input_grad: bool,
) -> Option<Mat<T>> {
    gemm(T::one(), x.view(), true, dy.view(), false, T::one(), &mut grad.w.data, lin.w.cols);
    col_sums_into(dy, &mut grad.b);
    want_input_grad.then(|| {
        let mut dx = Mat::zeros(dy.rows, lin.w.rows);
        gemm(T::one(), dy.view(), false, lin.w.view(), true, T::zero(), &mut dx.data, lin.w.rows);
        dx
    })
}

/// Node features (n x 3) to hidden width.
pub fn embed<T: Real>(features: &Mat<T>, lin: &Linear<T>) -> Mat<T> {
    linear(features, lin)
}

#[derive(Clone, Debug)]
pub struct GineCache<T> {
    /// `h_src + proj(e)` per directed edge, before the ReLU.
    pub(crate) pre: Mat<T>,
    pub(crate) h: Mat<T>,
    pub(crate) g1: Mat<T>,
    pub(crate) g1r: Mat<T>,
}

fn message_source(edge: (usize, usize), neighbor_variant: bool) -> usize {
    if neighbor_variant {
        edge.1
    } else {
        edge.0
    }
}

/// Local message passing: `MLP(h_v + sum_u relu(h_src + proj(e_vu)))` where
/// `src` is `v` itself by default or the neighbor `u` with
/// `neighbor_variant`.
pub fn gine_layer<T: Real>(
    x: &Mat<T>,
    edges: &[(usize, usize)],
    edge_feats: &Mat<T>,
    p: &LayerParams<T>,
    neighbor_variant: bool,
) -> (Mat<T>, GineCache<T>) {
    let d = x.cols;
    let mut pre = linear(edge_feats, &p.edge);
    let mut h = x.clone();
    for (k, &e) in edges.iter().enumerate() {
        let src = message_source(e, neighbor_variant);
        let z = &mut pre.data[k * d..(k + 1) * d];
        for (zi, &xi) in z.iter_mut().zip(x.row(src)) {
            *zi += xi;
        }
        let hv = &mut h.data[e.0 * d..(e.0 + 1) * d];
        for (hi, &zi) in hv.iter_mut().zip(z.iter()) {
            *hi += zi.max(T::zero());
        }
    }
    let g1 = linear(&h, &p.gine_in);
    let g1r = relu(&g1);
    let out = linear(&g1r, &p.gine_out);
    (out, GineCache { pre, h, g1, g1r })
}

pub(crate) fn gine_backward<T: Real>(
    dout: &Mat<T>,
    edges: &[(usize, usize)],
    edge_feats: &Mat<T>,
    p: &LayerParams<T>,
    cache: &GineCache<T>,
    neighbor_variant: bool,
    grad: &mut LayerParams<T>,
) -> Mat<T> {
    let d = dout.cols;
    let mut dg1 = linear_backward(&cache.g1r, &p.gine_out, dout, &mut grad.gine_out, true).unwrap();
    relu_backward(&mut dg1, &cache.g1);
    let dh = linear_backward(&cache.h, &p.gine_in, &dg1, &mut grad.gine_in, true).unwrap();

    let mut dx = dh.clone();
    let mut dpre = Mat::zeros(edges.len(), d);
    for (k, &e) in edges.iter().enumerate() {
        let src = message_source(e, neighbor_variant);
        let z = cache.pre.row(k);
        let dz = &mut dpre.data[k * d..(k + 1) * d];
        for c in 0..d {
            if z[c] > T::zero() {
                dz[c] = dh.data[e.0 * d + c];
            }
        }
        let dxs = &mut dx.data[src * d..(src + 1) * d];
        for (g, &v) in dxs.iter_mut().zip(dz.iter()) {
            *g += v;
        }
    }
    linear_backward(edge_feats, &p.edge, &dpre, &mut grad.edge, false);
    dx
}

#[derive(Clone, Debug)]
pub struct AttentionCache<T> {
    pub(crate) q: Mat<T>,
    pub(crate) k: Mat<T>,
    pub(crate) v: Mat<T>,
    /// Row-stochastic attention matrix of each segment.
    pub probs: Vec<Mat<T>>,
}

fn softmax_rows<T: Real>(m: &mut Mat<T>) {
    for row in m.data.chunks_exact_mut(m.cols) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        let inv = T::one() / sum;
        row.iter_mut().for_each(|v| *v *= inv);
    }
}

/// Single-head scaled dot-product attention over all nodes of each segment.
pub fn global_attention<T: Real>(x: &Mat<T>, p: &LayerParams<T>, segments: &[Range<usize>]) -> (Mat<T>, AttentionCache<T>) {
    let d = x.cols;
    let q = matmul(x, &p.wq);
    let k = matmul(x, &p.wk);
    let v = matmul(x, &p.wv);
    let scale = T::one() / T::lit(d as f64).sqrt();
    let mut out = Mat::zeros(x.rows, d);
    let mut probs = Vec::with_capacity(segments.len());
    for seg in segments {
        let len = seg.len();
        let mut a = Mat::zeros(len, len);
        gemm(scale, q.rows_view(seg.start, len), false, k.rows_view(seg.start, len), true, T::zero(), &mut a.data, len);
        softmax_rows(&mut a);
        gemm(T::one(), a.view(), false, v.rows_view(seg.start, len), false, T::zero(), &mut out.data[seg.start * d..seg.end * d], d);
        probs.push(a);
    }
    (out, AttentionCache { q, k, v, probs })
}

pub(crate) fn attention_backward<T: Real>(
    dout: &Mat<T>,
    x: &Mat<T>,
    p: &LayerParams<T>,
    segments: &[Range<usize>],
    cache: &AttentionCache<T>,
    grad: &mut LayerParams<T>,
) -> Mat<T> {
    let d = x.cols;
    let scale = T::one() / T::lit(d as f64).sqrt();
    let mut dq = Mat::zeros(x.rows, d);
    let mut dk = Mat::zeros(x.rows, d);
    let mut dv = Mat::zeros(x.rows, d);
    for (seg, s) in segments.iter().zip(&cache.probs) {
        let len = seg.len();
        let rows = seg.start * d..seg.end * d;
        let dout_s = dout.rows_view(seg.start, len);
        // dV = S^T dOut
        gemm(T::one(), s.view(), true, dout_s, false, T::zero(), &mut dv.data[rows.clone()], d);
        // dS = dOut V^T, then through the row softmax.
        let mut ds = Mat::zeros(len, len);
        gemm(T::one(), dout_s, false, cache.v.rows_view(seg.start, len), true, T::zero(), &mut ds.data, len);
        for (drow, srow) in ds.data.chunks_exact_mut(len).zip(s.data.chunks_exact(len)) {
            let dot: T = drow.iter().zip(srow).map(|(&a, &b)| a * b).sum();
            for (g, &sv) in drow.iter_mut().zip(srow) {
                *g = sv * (*g - dot);
            }
        }
        gemm(scale, ds.view(), false, cache.k.rows_view(seg.start, len), false, T::zero(), &mut dq.data[rows.clone()], d);
        gemm(scale, ds.view(), true, cache.q.rows_view(seg.start, len), false, T::zero(), &mut dk.data[rows], d);
    }
    let mut dx = Mat::zeros(x.rows, d);
    for (w, dproj, gw) in [(&p.wq, &dq, &mut grad.wq), (&p.wk, &dk, &mut grad.wk), (&p.wv, &dv, &mut grad.wv)] {
        gemm(T::one(), x.view(), true, dproj.view(), false, T::one(), &mut gw.data, d);
        gemm(T::one(), dproj.view(), false, w.view(), true, T::one(), &mut dx.data, d);
    }
    dx
}

#[derive(Clone, Debug)]
pub struct NormCache<T> {
    xhat: Mat<T>,
    inv_std: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct FuseCache<T> {
    u: Mat<T>,
    pub(crate) f1: Mat<T>,
    f1r: Mat<T>,
    norm: Option<NormCache<T>>,
}

/// `MLP(x_loc + x_glob)`; with layernorm enabled the result is
/// `LayerNorm(x_in + MLP(...))`.
pub fn fuse<T: Real>(x_in: &Mat<T>, x_loc: &Mat<T>, x_glob: &Mat<T>, p: &LayerParams<T>, use_layernorm: bool) -> (Mat<T>, FuseCache<T>) {
    let mut u = x_loc.clone();
    add_assign(&mut u, x_glob);
    let f1 = linear(&u, &p.fuse_in);
    let f1r = relu(&f1);
    let mut out = linear(&f1r, &p.fuse_out);
    let norm = use_layernorm.then(|| {
        add_assign(&mut out, x_in);
        layer_norm(&mut out, &p.norm_gain, &p.norm_bias)
    });
    (out, FuseCache { u, f1, f1r, norm })
}

fn layer_norm<T: Real>(m: &mut Mat<T>, gain: &[T], bias: &[T]) -> NormCache<T> {
    let d = m.cols;
    let inv_d = T::one() / T::lit(d as f64);
    let eps = T::lit(NORM_EPS);
    let mut xhat = Mat::zeros(m.rows, d);
    let mut inv_std = Vec::with_capacity(m.rows);
    for (row, hrow) in m.data.chunks_exact_mut(d).zip(xhat.data.chunks_exact_mut(d)) {
        let mean = row.iter().copied().sum::<T>() * inv_d;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_d;
        let inv = T::one() / (var + eps).sqrt();
        for c in 0..d {
            hrow[c] = (row[c] - mean) * inv;
            row[c] = hrow[c] * gain[c] + bias[c];
        }
        inv_std.push(inv);
    }
    NormCache { xhat, inv_std }
}

fn layer_norm_backward<T: Real>(dy: &Mat<T>, gain: &[T], cache: &NormCache<T>, dgain: &mut [T], dbias: &mut [T]) -> Mat<T> {
    let d = dy.cols;
    let inv_d = T::one() / T::lit(d as f64);
    let mut dx = Mat::zeros(dy.rows, d);
    let rows = dy.data.chunks_exact(d).zip(cache.xhat.data.chunks_exact(d)).zip(dx.data.chunks_exact_mut(d));
    for (((dyr, xh), dxr), &inv) in rows.zip(&cache.inv_std) {
        let mut mean_g = T::zero();
        let mut mean_gx = T::zero();
        for c in 0..d {
            dgain[c] += dyr[c] * xh[c];
            dbias[c] += dyr[c];
            let g = dyr[c] * gain[c];
            mean_g += g;
            mean_gx += g * xh[c];
        }
        mean_g *= inv_d;
        mean_gx *= inv_d;
        for c in 0..d {
            dxr[c] = inv * (dyr[c] * gain[c] - mean_g - xh[c] * mean_gx);
        }
    }
    dx
}

/// Returns `(d x_in, d(x_loc + x_glob))`. The first is `None` without
/// layernorm, where the block has no residual path.
pub(crate) fn fuse_backward<T: Real>(
    dout: &Mat<T>,
    p: &LayerParams<T>,
    cache: &FuseCache<T>,
    grad: &mut LayerParams<T>,
) -> (Option<Mat<T>>, Mat<T>) {
    let (dfo, dres) = match &cache.norm {
        Some(nc) => {
            let dr = layer_norm_backward(dout, &p.norm_gain, nc, &mut grad.norm_gain, &mut grad.norm_bias);
            (dr.clone(), Some(dr))
        }
        None => (dout.clone(), None),
    };
    let mut df1 = linear_backward(&cache.f1r, &p.fuse_out, &dfo, &mut grad.fuse_out, true).unwrap();
    relu_backward(&mut df1, &cache.f1);
    let du = linear_backward(&cache.u, &p.fuse_in, &df1, &mut grad.fuse_in, true).unwrap();
    (dres, du)
}

#[derive(Clone, Debug)]
pub struct HeadCache<T> {
    pub(crate) o1: Mat<T>,
    o1r: Mat<T>,
}

/// Two-layer output MLP producing one logit per node.
pub fn output_logits<T: Real>(x: &Mat<T>, head_in: &Linear<T>, head_out: &Linear<T>) -> (Vec<T>, HeadCache<T>) {
    let o1 = linear(x, head_in);
    let o1r = relu(&o1);
    let logits = linear(&o1r, head_out).data;
    (logits, HeadCache { o1, o1r })
}

pub(crate) fn head_backward<T: Real>(
    dlogits: &[T],
    x: &Mat<T>,
    head_in: &Linear<T>,
    head_out: &Linear<T>,
    cache: &HeadCache<T>,
    g_in: &mut Linear<T>,
    g_out: &mut Linear<T>,
) -> Mat<T> {
    let dy = Mat::from_vec(dlogits.len(), 1, dlogits.to_vec());
    let mut do1 = linear_backward(&cache.o1r, head_out, &dy, g_out, true).unwrap();
    relu_backward(&mut do1, &cache.o1);
    linear_backward(x, head_in, &do1, g_in, true).unwrap()
}
