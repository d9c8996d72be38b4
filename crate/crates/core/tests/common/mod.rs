#![allow(dead_code)]

use steinerwl::model::{backward, bce_loss, forward, infer, randomize, GraphBatch, ModelConfig, ModelParams};
use steinerwl::{build_hanan_graph, Net, Point};

pub fn net(pts: &[(i64, i64)]) -> Net {
    let pins: Vec<Point> = pts.iter().map(|&p| p.into()).collect();
    Net::new("t", &pins).unwrap()
}

/// A labeled single-net batch with pseudo-random labels.
pub fn labeled_batch(n: &Net, seed: u64) -> GraphBatch {
    let g = build_hanan_graph(n).unwrap();
    let labels: Vec<u8> = (0..g.n_candidates).map(|i| (((i as u64 + 1) * (seed + 3) * 2654435761) >> 7 & 1) as u8).collect();
    let mut b = GraphBatch::default();
    b.push(&g, Some(&labels));
    b
}

pub fn loss_of(params: &ModelParams<f64>, batch: &GraphBatch) -> f64 {
    let logits = infer(params, batch);
    bce_loss(&logits, &batch.labels, &batch.candidate).0
}

pub struct GradCheck {
    /// Largest per-tensor `||analytic - numeric|| / max(||analytic||, ||numeric||)`.
    pub max_tensor_rel: f64,
    pub worst_tensor: String,
    /// Coordinates left out because `theta +- step` crosses a ReLU kink.
    pub skipped: usize,
    pub checked: usize,
}

/// Central finite differences over every parameter, compared tensor by
/// tensor with the analytic backward pass. A coordinate whose perturbation
/// flips any ReLU is excluded: the loss is not differentiable across that
/// interval, so the difference quotient says nothing about the gradient.
pub fn finite_difference_check(params: &ModelParams<f64>, batch: &GraphBatch, step: f64) -> GradCheck {
    let trace = forward(params, batch);
    let pattern = trace.activation_pattern();
    let (_, dlogits) = bce_loss(&trace.logits, &batch.labels, &batch.candidate);
    let analytic = backward(params, batch, &trace, &dlogits).flat();

    let base = params.flat();
    let mut probe = params.clone();
    let mut eval = |theta: &[f64]| {
        probe.load_flat(theta).unwrap();
        let t = forward(&probe, batch);
        let loss = bce_loss(&t.logits, &batch.labels, &batch.candidate).0;
        (loss, t.activation_pattern())
    };
    let mut numeric = vec![0.0; base.len()];
    let mut keep = vec![true; base.len()];
    for i in 0..base.len() {
        let mut theta = base.clone();
        theta[i] = base[i] + step;
        let (lp, pp) = eval(&theta);
        theta[i] = base[i] - step;
        let (lm, pm) = eval(&theta);
        keep[i] = pp == pattern && pm == pattern;
        numeric[i] = (lp - lm) / (2.0 * step);
    }

    let mut worst = (0.0f64, String::new());
    let mut off = 0;
    for (name, t) in params.named_tensors() {
        let r = off..off + t.len();
        off += t.len();
        let (mut diff, mut na, mut nn) = (0.0, 0.0, 0.0);
        for i in r.filter(|&i| keep[i]) {
            diff += (analytic[i] - numeric[i]).powi(2);
            na += analytic[i] * analytic[i];
            nn += numeric[i] * numeric[i];
        }
        let rel = diff.sqrt() / f64::max(na, nn).sqrt().max(1e-10);
        if rel > worst.0 {
            worst = (rel, name);
        }
    }
    let checked = keep.iter().filter(|&&k| k).count();
    GradCheck { max_tensor_rel: worst.0, worst_tensor: worst.1, skipped: base.len() - checked, checked }
}

pub fn random_params(cfg: &ModelConfig, seed: u64) -> ModelParams<f64> {
    let mut p = ModelParams::<f64>::init(cfg).unwrap();
    randomize(&mut p, 0.6, seed);
    p
}

/// Minimum spanning tree length by enumerating every labeled tree through
/// its Prüfer sequence.
pub fn exhaustive_mst_length(points: &[Point]) -> i64 {
    let n = points.len();
    let d = |a: Point, b: Point| (a.x - b.x).abs() + (a.y - b.y).abs();
    match n {
        0 | 1 => return 0,
        2 => return d(points[0], points[1]),
        _ => {}
    }
    let mut best = i64::MAX;
    let mut seq = vec![0usize; n - 2];
    loop {
        let mut degree = vec![1usize; n];
        for &s in &seq {
            degree[s] += 1;
        }
        let mut len = 0;
        for &s in &seq {
            let leaf = (0..n).find(|&i| degree[i] == 1).unwrap();
            len += d(points[leaf], points[s]);
            degree[leaf] = 0;
            degree[s] -= 1;
        }
        let rest: Vec<usize> = (0..n).filter(|&i| degree[i] == 1).collect();
        len += d(points[rest[0]], points[rest[1]]);
        best = best.min(len);
        let mut i = 0;
        loop {
            if i == seq.len() {
                return best;
            }
            seq[i] += 1;
            if seq[i] < n {
                break;
            }
            seq[i] = 0;
            i += 1;
        }
    }
}

/// O(n^2) Prim over L1 distances; independent of the library's MST.
pub fn prim_length(points: &[Point]) -> i64 {
    let n = points.len();
    if n < 2 {
        return 0;
    }
    let mut dist = vec![i64::MAX; n];
    let mut used = vec![false; n];
    dist[0] = 0;
    let mut total = 0;
    for _ in 0..n {
        let v = (0..n).filter(|&i| !used[i]).min_by_key(|&i| dist[i]).unwrap();
        used[v] = true;
        total += dist[v];
        for u in 0..n {
            if !used[u] {
                let d = (points[u].x - points[v].x).abs() + (points[u].y - points[v].y).abs();
                dist[u] = dist[u].min(d);
            }
        }
    }
    total
}

/// Shortest tree over `pins` with up to `pins.len() - 2` extra points drawn
/// from the grid through every pin coordinate and every midpoint between
/// consecutive pin coordinates. Returned in doubled units (all coordinates
/// are scaled by two so midpoints stay integral).
pub fn refined_grid_optimum_doubled(pins: &[Point]) -> i64 {
    let doubled: Vec<Point> = pins.iter().map(|p| Point::new(2 * p.x, 2 * p.y)).collect();
    let lines = |coords: Vec<i64>| {
        let mut c = coords;
        c.sort_unstable();
        c.dedup();
        let mut out = c.clone();
        out.extend(c.windows(2).map(|w| (w[0] + w[1]) / 2));
        out.sort_unstable();
        out.dedup();
        out
    };
    let xs = lines(doubled.iter().map(|p| p.x).collect());
    let ys = lines(doubled.iter().map(|p| p.y).collect());
    let cands: Vec<Point> = ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| Point::new(x, y)))
        .filter(|p| !doubled.contains(p))
        .collect();
    let max_k = pins.len().saturating_sub(2);
    let mut best = prim_length(&doubled);
    let mut chosen: Vec<Point> = doubled.clone();
    fn rec(cands: &[Point], start: usize, left: usize, chosen: &mut Vec<Point>, best: &mut i64) {
        for i in start..cands.len() {
            chosen.push(cands[i]);
            *best = (*best).min(prim_length(chosen));
            if left > 1 {
                rec(cands, i + 1, left - 1, chosen, best);
            }
            chosen.pop();
        }
    }
    if max_k > 0 {
        rec(&cands, 0, max_k, &mut chosen, &mut best);
    }
    best
}
