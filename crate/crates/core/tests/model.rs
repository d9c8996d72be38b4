mod common;

use common::{finite_difference_check, labeled_batch, net, random_params};
use steinerwl::model::{backward, bce_loss, forward, infer, Checkpoint, GraphBatch, ModelConfig, ModelParams};
use steinerwl::{build_hanan_graph, Point};

fn tiny(seed: u64, layernorm: bool, neighbor: bool) -> ModelConfig {
    ModelConfig { layers: 2, hidden: 4, mlp_hidden: 4, use_layernorm: layernorm, gine_neighbor_variant: neighbor, seed, heads: 1 }
}

#[test]
fn gradients_match_finite_differences() {
    let n = net(&[(0, 0), (4, 1), (2, 5), (7, 3), (5, 8)]);
    for seed in 0..20 {
        for (ln, nb) in [(true, false), (false, false), (true, true)] {
            let params = random_params(&tiny(seed, ln, nb), 100 + seed);
            let batch = labeled_batch(&n, seed);
            let check = finite_difference_check(&params, &batch, 1e-3);
            assert!(
                check.max_tensor_rel < 1e-3,
                "seed {seed} ln={ln} neighbor={nb}: {} rel err {}",
                check.worst_tensor,
                check.max_tensor_rel
            );
            assert!(check.skipped < check.checked, "too many kinks: {} of {}", check.skipped, check.checked);
        }
    }
}

#[test]
fn batched_gradients_match_finite_differences() {
    let mut batch = labeled_batch(&net(&[(0, 0), (4, 1), (2, 5)]), 1);
    let g = build_hanan_graph(&net(&[(1, 1), (3, 6), (8, 2), (6, 6)])).unwrap();
    let labels: Vec<u8> = (0..g.n_candidates).map(|i| (i % 3 == 0) as u8).collect();
    batch.push(&g, Some(&labels));
    let params = random_params(&tiny(7, true, false), 77);
    let check = finite_difference_check(&params, &batch, 1e-3);
    assert!(check.max_tensor_rel < 1e-3, "{} {}", check.worst_tensor, check.max_tensor_rel);
}

#[test]
fn no_candidates_means_zero_gradients() {
    let g = build_hanan_graph(&net(&[(0, 0), (2, 0), (5, 0)])).unwrap();
    let mut batch = GraphBatch::default();
    batch.push(&g, Some(&[]));
    let params = random_params(&tiny(1, true, false), 5);
    let trace = forward(&params, &batch);
    let (loss, dl) = bce_loss(&trace.logits, &batch.labels, &batch.candidate);
    assert_eq!(loss, 0.0);
    let grads = backward(&params, &batch, &trace, &dl);
    assert!(grads.flat().iter().all(|&v| v == 0.0));
}

#[test]
fn gradients_are_deterministic() {
    let batch = labeled_batch(&net(&[(0, 0), (4, 1), (2, 5), (7, 3)]), 2);
    let run = || {
        let params = ModelParams::<f32>::init(&ModelConfig { seed: 42, ..Default::default() }).unwrap();
        let trace = forward(&params, &batch);
        let (_, dl) = bce_loss(&trace.logits, &batch.labels, &batch.candidate);
        backward(&params, &batch, &trace, &dl).flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn attention_rows_sum_to_one() {
    let batch = labeled_batch(&net(&[(0, 0), (4, 1), (2, 5), (7, 3)]), 2);
    let params = ModelParams::<f32>::init(&ModelConfig { seed: 3, ..Default::default() }).unwrap();
    let trace = forward(&params, &batch);
    for l in 0..params.config.layers {
        for a in trace.attention(l) {
            for row in a.data.chunks_exact(a.cols) {
                assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-6);
            }
        }
    }
}

/// Relabels the nodes of a single-graph batch by `perm` (new index of old node i).
fn permute(batch: &GraphBatch, perm: &[usize]) -> GraphBatch {
    let n = batch.node_count();
    let mut out = batch.clone();
    for i in 0..n {
        out.features[perm[i]] = batch.features[i];
        out.candidate[perm[i]] = batch.candidate[i];
        out.labels[perm[i]] = batch.labels[i];
    }
    out.edges = batch.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
    out
}

#[test]
fn logits_are_permutation_equivariant() {
    let batch = labeled_batch(&net(&[(0, 0), (4, 1), (2, 5), (7, 3), (5, 8)]), 0);
    let params = ModelParams::<f32>::init(&ModelConfig { seed: 8, ..Default::default() }).unwrap();
    let base = infer(&params, &batch);
    let n = batch.node_count();
    let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
    let mut sorted = perm.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, (0..n).collect::<Vec<_>>());
    let permuted = infer(&params, &permute(&batch, &perm));
    for i in 0..n {
        assert!((base[i] - permuted[perm[i]]).abs() < 1e-5);
    }
}

#[test]
fn predictions_ignore_translation_and_uniform_scale() {
    let pts = [(0, 0), (4, 1), (2, 5), (7, 3)];
    let a = net(&pts);
    let b = a.map_pins(|p| Point::new(3 * p.x + 100, 3 * p.y - 40)).unwrap();
    let params = ModelParams::<f32>::init(&ModelConfig { seed: 8, ..Default::default() }).unwrap();
    let la = infer(&params, &GraphBatch::from_graphs([&build_hanan_graph(&a).unwrap()]));
    let lb = infer(&params, &GraphBatch::from_graphs([&build_hanan_graph(&b).unwrap()]));
    assert_eq!(la, lb);
}

#[test]
fn batching_matches_single_net_inference() {
    let nets = [net(&[(0, 0), (4, 1), (2, 5)]), net(&[(1, 1), (3, 6), (8, 2), (6, 6)]), net(&[(0, 0), (9, 9)])];
    let graphs: Vec<_> = nets.iter().map(|n| build_hanan_graph(n).unwrap()).collect();
    let params = ModelParams::<f32>::init(&ModelConfig { seed: 2, ..Default::default() }).unwrap();
    let joint = infer(&params, &GraphBatch::from_graphs(&graphs));
    let mut offset = 0;
    for g in &graphs {
        let alone = infer(&params, &GraphBatch::from_graphs([g]));
        for (a, b) in alone.iter().zip(&joint[offset..]) {
            assert!((a - b).abs() < 1e-5);
        }
        offset += g.node_count();
    }
}

#[test]
fn checkpoint_reload_gives_bit_identical_logits() {
    let batch = labeled_batch(&net(&[(0, 0), (4, 1), (2, 5), (7, 3)]), 2);
    let ck = Checkpoint::new(ModelParams::<f32>::init(&ModelConfig { seed: 13, ..Default::default() }).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.nstn");
    ck.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    let a: Vec<u32> = infer(&ck.params, &batch).iter().map(|v| v.to_bits()).collect();
    let b: Vec<u32> = infer(&back.params, &batch).iter().map(|v| v.to_bits()).collect();
    assert_eq!(a, b);
}

