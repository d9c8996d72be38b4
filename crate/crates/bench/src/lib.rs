//! Shared fixtures for the benchmarks in `benches/`.

use steinerwl::data::{nth_net, SynthConfig};
use steinerwl::model::{GraphBatch, ModelConfig, ModelParams};
use steinerwl::{build_hanan_graph, Net};

/// `count` uniform nets of exactly `degree` pins.
pub fn nets(degree: usize, count: usize, seed: u64) -> Vec<Net> {
    let cfg = SynthConfig::uniform(degree..=degree);
    (0..count as u64).map(|i| nth_net(seed, i, &cfg).expect("valid degree")).collect()
}

pub fn batch(nets: &[Net]) -> GraphBatch {
    let graphs: Vec<_> = nets.iter().map(|n| build_hanan_graph(n).expect("small net")).collect();
    GraphBatch::from_graphs(&graphs)
}

pub fn model(layers: usize) -> ModelParams<f32> {
    ModelParams::init(&ModelConfig { layers, seed: 1, ..Default::default() }).expect("valid config")
}
