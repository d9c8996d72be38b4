use std::ops::Range;

use crate::hanan::{featurize, HananGraph};

/// Several Hanan graphs stacked block-diagonally. Message passing follows
/// each graph's own edges and attention stays inside each segment.
#[derive(Clone, Debug, Default)]
pub struct GraphBatch {
    pub features: Vec<[f32; 3]>,
    /// `(node, neighbor)` pairs, global indices; messages flow into `node`.
    pub edges: Vec<(usize, usize)>,
    pub edge_disp: Vec<[f32; 2]>,
    pub segments: Vec<Range<usize>>,
    /// True for candidate (non-pin) nodes; the loss only sees these.
    pub candidate: Vec<bool>,
    /// Per-node target, 0 for pins.
    pub labels: Vec<f32>,
}

impl GraphBatch {
    pub fn node_count(&self) -> usize {
        self.features.len()
    }

    pub fn push(&mut self, graph: &HananGraph, labels: Option<&[u8]>) {
        let (nf, ef) = featurize(graph);
        let base = self.features.len();
        self.features.extend_from_slice(&nf.rows);
        for e in &ef.edges {
            self.edges.push((base + e.node, base + e.neighbor));
            self.edge_disp.push(e.disp);
        }
        self.candidate.extend(graph.is_pin.iter().map(|&p| !p));
        self.labels.extend(std::iter::repeat_n(0.0, graph.n_pins));
        match labels {
            Some(l) => {
                assert_eq!(l.len(), graph.n_candidates, "one label per candidate");
                self.labels.extend(l.iter().map(|&y| y as f32));
            }
            None => self.labels.extend(std::iter::repeat_n(0.0, graph.n_candidates)),
        }
        self.segments.push(base..base + graph.node_count());
    }

    pub fn from_graphs<'a>(graphs: impl IntoIterator<Item = &'a HananGraph>) -> Self {
        let mut b = GraphBatch::default();
        for g in graphs {
            b.push(g, None);
        }
        b
    }

    pub fn candidate_count(&self) -> usize {
        self.candidate.iter().filter(|&&c| c).count()
    }
}
