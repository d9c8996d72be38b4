//! Hanan grid graph construction and model input features.
//!
//! Nodes are the intersections of the horizontal and vertical lines through
//! every pin. Two nodes are adjacent when they share a row or a column and no
//! other grid node lies strictly between them, so the graph is a rectangular
//! grid. Pins come first in the node list, then the candidate (non-pin)
//! nodes; both groups are sorted row-major by `(y, x)`.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::geometry::{Net, Point};

pub const DEFAULT_NODE_CAP: usize = 4096;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HananGraph {
    pub nodes: Vec<Point>,
    pub is_pin: Vec<bool>,
    pub adjacency: Vec<(usize, usize)>,
    pub n_pins: usize,
    pub n_candidates: usize,
    /// Distinct sorted x coordinates of the pins.
    pub xs: Vec<i64>,
    /// Distinct sorted y coordinates of the pins.
    pub ys: Vec<i64>,
    /// Node index of grid cell `(ix, iy)`, stored at `iy * xs.len() + ix`.
    pub cell_to_node: Vec<usize>,
}

impl HananGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn candidates(&self) -> &[Point] {
        &self.nodes[self.n_pins..]
    }

    pub fn pins(&self) -> &[Point] {
        &self.nodes[..self.n_pins]
    }

    pub fn node_at(&self, ix: usize, iy: usize) -> usize {
        self.cell_to_node[iy * self.xs.len() + ix]
    }

    /// Index of `p` among the candidates, if it is one.
    pub fn candidate_index(&self, p: Point) -> Option<usize> {
        let ix = self.xs.binary_search(&p.x).ok()?;
        let iy = self.ys.binary_search(&p.y).ok()?;
        let node = self.node_at(ix, iy);
        (node >= self.n_pins).then(|| node - self.n_pins)
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut nbrs = vec![Vec::with_capacity(4); self.nodes.len()];
        for &(a, b) in &self.adjacency {
            nbrs[a].push(b);
            nbrs[b].push(a);
        }
        nbrs
    }
}

pub fn build_hanan_graph(net: &Net) -> Result<HananGraph> {
    build_hanan_graph_capped(net, DEFAULT_NODE_CAP)
}

pub fn build_hanan_graph_capped(net: &Net, cap: usize) -> Result<HananGraph> {
    let pins = net.pins();
    let mut xs: Vec<i64> = pins.iter().map(|p| p.x).collect();
    let mut ys: Vec<i64> = pins.iter().map(|p| p.y).collect();
    xs.sort_unstable();
    xs.dedup();
    ys.sort_unstable();
    ys.dedup();
    let (nx, ny) = (xs.len(), ys.len());
    let total = nx * ny;
    if total > cap {
        return Err(Error::GridTooLarge { nodes: total, cap });
    }

    let pin_set: HashSet<Point> = pins.iter().copied().collect();
    let mut sorted_pins: Vec<Point> = pins.to_vec();
    sorted_pins.sort_by_key(Point::row_major);

    let mut nodes = Vec::with_capacity(total);
    nodes.extend_from_slice(&sorted_pins);
    for &y in &ys {
        for &x in &xs {
            let p = Point::new(x, y);
            if !pin_set.contains(&p) {
                nodes.push(p);
            }
        }
    }
    let n_pins = sorted_pins.len();
    let mut is_pin = vec![false; total];
    is_pin[..n_pins].iter_mut().for_each(|f| *f = true);

    let mut cell_to_node = vec![0usize; total];
    for (i, p) in nodes.iter().enumerate() {
        let ix = xs.binary_search(&p.x).expect("x on grid");
        let iy = ys.binary_search(&p.y).expect("y on grid");
        cell_to_node[iy * nx + ix] = i;
    }

    let mut adjacency = Vec::with_capacity(2 * total);
    for iy in 0..ny {
        for ix in 0..nx {
            let here = cell_to_node[iy * nx + ix];
            if ix + 1 < nx {
                adjacency.push((here, cell_to_node[iy * nx + ix + 1]));
            }
            if iy + 1 < ny {
                adjacency.push((here, cell_to_node[(iy + 1) * nx + ix]));
            }
        }
    }

    Ok(HananGraph {
        nodes,
        is_pin,
        adjacency,
        n_pins,
        n_candidates: total - n_pins,
        xs,
        ys,
        cell_to_node,
    })
}

/// Per-node `(x_norm, y_norm, pin_flag)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeFeatures {
    pub rows: Vec<[f32; 3]>,
}

/// One direction of a grid edge. `disp` is `node - neighbor` in normalized
/// coordinates; messages flow from `neighbor` into `node`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectedEdge {
    pub node: usize,
    pub neighbor: usize,
    pub disp: [f32; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeFeatures {
    pub edges: Vec<DirectedEdge>,
}

fn normalizer(lo: i64, hi: i64) -> impl Fn(i64) -> f32 {
    move |v| {
        if hi == lo {
            0.5
        } else {
            ((v - lo) as f64 / (hi - lo) as f64) as f32
        }
    }
}

/// Min-max normalizes coordinates per net (each axis independently, a
/// constant axis maps to 0.5) and emits both directions of every grid edge.
pub fn featurize(graph: &HananGraph) -> (NodeFeatures, EdgeFeatures) {
    let nx = normalizer(graph.xs[0], *graph.xs.last().unwrap());
    let ny = normalizer(graph.ys[0], *graph.ys.last().unwrap());
    let rows: Vec<[f32; 3]> = graph
        .nodes
        .iter()
        .zip(&graph.is_pin)
        .map(|(p, &pin)| [nx(p.x), ny(p.y), if pin { 1.0 } else { 0.0 }])
        .collect();

    let mut edges = Vec::with_capacity(2 * graph.adjacency.len());
    for &(a, b) in &graph.adjacency {
        let (ra, rb) = (rows[a], rows[b]);
        edges.push(DirectedEdge { node: a, neighbor: b, disp: [ra[0] - rb[0], ra[1] - rb[1]] });
        edges.push(DirectedEdge { node: b, neighbor: a, disp: [rb[0] - ra[0], rb[1] - ra[1]] });
    }
    (NodeFeatures { rows }, EdgeFeatures { edges })
}
