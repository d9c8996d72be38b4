//! Rectilinear minimum spanning trees and Steiner point pruning.

use std::collections::{BTreeSet, HashSet};

use crate::error::{Error, Result};
use crate::geometry::{l1_distance, Length, Point, RectTree};

pub(crate) struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSets {
    pub(crate) fn new(n: usize) -> Self {
        DisjointSets { parent: (0..n).collect(), rank: vec![0; n] }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if `a` and `b` were already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Minimum spanning tree of the complete L1 graph over `points`.
///
/// Dense Prim scan, O(n^2). Edges are totally ordered by
/// `(length, min index, max index)`, which makes the tree unique and the
/// result identical on every platform.
pub fn rectilinear_mst(points: &[Point]) -> Result<RectTree> {
    let mut seen = HashSet::with_capacity(points.len());
    for p in points {
        if !seen.insert(*p) {
            return Err(Error::DuplicatePoint { x: p.x, y: p.y });
        }
    }
    Ok(mst_unchecked(points))
}

pub(crate) fn mst_unchecked(points: &[Point]) -> RectTree {
    let n = points.len();
    if n <= 1 {
        return RectTree { points: points.to_vec(), edges: Vec::new(), total_length: 0 };
    }
    type Key = (Length, usize, usize);
    let mut in_tree = vec![false; n];
    let mut best: Vec<Key> = vec![(Length::MAX, usize::MAX, usize::MAX); n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut total = 0;
    let mut cur = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let pc = points[cur];
        let mut next = usize::MAX;
        let mut next_key: Key = (Length::MAX, usize::MAX, usize::MAX);
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let key = (l1_distance(pc, points[v]), cur.min(v), cur.max(v));
            if key < best[v] {
                best[v] = key;
            }
            if best[v] < next_key {
                next_key = best[v];
                next = v;
            }
        }
        in_tree[next] = true;
        total += next_key.0;
        edges.push((next_key.1, next_key.2));
        cur = next;
    }
    RectTree { points: points.to_vec(), edges, total_length: total }
}

pub fn wirelength(tree: &RectTree) -> Length {
    tree.edges.iter().map(|&(a, b)| l1_distance(tree.points[a], tree.points[b])).sum()
}

/// Removes Steiner points that cannot shorten the tree.
///
/// Repeats until stable: non-pin leaves are dropped, and non-pin nodes of
/// degree two are spliced out by joining their two neighbors directly. By the
/// triangle inequality neither step increases the length. Surviving points
/// keep their relative order; edges come back sorted.
pub fn prune_steiner(tree: &RectTree, pins: &HashSet<Point>) -> RectTree {
    let n = tree.points.len();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &(a, b) in &tree.edges {
        adj[a].insert(b);
        adj[b].insert(a);
    }
    let is_pin: Vec<bool> = tree.points.iter().map(|p| pins.contains(p)).collect();
    let mut alive = vec![true; n];

    let mut changed = true;
    while changed {
        changed = false;
        for v in 0..n {
            if !alive[v] || is_pin[v] {
                continue;
            }
            match adj[v].len() {
                0 | 1 => {
                    if let Some(&u) = adj[v].iter().next() {
                        adj[u].remove(&v);
                    }
                    adj[v].clear();
                    alive[v] = false;
                    changed = true;
                }
                2 => {
                    let mut it = adj[v].iter();
                    let (u, w) = (*it.next().unwrap(), *it.next().unwrap());
                    adj[u].remove(&v);
                    adj[w].remove(&v);
                    adj[u].insert(w);
                    adj[w].insert(u);
                    adj[v].clear();
                    alive[v] = false;
                    changed = true;
                }
                _ => {}
            }
        }
    }

    let mut remap = vec![usize::MAX; n];
    let mut points = Vec::new();
    for v in 0..n {
        if alive[v] {
            remap[v] = points.len();
            points.push(tree.points[v]);
        }
    }
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(points.len().saturating_sub(1));
    for v in 0..n {
        for &u in &adj[v] {
            if v < u {
                edges.push((remap[v], remap[u]));
            }
        }
    }
    edges.sort_unstable();
    RectTree::new(points, edges)
}

/// Points of `tree` that are not pins.
pub fn steiner_points(tree: &RectTree, pins: &HashSet<Point>) -> Vec<Point> {
    tree.points.iter().copied().filter(|p| !pins.contains(p)).collect()
}

/// `prune_steiner(mst(pins ++ extra))`, iterated until the surviving Steiner
/// set is stable. Every surviving Steiner point has tree degree >= 3.
pub(crate) fn pruned_steiner_tree(pins: &[Point], extra: &[Point], pin_set: &HashSet<Point>) -> RectTree {
    let mut steiner: Vec<Point> = extra.to_vec();
    loop {
        let mut pts = pins.to_vec();
        pts.extend_from_slice(&steiner);
        let tree = prune_steiner(&mst_unchecked(&pts), pin_set);
        let next = steiner_points(&tree, pin_set);
        if next.len() == steiner.len() {
            return tree;
        }
        steiner = next;
    }
}
