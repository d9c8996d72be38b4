//! Reference RSMT solvers used to label training data and score estimates.
//!
//! [`exact_rsmt`] solves the Steiner tree problem on the Hanan grid graph with
//! the Dreyfus-Wagner subset dynamic program; by Hanan's theorem this is an
//! optimal rectilinear Steiner tree. It is exponential in the net degree and
//! guarded by [`ExactBudget`]. [`iterated_one_steiner`] is the classic greedy
//! heuristic for larger nets.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{l1_distance, Length, Net, Point, RectTree};
use crate::hanan::{build_hanan_graph, HananGraph};
use crate::tree::{mst_unchecked, pruned_steiner_tree, steiner_points, DisjointSets};

/// Largest degree the exact solver accepts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExactBudget {
    pub max_degree: usize,
}

impl ExactBudget {
    pub const DEFAULT_MAX_DEGREE: usize = 10;

    pub fn allows(&self, degree: usize) -> bool {
        degree <= self.max_degree
    }
}

impl Default for ExactBudget {
    fn default() -> Self {
        ExactBudget { max_degree: Self::DEFAULT_MAX_DEGREE }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RsmtSolution {
    pub steiner_points: Vec<Point>,
    pub tree: RectTree,
    pub wl: Length,
    pub exact: bool,
}

impl RsmtSolution {
    fn from_steiner(pins: &[Point], steiner: &[Point], exact: bool) -> Self {
        let pin_set: HashSet<Point> = pins.iter().copied().collect();
        let tree = pruned_steiner_tree(pins, steiner, &pin_set);
        let mut steiner_points = steiner_points(&tree, &pin_set);
        steiner_points.sort_by_key(Point::row_major);
        RsmtSolution { steiner_points, wl: tree.total_length, tree, exact }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Exact,
    Heuristic,
}

/// Binary labels over a Hanan graph's candidate nodes plus the reference WL.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SteinerLabels {
    pub labels: Vec<u8>,
    pub wl_opt: Length,
    pub provenance: Provenance,
}

const INF: Length = Length::MAX / 4;

#[derive(Clone, Copy)]
enum Step {
    Unset,
    Terminal,
    Split(u32),
    From(u32),
}

/// Optimal RSMT of `net`.
///
/// Fails with [`Error::BudgetExceeded`] above the budget; callers fall back
/// to [`iterated_one_steiner`].
pub fn exact_rsmt(net: &Net, budget: ExactBudget) -> Result<RsmtSolution> {
    if !budget.allows(net.degree()) {
        return Err(Error::BudgetExceeded { degree: net.degree(), max_degree: budget.max_degree });
    }
    let graph = build_hanan_graph(net)?;
    Ok(exact_on_graph(&graph))
}

pub(crate) fn exact_on_graph(graph: &HananGraph) -> RsmtSolution {
    let pins = graph.pins();
    let k = pins.len();
    if k <= 2 || graph.n_candidates == 0 {
        return RsmtSolution::from_steiner(pins, &[], true);
    }
    let n = graph.node_count();
    let nbrs = graph.neighbors();
    let weight = |a: usize, b: usize| l1_distance(graph.nodes[a], graph.nodes[b]);

    // Pins occupy nodes 0..k. The last pin is the root, so masks range over
    // the first k - 1 terminals.
    let root = k - 1;
    let full = (1usize << root) - 1;
    let mut cost = vec![INF; (full + 1) * n];
    let mut step = vec![Step::Unset; (full + 1) * n];
    let mut heap = BinaryHeap::new();

    for mask in 1..=full {
        let row = mask * n;
        if mask.count_ones() == 1 {
            let t = mask.trailing_zeros() as usize;
            cost[row + t] = 0;
            step[row + t] = Step::Terminal;
        } else {
            let low = mask & mask.wrapping_neg();
            let rest = mask ^ low;
            for v in 0..n {
                let mut best = INF;
                let mut arg = 0usize;
                // submasks that contain the lowest bit, excluding `mask` itself
                let mut sub = rest;
                loop {
                    let a = sub | low;
                    if a != mask {
                        let c = cost[a * n + v] + cost[(mask ^ a) * n + v];
                        if c < best {
                            best = c;
                            arg = a;
                        }
                    }
                    if sub == 0 {
                        break;
                    }
                    sub = (sub - 1) & rest;
                }
                cost[row + v] = best;
                step[row + v] = Step::Split(arg as u32);
            }
        }

        // Shortest-path relaxation over grid edges.
        heap.clear();
        for v in 0..n {
            if cost[row + v] < INF {
                heap.push(Reverse((cost[row + v], v)));
            }
        }
        while let Some(Reverse((c, v))) = heap.pop() {
            if c > cost[row + v] {
                continue;
            }
            for &u in &nbrs[v] {
                let nc = c + weight(u, v);
                if nc < cost[row + u] {
                    cost[row + u] = nc;
                    step[row + u] = Step::From(v as u32);
                    heap.push(Reverse((nc, u)));
                }
            }
        }
    }

    // The root joins the tree through the final relaxation pass.
    let mut grid_edges: HashSet<(usize, usize)> = HashSet::new();
    let mut stack = vec![(full, root)];
    while let Some((mask, v)) = stack.pop() {
        match step[mask * n + v] {
            Step::Terminal | Step::Unset => {}
            Step::Split(a) => {
                let a = a as usize;
                stack.push((a, v));
                stack.push((mask ^ a, v));
            }
            Step::From(u) => {
                let u = u as usize;
                grid_edges.insert((u.min(v), u.max(v)));
                stack.push((mask, u));
            }
        }
    }
    let optimum = cost[full * n + root];

    let mut degree = vec![0usize; n];
    for &(a, b) in &grid_edges {
        degree[a] += 1;
        degree[b] += 1;
    }
    let branching: Vec<Point> = (graph.n_pins..n).filter(|&v| degree[v] >= 3).map(|v| graph.nodes[v]).collect();
    let solution = RsmtSolution::from_steiner(pins, &branching, true);
    debug_assert_eq!(solution.wl, optimum);
    solution
}

/// Length of the MST over `points + [extra]`, given the MST edges of
/// `points`. Only those edges and the new star edges can appear in the
/// updated tree.
fn mst_length_with(points: &[Point], mst_edges: &[(usize, usize)], extra: Point, buf: &mut Vec<(Length, usize, usize)>) -> Length {
    let m = points.len();
    buf.clear();
    buf.extend(mst_edges.iter().map(|&(a, b)| (l1_distance(points[a], points[b]), a, b)));
    buf.extend(points.iter().enumerate().map(|(i, &p)| (l1_distance(p, extra), i, m)));
    buf.sort_unstable();
    let mut dsu = DisjointSets::new(m + 1);
    let mut total = 0;
    let mut joined = 0;
    for &(len, a, b) in buf.iter() {
        if dsu.union(a, b) {
            total += len;
            joined += 1;
            if joined == m {
                break;
            }
        }
    }
    total
}

/// Iterated 1-Steiner: repeatedly add the Hanan candidate with the largest
/// MST length reduction, prune Steiner points of degree < 3, and stop when
/// no candidate helps.
pub fn iterated_one_steiner(net: &Net) -> Result<RsmtSolution> {
    let graph = build_hanan_graph(net)?;
    Ok(one_steiner_on_graph(&graph))
}

pub(crate) fn one_steiner_on_graph(graph: &HananGraph) -> RsmtSolution {
    let pins = graph.pins();
    let pin_set: HashSet<Point> = pins.iter().copied().collect();
    let mut steiner: Vec<Point> = Vec::new();
    let mut buf = Vec::new();
    loop {
        let mut pts = pins.to_vec();
        pts.extend_from_slice(&steiner);
        let tree = mst_unchecked(&pts);
        let current = tree.total_length;
        let mut best: Option<(Length, Point)> = None;
        for &c in graph.candidates() {
            if steiner.contains(&c) {
                continue;
            }
            let gain = current - mst_length_with(&pts, &tree.edges, c, &mut buf);
            if gain > 0 && best.is_none_or(|(g, _)| gain > g) {
                best = Some((gain, c));
            }
        }
        let Some((_, point)) = best else { break };
        steiner.push(point);
        let pruned = pruned_steiner_tree(pins, &steiner, &pin_set);
        steiner = steiner_points(&pruned, &pin_set);
    }
    RsmtSolution::from_steiner(pins, &steiner, false)
}

/// A net with its Hanan graph and oracle labels.
#[derive(Clone, Debug)]
pub struct LabeledSample {
    pub net: Net,
    pub graph: HananGraph,
    pub labels: SteinerLabels,
}

/// Labels `net` with the exact solver when its degree is within budget, and
/// with iterated 1-Steiner otherwise.
pub fn label_sample(net: &Net, budget: ExactBudget) -> Result<LabeledSample> {
    let graph = build_hanan_graph(net)?;
    let (solution, provenance) = if budget.allows(net.degree()) {
        (exact_on_graph(&graph), Provenance::Exact)
    } else {
        (one_steiner_on_graph(&graph), Provenance::Heuristic)
    };
    let mut labels = vec![0u8; graph.n_candidates];
    for p in &solution.steiner_points {
        let idx = graph.candidate_index(*p).expect("steiner points lie on the hanan grid");
        labels[idx] = 1;
    }
    Ok(LabeledSample {
        net: net.clone(),
        graph,
        labels: SteinerLabels { labels, wl_opt: solution.wl, provenance },
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::tree::rectilinear_mst;
    use proptest::prelude::*;

    fn net(pts: &[(i64, i64)]) -> Net {
        let pins: Vec<Point> = pts.iter().map(|&p| p.into()).collect();
        Net::new("t", &pins).unwrap()
    }

    fn mst_len(points: &[Point]) -> Length {
        // Kruskal over all pairs; independent of the Prim implementation.
        let n = points.len();
        let mut edges: Vec<(Length, usize, usize)> = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push((l1_distance(points[i], points[j]), i, j));
            }
        }
        edges.sort_unstable();
        let mut dsu = DisjointSets::new(n);
        edges.into_iter().filter(|&(_, a, b)| dsu.union(a, b)).map(|e| e.0).sum()
    }

    /// Exhaustive minimum of `MST(pins + S)` over candidate subsets with
    /// `|S| <= d - 2`.
    pub(crate) fn brute_force_rsmt(pins: &[Point], candidates: &[Point]) -> Length {
        let cap = pins.len().saturating_sub(2);
        let mut best = mst_len(pins);
        let mut chosen = pins.to_vec();
        fn rec(cands: &[Point], start: usize, left: usize, chosen: &mut Vec<Point>, best: &mut Length) {
            for i in start..cands.len() {
                chosen.push(cands[i]);
                *best = (*best).min(mst_len(chosen));
                if left > 1 {
                    rec(cands, i + 1, left - 1, chosen, best);
                }
                chosen.pop();
            }
        }
        if cap > 0 {
            rec(candidates, 0, cap, &mut chosen, &mut best);
        }
        best
    }

    #[test]
    fn exact_examples() {
        let budget = ExactBudget::default();
        let s = exact_rsmt(&net(&[(1, 0), (0, 1), (2, 1), (1, 2)]), budget).unwrap();
        assert_eq!(s.wl, 4);
        assert_eq!(s.steiner_points, vec![Point::new(1, 1)]);
        assert!(s.exact);

        let tri = net(&[(0, 0), (2, 0), (1, 3)]);
        let s = exact_rsmt(&tri, budget).unwrap();
        let g = build_hanan_graph(&tri).unwrap();
        assert_eq!(brute_force_rsmt(g.pins(), g.candidates()), 5);
        assert_eq!(s.wl, 5);
        assert_eq!(s.steiner_points, vec![Point::new(1, 0)]);

        let s = exact_rsmt(&net(&[(0, 0), (2, 3)]), budget).unwrap();
        assert_eq!(s.wl, 5);
        assert!(s.steiner_points.is_empty());
    }

    #[test]
    fn exact_respects_budget() {
        let pts: Vec<(i64, i64)> = (0..6).map(|i| (i * 3, (i * 7) % 11)).collect();
        let err = exact_rsmt(&net(&pts), ExactBudget { max_degree: 5 }).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { degree: 6, max_degree: 5 }));
    }

    #[test]
    fn one_steiner_examples() {
        let s = iterated_one_steiner(&net(&[(1, 0), (0, 1), (2, 1), (1, 2)])).unwrap();
        assert_eq!(s.wl, 4);
        assert_eq!(s.steiner_points, vec![Point::new(1, 1)]);
        assert!(!s.exact);

        let s = iterated_one_steiner(&net(&[(0, 0), (1, 0), (3, 0)])).unwrap();
        assert_eq!(s.wl, 3);
        assert!(s.steiner_points.is_empty());
    }

    #[test]
    fn incremental_mst_matches_rebuild() {
        let pts: Vec<Point> = [(0, 0), (5, 2), (3, 9), (8, 8), (1, 6)].iter().map(|&p| p.into()).collect();
        let tree = rectilinear_mst(&pts).unwrap();
        let mut buf = Vec::new();
        for extra in [(4, 4), (0, 9), (9, 0), (3, 2)] {
            let extra = Point::from(extra);
            let mut all = pts.clone();
            all.push(extra);
            assert_eq!(mst_length_with(&pts, &tree.edges, extra, &mut buf), mst_len(&all));
        }
    }

    #[test]
    fn labels_mark_steiner_points() {
        let s = label_sample(&net(&[(1, 0), (0, 1), (2, 1), (1, 2)]), ExactBudget::default()).unwrap();
        assert_eq!(s.labels.labels, vec![0, 0, 1, 0, 0]);
        assert_eq!(s.labels.wl_opt, 4);
        assert_eq!(s.labels.provenance, Provenance::Exact);

        let s = label_sample(&net(&[(0, 0), (3, 0)]), ExactBudget::default()).unwrap();
        assert!(s.labels.labels.is_empty());
        assert_eq!(s.labels.wl_opt, 3);
        // a diagonal pair has two corner candidates, neither of them useful
        let s = label_sample(&net(&[(0, 0), (3, 4)]), ExactBudget::default()).unwrap();
        assert_eq!(s.labels.labels, vec![0, 0]);
        assert_eq!(s.labels.wl_opt, 7);

        let pts: Vec<(i64, i64)> = (0..12).map(|i| ((i * 37) % 101, (i * 53) % 97)).collect();
        let s = label_sample(&net(&pts), ExactBudget { max_degree: 8 }).unwrap();
        assert_eq!(s.labels.provenance, Provenance::Heuristic);
        assert!(s.labels.labels.iter().map(|&l| l as usize).sum::<usize>() <= 10);
    }

    fn small_net(max_degree: usize) -> impl Strategy<Value = Net> {
        proptest::collection::hash_set((0i64..25, 0i64..25), 2..=max_degree).prop_map(|s| {
            let pins: Vec<Point> = s.into_iter().map(Point::from).collect();
            Net::new("p", &pins).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(150))]

        #[test]
        fn exact_matches_subset_enumeration(net in small_net(6)) {
            let g = build_hanan_graph(&net).unwrap();
            let s = exact_rsmt(&net, ExactBudget::default()).unwrap();
            prop_assert_eq!(s.wl, brute_force_rsmt(g.pins(), g.candidates()));
        }

        #[test]
        fn solution_invariants(net in small_net(9)) {
            let pins = net.pins();
            let pin_set: HashSet<Point> = pins.iter().copied().collect();
            let mst = rectilinear_mst(pins).unwrap().total_length;
            let exact = exact_rsmt(&net, ExactBudget::default()).unwrap();
            let heur = iterated_one_steiner(&net).unwrap();
            prop_assert!(exact.wl <= heur.wl);
            prop_assert!(heur.wl <= mst);
            for s in [&exact, &heur] {
                prop_assert!(s.tree.is_spanning_tree());
                prop_assert_eq!(s.tree.total_length, s.wl);
                prop_assert!(s.steiner_points.len() <= net.degree().saturating_sub(2));
                let deg = s.tree.degrees();
                for (i, p) in s.tree.points.iter().enumerate() {
                    if !pin_set.contains(p) {
                        prop_assert!(deg[i] >= 3);
                    }
                }
                for p in pins {
                    prop_assert!(s.tree.points.contains(p));
                }
            }
        }

        #[test]
        fn exact_wl_is_invariant_under_symmetries(net in small_net(7), dx in -50i64..50, dy in -50i64..50) {
            let base = exact_rsmt(&net, ExactBudget::default()).unwrap().wl;
            let moved = net.map_pins(|p| Point::new(p.x + dx, p.y + dy)).unwrap();
            let swapped = net.map_pins(|p| Point::new(p.y, p.x)).unwrap();
            let mirrored = net.map_pins(|p| Point::new(-p.x, p.y)).unwrap();
            for other in [moved, swapped, mirrored] {
                prop_assert_eq!(exact_rsmt(&other, ExactBudget::default()).unwrap().wl, base);
            }
        }
    }
}
