//! Integer planar geometry shared by every solver.
//!
//! Coordinates are `i64` grid units so that wirelength sums and comparisons
//! between the exact solver, the heuristics and the model are exact.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wirelength in grid units.
pub type Length = i64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i64; 2]", into = "[i64; 2]")]
pub struct Point {
    pub x: i64,
    pub y: i64,
}

impl Point {
    pub const fn new(x: i64, y: i64) -> Self {
        Point { x, y }
    }

    /// Sort key for row-major `(y, x)` ordering.
    pub fn row_major(&self) -> (i64, i64) {
        (self.y, self.x)
    }
}

impl From<[i64; 2]> for Point {
    fn from([x, y]: [i64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [i64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl From<(i64, i64)> for Point {
    fn from((x, y): (i64, i64)) -> Self {
        Point { x, y }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

pub fn l1_distance(a: Point, b: Point) -> Length {
    (a.x - b.x).abs() + (a.y - b.y).abs()
}

/// Removes repeated pins, keeping the first occurrence of each.
pub fn dedupe_pins(raw: &[Point]) -> Result<Vec<Point>> {
    let mut seen = HashSet::with_capacity(raw.len());
    let pins: Vec<Point> = raw.iter().copied().filter(|p| seen.insert(*p)).collect();
    if pins.len() < 2 {
        return Err(Error::DegenerateNet { distinct: pins.len() });
    }
    Ok(pins)
}

/// A routing net: a named set of at least two distinct pins.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Net {
    pub id: String,
    pins: Vec<Point>,
}

impl Net {
    pub fn new(id: impl Into<String>, raw: &[Point]) -> Result<Self> {
        Ok(Net { id: id.into(), pins: dedupe_pins(raw)? })
    }

    pub fn pins(&self) -> &[Point] {
        &self.pins
    }

    pub fn degree(&self) -> usize {
        self.pins.len()
    }

    /// Applies `f` to every pin. Fails if the image collapses pins.
    pub fn map_pins(&self, f: impl Fn(Point) -> Point) -> Result<Net> {
        let mapped: Vec<Point> = self.pins.iter().map(|&p| f(p)).collect();
        let net = Net::new(self.id.clone(), &mapped)?;
        if net.degree() != self.degree() {
            return Err(Error::Invalid(format!("pin map collapsed net {}", self.id)));
        }
        Ok(net)
    }
}

pub fn bbox_half_perimeter(pins: &[Point]) -> Length {
    let Some(first) = pins.first() else { return 0 };
    let (mut x0, mut x1, mut y0, mut y1) = (first.x, first.x, first.y, first.y);
    for p in pins {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    (x1 - x0) + (y1 - y0)
}

/// A spanning tree over `points` with L1 edge lengths.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RectTree {
    pub points: Vec<Point>,
    pub edges: Vec<(usize, usize)>,
    pub total_length: Length,
}

impl RectTree {
    pub fn new(points: Vec<Point>, edges: Vec<(usize, usize)>) -> Self {
        let total_length = edges.iter().map(|&(a, b)| l1_distance(points[a], points[b])).sum();
        RectTree { points, edges, total_length }
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.points.len()];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// Checks the spanning-tree invariants: `n - 1` edges, connected, and the
    /// cached length matching the edge sum.
    pub fn is_spanning_tree(&self) -> bool {
        let n = self.points.len();
        if n == 0 {
            return self.edges.is_empty();
        }
        if self.edges.len() != n - 1 {
            return false;
        }
        let mut dsu = crate::tree::DisjointSets::new(n);
        for &(a, b) in &self.edges {
            if a >= n || b >= n || !dsu.union(a, b) {
                return false;
            }
        }
        let sum: Length = self.edges.iter().map(|&(a, b)| l1_distance(self.points[a], self.points[b])).sum();
        sum == self.total_length
    }
}
