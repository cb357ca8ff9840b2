//! Exact k-nearest-neighbor tables.
//!
//! Neighbors are ordered by `(squared distance, row index)`. Both the tree
//! search and the brute-force scan use the same distance kernel so they
//! agree bit for bit.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Above this ambient dimension queries fall back to a blocked scan.
pub const TREE_MAX_DIM: usize = 16;
const LEAF_SIZE: usize = 12;
const SCAN_BLOCK: usize = 256;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborTable {
    indices: Vec<usize>,
    k: usize,
}

impl NeighborTable {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_points(&self) -> usize {
        self.indices.len() / self.k.max(1)
    }

    /// Neighbors of row `i`, itself first.
    pub fn row(&self, i: usize) -> &[usize] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }
}

/// Row-major copy of the point coordinates.
struct Points {
    flat: Vec<f64>,
    dim: usize,
}

impl Points {
    fn new(data: &DMatrix<f64>) -> Self {
        let (n, dim) = data.shape();
        let mut flat = Vec::with_capacity(n * dim);
        for i in 0..n {
            flat.extend(data.row(i).iter());
        }
        Self { flat, dim }
    }

    fn len(&self) -> usize {
        self.flat.len() / self.dim.max(1)
    }

    fn get(&self, i: usize) -> &[f64] {
        &self.flat[i * self.dim..(i + 1) * self.dim]
    }
}

#[inline]
fn dist2(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let t = x - y;
        s += t * t;
    }
    s
}

#[derive(Clone, Copy, PartialEq)]
struct Candidate {
    dist: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Bounded max-heap keeping the `k` best candidates.
struct Best {
    heap: BinaryHeap<Candidate>,
    k: usize,
}

impl Best {
    fn new(k: usize) -> Self {
        Self {
            heap: BinaryHeap::with_capacity(k + 1),
            k,
        }
    }

    #[inline]
    fn offer(&mut self, c: Candidate) {
        if self.heap.len() < self.k {
            self.heap.push(c);
        } else if c < *self.heap.peek().expect("k >= 1") {
            self.heap.pop();
            self.heap.push(c);
        }
    }

    fn worst(&self) -> Option<f64> {
        if self.heap.len() < self.k {
            None
        } else {
            self.heap.peek().map(|c| c.dist)
        }
    }

    fn into_sorted(self) -> Vec<usize> {
        self.heap.into_sorted_vec().into_iter().map(|c| c.index).collect()
    }
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k > n {
        return Err(Error::TooManyNeighbors { k, n });
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    Ok(())
}

/// O(N^2) reference search.
pub fn knn_bruteforce(data: &DMatrix<f64>, k: usize) -> Result<NeighborTable> {
    let pts = Points::new(data);
    let n = pts.len();
    check_k(n, k)?;
    let mut indices = vec![0usize; n * k];
    indices.par_chunks_mut(k).enumerate().for_each(|(i, out)| {
        let q = pts.get(i);
        let mut best = Best::new(k);
        for j in 0..n {
            best.offer(Candidate {
                dist: dist2(q, pts.get(j)),
                index: j,
            });
        }
        out.copy_from_slice(&best.into_sorted());
    });
    Ok(NeighborTable { indices, k })
}

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

struct KdTree<'a> {
    pts: &'a Points,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'a> KdTree<'a> {
    fn build(pts: &'a Points) -> Self {
        let mut tree = Self {
            pts,
            order: (0..pts.len()).collect(),
            nodes: Vec::new(),
        };
        let n = tree.order.len();
        tree.build_node(0, n);
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let dim = self.pts.dim;
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for &i in &self.order[start..end] {
            for (a, &v) in self.pts.get(i).iter().enumerate() {
                lo[a] = lo[a].min(v);
                hi[a] = hi[a].max(v);
            }
        }
        let axis = (0..dim)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        if hi[axis] - lo[axis] <= 0.0 {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let pts = self.pts;
        self.order[start..end]
            .select_nth_unstable_by(mid - start, |&a, &b| pts.get(a)[axis].total_cmp(&pts.get(b)[axis]));
        let value = pts.get(self.order[mid])[axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    fn search(&self, node: usize, q: &[f64], best: &mut Best) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &j in &self.order[start..end] {
                    best.offer(Candidate {
                        dist: dist2(q, self.pts.get(j)),
                        index: j,
                    });
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                // Left holds coordinates <= value, right holds >= value.
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                let bound = diff * diff;
                if best.worst().is_none_or(|w| bound <= w) {
                    self.search(far, q, best);
                }
            }
        }
    }
}

/// Exact k nearest neighbors of every row, ties broken by smaller index.
pub fn knn(data: &DMatrix<f64>, k: usize) -> Result<NeighborTable> {
    let pts = Points::new(data);
    let n = pts.len();
    check_k(n, k)?;
    let mut indices = vec![0usize; n * k];
    if pts.dim > TREE_MAX_DIM {
        blocked_scan(&pts, k, &mut indices);
        return Ok(NeighborTable { indices, k });
    }
    let tree = KdTree::build(&pts);
    indices.par_chunks_mut(k).enumerate().for_each(|(i, out)| {
        let mut best = Best::new(k);
        tree.search(0, pts.get(i), &mut best);
        out.copy_from_slice(&best.into_sorted());
    });
    Ok(NeighborTable { indices, k })
}

fn blocked_scan(pts: &Points, k: usize, indices: &mut [usize]) {
    let n = pts.len();
    indices.par_chunks_mut(k * SCAN_BLOCK).enumerate().for_each(|(b, out)| {
        let first = b * SCAN_BLOCK;
        let count = out.len() / k;
        let mut best: Vec<Best> = (0..count).map(|_| Best::new(k)).collect();
        for start in (0..n).step_by(SCAN_BLOCK) {
            let stop = (start + SCAN_BLOCK).min(n);
            for (r, slot) in best.iter_mut().enumerate() {
                let q = pts.get(first + r);
                for j in start..stop {
                    slot.offer(Candidate {
                        dist: dist2(q, pts.get(j)),
                        index: j,
                    });
                }
            }
        }
        for (r, slot) in best.into_iter().enumerate() {
            out[r * k..(r + 1) * k].copy_from_slice(&slot.into_sorted());
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(values.len(), 1, values)
    }

    #[test]
    fn small_examples() {
        let c = line(&[0.0, 1.0, 2.0, 10.0]);
        for f in [knn, knn_bruteforce] {
            assert_eq!(f(&c, 2).unwrap().row(0), &[0, 1]);
            assert_eq!(f(&c, 3).unwrap().row(3), &[3, 2, 1]);
        }
        assert!(matches!(knn(&c, 5), Err(Error::TooManyNeighbors { k: 5, n: 4 })));
    }

    #[test]
    fn ties_prefer_smaller_index() {
        let c = line(&[0.0, -1.0, 1.0, 2.0, -2.0]);
        assert_eq!(knn(&c, 3).unwrap().row(0), &[0, 1, 2]);
        assert_eq!(knn_bruteforce(&c, 5).unwrap().row(0), &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn high_dimension_uses_scan() {
        let n = 300;
        let dim = TREE_MAX_DIM + 3;
        let data = DMatrix::from_fn(n, dim, |i, j| ((i * 31 + j * 17) % 97) as f64 / 97.0 + i as f64 * 1e-6);
        assert_eq!(knn(&data, 9).unwrap(), knn_bruteforce(&data, 9).unwrap());
    }
}
