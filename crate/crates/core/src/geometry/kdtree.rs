use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::Vec3;

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: u32,
        end: u32,
    },
    Split {
        axis: u8,
        value: f64,
        left: u32,
        right: u32,
    },
}

/// Static 3-d tree over a point set for nearest-neighbor queries.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    /// Original index of each entry in `points`.
    index: Vec<u32>,
    nodes: Vec<Node>,
}

#[derive(PartialEq)]
struct Candidate {
    dist2: f64,
    index: u32,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::new();
        if !points.is_empty() {
            build(points, &mut order, 0, &mut nodes);
        }
        let sorted = order.iter().map(|&i| points[i as usize]).collect();
        Self {
            points: sorted,
            index: order,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the nearest point and its squared distance.
    pub fn nearest(&self, q: &Vec3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (u32::MAX, f64::INFINITY);
        self.nearest_in(0, q, &mut best);
        Some((best.0 as usize, best.1))
    }

    fn nearest_in(&self, node: u32, q: &Vec3, best: &mut (u32, f64)) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for i in start..end {
                    let d2 = (self.points[i as usize] - q).norm_squared();
                    let idx = self.index[i as usize];
                    if d2 < best.1 || (d2 == best.1 && idx < best.0) {
                        *best = (idx, d2);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.nearest_in(near, q, best);
                if diff * diff <= best.1 {
                    self.nearest_in(far, q, best);
                }
            }
        }
    }

    /// Up to `k` nearest points sorted by ascending distance.
    pub fn k_nearest(&self, q: &Vec3, k: usize) -> Vec<(usize, f64)> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.k_nearest_in(0, q, k, &mut heap);
        let mut out: Vec<(usize, f64)> = heap
            .into_iter()
            .map(|c| (c.index as usize, c.dist2))
            .collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }

    fn k_nearest_in(&self, node: u32, q: &Vec3, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for i in start..end {
                    let c = Candidate {
                        dist2: (self.points[i as usize] - q).norm_squared(),
                        index: self.index[i as usize],
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.k_nearest_in(near, q, k, heap);
                let worst = if heap.len() < k {
                    f64::INFINITY
                } else {
                    heap.peek().unwrap().dist2
                };
                if diff * diff <= worst {
                    self.k_nearest_in(far, q, k, heap);
                }
            }
        }
    }

    /// Indices of every point within `radius` of `q`, unsorted.
    pub fn within_radius(&self, q: &Vec3, radius: f64, out: &mut Vec<usize>) {
        out.clear();
        if !self.points.is_empty() {
            self.within_in(0, q, radius * radius, out);
        }
    }

    fn within_in(&self, node: u32, q: &Vec3, r2: f64, out: &mut Vec<usize>) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for i in start..end {
                    if (self.points[i as usize] - q).norm_squared() <= r2 {
                        out.push(self.index[i as usize] as usize);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis as usize] - value;
                if diff <= 0.0 || diff * diff <= r2 {
                    self.within_in(left, q, r2, out);
                }
                if diff >= 0.0 || diff * diff <= r2 {
                    self.within_in(right, q, r2, out);
                }
            }
        }
    }
}

fn build(points: &[Vec3], order: &mut [u32], offset: u32, nodes: &mut Vec<Node>) -> u32 {
    let id = nodes.len() as u32;
    if order.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset,
            end: offset + order.len() as u32,
        });
        return id;
    }
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for &i in order.iter() {
        lo = lo.inf(&points[i as usize]);
        hi = hi.sup(&points[i as usize]);
    }
    let axis = (hi - lo).imax();
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis]
            .total_cmp(&points[b as usize][axis])
            .then(a.cmp(&b))
    });
    let value = points[order[mid] as usize][axis];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (left_half, right_half) = order.split_at_mut(mid);
    let left = build(points, left_half, offset, nodes);
    let right = build(points, right_half, offset + mid as u32, nodes);
    nodes[id as usize] = Node::Split {
        axis: axis as u8,
        value,
        left,
        right,
    };
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Vec3::new(rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0), rng.random_range(-5.0..5.0)))
            .collect()
    }

    #[test]
    fn matches_linear_scan() {
        let pts = random_points(2000, 1);
        let tree = KdTree::new(&pts);
        let queries = random_points(200, 2);
        for q in &queries {
            let brute = pts
                .iter()
                .enumerate()
                .map(|(i, p)| (i, (p - q).norm_squared()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            let (i, d2) = tree.nearest(q).unwrap();
            assert_eq!(d2, brute.1);
            assert_eq!(i, brute.0);

            let mut all: Vec<f64> = pts.iter().map(|p| (p - q).norm_squared()).collect();
            all.sort_by(f64::total_cmp);
            let knn = tree.k_nearest(q, 7);
            assert_eq!(knn.len(), 7);
            for (j, (_, d2)) in knn.iter().enumerate() {
                assert_eq!(*d2, all[j]);
            }

            let mut found = Vec::new();
            tree.within_radius(q, 10.0, &mut found);
            assert_eq!(found.len(), all.iter().filter(|&&d| d <= 100.0).count());
        }
    }

    #[test]
    fn empty_tree() {
        let tree = KdTree::new(&[]);
        assert!(tree.nearest(&Vec3::zeros()).is_none());
        assert!(tree.k_nearest(&Vec3::zeros(), 3).is_empty());
    }
}
