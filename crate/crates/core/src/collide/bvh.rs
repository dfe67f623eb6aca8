use crate::geometry::{closest_point_on_triangle, Aabb, RigidTransform, TriMesh, Vec3};
use crate::{Error, Result};

pub const MAX_LEAF_TRIANGLES: usize = 4;

#[derive(Debug, Clone)]
pub struct BvhNode {
    pub bounds: Aabb,
    /// Leaf: `count > 0`, triangles `order[first..first + count]`.
    /// Interior: `count == 0`, children at `first` and `first + 1`.
    first: u32,
    count: u32,
}

impl BvhNode {
    pub fn is_leaf(&self) -> bool {
        self.count > 0
    }
}

/// Bounding volume hierarchy over the triangles of one mesh, in the mesh's
/// own coordinates.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<BvhNode>,
    order: Vec<u32>,
}

/// A ray hit: parameter along the ray and the triangle index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub triangle: usize,
}

impl Bvh {
    /// Median split on the longest axis of the centroid bounds.
    pub fn build(mesh: &TriMesh) -> Result<Bvh> {
        if mesh.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let n = mesh.triangle_count();
        let boxes: Vec<Aabb> = (0..n)
            .map(|i| Aabb::from_points(mesh.triangle(i).iter()))
            .collect();
        let centroids: Vec<Vec3> = boxes.iter().map(Aabb::center).collect();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut nodes = Vec::with_capacity(2 * n / MAX_LEAF_TRIANGLES + 1);
        nodes.push(BvhNode {
            bounds: Aabb::empty(),
            first: 0,
            count: 0,
        });
        // (node index, start, end)
        let mut stack = vec![(0usize, 0usize, n)];
        while let Some((node, start, end)) = stack.pop() {
            let slice = &mut order[start..end];
            let bounds = slice
                .iter()
                .fold(Aabb::empty(), |b, &t| b.union(&boxes[t as usize]));
            nodes[node].bounds = bounds;
            if slice.len() <= MAX_LEAF_TRIANGLES {
                nodes[node].first = start as u32;
                nodes[node].count = slice.len() as u32;
                continue;
            }
            let cbounds = Aabb::from_points(slice.iter().map(|&t| &centroids[t as usize]));
            let axis = cbounds.longest_axis();
            let mid = slice.len() / 2;
            slice.select_nth_unstable_by(mid, |&a, &b| {
                centroids[a as usize][axis]
                    .total_cmp(&centroids[b as usize][axis])
                    .then(a.cmp(&b))
            });
            let left = nodes.len();
            nodes.push(BvhNode {
                bounds: Aabb::empty(),
                first: 0,
                count: 0,
            });
            nodes.push(BvhNode {
                bounds: Aabb::empty(),
                first: 0,
                count: 0,
            });
            nodes[node].first = left as u32;
            stack.push((left + 1, start + mid, end));
            stack.push((left, start, start + mid));
        }
        Ok(Bvh { nodes, order })
    }

    pub fn nodes(&self) -> &[BvhNode] {
        &self.nodes
    }

    pub fn root_bounds(&self) -> &Aabb {
        &self.nodes[0].bounds
    }

    pub fn children(&self, node: usize) -> Option<(usize, usize)> {
        let n = &self.nodes[node];
        (!n.is_leaf()).then(|| (n.first as usize, n.first as usize + 1))
    }

    pub fn leaf_triangles(&self, node: usize) -> &[u32] {
        let n = &self.nodes[node];
        &self.order[n.first as usize..(n.first + n.count) as usize]
    }

    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 1usize)];
        while let Some((node, d)) = stack.pop() {
            best = best.max(d);
            if let Some((l, r)) = self.children(node) {
                stack.push((l, d + 1));
                stack.push((r, d + 1));
            }
        }
        best
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Leaf node index holding each triangle.
    pub fn triangle_leaves(&self) -> Vec<usize> {
        let mut out = vec![usize::MAX; self.order.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if n.is_leaf() {
                for &t in self.leaf_triangles(i) {
                    out[t as usize] = i;
                }
            }
        }
        out
    }

    /// Nearest hit with `t` in `(t_min, t_max)`; two-sided triangles.
    pub fn ray_hit(&self, mesh: &TriMesh, origin: &Vec3, dir: &Vec3, t_min: f64, t_max: f64) -> Option<RayHit> {
        let inv = dir.map(|d| 1.0 / d);
        let mut best: Option<RayHit> = None;
        let mut limit = t_max;
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(node) = stack.pop() {
            let n = &self.nodes[node];
            let Some(enter) = slab(&n.bounds, origin, &inv, t_min, limit) else {
                continue;
            };
            if enter > limit {
                continue;
            }
            if n.is_leaf() {
                for &tri in self.leaf_triangles(node) {
                    let [a, b, c] = mesh.triangle(tri as usize);
                    if let Some(t) = ray_triangle(origin, dir, &a, &b, &c) {
                        if t > t_min && t < limit {
                            limit = t;
                            best = Some(RayHit {
                                t,
                                triangle: tri as usize,
                            });
                        }
                    }
                }
            } else {
                let (l, r) = (n.first as usize, n.first as usize + 1);
                // Visit the nearer child first.
                let dl = slab(&self.nodes[l].bounds, origin, &inv, t_min, limit);
                let dr = slab(&self.nodes[r].bounds, origin, &inv, t_min, limit);
                match (dl, dr) {
                    (Some(a), Some(b)) if a <= b => {
                        stack.push(r);
                        stack.push(l);
                    }
                    (Some(_), Some(_)) => {
                        stack.push(l);
                        stack.push(r);
                    }
                    (Some(_), None) => stack.push(l),
                    (None, Some(_)) => stack.push(r),
                    (None, None) => {}
                }
            }
        }
        best
    }

    /// Closest point on the mesh surface to `p`: (distance, point, triangle).
    pub fn closest_point(&self, mesh: &TriMesh, p: &Vec3) -> (f64, Vec3, usize) {
        let mut best = (f64::INFINITY, Vec3::zeros(), usize::MAX);
        let mut best_d2 = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            let n = &self.nodes[node];
            if n.bounds.distance_squared_to_point(p) >= best_d2 {
                continue;
            }
            if n.is_leaf() {
                for &tri in self.leaf_triangles(node) {
                    let [a, b, c] = mesh.triangle(tri as usize);
                    let q = closest_point_on_triangle(p, &a, &b, &c);
                    let d2 = (q - p).norm_squared();
                    if d2 < best_d2 {
                        best_d2 = d2;
                        best = (0.0, q, tri as usize);
                    }
                }
            } else {
                let (l, r) = (n.first as usize, n.first as usize + 1);
                let dl = self.nodes[l].bounds.distance_squared_to_point(p);
                let dr = self.nodes[r].bounds.distance_squared_to_point(p);
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        best.0 = best_d2.sqrt();
        best
    }
}

/// Box enclosing `b` after the rigid motion `t`.
#[inline]
pub fn transform_aabb(t: &RigidTransform, b: &Aabb) -> Aabb {
    let c = t.apply_point(&b.center());
    let h = (b.max - b.min) * 0.5;
    let r = t.rotation();
    let e = r.abs() * h;
    Aabb {
        min: c - e,
        max: c + e,
    }
}

#[inline]
fn slab(b: &Aabb, o: &Vec3, inv: &Vec3, t_min: f64, t_max: f64) -> Option<f64> {
    let mut lo = t_min;
    let mut hi = t_max;
    for i in 0..3 {
        let mut t0 = (b.min[i] - o[i]) * inv[i];
        let mut t1 = (b.max[i] - o[i]) * inv[i];
        if t0.is_nan() || t1.is_nan() {
            // Ray parallel to and exactly on a slab plane.
            if o[i] < b.min[i] || o[i] > b.max[i] {
                return None;
            }
            continue;
        }
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        lo = lo.max(t0);
        hi = hi.min(t1);
        if lo > hi {
            return None;
        }
    }
    Some(lo)
}

/// Möller–Trumbore, both faces.
#[inline]
pub fn ray_triangle(o: &Vec3, d: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - a;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = d.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&q) * inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes;

    fn check_invariants(mesh: &TriMesh, bvh: &Bvh) {
        let mut seen = vec![0u32; mesh.triangle_count()];
        for (i, n) in bvh.nodes().iter().enumerate() {
            if let Some((l, r)) = bvh.children(i) {
                assert!(n.bounds.contains_box(&bvh.nodes()[l].bounds));
                assert!(n.bounds.contains_box(&bvh.nodes()[r].bounds));
            } else {
                assert!(bvh.leaf_triangles(i).len() <= MAX_LEAF_TRIANGLES);
                for &t in bvh.leaf_triangles(i) {
                    seen[t as usize] += 1;
                    let c = mesh.triangle(t as usize).iter().sum::<Vec3>() / 3.0;
                    assert!(n.bounds.contains(&c));
                }
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn single_triangle_is_one_leaf() {
        let m = TriMesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y()], vec![[0, 1, 2]]).unwrap();
        let bvh = Bvh::build(&m).unwrap();
        assert_eq!(bvh.nodes().len(), 1);
        assert!(bvh.nodes()[0].is_leaf());
        check_invariants(&m, &bvh);
    }

    #[test]
    fn empty_mesh_is_error() {
        assert!(Bvh::build(&TriMesh::default()).is_err());
    }

    #[test]
    fn large_mesh_depth_bound() {
        let m = shapes::ellipsoid(Vec3::zeros(), Vec3::new(200.0, 120.0, 400.0), 400, 126, 2.0);
        let n = m.triangle_count();
        assert!(n >= 100_000);
        let bvh = Bvh::build(&m).unwrap();
        check_invariants(&m, &bvh);
        let bound = 2.0 * (n as f64 / MAX_LEAF_TRIANGLES as f64).log2() + 8.0;
        assert!((bvh.depth() as f64) <= bound, "depth {} > {bound}", bvh.depth());
    }

    #[test]
    fn ray_hits_match_linear_scan() {
        let m = shapes::icosphere(Vec3::new(5.0, -3.0, 2.0), 20.0, 3);
        let bvh = Bvh::build(&m).unwrap();
        let origin = Vec3::new(0.0, 0.0, -100.0);
        for k in 0..200 {
            let a = k as f64 * 0.137;
            let dir = Vec3::new(0.3 * a.cos(), 0.3 * a.sin(), 1.0).normalize();
            let brute = (0..m.triangle_count())
                .filter_map(|i| {
                    let [p, q, r] = m.triangle(i);
                    ray_triangle(&origin, &dir, &p, &q, &r).filter(|&t| t > 0.0)
                })
                .min_by(f64::total_cmp);
            let hit = bvh.ray_hit(&m, &origin, &dir, 0.0, f64::INFINITY).map(|h| h.t);
            assert_eq!(hit, brute);
        }
    }

    #[test]
    fn closest_point_matches_linear_scan() {
        let m = shapes::icosphere(Vec3::zeros(), 10.0, 2);
        let bvh = Bvh::build(&m).unwrap();
        for k in 0..50 {
            let p = Vec3::new((k as f64).sin() * 30.0, (k as f64 * 0.7).cos() * 15.0, k as f64 - 25.0);
            let brute = (0..m.triangle_count())
                .map(|i| {
                    let [a, b, c] = m.triangle(i);
                    (closest_point_on_triangle(&p, &a, &b, &c) - p).norm()
                })
                .fold(f64::INFINITY, f64::min);
            let (d, q, _) = bvh.closest_point(&m, &p);
            assert!((d - brute).abs() < 1e-12);
            assert!(((q - p).norm() - d).abs() < 1e-12);
        }
    }

    #[test]
    fn transformed_box_encloses_transformed_corners() {
        let b = Aabb {
            min: Vec3::new(-1.0, 2.0, 0.0),
            max: Vec3::new(3.0, 5.0, 1.0),
        };
        let t = RigidTransform::from_translation(Vec3::new(1.0, 1.0, 1.0))
            .compose(&RigidTransform::from_axis_angle(Vec3::new(1.0, 2.0, 3.0), 0.7));
        let tb = transform_aabb(&t, &b);
        for i in 0..8 {
            let corner = Vec3::new(
                if i & 1 == 0 { b.min.x } else { b.max.x },
                if i & 2 == 0 { b.min.y } else { b.max.y },
                if i & 4 == 0 { b.min.z } else { b.max.z },
            );
            let p = t.apply_point(&corner);
            assert!((0..3).all(|k| p[k] >= tb.min[k] - 1e-12 && p[k] <= tb.max[k] + 1e-12));
        }
    }
}
