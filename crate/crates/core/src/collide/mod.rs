//! Mesh–mesh intersection and minimum clearance over a posed scene.
//!
//! Collision means surface intersection: one closed component sitting
//! entirely inside another without touching its surface is reported clear.

mod bvh;
pub mod tritri;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geometry::{RigidTransform, TriMesh, Vec3};
use crate::machine::{forward_kinematics, MachineGeometry, MachineState, PosedComponent, PosedScene};
use crate::Result;

pub use bvh::{transform_aabb, ray_triangle, Bvh, BvhNode, RayHit, MAX_LEAF_TRIANGLES};

/// Witness triangle pairs kept per colliding component pair.
pub const MAX_WITNESSES: usize = 32;

/// A mesh together with its hierarchy, shared between poses.
#[derive(Debug, Clone)]
pub struct CollisionBody {
    mesh: TriMesh,
    bvh: Bvh,
}

impl CollisionBody {
    pub fn new(mesh: TriMesh) -> Result<Arc<Self>> {
        let bvh = Bvh::build(&mesh)?;
        Ok(Arc::new(Self { mesh, bvh }))
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }
}

pub fn build_bvh(mesh: &TriMesh) -> Result<Bvh> {
    Bvh::build(mesh)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Clear,
    Collision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollidingPair {
    pub a: String,
    pub b: String,
    /// (triangle of `a`, triangle of `b`) pairs that intersect.
    #[serde(rename = "witness")]
    pub witnesses: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosestPair {
    pub a: String,
    pub b: String,
    #[serde(rename = "point_a_mm")]
    pub point_a: [f64; 3],
    #[serde(rename = "point_b_mm")]
    pub point_b: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionReport {
    pub status: Status,
    #[serde(rename = "pairs")]
    pub colliding_pairs: Vec<CollidingPair>,
    pub min_clearance_mm: f64,
    #[serde(rename = "closest")]
    pub closest_pair: Option<ClosestPair>,
}

impl CollisionReport {
    pub fn is_collision(&self) -> bool {
        self.status == Status::Collision
    }

    pub fn involves(&self, a: &str, b: &str) -> bool {
        self.colliding_pairs
            .iter()
            .any(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
    }
}

/// Unordered component-name pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairKey(String, String);

impl PairKey {
    pub fn new(a: &str, b: &str) -> Self {
        if a <= b {
            PairKey(a.to_string(), b.to_string())
        } else {
            PairKey(b.to_string(), a.to_string())
        }
    }

    pub fn names(&self) -> (&str, &str) {
        (&self.0, &self.1)
    }
}

/// Intersections and clearance for every candidate pair in `scene`.
///
/// Without a filter, all pairs except the scene's excluded (mounted
/// parent/child) pairs are tested. With a filter, exactly the listed pairs
/// present in the scene are tested.
pub fn check_collision(scene: &PosedScene, pair_filter: Option<&[PairKey]>) -> CollisionReport {
    let comps = scene.components();
    let mut pairs = Vec::new();
    for i in 0..comps.len() {
        for j in (i + 1)..comps.len() {
            let key = PairKey::new(&comps[i].name, &comps[j].name);
            let wanted = match pair_filter {
                Some(filter) => filter.contains(&key),
                None => !scene.is_excluded(&key),
            };
            if wanted {
                pairs.push((i, j));
            }
        }
    }

    let mut colliding = Vec::new();
    for &(i, j) in &pairs {
        let witnesses = intersecting_triangles(&comps[i], &comps[j], MAX_WITNESSES);
        if !witnesses.is_empty() {
            colliding.push((i, j, witnesses));
        }
    }

    if let Some((i, j, w)) = colliding.first() {
        let [ta, tb] = w[0];
        let p = contact_point(&comps[*i], ta, &comps[*j], tb);
        let closest = ClosestPair {
            a: comps[*i].name.clone(),
            b: comps[*j].name.clone(),
            point_a: p.into(),
            point_b: p.into(),
        };
        return CollisionReport {
            status: Status::Collision,
            colliding_pairs: colliding
                .into_iter()
                .map(|(i, j, witnesses)| CollidingPair {
                    a: comps[i].name.clone(),
                    b: comps[j].name.clone(),
                    witnesses,
                })
                .collect(),
            min_clearance_mm: 0.0,
            closest_pair: Some(closest),
        };
    }

    // Clear: global branch and bound over all pairs, nearest roots first.
    let mut order: Vec<(f64, usize, usize)> = pairs
        .iter()
        .map(|&(i, j)| {
            let lb = world_root_box(&comps[i]).distance_squared(&world_root_box(&comps[j]));
            (lb, i, j)
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut best: Option<(f64, usize, usize, Vec3, Vec3)> = None;
    for (lb, i, j) in order {
        let bound = best.as_ref().map_or(f64::INFINITY, |b| b.0);
        if lb.sqrt() >= bound {
            continue;
        }
        if let Some((d, pa, pb)) = pair_clearance(&comps[i], &comps[j], bound) {
            if d < bound {
                best = Some((d, i, j, pa, pb));
            }
        }
    }
    match best {
        Some((d, i, j, pa, pb)) => CollisionReport {
            status: Status::Clear,
            colliding_pairs: Vec::new(),
            min_clearance_mm: d,
            closest_pair: Some(ClosestPair {
                a: comps[i].name.clone(),
                b: comps[j].name.clone(),
                point_a: pa.into(),
                point_b: pb.into(),
            }),
        },
        None => CollisionReport {
            status: Status::Clear,
            colliding_pairs: Vec::new(),
            min_clearance_mm: f64::INFINITY,
            closest_pair: None,
        },
    }
}

fn world_root_box(c: &PosedComponent) -> crate::geometry::Aabb {
    transform_aabb(&c.pose, c.body.bvh().root_bounds())
}

fn contact_point(a: &PosedComponent, ta: usize, b: &PosedComponent, tb: usize) -> Vec3 {
    let wa = a.body.mesh().triangle(ta).map(|p| a.pose.apply_point(&p));
    let wb = b.body.mesh().triangle(tb).map(|p| b.pose.apply_point(&p));
    tritri::distance(&wa, &wb).1
}

/// Transforms `b` into `a`'s mesh frame.
struct PairFrame<'a> {
    a: &'a CollisionBody,
    b: &'a CollisionBody,
    rel: RigidTransform,
    b_boxes: Vec<Option<crate::geometry::Aabb>>,
}

impl<'a> PairFrame<'a> {
    fn new(a: &'a PosedComponent, b: &'a PosedComponent) -> Self {
        let rel = a.pose.inverse().compose(&b.pose);
        Self {
            a: &a.body,
            b: &b.body,
            rel,
            b_boxes: vec![None; b.body.bvh().nodes().len()],
        }
    }

    fn b_box(&mut self, node: usize) -> crate::geometry::Aabb {
        *self.b_boxes[node]
            .get_or_insert_with(|| transform_aabb(&self.rel, &self.b.bvh().nodes()[node].bounds))
    }

    fn b_triangle(&self, t: usize) -> tritri::Tri {
        self.b.mesh().triangle(t).map(|p| self.rel.apply_point(&p))
    }

    /// Which node to open next: the interior one, or the larger box.
    fn split_a(&mut self, na: usize, nb: usize) -> bool {
        let a_node = &self.a.bvh().nodes()[na];
        let b_leaf = self.b.bvh().nodes()[nb].is_leaf();
        match (a_node.is_leaf(), b_leaf) {
            (true, _) => false,
            (false, true) => true,
            (false, false) => {
                let ea = a_node.bounds.extent();
                let eb = self.b_box(nb).extent();
                ea.x + ea.y + ea.z >= eb.x + eb.y + eb.z
            }
        }
    }
}

fn intersecting_triangles(a: &PosedComponent, b: &PosedComponent, cap: usize) -> Vec<[usize; 2]> {
    let mut frame = PairFrame::new(a, b);
    let mut out = Vec::new();
    let mut stack = vec![(0usize, 0usize)];
    while let Some((na, nb)) = stack.pop() {
        let box_a = frame.a.bvh().nodes()[na].bounds;
        if !box_a.overlaps(&frame.b_box(nb), tritri::EPS) {
            continue;
        }
        let a_leaf = frame.a.bvh().nodes()[na].is_leaf();
        let b_leaf = frame.b.bvh().nodes()[nb].is_leaf();
        if a_leaf && b_leaf {
            for &ta in frame.a.bvh().leaf_triangles(na) {
                let tri_a = frame.a.mesh().triangle(ta as usize);
                for &tb in frame.b.bvh().leaf_triangles(nb) {
                    if tritri::intersects(&tri_a, &frame.b_triangle(tb as usize)) {
                        out.push([ta as usize, tb as usize]);
                        if out.len() >= cap {
                            out.sort_unstable();
                            return out;
                        }
                    }
                }
            }
        } else if frame.split_a(na, nb) {
            let (l, r) = frame.a.bvh().children(na).unwrap();
            stack.push((r, nb));
            stack.push((l, nb));
        } else {
            let (l, r) = frame.b.bvh().children(nb).unwrap();
            stack.push((na, r));
            stack.push((na, l));
        }
    }
    out.sort_unstable();
    out
}

#[derive(PartialEq)]
struct Pending {
    lower: f64,
    na: usize,
    nb: usize,
}

impl Eq for Pending {}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .lower
            .total_cmp(&self.lower)
            .then((other.na, other.nb).cmp(&(self.na, self.nb)))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Exact minimum distance between two posed components if it is below
/// `bound`, with world-space closest points (on `a`, on `b`).
pub fn pair_clearance(a: &PosedComponent, b: &PosedComponent, bound: f64) -> Option<(f64, Vec3, Vec3)> {
    let mut frame = PairFrame::new(a, b);
    let mut best_d = bound;
    let mut best: Option<(f64, Vec3, Vec3)> = None;
    let mut heap = BinaryHeap::new();
    let lb = frame.a.bvh().nodes()[0].bounds.distance_squared(&frame.b_box(0)).sqrt();
    heap.push(Pending { lower: lb, na: 0, nb: 0 });
    while let Some(Pending { lower, na, nb }) = heap.pop() {
        if lower >= best_d {
            break;
        }
        let a_leaf = frame.a.bvh().nodes()[na].is_leaf();
        let b_leaf = frame.b.bvh().nodes()[nb].is_leaf();
        if a_leaf && b_leaf {
            for &ta in frame.a.bvh().leaf_triangles(na) {
                let tri_a = frame.a.mesh().triangle(ta as usize);
                for &tb in frame.b.bvh().leaf_triangles(nb) {
                    let (d, pa, pb) = tritri::distance(&tri_a, &frame.b_triangle(tb as usize));
                    if d < best_d {
                        best_d = d;
                        best = Some((d, pa, pb));
                    }
                }
            }
            continue;
        }
        let children: [(usize, usize); 2] = if frame.split_a(na, nb) {
            let (l, r) = frame.a.bvh().children(na).unwrap();
            [(l, nb), (r, nb)]
        } else {
            let (l, r) = frame.b.bvh().children(nb).unwrap();
            [(na, l), (na, r)]
        };
        for (ca, cb) in children {
            let lb = frame.a.bvh().nodes()[ca]
                .bounds
                .distance_squared(&frame.b_box(cb))
                .sqrt();
            if lb < best_d {
                heap.push(Pending { lower: lb, na: ca, nb: cb });
            }
        }
    }
    best.map(|(d, pa, pb)| (d, a.pose.apply_point(&pa), a.pose.apply_point(&pb)))
}

/// One sweep entry: the state and either its report or the error that
/// prevented evaluation.
#[derive(Debug)]
pub struct SweepEntry {
    pub state: MachineState,
    pub outcome: Result<CollisionReport>,
}

/// Poses and checks each state independently, preserving order.
pub fn clearance_sweep(
    geom: &MachineGeometry,
    states: &[MachineState],
    pair_filter: Option<&[PairKey]>,
) -> Vec<SweepEntry> {
    use rayon::prelude::*;
    states
        .par_iter()
        .map(|state| SweepEntry {
            state: state.clone(),
            outcome: forward_kinematics(geom, state).map(|scene| check_collision(&scene, pair_filter)),
        })
        .collect()
}
