//! Quadric edge collapse run as a sequence of rounds, each removing a fixed
//! fraction of the triangles present when it starts.
//!
//! Quadrics accumulate over the whole run, so later rounds still measure
//! error against the input surface. Boundary edges carry heavily weighted
//! perpendicular planes. A collapse is refused when it would break the link
//! condition, pinch two boundaries together, fold a triangle over, or touch
//! a non-manifold edge.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::geometry::{TriMesh, Vec3};
use crate::{Error, Result};

/// Optimal placement is used while the quadric's condition number stays
/// below this; otherwise the edge midpoint.
const MAX_CONDITION: f64 = 1e6;
const BOUNDARY_WEIGHT: f64 = 100.0;
/// Minimum cosine between a triangle's normal before and after a collapse.
const MIN_NORMAL_COS: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecimationParams {
    pub per_iteration_fraction: f64,
    /// Defaults to a tenth of the input triangle count.
    pub target_triangles: Option<usize>,
}

impl Default for DecimationParams {
    fn default() -> Self {
        Self {
            per_iteration_fraction: 0.10,
            target_triangles: None,
        }
    }
}

impl DecimationParams {
    pub fn with_target(target: usize) -> Self {
        Self {
            target_triangles: Some(target),
            ..Self::default()
        }
    }

    pub fn target_for(&self, input_triangles: usize) -> usize {
        self.target_triangles.unwrap_or(input_triangles / 10)
    }

    pub fn validate(&self, input_triangles: usize) -> Result<()> {
        let f = self.per_iteration_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::InvalidGeometry(format!("decimation fraction {f} outside (0, 1)")));
        }
        let target = self.target_for(input_triangles);
        if target < 4 {
            return Err(Error::InvalidGeometry(format!("target of {target} triangles is below 4")));
        }
        Ok(())
    }

    /// Triangle count a round starting at `count` aims for.
    pub fn round_goal(&self, count: usize) -> usize {
        let removed = ((count as f64) * self.per_iteration_fraction).floor() as usize;
        count - removed.max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub before: usize,
    pub goal: usize,
    pub after: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decimated {
    pub mesh: TriMesh,
    pub rounds: Vec<RoundLog>,
}

pub fn decimate(mesh: &TriMesh, params: &DecimationParams) -> Result<Decimated> {
    let n = mesh.triangle_count();
    params.validate(n)?;
    let target = params.target_for(n);
    if n <= target {
        return Ok(Decimated {
            mesh: mesh.clone(),
            rounds: Vec::new(),
        });
    }
    let mut state = Collapser::new(mesh);
    let mut rounds = Vec::new();
    while state.alive_count > target {
        let before = state.alive_count;
        let goal = params.round_goal(before);
        let reached = state.collapse_until(goal);
        rounds.push(RoundLog {
            round: rounds.len() + 1,
            before,
            goal,
            after: state.alive_count,
        });
        if !reached {
            let achieved = state.alive_count;
            return Err(Error::DecimationStalled {
                achieved,
                target,
                rounds: rounds.len(),
                mesh: Box::new(state.into_mesh()),
            });
        }
    }
    Ok(Decimated {
        mesh: state.into_mesh(),
        rounds,
    })
}

#[derive(Debug, Clone, Copy, Default)]
struct Quadric {
    a: Matrix3<f64>,
    b: Vec3,
    c: f64,
}

impl Quadric {
    fn plane(n: &Vec3, p: &Vec3, weight: f64) -> Self {
        let d = -n.dot(p);
        Self {
            a: n * n.transpose() * weight,
            b: n * d * weight,
            c: d * d * weight,
        }
    }

    fn add(&self, o: &Quadric) -> Quadric {
        Quadric {
            a: self.a + o.a,
            b: self.b + o.b,
            c: self.c + o.c,
        }
    }

    fn error(&self, v: &Vec3) -> f64 {
        (v.dot(&(self.a * v)) + 2.0 * self.b.dot(v) + self.c).max(0.0)
    }

    fn minimizer(&self) -> Option<Vec3> {
        let eig = SymmetricEigen::new(self.a);
        let (lo, hi) = eig
            .eigenvalues
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e.abs())));
        if !(lo > 0.0) || hi / lo >= MAX_CONDITION {
            return None;
        }
        self.a.try_inverse().map(|inv| -(inv * self.b))
    }
}

struct Collapser {
    pos: Vec<Vec3>,
    quadric: Vec<Quadric>,
    tris: Vec<[u32; 3]>,
    tri_alive: Vec<bool>,
    vtris: Vec<Vec<u32>>,
    version: Vec<u32>,
    removed: Vec<bool>,
    locked: Vec<bool>,
    alive_count: usize,
    heap: BinaryHeap<Reverse<(u64, u32, u32, u32, u32)>>,
}

impl Collapser {
    fn new(mesh: &TriMesh) -> Self {
        let nv = mesh.vertex_count();
        let tris = mesh.triangles().to_vec();
        let mut vtris = vec![Vec::new(); nv];
        let mut quadric = vec![Quadric::default(); nv];
        let mut edge_faces: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
        for (t, tri) in tris.iter().enumerate() {
            let [a, b, c] = tri.map(|i| mesh.vertices()[i as usize]);
            let cross = (b - a).cross(&(c - a));
            let area = cross.norm() / 2.0;
            let n = cross.normalize();
            let q = Quadric::plane(&n, &a, area);
            for &v in tri {
                vtris[v as usize].push(t as u32);
                quadric[v as usize] = quadric[v as usize].add(&q);
            }
            for k in 0..3 {
                let (u, v) = (tri[k], tri[(k + 1) % 3]);
                edge_faces.entry((u.min(v), u.max(v))).or_default().push(t as u32);
            }
        }
        let mut locked = vec![false; nv];
        let mut keys: Vec<_> = edge_faces.keys().copied().collect();
        keys.sort_unstable();
        for &(u, v) in &keys {
            let faces = &edge_faces[&(u, v)];
            match faces.len() {
                1 => {
                    let (p, q) = (mesh.vertices()[u as usize], mesh.vertices()[v as usize]);
                    let n = mesh.triangle_normal(faces[0] as usize);
                    if let Some(m) = (q - p).cross(&n).try_normalize(1e-12) {
                        let bq = Quadric::plane(&m, &p, BOUNDARY_WEIGHT * (q - p).norm_squared());
                        quadric[u as usize] = quadric[u as usize].add(&bq);
                        quadric[v as usize] = quadric[v as usize].add(&bq);
                    }
                }
                2 => {}
                _ => {
                    locked[u as usize] = true;
                    locked[v as usize] = true;
                }
            }
        }
        let mut s = Self {
            pos: mesh.vertices().to_vec(),
            quadric,
            tri_alive: vec![true; tris.len()],
            alive_count: tris.len(),
            tris,
            vtris,
            version: vec![0; nv],
            removed: vec![false; nv],
            locked,
            heap: BinaryHeap::new(),
        };
        for (u, v) in keys {
            s.push_edge(u, v);
        }
        s
    }

    fn placement(&self, u: u32, v: u32) -> (Vec3, f64) {
        let q = self.quadric[u as usize].add(&self.quadric[v as usize]);
        let p = q
            .minimizer()
            .unwrap_or_else(|| (self.pos[u as usize] + self.pos[v as usize]) / 2.0);
        (p, q.error(&p))
    }

    fn push_edge(&mut self, u: u32, v: u32) {
        if self.locked[u as usize] || self.locked[v as usize] {
            return;
        }
        let (u, v) = (u.min(v), u.max(v));
        let (_, cost) = self.placement(u, v);
        self.heap.push(Reverse((
            cost.to_bits(),
            u,
            v,
            self.version[u as usize],
            self.version[v as usize],
        )));
    }

    fn live_tris(&self, v: u32) -> impl Iterator<Item = u32> + '_ {
        self.vtris[v as usize]
            .iter()
            .copied()
            .filter(|&t| self.tri_alive[t as usize])
    }

    fn neighbors(&self, v: u32) -> Vec<u32> {
        let mut out: Vec<u32> = self
            .live_tris(v)
            .flat_map(|t| self.tris[t as usize])
            .filter(|&w| w != v)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn edge_face_count(&self, u: u32, v: u32) -> usize {
        self.live_tris(u)
            .filter(|&t| self.tris[t as usize].contains(&v))
            .count()
    }

    fn on_boundary(&self, v: u32) -> bool {
        self.neighbors(v)
            .into_iter()
            .any(|w| self.edge_face_count(v, w) == 1)
    }

    /// Collapses cheapest edges until at most `goal` triangles remain.
    /// Returns false if the candidates ran out first.
    fn collapse_until(&mut self, goal: usize) -> bool {
        while self.alive_count > goal {
            let Some(Reverse((_, u, v, vu, vv))) = self.heap.pop() else {
                return false;
            };
            if self.removed[u as usize]
                || self.removed[v as usize]
                || self.version[u as usize] != vu
                || self.version[v as usize] != vv
            {
                continue;
            }
            if let Some(p) = self.check(u, v) {
                self.apply(u, v, p);
            }
        }
        true
    }

    /// The new position if collapsing `v` into `u` is allowed.
    fn check(&self, u: u32, v: u32) -> Option<Vec3> {
        let shared: Vec<u32> = self
            .live_tris(u)
            .filter(|&t| self.tris[t as usize].contains(&v))
            .collect();
        if shared.is_empty() || shared.len() > 2 {
            return None;
        }
        let mut opposite: Vec<u32> = shared
            .iter()
            .map(|&t| {
                *self.tris[t as usize]
                    .iter()
                    .find(|&&w| w != u && w != v)
                    .expect("triangle has a third vertex")
            })
            .collect();
        opposite.sort_unstable();
        let nu = self.neighbors(u);
        let nv = self.neighbors(v);
        let common: Vec<u32> = nu.iter().copied().filter(|w| nv.binary_search(w).is_ok()).collect();
        if common != opposite {
            return None;
        }
        if shared.len() == 2 && self.on_boundary(u) && self.on_boundary(v) {
            return None;
        }
        // A closed tetrahedron-like remnant has nothing left to collapse.
        if shared.len() == 2 && nu.len() <= 3 && nv.len() <= 3 {
            return None;
        }
        let survivors = self
            .live_tris(u)
            .chain(self.live_tris(v))
            .filter(|t| !shared.contains(t))
            .count();
        if survivors == 0 {
            return None;
        }
        let (p, _) = self.placement(u, v);
        for t in self.live_tris(u).chain(self.live_tris(v)) {
            if shared.contains(&t) {
                continue;
            }
            let tri = self.tris[t as usize];
            let old = tri.map(|w| self.pos[w as usize]);
            let new = tri.map(|w| if w == u || w == v { p } else { self.pos[w as usize] });
            let n0 = (old[1] - old[0]).cross(&(old[2] - old[0]));
            let n1 = (new[1] - new[0]).cross(&(new[2] - new[0]));
            let (l0, l1) = (n0.norm(), n1.norm());
            if l1 < 2e-12 || n0.dot(&n1) <= MIN_NORMAL_COS * l0 * l1 {
                return None;
            }
        }
        Some(p)
    }

    fn apply(&mut self, u: u32, v: u32, p: Vec3) {
        let (ui, vi) = (u as usize, v as usize);
        for t in self.vtris[vi].clone() {
            let ti = t as usize;
            if !self.tri_alive[ti] {
                continue;
            }
            if self.tris[ti].contains(&u) {
                self.tri_alive[ti] = false;
                self.alive_count -= 1;
            } else {
                for w in self.tris[ti].iter_mut() {
                    if *w == v {
                        *w = u;
                    }
                }
                self.vtris[ui].push(t);
            }
        }
        let alive = &self.tri_alive;
        self.vtris[ui].retain(|&t| alive[t as usize]);
        self.vtris[vi].clear();
        self.removed[vi] = true;
        self.pos[ui] = p;
        self.quadric[ui] = self.quadric[ui].add(&self.quadric[vi]);
        self.version[ui] += 1;
        self.version[vi] += 1;
        for w in self.neighbors(u) {
            self.push_edge(u, w);
        }
    }

    fn into_mesh(self) -> TriMesh {
        let tris: Vec<[u32; 3]> = self
            .tris
            .iter()
            .zip(&self.tri_alive)
            .filter(|(_, &a)| a)
            .map(|(t, _)| *t)
            .collect();
        TriMesh::from_parts_unchecked(self.pos, tris).compacted()
    }
}
