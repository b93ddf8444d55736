//! Spatial acceleration structures: an axis-aligned BVH over mesh facets for
//! ray casting and a uniform hash grid over points for radius queries.
//!
//! Both structures are exact: they return the same hits and neighbor sets as
//! a brute-force scan (the test suite checks this against brute-force
//! oracles), only faster. Queries are deterministic; ties on hit distance
//! resolve to the lowest facet index.

use crate::geom::{ray_triangle_intersect, Point3, TriMesh, Vec3};
use std::collections::HashMap;

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            min: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Point3) {
        for k in 0..3 {
            self.min[k] = self.min[k].min(p[k]);
            self.max[k] = self.max[k].max(p[k]);
        }
    }

    /// Slab test. `inv_dir` components may be infinite for axis-parallel
    /// rays; the min/max ordering below discards the NaNs that produces.
    fn hit_by(&self, origin: &Point3, inv_dir: &Vec3, t_max: f64) -> bool {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for k in 0..3 {
            let a = (self.min[k] - origin[k]) * inv_dir[k];
            let b = (self.max[k] - origin[k]) * inv_dir[k];
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
        t0 <= t1
    }
}

/// First intersection along a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    /// Ray parameter in units of the direction's length.
    pub t: f64,
    /// Index of the hit facet in the source mesh.
    pub facet: usize,
}

enum Node {
    Leaf { start: usize, count: usize },
    Internal { left: usize, right: usize },
}

/// Bounding volume hierarchy over the facets of a mesh. Triangles are copied
/// in at build time, so the BVH stays valid independently of the mesh.
pub struct MeshBvh {
    nodes: Vec<Node>,
    bounds: Vec<Aabb>,
    /// Facet indices grouped by leaf.
    order: Vec<u32>,
    tris: Vec<[Point3; 3]>,
}

const LEAF_SIZE: usize = 4;

impl MeshBvh {
    pub fn build(mesh: &TriMesh) -> Self {
        let n = mesh.facet_count();
        let tris: Vec<[Point3; 3]> = (0..n).map(|i| mesh.facet_vertices(i)).collect();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut bvh = Self { nodes: Vec::new(), bounds: Vec::new(), order: Vec::new(), tris };
        if n > 0 {
            let centers: Vec<Point3> = (0..n).map(|i| mesh.facet_center(i)).collect();
            bvh.split(&mut order, &centers, 0, n);
        }
        bvh.order = order;
        bvh
    }

    /// Builds the subtree for `order[start..start+count]` and returns its
    /// node index.
    fn split(&mut self, order: &mut [u32], centers: &[Point3], start: usize, count: usize) -> usize {
        let slice = &mut order[start..start + count];
        let mut bb = Aabb::empty();
        let mut cb = Aabb::empty();
        for &f in slice.iter() {
            for v in &self.tris[f as usize] {
                bb.grow(v);
            }
            cb.grow(&centers[f as usize]);
        }
        let idx = self.nodes.len();
        self.nodes.push(Node::Leaf { start, count });
        self.bounds.push(bb);
        if count <= LEAF_SIZE {
            return idx;
        }
        let extent = cb.max - cb.min;
        let axis = if extent.x >= extent.y && extent.x >= extent.z {
            0
        } else if extent.y >= extent.z {
            1
        } else {
            2
        };
        // Median split on centroid; index is the tiebreaker so the order is
        // fully determined.
        slice.sort_unstable_by(|&a, &b| {
            centers[a as usize][axis]
                .partial_cmp(&centers[b as usize][axis])
                .expect("finite centroids")
                .then(a.cmp(&b))
        });
        let half = count / 2;
        let left = self.split(order, centers, start, half);
        let right = self.split(order, centers, start + half, count - half);
        self.nodes[idx] = Node::Internal { left, right };
        idx
    }

    /// First facet hit along the ray, or `None`. Equal-distance hits resolve
    /// to the lowest facet index.
    pub fn first_hit(&self, origin: &Point3, direction: &Vec3) -> Option<RayHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv_dir = Vec3::new(1.0 / direction.x, 1.0 / direction.y, 1.0 / direction.z);
        let mut best: Option<RayHit> = None;
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            let t_max = best.map_or(f64::INFINITY, |h| h.t);
            if !self.bounds[node].hit_by(origin, &inv_dir, t_max) {
                continue;
            }
            match self.nodes[node] {
                Node::Leaf { start, count } => {
                    for &f in &self.order[start..start + count] {
                        let f = f as usize;
                        if let Some(t) = ray_triangle_intersect(origin, direction, &self.tris[f]) {
                            let better = match best {
                                None => true,
                                Some(h) => t < h.t || (t == h.t && f < h.facet),
                            };
                            if better {
                                best = Some(RayHit { t, facet: f });
                            }
                        }
                    }
                }
                Node::Internal { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        best
    }

    /// True when the open segment between `a` and `b` crosses a facet.
    /// Endpoints sitting exactly on a surface do not block (the segment
    /// parameter must be strictly inside `(eps, 1 - eps)`).
    pub fn segment_blocked(&self, a: &Point3, b: &Point3) -> bool {
        const END_EPS: f64 = 1e-6;
        let dir = b - a;
        match self.first_hit(a, &dir) {
            Some(hit) => hit.t < 1.0 - END_EPS,
            None => false,
        }
    }
}

/// Uniform hash grid over a fixed point set, for radius-bounded neighbor
/// queries. Cell size should be on the order of the query radius.
pub struct PointGrid {
    cell: f64,
    map: HashMap<[i64; 3], Vec<u32>>,
    points: Vec<Point3>,
}

impl PointGrid {
    pub fn build(points: &[Point3], cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "cell size must be positive, got {cell}");
        let mut map: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            map.entry(Self::key(p, cell)).or_default().push(i as u32);
        }
        Self { cell, map, points: points.to_vec() }
    }

    fn key(p: &Point3, cell: f64) -> [i64; 3] {
        [
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        ]
    }

    /// Calls `f(index, distance)` for every stored point with
    /// `distance(p, point) <= radius`, in ascending index order.
    pub fn for_each_within(&self, p: &Point3, radius: f64, mut f: impl FnMut(u32, f64)) {
        let mut found = self.collect_within(p, radius);
        found.sort_unstable_by_key(|&(i, _)| i);
        for (i, d) in found {
            f(i, d);
        }
    }

    fn collect_within(&self, p: &Point3, radius: f64) -> Vec<(u32, f64)> {
        let lo = Self::key(&Point3::new(p.x - radius, p.y - radius, p.z - radius), self.cell);
        let hi = Self::key(&Point3::new(p.x + radius, p.y + radius, p.z + radius), self.cell);
        let mut found = Vec::new();
        for ix in lo[0]..=hi[0] {
            for iy in lo[1]..=hi[1] {
                for iz in lo[2]..=hi[2] {
                    let Some(cell) = self.map.get(&[ix, iy, iz]) else { continue };
                    for &i in cell {
                        let d = (self.points[i as usize] - p).norm();
                        if d <= radius {
                            found.push((i, d));
                        }
                    }
                }
            }
        }
        found
    }

    /// True when any stored point lies within `radius` of `p`.
    pub fn any_within(&self, p: &Point3, radius: f64) -> bool {
        !self.collect_within(p, radius).is_empty()
    }

    /// Distance to the nearest stored point within `radius`, or `None`.
    pub fn nearest_within(&self, p: &Point3, radius: f64) -> Option<f64> {
        self.collect_within(p, radius)
            .into_iter()
            .map(|(_, d)| d)
            .fold(None, |acc, d| Some(acc.map_or(d, |a: f64| a.min(d))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::TriMesh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_mesh(rng: &mut ChaCha12Rng, tris: usize) -> TriMesh {
        let mut vertices = Vec::new();
        let mut facets = Vec::new();
        while facets.len() < tris {
            let base = Vec3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            );
            let corners: Vec<Point3> = (0..3)
                .map(|_| {
                    Point3::from(
                        base + Vec3::new(
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                        ),
                    )
                })
                .collect();
            let area =
                0.5 * (corners[1] - corners[0]).cross(&(corners[2] - corners[0])).norm();
            if area < 1e-3 {
                continue;
            }
            let v0 = vertices.len() as u32;
            vertices.extend(corners);
            facets.push([v0, v0 + 1, v0 + 2]);
        }
        TriMesh::new(vertices, facets).unwrap()
    }

    fn brute_force_first_hit(mesh: &TriMesh, origin: &Point3, dir: &Vec3) -> Option<RayHit> {
        let mut best: Option<RayHit> = None;
        for f in 0..mesh.facet_count() {
            if let Some(t) = ray_triangle_intersect(origin, dir, &mesh.facet_vertices(f)) {
                if best.is_none_or(|h| t < h.t) {
                    best = Some(RayHit { t, facet: f });
                }
            }
        }
        best
    }

    #[test]
    fn bvh_matches_brute_force_on_random_scenes() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..5 {
            let mesh = random_mesh(&mut rng, 120);
            let bvh = MeshBvh::build(&mesh);
            for _ in 0..200 {
                let origin = Point3::new(
                    rng.random_range(-8.0..8.0),
                    rng.random_range(-8.0..8.0),
                    rng.random_range(-8.0..8.0),
                );
                let dir = Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                if dir.norm() < 1e-3 {
                    continue;
                }
                let got = bvh.first_hit(&origin, &dir);
                let want = brute_force_first_hit(&mesh, &origin, &dir);
                match (got, want) {
                    (Some(g), Some(w)) => {
                        assert!(
                            (g.t - w.t).abs() < 1e-9 * (1.0 + w.t),
                            "t mismatch: {g:?} vs {w:?}"
                        );
                    }
                    (None, None) => {}
                    other => panic!("hit mismatch: {other:?}"),
                }
            }
        }
    }

    #[test]
    fn bvh_axis_parallel_rays() {
        let mesh = TriMesh::new(
            vec![
                Point3::new(-1.0, -1.0, 3.0),
                Point3::new(1.0, -1.0, 3.0),
                Point3::new(0.0, 1.0, 3.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let bvh = MeshBvh::build(&mesh);
        let hit = bvh.first_hit(&Point3::origin(), &Vec3::z()).unwrap();
        assert!((hit.t - 3.0).abs() < 1e-12);
        assert_eq!(bvh.first_hit(&Point3::origin(), &Vec3::x()), None);
    }

    #[test]
    fn segment_endpoint_on_surface_does_not_block() {
        let mesh = TriMesh::new(
            vec![
                Point3::new(-5.0, -5.0, 1.0),
                Point3::new(5.0, -5.0, 1.0),
                Point3::new(0.0, 5.0, 1.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let bvh = MeshBvh::build(&mesh);
        // Endpoint exactly on the triangle: unobstructed.
        assert!(!bvh.segment_blocked(&Point3::origin(), &Point3::new(0.0, 0.0, 1.0)));
        // Segment passing through it: blocked.
        assert!(bvh.segment_blocked(&Point3::origin(), &Point3::new(0.0, 0.0, 2.0)));
    }

    #[test]
    fn grid_matches_brute_force_radius_query() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let points: Vec<Point3> = (0..500)
            .map(|_| {
                Point3::new(
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                )
            })
            .collect();
        let grid = PointGrid::build(&points, 0.3);
        for _ in 0..100 {
            let q = Point3::new(
                rng.random_range(-2.5..2.5),
                rng.random_range(-2.5..2.5),
                rng.random_range(-2.5..2.5),
            );
            let r = rng.random_range(0.01..1.0);
            let mut got = Vec::new();
            grid.for_each_within(&q, r, |i, _| got.push(i));
            let want: Vec<u32> = points
                .iter()
                .enumerate()
                .filter(|(_, p)| (*p - q).norm() <= r)
                .map(|(i, _)| i as u32)
                .collect();
            assert_eq!(got, want);
            assert_eq!(grid.any_within(&q, r), !want.is_empty());
        }
    }
}
