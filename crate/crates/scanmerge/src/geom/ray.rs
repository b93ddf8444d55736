use super::{Point3, Vec3};

/// Rays shorter than this do not count as hits, so a ray starting exactly on
/// a surface does not intersect it.
pub const RAY_MIN_T: f64 = 1e-9;

/// Determinants smaller than this mean the ray is parallel to the triangle
/// plane and cannot produce a stable intersection.
const PARALLEL_EPS: f64 = 1e-12;

/// Ray/triangle intersection (Moeller-Trumbore). Returns the ray parameter
/// `t` of the hit, with `t > RAY_MIN_T`, or `None` when the ray misses, runs
/// parallel to the plane, or would hit behind the origin. Edge and vertex
/// hits count as hits. `direction` need not be normalized; `t` is in units
/// of its length.
pub fn ray_triangle_intersect(
    origin: &Point3,
    direction: &Vec3,
    triangle: &[Point3; 3],
) -> Option<f64> {
    let e1 = triangle[1] - triangle[0];
    let e2 = triangle[2] - triangle[0];
    let pvec = direction.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < PARALLEL_EPS {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = origin - triangle[0];
    let u = tvec.dot(&pvec) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(&e1);
    let v = direction.dot(&qvec) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&qvec) * inv_det;
    (t > RAY_MIN_T).then_some(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn tri() -> [Point3; 3] {
        [
            Point3::new(0.0, 0.0, 2.0),
            Point3::new(1.0, 0.0, 2.0),
            Point3::new(0.0, 1.0, 2.0),
        ]
    }

    #[test]
    fn hits_interior() {
        let t = ray_triangle_intersect(
            &Point3::origin(),
            &Vec3::new(0.2, 0.2, 1.0),
            &tri(),
        );
        assert_relative_eq!(t.unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn misses_outside() {
        assert_eq!(
            ray_triangle_intersect(&Point3::origin(), &Vec3::new(2.0, 2.0, 1.0), &tri()),
            None
        );
    }

    #[test]
    fn parallel_ray_misses() {
        assert_eq!(
            ray_triangle_intersect(&Point3::origin(), &Vec3::new(1.0, 0.0, 0.0), &tri()),
            None
        );
    }

    #[test]
    fn behind_origin_misses() {
        assert_eq!(
            ray_triangle_intersect(&Point3::new(0.2, 0.2, 3.0), &Vec3::z(), &tri()),
            None
        );
    }

    #[test]
    fn edge_hit_counts() {
        let t = ray_triangle_intersect(&Point3::origin(), &Vec3::new(0.5, 0.0, 2.0), &tri());
        assert_relative_eq!(t.unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn origin_on_surface_does_not_self_hit() {
        let on_surface = Point3::new(0.2, 0.2, 2.0);
        assert_eq!(ray_triangle_intersect(&on_surface, &Vec3::z(), &tri()), None);
    }

    /// Independent check: intersect the ray with the triangle plane, then
    /// test containment with barycentric coordinates computed from dot
    /// products (no shared code with the implementation above).
    fn plane_barycentric_oracle(
        origin: &Point3,
        direction: &Vec3,
        tri: &[Point3; 3],
    ) -> Option<f64> {
        let n = (tri[1] - tri[0]).cross(&(tri[2] - tri[0]));
        let denom = n.dot(direction);
        if denom.abs() < 1e-12 {
            return None;
        }
        let t = n.dot(&(tri[0] - origin)) / denom;
        if t <= RAY_MIN_T {
            return None;
        }
        let p = origin + direction * t;
        let (v0, v1, v2) = (tri[1] - tri[0], tri[2] - tri[0], p - tri[0]);
        let (d00, d01, d11, d20, d21) = (
            v0.dot(&v0),
            v0.dot(&v1),
            v1.dot(&v1),
            v2.dot(&v0),
            v2.dot(&v1),
        );
        let denom_b = d00 * d11 - d01 * d01;
        let u = (d11 * d20 - d01 * d21) / denom_b;
        let v = (d00 * d21 - d01 * d20) / denom_b;
        (u >= 0.0 && v >= 0.0 && u + v <= 1.0).then_some(t)
    }

    proptest! {
        #[test]
        fn agrees_with_plane_barycentric_oracle(
            o in prop::array::uniform3(-3.0f64..3.0),
            d in prop::array::uniform3(-1.0f64..1.0),
            a in prop::array::uniform3(-2.0f64..2.0),
            b in prop::array::uniform3(-2.0f64..2.0),
            c in prop::array::uniform3(-2.0f64..2.0),
        ) {
            let dir = Vec3::from(d);
            prop_assume!(dir.norm() > 1e-3);
            let tri = [
                Point3::from(Vec3::from(a)),
                Point3::from(Vec3::from(b)),
                Point3::from(Vec3::from(c)),
            ];
            let area2 = (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).norm();
            prop_assume!(area2 > 1e-6);
            let origin = Point3::from(Vec3::from(o));
            let got = ray_triangle_intersect(&origin, &dir, &tri);
            let want = plane_barycentric_oracle(&origin, &dir, &tri);
            match (got, want) {
                (Some(t1), Some(t2)) => prop_assert!((t1 - t2).abs() < 1e-7 * (1.0 + t2.abs())),
                (None, None) => {}
                // Hits within a hair of an edge may disagree between the two
                // formulations; everything else must match.
                (got, want) => {
                    let t = got.or(want).unwrap();
                    let p = origin + dir * t;
                    let edge_dist = [
                        (tri[0], tri[1]),
                        (tri[1], tri[2]),
                        (tri[2], tri[0]),
                    ]
                    .iter()
                    .map(|(s, e)| {
                        let se = e - s;
                        let sp = p - s;
                        let h = (sp - se * (sp.dot(&se) / se.norm_squared())).norm();
                        h
                    })
                    .fold(f64::INFINITY, f64::min);
                    prop_assert!(edge_dist < 1e-6, "disagreement away from edges: {got:?} vs {want:?}");
                }
            }
        }
    }
}
