use super::{Point3, Sim3Transform};
use crate::{Error, Result};

/// Triangle mesh with per-facet center and area cached at construction.
///
/// Indices are validated and every facet must have strictly positive area;
/// the cached values are what all downstream consumers (visibility casting,
/// facet scoring) read, so they are never recomputed after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Point3>,
    facets: Vec<[u32; 3]>,
    centers: Vec<Point3>,
    areas: Vec<f64>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3>, facets: Vec<[u32; 3]>) -> Result<Self> {
        for (i, v) in vertices.iter().enumerate() {
            if !v.coords.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidMesh(format!("vertex {i} has non-finite coordinate")));
            }
        }
        let n = vertices.len() as u32;
        let mut centers = Vec::with_capacity(facets.len());
        let mut areas = Vec::with_capacity(facets.len());
        for (i, f) in facets.iter().enumerate() {
            if f.iter().any(|&idx| idx >= n) {
                return Err(Error::InvalidMesh(format!(
                    "facet {i} references vertex out of range (indices {f:?}, {n} vertices)"
                )));
            }
            let [a, b, c] = [
                vertices[f[0] as usize],
                vertices[f[1] as usize],
                vertices[f[2] as usize],
            ];
            let area = 0.5 * (b - a).cross(&(c - a)).norm();
            if !(area > 0.0) {
                return Err(Error::InvalidMesh(format!("facet {i} is degenerate (area {area})")));
            }
            centers.push(Point3::from((a.coords + b.coords + c.coords) / 3.0));
            areas.push(area);
        }
        Ok(Self { vertices, facets, centers, areas })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn facets(&self) -> &[[u32; 3]] {
        &self.facets
    }

    pub fn facet_count(&self) -> usize {
        self.facets.len()
    }

    /// Corner positions of facet `i`.
    pub fn facet_vertices(&self, i: usize) -> [Point3; 3] {
        let f = self.facets[i];
        [
            self.vertices[f[0] as usize],
            self.vertices[f[1] as usize],
            self.vertices[f[2] as usize],
        ]
    }

    pub fn facet_center(&self, i: usize) -> Point3 {
        self.centers[i]
    }

    pub fn facet_area(&self, i: usize) -> f64 {
        self.areas[i]
    }

    pub fn centers(&self) -> &[Point3] {
        &self.centers
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Mesh with every vertex mapped through `t`. Facet connectivity is
    /// unchanged; centers and areas are recomputed from the new vertices.
    pub fn transformed(&self, t: &Sim3Transform) -> Self {
        let vertices = self.vertices.iter().map(|v| super::apply_sim3(t, v)).collect();
        Self::new(vertices, self.facets.clone())
            .expect("similarity transform preserves mesh validity")
    }
}

/// Point cloud with one RGB color per point and, for laser scans, the
/// distance from the scanner origin at capture time (used for
/// distance-dependent measurement uncertainty).
#[derive(Debug, Clone, PartialEq)]
pub struct ColoredPointCloud {
    points: Vec<Point3>,
    colors: Vec<[u8; 3]>,
    origin_distance: Option<Vec<f64>>,
}

impl ColoredPointCloud {
    pub fn new(
        points: Vec<Point3>,
        colors: Vec<[u8; 3]>,
        origin_distance: Option<Vec<f64>>,
    ) -> Result<Self> {
        if colors.len() != points.len() {
            return Err(Error::InvalidArgument(format!(
                "{} colors for {} points",
                colors.len(),
                points.len()
            )));
        }
        if let Some(d) = &origin_distance {
            if d.len() != points.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} origin distances for {} points",
                    d.len(),
                    points.len()
                )));
            }
        }
        Ok(Self { points, colors, origin_distance })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn colors(&self) -> &[[u8; 3]] {
        &self.colors
    }

    pub fn origin_distance(&self) -> Option<&[f64]> {
        self.origin_distance.as_deref()
    }

    /// Cloud with every point mapped through `t`; colors and origin
    /// distances are carried over unchanged.
    pub fn transformed(&self, t: &Sim3Transform) -> Self {
        Self {
            points: self.points.iter().map(|p| super::apply_sim3(t, p)).collect(),
            colors: self.colors.clone(),
            origin_distance: self.origin_distance.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Rotation3, Vec3};
    use approx::assert_relative_eq;

    fn unit_right_triangle() -> TriMesh {
        TriMesh::new(
            vec![
                Point3::origin(),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn caches_center_and_area() {
        let mesh = unit_right_triangle();
        assert_relative_eq!(mesh.facet_area(0), 0.5, epsilon = 1e-15);
        assert_relative_eq!(
            mesh.facet_center(0),
            Point3::new(1.0 / 3.0, 1.0 / 3.0, 0.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn rejects_out_of_range_index() {
        let err = TriMesh::new(vec![Point3::origin()], vec![[0, 0, 3]]).unwrap_err();
        assert!(matches!(err, Error::InvalidMesh(_)), "got {err:?}");
    }

    #[test]
    fn rejects_degenerate_facet() {
        let err = TriMesh::new(
            vec![
                Point3::origin(),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(2.0, 0.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidMesh(_)), "got {err:?}");
    }

    #[test]
    fn transform_scales_area_quadratically() {
        let mesh = unit_right_triangle();
        let t = Sim3Transform::new(3.0, Rotation3::identity(), Vec3::new(1.0, 2.0, 3.0));
        let scaled = mesh.transformed(&t);
        assert_relative_eq!(scaled.facet_area(0), 0.5 * 9.0, epsilon = 1e-12);
    }

    #[test]
    fn cloud_validates_lengths() {
        let pts = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0)];
        assert!(ColoredPointCloud::new(pts.clone(), vec![[0, 0, 0]], None).is_err());
        assert!(
            ColoredPointCloud::new(pts.clone(), vec![[0, 0, 0]; 2], Some(vec![1.0])).is_err()
        );
        assert!(ColoredPointCloud::new(pts, vec![[0, 0, 0]; 2], Some(vec![1.0, 2.0])).is_ok());
    }
}
