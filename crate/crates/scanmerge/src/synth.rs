//! Virtual view synthesis from colored laser scans.
//!
//! A scan is rendered into the six faces of a virtual cube camera centered
//! at the scanner: 90-degree pinhole views facing +X, -X, +Y, -Y, +Z, -Z.
//! Rendering is z-buffered point splatting followed by a bounded
//! nearest-neighbor hole fill. Depth discontinuities (where splatting mixes
//! foreground and background or the fill bridged a gap) are flagged by
//! [`depth_edge_mask`] so downstream matching can ignore those pixels.
//!
//! The synthesized views take part in feature matching against captured
//! photographs; [`matching_partners`] applies the standard gating (camera
//! within 5 m of the scanner and looking within 45 degrees of the face
//! axis), and [`select_aerial_views`] picks a small diverse set of aerial
//! views that see the scan.

use crate::geom::{CameraIntrinsics, CameraLabel, CameraView, ColoredPointCloud, Mat3, Point3, RigidPose, Vec3};
use crate::{Error, Result};

/// Default cube face resolution. Matching quality improves with resolution
/// (full-scale runs use 3840), but tests and examples stay fast at 512.
pub const DEFAULT_CUBE_RESOLUTION: u32 = 512;
/// Default hole-fill search radius in pixels.
pub const DEFAULT_FILL_RADIUS: u32 = 3;
/// Default depth-edge gradient threshold in meters.
pub const DEFAULT_EDGE_THRESHOLD_M: f64 = 0.1;
/// Captured cameras farther than this from the scanner are not matching
/// partners for its synthesized views.
pub const DEFAULT_PARTNER_DIST_M: f64 = 5.0;
/// Captured cameras looking more than this away from a face axis are not
/// matching partners (radians).
pub const DEFAULT_PARTNER_ANGLE_RAD: f64 = std::f64::consts::FRAC_PI_4;

/// Cube face order and axes: rows are (right, down, forward) in the scan
/// frame, chosen so every face rotation is a proper rotation.
const CUBE_FACES: [(&str, [f64; 3], [f64; 3], [f64; 3]); 6] = [
    ("+x", [0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]),
    ("-x", [0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]),
    ("+y", [1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]),
    ("-y", [1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]),
    ("+z", [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]),
    ("-z", [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]),
];

/// Names of the cube faces, in the order [`build_cube_rig`] returns them.
pub fn cube_face_names() -> [&'static str; 6] {
    let mut names = [""; 6];
    for (i, (name, ..)) in CUBE_FACES.iter().enumerate() {
        names[i] = name;
    }
    names
}

/// Six 90-degree virtual views centered at `center`, facing +X, -X, +Y, -Y,
/// +Z, -Z of the frame the scan lives in. Square images with
/// `fx = fy = cx = cy = resolution / 2`, so each face exactly spans its
/// quarter of the sphere.
pub fn build_cube_rig(center: Point3, resolution: u32) -> Result<Vec<CameraView>> {
    if resolution == 0 {
        return Err(Error::InvalidArgument("cube resolution must be nonzero".into()));
    }
    let f = resolution as f64 / 2.0;
    let intrinsics = CameraIntrinsics::new(f, f, f, f, resolution, resolution)?;
    Ok(CUBE_FACES
        .iter()
        .map(|(_, right, down, fwd)| {
            let m = Mat3::from_rows(&[
                Vec3::from(*right).transpose(),
                Vec3::from(*down).transpose(),
                Vec3::from(*fwd).transpose(),
            ]);
            let rotation = nalgebra::Rotation3::from_matrix_unchecked(m);
            let translation = -(rotation * center.coords);
            CameraView::new(intrinsics, RigidPose::new(rotation, translation), CameraLabel::Virtual)
        })
        .collect())
}

/// A rendered view: per-pixel RGB and depth, plus the camera it was rendered
/// with. Depth is the camera-frame z of the splatted point; unfilled pixels
/// carry positive infinity and a black color.
#[derive(Debug, Clone)]
pub struct SynthImage {
    pub camera: CameraView,
    rgb: Vec<[u8; 3]>,
    depth: Vec<f64>,
    mask: Option<Vec<bool>>,
}

impl SynthImage {
    pub fn width(&self) -> u32 {
        self.camera.intrinsics.width
    }

    pub fn height(&self) -> u32 {
        self.camera.intrinsics.height
    }

    pub fn rgb(&self) -> &[[u8; 3]] {
        &self.rgb
    }

    pub fn depth(&self) -> &[f64] {
        &self.depth
    }

    /// Depth-edge mask, once attached via [`SynthImage::attach_edge_mask`].
    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    fn index(&self, u: u32, v: u32) -> usize {
        v as usize * self.width() as usize + u as usize
    }

    pub fn is_filled(&self, u: u32, v: u32) -> bool {
        self.depth[self.index(u, v)].is_finite()
    }

    /// Computes and stores the depth-edge mask; [`pixel_to_point`] then
    /// refuses masked pixels.
    pub fn attach_edge_mask(&mut self, grad_thresh_m: f64) -> Result<()> {
        self.mask = Some(depth_edge_mask(self, grad_thresh_m)?);
        Ok(())
    }
}

/// Renders a cloud into a camera by z-buffered point splatting, then fills
/// holes from the nearest splatted pixel within `fill_radius` (Euclidean,
/// so an isolated splat grows into a disc). Ties on depth keep the
/// lowest-index point; ties on fill distance keep the first donor in
/// row-major window order.
///
/// Errors with [`Error::DisjointView`] when no point projects inside the
/// image.
pub fn synthesize_view(
    cloud: &ColoredPointCloud,
    camera: &CameraView,
    fill_radius: u32,
) -> Result<SynthImage> {
    let intr = &camera.intrinsics;
    let (w, h) = (intr.width as usize, intr.height as usize);
    let mut rgb = vec![[0u8; 3]; w * h];
    let mut depth = vec![f64::INFINITY; w * h];
    let mut any = false;
    for (i, p) in cloud.points().iter().enumerate() {
        let p_cam = camera.pose.transform_point(p);
        let Some(px) = intr.project(&p_cam.coords) else { continue };
        if !intr.contains(px) {
            continue;
        }
        let (u, v) = (px[0] as usize, px[1] as usize);
        let idx = v * w + u;
        if p_cam.z < depth[idx] {
            depth[idx] = p_cam.z;
            rgb[idx] = cloud.colors()[i];
            any = true;
        }
    }
    if !any {
        return Err(Error::DisjointView);
    }

    if fill_radius > 0 {
        let seeds = depth.clone();
        let r = fill_radius as i64;
        let r2 = r * r;
        for v in 0..h as i64 {
            for u in 0..w as i64 {
                let idx = (v * w as i64 + u) as usize;
                if seeds[idx].is_finite() {
                    continue;
                }
                let mut best: Option<(i64, usize)> = None;
                for dv in -r..=r {
                    let nv = v + dv;
                    if nv < 0 || nv >= h as i64 {
                        continue;
                    }
                    for du in -r..=r {
                        let nu = u + du;
                        if nu < 0 || nu >= w as i64 {
                            continue;
                        }
                        let nidx = (nv * w as i64 + nu) as usize;
                        if !seeds[nidx].is_finite() {
                            continue;
                        }
                        let d2 = du * du + dv * dv;
                        if d2 <= r2 && best.is_none_or(|(bd, _)| d2 < bd) {
                            best = Some((d2, nidx));
                        }
                    }
                }
                if let Some((_, donor)) = best {
                    depth[idx] = seeds[donor];
                    rgb[idx] = rgb[donor];
                }
            }
        }
    }

    Ok(SynthImage { camera: camera.clone(), rgb, depth, mask: None })
}

/// Flags pixels whose depth cannot be trusted for matching: unfilled pixels,
/// pixels whose depth jumps by more than `grad_thresh_m` against any of
/// their 8 neighbors (an unfilled neighbor counts as an infinite jump), and
/// everything within Chebyshev distance 2 of such a pixel.
///
/// Raising the threshold never masks more pixels.
pub fn depth_edge_mask(img: &SynthImage, grad_thresh_m: f64) -> Result<Vec<bool>> {
    if !(grad_thresh_m > 0.0 && grad_thresh_m.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "gradient threshold must be positive, got {grad_thresh_m}"
        )));
    }
    let (w, h) = (img.width() as i64, img.height() as i64);
    let depth = img.depth();
    let mut edges = vec![false; depth.len()];
    for v in 0..h {
        for u in 0..w {
            let idx = (v * w + u) as usize;
            let d = depth[idx];
            if !d.is_finite() {
                edges[idx] = true;
                continue;
            }
            'neighbors: for dv in -1..=1i64 {
                for du in -1..=1i64 {
                    if du == 0 && dv == 0 {
                        continue;
                    }
                    let (nu, nv) = (u + du, v + dv);
                    if nu < 0 || nu >= w || nv < 0 || nv >= h {
                        continue;
                    }
                    let nd = depth[(nv * w + nu) as usize];
                    // |d - inf| = inf: holes mark their border as edges.
                    if (d - nd).abs() > grad_thresh_m {
                        edges[idx] = true;
                        break 'neighbors;
                    }
                }
            }
        }
    }
    // Dilate by 2 pixels (Chebyshev) so matching stays clear of the jump.
    let mut mask = vec![false; depth.len()];
    for v in 0..h {
        for u in 0..w {
            if !edges[(v * w + u) as usize] {
                continue;
            }
            for dv in -2..=2i64 {
                for du in -2..=2i64 {
                    let (nu, nv) = (u + du, v + dv);
                    if nu >= 0 && nu < w && nv >= 0 && nv < h {
                        mask[(nv * w + nu) as usize] = true;
                    }
                }
            }
        }
    }
    Ok(mask)
}

/// Back-projects the center of pixel `(u, v)` at its stored depth into the
/// frame the image was rendered in.
///
/// Errors: out of bounds (invalid argument), unfilled pixel
/// ([`Error::NoDepth`]), or pixel flagged by an attached edge mask
/// ([`Error::UnreliableDepth`]).
pub fn pixel_to_point(img: &SynthImage, u: u32, v: u32) -> Result<Point3> {
    if u >= img.width() || v >= img.height() {
        return Err(Error::InvalidArgument(format!(
            "pixel ({u}, {v}) outside {} x {} image",
            img.width(),
            img.height()
        )));
    }
    let idx = img.index(u, v);
    let d = img.depth[idx];
    if !d.is_finite() {
        return Err(Error::NoDepth { u, v });
    }
    if let Some(mask) = &img.mask {
        if mask[idx] {
            return Err(Error::UnreliableDepth { u, v });
        }
    }
    Ok(img.camera.unproject(u as f64 + 0.5, v as f64 + 0.5, d))
}

/// Captured views that qualify as matching partners for a synthesized view:
/// camera center within `max_dist_m` of the virtual camera's center and
/// forward axis within `max_angle_rad` of the virtual view's forward axis.
/// Virtual views never partner with each other.
pub fn matching_partners(
    virtual_view: &CameraView,
    captured: &[CameraView],
    max_dist_m: f64,
    max_angle_rad: f64,
) -> Vec<usize> {
    let center = virtual_view.center();
    let fwd = virtual_view.forward();
    captured
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            c.label != CameraLabel::Virtual
                && (c.center() - center).norm() <= max_dist_m
                && c.forward().dot(&fwd).clamp(-1.0, 1.0).acos() <= max_angle_rad
        })
        .map(|(i, _)| i)
        .collect()
}

/// Picks `count` aerial views to pair with a scan: the first maximizes how
/// many scan points project into the view; each subsequent pick maximizes
/// (points not yet seen by any pick) * (smallest forward-axis angle to the
/// picks so far), favoring coverage from genuinely new directions. Ties go
/// to the lowest candidate index.
///
/// Errors when `count` exceeds the candidate count, or with
/// [`Error::DisjointView`] when no candidate sees any point.
pub fn select_aerial_views(
    scan: &ColoredPointCloud,
    candidates: &[CameraView],
    count: usize,
) -> Result<Vec<usize>> {
    if count == 0 || count > candidates.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot pick {count} of {} candidate views",
            candidates.len()
        )));
    }
    // visibility[c] = bitmap over scan points seen by candidate c.
    let visibility: Vec<Vec<bool>> = candidates
        .iter()
        .map(|cam| {
            scan.points()
                .iter()
                .map(|p| {
                    let p_cam = cam.pose.transform_point(p);
                    cam.intrinsics
                        .project(&p_cam.coords)
                        .is_some_and(|px| cam.intrinsics.contains(px))
                })
                .collect()
        })
        .collect();
    let counts: Vec<usize> = visibility.iter().map(|v| v.iter().filter(|&&b| b).count()).collect();

    let first = (0..candidates.len())
        .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
        .expect("candidates verified nonempty");
    if counts[first] == 0 {
        return Err(Error::DisjointView);
    }
    let mut chosen = vec![first];
    let mut seen = visibility[first].clone();
    while chosen.len() < count {
        let mut best: Option<(f64, usize)> = None;
        for c in 0..candidates.len() {
            if chosen.contains(&c) {
                continue;
            }
            let new_points = visibility[c]
                .iter()
                .zip(&seen)
                .filter(|&(&vis, &s)| vis && !s)
                .count();
            let min_angle = chosen
                .iter()
                .map(|&j| {
                    candidates[c]
                        .forward()
                        .dot(&candidates[j].forward())
                        .clamp(-1.0, 1.0)
                        .acos()
                })
                .fold(f64::INFINITY, f64::min);
            let score = new_points as f64 * min_angle;
            if best.is_none_or(|(bs, _)| score > bs) {
                best = Some((score, c));
            }
        }
        let (_, pick) = best.expect("count <= candidates.len() leaves candidates");
        for (s, &vis) in seen.iter_mut().zip(&visibility[pick]) {
            *s |= vis;
        }
        chosen.push(pick);
    }
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn grid_wall_cloud(z: f64, half: f64, n: usize) -> ColoredPointCloud {
        let mut points = Vec::new();
        let mut colors = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let x = -half + 2.0 * half * (i as f64 + 0.5) / n as f64;
                let y = -half + 2.0 * half * (j as f64 + 0.5) / n as f64;
                points.push(Point3::new(x, y, z));
                colors.push([(i % 256) as u8, (j % 256) as u8, 128]);
            }
        }
        ColoredPointCloud::new(points, colors, None).unwrap()
    }

    #[test]
    fn cube_rig_axes_are_orthogonal_pairs() {
        let rig = build_cube_rig(Point3::new(1.0, 2.0, 3.0), 64).unwrap();
        assert_eq!(rig.len(), 6);
        for cam in &rig {
            assert_relative_eq!(cam.pose.rotation.matrix().determinant(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(cam.center(), Point3::new(1.0, 2.0, 3.0), epsilon = 1e-12);
            assert_eq!(cam.label, CameraLabel::Virtual);
        }
        for i in 0..6 {
            for j in (i + 1)..6 {
                let d = rig[i].forward().dot(&rig[j].forward());
                assert!(
                    (d.abs() < 1e-12) || (d + 1.0).abs() < 1e-12,
                    "faces {i},{j} dot = {d}"
                );
            }
        }
    }

    #[test]
    fn point_ahead_projects_to_center_pixel_of_plus_z_face() {
        let center = Point3::new(0.5, -1.0, 2.0);
        let rig = build_cube_rig(center, 64).unwrap();
        let plus_z = &rig[4];
        let px = crate::geom::project_point(plus_z, &Point3::new(0.5, -1.0, 5.0)).unwrap();
        assert_relative_eq!(px[0], 32.0, epsilon = 1e-12);
        assert_relative_eq!(px[1], 32.0, epsilon = 1e-12);
    }

    #[test]
    fn zbuffer_keeps_nearest_point() {
        let cloud = ColoredPointCloud::new(
            vec![Point3::new(0.0, 0.0, 4.0), Point3::new(0.0, 0.0, 2.0)],
            vec![[255, 0, 0], [0, 255, 0]],
            None,
        )
        .unwrap();
        let rig = build_cube_rig(Point3::origin(), 8).unwrap();
        let img = synthesize_view(&cloud, &rig[4], 0).unwrap();
        assert_eq!(img.rgb()[img.index(4, 4)], [0, 255, 0]);
        assert_relative_eq!(img.depth()[img.index(4, 4)], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn disjoint_cloud_is_an_error() {
        let cloud = ColoredPointCloud::new(
            vec![Point3::new(0.0, 0.0, -3.0)],
            vec![[1, 2, 3]],
            None,
        )
        .unwrap();
        let rig = build_cube_rig(Point3::origin(), 8).unwrap();
        assert!(matches!(synthesize_view(&cloud, &rig[4], 0), Err(Error::DisjointView)));
    }

    #[test]
    fn single_splat_fills_a_disc() {
        let cloud = ColoredPointCloud::new(
            vec![Point3::new(0.0, 0.0, 2.0)],
            vec![[9, 9, 9]],
            None,
        )
        .unwrap();
        let rig = build_cube_rig(Point3::origin(), 32).unwrap();
        let r = 3u32;
        let img = synthesize_view(&cloud, &rig[4], r).unwrap();
        let seed = (16i64, 16i64);
        for v in 0..32i64 {
            for u in 0..32i64 {
                let filled = img.is_filled(u as u32, v as u32);
                let d2 = (u - seed.0).pow(2) + (v - seed.1).pow(2);
                assert_eq!(filled, d2 <= (r * r) as i64, "pixel ({u},{v}) d2={d2}");
            }
        }
    }

    #[test]
    fn roundtrip_recovers_splatted_points_within_pixel_spread() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let n = 200;
        let points: Vec<Point3> = (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-0.8..0.8),
                    rng.random_range(-0.8..0.8),
                    rng.random_range(1.0..6.0),
                )
            })
            .collect();
        let colors = vec![[7, 7, 7]; n];
        let cloud = ColoredPointCloud::new(points.clone(), colors, None).unwrap();
        let res = 256u32;
        let rig = build_cube_rig(Point3::origin(), res).unwrap();
        let img = synthesize_view(&cloud, &rig[4], 0).unwrap();
        let f = res as f64 / 2.0;
        let mut checked = 0;
        for p in &points {
            let px = crate::geom::project_point(&rig[4], p).unwrap();
            let (u, v) = (px[0] as u32, px[1] as u32);
            if !img.is_filled(u, v) {
                continue;
            }
            let depth = img.depth()[img.index(u, v)];
            if (depth - p.z).abs() > 1e-12 {
                continue; // occluded by a nearer splat in the same pixel
            }
            let back = pixel_to_point(&img, u, v).unwrap();
            let bound = p.z / f * (0.5f64 * 2.0f64.sqrt()) + 1e-12;
            assert!(
                (back - p).norm() <= bound,
                "recovered {back:?} vs {p:?}, bound {bound}"
            );
            checked += 1;
        }
        assert!(checked > 100, "only {checked} points checked");
    }

    #[test]
    fn flat_wall_has_no_masked_interior() {
        let cloud = grid_wall_cloud(2.0, 2.5, 200);
        let rig = build_cube_rig(Point3::origin(), 64).unwrap();
        let mut img = synthesize_view(&cloud, &rig[4], 3).unwrap();
        img.attach_edge_mask(0.05).unwrap();
        let mask = img.mask().unwrap();
        assert!(mask.iter().all(|&m| !m), "wall at constant depth must not mask anything");
    }

    #[test]
    fn depth_step_is_masked_and_dilated() {
        // Left half at z=2, right half at z=4: a vertical depth edge.
        let mut points = Vec::new();
        let mut colors = Vec::new();
        for side in 0..2 {
            let z = if side == 0 { 2.0 } else { 4.0 };
            for i in 0..400 {
                for j in 0..800 {
                    let x = if side == 0 {
                        -2.4 * z / 2.0 + 2.4 * z / 2.0 * (i as f64 + 0.5) / 400.0
                    } else {
                        2.4 * z / 2.0 * (i as f64 + 0.5) / 400.0
                    };
                    let y = -1.2 * z + 2.4 * z * (j as f64 + 0.5) / 800.0;
                    points.push(Point3::new(x, y, z));
                    colors.push([100, 100, 100]);
                }
            }
        }
        let cloud = ColoredPointCloud::new(points, colors, None).unwrap();
        let rig = build_cube_rig(Point3::origin(), 64).unwrap();
        let mut img = synthesize_view(&cloud, &rig[4], 3).unwrap();
        img.attach_edge_mask(0.1).unwrap();
        let mask = img.mask().unwrap();
        let w = img.width() as usize;
        // The jump sits at u = 32; pixels within the dilation band around it
        // must be masked, pixels well away from it must not.
        for v in 10..54 {
            for u in 30..35 {
                assert!(mask[v * w + u], "expected mask at ({u},{v})");
            }
            for u in [10, 54] {
                assert!(!mask[v * w + u], "unexpected mask at ({u},{v})");
            }
        }
        // Raising the threshold only unmasks.
        let coarse = depth_edge_mask(&img, 10.0).unwrap();
        for (f, c) in img.mask().unwrap().iter().zip(&coarse) {
            assert!(*f || !*c, "coarser threshold masked a pixel the finer one did not");
        }
    }

    #[test]
    fn pixel_to_point_error_cases() {
        let cloud = ColoredPointCloud::new(
            vec![Point3::new(0.0, 0.0, 2.0)],
            vec![[9, 9, 9]],
            None,
        )
        .unwrap();
        let rig = build_cube_rig(Point3::origin(), 32).unwrap();
        let mut img = synthesize_view(&cloud, &rig[4], 0).unwrap();
        assert!(matches!(pixel_to_point(&img, 32, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(pixel_to_point(&img, 0, 0), Err(Error::NoDepth { .. })));
        assert!(pixel_to_point(&img, 16, 16).is_ok());
        img.attach_edge_mask(0.1).unwrap();
        // A lone splat is surrounded by holes, so it is masked.
        assert!(matches!(pixel_to_point(&img, 16, 16), Err(Error::UnreliableDepth { .. })));
    }

    #[test]
    fn matching_partners_gate_by_distance_and_angle() {
        let rig = build_cube_rig(Point3::origin(), 64).unwrap();
        let intr = CameraIntrinsics::new(300.0, 300.0, 320.0, 240.0, 640, 480).unwrap();
        // Camera at `pos`, looking along +Z rotated by `yaw` about Y.
        let make = |pos: Vec3, yaw: f64, label| {
            let r = nalgebra::Rotation3::from_euler_angles(0.0, yaw, 0.0).inverse();
            CameraView::new(intr, RigidPose::new(r, -(r * pos)), label)
        };
        let captured = vec![
            make(Vec3::new(1.0, 0.0, 0.0), 0.0, CameraLabel::CapturedGround), // close, aligned
            make(Vec3::new(20.0, 0.0, 0.0), 0.0, CameraLabel::CapturedGround), // too far
            make(Vec3::new(1.0, 0.0, 0.0), 1.5, CameraLabel::CapturedGround), // too rotated
            make(Vec3::new(1.0, 0.0, 0.0), 0.0, CameraLabel::Virtual),        // never partners
        ];
        let partners = matching_partners(
            &rig[4],
            &captured,
            DEFAULT_PARTNER_DIST_M,
            DEFAULT_PARTNER_ANGLE_RAD,
        );
        assert_eq!(partners, vec![0]);
    }

    #[test]
    fn aerial_selection_prefers_coverage_then_diversity() {
        // Points 0..3 sit on the +Z axis, point 4 on the +X axis, so the
        // cube faces see disjoint subsets.
        let cloud = ColoredPointCloud::new(
            vec![
                Point3::new(0.0, 0.0, 5.0),
                Point3::new(0.1, 0.0, 5.0),
                Point3::new(0.0, 0.1, 5.0),
                Point3::new(0.1, 0.1, 5.0),
                Point3::new(5.0, 0.0, 0.0),
            ],
            vec![[1, 1, 1]; 5],
            None,
        )
        .unwrap();
        let rig = build_cube_rig(Point3::origin(), 64).unwrap();
        // Candidate 2 repeats candidate 0 with a small yaw: it still sees
        // the four +Z points, but they are no longer new after pick 0.
        let yawed = RigidPose::new(
            nalgebra::Rotation3::from_euler_angles(0.0, 0.1, 0.0) * rig[4].pose.rotation,
            rig[4].pose.translation,
        );
        let candidates = vec![
            rig[4].clone(),
            rig[0].clone(),
            CameraView::new(rig[4].intrinsics, yawed, CameraLabel::CapturedAerial),
        ];
        let picks = select_aerial_views(&cloud, &candidates, 2).unwrap();
        // Pick 0 sees 4 points; pick 1 must be the +X face (1 new point at
        // 90 degrees beats 0 new points at any angle).
        assert_eq!(picks, vec![0, 1]);
    }

    #[test]
    fn aerial_selection_fails_when_nothing_is_visible() {
        let cloud = grid_wall_cloud(-5.0, 1.0, 10);
        let rig = build_cube_rig(Point3::origin(), 32).unwrap();
        let candidates = vec![rig[4].clone()];
        assert!(matches!(
            select_aerial_views(&cloud, &candidates, 1),
            Err(Error::DisjointView)
        ));
    }
}
