//! Synthetic-scene generation and measurement simulation.
//!
//! Builds a courtyard-style scene with known ground truth for every pipeline
//! stage: a triangle mesh whose facet density varies per wall (coarse facets
//! stand in for low-texture surfaces that image matching handles poorly), a
//! candidate-station grid, posed cameras, surface points standing in for an
//! image-based sparse reconstruction, spherical-sweep laser scans, and
//! noisy/outlier-injected correspondence sets with inlier labels.
//!
//! Frames: the mesh, stations, and scans live in the metric world frame; the
//! cameras and points live in the reconstruction frame, which differs from
//! the metric frame by the pure scale `sfm_scale` (identity rotation and
//! translation, so ground truth is directly comparable after solves). The
//! simulated image block additionally carries a smooth drift field away from
//! the truth, like a real image-only reconstruction: image observations,
//! match positions, and the reconstruction side of reference pairs agree
//! with the drifted block, while scan geometry stays exact. All randomness
//! comes from one seed fanned out over numbered ChaCha streams, so every
//! product is bit-identical across runs and machines.

use crate::geom::{
    CameraIntrinsics, CameraLabel, CameraView, ColoredPointCloud, Point3, RigidPose, Rotation3,
    Sim3Transform, TriMesh, Vec3,
};
use crate::merge::Observation;
use crate::planner::PotentialLocation;
use crate::register::{Channel, Correspondence};
use crate::spatial::MeshBvh;
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Scene layout, sampling densities, and noise model. All lengths are
/// meters, all angles degrees; the defaults describe a 10 x 10 x 4 m
/// two-room courtyard with a doorway in the dividing wall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    /// Outer box extents (x, y, z).
    pub extent_m: [f64; 3],
    /// Y position of the dividing wall.
    pub inner_wall_y_m: f64,
    /// X range of the doorway through the dividing wall.
    pub door_x_m: [f64; 2],
    /// Doorway height.
    pub door_height_m: f64,
    /// Whether the box gets a ceiling; open-top scenes let aerial cameras
    /// see inside.
    pub ceiling: bool,
    /// Triangulation cell edge at density multiplier 1.
    pub base_cell_m: f64,
    /// Per-wall linear density multipliers keyed by wall name; walls not
    /// listed use 1. Multiplier m gives cells of edge `base_cell / m`, so
    /// facet area scales with 1/m^2; low multipliers make the coarse facets
    /// that mark low-texture surfaces.
    pub wall_multipliers: BTreeMap<String, f64>,
    /// In-plane jitter of interior grid vertices, as a fraction of the cell
    /// edge. Panel borders stay put so walls keep meeting at their seams.
    pub vertex_jitter_frac: f64,
    /// Candidate-station grid spacing.
    pub station_spacing_m: f64,
    /// Scanner and tripod height above the floor.
    pub station_height_m: f64,
    /// Every `capture_stride`-th candidate station also captures images.
    pub capture_stride: usize,
    /// Camera pitch pattern: `-pitch_span..=pitch_span` stepped by
    /// `pitch_step` (degrees; 0 is level, negative looks down).
    pub pitch_span_deg: f64,
    pub pitch_step_deg: f64,
    /// Camera yaw step; yaws cover `0..360`. Each station's ring starts at
    /// its own offset so blind sectors do not line up across stations.
    pub yaw_step_deg: f64,
    /// Aerial cameras: a ring of `aerial_count - 1` looking at the scene
    /// center plus one straight-down view, at `aerial_height_m`.
    pub aerial_count: usize,
    pub aerial_height_m: f64,
    /// Square image side in pixels.
    pub image_size_px: u32,
    /// Focal length in pixels (fx = fy).
    pub focal_px: f64,
    /// Surface points sampled for the simulated sparse reconstruction;
    /// points seen by fewer than two cameras are dropped, so the bundle may
    /// hold slightly fewer. Per-wall allocation is proportional to
    /// area x multiplier^2: low-density walls also match poorly in images.
    pub sfm_points: usize,
    /// Scale of the reconstruction frame relative to the metric frame.
    pub sfm_scale: f64,
    /// Pixel noise on simulated image observations.
    pub pixel_sigma_px: f64,
    /// Noise on the reconstruction side of 3D-3D matches (metric).
    pub point_sigma_m: f64,
    /// Range noise on simulated laser returns (metric).
    pub range_sigma_m: f64,
    /// Fraction of 3D-3D matches replaced by uniform outliers.
    pub outlier_fraction: f64,
    /// 3D-3D matches fabricated per scan.
    pub matches_per_scan: usize,
    /// Fraction of inlier matches that belong to a reconstruction track and
    /// carry its point index; the rest only record a measured position.
    /// Outliers never carry an index (a false match lands off every track).
    pub track_fraction: f64,
    /// Low-frequency drift of the simulated reconstruction against the
    /// metric truth, mimicking the accumulated error of an image-only
    /// block: zero at camera 0 (the datum) and growing with distance,
    /// reaching these amplitudes at half the scene diagonal. Bend is a
    /// metric displacement, scale is relative, rotation is in degrees.
    /// Image observations and 3D-3D match positions are consistent with
    /// the drifted block rather than the truth, so exact checkpoints can
    /// measure how much drift a solve removes.
    pub drift_bend_m: f64,
    pub drift_scale: f64,
    pub drift_rot_deg: f64,
    /// Perturbation of the simulated reconstruction handed to refinement:
    /// camera rotations (degrees), camera centers and points (metric).
    /// Camera 0 is never perturbed; it is the frame datum.
    pub sfm_rot_sigma_deg: f64,
    pub sfm_trans_sigma_m: f64,
    pub sfm_point_sigma_m: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            extent_m: [10.0, 10.0, 4.0],
            inner_wall_y_m: 6.5,
            door_x_m: [4.5, 5.5],
            door_height_m: 2.0,
            ceiling: false,
            base_cell_m: 0.5,
            wall_multipliers: BTreeMap::from([("north".to_string(), 0.5)]),
            vertex_jitter_frac: 0.2,
            station_spacing_m: 3.0,
            station_height_m: 1.5,
            capture_stride: 2,
            pitch_span_deg: 20.0,
            pitch_step_deg: 20.0,
            yaw_step_deg: 120.0,
            aerial_count: 5,
            aerial_height_m: 12.0,
            image_size_px: 800,
            focal_px: 400.0,
            sfm_points: 5000,
            sfm_scale: 1.0,
            pixel_sigma_px: 0.5,
            point_sigma_m: 0.01,
            range_sigma_m: 0.005,
            outlier_fraction: 0.2,
            matches_per_scan: 200,
            track_fraction: 0.7,
            drift_bend_m: 0.03,
            drift_scale: 0.005,
            drift_rot_deg: 0.3,
            sfm_rot_sigma_deg: 0.3,
            sfm_trans_sigma_m: 0.02,
            sfm_point_sigma_m: 0.01,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("scene spec: {what}")));
        if !self.extent_m.iter().all(|&e| e > 0.0 && e.is_finite()) {
            return bad("box extents must be positive");
        }
        if !(self.inner_wall_y_m > 0.0 && self.inner_wall_y_m < self.extent_m[1]) {
            return bad("dividing wall must lie strictly inside the box");
        }
        if !(0.0 <= self.door_x_m[0]
            && self.door_x_m[0] < self.door_x_m[1]
            && self.door_x_m[1] <= self.extent_m[0])
        {
            return bad("doorway x range must be ordered and inside the box");
        }
        if !(self.door_height_m > 0.0 && self.door_height_m <= self.extent_m[2]) {
            return bad("doorway height must be positive and at most the wall height");
        }
        if !(self.base_cell_m > 0.0 && self.base_cell_m.is_finite()) {
            return bad("base cell must be positive");
        }
        if let Some((name, &m)) =
            self.wall_multipliers.iter().find(|(_, &m)| !(m > 0.0 && m.is_finite()))
        {
            return Err(Error::InvalidArgument(format!(
                "scene spec: wall {name:?} has non-positive density multiplier {m}"
            )));
        }
        if !(self.vertex_jitter_frac >= 0.0 && self.vertex_jitter_frac < 0.5) {
            return bad("vertex jitter must be in [0, 0.5) of a cell");
        }
        if !(self.station_spacing_m > 0.0 && self.station_spacing_m.is_finite()) {
            return bad("station spacing must be positive");
        }
        if !(self.station_height_m > 0.0 && self.station_height_m < self.extent_m[2]) {
            return bad("station height must be inside the walls");
        }
        if self.capture_stride == 0 {
            return bad("capture stride must be nonzero");
        }
        if !(self.pitch_step_deg > 0.0 && self.pitch_span_deg >= 0.0 && self.yaw_step_deg > 0.0) {
            return bad("camera angle steps must be positive");
        }
        if self.aerial_height_m <= self.extent_m[2] && self.aerial_count > 0 {
            return bad("aerial cameras must fly above the walls");
        }
        if self.image_size_px == 0 || !(self.focal_px > 0.0) {
            return bad("image size and focal length must be positive");
        }
        if self.sfm_points == 0 {
            return bad("at least one reconstruction point is required");
        }
        if !(self.sfm_scale > 0.0 && self.sfm_scale.is_finite()) {
            return bad("reconstruction scale must be positive");
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return bad("outlier fraction must be in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.track_fraction) {
            return bad("track fraction must be in [0, 1]");
        }
        if !(self.drift_scale >= 0.0 && self.drift_scale < 1.0) {
            return bad("drift scale must be in [0, 1)");
        }
        for (what, v) in [
            ("pixel sigma", self.pixel_sigma_px),
            ("point sigma", self.point_sigma_m),
            ("range sigma", self.range_sigma_m),
            ("drift bend", self.drift_bend_m),
            ("drift rotation", self.drift_rot_deg),
            ("rotation sigma", self.sfm_rot_sigma_deg),
            ("translation sigma", self.sfm_trans_sigma_m),
            ("point jitter sigma", self.sfm_point_sigma_m),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "scene spec: {what} must be nonnegative, got {v}"
                )));
            }
        }
        if self.matches_per_scan < 3 {
            return bad("at least 3 matches per scan are required for registration");
        }
        Ok(())
    }

    /// Removes every stochastic term: exact observations, exact matches, no
    /// outliers, no block drift, and an unperturbed reconstruction.
    pub fn noise_free(mut self) -> Self {
        self.pixel_sigma_px = 0.0;
        self.point_sigma_m = 0.0;
        self.range_sigma_m = 0.0;
        self.outlier_fraction = 0.0;
        self.drift_bend_m = 0.0;
        self.drift_scale = 0.0;
        self.drift_rot_deg = 0.0;
        self.sfm_rot_sigma_deg = 0.0;
        self.sfm_trans_sigma_m = 0.0;
        self.sfm_point_sigma_m = 0.0;
        self
    }
}

/// Contiguous facet range the named wall occupies in the scene mesh.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WallRegion {
    pub name: String,
    pub first_facet: usize,
    pub facet_count: usize,
}

impl WallRegion {
    pub fn contains(&self, facet: usize) -> bool {
        (self.first_facet..self.first_facet + self.facet_count).contains(&facet)
    }
}

/// Smooth similarity-style error field of the simulated reconstruction:
/// the drifted block places a true position `p` at `warp(p)`. The field is
/// the identity at `origin` (camera 0's center, the block datum) and ramps
/// up with distance: a rotation and relative scale about the origin plus a
/// lateral bend, all reaching full amplitude at `length`. Everything lives
/// in the reconstruction frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SfmDrift {
    pub origin: Point3,
    pub length: f64,
    pub bend_dir: Vec3,
    pub rot_axis: Vec3,
    pub bend: f64,
    pub scale: f64,
    pub rot_rad: f64,
}

impl SfmDrift {
    /// Where the drifted block believes the true position `p` sits.
    pub fn warp(&self, p: &Point3) -> Point3 {
        let d = p - self.origin;
        let u = (d.norm() / self.length).min(1.0);
        let turned = Rotation3::new(self.rot_axis * (self.rot_rad * u)) * d;
        self.origin + turned * (1.0 + self.scale * u) + self.bend_dir * (self.bend * u * u)
    }

    /// Local rotation of the field at `p`: the block's orientation error
    /// there, from the rotation ramp.
    pub fn local_rotation(&self, p: &Point3) -> Rotation3 {
        let u = ((p - self.origin).norm() / self.length).min(1.0);
        Rotation3::new(self.rot_axis * (self.rot_rad * u))
    }

    /// Moves a camera through the field: its center follows `warp` and its
    /// orientation follows the field's local rotation, so the drifted block
    /// stays image-consistent to first order. Real drift hides in a bundle
    /// solution exactly because the whole local frame wanders coherently.
    pub fn warp_camera(&self, cam: &CameraView) -> CameraView {
        let center = cam.center();
        let c = self.warp(&center);
        let rotation = cam.pose.rotation * self.local_rotation(&center).inverse();
        let pose = RigidPose::new(rotation, -(rotation * c.coords));
        CameraView::new(cam.intrinsics, pose, cam.label)
    }

    pub fn is_identity(&self) -> bool {
        self.bend == 0.0 && self.scale == 0.0 && self.rot_rad == 0.0
    }
}

/// Everything the pipeline consumes plus the truth it should recover.
#[derive(Debug, Clone)]
pub struct GroundTruthBundle {
    pub spec: SceneSpec,
    /// Scene surface, metric frame.
    pub mesh: TriMesh,
    /// Which facets belong to which wall.
    pub regions: Vec<WallRegion>,
    /// Candidate scanner stations at tripod height, metric frame.
    pub stations: Vec<PotentialLocation>,
    /// True camera poses, reconstruction frame.
    pub cameras: Vec<CameraView>,
    /// Candidate-station index each captured camera stands on; aerial
    /// cameras have no station.
    pub camera_stations: Vec<Option<usize>>,
    /// True surface points, reconstruction frame; each seen by >= 2 cameras.
    pub points: Vec<Point3>,
    pub point_colors: Vec<[u8; 3]>,
    /// Facet each point was sampled on, for region lookups.
    pub point_facets: Vec<usize>,
    /// Reconstruction frame = metric frame x this scale.
    pub sfm_scale: f64,
    /// Error field of the simulated image block; observations and match
    /// positions are consistent with the warped state, not the truth.
    pub sfm_drift: SfmDrift,
}

/// One simulated laser scan: a cloud in the scanner's own frame plus the
/// true rigid pose mapping that frame into the metric world.
#[derive(Debug, Clone)]
pub struct SimulatedScan {
    /// Candidate-station index the scanner stood on.
    pub station: usize,
    /// Scan frame to metric world.
    pub rigid_world: RigidPose,
    /// Returns in the scan frame, with per-point origin distance.
    pub cloud: ColoredPointCloud,
}

/// Simulated image observations and per-scan 3D-3D matches.
#[derive(Debug, Clone)]
pub struct MatchSet {
    /// Projections of the drifted block's points into its cameras, with
    /// pixel noise; a bundle solve over them reproduces the drifted block.
    pub observations: Vec<Observation>,
    /// Per scan (indexed as in the `scans` argument): correspondences
    /// between the scan frame and the reconstruction frame.
    pub matches: Vec<Vec<Correspondence>>,
    /// Per scan, aligned with `matches`: true when the pair is consistent
    /// with the geometry, false for an injected outlier.
    pub inlier_labels: Vec<Vec<bool>>,
}

/// One independent generator per purpose: same seed, numbered streams.
fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const STREAM_MESH: u64 = 0;
const STREAM_SFM_SAMPLE: u64 = 1;
const STREAM_OBSERVATIONS: u64 = 2;
const STREAM_SFM_PERTURB: u64 = 4;
const STREAM_REFERENCE: u64 = 5;
const STREAM_SURFACE: u64 = 6;
const STREAM_DRIFT: u64 = 7;
/// Per-station streams start here: pose, then range noise, then matches.
const STREAM_SCAN_POSE: u64 = 1 << 20;
const STREAM_SCAN_RANGE: u64 = 2 << 20;
const STREAM_SCAN_MATCH: u64 = 3 << 20;

/// Deterministic synthetic face color; bright enough to inspect.
pub fn facet_color(facet: usize) -> [u8; 3] {
    let f = facet as u64;
    [
        64 + ((f * 97) % 192) as u8,
        64 + ((f * 57 + 31) % 192) as u8,
        64 + ((f * 151 + 89) % 192) as u8,
    ]
}

/// A planar wall panel to be triangulated on a grid.
struct Panel {
    name: &'static str,
    origin: Point3,
    u: Vec3,
    v: Vec3,
    len_u: f64,
    len_v: f64,
}

fn panels(spec: &SceneSpec) -> Vec<Panel> {
    let [ex, ey, ez] = spec.extent_m;
    let wy = spec.inner_wall_y_m;
    let [dx0, dx1] = spec.door_x_m;
    let dh = spec.door_height_m;
    let o = Point3::new(0.0, 0.0, 0.0);
    let x = Vec3::x();
    let y = Vec3::y();
    let z = Vec3::z();
    let mut list = vec![
        Panel { name: "floor", origin: o, u: x, v: y, len_u: ex, len_v: ey },
        Panel { name: "south", origin: o, u: x, v: z, len_u: ex, len_v: ez },
        Panel { name: "north", origin: Point3::new(0.0, ey, 0.0), u: x, v: z, len_u: ex, len_v: ez },
        Panel { name: "west", origin: o, u: y, v: z, len_u: ey, len_v: ez },
        Panel { name: "east", origin: Point3::new(ex, 0.0, 0.0), u: y, v: z, len_u: ey, len_v: ez },
    ];
    if dx0 > 0.0 {
        list.push(Panel {
            name: "inner",
            origin: Point3::new(0.0, wy, 0.0),
            u: x,
            v: z,
            len_u: dx0,
            len_v: ez,
        });
    }
    if dx1 < ex {
        list.push(Panel {
            name: "inner",
            origin: Point3::new(dx1, wy, 0.0),
            u: x,
            v: z,
            len_u: ex - dx1,
            len_v: ez,
        });
    }
    if dh < ez {
        list.push(Panel {
            name: "inner",
            origin: Point3::new(dx0, wy, dh),
            u: x,
            v: z,
            len_u: dx1 - dx0,
            len_v: ez - dh,
        });
    }
    if spec.ceiling {
        list.push(Panel {
            name: "ceiling",
            origin: Point3::new(0.0, 0.0, ez),
            u: x,
            v: y,
            len_u: ex,
            len_v: ey,
        });
    }
    list
}

/// Grid-triangulates one panel, jittering interior vertices in-plane.
fn triangulate_panel(
    panel: &Panel,
    cell: f64,
    jitter_frac: f64,
    rng: &mut ChaCha12Rng,
    vertices: &mut Vec<Point3>,
    facets: &mut Vec<[u32; 3]>,
) {
    let nu = (panel.len_u / cell).round().max(1.0) as usize;
    let nv = (panel.len_v / cell).round().max(1.0) as usize;
    let du = panel.len_u / nu as f64;
    let dv = panel.len_v / nv as f64;
    let base = vertices.len() as u32;
    for j in 0..=nv {
        for i in 0..=nu {
            let mut a = i as f64 * du;
            let mut b = j as f64 * dv;
            let interior = i > 0 && i < nu && j > 0 && j < nv;
            if interior && jitter_frac > 0.0 {
                a += du * jitter_frac * rng.random_range(-0.5..0.5);
                b += dv * jitter_frac * rng.random_range(-0.5..0.5);
            }
            vertices.push(panel.origin + panel.u * a + panel.v * b);
        }
    }
    let idx = |i: usize, j: usize| base + (j * (nu + 1) + i) as u32;
    for j in 0..nv {
        for i in 0..nu {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            facets.push([a, b, c]);
            facets.push([a, c, d]);
        }
    }
}

/// Station grid covering the box interior at `spacing`, centered.
fn station_grid(spec: &SceneSpec) -> Vec<PotentialLocation> {
    let axis = |extent: f64| -> Vec<f64> {
        let n = ((extent / spec.station_spacing_m).floor() as usize).max(1);
        (0..n)
            .map(|k| extent / 2.0 + (k as f64 - (n as f64 - 1.0) / 2.0) * spec.station_spacing_m)
            .collect()
    };
    let mut out = Vec::new();
    for y in axis(spec.extent_m[1]) {
        for x in axis(spec.extent_m[0]) {
            let p = Point3::new(x, y, spec.station_height_m);
            out.push(PotentialLocation::new(out.len(), p));
        }
    }
    out
}

/// World-to-camera pose for a camera at `center` looking along `forward`,
/// image-down matching world-down where possible.
pub fn look_pose(center: &Point3, forward: &Vec3) -> RigidPose {
    let f = forward.normalize();
    let mut right = f.cross(&Vec3::z());
    if right.norm() < 1e-9 {
        right = Vec3::x(); // straight up or down: pin the roll
    } else {
        right = right.normalize();
    }
    let down = f.cross(&right);
    let r = Rotation3::from_matrix_unchecked(nalgebra::Matrix3::from_rows(&[
        right.transpose(),
        down.transpose(),
        f.transpose(),
    ]));
    RigidPose::new(r, -(r * center.coords))
}

/// The per-station capture pattern: one view per (pitch, yaw) pair, yaw ring
/// rotated by `yaw_offset_deg`. Pitch `-span..=span` stepped by `step`, yaw
/// covering 360 degrees. Pitch 0 is level; negative looks down.
pub fn station_rig(
    center: &Point3,
    intrinsics: CameraIntrinsics,
    pitch_span_deg: f64,
    pitch_step_deg: f64,
    yaw_step_deg: f64,
    yaw_offset_deg: f64,
) -> Vec<CameraView> {
    let pitches = (pitch_span_deg / pitch_step_deg).round() as i64;
    let yaws = (360.0 / yaw_step_deg).ceil() as i64;
    let mut views = Vec::new();
    for pi in -pitches..=pitches {
        let pitch = (pi as f64 * pitch_step_deg).to_radians();
        for yi in 0..yaws {
            let yaw = (yaw_offset_deg + yi as f64 * yaw_step_deg).to_radians();
            let f = Vec3::new(
                pitch.cos() * yaw.cos(),
                pitch.cos() * yaw.sin(),
                pitch.sin(),
            );
            views.push(CameraView::new(
                intrinsics,
                look_pose(center, &f),
                CameraLabel::CapturedGround,
            ));
        }
    }
    views
}

/// True when `point` (reconstruction frame) projects inside `camera` and the
/// sight line is unobstructed in the metric mesh.
/// Pixel of `p` when it projects in front of the camera and inside the
/// image; no occlusion test. Drifted states have no physical surface, so
/// this is the whole visibility rule on the warped side.
fn in_view_pixel(camera: &CameraView, p: &Point3) -> Option<[f64; 2]> {
    let p_cam = camera.pose.transform_point(p);
    camera.intrinsics.project(&p_cam.coords).filter(|px| camera.intrinsics.contains(*px))
}

fn point_visible(
    camera: &CameraView,
    point_sfm: &Point3,
    bvh: &MeshBvh,
    sfm_scale: f64,
) -> bool {
    let p_cam = camera.pose.transform_point(point_sfm);
    let Some(pixel) = camera.intrinsics.project(&p_cam.coords) else {
        return false;
    };
    if !camera.intrinsics.contains(pixel) {
        return false;
    }
    let cam_w = Point3::from(camera.center().coords / sfm_scale);
    let p_w = Point3::from(point_sfm.coords / sfm_scale);
    !bvh.segment_blocked(&cam_w, &p_w)
}

/// Builds the scene: mesh, stations, true cameras, and true points.
/// Deterministic in the spec (including the seed).
pub fn generate_scene(spec: &SceneSpec) -> Result<GroundTruthBundle> {
    spec.validate()?;
    let mut mesh_rng = stream_rng(spec.seed, STREAM_MESH);
    let mut vertices = Vec::new();
    let mut facet_list = Vec::new();
    let mut regions: Vec<WallRegion> = Vec::new();
    for panel in panels(spec) {
        let mult = spec.wall_multipliers.get(panel.name).copied().unwrap_or(1.0);
        let first = facet_list.len();
        triangulate_panel(
            &panel,
            spec.base_cell_m / mult,
            spec.vertex_jitter_frac,
            &mut mesh_rng,
            &mut vertices,
            &mut facet_list,
        );
        regions.push(WallRegion {
            name: panel.name.to_string(),
            first_facet: first,
            facet_count: facet_list.len() - first,
        });
    }
    let mesh = TriMesh::new(vertices, facet_list)?;
    let bvh = MeshBvh::build(&mesh);

    let stations = station_grid(spec);
    if stations.is_empty() {
        return Err(Error::InvalidArgument("scene spec: no station fits the box".into()));
    }

    // Cameras: a yaw-pitch rig on every capture station plus the aerial set.
    let half = spec.image_size_px as f64 / 2.0;
    let intr = CameraIntrinsics::new(
        spec.focal_px,
        spec.focal_px,
        half,
        half,
        spec.image_size_px,
        spec.image_size_px,
    )?;
    let alpha = spec.sfm_scale;
    let mut cameras = Vec::new();
    let mut camera_stations = Vec::new();
    for (si, station) in stations.iter().enumerate().step_by(spec.capture_stride) {
        let center_sfm = Point3::from(station.point().coords * alpha);
        let rig = station_rig(
            &center_sfm,
            intr,
            spec.pitch_span_deg,
            spec.pitch_step_deg,
            spec.yaw_step_deg,
            40.0 * si as f64,
        );
        camera_stations.extend(std::iter::repeat(Some(si)).take(rig.len()));
        cameras.extend(rig);
    }
    if spec.aerial_count > 0 {
        let target = Point3::new(spec.extent_m[0] / 2.0, spec.extent_m[1] / 2.0, 0.0);
        let ring = spec.aerial_count - 1;
        let radius = 0.3 * spec.extent_m[0].max(spec.extent_m[1]);
        for k in 0..ring {
            let a = 2.0 * std::f64::consts::PI * k as f64 / ring as f64;
            let pos = Point3::new(
                target.x + radius * a.cos(),
                target.y + radius * a.sin(),
                spec.aerial_height_m,
            );
            let pos_sfm = Point3::from(pos.coords * alpha);
            let f = (target.coords - pos.coords).normalize();
            cameras.push(CameraView::new(intr, look_pose(&pos_sfm, &f), CameraLabel::CapturedAerial));
            camera_stations.push(None);
        }
        let top = Point3::new(target.x * alpha, target.y * alpha, spec.aerial_height_m * alpha);
        cameras.push(CameraView::new(
            intr,
            look_pose(&top, &Vec3::new(0.0, 0.0, -1.0)),
            CameraLabel::CapturedAerial,
        ));
        camera_stations.push(None);
    }

    // The block's drift field: seeded directions, zero at camera 0's
    // center, full amplitude at half the scene diagonal.
    let mut drift_rng = stream_rng(spec.seed, STREAM_DRIFT);
    let unit = |rng: &mut ChaCha12Rng| {
        let gauss = Normal::new(0.0, 1.0).expect("unit sigma");
        loop {
            let v = Vec3::new(gauss.sample(rng), gauss.sample(rng), gauss.sample(rng));
            if v.norm() > 1e-6 {
                break v.normalize();
            }
        }
    };
    let diag = Vec3::new(spec.extent_m[0], spec.extent_m[1], spec.extent_m[2]).norm();
    let sfm_drift = SfmDrift {
        origin: cameras[0].center(),
        length: 0.5 * diag * alpha,
        bend_dir: unit(&mut drift_rng),
        rot_axis: unit(&mut drift_rng),
        bend: spec.drift_bend_m * alpha,
        scale: spec.drift_scale,
        rot_rad: spec.drift_rot_deg.to_radians(),
    };
    let warped_cams: Vec<CameraView> =
        cameras.iter().map(|c| sfm_drift.warp_camera(c)).collect();

    // Surface points: per wall in proportion to area x multiplier^2, placed
    // uniformly by area within the wall, kept only when two cameras see them.
    let mut sfm_rng = stream_rng(spec.seed, STREAM_SFM_SAMPLE);
    let weights: Vec<f64> = regions
        .iter()
        .map(|r| {
            let mult = spec.wall_multipliers.get(r.name.as_str()).copied().unwrap_or(1.0);
            let area: f64 =
                (r.first_facet..r.first_facet + r.facet_count).map(|f| mesh.facet_area(f)).sum();
            area * mult * mult
        })
        .collect();
    let weight_total: f64 = weights.iter().sum();
    let mut points = Vec::new();
    let mut point_colors = Vec::new();
    let mut point_facets = Vec::new();
    for (region, w) in regions.iter().zip(&weights) {
        let count = (spec.sfm_points as f64 * w / weight_total).round() as usize;
        // Cumulative facet areas for area-uniform placement inside the wall.
        let mut cumulative = Vec::with_capacity(region.facet_count);
        let mut acc = 0.0;
        for f in region.first_facet..region.first_facet + region.facet_count {
            acc += mesh.facet_area(f);
            cumulative.push(acc);
        }
        for _ in 0..count {
            let t = sfm_rng.random_range(0.0..acc);
            let k = cumulative.partition_point(|&c| c < t);
            let facet = region.first_facet + k.min(region.facet_count - 1);
            let [a, b, c] = mesh.facet_vertices(facet);
            let (mut u, mut v) = (sfm_rng.random_range(0.0..1.0), sfm_rng.random_range(0.0..1.0));
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            let p = a + (b - a) * u + (c - a) * v;
            points.push(Point3::from(p.coords * alpha));
            point_colors.push(facet_color(facet));
            point_facets.push(facet);
        }
    }

    // Visibility filter: refinement needs every point in two or more views.
    // A view counts only if the point is unoccluded as built and its drifted
    // position still lands inside the drifted camera's image, because
    // observations are emitted for exactly those view pairs.
    let mut kept_points = Vec::new();
    let mut kept_colors = Vec::new();
    let mut kept_facets = Vec::new();
    for ((p, color), facet) in points.iter().zip(&point_colors).zip(&point_facets) {
        let wp = sfm_drift.warp(p);
        let mut seen = 0;
        for (cam, wcam) in cameras.iter().zip(&warped_cams) {
            if point_visible(cam, p, &bvh, alpha) && in_view_pixel(wcam, &wp).is_some() {
                seen += 1;
                if seen >= 2 {
                    break;
                }
            }
        }
        if seen >= 2 {
            kept_points.push(*p);
            kept_colors.push(*color);
            kept_facets.push(*facet);
        }
    }
    if kept_points.is_empty() {
        return Err(Error::InvalidArgument(
            "scene spec: no surface point is visible from two cameras".into(),
        ));
    }

    Ok(GroundTruthBundle {
        spec: spec.clone(),
        mesh,
        regions,
        stations,
        cameras,
        camera_stations,
        points: kept_points,
        point_colors: kept_colors,
        point_facets: kept_facets,
        sfm_scale: alpha,
        sfm_drift,
    })
}

impl GroundTruthBundle {
    /// True rigid pose (scan frame to metric world) of a scanner on the
    /// given station: a seeded yaw plus up to 2 degrees of tripod tilt.
    pub fn scan_rigid(&self, station: usize) -> RigidPose {
        let mut rng = stream_rng(self.spec.seed, STREAM_SCAN_POSE + station as u64);
        let yaw = rng.random_range(0.0..std::f64::consts::TAU);
        let tilt_dir = rng.random_range(0.0..std::f64::consts::TAU);
        let tilt = rng.random_range(0.0..2.0f64.to_radians());
        let axis = Vec3::new(tilt_dir.cos(), tilt_dir.sin(), 0.0);
        let r = Rotation3::new(axis * tilt) * Rotation3::new(Vec3::z() * yaw);
        RigidPose::new(r.inverse(), self.stations[station].point().coords)
    }

    /// True similarity mapping a scan's frame into the reconstruction frame.
    pub fn scan_to_sfm(&self, scan: &SimulatedScan) -> Sim3Transform {
        Sim3Transform::new(
            self.sfm_scale,
            scan.rigid_world.rotation,
            scan.rigid_world.translation * self.sfm_scale,
        )
    }

    /// Region tag for reports: points past the dividing wall are "indoor",
    /// the courtyard side is "outdoor".
    pub fn region_tag(&self, point_index: usize) -> &'static str {
        let y_world = self.points[point_index].y / self.sfm_scale;
        if y_world >= self.spec.inner_wall_y_m {
            "indoor"
        } else {
            "outdoor"
        }
    }
}

/// Simulates one laser scan from a candidate station: a spherical sweep at
/// `step_deg` angular resolution, nearest hits only, per-face color, range
/// noise per the spec. The returned cloud is in the scanner's own frame with
/// origin distances recorded.
pub fn simulate_scan(
    bundle: &GroundTruthBundle,
    station: usize,
    step_deg: f64,
) -> Result<SimulatedScan> {
    if station >= bundle.stations.len() {
        return Err(Error::InvalidArgument(format!(
            "station {station} out of range ({} stations)",
            bundle.stations.len()
        )));
    }
    if !(step_deg > 0.0 && step_deg <= 45.0) {
        return Err(Error::InvalidArgument(format!(
            "angular step must be in (0, 45] degrees, got {step_deg}"
        )));
    }
    let rigid = bundle.scan_rigid(station);
    let origin = Point3::from(rigid.translation);
    let bvh = MeshBvh::build(&bundle.mesh);
    let mut noise_rng = stream_rng(bundle.spec.seed, STREAM_SCAN_RANGE + station as u64);
    let range_noise = Normal::new(0.0, bundle.spec.range_sigma_m)
        .map_err(|e| Error::InvalidArgument(format!("range sigma: {e}")))?;

    let step = step_deg.to_radians();
    let polar_steps = (std::f64::consts::PI / step).round() as usize;
    let azimuth_steps = (std::f64::consts::TAU / step).round() as usize;
    let mut points = Vec::new();
    let mut colors = Vec::new();
    let mut distances = Vec::new();
    for i in 0..polar_steps {
        let theta = (i as f64 + 0.5) * std::f64::consts::PI / polar_steps as f64;
        for j in 0..azimuth_steps {
            let phi = j as f64 * std::f64::consts::TAU / azimuth_steps as f64;
            let dir_scan = Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
            let dir_world = rigid.rotation * dir_scan;
            if let Some(hit) = bvh.first_hit(&origin, &dir_world) {
                let range = if bundle.spec.range_sigma_m > 0.0 {
                    hit.t + range_noise.sample(&mut noise_rng)
                } else {
                    hit.t
                };
                points.push(Point3::from(dir_scan * range));
                colors.push(facet_color(hit.facet));
                distances.push(range);
            }
        }
    }
    Ok(SimulatedScan {
        station,
        rigid_world: rigid,
        cloud: ColoredPointCloud::new(points, colors, Some(distances))?,
    })
}

/// Point indices whose sight line from the station is clear in the mesh.
fn scan_visible_points(bundle: &GroundTruthBundle, bvh: &MeshBvh, station: usize) -> Vec<usize> {
    let origin = bundle.stations[station].point();
    (0..bundle.points.len())
        .filter(|&j| {
            let p_w = Point3::from(bundle.points[j].coords / bundle.sfm_scale);
            !bvh.segment_blocked(&origin, &p_w)
        })
        .collect()
}

/// Simulates the measurement side of the pipeline: image observations
/// (pixel noise) and per-scan 3D-3D matches against the reconstruction
/// (point noise plus labeled uniform outliers, each farther than 3 sigma
/// from where the block puts the point). A seeded share of the true matches
/// carries its track's point index; the rest, and every outlier, record
/// only the measured position.
///
/// Both products are consistent with the *drifted* block, not the truth:
/// real matching works on the images behind the drifted reconstruction, so
/// a bundle solve over these observations reproduces the drift. Only the
/// laser side (match sources, scan clouds) and the reference pairs carry
/// undistorted geometry.
pub fn simulate_matches(
    bundle: &GroundTruthBundle,
    scans: &[SimulatedScan],
) -> Result<MatchSet> {
    let spec = &bundle.spec;
    let bvh = MeshBvh::build(&bundle.mesh);
    let alpha = bundle.sfm_scale;
    let drift = &bundle.sfm_drift;
    let warped_cams: Vec<CameraView> =
        bundle.cameras.iter().map(|c| drift.warp_camera(c)).collect();
    let warped_points: Vec<Point3> = bundle.points.iter().map(|p| drift.warp(p)).collect();

    let mut obs_rng = stream_rng(spec.seed, STREAM_OBSERVATIONS);
    let pixel_noise = Normal::new(0.0, spec.pixel_sigma_px)
        .map_err(|e| Error::InvalidArgument(format!("pixel sigma: {e}")))?;
    let mut observations = Vec::new();
    for (ci, (cam, wcam)) in bundle.cameras.iter().zip(&warped_cams).enumerate() {
        for (pj, (p, wp)) in bundle.points.iter().zip(&warped_points).enumerate() {
            if !point_visible(cam, p, &bvh, alpha) {
                continue;
            }
            let Some(exact) = in_view_pixel(wcam, wp) else {
                continue;
            };
            let pixel = if spec.pixel_sigma_px > 0.0 {
                [
                    exact[0] + pixel_noise.sample(&mut obs_rng),
                    exact[1] + pixel_noise.sample(&mut obs_rng),
                ]
            } else {
                exact
            };
            observations.push(Observation {
                camera: ci,
                point: pj,
                pixel,
                feature_scale: 1.0,
            });
        }
    }

    let point_noise = Normal::new(0.0, spec.point_sigma_m * alpha)
        .map_err(|e| Error::InvalidArgument(format!("point sigma: {e}")))?;
    let aerial_cams: Vec<&CameraView> = bundle
        .cameras
        .iter()
        .filter(|c| c.label == CameraLabel::CapturedAerial)
        .collect();
    let mut matches = Vec::new();
    let mut inlier_labels = Vec::new();
    for (scan_idx, scan) in scans.iter().enumerate() {
        let mut rng = stream_rng(spec.seed, STREAM_SCAN_MATCH + scan.station as u64);
        let visible = scan_visible_points(bundle, &bvh, scan.station);
        if visible.len() < 3 {
            return Err(Error::InvalidArgument(format!(
                "scan at station {} sees only {} reconstruction points; cannot fabricate matches",
                scan.station,
                visible.len()
            )));
        }
        let take = spec.matches_per_scan.min(visible.len());
        let chosen = rand::seq::index::sample(&mut rng, visible.len(), take);
        let inv = scan.rigid_world.inverse();
        let mut scan_matches = Vec::with_capacity(take);
        let mut labels = Vec::with_capacity(take);
        for vi in chosen.iter() {
            let j = visible[vi];
            let p_sfm = bundle.points[j];
            let p_rec = warped_points[j];
            let p_w = Point3::from(p_sfm.coords / alpha);
            let laser = inv.transform_point(&p_w);
            let outlier = spec.outlier_fraction > 0.0 && rng.random_bool(spec.outlier_fraction);
            let dst = if outlier {
                // Uniform in the box, redrawn until clearly inconsistent.
                let min_err = 3.0 * spec.point_sigma_m * alpha;
                loop {
                    let q = Point3::new(
                        rng.random_range(0.0..spec.extent_m[0]) * alpha,
                        rng.random_range(0.0..spec.extent_m[1]) * alpha,
                        rng.random_range(0.0..spec.extent_m[2]) * alpha,
                    );
                    if (q - p_rec).norm() > min_err {
                        break q;
                    }
                }
            } else if spec.point_sigma_m > 0.0 {
                Point3::new(
                    p_rec.x + point_noise.sample(&mut rng),
                    p_rec.y + point_noise.sample(&mut rng),
                    p_rec.z + point_noise.sample(&mut rng),
                )
            } else {
                p_rec
            };
            let channel = if aerial_cams.iter().any(|c| point_visible(c, &p_sfm, &bvh, alpha)) {
                Channel::Aerial
            } else {
                Channel::Ground
            };
            // Only true matches can belong to a track; a false match lands
            // off every track and keeps just its measured position.
            let on_track = !outlier && rng.random_bool(spec.track_fraction);
            scan_matches.push(Correspondence {
                src: laser,
                dst,
                channel,
                weight: 1.0,
                scan: Some(scan_idx),
                point: on_track.then_some(j),
            });
            labels.push(!outlier);
        }
        matches.push(scan_matches);
        inlier_labels.push(labels);
    }
    Ok(MatchSet { observations, matches, inlier_labels })
}

/// The simulated image-based reconstruction handed to refinement: the true
/// state mapped through the block's drift field, then seeded jitter on top.
/// Camera 0 stays exact; it defines the reconstruction frame's datum, and
/// the drift field vanishes there by construction.
pub fn noisy_sfm_state(bundle: &GroundTruthBundle) -> (Vec<CameraView>, Vec<Point3>) {
    let spec = &bundle.spec;
    let alpha = bundle.sfm_scale;
    let mut rng = stream_rng(spec.seed, STREAM_SFM_PERTURB);
    let randn = |rng: &mut ChaCha12Rng| {
        Normal::new(0.0, 1.0).expect("unit sigma").sample(rng)
    };
    let mut cameras: Vec<CameraView> =
        bundle.cameras.iter().map(|c| bundle.sfm_drift.warp_camera(c)).collect();
    for cam in cameras.iter_mut().skip(1) {
        let axis = Vec3::new(randn(&mut rng), randn(&mut rng), randn(&mut rng));
        let axis = if axis.norm() > 1e-12 { axis.normalize() } else { Vec3::x() };
        let angle = randn(&mut rng) * spec.sfm_rot_sigma_deg.to_radians();
        let center = cam.center()
            + Vec3::new(randn(&mut rng), randn(&mut rng), randn(&mut rng))
                * (spec.sfm_trans_sigma_m * alpha);
        let rotation = Rotation3::new(axis * angle) * cam.pose.rotation;
        cam.pose = RigidPose::new(rotation, -(rotation * center.coords));
    }
    let points = bundle
        .points
        .iter()
        .map(|p| {
            let w = bundle.sfm_drift.warp(p);
            Point3::new(
                w.x + randn(&mut rng) * spec.sfm_point_sigma_m * alpha,
                w.y + randn(&mut rng) * spec.sfm_point_sigma_m * alpha,
                w.z + randn(&mut rng) * spec.sfm_point_sigma_m * alpha,
            )
        })
        .collect();
    (cameras, points)
}

/// Exact reference pairs for RMS evaluation: surface points visible from a
/// scan's station, stated once as the reconstruction records them (block
/// drift included) and once in that scan's frame, tagged by region. Up to
/// `per_region` pairs per region tag, spread across the given scans. The
/// pairs are exact correspondences between the two clouds, so the RMS over
/// them measures how consistently a merge brings the clouds together; it is
/// free of the hand-clicking error real reference pairs would carry.
pub fn reference_pairs(
    bundle: &GroundTruthBundle,
    scans: &[SimulatedScan],
    per_region: usize,
) -> Result<Vec<crate::metrics::ReferencePair>> {
    if scans.is_empty() || per_region == 0 {
        return Err(Error::InvalidArgument("reference pairs need scans and a positive count".into()));
    }
    let bvh = MeshBvh::build(&bundle.mesh);
    let mut rng = stream_rng(bundle.spec.seed, STREAM_REFERENCE);
    // (region tag, scan index, point index) candidates in deterministic order.
    let mut candidates: BTreeMap<&'static str, Vec<(usize, usize)>> = BTreeMap::new();
    for (si, scan) in scans.iter().enumerate() {
        for j in scan_visible_points(bundle, &bvh, scan.station) {
            candidates.entry(bundle.region_tag(j)).or_default().push((si, j));
        }
    }
    let mut pairs = Vec::new();
    for (region, list) in candidates {
        let take = per_region.min(list.len());
        let chosen = rand::seq::index::sample(&mut rng, list.len(), take);
        for k in chosen.iter() {
            let (si, j) = list[k];
            let p_sfm = bundle.points[j];
            let p_w = Point3::from(p_sfm.coords / bundle.sfm_scale);
            pairs.push(crate::metrics::ReferencePair {
                sfm: bundle.sfm_drift.warp(&p_sfm),
                laser: scans[si].rigid_world.inverse().transform_point(&p_w),
                scan: si,
                region: region.to_string(),
            });
        }
    }
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no reference pair candidates are visible".into()));
    }
    Ok(pairs)
}

/// Evenly samples the mesh surface at roughly `spacing` between points;
/// the ground-truth cloud for precision/recall evaluation. Metric frame.
pub fn sample_mesh_surface(mesh: &TriMesh, spacing_m: f64, seed: u64) -> Result<Vec<Point3>> {
    if !(spacing_m > 0.0 && spacing_m.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sample spacing must be positive, got {spacing_m}"
        )));
    }
    let mut rng = stream_rng(seed, STREAM_SURFACE);
    let density = 1.0 / (spacing_m * spacing_m);
    let mut out = Vec::new();
    for f in 0..mesh.facet_count() {
        let expect = mesh.facet_area(f) * density;
        let mut count = expect.floor() as usize;
        if rng.random_range(0.0..1.0) < expect.fract() {
            count += 1;
        }
        let [a, b, c] = mesh.facet_vertices(f);
        for _ in 0..count {
            let (mut u, mut v) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            out.push(a + (b - a) * u + (c - a) * v);
        }
    }
    Ok(out)
}
