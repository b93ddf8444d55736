//! Tools for merging image-based reconstructions with laser scans.
//!
//! A dense laser scan and a sparse multi-view reconstruction describe the same
//! scene in different frames, at different scales, and with complementary
//! blind spots: image matching starves on textureless surfaces, while a
//! tripod scanner only covers what it was parked in front of. This crate
//! provides the pieces needed to combine the two into one consistent model:
//!
//! * [`planner`]: choose scanning locations on a coarse proxy mesh so that a
//!   small number of scans covers the scene with little redundancy.
//! * [`synth`]: render a colored point cloud into virtual pinhole views
//!   (a six-face cube rig) so ordinary image features can link a scan to
//!   captured photographs, with depth-edge masking of unreliable pixels.
//! * [`register`]: estimate a similarity transform per scan from 3D-3D
//!   correspondences, robustly (RANSAC) and in closed form (weighted SVD).
//! * [`merge`]: refine camera poses, structure, and per-scan similarity
//!   transforms jointly by minimizing reprojection and 3D alignment error
//!   under a shared robust loss with a balancing weight between the two.
//! * [`metrics`]: compare a merged reconstruction against a reference model
//!   (RMS error over marked point pairs, precision/recall/F-score).
//! * [`sim`]: a synthetic scene generator that produces ground-truth meshes,
//!   scans, cameras, and correspondences for testing every stage end to end.
//! * [`pipeline`]: run the stages in sequence against files on disk, with
//!   deterministic, content-addressed run directories.
//!
//! Every randomized routine takes an explicit seed and produces identical
//! output across runs and thread counts.
//!
//! The `examples/` directory is the best starting point; each example is a
//! small runnable program exercising one capability, e.g.
//! `cargo run --example plan_scans`.

pub mod geom;
pub mod io;
pub mod merge;
pub mod metrics;
pub mod pipeline;
pub mod planner;
pub mod register;
pub mod sim;
pub mod spatial;
pub mod synth;

mod error;

pub use error::{Error, Result};
pub use geom::{
    apply_sim3, compose_sim3, project_point, CameraIntrinsics, CameraLabel, CameraView,
    ColoredPointCloud, Mat3, Point3, RigidPose, Rotation3, Sim3Transform, TriMesh, Vec3,
};
