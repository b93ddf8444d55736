//! File formats: PLY meshes and point clouds, camera JSON, correspondence
//! and observation CSV, similarity-transform and report JSON, PFM depth
//! maps, and PNG images.

mod cameras;
mod csvio;
mod pfm;
mod ply;
mod png;
mod records;

pub use cameras::{read_cameras, rotation_from_rows, rotation_to_rows, write_cameras};
pub use csvio::{
    read_correspondences, read_observations, read_reference_pairs, write_correspondences,
    write_observations, write_reference_pairs,
};
pub use pfm::{read_pfm, write_pfm};
pub use ply::{read_cloud, read_mesh, write_cloud, write_mesh, PlyFormat};
pub use png::{write_mask_png, write_rgb_png};
pub use records::{read_json, read_transform, write_json, write_transform};
