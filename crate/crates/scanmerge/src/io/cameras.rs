//! Camera list JSON: intrinsics plus world-to-camera pose per camera.
//!
//! Rotations are stored as row-major 3x3 arrays and validated (orthonormal,
//! determinant +1) on load.

use crate::geom::{validate_rotation, CameraIntrinsics, CameraLabel, CameraView, Mat3, RigidPose, Vec3};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
struct CameraRecord {
    label: CameraLabel,
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
    /// Row-major world-to-camera rotation.
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
struct CameraFile {
    cameras: Vec<CameraRecord>,
}

pub fn rotation_to_rows(r: &nalgebra::Rotation3<f64>) -> [[f64; 3]; 3] {
    let m = r.matrix();
    [
        [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
        [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
        [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
    ]
}

pub fn rotation_from_rows(rows: &[[f64; 3]; 3]) -> Result<nalgebra::Rotation3<f64>> {
    let m = Mat3::new(
        rows[0][0], rows[0][1], rows[0][2],
        rows[1][0], rows[1][1], rows[1][2],
        rows[2][0], rows[2][1], rows[2][2],
    );
    validate_rotation(&m)
}

pub fn write_cameras(path: impl AsRef<Path>, cameras: &[CameraView]) -> Result<()> {
    let records: Vec<CameraRecord> = cameras
        .iter()
        .map(|c| CameraRecord {
            label: c.label,
            fx: c.intrinsics.fx,
            fy: c.intrinsics.fy,
            cx: c.intrinsics.cx,
            cy: c.intrinsics.cy,
            width: c.intrinsics.width,
            height: c.intrinsics.height,
            rotation: rotation_to_rows(&c.pose.rotation),
            translation: c.pose.translation.into(),
        })
        .collect();
    let file = CameraFile { cameras: records };
    std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

pub fn read_cameras(path: impl AsRef<Path>) -> Result<Vec<CameraView>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let file: CameraFile = serde_json::from_str(&text)?;
    file.cameras
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let intrinsics = CameraIntrinsics::new(r.fx, r.fy, r.cx, r.cy, r.width, r.height)
                .map_err(|e| Error::Format {
                    path: path.display().to_string(),
                    reason: format!("camera {i}: {e}"),
                })?;
            let rotation = rotation_from_rows(&r.rotation).map_err(|e| Error::Format {
                path: path.display().to_string(),
                reason: format!("camera {i}: {e}"),
            })?;
            Ok(CameraView::new(
                intrinsics,
                RigidPose::new(rotation, Vec3::from(r.translation)),
                r.label,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Rotation3;

    #[test]
    fn cameras_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cameras.json");
        let cams = vec![
            CameraView::new(
                CameraIntrinsics::new(400.0, 410.0, 320.0, 240.0, 640, 480).unwrap(),
                RigidPose::new(
                    Rotation3::from_euler_angles(0.1, -0.4, 2.0),
                    Vec3::new(1.0, 2.0, 3.0),
                ),
                CameraLabel::CapturedGround,
            ),
            CameraView::new(
                CameraIntrinsics::new(256.0, 256.0, 256.0, 256.0, 512, 512).unwrap(),
                RigidPose::identity(),
                CameraLabel::Virtual,
            ),
        ];
        write_cameras(&path, &cams).unwrap();
        let back = read_cameras(&path).unwrap();
        assert_eq!(back, cams);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("captured-ground") && text.contains("virtual"));
    }

    #[test]
    fn rejects_non_orthonormal_rotation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(
            &path,
            r#"{"cameras":[{"label":"virtual","fx":1.0,"fy":1.0,"cx":0.0,"cy":0.0,
                "width":10,"height":10,
                "rotation":[[1.1,0,0],[0,1,0],[0,0,1]],"translation":[0,0,0]}]}"#,
        )
        .unwrap();
        assert!(matches!(read_cameras(&path), Err(Error::Format { .. })));
    }
}
