//! JSON records for similarity transforms and stage results.

use super::cameras::{rotation_from_rows, rotation_to_rows};
use crate::geom::{Sim3Transform, Vec3};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
struct Sim3Record {
    scale: f64,
    /// Row-major rotation matrix.
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

pub fn write_transform(path: impl AsRef<Path>, t: &Sim3Transform) -> Result<()> {
    let record = Sim3Record {
        scale: t.scale,
        rotation: rotation_to_rows(&t.rotation),
        translation: t.translation.into(),
    };
    std::fs::write(path, serde_json::to_string_pretty(&record)?)?;
    Ok(())
}

pub fn read_transform(path: impl AsRef<Path>) -> Result<Sim3Transform> {
    let path = path.as_ref();
    let record: Sim3Record = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if !(record.scale > 0.0 && record.scale.is_finite()) {
        return Err(Error::Format {
            path: path.display().to_string(),
            reason: format!("scale must be positive and finite, got {}", record.scale),
        });
    }
    let rotation = rotation_from_rows(&record.rotation).map_err(|e| Error::Format {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    Ok(Sim3Transform::new(record.scale, rotation, Vec3::from(record.translation)))
}

/// Writes any serializable report as pretty-printed JSON.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Rotation3;

    #[test]
    fn transform_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.json");
        let t = Sim3Transform::new(
            1.25,
            Rotation3::from_euler_angles(0.2, 0.3, -1.1),
            Vec3::new(-4.0, 0.5, 9.0),
        );
        write_transform(&path, &t).unwrap();
        let back = read_transform(&path).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rejects_bad_scale() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.json");
        std::fs::write(
            &path,
            r#"{"scale":-1.0,"rotation":[[1,0,0],[0,1,0],[0,0,1]],"translation":[0,0,0]}"#,
        )
        .unwrap();
        assert!(matches!(read_transform(&path), Err(Error::Format { .. })));
    }
}
