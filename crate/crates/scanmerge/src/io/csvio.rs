//! CSV formats for 3D-3D correspondences, 2D feature observations, and
//! reference point pairs.
//!
//! All files carry a header row. The correspondence columns `scan` and
//! `point` are optional; empty cells mean "not set" and survive a
//! write/read round trip.

use crate::merge::Observation;
use crate::metrics::ReferencePair;
use crate::register::{Channel, Correspondence};
use crate::{Error, Result};
use crate::geom::Point3;
use std::path::Path;

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format { path: path.display().to_string(), reason: reason.into() }
}

fn parse_f64(path: &Path, field: &str, value: &str) -> Result<f64> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|_| format_err(path, format!("bad number for {field}: {value:?}")))
}

fn parse_usize(path: &Path, field: &str, value: &str) -> Result<usize> {
    value
        .trim()
        .parse::<usize>()
        .map_err(|_| format_err(path, format!("bad index for {field}: {value:?}")))
}

fn column_index(path: &Path, headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| format_err(path, format!("missing column {name}")))
}

pub fn write_correspondences(path: impl AsRef<Path>, pairs: &[Correspondence]) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record([
        "src_x", "src_y", "src_z", "dst_x", "dst_y", "dst_z", "channel", "weight", "scan",
        "point",
    ])?;
    for c in pairs {
        w.write_record([
            c.src.x.to_string(),
            c.src.y.to_string(),
            c.src.z.to_string(),
            c.dst.x.to_string(),
            c.dst.y.to_string(),
            c.dst.z.to_string(),
            match c.channel {
                Channel::Ground => "ground".to_string(),
                Channel::Aerial => "aerial".to_string(),
            },
            c.weight.to_string(),
            c.scan.map(|s| s.to_string()).unwrap_or_default(),
            c.point.map(|p| p.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_correspondences(path: impl AsRef<Path>) -> Result<Vec<Correspondence>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let col = |name: &str| column_index(path, &headers, name);
    let (sx, sy, sz) = (col("src_x")?, col("src_y")?, col("src_z")?);
    let (dx, dy, dz) = (col("dst_x")?, col("dst_y")?, col("dst_z")?);
    let ch = col("channel")?;
    let wt = col("weight")?;
    let scan_col = headers.iter().position(|h| h.trim() == "scan");
    let point_col = headers.iter().position(|h| h.trim() == "point");
    let mut out = Vec::new();
    for record in r.records() {
        let record = record?;
        let get = |i: usize| record.get(i).unwrap_or("");
        let channel = match get(ch).trim() {
            "ground" => Channel::Ground,
            "aerial" => Channel::Aerial,
            other => return Err(format_err(path, format!("unknown channel {other:?}"))),
        };
        let weight = parse_f64(path, "weight", get(wt))?;
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(format_err(path, format!("weight must be positive, got {weight}")));
        }
        let opt_index = |col: Option<usize>, name: &str| -> Result<Option<usize>> {
            match col {
                Some(i) if !get(i).trim().is_empty() => {
                    Ok(Some(parse_usize(path, name, get(i))?))
                }
                _ => Ok(None),
            }
        };
        out.push(Correspondence {
            src: Point3::new(
                parse_f64(path, "src_x", get(sx))?,
                parse_f64(path, "src_y", get(sy))?,
                parse_f64(path, "src_z", get(sz))?,
            ),
            dst: Point3::new(
                parse_f64(path, "dst_x", get(dx))?,
                parse_f64(path, "dst_y", get(dy))?,
                parse_f64(path, "dst_z", get(dz))?,
            ),
            channel,
            weight,
            scan: opt_index(scan_col, "scan")?,
            point: opt_index(point_col, "point")?,
        });
    }
    Ok(out)
}

pub fn write_observations(path: impl AsRef<Path>, obs: &[Observation]) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["camera", "point", "u", "v", "feature_scale"])?;
    for o in obs {
        w.write_record([
            o.camera.to_string(),
            o.point.to_string(),
            o.pixel[0].to_string(),
            o.pixel[1].to_string(),
            o.feature_scale.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_observations(path: impl AsRef<Path>) -> Result<Vec<Observation>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let cam = column_index(path, &headers, "camera")?;
    let pt = column_index(path, &headers, "point")?;
    let (uc, vc) = (column_index(path, &headers, "u")?, column_index(path, &headers, "v")?);
    let fs = column_index(path, &headers, "feature_scale")?;
    let mut out = Vec::new();
    for record in r.records() {
        let record = record?;
        let get = |i: usize| record.get(i).unwrap_or("");
        let feature_scale = parse_f64(path, "feature_scale", get(fs))?;
        if !(feature_scale > 0.0 && feature_scale.is_finite()) {
            return Err(format_err(
                path,
                format!("feature_scale must be positive, got {feature_scale}"),
            ));
        }
        out.push(Observation {
            camera: parse_usize(path, "camera", get(cam))?,
            point: parse_usize(path, "point", get(pt))?,
            pixel: [parse_f64(path, "u", get(uc))?, parse_f64(path, "v", get(vc))?],
            feature_scale,
        });
    }
    Ok(out)
}

pub fn write_reference_pairs(path: impl AsRef<Path>, pairs: &[ReferencePair]) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record([
        "sfm_x", "sfm_y", "sfm_z", "laser_x", "laser_y", "laser_z", "scan", "region",
    ])?;
    for p in pairs {
        w.write_record([
            p.sfm.x.to_string(),
            p.sfm.y.to_string(),
            p.sfm.z.to_string(),
            p.laser.x.to_string(),
            p.laser.y.to_string(),
            p.laser.z.to_string(),
            p.scan.to_string(),
            p.region.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_reference_pairs(path: impl AsRef<Path>) -> Result<Vec<ReferencePair>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let col = |name: &str| column_index(path, &headers, name);
    let (ax, ay, az) = (col("sfm_x")?, col("sfm_y")?, col("sfm_z")?);
    let (bx, by, bz) = (col("laser_x")?, col("laser_y")?, col("laser_z")?);
    let scan = col("scan")?;
    let region = col("region")?;
    let mut out = Vec::new();
    for record in r.records() {
        let record = record?;
        let get = |i: usize| record.get(i).unwrap_or("");
        out.push(ReferencePair {
            sfm: Point3::new(
                parse_f64(path, "sfm_x", get(ax))?,
                parse_f64(path, "sfm_y", get(ay))?,
                parse_f64(path, "sfm_z", get(az))?,
            ),
            laser: Point3::new(
                parse_f64(path, "laser_x", get(bx))?,
                parse_f64(path, "laser_y", get(by))?,
                parse_f64(path, "laser_z", get(bz))?,
            ),
            scan: parse_usize(path, "scan", get(scan))?,
            region: get(region).trim().to_string(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correspondences_round_trip_with_optional_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let pairs = vec![
            Correspondence {
                src: Point3::new(0.5, -1.0, 2.0),
                dst: Point3::new(0.25, 3.5, -0.125),
                channel: Channel::Ground,
                weight: 1.0,
                scan: Some(2),
                point: None,
            },
            Correspondence {
                src: Point3::new(1e-9, 4.0, 5.0),
                dst: Point3::new(7.0, 8.0, 9.0),
                channel: Channel::Aerial,
                weight: 0.5,
                scan: None,
                point: Some(41),
            },
        ];
        write_correspondences(&path, &pairs).unwrap();
        let back = read_correspondences(&path).unwrap();
        assert_eq!(back, pairs);
    }

    #[test]
    fn correspondences_load_without_optional_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        std::fs::write(
            &path,
            "src_x,src_y,src_z,dst_x,dst_y,dst_z,channel,weight\n1,2,3,4,5,6,ground,1.0\n",
        )
        .unwrap();
        let back = read_correspondences(&path).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].scan, None);
        assert_eq!(back[0].point, None);
    }

    #[test]
    fn rejects_bad_channel_and_weight() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        std::fs::write(
            &path,
            "src_x,src_y,src_z,dst_x,dst_y,dst_z,channel,weight\n1,2,3,4,5,6,sideways,1.0\n",
        )
        .unwrap();
        assert!(matches!(read_correspondences(&path), Err(Error::Format { .. })));
        std::fs::write(
            &path,
            "src_x,src_y,src_z,dst_x,dst_y,dst_z,channel,weight\n1,2,3,4,5,6,ground,-2\n",
        )
        .unwrap();
        assert!(matches!(read_correspondences(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn observations_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("obs.csv");
        let obs = vec![
            Observation { camera: 0, point: 17, pixel: [320.25, 101.5], feature_scale: 1.0 },
            Observation { camera: 3, point: 2, pixel: [0.5, 479.0], feature_scale: 2.5 },
        ];
        write_observations(&path, &obs).unwrap();
        assert_eq!(read_observations(&path).unwrap(), obs);
    }

    #[test]
    fn reference_pairs_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ref.csv");
        let pairs = vec![ReferencePair {
            sfm: Point3::new(1.0, 2.0, 3.0),
            laser: Point3::new(4.0, 5.0, 6.0),
            scan: 1,
            region: "indoor".to_string(),
        }];
        write_reference_pairs(&path, &pairs).unwrap();
        assert_eq!(read_reference_pairs(&path).unwrap(), pairs);
    }
}
