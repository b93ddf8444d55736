//! Reconstruction quality metrics: RMS error over marked reference pairs and
//! density-normalized precision/recall/F-score between point clouds.

use crate::geom::{apply_sim3, Point3, Sim3Transform, Vec3};
use crate::spatial::PointGrid;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

/// A marked point pair: the same physical feature expressed once in the
/// reconstruction frame and once in the frame of the scan that saw it.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePair {
    /// Position in the reconstruction frame.
    pub sfm: Point3,
    /// Position in the scan's own frame.
    pub laser: Point3,
    /// Which scan `laser` belongs to; selects the transform used to map it
    /// into the reconstruction frame.
    pub scan: usize,
    /// Free-form region tag (for per-region breakdowns in reports).
    pub region: String,
}

/// RMS reference-pair error, overall and per region tag.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RmsReport {
    /// Root-mean-square distance in meters.
    pub rms_m: f64,
    pub pair_count: usize,
    /// RMS per region tag, keyed by tag.
    pub per_region_rms_m: BTreeMap<String, f64>,
}

/// Maps each pair's laser-side point through its scan's transform and
/// reports the RMS distance to the reconstruction-side point.
pub fn rms_reference_error(
    pairs: &[ReferencePair],
    transforms: &[Sim3Transform],
) -> Result<RmsReport> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no reference pairs".into()));
    }
    let mut total = 0.0;
    let mut by_region: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for (i, pair) in pairs.iter().enumerate() {
        let t = transforms.get(pair.scan).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "pair {i} references scan {} but only {} transforms given",
                pair.scan,
                transforms.len()
            ))
        })?;
        let err2 = (apply_sim3(t, &pair.laser) - pair.sfm).norm_squared();
        total += err2;
        let slot = by_region.entry(pair.region.clone()).or_insert((0.0, 0));
        slot.0 += err2;
        slot.1 += 1;
    }
    Ok(RmsReport {
        rms_m: (total / pairs.len() as f64).sqrt(),
        pair_count: pairs.len(),
        per_region_rms_m: by_region
            .into_iter()
            .map(|(k, (sum, n))| (k, (sum / n as f64).sqrt()))
            .collect(),
    })
}

/// Collapses a cloud onto a voxel grid anchored at the origin: every voxel
/// of side `voxel` that contains points is replaced by their centroid.
/// Output is ordered by voxel index (lexicographic), so it is independent of
/// hash-map iteration order.
pub fn voxel_resample(points: &[Point3], voxel: f64) -> Result<Vec<Point3>> {
    if !(voxel > 0.0 && voxel.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "voxel size must be positive, got {voxel}"
        )));
    }
    let mut cells: HashMap<[i64; 3], (Vec3, usize)> = HashMap::new();
    for p in points {
        let key = [
            (p.x / voxel).floor() as i64,
            (p.y / voxel).floor() as i64,
            (p.z / voxel).floor() as i64,
        ];
        let slot = cells.entry(key).or_insert((Vec3::zeros(), 0));
        slot.0 += p.coords;
        slot.1 += 1;
    }
    let mut entries: Vec<([i64; 3], (Vec3, usize))> = cells.into_iter().collect();
    entries.sort_unstable_by_key(|(k, _)| *k);
    Ok(entries
        .into_iter()
        .map(|(_, (sum, n))| Point3::from(sum / n as f64))
        .collect())
}

/// Precision/recall/F-score between a reconstruction and a reference cloud.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrfReport {
    /// Distance tolerance in meters.
    pub tau_m: f64,
    /// Percentage of (resampled) reconstruction points within `tau` of the
    /// reference.
    pub precision_pct: f64,
    /// Percentage of (resampled) reference points within `tau` of the
    /// reconstruction.
    pub recall_pct: f64,
    /// Harmonic mean of precision and recall, as a percentage.
    pub fscore_pct: f64,
    /// Reconstruction points after voxel resampling.
    pub recon_points: usize,
    /// Reference points after voxel resampling.
    pub reference_points: usize,
}

/// Fraction (as a percentage) of `from` points with a `to` point within
/// `tau`. Both clouds must already be resampled.
fn coverage_pct(from: &[Point3], to: &[Point3], tau: f64) -> f64 {
    let grid = PointGrid::build(to, tau);
    let hits = from.iter().filter(|p| grid.any_within(p, tau)).count();
    100.0 * hits as f64 / from.len() as f64
}

fn fscore_pct(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Compares a reconstruction against a reference cloud at tolerance `tau`.
///
/// Both clouds are first resampled on a voxel grid of side `tau / 2`
/// (anchored at the origin) so that a densely sampled surface does not
/// dominate the percentages. A point counts as covered when the other cloud
/// has a resampled point within `tau` (inclusive).
pub fn precision_recall_fscore(
    recon: &[Point3],
    reference: &[Point3],
    tau: f64,
) -> Result<PrfReport> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    if recon.is_empty() || reference.is_empty() {
        return Err(Error::InvalidArgument(
            "precision/recall needs nonempty reconstruction and reference clouds".into(),
        ));
    }
    let recon_r = voxel_resample(recon, tau / 2.0)?;
    let ref_r = voxel_resample(reference, tau / 2.0)?;
    let precision = coverage_pct(&recon_r, &ref_r, tau);
    let recall = coverage_pct(&ref_r, &recon_r, tau);
    Ok(PrfReport {
        tau_m: tau,
        precision_pct: precision,
        recall_pct: recall,
        fscore_pct: fscore_pct(precision, recall),
        recon_points: recon_r.len(),
        reference_points: ref_r.len(),
    })
}
