//! Coarse scan-to-reconstruction registration: closed-form weighted
//! similarity estimation and a RANSAC wrapper for contaminated
//! correspondence sets.

use crate::geom::{apply_sim3, Mat3, Point3, Rotation3, Sim3Transform, Vec3};
use crate::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Where a 3D-3D correspondence came from. Ground and aerial matches move
/// through the pipeline separately so their contributions can be traced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channel {
    Ground,
    Aerial,
}

/// A 3D-3D correspondence between a point in a scan's own frame (`src`) and
/// a point in the reconstruction frame (`dst`).
#[derive(Debug, Clone, PartialEq)]
pub struct Correspondence {
    pub src: Point3,
    pub dst: Point3,
    pub channel: Channel,
    /// Relative confidence; must be positive.
    pub weight: f64,
    /// Index of the scan `src` belongs to, when known.
    pub scan: Option<usize>,
    /// Index of the reconstruction point `dst` tracks, when the match is
    /// tied to a live structure point rather than a fixed location.
    pub point: Option<usize>,
}

/// Closed-form weighted similarity estimation: finds the `s, R, t`
/// minimizing `sum w_i ||s R src_i + t - dst_i||^2` via the SVD of the
/// weighted cross-covariance, with the usual sign correction that keeps `R`
/// a proper rotation.
///
/// Errors when fewer than 3 pairs are given, a weight is not positive, or
/// the source points are too close to collinear for the rotation to be
/// determined (second singular value vanishing).
pub fn umeyama_sim3(
    src: &[Point3],
    dst: &[Point3],
    weights: Option<&[f64]>,
) -> Result<Sim3Transform> {
    if src.len() != dst.len() {
        return Err(Error::InvalidArgument(format!(
            "{} source points vs {} destination points",
            src.len(),
            dst.len()
        )));
    }
    if src.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "similarity estimation needs at least 3 pairs, got {}",
            src.len()
        )));
    }
    if let Some(w) = weights {
        if w.len() != src.len() {
            return Err(Error::InvalidArgument(format!(
                "{} weights for {} pairs",
                w.len(),
                src.len()
            )));
        }
        if let Some(bad) = w.iter().find(|&&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument(format!("weights must be positive, got {bad}")));
        }
    }
    let n = src.len();
    let w_at = |i: usize| weights.map_or(1.0, |w| w[i]);
    let w_total: f64 = (0..n).map(w_at).sum();

    let mut mu_src = Vec3::zeros();
    let mut mu_dst = Vec3::zeros();
    for i in 0..n {
        mu_src += w_at(i) * src[i].coords;
        mu_dst += w_at(i) * dst[i].coords;
    }
    mu_src /= w_total;
    mu_dst /= w_total;

    let mut cov = Mat3::zeros();
    let mut var_src = 0.0;
    for i in 0..n {
        let a = src[i].coords - mu_src;
        let b = dst[i].coords - mu_dst;
        cov += w_at(i) * (b * a.transpose());
        var_src += w_at(i) * a.norm_squared();
    }
    cov /= w_total;
    var_src /= w_total;
    if var_src <= 0.0 {
        return Err(Error::RankDeficient("all source points coincide".into()));
    }

    let svd = cov.svd(true, true);
    let u = svd.u.expect("svd of 3x3 always yields u");
    let v_t = svd.v_t.expect("svd of 3x3 always yields v_t");
    let d = svd.singular_values;
    // Collinear sources leave the rotation about the line undetermined.
    if d[1] <= 1e-12 * d[0].max(f64::MIN_POSITIVE) {
        return Err(Error::RankDeficient(format!(
            "source points are (near-)collinear (singular values {:.3e}, {:.3e}, {:.3e})",
            d[0], d[1], d[2]
        )));
    }
    let mut sign = Mat3::identity();
    if (u * v_t).determinant() < 0.0 {
        sign[(2, 2)] = -1.0;
    }
    let rotation = Rotation3::from_matrix_unchecked(u * sign * v_t);
    let scale = (d[0] * sign[(0, 0)] + d[1] * sign[(1, 1)] + d[2] * sign[(2, 2)]) / var_src;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::RankDeficient(format!(
            "estimated scale {scale} is not positive"
        )));
    }
    let translation = mu_dst - scale * (rotation * mu_src);
    Ok(Sim3Transform::new(scale, rotation, translation))
}

/// RANSAC configuration. Defaults: 100 minimal samples and a 0.1 m inlier
/// threshold.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RansacParams {
    /// Number of valid (non-degenerate) minimal samples to evaluate.
    pub iterations: usize,
    /// Inlier when the transformed source lands strictly closer than this
    /// to the destination, in meters.
    pub dist_thresh: f64,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self { iterations: 100, dist_thresh: 0.1, seed: 0 }
    }
}

/// Outcome of robust registration.
#[derive(Debug, Clone)]
pub struct RansacResult {
    /// Weighted refit on the winning inlier set; the transform to use.
    pub transform: Sim3Transform,
    /// Best raw minimal-sample transform, kept for diagnostics.
    pub minimal_transform: Sim3Transform,
    /// Indices of inliers under `minimal_transform`, ascending.
    pub inliers: Vec<usize>,
    /// Degenerate minimal samples that were redrawn.
    pub samples_skipped: usize,
}

/// Robust similarity estimation from contaminated correspondences: draws
/// 3-pair minimal samples with a seeded generator, keeps the sample with the
/// most inliers (first such sample on ties), then refits on its inliers with
/// their weights.
///
/// Degenerate samples (collinear triples) are redrawn without consuming an
/// iteration. Errors when fewer than 3 correspondences are given, when no
/// valid sample can be drawn, or when the best model has fewer than 3
/// inliers.
pub fn ransac_sim3(pairs: &[Correspondence], params: &RansacParams) -> Result<RansacResult> {
    if pairs.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "robust registration needs at least 3 correspondences, got {}",
            pairs.len()
        )));
    }
    if !(params.dist_thresh > 0.0 && params.dist_thresh.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "distance threshold must be positive, got {}",
            params.dist_thresh
        )));
    }
    if params.iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be nonzero".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(params.seed);
    let max_attempts = params.iterations.saturating_mul(100);
    let mut valid = 0usize;
    let mut skipped = 0usize;
    let mut attempts = 0usize;
    let mut best: Option<(usize, Sim3Transform, Vec<usize>)> = None;

    while valid < params.iterations {
        if attempts >= max_attempts {
            break;
        }
        attempts += 1;
        let idx = rand::seq::index::sample(&mut rng, pairs.len(), 3);
        let src: Vec<Point3> = idx.iter().map(|i| pairs[i].src).collect();
        let dst: Vec<Point3> = idx.iter().map(|i| pairs[i].dst).collect();
        let model = match umeyama_sim3(&src, &dst, None) {
            Ok(m) => m,
            Err(Error::RankDeficient(_)) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        valid += 1;
        let inliers: Vec<usize> = pairs
            .iter()
            .enumerate()
            .filter(|(_, p)| (apply_sim3(&model, &p.src) - p.dst).norm() < params.dist_thresh)
            .map(|(i, _)| i)
            .collect();
        if best.as_ref().is_none_or(|(count, _, _)| inliers.len() > *count) {
            best = Some((inliers.len(), model, inliers));
        }
    }

    let Some((count, minimal_transform, inliers)) = best else {
        return Err(Error::RegistrationFailed(format!(
            "no valid minimal sample in {attempts} attempts (all samples degenerate)"
        )));
    };
    if count < 3 {
        return Err(Error::RegistrationFailed(format!(
            "best model explains only {count} correspondences"
        )));
    }
    let src: Vec<Point3> = inliers.iter().map(|&i| pairs[i].src).collect();
    let dst: Vec<Point3> = inliers.iter().map(|&i| pairs[i].dst).collect();
    let weights: Vec<f64> = inliers.iter().map(|&i| pairs[i].weight).collect();
    let transform = umeyama_sim3(&src, &dst, Some(&weights))?;
    Ok(RansacResult { transform, minimal_transform, inliers, samples_skipped: skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_sim3(rng: &mut ChaCha12Rng) -> Sim3Transform {
        let axis = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let axis = if axis.norm() < 1e-6 { Vec3::x() } else { axis };
        Sim3Transform::new(
            rng.random_range(0.5..2.0),
            Rotation3::from_axis_angle(
                &nalgebra::Unit::new_normalize(axis),
                rng.random_range(-3.0..3.0),
            ),
            Vec3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            ),
        )
    }

    fn random_points(rng: &mut ChaCha12Rng, n: usize) -> Vec<Point3> {
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-4.0..4.0),
                    rng.random_range(-4.0..4.0),
                    rng.random_range(-4.0..4.0),
                )
            })
            .collect()
    }

    fn transform_error(a: &Sim3Transform, b: &Sim3Transform) -> (f64, f64, f64) {
        let rel = a.rotation.inverse() * b.rotation;
        // trace can exceed 3 by rounding; clamp before acos.
        let rot = ((rel.matrix().trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
        let scale = (a.scale / b.scale - 1.0).abs();
        let trans = (a.translation - b.translation).norm();
        (rot, scale, trans)
    }

    #[test]
    fn recovers_exact_similarity() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let truth = random_sim3(&mut rng);
        let src = random_points(&mut rng, 20);
        let dst: Vec<Point3> = src.iter().map(|p| apply_sim3(&truth, p)).collect();
        let got = umeyama_sim3(&src, &dst, None).unwrap();
        let (rot, scale, trans) = transform_error(&got, &truth);
        assert!(rot < 1e-12 && scale < 1e-12 && trans < 1e-10, "{rot} {scale} {trans}");
    }

    #[test]
    fn weights_shift_the_fit_toward_heavy_pairs() {
        // Two clean pairs-groups: heavy weights on an exact-identity group,
        // light weight on one displaced pair. The fit must land much closer
        // to identity than the unweighted fit.
        let src = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
            Point3::new(1.0, 1.0, 1.0),
        ];
        let mut dst = src.clone();
        dst[4] = Point3::new(1.4, 1.4, 1.4);
        let unweighted = umeyama_sim3(&src, &dst, None).unwrap();
        let weighted = umeyama_sim3(&src, &dst, Some(&[100.0, 100.0, 100.0, 100.0, 0.01])).unwrap();
        let res = |t: &Sim3Transform| {
            src.iter()
                .zip(&dst)
                .take(4)
                .map(|(s, d)| (apply_sim3(t, s) - d).norm_squared())
                .sum::<f64>()
        };
        assert!(res(&weighted) < 1e-6);
        assert!(res(&weighted) < res(&unweighted) * 1e-3);
    }

    #[test]
    fn collinear_sources_are_rank_deficient() {
        let src: Vec<Point3> = (0..5).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let dst = src.clone();
        assert!(matches!(
            umeyama_sim3(&src, &dst, None),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn coincident_sources_are_rank_deficient() {
        let src = vec![Point3::new(1.0, 2.0, 3.0); 4];
        let dst = random_points(&mut ChaCha12Rng::seed_from_u64(1), 4);
        assert!(matches!(
            umeyama_sim3(&src, &dst, None),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn reflection_input_still_yields_proper_rotation() {
        // Destination is a mirrored copy; the closest proper rotation must
        // still come out with determinant +1.
        let src = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ];
        let dst: Vec<Point3> = src.iter().map(|p| Point3::new(p.x, p.y, -p.z)).collect();
        let got = umeyama_sim3(&src, &dst, None).unwrap();
        assert!(got.rotation.matrix().determinant() > 0.0);
    }

    #[test]
    fn ransac_rejects_outliers_and_is_deterministic() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let truth = random_sim3(&mut rng);
        let src = random_points(&mut rng, 60);
        let mut pairs: Vec<Correspondence> = src
            .iter()
            .map(|p| Correspondence {
                src: *p,
                dst: apply_sim3(&truth, p),
                channel: Channel::Ground,
                weight: 1.0,
                scan: None,
                point: None,
            })
            .collect();
        for i in 0..18 {
            pairs[i * 3].dst += Vec3::new(
                rng.random_range(1.0..3.0),
                rng.random_range(1.0..3.0),
                rng.random_range(1.0..3.0),
            );
        }
        let params = RansacParams { seed: 9, ..Default::default() };
        let a = ransac_sim3(&pairs, &params).unwrap();
        let b = ransac_sim3(&pairs, &params).unwrap();
        assert_eq!(a.transform, b.transform);
        assert_eq!(a.inliers, b.inliers);
        let (rot, scale, trans) = transform_error(&a.transform, &truth);
        assert!(rot < 1e-9 && scale < 1e-9 && trans < 1e-8, "{rot} {scale} {trans}");
        assert_eq!(a.inliers.len(), 60 - 18);
    }

    #[test]
    fn ransac_fails_cleanly_on_all_collinear_input() {
        let pairs: Vec<Correspondence> = (0..10)
            .map(|i| Correspondence {
                src: Point3::new(i as f64, 0.0, 0.0),
                dst: Point3::new(i as f64, 0.0, 0.0),
                channel: Channel::Ground,
                weight: 1.0,
                scan: None,
                point: None,
            })
            .collect();
        assert!(matches!(
            ransac_sim3(&pairs, &RansacParams::default()),
            Err(Error::RegistrationFailed(_))
        ));
    }
}
