//! Scan-location planning over a coarse proxy mesh.
//!
//! A laser scan is expensive, so stations are chosen ahead of time on a rough
//! mesh of the scene (typically triangulated from an initial image-only
//! reconstruction). Each candidate station casts an evenly distributed bundle
//! of rays; facets hit first form the station's visibility set. A facet is
//! worth its own area plus the area of nearby facets (coarse meshing marks
//! the featureless surfaces image matching fails on, so bigger facets mean
//! more need for a scan). A station's score is the mean worth of what it
//! sees, and stations are picked greedily: highest score first, then the
//! candidate maximizing total score over total pairwise overlap, until the
//! selected stations jointly cover a target fraction of everything visible.
//!
//! The published form of the selection ratio sums overlap over every
//! unselected candidate, which cannot distinguish candidates; the plausible
//! intent charges each candidate only its own overlap against the selected
//! set. Both are implemented (see [`OverlapDenominator`]); the plausible
//! reading is the default.

use crate::geom::{Point3, TriMesh, Vec3};
use crate::spatial::{MeshBvh, PointGrid};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Default ray count per candidate station.
pub const DEFAULT_N_RAYS: usize = 1000;
/// Default facet-neighborhood radius in meters.
pub const DEFAULT_R_F: f64 = 0.1;
/// Default coverage threshold.
pub const DEFAULT_T_C: f64 = 0.125;

/// A candidate scanner station. Candidates are listed in index order;
/// `index` must equal the position in the list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialLocation {
    pub index: usize,
    /// Scanner origin in meters.
    pub position: [f64; 3],
}

impl PotentialLocation {
    pub fn new(index: usize, position: Point3) -> Self {
        Self { index, position: position.coords.into() }
    }

    pub fn point(&self) -> Point3 {
        Point3::from(Vec3::from(self.position))
    }
}

/// What one candidate station sees and how much it is worth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityRecord {
    /// Candidate index.
    pub location: usize,
    /// Facet indices hit first by at least one ray; sorted, no duplicates.
    pub facets: Vec<usize>,
    /// Per-facet worth (m^2), keyed by facet index.
    pub facet_scores: BTreeMap<usize, f64>,
    /// Mean of `facet_scores` (m^2); 0 when the station sees nothing.
    pub score: f64,
}

/// Which overlaps the greedy selection ratio charges against a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverlapDenominator {
    /// Overlap among the already-selected pairs plus the evaluated
    /// candidate's overlap with each selected station. Distinguishes
    /// candidates by their own redundancy; the default.
    #[default]
    EvaluatedCandidate,
    /// Overlap among the already-selected pairs plus every unselected
    /// candidate's overlap with each selected station, exactly as the
    /// selection ratio is usually written. The denominator is then the same
    /// for every candidate, so the ratio degenerates to ranking by score.
    AllUnselected,
}

/// The planned stations, in selection order, with the decision trail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    /// Candidate indices in the order they were selected.
    pub selected: Vec<usize>,
    /// Number of selected stations.
    pub count: usize,
    /// Fraction of all visible facets covered by the selection.
    pub coverage: f64,
    /// Coverage after each selection; nondecreasing.
    pub coverage_trace: Vec<f64>,
    /// Objective value of each selection: the score of the first pick, then
    /// the selection ratio of each subsequent pick. `None` marks a ratio
    /// with zero denominator (no overlap anywhere), where candidates are
    /// ranked by numerator alone.
    pub objective_trace: Vec<Option<f64>>,
}

/// `n_r` unit vectors spread evenly over the sphere by the equal-area
/// spiral: point `k` lies at height `z = 1 - (2k+1)/n_r` and azimuth
/// `k * pi * (3 - sqrt(5))`. Deterministic.
pub fn sample_sphere_directions(n_r: usize) -> Result<Vec<Vec3>> {
    if n_r == 0 {
        return Err(Error::InvalidArgument("ray count must be nonzero".into()));
    }
    let golden_angle = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    Ok((0..n_r)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / n_r as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden_angle * k as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect())
}

/// Facets hit first by at least one of the rays cast from `origin`; sorted
/// and deduplicated. Only nearest hits count: a scanner sees first surfaces.
pub fn cast_visibility(bvh: &MeshBvh, origin: &Point3, directions: &[Vec3]) -> Vec<usize> {
    let mut seen: Vec<usize> = directions
        .iter()
        .filter_map(|d| bvh.first_hit(origin, d).map(|h| h.facet))
        .collect();
    seen.sort_unstable();
    seen.dedup();
    seen
}

/// Worth of facet `m`: its own area plus the areas of all facets whose
/// centers lie strictly closer than `r_f` to its center.
pub fn facet_score(mesh: &TriMesh, m: usize, r_f: f64) -> Result<f64> {
    if m >= mesh.facet_count() {
        return Err(Error::InvalidArgument(format!(
            "facet {m} out of range ({} facets)",
            mesh.facet_count()
        )));
    }
    validate_r_f(r_f)?;
    let center = mesh.facet_center(m);
    let mut a = mesh.facet_area(m);
    for p in 0..mesh.facet_count() {
        if p != m && (mesh.facet_center(p) - center).norm() < r_f {
            a += mesh.facet_area(p);
        }
    }
    Ok(a)
}

fn validate_r_f(r_f: f64) -> Result<()> {
    if !(r_f > 0.0 && r_f.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "neighbor radius must be positive, got {r_f}"
        )));
    }
    Ok(())
}

/// [`facet_score`] for every facet at once, grid-accelerated.
pub fn facet_scores(mesh: &TriMesh, r_f: f64) -> Result<Vec<f64>> {
    validate_r_f(r_f)?;
    let grid = PointGrid::build(mesh.centers(), r_f);
    Ok((0..mesh.facet_count())
        .map(|m| {
            let center = mesh.facet_center(m);
            let mut a = mesh.facet_area(m);
            grid.for_each_within(&center, r_f, |p, d| {
                // Grid query is inclusive; the neighbor rule is strict.
                if p as usize != m && d < r_f {
                    a += mesh.facet_area(p as usize);
                }
            });
            a
        })
        .collect())
}

/// Mean facet worth over a station's visible set; 0 for a station that sees
/// nothing (it can never be preferred).
pub fn location_score(facet_scores: &[f64]) -> f64 {
    if facet_scores.is_empty() {
        return 0.0;
    }
    facet_scores.iter().sum::<f64>() / facet_scores.len() as f64
}

/// Intersection over union of two sorted facet-index sets; 0 when both are
/// empty (no overlap penalty between blind stations).
pub fn pairwise_iou(a: &[usize], b: &[usize]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut inter = 0usize;
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Builds one [`VisibilityRecord`] per candidate: ray casting, per-facet
/// worth, and the station score. Candidates are processed in parallel; the
/// result order and contents are independent of thread count.
pub fn build_visibility_records(
    mesh: &TriMesh,
    locations: &[PotentialLocation],
    n_rays: usize,
    r_f: f64,
) -> Result<Vec<VisibilityRecord>> {
    for (i, loc) in locations.iter().enumerate() {
        if loc.index != i {
            return Err(Error::InvalidArgument(format!(
                "candidate at position {i} has index {}; indices must be contiguous",
                loc.index
            )));
        }
        if !loc.position.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidArgument(format!("candidate {i} has non-finite position")));
        }
    }
    let directions = sample_sphere_directions(n_rays)?;
    let all_scores = facet_scores(mesh, r_f)?;
    let bvh = MeshBvh::build(mesh);
    Ok(locations
        .par_iter()
        .map(|loc| {
            let facets = cast_visibility(&bvh, &loc.point(), &directions);
            let facet_scores: BTreeMap<usize, f64> =
                facets.iter().map(|&m| (m, all_scores[m])).collect();
            let per_facet: Vec<f64> = facets.iter().map(|&m| all_scores[m]).collect();
            VisibilityRecord {
                location: loc.index,
                facets,
                facet_scores,
                score: location_score(&per_facet),
            }
        })
        .collect())
}

/// Count of distinct facets across a union of sorted sets.
fn union_size(sets: &[&[usize]]) -> usize {
    let mut all: Vec<usize> = sets.iter().flat_map(|s| s.iter().copied()).collect();
    all.sort_unstable();
    all.dedup();
    all.len()
}

/// Greedy station selection.
///
/// The first pick maximizes the station score. Each later pick maximizes
/// (sum of selected scores + candidate score) / (overlap denominator per
/// `denominator`); a zero denominator ranks by numerator alone. Ties resolve
/// to the lowest candidate index. Selection continues while the selected
/// stations cover less than `t_c` of all visible facets, so the pick that
/// crosses the threshold is kept; it stops early when every remaining
/// candidate has score 0 (nothing left worth seeing).
///
/// Errors when `t_c` is outside (0, 1] or every station sees nothing.
pub fn plan_locations(
    records: &[VisibilityRecord],
    t_c: f64,
    denominator: OverlapDenominator,
) -> Result<PlanResult> {
    if !(t_c > 0.0 && t_c <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "coverage threshold must be in (0, 1], got {t_c}"
        )));
    }
    if records.is_empty() {
        return Err(Error::InvalidArgument("no visibility records".into()));
    }
    let total = union_size(&records.iter().map(|r| r.facets.as_slice()).collect::<Vec<_>>());
    if total == 0 {
        return Err(Error::InvalidArgument(
            "every station sees nothing; check mesh and candidate positions".into(),
        ));
    }

    let n = records.len();
    let iou = |a: usize, b: usize| pairwise_iou(&records[a].facets, &records[b].facets);

    // First pick: highest score, lowest index on ties.
    let first = (0..n)
        .max_by(|&a, &b| {
            records[a]
                .score
                .partial_cmp(&records[b].score)
                .expect("scores are finite")
                .then(b.cmp(&a))
        })
        .expect("records verified nonempty");

    let mut selected = vec![first];
    let mut is_selected = vec![false; n];
    is_selected[first] = true;
    let mut score_sum = records[first].score;
    // Overlap among selected pairs, maintained incrementally.
    let mut selected_pair_iou = 0.0f64;
    let mut covered: Vec<usize> = records[first].facets.clone();
    let mut coverage = covered.len() as f64 / total as f64;
    let mut coverage_trace = vec![coverage];
    let mut objective_trace: Vec<Option<f64>> = vec![Some(records[first].score)];

    while coverage < t_c && selected.len() < n {
        // Candidate-independent part of the literal denominator: overlap of
        // every unselected candidate against the selected set.
        let all_unselected_iou: f64 = match denominator {
            OverlapDenominator::AllUnselected => (0..n)
                .filter(|&c| !is_selected[c])
                .map(|c| selected.iter().map(|&s| iou(s, c)).sum::<f64>())
                .sum(),
            OverlapDenominator::EvaluatedCandidate => 0.0,
        };
        let mut best: Option<(bool, f64, usize)> = None; // (finite, key, candidate)
        for c in 0..n {
            if is_selected[c] {
                continue;
            }
            let numerator = score_sum + records[c].score;
            let den = selected_pair_iou
                + match denominator {
                    OverlapDenominator::EvaluatedCandidate => {
                        selected.iter().map(|&s| iou(s, c)).sum::<f64>()
                    }
                    OverlapDenominator::AllUnselected => all_unselected_iou,
                };
            // Zero denominator ranks above every finite ratio, by numerator.
            let key = (den > 0.0, if den > 0.0 { numerator / den } else { numerator });
            if best.is_none_or(|(bf, bk, _)| match (key.0, bf) {
                (false, true) => true,
                (true, false) => false,
                _ => key.1 > bk,
            }) {
                best = Some((key.0, key.1, c));
            }
        }
        let (finite, key, pick) = best.expect("unselected candidates remain");
        if records[pick].score == 0.0 && records.iter().enumerate().all(|(c, r)| {
            is_selected[c] || r.score == 0.0
        }) {
            break; // nothing left worth selecting
        }
        for &s in &selected {
            selected_pair_iou += iou(s, pick);
        }
        score_sum += records[pick].score;
        is_selected[pick] = true;
        selected.push(pick);
        covered.extend(records[pick].facets.iter().copied());
        covered.sort_unstable();
        covered.dedup();
        coverage = covered.len() as f64 / total as f64;
        coverage_trace.push(coverage);
        objective_trace.push(finite.then_some(key));
    }

    Ok(PlanResult {
        count: selected.len(),
        selected,
        coverage,
        coverage_trace,
        objective_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Rotation3, Sim3Transform};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn single_direction_points_along_x() {
        let dirs = sample_sphere_directions(1).unwrap();
        assert_eq!(dirs.len(), 1);
        assert_relative_eq!(dirs[0], Vec3::new(1.0, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn spiral_is_unit_length_and_balanced() {
        let n = 1000;
        let dirs = sample_sphere_directions(n).unwrap();
        assert_eq!(dirs.len(), n);
        let mut centroid = Vec3::zeros();
        let mut octants = [0usize; 8];
        for d in &dirs {
            assert!((d.norm() - 1.0).abs() < 1e-12);
            centroid += d;
            let o =
                ((d.x >= 0.0) as usize) << 2 | ((d.y >= 0.0) as usize) << 1 | (d.z >= 0.0) as usize;
            octants[o] += 1;
        }
        centroid /= n as f64;
        assert!(centroid.norm() < 0.05, "centroid {centroid:?}");
        let mut sorted = octants;
        sorted.sort_unstable();
        assert_eq!(sorted, [124, 124, 125, 125, 125, 125, 126, 126]);
        for c in octants {
            assert!((100..=150).contains(&c), "octant count {c}");
        }
    }

    #[test]
    fn zero_rays_is_an_error() {
        assert!(matches!(sample_sphere_directions(0), Err(Error::InvalidArgument(_))));
    }

    /// Regular icosahedron centered at the origin.
    fn icosahedron() -> TriMesh {
        let p = (1.0 + 5.0f64.sqrt()) / 2.0;
        let vertices = vec![
            Point3::new(-1.0, p, 0.0),
            Point3::new(1.0, p, 0.0),
            Point3::new(-1.0, -p, 0.0),
            Point3::new(1.0, -p, 0.0),
            Point3::new(0.0, -1.0, p),
            Point3::new(0.0, 1.0, p),
            Point3::new(0.0, -1.0, -p),
            Point3::new(0.0, 1.0, -p),
            Point3::new(p, 0.0, -1.0),
            Point3::new(p, 0.0, 1.0),
            Point3::new(-p, 0.0, -1.0),
            Point3::new(-p, 0.0, 1.0),
        ];
        let facets = vec![
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ];
        TriMesh::new(vertices, facets).unwrap()
    }

    #[test]
    fn center_of_closed_icosahedron_sees_every_facet() {
        let mesh = icosahedron();
        let bvh = MeshBvh::build(&mesh);
        let dirs = sample_sphere_directions(1000).unwrap();
        let seen = cast_visibility(&bvh, &Point3::origin(), &dirs);
        assert_eq!(seen, (0..20).collect::<Vec<_>>());
    }

    /// Axis-aligned rectangle in a constant-z plane, split into two facets.
    fn wall(z: f64, half: f64, vertices: &mut Vec<Point3>, facets: &mut Vec<[u32; 3]>) {
        let v0 = vertices.len() as u32;
        vertices.extend([
            Point3::new(-half, -half, z),
            Point3::new(half, -half, z),
            Point3::new(half, half, z),
            Point3::new(-half, half, z),
        ]);
        facets.push([v0, v0 + 1, v0 + 2]);
        facets.push([v0, v0 + 2, v0 + 3]);
    }

    #[test]
    fn nearer_wall_occludes_farther_wall() {
        let mut vertices = Vec::new();
        let mut facets = Vec::new();
        wall(1.0, 3.0, &mut vertices, &mut facets); // facets 0, 1
        wall(2.0, 1.0, &mut vertices, &mut facets); // facets 2, 3: fully hidden
        let mesh = TriMesh::new(vertices, facets).unwrap();
        let bvh = MeshBvh::build(&mesh);
        let dirs = sample_sphere_directions(2000).unwrap();
        let seen = cast_visibility(&bvh, &Point3::origin(), &dirs);
        assert!(seen.iter().all(|&f| f < 2), "occluded facets leaked: {seen:?}");
        assert!(!seen.is_empty());
    }

    #[test]
    fn facet_worth_adds_neighbors_inside_radius() {
        // Two identical triangles whose centers sit 0.05 apart.
        let mesh = TriMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(0.3, 0.0, 0.0),
                Point3::new(0.0, 0.3, 0.0),
                Point3::new(0.05, 0.0, 0.0),
                Point3::new(0.35, 0.0, 0.0),
                Point3::new(0.05, 0.3, 0.0),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        let area = mesh.facet_area(0);
        assert_relative_eq!(facet_score(&mesh, 0, 0.1).unwrap(), 2.0 * area, epsilon = 1e-12);
        assert_relative_eq!(facet_score(&mesh, 1, 0.1).unwrap(), 2.0 * area, epsilon = 1e-12);
        // Radius equal to the center distance is strict: no neighbor.
        assert_relative_eq!(facet_score(&mesh, 0, 0.05).unwrap(), area, epsilon = 1e-12);
        assert!(facet_score(&mesh, 2, 0.1).is_err());
    }

    #[test]
    fn batch_scores_match_per_facet_brute_force() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mut vertices = Vec::new();
        let mut facets = Vec::new();
        // A fan of small triangles around the origin.
        for i in 0..10 {
            let a = i as f64 * 0.5;
            let r = 0.1 + rng.random_range(0.0..0.05);
            let v0 = vertices.len() as u32;
            vertices.extend([
                Point3::new(r * a.cos(), r * a.sin(), 0.0),
                Point3::new(r * a.cos() + 0.05, r * a.sin(), 0.0),
                Point3::new(r * a.cos(), r * a.sin() + 0.05, 0.0),
            ]);
            facets.push([v0, v0 + 1, v0 + 2]);
        }
        let mesh = TriMesh::new(vertices, facets).unwrap();
        for r_f in [0.05, 0.12, 0.3] {
            let batch = facet_scores(&mesh, r_f).unwrap();
            for m in 0..mesh.facet_count() {
                assert_relative_eq!(batch[m], facet_score(&mesh, m, r_f).unwrap(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn station_score_is_the_mean() {
        assert_relative_eq!(location_score(&[1.0, 2.0, 3.0]), 2.0, epsilon = 1e-15);
        assert_relative_eq!(location_score(&[0.5]), 0.5, epsilon = 1e-15);
        assert_eq!(location_score(&[]), 0.0);
    }

    #[test]
    fn iou_examples() {
        assert_relative_eq!(pairwise_iou(&[1, 2, 3], &[2, 3, 4]), 0.5, epsilon = 1e-15);
        assert_relative_eq!(pairwise_iou(&[1, 2], &[1, 2]), 1.0, epsilon = 1e-15);
        assert_eq!(pairwise_iou(&[1, 2], &[3, 4]), 0.0);
        assert_eq!(pairwise_iou(&[], &[]), 0.0);
        assert_eq!(pairwise_iou(&[], &[1]), 0.0);
    }

    fn record(location: usize, facets: Vec<usize>, worth: f64) -> VisibilityRecord {
        let facet_scores: BTreeMap<usize, f64> =
            facets.iter().map(|&m| (m, worth)).collect();
        let per: Vec<f64> = facets.iter().map(|_| worth).collect();
        VisibilityRecord { location, facets, facet_scores, score: location_score(&per) }
    }

    /// Step-by-step selection oracle: recomputes every sum from scratch with
    /// direct set arithmetic each step. Returns the selected sequence.
    pub(crate) fn naive_plan(
        records: &[VisibilityRecord],
        t_c: f64,
        denominator: OverlapDenominator,
    ) -> Vec<usize> {
        let n = records.len();
        let total: std::collections::BTreeSet<usize> =
            records.iter().flat_map(|r| r.facets.iter().copied()).collect();
        let coverage = |sel: &[usize]| {
            let un: std::collections::BTreeSet<usize> = sel
                .iter()
                .flat_map(|&s| records[s].facets.iter().copied())
                .collect();
            un.len() as f64 / total.len() as f64
        };
        let mut sel: Vec<usize> = Vec::new();
        let mut best = 0usize;
        for c in 1..n {
            if records[c].score > records[best].score {
                best = c;
            }
        }
        sel.push(best);
        while coverage(&sel) < t_c && sel.len() < n {
            let mut pick: Option<(bool, f64, usize)> = None;
            for c in 0..n {
                if sel.contains(&c) {
                    continue;
                }
                let num: f64 =
                    sel.iter().map(|&s| records[s].score).sum::<f64>() + records[c].score;
                let mut den = 0.0;
                for (ai, &a) in sel.iter().enumerate() {
                    for &b in &sel[ai + 1..] {
                        den += pairwise_iou(&records[a].facets, &records[b].facets);
                    }
                }
                match denominator {
                    OverlapDenominator::EvaluatedCandidate => {
                        for &s in &sel {
                            den += pairwise_iou(&records[s].facets, &records[c].facets);
                        }
                    }
                    OverlapDenominator::AllUnselected => {
                        for u in 0..n {
                            if sel.contains(&u) {
                                continue;
                            }
                            for &s in &sel {
                                den += pairwise_iou(&records[s].facets, &records[u].facets);
                            }
                        }
                    }
                }
                let key = (den > 0.0, if den > 0.0 { num / den } else { num });
                let better = match pick {
                    None => true,
                    Some((pf, pk, _)) => match (key.0, pf) {
                        (false, true) => true,
                        (true, false) => false,
                        _ => key.1 > pk,
                    },
                };
                if better {
                    pick = Some((key.0, key.1, c));
                }
            }
            let (_, _, c) = pick.unwrap();
            if records[c].score == 0.0
                && (0..n).all(|r| sel.contains(&r) || records[r].score == 0.0)
            {
                break;
            }
            sel.push(c);
        }
        sel
    }

    pub(crate) fn random_records(rng: &mut ChaCha12Rng, n_p: usize) -> Vec<VisibilityRecord> {
        (0..n_p)
            .map(|i| {
                let size = rng.random_range(0..12usize);
                let mut facets: Vec<usize> =
                    (0..size).map(|_| rng.random_range(0..30usize)).collect();
                facets.sort_unstable();
                facets.dedup();
                let facet_scores: BTreeMap<usize, f64> = facets
                    .iter()
                    .map(|&m| (m, rng.random_range(0.01..2.0)))
                    .collect();
                let per: Vec<f64> = facet_scores.values().copied().collect();
                VisibilityRecord { location: i, facets, facet_scores, score: location_score(&per) }
            })
            .collect()
    }

    #[test]
    fn greedy_selection_matches_naive_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(20);
        for trial in 0..40 {
            let n_p = 3 + (trial % 10);
            let records = random_records(&mut rng, n_p);
            if records.iter().all(|r| r.facets.is_empty()) {
                continue;
            }
            for t_c in [1.0 / 16.0, 0.125, 0.25, 0.5, 1.0] {
                for den in [OverlapDenominator::EvaluatedCandidate, OverlapDenominator::AllUnselected] {
                    let got = plan_locations(&records, t_c, den).unwrap();
                    let want = naive_plan(&records, t_c, den);
                    assert_eq!(got.selected, want, "trial {trial}, t_c {t_c}, {den:?}");
                    assert_eq!(got.count, got.selected.len());
                    // Coverage trace is nondecreasing and ends at the result.
                    for w in got.coverage_trace.windows(2) {
                        assert!(w[1] >= w[0]);
                    }
                    assert_eq!(*got.coverage_trace.last().unwrap(), got.coverage);
                    assert_eq!(got.coverage_trace.len(), got.count);
                    // Every selection before the last left coverage short.
                    for &c in &got.coverage_trace[..got.count - 1] {
                        assert!(c < t_c);
                    }
                }
            }
        }
    }

    #[test]
    fn single_candidate_is_selected() {
        let records = vec![record(0, vec![1, 2, 3], 1.0)];
        let plan = plan_locations(&records, 1.0, OverlapDenominator::default()).unwrap();
        assert_eq!(plan.selected, vec![0]);
        assert_relative_eq!(plan.coverage, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn duplicate_coverage_selects_only_the_better_station() {
        let records = vec![
            record(0, vec![1, 2, 3], 2.0),
            record(1, vec![1, 2, 3], 1.0),
        ];
        let plan = plan_locations(&records, 0.5, OverlapDenominator::default()).unwrap();
        assert_eq!(plan.selected, vec![0]);
        assert_relative_eq!(plan.coverage, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn first_pick_ties_break_to_lowest_index() {
        let records = vec![
            record(0, vec![0, 1], 1.5),
            record(1, vec![2, 3], 1.5),
            record(2, vec![4, 5], 1.0),
        ];
        let plan = plan_locations(&records, 0.1, OverlapDenominator::default()).unwrap();
        assert_eq!(plan.selected[0], 0);
    }

    #[test]
    fn blind_station_set_is_an_error() {
        let records = vec![record(0, vec![], 0.0), record(1, vec![], 0.0)];
        assert!(matches!(
            plan_locations(&records, 0.5, OverlapDenominator::default()),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            plan_locations(&[record(0, vec![1], 1.0)], 0.0, OverlapDenominator::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn selection_stops_when_only_blind_candidates_remain() {
        let records = vec![
            record(0, vec![0, 1], 1.0),
            record(1, vec![], 0.0),
            record(2, vec![], 0.0),
        ];
        // t_c = 1 is unreachable once only blind candidates remain.
        let plan = plan_locations(&records, 1.0, OverlapDenominator::default()).unwrap();
        assert_eq!(plan.selected, vec![0]);
    }

    #[test]
    fn literal_denominator_ranks_by_score_alone() {
        // Three overlapping stations. Under the literal reading the
        // denominator is candidate-independent, so pick 2 is the highest
        // remaining score even though it overlaps the first pick heavily.
        let records = vec![
            record(0, vec![0, 1, 2, 3], 3.0),
            record(1, vec![0, 1, 2], 2.5),
            record(2, vec![7, 8], 1.0),
        ];
        let literal = plan_locations(&records, 1.0, OverlapDenominator::AllUnselected).unwrap();
        assert_eq!(literal.selected, vec![0, 1, 2]);
        // The per-candidate reading penalizes the overlap: station 2 has no
        // overlap at all (unbounded ratio) and completes coverage, so the
        // redundant station 1 is never taken.
        let plausible =
            plan_locations(&records, 1.0, OverlapDenominator::EvaluatedCandidate).unwrap();
        assert_eq!(plausible.selected, vec![0, 2]);
        assert_eq!(plausible.objective_trace, vec![Some(3.0), None]);
    }

    #[test]
    fn scaling_scene_and_radius_scales_worth_quadratically() {
        let mesh = icosahedron();
        let k = 3.0;
        let scaled = mesh.transformed(&Sim3Transform::new(
            k,
            Rotation3::identity(),
            Vec3::new(0.0, 0.0, 0.0),
        ));
        let r_f = 1.5;
        let base = facet_scores(&mesh, r_f).unwrap();
        let big = facet_scores(&scaled, k * r_f).unwrap();
        for (a, b) in base.iter().zip(&big) {
            assert_relative_eq!(*b, k * k * a, max_relative = 1e-9);
        }
        // Selection over the scaled scene is unchanged.
        let locs = [
            PotentialLocation::new(0, Point3::new(0.0, 0.0, 0.0)),
            PotentialLocation::new(1, Point3::new(0.4, 0.2, 0.0)),
            PotentialLocation::new(2, Point3::new(-0.3, -0.2, 0.3)),
        ];
        let scaled_locs: Vec<PotentialLocation> = locs
            .iter()
            .map(|l| PotentialLocation::new(l.index, Point3::from(k * l.point().coords)))
            .collect();
        let rec_a = build_visibility_records(&mesh, &locs, 500, r_f).unwrap();
        let rec_b = build_visibility_records(&scaled, &scaled_locs, 500, k * r_f).unwrap();
        for (a, b) in rec_a.iter().zip(&rec_b) {
            assert_eq!(a.facets, b.facets);
        }
        let plan_a = plan_locations(&rec_a, 0.5, OverlapDenominator::default()).unwrap();
        let plan_b = plan_locations(&rec_b, 0.5, OverlapDenominator::default()).unwrap();
        assert_eq!(plan_a.selected, plan_b.selected);
    }

    #[test]
    fn noncontiguous_candidate_indices_are_rejected() {
        let mesh = icosahedron();
        let locs = [PotentialLocation::new(1, Point3::origin())];
        assert!(matches!(
            build_visibility_records(&mesh, &locs, 10, 0.1),
            Err(Error::InvalidArgument(_))
        ));
    }
}
