//! Jointly refine cameras, structure, and scan placements.
//!
//! Coarse per-scan registration treats the image block as rigid truth, but
//! an image-only reconstruction carries low-frequency drift that no single
//! similarity transform can absorb. The joint solve adds the 3D matches as
//! residuals alongside reprojection terms, weighted so both kinds of
//! measurement pull their weight, and lets cameras, points, per-scan
//! placements, and one shared scale move together.
//!
//! Merge quality is scored like a surveyor would: marked point pairs, one
//! on each cloud, should coincide after merging. The fine solve tightens
//! those pairs well below what coarse registration achieves.
//!
//! Run with: cargo run --example merge_refine

use scanmerge::merge::{
    compute_omega, solve, MergeParams, MergeProblem, SolveOptions, SpaceConstraint, SpaceTarget,
};
use scanmerge::metrics::rms_reference_error;
use scanmerge::register::{ransac_sim3, RansacParams};
use scanmerge::sim::{
    generate_scene, noisy_sfm_state, reference_pairs, simulate_matches, simulate_scan, SceneSpec,
};

fn main() -> scanmerge::Result<()> {
    let mut spec = SceneSpec::default();
    spec.sfm_points = 1500;
    let bundle = generate_scene(&spec)?;
    let scans: Vec<_> = [7usize, 0, 5]
        .iter()
        .map(|&s| simulate_scan(&bundle, s, 6.0))
        .collect::<scanmerge::Result<_>>()?;
    let set = simulate_matches(&bundle, &scans)?;

    // What an upstream image pipeline would hand over: a bundle-adjusted
    // block, self-consistent but drifted.
    let (cameras, points) = noisy_sfm_state(&bundle);
    let sfm = solve(
        &MergeProblem {
            cameras,
            points,
            scans: Vec::new(),
            observations: set.observations.clone(),
            constraints: Vec::new(),
            params: MergeParams { omega: 0.0, ..MergeParams::default() },
        },
        &SolveOptions::default(),
    )?;
    println!(
        "image-only block: {} cameras, {} points, reprojection rms {:.3} px",
        sfm.cameras.len(),
        sfm.points.len(),
        sfm.report.final_reprojection_rms_px
    );

    // Coarse: robust similarity per scan; its inliers become the joint
    // solve's 3D constraints. Matches into tracked points tie live
    // structure; the rest anchor fixed positions.
    let mut coarse = Vec::new();
    let mut constraints = Vec::new();
    for (si, pairs) in set.matches.iter().enumerate() {
        let r = ransac_sim3(pairs, &RansacParams { iterations: 100, dist_thresh: 0.1, seed: 7 })?;
        for &k in &r.inliers {
            constraints.push(SpaceConstraint {
                scan: si,
                laser: pairs[k].src,
                target: match pairs[k].point {
                    Some(j) => SpaceTarget::Point(j),
                    None => SpaceTarget::Anchor(pairs[k].dst),
                },
            });
        }
        coarse.push(r.transform);
    }

    let refs = reference_pairs(&bundle, &scans, 20)?;
    let rms_coarse = rms_reference_error(&refs, &coarse)?;
    println!(
        "coarse registration: reference rms {:.2} mm over {} pairs",
        rms_coarse.rms_m * 1000.0,
        rms_coarse.pair_count
    );

    let mut problem = MergeProblem {
        cameras: sfm.cameras,
        points: sfm.points,
        scans: coarse,
        observations: set.observations,
        constraints,
        params: MergeParams { sigma0_m: 0.01, ..MergeParams::default() },
    };
    // Balance: equal initial cost in the image and space terms.
    problem.params.omega = compute_omega(&problem)?;
    println!("balance weight omega = {:.2}", problem.params.omega);

    let out = solve(&problem, &SolveOptions::default())?;
    println!(
        "joint solve: {} iterations ({:?}), cost {:.0} -> {:.0}, shared scale {:.6}",
        out.report.iterations,
        out.report.convergence,
        out.report.initial_cost,
        out.report.final_cost,
        out.scale
    );

    // The merge moved the cloud, so each pair's reconstruction side rides
    // the displacement of its nearest cloud point before re-measuring.
    let refined: Vec<_> = refs
        .iter()
        .map(|r| {
            let j = (0..problem.points.len())
                .min_by(|&a, &b| {
                    (problem.points[a] - r.sfm)
                        .norm_squared()
                        .total_cmp(&(problem.points[b] - r.sfm).norm_squared())
                })
                .unwrap();
            let mut pair = r.clone();
            pair.sfm += out.points[j] - problem.points[j];
            pair
        })
        .collect();
    let rms_fine = rms_reference_error(&refined, &out.scans)?;
    println!(
        "fine merge:          reference rms {:.2} mm ({:+.1}% vs coarse)",
        rms_fine.rms_m * 1000.0,
        (rms_fine.rms_m / rms_coarse.rms_m - 1.0) * 100.0
    );
    for (region, rms) in &rms_fine.per_region_rms_m {
        println!("  {region}: {:.2} mm", rms * 1000.0);
    }
    Ok(())
}
