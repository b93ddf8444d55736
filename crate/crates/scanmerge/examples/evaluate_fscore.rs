//! Score a reconstruction against a reference cloud.
//!
//! Precision: how much of the reconstruction lies within tau of the
//! reference. Recall: how much of the reference is within tau of the
//! reconstruction. Both clouds are voxel-resampled at tau/2 first so that
//! densely and sparsely sampled regions count equally; F-score combines
//! the two.
//!
//! Run with: cargo run --example evaluate_fscore

use scanmerge::metrics::{precision_recall_fscore, voxel_resample};
use scanmerge::sim::{generate_scene, sample_mesh_surface, simulate_scan, SceneSpec};

fn main() -> scanmerge::Result<()> {
    let bundle = generate_scene(&SceneSpec::default())?;
    let truth = sample_mesh_surface(&bundle.mesh, 0.05, 123)?;
    println!("ground-truth surface: {} points at 5 cm spacing", truth.len());

    let tau = 0.2;

    // A cloud equals itself.
    let identical = precision_recall_fscore(&truth, &truth, tau)?;
    println!(
        "truth vs truth:      P {:>6.2}  R {:>6.2}  F {:>6.2}",
        identical.precision_pct, identical.recall_pct, identical.fscore_pct
    );

    // Half the reference: everything present is correct, half is missing.
    let half: Vec<_> = truth.iter().step_by(2).copied().collect();
    let partial = precision_recall_fscore(&half, &truth, tau)?;
    println!(
        "half vs truth:       P {:>6.2}  R {:>6.2}  F {:>6.2}",
        partial.precision_pct, partial.recall_pct, partial.fscore_pct
    );

    // One scan sees one room plus what the doorway reveals: precise but
    // incomplete.
    let scan = simulate_scan(&bundle, 0, 1.0)?;
    let world = scan.cloud.transformed(&scan_to_world(&bundle, &scan));
    let one_scan = precision_recall_fscore(world.points(), &truth, tau)?;
    println!(
        "one scan vs truth:   P {:>6.2}  R {:>6.2}  F {:>6.2}",
        one_scan.precision_pct, one_scan.recall_pct, one_scan.fscore_pct
    );

    // Resampling collapses dense regions: the scan's returns thin out to
    // one representative per tau/2 voxel.
    let resampled = voxel_resample(world.points(), tau / 2.0)?;
    println!(
        "voxel resample at tau/2: {} scan returns -> {} representatives",
        world.len(),
        resampled.len()
    );
    Ok(())
}

// The simulated scan pose is known here; a real pipeline gets this from
// registration.
fn scan_to_world(
    bundle: &scanmerge::sim::GroundTruthBundle,
    scan: &scanmerge::sim::SimulatedScan,
) -> scanmerge::Sim3Transform {
    let t = bundle.scan_to_sfm(scan);
    // scan_to_sfm lands in the reconstruction frame; divide out the frame
    // scale to compare against the metric mesh.
    scanmerge::Sim3Transform::new(
        t.scale / bundle.sfm_scale,
        t.rotation,
        t.translation / bundle.sfm_scale,
    )
}
