//! Run every stage end to end against files on disk.
//!
//! The pipeline simulates a scene (or consumes real inputs), plans scan
//! stations, captures and registers scans, runs the joint refinement, and
//! scores the result, writing each stage's artifacts into a run directory
//! named by the config hash: the same config always lands in the same
//! directory with bit-identical contents.
//!
//! Run with: cargo run --example full_pipeline

use scanmerge::pipeline::{read_summary, run_pipeline, PipelineConfig, StageLine};

fn main() -> scanmerge::Result<()> {
    let config = PipelineConfig::default();
    let out_root = std::path::Path::new("target/example-output/runs");
    let dir = run_pipeline(&config, out_root)?;
    println!("run directory: {}\n", dir.display());

    for line in read_summary(&dir.join("summary.jsonl"))? {
        match line {
            StageLine::Config { config } => {
                println!("config    seed {}", config.scene.map(|s| s.seed).unwrap_or_default());
            }
            StageLine::Simulate { facets, stations, cameras, points, observations, .. } => {
                println!("simulate  {facets} facets, {stations} stations, {cameras} cameras, {points} points, {observations} observations");
            }
            StageLine::Plan { plan } => {
                println!(
                    "plan      stations {:?}, coverage {:.3}",
                    plan.result.selected, plan.result.coverage
                );
            }
            StageLine::Scan { scans } => {
                for s in scans {
                    println!(
                        "scan      station {}: {} returns, {} matches ({:.0}% true inliers)",
                        s.station,
                        s.cloud_points,
                        s.matches,
                        100.0 * s.true_inlier_fraction
                    );
                }
            }
            StageLine::Synth { views } => {
                let masked = views.iter().map(|v| v.masked_pct).sum::<f64>() / views.len() as f64;
                println!("synth     {} virtual views, {:.1}% pixels edge-masked on average", views.len(), masked);
            }
            StageLine::Register { scans } => {
                for r in scans {
                    println!(
                        "register  scan {}: {} of {} matches kept, scale {:.5}",
                        r.scan, r.inliers, r.pairs, r.coarse.scale
                    );
                }
            }
            StageLine::Merge { omega, scale, report, .. } => {
                println!(
                    "merge     omega {:.1}, {} iterations, cost {:.0} -> {:.0}, shared scale {:.5}",
                    omega, report.iterations, report.initial_cost, report.final_cost, scale
                );
            }
            StageLine::Eval { rms_coarse, rms_fine, prf_merged, prf_baseline, tau_m } => {
                if let (Some(c), Some(f)) = (rms_coarse, rms_fine) {
                    println!(
                        "eval      reference rms: coarse {:.2} mm -> fine {:.2} mm",
                        c.rms_m * 1000.0,
                        f.rms_m * 1000.0
                    );
                }
                if let (Some(m), Some(b)) = (prf_merged, prf_baseline) {
                    println!(
                        "          F-score at tau {tau_m} m: merged {:.2} vs image-only {:.2}",
                        m.fscore_pct, b.fscore_pct
                    );
                }
            }
        }
    }
    Ok(())
}
