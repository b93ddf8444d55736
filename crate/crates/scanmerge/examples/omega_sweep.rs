//! Study how the image/space balance weight shapes merge quality.
//!
//! The joint solve weighs 3D match residuals against reprojection
//! residuals with a factor omega. Too small and the solve ignores the
//! scans, leaving the coarse inconsistency in place; too large and it
//! chases match noise at the expense of the image geometry. The sweep
//! scales the balanced weight by 10^k for k in -3..=3 and reports the
//! reference-pair RMS of each run: the minimum sits at or near the
//! balanced point (k = 0).
//!
//! Run with: cargo run --example omega_sweep

use scanmerge::pipeline::{sweep, PipelineConfig};

fn main() -> scanmerge::Result<()> {
    let config = PipelineConfig::default();
    let out_root = std::path::Path::new("target/example-output/runs");
    let values: Vec<f64> = (-3..=3).map(f64::from).collect();
    let rows = sweep(&config, "rc-exponent", &values, out_root)?;

    println!("lg ratio   reference rms (fine)   vs coarse");
    let mut best = None::<(f64, f64)>;
    for row in &rows {
        let (Some(fine), Some(coarse)) = (row.rms_fine_m, row.rms_coarse_m) else {
            println!("{:>8}   run failed: {}", row.value, row.error);
            continue;
        };
        println!(
            "{:>8}   {:>8.2} mm            {:>8.2} mm",
            row.value,
            fine * 1000.0,
            coarse * 1000.0
        );
        if best.map(|(_, b)| fine < b).unwrap_or(true) {
            best = Some((row.value, fine));
        }
    }
    if let Some((at, rms)) = best {
        println!("\nminimum {:.2} mm at lg ratio {at}", rms * 1000.0);
    }
    Ok(())
}
