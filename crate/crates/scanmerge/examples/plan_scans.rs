//! Choose scanner stations that cover the scene with little redundancy.
//!
//! Each candidate station casts rays at the proxy mesh to find its visible
//! facets. A facet's score is high where facets are large (poorly textured
//! surfaces that need a scan most), so the first pick faces the worst
//! region; later picks maximize score gained per overlap with what is
//! already covered, until a coverage threshold t_c is met.
//!
//! Run with: cargo run --example plan_scans

use scanmerge::planner::{build_visibility_records, plan_locations, OverlapDenominator};
use scanmerge::sim::{generate_scene, SceneSpec};

fn main() -> scanmerge::Result<()> {
    let bundle = generate_scene(&SceneSpec::default())?;
    let records = build_visibility_records(&bundle.mesh, &bundle.stations, 1000, 0.1)?;

    println!("{} candidate stations, per-station scores:", records.len());
    for r in &records {
        let p = bundle.stations[r.location].point();
        println!(
            "  station {} at ({:>4.1}, {:>4.1}): sees {:>4} facets, score {:.4}",
            r.location,
            p.x,
            p.y,
            r.facets.len(),
            r.score
        );
    }

    let plan = plan_locations(&records, 0.5, OverlapDenominator::default())?;
    println!("\nplan at t_c = 0.5: stations {:?}", plan.selected);
    for (i, (cov, obj)) in plan.coverage_trace.iter().zip(&plan.objective_trace).enumerate() {
        // The first pick ranks by raw score; only later picks have the
        // score-per-overlap objective.
        let objective = obj.map(|o| format!("{o:.4}")).unwrap_or_else(|| "score".into());
        println!(
            "  pick {}: station {:>2}, coverage {:.3}, objective {}",
            i + 1,
            plan.selected[i],
            cov,
            objective
        );
    }

    // A laxer threshold needs fewer scans, a stricter one more; the count
    // never decreases as t_c grows.
    print!("\nscans needed per coverage threshold:");
    for t_c in [1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0, 1.0 / 2.0, 1.0] {
        let plan = plan_locations(&records, t_c, OverlapDenominator::default())?;
        print!("  t_c {:.4} -> {}", t_c, plan.count);
    }
    println!();
    Ok(())
}
