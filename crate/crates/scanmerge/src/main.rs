//! Command-line front end. All behavior lives in the library; this binary
//! parses arguments, loads configs, dispatches one stage or the whole
//! pipeline, and maps errors to exit codes: 0 success, 2 unusable input,
//! 3 processing failure.

use clap::{Args, Parser, Subcommand};
use scanmerge::io::read_json;
use scanmerge::pipeline::{
    config_from_run_dir, paths_for_run_dir, run_pipeline, run_scan_capture, run_simulate,
    stage_eval, stage_merge, stage_plan, stage_register, stage_synth, sweep, write_sweep_csv,
    PipelineConfig, StageLine,
};
use scanmerge::planner::OverlapDenominator;
use scanmerge::register::RansacParams;
use scanmerge::{Error, Result};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "scanmerge",
    version,
    about = "Merge image-based reconstructions with laser scans"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigOut {
    /// Pipeline config JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root directory for content-addressed run directories.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Args)]
struct RunRef {
    /// An existing run directory.
    #[arg(long)]
    run: PathBuf,
    /// Config JSON; when omitted, read from the run's summary.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl RunRef {
    fn load(&self) -> Result<PipelineConfig> {
        let config: PipelineConfig = match &self.config {
            Some(path) => read_json(path)?,
            None => config_from_run_dir(&self.run)?,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage: simulate, plan, scan, synth, register, merge, eval.
    Run(ConfigOut),
    /// Run the full pipeline once per value of one parameter.
    Sweep {
        #[command(flatten)]
        config_out: ConfigOut,
        /// Parameter key, e.g. t-c, rc-exponent, omega-fixed, n-rays, seed.
        #[arg(long)]
        parameter: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Where to write the result table; defaults to sweep-<parameter>.csv
        /// under the out root.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Simulate the scene into a new run directory, or capture scans in an
    /// existing one.
    Simulate {
        #[command(flatten)]
        config_out: ConfigOut,
        /// Capture scans in this existing run directory instead of
        /// simulating a new scene.
        #[arg(long)]
        run: Option<PathBuf>,
        /// Candidate stations to scan from (with --run); when omitted, the
        /// run's recorded plan decides.
        #[arg(long, value_delimiter = ',')]
        stations: Option<Vec<usize>>,
    },
    /// Select scan stations that cover the scene with little redundancy.
    Plan {
        #[command(flatten)]
        io: StageIo,
        /// Proxy mesh PLY (standalone mode).
        #[arg(long, requires = "stations")]
        mesh: Option<PathBuf>,
        /// Candidate stations JSON (standalone mode).
        #[arg(long, requires = "mesh")]
        stations: Option<PathBuf>,
        /// Plan JSON destination (standalone mode).
        #[arg(long, default_value = "plan.json")]
        out: PathBuf,
        #[arg(long, default_value_t = scanmerge::planner::DEFAULT_N_RAYS)]
        n_rays: usize,
        #[arg(long, default_value_t = scanmerge::planner::DEFAULT_R_F)]
        r_f: f64,
        #[arg(long, default_value_t = scanmerge::planner::DEFAULT_T_C)]
        t_c: f64,
        /// evaluated-candidate or all-unselected.
        #[arg(long, default_value = "evaluated-candidate", value_parser = parse_denominator)]
        denominator: OverlapDenominator,
    },
    /// Render six virtual pinhole views per scan cloud, with depth-edge
    /// masks and raw depth.
    Synth {
        #[command(flatten)]
        io: StageIo,
        /// Scan cloud PLYs (standalone mode).
        #[arg(long, value_delimiter = ',')]
        clouds: Option<Vec<PathBuf>>,
        /// Image output directory (standalone mode).
        #[arg(long, default_value = "synth")]
        out: PathBuf,
        #[arg(long, default_value_t = 256)]
        resolution: u32,
        #[arg(long, default_value_t = scanmerge::synth::DEFAULT_FILL_RADIUS)]
        fill_radius: u32,
        #[arg(long, default_value_t = scanmerge::synth::DEFAULT_EDGE_THRESHOLD_M)]
        edge_threshold: f64,
    },
    /// Robustly estimate each scan's coarse similarity transform from 3D-3D
    /// correspondences.
    Register {
        #[command(flatten)]
        io: StageIo,
        /// Correspondence CSVs, one per scan (standalone mode).
        #[arg(long, value_delimiter = ',')]
        matches: Option<Vec<PathBuf>>,
        /// Transform list destination (standalone mode).
        #[arg(long, default_value = "coarse.json")]
        coarse_out: PathBuf,
        /// Inlier index list destination (standalone mode).
        #[arg(long, default_value = "inliers.json")]
        inliers_out: PathBuf,
        #[arg(long, default_value_t = 100)]
        iterations: usize,
        #[arg(long, default_value_t = 0.1)]
        threshold: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Jointly refine cameras, points, and scan placements in a run
    /// directory with registered scans.
    Merge(RunRef),
    /// Score a merged run directory: reference RMS and precision/recall
    /// against the ground-truth surface.
    Eval(RunRef),
}

/// Stage commands work either inside a run directory (config-driven) or on
/// explicit files.
#[derive(Args)]
struct StageIo {
    /// Run directory built by simulate or run.
    #[arg(long)]
    run: Option<PathBuf>,
    /// Config JSON; with --run, defaults to the run's recorded config.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl StageIo {
    fn load(&self) -> Result<PipelineConfig> {
        let dir = self.run.as_ref().expect("checked by caller");
        let config: PipelineConfig = match &self.config {
            Some(path) => read_json(path)?,
            None => config_from_run_dir(dir)?,
        };
        config.validate()?;
        Ok(config)
    }
}

fn parse_denominator(s: &str) -> std::result::Result<OverlapDenominator, String> {
    match s {
        "evaluated-candidate" => Ok(OverlapDenominator::EvaluatedCandidate),
        "all-unselected" => Ok(OverlapDenominator::AllUnselected),
        other => Err(format!(
            "unknown denominator {other:?}; use evaluated-candidate or all-unselected"
        )),
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<PipelineConfig> {
    let config: PipelineConfig = match path {
        Some(p) => read_json(p)?,
        None => PipelineConfig::default(),
    };
    config.validate()?;
    Ok(config)
}

fn print_line(line: &StageLine) -> Result<()> {
    println!("{}", serde_json::to_string(line)?);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let config = load_config(&args.config)?;
            let dir = run_pipeline(&config, &args.out)?;
            println!("{}", dir.display());
        }
        Command::Sweep { config_out, parameter, values, table } => {
            let config = load_config(&config_out.config)?;
            let rows = sweep(&config, &parameter, &values, &config_out.out)?;
            let table = table
                .unwrap_or_else(|| config_out.out.join(format!("sweep-{parameter}.csv")));
            write_sweep_csv(&table, &rows)?;
            println!("{}", table.display());
        }
        Command::Simulate { config_out, run, stations } => match run {
            None => {
                let config = load_config(&config_out.config)?;
                let (dir, _) = run_simulate(&config, &config_out.out)?;
                println!("{}", dir.display());
            }
            Some(dir) => {
                let config: PipelineConfig = match &config_out.config {
                    Some(path) => read_json(path)?,
                    None => config_from_run_dir(&dir)?,
                };
                config.validate()?;
                let line = run_scan_capture(&config, &dir, stations.as_deref())?;
                print_line(&line)?;
            }
        },
        Command::Plan { io, mesh, stations, out, n_rays, r_f, t_c, denominator } => {
            let record = match (&io.run, &mesh, &stations) {
                (Some(dir), None, None) => {
                    let config = io.load()?;
                    let paths = paths_for_run_dir(&config, dir)?;
                    stage_plan(
                        &paths.mesh,
                        &paths.stations,
                        config.n_rays,
                        config.r_f_m,
                        config.t_c,
                        config.overlap_denominator,
                        &paths.plan(),
                    )?
                }
                (None, Some(mesh), Some(stations)) => {
                    stage_plan(mesh, stations, n_rays, r_f, t_c, denominator, &out)?
                }
                _ => return Err(need_run_or_files("--mesh and --stations")),
            };
            print_line(&StageLine::Plan { plan: record })?;
        }
        Command::Synth { io, clouds, out, resolution, fill_radius, edge_threshold } => {
            let views = match (&io.run, &clouds) {
                (Some(dir), None) => {
                    let config = io.load()?;
                    let paths = paths_for_run_dir(&config, dir)?;
                    if paths.scan_clouds.is_empty() {
                        return Err(Error::InvalidArgument(
                            "run directory has no scans yet; plan and simulate them first".into(),
                        ));
                    }
                    stage_synth(
                        &paths.scan_clouds,
                        config.cube_resolution,
                        config.fill_radius_px,
                        config.edge_threshold_m,
                        &paths.synth_dir(),
                    )?
                }
                (None, Some(clouds)) => {
                    stage_synth(clouds, resolution, fill_radius, edge_threshold, &out)?
                }
                _ => return Err(need_run_or_files("--clouds")),
            };
            print_line(&StageLine::Synth { views })?;
        }
        Command::Register { io, matches, coarse_out, inliers_out, iterations, threshold, seed } => {
            let scans = match (&io.run, &matches) {
                (Some(dir), None) => {
                    let config = io.load()?;
                    let paths = paths_for_run_dir(&config, dir)?;
                    if paths.scan_matches.is_empty() {
                        return Err(Error::InvalidArgument(
                            "run directory has no scans yet; plan and simulate them first".into(),
                        ));
                    }
                    let params = RansacParams {
                        iterations: config.ransac_iterations,
                        dist_thresh: config.ransac_threshold_m,
                        seed: config.ransac_seed,
                    };
                    stage_register(
                        &paths.scan_matches,
                        &params,
                        &paths.coarse_transforms(),
                        &paths.inlier_sets(),
                    )?
                }
                (None, Some(matches)) => {
                    let params =
                        RansacParams { iterations, dist_thresh: threshold, seed };
                    stage_register(matches, &params, &coarse_out, &inliers_out)?
                }
                _ => return Err(need_run_or_files("--matches")),
            };
            print_line(&StageLine::Register { scans })?;
        }
        Command::Merge(run_ref) => {
            let config = run_ref.load()?;
            let paths = paths_for_run_dir(&config, &run_ref.run)?;
            let (state, report, transforms) = stage_merge(&paths, &config)?;
            print_line(&StageLine::Merge {
                omega: state.omega,
                scale: state.scale,
                report,
                transforms,
            })?;
        }
        Command::Eval(run_ref) => {
            let config = run_ref.load()?;
            let paths = paths_for_run_dir(&config, &run_ref.run)?;
            let line = stage_eval(&paths, config.tau_m())?;
            print_line(&line)?;
        }
    }
    Ok(())
}

fn need_run_or_files(files: &str) -> Error {
    Error::InvalidArgument(format!("pass either --run <dir> or {files}"))
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(if e.is_invalid_input() { 2 } else { 3 });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn denominator_parser_covers_both_variants() {
        assert_eq!(
            parse_denominator("evaluated-candidate").unwrap(),
            OverlapDenominator::EvaluatedCandidate
        );
        assert_eq!(
            parse_denominator("all-unselected").unwrap(),
            OverlapDenominator::AllUnselected
        );
        assert!(parse_denominator("other").is_err());
    }
}
