//! End-to-end orchestration: simulate -> plan -> scan -> synth -> register
//! -> merge -> eval, with every intermediate written to disk and a
//! line-delimited JSON summary.
//!
//! Each stage driver reads its inputs from files and writes its outputs to
//! files, never passing state in memory, so running a stage through the CLI
//! on the files a previous run produced yields byte-identical results.
//! Run directories are content-addressed by the hash of the resolved
//! configuration: the same config always lands in the same directory, and a
//! rerun reproduces it bit for bit.

use crate::geom::{apply_sim3, ColoredPointCloud, Point3, Sim3Transform};
use crate::io::{
    read_cameras, read_cloud, read_correspondences, read_json, read_mesh, read_observations,
    read_reference_pairs, rotation_from_rows, rotation_to_rows, write_cameras, write_cloud,
    write_correspondences, write_json, write_mask_png, write_mesh, write_observations, write_pfm,
    write_reference_pairs, write_rgb_png, PlyFormat,
};
use crate::merge::{
    compute_omega, solve, MergeParams, MergeProblem, SolveOptions, SolveReport, SolverKind,
    SpaceConstraint, SpaceTarget,
};
use crate::metrics::{precision_recall_fscore, rms_reference_error, PrfReport, RmsReport};
use crate::planner::{
    build_visibility_records, plan_locations, OverlapDenominator, PlanResult, PotentialLocation,
    DEFAULT_N_RAYS, DEFAULT_R_F, DEFAULT_T_C,
};
use crate::register::{ransac_sim3, Correspondence, RansacParams};
use crate::sim::{
    generate_scene, noisy_sfm_state, reference_pairs, sample_mesh_surface, simulate_matches,
    simulate_scan, SceneSpec,
};
use crate::synth::{build_cube_rig, synthesize_view, DEFAULT_EDGE_THRESHOLD_M, DEFAULT_FILL_RADIUS};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

/// How the balance weight between image and space terms is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum OmegaMode {
    /// `ratio` times the weight that balances the initial robust image and
    /// space costs. Ratio 1 is the balanced default; powers of ten trade
    /// image fidelity against scan fidelity.
    Balanced { ratio: f64 },
    /// A fixed weight, taken as is.
    Fixed { value: f64 },
}

impl Default for OmegaMode {
    fn default() -> Self {
        OmegaMode::Balanced { ratio: 1.0 }
    }
}

/// Pre-existing input files for running on real (non-simulated) data. Scan
/// entries pair each scan cloud with its 3D-3D correspondence file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputPaths {
    /// Proxy mesh for planning (PLY).
    pub mesh: PathBuf,
    /// Candidate stations (JSON list).
    pub stations: PathBuf,
    /// Initial camera views (JSON).
    pub cameras: PathBuf,
    /// Initial structure points (PLY cloud).
    pub points: PathBuf,
    /// 2D feature observations (CSV).
    pub observations: PathBuf,
    /// Per-scan cloud PLY and correspondence CSV, in scan order.
    pub scans: Vec<ScanInput>,
    /// Reference pairs for RMS evaluation (CSV), when available.
    #[serde(default)]
    pub reference_pairs: Option<PathBuf>,
    /// Ground-truth surface cloud for precision/recall (PLY), when available.
    #[serde(default)]
    pub gt_surface: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanInput {
    pub cloud: PathBuf,
    pub matches: PathBuf,
}

/// Fully resolved pipeline configuration. Either `scene` (simulate inputs)
/// or `inputs` (consume files) must be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Simulate the scene described here.
    pub scene: Option<SceneSpec>,
    /// Or consume pre-existing files.
    pub inputs: Option<InputPaths>,
    /// Rays per candidate station.
    pub n_rays: usize,
    /// Facet-neighborhood radius (meters).
    pub r_f_m: f64,
    /// Coverage threshold in (0, 1].
    pub t_c: f64,
    pub overlap_denominator: OverlapDenominator,
    /// Upper bound on scans actually captured from the plan.
    pub max_scans: usize,
    /// Simulated scanner angular resolution (degrees).
    pub scan_step_deg: f64,
    /// Cube-face resolution for view synthesis.
    pub cube_resolution: u32,
    /// Hole-fill radius in pixels.
    pub fill_radius_px: u32,
    /// Depth-gradient threshold for the edge mask (meters).
    pub edge_threshold_m: f64,
    pub ransac_iterations: usize,
    pub ransac_threshold_m: f64,
    pub ransac_seed: u64,
    pub omega: OmegaMode,
    /// Pixel sigma at feature scale 1.
    pub sigma_px: f64,
    /// Space sigma at zero range and its per-meter growth.
    pub sigma0_m: f64,
    pub k_d: f64,
    pub huber_delta: f64,
    pub solver: SolverKind,
    pub max_iterations: usize,
    /// Evaluation tolerance is 0.01 m times this factor; the factor adapts
    /// the benchmark's photographic sampling density to the synthetic
    /// scanner's coarser spacing.
    pub tau_scale: f64,
    /// Reference pairs fabricated per region tag (scene mode).
    pub reference_per_region: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            scene: Some(SceneSpec::default()),
            inputs: None,
            n_rays: DEFAULT_N_RAYS,
            r_f_m: DEFAULT_R_F,
            t_c: DEFAULT_T_C,
            overlap_denominator: OverlapDenominator::default(),
            max_scans: 16,
            scan_step_deg: 2.0,
            cube_resolution: 256,
            fill_radius_px: DEFAULT_FILL_RADIUS,
            edge_threshold_m: DEFAULT_EDGE_THRESHOLD_M,
            ransac_iterations: 100,
            ransac_threshold_m: 0.1,
            ransac_seed: 7,
            omega: OmegaMode::default(),
            sigma_px: 1.0,
            // The default scene fabricates 3D-3D matches at centimeter
            // noise, so the space whitening starts there instead of at the
            // bare-laser millimeter default.
            sigma0_m: 0.01,
            k_d: 1e-5,
            huber_delta: 1.0,
            solver: SolverKind::Schur,
            max_iterations: 100,
            tau_scale: 20.0,
            reference_per_region: 20,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("pipeline config: {what}")));
        match (&self.scene, &self.inputs) {
            (None, None) => return bad("either a scene spec or input paths are required"),
            (Some(_), Some(_)) => return bad("scene spec and input paths are mutually exclusive"),
            (Some(spec), None) => spec.validate()?,
            (None, Some(inputs)) => {
                let mut missing = Vec::new();
                let mut check = |p: &Path| {
                    if !p.exists() {
                        missing.push(p.display().to_string());
                    }
                };
                check(&inputs.mesh);
                check(&inputs.stations);
                check(&inputs.cameras);
                check(&inputs.points);
                check(&inputs.observations);
                for scan in &inputs.scans {
                    check(&scan.cloud);
                    check(&scan.matches);
                }
                if let Some(p) = &inputs.reference_pairs {
                    check(p);
                }
                if let Some(p) = &inputs.gt_surface {
                    check(p);
                }
                if !missing.is_empty() {
                    return Err(Error::InvalidArgument(format!(
                        "pipeline config: missing input files: {}",
                        missing.join(", ")
                    )));
                }
                if inputs.scans.is_empty() {
                    return bad("input mode needs at least one scan");
                }
            }
        }
        if self.n_rays == 0 {
            return bad("n_rays must be nonzero");
        }
        if !(self.r_f_m > 0.0 && self.r_f_m.is_finite()) {
            return bad("r_f_m must be positive");
        }
        if !(self.t_c > 0.0 && self.t_c <= 1.0) {
            return bad("t_c must be in (0, 1]");
        }
        if self.max_scans == 0 {
            return bad("max_scans must be nonzero");
        }
        if !(self.scan_step_deg > 0.0 && self.scan_step_deg <= 45.0) {
            return bad("scan_step_deg must be in (0, 45]");
        }
        if self.cube_resolution == 0 {
            return bad("cube_resolution must be nonzero");
        }
        if !(self.edge_threshold_m > 0.0) {
            return bad("edge_threshold_m must be positive");
        }
        if self.ransac_iterations == 0 {
            return bad("ransac_iterations must be nonzero");
        }
        if !(self.ransac_threshold_m > 0.0) {
            return bad("ransac_threshold_m must be positive");
        }
        match self.omega {
            OmegaMode::Balanced { ratio } if !(ratio >= 0.0 && ratio.is_finite()) => {
                return bad("omega ratio must be nonnegative");
            }
            OmegaMode::Fixed { value } if !(value >= 0.0 && value.is_finite()) => {
                return bad("omega value must be nonnegative");
            }
            _ => {}
        }
        for (name, v) in [
            ("sigma_px", self.sigma_px),
            ("sigma0_m", self.sigma0_m),
            ("huber_delta", self.huber_delta),
            ("tau_scale", self.tau_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "pipeline config: {name} must be positive, got {v}"
                )));
            }
        }
        if !(self.k_d >= 0.0 && self.k_d.is_finite()) {
            return bad("k_d must be nonnegative");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be nonzero");
        }
        if self.reference_per_region == 0 {
            return bad("reference_per_region must be nonzero");
        }
        Ok(())
    }

    /// Evaluation tolerance in meters.
    pub fn tau_m(&self) -> f64 {
        0.01 * self.tau_scale
    }
}

/// Hex digest of the serialized config; prefix used as the run directory
/// name so identical configs share a directory.
pub fn config_hash(config: &PipelineConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(16);
    for b in &digest[..8] {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}

/// A similarity transform in plain arrays, for JSON artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformRecord {
    pub scale: f64,
    /// Rotation matrix rows.
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl TransformRecord {
    pub fn from_sim3(t: &Sim3Transform) -> Self {
        Self {
            scale: t.scale,
            rotation: rotation_to_rows(&t.rotation),
            translation: t.translation.into(),
        }
    }

    pub fn to_sim3(&self) -> Result<Sim3Transform> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "transform scale must be positive, got {}",
                self.scale
            )));
        }
        Ok(Sim3Transform::new(
            self.scale,
            rotation_from_rows(&self.rotation)?,
            self.translation.into(),
        ))
    }
}

/// Plan stage product: the selection plus the candidate scores that drove it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub result: PlanResult,
    /// Station score per candidate, in candidate order.
    pub scores: Vec<f64>,
    /// Positions of the selected stations, in selection order.
    pub selected_positions: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanStageRecord {
    /// Scan index in pipeline order.
    pub scan: usize,
    /// Candidate-station index the scan was captured from.
    pub station: usize,
    pub cloud_points: usize,
    pub matches: usize,
    /// Fraction of fabricated matches that are true inliers.
    pub true_inlier_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthFaceRecord {
    pub scan: usize,
    pub face: String,
    pub filled_pct: f64,
    pub masked_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegisterScanRecord {
    pub scan: usize,
    pub pairs: usize,
    pub inliers: usize,
    pub samples_skipped: usize,
    pub coarse: TransformRecord,
}

/// One line of `summary.jsonl`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "kebab-case")]
pub enum StageLine {
    Config {
        config: PipelineConfig,
    },
    Simulate {
        facets: usize,
        stations: usize,
        cameras: usize,
        points: usize,
        observations: usize,
        mesh_area_m2: f64,
    },
    Plan {
        plan: PlanRecord,
    },
    Scan {
        scans: Vec<ScanStageRecord>,
    },
    Synth {
        views: Vec<SynthFaceRecord>,
    },
    Register {
        scans: Vec<RegisterScanRecord>,
    },
    Merge {
        omega: f64,
        scale: f64,
        report: SolveReport,
        transforms: Vec<TransformRecord>,
    },
    Eval {
        tau_m: f64,
        rms_coarse: Option<RmsReport>,
        rms_fine: Option<RmsReport>,
        prf_merged: Option<PrfReport>,
        prf_baseline: Option<PrfReport>,
    },
}

/// Artifact locations inside a run directory, or direct input paths when
/// the pipeline consumes files instead of simulating them.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub dir: PathBuf,
    pub mesh: PathBuf,
    pub stations: PathBuf,
    pub cameras: PathBuf,
    pub points: PathBuf,
    pub observations: PathBuf,
    pub scan_clouds: Vec<PathBuf>,
    pub scan_matches: Vec<PathBuf>,
    pub reference_pairs: Option<PathBuf>,
    pub gt_surface: Option<PathBuf>,
}

impl RunPaths {
    pub fn plan(&self) -> PathBuf {
        self.dir.join("plan").join("plan.json")
    }
    pub fn synth_dir(&self) -> PathBuf {
        self.dir.join("synth")
    }
    pub fn coarse_transforms(&self) -> PathBuf {
        self.dir.join("register").join("coarse.json")
    }
    pub fn inlier_sets(&self) -> PathBuf {
        self.dir.join("register").join("inliers.json")
    }
    pub fn merged_cameras(&self) -> PathBuf {
        self.dir.join("merge").join("cameras.json")
    }
    pub fn merged_points(&self) -> PathBuf {
        self.dir.join("merge").join("points.ply")
    }
    pub fn merged_transforms(&self) -> PathBuf {
        self.dir.join("merge").join("transforms.json")
    }
    pub fn merged_state(&self) -> PathBuf {
        self.dir.join("merge").join("state.json")
    }
    pub fn merged_cloud(&self) -> PathBuf {
        self.dir.join("merge").join("cloud.ply")
    }
    pub fn refined_pairs(&self) -> PathBuf {
        self.dir.join("merge").join("reference_pairs_refined.csv")
    }
    pub fn summary(&self) -> PathBuf {
        self.dir.join("summary.jsonl")
    }
}

/// Scale and balance weight the merge solve settled on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeState {
    pub omega: f64,
    pub scale: f64,
}

fn stage_err(stage: &str, e: Error) -> Error {
    match e {
        e @ Error::Stage { .. } => e,
        e => Error::Stage { stage: stage.to_string(), reason: e.to_string() },
    }
}

fn ensure_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p)?;
    Ok(())
}

/// Lays out the run directory for a config and resolves where every shared
/// artifact lives (simulated artifacts inside the run, or the user's files).
pub fn resolve_paths(config: &PipelineConfig, out_root: &Path) -> RunPaths {
    let dir = out_root.join(format!("run-{}", config_hash(config)));
    let scene = dir.join("scene");
    let scans = dir.join("scans");
    match &config.inputs {
        None => RunPaths {
            mesh: scene.join("mesh.ply"),
            stations: scene.join("stations.json"),
            cameras: scene.join("sfm_cameras.json"),
            points: scene.join("sfm_points.ply"),
            observations: scene.join("observations.csv"),
            scan_clouds: Vec::new(),  // filled after planning
            scan_matches: Vec::new(), // filled after planning
            reference_pairs: Some(scans.join("reference_pairs.csv")),
            gt_surface: Some(scene.join("gt_surface.ply")),
            dir,
        },
        Some(inputs) => RunPaths {
            mesh: inputs.mesh.clone(),
            stations: inputs.stations.clone(),
            cameras: inputs.cameras.clone(),
            points: inputs.points.clone(),
            observations: inputs.observations.clone(),
            scan_clouds: inputs.scans.iter().map(|s| s.cloud.clone()).collect(),
            scan_matches: inputs.scans.iter().map(|s| s.matches.clone()).collect(),
            reference_pairs: inputs.reference_pairs.clone(),
            gt_surface: inputs.gt_surface.clone(),
            dir,
        },
    }
}

/// Resolves artifact paths for an existing run directory, discovering the
/// scan list from the plan already on disk (empty when planning has not run
/// yet). Lets single stages run against a directory built by earlier stages.
pub fn paths_for_run_dir(config: &PipelineConfig, dir: &Path) -> Result<RunPaths> {
    let out_root = dir.parent().unwrap_or(Path::new("."));
    let mut paths = resolve_paths(config, out_root);
    paths.dir = dir.to_path_buf();
    if config.inputs.is_none() {
        let scene = dir.join("scene");
        paths.mesh = scene.join("mesh.ply");
        paths.stations = scene.join("stations.json");
        paths.cameras = scene.join("sfm_cameras.json");
        paths.points = scene.join("sfm_points.ply");
        paths.observations = scene.join("observations.csv");
        paths.reference_pairs = Some(dir.join("scans").join("reference_pairs.csv"));
        paths.gt_surface = Some(scene.join("gt_surface.ply"));
        let plan_path = paths.plan();
        if plan_path.exists() {
            let plan: PlanRecord = read_json(&plan_path)?;
            for i in 0..plan.result.selected.len().min(config.max_scans) {
                paths.scan_clouds.push(scan_cloud_path(dir, i));
                paths.scan_matches.push(scan_matches_path(dir, i));
            }
        }
    }
    Ok(paths)
}

/// Reads the config recorded in a run directory's summary.
pub fn config_from_run_dir(dir: &Path) -> Result<PipelineConfig> {
    let summary = dir.join("summary.jsonl");
    if !summary.exists() {
        return Err(Error::InvalidArgument(format!(
            "{} has no summary.jsonl; pass the config explicitly",
            dir.display()
        )));
    }
    for line in read_summary(&summary)? {
        if let StageLine::Config { config } = line {
            return Ok(config);
        }
    }
    Err(Error::InvalidArgument(format!(
        "{} records no config line",
        summary.display()
    )))
}

/// Runs only the scene-simulation stage, creating the config's run
/// directory and recording the config and stage line in `summary.jsonl`.
/// Entry point for building a run directory stage by stage.
pub fn run_simulate(config: &PipelineConfig, out_root: &Path) -> Result<(PathBuf, StageLine)> {
    config.validate()?;
    let spec = config.scene.as_ref().ok_or_else(|| {
        Error::InvalidArgument("simulate needs a scene spec, not input paths".into())
    })?;
    let paths = resolve_paths(config, out_root);
    ensure_dir(&paths.dir)?;
    let mut summary = SummaryWriter::create(&paths.summary())?;
    summary.push(&StageLine::Config { config: config.clone() })?;
    let line = stage_simulate_scene(spec, &paths, config.tau_m())
        .map_err(|e| stage_err("simulate", e))?;
    summary.push(&line)?;
    Ok((paths.dir, line))
}

/// Captures scans in an existing run directory, either at an explicit list
/// of candidate stations or at the stations the recorded plan selected.
pub fn run_scan_capture(
    config: &PipelineConfig,
    dir: &Path,
    stations: Option<&[usize]>,
) -> Result<StageLine> {
    config.validate()?;
    let spec = config.scene.as_ref().ok_or_else(|| {
        Error::InvalidArgument("scan capture needs a scene spec, not input paths".into())
    })?;
    let selected: Vec<usize> = match stations {
        Some(list) => list.to_vec(),
        None => {
            let plan_path = dir.join("plan").join("plan.json");
            if !plan_path.exists() {
                return Err(Error::InvalidArgument(format!(
                    "no stations given and {} does not exist",
                    plan_path.display()
                )));
            }
            let plan: PlanRecord = read_json(&plan_path)?;
            plan.result.selected.into_iter().take(config.max_scans).collect()
        }
    };
    stage_scan(spec, &selected, config.scan_step_deg, config.reference_per_region, dir)
        .map_err(|e| stage_err("scan", e))
}

fn scan_cloud_path(dir: &Path, scan: usize) -> PathBuf {
    dir.join("scans").join(format!("scan_{scan:02}.ply"))
}

fn scan_matches_path(dir: &Path, scan: usize) -> PathBuf {
    dir.join("scans").join(format!("matches_{scan:02}.csv"))
}

/// Simulates the scene and writes everything the downstream stages consume:
/// the proxy mesh, candidate stations, the initial reconstruction, exact
/// observations, ground truth, and the evaluation surface.
///
/// The initial reconstruction is produced the way an upstream
/// structure-from-motion stage would produce it: ground truth is perturbed,
/// then settled by an image-only adjustment over the simulated observations,
/// so it arrives internally consistent at the observation noise level.
pub fn stage_simulate_scene(spec: &SceneSpec, paths: &RunPaths, tau_m: f64) -> Result<StageLine> {
    let bundle = generate_scene(spec)?;
    let scene = paths.dir.join("scene");
    ensure_dir(&scene)?;
    write_mesh(&paths.mesh, &bundle.mesh, PlyFormat::BinaryLittleEndian)?;
    write_json(&paths.stations, &bundle.stations)?;
    write_cameras(scene.join("gt_cameras.json"), &bundle.cameras)?;
    let gt_points = ColoredPointCloud::new(
        bundle.points.clone(),
        bundle.point_colors.clone(),
        None,
    )?;
    write_cloud(scene.join("gt_points.ply"), &gt_points, PlyFormat::BinaryLittleEndian)?;
    let set = simulate_matches(&bundle, &[])?;
    let (cams, points) = noisy_sfm_state(&bundle);
    let sfm_problem = MergeProblem {
        cameras: cams,
        points,
        scans: Vec::new(),
        observations: set.observations.clone(),
        constraints: Vec::new(),
        params: MergeParams { omega: 0.0, ..MergeParams::default() },
    };
    let sfm = solve(&sfm_problem, &SolveOptions::default())?;
    write_cameras(&paths.cameras, &sfm.cameras)?;
    let sfm_cloud = ColoredPointCloud::new(sfm.points, bundle.point_colors.clone(), None)?;
    write_cloud(&paths.points, &sfm_cloud, PlyFormat::BinaryLittleEndian)?;
    write_observations(&paths.observations, &set.observations)?;
    if let Some(gt_path) = &paths.gt_surface {
        let surface = sample_mesh_surface(&bundle.mesh, tau_m / 2.0, spec.seed)?;
        let colors = vec![[200u8, 200, 200]; surface.len()];
        let cloud = ColoredPointCloud::new(surface, colors, None)?;
        write_cloud(gt_path, &cloud, PlyFormat::BinaryLittleEndian)?;
    }
    Ok(StageLine::Simulate {
        facets: bundle.mesh.facet_count(),
        stations: bundle.stations.len(),
        cameras: bundle.cameras.len(),
        points: bundle.points.len(),
        observations: set.observations.len(),
        mesh_area_m2: bundle.mesh.total_area(),
    })
}

/// Plans scan stations from the mesh and candidate files.
pub fn stage_plan(
    mesh_path: &Path,
    stations_path: &Path,
    n_rays: usize,
    r_f_m: f64,
    t_c: f64,
    denominator: OverlapDenominator,
    out_path: &Path,
) -> Result<PlanRecord> {
    let mesh = read_mesh(mesh_path)?;
    let stations: Vec<PotentialLocation> = read_json(stations_path)?;
    let records = build_visibility_records(&mesh, &stations, n_rays, r_f_m)?;
    let result = plan_locations(&records, t_c, denominator)?;
    let record = PlanRecord {
        scores: records.iter().map(|r| r.score).collect(),
        selected_positions: result.selected.iter().map(|&i| stations[i].position).collect(),
        result,
    };
    if let Some(parent) = out_path.parent() {
        ensure_dir(parent)?;
    }
    write_json(out_path, &record)?;
    Ok(record)
}

/// Captures simulated scans at the planned stations and fabricates their
/// correspondence sets and reference pairs.
pub fn stage_scan(
    spec: &SceneSpec,
    selected_stations: &[usize],
    scan_step_deg: f64,
    reference_per_region: usize,
    dir: &Path,
) -> Result<StageLine> {
    let bundle = generate_scene(spec)?;
    let scans_dir = dir.join("scans");
    ensure_dir(&scans_dir)?;
    let mut scans = Vec::new();
    for &station in selected_stations {
        scans.push(simulate_scan(&bundle, station, scan_step_deg)?);
    }
    let set = simulate_matches(&bundle, &scans)?;
    let mut records = Vec::new();
    let mut gt_poses = Vec::new();
    for (i, scan) in scans.iter().enumerate() {
        write_cloud(
            scan_cloud_path(dir, i),
            &scan.cloud,
            PlyFormat::BinaryLittleEndian,
        )?;
        write_correspondences(scan_matches_path(dir, i), &set.matches[i])?;
        write_json(scans_dir.join(format!("labels_{i:02}.json")), &set.inlier_labels[i])?;
        gt_poses.push(TransformRecord::from_sim3(&bundle.scan_to_sfm(scan)));
        let labels = &set.inlier_labels[i];
        records.push(ScanStageRecord {
            scan: i,
            station: scan.station,
            cloud_points: scan.cloud.len(),
            matches: set.matches[i].len(),
            true_inlier_fraction: labels.iter().filter(|&&l| l).count() as f64
                / labels.len().max(1) as f64,
        });
    }
    write_json(scans_dir.join("gt_poses.json"), &gt_poses)?;
    let pairs = reference_pairs(&bundle, &scans, reference_per_region)?;
    write_reference_pairs(scans_dir.join("reference_pairs.csv"), &pairs)?;
    Ok(StageLine::Scan { scans: records })
}

/// Renders a cube of views from each scan cloud: color PNG, depth-edge mask
/// PNG, and raw depth per face.
pub fn stage_synth(
    scan_clouds: &[PathBuf],
    resolution: u32,
    fill_radius: u32,
    edge_threshold_m: f64,
    out_dir: &Path,
) -> Result<Vec<SynthFaceRecord>> {
    ensure_dir(out_dir)?;
    let mut records = Vec::new();
    for (i, cloud_path) in scan_clouds.iter().enumerate() {
        let cloud = read_cloud(cloud_path)?;
        // The scanner sits at its own origin.
        let rig = build_cube_rig(Point3::origin(), resolution)?;
        for (view, name) in rig.iter().zip(crate::synth::cube_face_names()) {
            let mut img = synthesize_view(&cloud, view, fill_radius)?;
            img.attach_edge_mask(edge_threshold_m)?;
            let tag = name.replace('+', "p").replace('-', "n");
            let stem = format!("scan{i:02}_{tag}");
            write_rgb_png(out_dir.join(format!("{stem}.png")), resolution, resolution, img.rgb())?;
            let mask = img.mask().expect("mask attached above");
            write_mask_png(out_dir.join(format!("{stem}_mask.png")), resolution, resolution, mask)?;
            write_pfm(out_dir.join(format!("{stem}_depth.pfm")), resolution, resolution, img.depth())?;
            let total = (resolution as f64) * (resolution as f64);
            let filled = img.depth().iter().filter(|d| d.is_finite()).count();
            let masked = mask.iter().filter(|&&m| m).count();
            records.push(SynthFaceRecord {
                scan: i,
                face: name.to_string(),
                filled_pct: 100.0 * filled as f64 / total,
                masked_pct: 100.0 * masked as f64 / total,
            });
        }
    }
    Ok(records)
}

/// Robustly registers each scan's correspondences; writes the coarse
/// transforms and the surviving pair indices.
pub fn stage_register(
    scan_matches: &[PathBuf],
    params: &RansacParams,
    coarse_out: &Path,
    inliers_out: &Path,
) -> Result<Vec<RegisterScanRecord>> {
    let mut records = Vec::new();
    let mut transforms = Vec::new();
    let mut inlier_sets = Vec::new();
    for (i, path) in scan_matches.iter().enumerate() {
        let pairs = read_correspondences(path)?;
        let result = ransac_sim3(&pairs, params)?;
        records.push(RegisterScanRecord {
            scan: i,
            pairs: pairs.len(),
            inliers: result.inliers.len(),
            samples_skipped: result.samples_skipped,
            coarse: TransformRecord::from_sim3(&result.transform),
        });
        transforms.push(TransformRecord::from_sim3(&result.transform));
        inlier_sets.push(result.inliers);
    }
    if let Some(parent) = coarse_out.parent() {
        ensure_dir(parent)?;
    }
    write_json(coarse_out, &transforms)?;
    write_json(inliers_out, &inlier_sets)?;
    Ok(records)
}

/// Builds and solves the joint refinement from files: initial cameras and
/// points, observations, the coarse transforms, and each scan's inlier
/// correspondences as space constraints (live when tied to a point index,
/// anchored otherwise).
#[allow(clippy::too_many_arguments)]
pub fn stage_merge(
    paths: &RunPaths,
    config: &PipelineConfig,
) -> Result<(MergeState, SolveReport, Vec<TransformRecord>)> {
    let cameras = read_cameras(&paths.cameras)?;
    let sfm_cloud = read_cloud(&paths.points)?;
    let points = sfm_cloud.points().to_vec();
    let observations = read_observations(&paths.observations)?;
    let coarse: Vec<TransformRecord> = read_json(paths.coarse_transforms())?;
    let inlier_sets: Vec<Vec<usize>> = read_json(paths.inlier_sets())?;
    if coarse.len() != paths.scan_matches.len() || inlier_sets.len() != coarse.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scans vs {} coarse transforms vs {} inlier sets",
            paths.scan_matches.len(),
            coarse.len(),
            inlier_sets.len()
        )));
    }
    let mut constraints = Vec::new();
    for (scan, (path, inliers)) in paths.scan_matches.iter().zip(&inlier_sets).enumerate() {
        let pairs = read_correspondences(path)?;
        for &k in inliers {
            let pair: &Correspondence = pairs.get(k).ok_or_else(|| {
                Error::InvalidArgument(format!("inlier index {k} out of range for scan {scan}"))
            })?;
            constraints.push(SpaceConstraint {
                scan,
                laser: pair.src,
                target: match pair.point {
                    Some(j) => SpaceTarget::Point(j),
                    None => SpaceTarget::Anchor(pair.dst),
                },
            });
        }
    }
    let scans: Vec<Sim3Transform> =
        coarse.iter().map(|t| t.to_sim3()).collect::<Result<_>>()?;
    let mut problem = MergeProblem {
        cameras,
        points,
        scans,
        observations,
        constraints,
        params: MergeParams {
            sigma_px: config.sigma_px,
            sigma0_m: config.sigma0_m,
            k_d: config.k_d,
            huber_delta: config.huber_delta,
            omega: 1.0,
        },
    };
    problem.params.omega = match config.omega {
        OmegaMode::Fixed { value } => value,
        // Balance is undefined when either side starts at exactly zero
        // (already-satisfied constraints); any weight then works.
        OmegaMode::Balanced { ratio } => ratio * compute_omega(&problem).unwrap_or(1.0),
    };
    let options = SolveOptions {
        solver: config.solver,
        max_iterations: config.max_iterations,
        ..SolveOptions::default()
    };
    let outcome = solve(&problem, &options)?;

    let merge_dir = paths.dir.join("merge");
    ensure_dir(&merge_dir)?;
    write_cameras(paths.merged_cameras(), &outcome.cameras)?;
    let merged_points = ColoredPointCloud::new(
        outcome.points.clone(),
        sfm_cloud.colors().to_vec(),
        None,
    )?;
    write_cloud(paths.merged_points(), &merged_points, PlyFormat::BinaryLittleEndian)?;
    let transforms: Vec<TransformRecord> =
        outcome.scans.iter().map(TransformRecord::from_sim3).collect();
    write_json(paths.merged_transforms(), &transforms)?;
    let state = MergeState { omega: problem.params.omega, scale: outcome.scale };
    write_json(paths.merged_state(), &state)?;

    // The complete reconstruction: refined points plus every scan cloud
    // mapped through its final transform.
    let mut all_points = outcome.points.clone();
    let mut all_colors = sfm_cloud.colors().to_vec();
    for (i, t) in outcome.scans.iter().enumerate() {
        let cloud = read_cloud(&paths.scan_clouds[i])?;
        for (p, c) in cloud.points().iter().zip(cloud.colors()) {
            all_points.push(apply_sim3(t, p));
            all_colors.push(*c);
        }
    }
    let merged = ColoredPointCloud::new(all_points, all_colors, None)?;
    write_cloud(paths.merged_cloud(), &merged, PlyFormat::BinaryLittleEndian)?;

    // Reference pairs name positions on the pre-merge reconstruction cloud.
    // The merge moves that cloud, so each pair's sfm side rides the
    // displacement of its nearest cloud point; the refined pairs state where
    // the same physical features sit after the merge.
    if let Some(ref_path) = &paths.reference_pairs {
        let pairs = read_reference_pairs(ref_path)?;
        let pre = sfm_cloud.points();
        let refined: Vec<_> = pairs
            .into_iter()
            .map(|mut pair| {
                let nearest = (0..pre.len()).min_by(|&a, &b| {
                    (pre[a] - pair.sfm)
                        .norm_squared()
                        .total_cmp(&(pre[b] - pair.sfm).norm_squared())
                });
                if let Some(j) = nearest {
                    pair.sfm += outcome.points[j] - pre[j];
                }
                pair
            })
            .collect();
        write_reference_pairs(paths.refined_pairs(), &refined)?;
    }
    Ok((state, outcome.report, transforms))
}

/// Evaluates the merged reconstruction: reference-pair RMS after coarse
/// registration and after the joint solve, and precision/recall against the
/// ground-truth surface for the full reconstruction and the image-only
/// baseline. Each RMS row measures the state its stage left behind: the
/// coarse row pairs the original cloud with the coarse transforms, the fine
/// row pairs the refined cloud (pairs ride the merge, see `stage_merge`)
/// with the refined transforms.
pub fn stage_eval(paths: &RunPaths, tau_m: f64) -> Result<StageLine> {
    let state: MergeState = read_json(paths.merged_state())?;
    let fine: Vec<TransformRecord> = read_json(paths.merged_transforms())?;
    let coarse: Vec<TransformRecord> = read_json(paths.coarse_transforms())?;
    let (mut rms_coarse, mut rms_fine) = (None, None);
    if let Some(ref_path) = &paths.reference_pairs {
        let pairs = read_reference_pairs(ref_path)?;
        let refined_path = paths.refined_pairs();
        let refined =
            if refined_path.exists() { read_reference_pairs(&refined_path)? } else { pairs.clone() };
        let to_sim3 =
            |ts: &[TransformRecord]| ts.iter().map(|t| t.to_sim3()).collect::<Result<Vec<_>>>();
        rms_coarse = Some(rms_reference_error(&pairs, &to_sim3(&coarse)?)?);
        rms_fine = Some(rms_reference_error(&refined, &to_sim3(&fine)?)?);
    }
    let (mut prf_merged, mut prf_baseline) = (None, None);
    if let Some(gt_path) = &paths.gt_surface {
        let gt = read_cloud(gt_path)?;
        // The ground-truth surface is metric; bring the reconstruction to
        // metric scale with the refined scale estimate.
        let descale = |cloud: &ColoredPointCloud| -> Vec<Point3> {
            cloud.points().iter().map(|p| Point3::from(p.coords / state.scale)).collect()
        };
        let merged = descale(&read_cloud(paths.merged_cloud())?);
        let baseline = descale(&read_cloud(paths.merged_points())?);
        prf_merged = Some(precision_recall_fscore(&merged, gt.points(), tau_m)?);
        prf_baseline = Some(precision_recall_fscore(&baseline, gt.points(), tau_m)?);
    }
    Ok(StageLine::Eval { tau_m, rms_coarse, rms_fine, prf_merged, prf_baseline })
}

struct SummaryWriter {
    file: fs::File,
}

impl SummaryWriter {
    fn create(path: &Path) -> Result<Self> {
        Ok(Self { file: fs::File::create(path)? })
    }

    fn push(&mut self, line: &StageLine) -> Result<()> {
        let json = serde_json::to_string(line)?;
        writeln!(self.file, "{json}")?;
        self.file.flush()?;
        Ok(())
    }
}

/// Reads a summary file back as stage lines.
pub fn read_summary(path: &Path) -> Result<Vec<StageLine>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

/// Runs every stage in order inside a content-addressed run directory,
/// appending one summary line per completed stage. Any stage failure aborts
/// with the stage name and cause; artifacts and summary lines written before
/// the failure stay on disk.
pub fn run_pipeline(config: &PipelineConfig, out_root: &Path) -> Result<PathBuf> {
    config.validate()?;
    let mut paths = resolve_paths(config, out_root);
    ensure_dir(&paths.dir)?;
    let mut summary = SummaryWriter::create(&paths.summary())?;
    summary.push(&StageLine::Config { config: config.clone() })?;

    if let Some(spec) = &config.scene {
        let line = stage_simulate_scene(spec, &paths, config.tau_m())
            .map_err(|e| stage_err("simulate", e))?;
        summary.push(&line)?;
    }

    let plan = stage_plan(
        &paths.mesh,
        &paths.stations,
        config.n_rays,
        config.r_f_m,
        config.t_c,
        config.overlap_denominator,
        &paths.plan(),
    )
    .map_err(|e| stage_err("plan", e))?;
    summary.push(&StageLine::Plan { plan: plan.clone() })?;

    if let Some(spec) = &config.scene {
        let selected: Vec<usize> =
            plan.result.selected.iter().copied().take(config.max_scans).collect();
        let line = stage_scan(
            spec,
            &selected,
            config.scan_step_deg,
            config.reference_per_region,
            &paths.dir,
        )
        .map_err(|e| stage_err("scan", e))?;
        if let StageLine::Scan { scans } = &line {
            for record in scans {
                paths.scan_clouds.push(scan_cloud_path(&paths.dir, record.scan));
                paths.scan_matches.push(scan_matches_path(&paths.dir, record.scan));
            }
        }
        summary.push(&line)?;
    }

    let views = stage_synth(
        &paths.scan_clouds,
        config.cube_resolution,
        config.fill_radius_px,
        config.edge_threshold_m,
        &paths.synth_dir(),
    )
    .map_err(|e| stage_err("synth", e))?;
    summary.push(&StageLine::Synth { views })?;

    let params = RansacParams {
        iterations: config.ransac_iterations,
        dist_thresh: config.ransac_threshold_m,
        seed: config.ransac_seed,
    };
    let registered = stage_register(
        &paths.scan_matches,
        &params,
        &paths.coarse_transforms(),
        &paths.inlier_sets(),
    )
    .map_err(|e| stage_err("register", e))?;
    summary.push(&StageLine::Register { scans: registered })?;

    let (state, report, transforms) =
        stage_merge(&paths, config).map_err(|e| stage_err("merge", e))?;
    summary.push(&StageLine::Merge {
        omega: state.omega,
        scale: state.scale,
        report,
        transforms,
    })?;

    let eval = stage_eval(&paths, config.tau_m()).map_err(|e| stage_err("eval", e))?;
    summary.push(&eval)?;

    Ok(paths.dir)
}

/// One row of a sweep: the run's key metrics, or the error that stopped it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub run_dir: String,
    pub ok: bool,
    pub error: String,
    pub planned_scans: Option<usize>,
    pub rms_coarse_m: Option<f64>,
    pub rms_fine_m: Option<f64>,
    pub fscore_merged_pct: Option<f64>,
    pub fscore_baseline_pct: Option<f64>,
    pub solve_iterations: Option<usize>,
}

/// Applies one sweepable parameter to a config copy. Recognized keys:
/// `t-c`, `rc-exponent` (omega ratio 10^value), `omega-fixed`, `n-rays`,
/// `r-f`, `tau-scale`, `scan-step`, `outlier-fraction`, `pixel-sigma`,
/// `seed` (scene and RANSAC).
pub fn apply_parameter(config: &mut PipelineConfig, key: &str, value: f64) -> Result<()> {
    fn scene<'a>(config: &'a mut PipelineConfig, key: &str) -> Result<&'a mut SceneSpec> {
        config.scene.as_mut().ok_or_else(|| {
            Error::InvalidArgument(format!("parameter {key:?} needs a simulated scene"))
        })
    }
    match key {
        "t-c" => config.t_c = value,
        "rc-exponent" => config.omega = OmegaMode::Balanced { ratio: 10f64.powf(value) },
        "omega-fixed" => config.omega = OmegaMode::Fixed { value },
        "n-rays" => config.n_rays = value as usize,
        "r-f" => config.r_f_m = value,
        "tau-scale" => config.tau_scale = value,
        "scan-step" => config.scan_step_deg = value,
        "outlier-fraction" => scene(config, key)?.outlier_fraction = value,
        "pixel-sigma" => scene(config, key)?.pixel_sigma_px = value,
        "seed" => {
            config.ransac_seed = value as u64;
            if let Some(s) = config.scene.as_mut() {
                s.seed = value as u64;
            }
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown sweep parameter {other:?}"
            )));
        }
    }
    Ok(())
}

/// Extracts sweep metrics from a completed run's summary.
fn summarize_run(dir: &Path) -> Result<(Option<usize>, Option<f64>, Option<f64>, Option<f64>, Option<f64>, Option<usize>)> {
    let lines = read_summary(&dir.join("summary.jsonl"))?;
    let mut planned = None;
    let mut rms_c = None;
    let mut rms_f = None;
    let mut f_merged = None;
    let mut f_base = None;
    let mut iters = None;
    for line in lines {
        match line {
            StageLine::Plan { plan } => planned = Some(plan.result.count),
            StageLine::Merge { report, .. } => iters = Some(report.iterations),
            StageLine::Eval { rms_coarse, rms_fine, prf_merged, prf_baseline, .. } => {
                rms_c = rms_coarse.map(|r| r.rms_m);
                rms_f = rms_fine.map(|r| r.rms_m);
                f_merged = prf_merged.map(|p| p.fscore_pct);
                f_base = prf_baseline.map(|p| p.fscore_pct);
            }
            _ => {}
        }
    }
    Ok((planned, rms_c, rms_f, f_merged, f_base, iters))
}

/// Runs the pipeline once per value of one parameter; failures become rows
/// and the sweep continues. Returns the rows in value order.
pub fn sweep(
    config: &PipelineConfig,
    parameter: &str,
    values: &[f64],
    out_root: &Path,
) -> Result<Vec<SweepRow>> {
    // Surface an unknown key or invalid base config before any run.
    config.validate()?;
    apply_parameter(&mut config.clone(), parameter, values.first().copied().unwrap_or(0.0))?;
    let mut rows = Vec::new();
    for &value in values {
        let mut cfg = config.clone();
        if let Err(e) = apply_parameter(&mut cfg, parameter, value) {
            rows.push(SweepRow {
                parameter: parameter.to_string(),
                value,
                run_dir: String::new(),
                ok: false,
                error: e.to_string(),
                planned_scans: None,
                rms_coarse_m: None,
                rms_fine_m: None,
                fscore_merged_pct: None,
                fscore_baseline_pct: None,
                solve_iterations: None,
            });
            continue;
        }
        match run_pipeline(&cfg, out_root) {
            Ok(dir) => {
                let (planned, rms_c, rms_f, f_m, f_b, iters) = summarize_run(&dir)?;
                rows.push(SweepRow {
                    parameter: parameter.to_string(),
                    value,
                    run_dir: dir.display().to_string(),
                    ok: true,
                    error: String::new(),
                    planned_scans: planned,
                    rms_coarse_m: rms_c,
                    rms_fine_m: rms_f,
                    fscore_merged_pct: f_m,
                    fscore_baseline_pct: f_b,
                    solve_iterations: iters,
                });
            }
            Err(e) => rows.push(SweepRow {
                parameter: parameter.to_string(),
                value,
                run_dir: resolve_paths(&cfg, out_root).dir.display().to_string(),
                ok: false,
                error: e.to_string(),
                planned_scans: None,
                rms_coarse_m: None,
                rms_fine_m: None,
                fscore_merged_pct: None,
                fscore_baseline_pct: None,
                solve_iterations: None,
            }),
        }
    }
    Ok(rows)
}

/// Writes sweep rows as CSV.
pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "parameter",
        "value",
        "run_dir",
        "ok",
        "error",
        "planned_scans",
        "rms_coarse_m",
        "rms_fine_m",
        "fscore_merged_pct",
        "fscore_baseline_pct",
        "solve_iterations",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.parameter.clone(),
            r.value.to_string(),
            r.run_dir.clone(),
            r.ok.to_string(),
            r.error.clone(),
            r.planned_scans.map(|x| x.to_string()).unwrap_or_default(),
            opt(r.rms_coarse_m),
            opt(r.rms_fine_m),
            opt(r.fscore_merged_pct),
            opt(r.fscore_baseline_pct),
            r.solve_iterations.map(|x| x.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
