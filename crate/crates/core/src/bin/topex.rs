//! Command-line front end: world generation, mission runs, planner
//! comparisons and artifact export.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 configuration error,
//! 3 mission ended stuck or blocked.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use topex::config::{env_overrides, parse_override, ConfigError, Scenario};
use topex::export::{belief_points, hulls_obj, points_ply, polyline_ply, HULL_MTL, OCCUPIED_RGB};
use topex::geometry::{ConvexPolyhedron, Vec3};
use topex::knowledge::extract_frontier_points;
use topex::mission::{compute_metrics, run_mission_in, MetricsSummary, MissionConfig, MissionError, MissionOutcome};
use topex::world::{generate_world, write_world_file, GroundTruthWorld, WorldError, WorldKind, WorldSpec};

#[derive(Parser)]
#[command(name = "topex", version, about = "Topological exploration planning simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a ground-truth world and write it as a grid file.
    GenWorld(GenWorld),
    /// Run one mission and write its logs.
    Run(Run),
    /// Run several planners over several seeds and tabulate median rates.
    Compare(Compare),
    /// Write the world, and optionally a mission's map, for external viewers.
    Export(Export),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario TOML; defaults apply when omitted.
    scenario: Option<PathBuf>,
    /// Override a scenario key, e.g. `--set mission.time_budget=120`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct GenWorld {
    #[arg(long, default_value = "corridor-rooms")]
    kind: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Outer extent `x,y,z` in meters.
    #[arg(long, default_value = "40,40,5", allow_hyphen_values = true)]
    size: String,
    #[arg(long, default_value_t = 0.25, allow_hyphen_values = true)]
    resolution: f64,
    /// Spawn `x,y,z`; the generator picks one when omitted.
    #[arg(long, allow_hyphen_values = true)]
    spawn: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Run {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// topo or baseline; overrides `mission.planner`.
    #[arg(long)]
    planner: Option<String>,
    /// Overrides `world.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "topex-out")]
    out: PathBuf,
    /// Also write hull OBJ, belief and trajectory PLY, and graph CSVs.
    #[arg(long)]
    export: bool,
}

#[derive(Args)]
struct Compare {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_delimiter = ',', default_value = "topo,baseline")]
    planners: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    seeds: Vec<u64>,
    #[arg(long, default_value = "topex-compare")]
    out: PathBuf,
}

#[derive(Args)]
struct Export {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value = "topex-export")]
    out: PathBuf,
    /// Run the mission too and export its map.
    #[arg(long)]
    mission: bool,
}

enum Failure {
    Config(String),
    Io(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Failure::Io(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<WorldError> for Failure {
    fn from(e: WorldError) -> Self {
        match e {
            WorldError::InvalidSpec { .. } | WorldError::Format { .. } => Failure::Config(e.to_string()),
            _ => Failure::Io(e.to_string()),
        }
    }
}

impl From<MissionError> for Failure {
    fn from(e: MissionError) -> Self {
        match e {
            MissionError::Config { .. } => Failure::Config(e.to_string()),
            MissionError::World(w) => w.into(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::GenWorld(a) => gen_world(a),
        Cmd::Run(a) => run(a),
        Cmd::Compare(a) => compare(a),
        Cmd::Export(a) => export(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn parse_vec3(key: &'static str, s: &str) -> Result<Vec3, Failure> {
    let parts: Result<Vec<f64>, _> = s.split(',').map(|t| t.trim().parse::<f64>()).collect();
    match parts {
        Ok(v) if v.len() == 3 => Ok(Vec3::new(v[0], v[1], v[2])),
        _ => Err(Failure::Config(format!("invalid value for `{key}`: expected x,y,z, got `{s}`"))),
    }
}

fn gen_world(a: GenWorld) -> Result<u8, Failure> {
    let kind: WorldKind = a.kind.parse().map_err(|e| Failure::Config(format!("world.kind: {e}")))?;
    let spec = WorldSpec {
        kind,
        seed: a.seed,
        size: parse_vec3("world.size", &a.size)?,
        resolution: a.resolution,
        spawn: a.spawn.as_deref().map(|s| parse_vec3("world.spawn", s)).transpose()?,
        file: None,
    };
    let world = generate_world(&spec)?;
    write_world_file(&world, &a.out)?;
    let l = world.lattice();
    let reachable = world.reachable_free().iter().filter(|r| **r).count();
    println!(
        "wrote {}: dims {}x{}x{} @ {} m, free {}, occupied {}, reachable free {}, spawn {:?}",
        a.out.display(),
        l.dims[0],
        l.dims[1],
        l.dims[2],
        l.resolution,
        world.count_free(),
        world.count_occupied(),
        reachable,
        world.spawn().to_array(),
    );
    Ok(0)
}

/// Scenario file, then environment, then `--set`, then dedicated flags.
fn load_config(args: &ScenarioArgs, extra: &[(String, String)]) -> Result<MissionConfig, Failure> {
    let mut scenario = match &args.scenario {
        Some(p) => Scenario::load(p)?,
        None => Scenario::default(),
    };
    scenario.apply_overrides(&env_overrides(std::env::vars()))?;
    let sets = args.set.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>, _>>()?;
    scenario.apply_overrides(&sets)?;
    scenario.apply_overrides(extra)?;
    Ok(scenario.to_mission_config()?)
}

fn print_effective(cfg: &MissionConfig) {
    println!("# effective config");
    print!("{}", Scenario::effective(cfg).to_toml());
    println!("# end effective config");
}

fn write(dir: &Path, name: &str, content: &str) -> Result<(), Failure> {
    std::fs::write(dir.join(name), content)?;
    Ok(())
}

fn run(a: Run) -> Result<u8, Failure> {
    let mut extra = Vec::new();
    if let Some(p) = a.planner {
        extra.push(("mission.planner".to_string(), p));
    }
    if let Some(s) = a.seed {
        extra.push(("world.seed".to_string(), s.to_string()));
    }
    let cfg = load_config(&a.scenario, &extra)?;
    print_effective(&cfg);
    let world = generate_world(&cfg.world)?;
    let outcome = run_mission_in(&world, &cfg)?;
    let metrics = compute_metrics(&outcome.log, cfg.metrics_window);
    std::fs::create_dir_all(&a.out)?;
    write_run_logs(&a.out, &outcome, &metrics)?;
    if a.export {
        write_map_exports(&a.out, &world, &outcome, &cfg)?;
    }
    let status = outcome.log.status;
    println!(
        "status {status}, completion {:.4}, median rate {:.4} m3/s, volume {:.1} m3, length {:.1} m, time {:.1} s",
        metrics.completion_fraction,
        metrics.median_rate,
        metrics.final_volume,
        metrics.trajectory_length,
        metrics.sim_time
    );
    Ok(if status.is_abnormal() { 3 } else { 0 })
}

fn write_run_logs(dir: &Path, outcome: &MissionOutcome, metrics: &MetricsSummary) -> Result<(), Failure> {
    write(dir, "ticks.csv", &outcome.log.ticks_csv())?;
    write(dir, "events.csv", &outcome.log.events_csv())?;
    let json = serde_json::to_string_pretty(&outcome.log.summary_json(metrics)).expect("summary serializes");
    write(dir, "summary.json", &(json + "\n"))
}

fn write_map_exports(
    dir: &Path,
    world: &GroundTruthWorld,
    outcome: &MissionOutcome,
    cfg: &MissionConfig,
) -> Result<(), Failure> {
    let coverage: Vec<&ConvexPolyhedron> = outcome.graph.coverage_hulls();
    let ders: Vec<&ConvexPolyhedron> = outcome.ders.iter().filter(|d| d.is_active()).map(|d| &d.hull).collect();
    write(dir, "hulls.obj", &hulls_obj(&coverage, &ders, Some("hulls.mtl")))?;
    write(dir, "hulls.mtl", HULL_MTL)?;
    let owned: Vec<ConvexPolyhedron> = coverage.into_iter().cloned().collect();
    let frontier = extract_frontier_points(&outcome.grid, &owned, cfg.regions.ds.max(world.resolution()));
    write(dir, "belief.ply", &points_ply(&belief_points(&outcome.grid, &frontier, false)))?;
    write(dir, "trajectory.ply", &polyline_ply(&outcome.log.trajectory()))?;
    let (nodes, edges) = outcome.graph.to_csv();
    write(dir, "graph_nodes.csv", &nodes)?;
    write(dir, "graph_edges.csv", &edges)
}

fn compare(a: Compare) -> Result<u8, Failure> {
    if a.planners.len() < 2 {
        return Err(Failure::Config("compare needs at least two planners".into()));
    }
    let mut jobs = Vec::new();
    for p in &a.planners {
        for &s in &a.seeds {
            let extra = [("mission.planner".to_string(), p.clone()), ("world.seed".to_string(), s.to_string())];
            jobs.push(load_config(&a.scenario, &extra)?);
        }
    }
    print_effective(&jobs[0]);
    std::fs::create_dir_all(&a.out)?;
    let results: Vec<Result<(MissionConfig, MissionOutcome, MetricsSummary), Failure>> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|cfg| {
                s.spawn(move || -> Result<_, Failure> {
                    let world = generate_world(&cfg.world)?;
                    let outcome = run_mission_in(&world, cfg)?;
                    let metrics = compute_metrics(&outcome.log, cfg.metrics_window);
                    Ok((cfg.clone(), outcome, metrics))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("mission worker panicked")).collect()
    });

    let mut runs =
        String::from("planner,seed,status,median_rate,final_volume,completion_fraction,trajectory_length,sim_time\n");
    let mut curves = String::from("planner,seed,t,detected_volume\n");
    let mut rates: Vec<(String, u64, f64)> = Vec::new();
    let mut abnormal = false;
    let mut first_err = None;
    for r in results {
        match r {
            Ok((cfg, outcome, m)) => {
                let p = cfg.planner_kind.to_string();
                let seed = cfg.world.seed;
                let _ = writeln!(
                    runs,
                    "{p},{seed},{},{},{},{},{},{}",
                    outcome.log.status,
                    m.median_rate,
                    m.final_volume,
                    m.completion_fraction,
                    m.trajectory_length,
                    m.sim_time
                );
                for (t, v) in &m.explored_volume_curve {
                    let _ = writeln!(curves, "{p},{seed},{t},{v}");
                }
                abnormal |= outcome.log.status.is_abnormal();
                rates.push((p, seed, m.median_rate));
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    // partial results are flushed before any error is reported
    write(&a.out, "runs.csv", &runs)?;
    write(&a.out, "curves.csv", &curves)?;
    let summary = ratio_table(&rates, &a.planners);
    write(&a.out, "ratios.csv", &summary)?;
    print!("{runs}");
    print!("{summary}");
    if let Some(e) = first_err {
        return Err(e);
    }
    Ok(if abnormal { 3 } else { 0 })
}

/// Each planner's aggregate median rate (median over its runs) against the
/// first planner, plus per-seed ratios.
fn ratio_table(rates: &[(String, u64, f64)], planners: &[String]) -> String {
    let reference = &planners[0];
    let aggregate = |p: &str| {
        let v: Vec<f64> = rates.iter().filter(|r| r.0 == p).map(|r| r.2).collect();
        topex::mission::median(&v)
    };
    let ref_agg = aggregate(reference);
    let mut s = String::from("planner,seed,median_rate,first_over_this\n");
    for p in planners {
        for (_, seed, r) in rates.iter().filter(|r| &r.0 == p) {
            let base = rates.iter().find(|x| &x.0 == reference && x.1 == *seed).map_or(f64::NAN, |x| x.2);
            let _ = writeln!(s, "{p},{seed},{r},{}", base / r);
        }
        let agg = aggregate(p);
        let _ = writeln!(s, "{p},all,{agg},{}", ref_agg / agg);
    }
    s
}

fn export(a: Export) -> Result<u8, Failure> {
    let cfg = load_config(&a.scenario, &[])?;
    print_effective(&cfg);
    let world = generate_world(&cfg.world)?;
    std::fs::create_dir_all(&a.out)?;
    write_world_file(&world, &a.out.join("world.grid"))?;
    let occupied: Vec<(Vec3, [u8; 3])> = world.occupied_centers().into_iter().map(|p| (p, OCCUPIED_RGB)).collect();
    write(&a.out, "world.ply", &points_ply(&occupied))?;
    if !a.mission {
        return Ok(0);
    }
    let outcome = run_mission_in(&world, &cfg)?;
    let metrics = compute_metrics(&outcome.log, cfg.metrics_window);
    write_run_logs(&a.out, &outcome, &metrics)?;
    write_map_exports(&a.out, &world, &outcome, &cfg)?;
    Ok(if outcome.log.status.is_abnormal() { 3 } else { 0 })
}
