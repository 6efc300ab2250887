//! The closed-loop exploration executive: sense, update regions and graph,
//! plan locally or globally, move.

mod metrics;

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::fmt::Write as _;
use std::ops::ControlFlow;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metrics::{compute_metrics, median, window_rates, MetricsSummary};

use crate::geometry::{fibonacci_sphere, ConvexPolyhedron, Vec3};
use crate::knowledge::{extract_frontier_masked, simulate_scan_with, Cell, CoverageMask, KnowledgeGrid, SensorConfig};
use crate::planning::{
    cylinder_astar, global_explore_score, global_plan_through_uncertainty, local_explore_score, raw_frontier_voxels,
    BaselinePlanner, Candidate, CylinderConstraint, GlobalPlan, PlanError, PlannerParams, ShortcutCache,
};
use crate::regions::{update_ders, DerParams, DistinctiveRegion};
use crate::topomap::{der_anchor, EdgeCheck, MapParams, NodeId, TopoGraph};
use crate::world::{generate_world, GroundTruthWorld, WorldError, WorldSpec};

#[derive(Debug, Error)]
pub enum MissionError {
    #[error("invalid config key `{key}`: {reason}")]
    Config { key: &'static str, reason: String },
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    Topo,
    Baseline,
}

impl FromStr for PlannerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "topo" => Ok(Self::Topo),
            "baseline" => Ok(Self::Baseline),
            _ => Err(format!("unknown planner `{s}`, expected topo or baseline")),
        }
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Topo => "topo",
            Self::Baseline => "baseline",
        })
    }
}

/// Resolved region-extraction parameters, meters unless noted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionConfig {
    /// Rays cast from the pose when building a coverage hull.
    pub coverage_dirs: usize,
    /// Frontier downsampling cell size.
    pub ds: f64,
    /// Single-linkage clustering distance.
    pub d_cluster: f64,
    pub min_cluster_size: usize,
    /// Distinctiveness and attachment radius.
    pub r_near: f64,
    /// Fraction of DER-to-DER segments that must be clear for mutual visibility.
    pub visibility_fraction: f64,
}

impl RegionConfig {
    /// Defaults derived from the grid resolution and detection range.
    pub fn derived(resolution: f64, zeta_detect: f64) -> Self {
        let ds = 2.0 * resolution;
        Self {
            coverage_dirs: 384,
            ds,
            d_cluster: 2.0 * ds,
            min_cluster_size: 5,
            r_near: 2.0 * zeta_detect,
            visibility_fraction: 1.0,
        }
    }

    pub fn der_params(&self) -> DerParams {
        DerParams {
            ds: self.ds,
            d_cluster: self.d_cluster,
            min_cluster_size: self.min_cluster_size,
            r_near: self.r_near,
            visibility_fraction: self.visibility_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionConfig {
    pub world: WorldSpec,
    pub sensor: SensorConfig,
    pub regions: RegionConfig,
    pub planner: PlannerParams,
    pub planner_kind: PlannerKind,
    /// m/s
    pub max_speed: f64,
    /// s
    pub tick_dt: f64,
    /// Simulated seconds.
    pub time_budget: f64,
    /// Ticks without motion or new detections before the mission is abandoned.
    pub stuck_ticks: usize,
    /// Window of the exploration-rate metric, s.
    pub metrics_window: f64,
}

impl Default for MissionConfig {
    fn default() -> Self {
        let world = WorldSpec::default();
        let sensor = SensorConfig::default();
        let regions = RegionConfig::derived(world.resolution, sensor.zeta_detect);
        Self {
            world,
            sensor,
            regions,
            planner: PlannerParams::default(),
            planner_kind: PlannerKind::Topo,
            max_speed: 0.75,
            tick_dt: 0.5,
            time_budget: 600.0,
            stuck_ticks: 50,
            metrics_window: 1.0,
        }
    }
}

fn check(ok: bool, key: &'static str, reason: impl FnOnce() -> String) -> Result<(), MissionError> {
    if ok {
        Ok(())
    } else {
        Err(MissionError::Config { key, reason: reason() })
    }
}

impl MissionConfig {
    /// World-independent checks; the world spec is validated on generation.
    pub fn validate(&self) -> Result<(), MissionError> {
        self.sensor.validate().map_err(|(key, reason)| MissionError::Config { key, reason })?;
        let pos = |v: f64| v > 0.0 && v.is_finite();
        check(pos(self.max_speed), "mission.max_speed", || format!("must be positive, got {}", self.max_speed))?;
        check(pos(self.tick_dt), "mission.tick_dt", || format!("must be positive, got {}", self.tick_dt))?;
        check(self.time_budget >= 0.0 && self.time_budget.is_finite(), "mission.time_budget", || {
            format!("must be non-negative, got {}", self.time_budget)
        })?;
        check(self.stuck_ticks > 0, "mission.stuck_ticks", || "must be at least 1".into())?;
        check(pos(self.metrics_window), "mission.metrics_window", || {
            format!("must be positive, got {}", self.metrics_window)
        })?;
        let r = &self.regions;
        check(r.coverage_dirs >= 4, "regions.coverage_dirs", || format!("need at least 4, got {}", r.coverage_dirs))?;
        check(r.ds >= self.world.resolution - 1e-12, "regions.ds", || {
            format!("must be at least the resolution {}, got {}", self.world.resolution, r.ds)
        })?;
        check(pos(r.d_cluster), "regions.d_cluster", || format!("must be positive, got {}", r.d_cluster))?;
        check(r.min_cluster_size >= 1, "regions.min_cluster_size", || "must be at least 1".into())?;
        check(pos(r.r_near), "regions.r_near", || format!("must be positive, got {}", r.r_near))?;
        check(r.visibility_fraction > 0.0 && r.visibility_fraction <= 1.0, "regions.visibility_fraction", || {
            format!("must be in (0, 1], got {}", r.visibility_fraction)
        })?;
        let p = &self.planner;
        check(pos(p.sigma), "planner.sigma", || format!("must be positive, got {}", p.sigma))?;
        check(p.gamma >= 1.0 && p.gamma.is_finite(), "planner.gamma", || {
            format!("must be at least 1, got {}", p.gamma)
        })?;
        check(pos(p.ratio_r), "planner.ratio_r", || format!("must be positive, got {}", p.ratio_r))?;
        check(pos(p.r_min) && p.r_min <= p.r_max, "planner.r_min", || {
            format!("need 0 < r_min <= r_max, got {} and {}", p.r_min, p.r_max)
        })?;
        check(p.eps_d > 0.0 && p.eps_d <= 1.0, "planner.eps_d", || format!("must be in (0, 1], got {}", p.eps_d))?;
        check(p.goal_tol >= 0.0, "planner.goal_tol", || format!("must be non-negative, got {}", p.goal_tol))?;
        check(p.robot_radius >= 0.0, "planner.robot_radius", || {
            format!("must be non-negative, got {}", p.robot_radius)
        })?;
        check(p.attach_candidates >= 1, "planner.attach_candidates", || "must be at least 1".into())?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Idle,
    Local,
    Global,
    Baseline,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Idle => "idle",
            Self::Local => "local",
            Self::Global => "global",
            Self::Baseline => "baseline",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissionStatus {
    /// No frontier cluster large enough to form a DER is left.
    Complete,
    /// Time budget exhausted.
    Budget,
    /// No progress for `stuck_ticks` ticks.
    Stuck,
    /// Frontier remains but none of it is reachable.
    Blocked,
    /// Every remaining DER was reached without getting covered.
    Exhausted,
}

impl MissionStatus {
    pub fn is_abnormal(self) -> bool {
        matches!(self, Self::Stuck | Self::Blocked)
    }
}

impl fmt::Display for MissionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Complete => "complete",
            Self::Budget => "budget",
            Self::Stuck => "stuck",
            Self::Blocked => "blocked",
            Self::Exhausted => "exhausted",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RobotState {
    pub position: Vec3,
    /// Unit direction of the last executed motion, zero before any.
    pub psi: Vec3,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TickRecord {
    pub tick: u64,
    pub t: f64,
    pub position: Vec3,
    /// Detected (free plus occupied) volume, m³.
    pub detected_volume: f64,
    pub mode: Mode,
    /// Goal DER id in topo mode, goal voxel index in baseline mode.
    pub goal: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    MapUpdate,
    Plan,
    GoalReached,
    PathBlocked,
    Bump,
    End,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::MapUpdate => "map_update",
            Self::Plan => "plan",
            Self::GoalReached => "goal_reached",
            Self::PathBlocked => "path_blocked",
            Self::Bump => "bump",
            Self::End => "end",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRecord {
    pub tick: u64,
    pub t: f64,
    pub kind: EventKind,
    pub mode: Mode,
    pub goal: Option<u64>,
    pub detail: String,
}

/// Final map sizes.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MapStats {
    pub coverage_nodes: usize,
    pub frontier_nodes: usize,
    pub edges: usize,
    pub active_ders: usize,
    pub map_updates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissionLog {
    pub planner: PlannerKind,
    pub seed: u64,
    pub ticks: Vec<TickRecord>,
    pub events: Vec<EventRecord>,
    pub status: MissionStatus,
    /// Free voxels reachable from spawn.
    pub reachable_free: usize,
    /// Of those, the ones detected free.
    pub detected_reachable_free: usize,
    pub voxel_volume: f64,
    pub stats: MapStats,
}

fn opt(v: Option<u64>) -> String {
    v.map_or(String::new(), |g| g.to_string())
}

impl MissionLog {
    /// Per-tick CSV.
    pub fn ticks_csv(&self) -> String {
        let mut s = String::from("tick,t,x,y,z,detected_volume,mode,goal\n");
        for r in &self.ticks {
            let p = r.position;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.tick,
                r.t,
                p.x,
                p.y,
                p.z,
                r.detected_volume,
                r.mode,
                opt(r.goal)
            );
        }
        s
    }

    pub fn events_csv(&self) -> String {
        let mut s = String::from("tick,t,kind,mode,goal,detail\n");
        for e in &self.events {
            let _ = writeln!(s, "{},{},{},{},{},\"{}\"", e.tick, e.t, e.kind, e.mode, opt(e.goal), e.detail);
        }
        s
    }

    /// Sequence of modes chosen by successive plans, consecutive repeats collapsed.
    pub fn mode_sequence(&self) -> Vec<Mode> {
        let mut out: Vec<Mode> = Vec::new();
        for e in self.events.iter().filter(|e| e.kind == EventKind::Plan) {
            if out.last() != Some(&e.mode) {
                out.push(e.mode);
            }
        }
        out
    }

    pub fn trajectory(&self) -> Vec<Vec3> {
        self.ticks.iter().map(|r| r.position).collect()
    }

    /// JSON summary of the run and its metrics, curve omitted.
    pub fn summary_json(&self, m: &MetricsSummary) -> serde_json::Value {
        serde_json::json!({
            "planner": self.planner,
            "seed": self.seed,
            "status": self.status,
            "ticks": self.ticks.len(),
            "sim_time": m.sim_time,
            "final_volume": m.final_volume,
            "median_rate": m.median_rate,
            "trajectory_length": m.trajectory_length,
            "completion_fraction": m.completion_fraction,
            "reachable_free": self.reachable_free,
            "detected_reachable_free": self.detected_reachable_free,
            "voxel_volume": self.voxel_volume,
            "map": self.stats,
        })
    }
}

/// Goal done: its DER is gone or consumed, or the robot is inside its hull.
pub fn goal_reached_check(position: Vec3, goal: u64, ders: &[DistinctiveRegion]) -> bool {
    match ders.iter().find(|d| d.id == goal) {
        Some(d) => !d.is_active() || d.hull.contains(position, 0.0),
        None => true,
    }
}

/// Everything a finished topo mission leaves behind, for exports.
#[derive(Debug, Clone)]
pub struct MissionOutcome {
    pub log: MissionLog,
    pub grid: KnowledgeGrid,
    pub graph: TopoGraph,
    pub ders: Vec<DistinctiveRegion>,
}

pub fn run_mission(cfg: &MissionConfig) -> Result<MissionLog, MissionError> {
    cfg.validate()?;
    let world = generate_world(&cfg.world)?;
    run_mission_in(&world, cfg).map(|o| o.log)
}

/// Runs in a prebuilt world; `cfg.world` only contributes its seed to the log.
pub fn run_mission_in(world: &GroundTruthWorld, cfg: &MissionConfig) -> Result<MissionOutcome, MissionError> {
    cfg.validate()?;
    check(cfg.regions.ds >= world.resolution() - 1e-12, "regions.ds", || {
        format!("must be at least the resolution {}, got {}", world.resolution(), cfg.regions.ds)
    })?;
    let mut sim = Sim::new(world, cfg);
    let status = sim.run()?;
    Ok(sim.finish(status))
}

struct Sim<'w> {
    world: &'w GroundTruthWorld,
    cfg: &'w MissionConfig,
    scan_dirs: Vec<Vec3>,
    coverage_dirs: Vec<Vec3>,
    grid: KnowledgeGrid,
    mask: CoverageMask,
    graph: TopoGraph,
    ders: Vec<DistinctiveRegion>,
    next_der: u64,
    cache: ShortcutCache,
    baseline: BaselinePlanner,
    robot: RobotState,
    path: VecDeque<Vec3>,
    mode: Mode,
    goal: Option<u64>,
    current: Option<NodeId>,
    /// Coverage hull built at the last map update; leaving it triggers the next.
    region: Option<ConvexPolyhedron>,
    /// Every per-pose coverage hull so far. Frontier is detected space outside
    /// these; merged node hulls are graph geometry only.
    covered: Vec<ConvexPolyhedron>,
    /// DERs reached without being consumed, with their member count then.
    /// They are not targeted again unless they grow substantially.
    visited: BTreeMap<u64, usize>,
    replan: bool,
    map_updates: usize,
    tick: u64,
    t: f64,
    ticks: Vec<TickRecord>,
    events: Vec<EventRecord>,
}

impl<'w> Sim<'w> {
    fn new(world: &'w GroundTruthWorld, cfg: &'w MissionConfig) -> Self {
        let lattice = *world.lattice();
        Self {
            world,
            cfg,
            scan_dirs: cfg.sensor.directions(),
            coverage_dirs: fibonacci_sphere(cfg.regions.coverage_dirs),
            grid: KnowledgeGrid::new(lattice, cfg.planner.robot_radius),
            mask: CoverageMask::new(lattice, lattice.resolution / 2.0),
            graph: TopoGraph::new(),
            ders: Vec::new(),
            next_der: 0,
            cache: ShortcutCache::default(),
            baseline: BaselinePlanner::default(),
            robot: RobotState { position: world.spawn(), psi: Vec3::ZERO, speed: cfg.max_speed },
            path: VecDeque::new(),
            mode: Mode::Idle,
            goal: None,
            current: None,
            region: None,
            covered: Vec::new(),
            visited: BTreeMap::new(),
            replan: true,
            map_updates: 0,
            tick: 0,
            t: 0.0,
            ticks: Vec::new(),
            events: Vec::new(),
        }
    }

    fn event(&mut self, kind: EventKind, detail: String) {
        self.events.push(EventRecord { tick: self.tick, t: self.t, kind, mode: self.mode, goal: self.goal, detail });
    }

    fn run(&mut self) -> Result<MissionStatus, MissionError> {
        let period = 1.0 / self.cfg.sensor.scan_rate;
        let mut next_scan = 0.0;
        let mut idle = 0usize;
        loop {
            self.t = self.tick as f64 * self.cfg.tick_dt;
            let mut fresh = 0;
            if self.t + 1e-9 >= next_scan {
                let scan =
                    simulate_scan_with(self.world, self.robot.position, self.cfg.sensor.zeta_detect, &self.scan_dirs)?;
                fresh = self.grid.integrate_scan(&scan);
                while next_scan <= self.t + 1e-9 {
                    next_scan += period;
                }
            }
            self.ticks.push(TickRecord {
                tick: self.tick,
                t: self.t,
                position: self.robot.position,
                detected_volume: self.grid.detected_volume(),
                mode: self.mode,
                goal: self.goal,
            });
            if self.t + 1e-9 >= self.cfg.time_budget {
                return Ok(MissionStatus::Budget);
            }
            let decision = match self.cfg.planner_kind {
                PlannerKind::Topo => self.topo_step(),
                PlannerKind::Baseline => self.baseline_step(),
            };
            if let Some(status) = decision {
                return Ok(status);
            }
            let moved = self.advance();
            if moved > 1e-9 || fresh > 0 {
                idle = 0;
            } else {
                idle += 1;
                if idle >= self.cfg.stuck_ticks {
                    return Ok(MissionStatus::Stuck);
                }
            }
            self.tick += 1;
        }
    }

    fn finish(mut self, status: MissionStatus) -> MissionOutcome {
        self.event(EventKind::End, status.to_string());
        let reach = self.world.reachable_free();
        let cells = self.grid.cells();
        let reachable_free = reach.iter().filter(|r| **r).count();
        let detected_reachable_free = reach.iter().zip(cells).filter(|(r, c)| **r && **c == Cell::Free).count();
        let stats = MapStats {
            coverage_nodes: self.graph.coverage_nodes().count(),
            frontier_nodes: self.graph.frontier_nodes().count(),
            edges: self.graph.edges().count(),
            active_ders: self.ders.iter().filter(|d| d.is_active()).count(),
            map_updates: self.map_updates,
        };
        let log = MissionLog {
            planner: self.cfg.planner_kind,
            seed: self.cfg.world.seed,
            ticks: self.ticks,
            events: self.events,
            status,
            reachable_free,
            detected_reachable_free,
            voxel_volume: self.grid.lattice().voxel_volume(),
            stats,
        };
        MissionOutcome { log, grid: self.grid, graph: self.graph, ders: self.ders }
    }

    /// Whether the remaining path crosses a voxel now believed occupied.
    fn path_blocked(&self) -> bool {
        let l = *self.grid.lattice();
        let mut from = self.robot.position;
        for &to in &self.path {
            let hit = l.traverse(from, to - from, 1.0, |v, _| {
                if self.grid.get(v) == Cell::Occupied {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            });
            if hit.is_some() {
                return true;
            }
            from = to;
        }
        false
    }

    fn topo_step(&mut self) -> Option<MissionStatus> {
        let pos = self.robot.position;
        let exited = self.region.as_ref().is_none_or(|h| !h.contains(pos, 1e-6));
        let reached = match self.goal {
            Some(g) => (self.path.is_empty() && !self.replan) || goal_reached_check(pos, g, &self.ders),
            None => true,
        };
        let blocked = !self.path.is_empty() && self.path_blocked();
        if reached && self.goal.is_some() {
            self.event(EventKind::GoalReached, String::new());
        }
        if blocked {
            self.event(EventKind::PathBlocked, String::new());
        }
        if !(self.replan || exited || reached || blocked) {
            return None;
        }
        let forced = self.replan;
        self.replan = false;
        self.update_map();
        // A region exit alone keeps a still-eligible goal and its path.
        if !(forced || reached || blocked) {
            if let Some(g) = self.goal {
                let keep = self.ders.iter().any(|d| d.id == g && self.eligible(d));
                if keep && !self.path.is_empty() && !self.path_blocked() {
                    return None;
                }
            }
        }
        if let (true, Some(g)) = (reached, self.goal) {
            if let Some(d) = self.ders.iter().find(|d| d.id == g && d.is_active()) {
                self.visited.insert(d.id, d.members.len());
            }
        }
        // Frontier fragments below the minimum cluster size never form a DER
        // and do not hold the mission open.
        if !self.ders.iter().any(|d| d.is_active()) {
            self.path.clear();
            self.goal = None;
            return Some(MissionStatus::Complete);
        }
        if !self.ders.iter().any(|d| self.eligible(d)) {
            self.path.clear();
            self.goal = None;
            return Some(MissionStatus::Exhausted);
        }
        if self.plan_topo() {
            None
        } else {
            Some(MissionStatus::Blocked)
        }
    }

    fn update_map(&mut self) {
        let pos = self.robot.position;
        let p = map_params(self.cfg, &self.coverage_dirs);
        let update = self.graph.add_coverage(&self.grid, pos, &p);
        let update = match update {
            Ok(u) => u,
            Err(e) => {
                self.event(EventKind::MapUpdate, format!("coverage failed: {e}"));
                return;
            }
        };
        self.map_updates += 1;
        self.current = Some(update.node);
        self.mask.add_hull(&update.region);
        self.covered.push(update.region.clone());
        self.region = Some(update.region.clone());
        for d in self.ders.iter_mut() {
            if update.deleted_ders.contains(&d.id) {
                d.state = crate::regions::DerState::Consumed;
            }
        }
        let frontier = extract_frontier_masked(&self.grid, &self.mask, &self.covered, self.cfg.regions.ds);
        let refs: Vec<&ConvexPolyhedron> = self.covered.iter().collect();
        self.ders = update_ders(
            &frontier,
            &self.ders,
            &self.grid,
            &refs,
            &self.cfg.regions.der_params(),
            self.t,
            &mut self.next_der,
        );
        // Consumed DERs are kept only until their frontier node is dropped.
        let changed = if update.merged { vec![update.node] } else { Vec::new() };
        let report = self.graph.sync_frontier(&self.grid, &self.ders, &changed, Some(update.node), &p);
        self.ders.retain(|d| d.is_active());
        let active = self.ders.len();
        self.event(
            EventKind::MapUpdate,
            format!(
                "node={} merged={} frontier_points={} ders={} unreachable={}",
                update.node,
                update.merged,
                frontier.len(),
                active,
                report.unreachable.len()
            ),
        );
    }

    fn eligible(&self, d: &DistinctiveRegion) -> bool {
        d.is_active()
            && self.visited.get(&d.id).is_none_or(|&m| d.members.len() > m + m / 2 + self.cfg.regions.min_cluster_size)
    }

    fn candidate_ok(&self, node: NodeId) -> bool {
        let Some(n) = self.graph.node(node) else { return false };
        self.ders.iter().find(|d| d.id == n.region_ref).is_some_and(|d| self.eligible(d))
    }

    fn astar_from_pose(&self, to: Vec3) -> Option<Vec<Vec3>> {
        let from = self.robot.position;
        let cyl = CylinderConstraint::between(from, to, &self.cfg.planner);
        cylinder_astar(&self.grid, from, to, Some(&cyl), &self.cfg.planner.astar_options()).ok().map(|r| r.waypoints)
    }

    /// Direct cylinder path to the frontier anchor, else via the current
    /// coverage node's anchor and the attached path, repaired if stale.
    fn local_path(&mut self, current: NodeId, frontier: NodeId) -> Option<Vec<Vec3>> {
        let target = self.graph.node(frontier)?.anchor;
        if let Some(p) = self.astar_from_pose(target) {
            return Some(p);
        }
        self.graph.revalidate_edge(&self.grid, current, frontier, &self.cfg.planner);
        let tail = self.graph.oriented_path(current, frontier)?;
        let mut p = self.astar_from_pose(self.graph.node(current)?.anchor)?;
        p.extend(tail);
        p.dedup();
        Some(p)
    }

    /// Global search through uncertainty to `goal`, re-run while any graph edge it relies on turns out
    /// blocked under the current belief.
    fn global_route(&mut self, current: NodeId, goal: NodeId) -> Option<GlobalPlan> {
        for _ in 0..REPAIR_ROUNDS {
            let plan = global_plan_through_uncertainty(
                &self.graph,
                &self.grid,
                current,
                goal,
                &self.cfg.planner,
                &mut self.cache,
            )
            .ok()?;
            let mut clean = true;
            for w in plan.nodes.windows(2) {
                if !plan.shortcuts.contains(&(w[0], w[1])) {
                    clean &= self.graph.revalidate_edge(&self.grid, w[0], w[1], &self.cfg.planner) == EdgeCheck::Clear;
                }
            }
            if clean {
                return Some(plan);
            }
            self.graph.node(goal)?;
        }
        None
    }

    /// Connects the robot to a global route. The robot already stands in the
    /// start node's region, so it heads for the second node's anchor when a
    /// cylinder path allows, instead of returning to the start anchor.
    fn join_route(&self, current: NodeId, plan: &GlobalPlan) -> Option<Vec<Vec3>> {
        if let Some(&k) = plan.node_at.get(1) {
            if let Some(mut p) = self.astar_from_pose(plan.waypoints[k]) {
                p.extend_from_slice(&plan.waypoints[k + 1..]);
                return Some(p);
            }
        }
        let mut p = self.astar_from_pose(self.graph.node(current)?.anchor)?;
        p.extend_from_slice(&plan.waypoints[1..]);
        Some(p)
    }

    fn set_plan(&mut self, mode: Mode, der: Option<u64>, waypoints: Vec<Vec3>, detail: String) {
        self.mode = mode;
        self.goal = der;
        self.path = waypoints.into_iter().collect();
        self.event(EventKind::Plan, detail);
    }

    fn plan_topo(&mut self) -> bool {
        let Some(current) = self.current else { return false };
        let pos = self.robot.position;
        let local: Vec<Candidate> = self
            .graph
            .neighbors(current)
            .filter(|&m| self.candidate_ok(m))
            .filter_map(|m| self.graph.node(m))
            .map(|n| Candidate { node: n.id, centroid: n.centroid, volume: n.volume })
            .collect();
        if let Ok(scored) = local_explore_score(&local, pos, self.robot.psi, self.cfg.planner.eps_d) {
            for sc in scored {
                if self.graph.node(sc.node).is_none() {
                    continue;
                }
                if let Some(path) = self.local_path(current, sc.node) {
                    let detail = format!("node={} score={:.4} candidates={}", sc.node, sc.score, local.len());
                    let der = self.graph.node(sc.node).map(|n| n.region_ref);
                    self.set_plan(Mode::Local, der, path, detail);
                    return true;
                }
            }
        }
        let mut ranked: Vec<(f64, NodeId)> = self
            .graph
            .frontier_nodes()
            .filter(|n| self.candidate_ok(n.id))
            .map(|n| (global_explore_score(n.volume, n.centroid.distance(pos)), n.id))
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        self.cache.clear();
        for &(score, node) in ranked.iter().take(GLOBAL_TRIES) {
            if self.graph.node(node).is_none() {
                continue;
            }
            let Some(plan) = self.global_route(current, node) else { continue };
            let Some(path) = self.join_route(current, &plan) else { continue };
            let detail = format!(
                "node={node} score={score:.4} hops={} shortcuts={}",
                plan.nodes.len() - 1,
                plan.shortcuts.len()
            );
            let der = self.graph.node(node).map(|n| n.region_ref);
            self.set_plan(Mode::Global, der, path, detail);
            return true;
        }
        // The graph offers no route: search the belief grid directly, which
        // also reaches DERs that never got a frontier node.
        let mut direct: Vec<(f64, u64, Vec3)> = self
            .ders
            .iter()
            .filter(|d| self.eligible(d))
            .map(|d| {
                (global_explore_score(d.hull.volume(), d.centroid().distance(pos)), d.id, der_anchor(&self.grid, d))
            })
            .collect();
        direct.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let opts = self.cfg.planner.astar_options();
        for (score, der, target) in direct.into_iter().take(GLOBAL_TRIES) {
            if let Ok(r) = cylinder_astar(&self.grid, pos, target, None, &opts) {
                let detail = format!("der={der} score={score:.4} direct");
                self.set_plan(Mode::Global, Some(der), r.waypoints, detail);
                return true;
            }
        }
        self.mode = Mode::Idle;
        self.goal = None;
        self.path.clear();
        false
    }

    fn baseline_step(&mut self) -> Option<MissionStatus> {
        let l = *self.grid.lattice();
        let frontier = raw_frontier_voxels(&self.grid);
        let target_live = self.goal.is_some_and(|g| frontier.binary_search(&(g as usize)).is_ok());
        if let (Some(g), true) = (self.goal, self.path.is_empty()) {
            if target_live {
                self.baseline.exclude(g as usize);
            }
        }
        let blocked = !self.path.is_empty() && self.path_blocked();
        if blocked {
            self.event(EventKind::PathBlocked, String::new());
        }
        if !(self.replan || blocked || !target_live || self.path.is_empty()) {
            return None;
        }
        self.replan = false;
        match self.baseline.plan(&self.grid, self.robot.position, &self.cfg.planner) {
            Ok((idx, path)) => {
                self.mode = Mode::Baseline;
                self.goal = Some(idx as u64);
                self.path = path.waypoints.into_iter().collect();
                let c = l.center_of_index(idx);
                self.event(EventKind::Plan, format!("target={},{},{}", c.x, c.y, c.z));
                None
            }
            Err(PlanError::NoFrontier) => {
                self.goal = None;
                Some(MissionStatus::Complete)
            }
            Err(_) => {
                self.goal = None;
                Some(MissionStatus::Blocked)
            }
        }
    }

    /// Follows the path for one tick; a ground-truth obstacle on the way is
    /// recorded and stops the robot short of it.
    fn advance(&mut self) -> f64 {
        let l = *self.grid.lattice();
        let mut budget = self.robot.speed * self.cfg.tick_dt;
        let mut moved = 0.0;
        while budget > 1e-12 {
            let Some(&next) = self.path.front() else { break };
            let pos = self.robot.position;
            let seg = next - pos;
            let len = seg.norm();
            if len < 1e-12 {
                self.path.pop_front();
                continue;
            }
            let step = len.min(budget);
            let target = if step >= len { next } else { pos + seg * (step / len) };
            let bump = l.traverse(pos, target - pos, 1.0, |v, _| {
                if self.world.is_occupied(v) {
                    ControlFlow::Break(v)
                } else {
                    ControlFlow::Continue(())
                }
            });
            if let Some(v) = bump {
                self.grid.set(v, Cell::Occupied);
                self.path.clear();
                self.replan = true;
                self.event(EventKind::Bump, format!("voxel={},{},{}", v[0], v[1], v[2]));
                break;
            }
            self.robot.position = target;
            self.robot.psi = seg / len;
            moved += step;
            budget -= step;
            if step >= len {
                self.path.pop_front();
            }
        }
        moved
    }
}

fn map_params<'a>(cfg: &'a MissionConfig, coverage_dirs: &'a [Vec3]) -> MapParams<'a> {
    MapParams {
        zeta_coverage: cfg.sensor.zeta_coverage,
        coverage_dirs,
        r_near: cfg.regions.r_near,
        planner: &cfg.planner,
    }
}

/// Global search re-runs per goal after repairing stale edges.
const REPAIR_ROUNDS: usize = 4;

/// Frontier nodes tried by the global planner per decision.
const GLOBAL_TRIES: usize = 8;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::WorldKind;

    fn small_box(budget: f64) -> MissionConfig {
        MissionConfig {
            world: WorldSpec { kind: WorldKind::EmptyBox, size: Vec3::new(8.0, 8.0, 4.0), ..WorldSpec::default() },
            time_budget: budget,
            ..MissionConfig::default()
        }
    }

    #[test]
    fn zero_budget_logs_initial_scan_only() {
        let log = run_mission(&small_box(0.0)).unwrap();
        assert_eq!(log.status, MissionStatus::Budget);
        assert_eq!(log.ticks.len(), 1);
        assert!(log.ticks[0].detected_volume > 0.0);
    }

    #[test]
    fn small_room_completes_quickly() {
        for kind in [PlannerKind::Topo, PlannerKind::Baseline] {
            let mut cfg = small_box(120.0);
            cfg.planner_kind = kind;
            let log = run_mission(&cfg).unwrap();
            let m = compute_metrics(&log, 1.0);
            assert_eq!(log.status, MissionStatus::Complete, "{kind}");
            assert!(m.completion_fraction > 0.95, "{kind}: {}", m.completion_fraction);
        }
    }

    #[test]
    fn goal_check() {
        let hull = crate::geometry::build_hull(&[
            Vec3::ZERO,
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ])
        .unwrap();
        let mut d = DistinctiveRegion {
            id: 3,
            hull,
            members: Vec::new(),
            member_cells: Vec::new(),
            created_at: 0.0,
            state: crate::regions::DerState::Active,
            version: 0,
        };
        let far = Vec3::new(5.0, 5.0, 5.0);
        assert!(!goal_reached_check(far, 3, std::slice::from_ref(&d)));
        assert!(goal_reached_check(Vec3::new(0.1, 0.1, 0.1), 3, std::slice::from_ref(&d)));
        assert!(goal_reached_check(far, 4, std::slice::from_ref(&d)));
        d.state = crate::regions::DerState::Consumed;
        assert!(goal_reached_check(far, 3, &[d]));
    }
}
