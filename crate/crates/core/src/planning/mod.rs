//! Path search and exploration decision making.

mod astar;
mod baseline;
mod global;
mod score;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use astar::{
    cylinder_astar, goal_radius, move_clear, polyline_clear, polyline_length, AstarOptions, CylinderConstraint,
    PathResult,
};
pub use baseline::{baseline_nearest_frontier, raw_frontier_voxels, BaselinePlanner};
pub use global::{global_plan_through_uncertainty, GlobalPlan, ShortcutCache};
pub use score::{global_explore_score, local_explore_score, Candidate, ScoredCandidate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("no path to the goal")]
    NoPath,
    #[error("start lies in an obstacle or outside the world")]
    StartBlocked,
    #[error("no candidates to score")]
    EmptyCandidates,
    #[error("no frontier left")]
    NoFrontier,
}

/// Fully resolved planner parameters, in meters unless noted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerParams {
    /// Adjacency radius for hypothesized edges in global planning.
    pub sigma: f64,
    /// Penalty factor on hypothesized edges, at least 1.
    pub gamma: f64,
    pub ratio_r: f64,
    pub r_min: f64,
    pub r_max: f64,
    /// Floor of the heading factor in the local score.
    pub eps_d: f64,
    pub goal_tol: f64,
    pub robot_radius: f64,
    /// Coverage nodes tried, nearest first, when attaching a frontier node.
    pub attach_candidates: usize,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            sigma: 30.0,
            gamma: 1.5,
            ratio_r: 0.25,
            r_min: 1.0,
            r_max: 5.0,
            eps_d: 0.05,
            goal_tol: 0.25,
            robot_radius: 0.4,
            attach_candidates: 6,
        }
    }
}

impl PlannerParams {
    pub fn astar_options(&self) -> AstarOptions {
        AstarOptions::new(self.goal_tol)
    }
}
