use serde::Serialize;

use super::PlanError;
use crate::geometry::Vec3;

/// A frontier node offered to the local scorer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub node: u32,
    pub centroid: Vec3,
    pub volume: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoredCandidate {
    pub node: u32,
    pub volume_factor: f64,
    pub distance_factor: f64,
    pub direction_factor: f64,
    pub score: f64,
}

/// Floor applied before max-normalizing, so zero inputs still map into (0, 1].
const NORM_FLOOR: f64 = 1e-9;

/// Local exploration score: product of the max-normalized volume, the
/// max-normalized distance from the robot, and the heading agreement
/// `max(eps_d, (1 + ψ̂·ψ)/2)`. A zero `psi` scores every heading 1.
///
/// Sorted by descending score, ties by lower node id.
pub fn local_explore_score(
    candidates: &[Candidate],
    pose: Vec3,
    psi: Vec3,
    eps_d: f64,
) -> Result<Vec<ScoredCandidate>, PlanError> {
    if candidates.is_empty() {
        return Err(PlanError::EmptyCandidates);
    }
    let max_vol = candidates.iter().map(|c| c.volume.max(NORM_FLOOR)).fold(NORM_FLOOR, f64::max);
    let max_dist = candidates.iter().map(|c| c.centroid.distance(pose).max(NORM_FLOOR)).fold(NORM_FLOOR, f64::max);
    let psi = psi.normalized();
    let mut out: Vec<ScoredCandidate> = candidates
        .iter()
        .map(|c| {
            let volume_factor = c.volume.max(NORM_FLOOR) / max_vol;
            let distance_factor = c.centroid.distance(pose).max(NORM_FLOOR) / max_dist;
            let direction_factor = match (psi, (c.centroid - pose).normalized()) {
                (Some(psi), Some(dir)) => ((1.0 + dir.dot(psi)) / 2.0).clamp(eps_d, 1.0),
                _ => 1.0,
            };
            ScoredCandidate {
                node: c.node,
                volume_factor,
                distance_factor,
                direction_factor,
                score: volume_factor * distance_factor * direction_factor,
            }
        })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.node.cmp(&b.node)));
    Ok(out)
}

/// Global exploration score `volume / (distance + 1)`.
pub fn global_explore_score(volume: f64, distance: f64) -> f64 {
    volume / (distance + 1.0)
}
