use serde::Serialize;

use super::MissionLog;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSummary {
    /// (t, detected volume m³) per tick.
    pub explored_volume_curve: Vec<(f64, f64)>,
    /// Median of per-window exploration rates, m³/s.
    pub median_rate: f64,
    pub trajectory_length: f64,
    /// Detected free voxels over free voxels reachable from spawn.
    pub completion_fraction: f64,
    pub final_volume: f64,
    pub sim_time: f64,
}

/// Median; mean of the middle pair for even counts, 0 for no samples.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Piecewise-linear value of a sampled curve at `t`, clamped at the ends.
fn sample(curve: &[(f64, f64)], t: f64) -> f64 {
    let k = curve.partition_point(|(ti, _)| *ti <= t);
    if k == 0 {
        return curve[0].1;
    }
    if k == curve.len() {
        return curve[k - 1].1;
    }
    let (t0, v0) = curve[k - 1];
    let (t1, v1) = curve[k];
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

/// Rates `ΔV/Δt` over consecutive fixed windows that fit entirely in the curve.
pub fn window_rates(curve: &[(f64, f64)], window_s: f64) -> Vec<f64> {
    assert!(window_s > 0.0, "window must be positive");
    if curve.len() < 2 {
        return Vec::new();
    }
    let t0 = curve[0].0;
    let t_end = curve[curve.len() - 1].0;
    let n = ((t_end - t0) / window_s + 1e-9).floor() as usize;
    (0..n)
        .map(|k| {
            let a = t0 + k as f64 * window_s;
            (sample(curve, a + window_s) - sample(curve, a)) / window_s
        })
        .collect()
}

pub fn compute_metrics(log: &MissionLog, window_s: f64) -> MetricsSummary {
    let curve: Vec<(f64, f64)> = log.ticks.iter().map(|r| (r.t, r.detected_volume)).collect();
    let trajectory_length = log.ticks.windows(2).map(|w| w[0].position.distance(w[1].position)).sum();
    let completion_fraction =
        if log.reachable_free == 0 { 1.0 } else { log.detected_reachable_free as f64 / log.reachable_free as f64 };
    MetricsSummary {
        median_rate: median(&window_rates(&curve, window_s)),
        final_volume: curve.last().map_or(0.0, |c| c.1),
        sim_time: curve.last().map_or(0.0, |c| c.0),
        explored_volume_curve: curve,
        trajectory_length,
        completion_fraction,
    }
}
