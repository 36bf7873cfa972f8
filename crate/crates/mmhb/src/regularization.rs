//! Slope metrics along trajectories: the path-averaged slope
//! AvgSlope = (1/|S|)∫_S (‖∇ₓf‖² + ‖∇ᵧf‖²) ds and the running mean AvgS(t).

use serde::{Deserialize, Serialize};

use crate::discrete::Trajectory;
use crate::error::{Error, Result};
use crate::game::{Game, GamePoint};
use crate::output::{fmt_f64, Table};

/// Paths shorter than this fall back to the slope at the final state.
pub const MIN_LENGTH: f64 = 1e-12;

/// ‖∇ₓf‖² + ‖∇ᵧf‖².
pub fn slope_at(game: &dyn Game, p: &GamePoint) -> f64 {
    let (gx, gy) = game.grad(&p.x, &p.y);
    gx.norm_squared() + gy.norm_squared()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub avg_slope: f64,
    /// (step, AvgS) pairs.
    pub cumulative: Vec<(usize, f64)>,
    pub total_length: f64,
    /// (segment index, trapezoid slope, ds) when requested.
    pub per_segment: Option<Vec<(usize, f64, f64)>>,
}

impl SlopeReport {
    pub fn cumulative_table(&self) -> Table {
        let mut t = Table::new(["step", "avg_slope"]);
        for &(s, v) in &self.cumulative {
            t.push(vec![s.to_string(), fmt_f64(v)]);
        }
        t
    }
}

/// Trapezoid-weighted line integral of the slope over Euclidean arc length.
pub fn avg_slope(game: &dyn Game, traj: &Trajectory) -> Result<SlopeReport> {
    avg_slope_with(game, traj, false)
}

pub fn avg_slope_with(
    game: &dyn Game,
    traj: &Trajectory,
    keep_segments: bool,
) -> Result<SlopeReport> {
    if traj.len() < 2 {
        return Err(Error::EmptyTrajectory);
    }
    let slopes: Vec<f64> = traj.points().map(|p| slope_at(game, p)).collect();
    let mut num = 0.0;
    let mut total = 0.0;
    let mut segs = keep_segments.then(Vec::new);
    for (k, w) in traj.states.windows(2).enumerate() {
        let ds = w[0].point.dist(&w[1].point);
        let s = 0.5 * (slopes[k] + slopes[k + 1]);
        num += s * ds;
        total += ds;
        if let Some(v) = segs.as_mut() {
            v.push((k, s, ds));
        }
    }
    let avg = if total < MIN_LENGTH {
        slopes[slopes.len() - 1]
    } else {
        num / total
    };
    Ok(SlopeReport {
        avg_slope: avg,
        cumulative: running_mean(traj, &slopes),
        total_length: total,
        per_segment: segs,
    })
}

/// [`avg_slope`] over the last `fraction` of the states; used for runs that
/// settle onto a limit cycle, so the approach transient is discounted.
pub fn avg_slope_tail(game: &dyn Game, traj: &Trajectory, fraction: f64) -> Result<SlopeReport> {
    let full = avg_slope(game, traj)?;
    let tail = traj.tail(fraction);
    let mut r = if tail.len() < 2 {
        SlopeReport {
            avg_slope: slope_at(game, traj.last()),
            cumulative: Vec::new(),
            total_length: 0.0,
            per_segment: None,
        }
    } else {
        avg_slope(game, &tail)?
    };
    r.cumulative = full.cumulative;
    Ok(r)
}

/// AvgS(t) = (1/t)·Σ_{s=1}^{t} slope(z_s), emitted at every recorded state
/// after the initial one.
pub fn cumulative_avg_slope(game: &dyn Game, traj: &Trajectory) -> Vec<(usize, f64)> {
    let slopes: Vec<f64> = traj.points().map(|p| slope_at(game, p)).collect();
    running_mean(traj, &slopes)
}

fn running_mean(traj: &Trajectory, slopes: &[f64]) -> Vec<(usize, f64)> {
    let skip = usize::from(traj.len() > 1);
    let mut sum = 0.0;
    traj.states
        .iter()
        .zip(slopes)
        .skip(skip)
        .enumerate()
        .map(|(k, (s, &v))| {
            sum += v;
            (s.index, sum / (k + 1) as f64)
        })
        .collect()
}
