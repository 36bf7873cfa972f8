//! Discrete-time algorithms: simultaneous and alternating heavy ball, and
//! Adam with a possibly negative β₁.
//!
//! All runs start with zero velocity, i.e. the previous iterate equals the
//! initial one.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::continuous::IntegratorMeta;
use crate::error::{Error, Result};
use crate::game::{Game, GamePoint, Vector};
use crate::output::{fmt_f64, write_json, Table};

/// Runs stop once the max-norm of an iterate exceeds this.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "sim", alias = "simultaneous")]
    Simultaneous,
    #[serde(rename = "alt", alias = "alternating")]
    Alternating,
}

impl Scheme {
    pub const BOTH: [Scheme; 2] = [Scheme::Simultaneous, Scheme::Alternating];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Simultaneous => "sim",
            Scheme::Alternating => "alt",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HBParams {
    pub h: f64,
    pub beta: f64,
    pub scheme: Scheme,
}

impl HBParams {
    pub fn new(h: f64, beta: f64, scheme: Scheme) -> Result<Self> {
        let p = Self { h, beta, scheme };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "step size h must be > 0, got {}",
                self.h
            )));
        }
        if !(self.beta > -1.0 && self.beta < 1.0) {
            return Err(Error::InvalidParams(format!(
                "momentum beta must lie in (-1, 1), got {}",
                self.beta
            )));
        }
        Ok(())
    }

    pub fn with_scheme(self, scheme: Scheme) -> Self {
        Self { scheme, ..self }
    }
}

fn finite_or(p: GamePoint, step: usize) -> Result<GamePoint> {
    if p.is_finite() {
        Ok(p)
    } else {
        Err(Error::NonFiniteState { step })
    }
}

fn hb_x(game: &dyn Game, p: &HBParams, cur: &GamePoint, prev: &GamePoint) -> (Vector, Vector) {
    let (gx, gy) = game.grad(&cur.x, &cur.y);
    let x = &cur.x - gx * p.h + (&cur.x - &prev.x) * p.beta;
    (x, gy)
}

/// x' = x − h∇ₓf(x,y) + β(x − x₋), y' = y + h∇ᵧf(x,y) + β(y − y₋).
pub fn step_sim_hb(
    game: &dyn Game,
    params: &HBParams,
    current: &GamePoint,
    previous: &GamePoint,
) -> Result<GamePoint> {
    if params.scheme != Scheme::Simultaneous {
        return Err(Error::InvalidParams(
            "step_sim_hb needs the simultaneous scheme".into(),
        ));
    }
    let (x, gy) = hb_x(game, params, current, previous);
    let y = &current.y + gy * params.h + (&current.y - &previous.y) * params.beta;
    finite_or(GamePoint::new(x, y), 1)
}

/// As [`step_sim_hb`] but the y-gradient is taken at (x', y).
pub fn step_alt_hb(
    game: &dyn Game,
    params: &HBParams,
    current: &GamePoint,
    previous: &GamePoint,
) -> Result<GamePoint> {
    if params.scheme != Scheme::Alternating {
        return Err(Error::InvalidParams(
            "step_alt_hb needs the alternating scheme".into(),
        ));
    }
    let (x, _) = hb_x(game, params, current, previous);
    let (_, gy) = game.grad(&x, &current.y);
    let y = &current.y + gy * params.h + (&current.y - &previous.y) * params.beta;
    finite_or(GamePoint::new(x, y), 1)
}

/// Dispatches on `params.scheme`.
pub fn step(
    game: &dyn Game,
    params: &HBParams,
    current: &GamePoint,
    previous: &GamePoint,
) -> Result<GamePoint> {
    match params.scheme {
        Scheme::Simultaneous => step_sim_hb(game, params, current, previous),
        Scheme::Alternating => step_alt_hb(game, params, current, previous),
    }
}

/// Stateful heavy-ball iterator, for loops that do not need to keep the
/// whole trajectory.
pub struct HeavyBall<'a> {
    game: &'a dyn Game,
    params: HBParams,
    cur: GamePoint,
    prev: GamePoint,
    index: usize,
}

impl<'a> HeavyBall<'a> {
    pub fn new(game: &'a dyn Game, params: HBParams, start: GamePoint) -> Result<Self> {
        params.validate()?;
        crate::game::eval(game, &start)?;
        Ok(Self {
            game,
            params,
            prev: start.clone(),
            cur: start,
            index: 0,
        })
    }

    /// Resumes from an explicit (current, previous) pair.
    pub fn resume(
        game: &'a dyn Game,
        params: HBParams,
        current: GamePoint,
        previous: GamePoint,
        index: usize,
    ) -> Self {
        Self {
            game,
            params,
            cur: current,
            prev: previous,
            index,
        }
    }

    pub fn advance(&mut self) -> Result<&GamePoint> {
        let next = step(self.game, &self.params, &self.cur, &self.prev).map_err(|_| {
            Error::NonFiniteState {
                step: self.index + 1,
            }
        })?;
        self.prev = std::mem::replace(&mut self.cur, next);
        self.index += 1;
        Ok(&self.cur)
    }

    pub fn current(&self) -> &GamePoint {
        &self.cur
    }

    pub fn previous(&self) -> &GamePoint {
        &self.prev
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn params(&self) -> &HBParams {
        &self.params
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub index: usize,
    pub t: f64,
    pub point: GamePoint,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub game: String,
    /// "discrete", "adam" or "ode"
    pub kind: String,
    pub scheme: Option<Scheme>,
    pub h: Option<f64>,
    pub beta: Option<f64>,
    pub adam: Option<AdamParams>,
    pub integrator: Option<IntegratorMeta>,
    pub seed: Option<u64>,
    pub steps_requested: usize,
    pub record_stride: usize,
    pub diverged: bool,
    /// Set when an iterate leaves the game's domain (NegXY2: x < 0).
    pub left_domain: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn first(&self) -> &GamePoint {
        &self.states[0].point
    }

    pub fn last(&self) -> &GamePoint {
        &self.states[self.states.len() - 1].point
    }

    pub fn points(&self) -> impl Iterator<Item = &GamePoint> {
        self.states.iter().map(|s| &s.point)
    }

    pub fn diverged(&self) -> bool {
        self.meta.diverged
    }

    /// States from the given fraction of the run onwards (0.5 → last half).
    pub fn tail(&self, fraction: f64) -> Trajectory {
        let skip = ((1.0 - fraction.clamp(0.0, 1.0)) * (self.len() as f64 - 1.0)).floor() as usize;
        Trajectory {
            states: self.states[skip.min(self.len().saturating_sub(1))..].to_vec(),
            meta: self.meta.clone(),
        }
    }

    pub fn to_table(&self) -> Table {
        let (n, m) = self.states.first().map_or((0, 0), |s| s.point.dims());
        let header = ["index".to_string(), "t".to_string()]
            .into_iter()
            .chain((0..n).map(|i| format!("x_{i}")))
            .chain((0..m).map(|j| format!("y_{j}")));
        let mut t = Table::new(header);
        for s in &self.states {
            let mut row = vec![s.index.to_string(), fmt_f64(s.t)];
            row.extend(
                s.point
                    .x
                    .iter()
                    .chain(s.point.y.iter())
                    .map(|v| fmt_f64(*v)),
            );
            t.push(row);
        }
        t
    }

    /// Writes `path` (CSV) and the metadata next to it as `<stem>.meta.json`.
    pub fn write(&self, path: &Path) -> Result<()> {
        self.to_table().write(path)?;
        write_json(&meta_path(path), &self.meta)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let table = Table::read(path)?;
        let n = table.header.iter().filter(|h| h.starts_with("x_")).count();
        let m = table.header.iter().filter(|h| h.starts_with("y_")).count();
        if table.header.len() != 2 + n + m || table.header[0] != "index" || table.header[1] != "t" {
            return Err(Error::config(
                path.display().to_string(),
                "not a trajectory CSV",
            ));
        }
        let mut states = Vec::with_capacity(table.rows.len());
        for row in &table.rows {
            let bad = || Error::config(path.display().to_string(), "unparsable trajectory row");
            let vals: Vec<f64> = row[1..]
                .iter()
                .map(|c| c.parse().map_err(|_| bad()))
                .collect::<Result<_>>()?;
            states.push(State {
                index: row[0].parse().map_err(|_| bad())?,
                t: vals[0],
                point: GamePoint::from_slices(&vals[1..1 + n], &vals[1 + n..]),
            });
        }
        let meta_file = meta_path(path);
        let meta = if meta_file.exists() {
            serde_json::from_str(&std::fs::read_to_string(meta_file)?)?
        } else {
            TrajectoryMeta::default()
        };
        Ok(Self { states, meta })
    }
}

fn meta_path(path: &Path) -> std::path::PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.meta.json"))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    /// Keep every `record_stride`-th state (the first and last are always kept).
    pub record_stride: usize,
    pub divergence_threshold: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            record_stride: 1,
            divergence_threshold: DIVERGENCE_THRESHOLD,
        }
    }
}

/// Runs `steps` iterations of the scheme from (x0, y0), recording every state.
pub fn run(
    game: &dyn Game,
    params: &HBParams,
    x0: &Vector,
    y0: &Vector,
    steps: usize,
) -> Result<Trajectory> {
    run_with(game, params, x0, y0, steps, &RunOptions::default())
}

pub fn run_with(
    game: &dyn Game,
    params: &HBParams,
    x0: &Vector,
    y0: &Vector,
    steps: usize,
    opts: &RunOptions,
) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::InvalidParams("steps must be >= 1".into()));
    }
    let stride = opts.record_stride.max(1);
    let start = GamePoint::new(x0.clone(), y0.clone());
    let mut hb = HeavyBall::new(game, *params, start.clone())?;
    let mut meta = TrajectoryMeta {
        game: game.label(),
        kind: "discrete".into(),
        scheme: Some(params.scheme),
        h: Some(params.h),
        beta: Some(params.beta),
        steps_requested: steps,
        record_stride: stride,
        left_domain: !game.in_domain(x0, y0),
        ..Default::default()
    };
    let mut states = vec![State {
        index: 0,
        t: 0.0,
        point: start,
    }];
    for k in 1..=steps {
        let p = match hb.advance() {
            Ok(p) => p,
            Err(_) => {
                meta.diverged = true;
                break;
            }
        };
        if !game.in_domain(&p.x, &p.y) {
            meta.left_domain = true;
        }
        let blown = p.max_abs() > opts.divergence_threshold;
        if k % stride == 0 || k == steps || blown {
            states.push(State {
                index: k,
                t: k as f64 * params.h,
                point: p.clone(),
            });
        }
        if blown {
            meta.diverged = true;
            break;
        }
    }
    Ok(Trajectory { states, meta })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamParams {
    pub fn new(alpha: f64, beta1: f64, beta2: f64, epsilon: f64) -> Result<Self> {
        let p = Self {
            alpha,
            beta1,
            beta2,
            epsilon,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "alpha must be > 0, got {}",
                self.alpha
            )));
        }
        if !(self.beta1 > -1.0 && self.beta1 < 1.0) {
            return Err(Error::InvalidParams(format!(
                "beta1 must lie in (-1, 1), got {}",
                self.beta1
            )));
        }
        if !(self.beta2 >= 0.0 && self.beta2 < 1.0) {
            return Err(Error::InvalidParams(format!(
                "beta2 must lie in [0, 1), got {}",
                self.beta2
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParams(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// First/second moment accumulators of one player.
#[derive(Clone, Debug)]
struct Moments {
    m: Vector,
    v: Vector,
}

impl Moments {
    fn new(d: usize) -> Self {
        Self {
            m: Vector::zeros(d),
            v: Vector::zeros(d),
        }
    }

    /// Bias-corrected direction m̂ / (√v̂ + ε) after absorbing gradient `g` at step `t`.
    fn direction(&mut self, p: &AdamParams, g: &Vector, t: i32) -> Vector {
        self.m = &self.m * p.beta1 + g * (1.0 - p.beta1);
        self.v = &self.v * p.beta2 + g.component_mul(g) * (1.0 - p.beta2);
        let mhat = &self.m / (1.0 - p.beta1.powi(t));
        let vhat = &self.v / (1.0 - p.beta2.powi(t));
        mhat.zip_map(&vhat, |a, b| a / (b.sqrt() + p.epsilon))
    }
}

/// Adam for both players: x descends, y ascends. With the alternating scheme
/// the y-player's gradient is taken at the freshly updated x.
pub fn run_adam(
    game: &dyn Game,
    adam: &AdamParams,
    scheme: Scheme,
    x0: &Vector,
    y0: &Vector,
    steps: usize,
) -> Result<Trajectory> {
    adam.validate()?;
    if steps == 0 {
        return Err(Error::InvalidParams("steps must be >= 1".into()));
    }
    let start = GamePoint::new(x0.clone(), y0.clone());
    crate::game::eval(game, &start)?;
    let (n, m) = game.dims();
    let (mut mx, mut my) = (Moments::new(n), Moments::new(m));
    let mut meta = TrajectoryMeta {
        game: game.label(),
        kind: "adam".into(),
        scheme: Some(scheme),
        adam: Some(*adam),
        steps_requested: steps,
        record_stride: 1,
        ..Default::default()
    };
    let mut states = vec![State {
        index: 0,
        t: 0.0,
        point: start.clone(),
    }];
    let mut cur = start;
    for k in 1..=steps {
        let t = k.min(i32::MAX as usize) as i32;
        let (gx, gy_old) = game.grad(&cur.x, &cur.y);
        let x = &cur.x - mx.direction(adam, &gx, t) * adam.alpha;
        let gy = match scheme {
            Scheme::Simultaneous => gy_old,
            Scheme::Alternating => game.grad(&x, &cur.y).1,
        };
        let y = &cur.y + my.direction(adam, &gy, t) * adam.alpha;
        cur = GamePoint::new(x, y);
        if !cur.is_finite() {
            return Err(Error::NonFiniteState { step: k });
        }
        if !game.in_domain(&cur.x, &cur.y) {
            meta.left_domain = true;
        }
        states.push(State {
            index: k,
            t: k as f64 * adam.alpha,
            point: cur.clone(),
        });
        if cur.max_abs() > DIVERGENCE_THRESHOLD {
            meta.diverged = true;
            break;
        }
    }
    Ok(Trajectory { states, meta })
}
