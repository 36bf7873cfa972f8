//! Config-driven experiment runners. Each `cmd_*` takes a parsed config and
//! an output directory, writes its CSV/JSON artifacts there and returns a
//! serialisable summary. [`repro`] bundles the pinned configurations.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::continuous::{integrate, warmup_steps, FieldKind, FieldSpec, IntegratorConfig, Method};
use crate::discrete::{run_adam, run_with, AdamParams, HBParams, RunOptions, Scheme, Trajectory};
use crate::error::{Error, Result};
use crate::game::{
    random_quadratic, BuiltinGame, Game, GamePoint, HessProducts, Hessians, QuadraticGame, Vector,
};
use crate::output::{fmt_f64, write_json, Table};
use crate::regularization::{avg_slope, avg_slope_tail, SlopeReport};
use crate::spectral::{
    alt_rate_prediction, check_assumptions, eigenvalues, hmax_from_eigs, optimal_beta,
    spectral_abscissa, spectral_report, stability_heatmap, LocalModel,
};

// ---------------------------------------------------------------- configs

/// A real grid: a scalar, an explicit list, or {"start","stop","count"}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Scalar(f64),
    List(Vec<f64>),
    Linspace { start: f64, stop: f64, count: usize },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::Scalar(v) => vec![*v],
            Grid::List(v) => v.clone(),
            Grid::Linspace { start, stop, count } => match count {
                0 => Vec::new(),
                1 => vec![*start],
                c => (0..*c)
                    .map(|i| start + (stop - start) * i as f64 / (*c - 1) as f64)
                    .collect(),
            },
        }
    }
}

impl From<f64> for Grid {
    fn from(v: f64) -> Self {
        Grid::Scalar(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GameSpec {
    Builtin(BuiltinGame),
    /// Path to a quadratic-game JSON document (relative to the config file).
    Quadratic(PathBuf),
    QuadraticInline(QuadraticGame),
    Random(RandomGameSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomGameSpec {
    pub n: usize,
    pub m: usize,
    pub rank_x: usize,
    pub rank_y: usize,
    pub alpha: f64,
    pub seed: Option<u64>,
}

/// A built game.
#[derive(Clone, Debug, PartialEq)]
pub enum GameInstance {
    Builtin(BuiltinGame),
    Quadratic(QuadraticGame),
}

impl GameInstance {
    pub fn as_quadratic(&self) -> Option<&QuadraticGame> {
        match self {
            GameInstance::Quadratic(q) => Some(q),
            GameInstance::Builtin(_) => None,
        }
    }

    fn inner(&self) -> &dyn Game {
        match self {
            GameInstance::Builtin(g) => g,
            GameInstance::Quadratic(g) => g,
        }
    }
}

impl Game for GameInstance {
    fn dims(&self) -> (usize, usize) {
        self.inner().dims()
    }
    fn value(&self, x: &Vector, y: &Vector) -> f64 {
        self.inner().value(x, y)
    }
    fn grad(&self, x: &Vector, y: &Vector) -> (Vector, Vector) {
        self.inner().grad(x, y)
    }
    fn second_derivs(&self, x: &Vector, y: &Vector) -> Hessians {
        self.inner().second_derivs(x, y)
    }
    fn hess_products(&self, x: &Vector, y: &Vector, u: &Vector, v: &Vector) -> HessProducts {
        self.inner().hess_products(x, y, u, v)
    }
    fn label(&self) -> String {
        self.inner().label()
    }
    fn in_domain(&self, x: &Vector, y: &Vector) -> bool {
        self.inner().in_domain(x, y)
    }
}

impl GameSpec {
    pub fn build(&self, ctx: &Context) -> Result<GameInstance> {
        Ok(match self {
            GameSpec::Builtin(g) => GameInstance::Builtin(g.clone()),
            GameSpec::QuadraticInline(q) => GameInstance::Quadratic(q.clone()),
            GameSpec::Quadratic(p) => {
                let path = ctx.resolve(p);
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    Error::config("game.quadratic", format!("{}: {e}", path.display()))
                })?;
                GameInstance::Quadratic(parse_json(&text, "game.quadratic")?)
            }
            GameSpec::Random(r) => {
                let seed = ctx.seed.or(r.seed).unwrap_or(0);
                GameInstance::Quadratic(random_quadratic(
                    r.n, r.m, r.rank_x, r.rank_y, r.alpha, seed,
                )?)
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitSpec {
    Point {
        x: Vec<f64>,
        y: Vec<f64>,
    },
    /// Standard-normal entries scaled by `scale`.
    Random {
        seed: Option<u64>,
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl InitSpec {
    pub fn point(x: f64, y: f64) -> Self {
        InitSpec::Point {
            x: vec![x],
            y: vec![y],
        }
    }

    pub fn build(&self, game: &dyn Game, ctx: &Context) -> Result<GamePoint> {
        let (n, m) = game.dims();
        let p = match self {
            InitSpec::Point { x, y } => GamePoint::from_slices(x, y),
            InitSpec::Random { seed, scale } => {
                // offset keeps the init stream distinct from a game built with the same seed
                let mut rng = ChaCha8Rng::seed_from_u64(
                    ctx.seed.or(*seed).unwrap_or(0).wrapping_add(0x9e37_79b9),
                );
                let mut draw = |d: usize| {
                    DVector::from_fn(d, |_, _| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        scale * z
                    })
                };
                let x = draw(n);
                let y = draw(m);
                GamePoint::new(x, y)
            }
        };
        if p.dims() != (n, m) {
            return Err(Error::config(
                "init",
                format!("expected dims ({n}, {m}), got {:?}", p.dims()),
            ));
        }
        if !p.is_finite() {
            return Err(Error::config("init", "initial point must be finite"));
        }
        Ok(p)
    }
}

fn default_schemes() -> Vec<Scheme> {
    Scheme::BOTH.to_vec()
}

fn default_stride() -> usize {
    1
}

fn default_substeps() -> usize {
    10
}

/// Which optimiser `simulate` runs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    #[default]
    HeavyBall,
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub game: GameSpec,
    /// Step size h (the learning rate α for Adam).
    pub h: Grid,
    pub beta: Grid,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    pub init: InitSpec,
    pub steps: usize,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    #[serde(default)]
    pub optimizer: Optimizer,
    /// Also integrate the O(h³) limit model from the same start.
    #[serde(default)]
    pub ode: bool,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    /// Fail with exit code 4 if every run diverges.
    #[serde(default)]
    pub expect_convergence: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareModelsConfig {
    pub game: GameSpec,
    pub h: f64,
    pub beta: f64,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    pub init: InitSpec,
    pub steps: usize,
    /// Also run the n-indexed transient model from step 0.
    #[serde(default = "yes")]
    pub transient: bool,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatmapConfig {
    pub game: GameSpec,
    /// Evaluation point of the Jacobian (default: origin).
    pub point: Option<InitSpec>,
    pub h: Grid,
    pub beta: Grid,
    #[serde(default = "sim_scheme")]
    pub scheme: Scheme,
}

fn sim_scheme() -> Scheme {
    Scheme::Simultaneous
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateMode {
    Discrete,
    Ode,
}

fn discrete_mode() -> RateMode {
    RateMode::Discrete
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    pub game: GameSpec,
    pub h: f64,
    pub beta: f64,
    pub init: InitSpec,
    pub steps: usize,
    #[serde(default = "discrete_mode")]
    pub mode: RateMode,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    #[serde(default)]
    pub expect_convergence: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlopeWindow {
    #[default]
    Full,
    /// Integrate only over the last fraction of the trajectory.
    Tail(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopesConfig {
    pub game: GameSpec,
    pub h: f64,
    pub beta: Grid,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    pub init: InitSpec,
    pub steps: usize,
    #[serde(default)]
    pub window: SlopeWindow,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    #[serde(default)]
    pub write_trajectories: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimalBetaConfig {
    pub game: GameSpec,
    pub point: Option<InitSpec>,
    pub h: Grid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    Simulate(SimulateConfig),
    CompareModels(CompareModelsConfig),
    Heatmap(HeatmapConfig),
    Rates(RatesConfig),
    Slopes(SlopesConfig),
    OptimalBeta(OptimalBetaConfig),
    Repro { name: String },
}

impl ExperimentConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentConfig::Simulate(_) => "simulate",
            ExperimentConfig::CompareModels(_) => "compare-models",
            ExperimentConfig::Heatmap(_) => "heatmap",
            ExperimentConfig::Rates(_) => "rates",
            ExperimentConfig::Slopes(_) => "slopes",
            ExperimentConfig::OptimalBeta(_) => "optimal-beta",
            ExperimentConfig::Repro { .. } => "repro",
        }
    }
}

/// Settings shared by all runners.
#[derive(Clone, Debug, Default)]
pub struct Context {
    /// Directory relative paths in the config resolve against.
    pub base_dir: PathBuf,
    /// Overrides every seed in the config.
    pub seed: Option<u64>,
}

impl Context {
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

fn parse_json<T: DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let field = if path == "." {
            what.to_string()
        } else {
            format!("{what}.{path}")
        };
        Error::config(
            field,
            format!("{inner} (line {}, column {})", inner.line(), inner.column()),
        )
    })
}

/// Parses a config document. `experiment` selects the variant when the
/// document does not carry an `"experiment"` key itself.
pub fn parse_config(text: &str, experiment: Option<&str>) -> Result<ExperimentConfig> {
    let mut v: serde_json::Value = parse_json(text, "config")?;
    let obj = v
        .as_object_mut()
        .ok_or_else(|| Error::config("config", "expected a JSON object"))?;
    let given = match obj.remove("experiment") {
        Some(serde_json::Value::String(s)) => Some(s),
        Some(_) => return Err(Error::config("experiment", "expected a string")),
        None => None,
    };
    let name = match (given, experiment) {
        (Some(g), Some(e)) if g != e => {
            return Err(Error::config(
                "experiment",
                format!("config is for `{g}`, command is `{e}`"),
            ))
        }
        (Some(g), _) => g,
        (None, Some(e)) => e.to_string(),
        (None, None) => return Err(Error::config("experiment", "missing experiment name")),
    };
    // the tag is dispatched by hand so that field paths survive into errors
    use ExperimentConfig as E;
    Ok(match name.as_str() {
        "simulate" => E::Simulate(from_value(v)?),
        "compare-models" => E::CompareModels(from_value(v)?),
        "heatmap" => E::Heatmap(from_value(v)?),
        "rates" => E::Rates(from_value(v)?),
        "slopes" => E::Slopes(from_value(v)?),
        "optimal-beta" => E::OptimalBeta(from_value(v)?),
        "repro" => {
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct R {
                name: String,
            }
            E::Repro {
                name: from_value::<R>(v)?.name,
            }
        }
        other => return Err(Error::UnknownExperiment(other.to_string())),
    })
}

fn from_value<T: DeserializeOwned>(v: serde_json::Value) -> Result<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        Error::config(path, e.into_inner().to_string())
    })
}

pub fn load_config(path: &Path, experiment: Option<&str>) -> Result<(ExperimentConfig, Context)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
    let cfg = parse_config(&text, experiment)?;
    let ctx = Context {
        base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        seed: None,
    };
    Ok((cfg, ctx))
}

/// Runs any experiment, writing into `out`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    ctx: &Context,
    out: &Path,
) -> Result<serde_json::Value> {
    let v = match cfg {
        ExperimentConfig::Simulate(c) => serde_json::to_value(cmd_simulate(c, ctx, out)?)?,
        ExperimentConfig::CompareModels(c) => {
            serde_json::to_value(cmd_compare_models(c, ctx, out)?)?
        }
        ExperimentConfig::Heatmap(c) => serde_json::to_value(cmd_heatmap(c, ctx, out)?)?,
        ExperimentConfig::Rates(c) => serde_json::to_value(cmd_rates(c, ctx, out)?)?,
        ExperimentConfig::Slopes(c) => serde_json::to_value(cmd_slopes(c, ctx, out)?)?,
        ExperimentConfig::OptimalBeta(c) => serde_json::to_value(cmd_optimal_beta(c, ctx, out)?)?,
        ExperimentConfig::Repro { name } => serde_json::to_value(repro(name, ctx, out)?)?,
    };
    Ok(v)
}

fn check_steps(steps: usize) -> Result<()> {
    if steps == 0 {
        return Err(Error::config("steps", "must be >= 1"));
    }
    Ok(())
}

fn hb(h: f64, beta: f64, scheme: Scheme) -> Result<HBParams> {
    HBParams::new(h, beta, scheme).map_err(|e| Error::config("h/beta", e.to_string()))
}

fn tag(v: f64) -> String {
    format!("{v}").replace('-', "m")
}

// ---------------------------------------------------------------- simulate

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub file: String,
    pub scheme: Scheme,
    pub h: f64,
    pub beta: f64,
    pub kind: String,
    pub states: usize,
    pub diverged: bool,
    pub left_domain: bool,
    pub final_norm: f64,
}

fn summarize(file: &str, t: &Trajectory, scheme: Scheme, h: f64, beta: f64) -> RunSummary {
    RunSummary {
        file: file.to_string(),
        scheme,
        h,
        beta,
        kind: t.meta.kind.clone(),
        states: t.len(),
        diverged: t.meta.diverged,
        left_domain: t.meta.left_domain,
        final_norm: t.last().norm(),
    }
}

pub fn cmd_simulate(cfg: &SimulateConfig, ctx: &Context, out: &Path) -> Result<Vec<RunSummary>> {
    check_steps(cfg.steps)?;
    if cfg.schemes.is_empty() {
        return Err(Error::config("schemes", "must not be empty"));
    }
    let game = cfg.game.build(ctx)?;
    let start = cfg.init.build(&game, ctx)?;
    let mut jobs = Vec::new();
    for &h in &cfg.h.values() {
        for &beta in &cfg.beta.values() {
            for &s in &cfg.schemes {
                jobs.push((h, beta, s));
            }
        }
    }
    let results: Vec<Vec<(String, Trajectory, Scheme, f64, f64)>> = jobs
        .par_iter()
        .map(|&(h, beta, s)| {
            let mut v = Vec::new();
            let stem = format!("{s}_h{}_beta{}", tag(h), tag(beta));
            let t = match &cfg.optimizer {
                Optimizer::HeavyBall => {
                    let p = hb(h, beta, s)?;
                    let opts = RunOptions {
                        record_stride: cfg.record_stride,
                        ..Default::default()
                    };
                    run_with(&game, &p, &start.x, &start.y, cfg.steps, &opts)?
                }
                Optimizer::Adam {
                    beta1,
                    beta2,
                    epsilon,
                } => {
                    let a = AdamParams::new(h, *beta1, *beta2, *epsilon)
                        .map_err(|e| Error::config("optimizer.adam", e.to_string()))?;
                    run_adam(&game, &a, s, &start.x, &start.y, cfg.steps)?
                }
            };
            v.push((format!("traj_{stem}.csv"), t, s, h, beta));
            if cfg.ode {
                let p = hb(h, beta, s)?;
                let ic = IntegratorConfig {
                    dt: h / cfg.substeps.max(1) as f64,
                    method: Method::Rk4,
                    steps: cfg.steps,
                    record_stride: cfg.record_stride,
                };
                let o = integrate(&game, &FieldSpec::limit(p), &ic, &start)?;
                v.push((format!("ode_{stem}.csv"), o, s, h, beta));
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    let mut summary = Vec::new();
    for (file, t, s, h, beta) in results.into_iter().flatten() {
        t.write(&out.join(&file))?;
        summary.push(summarize(&file, &t, s, h, beta));
    }
    write_json(&out.join("summary.json"), &summary)?;
    if cfg.expect_convergence && summary.iter().all(|r| r.diverged) {
        return Err(Error::DivergenceOnly("every simulated run diverged".into()));
    }
    Ok(summary)
}

// ---------------------------------------------------------------- compare-models

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDistances {
    pub scheme: Scheme,
    pub warmup: usize,
    pub steps: Vec<usize>,
    pub dist_o3: Vec<f64>,
    pub dist_o2: Vec<f64>,
    pub dist_transient: Option<Vec<f64>>,
    pub discrete_diverged: bool,
}

impl ModelDistances {
    fn terminal(v: &[f64]) -> f64 {
        v.last().copied().unwrap_or(f64::NAN)
    }

    pub fn terminal_o3(&self) -> f64 {
        Self::terminal(&self.dist_o3)
    }

    pub fn terminal_o2(&self) -> f64 {
        Self::terminal(&self.dist_o2)
    }

    pub fn to_table(&self) -> Table {
        let mut header = vec!["step", "dist_o3", "dist_o2"];
        if self.dist_transient.is_some() {
            header.push("dist_transient");
        }
        let mut t = Table::new(header);
        for (i, &s) in self.steps.iter().enumerate() {
            let mut row = vec![
                s.to_string(),
                fmt_f64(self.dist_o3[i]),
                fmt_f64(self.dist_o2[i]),
            ];
            if let Some(tr) = &self.dist_transient {
                row.push(fmt_f64(tr[i]));
            }
            t.push(row);
        }
        t
    }
}

/// Distances between the algorithm and its continuous models on the grid
/// tₙ = nh. The O(h³) and O(h²) models start from the iterate reached after
/// the warm-up window; the transient model starts at step 0.
pub fn compare_models(
    game: &dyn Game,
    params: &HBParams,
    start: &GamePoint,
    steps: usize,
    transient: bool,
    substeps: usize,
) -> Result<ModelDistances> {
    let disc = run_with(
        game,
        params,
        &start.x,
        &start.y,
        steps,
        &RunOptions::default(),
    )?;
    let w = warmup_steps(params.h, params.beta).min(steps);
    let from = disc
        .states
        .get(w)
        .map(|s| s.point.clone())
        .unwrap_or_else(|| disc.last().clone());
    let ic = |n: usize| IntegratorConfig {
        dt: params.h / substeps.max(1) as f64,
        method: Method::Rk4,
        steps: n,
        record_stride: 1,
    };
    let o3 = integrate(game, &FieldSpec::limit(*params), &ic(steps - w), &from)?;
    let o2 = integrate(
        game,
        &FieldSpec::new(FieldKind::BaselineO2, *params),
        &ic(steps - w),
        &from,
    )?;
    let tr = if transient {
        Some(integrate(
            game,
            &FieldSpec::transient(*params, 0),
            &ic(steps),
            start,
        )?)
    } else {
        None
    };
    let at = |t: &Trajectory, k: usize| t.states.get(k).map(|s| s.point.clone());
    let dist = |a: Option<GamePoint>, b: Option<GamePoint>| match (a, b) {
        (Some(a), Some(b)) => a.dist(&b),
        _ => f64::NAN,
    };
    let mut out = ModelDistances {
        scheme: params.scheme,
        warmup: w,
        steps: Vec::with_capacity(steps + 1),
        dist_o3: Vec::with_capacity(steps + 1),
        dist_o2: Vec::with_capacity(steps + 1),
        dist_transient: tr.as_ref().map(|_| Vec::with_capacity(steps + 1)),
        discrete_diverged: disc.meta.diverged,
    };
    for k in 0..=steps {
        let d = at(&disc, k);
        let (a, b) = if k >= w {
            (
                dist(d.clone(), at(&o3, k - w)),
                dist(d.clone(), at(&o2, k - w)),
            )
        } else {
            (f64::NAN, f64::NAN)
        };
        out.steps.push(k);
        out.dist_o3.push(a);
        out.dist_o2.push(b);
        if let (Some(v), Some(t)) = (out.dist_transient.as_mut(), tr.as_ref()) {
            v.push(dist(d, at(t, k)));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub scheme: Scheme,
    pub file: String,
    pub warmup: usize,
    pub terminal_o3: f64,
    pub terminal_o2: f64,
    pub terminal_transient: Option<f64>,
    pub discrete_diverged: bool,
}

pub fn cmd_compare_models(
    cfg: &CompareModelsConfig,
    ctx: &Context,
    out: &Path,
) -> Result<Vec<CompareSummary>> {
    check_steps(cfg.steps)?;
    let game = cfg.game.build(ctx)?;
    let start = cfg.init.build(&game, ctx)?;
    let res: Vec<ModelDistances> = cfg
        .schemes
        .par_iter()
        .map(|&s| {
            compare_models(
                &game,
                &hb(cfg.h, cfg.beta, s)?,
                &start,
                cfg.steps,
                cfg.transient,
                cfg.substeps,
            )
        })
        .collect::<Result<_>>()?;
    let mut summary = Vec::new();
    for d in &res {
        let file = format!("distances_{}.csv", d.scheme);
        d.to_table().write(&out.join(&file))?;
        summary.push(CompareSummary {
            scheme: d.scheme,
            file,
            warmup: d.warmup,
            terminal_o3: d.terminal_o3(),
            terminal_o2: d.terminal_o2(),
            terminal_transient: d.dist_transient.as_deref().map(ModelDistances::terminal),
            discrete_diverged: d.discrete_diverged,
        });
    }
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------- heatmap

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapSummary {
    pub scheme: Scheme,
    pub cells: usize,
    pub divergent_cells: usize,
    pub assumption_interaction: bool,
    pub assumption_generic: bool,
    /// Per β: (β, Theorem 4.1 bound, smallest grid h with abscissa ≥ 0).
    pub boundary: Vec<(f64, Option<f64>, Option<f64>)>,
}

fn local_model(game: &GameInstance, point: &Option<InitSpec>, ctx: &Context) -> Result<LocalModel> {
    let (n, m) = game.dims();
    let p = match point {
        Some(s) => s.build(game, ctx)?,
        None => GamePoint::zeros(n, m),
    };
    LocalModel::at(game, &p)
}

pub fn cmd_heatmap(cfg: &HeatmapConfig, ctx: &Context, out: &Path) -> Result<HeatmapSummary> {
    let game = cfg.game.build(ctx)?;
    let lm = local_model(&game, &cfg.point, ctx)?;
    let (hs, bs) = (cfg.h.values(), cfg.beta.values());
    let cells = stability_heatmap(&lm, &hs, &bs, cfg.scheme)
        .map_err(|e| Error::config("h/beta", e.to_string()))?;
    let mut t = Table::new(["beta", "h", "abscissa"]);
    for c in &cells {
        t.push(vec![fmt_f64(c.beta), fmt_f64(c.h), fmt_f64(c.abscissa)]);
    }
    t.write(&out.join("heatmap.csv"))?;

    let j = lm.j();
    let asm = check_assumptions(&j, &lm.decomposition())?;
    let eigs = eigenvalues(&j)?;
    let mut sorted_h = hs.clone();
    sorted_h.sort_by(f64::total_cmp);
    let mut boundary = Vec::new();
    let mut bt = Table::new(["beta", "hmax", "h_empirical"]);
    for &b in &bs {
        // without interaction dominance the formula is only taken over the
        // eigenvalues it constrains; the summary carries the assumption flags
        let hmax = asm.generic.then(|| hmax_from_eigs(&eigs, b));
        let emp = sorted_h.iter().copied().find(|&h| {
            cells
                .iter()
                .any(|c| c.beta == b && c.h == h && c.abscissa >= 0.0)
        });
        bt.push(vec![
            fmt_f64(b),
            fmt_f64(hmax.unwrap_or(f64::NAN)),
            fmt_f64(emp.unwrap_or(f64::NAN)),
        ]);
        boundary.push((b, hmax, emp));
    }
    bt.write(&out.join("boundary.csv"))?;
    let s = HeatmapSummary {
        scheme: cfg.scheme,
        cells: cells.len(),
        divergent_cells: cells.iter().filter(|c| c.abscissa >= 0.0).count(),
        assumption_interaction: asm.interaction,
        assumption_generic: asm.generic,
        boundary,
    };
    write_json(&out.join("summary.json"), &s)?;
    Ok(s)
}

// ---------------------------------------------------------------- rates

/// Least-squares slope of ln(dist) against t over the last half of the
/// finite prefix of the series, negated (positive = decaying). A run that
/// diverged is fitted on the samples it produced before stopping; zero
/// distances are dropped.
pub fn fit_decay_rate(t: &[f64], dist: &[f64]) -> Option<f64> {
    let finite = dist.iter().take_while(|d| d.is_finite()).count();
    let start = finite / 2;
    let pts: Vec<(f64, f64)> = t[start..finite]
        .iter()
        .zip(&dist[start..finite])
        .filter(|(_, d)| **d > 0.0)
        .map(|(&t, &d)| (t, d.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRace {
    pub steps: Vec<usize>,
    pub dist_sim: Vec<f64>,
    pub dist_alt: Vec<f64>,
    /// Decay rates per unit time t = step·h.
    pub rate_sim: Option<f64>,
    pub rate_alt: Option<f64>,
    pub diverged_sim: bool,
    pub diverged_alt: bool,
    /// −abscissa of J_S / J_A when the game is quadratic.
    pub spectral_rate_sim: Option<f64>,
    pub spectral_rate_alt: Option<f64>,
    /// −(predicted abscissa of J_A) from the perturbation formula.
    pub predicted_rate_alt: Option<f64>,
}

impl RateRace {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["step", "dist_sim", "dist_alt"]);
        for (i, &s) in self.steps.iter().enumerate() {
            t.push(vec![
                s.to_string(),
                fmt_f64(self.dist_sim[i]),
                fmt_f64(self.dist_alt[i]),
            ]);
        }
        t
    }
}

/// Distance to the origin under sim and alt from a shared start.
pub fn rate_race(
    game: &GameInstance,
    h: f64,
    beta: f64,
    start: &GamePoint,
    steps: usize,
    mode: &RateMode,
    substeps: usize,
) -> Result<RateRace> {
    let runs: Vec<Trajectory> = Scheme::BOTH
        .par_iter()
        .map(|&s| {
            let p = hb(h, beta, s)?;
            match mode {
                RateMode::Discrete => {
                    run_with(game, &p, &start.x, &start.y, steps, &RunOptions::default())
                }
                RateMode::Ode => {
                    let ic = IntegratorConfig {
                        dt: h / substeps.max(1) as f64,
                        method: Method::Rk4,
                        steps,
                        record_stride: 1,
                    };
                    integrate(game, &FieldSpec::limit(p), &ic, start)
                }
            }
        })
        .collect::<Result<_>>()?;
    let series = |t: &Trajectory| -> Vec<f64> {
        (0..=steps)
            .map(|k| t.states.get(k).map_or(f64::NAN, |s| s.point.norm()))
            .collect()
    };
    let (ds, da) = (series(&runs[0]), series(&runs[1]));
    let ts: Vec<f64> = (0..=steps).map(|k| k as f64 * h).collect();
    let (mut srs, mut sra, mut pra) = (None, None, None);
    if let Some(q) = game.as_quadratic() {
        let lm = LocalModel::quadratic(q);
        srs = Some(-spectral_abscissa(&lm.js(h, beta))?);
        sra = Some(-spectral_abscissa(&lm.ja(h, beta))?);
        pra = alt_rate_prediction(q, h, beta)
            .ok()
            .map(|p| -p.predicted_abscissa);
    }
    Ok(RateRace {
        steps: (0..=steps).collect(),
        rate_sim: fit_decay_rate(&ts, &ds),
        rate_alt: fit_decay_rate(&ts, &da),
        dist_sim: ds,
        dist_alt: da,
        diverged_sim: runs[0].meta.diverged,
        diverged_alt: runs[1].meta.diverged,
        spectral_rate_sim: srs,
        spectral_rate_alt: sra,
        predicted_rate_alt: pra,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatesSummary {
    pub h: f64,
    pub beta: f64,
    pub rate_sim: Option<f64>,
    pub rate_alt: Option<f64>,
    pub final_dist_sim: f64,
    pub final_dist_alt: f64,
    pub diverged_sim: bool,
    pub diverged_alt: bool,
    pub spectral_rate_sim: Option<f64>,
    pub spectral_rate_alt: Option<f64>,
    pub predicted_rate_alt: Option<f64>,
}

pub fn cmd_rates(cfg: &RatesConfig, ctx: &Context, out: &Path) -> Result<RatesSummary> {
    check_steps(cfg.steps)?;
    let game = cfg.game.build(ctx)?;
    let start = cfg.init.build(&game, ctx)?;
    let r = rate_race(
        &game,
        cfg.h,
        cfg.beta,
        &start,
        cfg.steps,
        &cfg.mode,
        cfg.substeps,
    )?;
    r.to_table().write(&out.join("rates.csv"))?;
    let s = RatesSummary {
        h: cfg.h,
        beta: cfg.beta,
        rate_sim: r.rate_sim,
        rate_alt: r.rate_alt,
        final_dist_sim: *r.dist_sim.last().unwrap(),
        final_dist_alt: *r.dist_alt.last().unwrap(),
        diverged_sim: r.diverged_sim,
        diverged_alt: r.diverged_alt,
        spectral_rate_sim: r.spectral_rate_sim,
        spectral_rate_alt: r.spectral_rate_alt,
        predicted_rate_alt: r.predicted_rate_alt,
    };
    write_json(&out.join("rates.json"), &s)?;
    if cfg.expect_convergence && s.diverged_sim && s.diverged_alt {
        return Err(Error::DivergenceOnly("both schemes diverged".into()));
    }
    Ok(s)
}

// ---------------------------------------------------------------- slopes

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeRow {
    pub beta: f64,
    pub scheme: Scheme,
    pub avg_slope: f64,
    pub total_length: f64,
    pub diverged: bool,
    pub left_domain: bool,
    #[serde(skip)]
    pub report: Option<SlopeReport>,
    #[serde(skip)]
    pub trajectory: Option<Trajectory>,
}

/// avg_slope for every (β, scheme) pair, β-major order.
pub fn slope_sweep(
    game: &GameInstance,
    cfg: &SlopesConfig,
    start: &GamePoint,
) -> Result<Vec<SlopeRow>> {
    let jobs: Vec<(f64, Scheme)> = cfg
        .beta
        .values()
        .into_iter()
        .flat_map(|b| cfg.schemes.iter().map(move |&s| (b, s)))
        .collect();
    jobs.par_iter()
        .map(|&(beta, s)| {
            let p = hb(cfg.h, beta, s)?;
            let opts = RunOptions {
                record_stride: cfg.record_stride,
                ..Default::default()
            };
            let t = run_with(game, &p, &start.x, &start.y, cfg.steps, &opts)?;
            let rep = match cfg.window {
                SlopeWindow::Full => avg_slope(game, &t)?,
                SlopeWindow::Tail(f) => avg_slope_tail(game, &t, f)?,
            };
            Ok(SlopeRow {
                beta,
                scheme: s,
                avg_slope: rep.avg_slope,
                total_length: rep.total_length,
                diverged: t.meta.diverged,
                left_domain: t.meta.left_domain,
                report: Some(rep),
                trajectory: cfg.write_trajectories.then_some(t),
            })
        })
        .collect()
}

pub fn cmd_slopes(cfg: &SlopesConfig, ctx: &Context, out: &Path) -> Result<Vec<SlopeRow>> {
    check_steps(cfg.steps)?;
    if let SlopeWindow::Tail(f) = cfg.window {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::config("window.tail", "fraction must lie in (0, 1]"));
        }
    }
    let game = cfg.game.build(ctx)?;
    let start = cfg.init.build(&game, ctx)?;
    let rows = slope_sweep(&game, cfg, &start)?;
    let mut t = Table::new(["beta", "scheme", "avg_slope"]);
    for r in &rows {
        t.push(vec![
            fmt_f64(r.beta),
            r.scheme.to_string(),
            fmt_f64(r.avg_slope),
        ]);
        let stem = format!("{}_beta{}", r.scheme, tag(r.beta));
        if let Some(rep) = &r.report {
            rep.cumulative_table()
                .write(&out.join(format!("cumulative_{stem}.csv")))?;
        }
        if let Some(tr) = &r.trajectory {
            tr.write(&out.join(format!("traj_{stem}.csv")))?;
        }
    }
    t.write(&out.join("slopes.csv"))?;
    write_json(&out.join("summary.json"), &rows)?;
    Ok(rows)
}

// ---------------------------------------------------------------- optimal-beta

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalBetaRow {
    pub h: f64,
    pub beta_global: f64,
    pub abscissa_global: f64,
    pub beta_binding: f64,
    pub binding_unique: bool,
}

pub fn cmd_optimal_beta(
    cfg: &OptimalBetaConfig,
    ctx: &Context,
    out: &Path,
) -> Result<Vec<OptimalBetaRow>> {
    let game = cfg.game.build(ctx)?;
    let lm = local_model(&game, &cfg.point, ctx)?;
    let j = lm.j();
    let hs = cfg.h.values();
    if hs.is_empty() || hs.iter().any(|&h| !(h > 0.0)) {
        return Err(Error::config("h", "needs positive step sizes"));
    }
    let opts = hs
        .iter()
        .map(|&h| optimal_beta(&j, h))
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new([
        "h",
        "beta_global",
        "abscissa_global",
        "beta_binding",
        "binding_unique",
    ]);
    let mut rows = Vec::new();
    for (&h, o) in hs.iter().zip(&opts) {
        let row = OptimalBetaRow {
            h,
            beta_global: o.global,
            abscissa_global: o.global_abscissa,
            beta_binding: o.binding.1,
            binding_unique: o.binding_is_unique(),
        };
        t.push(vec![
            fmt_f64(h),
            fmt_f64(row.beta_global),
            fmt_f64(row.abscissa_global),
            fmt_f64(row.beta_binding),
            row.binding_unique.to_string(),
        ]);
        rows.push(row);
    }
    t.write(&out.join("optimal_beta.csv"))?;
    write_json(&out.join("optimal_beta.json"), &opts)?;
    write_json(
        &out.join("report.json"),
        &spectral_report(&lm, hs[0], opts[0].global)?,
    )?;
    Ok(rows)
}

// ---------------------------------------------------------------- repro

pub const REPRO_NAMES: [&str; 6] = [
    "figure1",
    "figure2",
    "figure3",
    "appendix-a",
    "appendix-h",
    "example-i1",
];

/// Interaction-dominant game used for the optimal-momentum part of `figure2`.
pub const FIGURE2_WEAK_ALPHA: f64 = 0.01;
pub const FIGURE2_WEAK_SEED: u64 = 1;

/// Seeds of the three 100-dimensional games in the `appendix-h` bundle.
/// Hessian rank of those games (ten zero eigenvalues per player).
pub const APPENDIX_H_RANK: usize = 90;
pub const APPENDIX_H_SEEDS: [u64; 3] = [1, 2, 3];

/// The pinned configurations behind each reproduction bundle, as
/// (sub-directory, config) pairs.
pub fn repro_configs(name: &str) -> Result<Vec<(String, ExperimentConfig)>> {
    use ExperimentConfig as E;
    let both = default_schemes();
    let b = |g: BuiltinGame| GameSpec::Builtin(g);
    Ok(match name {
        "figure1" => vec![(
            "xy".into(),
            E::CompareModels(CompareModelsConfig {
                game: b(BuiltinGame::XY),
                h: 0.1,
                beta: 0.0,
                schemes: both,
                init: InitSpec::point(1.0, 1.0),
                steps: 1000,
                transient: true,
                substeps: 10,
            }),
        )],
        "figure2" => {
            // the first game is the seeded α=1 instance; it is not interaction
            // dominant, so the optimal-momentum part uses a small-α game
            let strong = GameSpec::Random(RandomGameSpec {
                n: 20,
                m: 20,
                rank_x: 10,
                rank_y: 10,
                alpha: 1.0,
                seed: Some(7),
            });
            let weak = GameSpec::Random(RandomGameSpec {
                n: 20,
                m: 20,
                rank_x: 10,
                rank_y: 10,
                alpha: FIGURE2_WEAK_ALPHA,
                seed: Some(FIGURE2_WEAK_SEED),
            });
            let betas = Grid::Linspace {
                start: -0.9,
                stop: 0.9,
                count: 37,
            };
            vec![
                (
                    "heatmap".into(),
                    E::Heatmap(HeatmapConfig {
                        game: strong,
                        point: None,
                        h: Grid::Linspace {
                            start: 0.002,
                            stop: 0.2,
                            count: 100,
                        },
                        beta: betas.clone(),
                        scheme: Scheme::Simultaneous,
                    }),
                ),
                (
                    "heatmap-interaction".into(),
                    E::Heatmap(HeatmapConfig {
                        game: weak.clone(),
                        point: None,
                        h: Grid::Linspace {
                            start: 2e-4,
                            stop: 0.02,
                            count: 100,
                        },
                        beta: betas,
                        scheme: Scheme::Simultaneous,
                    }),
                ),
                (
                    "optimal-beta".into(),
                    E::OptimalBeta(OptimalBetaConfig {
                        game: weak,
                        point: None,
                        h: Grid::List(vec![1e-4, 2e-4, 5e-4, 1e-3, 2e-3, 5e-3]),
                    }),
                ),
            ]
        }
        "figure3" => {
            let betas = Grid::List(vec![-0.5, -0.3, 0.0, 0.3, 0.5]);
            vec![
                (
                    "neg-xy2".into(),
                    E::Slopes(SlopesConfig {
                        game: b(BuiltinGame::NegXY2),
                        h: 0.01,
                        beta: betas.clone(),
                        schemes: both.clone(),
                        init: InitSpec::point(1.0, 1.0),
                        steps: 20_000,
                        window: SlopeWindow::Full,
                        record_stride: 1,
                        write_trajectories: true,
                    }),
                ),
                (
                    "limit-cycle-2d".into(),
                    E::Slopes(SlopesConfig {
                        game: b(BuiltinGame::LimitCycle2D),
                        h: 0.01,
                        beta: betas,
                        schemes: both,
                        init: InitSpec::point(1.0, 1.0),
                        steps: 20_000,
                        window: SlopeWindow::Tail(0.5),
                        record_stride: 1,
                        write_trajectories: true,
                    }),
                ),
            ]
        }
        "appendix-a" => vec![
            (
                "a1".into(),
                E::CompareModels(CompareModelsConfig {
                    game: b(BuiltinGame::AppendixA1),
                    h: 1e-3,
                    beta: -0.4,
                    schemes: both.clone(),
                    init: InitSpec::point(0.5, 0.5),
                    steps: 100_000,
                    transient: false,
                    substeps: 10,
                }),
            ),
            (
                "a2".into(),
                E::CompareModels(CompareModelsConfig {
                    game: b(BuiltinGame::AppendixA2),
                    h: 1e-3,
                    beta: -0.5,
                    schemes: both,
                    init: InitSpec::point(0.5, 0.5),
                    steps: 10_000,
                    transient: false,
                    substeps: 10,
                }),
            ),
        ],
        "appendix-h" => APPENDIX_H_SEEDS
            .iter()
            .map(|&seed| {
                (
                    format!("game{seed}"),
                    E::Rates(RatesConfig {
                        game: GameSpec::Random(RandomGameSpec {
                            n: 100,
                            m: 100,
                            rank_x: APPENDIX_H_RANK,
                            rank_y: APPENDIX_H_RANK,
                            alpha: 0.5,
                            seed: Some(seed),
                        }),
                        h: 0.01,
                        beta: 0.4,
                        init: InitSpec::Random {
                            seed: Some(seed),
                            scale: 1.0,
                        },
                        steps: 3000,
                        mode: RateMode::Discrete,
                        substeps: 10,
                        expect_convergence: false,
                    }),
                )
            })
            .collect(),
        "example-i1" => vec![(
            String::new(),
            E::Rates(RatesConfig {
                game: b(BuiltinGame::example_i1()),
                h: 0.4,
                beta: 0.2,
                init: InitSpec::point(1.0, 1.0),
                steps: 1000,
                mode: RateMode::Discrete,
                substeps: 10,
                expect_convergence: false,
            }),
        )],
        other => return Err(Error::UnknownExperiment(other.to_string())),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReproEntry {
    pub dir: String,
    pub config: ExperimentConfig,
    pub result: serde_json::Value,
}

/// Runs a named bundle into `out/<name>/`, saving each config beside its
/// artifacts.
pub fn repro(name: &str, ctx: &Context, out: &Path) -> Result<Vec<ReproEntry>> {
    let root = out.join(name);
    let mut entries = Vec::new();
    for (dir, cfg) in repro_configs(name)? {
        let d = if dir.is_empty() {
            root.clone()
        } else {
            root.join(&dir)
        };
        write_json(&d.join("config.json"), &cfg)?;
        let result = run_experiment(&cfg, ctx, &d)?;
        entries.push(ReproEntry {
            dir,
            config: cfg,
            result,
        });
    }
    write_json(&root.join("bundle.json"), &entries)?;
    Ok(entries)
}
