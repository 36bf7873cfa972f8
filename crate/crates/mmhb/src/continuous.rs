//! Continuous-time models of heavy ball: the modified loss
//!
//! F = f/(1−β) + h(1+β)/(4(1−β)³)·(‖∇ₓf‖² − ‖∇ᵧf‖²),
//!
//! its descent–ascent field (Continuous Sim-HB), the alternating variant, the
//! n-indexed transient fields that model the first iterations, the O(h²)
//! baseline, and a fixed-step integrator sampling on the grid tₙ = nh.

use serde::{Deserialize, Serialize};

use crate::discrete::{
    HBParams, HeavyBall, Scheme, State, Trajectory, TrajectoryMeta, DIVERGENCE_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::game::{Game, GamePoint};

/// c = h(1+β)/(2(1−β)³), the weight of the O(h) correction.
pub fn correction_coeff(h: f64, beta: f64) -> f64 {
    h * (1.0 + beta) / (2.0 * (1.0 - beta).powi(3))
}

pub fn modified_loss(game: &dyn Game, params: &HBParams, p: &GamePoint) -> f64 {
    let (gx, gy) = game.grad(&p.x, &p.y);
    let b = params.beta;
    game.value(&p.x, &p.y) / (1.0 - b)
        + params.h * (1.0 + b) / (4.0 * (1.0 - b).powi(3)) * (gx.norm_squared() - gy.norm_squared())
}

/// Shared form of every field in this module:
/// dx = −a·gx − s·(Hxx·gx − Hxy·gy),
/// dy =  a·gy + s·(Hxyᵀ·gx − Hyy·gy) − k·Hxyᵀ·gx.
fn field_generic(game: &dyn Game, p: &GamePoint, a: f64, s: f64, k: f64) -> GamePoint {
    let (gx, gy) = game.grad(&p.x, &p.y);
    if s == 0.0 && k == 0.0 {
        return GamePoint::new(gx * -a, gy * a);
    }
    let hp = game.hess_products(&p.x, &p.y, &gx, &gy);
    let dx = &gx * -a - (hp.hxx_u - hp.hxy_v) * s;
    let dy = &gy * a + &hp.hyx_u * (s - k) - hp.hyy_v * s;
    GamePoint::new(dx, dy)
}

/// Continuous Sim-HB: (−∇ₓF, ∇ᵧF).
pub fn field_sim(game: &dyn Game, params: &HBParams, p: &GamePoint) -> GamePoint {
    let b = params.beta;
    field_generic(game, p, 1.0 / (1.0 - b), correction_coeff(params.h, b), 0.0)
}

/// Continuous Alt-HB: y follows ∇ᵧ(F − h/(2(1−β)²)‖∇ₓf‖²).
pub fn field_alt(game: &dyn Game, params: &HBParams, p: &GamePoint) -> GamePoint {
    let b = params.beta;
    field_generic(
        game,
        p,
        1.0 / (1.0 - b),
        correction_coeff(params.h, b),
        params.h / (1.0 - b).powi(2),
    )
}

/// The O(h²) model: all O(h) corrections dropped.
pub fn field_baseline_o2(game: &dyn Game, params: &HBParams, p: &GamePoint) -> GamePoint {
    field_generic(game, p, 1.0 / (1.0 - params.beta), 0.0, 0.0)
}

pub fn field_gradient_flow(game: &dyn Game, p: &GamePoint) -> GamePoint {
    field_generic(game, p, 1.0, 0.0, 0.0)
}

/// γₙ = Σᵢ₌₀ⁿ β^{n−i}[(1+β)(1+β^{2i+1}) − 4β^{i+1}].
pub fn gamma_n(beta: f64, n: usize) -> f64 {
    (0..=n)
        .map(|i| {
            beta.powi((n - i) as i32)
                * ((1.0 + beta) * (1.0 + beta.powi(2 * i as i32 + 1))
                    - 4.0 * beta.powi(i as i32 + 1))
        })
        .sum()
}

/// δₙ = 2·Σᵢ₌₀ⁿ β^{n−i}(1−β^{i+1})(1−β).
pub fn delta_n(beta: f64, n: usize) -> f64 {
    2.0 * (0..=n)
        .map(|i| beta.powi((n - i) as i32) * (1.0 - beta.powi(i as i32 + 1)) * (1.0 - beta))
        .sum::<f64>()
}

/// Leading coefficient of the transient field on [tₙ, tₙ₊₁).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransientConvention {
    /// (1 − β^{n+1})/(1 − β): what the recurrence actually solves to.
    #[default]
    Proof,
    /// (1 − βⁿ)/(1 − β): the index as printed in the lemma statement.
    Statement,
}

impl TransientConvention {
    pub fn leading(self, beta: f64, n: usize) -> f64 {
        let e = match self {
            TransientConvention::Proof => n + 1,
            TransientConvention::Statement => n,
        };
        (1.0 - beta.powi(e as i32)) / (1.0 - beta)
    }
}

/// The n-th transient field.
pub fn field_transient(
    game: &dyn Game,
    params: &HBParams,
    n: usize,
    scheme: Scheme,
    convention: TransientConvention,
    p: &GamePoint,
) -> GamePoint {
    let b = params.beta;
    let s = params.h * gamma_n(b, n) / (2.0 * (1.0 - b).powi(2));
    let k = match scheme {
        Scheme::Simultaneous => 0.0,
        Scheme::Alternating => params.h * delta_n(b, n) / (2.0 * (1.0 - b).powi(2)),
    };
    field_generic(game, p, convention.leading(b, n), s, k)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldKind {
    ContinuousSim,
    ContinuousAlt,
    /// Starts at transient index `n` and advances it at every node tₖ = kh.
    TransientSim {
        n: usize,
    },
    TransientAlt {
        n: usize,
    },
    BaselineO2,
    GradientFlow,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub kind: FieldKind,
    pub params: HBParams,
    #[serde(default)]
    pub convention: TransientConvention,
}

impl FieldSpec {
    pub fn new(kind: FieldKind, params: HBParams) -> Self {
        Self {
            kind,
            params,
            convention: TransientConvention::Proof,
        }
    }

    /// The O(h³) limit field for the scheme in `params`.
    pub fn limit(params: HBParams) -> Self {
        let kind = match params.scheme {
            Scheme::Simultaneous => FieldKind::ContinuousSim,
            Scheme::Alternating => FieldKind::ContinuousAlt,
        };
        Self::new(kind, params)
    }

    pub fn transient(params: HBParams, n: usize) -> Self {
        let kind = match params.scheme {
            Scheme::Simultaneous => FieldKind::TransientSim { n },
            Scheme::Alternating => FieldKind::TransientAlt { n },
        };
        Self::new(kind, params)
    }

    /// Evaluates the field; `k` is the number of h-intervals already elapsed.
    pub fn eval(&self, game: &dyn Game, p: &GamePoint, k: usize) -> GamePoint {
        let mut sched = Schedule::new(self);
        sched.n += k;
        if sched.transient().is_some() {
            sched.gamma = gamma_n(self.params.beta, sched.n);
            sched.delta = delta_n(self.params.beta, sched.n);
        }
        sched.eval(game, p)
    }
}

/// Coefficients (a, s, k) of [`field_generic`] over successive h-intervals;
/// transient γₙ, δₙ are advanced by their one-term recurrences.
struct Schedule {
    spec: FieldSpec,
    n: usize,
    gamma: f64,
    delta: f64,
}

impl Schedule {
    fn new(spec: &FieldSpec) -> Self {
        let mut s = Self {
            spec: *spec,
            n: 0,
            gamma: 0.0,
            delta: 0.0,
        };
        if let Some((n, _)) = s.transient() {
            s.n = n;
            s.gamma = gamma_n(spec.params.beta, n);
            s.delta = delta_n(spec.params.beta, n);
        }
        s
    }

    fn transient(&self) -> Option<(usize, Scheme)> {
        match self.spec.kind {
            FieldKind::TransientSim { n } => Some((n, Scheme::Simultaneous)),
            FieldKind::TransientAlt { n } => Some((n, Scheme::Alternating)),
            _ => None,
        }
    }

    fn coeffs(&self) -> (f64, f64, f64) {
        let HBParams { h, beta: b, .. } = self.spec.params;
        match self.spec.kind {
            FieldKind::ContinuousSim => (1.0 / (1.0 - b), correction_coeff(h, b), 0.0),
            FieldKind::ContinuousAlt => (
                1.0 / (1.0 - b),
                correction_coeff(h, b),
                h / (1.0 - b).powi(2),
            ),
            FieldKind::BaselineO2 => (1.0 / (1.0 - b), 0.0, 0.0),
            FieldKind::GradientFlow => (1.0, 0.0, 0.0),
            FieldKind::TransientSim { .. } | FieldKind::TransientAlt { .. } => {
                let a = self.spec.convention.leading(b, self.n);
                let s = h * self.gamma / (2.0 * (1.0 - b).powi(2));
                let k = match self.spec.kind {
                    FieldKind::TransientAlt { .. } => h * self.delta / (2.0 * (1.0 - b).powi(2)),
                    _ => 0.0,
                };
                (a, s, k)
            }
        }
    }

    fn eval(&self, game: &dyn Game, p: &GamePoint) -> GamePoint {
        let (a, s, k) = self.coeffs();
        field_generic(game, p, a, s, k)
    }

    fn bump(&mut self) {
        self.n += 1;
        if self.transient().is_some() {
            let b = self.spec.params.beta;
            let n = self.n as i32;
            self.gamma =
                b * self.gamma + (1.0 + b) * (1.0 + b.powi(2 * n + 1)) - 4.0 * b.powi(n + 1);
            self.delta = b * self.delta + 2.0 * (1.0 - b.powi(n + 1)) * (1.0 - b);
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Rk4,
    Euler,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Internal step; must divide h.
    pub dt: f64,
    pub method: Method,
    /// Number of h-intervals to integrate (horizon T = steps·h).
    pub steps: usize,
    /// Keep every `record_stride`-th grid sample (first and last always kept).
    pub record_stride: usize,
}

impl IntegratorConfig {
    /// RK4 with dt = h/10, recording every grid point.
    pub fn default_for(h: f64, steps: usize) -> Self {
        Self {
            dt: h / 10.0,
            method: Method::Rk4,
            steps,
            record_stride: 1,
        }
    }

    fn substeps(&self, h: f64) -> Result<usize> {
        if !(self.dt > 0.0) || self.dt > h * (1.0 + 1e-12) {
            return Err(Error::InvalidParams(format!(
                "need 0 < dt <= h, got dt={} h={h}",
                self.dt
            )));
        }
        let k = (h / self.dt).round();
        if ((k * self.dt - h) / h).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!(
                "dt={} does not divide h={h}",
                self.dt
            )));
        }
        Ok(k as usize)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorMeta {
    pub method: Method,
    pub dt: f64,
    pub field: FieldKind,
    pub convention: TransientConvention,
}

fn advance(game: &dyn Game, sched: &Schedule, method: Method, p: &GamePoint, dt: f64) -> GamePoint {
    let f = |q: &GamePoint| sched.eval(game, q);
    match method {
        Method::Euler => p.axpy(dt, &f(p)),
        Method::Rk4 => {
            let k1 = f(p);
            let k2 = f(&p.axpy(0.5 * dt, &k1));
            let k3 = f(&p.axpy(0.5 * dt, &k2));
            let k4 = f(&p.axpy(dt, &k3));
            let x = &p.x + (k1.x + (k2.x + k3.x) * 2.0 + k4.x) * (dt / 6.0);
            let y = &p.y + (k1.y + (k2.y + k3.y) * 2.0 + k4.y) * (dt / 6.0);
            GamePoint::new(x, y)
        }
    }
}

/// Integrates `spec` from (x0, y0) at t = 0, sampling at every multiple of h.
pub fn integrate(
    game: &dyn Game,
    spec: &FieldSpec,
    cfg: &IntegratorConfig,
    start: &GamePoint,
) -> Result<Trajectory> {
    spec.params.validate()?;
    crate::game::eval(game, start)?;
    let h = spec.params.h;
    let sub = cfg.substeps(h)?;
    let dt = h / sub as f64;
    let stride = cfg.record_stride.max(1);
    let mut meta = TrajectoryMeta {
        game: game.label(),
        kind: "ode".into(),
        scheme: Some(spec.params.scheme),
        h: Some(h),
        beta: Some(spec.params.beta),
        integrator: Some(IntegratorMeta {
            method: cfg.method,
            dt,
            field: spec.kind,
            convention: spec.convention,
        }),
        steps_requested: cfg.steps,
        record_stride: stride,
        ..Default::default()
    };
    let mut states = vec![State {
        index: 0,
        t: 0.0,
        point: start.clone(),
    }];
    let mut p = start.clone();
    let mut sched = Schedule::new(spec);
    for k in 0..cfg.steps {
        for _ in 0..sub {
            p = advance(game, &sched, cfg.method, &p, dt);
        }
        sched.bump();
        let idx = k + 1;
        if !p.is_finite() {
            meta.diverged = true;
            break;
        }
        if !game.in_domain(&p.x, &p.y) {
            meta.left_domain = true;
        }
        let blown = p.max_abs() > DIVERGENCE_THRESHOLD;
        if idx % stride == 0 || idx == cfg.steps || blown {
            states.push(State {
                index: idx,
                t: idx as f64 * h,
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

/// ⌈4·ln h / ln|β|⌉, the number of iterations after which the limit field is
/// expected to track the algorithm; 0 for β = 0.
pub fn warmup_steps(h: f64, beta: f64) -> usize {
    if beta == 0.0 {
        return 0;
    }
    (4.0 * h.ln() / beta.abs().ln()).ceil().max(0.0) as usize
}

/// Local defect of the limit ODE against the two-step recurrence: integrate
/// the limit field for 2h from `start` (giving z₀, z₁, z₂) and return
/// ‖z₂ − step(z₁, z₀)‖. For the O(h³) model this is O(h³).
pub fn one_step_deviation(
    game: &dyn Game,
    params: &HBParams,
    start: &GamePoint,
    substeps: usize,
) -> Result<f64> {
    let cfg = IntegratorConfig {
        dt: params.h / substeps.max(1) as f64,
        method: Method::Rk4,
        steps: 2,
        record_stride: 1,
    };
    let ode = integrate(game, &FieldSpec::limit(*params), &cfg, start)?;
    if ode.len() != 3 {
        return Err(Error::NonFiniteState { step: ode.len() });
    }
    let (z0, z1, z2) = (
        &ode.states[0].point,
        &ode.states[1].point,
        &ode.states[2].point,
    );
    let mut hb = HeavyBall::resume(game, *params, z1.clone(), z0.clone(), 1);
    Ok(hb.advance()?.dist(z2))
}
