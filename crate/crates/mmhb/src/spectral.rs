//! Local analysis at an equilibrium: the Jacobian J of gradient flow, the
//! Jacobians J_S and J_A of the continuous models, assumption checks,
//! step-size bounds, optimal momentum and the alternating-rate prediction.

use nalgebra::{Complex, DMatrix, Schur, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuous::correction_coeff;
use crate::discrete::Scheme;
use crate::error::{Error, Result};
use crate::game::{Game, GamePoint, Matrix, QuadraticGame};

pub type C64 = Complex<f64>;

/// Gradient norm above which a Jacobian evaluation point is flagged.
pub const EQUILIBRIUM_TOL: f64 = 1e-8;

/// The Hessian blocks at a point, from which every Jacobian is built.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalModel {
    pub hxx: Matrix,
    pub hxy: Matrix,
    pub hyy: Matrix,
    /// ‖∇f‖ at the evaluation point.
    pub grad_norm: f64,
}

impl LocalModel {
    pub fn at(game: &dyn Game, p: &GamePoint) -> Result<Self> {
        let h = crate::game::second_derivs(game, p)?;
        let (gx, gy) = game.grad(&p.x, &p.y);
        Ok(Self {
            hxx: h.hxx,
            hxy: h.hxy,
            hyy: h.hyy,
            grad_norm: (gx.norm_squared() + gy.norm_squared()).sqrt(),
        })
    }

    pub fn quadratic(g: &QuadraticGame) -> Self {
        Self {
            hxx: g.hx.clone(),
            hxy: g.c.clone(),
            hyy: g.hy.clone(),
            grad_norm: 0.0,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.hxy.nrows(), self.hxy.ncols())
    }

    pub fn is_equilibrium(&self) -> bool {
        self.grad_norm <= EQUILIBRIUM_TOL
    }

    /// J = [[−Hxx, −Hxy], [Hxyᵀ, Hyy]].
    pub fn j(&self) -> Matrix {
        let (n, m) = self.dims();
        let mut j = Matrix::zeros(n + m, n + m);
        j.view_mut((0, 0), (n, n)).copy_from(&(-&self.hxx));
        j.view_mut((0, n), (n, m)).copy_from(&(-&self.hxy));
        j.view_mut((n, 0), (m, n)).copy_from(&self.hxy.transpose());
        j.view_mut((n, n), (m, m)).copy_from(&self.hyy);
        j
    }

    pub fn js(&self, h: f64, beta: f64) -> Matrix {
        jacobian_sim(&self.j(), h, beta)
    }

    /// J_A = J_S − h/(1−β)²·[[0, 0], [HxyᵀHxx, HxyᵀHxy]].
    pub fn ja(&self, h: f64, beta: f64) -> Matrix {
        let (n, m) = self.dims();
        let mut ja = self.js(h, beta);
        let k = h / (1.0 - beta).powi(2);
        let hyx = self.hxy.transpose();
        let mut lower = ja.view_mut((n, 0), (m, n + m));
        let mut l = lower.columns_mut(0, n);
        l -= &hyx * &self.hxx * k;
        let mut r = lower.columns_mut(n, m);
        r -= &hyx * &self.hxy * k;
        ja
    }

    pub fn jacobian(&self, h: f64, beta: f64, scheme: Scheme) -> Matrix {
        match scheme {
            Scheme::Simultaneous => self.js(h, beta),
            Scheme::Alternating => self.ja(h, beta),
        }
    }

    pub fn decomposition(&self) -> Decomposition {
        decompose(&self.j(), self.dims().0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Warning {
    /// The Jacobian formula was evaluated away from a critical point.
    NotEquilibrium { grad_norm: f64 },
}

/// Lemma-4.1 Jacobian at `p`, with a warning when `p` is not critical.
pub fn jacobian_gf(game: &dyn Game, p: &GamePoint) -> Result<(Matrix, Option<Warning>)> {
    let lm = LocalModel::at(game, p)?;
    let w = (!lm.is_equilibrium()).then_some(Warning::NotEquilibrium {
        grad_norm: lm.grad_norm,
    });
    Ok((lm.j(), w))
}

/// J_S = (I/(1−β) − h(1+β)/(2(1−β)³)·J)·J.
pub fn jacobian_sim(j: &Matrix, h: f64, beta: f64) -> Matrix {
    j / (1.0 - beta) - (j * j) * correction_coeff(h, beta)
}

pub fn jacobian_alt(game: &dyn Game, p: &GamePoint, h: f64, beta: f64) -> Result<Matrix> {
    Ok(LocalModel::at(game, p)?.ja(h, beta))
}

/// The spectral-mapping polynomial p(λ) = λ/(1−β) − h(1+β)λ²/(2(1−β)³).
pub fn sim_polynomial(lambda: C64, h: f64, beta: f64) -> C64 {
    lambda / (1.0 - beta) - lambda * lambda * correction_coeff(h, beta)
}

/// J = S + A with S the block diagonal (potential) part.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub s: Matrix,
    pub a: Matrix,
}

pub fn decompose(j: &Matrix, n: usize) -> Decomposition {
    let d = j.nrows();
    let mut s = Matrix::zeros(d, d);
    s.view_mut((0, 0), (n, n))
        .copy_from(&j.view((0, 0), (n, n)));
    s.view_mut((n, n), (d - n, d - n))
        .copy_from(&j.view((n, n), (d - n, d - n)));
    let a = j - &s;
    Decomposition { s, a }
}

fn sort_eigs(v: &mut [C64]) {
    v.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
}

/// Full spectrum of a real square matrix (real Schur form), sorted by
/// decreasing real part.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<C64>> {
    if m.nrows() != m.ncols() || m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParams(
            "eigenvalues needs a finite square matrix".into(),
        ));
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000).ok_or(Error::ConvergenceFailure)?;
    let mut v: Vec<C64> = schur.complex_eigenvalues().iter().copied().collect();
    sort_eigs(&mut v);
    Ok(v)
}

/// Max real part.
pub fn abscissa(eigs: &[C64]) -> f64 {
    eigs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max)
}

pub fn spectral_abscissa(m: &Matrix) -> Result<f64> {
    Ok(abscissa(&eigenvalues(m)?))
}

/// Outcome of the two standing assumptions on Sp(J).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assumptions {
    /// |Im λ| > |Re λ| for every eigenvalue.
    pub interaction: bool,
    /// Re λ < 0 for every eigenvalue (the spectral consequence of genericity).
    pub generic: bool,
    /// Diagnostic: min over eigenvalues μ of A of σ_min(A·K − μK), K an
    /// orthonormal basis of Ker(S); `None` when Ker(S) = {0}.
    pub kernel_residual: Option<f64>,
    /// Diagnostic verdict of the direct test EigVec(A) ∩ Ker(S) ≠ {0}.
    pub kernel_intersects: bool,
}

const INTERACTION_TOL: f64 = 1e-10;
const GENERIC_TOL: f64 = 1e-12;
const KERNEL_TOL: f64 = 1e-8;

fn interaction_holds(eigs: &[C64]) -> bool {
    eigs.iter()
        .all(|l| l.im.abs() - l.re.abs() > INTERACTION_TOL)
}

fn generic_holds(eigs: &[C64]) -> bool {
    eigs.iter().all(|l| l.re < -GENERIC_TOL)
}

pub fn check_assumptions(j: &Matrix, dec: &Decomposition) -> Result<Assumptions> {
    let eigs = eigenvalues(j)?;
    let (kernel_residual, kernel_intersects) = kernel_test(dec)?;
    Ok(Assumptions {
        interaction: interaction_holds(&eigs),
        generic: generic_holds(&eigs),
        kernel_residual,
        kernel_intersects,
    })
}

fn kernel_test(dec: &Decomposition) -> Result<(Option<f64>, bool)> {
    let d = dec.s.nrows();
    if d == 0 {
        return Ok((None, false));
    }
    let svd = dec.s.clone().svd(false, true);
    let vt = svd.v_t.as_ref().ok_or(Error::ConvergenceFailure)?;
    let scale = svd.singular_values.max().max(1.0);
    let null: Vec<usize> = (0..d)
        .filter(|&i| svd.singular_values[i] <= KERNEL_TOL * scale)
        .collect();
    if null.is_empty() {
        return Ok((None, false));
    }
    let k = DMatrix::from_fn(d, null.len(), |r, c| C64::new(vt[(null[c], r)], 0.0));
    let a = dec.a.map(|v| C64::new(v, 0.0));
    let ak = &a * &k;
    let mut best = f64::INFINITY;
    for mu in eigenvalues(&dec.a)? {
        let r = &ak - &k * mu;
        let sv = r.singular_values();
        best = best.min(sv.min());
    }
    let scale_a = dec.a.amax().max(1.0);
    Ok((Some(best), best <= KERNEL_TOL * scale_a))
}

/// Theorem 4.1: every h below this bound gives local convergence.
pub fn hmax_bound(j: &Matrix, beta: f64) -> Result<f64> {
    let eigs = eigenvalues(j)?;
    if !interaction_holds(&eigs) || !generic_holds(&eigs) {
        return Err(Error::AssumptionViolated(
            "step-size bound needs |Im λ| > |Re λ| and Re λ < 0 for all λ ∈ Sp(J)".into(),
        ));
    }
    Ok(hmax_from_eigs(&eigs, beta))
}

/// min over λ of 2(1−β)²/(1+β)·|Re λ|/(Im² − Re²); eigenvalues with
/// Im² ≤ Re² impose no constraint.
pub fn hmax_from_eigs(eigs: &[C64], beta: f64) -> f64 {
    let f = 2.0 * (1.0 - beta).powi(2) / (1.0 + beta);
    eigs.iter()
        .filter_map(|l| {
            let d = l.im * l.im - l.re * l.re;
            (d > 0.0).then(|| f * l.re.abs() / d)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Appendix-G minimiser of Re p(λ) over β for a single eigenvalue.
pub fn optimal_beta_eig(lambda: C64, h: f64) -> f64 {
    let r = lambda.re.abs();
    let d = lambda.im * lambda.im - lambda.re * lambda.re;
    if h > 4.0 * r / d {
        return -1.0;
    }
    1.0 + h * d / (2.0 * r) - (h * h * d * d + 12.0 * r * h * d).sqrt() / (2.0 * r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalBeta {
    /// (λ, β*) for each eigenvalue with Im λ ≥ 0.
    pub per_eig: Vec<(Cx, f64)>,
    /// Grid minimiser of the spectral abscissa of J_S.
    pub global: f64,
    pub global_abscissa: f64,
    /// Eigenvalue attaining the abscissa of J_S at the global optimum, with
    /// its own closed-form β*.
    pub binding: (Cx, f64),
    /// Gap between the largest and second-largest Re p(λ) over conjugate
    /// pairs at the global optimum (∞ for a single pair).
    pub binding_gap: f64,
}

impl OptimalBeta {
    /// The binding eigenvalue counts as unique when the runner-up pair trails
    /// it by more than 1% of the abscissa.
    pub fn binding_is_unique(&self) -> bool {
        self.binding_gap > 0.01 * self.global_abscissa.abs()
    }
}

pub const BETA_GRID_STEP: f64 = 1e-3;

/// β ∈ {−0.999, −0.998, …, 0.999}.
pub fn beta_grid() -> Vec<f64> {
    (0..1999)
        .map(|k| -0.999 + k as f64 * BETA_GRID_STEP)
        .collect()
}

pub fn optimal_beta(j: &Matrix, h: f64) -> Result<OptimalBeta> {
    let eigs = eigenvalues(j)?;
    if !interaction_holds(&eigs) || !generic_holds(&eigs) {
        return Err(Error::AssumptionViolated(
            "optimal momentum needs both assumptions on Sp(J)".into(),
        ));
    }
    let per_eig = eigs
        .iter()
        .filter(|l| l.im >= 0.0)
        .map(|&l| (Cx::from(l), optimal_beta_eig(l, h)))
        .collect();
    let grid = beta_grid();
    let abs: Vec<f64> = grid
        .par_iter()
        .map(|&b| spectral_abscissa(&jacobian_sim(j, h, b)))
        .collect::<Result<_>>()?;
    let (i, &best) = abs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is non-empty");
    let beta = grid[i];
    let mut mapped: Vec<(f64, C64)> = eigs
        .iter()
        .filter(|l| l.im >= 0.0)
        .map(|&l| (sim_polynomial(l, h, beta).re, l))
        .collect();
    mapped.sort_by(|a, b| b.0.total_cmp(&a.0));
    let top = mapped[0].1;
    let binding_gap = mapped.get(1).map_or(f64::INFINITY, |s| mapped[0].0 - s.0);
    Ok(OptimalBeta {
        per_eig,
        global: beta,
        global_abscissa: best,
        binding: (top.into(), optimal_beta_eig(top, h)),
        binding_gap,
    })
}

/// Closed-form eigenvalues of J_S / J_A for a bilinear game, per eigenvalue ρ
/// of AAᵀ.
pub fn bilinear_eigs(rho: f64, h: f64, beta: f64, scheme: Scheme) -> (C64, C64) {
    let (center, disc) = match scheme {
        Scheme::Simultaneous => (correction_coeff(h, beta) * rho, -rho / (1.0 - beta).powi(2)),
        Scheme::Alternating => (
            h * beta * rho / (1.0 - beta).powi(3),
            h * h * rho * rho / (4.0 * (1.0 - beta).powi(4)) - rho / (1.0 - beta).powi(2),
        ),
    };
    let root = C64::new(disc, 0.0).sqrt();
    (center + root, center - root)
}

/// Per-singular-value entry of the alternating-rate prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AltRateEntry {
    pub sigma: f64,
    /// Eigenvalue of J paired with σ.
    pub lambda: Cx,
    /// p(λ): the matching eigenvalue of J_S.
    pub lambda_s: Cx,
    /// Re λ_S − hσ²/(2(1−β)²).
    pub predicted: f64,
    /// Re λ_S − hσ²/(1−β)², the shift with the coefficient as printed.
    pub predicted_literal: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AltRatePrediction {
    pub entries: Vec<AltRateEntry>,
    pub predicted_abscissa: f64,
    pub predicted_abscissa_literal: f64,
}

const SIGMA_TOL: f64 = 1e-8;

/// First-order prediction of the real parts of Sp(J_A) from Sp(J_S).
///
/// Each singular triple (σ, u, v) of C is paired with the eigenvalue of J
/// nearest to iσ + ½(vᵀHy·v − uᵀHx·u); the shift per pair is
/// −hσ²/(2(1−β)²), half the trace of the J_A correction restricted to the
/// pair's invariant plane.
pub fn alt_rate_prediction(game: &QuadraticGame, h: f64, beta: f64) -> Result<AltRatePrediction> {
    let (n, m) = (game.c.nrows(), game.c.ncols());
    if n != m || n == 0 {
        return Err(Error::PreconditionViolated(format!(
            "needs a square coupling block, got {n}x{m}"
        )));
    }
    let svd = game.c.clone().svd(true, true);
    let (u, vt) = (svd.u.as_ref().unwrap(), svd.v_t.as_ref().unwrap());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sig: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    if sig[n - 1] <= SIGMA_TOL {
        return Err(Error::PreconditionViolated(
            "coupling block is rank deficient".into(),
        ));
    }
    if sig.windows(2).any(|w| w[0] - w[1] <= SIGMA_TOL) {
        return Err(Error::PreconditionViolated(
            "coupling block has repeated singular values".into(),
        ));
    }
    let lm = LocalModel::quadratic(game);
    let mut pool: Vec<C64> = eigenvalues(&lm.j())?
        .into_iter()
        .filter(|l| l.im >= 0.0)
        .collect();
    let k = h / (2.0 * (1.0 - beta).powi(2));
    let mut entries = Vec::with_capacity(n);
    for (rank, &i) in order.iter().enumerate() {
        let ui = u.column(i);
        let vi = vt.row(i).transpose();
        let re = 0.5 * ((vi.transpose() * &game.hy * &vi)[0] - (ui.transpose() * &game.hx * ui)[0]);
        let target = C64::new(re, sig[rank]);
        let (pos, _) = pool
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - target).norm().total_cmp(&(b.1 - target).norm()))
            .ok_or_else(|| {
                Error::PreconditionViolated("fewer eigenvalues than singular values".into())
            })?;
        let lambda = pool.swap_remove(pos);
        let ls = sim_polynomial(lambda, h, beta);
        let s2 = sig[rank] * sig[rank];
        entries.push(AltRateEntry {
            sigma: sig[rank],
            lambda: lambda.into(),
            lambda_s: ls.into(),
            predicted: ls.re - k * s2,
            predicted_literal: ls.re - 2.0 * k * s2,
        });
    }
    let max = |f: fn(&AltRateEntry) -> f64| entries.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    Ok(AltRatePrediction {
        predicted_abscissa: max(|e| e.predicted),
        predicted_abscissa_literal: max(|e| e.predicted_literal),
        entries,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatCell {
    pub beta: f64,
    pub h: f64,
    pub abscissa: f64,
}

/// Spectral abscissa of J_S (or J_A) over the grid, β-major order.
pub fn stability_heatmap(
    model: &LocalModel,
    h_grid: &[f64],
    beta_grid: &[f64],
    scheme: Scheme,
) -> Result<Vec<HeatCell>> {
    if h_grid.is_empty() || beta_grid.is_empty() {
        return Err(Error::InvalidParams(
            "heatmap grids must be non-empty".into(),
        ));
    }
    if h_grid.iter().any(|&h| !(h > 0.0)) || beta_grid.iter().any(|&b| !(b > -1.0 && b < 1.0)) {
        return Err(Error::InvalidParams(
            "heatmap grid values out of range".into(),
        ));
    }
    let cells: Vec<(f64, f64)> = beta_grid
        .iter()
        .flat_map(|&b| h_grid.iter().map(move |&h| (b, h)))
        .collect();
    cells
        .par_iter()
        .map(|&(beta, h)| {
            Ok(HeatCell {
                beta,
                h,
                abscissa: spectral_abscissa(&model.jacobian(h, beta, scheme))?,
            })
        })
        .collect()
}

/// Heavy ball on a minimisation problem with top Hessian eigenvalue
/// `lambda_max` is locally stable iff 0 < α·λ < 2 + 2β.
pub fn min_hb_stability(alpha: f64, beta: f64, lambda_max: f64) -> bool {
    let a = alpha * lambda_max;
    0.0 < a && a < 2.0 + 2.0 * beta
}

/// JSON-friendly complex number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cx {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for Cx {
    fn from(c: C64) -> Self {
        Self { re: c.re, im: c.im }
    }
}

impl From<Cx> for C64 {
    fn from(c: Cx) -> Self {
        C64::new(c.re, c.im)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub h: f64,
    pub beta: f64,
    pub eigs_j: Vec<Cx>,
    pub eigs_js: Vec<Cx>,
    pub eigs_ja: Vec<Cx>,
    pub abscissa_j: f64,
    pub abscissa_js: f64,
    pub abscissa_ja: f64,
    pub assumption_interaction: bool,
    pub assumption_generic: bool,
    pub kernel_residual: Option<f64>,
    /// `None` when the assumptions fail (the bound is then undefined).
    pub hmax: Option<f64>,
    pub optimal_beta_per_eig: Vec<(Cx, f64)>,
    pub optimal_beta_global: Option<f64>,
    pub alt_prediction: Vec<f64>,
    pub warnings: Vec<Warning>,
}

/// Everything the module computes for one local model and (h, β).
pub fn spectral_report(model: &LocalModel, h: f64, beta: f64) -> Result<SpectralReport> {
    let j = model.j();
    let eigs_j = eigenvalues(&j)?;
    let eigs_js = eigenvalues(&model.js(h, beta))?;
    let eigs_ja = eigenvalues(&model.ja(h, beta))?;
    let asm = check_assumptions(&j, &model.decomposition())?;
    let ok = asm.interaction && asm.generic;
    let hmax = ok.then(|| hmax_from_eigs(&eigs_j, beta));
    let opt = if ok { Some(optimal_beta(&j, h)?) } else { None };
    let quad =
        QuadraticGame::new_unchecked(model.hxx.clone(), model.hyy.clone(), model.hxy.clone())?;
    let alt_prediction = alt_rate_prediction(&quad, h, beta)
        .map(|p| p.entries.iter().map(|e| e.predicted).collect())
        .unwrap_or_default();
    let mut warnings = Vec::new();
    if !model.is_equilibrium() {
        warnings.push(Warning::NotEquilibrium {
            grad_norm: model.grad_norm,
        });
    }
    let cx = |v: &[C64]| v.iter().map(|&c| Cx::from(c)).collect::<Vec<_>>();
    Ok(SpectralReport {
        h,
        beta,
        abscissa_j: abscissa(&eigs_j),
        abscissa_js: abscissa(&eigs_js),
        abscissa_ja: abscissa(&eigs_ja),
        eigs_j: cx(&eigs_j),
        eigs_js: cx(&eigs_js),
        eigs_ja: cx(&eigs_ja),
        assumption_interaction: asm.interaction,
        assumption_generic: asm.generic,
        kernel_residual: asm.kernel_residual,
        hmax,
        optimal_beta_per_eig: opt.as_ref().map(|o| o.per_eig.clone()).unwrap_or_default(),
        optimal_beta_global: opt.map(|o| o.global),
        alt_prediction,
        warnings,
    })
}

/// Smallest eigenvalue of a symmetric matrix (used for semidefiniteness checks).
pub fn min_symmetric_eig(m: &Matrix) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{random_quadratic, BuiltinGame};

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn jacobian_examples() {
        let (j, w) =
            jacobian_gf(&BuiltinGame::XY, &GamePoint::from_slices(&[0.0], &[0.0])).unwrap();
        assert_eq!(j, m(&[&[0.0, -1.0], &[1.0, 0.0]]));
        assert!(w.is_none());
        let (j, _) = jacobian_gf(
            &BuiltinGame::example_i1(),
            &GamePoint::from_slices(&[0.0], &[0.0]),
        )
        .unwrap();
        assert_eq!(j, m(&[&[-2.0 * 2.537, -0.801], &[0.801, -2.0 * 0.0003]]));
        let (_, w) =
            jacobian_gf(&BuiltinGame::XY, &GamePoint::from_slices(&[1.0], &[0.0])).unwrap();
        assert!(matches!(w, Some(Warning::NotEquilibrium { .. })));
    }

    #[test]
    fn quadratic_jacobian_blocks() {
        let g = random_quadratic(3, 2, 2, 1, 0.5, 9).unwrap();
        let j = LocalModel::quadratic(&g).j();
        assert_eq!(j.view((0, 0), (3, 3)).clone_owned(), -&g.hx);
        assert_eq!(j.view((0, 3), (3, 2)).clone_owned(), -&g.c);
        assert_eq!(j.view((3, 0), (2, 3)).clone_owned(), g.c.transpose());
        assert_eq!(j.view((3, 3), (2, 2)).clone_owned(), g.hy);
        let d = LocalModel::quadratic(&g).decomposition();
        assert_eq!(&d.s + &d.a, j);
        assert_eq!(d.a.view((0, 0), (3, 3)).amax(), 0.0);
    }

    #[test]
    fn jacobian_sim_rotation() {
        let j = m(&[&[0.0, -1.0], &[1.0, 0.0]]);
        let js = jacobian_sim(&j, 0.1, 0.0);
        assert!((&js - (&j + Matrix::identity(2, 2) * 0.05)).amax() < 1e-15);
        let e = eigenvalues(&js).unwrap();
        assert!(close(e[0], C64::new(0.05, 1.0), 1e-12));
        assert_eq!(jacobian_sim(&j, 0.0, 0.5), &j / 0.5);
    }

    #[test]
    fn jacobian_alt_bilinear_block() {
        let a = m(&[&[1.0, 2.0], &[0.5, -1.0]]);
        let g = BuiltinGame::bilinear(a.clone());
        let p = GamePoint::zeros(2, 2);
        let (h, b) = (0.1, 0.3);
        let ja = jacobian_alt(&g, &p, h, b).unwrap();
        let js = LocalModel::at(&g, &p).unwrap().js(h, b);
        let diff = &js - &ja;
        let want = a.transpose() * &a * (h / (1.0 - b).powi(2));
        assert!((diff.view((2, 2), (2, 2)).clone_owned() - want).amax() < 1e-14);
        assert_eq!(diff.view((0, 0), (2, 4)).amax(), 0.0);
        // h = 0
        let lm = LocalModel::at(&g, &p).unwrap();
        assert_eq!(lm.ja(0.0, b), lm.js(0.0, b));
    }

    #[test]
    fn decoupled_alt_equals_sim() {
        let g = QuadraticGame::new(
            Matrix::identity(2, 2),
            -Matrix::identity(1, 1),
            Matrix::zeros(2, 1),
        )
        .unwrap();
        let lm = LocalModel::quadratic(&g);
        assert_eq!(lm.ja(0.2, -0.4), lm.js(0.2, -0.4));
    }

    #[test]
    fn eigenvalue_examples() {
        let e = eigenvalues(&m(&[&[0.0, -1.0], &[1.0, 0.0]])).unwrap();
        assert!(close(e[0], C64::new(0.0, 1.0), 1e-15) && close(e[1], C64::new(0.0, -1.0), 1e-15));
        let e = eigenvalues(&Matrix::from_diagonal(&nalgebra::dvector![3.0, -1.0, 2.0])).unwrap();
        assert_eq!(
            e.iter().map(|c| c.re).collect::<Vec<_>>(),
            vec![3.0, 2.0, -1.0]
        );
    }

    #[test]
    fn assumption_examples() {
        let bil = LocalModel::at(
            &BuiltinGame::bilinear(m(&[&[1.0]])),
            &GamePoint::zeros(1, 1),
        )
        .unwrap();
        let a = check_assumptions(&bil.j(), &bil.decomposition()).unwrap();
        assert!(a.interaction && !a.generic && a.kernel_intersects);
        let pot = QuadraticGame::new(
            Matrix::identity(1, 1),
            -Matrix::identity(1, 1),
            Matrix::zeros(1, 1),
        )
        .unwrap();
        let lm = LocalModel::quadratic(&pot);
        assert!(
            !check_assumptions(&lm.j(), &lm.decomposition())
                .unwrap()
                .interaction
        );
        let g = random_quadratic(20, 20, 10, 10, 0.3, 5).unwrap();
        let lm = LocalModel::quadratic(&g);
        let a = check_assumptions(&lm.j(), &lm.decomposition()).unwrap();
        assert!(a.generic);
        assert!(!a.kernel_intersects);
    }

    #[test]
    fn hmax_examples() {
        let eigs = [C64::new(-0.1, 1.0), C64::new(-0.1, -1.0)];
        assert!((hmax_from_eigs(&eigs, 0.0) - 0.2 / 0.99).abs() < 1e-12);
        assert!(hmax_from_eigs(&eigs, -0.5) > hmax_from_eigs(&eigs, 0.0));
        assert!(hmax_from_eigs(&eigs, 0.0) > hmax_from_eigs(&eigs, 0.5));
        let bil = LocalModel::at(&BuiltinGame::XY, &GamePoint::zeros(1, 1)).unwrap();
        assert!(matches!(
            hmax_bound(&bil.j(), 0.0),
            Err(Error::AssumptionViolated(_))
        ));
    }

    #[test]
    fn optimal_beta_examples() {
        let j = m(&[&[-0.1, -1.0], &[1.0, -0.1]]);
        let l = C64::new(-0.1, 1.0);
        let b = optimal_beta_eig(l, 0.05);
        assert!(b > 0.0);
        let opt = optimal_beta(&j, 0.05).unwrap();
        assert!((opt.global - b).abs() < 2e-3, "{} vs {b}", opt.global);
        let d = 0.99;
        assert_eq!(optimal_beta_eig(l, 4.0 * 0.1 / d * 1.0001), -1.0);
    }

    #[test]
    fn bilinear_closed_forms() {
        let (a, b) = bilinear_eigs(1.0, 0.1, 0.0, Scheme::Simultaneous);
        assert!(close(a, C64::new(0.05, 1.0), 1e-15) && close(b, C64::new(0.05, -1.0), 1e-15));
        let (a, _) = bilinear_eigs(1.0, 0.1, 0.0, Scheme::Alternating);
        assert!(a.re.abs() < 1e-15 && (a.im.abs() - (1.0 - 0.0025f64).sqrt()).abs() < 1e-15);
        let (a, _) = bilinear_eigs(1.0, 0.01, -0.5, Scheme::Alternating);
        assert!(a.re < 0.0);
    }

    #[test]
    fn alt_rate_prediction_2d() {
        let (alpha, sigma, h) = (0.1, 1.0, 1e-3);
        let g = QuadraticGame::new(m(&[&[alpha]]), m(&[&[-alpha]]), m(&[&[sigma]])).unwrap();
        let p = alt_rate_prediction(&g, h, 0.0).unwrap();
        let e = &p.entries[0];
        assert!((e.lambda_s.re - -0.099505).abs() < 1e-9 && (e.lambda_s.im - 1.0001).abs() < 1e-9);
        assert!((e.predicted_literal - -0.100505).abs() < 1e-9);
        let exact = spectral_abscissa(&LocalModel::quadratic(&g).ja(h, 0.0)).unwrap();
        assert!((exact - p.predicted_abscissa).abs() < 1e-12);
        // h = 0: prediction is Re λ_S and J_A = J_S
        let p0 = alt_rate_prediction(&g, 0.0, 0.3).unwrap();
        assert_eq!(p0.entries[0].predicted, p0.entries[0].lambda_s.re);
    }

    #[test]
    fn alt_rate_preconditions() {
        let g = QuadraticGame::new_unchecked(
            Matrix::zeros(2, 2),
            Matrix::zeros(2, 2),
            Matrix::identity(2, 2),
        )
        .unwrap();
        assert!(matches!(
            alt_rate_prediction(&g, 0.01, 0.0),
            Err(Error::PreconditionViolated(_))
        ));
        let g = QuadraticGame::new_unchecked(
            Matrix::zeros(2, 2),
            Matrix::zeros(2, 2),
            m(&[&[1.0, 0.0], &[0.0, 0.0]]),
        )
        .unwrap();
        assert!(alt_rate_prediction(&g, 0.01, 0.0).is_err());
    }

    #[test]
    fn heatmap_examples() {
        let bil = LocalModel::at(
            &BuiltinGame::bilinear(m(&[&[1.0, 0.3], &[0.2, 2.0]])),
            &GamePoint::zeros(2, 2),
        )
        .unwrap();
        let cells = stability_heatmap(
            &bil,
            &[0.01, 0.1, 0.5],
            &[-0.5, 0.0, 0.5],
            Scheme::Simultaneous,
        )
        .unwrap();
        assert_eq!(cells.len(), 9);
        assert!(cells.iter().all(|c| c.abscissa >= 0.0));
        assert_eq!((cells[1].beta, cells[1].h), (-0.5, 0.1));
        let one = stability_heatmap(&bil, &[0.1], &[0.2], Scheme::Alternating).unwrap();
        assert_eq!(
            one[0].abscissa,
            spectral_abscissa(&bil.ja(0.1, 0.2)).unwrap()
        );
    }

    #[test]
    fn min_hb_examples() {
        assert!(min_hb_stability(1.0, 0.1, 1.0));
        assert!(!min_hb_stability(2.5, 0.1, 1.0));
        assert!(min_hb_stability(2.5, 0.5, 1.0));
        assert!(!min_hb_stability(2.2, 0.1, 1.0));
        assert!(!min_hb_stability(3.0, 0.5, 1.0));
    }

    #[test]
    fn report_serializes_complex() {
        let g = random_quadratic(3, 3, 2, 2, 0.5, 2).unwrap();
        let r = spectral_report(&LocalModel::quadratic(&g), 0.01, 0.2).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert!(v["eigs_j"][0]["re"].is_number() && v["eigs_j"][0]["im"].is_number());
        assert_eq!(r.eigs_j.len(), 6);
        assert_eq!(
            r.abscissa_js,
            r.eigs_js
                .iter()
                .map(|c| c.re)
                .fold(f64::NEG_INFINITY, f64::max)
        );
    }
}
