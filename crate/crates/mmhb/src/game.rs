//! Payoff functions `f(x, y)` with closed-form first and second derivatives.
//!
//! x is the minimising player, y the maximising one. Every game exposes the
//! blocks ∇²ₓf, ∇ₓᵧf, ∇²ᵧf; the mixed block ∇ᵧₓf is always taken as the
//! transpose of ∇ₓᵧf.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// A joint iterate `(x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GamePoint {
    pub x: Vector,
    pub y: Vector,
}

impl GamePoint {
    pub fn new(x: Vector, y: Vector) -> Self {
        Self { x, y }
    }

    pub fn from_slices(x: &[f64], y: &[f64]) -> Self {
        Self::new(Vector::from_column_slice(x), Vector::from_column_slice(y))
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self::new(Vector::zeros(n), Vector::zeros(m))
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.x.len(), self.y.len())
    }

    /// Euclidean norm of the stacked vector (x, y).
    pub fn norm(&self) -> f64 {
        (self.x.norm_squared() + self.y.norm_squared()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.x.amax().max(self.y.amax())
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.y.iter()).all(|v| v.is_finite())
    }

    pub fn dist(&self, other: &GamePoint) -> f64 {
        ((&self.x - &other.x).norm_squared() + (&self.y - &other.y).norm_squared()).sqrt()
    }

    /// `self + s * d` for a direction given as a point.
    pub fn axpy(&self, s: f64, d: &GamePoint) -> GamePoint {
        GamePoint::new(&self.x + &d.x * s, &self.y + &d.y * s)
    }

    /// Flattened `[x; y]`.
    pub fn stacked(&self) -> Vector {
        let (n, m) = self.dims();
        Vector::from_iterator(n + m, self.x.iter().chain(self.y.iter()).copied())
    }
}

/// The three second-derivative blocks at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Hessians {
    pub hxx: Matrix,
    pub hxy: Matrix,
    pub hyy: Matrix,
}

/// Products `Hxx·u`, `Hxy·v`, `Hxyᵀ·u`, `Hyy·v`.
#[derive(Clone, Debug)]
pub struct HessProducts {
    pub hxx_u: Vector,
    pub hxy_v: Vector,
    pub hyx_u: Vector,
    pub hyy_v: Vector,
}

pub trait Game: Send + Sync {
    fn dims(&self) -> (usize, usize);

    fn value(&self, x: &Vector, y: &Vector) -> f64;

    fn grad(&self, x: &Vector, y: &Vector) -> (Vector, Vector);

    fn second_derivs(&self, x: &Vector, y: &Vector) -> Hessians;

    /// Hessian-vector products; games with large constant Hessians override
    /// this to avoid materialising the blocks.
    fn hess_products(&self, x: &Vector, y: &Vector, u: &Vector, v: &Vector) -> HessProducts {
        let h = self.second_derivs(x, y);
        HessProducts {
            hxx_u: &h.hxx * u,
            hxy_v: &h.hxy * v,
            hyx_u: h.hxy.tr_mul(u),
            hyy_v: &h.hyy * v,
        }
    }

    fn label(&self) -> String;

    /// Whether the point lies in the game's stated domain (only NegXY2 has one).
    fn in_domain(&self, _x: &Vector, _y: &Vector) -> bool {
        true
    }
}

fn check_dims(game: &dyn Game, p: &GamePoint) -> Result<()> {
    let (n, m) = game.dims();
    let (gn, gm) = p.dims();
    if (n, m) != (gn, gm) {
        return Err(Error::DimensionMismatch {
            expected_n: n,
            expected_m: m,
            got_n: gn,
            got_m: gm,
        });
    }
    Ok(())
}

/// `f(x, y)` with a dimension check.
pub fn eval(game: &dyn Game, p: &GamePoint) -> Result<f64> {
    check_dims(game, p)?;
    Ok(game.value(&p.x, &p.y))
}

/// `(∇ₓf, ∇ᵧf)` with a dimension check.
pub fn grad(game: &dyn Game, p: &GamePoint) -> Result<(Vector, Vector)> {
    check_dims(game, p)?;
    Ok(game.grad(&p.x, &p.y))
}

/// `(∇²ₓf, ∇ₓᵧf, ∇²ᵧf)` with a dimension check.
pub fn second_derivs(game: &dyn Game, p: &GamePoint) -> Result<Hessians> {
    check_dims(game, p)?;
    Ok(game.second_derivs(&p.x, &p.y))
}

// g(z) = ½z² − ½z⁴ + ⅙z⁶ (LimitCycle2D)
fn g_lc(z: f64) -> f64 {
    0.5 * z * z - 0.5 * z.powi(4) + z.powi(6) / 6.0
}
fn g_lc_d1(z: f64) -> f64 {
    z - 2.0 * z.powi(3) + z.powi(5)
}
fn g_lc_d2(z: f64) -> f64 {
    1.0 - 6.0 * z * z + 5.0 * z.powi(4)
}

// φ₁(z) = ¼z² − ½z⁴ + ⅙z⁶ (Appendix A, first game)
fn phi1(z: f64) -> f64 {
    0.25 * z * z - 0.5 * z.powi(4) + z.powi(6) / 6.0
}
fn phi1_d1(z: f64) -> f64 {
    0.5 * z - 2.0 * z.powi(3) + z.powi(5)
}
fn phi1_d2(z: f64) -> f64 {
    0.5 - 6.0 * z * z + 5.0 * z.powi(4)
}

// φ₂(z) = ½z² − ¼z⁴ + ⅙z⁶ − ⅛z⁸ (Appendix A, second game)
fn phi2(z: f64) -> f64 {
    0.5 * z * z - 0.25 * z.powi(4) + z.powi(6) / 6.0 - z.powi(8) / 8.0
}
fn phi2_d1(z: f64) -> f64 {
    z - z.powi(3) + z.powi(5) - z.powi(7)
}
fn phi2_d2(z: f64) -> f64 {
    1.0 - 3.0 * z * z + 5.0 * z.powi(4) - 7.0 * z.powi(6)
}

/// Closed-form test games.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id")]
pub enum BuiltinGame {
    /// f = xᵀAy
    #[serde(rename = "bilinear")]
    Bilinear {
        #[serde(with = "rows")]
        a: Matrix,
    },
    /// f = xy
    #[serde(rename = "xy")]
    XY,
    /// f = −xy², meaningful on x ≥ 0
    #[serde(rename = "neg-xy2")]
    NegXY2,
    /// f = 3x(4y − 0.45) + g(x) − g(y), g(z) = ½z² − ½z⁴ + ⅙z⁶
    #[serde(rename = "limit-cycle-2d")]
    LimitCycle2D,
    /// f = x(y − 0.45) + φ₁(x) − φ₁(y), φ₁(z) = ¼z² − ½z⁴ + ⅙z⁶
    #[serde(rename = "appendix-a1")]
    AppendixA1,
    /// f = xy + φ₂(x) − φ₂(y), φ₂(z) = ½z² − ¼z⁴ + ⅙z⁶ − ⅛z⁸
    #[serde(rename = "appendix-a2")]
    AppendixA2,
    /// f = ax² − by² + cxy
    #[serde(rename = "example-i1")]
    ExampleI1 { a: f64, b: f64, c: f64 },
}

impl BuiltinGame {
    pub fn bilinear(a: Matrix) -> Self {
        BuiltinGame::Bilinear { a }
    }

    /// The counterexample constants a ≃ 2.537, b = 0.0003, c = 0.801.
    pub fn example_i1() -> Self {
        BuiltinGame::ExampleI1 {
            a: 2.537,
            b: 0.0003,
            c: 0.801,
        }
    }

    fn scalar(v: &Vector) -> f64 {
        v[0]
    }
}

fn s1(v: f64) -> Vector {
    Vector::from_element(1, v)
}

fn m1(v: f64) -> Matrix {
    Matrix::from_element(1, 1, v)
}

impl Game for BuiltinGame {
    fn dims(&self) -> (usize, usize) {
        match self {
            BuiltinGame::Bilinear { a } => (a.nrows(), a.ncols()),
            _ => (1, 1),
        }
    }

    fn value(&self, x: &Vector, y: &Vector) -> f64 {
        if let BuiltinGame::Bilinear { a } = self {
            return x.dot(&(a * y));
        }
        let (x, y) = (Self::scalar(x), Self::scalar(y));
        match self {
            BuiltinGame::XY => x * y,
            BuiltinGame::NegXY2 => -x * y * y,
            BuiltinGame::LimitCycle2D => 3.0 * x * (4.0 * y - 0.45) + g_lc(x) - g_lc(y),
            BuiltinGame::AppendixA1 => x * (y - 0.45) + phi1(x) - phi1(y),
            BuiltinGame::AppendixA2 => x * y + phi2(x) - phi2(y),
            BuiltinGame::ExampleI1 { a, b, c } => a * x * x - b * y * y + c * x * y,
            BuiltinGame::Bilinear { .. } => unreachable!(),
        }
    }

    fn grad(&self, x: &Vector, y: &Vector) -> (Vector, Vector) {
        if let BuiltinGame::Bilinear { a } = self {
            return (a * y, a.tr_mul(x));
        }
        let (x, y) = (Self::scalar(x), Self::scalar(y));
        let (gx, gy) = match self {
            BuiltinGame::XY => (y, x),
            BuiltinGame::NegXY2 => (-y * y, -2.0 * x * y),
            BuiltinGame::LimitCycle2D => (12.0 * y - 1.35 + g_lc_d1(x), 12.0 * x - g_lc_d1(y)),
            BuiltinGame::AppendixA1 => (y - 0.45 + phi1_d1(x), x - phi1_d1(y)),
            BuiltinGame::AppendixA2 => (y + phi2_d1(x), x - phi2_d1(y)),
            BuiltinGame::ExampleI1 { a, b, c } => (2.0 * a * x + c * y, -2.0 * b * y + c * x),
            BuiltinGame::Bilinear { .. } => unreachable!(),
        };
        (s1(gx), s1(gy))
    }

    fn second_derivs(&self, x: &Vector, y: &Vector) -> Hessians {
        if let BuiltinGame::Bilinear { a } = self {
            return Hessians {
                hxx: Matrix::zeros(a.nrows(), a.nrows()),
                hxy: a.clone(),
                hyy: Matrix::zeros(a.ncols(), a.ncols()),
            };
        }
        let (x, y) = (Self::scalar(x), Self::scalar(y));
        let (hxx, hxy, hyy) = match self {
            BuiltinGame::XY => (0.0, 1.0, 0.0),
            BuiltinGame::NegXY2 => (0.0, -2.0 * y, -2.0 * x),
            BuiltinGame::LimitCycle2D => (g_lc_d2(x), 12.0, -g_lc_d2(y)),
            BuiltinGame::AppendixA1 => (phi1_d2(x), 1.0, -phi1_d2(y)),
            BuiltinGame::AppendixA2 => (phi2_d2(x), 1.0, -phi2_d2(y)),
            BuiltinGame::ExampleI1 { a, b, c } => (2.0 * a, *c, -2.0 * b),
            BuiltinGame::Bilinear { .. } => unreachable!(),
        };
        Hessians {
            hxx: m1(hxx),
            hxy: m1(hxy),
            hyy: m1(hyy),
        }
    }

    fn label(&self) -> String {
        match self {
            BuiltinGame::Bilinear { a } => format!("bilinear-{}x{}", a.nrows(), a.ncols()),
            BuiltinGame::XY => "xy".into(),
            BuiltinGame::NegXY2 => "neg-xy2".into(),
            BuiltinGame::LimitCycle2D => "limit-cycle-2d".into(),
            BuiltinGame::AppendixA1 => "appendix-a1".into(),
            BuiltinGame::AppendixA2 => "appendix-a2".into(),
            BuiltinGame::ExampleI1 { .. } => "example-i1".into(),
        }
    }

    fn in_domain(&self, x: &Vector, _y: &Vector) -> bool {
        match self {
            BuiltinGame::NegXY2 => x[0] >= 0.0,
            _ => true,
        }
    }
}

/// f = ½xᵀHx·x + ½yᵀHy·y + xᵀC·y, the local model around an equilibrium at
/// the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticGame {
    pub hx: Matrix,
    pub hy: Matrix,
    pub c: Matrix,
}

impl QuadraticGame {
    /// Validates shapes, symmetry, and the semidefiniteness that makes the
    /// origin a local Nash equilibrium.
    pub fn new(hx: Matrix, hy: Matrix, c: Matrix) -> Result<Self> {
        let g = Self::new_unchecked(hx, hy, c)?;
        let scale = |m: &Matrix| 1e-10 * (1.0 + m.amax());
        for (name, m, sign) in [("Hx", &g.hx, 1.0), ("Hy", &g.hy, -1.0)] {
            if (m - m.transpose()).amax() > scale(m) {
                return Err(Error::InvalidParams(format!("{name} is not symmetric")));
            }
            if m.nrows() > 0 {
                let min = SymmetricEigen::new(m * sign).eigenvalues.min();
                if min < -scale(m) {
                    let want = if sign > 0.0 { "positive" } else { "negative" };
                    return Err(Error::InvalidParams(format!(
                        "{name} is not {want} semidefinite"
                    )));
                }
            }
        }
        Ok(g)
    }

    /// Shape checks only.
    pub fn new_unchecked(hx: Matrix, hy: Matrix, c: Matrix) -> Result<Self> {
        let (n, m) = (c.nrows(), c.ncols());
        if hx.shape() != (n, n) || hy.shape() != (m, m) {
            return Err(Error::InvalidParams(format!(
                "shapes Hx {:?}, Hy {:?}, C {:?} are inconsistent",
                hx.shape(),
                hy.shape(),
                c.shape()
            )));
        }
        Ok(Self { hx, hy, c })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

impl Game for QuadraticGame {
    fn dims(&self) -> (usize, usize) {
        (self.c.nrows(), self.c.ncols())
    }

    fn value(&self, x: &Vector, y: &Vector) -> f64 {
        0.5 * x.dot(&(&self.hx * x)) + 0.5 * y.dot(&(&self.hy * y)) + x.dot(&(&self.c * y))
    }

    fn grad(&self, x: &Vector, y: &Vector) -> (Vector, Vector) {
        (&self.hx * x + &self.c * y, &self.hy * y + self.c.tr_mul(x))
    }

    fn second_derivs(&self, _x: &Vector, _y: &Vector) -> Hessians {
        Hessians {
            hxx: self.hx.clone(),
            hxy: self.c.clone(),
            hyy: self.hy.clone(),
        }
    }

    fn hess_products(&self, _x: &Vector, _y: &Vector, u: &Vector, v: &Vector) -> HessProducts {
        HessProducts {
            hxx_u: &self.hx * u,
            hxy_v: &self.c * v,
            hyx_u: self.c.tr_mul(u),
            hyy_v: &self.hy * v,
        }
    }

    fn label(&self) -> String {
        let (n, m) = self.dims();
        format!("quadratic-{n}x{m}")
    }
}

#[derive(Serialize, Deserialize)]
struct QuadraticDoc {
    n: usize,
    m: usize,
    #[serde(rename = "Hx", with = "rows")]
    hx: Matrix,
    #[serde(rename = "Hy", with = "rows")]
    hy: Matrix,
    #[serde(rename = "C", with = "rows")]
    c: Matrix,
}

impl Serialize for QuadraticGame {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (n, m) = self.dims();
        QuadraticDoc {
            n,
            m,
            hx: self.hx.clone(),
            hy: self.hy.clone(),
            c: self.c.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for QuadraticGame {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = QuadraticDoc::deserialize(d)?;
        if doc.c.shape() != (doc.n, doc.m) {
            return Err(serde::de::Error::custom(format!(
                "C has shape {:?}, expected ({}, {})",
                doc.c.shape(),
                doc.n,
                doc.m
            )));
        }
        QuadraticGame::new_unchecked(doc.hx, doc.hy, doc.c).map_err(serde::de::Error::custom)
    }
}

/// Matrices as row-major nested arrays.
pub(crate) mod rows {
    use super::Matrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    // filled row by row so the stream layout is independent of storage order
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = StandardNormal.sample(rng);
        }
    }
    m
}

fn symmetrize(m: Matrix) -> Matrix {
    (&m + m.transpose()) * 0.5
}

/// Seeded random quadratic game: Hx = α·AAᵀ (A is n×rank_x), Hy = −α·BBᵀ
/// (B is m×rank_y), C dense; all entries standard normal.
pub fn random_quadratic(
    n: usize,
    m: usize,
    rank_x: usize,
    rank_y: usize,
    alpha: f64,
    seed: u64,
) -> Result<QuadraticGame> {
    if rank_x > n || rank_y > m {
        return Err(Error::InvalidRank(format!(
            "rank_x={rank_x} (n={n}), rank_y={rank_y} (m={m})"
        )));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "alpha must be finite and >= 0, got {alpha}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = gaussian_matrix(&mut rng, n, rank_x);
    let b = gaussian_matrix(&mut rng, m, rank_y);
    let c = gaussian_matrix(&mut rng, n, m);
    let hx = symmetrize(&a * a.transpose() * alpha);
    let hy = symmetrize(&b * b.transpose() * -alpha);
    QuadraticGame::new_unchecked(hx, hy, c)
}
