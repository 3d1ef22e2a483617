//! Ambient models: semidirect products `R^2 ⋊_A R` with their canonical
//! left-invariant metric, frame-defined left-invariant metrics on the
//! universal cover of SL(2,R), and the product `S^2(κ) × R`.
//!
//! Points of a semidirect model live in the global chart `(x, y, z)`. The
//! group law is `(p1, z1) * (p2, z2) = (p1 + e^{z1 A} p2, z1 + z2)` and the
//! left-invariant frame is `E1, E2` = columns of `e^{zA}`, `E3 = ∂z`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinate Christoffel symbols, indexed `[k][i][j]` for `Γ^k_ij`.
pub type Christoffel = [[[f64; 3]; 3]; 3];

/// Real 2×2 matrix `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Matrix2 {
    pub const IDENTITY: Matrix2 = Matrix2::new(1.0, 0.0, 0.0, 1.0);
    pub const ZERO: Matrix2 = Matrix2::new(0.0, 0.0, 0.0, 0.0);

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    pub fn from_rows(rows: [[f64; 2]; 2]) -> Self {
        Self::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1])
    }

    pub fn diag(a: f64, d: f64) -> Self {
        Self::new(a, 0.0, 0.0, d)
    }

    pub fn rows(&self) -> [[f64; 2]; 2] {
        [[self.a, self.b], [self.c, self.d]]
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.a, self.c, self.b, self.d)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(s * self.a, s * self.b, s * self.c, s * self.d)
    }

    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(Self::new(self.d, -self.b, -self.c, self.a).scale(1.0 / det))
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1]]
    }

    /// Quadratic form `vᵀ M w`.
    pub fn bilinear(&self, v: [f64; 2], w: [f64; 2]) -> f64 {
        let mw = self.apply(w);
        v[0] * mw[0] + v[1] * mw[1]
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        (self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }

    /// Matrix whose columns are `u` and `v`.
    pub fn from_columns(u: [f64; 2], v: [f64; 2]) -> Self {
        Self::new(u[0], v[0], u[1], v[1])
    }
}

impl Add for Matrix2 {
    type Output = Matrix2;
    fn add(self, o: Matrix2) -> Matrix2 {
        Matrix2::new(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
    }
}

impl Sub for Matrix2 {
    type Output = Matrix2;
    fn sub(self, o: Matrix2) -> Matrix2 {
        Matrix2::new(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }
}

impl Neg for Matrix2 {
    type Output = Matrix2;
    fn neg(self) -> Matrix2 {
        self.scale(-1.0)
    }
}

impl Mul for Matrix2 {
    type Output = Matrix2;
    fn mul(self, o: Matrix2) -> Matrix2 {
        Matrix2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}

/// Half-width of the discriminant band handled by the power series.
const SERIES_BAND: f64 = 1e-8;

/// `e^{zA}`.
///
/// Writes `A = (tr A / 2) I + N` with `N` traceless, so `N² = δ I` where
/// `δ = ((a - d)/2)² + bc`, and `e^{zA} = e^{z tr A / 2} (C I + S N)`. The
/// coefficients are `cosh`/`sinh` for `δ > 0`, `cos`/`sin` for `δ < 0` and a
/// power series in `z²δ` when `|δ| ≤ 1e-8`.
pub fn mat_exp(m: &Matrix2, z: f64) -> Matrix2 {
    let half = 0.5 * m.trace();
    let n = Matrix2::new(0.5 * (m.a - m.d), m.b, m.c, -0.5 * (m.a - m.d));
    let delta = n.a * n.a + n.b * n.c;
    let (cc, ss) = if delta.abs() <= SERIES_BAND {
        let mu = z * z * delta;
        let mut c_sum = 0.0;
        let mut s_sum = 0.0;
        let mut term = 1.0; // mu^k / (2k)!
        for k in 0..60 {
            let kf = k as f64;
            c_sum += term;
            let s_term = term / (2.0 * kf + 1.0);
            s_sum += s_term;
            if term.abs() <= 1e-18 * c_sum.abs() && k > 0 {
                break;
            }
            term *= mu / ((2.0 * kf + 1.0) * (2.0 * kf + 2.0));
        }
        (c_sum, z * s_sum)
    } else if delta > 0.0 {
        let r = delta.sqrt();
        ((z * r).cosh(), (z * r).sinh() / r)
    } else {
        let r = (-delta).sqrt();
        ((z * r).cos(), (z * r).sin() / r)
    };
    let scale = (z * half).exp();
    Matrix2::new(
        scale * (cc + ss * n.a),
        scale * ss * n.b,
        scale * ss * n.c,
        scale * (cc + ss * n.d),
    )
}

/// A point `(x, y, z)` in the global chart of a semidirect model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point {
    pub const ORIGIN: Point = Point::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn horizontal(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// `{∂x, ∂y, ∂z}`
    Coordinate,
    /// `{E1, E2, E3}`
    Frame,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentVec {
    pub components: [f64; 3],
    pub basis: Basis,
}

impl TangentVec {
    pub fn coordinate(components: [f64; 3]) -> Self {
        Self { components, basis: Basis::Coordinate }
    }

    pub fn frame(components: [f64; 3]) -> Self {
        Self { components, basis: Basis::Frame }
    }

    /// Coordinate components at `p`.
    pub fn to_coordinate(&self, m: &SemidirectModel, p: &Point) -> TangentVec {
        match self.basis {
            Basis::Coordinate => *self,
            Basis::Frame => {
                let e = m.exp(p.z);
                let [u, v, w] = self.components;
                let h = e.apply([u, v]);
                TangentVec::coordinate([h[0], h[1], w])
            }
        }
    }

    /// Frame components at `p`.
    pub fn to_frame(&self, m: &SemidirectModel, p: &Point) -> TangentVec {
        match self.basis {
            Basis::Frame => *self,
            Basis::Coordinate => {
                let e = m.exp(-p.z);
                let [u, v, w] = self.components;
                let h = e.apply([u, v]);
                TangentVec::frame([h[0], h[1], w])
            }
        }
    }
}

/// `R^2 ⋊_A R` with its canonical left-invariant metric.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemidirectModel {
    pub a: Matrix2,
}

impl SemidirectModel {
    pub fn new(a: Matrix2) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::InvalidInput("matrix A has non-finite entries".into()));
        }
        Ok(Self { a })
    }

    pub fn trace(&self) -> f64 {
        self.a.trace()
    }

    pub fn is_unimodular(&self) -> bool {
        self.trace() == 0.0
    }

    /// `e^{zA}`
    pub fn exp(&self, z: f64) -> Matrix2 {
        mat_exp(&self.a, z)
    }

    pub fn group_mul(&self, p: &Point, q: &Point) -> Point {
        let h = self.exp(p.z).apply(q.horizontal());
        Point::new(p.x + h[0], p.y + h[1], p.z + q.z)
    }

    pub fn group_inv(&self, p: &Point) -> Point {
        let h = self.exp(-p.z).apply(p.horizontal());
        Point::new(-h[0], -h[1], -p.z)
    }

    /// Differential of the left translation `l_p`, acting on coordinate vectors.
    pub fn left_translation_differential(&self, p: &Point, v: &TangentVec) -> TangentVec {
        debug_assert_eq!(v.basis, Basis::Coordinate);
        let [u, w, s] = v.components;
        let h = self.exp(p.z).apply([u, w]);
        TangentVec::coordinate([h[0], h[1], s])
    }

    /// The orthonormal frame `E1, E2, E3` at `p` in coordinates.
    pub fn frame_at(&self, p: &Point) -> [TangentVec; 3] {
        let e = self.exp(p.z);
        [
            TangentVec::coordinate([e.a, e.c, 0.0]),
            TangentVec::coordinate([e.b, e.d, 0.0]),
            TangentVec::coordinate([0.0, 0.0, 1.0]),
        ]
    }

    /// Horizontal block `G(z) = e^{-zAᵀ} e^{-zA}` of the metric.
    pub fn horizontal_metric(&self, z: f64) -> Matrix2 {
        let m = self.exp(-z);
        m.transpose() * m
    }

    /// `G'(z) = -e^{-zAᵀ} (A + Aᵀ) e^{-zA}`.
    pub fn horizontal_metric_dz(&self, z: f64) -> Matrix2 {
        let m = self.exp(-z);
        let s = self.a + self.a.transpose();
        -(m.transpose() * s * m)
    }

    /// `G''(z) = e^{-zAᵀ} (Aᵀ S + S A) e^{-zA}` with `S = A + Aᵀ`.
    pub fn horizontal_metric_dzz(&self, z: f64) -> Matrix2 {
        let m = self.exp(-z);
        let s = self.a + self.a.transpose();
        m.transpose() * (self.a.transpose() * s + s * self.a) * m
    }

    /// Coordinate components of the metric at `p`.
    pub fn metric_at(&self, p: &Point) -> Matrix3<f64> {
        let g = self.horizontal_metric(p.z);
        Matrix3::new(g.a, g.b, 0.0, g.c, g.d, 0.0, 0.0, 0.0, 1.0)
    }

    /// Riemannian volume density `e^{-z tr A}`.
    pub fn volume_density(&self, z: f64) -> f64 {
        (-z * self.trace()).exp()
    }

    /// Coordinate Christoffel symbols. Only `∂z` derivatives of the metric
    /// are nonzero: `Γ^z_ab = -G'_ab / 2` and `Γ^a_bz = Γ^a_zb = (G⁻¹G')^a_b / 2`.
    pub fn christoffel_at(&self, z: f64) -> Christoffel {
        let gp = self.horizontal_metric_dz(z);
        let ginv = self.exp(z) * self.exp(z).transpose();
        let k = ginv * gp;
        let kr = k.rows();
        let gr = gp.rows();
        let mut gam = [[[0.0; 3]; 3]; 3];
        for a in 0..2 {
            for b in 0..2 {
                gam[2][a][b] = -0.5 * gr[a][b];
                gam[a][b][2] = 0.5 * kr[a][b];
                gam[a][2][b] = 0.5 * kr[a][b];
            }
        }
        gam
    }

    /// Killing field generated by left multiplication with `exp(t(w, s))`,
    /// i.e. `d/dt|0 [exp(t(w,s)) * p] = (w + s A (x, y), s)`.
    pub fn right_invariant_field(&self, w: [f64; 2], s: f64, p: &Point) -> TangentVec {
        let ap = self.a.apply(p.horizontal());
        TangentVec::coordinate([w[0] + s * ap[0], w[1] + s * ap[1], s])
    }

    /// `g(u, v)` at `p` for coordinate vectors.
    pub fn inner(&self, p: &Point, u: &TangentVec, v: &TangentVec) -> f64 {
        let u = u.to_coordinate(self, p).components;
        let v = v.to_coordinate(self, p).components;
        let g = self.horizontal_metric(p.z);
        g.bilinear([u[0], u[1]], [v[0], v[1]]) + u[2] * v[2]
    }
}

/// A coordinate expression of a Riemannian metric on a chart of R³.
pub trait CoordinateMetric {
    fn metric(&self, p: &Point) -> Matrix3<f64>;
    fn christoffel(&self, p: &Point) -> Christoffel;
}

impl CoordinateMetric for SemidirectModel {
    fn metric(&self, p: &Point) -> Matrix3<f64> {
        self.metric_at(p)
    }

    fn christoffel(&self, p: &Point) -> Christoffel {
        self.christoffel_at(p.z)
    }
}

/// Left-invariant metric on the universal cover of SL(2,R) making the basis
/// `E1 = diag(1,-1)`, `E2 = [[0,1],[1,0]]`, `E3 = [[0,-1],[1,0]]` orthogonal
/// with lengths `λ1, λ2, λ3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sl2FrameMetric {
    pub lambda: [f64; 3],
}

impl Sl2FrameMetric {
    pub fn new(lambda: [f64; 3]) -> Result<Self> {
        for (i, l) in lambda.iter().enumerate() {
            if !l.is_finite() || *l <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "lambda[{i}] = {l} must be a positive finite number"
                )));
            }
        }
        Ok(Self { lambda })
    }

    /// The metric with isometry group of dimension four, isometric to the
    /// semidirect model with `A = [[2,0],[2,0]]`.
    pub fn is_standard(&self) -> bool {
        self.lambda.iter().all(|l| (l - 1.0).abs() <= 1e-12)
    }
}

/// Riemannian product `S^2(κ) × R`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductS2R {
    pub kappa: f64,
}

impl ProductS2R {
    pub fn new(kappa: f64) -> Result<Self> {
        if !kappa.is_finite() || kappa <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "kappa = {kappa} must be a positive finite number"
            )));
        }
        Ok(Self { kappa })
    }
}

/// The matrix `A` for which the semidirect model is isometric to SL(2,R)~
/// with `λ = (1, 1, 1)`.
pub const SL2_SEMIDIRECT_A: Matrix2 = Matrix2::new(2.0, 0.0, 2.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MetricModel {
    Semidirect(SemidirectModel),
    Sl2(Sl2FrameMetric),
    S2xR(ProductS2R),
}

/// JSON form of a [`MetricModel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum MetricSpec {
    #[serde(rename = "semidirect")]
    Semidirect {
        #[serde(rename = "A")]
        a: [[f64; 2]; 2],
    },
    #[serde(rename = "sl2tilde")]
    Sl2Tilde { lambda: [f64; 3] },
    #[serde(rename = "s2xr")]
    S2xR { kappa: f64 },
}

impl TryFrom<MetricSpec> for MetricModel {
    type Error = Error;

    fn try_from(spec: MetricSpec) -> Result<Self> {
        match spec {
            MetricSpec::Semidirect { a } => {
                Ok(MetricModel::Semidirect(SemidirectModel::new(Matrix2::from_rows(a))?))
            }
            MetricSpec::Sl2Tilde { lambda } => Ok(MetricModel::Sl2(Sl2FrameMetric::new(lambda)?)),
            MetricSpec::S2xR { kappa } => Ok(MetricModel::S2xR(ProductS2R::new(kappa)?)),
        }
    }
}

impl From<&MetricModel> for MetricSpec {
    fn from(m: &MetricModel) -> Self {
        match m {
            MetricModel::Semidirect(s) => MetricSpec::Semidirect { a: s.a.rows() },
            MetricModel::Sl2(s) => MetricSpec::Sl2Tilde { lambda: s.lambda },
            MetricModel::S2xR(p) => MetricSpec::S2xR { kappa: p.kappa },
        }
    }
}

impl MetricModel {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: MetricSpec = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("metric specification: {e}")))?;
        spec.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&MetricSpec::from(self)).expect("metric spec serializes")
    }

    /// Semidirect model isometric to this one, where one is available.
    pub fn semidirect_model(&self) -> Result<SemidirectModel> {
        match self {
            MetricModel::Semidirect(s) => Ok(*s),
            MetricModel::Sl2(s) if s.is_standard() => SemidirectModel::new(SL2_SEMIDIRECT_A),
            MetricModel::Sl2(_) => Err(Error::Unsupported(
                "SL(2,R)~ coordinates exist only for lambda = (1,1,1)".into(),
            )),
            MetricModel::S2xR(_) => {
                Err(Error::Unsupported("S^2 x R is not a semidirect product".into()))
            }
        }
    }
}

/// Structure constants `C^k_ij` (`[E_i, E_j] = C^k_ij E_k`, stored
/// `[k][i][j]`) and frame inner products `g_ij` of a left-invariant frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameMetricData {
    pub structure: [[[f64; 3]; 3]; 3],
    pub metric: Matrix3<f64>,
}

impl FrameMetricData {
    pub fn new(structure: [[[f64; 3]; 3]; 3], metric: Matrix3<f64>) -> Result<Self> {
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let (c, ct) = (structure[k][i][j], structure[k][j][i]);
                    if !c.is_finite() || (c + ct).abs() > 1e-14 * (1.0 + c.abs()) {
                        return Err(Error::InvalidInput(format!(
                            "structure constants must be finite and antisymmetric (k={k}, i={i}, j={j})"
                        )));
                    }
                }
            }
        }
        if (metric - metric.transpose()).abs().max() > 1e-14 * (1.0 + metric.abs().max()) {
            return Err(Error::InvalidInput("frame metric must be symmetric".into()));
        }
        if metric.cholesky().is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { structure, metric })
    }

    /// Brackets `[E3,E1] = aE1 + cE2`, `[E3,E2] = bE1 + dE2`, orthonormal frame.
    pub fn semidirect(m: &SemidirectModel) -> Self {
        let Matrix2 { a, b, c, d } = m.a;
        let mut s = [[[0.0; 3]; 3]; 3];
        set_bracket(&mut s, 2, 0, [a, c, 0.0]);
        set_bracket(&mut s, 2, 1, [b, d, 0.0]);
        Self { structure: s, metric: Matrix3::identity() }
    }

    /// Brackets `[E1,E2] = -2E3`, `[E2,E3] = 2E1`, `[E3,E1] = 2E2` with
    /// `g_ii = λ_i²`.
    pub fn sl2(m: &Sl2FrameMetric) -> Self {
        let mut s = [[[0.0; 3]; 3]; 3];
        set_bracket(&mut s, 0, 1, [0.0, 0.0, -2.0]);
        set_bracket(&mut s, 1, 2, [2.0, 0.0, 0.0]);
        set_bracket(&mut s, 2, 0, [0.0, 2.0, 0.0]);
        let [l1, l2, l3] = m.lambda;
        Self {
            structure: s,
            metric: Matrix3::from_diagonal(&nalgebra::Vector3::new(l1 * l1, l2 * l2, l3 * l3)),
        }
    }

    /// `⟨[E_i, E_j], E_l⟩`
    pub fn bracket_lowered(&self, i: usize, j: usize, l: usize) -> f64 {
        (0..3).map(|k| self.structure[k][i][j] * self.metric[(k, l)]).sum()
    }
}

fn set_bracket(s: &mut [[[f64; 3]; 3]; 3], i: usize, j: usize, coeffs: [f64; 3]) {
    for k in 0..3 {
        s[k][i][j] = coeffs[k];
        s[k][j][i] = -coeffs[k];
    }
}

/// Frame data for a Lie-group model.
pub fn frame_data(model: &MetricModel) -> Result<FrameMetricData> {
    match model {
        MetricModel::Semidirect(m) => Ok(FrameMetricData::semidirect(m)),
        MetricModel::Sl2(m) => Ok(FrameMetricData::sl2(m)),
        MetricModel::S2xR(_) => Err(Error::Unsupported(
            "S^2 x R carries no left-invariant frame".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: &Matrix2, b: &Matrix2, tol: f64) -> bool {
        (*a - *b).norm() <= tol
    }

    #[test]
    fn exp_at_zero_is_identity() {
        for m in [Matrix2::new(1.0, 2.0, 3.0, 4.0), SL2_SEMIDIRECT_A, Matrix2::ZERO] {
            assert_eq!(mat_exp(&m, 0.0), Matrix2::IDENTITY);
        }
    }

    #[test]
    fn exp_of_idempotent_like_matrix() {
        // A² = 2A, hence e^{zA} = I + ((e^{2z} - 1)/2) A.
        for z in [-1.5f64, -0.3, 0.0, 0.7, 2.0] {
            let e2 = (2.0 * z).exp();
            let want = Matrix2::new(e2, 0.0, e2 - 1.0, 1.0);
            assert!(close(&mat_exp(&SL2_SEMIDIRECT_A, z), &want, 1e-13 * e2.max(1.0)));
        }
    }

    #[test]
    fn exp_rotation_quarter_turn() {
        let j = Matrix2::new(0.0, -1.0, 1.0, 0.0);
        assert!(close(&mat_exp(&j, PI / 2.0), &j, 1e-15));
    }

    #[test]
    fn exp_nilpotent_uses_series() {
        let n = Matrix2::new(0.0, 1.0, 0.0, 0.0);
        let e = mat_exp(&n, 3.0);
        assert_eq!(e, Matrix2::new(1.0, 3.0, 0.0, 1.0));
        // Just inside and just outside the series band must agree.
        let inside = Matrix2::new(0.0, 1.0, 0.5e-8, 0.0);
        let outside = Matrix2::new(0.0, 1.0, 2e-8, 0.0);
        let ei = mat_exp(&inside, 2.0);
        let eo = mat_exp(&outside, 2.0);
        assert!(close(&ei, &eo, 1e-7));
    }

    #[test]
    fn group_law_examples() {
        let m = SemidirectModel::new(SL2_SEMIDIRECT_A).unwrap();
        let p = m.group_mul(&Point::new(1.0, 0.0, 1.0), &Point::new(1.0, 0.0, 0.0));
        let e2 = 2f64.exp();
        assert!((p.x - (1.0 + e2)).abs() < 1e-13);
        assert!((p.y - (e2 - 1.0)).abs() < 1e-13);
        assert_eq!(p.z, 1.0);

        let q = m.group_mul(&Point::new(0.0, 0.0, 0.4), &Point::new(0.0, 0.0, -1.1));
        assert_eq!(q, Point::new(0.0, 0.0, 0.4 - 1.1));
        let h = m.group_mul(&Point::new(1.0, 2.0, 0.0), &Point::new(3.0, -1.0, 0.0));
        assert_eq!(h, Point::new(4.0, 1.0, 0.0));
    }

    #[test]
    fn inverse_examples() {
        let m = SemidirectModel::new(Matrix2::new(0.3, -1.0, 2.0, 0.1)).unwrap();
        assert_eq!(m.group_inv(&Point::ORIGIN), Point::ORIGIN);
        assert_eq!(m.group_inv(&Point::new(0.0, 0.0, 0.8)), Point::new(-0.0, -0.0, -0.8));
        let p = Point::new(0.4, -1.2, 0.9);
        let e = m.group_mul(&p, &m.group_inv(&p));
        assert!(e.x.abs() < 1e-14 && e.y.abs() < 1e-14 && e.z.abs() < 1e-14);
    }

    #[test]
    fn frame_examples() {
        let m = SemidirectModel::new(Matrix2::diag(0.5, -2.0)).unwrap();
        let f0 = m.frame_at(&Point::ORIGIN);
        assert_eq!(f0[0].components, [1.0, 0.0, 0.0]);
        assert_eq!(f0[1].components, [0.0, 1.0, 0.0]);
        assert_eq!(f0[2].components, [0.0, 0.0, 1.0]);
        let z = 1.3;
        let f = m.frame_at(&Point::new(2.0, 1.0, z));
        assert!((f[0].components[0] - (0.5 * z).exp()).abs() < 1e-14);
        assert!((f[1].components[1] - (-2.0 * z).exp()).abs() < 1e-15);
        assert_eq!(f[0].components[1], 0.0);
    }

    #[test]
    fn metric_examples() {
        let m = SemidirectModel::new(SL2_SEMIDIRECT_A).unwrap();
        assert_eq!(m.metric_at(&Point::ORIGIN), Matrix3::identity());
        for z in [-0.5, 0.25, 1.0, 3.0] {
            let g = m.metric_at(&Point::new(0.1, 0.2, z));
            let e = (-2.0 * z).exp();
            assert!((g[(0, 0)] - ((-4.0 * z).exp() + (e - 1.0).powi(2))).abs() < 1e-13);
            assert!((g[(1, 1)] - 1.0).abs() < 1e-14);
            assert!((g[(0, 1)] - (e - 1.0)).abs() < 1e-14);
            assert_eq!(g[(2, 2)], 1.0);
            assert_eq!(g[(0, 2)], 0.0);
        }
        let d = SemidirectModel::new(Matrix2::diag(0.7, -0.4)).unwrap();
        let g = d.metric_at(&Point::new(0.0, 0.0, 1.5));
        assert!((g[(0, 0)] - (-2.0 * 0.7 * 1.5f64).exp()).abs() < 1e-14);
        assert!((g[(1, 1)] - (2.0 * 0.4 * 1.5f64).exp()).abs() < 1e-14);
        assert_eq!(g[(0, 1)], 0.0);
    }

    #[test]
    fn metric_derivatives_match_finite_differences() {
        let m = SemidirectModel::new(Matrix2::new(0.7, -1.1, 0.4, 0.2)).unwrap();
        let h = 1e-5;
        for z in [-0.8, 0.0, 0.6] {
            let fd = (m.horizontal_metric(z + h) - m.horizontal_metric(z - h)).scale(0.5 / h);
            assert!((fd - m.horizontal_metric_dz(z)).norm() < 1e-8);
            let fd2 = (m.horizontal_metric_dz(z + h) - m.horizontal_metric_dz(z - h)).scale(0.5 / h);
            assert!((fd2 - m.horizontal_metric_dzz(z)).norm() < 1e-8);
        }
    }

    #[test]
    fn structure_constants() {
        let m = SemidirectModel::new(Matrix2::new(1.0, 2.0, 3.0, 4.0)).unwrap();
        let fd = FrameMetricData::semidirect(&m);
        assert_eq!(fd.structure[0][2][0], 1.0);
        assert_eq!(fd.structure[1][2][0], 3.0);
        assert_eq!(fd.structure[0][2][1], 2.0);
        assert_eq!(fd.structure[1][2][1], 4.0);
        assert_eq!(fd.structure[1][0][2], -3.0);

        let flat = FrameMetricData::semidirect(&SemidirectModel::new(Matrix2::ZERO).unwrap());
        assert!(flat.structure.iter().flatten().flatten().all(|c| *c == 0.0));

        let s = FrameMetricData::sl2(&Sl2FrameMetric::new([1.0, 1.0, 1.0]).unwrap());
        assert_eq!(s.structure[2][0][1], -2.0);
        assert_eq!(s.structure[0][1][2], 2.0);
        assert_eq!(s.structure[1][2][0], 2.0);
    }

    #[test]
    fn killing_field_examples() {
        let m = SemidirectModel::new(SL2_SEMIDIRECT_A).unwrap();
        let p = Point::new(0.7, -3.0, 2.0);
        assert_eq!(m.right_invariant_field([1.0, 1.0], 0.0, &p).components, [1.0, 1.0, 0.0]);
        assert_eq!(
            m.right_invariant_field([0.0, 0.0], 1.0, &p).components,
            [2.0 * p.x, 2.0 * p.x, 1.0]
        );
        assert_eq!(m.right_invariant_field([0.0, 0.0], 0.0, &p).components, [0.0; 3]);
    }

    #[test]
    fn parses_metric_json() {
        let m = MetricModel::from_json(r#"{"type":"semidirect","A":[[1,0],[0,1]]}"#).unwrap();
        assert_eq!(m, MetricModel::Semidirect(SemidirectModel { a: Matrix2::IDENTITY }));
        let s = MetricModel::from_json(r#"{"type":"sl2tilde","lambda":[1,2,3]}"#).unwrap();
        assert!(matches!(s, MetricModel::Sl2(_)));
        let p = MetricModel::from_json(r#"{"type":"s2xr","kappa":0.5}"#).unwrap();
        assert!(matches!(p, MetricModel::S2xR(_)));
        assert_eq!(MetricModel::from_json(&p.to_json()).unwrap(), p);
    }

    #[test]
    fn rejects_bad_metric_json() {
        for bad in [
            r#"{"type":"sl2tilde","lambda":[1,0,1]}"#,
            r#"{"type":"sl2tilde","lambda":[1,-2,1]}"#,
            r#"{"type":"s2xr","kappa":0}"#,
            r#"{"type":"s2xr","kappa":1e999}"#,
            r#"{"type":"semidirect","A":[[1,0],[0,1]],"extra":1}"#,
            r#"{"type":"hyperbolic"}"#,
            r#"{"type":"semidirect","A":[[1,0]]}"#,
        ] {
            let err = MetricModel::from_json(bad).unwrap_err();
            assert!(err.is_validation(), "{bad}: {err}");
        }
    }
}
