//! Geodesics of `R^2 ⋊_A R` and geodesic balls built from the exponential map.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Matrix2, Point, ProductS2R, SemidirectModel, TangentVec};
use crate::quadrature::GaussLegendre;

/// Relative speed drift above which an integration is rejected.
pub const MAX_SPEED_DRIFT: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicPath {
    pub times: Vec<f64>,
    pub points: Vec<Point>,
    /// Coordinate velocities.
    pub velocities: Vec<TangentVec>,
    pub step: f64,
}

impl GeodesicPath {
    pub fn end(&self) -> (Point, TangentVec) {
        (*self.points.last().unwrap(), *self.velocities.last().unwrap())
    }

    /// Largest relative deviation of the speed from its initial value.
    pub fn speed_drift(&self, m: &SemidirectModel) -> f64 {
        let speed = |i: usize| m.inner(&self.points[i], &self.velocities[i], &self.velocities[i]).sqrt();
        let s0 = speed(0);
        let scale = if s0 > 0.0 { s0 } else { 1.0 };
        (0..self.points.len())
            .map(|i| (speed(i) - s0).abs() / scale)
            .fold(0.0, f64::max)
    }
}

type State = [f64; 6];

/// Geodesic equation written with frame components `q = e^{-zA} ṗ`:
/// `z̈ = -qᵀ S q / 2`, `p̈ = ż e^{zA} S q`, `S = A + Aᵀ`.
struct Flow {
    a: Matrix2,
    s: Matrix2,
}

impl Flow {
    fn new(m: &SemidirectModel) -> Self {
        Self { a: m.a, s: m.a + m.a.transpose() }
    }

    fn rhs(&self, y: &State) -> State {
        let z = y[2];
        let q = crate::models::mat_exp(&self.a, -z).apply([y[3], y[4]]);
        let sq = self.s.apply(q);
        let acc = crate::models::mat_exp(&self.a, z).apply(sq);
        let zd = y[5];
        [y[3], y[4], y[5], zd * acc[0], zd * acc[1], -0.5 * (q[0] * sq[0] + q[1] * sq[1])]
    }

    fn rk4(&self, y: &State, h: f64) -> State {
        let k1 = self.rhs(y);
        let k2 = self.rhs(&axpy(y, 0.5 * h, &k1));
        let k3 = self.rhs(&axpy(y, 0.5 * h, &k2));
        let k4 = self.rhs(&axpy(y, h, &k3));
        let mut out = *y;
        for i in 0..6 {
            out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out
    }

    /// Advance by `t` using `ceil(t / h_max)` equal steps.
    fn advance(&self, y: &State, t: f64, h_max: f64) -> State {
        if t <= 0.0 {
            return *y;
        }
        let n = (t / h_max).ceil().max(1.0) as usize;
        let h = t / n as f64;
        let mut s = *y;
        for _ in 0..n {
            s = self.rk4(&s, h);
        }
        s
    }
}

fn axpy(y: &State, h: f64, k: &State) -> State {
    let mut o = *y;
    for i in 0..6 {
        o[i] += h * k[i];
    }
    o
}

fn state(p: &Point, v: &[f64; 3]) -> State {
    [p.x, p.y, p.z, v[0], v[1], v[2]]
}

/// Integrates the geodesic from `p0` with initial velocity `v0` over `[0, t_end]`
/// with classical RK4 at step at most `h`.
pub fn geodesic(
    m: &SemidirectModel,
    p0: Point,
    v0: TangentVec,
    t_end: f64,
    h: f64,
) -> Result<GeodesicPath> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("step size must be positive, got {h}")));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidInput(format!("final time must be positive, got {t_end}")));
    }
    let v0 = v0.to_coordinate(m, &p0).components;
    let flow = Flow::new(m);
    let n = (t_end / h).ceil().max(1.0) as usize;
    let step = t_end / n as f64;
    let mut y = state(&p0, &v0);
    let mut times = Vec::with_capacity(n + 1);
    let mut points = Vec::with_capacity(n + 1);
    let mut velocities = Vec::with_capacity(n + 1);
    for k in 0..=n {
        if k > 0 {
            y = flow.rk4(&y, step);
        }
        times.push(step * k as f64);
        points.push(Point::new(y[0], y[1], y[2]));
        velocities.push(TangentVec::coordinate([y[3], y[4], y[5]]));
    }
    let path = GeodesicPath { times, points, velocities, step };
    let drift = path.speed_drift(m);
    if !(drift <= MAX_SPEED_DRIFT) {
        return Err(Error::StepRejected { drift, limit: MAX_SPEED_DRIFT });
    }
    Ok(path)
}

/// Exponential map at `p` applied to the coordinate vector `v`.
pub fn exp_map(m: &SemidirectModel, p: &Point, v: [f64; 3], h_max: f64) -> Point {
    let y = Flow::new(m).advance(&state(p, &v), 1.0, h_max);
    Point::new(y[0], y[1], y[2])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallMesh {
    pub n_theta: usize,
    pub n_phi: usize,
    pub n_r: usize,
}

impl BallMesh {
    pub fn new(n_theta: usize, n_phi: usize, n_r: usize) -> Self {
        Self { n_theta, n_phi, n_r }
    }

    fn halved(&self) -> Self {
        Self { n_theta: self.n_theta / 2, n_phi: self.n_phi / 2, n_r: self.n_r }
    }
}

impl Default for BallMesh {
    fn default() -> Self {
        Self::new(16, 32, 12)
    }
}

impl std::str::FromStr for BallMesh {
    type Err = Error;

    /// Parses `ntxnpxnr`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split('x')
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidInput(format!("mesh must look like 16x32x12, got {s:?}")))?;
        match parts[..] {
            [a, b, c] => Ok(Self::new(a, b, c)),
            _ => Err(Error::InvalidInput(format!("mesh must have three sizes, got {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallReport {
    pub r: f64,
    pub volume: f64,
    pub area: f64,
    /// `area / (36π volume²)^{1/3}`, equal to 1 for Euclidean balls.
    pub ratio: f64,
    pub mesh: BallMesh,
}

/// Relative area change tolerated between the half mesh and the full mesh.
pub const MESH_AREA_TOLERANCE: f64 = 0.01;

/// Angular offset for finite-difference derivatives of the exponential map.
const ANGLE_STEP: f64 = 1e-5;

/// Geodesic sphere and ball of radius `r` about `center`.
///
/// Unit directions `sinθ cosφ E1 + sinθ sinφ E2 + cosθ E3` are sampled with a
/// Gauss rule in `θ` and the periodic trapezoid rule in `φ`; volume integrates
/// the exponential-map Jacobian over Gauss nodes in the radius.
pub fn geodesic_ball(m: &SemidirectModel, center: Point, r: f64, mesh: BallMesh) -> Result<BallReport> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidInput(format!("radius must be positive, got {r}")));
    }
    if mesh.n_theta < 8 || mesh.n_phi < 8 || mesh.n_r < 8 {
        return Err(Error::InvalidInput("ball mesh sizes must be at least 8".into()));
    }
    let full = ball_integrals(m, &center, r, mesh);
    let half = ball_integrals(m, &center, r, mesh.halved());
    let rel_change = ((full.1 - half.1) / full.1).abs();
    if !(rel_change <= MESH_AREA_TOLERANCE) {
        return Err(Error::MeshTooCoarse { rel_change });
    }
    let (volume, area) = full;
    let ratio = area / (36.0 * std::f64::consts::PI * volume * volume).cbrt();
    Ok(BallReport { r, volume, area, ratio, mesh })
}

/// Returns `(volume, area)`.
fn ball_integrals(m: &SemidirectModel, center: &Point, r: f64, mesh: BallMesh) -> (f64, f64) {
    let flow = Flow::new(m);
    let frame = m.frame_at(center).map(|e| e.components);
    let h_max = r / 64.0;
    let theta_rule: Vec<(f64, f64)> =
        GaussLegendre::new(mesh.n_theta).on_interval(0.0, std::f64::consts::PI).collect();
    let radial: Vec<(f64, f64)> = GaussLegendre::new(mesh.n_r).on_interval(0.0, r).collect();
    let dphi = 2.0 * std::f64::consts::PI / mesh.n_phi as f64;

    let direction = |theta: f64, phi: f64| -> [f64; 3] {
        let c = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
        let mut v = [0.0; 3];
        for (k, e) in frame.iter().enumerate() {
            for i in 0..3 {
                v[i] += c[k] * e[i];
            }
        }
        v
    };
    // States at each radial node followed by the state at r.
    let trace = |theta: f64, phi: f64| -> Vec<State> {
        let mut y = state(center, &direction(theta, phi));
        let mut rho = 0.0;
        let mut out = Vec::with_capacity(radial.len() + 1);
        for &(node, _) in radial.iter().chain(std::iter::once(&(r, 0.0))) {
            y = flow.advance(&y, node - rho, h_max);
            rho = node;
            out.push(y);
        }
        out
    };

    let cells: Vec<(usize, usize)> = (0..mesh.n_theta)
        .flat_map(|i| (0..mesh.n_phi).map(move |j| (i, j)))
        .collect();
    let contributions: Vec<(f64, f64)> = cells
        .par_iter()
        .map(|&(i, j)| {
            let (theta, wt) = theta_rule[i];
            let phi = dphi * j as f64;
            let p = trace(theta, phi);
            let tp = trace(theta + ANGLE_STEP, phi);
            let tm = trace(theta - ANGLE_STEP, phi);
            let fp = trace(theta, phi + ANGLE_STEP);
            let fm = trace(theta, phi - ANGLE_STEP);
            let mut vol = 0.0;
            for (k, &(_, wr)) in radial.iter().enumerate() {
                let d_theta = diff(&tp[k], &tm[k], ANGLE_STEP);
                let d_phi = diff(&fp[k], &fm[k], ANGLE_STEP);
                let d_rho = [p[k][3], p[k][4], p[k][5]];
                let jac = det3(&d_rho, &d_theta, &d_phi).abs() * m.volume_density(p[k][2]);
                vol += wr * jac;
            }
            let last = radial.len();
            let pt = Point::new(p[last][0], p[last][1], p[last][2]);
            let d_theta = TangentVec::coordinate(diff(&tp[last], &tm[last], ANGLE_STEP));
            let d_phi = TangentVec::coordinate(diff(&fp[last], &fm[last], ANGLE_STEP));
            let e = m.inner(&pt, &d_theta, &d_theta);
            let f = m.inner(&pt, &d_theta, &d_phi);
            let g = m.inner(&pt, &d_phi, &d_phi);
            let area = (e * g - f * f).max(0.0).sqrt();
            (wt * dphi * vol, wt * dphi * area)
        })
        .collect();
    contributions
        .iter()
        .fold((0.0, 0.0), |(v, a), (dv, da)| (v + dv, a + da))
}

fn diff(p: &State, q: &State, h: f64) -> [f64; 3] {
    [(p[0] - q[0]) / (2.0 * h), (p[1] - q[1]) / (2.0 * h), (p[2] - q[2]) / (2.0 * h)]
}

fn det3(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0])
}

/// `Area(∂Ω_R) / Vol(Ω_R)` for the slab `Ω_R = S²(κ) × [0, R]`, which is `2/R`
/// for every curvature `κ`.
pub fn cylinder_ratio(m: &ProductS2R, big_r: f64) -> Result<f64> {
    if !(big_r > 0.0 && big_r.is_finite()) {
        return Err(Error::InvalidInput(format!("R must be positive, got {big_r}")));
    }
    debug_assert!(m.kappa > 0.0);
    Ok(2.0 / big_r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertical_geodesic_is_a_line() {
        let m = SemidirectModel::new(Matrix2::new(0.4, 1.0, -2.0, 1.3)).unwrap();
        let p0 = Point::new(0.3, -1.0, 0.5);
        let path = geodesic(&m, p0, TangentVec::frame([0.0, 0.0, 1.0]), 3.0, 1e-3).unwrap();
        for (t, p) in path.times.iter().zip(&path.points) {
            assert_eq!((p.x, p.y), (0.3, -1.0));
            assert!((p.z - 0.5 - t).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_velocity_is_constant() {
        let m = SemidirectModel::new(Matrix2::IDENTITY).unwrap();
        let p0 = Point::new(1.0, 2.0, 3.0);
        let path = geodesic(&m, p0, TangentVec::coordinate([0.0; 3]), 1.0, 0.1).unwrap();
        assert!(path.points.iter().all(|p| *p == p0));
    }

    #[test]
    fn flat_geodesics_are_straight() {
        let m = SemidirectModel::new(Matrix2::ZERO).unwrap();
        let v = [0.3, -0.4, 1.2];
        let path = geodesic(&m, Point::ORIGIN, TangentVec::coordinate(v), 2.0, 0.01).unwrap();
        let (p, _) = path.end();
        for (a, b) in p.to_array().iter().zip(v) {
            assert!((a - 2.0 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn speed_is_conserved() {
        let m = SemidirectModel::new(Matrix2::new(1.0, 0.5, -0.5, 0.3)).unwrap();
        let path =
            geodesic(&m, Point::ORIGIN, TangentVec::frame([0.6, 0.0, 0.8]), 10.0, 1e-3).unwrap();
        assert!(path.speed_drift(&m) < 1e-8);
    }

    #[test]
    fn coarse_steps_are_rejected() {
        let m = SemidirectModel::new(Matrix2::diag(3.0, -2.0)).unwrap();
        let r = geodesic(&m, Point::ORIGIN, TangentVec::frame([0.8, 0.0, 0.6]), 10.0, 0.5);
        assert!(matches!(r, Err(Error::StepRejected { .. })));
    }

    #[test]
    fn euclidean_ball() {
        let m = SemidirectModel::new(Matrix2::ZERO).unwrap();
        let b = geodesic_ball(&m, Point::ORIGIN, 1.0, BallMesh::new(12, 16, 8)).unwrap();
        let pi = std::f64::consts::PI;
        assert!((b.area - 4.0 * pi).abs() < 1e-8);
        assert!((b.volume - 4.0 * pi / 3.0).abs() < 1e-8);
        assert!((b.ratio - 1.0).abs() < 1e-8);
    }

    #[test]
    fn parses_mesh() {
        assert_eq!("16x32x8".parse::<BallMesh>().unwrap(), BallMesh::new(16, 32, 8));
        assert!("16x32".parse::<BallMesh>().is_err());
        let m = SemidirectModel::new(Matrix2::ZERO).unwrap();
        assert!(geodesic_ball(&m, Point::ORIGIN, 1.0, BallMesh::new(4, 16, 8)).is_err());
    }

    #[test]
    fn cylinder_ratios() {
        let p = ProductS2R::new(1.0).unwrap();
        assert_eq!(cylinder_ratio(&p, 1.0).unwrap(), 2.0);
        assert_eq!(cylinder_ratio(&p, 2.0).unwrap(), 1.0);
        assert!(cylinder_ratio(&p, 0.0).is_err());
    }
}
