//! Jacobi operator of the horizontal tori in `(R^2 ⋊_A R) / Δ`, its kernel,
//! the projected linear solve, and Newton continuation of constant mean
//! curvature graphs under periodic conformal changes of the metric.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cheeger::Lattice;
use crate::dual::{Dual, Scalar};
use crate::error::{Error, Result};
use crate::invariant::{curvature_report, leaf_shape};
use crate::krylov::{self, lanczos_top, minres};
use crate::models::{Christoffel, CoordinateMetric, FrameMetricData, Matrix2, Point, SemidirectModel};
use crate::surface::{surface_geometry, ImmersionGrid};

/// Kernel detection threshold relative to the operator norm.
pub const KERNEL_TOL: f64 = 1e-6;
pub const MAX_NEWTON_STEPS: usize = 25;
/// Deflation rounds before kernel detection gives up on the rest of the spectrum.
const MAX_DEFLATIONS: usize = 32;

/// `q = |σ|² + Ric(E3, E3)` on the leaves.
pub fn jacobi_potential(a: &Matrix2) -> f64 {
    let fd = FrameMetricData::semidirect(&SemidirectModel { a: *a });
    let ric = curvature_report(&fd).expect("canonical frame is orthonormal").ricci[2][2];
    leaf_shape(a).norm_squared + ric
}

/// Uniform `nu × nv` grid on the torus `(R^2 ⋊_A {z0}) / Δ` in lattice
/// coordinates `(s, t) ∈ [0,1)²`, where `(x, y) = s a1 + t a2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    pub nu: usize,
    pub nv: usize,
    pub a: Matrix2,
    pub lattice: Lattice,
    pub z0: f64,
    /// Flat metric `Lᵀ G(z0) L` in lattice coordinates.
    pub metric: [[f64; 2]; 2],
}

impl TorusGrid {
    pub fn new(a: Matrix2, lattice: Lattice, z0: f64, nu: usize, nv: usize) -> Result<Self> {
        let m = SemidirectModel::new(a)?;
        let lattice = Lattice::new(lattice.a1, lattice.a2)?;
        if nu < 8 || nv < 8 {
            return Err(Error::InvalidInput("torus grids need at least 8 nodes per direction".into()));
        }
        if !z0.is_finite() {
            return Err(Error::InvalidInput("leaf height must be finite".into()));
        }
        let l = lattice.matrix();
        let g = l.transpose() * m.horizontal_metric(z0) * l;
        Ok(Self { nu, nv, a, lattice, z0, metric: g.rows() })
    }

    pub fn square(a: Matrix2, n: usize) -> Result<Self> {
        Self::new(a, Lattice::UNIT_SQUARE, 0.0, n, n)
    }

    pub fn len(&self) -> usize {
        self.nu * self.nv
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.nv + j
    }

    /// Index of `(i + di, j + dj)` with periodic wrap-around.
    pub fn wrap(&self, i: usize, j: usize, di: isize, dj: isize) -> usize {
        let ii = (i as isize + di).rem_euclid(self.nu as isize) as usize;
        let jj = (j as isize + dj).rem_euclid(self.nv as isize) as usize;
        self.index(ii, jj)
    }

    pub fn lattice_coords(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 / self.nu as f64, j as f64 / self.nv as f64)
    }

    pub fn point(&self, i: usize, j: usize, height: f64) -> Point {
        let (s, t) = self.lattice_coords(i, j);
        let (a1, a2) = (self.lattice.a1, self.lattice.a2);
        Point::new(s * a1[0] + t * a2[0], s * a1[1] + t * a2[1], height)
    }

    pub fn metric_inverse(&self) -> [[f64; 2]; 2] {
        inv2(&self.metric)
    }

    /// Area of the torus.
    pub fn area(&self) -> f64 {
        let g = &self.metric;
        (g[0][0] * g[1][1] - g[0][1] * g[1][0]).sqrt()
    }

    /// Area weight of each node.
    pub fn weight(&self) -> f64 {
        self.area() / self.len() as f64
    }

    /// `∫ u v dA`
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.weight() * krylov::dot(u, v)
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        self.inner(u, u).sqrt()
    }

    /// `∫ u dA`
    pub fn integral(&self, u: &[f64]) -> f64 {
        self.weight() * u.iter().sum::<f64>()
    }
}

/// `L = Δ + q` discretized with the 5-point stencil plus four diagonal
/// neighbours for the mixed term, symmetric for the uniform area weights.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobiOperator {
    pub grid: TorusGrid,
    pub q: Vec<f64>,
    coef: [f64; 3],
}

impl JacobiOperator {
    pub fn new(grid: TorusGrid, q: Vec<f64>) -> Result<Self> {
        if q.len() != grid.len() {
            return Err(Error::InvalidInput("potential size does not match the grid".into()));
        }
        let gi = grid.metric_inverse();
        let hs = 1.0 / grid.nu as f64;
        let ht = 1.0 / grid.nv as f64;
        let coef = [gi[0][0] / (hs * hs), gi[1][1] / (ht * ht), 2.0 * gi[0][1] / (4.0 * hs * ht)];
        Ok(Self { grid, q, coef })
    }

    /// Jacobi operator of the leaf itself, with constant potential.
    pub fn leaf(grid: &TorusGrid) -> Self {
        let q = vec![jacobi_potential(&grid.a); grid.len()];
        Self::new(grid.clone(), q).expect("sizes agree")
    }

    /// The same operator with `q` replaced by `q + shift`.
    pub fn shifted(&self, shift: f64) -> Self {
        let q = self.q.iter().map(|v| v + shift).collect();
        Self::new(self.grid.clone(), q).expect("sizes agree")
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let [css, ctt, cst] = self.coef;
        (0..g.nu)
            .into_par_iter()
            .flat_map_iter(|i| {
                (0..g.nv).map(move |j| {
                    let at = |di, dj| u[g.wrap(i, j, di, dj)];
                    let c = at(0, 0);
                    css * (at(1, 0) - 2.0 * c + at(-1, 0))
                        + ctt * (at(0, 1) - 2.0 * c + at(0, -1))
                        + cst * (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1))
                        + self.q[g.index(i, j)] * c
                })
            })
            .collect()
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        let [css, ctt, cst] = self.coef;
        let off = 2.0 * css.abs() + 2.0 * ctt.abs() + 4.0 * cst.abs();
        self.q
            .iter()
            .map(|q| (q - 2.0 * css - 2.0 * ctt).abs() + off)
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.grid.len();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for k in 0..n {
            e[k] = 1.0;
            let col = self.apply(&e);
            m.set_column(k, &DVector::from_vec(col));
            e[k] = 0.0;
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    /// Kernel functions, unit `L²(dA)` norm, nonnegative mean.
    pub vectors: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    /// `∫ φ dA` for each kernel function.
    pub means: Vec<f64>,
    /// Eigenvalues above the kernel band.
    pub unstable: Vec<f64>,
    /// Largest eigenvalue below the kernel band.
    pub next_eigenvalue: Option<f64>,
    pub operator_norm: f64,
    /// More than one near-kernel eigenvalue was found.
    pub multiplicity_warning: bool,
}

impl KernelReport {
    pub fn dimension(&self) -> usize {
        self.vectors.len()
    }
}

pub fn kernel_basis(l: &JacobiOperator, tol: f64) -> Result<KernelReport> {
    kernel_basis_seeded(l, tol, 0)
}

/// Eigenfunctions with `|λ| ≤ tol ‖L‖`.
///
/// The spectrum is peeled from the top by Lanczos with deflation until an
/// eigenvalue below the kernel band appears, which is the first nonzero
/// eigenvalue when `L ≤ 0` outside its kernel. Kernel vectors are then
/// polished by removing their range component with MINRES.
pub fn kernel_basis_seeded(l: &JacobiOperator, tol: f64, seed: u64) -> Result<KernelReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("kernel tolerance must be positive".into()));
    }
    let n = l.grid.len();
    let norm = l.norm_bound();
    let band = tol * norm;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found: Vec<Vec<f64>> = Vec::new();
    let mut kernel: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut unstable = Vec::new();
    let mut next = None;
    for _ in 0..MAX_DEFLATIONS.min(n) {
        let start: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pair = lanczos_top(|x| l.apply(x), &found, start, 1e-10 * norm, 3000)?;
        found.push(pair.vector.clone());
        if pair.value > band {
            unstable.push(pair.value);
        } else if pair.value >= -band {
            kernel.push((pair.value, pair.vector));
        } else {
            next = Some(pair.value);
            break;
        }
    }

    let g = &l.grid;
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    let mut eigenvalues = Vec::new();
    for (theta, mut phi) in kernel {
        let lphi = l.apply(&phi);
        let (e, _) = minres(|x| l.apply(x), &lphi, 1e-12, 4 * n);
        let polished: Vec<f64> = phi.iter().zip(&e).map(|(p, c)| p - c).collect();
        if krylov::norm(&e) < 0.5 * krylov::norm(&phi)
            && krylov::norm(&l.apply(&polished)) < krylov::norm(&lphi)
        {
            phi = polished;
        }
        for v in &vectors {
            let c = g.inner(&phi, v);
            for (p, b) in phi.iter_mut().zip(v) {
                *p -= c * b;
            }
        }
        let nrm = g.norm(&phi);
        phi.iter_mut().for_each(|p| *p /= nrm);
        if g.integral(&phi) < 0.0 {
            phi.iter_mut().for_each(|p| *p = -*p);
        }
        vectors.push(phi);
        eigenvalues.push(theta);
    }
    let means = vectors.iter().map(|v| g.integral(v)).collect();
    Ok(KernelReport {
        multiplicity_warning: vectors.len() >= 2,
        vectors,
        eigenvalues,
        means,
        unstable,
        next_eigenvalue: next,
        operator_norm: norm,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectedSolve {
    pub a: f64,
    pub v: Vec<f64>,
    /// `‖L v - (a - w)‖` in `L²(dA)`.
    pub residual: f64,
    /// `⟨a - w, φ⟩` in `L²(dA)`.
    pub orthogonality: f64,
}

/// Solves `L v = a - w` with `a = ∫ wφ / ∫ φ`, which makes the right-hand side
/// orthogonal to the kernel function `φ`; returns the solution orthogonal to `φ`.
pub fn solve_projected(l: &JacobiOperator, w: &[f64], phi: &[f64]) -> Result<ProjectedSolve> {
    let g = &l.grid;
    if w.len() != g.len() || phi.len() != g.len() {
        return Err(Error::InvalidInput("grid function sizes do not match".into()));
    }
    let mean = g.integral(phi);
    let phi_norm = g.norm(phi);
    if !(mean.abs() > 1e-12 * phi_norm * g.area().sqrt()) {
        return Err(Error::InvalidInput("kernel function has zero mean".into()));
    }
    let a = g.inner(w, phi) / mean;
    let rhs: Vec<f64> = w.iter().map(|wi| a - wi).collect();
    let orthogonality = g.inner(&rhs, phi);
    let rhs_norm = g.norm(&rhs);
    if orthogonality.abs() > 1e-10 * (rhs_norm * phi_norm).max(f64::MIN_POSITIVE) && orthogonality.abs() > 1e-14 {
        return Err(Error::SingularSolve(orthogonality));
    }

    // Remove the rounding-level kernel component so the system is consistent.
    let mut rhs = rhs;
    let c = orthogonality / (phi_norm * phi_norm);
    for (b, p) in rhs.iter_mut().zip(phi) {
        *b -= c * p;
    }

    let n = g.len();
    let mut v = vec![0.0; n];
    let mut r = rhs.clone();
    for _ in 0..4 {
        let r_norm = g.norm(&r);
        if r_norm <= 1e-13 * rhs_norm.max(f64::MIN_POSITIVE) {
            break;
        }
        let (dv, _) = minres(|x| l.apply(x), &r, 1e-13, 10 * n);
        let trial: Vec<f64> = v.iter().zip(&dv).map(|(a, b)| a + b).collect();
        let lv = l.apply(&trial);
        let r_new: Vec<f64> = rhs.iter().zip(&lv).map(|(b, y)| b - y).collect();
        if g.norm(&r_new) >= r_norm {
            break;
        }
        v = trial;
        r = r_new;
    }
    let c = g.inner(&v, phi) / (phi_norm * phi_norm);
    for (vi, p) in v.iter_mut().zip(phi) {
        *vi -= c * p;
    }
    let lv = l.apply(&v);
    let res: Vec<f64> = rhs.iter().zip(&lv).map(|(b, y)| b - y).collect();
    Ok(ProjectedSolve { a, v, residual: g.norm(&res), orthogonality })
}

/// Doubly periodic functions on the quotient, in lattice coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeriodicFactor {
    /// `cos(2πs) cos(2πt)`
    Cos,
    /// `cos(2πs) cos(2πt) cos(z)`
    CosZ,
    /// `sin(2πs) cos(4πt)`
    SinCos,
}

impl PeriodicFactor {
    /// Value, `(∂s, ∂t)` and `∂z` at `(s, t, z)`.
    pub fn jet<T: Scalar>(&self, s: f64, t: f64, z: T) -> (T, [T; 2], T) {
        use std::f64::consts::TAU;
        let (cs, ss) = ((TAU * s).cos(), (TAU * s).sin());
        let (ct, st) = ((TAU * t).cos(), (TAU * t).sin());
        match self {
            PeriodicFactor::Cos => (
                T::cst(cs * ct),
                [T::cst(-TAU * ss * ct), T::cst(-TAU * cs * st)],
                T::cst(0.0),
            ),
            PeriodicFactor::CosZ => {
                let (cz, sz) = (z.cos(), z.sin());
                (
                    cz.scale(cs * ct),
                    [cz.scale(-TAU * ss * ct), cz.scale(-TAU * cs * st)],
                    -sz.scale(cs * ct),
                )
            }
            PeriodicFactor::SinCos => {
                let (c2, s2) = ((2.0 * TAU * t).cos(), (2.0 * TAU * t).sin());
                (
                    T::cst(ss * c2),
                    [T::cst(TAU * cs * c2), T::cst(-2.0 * TAU * ss * s2)],
                    T::cst(0.0),
                )
            }
        }
    }
}

impl std::str::FromStr for PeriodicFactor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cos" => Ok(PeriodicFactor::Cos),
            "cosz" => Ok(PeriodicFactor::CosZ),
            "sincos" => Ok(PeriodicFactor::SinCos),
            _ => Err(Error::InvalidInput(format!(
                "perturbation must be one of cos, cosz, sincos; got {s:?}"
            ))),
        }
    }
}

/// `(1 + εφ)² g` on the quotient, in the coordinates `(x, y, z)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConformalMetric {
    pub base: SemidirectModel,
    pub lattice: Lattice,
    pub factor: PeriodicFactor,
    pub eps: f64,
}

impl ConformalMetric {
    /// `ψ = ln(1 + εφ)` and its coordinate gradient.
    fn psi(&self, p: &Point) -> (f64, [f64; 3]) {
        let linv = self.lattice.matrix().inverse().expect("lattice is nondegenerate");
        let [s, t] = linv.apply([p.x, p.y]);
        let (f, [fs, ft], fz) = self.factor.jet(s, t, p.z);
        let one = 1.0 + self.eps * f;
        let ds = self.eps * fs / one;
        let dt = self.eps * ft / one;
        let [dx, dy] = linv.transpose().apply([ds, dt]);
        (one.ln(), [dx, dy, self.eps * fz / one])
    }
}

impl CoordinateMetric for ConformalMetric {
    fn metric(&self, p: &Point) -> nalgebra::Matrix3<f64> {
        let (psi, _) = self.psi(p);
        self.base.metric_at(p) * (2.0 * psi).exp()
    }

    fn christoffel(&self, p: &Point) -> Christoffel {
        let (_, d) = self.psi(p);
        let g = self.base.metric_at(p);
        let ginv = g.try_inverse().expect("metric is positive definite");
        let grad: Vec<f64> = (0..3).map(|k| (0..3).map(|l| ginv[(k, l)] * d[l]).sum()).collect();
        let mut gam = self.base.christoffel_at(p.z);
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let mut extra = -g[(i, j)] * grad[k];
                    if k == i {
                        extra += d[j];
                    }
                    if k == j {
                        extra += d[i];
                    }
                    gam[k][i][j] += extra;
                }
            }
        }
        gam
    }
}

type M2<T> = [[T; 2]; 2];

fn inv2(m: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]
}

fn inv2_t<T: Scalar>(m: &M2<T>) -> M2<T> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]
}

fn mul2<T: Scalar>(a: &M2<T>, b: &M2<T>) -> M2<T> {
    let mut out = [[T::cst(0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn lift<T: Scalar>(m: &Matrix2) -> M2<T> {
    let r = m.rows();
    [[T::cst(r[0][0]), T::cst(r[0][1])], [T::cst(r[1][0]), T::cst(r[1][1])]]
}

fn transpose2<T: Scalar>(m: &M2<T>) -> M2<T> {
    [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
}

/// `e^{xA}` for a scalar `x` of any type, from `A = (tr A/2) I + N`, `N² = δ I`.
pub fn exp_scaled<T: Scalar>(a: &Matrix2, x: T) -> M2<T> {
    let half = 0.5 * a.trace();
    let nm = *a - Matrix2::IDENTITY.scale(half);
    let delta = 0.25 * (a.a - a.d) * (a.a - a.d) + a.b * a.c;
    let (c, s) = if delta > 1e-8 {
        let r = delta.sqrt();
        let xr = x.scale(r);
        (xr.cosh(), xr.sinh().scale(1.0 / r))
    } else if delta < -1e-8 {
        let r = (-delta).sqrt();
        let xr = x.scale(r);
        (xr.cos(), xr.sin().scale(1.0 / r))
    } else {
        let mu = x * x.scale(delta);
        let one = T::cst(1.0);
        let c = one + mu * (T::cst(0.5) + mu * (T::cst(1.0 / 24.0) + mu.scale(1.0 / 720.0)));
        let s = x * (one + mu * (T::cst(1.0 / 6.0) + mu * (T::cst(1.0 / 120.0) + mu.scale(1.0 / 5040.0))));
        (c, s)
    };
    let e = x.scale(half).exp();
    let n = lift::<T>(&nm);
    [
        [e * (c + s * n[0][0]), e * (s * n[0][1])],
        [e * (s * n[1][0]), e * (c + s * n[1][1])],
    ]
}

/// Perturbed mean curvature of the graph `z = z0 + u` at node `(i, j)`.
///
/// With `f = z0 + u` in lattice coordinates, `G̃(z) = Lᵀ G(z) L`,
/// `K = G̃⁻¹ G̃'` and `W² = 1 + fᵀ G̃⁻¹ f`:
///
/// ```text
/// σ_ab = (f_ab - G̃'_ab/2 - ((fᵀK)_a f_b + (fᵀK)_b f_a)/2) / W
/// H    = tr((G̃ + ∇f ∇fᵀ)⁻¹ σ) / 2
/// H'   = (H - ν(ψ)) / (1 + εφ),   ν(ψ) = (ψ_z - G̃^{ab} f_b ψ_a) / W
/// ```
fn graph_mean_curvature<T: Scalar>(
    grid: &TorusGrid,
    factor: PeriodicFactor,
    eps: f64,
    u: &[T],
    i: usize,
    j: usize,
) -> T {
    let hs = 1.0 / grid.nu as f64;
    let ht = 1.0 / grid.nv as f64;
    let at = |di, dj| u[grid.wrap(i, j, di, dj)];
    let c = at(0, 0);
    let fs = (at(1, 0) - at(-1, 0)).scale(0.5 / hs);
    let ft = (at(0, 1) - at(0, -1)).scale(0.5 / ht);
    let fss = (at(1, 0) - c.scale(2.0) + at(-1, 0)).scale(1.0 / (hs * hs));
    let ftt = (at(0, 1) - c.scale(2.0) + at(0, -1)).scale(1.0 / (ht * ht));
    let fst = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)).scale(0.25 / (hs * ht));
    let z = c + T::cst(grid.z0);

    let lat = lift::<T>(&grid.lattice.matrix());
    let sym = lift::<T>(&(grid.a + grid.a.transpose()));
    let m = mul2(&exp_scaled(&grid.a, -z), &lat);
    let mt = transpose2(&m);
    let gt = mul2(&mt, &m);
    let gp = mul2(&mul2(&mt, &sym), &m);
    let gp = [[-gp[0][0], -gp[0][1]], [-gp[1][0], -gp[1][1]]];
    let ginv = inv2_t(&gt);
    let k = mul2(&ginv, &gp);

    let f = [fs, ft];
    let gf = [ginv[0][0] * fs + ginv[0][1] * ft, ginv[1][0] * fs + ginv[1][1] * ft];
    let w = (T::cst(1.0) + fs * gf[0] + ft * gf[1]).sqrt();
    let fk = [f[0] * k[0][0] + f[1] * k[1][0], f[0] * k[0][1] + f[1] * k[1][1]];
    let hess = [[fss, fst], [fst, ftt]];
    let mut sigma = [[T::cst(0.0); 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            sigma[a][b] = (hess[a][b] - gp[a][b].scale(0.5) - (fk[a] * f[b] + fk[b] * f[a]).scale(0.5)) / w;
        }
    }
    let first = [[gt[0][0] + fs * fs, gt[0][1] + fs * ft], [gt[1][0] + ft * fs, gt[1][1] + ft * ft]];
    let iinv = inv2_t(&first);
    let h = (iinv[0][0] * sigma[0][0] + iinv[0][1] * sigma[1][0] + iinv[1][0] * sigma[0][1] + iinv[1][1] * sigma[1][1])
        .scale(0.5);

    let (s, t) = grid.lattice_coords(i, j);
    let (phi, dphi, dphi_z) = factor.jet(s, t, z);
    let one = T::cst(1.0) + phi.scale(eps);
    let psi_a = [dphi[0].scale(eps) / one, dphi[1].scale(eps) / one];
    let psi_z = dphi_z.scale(eps) / one;
    let normal_psi = (psi_z - gf[0] * psi_a[0] - gf[1] * psi_a[1]) / w;
    (h - normal_psi) / one
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonStep {
    pub step: usize,
    /// `max |H' - c|` over the nodes.
    pub residual: f64,
    pub c: f64,
    pub constraint: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationState {
    pub eps: f64,
    pub t: f64,
    pub c: f64,
    pub u: Vec<f64>,
    /// `1 + εφ` on the solved surface.
    pub conformal_factor: Vec<f64>,
    pub residual: f64,
    pub steps: usize,
    pub history: Vec<NewtonStep>,
}

/// Constant mean curvature graphs over a torus leaf for the metric
/// `(1 + εφ)² g`, normalized by `∫ u φ_0 dA = t` where `φ_0` spans the
/// Jacobi kernel of the leaf.
#[derive(Clone, Debug)]
pub struct CmcProblem {
    pub grid: TorusGrid,
    pub factor: PeriodicFactor,
    pub eps: f64,
    pub t: f64,
    pub kernel: Vec<f64>,
}

impl CmcProblem {
    pub fn new(grid: TorusGrid, factor: PeriodicFactor, eps: f64, t: f64) -> Result<Self> {
        if !(grid.a.trace() > 0.0) {
            return Err(Error::InvalidInput("continuation needs trace(A) > 0".into()));
        }
        if !(eps.abs() < 1.0) || !t.is_finite() {
            return Err(Error::InvalidInput(format!("need |eps| < 1 and finite t, got eps={eps}, t={t}")));
        }
        let report = kernel_basis(&JacobiOperator::leaf(&grid), KERNEL_TOL)?;
        if report.dimension() != 1 {
            return Err(Error::KernelCollapse(report.dimension()));
        }
        let kernel = report.vectors.into_iter().next().unwrap();
        Ok(Self { grid, factor, eps, t, kernel })
    }

    pub fn with_t(&self, t: f64) -> Self {
        Self { t, ..self.clone() }
    }

    /// Mean curvature of `z = z0 + u` for the perturbed metric at every node.
    pub fn mean_curvature(&self, u: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        (0..g.len())
            .into_par_iter()
            .map(|k| graph_mean_curvature(g, self.factor, self.eps, u, k / g.nv, k % g.nv))
            .collect()
    }

    /// `(H' - c, ∫ u φ_0 dA - t)`
    pub fn residual(&self, u: &[f64], c: f64) -> Vec<f64> {
        let mut r: Vec<f64> = self.mean_curvature(u).into_iter().map(|h| h - c).collect();
        r.push(self.grid.inner(u, &self.kernel) - self.t);
        r
    }

    /// Jacobian of [`Self::residual`] with respect to `(u, c)`, by dual numbers
    /// seeded on a colouring of the grid whose colour classes never share a
    /// 3×3 stencil.
    pub fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        let g = &self.grid;
        let n = g.len();
        let pu = color_period(g.nu);
        let pv = color_period(g.nv);
        let colors: Vec<(usize, usize)> = (0..pu).flat_map(|a| (0..pv).map(move |b| (a, b))).collect();
        let entries: Vec<Vec<(usize, usize, f64)>> = colors
            .par_iter()
            .map(|&(cu, cv)| {
                let seeded: Vec<Dual> = (0..n)
                    .map(|k| {
                        let on = (k / g.nv) % pu == cu && (k % g.nv) % pv == cv;
                        Dual::new(u[k], if on { 1.0 } else { 0.0 })
                    })
                    .collect();
                let mut out = Vec::new();
                for i in 0..g.nu {
                    let di = (-1..=1).find(|d: &isize| ((i as isize + d).rem_euclid(g.nu as isize) as usize) % pu == cu);
                    let Some(di) = di else { continue };
                    for j in 0..g.nv {
                        let dj =
                            (-1..=1).find(|d: &isize| ((j as isize + d).rem_euclid(g.nv as isize) as usize) % pv == cv);
                        let Some(dj) = dj else { continue };
                        let h = graph_mean_curvature(g, self.factor, self.eps, &seeded, i, j);
                        out.push((g.index(i, j), g.wrap(i, j, di, dj), h.d));
                    }
                }
                out
            })
            .collect();
        let mut jac = DMatrix::zeros(n + 1, n + 1);
        for (r, col, v) in entries.into_iter().flatten() {
            jac[(r, col)] = v;
        }
        let w = g.weight();
        for k in 0..n {
            jac[(k, n)] = -1.0;
            jac[(n, k)] = w * self.kernel[k];
        }
        jac
    }

    /// Newton iteration from the leaf `u = 0`, `c = tr(A)/2`.
    pub fn solve(&self, tol: f64, max_steps: usize) -> Result<ContinuationState> {
        let n = self.grid.len();
        let mut u = vec![0.0; n];
        let mut c = 0.5 * self.grid.a.trace();
        let sup = |r: &[f64]| r[..n].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut r = self.residual(&u, c);
        let mut history = vec![NewtonStep { step: 0, residual: sup(&r), c, constraint: r[n] }];
        let mut steps = 0;
        while sup(&r) > tol || r[n].abs() > tol {
            if steps == max_steps {
                return Err(Error::NoConvergence { steps, residual: sup(&r) });
            }
            let jac = self.jacobian(&u);
            let rhs = DVector::from_iterator(n + 1, r.iter().map(|x| -x));
            let delta = jac
                .lu()
                .solve(&rhs)
                .ok_or(Error::NoConvergence { steps, residual: sup(&r) })?;
            for k in 0..n {
                u[k] += delta[k];
            }
            c += delta[n];
            steps += 1;
            r = self.residual(&u, c);
            history.push(NewtonStep { step: steps, residual: sup(&r), c, constraint: r[n] });
        }
        let g = &self.grid;
        let conformal_factor = (0..n)
            .map(|k| {
                let (s, t) = g.lattice_coords(k / g.nv, k % g.nv);
                1.0 + self.eps * self.factor.jet(s, t, g.z0 + u[k]).0
            })
            .collect();
        Ok(ContinuationState {
            eps: self.eps,
            t: self.t,
            c,
            u,
            conformal_factor,
            residual: sup(&r),
            steps,
            history,
        })
    }

    /// Mean curvature of the graph recomputed by the generic surface pipeline
    /// in `(x, y, z)` coordinates with the conformal metric and its Christoffel
    /// symbols.
    pub fn oracle_mean_curvature(&self, u: &[f64]) -> Result<Vec<f64>> {
        let g = &self.grid;
        let (a1, a2) = (g.lattice.a1, g.lattice.a2);
        let mut points = Vec::with_capacity(g.len());
        for i in 0..g.nu {
            for j in 0..g.nv {
                points.push(g.point(i, j, g.z0 + u[g.index(i, j)]));
            }
        }
        let grid = ImmersionGrid {
            nu: g.nu,
            nv: g.nv,
            du: 1.0 / g.nu as f64,
            dv: 1.0 / g.nv as f64,
            points,
            period_shift: [Some([a1[0], a1[1], 0.0]), Some([a2[0], a2[1], 0.0])],
        };
        let metric = ConformalMetric {
            base: SemidirectModel::new(g.a)?,
            lattice: g.lattice,
            factor: self.factor,
            eps: self.eps,
        };
        let mesh = surface_geometry(&metric, &grid)?;
        let orientation = g.lattice.matrix().det().signum();
        Ok(mesh.mean_curvature.iter().map(|h| orientation * h).collect())
    }
}

/// Smallest period `p ≥ 3` dividing `n`, so that a 3-wide stencil meets each
/// residue class at most once.
fn color_period(n: usize) -> usize {
    (3..=n).find(|p| n % p == 0).unwrap_or(n)
}

/// Continuation at `t = 0` from the leaf `z = 0` over an `n × n` grid.
pub fn cmc_continue(
    a: Matrix2,
    lattice: Lattice,
    factor: PeriodicFactor,
    eps: f64,
    n: usize,
    tol: f64,
) -> Result<ContinuationState> {
    let grid = TorusGrid::new(a, lattice, 0.0, n, n)?;
    CmcProblem::new(grid, factor, eps, 0.0)?.solve(tol, MAX_NEWTON_STEPS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{mat_exp, SL2_SEMIDIRECT_A};

    #[test]
    fn potentials_vanish() {
        for a in [Matrix2::IDENTITY, SL2_SEMIDIRECT_A, Matrix2::ZERO] {
            assert!(jacobi_potential(&a).abs() < 1e-12);
        }
    }

    #[test]
    fn generic_exponential_matches_closed_form() {
        for a in [
            Matrix2::new(0.3, 1.2, -0.7, 0.9),
            Matrix2::new(1.0, 2.0, 0.5, -1.0),
            Matrix2::IDENTITY,
            Matrix2::new(0.0, 1.0, 0.0, 0.0),
        ] {
            for z in [-1.3, 0.0, 0.4, 2.0] {
                let want = mat_exp(&a, z).rows();
                let got = exp_scaled(&a, z);
                for i in 0..2 {
                    for j in 0..2 {
                        assert!((got[i][j] - want[i][j]).abs() < 1e-12 * want[i][j].abs().max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn flat_torus_laplacian_spectrum() {
        let n = 16;
        let grid = TorusGrid::square(Matrix2::IDENTITY, n).unwrap();
        let k = kernel_basis(&JacobiOperator::leaf(&grid), KERNEL_TOL).unwrap();
        assert_eq!(k.dimension(), 1);
        let phi = &k.vectors[0];
        let mean = phi.iter().sum::<f64>() / phi.len() as f64;
        assert!(phi.iter().all(|p| ((p - mean) / mean).abs() < 1e-6));
        let s = (std::f64::consts::PI / n as f64).sin();
        let want = -4.0 * (n * n) as f64 * s * s;
        assert!((k.next_eigenvalue.unwrap() - want).abs() < 1e-8 * want.abs());
    }

    #[test]
    fn shifted_operator_has_no_kernel() {
        let grid = TorusGrid::square(Matrix2::IDENTITY, 16).unwrap();
        let k = kernel_basis(&JacobiOperator::leaf(&grid).shifted(1.0), KERNEL_TOL).unwrap();
        assert_eq!(k.dimension(), 0);
        assert_eq!(k.unstable.len(), 1);
    }

    #[test]
    fn projected_solve_of_kernel_direction() {
        let grid = TorusGrid::square(Matrix2::IDENTITY, 16).unwrap();
        let l = JacobiOperator::leaf(&grid);
        let k = kernel_basis(&l, KERNEL_TOL).unwrap();
        let phi = &k.vectors[0];
        let s = solve_projected(&l, phi, phi).unwrap();
        assert!((s.a - 1.0 / grid.integral(phi)).abs() < 1e-10);
        assert!(grid.norm(&s.v) < 1e-8);
        let z = solve_projected(&l, &vec![0.0; grid.len()], phi).unwrap();
        assert_eq!(z.a, 0.0);
        assert!(z.v.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn unperturbed_leaf_needs_no_newton_step() {
        let s = cmc_continue(Matrix2::IDENTITY, Lattice::UNIT_SQUARE, PeriodicFactor::Cos, 0.0, 16, 1e-8).unwrap();
        assert_eq!(s.steps, 0);
        assert!(s.u.iter().all(|u| *u == 0.0));
        assert_eq!(s.c, 1.0);
    }

    #[test]
    fn jacobian_at_leaf_is_half_the_jacobi_operator() {
        let grid = TorusGrid::new(Matrix2::new(0.8, 0.3, -0.2, 0.6), Lattice::new([1.0, 0.2], [0.1, 0.9]).unwrap(), 0.3, 8, 8)
            .unwrap();
        let p = CmcProblem::new(grid.clone(), PeriodicFactor::Cos, 0.0, 0.0).unwrap();
        let jac = p.jacobian(&vec![0.0; grid.len()]);
        let l = JacobiOperator::leaf(&grid).to_dense();
        let n = grid.len();
        let mut err: f64 = 0.0;
        for r in 0..n {
            for c in 0..n {
                err = err.max((jac[(r, c)] - 0.5 * l[(r, c)]).abs());
            }
        }
        assert!(err < 1e-9 * l.amax(), "{err}");
    }

    #[test]
    fn parses_factor_names() {
        assert_eq!("cos".parse::<PeriodicFactor>().unwrap(), PeriodicFactor::Cos);
        assert!("tan".parse::<PeriodicFactor>().is_err());
    }
}
