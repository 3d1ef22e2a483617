//! Discrete parametrized surfaces with finite-difference fundamental forms, and
//! divergence-theorem balances over coordinate cuboids.

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{CoordinateMetric, Point, SemidirectModel, TangentVec};
use crate::quadrature::GaussLegendre;

/// Largest accepted condition number of the induced metric.
pub const MAX_METRIC_CONDITION: f64 = 1e8;

/// Immersion sampled on a uniform `nu × nv` parameter grid.
///
/// A periodic direction carries the coordinate translation between a node and
/// its copy one period later (zero for closed curves, a lattice vector for
/// tori living in a quotient).
#[derive(Clone, Debug, PartialEq)]
pub struct ImmersionGrid {
    pub nu: usize,
    pub nv: usize,
    pub du: f64,
    pub dv: f64,
    /// Row-major, index `i * nv + j`.
    pub points: Vec<Point>,
    pub period_shift: [Option<[f64; 3]>; 2],
}

impl ImmersionGrid {
    pub fn from_fn<F: Fn(f64, f64) -> Point>(
        nu: usize,
        nv: usize,
        u_range: (f64, f64),
        v_range: (f64, f64),
        period_shift: [Option<[f64; 3]>; 2],
        f: F,
    ) -> Self {
        // Periodic directions exclude the endpoint.
        let step = |n: usize, (a, b): (f64, f64), periodic: bool| {
            if periodic {
                (b - a) / n as f64
            } else {
                (b - a) / (n as f64 - 1.0)
            }
        };
        let du = step(nu, u_range, period_shift[0].is_some());
        let dv = step(nv, v_range, period_shift[1].is_some());
        let mut points = Vec::with_capacity(nu * nv);
        for i in 0..nu {
            for j in 0..nv {
                points.push(f(u_range.0 + du * i as f64, v_range.0 + dv * j as f64));
            }
        }
        Self { nu, nv, du, dv, points, period_shift }
    }

    /// The leaf `z = z0` over the unit square, periodic under `x → x+1`, `y → y+1`.
    pub fn horizontal_leaf(z0: f64, n: usize) -> Self {
        Self::from_fn(
            n,
            n,
            (0.0, 1.0),
            (0.0, 1.0),
            [Some([1.0, 0.0, 0.0]), Some([0.0, 1.0, 0.0])],
            |x, y| Point::new(x, y, z0),
        )
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.nv + j
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMesh {
    pub nu: usize,
    pub nv: usize,
    pub periodic: [bool; 2],
    pub points: Vec<Point>,
    /// Induced metric `I_ab` per node.
    pub first_form: Vec<[[f64; 2]; 2]>,
    /// Unit normal per node, coordinate components.
    pub normal: Vec<[f64; 3]>,
    /// `σ_ab = g(∇_{X_a} X_b, N)` per node.
    pub second_form: Vec<[[f64; 2]; 2]>,
    pub mean_curvature: Vec<f64>,
    pub area_weights: Vec<f64>,
}

impl SurfaceMesh {
    pub fn total_area(&self) -> f64 {
        self.area_weights.iter().sum()
    }

    /// `|σ|² = I^{ac} I^{bd} σ_ab σ_cd` at node `k`.
    pub fn sigma_norm_squared(&self, k: usize) -> f64 {
        let inv = inverse2(&self.first_form[k]);
        let s = &self.second_form[k];
        let mut shape = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                shape[a][b] = (0..2).map(|c| inv[a][c] * s[c][b]).sum();
            }
        }
        (0..2)
            .flat_map(|a| (0..2).map(move |b| (a, b)))
            .map(|(a, b)| shape[a][b] * shape[b][a])
            .sum()
    }

    pub fn max_mean_curvature_error(&self, target: f64) -> f64 {
        self.mean_curvature.iter().map(|h| (h - target).abs()).fold(0.0, f64::max)
    }
}

type V3 = [f64; 3];

struct Stencil<'a> {
    grid: &'a ImmersionGrid,
}

impl Stencil<'_> {
    fn len(&self, axis: usize) -> usize {
        if axis == 0 {
            self.grid.nu
        } else {
            self.grid.nv
        }
    }

    fn step(&self, axis: usize) -> f64 {
        if axis == 0 {
            self.grid.du
        } else {
            self.grid.dv
        }
    }

    /// Value at `(i, j)` moved by `k` along `axis`, unwrapping periodic copies.
    fn at(&self, f: &[V3], i: usize, j: usize, axis: usize, k: isize, shifted: bool) -> V3 {
        let n = self.len(axis) as isize;
        let base = if axis == 0 { i } else { j } as isize + k;
        let wraps = base.div_euclid(n);
        let r = base.rem_euclid(n) as usize;
        let idx = if axis == 0 { self.grid.index(r, j) } else { self.grid.index(i, r) };
        let mut v = f[idx];
        if shifted && wraps != 0 {
            if let Some(s) = self.grid.period_shift[axis] {
                for c in 0..3 {
                    v[c] += wraps as f64 * s[c];
                }
            }
        }
        v
    }

    fn periodic(&self, axis: usize) -> bool {
        self.grid.period_shift[axis].is_some()
    }

    fn position(&self, axis: usize, i: usize, j: usize) -> usize {
        if axis == 0 {
            i
        } else {
            j
        }
    }

    fn first(&self, f: &[V3], i: usize, j: usize, axis: usize, shifted: bool) -> V3 {
        let h = self.step(axis);
        let n = self.len(axis);
        let k = self.position(axis, i, j);
        let g = |o: isize| self.at(f, i, j, axis, o, shifted);
        if self.periodic(axis) || (k > 0 && k + 1 < n) {
            combine(&[(1.0, g(1)), (-1.0, g(-1))], 2.0 * h)
        } else if k == 0 {
            combine(&[(-3.0, g(0)), (4.0, g(1)), (-1.0, g(2))], 2.0 * h)
        } else {
            combine(&[(3.0, g(0)), (-4.0, g(-1)), (1.0, g(-2))], 2.0 * h)
        }
    }

    fn second(&self, f: &[V3], i: usize, j: usize, axis: usize, shifted: bool) -> V3 {
        let h = self.step(axis);
        let n = self.len(axis);
        let k = self.position(axis, i, j);
        let g = |o: isize| self.at(f, i, j, axis, o, shifted);
        if self.periodic(axis) || (k > 0 && k + 1 < n) {
            combine(&[(1.0, g(1)), (-2.0, g(0)), (1.0, g(-1))], h * h)
        } else if k == 0 {
            combine(&[(2.0, g(0)), (-5.0, g(1)), (4.0, g(2)), (-1.0, g(3))], h * h)
        } else {
            combine(&[(2.0, g(0)), (-5.0, g(-1)), (4.0, g(-2)), (-1.0, g(-3))], h * h)
        }
    }
}

fn combine(terms: &[(f64, V3)], denom: f64) -> V3 {
    let mut out = [0.0; 3];
    for (c, v) in terms {
        for k in 0..3 {
            out[k] += c * v[k];
        }
    }
    out.map(|x| x / denom)
}

fn cross(a: &V3, b: &V3) -> V3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: &V3, b: &V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn bilinear(g: &Matrix3<f64>, a: &V3, b: &V3) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += g[(i, j)] * a[i] * b[j];
        }
    }
    s
}

fn inverse2(m: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]
}

/// Fundamental forms and mean curvature of a sampled immersion.
///
/// Tangent vectors come from second-order differences, and the second
/// fundamental form applies the ambient connection to them:
/// `σ_ab = g(X_ab + Γ(X_a, X_b), N)`. The normal is the metric dual of the
/// covector `X_u × X_v`, so leaves parametrized by `(x, y)` get `N = E3`.
pub fn surface_geometry<M: CoordinateMetric + Sync>(
    metric: &M,
    grid: &ImmersionGrid,
) -> Result<SurfaceMesh> {
    if grid.nu < 8 || grid.nv < 8 {
        return Err(Error::InvalidInput("surface grids need at least 8x8 nodes".into()));
    }
    if grid.points.len() != grid.nu * grid.nv {
        return Err(Error::InvalidInput("immersion size does not match the grid".into()));
    }
    let st = Stencil { grid };
    let pos: Vec<V3> = grid.points.iter().map(|p| p.to_array()).collect();
    let nodes: Vec<(usize, usize)> =
        (0..grid.nu).flat_map(|i| (0..grid.nv).map(move |j| (i, j))).collect();
    let xu: Vec<V3> = nodes.iter().map(|&(i, j)| st.first(&pos, i, j, 0, true)).collect();

    let weight = |axis: usize, k: usize| -> f64 {
        let n = st.len(axis);
        let h = st.step(axis);
        if st.periodic(axis) || (k > 0 && k + 1 < n) {
            h
        } else {
            0.5 * h
        }
    };

    let per_node: Vec<Result<(V3, [[f64; 2]; 2], [[f64; 2]; 2], f64, f64)>> = nodes
        .par_iter()
        .map(|&(i, j)| {
            let k = grid.index(i, j);
            let p = grid.points[k];
            let a = xu[k];
            let b = st.first(&pos, i, j, 1, true);
            let auu = st.second(&pos, i, j, 0, true);
            let avv = st.second(&pos, i, j, 1, true);
            let auv = st.first(&xu, i, j, 1, false);
            let g = metric.metric(&p);
            let first = [
                [bilinear(&g, &a, &a), bilinear(&g, &a, &b)],
                [bilinear(&g, &b, &a), bilinear(&g, &b, &b)],
            ];
            let tr = first[0][0] + first[1][1];
            let det = first[0][0] * first[1][1] - first[0][1] * first[1][0];
            let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
            let (lmax, lmin) = (0.5 * tr + disc, 0.5 * tr - disc);
            let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
            if !(condition <= MAX_METRIC_CONDITION) {
                return Err(Error::DegenerateMetric { i, j, condition });
            }
            let covec = cross(&a, &b);
            let ginv = g.try_inverse().ok_or(Error::NotPositiveDefinite)?;
            let mut raised = [0.0; 3];
            for r in 0..3 {
                raised[r] = (0..3).map(|c| ginv[(r, c)] * covec[c]).sum();
            }
            let len = dot(&covec, &raised).sqrt();
            let normal = raised.map(|x| x / len);
            let gam = metric.christoffel(&p);
            let accel = |x: &V3, y: &V3, xy: &V3| -> f64 {
                let mut v = *xy;
                for (kk, vk) in v.iter_mut().enumerate() {
                    for r in 0..3 {
                        for c in 0..3 {
                            *vk += gam[kk][r][c] * x[r] * y[c];
                        }
                    }
                }
                dot(&v, &covec) / len
            };
            let s_uv = accel(&a, &b, &auv);
            let second = [[accel(&a, &a, &auu), s_uv], [s_uv, accel(&b, &b, &avv)]];
            let inv = inverse2(&first);
            let h = 0.5
                * (inv[0][0] * second[0][0]
                    + inv[0][1] * second[1][0]
                    + inv[1][0] * second[0][1]
                    + inv[1][1] * second[1][1]);
            let area = det.sqrt() * weight(0, i) * weight(1, j);
            Ok((normal, first, second, h, area))
        })
        .collect();

    let n = nodes.len();
    let mut mesh = SurfaceMesh {
        nu: grid.nu,
        nv: grid.nv,
        periodic: [grid.period_shift[0].is_some(), grid.period_shift[1].is_some()],
        points: grid.points.clone(),
        first_form: Vec::with_capacity(n),
        normal: Vec::with_capacity(n),
        second_form: Vec::with_capacity(n),
        mean_curvature: Vec::with_capacity(n),
        area_weights: Vec::with_capacity(n),
    };
    for r in per_node {
        let (normal, first, second, h, area) = r?;
        mesh.normal.push(normal);
        mesh.first_form.push(first);
        mesh.second_form.push(second);
        mesh.mean_curvature.push(h);
        mesh.area_weights.push(area);
    }
    Ok(mesh)
}

/// `div ∂z` from the logarithmic derivative of the volume density
/// `sqrt(det g)`, by a fourth-order central difference in `z`.
pub fn foliation_normal_divergence(m: &SemidirectModel, p: &Point) -> f64 {
    let h = 1e-3;
    let log_density = |dz: f64| 0.5 * m.metric_at(&Point::new(p.x, p.y, p.z + dz)).determinant().ln();
    (-log_density(2.0 * h) + 8.0 * log_density(h) - 8.0 * log_density(-h) + log_density(-2.0 * h))
        / (12.0 * h)
}

/// Axis-aligned coordinate box `[x0,x1] × [y0,y1] × [z0,z1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cuboid {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl Cuboid {
    pub fn new(lo: [f64; 3], hi: [f64; 3]) -> Result<Self> {
        for k in 0..3 {
            if !(lo[k].is_finite() && hi[k].is_finite() && lo[k] < hi[k]) {
                return Err(Error::InvalidInput(format!(
                    "cuboid needs finite bounds with lo < hi on every axis, got {lo:?} .. {hi:?}"
                )));
            }
        }
        Ok(Self { lo, hi })
    }
}

impl std::str::FromStr for Cuboid {
    type Err = Error;

    /// Parses `x0,x1,y0,y1,z0,z1`.
    fn from_str(s: &str) -> Result<Self> {
        let v: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidInput(format!("box must be six numbers, got {s:?}")))?;
        if v.len() != 6 {
            return Err(Error::InvalidInput(format!("box must be six numbers, got {s:?}")));
        }
        Cuboid::new([v[0], v[2], v[4]], [v[1], v[3], v[5]])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VectorField {
    /// `∂z = E3`, the unit normal of the leaves.
    FoliationNormal,
    /// Right-invariant field `(w + s A(x,y), s)`.
    Killing { w: [f64; 2], s: f64 },
    /// Constant coordinate components.
    Constant { v: [f64; 3] },
}

impl VectorField {
    pub fn at(&self, m: &SemidirectModel, p: &Point) -> [f64; 3] {
        match *self {
            VectorField::FoliationNormal => [0.0, 0.0, 1.0],
            VectorField::Killing { w, s } => m.right_invariant_field(w, s, p).components,
            VectorField::Constant { v } => v,
        }
    }

    /// `(1/ρ) ∂_k(ρ V^k)` with `ρ = sqrt(det g)`, by central differences.
    pub fn divergence(&self, m: &SemidirectModel, p: &Point) -> f64 {
        let h = 1e-3;
        let flux = |k: usize, t: f64| {
            let mut q = p.to_array();
            q[k] += t;
            let q = Point::from_array(q);
            m.metric_at(&q).determinant().sqrt() * self.at(m, &q)[k]
        };
        let rho = m.metric_at(p).determinant().sqrt();
        (0..3)
            .map(|k| {
                (-flux(k, 2.0 * h) + 8.0 * flux(k, h) - 8.0 * flux(k, -h) + flux(k, -2.0 * h))
                    / (12.0 * h)
            })
            .sum::<f64>()
            / rho
    }
}

impl std::str::FromStr for VectorField {
    type Err = Error;

    /// Parses `normal` or `killing:w1,w2,s`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "normal" {
            return Ok(VectorField::FoliationNormal);
        }
        if let Some(rest) = s.strip_prefix("killing:") {
            let v: Vec<f64> = rest
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::InvalidInput(format!("bad killing field {s:?}")))?;
            if let [w1, w2, sc] = v[..] {
                return Ok(VectorField::Killing { w: [w1, w2], s: sc });
            }
        }
        Err(Error::InvalidInput(format!(
            "field must be 'normal' or 'killing:w1,w2,s', got {s:?}"
        )))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceBalance {
    pub volume_integral: f64,
    pub boundary_flux: f64,
    pub discrepancy: f64,
    pub volume: f64,
    pub boundary_area: f64,
    /// Gauss nodes per axis at the coarse and fine levels.
    pub resolution: [usize; 2],
}

impl DivergenceBalance {
    /// Discrepancy relative to the larger of the two sides.
    pub fn relative_discrepancy(&self) -> f64 {
        let scale = self.volume_integral.abs().max(self.boundary_flux.abs());
        if scale == 0.0 {
            0.0
        } else {
            self.discrepancy / scale
        }
    }
}

struct BalanceSides {
    volume_integral: f64,
    boundary_flux: f64,
    volume: f64,
    boundary_area: f64,
}

fn balance_at(m: &SemidirectModel, b: &Cuboid, field: &VectorField, n: usize) -> BalanceSides {
    let rule = GaussLegendre::new(n);
    let nodes: Vec<Vec<(f64, f64)>> =
        (0..3).map(|k| rule.on_interval(b.lo[k], b.hi[k]).collect()).collect();

    let (volume_integral, volume) = nodes[0]
        .par_iter()
        .map(|&(x, wx)| {
            let mut acc = (0.0, 0.0);
            for &(y, wy) in &nodes[1] {
                for &(z, wz) in &nodes[2] {
                    let p = Point::new(x, y, z);
                    let dv = wx * wy * wz * m.metric_at(&p).determinant().sqrt();
                    acc.0 += dv * field.divergence(m, &p);
                    acc.1 += dv;
                }
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));

    let mut flux = 0.0;
    let mut area = 0.0;
    for axis in 0..3 {
        let (s, t) = ((axis + 1) % 3, (axis + 2) % 3);
        for (side, value) in [(-1.0, b.lo[axis]), (1.0, b.hi[axis])] {
            for &(u, wu) in &nodes[s] {
                for &(v, wv) in &nodes[t] {
                    let mut q = [0.0; 3];
                    q[axis] = value;
                    q[s] = u;
                    q[t] = v;
                    let p = Point::from_array(q);
                    let g = m.metric_at(&p);
                    let ginv = g.try_inverse().expect("metric is positive definite");
                    // Outward unit normal: the gradient of the coordinate.
                    let mut eta = [ginv[(0, axis)], ginv[(1, axis)], ginv[(2, axis)]];
                    let len = ginv[(axis, axis)].sqrt();
                    eta = eta.map(|c| side * c / len);
                    let mut es = [0.0; 3];
                    es[s] = 1.0;
                    let mut et = [0.0; 3];
                    et[t] = 1.0;
                    let (gss, gst, gtt) =
                        (bilinear(&g, &es, &es), bilinear(&g, &es, &et), bilinear(&g, &et, &et));
                    let da = wu * wv * (gss * gtt - gst * gst).sqrt();
                    let vf = TangentVec::coordinate(field.at(m, &p));
                    flux += da * m.inner(&p, &vf, &TangentVec::coordinate(eta));
                    area += da;
                }
            }
        }
    }
    BalanceSides { volume_integral, boundary_flux: flux, volume, boundary_area: area }
}

/// Compares `∫_Ω div V dVol` with `∫_∂Ω ⟨V, η⟩ dA` at `n` and `2n` Gauss nodes
/// per axis.
pub fn divergence_balance(
    m: &SemidirectModel,
    b: &Cuboid,
    field: &VectorField,
    n: usize,
) -> Result<DivergenceBalance> {
    if n < 2 {
        return Err(Error::InvalidInput("need at least two quadrature nodes per axis".into()));
    }
    let coarse = balance_at(m, b, field, n);
    let fine = balance_at(m, b, field, 2 * n);
    let gap = |s: &BalanceSides| (s.volume_integral - s.boundary_flux).abs();
    let (dc, df) = (gap(&coarse), gap(&fine));
    let scale = fine.boundary_area.max(fine.volume_integral.abs());
    if df > dc && df > 1e-9 * scale {
        return Err(Error::QuadratureFailure { coarse: dc, fine: df });
    }
    Ok(DivergenceBalance {
        volume_integral: fine.volume_integral,
        boundary_flux: fine.boundary_flux,
        discrepancy: df,
        volume: fine.volume,
        boundary_area: fine.boundary_area,
        resolution: [n, 2 * n],
    })
}
