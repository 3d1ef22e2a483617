//! Box domains `F(n) × [0, t0]` over lattice parallelograms, their
//! isoperimetric ratios, and the finite-volume end of the quotient by a lattice.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Matrix2, SemidirectModel};
use crate::quadrature::GaussLegendre;

/// Lattice of `R^2 ⋊_A {0}` spanned by `a1`, `a2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub a1: [f64; 2],
    pub a2: [f64; 2],
}

impl Lattice {
    pub const UNIT_SQUARE: Lattice = Lattice { a1: [1.0, 0.0], a2: [0.0, 1.0] };

    pub fn new(a1: [f64; 2], a2: [f64; 2]) -> Result<Self> {
        let l = Lattice { a1, a2 };
        let scale = (a1[0].hypot(a1[1]) * a2[0].hypot(a2[1])).max(f64::MIN_POSITIVE);
        if !l.cell_area().is_finite() || l.cell_area() <= 1e-12 * scale {
            return Err(Error::InvalidInput(format!(
                "lattice vectors {a1:?}, {a2:?} are not linearly independent"
            )));
        }
        Ok(l)
    }

    /// Euclidean area of the fundamental cell at height zero.
    pub fn cell_area(&self) -> f64 {
        (self.a1[0] * self.a2[1] - self.a1[1] * self.a2[0]).abs()
    }

    pub fn matrix(&self) -> Matrix2 {
        Matrix2::from_columns(self.a1, self.a2)
    }
}

impl Default for Lattice {
    fn default() -> Self {
        Self::UNIT_SQUARE
    }
}

impl std::str::FromStr for Lattice {
    type Err = Error;

    /// Parses `a1x,a1y,a2x,a2y`.
    fn from_str(s: &str) -> Result<Self> {
        let v: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidInput(format!("lattice must be four numbers, got {s:?}")))?;
        match v[..] {
            [a, b, c, d] => Lattice::new([a, b], [c, d]),
            _ => Err(Error::InvalidInput(format!("lattice must be four numbers, got {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub a: Matrix2,
    pub n: usize,
    pub t0: f64,
    pub lattice: Lattice,
    /// Gauss nodes per unit of height.
    pub quadrature_nodes: usize,
}

impl BoxDomain {
    pub fn new(a: Matrix2, n: usize, t0: f64, lattice: Lattice) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("box size n must be at least 1".into()));
        }
        if !(t0 > 0.0 && t0.is_finite()) {
            return Err(Error::InvalidInput(format!("box height t0 must be positive, got {t0}")));
        }
        SemidirectModel::new(a)?;
        let lattice = Lattice::new(lattice.a1, lattice.a2)?;
        Ok(Self { a, n, t0, lattice, quadrature_nodes: 16 })
    }
}

/// Exact values, available when every lattice vector is a real eigenvector of `A`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxClosedForm {
    pub bottom: f64,
    pub top: f64,
    pub sides: f64,
    pub volume: f64,
    pub ratio: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxReport {
    pub n: usize,
    pub t0: f64,
    pub bottom: f64,
    pub top: f64,
    pub sides: f64,
    pub volume: f64,
    /// `(bottom + top + sides) / volume`
    pub ratio: f64,
    pub trace_a: f64,
    pub closed_form: Option<BoxClosedForm>,
}

/// `∫_0^t e^{-τ z} dz`, continuous through `τ = 0`.
fn decay_integral(tau: f64, t: f64) -> f64 {
    if tau == 0.0 {
        t
    } else {
        -(-tau * t).exp_m1() / tau
    }
}

/// Area element `sqrt(det G(z)) = |det e^{-zA}|` of the slice at height `z`,
/// evaluated on the factor `G = MᵀM` to avoid cancellation in `det G`.
fn slice_density(m: &SemidirectModel, z: f64) -> f64 {
    m.exp(-z).det().abs()
}

/// Composite Gauss rule on `[0, t]` with about `per_unit` nodes per unit length.
fn integrate_height<F: Fn(f64) -> f64>(t: f64, per_unit: usize, f: F) -> f64 {
    let rule = GaussLegendre::new(per_unit);
    let panels = (t.ceil() as usize).max(1) * 2;
    rule.integrate_composite(0.0, t, panels, f)
}

/// Faces and volume of `B(n, t0)`. The foliation normal is `∂z` and its flow is
/// vertical translation, so the box is `F(n) × [0, t0]` in coordinates.
pub fn box_report(b: &BoxDomain) -> BoxReport {
    let m = SemidirectModel { a: b.a };
    let nn = (b.n * b.n) as f64;
    let cell = b.lattice.cell_area();
    let q = b.quadrature_nodes;
    let density = |z: f64| slice_density(&m, z);
    let bottom = nn * cell * slice_density(&m, 0.0);
    let top = nn * cell * slice_density(&m, b.t0);
    let volume = nn * cell * integrate_height(b.t0, q, density);
    // Each side is a ruled strip swept vertically by a lattice segment of
    // length n |e^{-zA} a_i| at height z.
    let sides = 2.0
        * b.n as f64
        * [b.lattice.a1, b.lattice.a2]
            .iter()
            .map(|v| {
                integrate_height(b.t0, q, |z| {
                    let w = m.exp(-z).apply(*v);
                    w[0].hypot(w[1])
                })
            })
            .sum::<f64>();
    BoxReport {
        n: b.n,
        t0: b.t0,
        bottom,
        top,
        sides,
        volume,
        ratio: (bottom + top + sides) / volume,
        trace_a: b.a.trace(),
        closed_form: box_closed_form(b),
    }
}

/// Real eigenvalue of `A` on `v` when `v` is an eigenvector.
fn eigenvalue_on(a: &Matrix2, v: [f64; 2]) -> Option<f64> {
    let av = a.apply(v);
    let vv = v[0] * v[0] + v[1] * v[1];
    let cross = v[0] * av[1] - v[1] * av[0];
    let scale = vv.sqrt() * av[0].hypot(av[1]);
    if cross.abs() <= 1e-14 * scale.max(vv) {
        Some((v[0] * av[0] + v[1] * av[1]) / vv)
    } else {
        None
    }
}

pub fn box_closed_form(b: &BoxDomain) -> Option<BoxClosedForm> {
    let tau = b.a.trace();
    let nn = (b.n * b.n) as f64;
    let cell = b.lattice.cell_area();
    let mut sides = 0.0;
    for v in [b.lattice.a1, b.lattice.a2] {
        let mu = eigenvalue_on(&b.a, v)?;
        sides += 2.0 * b.n as f64 * v[0].hypot(v[1]) * decay_integral(mu, b.t0);
    }
    let bottom = nn * cell;
    let top = nn * cell * (-tau * b.t0).exp();
    let volume = nn * cell * decay_integral(tau, b.t0);
    Some(BoxClosedForm { bottom, top, sides, volume, ratio: (bottom + top + sides) / volume })
}

/// Ratios over the grid `ns × t0s`, in row-major order of `(n, t0)`.
pub fn box_ratio_sweep(a: Matrix2, lattice: Lattice, ns: &[usize], t0s: &[f64]) -> Result<Vec<BoxReport>> {
    let domains: Vec<BoxDomain> = ns
        .iter()
        .flat_map(|&n| t0s.iter().map(move |&t0| (n, t0)))
        .map(|(n, t0)| BoxDomain::new(a, n, t0, lattice))
        .collect::<Result<_>>()?;
    Ok(domains.par_iter().map(box_report).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuotientEndReport {
    #[serde(rename = "T")]
    pub t: f64,
    pub cell_area: f64,
    /// `V(T) = ∫_T^∞ cell · e^{-τ z} dz`
    pub end_volume: f64,
    pub torus_area: f64,
    /// `|2H V(T) - torus area|` from the closed forms.
    pub residual: f64,
    pub quadrature_volume: f64,
    pub quadrature_area: f64,
    /// The same identity with both sides from quadrature of the metric.
    pub quadrature_residual: f64,
}

/// The end `{z ≥ T}` of `(R^2 ⋊_A R) / Δ` and the identity `2H V(T) = Area(T)`
/// with `H = tr(A)/2`.
pub fn quotient_end_report(a: Matrix2, lattice: Lattice, t: f64) -> Result<QuotientEndReport> {
    let m = SemidirectModel::new(a)?;
    let lattice = Lattice::new(lattice.a1, lattice.a2)?;
    if !t.is_finite() {
        return Err(Error::InvalidInput(format!("T must be finite, got {t}")));
    }
    let tau = a.trace();
    if !(tau > 0.0) {
        return Err(Error::InfiniteVolume(tau));
    }
    let h = 0.5 * tau;
    let cell = lattice.cell_area();
    let end_volume = cell * (-tau * t).exp() / tau;
    let torus_area = cell * (-tau * t).exp();
    let residual = (2.0 * h * end_volume - torus_area).abs();

    // Truncate where the integrand has decayed by e^{-60}.
    let length = 60.0 / tau;
    let rule = GaussLegendre::new(16);
    let density = |z: f64| slice_density(&m, z);
    let quadrature_volume = cell * rule.integrate_composite(t, t + length, 64, density);
    let quadrature_area = cell * slice_density(&m, t);
    let quadrature_residual = (2.0 * h * quadrature_volume - quadrature_area).abs();
    Ok(QuotientEndReport {
        t,
        cell_area: cell,
        end_volume,
        torus_area,
        residual,
        quadrature_volume,
        quadrature_area,
        quadrature_residual,
    })
}
