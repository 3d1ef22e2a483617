//! Levi-Civita connection and curvature of left-invariant metrics, computed
//! on a left-invariant frame from structure constants alone.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{FrameMetricData, Matrix2, MetricModel, ProductS2R};

/// Frame components `Γ^k_ij` of `∇_{E_i} E_j`, stored `[k][i][j]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConnectionTable {
    pub gamma: [[[f64; 3]; 3]; 3],
}

impl ConnectionTable {
    /// Frame components of `∇_{E_i} E_j`.
    pub fn covariant(&self, i: usize, j: usize) -> [f64; 3] {
        [self.gamma[0][i][j], self.gamma[1][i][j], self.gamma[2][i][j]]
    }

    /// `max |Γ^k_ij - Γ^k_ji - C^k_ij|`
    pub fn torsion_residual(&self, fd: &FrameMetricData) -> f64 {
        let mut r: f64 = 0.0;
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let t = self.gamma[k][i][j] - self.gamma[k][j][i] - fd.structure[k][i][j];
                    r = r.max(t.abs());
                }
            }
        }
        r
    }

    /// `max |⟨∇_i E_j, E_l⟩ + ⟨E_j, ∇_i E_l⟩|`
    pub fn compatibility_residual(&self, fd: &FrameMetricData) -> f64 {
        let lowered = |i: usize, j: usize, l: usize| -> f64 {
            (0..3).map(|k| self.gamma[k][i][j] * fd.metric[(k, l)]).sum()
        };
        let mut r: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for l in 0..3 {
                    r = r.max((lowered(i, j, l) + lowered(i, l, j)).abs());
                }
            }
        }
        r
    }

    pub fn max_abs_diff(&self, other: &ConnectionTable) -> f64 {
        self.gamma
            .iter()
            .flatten()
            .flatten()
            .zip(other.gamma.iter().flatten().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Koszul formula for left-invariant fields with constant inner products:
/// `2⟨∇_X Y, Z⟩ = ⟨[X,Y],Z⟩ - ⟨[Y,Z],X⟩ + ⟨[Z,X],Y⟩`.
pub fn koszul_connection(fd: &FrameMetricData) -> Result<ConnectionTable> {
    let ginv = inverse_metric(&fd.metric)?;
    let mut gamma = [[[0.0; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut low = [0.0; 3];
            for (l, v) in low.iter_mut().enumerate() {
                *v = 0.5
                    * (fd.bracket_lowered(i, j, l) - fd.bracket_lowered(j, l, i)
                        + fd.bracket_lowered(l, i, j));
            }
            for k in 0..3 {
                gamma[k][i][j] = (0..3).map(|l| ginv[(k, l)] * low[l]).sum();
            }
        }
    }
    Ok(ConnectionTable { gamma })
}

/// Closed-form connection of the canonical metric on `R^2 ⋊_A R`:
///
/// ```text
/// ∇_{E1}E1 = a E3           ∇_{E1}E2 = (b+c)/2 E3     ∇_{E1}E3 = -a E1 - (b+c)/2 E2
/// ∇_{E2}E1 = (b+c)/2 E3     ∇_{E2}E2 = d E3           ∇_{E2}E3 = -(b+c)/2 E1 - d E2
/// ∇_{E3}E1 = (c-b)/2 E2     ∇_{E3}E2 = (b-c)/2 E1     ∇_{E3}E3 = 0
/// ```
pub fn semidirect_connection(a: &Matrix2) -> ConnectionTable {
    let Matrix2 { a, b, c, d } = *a;
    let m = 0.5 * (b + c);
    let r = 0.5 * (c - b);
    let mut g = [[[0.0; 3]; 3]; 3];
    let mut set = |i: usize, j: usize, v: [f64; 3]| {
        for k in 0..3 {
            g[k][i][j] = v[k];
        }
    };
    set(0, 0, [0.0, 0.0, a]);
    set(0, 1, [0.0, 0.0, m]);
    set(0, 2, [-a, -m, 0.0]);
    set(1, 0, [0.0, 0.0, m]);
    set(1, 1, [0.0, 0.0, d]);
    set(1, 2, [-m, -d, 0.0]);
    set(2, 0, [0.0, r, 0.0]);
    set(2, 1, [-r, 0.0, 0.0]);
    set(2, 2, [0.0, 0.0, 0.0]);
    ConnectionTable { gamma: g }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReport {
    /// `Ric(E_j, E_k)` in the frame basis.
    pub ricci: [[f64; 3]; 3],
    /// Eigenvalues of the Ricci operator, ascending.
    pub ricci_eigenvalues: [f64; 3],
    pub scalar: f64,
    /// Sectional curvatures of the planes `E1∧E2`, `E1∧E3`, `E2∧E3`.
    pub sectional: [f64; 3],
}

/// Curvature from `R(X,Y)Z = ∇_X∇_Y Z - ∇_Y∇_X Z - ∇_{[X,Y]} Z`.
pub fn curvature_report(fd: &FrameMetricData) -> Result<CurvatureReport> {
    let con = koszul_connection(fd)?;
    let g = &con.gamma;
    let c = &fd.structure;
    // riem[n][i][j][k]: E_n component of R(E_i, E_j) E_k
    let mut riem = [[[[0.0; 3]; 3]; 3]; 3];
    for n in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    riem[n][i][j][k] = (0..3)
                        .map(|m| g[m][j][k] * g[n][i][m] - g[m][i][k] * g[n][j][m] - c[m][i][j] * g[n][m][k])
                        .sum();
                }
            }
        }
    }
    let mut ric = Matrix3::<f64>::zeros();
    for j in 0..3 {
        for k in 0..3 {
            ric[(j, k)] = (0..3).map(|i| riem[i][i][j][k]).sum();
        }
    }
    let ric = 0.5 * (ric + ric.transpose());
    let ginv = inverse_metric(&fd.metric)?;
    let scalar = (ginv * ric).trace();

    // Ricci operator g⁻¹Ric is self-adjoint; conjugate by the Cholesky factor
    // to get a symmetric matrix with the same spectrum.
    let chol = fd.metric.cholesky().ok_or(Error::NotPositiveDefinite)?;
    let linv = chol.l().try_inverse().ok_or(Error::NotPositiveDefinite)?;
    let sym = linv * ric * linv.transpose();
    let sym = 0.5 * (sym + sym.transpose());
    let mut eig: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| a.total_cmp(b));

    let gm = &fd.metric;
    let sec = |i: usize, j: usize| -> f64 {
        let num: f64 = (0..3).map(|n| riem[n][i][j][j] * gm[(n, i)]).sum();
        num / (gm[(i, i)] * gm[(j, j)] - gm[(i, j)] * gm[(i, j)])
    };

    let mut ricci = [[0.0; 3]; 3];
    for (j, row) in ricci.iter_mut().enumerate() {
        for (k, v) in row.iter_mut().enumerate() {
            *v = ric[(j, k)];
        }
    }
    Ok(CurvatureReport {
        ricci,
        ricci_eigenvalues: [eig[0], eig[1], eig[2]],
        scalar,
        sectional: [sec(0, 1), sec(0, 2), sec(1, 2)],
    })
}

/// Curvature of `S^2(κ) × R` in an orthonormal frame with `E3` vertical.
pub fn product_curvature(p: &ProductS2R) -> CurvatureReport {
    let k = p.kappa;
    CurvatureReport {
        ricci: [[k, 0.0, 0.0], [0.0, k, 0.0], [0.0, 0.0, 0.0]],
        ricci_eigenvalues: [0.0, k, k],
        scalar: 2.0 * k,
        sectional: [k, 0.0, 0.0],
    }
}

/// Curvature report for any supported model.
pub fn model_curvature(model: &MetricModel) -> Result<CurvatureReport> {
    match model {
        MetricModel::S2xR(p) => Ok(product_curvature(p)),
        other => curvature_report(&crate::models::frame_data(other)?),
    }
}

/// Second fundamental form of the leaves `R^2 ⋊_A {z}` with respect to `E3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafShape {
    pub sigma: [[f64; 2]; 2],
    pub mean_curvature: f64,
    pub norm_squared: f64,
}

pub fn leaf_shape(a: &Matrix2) -> LeafShape {
    let off = 0.5 * (a.b + a.c);
    let sigma = [[a.a, off], [off, a.d]];
    LeafShape {
        sigma,
        mean_curvature: 0.5 * (a.a + a.d),
        norm_squared: a.a * a.a + a.d * a.d + 2.0 * off * off,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheegerReport {
    #[serde(rename = "Ch")]
    pub cheeger: f64,
    #[serde(rename = "Hcrit")]
    pub critical_mean_curvature: f64,
    pub unimodular: bool,
}

/// Cheeger constant and critical mean curvature.
///
/// For a semidirect model `Ch = |tr A| = 2 H`; the sign of the trace only
/// reflects the orientation of `z`, since `(p, z) ↦ (p, -z)` is an isometry
/// onto the model of `-A`. The standard SL(2,R)~ metric is handled through
/// its isometric semidirect model `A = [[2,0],[2,0]]`; the group itself is
/// unimodular.
pub fn cheeger_report(model: &MetricModel) -> Result<CheegerReport> {
    match model {
        MetricModel::Semidirect(m) => {
            let t = m.trace().abs();
            Ok(CheegerReport {
                cheeger: t,
                critical_mean_curvature: 0.5 * t,
                unimodular: m.is_unimodular(),
            })
        }
        MetricModel::Sl2(s) if s.is_standard() => {
            let t = crate::models::SL2_SEMIDIRECT_A.trace();
            Ok(CheegerReport {
                cheeger: t,
                critical_mean_curvature: 0.5 * t,
                unimodular: true,
            })
        }
        MetricModel::Sl2(_) => Err(Error::Unsupported(
            "Cheeger constant is only available for lambda = (1,1,1)".into(),
        )),
        MetricModel::S2xR(_) => Err(Error::Unsupported(
            "S^2 x R is not a metric Lie group; use the cylinder ratio".into(),
        )),
    }
}

fn inverse_metric(g: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let chol = g.cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.inverse())
}
