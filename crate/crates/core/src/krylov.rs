//! Symmetric Krylov methods: Lanczos for extreme eigenpairs and MINRES.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn orthogonalize(w: &mut [f64], against: &[&[f64]]) {
    for _ in 0..2 {
        for v in against {
            let c = dot(w, v);
            axpy(w, -c, v);
        }
    }
}

/// An eigenpair approximation with its Lanczos residual estimate.
#[derive(Clone, Debug)]
pub struct RitzPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Largest eigenpair of a symmetric operator restricted to the Euclidean
/// orthogonal complement of `deflate` (orthonormal vectors), by Lanczos with
/// full reorthogonalization.
pub fn lanczos_top<F: Fn(&[f64]) -> Vec<f64>>(
    apply: F,
    deflate: &[Vec<f64>],
    start: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<RitzPair> {
    let n = start.len();
    let limit = max_iter.min(n.saturating_sub(deflate.len())).max(1);
    let defl: Vec<&[f64]> = deflate.iter().map(|v| v.as_slice()).collect();
    let mut q = start;
    orthogonalize(&mut q, &defl);
    let q_norm = norm(&q);
    if q_norm == 0.0 {
        return Err(Error::InvalidInput("Lanczos start vector lies in the deflated space".into()));
    }
    q.iter_mut().for_each(|x| *x /= q_norm);

    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut last = (f64::NAN, f64::INFINITY);
    for j in 0..limit {
        let mut w = apply(&basis[j]);
        let alpha = dot(&w, &basis[j]);
        axpy(&mut w, -alpha, &basis[j]);
        if j > 0 {
            axpy(&mut w, -betas[j - 1], &basis[j - 1]);
        }
        {
            let mut all: Vec<&[f64]> = defl.clone();
            all.extend(basis.iter().map(|v| v.as_slice()));
            orthogonalize(&mut w, &all);
        }
        let beta = norm(&w);
        alphas.push(alpha);
        let m = j + 1;
        let scale = alphas.iter().map(|a| a.abs()).fold(beta, f64::max).max(1.0);
        let breakdown = beta <= 1e-13 * scale;
        if m % 10 == 0 || breakdown || m == limit {
            let mut t = DMatrix::<f64>::zeros(m, m);
            for i in 0..m {
                t[(i, i)] = alphas[i];
                if i + 1 < m {
                    t[(i, i + 1)] = betas[i];
                    t[(i + 1, i)] = betas[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let (k, theta) = eig
                .eigenvalues
                .iter()
                .copied()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            let s = eig.eigenvectors.column(k);
            let residual = if breakdown { 0.0 } else { beta * s[m - 1].abs() };
            last = (theta, residual);
            if residual <= tol || breakdown || m == limit {
                let mut x = vec![0.0; n];
                for (i, v) in basis.iter().enumerate() {
                    axpy(&mut x, s[i], v);
                }
                orthogonalize(&mut x, &defl);
                let nx = norm(&x);
                x.iter_mut().for_each(|c| *c /= nx);
                if residual > tol && !breakdown {
                    return Err(Error::NoConvergence { steps: m, residual });
                }
                return Ok(RitzPair { value: theta, vector: x, residual, iterations: m });
            }
        }
        betas.push(beta);
        basis.push(w.into_iter().map(|c| c / beta).collect());
    }
    Err(Error::NoConvergence { steps: limit, residual: last.1 })
}

const LEAST_SQUARES_TOL: f64 = 1e-7;

/// MINRES for a symmetric, possibly singular, system `A x = b`, started from
/// zero. The iterates stay in the Krylov space of `b`, so a right-hand side in
/// the range yields the minimum-norm solution. Iteration stops when the
/// Krylov space reaches a null direction of `A`, which happens once the
/// inconsistent part of `b` is all that is left.
pub fn minres<F: Fn(&[f64]) -> Vec<f64>>(apply: F, b: &[f64], rtol: f64, max_iter: usize) -> (Vec<f64>, usize) {
    let n = b.len();
    let mut x = vec![0.0; n];
    let beta1 = norm(b);
    if beta1 == 0.0 {
        return (x, 0);
    }
    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y = b.to_vec();
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0, 0.0);
    let mut anorm: f64 = 0.0;
    for itn in 1..=max_iter {
        let v: Vec<f64> = y.iter().map(|c| c / beta).collect();
        y = apply(&v);
        if itn >= 2 {
            axpy(&mut y, -beta / oldb, &r1);
        }
        let alfa = dot(&v, &y);
        axpy(&mut y, -alfa / beta, &r2);
        r1 = std::mem::replace(&mut r2, y.clone());
        oldb = beta;
        beta = norm(&r2);
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        anorm = anorm.max(alfa.hypot(beta).hypot(oldb));
        let root = gbar.hypot(dbar);
        let gamma = gbar.hypot(beta);
        if gamma <= 1e-14 * anorm {
            return (x, itn);
        }
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        let w1 = std::mem::replace(&mut w2, w.clone());
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
        }
        axpy(&mut x, phi, &w);
        // `root / anorm` estimates ‖A r‖ / (‖A‖ ‖r‖): a small value means the
        // remaining residual is a null direction.
        if phibar <= rtol * beta1 || beta == 0.0 || root <= LEAST_SQUARES_TOL * anorm {
            return (x, itn);
        }
    }
    (x, max_iter)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_op(d: &[f64]) -> impl Fn(&[f64]) -> Vec<f64> + '_ {
        move |x: &[f64]| x.iter().zip(d).map(|(a, b)| a * b).collect()
    }

    #[test]
    fn lanczos_finds_top_of_diagonal() {
        let d: Vec<f64> = (0..50).map(|i| -(i as f64)).collect();
        let start: Vec<f64> = (0..50).map(|i| 1.0 + 0.01 * i as f64).collect();
        let p = lanczos_top(diag_op(&d), &[], start.clone(), 1e-10, 200).unwrap();
        assert!(p.value.abs() < 1e-10);
        assert!((p.vector[0].abs() - 1.0).abs() < 1e-9);
        let mut e0 = vec![0.0; 50];
        e0[0] = 1.0;
        let p = lanczos_top(diag_op(&d), &[e0], start, 1e-10, 200).unwrap();
        assert!((p.value + 1.0).abs() < 1e-10);
    }

    #[test]
    fn minres_solves_singular_consistent_system() {
        let d: Vec<f64> = (0..40).map(|i| if i == 0 { 0.0 } else { (i as f64) - 20.5 }).collect();
        let b: Vec<f64> = (0..40).map(|i| if i == 0 { 0.0 } else { (i as f64).sin() }).collect();
        let (x, _) = minres(diag_op(&d), &b, 1e-14, 500);
        assert!(x[0].abs() < 1e-14);
        for i in 1..40 {
            assert!((x[i] * d[i] - b[i]).abs() < 1e-12);
        }
    }
}
