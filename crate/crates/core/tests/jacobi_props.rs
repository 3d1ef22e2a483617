mod common;

use homog3::cheeger::Lattice;
use homog3::jacobi::{
    cmc_continue, kernel_basis, solve_projected, CmcProblem, JacobiOperator, PeriodicFactor, TorusGrid, KERNEL_TOL,
};
use homog3::models::{Matrix2, SL2_SEMIDIRECT_A};
use rand::Rng;

fn random_function(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn jacobi_operator_is_self_adjoint() {
    let mut rng = common::rng(31);
    let lattices = [Lattice::UNIT_SQUARE, Lattice::new([1.0, 0.3], [-0.2, 0.8]).unwrap()];
    for a in [Matrix2::IDENTITY, SL2_SEMIDIRECT_A, Matrix2::new(0.4, 1.0, -0.5, 1.2)] {
        for lattice in lattices {
            let grid = TorusGrid::new(a, lattice, 0.3, 24, 20).unwrap();
            let q: Vec<f64> = random_function(&mut rng, grid.len());
            let l = JacobiOperator::new(grid.clone(), q).unwrap();
            for _ in 0..5 {
                let u = random_function(&mut rng, grid.len());
                let v = random_function(&mut rng, grid.len());
                let lhs = grid.inner(&l.apply(&u), &v);
                let rhs = grid.inner(&u, &l.apply(&v));
                assert!((lhs - rhs).abs() <= 1e-12 * grid.norm(&u) * grid.norm(&v) * l.norm_bound().max(1.0));
            }
        }
    }
}

#[test]
fn kernel_is_one_dimensional_and_constant() {
    for a in [Matrix2::IDENTITY, SL2_SEMIDIRECT_A, Matrix2::diag(2.0, 1.0)] {
        for n in [16, 32, 64] {
            let grid = TorusGrid::square(a, n).unwrap();
            let k = kernel_basis(&JacobiOperator::leaf(&grid), KERNEL_TOL).unwrap();
            assert_eq!(k.dimension(), 1, "A={a:?} n={n}");
            assert!(!k.multiplicity_warning);
            let phi = &k.vectors[0];
            let mean = grid.integral(phi) / grid.area();
            assert!(mean.abs() > 0.5, "mean {mean}");
            assert!(phi.iter().all(|p| ((p - mean) / mean).abs() <= 1e-6));
            assert!(k.unstable.is_empty());
        }
    }
}

#[test]
fn flat_torus_spectral_gap() {
    let n = 32;
    let lattice = Lattice::new([1.0, 0.0], [0.0, 2.0]).unwrap();
    let grid = TorusGrid::new(Matrix2::IDENTITY, lattice, 0.0, n, n).unwrap();
    let k = kernel_basis(&JacobiOperator::leaf(&grid), KERNEL_TOL).unwrap();
    // Lowest Fourier mode runs along the long side of length 2.
    let h = 2.0 / n as f64;
    let want = -(2.0 * (std::f64::consts::PI * h / 2.0).sin() / h).powi(2);
    assert!((k.next_eigenvalue.unwrap() - want).abs() <= 1e-8 * want.abs());
    let diam_bound = -(std::f64::consts::TAU / 2.0).powi(2);
    assert!(k.next_eigenvalue.unwrap() <= diam_bound * (1.0 - 0.01));
}

#[test]
fn projected_solve_of_random_data() {
    let mut rng = common::rng(32);
    let grid = TorusGrid::square(Matrix2::IDENTITY, 32).unwrap();
    let l = JacobiOperator::leaf(&grid);
    let phi = kernel_basis(&l, KERNEL_TOL).unwrap().vectors.remove(0);
    let w = random_function(&mut rng, grid.len());
    let s = solve_projected(&l, &w, &phi).unwrap();
    assert!(s.residual <= 1e-9 * grid.norm(&w), "{}", s.residual);
    assert!(s.orthogonality.abs() <= 1e-10);
    assert!(grid.inner(&s.v, &phi).abs() <= 1e-9 * grid.norm(&s.v));
}

#[test]
fn jacobian_matches_finite_differences() {
    let mut rng = common::rng(33);
    for factor in [PeriodicFactor::Cos, PeriodicFactor::CosZ, PeriodicFactor::SinCos] {
        let lattice = Lattice::new([1.0, 0.2], [0.1, 0.9]).unwrap();
        let grid = TorusGrid::new(Matrix2::new(1.0, 0.3, -0.2, 0.8), lattice, 0.0, 12, 12).unwrap();
        let p = CmcProblem::new(grid, factor, 0.05, 0.0).unwrap();
        let n = p.grid.len();
        let u: Vec<f64> = random_function(&mut rng, n).iter().map(|x| 0.02 * x).collect();
        let c = 0.9;
        let dir: Vec<f64> = random_function(&mut rng, n + 1);
        let jac = p.jacobian(&u);
        let jd = &jac * nalgebra::DVector::from_vec(dir.clone());
        let h = 1e-5;
        let shifted = |s: f64| {
            let us: Vec<f64> = u.iter().zip(&dir).map(|(x, d)| x + s * d).collect();
            p.residual(&us, c + s * dir[n])
        };
        let (plus, minus) = (shifted(h), shifted(-h));
        let fd: Vec<f64> = plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let diff = fd.iter().zip(jd.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = jd.norm();
        assert!(diff <= 1e-4 * scale, "{factor:?}: {diff} vs {scale}");
    }
}

#[test]
fn unperturbed_leaf_needs_no_newton_step() {
    let s = cmc_continue(Matrix2::IDENTITY, Lattice::UNIT_SQUARE, PeriodicFactor::Cos, 0.0, 16, 1e-8).unwrap();
    assert_eq!(s.steps, 0);
    assert_eq!(s.c, 1.0);
    assert!(s.u.iter().all(|x| *x == 0.0));
}

#[test]
fn continuation_in_t_tracks_the_kernel_direction() {
    let grid = TorusGrid::square(Matrix2::IDENTITY, 16).unwrap();
    let p = CmcProblem::new(grid, PeriodicFactor::CosZ, 0.01, 0.0).unwrap();
    let dt = 1e-3;
    let s0 = p.solve(1e-10, 25).unwrap();
    let s1 = p.with_t(dt).solve(1e-10, 25).unwrap();
    let du: Vec<f64> = s1.u.iter().zip(&s0.u).map(|(a, b)| a - b).collect();
    let projected = p.grid.inner(&du, &p.kernel);
    assert!((projected - dt).abs() <= 1e-6, "{projected}");
}

#[test]
fn newton_converges_quadratically() {
    let s = cmc_continue(Matrix2::IDENTITY, Lattice::UNIT_SQUARE, PeriodicFactor::Cos, 0.01, 32, 1e-8).unwrap();
    assert!(s.steps <= 8 && s.residual <= 1e-8);
    assert!((s.c - 1.0).abs() <= 0.05);
    let r: Vec<f64> = s.history.iter().map(|h| h.residual).collect();
    let tail = &r[r.len().saturating_sub(3)..];
    for w in tail.windows(2) {
        assert!(w[1] <= w[0] * w[0], "{r:?}");
    }
}

#[test]
fn continuation_requires_positive_trace() {
    let grid = TorusGrid::square(Matrix2::ZERO, 16).unwrap();
    let err = CmcProblem::new(grid, PeriodicFactor::Cos, 0.01, 0.0).unwrap_err();
    assert!(err.is_validation());
}
