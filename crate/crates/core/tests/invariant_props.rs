mod common;

use homog3::invariant::{
    cheeger_report, curvature_report, koszul_connection, leaf_shape, semidirect_connection,
};
use homog3::jacobi::jacobi_potential;
use homog3::models::{FrameMetricData, Matrix2, MetricModel, SemidirectModel, Sl2FrameMetric};
use proptest::prelude::*;

fn frame(a: Matrix2) -> FrameMetricData {
    FrameMetricData::semidirect(&SemidirectModel::new(a).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn koszul_matches_closed_form(a in common::matrix(3.0)) {
        let fd = frame(a);
        let k = koszul_connection(&fd).unwrap();
        prop_assert!(k.max_abs_diff(&semidirect_connection(&a)) <= 1e-12);
        prop_assert!(k.torsion_residual(&fd) <= 1e-12);
        prop_assert!(k.compatibility_residual(&fd) <= 1e-12);
    }

    #[test]
    fn scalar_is_ricci_trace(a in common::matrix(3.0)) {
        let r = curvature_report(&frame(a)).unwrap();
        let tr = r.ricci[0][0] + r.ricci[1][1] + r.ricci[2][2];
        prop_assert!((r.scalar - tr).abs() <= 1e-10 * (1.0 + tr.abs()));
        let sum: f64 = r.ricci_eigenvalues.iter().sum();
        prop_assert!((sum - tr).abs() <= 1e-10 * (1.0 + tr.abs()));
    }

    #[test]
    fn jacobi_potential_vanishes(a in common::matrix(3.0)) {
        let r = curvature_report(&frame(a)).unwrap();
        let q = leaf_shape(&a).norm_squared + r.ricci[2][2];
        prop_assert!(q.abs() <= 1e-10 * (1.0 + a.norm().powi(2)));
        prop_assert!(jacobi_potential(&a).abs() <= 1e-10 * (1.0 + a.norm().powi(2)));
    }

    #[test]
    fn sl2_family_connection_is_levi_civita(l in prop::array::uniform3(0.2..3.0f64)) {
        let fd = FrameMetricData::sl2(&Sl2FrameMetric::new(l).unwrap());
        let k = koszul_connection(&fd).unwrap();
        prop_assert!(k.torsion_residual(&fd) <= 1e-12);
        prop_assert!(k.compatibility_residual(&fd) <= 1e-12 * (1.0 + l.iter().map(|x| x * x).sum::<f64>()));
    }
}

#[test]
fn ricci_spectrum_is_rotation_invariant() {
    let mut rng = common::rng(7);
    for i in 0..20 {
        let a = common::random_matrix(&mut rng, 2.0);
        let theta = 0.3 + 0.29 * i as f64;
        let r = common::rotation(theta);
        let rotated = r.transpose() * a * r;
        let e0 = curvature_report(&frame(a)).unwrap().ricci_eigenvalues;
        let e1 = curvature_report(&frame(rotated)).unwrap().ricci_eigenvalues;
        for (x, y) in e0.iter().zip(&e1) {
            assert!((x - y).abs() <= 1e-9, "{e0:?} vs {e1:?}");
        }
    }
}

#[test]
fn sl2_spectra_agree() {
    let direct = curvature_report(&FrameMetricData::sl2(&Sl2FrameMetric::new([1.0; 3]).unwrap())).unwrap();
    let semidirect = curvature_report(&frame(Matrix2::new(2.0, 0.0, 2.0, 0.0))).unwrap();
    for r in [direct, semidirect] {
        for (e, w) in r.ricci_eigenvalues.iter().zip([-6.0, -6.0, 2.0]) {
            assert!((e - w).abs() < 1e-10, "{:?}", r.ricci_eigenvalues);
        }
    }
    let h3 = curvature_report(&frame(Matrix2::IDENTITY)).unwrap();
    assert!(h3.ricci_eigenvalues.iter().all(|e| (e + 2.0).abs() < 1e-12));
    assert!(h3.sectional.iter().all(|k| (k + 1.0).abs() < 1e-12));
}

#[test]
fn cheeger_examples() {
    let report = |a: Matrix2| cheeger_report(&MetricModel::Semidirect(SemidirectModel::new(a).unwrap())).unwrap();
    let nil = report(Matrix2::new(0.0, 1.0, 0.0, 0.0));
    assert_eq!((nil.cheeger, nil.unimodular), (0.0, true));
    let h3 = report(Matrix2::IDENTITY);
    assert_eq!((h3.cheeger, h3.critical_mean_curvature, h3.unimodular), (2.0, 1.0, false));
    let sl2 = cheeger_report(&MetricModel::Sl2(Sl2FrameMetric::new([1.0; 3]).unwrap())).unwrap();
    assert_eq!((sl2.cheeger, sl2.critical_mean_curvature), (2.0, 1.0));
    let general = cheeger_report(&MetricModel::Sl2(Sl2FrameMetric::new([1.0, 2.0, 1.0]).unwrap()));
    assert!(general.unwrap_err().is_validation());
}
