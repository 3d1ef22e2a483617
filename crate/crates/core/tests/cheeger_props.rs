mod common;

use homog3::cheeger::{box_closed_form, box_ratio_sweep, box_report, quotient_end_report, BoxDomain, Lattice};
use homog3::models::Matrix2;
use homog3::Error;
use rand::Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

#[test]
fn quadrature_matches_closed_forms_for_diagonal_a() {
    for a in [Matrix2::IDENTITY, Matrix2::diag(2.0, 1.0), Matrix2::diag(0.5, -0.25)] {
        for n in [1, 4, 64] {
            for t0 in [0.5, 1.0, 8.0] {
                let r = box_report(&BoxDomain::new(a, n, t0, Lattice::UNIT_SQUARE).unwrap());
                let c = r.closed_form.expect("diagonal A has a closed form");
                for (q, e) in [(r.bottom, c.bottom), (r.top, c.top), (r.sides, c.sides), (r.volume, c.volume), (r.ratio, c.ratio)] {
                    assert!(rel(q, e) <= 1e-8, "A={a:?} n={n} t0={t0}: {q} vs {e}");
                }
            }
        }
    }
}

#[test]
fn closed_form_on_an_eigenbasis_lattice() {
    let a = Matrix2::new(2.0, 0.0, 2.0, 0.0);
    let lattice = Lattice::new([1.0, 1.0], [0.0, 1.0]).unwrap();
    let b = BoxDomain::new(a, 8, 2.0, lattice).unwrap();
    let c = box_closed_form(&b).unwrap();
    let r = box_report(&b);
    assert!(rel(r.sides, c.sides) <= 1e-8 && rel(r.volume, c.volume) <= 1e-8);
    assert!(box_closed_form(&BoxDomain::new(a, 8, 2.0, Lattice::UNIT_SQUARE).unwrap()).is_none());
}

#[test]
fn every_ratio_exceeds_the_trace() {
    for a in [Matrix2::IDENTITY, Matrix2::new(2.0, 0.0, 2.0, 0.0), Matrix2::diag(2.0, 1.0), Matrix2::new(1.0, 0.5, -0.3, 0.2)] {
        let rows = box_ratio_sweep(a, Lattice::UNIT_SQUARE, &[4, 8, 16, 32, 64], &[1.0, 2.0, 4.0, 8.0]).unwrap();
        assert_eq!(rows.len(), 20);
        for r in rows {
            assert!(r.ratio > a.trace(), "{r:?}");
            assert_eq!(r.trace_a, a.trace());
        }
    }
}

#[test]
fn sweep_is_row_major() {
    let rows = box_ratio_sweep(Matrix2::IDENTITY, Lattice::UNIT_SQUARE, &[2, 3], &[1.0, 2.0]).unwrap();
    let keys: Vec<(usize, f64)> = rows.iter().map(|r| (r.n, r.t0)).collect();
    assert_eq!(keys, [(2, 1.0), (2, 2.0), (3, 1.0), (3, 2.0)]);
}

#[test]
fn end_volume_identity() {
    let mut rng = common::rng(21);
    for a in [Matrix2::IDENTITY, Matrix2::new(2.0, 0.0, 2.0, 0.0), Matrix2::new(0.7, 1.3, -0.4, 0.6)] {
        for _ in 0..10 {
            let a1 = [rng.random_range(0.5..2.0), rng.random_range(-0.5..0.5)];
            let a2 = [rng.random_range(-0.5..0.5), rng.random_range(0.5..2.0)];
            let lattice = Lattice::new(a1, a2).unwrap();
            for t in [0.0, 1.0, 5.0] {
                let r = quotient_end_report(a, lattice, t).unwrap();
                assert!(r.residual <= 1e-8 && r.quadrature_residual <= 1e-8, "{r:?}");
                let next = quotient_end_report(a, lattice, t + 1.0).unwrap();
                let decay = (-a.trace()).exp();
                assert!((next.torus_area / r.torus_area - decay).abs() <= 1e-10);
                assert!((next.quadrature_area / r.quadrature_area - decay).abs() <= 1e-10, "{a:?} t={t}: {} vs {decay}", next.quadrature_area / r.quadrature_area);
                assert!(rel(next.end_volume / r.end_volume, decay) <= 1e-10);
            }
        }
    }
}

#[test]
fn end_of_a_unimodular_quotient_is_infinite() {
    let err = quotient_end_report(Matrix2::new(1.0, 0.0, 0.0, -1.0), Lattice::UNIT_SQUARE, 0.0).unwrap_err();
    assert!(matches!(err, Error::InfiniteVolume(_)));
    assert!(!err.is_validation());
}

#[test]
fn degenerate_inputs_are_rejected() {
    assert!(BoxDomain::new(Matrix2::IDENTITY, 0, 1.0, Lattice::UNIT_SQUARE).is_err());
    assert!(BoxDomain::new(Matrix2::IDENTITY, 4, 0.0, Lattice::UNIT_SQUARE).is_err());
    assert!(Lattice::new([1.0, 2.0], [2.0, 4.0]).is_err());
}
