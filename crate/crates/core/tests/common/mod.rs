#![allow(dead_code)]

use homog3::models::{Matrix2, Point};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn matrix(bound: f64) -> impl Strategy<Value = Matrix2> {
    prop::array::uniform4(-bound..bound).prop_map(|[a, b, c, d]| Matrix2::new(a, b, c, d))
}

pub fn point(bound: f64) -> impl Strategy<Value = Point> {
    prop::array::uniform3(-bound..bound).prop_map(Point::from_array)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, bound: f64) -> Matrix2 {
    let mut e = || rng.random_range(-bound..bound);
    Matrix2::new(e(), e(), e(), e())
}

pub fn rotation(theta: f64) -> Matrix2 {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}
