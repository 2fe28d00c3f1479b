//! Random instances shared by unit tests.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{ChannelGeometry, PathAngles, Position};
use crate::covariance::TransmitCovariance;

pub fn random_angles(rng: &mut impl Rng, l: usize) -> Vec<PathAngles> {
    (0..l)
        .map(|_| PathAngles::new(rng.random_range(0.0..PI), rng.random_range(0.0..PI)).unwrap())
        .collect()
}

pub fn random_cmatrix(rng: &mut impl Rng, r: usize, c: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(r, c, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

pub fn random_cvec(rng: &mut impl Rng, n: usize) -> DVector<Complex64> {
    DVector::from_fn(n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

pub fn random_geometry(rng: &mut impl Rng, lt: usize, lr: usize) -> ChannelGeometry {
    ChannelGeometry::new(
        1.0,
        random_angles(rng, lt),
        random_angles(rng, lr),
        random_angles(rng, lr),
        random_cmatrix(rng, lr, lt),
        random_cmatrix(rng, lr, lt),
        Position::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
    )
    .unwrap()
}

pub fn random_positions(rng: &mut impl Rng, n: usize) -> Vec<Position> {
    (0..n)
        .map(|_| Position::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
        .collect()
}

pub fn random_psd(rng: &mut impl Rng, n: usize) -> TransmitCovariance {
    let a = random_cmatrix(rng, n, n);
    let m = &a * a.adjoint();
    // symmetrize away rounding
    let m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    TransmitCovariance::new(m).unwrap()
}
