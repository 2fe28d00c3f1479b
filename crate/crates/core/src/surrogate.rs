//! Quadratic minorizers for sums of path cosines.
//!
//! Both position subproblems maximize a quadratic form `u(p)^H M u(p)` of a
//! unit-modulus field-response vector `u(p)`. Its first-order expansion at an
//! anchor `p⁰` leaves the real part of a linear form,
//!
//! ```text
//! s(p) = Re{ w^T u(p) } = Σ_q |w_q| cos(κ ρ_q(p) + arg w_q),   w^T = u(p⁰)^H M,
//! ```
//!
//! which is then minorized by an isotropic concave quadratic using the
//! curvature bound `2κ² Σ_q |w_q|`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::{path_phase, PathAngles, Position};

#[derive(Debug, Clone, PartialEq)]
pub struct CosineSurrogate {
    coeffs: Vec<Complex64>,
    angles: Vec<PathAngles>,
    wavenumber: f64,
}

impl CosineSurrogate {
    pub fn new(coeffs: Vec<Complex64>, angles: Vec<PathAngles>, wavenumber: f64) -> Self {
        assert_eq!(coeffs.len(), angles.len(), "one coefficient per path");
        Self {
            coeffs,
            angles,
            wavenumber,
        }
    }

    /// Linearizes `u^H M u` at `anchor`, with `u` the field response for
    /// `angles`: `w^T = u(anchor)^H M`.
    pub fn linearize(
        matrix: &DMatrix<Complex64>,
        anchor_response: &DVector<Complex64>,
        angles: &[PathAngles],
        wavenumber: f64,
    ) -> Self {
        let w = matrix.transpose() * anchor_response.map(|z| z.conj());
        Self::new(w.iter().copied().collect(), angles.to_vec(), wavenumber)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    fn phases(&self, p: Position) -> impl Iterator<Item = (f64, f64, Position)> + '_ {
        self.coeffs.iter().zip(&self.angles).map(move |(w, a)| {
            (w.norm(), self.wavenumber * path_phase(p, a) + w.arg(), a.direction())
        })
    }

    pub fn value(&self, p: Position) -> f64 {
        self.phases(p).map(|(m, ph, _)| m * ph.cos()).sum()
    }

    pub fn gradient(&self, p: Position) -> Position {
        let k = self.wavenumber;
        self.phases(p).fold(Position::ORIGIN, |acc, (m, ph, d)| {
            acc + (-k * m * ph.sin()) * d
        })
    }

    /// Analytic Hessian `[[xx, xy], [xy, yy]]`.
    pub fn hessian(&self, p: Position) -> [[f64; 2]; 2] {
        let k2 = self.wavenumber * self.wavenumber;
        let mut h = [[0.0; 2]; 2];
        for (m, ph, d) in self.phases(p) {
            let s = -k2 * m * ph.cos();
            h[0][0] += s * d.x * d.x;
            h[0][1] += s * d.x * d.y;
            h[1][1] += s * d.y * d.y;
        }
        h[1][0] = h[0][1];
        h
    }

    /// `2κ² Σ_q |w_q|`: every Hessian entry of one path term is bounded by
    /// `κ²|w_q|`, and a symmetric 2×2 matrix has spectral norm at most twice
    /// its largest entry.
    pub fn curvature_bound(&self) -> f64 {
        2.0 * self.wavenumber * self.wavenumber * self.coeffs.iter().map(|w| w.norm()).sum::<f64>()
    }

    /// Concave quadratic minorant of `s` anchored at `anchor` with curvature
    /// `bound`.
    pub fn quadratic_minorant(&self, anchor: Position, bound: f64, p: Position) -> f64 {
        let d = p - anchor;
        self.value(anchor) + self.gradient(anchor).dot(d) - 0.5 * bound * d.norm_sqr()
    }
}
