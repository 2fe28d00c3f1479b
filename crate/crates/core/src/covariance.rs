//! Transmit covariance subproblem.
//!
//! For fixed antenna positions the covariance step is
//!
//! ```text
//! maximize    h_E Q h_E^H
//! subject to  h_I Q h_I^H / σ_I² ≥ γ̄,   tr(Q) ≤ P,   Q ⪰ 0.
//! ```
//!
//! A linear objective over the spectrahedron cut by two linear constraints
//! has a rank-one maximizer `Q = P w w^H`, and any component of `w` outside
//! `span{h_E^H, h_I^H}` only wastes power. On that (at most) two-dimensional
//! span the problem has a closed form: maximum-ratio transmission toward the
//! ER when it already meets the SINR floor, otherwise the direction closest
//! to the ER channel that meets the floor with equality.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel;
use crate::linalg;
use crate::{Error, Result};

/// Relative slack used when a span direction is judged to be parallel.
const PARALLEL_TOL: f64 = 1e-12;

/// Hermitian PSD transmit covariance `Q = E{s s^H}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitCovariance(DMatrix<Complex64>);

impl TransmitCovariance {
    /// Validates a square Hermitian matrix whose smallest eigenvalue is at
    /// least `-1e-8 tr(Q) / N`.
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "covariance must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.iter().fold(1.0_f64, |acc, z| acc.max(z.norm()));
        let defect = linalg::hermitian_defect(&m);
        if defect > 1e-12 * scale {
            return Err(Error::NotHermitian(defect));
        }
        let n = m.nrows().max(1) as f64;
        let min_eig = linalg::min_eigenvalue(&m);
        let slack = 1e-8 * linalg::trace_re(&m).max(0.0) / n;
        if min_eig < -slack {
            return Err(Error::NotPsd {
                min_eigenvalue: min_eig,
            });
        }
        Ok(Self(m))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    /// `power · w w^H`.
    pub fn rank_one(w: &DVector<Complex64>, power: f64) -> Self {
        Self(linalg::outer(w) * Complex64::new(power, 0.0))
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> f64 {
        linalg::trace_re(&self.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct QSolution {
    pub q: TransmitCovariance,
    pub harvested_w: f64,
    pub achieved_sinr: f64,
    pub status: QStatus,
}

impl QSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QStatus::Optimal
    }
}

/// SINR of full-power MRT toward the IR, `P ‖h_I‖² / σ_I²`; the covariance
/// subproblem is feasible iff this reaches `γ̄`.
pub fn max_achievable_sinr(h_i: &DVector<Complex64>, power: f64, sigma_i2: f64) -> f64 {
    power * linalg::norm_sqr(h_i) / sigma_i2
}

/// Orthonormal basis (as columns) of `span{h_E^H, h_I^H}`, ER direction first.
///
/// One column is returned when `h_I` is zero or parallel to `h_E`.
pub fn reduce_basis(h_e: &DVector<Complex64>, h_i: &DVector<Complex64>) -> Result<DMatrix<Complex64>> {
    if h_e.len() != h_i.len() {
        return Err(Error::DimensionMismatch(format!(
            "ER channel has {} entries, IR channel {}",
            h_e.len(),
            h_i.len()
        )));
    }
    let a = conj(h_e);
    let a_norm = a.norm();
    if a_norm == 0.0 {
        return Err(Error::ZeroChannel);
    }
    let u1 = a / Complex64::new(a_norm, 0.0);
    let b = conj(h_i);
    let b_norm = b.norm();

    let mut res = b.clone();
    // two Gram-Schmidt passes
    for _ in 0..2 {
        let proj = linalg::inner(&u1, &res);
        res -= &u1 * proj;
    }
    let res_norm = res.norm();
    if b_norm == 0.0 || res_norm <= PARALLEL_TOL * b_norm {
        return Ok(DMatrix::from_columns(&[u1]));
    }
    let u2 = res / Complex64::new(res_norm, 0.0);
    Ok(DMatrix::from_columns(&[u1, u2]))
}

/// Solves the covariance subproblem exactly.
///
/// Infeasibility (`P ‖h_I‖² < γ̄ σ_I²`) is reported through
/// [`QStatus::Infeasible`] together with the SINR-maximizing covariance.
pub fn solve_covariance(
    h_e: &DVector<Complex64>,
    h_i: &DVector<Complex64>,
    power: f64,
    gamma_bar: f64,
    sigma_i2: f64,
) -> Result<QSolution> {
    if !(sigma_i2 > 0.0) {
        return Err(Error::NonPositiveNoise(sigma_i2));
    }
    if h_e.len() != h_i.len() {
        return Err(Error::DimensionMismatch(format!(
            "ER channel has {} entries, IR channel {}",
            h_e.len(),
            h_i.len()
        )));
    }
    let finite = h_e.iter().chain(h_i.iter()).all(|z| z.re.is_finite() && z.im.is_finite());
    if !finite || !power.is_finite() || !gamma_bar.is_finite() {
        return Err(Error::Config("non-finite covariance subproblem input".into()));
    }
    let n = h_e.len();
    let gamma = gamma_bar.max(0.0);
    let feasible = max_achievable_sinr(h_i, power, sigma_i2) >= gamma;
    let b_norm = linalg::norm_sqr(h_i).sqrt();

    if !feasible {
        let q = if b_norm > 0.0 {
            TransmitCovariance::rank_one(&(conj(h_i) / Complex64::new(b_norm, 0.0)), power)
        } else {
            TransmitCovariance::zeros(n)
        };
        return finish(q, h_e, h_i, sigma_i2, QStatus::Infeasible);
    }

    if linalg::norm_sqr(h_e) == 0.0 {
        // Objective is identically zero: just meet the SINR floor.
        let q = if gamma > 0.0 {
            let w = conj(h_i) / Complex64::new(b_norm, 0.0);
            TransmitCovariance::rank_one(&w, gamma * sigma_i2 / (b_norm * b_norm))
        } else {
            TransmitCovariance::zeros(n)
        };
        return finish(q, h_e, h_i, sigma_i2, QStatus::Optimal);
    }

    let basis = reduce_basis(h_e, h_i)?;
    let u1: DVector<Complex64> = basis.column(0).into();
    let b = conj(h_i);
    let beta1 = linalg::inner(&u1, &b);
    // |h_I w|² needed per unit power
    let need = gamma * sigma_i2 / power;

    let w = if beta1.norm_sqr() >= need || basis.ncols() == 1 {
        u1
    } else {
        let u2: DVector<Complex64> = basis.column(1).into();
        let beta2 = linalg::inner(&u2, &b).norm();
        let peak = beta2.atan2(beta1.norm());
        let radius = beta1.norm().hypot(beta2);
        let alpha = (peak - (need.sqrt() / radius).min(1.0).acos()).clamp(0.0, FRAC_PI_2);
        let phase = if beta1.norm() > 0.0 {
            beta1.conj() / beta1.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        u1 * Complex64::new(alpha.cos(), 0.0) + u2 * (phase * alpha.sin())
    };
    finish(TransmitCovariance::rank_one(&w, power), h_e, h_i, sigma_i2, QStatus::Optimal)
}

fn finish(
    q: TransmitCovariance,
    h_e: &DVector<Complex64>,
    h_i: &DVector<Complex64>,
    sigma_i2: f64,
    status: QStatus,
) -> Result<QSolution> {
    let harvested_w = channel::harvested_power(h_e, &q)?;
    let achieved_sinr = channel::sinr(h_i, &q, sigma_i2)?;
    Ok(QSolution {
        q,
        harvested_w,
        achieved_sinr,
        status,
    })
}

/// Brute-force check of [`solve_covariance`]: the best full-power rank-one
/// direction `w = cos α u₁ + sin α e^{jψ} u₂` on a `density × density` grid
/// of `α ∈ [0, π/2]`, `ψ ∈ [0, 2π)` that meets the SINR floor.
pub fn oracle_rank1_grid(
    h_e: &DVector<Complex64>,
    h_i: &DVector<Complex64>,
    power: f64,
    gamma_bar: f64,
    sigma_i2: f64,
    density: usize,
) -> Result<f64> {
    let basis = reduce_basis(h_e, h_i)?;
    let density = density.max(2);
    let need = gamma_bar.max(0.0) * sigma_i2;
    let u1: DVector<Complex64> = basis.column(0).into();
    let a = conj(h_e);
    let b = conj(h_i);
    let (a1, b1) = (linalg::inner(&a, &u1), linalg::inner(&b, &u1));
    let (a2, b2) = if basis.ncols() == 2 {
        let u2: DVector<Complex64> = basis.column(1).into();
        (linalg::inner(&a, &u2), linalg::inner(&b, &u2))
    } else {
        (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
    };

    let alpha_steps = if basis.ncols() == 2 { density } else { 1 };
    let psi_steps = if basis.ncols() == 2 { density } else { 1 };
    let mut best: Option<f64> = None;
    for i in 0..alpha_steps {
        let alpha = if alpha_steps == 1 {
            0.0
        } else {
            FRAC_PI_2 * i as f64 / (alpha_steps - 1) as f64
        };
        let (s, c) = alpha.sin_cos();
        for j in 0..psi_steps {
            let psi = 2.0 * PI * j as f64 / psi_steps as f64;
            let rot = Complex64::from_polar(s, psi);
            let ir = power * (b1 * c + b2 * rot).norm_sqr();
            if ir < need {
                continue;
            }
            let er = power * (a1 * c + a2 * rot).norm_sqr();
            if best.is_none_or(|v| er > v) {
                best = Some(er);
            }
        }
    }
    best.ok_or(Error::NoFeasibleGridPoint)
}

fn conj(h: &DVector<Complex64>) -> DVector<Complex64> {
    h.map(|z| z.conj())
}
