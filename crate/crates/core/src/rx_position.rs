//! SCA update of the energy-receiver antenna position.
//!
//! With `t` and `Q` fixed the harvested power is `x(r) = f(r)^H A f(r)` with
//! `A = Σ_E G(t) Q G(t)^H Σ_E^H`. Each iteration maximizes a concave
//! quadratic minorant of `x` over the box `C_r`; because the minorant is
//! isotropic the constrained maximizer is the clipped unconstrained one.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::{field_response_matrix, field_response_rx, ChannelGeometry, Position, Region};
use crate::covariance::TransmitCovariance;
use crate::linalg;
use crate::surrogate::CosineSurrogate;
use crate::{Error, Result};

/// Inner SCA loop controls, shared by the receive and transmit steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerOptions {
    /// Stop when the relative objective increase falls below this.
    pub inner_tol: f64,
    pub max_inner: usize,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self {
            inner_tol: 1e-5,
            max_inner: 100,
        }
    }
}

/// `A = Σ_E G(t) Q G(t)^H Σ_E^H`, independent of `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct RxGainMatrix(DMatrix<Complex64>);

impl RxGainMatrix {
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }
}

pub fn build_a(t: &[Position], q: &TransmitCovariance, geom: &ChannelGeometry) -> Result<RxGainMatrix> {
    if q.dim() != t.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} antennas but covariance is {}x{}",
            t.len(),
            q.dim(),
            q.dim()
        )));
    }
    let sg = geom.sigma_e() * field_response_matrix(t, geom);
    let a = &sg * q.matrix() * sg.adjoint();
    Ok(RxGainMatrix((&a + a.adjoint()) * Complex64::new(0.5, 0.0)))
}

/// `x(r) = f(r)^H A f(r)`.
pub fn rx_objective(r: Position, a: &RxGainMatrix, geom: &ChannelGeometry) -> f64 {
    let f = field_response_rx(r, geom.er_rx_angles(), geom.wavelength());
    linalg::column_quadratic_form(&f, &a.0)
}

/// Linearization of `x` at `r_i` together with its curvature bound `δ`.
#[derive(Debug, Clone)]
pub struct RxSurrogate {
    pub linear: CosineSurrogate,
    pub r_i: Position,
    pub delta: f64,
}

impl RxSurrogate {
    pub fn new(r_i: Position, a: &RxGainMatrix, geom: &ChannelGeometry) -> Self {
        let f = field_response_rx(r_i, geom.er_rx_angles(), geom.wavelength());
        let linear = CosineSurrogate::linearize(&a.0, &f, geom.er_rx_angles(), geom.wavenumber());
        let delta = delta_bound(linear.coeffs(), geom);
        Self { linear, r_i, delta }
    }

    /// `x̄(r) = Re{f(r_i)^H A f(r)}`.
    pub fn value(&self, r: Position) -> f64 {
        self.linear.value(r)
    }

    /// The full minorant of `x`, constants included:
    /// `2[x̄(rⁱ) + ∇x̄(rⁱ)ᵀ(r − rⁱ) − δ/2‖r − rⁱ‖²] − x(rⁱ)`.
    pub fn lower_bound(&self, r: Position) -> f64 {
        let x_i = self.linear.value(self.r_i);
        2.0 * self.linear.quadratic_minorant(self.r_i, self.delta, r) - x_i
    }

    /// Unconstrained maximizer `rⁱ + ∇x̄(rⁱ)/δ`.
    pub fn unconstrained_step(&self) -> Position {
        self.r_i + (1.0 / self.delta) * self.linear.gradient(self.r_i)
    }
}

/// `∇x̄(r)`.
pub fn surrogate_gradient(r: Position, surrogate: &RxSurrogate) -> Position {
    surrogate.linear.gradient(r)
}

/// `δ = 2κ² Σ_q |w_q|`, a valid bound `δI ⪰ ∇²x̄(r)` for every `r`.
pub fn delta_bound(w: &[Complex64], geom: &ChannelGeometry) -> f64 {
    let k = geom.wavenumber();
    2.0 * k * k * w.iter().map(|z| z.norm()).sum::<f64>()
}

/// Maximizer of the surrogate over `C_r`. A zero `δ` leaves `rⁱ` in place.
pub fn sca_step_rx(surrogate: &RxSurrogate, region: &Region) -> Position {
    if !(surrogate.delta > 0.0) {
        return surrogate.r_i;
    }
    region.clamp(surrogate.unconstrained_step())
}

#[derive(Debug, Clone)]
pub struct RxOutcome {
    pub position: Position,
    pub iterations: usize,
    /// `x(rⁱ)` for every visited iterate, starting with `r_init`.
    pub objective_trace: Vec<f64>,
}

pub fn optimize_rx(
    r_init: Position,
    a: &RxGainMatrix,
    geom: &ChannelGeometry,
    region: &Region,
    opts: &InnerOptions,
) -> Result<RxOutcome> {
    if !region.contains(r_init, 1e-12) {
        return Err(Error::OutsideRegion {
            x: r_init.x,
            y: r_init.y,
        });
    }
    let mut r = region.clamp(r_init);
    let mut x = rx_objective(r, a, geom);
    let mut trace = vec![x];
    let mut iterations = 0;
    while iterations < opts.max_inner {
        iterations += 1;
        let surrogate = RxSurrogate::new(r, a, geom);
        if !(surrogate.delta > 0.0) {
            break;
        }
        let next = sca_step_rx(&surrogate, region);
        let x_next = rx_objective(next, a, geom);
        trace.push(x_next);
        let gain = (x_next - x) / x.abs().max(f64::MIN_POSITIVE);
        r = next;
        x = x_next;
        if gain < opts.inner_tol {
            break;
        }
    }
    Ok(RxOutcome {
        position: r,
        iterations,
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{self, PathAngles};
    use crate::surrogate::fd;
    use crate::testutil::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Instance {
        geom: ChannelGeometry,
        t: Vec<Position>,
        q: TransmitCovariance,
        a: RxGainMatrix,
    }

    fn instance(rng: &mut impl Rng, l: usize) -> Instance {
        let geom = random_geometry(rng, l, l);
        let t = random_positions(rng, 4);
        let q = random_psd(rng, 4);
        let a = build_a(&t, &q, &geom).unwrap();
        Instance { geom, t, q, a }
    }

    fn random_in(rng: &mut impl Rng, region: &Region) -> Position {
        Position::new(
            rng.random_range(region.x_min..=region.x_max),
            rng.random_range(region.y_min..=region.y_max),
        )
    }

    #[test]
    fn build_a_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let geom = random_geometry(&mut rng, 5, 4);
        let t = random_positions(&mut rng, 3);
        let a = build_a(&t, &TransmitCovariance::zeros(3), &geom).unwrap();
        assert!(a.matrix().iter().all(|z| z.norm() == 0.0));
        assert!(build_a(&t, &TransmitCovariance::zeros(2), &geom).is_err());
        for _ in 0..20 {
            let inst = instance(&mut rng, 6);
            let m = inst.a.matrix();
            assert!(linalg::hermitian_defect(m) <= 1e-10 * linalg::trace_re(m));
            assert!(linalg::min_eigenvalue(m) >= -1e-10 * linalg::trace_re(m));
        }
    }

    #[test]
    fn objective_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let geom = random_geometry(&mut rng, 3, 5);
        let eye = RxGainMatrix(DMatrix::identity(5, 5));
        let zero = RxGainMatrix(DMatrix::zeros(5, 5));
        for r in random_positions(&mut rng, 5) {
            assert!((rx_objective(r, &eye, &geom) - 5.0).abs() < 1e-12);
            assert_eq!(rx_objective(r, &zero, &geom), 0.0);
        }
    }

    #[test]
    fn objective_is_harvested_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..20 {
            let inst = instance(&mut rng, 7);
            let r = random_positions(&mut rng, 1)[0];
            let h = inst.geom.er_channel(&inst.t, r);
            let w = channel::harvested_power(&h, &inst.q).unwrap();
            let x = rx_objective(r, &inst.a, &inst.geom);
            assert!((w - x).abs() <= 1e-9 * w.max(1.0), "{w} vs {x}");
        }
    }

    #[test]
    fn gradient_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let inst = instance(&mut rng, 4);
        let zero = RxGainMatrix(DMatrix::zeros(4, 4));
        let s = RxSurrogate::new(Position::new(0.2, 0.3), &zero, &inst.geom);
        assert_eq!(surrogate_gradient(Position::new(1.0, -1.0), &s), Position::ORIGIN);
        assert_eq!(s.delta, 0.0);

        for _ in 0..100 {
            let inst = instance(&mut rng, 6);
            let r_i = random_positions(&mut rng, 1)[0];
            let s = RxSurrogate::new(r_i, &inst.a, &inst.geom);
            let r = random_positions(&mut rng, 1)[0];
            let g = surrogate_gradient(r, &s);
            let g_fd = fd::central_gradient(|p| s.value(p), r, 1e-6);
            assert!(fd::relative_error(g_fd, g, 1e-8 * s.delta) <= 1e-5);
        }
    }

    #[test]
    fn single_path_crest_is_stationary() {
        let a = PathAngles::new(0.7, 2.1).unwrap();
        let geom = ChannelGeometry::new(
            1.0,
            vec![a],
            vec![a],
            vec![a],
            DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)),
            DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)),
            Position::ORIGIN,
        )
        .unwrap();
        let s = RxSurrogate {
            linear: CosineSurrogate::new(vec![Complex64::new(1.0, 0.0)], vec![a], geom.wavenumber()),
            r_i: Position::ORIGIN,
            delta: delta_bound(&[Complex64::new(1.0, 0.0)], &geom),
        };
        assert!(surrogate_gradient(Position::ORIGIN, &s).norm() < 1e-15);
        assert!((s.delta - 78.95683520871486).abs() < 1e-12);
    }

    #[test]
    fn delta_dominates_finite_difference_hessian() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let inst = instance(&mut rng, 8);
        let s = RxSurrogate::new(Position::new(0.1, -0.2), &inst.a, &inst.geom);
        for _ in 0..100 {
            let r = random_positions(&mut rng, 1)[0];
            let h = fd::central_hessian(|p| s.value(p), r, 1e-4);
            assert!(fd::bound_margin(s.delta, h) >= -1e-6 * s.delta);
        }
    }

    #[test]
    fn bound_chain_is_tangent_and_global() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        for _ in 0..20 {
            let inst = instance(&mut rng, 6);
            let r_i = random_positions(&mut rng, 1)[0];
            let s = RxSurrogate::new(r_i, &inst.a, &inst.geom);
            let x_i = rx_objective(r_i, &inst.a, &inst.geom);
            // x̄(rⁱ) = x(rⁱ) is what makes the chain tight
            assert!((s.value(r_i) - x_i).abs() <= 1e-9 * x_i.max(1.0));
            assert!((s.lower_bound(r_i) - x_i).abs() <= 1e-9 * x_i.max(1.0));
            for r in random_positions(&mut rng, 100) {
                assert!(s.lower_bound(r) <= rx_objective(r, &inst.a, &inst.geom) + 1e-9);
            }
        }
    }

    #[test]
    fn step_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let inst = instance(&mut rng, 5);
        let region = Region::new(0.0, 3.0, 0.0, 3.0).unwrap();
        let s = RxSurrogate::new(Position::new(1.0, 1.0), &inst.a, &inst.geom);
        let inside = s.unconstrained_step();
        if region.contains(inside, 0.0) {
            assert_eq!(sca_step_rx(&s, &region), inside);
        }
        // r* = (10, 10): zero gradient anchored there
        let plain = RxSurrogate {
            linear: CosineSurrogate::new(vec![], vec![], 1.0),
            r_i: Position::new(10.0, 10.0),
            delta: 1.0,
        };
        assert_eq!(sca_step_rx(&plain, &region), Position::new(3.0, 3.0));
    }

    #[test]
    fn step_matches_grid_maximization() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let region = Region::centered_square(1.0).unwrap();
        for _ in 0..3 {
            let inst = instance(&mut rng, 6);
            let r_i = random_in(&mut rng, &region);
            let s = RxSurrogate::new(r_i, &inst.a, &inst.geom);
            let surrogate_at = |r: Position| s.linear.quadratic_minorant(r_i, s.delta, r);
            let best = sca_step_rx(&s, &region);
            let best_val = surrogate_at(best);
            let n = 2000;
            let hx = region.width() / (n - 1) as f64;
            let mut grid_best = f64::NEG_INFINITY;
            for i in 0..n {
                for j in 0..n {
                    let p = Position::new(region.x_min + i as f64 * hx, region.y_min + j as f64 * hx);
                    grid_best = grid_best.max(surrogate_at(p));
                }
            }
            assert!(best_val >= grid_best - 1e-12);
            let slope = s.delta * (best - s.unconstrained_step()).norm();
            let radius = hx * std::f64::consts::SQRT_2 / 2.0;
            assert!(best_val - grid_best <= slope * radius + 0.5 * s.delta * radius * radius + 1e-12);
        }
    }

    #[test]
    fn zero_gain_matrix_is_a_no_op() {
        let mut rng = ChaCha8Rng::seed_from_u64(38);
        let geom = random_geometry(&mut rng, 4, 4);
        let region = Region::centered_square(2.0).unwrap();
        let zero = RxGainMatrix(DMatrix::zeros(4, 4));
        let out = optimize_rx(Position::new(0.3, -0.2), &zero, &geom, &region, &InnerOptions::default()).unwrap();
        assert_eq!(out.position, Position::new(0.3, -0.2));
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn single_path_objective_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(39);
        let geom = random_geometry(&mut rng, 1, 1);
        let t = random_positions(&mut rng, 3);
        let q = random_psd(&mut rng, 3);
        let a = build_a(&t, &q, &geom).unwrap();
        let region = Region::centered_square(2.0).unwrap();
        let r0 = Position::new(0.4, 0.1);
        let out = optimize_rx(r0, &a, &geom, &region, &InnerOptions::default()).unwrap();
        assert!(out.position.distance(r0) < 1e-12);
    }

    #[test]
    fn rejects_start_outside_region() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let inst = instance(&mut rng, 3);
        let region = Region::centered_square(1.0).unwrap();
        assert!(matches!(
            optimize_rx(Position::new(2.0, 0.0), &inst.a, &inst.geom, &region, &InnerOptions::default()),
            Err(Error::OutsideRegion { .. })
        ));
    }

    #[test]
    fn iterates_are_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let region = Region::centered_square(3.0).unwrap();
        for _ in 0..20 {
            let inst = instance(&mut rng, 14);
            let start = random_in(&mut rng, &region);
            let out = optimize_rx(start, &inst.a, &inst.geom, &region, &InnerOptions::default()).unwrap();
            for pair in out.objective_trace.windows(2) {
                assert!(pair[1] >= pair[0] - 1e-9 * pair[0].abs());
            }
            assert!(region.contains(out.position, 0.0));
        }
    }

    /// `x(r)` is multimodal over a few wavelengths, so a single start can stall
    /// far below the best sample. Starts on a half-wavelength grid cover
    /// every basin wide enough to matter.
    #[test]
    fn grid_started_optimum_beats_sampling_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(39);
        let region = Region::centered_square(3.0).unwrap();
        for _ in 0..10 {
            let inst = instance(&mut rng, 14);
            let mut x = 0.0_f64;
            for i in 0..7 {
                for j in 0..7 {
                    let start = Position::new(-1.5 + 0.5 * i as f64, -1.5 + 0.5 * j as f64);
                    let out = optimize_rx(start, &inst.a, &inst.geom, &region, &InnerOptions::default()).unwrap();
                    x = x.max(*out.objective_trace.last().unwrap());
                }
            }
            let best = (0..10_000)
                .map(|_| rx_objective(random_in(&mut rng, &region), &inst.a, &inst.geom))
                .fold(0.0, f64::max);
            assert!(x >= 0.95 * best, "{x} vs {best}");
        }
    }
}
