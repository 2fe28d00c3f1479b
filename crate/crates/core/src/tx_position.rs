//! SCA update of a single transmit antenna position.
//!
//! The position step works on channel gains rather than on the covariance
//! weighted power: antenna `n` maximizes `y(t_n) = |h_{E,n}(t_n)|² =
//! g(t_n)^H B g(t_n)` with `B = Σ_E^H f(r) f(r)^H Σ_E`, while keeping
//! `‖h_I‖² ≥ γ̄ σ_I² / P` (the condition under which the covariance step stays
//! feasible) and the spacing to every other antenna. Each SCA iteration
//! replaces the objective and the IR gain `z(t_n) = g^H C g` by quadratic
//! minorants and the spacing constraints by tangent half-planes, which
//! leaves a 2-D convex QCQP solved exactly by [`crate::qcqp`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::{field_response_rx, field_response_tx, AntennaLayout, ChannelGeometry, Position, Region};
use crate::linalg;
use crate::qcqp::{self, Disk, HalfPlane, TxConstraintSet};
use crate::rx_position::InnerOptions;
use crate::surrogate::CosineSurrogate;
use crate::Result;

/// Rank-one Hermitian gain matrix `v v^H` over the transmit paths
/// (`B_n` for the ER link, `C_n` for the IR link).
#[derive(Debug, Clone, PartialEq)]
pub struct TxGainMatrix {
    factor: DVector<Complex64>,
    matrix: DMatrix<Complex64>,
}

impl TxGainMatrix {
    fn from_factor(factor: DVector<Complex64>) -> Self {
        let matrix = linalg::outer(&factor);
        Self { factor, matrix }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// `v` with `matrix = v v^H`.
    pub fn factor(&self) -> &DVector<Complex64> {
        &self.factor
    }
}

/// `B_n = Σ_E^H f(r) f(r)^H Σ_E`.
pub fn build_b(r: Position, geom: &ChannelGeometry) -> TxGainMatrix {
    let f = field_response_rx(r, geom.er_rx_angles(), geom.wavelength());
    TxGainMatrix::from_factor(geom.sigma_e().adjoint() * f)
}

/// `C_n = Σ_I^H f(r₀) f(r₀)^H Σ_I`.
pub fn build_c(geom: &ChannelGeometry) -> TxGainMatrix {
    let f = field_response_rx(geom.r0(), geom.ir_rx_angles(), geom.wavelength());
    TxGainMatrix::from_factor(geom.sigma_i().adjoint() * f)
}

/// `g(t_n)^H M g(t_n)`.
pub fn tx_objective(t_n: Position, m: &TxGainMatrix, geom: &ChannelGeometry) -> f64 {
    linalg::column_quadratic_form(&field_response_tx(t_n, geom), &m.matrix)
}

/// Linearizations of the objective (`ȳ`, bound `β_n`) and of the IR gain
/// (`z̄`, bound `γ_n`) at `t_i`.
#[derive(Debug, Clone)]
pub struct TxSurrogate {
    pub objective: CosineSurrogate,
    pub beta: f64,
    pub sinr: CosineSurrogate,
    pub gamma_n: f64,
    pub t_i: Position,
}

impl TxSurrogate {
    /// Maximizer of `−β/2‖t‖² + (∇ȳ(tⁱ) + β tⁱ)ᵀ t` without constraints.
    pub fn target(&self) -> Position {
        self.t_i + (1.0 / self.beta) * self.objective.gradient(self.t_i)
    }

    /// Full minorant of `y`: `2[ȳ(tⁱ) + ∇ȳᵀ(t − tⁱ) − β/2‖t − tⁱ‖²] − y(tⁱ)`.
    pub fn objective_lower_bound(&self, t: Position) -> f64 {
        2.0 * self.objective.quadratic_minorant(self.t_i, self.beta, t) - self.objective.value(self.t_i)
    }

    /// Full minorant of `z`, same construction with `γ_n`.
    pub fn sinr_lower_bound(&self, t: Position) -> f64 {
        2.0 * self.sinr.quadratic_minorant(self.t_i, self.gamma_n, t) - self.sinr.value(self.t_i)
    }
}

pub fn tx_surrogates(t_i: Position, b: &TxGainMatrix, c: &TxGainMatrix, geom: &ChannelGeometry) -> TxSurrogate {
    let g = field_response_tx(t_i, geom);
    let k = geom.wavenumber();
    let objective = CosineSurrogate::linearize(&b.matrix, &g, geom.tx_angles(), k);
    let sinr = CosineSurrogate::linearize(&c.matrix, &g, geom.tx_angles(), k);
    TxSurrogate {
        beta: objective.curvature_bound(),
        gamma_n: sinr.curvature_bound(),
        objective,
        sinr,
        t_i,
    }
}

/// Tangent restriction of `‖t_n − t_l‖ ≥ D` at `t_n_i`:
/// `aᵀ t_n ≥ D + aᵀ t_l` with `a = (t_n_i − t_l)/‖t_n_i − t_l‖`.
pub fn linearize_distance(t_n_i: Position, t_l: Position, d: f64) -> HalfPlane {
    let mut anchor = t_n_i;
    if (anchor - t_l).norm() < 1e-12 {
        anchor = anchor + Position::new(1e-9, 0.0);
    }
    let diff = anchor - t_l;
    let a = (1.0 / diff.norm()) * diff;
    HalfPlane {
        normal: a,
        offset: d + a.dot(t_l),
    }
}

/// Convex restriction of the IR gain constraint for one SCA iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SinrRegion {
    /// Implied by the other antennas alone.
    Unconstrained,
    Disk(Disk),
    /// The surrogate constraint is empty.
    Infeasible,
}

/// Rewrites
/// `−γ_n‖t‖² + 2(∇z̄ + γ_n tⁱ)ᵀt − 2∇z̄ᵀtⁱ − γ_n‖tⁱ‖² + z(tⁱ) + ‖h_I^t‖² − σ_I²γ̄/P ≥ 0`
/// as `‖t − c‖² ≤ ρ²` with `c = tⁱ + ∇z̄/γ_n`.
pub fn sinr_surrogate_constraint(
    surrogate: &TxSurrogate,
    h_i_others: &DVector<Complex64>,
    gamma_bar: f64,
    sigma_i2: f64,
    power: f64,
) -> SinrRegion {
    let others = linalg::norm_sqr(h_i_others);
    let need = sigma_i2 * gamma_bar / power;
    let slack = others - need;
    if !(surrogate.gamma_n > 0.0) {
        // w_C = 0, so z(tⁱ) = 0 and the minorant is flat
        return if slack >= 0.0 {
            SinrRegion::Unconstrained
        } else {
            SinrRegion::Infeasible
        };
    }
    let g = surrogate.sinr.gradient(surrogate.t_i);
    let z_i = surrogate.sinr.value(surrogate.t_i);
    let gamma = surrogate.gamma_n;
    let radius2 = g.norm_sqr() / (gamma * gamma) + (z_i + slack) / gamma;
    if radius2 < 0.0 {
        return SinrRegion::Infeasible;
    }
    SinrRegion::Disk(Disk {
        center: surrogate.t_i + (1.0 / gamma) * g,
        radius2,
    })
}

/// Maximizes the objective minorant over the constraint set, i.e. projects
/// [`TxSurrogate::target`] onto it.
pub fn solve_qcqp_2d(surrogate: &TxSurrogate, constraints: &TxConstraintSet) -> Result<Position> {
    if !(surrogate.beta > 0.0) {
        return Ok(surrogate.t_i);
    }
    qcqp::project(surrogate.target(), constraints)
}

/// IR channel entries of every antenna except `n`.
pub fn ir_others(t: &[Position], n: usize, geom: &ChannelGeometry) -> DVector<Complex64> {
    let h = geom.ir_channel(t);
    DVector::from_iterator(
        h.len().saturating_sub(1),
        h.iter().enumerate().filter(|(l, _)| *l != n).map(|(_, z)| *z),
    )
}

/// Scenario constants the transmit step needs.
#[derive(Debug, Clone, Copy)]
pub struct TxProblem<'a> {
    pub geom: &'a ChannelGeometry,
    pub region: &'a Region,
    pub min_distance: f64,
    pub gamma_bar: f64,
    pub sigma_i2: f64,
    pub power: f64,
}

#[derive(Debug, Clone)]
pub struct TxOutcome {
    pub position: Position,
    pub iterations: usize,
    /// `y(tⁱ)` for every visited iterate, starting with the initial one.
    pub objective_trace: Vec<f64>,
    /// Set when the IR surrogate was empty at the expansion point and the
    /// update stopped there.
    pub skipped: bool,
}

/// Runs the SCA loop for antenna `n` with every other antenna held fixed.
pub fn optimize_tx_n(
    n: usize,
    layout: &AntennaLayout,
    problem: &TxProblem<'_>,
    opts: &InnerOptions,
) -> Result<TxOutcome> {
    let geom = problem.geom;
    let b = build_b(layout.r, geom);
    let c = build_c(geom);
    let others = ir_others(&layout.t, n, geom);
    let implied = linalg::norm_sqr(&others) >= problem.sigma_i2 * problem.gamma_bar / problem.power;

    let mut t = layout.t[n];
    let mut y = tx_objective(t, &b, geom);
    let mut trace = vec![y];
    let mut iterations = 0;
    let mut skipped = false;
    while iterations < opts.max_inner {
        iterations += 1;
        let surrogate = tx_surrogates(t, &b, &c, geom);
        if !(surrogate.beta > 0.0) {
            break;
        }
        let mut set = TxConstraintSet::new(*problem.region);
        set.halfplanes = layout
            .t
            .iter()
            .enumerate()
            .filter(|(l, _)| *l != n)
            .map(|(_, t_l)| linearize_distance(t, *t_l, problem.min_distance))
            .collect();
        if !implied {
            match sinr_surrogate_constraint(&surrogate, &others, problem.gamma_bar, problem.sigma_i2, problem.power) {
                SinrRegion::Unconstrained => {}
                SinrRegion::Disk(disk) if disk.contains(t, 1e-9) => set.disk = Some(disk),
                SinrRegion::Disk(_) | SinrRegion::Infeasible => {
                    skipped = true;
                    break;
                }
            }
        }
        let next = match solve_qcqp_2d(&surrogate, &set) {
            Ok(p) => p,
            Err(_) => {
                skipped = true;
                break;
            }
        };
        let y_next = tx_objective(next, &b, geom);
        trace.push(y_next);
        let gain = (y_next - y) / y.abs().max(f64::MIN_POSITIVE);
        t = next;
        y = y_next;
        if gain < opts.inner_tol {
            break;
        }
    }
    Ok(TxOutcome {
        position: t,
        iterations,
        objective_trace: trace,
        skipped,
    })
}
