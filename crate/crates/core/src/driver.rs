//! Alternating optimization of the covariance, the ER position and the
//! transmit positions.
//!
//! Every accepted state carries the optimal covariance for its positions, so
//! the reported harvested power never decreases: the receive step improves
//! `x(r)` for the current `Q` before `Q` is re-solved, and a transmit update
//! is kept only if the re-solved covariance does not lose power.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{self, AntennaLayout, ChannelGeometry, Position, Region};
use crate::covariance::{solve_covariance, QSolution, QStatus, TransmitCovariance};
use crate::rx_position::{build_a, optimize_rx, InnerOptions};
use crate::tx_position::{optimize_tx_n, TxProblem};
use crate::{Error, Result};

/// One scenario: array size, power budget, noise, SINR floor, regions and
/// channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n: usize,
    /// Transmit power budget in watts.
    pub p: f64,
    pub sigma_i2: f64,
    /// ER noise power; carried for completeness, the harvested power does
    /// not depend on it.
    pub sigma_e2: f64,
    /// SINR floor in dB. `-inf` disables the constraint.
    pub gamma_bar_db: f64,
    /// Minimum spacing between transmit antennas, in wavelengths.
    pub d: f64,
    pub c_t: Region,
    pub c_r: Region,
    /// Relative harvested-power gain below which the outer loop stops.
    pub epsilon: f64,
    pub geometry: ChannelGeometry,
}

impl ScenarioConfig {
    pub fn gamma_bar(&self) -> f64 {
        10f64.powf(self.gamma_bar_db / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if !(self.p > 0.0 && self.p.is_finite()) {
            return bad(format!("p must be positive, got {}", self.p));
        }
        if !(self.sigma_i2 > 0.0 && self.sigma_i2.is_finite()) {
            return Err(Error::NonPositiveNoise(self.sigma_i2));
        }
        if self.gamma_bar_db.is_nan() || self.gamma_bar_db == f64::INFINITY {
            return bad(format!("gamma_bar_db must be finite or -inf, got {}", self.gamma_bar_db));
        }
        if !(self.d > 0.0 && self.d.is_finite()) {
            return bad(format!("d must be positive, got {}", self.d));
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        grid_shape(self).map(|_| ())
    }
}

/// Outer-loop controls.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub max_outer: usize,
    /// Number of generated starts: the grid layout plus `restarts − 1`
    /// random feasible layouts.
    pub restarts: usize,
    pub inner: InnerOptions,
    /// Run the ER position step.
    pub rx_step: bool,
    /// Run the transmit position steps.
    pub tx_step: bool,
    /// Additional starting layouts; infeasible ones are ignored.
    pub extra_starts: Vec<AntennaLayout>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            max_outer: 50,
            restarts: 1,
            inner: InnerOptions::default(),
            rx_step: true,
            tx_step: true,
            extra_starts: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub layout: AntennaLayout,
    pub q: TransmitCovariance,
    /// Harvested power in watts.
    pub w: f64,
    pub sinr: f64,
    pub converged: bool,
    pub outer_iterations: usize,
}

/// Record of one outer iteration. Every `w_*` value is the harvested power
/// of the accepted state with its optimal covariance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OuterRecord {
    /// At the start of the iteration.
    pub w_start: f64,
    pub w_after_rx: f64,
    pub w_after_tx: Vec<f64>,
    /// Transmit updates undone because the true harvested power dropped.
    pub reverted: Vec<bool>,
    /// Transmit updates stopped because the SINR restriction was empty.
    pub skipped: Vec<bool>,
    /// Inner SCA objective sequences.
    pub rx_trace: Vec<f64>,
    pub tx_traces: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    /// Index of the start that produced the solution.
    pub start: usize,
    pub outer: Vec<OuterRecord>,
    pub wall: Duration,
}

impl RunTrace {
    /// Harvested power after each outer iteration, starting with the
    /// initial covariance step.
    pub fn w_sequence(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.outer.iter().map(|r| r.w_start).collect();
        if let Some(last) = self.outer.last() {
            v.push(last.w_after_tx.last().copied().unwrap_or(last.w_after_rx));
        }
        v
    }
}

/// Harvested power and IR SINR of a layout under `q`.
pub fn evaluate(layout: &AntennaLayout, q: &TransmitCovariance, config: &ScenarioConfig) -> Result<(f64, f64)> {
    let h_e = config.geometry.er_channel(&layout.t, layout.r);
    let h_i = config.geometry.ir_channel(&layout.t);
    Ok((
        channel::harvested_power(&h_e, q)?,
        channel::sinr(&h_i, q, config.sigma_i2)?,
    ))
}

fn solve_q(layout: &AntennaLayout, config: &ScenarioConfig) -> Result<QSolution> {
    let h_e = config.geometry.er_channel(&layout.t, layout.r);
    let h_i = config.geometry.ir_channel(&layout.t);
    solve_covariance(&h_e, &h_i, config.p, config.gamma_bar(), config.sigma_i2)
}

/// Columns, rows and per-axis spacing of the initial grid.
fn grid_shape(config: &ScenarioConfig) -> Result<(usize, usize, f64, f64)> {
    let n = config.n;
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let c = &config.c_t;
    let too_small = Error::RegionTooSmall {
        n,
        spacing: config.d,
    };
    if config.d * (cols - 1) as f64 > c.width() + 1e-12 || config.d * (rows - 1) as f64 > c.height() + 1e-12 {
        return Err(too_small);
    }
    let sx = config.d.max(c.width() / cols as f64);
    let sy = config.d.max(c.height() / cols as f64);
    Ok((cols, rows, sx, sy))
}

/// Centered grid of transmit antennas with the ER antenna at the center of
/// its region.
pub fn init_layout(config: &ScenarioConfig) -> Result<AntennaLayout> {
    let (cols, rows, sx, sy) = grid_shape(config)?;
    let center = config.c_t.center();
    let offset = |k: usize, count: usize, s: f64| (k as f64 - (count - 1) as f64 / 2.0) * s;
    let t = (0..config.n)
        .map(|k| {
            let p = center + Position::new(offset(k % cols, cols, sx), offset(k / cols, rows, sy));
            config.c_t.clamp(p)
        })
        .collect();
    Ok(AntennaLayout::new(t, config.c_r.center()))
}

/// Uniform random layout satisfying containment and spacing, by rejection.
pub fn random_layout(config: &ScenarioConfig, rng: &mut impl Rng) -> Option<AntennaLayout> {
    let sample = |rng: &mut dyn rand::RngCore, r: &Region| {
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        Position::new(r.x_min + u * r.width(), r.y_min + v * r.height())
    };
    'attempt: for _ in 0..100 {
        let mut t: Vec<Position> = Vec::with_capacity(config.n);
        for _ in 0..config.n {
            let placed = (0..1000).find_map(|_| {
                let p = sample(rng, &config.c_t);
                t.iter().all(|q| q.distance(p) >= config.d).then_some(p)
            });
            match placed {
                Some(p) => t.push(p),
                None => continue 'attempt,
            }
        }
        return Some(AntennaLayout::new(t, sample(rng, &config.c_r)));
    }
    None
}

/// Runs the alternating loop from the grid layout, `restarts − 1` random
/// layouts drawn from `seed`, and `opts.extra_starts`, keeping the best.
pub fn run(config: &ScenarioConfig, opts: &RunOptions, seed: u64) -> Result<(Solution, RunTrace)> {
    config.validate()?;
    let mut starts = vec![init_layout(config)?];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 1..opts.restarts.max(1) {
        if let Some(l) = random_layout(config, &mut rng) {
            starts.push(l);
        }
    }
    starts.extend(
        opts.extra_starts
            .iter()
            .filter(|l| l.t.len() == config.n && l.is_feasible(&config.c_t, &config.c_r, config.d, 1e-9))
            .cloned(),
    );

    let results: Vec<Result<(Solution, RunTrace)>> =
        starts.par_iter().map(|l| run_from(l.clone(), config, opts)).collect();
    let mut best: Option<(Solution, RunTrace)> = None;
    let mut first_err = None;
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok((s, mut trace)) => {
                trace.start = k;
                if best.as_ref().is_none_or(|(b, _)| s.w > b.w) {
                    best = Some((s, trace));
                }
            }
            Err(e) => {
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one start"))
}

/// Runs the alternating loop from one starting layout.
pub fn run_from(layout: AntennaLayout, config: &ScenarioConfig, opts: &RunOptions) -> Result<(Solution, RunTrace)> {
    let clock = Instant::now();
    if layout.t.len() != config.n {
        return Err(Error::DimensionMismatch(format!(
            "layout has {} transmit antennas, scenario {}",
            layout.t.len(),
            config.n
        )));
    }
    let mut layout = layout;
    let mut sol = solve_q(&layout, config)?;
    if sol.status == QStatus::Infeasible {
        return Err(Error::Infeasible {
            max_achievable: sol.achieved_sinr,
            required: config.gamma_bar(),
        });
    }
    let problem = TxProblem {
        geom: &config.geometry,
        region: &config.c_t,
        min_distance: config.d,
        gamma_bar: config.gamma_bar(),
        sigma_i2: config.sigma_i2,
        power: config.p,
    };

    let mut trace = RunTrace::default();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_outer {
        iterations += 1;
        let w_start = sol.harvested_w;
        let mut rec = OuterRecord {
            w_start,
            ..OuterRecord::default()
        };

        if opts.rx_step {
            let a = build_a(&layout.t, &sol.q, &config.geometry)?;
            let out = optimize_rx(layout.r, &a, &config.geometry, &config.c_r, &opts.inner)?;
            layout.r = out.position;
            rec.rx_trace = out.objective_trace;
            // x(r) did not decrease for the old Q, so the re-solved one
            // cannot harvest less
            sol = solve_q(&layout, config)?;
        }
        rec.w_after_rx = sol.harvested_w;

        if opts.tx_step {
            for n in 0..config.n {
                let out = optimize_tx_n(n, &layout, &problem, &opts.inner)?;
                let previous = layout.t[n];
                layout.t[n] = out.position;
                let candidate = solve_q(&layout, config)?;
                let keep = candidate.status == QStatus::Optimal && candidate.harvested_w >= sol.harvested_w;
                if keep {
                    sol = candidate;
                } else {
                    layout.t[n] = previous;
                }
                rec.reverted.push(!keep);
                rec.skipped.push(out.skipped);
                rec.tx_traces.push(out.objective_trace);
                rec.w_after_tx.push(sol.harvested_w);
            }
        }

        trace.outer.push(rec);
        let gain = (sol.harvested_w - w_start) / w_start.max(1e-12);
        if gain < config.epsilon {
            converged = true;
            break;
        }
    }
    trace.wall = clock.elapsed();

    let (w, sinr) = evaluate(&layout, &sol.q, config)?;
    Ok((
        Solution {
            layout,
            q: sol.q,
            w,
            sinr,
            converged,
            outer_iterations: iterations,
        },
        trace,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use crate::testutil::*;
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    fn scenario(geometry: ChannelGeometry, n: usize, side: f64) -> ScenarioConfig {
        let region = Region::centered_square(side).unwrap();
        ScenarioConfig {
            n,
            p: 20.0,
            sigma_i2: 1.0,
            sigma_e2: 1.0,
            gamma_bar_db: 1.0,
            d: 0.5,
            c_t: region,
            c_r: region,
            epsilon: 1e-4,
            geometry,
        }
    }

    fn random_scenario(seed: u64) -> ScenarioConfig {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        scenario(random_geometry(&mut rng, 6, 6), 4, 3.0)
    }

    pub(crate) fn audit(sol: &Solution, config: &ScenarioConfig) {
        assert!(sol.layout.is_feasible(&config.c_t, &config.c_r, config.d, 1e-6));
        assert!(sol.q.trace() <= config.p * (1.0 + 1e-9));
        assert!(sol.q.min_eigenvalue() >= -1e-8 * config.p);
        assert!(sol.sinr >= config.gamma_bar() * (1.0 - 1e-6));
        let (w, sinr) = evaluate(&sol.layout, &sol.q, config).unwrap();
        assert!((w - sol.w).abs() <= 1e-9 * w.max(1e-300));
        assert!((sinr - sol.sinr).abs() <= 1e-9 * sinr.max(1e-300));
    }

    #[test]
    fn grid_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(80);
        let geom = random_geometry(&mut rng, 2, 2);
        let mut c = scenario(geom, 1, 3.0);
        c.c_t = Region::new(0.0, 3.0, 0.0, 3.0).unwrap();
        assert_eq!(init_layout(&c).unwrap().t, vec![Position::new(1.5, 1.5)]);

        c.n = 4;
        let l = init_layout(&c).unwrap();
        let expected = [(0.75, 0.75), (2.25, 0.75), (0.75, 2.25), (2.25, 2.25)];
        for (p, (x, y)) in l.t.iter().zip(expected) {
            assert!(p.distance(Position::new(x, y)) < 1e-12);
        }
        assert!(l.min_pairwise_distance() >= 0.5);
        assert_eq!(l.r, c.c_r.center());

        c.n = 5;
        c.c_t = Region::centered_square(0.9).unwrap();
        assert!(matches!(init_layout(&c), Err(Error::RegionTooSmall { n: 5, .. })));
    }

    #[test]
    fn grid_and_random_layouts_are_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        for _ in 0..200 {
            let geom = random_geometry(&mut rng, 2, 2);
            let n = rng.random_range(1..10);
            let side = rng.random_range(0.5..4.0);
            let mut c = scenario(geom, n, side);
            c.d = rng.random_range(0.1..0.8);
            match init_layout(&c) {
                Ok(l) => {
                    assert!(l.is_feasible(&c.c_t, &c.c_r, c.d, 1e-9), "{l:?}");
                    if let Some(r) = random_layout(&c, &mut rng) {
                        assert!(r.is_feasible(&c.c_t, &c.c_r, c.d, 0.0));
                    }
                }
                Err(Error::RegionTooSmall { .. }) => {
                    let cols = (n as f64).sqrt().ceil();
                    assert!(c.d * (cols - 1.0) > side);
                }
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn single_path_single_antenna_converges_at_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(82);
        let a = random_angles(&mut rng, 1);
        let s = DMatrix::from_element(1, 1, Complex64::new(0.8, -0.3));
        let geom = ChannelGeometry::new(1.0, a.clone(), a.clone(), a, s.clone(), s, Position::ORIGIN).unwrap();
        let mut c = scenario(geom, 1, 3.0);
        c.gamma_bar_db = f64::NEG_INFINITY;
        let (sol, trace) = run(&c, &RunOptions::default(), 0).unwrap();
        assert!(sol.converged);
        assert!(sol.outer_iterations <= 2);
        assert!((sol.w - 20.0 * 0.73).abs() < 1e-9);
        assert_eq!(trace.outer.len(), sol.outer_iterations);
    }

    #[test]
    fn power_doubling_doubles_harvested_power() {
        for seed in 0..5 {
            let mut c = random_scenario(83 + seed);
            c.gamma_bar_db = f64::NEG_INFINITY;
            let (a, _) = run(&c, &RunOptions::default(), seed).unwrap();
            c.p *= 2.0;
            let (b, _) = run(&c, &RunOptions::default(), seed).unwrap();
            assert_eq!(a.layout, b.layout);
            assert!((b.w - 2.0 * a.w).abs() <= 1e-9 * b.w);
        }
    }

    #[test]
    fn harvested_power_never_drops() {
        for seed in 0..10 {
            let c = random_scenario(90 + seed);
            let start = init_layout(&c).unwrap();
            let initial = solve_q(&start, &c).unwrap();
            let (sol, trace) = run_from(start, &c, &RunOptions::default()).unwrap();
            assert!(sol.w >= initial.harvested_w * (1.0 - 1e-12));
            let w = trace.w_sequence();
            for pair in w.windows(2) {
                assert!(pair[1] >= pair[0] - 1e-9 * pair[0]);
            }
            for rec in &trace.outer {
                assert!(rec.w_after_rx >= rec.w_start - 1e-9 * rec.w_start);
                let mut prev = rec.w_after_rx;
                for w in &rec.w_after_tx {
                    assert!(*w >= prev);
                    prev = *w;
                }
            }
            audit(&sol, &c);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let c = random_scenario(100);
        let opts = RunOptions {
            restarts: 3,
            ..RunOptions::default()
        };
        let (a, ta) = run(&c, &opts, 7).unwrap();
        let (b, tb) = run(&c, &opts, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta.outer, tb.outer);
        assert_eq!(ta.start, tb.start);
    }

    #[test]
    fn more_starts_never_hurt() {
        for seed in 0..3 {
            let c = random_scenario(110 + seed);
            let (one, _) = run(&c, &RunOptions::default(), seed).unwrap();
            let opts = RunOptions {
                restarts: 4,
                ..RunOptions::default()
            };
            let (many, _) = run(&c, &opts, seed).unwrap();
            assert!(many.w >= one.w);
        }
    }

    #[test]
    fn infeasible_start_is_reported() {
        let mut c = random_scenario(120);
        let h_i = c.geometry.ir_channel(&init_layout(&c).unwrap().t);
        let max_sinr = c.p * linalg::norm_sqr(&h_i) / c.sigma_i2;
        c.gamma_bar_db = 10.0 * (2.0 * max_sinr).log10();
        match run(&c, &RunOptions::default(), 0) {
            Err(Error::Infeasible {
                max_achievable,
                required,
            }) => {
                assert!((max_achievable - max_sinr).abs() <= 1e-9 * max_sinr);
                assert!((required - 2.0 * max_sinr).abs() <= 1e-9 * required);
            }
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn evaluate_delegates_to_channel() {
        let c = random_scenario(130);
        let mut rng = ChaCha8Rng::seed_from_u64(131);
        let layout = init_layout(&c).unwrap();
        let q = random_psd(&mut rng, 4);
        let (w, sinr) = evaluate(&layout, &q, &c).unwrap();
        let h_e = c.geometry.er_channel(&layout.t, layout.r);
        let h_i = c.geometry.ir_channel(&layout.t);
        assert_eq!(w, channel::harvested_power(&h_e, &q).unwrap());
        assert_eq!(sinr, channel::sinr(&h_i, &q, 1.0).unwrap());
        let direct = (h_e.transpose() * q.matrix() * h_e.map(|z| z.conj()))[(0, 0)].re;
        assert!((w - direct).abs() <= 1e-12 * w.max(1.0));
    }

    #[test]
    fn skipping_steps_keeps_positions() {
        let c = random_scenario(140);
        let start = init_layout(&c).unwrap();
        let opts = RunOptions {
            rx_step: false,
            tx_step: false,
            ..RunOptions::default()
        };
        let (sol, _) = run_from(start.clone(), &c, &opts).unwrap();
        assert_eq!(sol.layout, start);
        assert_eq!(sol.outer_iterations, 1);
        assert!(sol.converged);

        let opts = RunOptions {
            rx_step: false,
            ..RunOptions::default()
        };
        let (sol, _) = run_from(start.clone(), &c, &opts).unwrap();
        assert_eq!(sol.layout.r, start.r);
    }

    #[test]
    fn converged_solutions_pass_audit() {
        let mut rng = ChaCha8Rng::seed_from_u64(150);
        for seed in 0..10 {
            let mut c = scenario(random_geometry(&mut rng, 8, 8), rng.random_range(1..6), rng.random_range(1.5..4.0));
            c.gamma_bar_db = rng.random_range(-5.0..3.0);
            match run(&c, &RunOptions::default(), seed) {
                Ok((sol, _)) => audit(&sol, &c),
                Err(Error::Infeasible { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }
}
