//! Monte-Carlo experiments: random channels, the FAS/TFA/FPA comparison and
//! parameter sweeps written as CSV.
//!
//! Trial `i` of a sweep draws everything (channel and restart layouts) from
//! a ChaCha8 stream keyed by `(master_seed, i)`, so results do not depend on
//! how trials are scheduled across threads, and every baseline and sweep
//! value sees the same realization for a given trial.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{AntennaLayout, ChannelGeometry, PathAngles, Position, Region};
use crate::config::ConfigFile;
use crate::driver::{self, RunOptions, ScenarioConfig};
use crate::{Error, Result};

/// RNG for trial `trial` of a sweep seeded with `master_seed`.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

/// Draws a geometric channel with `lt = lr` paths: angles uniform on
/// `[0, π]`, diagonal path responses `CN(0, 1/L)` and the IR at the origin.
pub fn generate_channel_from(rng: &mut impl Rng, lt: usize, lr: usize) -> Result<ChannelGeometry> {
    if lt != lr {
        return Err(Error::Config(format!(
            "generated channels need equal path counts, got {lt} and {lr}"
        )));
    }
    if lt == 0 {
        return Err(Error::Config("path count must be at least 1".into()));
    }
    let l = lt;
    let angles = |rng: &mut dyn RngCore| -> Vec<PathAngles> {
        (0..l)
            .map(|_| {
                let theta = rng.random_range(0.0..=std::f64::consts::PI);
                let phi = rng.random_range(0.0..=std::f64::consts::PI);
                PathAngles::new(theta, phi).expect("angles drawn in range")
            })
            .collect()
    };
    let tx = angles(rng);
    let er = angles(rng);
    let ir = angles(rng);
    let normal = Normal::new(0.0, (0.5 / l as f64).sqrt()).expect("positive variance");
    let diag = |rng: &mut dyn RngCore| {
        let mut m = DMatrix::zeros(l, l);
        for k in 0..l {
            m[(k, k)] = Complex64::new(normal.sample(rng), normal.sample(rng));
        }
        m
    };
    let sigma_e = diag(rng);
    let sigma_i = diag(rng);
    ChannelGeometry::new(1.0, tx, er, ir, sigma_e, sigma_i, Position::ORIGIN)
}

pub fn generate_channel(seed: u64, lt: usize, lr: usize) -> Result<ChannelGeometry> {
    generate_channel_from(&mut ChaCha8Rng::seed_from_u64(seed), lt, lr)
}

/// Half-wavelength ULA along x centered in `C_t`, ER antenna at the center
/// of `C_r`. The array is not clipped to `C_t`.
pub fn fpa_layout(config: &ScenarioConfig) -> AntennaLayout {
    let spacing = config.geometry.wavelength() / 2.0;
    let center = config.c_t.center();
    let n = config.n;
    let t = (0..n)
        .map(|k| center + Position::new((k as f64 - (n - 1) as f64 / 2.0) * spacing, 0.0))
        .collect();
    AntennaLayout::new(t, config.c_r.center())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Baseline {
    /// Movable antennas at the transmitter and the ER.
    Fas,
    /// Movable transmit antennas only.
    Tfa,
    /// Fixed-position array, covariance only.
    Fpa,
}

impl Baseline {
    pub const ALL: [Baseline; 3] = [Baseline::Fas, Baseline::Tfa, Baseline::Fpa];

    pub fn label(self) -> &'static str {
        match self {
            Baseline::Fas => "FAS",
            Baseline::Tfa => "TFA",
            Baseline::Fpa => "FPA",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fas" => Ok(Baseline::Fas),
            "tfa" => Ok(Baseline::Tfa),
            "fpa" => Ok(Baseline::Fpa),
            other => Err(Error::Config(format!("unknown baseline {other:?} (expected fas, tfa or fpa)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub baseline: Baseline,
    /// `None` when the SINR floor cannot be met from the initial layout.
    pub w: Option<f64>,
    pub sinr: Option<f64>,
    pub converged: bool,
    pub outer_iterations: usize,
    pub wall: Duration,
}

/// Runs one baseline on one scenario. Infeasibility is recorded in the
/// result; other errors are returned.
pub fn run_baseline(kind: Baseline, config: &ScenarioConfig, opts: &RunOptions, seed: u64) -> Result<TrialResult> {
    let clock = Instant::now();
    let fpa = fpa_layout(config);
    let outcome = match kind {
        Baseline::Fpa => {
            let opts = RunOptions {
                rx_step: false,
                tx_step: false,
                ..opts.clone()
            };
            driver::run_from(fpa, config, &opts)
        }
        Baseline::Fas | Baseline::Tfa => {
            let mut opts = opts.clone();
            opts.rx_step = kind == Baseline::Fas;
            opts.extra_starts.push(fpa);
            driver::run(config, &opts, seed)
        }
    };
    let wall = clock.elapsed();
    match outcome {
        Ok((sol, _)) => Ok(TrialResult {
            trial: 0,
            baseline: kind,
            w: Some(sol.w),
            sinr: Some(sol.sinr),
            converged: sol.converged,
            outer_iterations: sol.outer_iterations,
            wall,
        }),
        Err(Error::Infeasible { .. }) => Ok(TrialResult {
            trial: 0,
            baseline: kind,
            w: None,
            sinr: None,
            converged: false,
            outer_iterations: 0,
            wall,
        }),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Side `A` of both square regions, in wavelengths.
    Region,
    /// Transmit power budget in watts.
    Power,
    /// Path count `L = L_t = L_r`.
    Paths,
}

impl SweepVariable {
    pub fn label(self) -> &'static str {
        match self {
            SweepVariable::Region => "region",
            SweepVariable::Power => "power",
            SweepVariable::Paths => "paths",
        }
    }
}

impl FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "region" | "region_size" => Ok(SweepVariable::Region),
            "power" => Ok(SweepVariable::Power),
            "paths" => Ok(SweepVariable::Paths),
            other => Err(Error::Config(format!("unknown sweep variable {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub baselines: Vec<Baseline>,
    pub restarts: usize,
    /// Record wall-clock time per trial. Off by default so output files
    /// are reproducible byte for byte.
    pub timing: bool,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep needs at least one value".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) || self.values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("sweep values must be finite and strictly increasing".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.baselines.is_empty() {
            return Err(Error::Config("at least one baseline is required".into()));
        }
        if self.variable == SweepVariable::Paths && self.values.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
            return Err(Error::Config("path counts must be positive integers".into()));
        }
        Ok(())
    }

    fn sorted_baselines(&self) -> Vec<Baseline> {
        let mut b = self.baselines.clone();
        b.sort();
        b.dedup();
        b
    }
}

/// Result of one baseline on one trial at one sweep value.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub result: TrialResult,
}

/// Scenario for trial `trial` at sweep value `value`, plus the seed for the
/// driver's random restarts.
pub fn trial_scenario(
    spec: &SweepSpec,
    base: &ConfigFile,
    value: f64,
    trial: usize,
) -> Result<(ScenarioConfig, u64)> {
    let mut file = base.clone();
    let mut paths = base
        .paths()
        .ok_or_else(|| Error::Config("sweeps need a generated geometry ({\"paths\": L})".into()))?;
    match spec.variable {
        SweepVariable::Region => {
            let region = Region::centered_square(value)?;
            file.c_t = region;
            file.c_r = region;
        }
        SweepVariable::Power => file.p = value,
        SweepVariable::Paths => paths = value as usize,
    }
    let mut rng = trial_rng(spec.master_seed, trial as u64);
    let geometry = generate_channel_from(&mut rng, paths, paths)?;
    let run_seed = rng.next_u64();
    Ok((file.with_geometry(geometry)?, run_seed))
}

/// Runs every (value, trial, baseline) combination in parallel. Rows are
/// returned ordered by value, baseline, then trial.
pub fn run_sweep(spec: &SweepSpec, base: &ConfigFile) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let baselines = spec.sorted_baselines();
    let opts = RunOptions {
        restarts: spec.restarts.max(1),
        ..RunOptions::default()
    };
    let jobs: Vec<(usize, usize)> = (0..spec.values.len())
        .flat_map(|v| (0..spec.trials).map(move |t| (v, t)))
        .collect();
    let per_job: Vec<Result<Vec<SweepRow>>> = jobs
        .par_iter()
        .map(|&(v, trial)| {
            let value = spec.values[v];
            let (config, seed) = trial_scenario(spec, base, value, trial)?;
            baselines
                .iter()
                .map(|&kind| {
                    let mut result = run_baseline(kind, &config, &opts, seed)?;
                    result.trial = trial;
                    Ok(SweepRow { value, result })
                })
                .collect()
        })
        .collect();

    let mut rows = Vec::with_capacity(jobs.len() * baselines.len());
    for r in per_job {
        rows.extend(r?);
    }
    rows.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then(a.result.baseline.cmp(&b.result.baseline))
            .then(a.result.trial.cmp(&b.result.trial))
    });
    Ok(rows)
}

/// Mean and standard error of the feasible `W` values. The standard error
/// needs at least two samples.
pub fn aggregate(rows: &[&SweepRow]) -> (Option<f64>, Option<f64>) {
    let w: Vec<f64> = rows.iter().filter_map(|r| r.result.w).collect();
    if w.is_empty() {
        return (None, None);
    }
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    if w.len() < 2 {
        return (Some(mean), None);
    }
    let var = w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some((var / n).sqrt()))
}

pub const CSV_HEADER: [&str; 9] = [
    "variable",
    "value",
    "baseline",
    "trial",
    "W_watts",
    "sinr_linear",
    "converged",
    "outer_iters",
    "wall_ms",
];

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes trial rows, each (value, baseline) group followed by its
/// aggregate row.
pub fn write_csv<W: Write>(spec: &SweepSpec, rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let var = spec.variable.label();
    for group in rows.chunk_by(|a, b| a.value == b.value && a.result.baseline == b.result.baseline) {
        for row in group {
            let r = &row.result;
            let wall = if spec.timing {
                format!("{:.3}", r.wall.as_secs_f64() * 1e3)
            } else {
                String::new()
            };
            w.write_record([
                var.to_string(),
                row.value.to_string(),
                r.baseline.to_string(),
                r.trial.to_string(),
                opt(r.w),
                opt(r.sinr),
                r.converged.to_string(),
                r.outer_iterations.to_string(),
                wall,
            ])?;
        }
        let refs: Vec<&SweepRow> = group.iter().collect();
        let (mean, stderr) = aggregate(&refs);
        w.write_record([
            var.to_string(),
            group[0].value.to_string(),
            group[0].result.baseline.to_string(),
            "AGG".to_string(),
            opt(mean),
            opt(stderr),
            String::new(),
            String::new(),
            String::new(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
