//! Field-response channel model.
//!
//! Every propagation path contributes a unit-modulus phase term that depends
//! on the antenna position through the planar far-field projection
//! `ρ(p, a) = x sinθ cosφ + y cosθ`. Stacking these terms gives the
//! field-response vectors `g(t)` (transmit) and `f(r)` (receive); the channel
//! row vector is `h(t, r) = f(r)^H Σ G(t)` with `G(t) = [g(t_1), …, g(t_N)]`.
//!
//! All lengths are in wavelengths by convention, so `λ = 1` unless a geometry
//! says otherwise.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::covariance::TransmitCovariance;
use crate::linalg;
use crate::{Error, Result};

/// Antenna position in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const ORIGIN: Position = Position { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Position) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm_sqr(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Position) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Position {
    type Output = Position;
    fn add(self, rhs: Position) -> Position {
        Position::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Position {
    type Output = Position;
    fn sub(self, rhs: Position) -> Position {
        Position::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<Position> for f64 {
    type Output = Position;
    fn mul(self, rhs: Position) -> Position {
        Position::new(self * rhs.x, self * rhs.y)
    }
}

/// Axis-aligned rectangle a fluid antenna may move in.
///
/// Degenerate (zero-width) regions are allowed; a point region pins the
/// antenna.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRegion")]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegion {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl TryFrom<RawRegion> for Region {
    type Error = Error;
    fn try_from(r: RawRegion) -> Result<Self> {
        Region::new(r.x_min, r.x_max, r.y_min, r.y_max)
    }
}

impl Region {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let finite = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite());
        if !finite || x_min > x_max || y_min > y_max {
            return Err(Error::Config(format!(
                "invalid region [{x_min}, {x_max}] x [{y_min}, {y_max}]"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }

    /// Square of side `side` centred on the origin.
    pub fn centered_square(side: f64) -> Result<Self> {
        let h = side / 2.0;
        Self::new(-h, h, -h, h)
    }

    pub fn point(p: Position) -> Self {
        Self {
            x_min: p.x,
            x_max: p.x,
            y_min: p.y,
            y_max: p.y,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> Position {
        Position::new(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn contains(&self, p: Position, tol: f64) -> bool {
        p.x >= self.x_min - tol
            && p.x <= self.x_max + tol
            && p.y >= self.y_min - tol
            && p.y <= self.y_max + tol
    }

    /// Coordinate-wise clipping, i.e. the Euclidean projection onto the box.
    pub fn clamp(&self, p: Position) -> Position {
        Position::new(
            p.x.clamp(self.x_min, self.x_max),
            p.y.clamp(self.y_min, self.y_max),
        )
    }
}

/// Elevation `theta` and azimuth `phi` of one path, both in `[0, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64)", into = "(f64, f64)")]
pub struct PathAngles {
    pub theta: f64,
    pub phi: f64,
}

impl PathAngles {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        let ok = |a: f64| (0.0..=PI).contains(&a);
        if !ok(theta) || !ok(phi) {
            return Err(Error::Config(format!(
                "path angles ({theta}, {phi}) outside [0, pi]"
            )));
        }
        Ok(Self { theta, phi })
    }

    /// Gradient of `ρ(p, a)` with respect to `p`; constant in `p`.
    pub fn direction(&self) -> Position {
        Position::new(self.theta.sin() * self.phi.cos(), self.theta.cos())
    }
}

impl TryFrom<(f64, f64)> for PathAngles {
    type Error = Error;
    fn try_from((theta, phi): (f64, f64)) -> Result<Self> {
        PathAngles::new(theta, phi)
    }
}

impl From<PathAngles> for (f64, f64) {
    fn from(a: PathAngles) -> Self {
        (a.theta, a.phi)
    }
}

/// Propagation environment shared by the ER and IR links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeometry", into = "RawGeometry")]
pub struct ChannelGeometry {
    wavelength: f64,
    tx_angles: Vec<PathAngles>,
    er_rx_angles: Vec<PathAngles>,
    ir_rx_angles: Vec<PathAngles>,
    sigma_e: DMatrix<Complex64>,
    sigma_i: DMatrix<Complex64>,
    r0: Position,
}

impl ChannelGeometry {
    pub fn new(
        wavelength: f64,
        tx_angles: Vec<PathAngles>,
        er_rx_angles: Vec<PathAngles>,
        ir_rx_angles: Vec<PathAngles>,
        sigma_e: DMatrix<Complex64>,
        sigma_i: DMatrix<Complex64>,
        r0: Position,
    ) -> Result<Self> {
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::Config(format!("wavelength must be positive, got {wavelength}")));
        }
        let lt = tx_angles.len();
        let lr = er_rx_angles.len();
        if lt == 0 || lr == 0 {
            return Err(Error::Config("path counts must be at least 1".into()));
        }
        if ir_rx_angles.len() != lr {
            return Err(Error::DimensionMismatch(format!(
                "IR receive angles: expected {lr}, got {}",
                ir_rx_angles.len()
            )));
        }
        for (name, m) in [("sigma_e", &sigma_e), ("sigma_i", &sigma_i)] {
            if m.shape() != (lr, lt) {
                return Err(Error::DimensionMismatch(format!(
                    "{name}: expected {lr}x{lt}, got {}x{}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        if !r0.is_finite() {
            return Err(Error::Config("r0 must be finite".into()));
        }
        Ok(Self {
            wavelength,
            tx_angles,
            er_rx_angles,
            ir_rx_angles,
            sigma_e,
            sigma_i,
            r0,
        })
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// Wavenumber `2π/λ`.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    pub fn tx_paths(&self) -> usize {
        self.tx_angles.len()
    }

    pub fn rx_paths(&self) -> usize {
        self.er_rx_angles.len()
    }

    pub fn tx_angles(&self) -> &[PathAngles] {
        &self.tx_angles
    }

    pub fn er_rx_angles(&self) -> &[PathAngles] {
        &self.er_rx_angles
    }

    pub fn ir_rx_angles(&self) -> &[PathAngles] {
        &self.ir_rx_angles
    }

    pub fn sigma_e(&self) -> &DMatrix<Complex64> {
        &self.sigma_e
    }

    pub fn sigma_i(&self) -> &DMatrix<Complex64> {
        &self.sigma_i
    }

    pub fn r0(&self) -> Position {
        self.r0
    }

    /// ER channel `h_E(t, r)`.
    pub fn er_channel(&self, t: &[Position], r: Position) -> DVector<Complex64> {
        channel_vector(t, r, &self.sigma_e, &self.er_rx_angles, self)
            .expect("geometry dimensions are validated on construction")
    }

    /// IR channel `h_I(t, r0)`.
    pub fn ir_channel(&self, t: &[Position]) -> DVector<Complex64> {
        channel_vector(t, self.r0, &self.sigma_i, &self.ir_rx_angles, self)
            .expect("geometry dimensions are validated on construction")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    #[serde(default = "unit_wavelength")]
    wavelength: f64,
    tx_angles: Vec<PathAngles>,
    er_rx_angles: Vec<PathAngles>,
    ir_rx_angles: Vec<PathAngles>,
    /// Row-major, entries as `[re, im]`.
    sigma_e: Vec<Vec<Complex64>>,
    sigma_i: Vec<Vec<Complex64>>,
    #[serde(default)]
    r0: Position,
}

fn unit_wavelength() -> f64 {
    1.0
}

fn rows_to_matrix(name: &str, rows: Vec<Vec<Complex64>>) -> Result<DMatrix<Complex64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch(format!("{name}: ragged rows")));
    }
    let flat: Vec<Complex64> = rows.into_iter().flatten().collect();
    Ok(DMatrix::from_row_slice(nrows, ncols, &flat))
}

fn matrix_to_rows(m: &DMatrix<Complex64>) -> Vec<Vec<Complex64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl TryFrom<RawGeometry> for ChannelGeometry {
    type Error = Error;
    fn try_from(raw: RawGeometry) -> Result<Self> {
        let sigma_e = rows_to_matrix("sigma_e", raw.sigma_e)?;
        let sigma_i = rows_to_matrix("sigma_i", raw.sigma_i)?;
        ChannelGeometry::new(
            raw.wavelength,
            raw.tx_angles,
            raw.er_rx_angles,
            raw.ir_rx_angles,
            sigma_e,
            sigma_i,
            raw.r0,
        )
    }
}

impl From<ChannelGeometry> for RawGeometry {
    fn from(g: ChannelGeometry) -> Self {
        RawGeometry {
            wavelength: g.wavelength,
            sigma_e: matrix_to_rows(&g.sigma_e),
            sigma_i: matrix_to_rows(&g.sigma_i),
            tx_angles: g.tx_angles,
            er_rx_angles: g.er_rx_angles,
            ir_rx_angles: g.ir_rx_angles,
            r0: g.r0,
        }
    }
}

/// Positions of the `N` transmit antennas and the ER antenna.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntennaLayout {
    pub t: Vec<Position>,
    pub r: Position,
}

impl AntennaLayout {
    pub fn new(t: Vec<Position>, r: Position) -> Self {
        Self { t, r }
    }

    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (k, a) in self.t.iter().enumerate() {
            for b in &self.t[k + 1..] {
                best = best.min(a.distance(*b));
            }
        }
        best
    }

    /// Checks containment and spacing with an absolute slack `tol`.
    pub fn is_feasible(&self, c_t: &Region, c_r: &Region, d: f64, tol: f64) -> bool {
        self.t.iter().all(|p| c_t.contains(*p, tol))
            && c_r.contains(self.r, tol)
            && self.min_pairwise_distance() >= d - tol
    }
}

/// Path phase projection `ρ(p, a) = x sinθ cosφ + y cosθ`, in the same
/// length unit as `p`. The phase applied downstream is `(2π/λ) ρ`.
pub fn path_phase(p: Position, a: &PathAngles) -> f64 {
    p.dot(a.direction())
}

fn field_response(p: Position, angles: &[PathAngles], wavelength: f64) -> DVector<Complex64> {
    let k = 2.0 * PI / wavelength;
    DVector::from_iterator(
        angles.len(),
        angles
            .iter()
            .map(|a| Complex64::from_polar(1.0, k * path_phase(p, a))),
    )
}

/// Transmit field-response vector `g(t)`, length `L_t`.
pub fn field_response_tx(t: Position, geom: &ChannelGeometry) -> DVector<Complex64> {
    field_response(t, &geom.tx_angles, geom.wavelength)
}

/// Receive field-response vector `f(r)` for the given arrival angles.
pub fn field_response_rx(r: Position, angles: &[PathAngles], wavelength: f64) -> DVector<Complex64> {
    field_response(r, angles, wavelength)
}

/// `G(t)`, one column per transmit antenna.
pub fn field_response_matrix(t: &[Position], geom: &ChannelGeometry) -> DMatrix<Complex64> {
    let columns: Vec<_> = t.iter().map(|p| field_response_tx(*p, geom)).collect();
    if columns.is_empty() {
        return DMatrix::zeros(geom.tx_paths(), 0);
    }
    DMatrix::from_columns(&columns)
}

/// Channel row vector `h = f(r)^H Σ G(t)`, returned as its `N` entries.
pub fn channel_vector(
    t: &[Position],
    r: Position,
    sigma: &DMatrix<Complex64>,
    rx_angles: &[PathAngles],
    geom: &ChannelGeometry,
) -> Result<DVector<Complex64>> {
    if sigma.shape() != (rx_angles.len(), geom.tx_paths()) {
        return Err(Error::DimensionMismatch(format!(
            "path matrix is {}x{}, expected {}x{}",
            sigma.nrows(),
            sigma.ncols(),
            rx_angles.len(),
            geom.tx_paths()
        )));
    }
    let f = field_response_rx(r, rx_angles, geom.wavelength);
    // (f^H Σ)^T = Σ^T conj(f); h_n = (f^H Σ) g(t_n)
    let fs = sigma.transpose() * f.map(|z| z.conj());
    let g = field_response_matrix(t, geom);
    Ok(g.transpose() * fs)
}

/// Harvested power `tr(h_E Q h_E^H)` with unit conversion efficiency.
pub fn harvested_power(h_e: &DVector<Complex64>, q: &TransmitCovariance) -> Result<f64> {
    check_dims(h_e, q)?;
    Ok(linalg::row_quadratic_form(h_e, q.matrix()).max(0.0))
}

/// IR SINR in trace form, `tr(h_I Q h_I^H) / σ_I²`.
pub fn sinr(h_i: &DVector<Complex64>, q: &TransmitCovariance, sigma_i2: f64) -> Result<f64> {
    if !(sigma_i2 > 0.0) {
        return Err(Error::NonPositiveNoise(sigma_i2));
    }
    check_dims(h_i, q)?;
    Ok(linalg::row_quadratic_form(h_i, q.matrix()).max(0.0) / sigma_i2)
}

fn check_dims(h: &DVector<Complex64>, q: &TransmitCovariance) -> Result<()> {
    if h.len() != q.dim() {
        return Err(Error::DimensionMismatch(format!(
            "channel has {} entries, covariance is {}x{}",
            h.len(),
            q.dim(),
            q.dim()
        )));
    }
    Ok(())
}
