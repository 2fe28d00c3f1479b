//! Exact Euclidean projection onto a planar convex set made of a box,
//! half-planes and at most one disk.
//!
//! The transmit-position subproblem maximizes `−β/2‖t‖² + cᵀt`, which is
//! `−β/2‖t − p‖²` up to a constant with `p = c/β`, so its solution is the
//! projection of `p`. In the plane the projection is either `p` itself, the
//! projection onto a single constraint (exactly one active), or a point where
//! two constraint boundaries cross. Enumerating those candidates and keeping
//! the closest feasible one is exact.

use crate::channel::{Position, Region};
use crate::{Error, Result};

/// `normal · t ≥ offset`, with a unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    pub normal: Position,
    pub offset: f64,
}

impl HalfPlane {
    /// Builds a half-plane, normalizing `normal`.
    pub fn new(normal: Position, offset: f64) -> Self {
        let n = normal.norm();
        Self {
            normal: (1.0 / n) * normal,
            offset: offset / n,
        }
    }

    /// Signed slack; nonnegative inside.
    pub fn slack(&self, p: Position) -> f64 {
        self.normal.dot(p) - self.offset
    }

    pub fn project(&self, p: Position) -> Position {
        p + (-self.slack(p)) * self.normal
    }
}

/// `‖t − center‖² ≤ radius2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    pub center: Position,
    pub radius2: f64,
}

impl Disk {
    pub fn radius(&self) -> f64 {
        self.radius2.max(0.0).sqrt()
    }

    pub fn contains(&self, p: Position, tol: f64) -> bool {
        (p - self.center).norm() <= self.radius() + tol
    }

    pub fn project(&self, p: Position) -> Position {
        let d = p - self.center;
        let n = d.norm();
        if n <= self.radius() {
            return p;
        }
        if n == 0.0 {
            return self.center;
        }
        self.center + (self.radius() / n) * d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TxConstraintSet {
    pub region: Region,
    pub halfplanes: Vec<HalfPlane>,
    pub disk: Option<Disk>,
}

impl TxConstraintSet {
    pub fn new(region: Region) -> Self {
        Self {
            region,
            halfplanes: Vec::new(),
            disk: None,
        }
    }

    pub fn contains(&self, p: Position, tol: f64) -> bool {
        self.region.contains(p, tol)
            && self.halfplanes.iter().all(|h| h.slack(p) >= -tol)
            && self.disk.is_none_or(|d| d.contains(p, tol))
    }

    /// Box faces plus the explicit half-planes.
    fn all_halfplanes(&self) -> Vec<HalfPlane> {
        let r = &self.region;
        let mut v = vec![
            HalfPlane::new(Position::new(1.0, 0.0), r.x_min),
            HalfPlane::new(Position::new(-1.0, 0.0), -r.x_max),
            HalfPlane::new(Position::new(0.0, 1.0), r.y_min),
            HalfPlane::new(Position::new(0.0, -1.0), -r.y_max),
        ];
        v.extend_from_slice(&self.halfplanes);
        v
    }
}

/// Feasibility slack for enumerated candidates, relative to the problem scale.
const CANDIDATE_TOL: f64 = 1e-10;

/// Euclidean projection of `p` onto the constraint set.
pub fn project(p: Position, set: &TxConstraintSet) -> Result<Position> {
    let scale = 1.0
        + p.norm()
        + set.region.x_min.abs().max(set.region.x_max.abs())
        + set.region.y_min.abs().max(set.region.y_max.abs());
    let tol = CANDIDATE_TOL * scale;
    if set.contains(p, 0.0) {
        return Ok(p);
    }

    let lines = set.all_halfplanes();
    let mut candidates = Vec::with_capacity(lines.len() * lines.len() + 4);
    candidates.extend(lines.iter().map(|h| h.project(p)));
    for (i, a) in lines.iter().enumerate() {
        for b in &lines[i + 1..] {
            if let Some(x) = line_intersection(a, b) {
                candidates.push(x);
            }
        }
    }
    if let Some(disk) = &set.disk {
        candidates.push(disk.project(p));
        for h in &lines {
            candidates.extend(line_circle_intersections(h, disk, tol));
        }
    }

    let best = candidates
        .into_iter()
        .filter(|c| c.is_finite() && set.contains(*c, tol))
        .min_by(|a, b| (*a - p).norm_sqr().total_cmp(&(*b - p).norm_sqr()))
        .ok_or(Error::EmptyFeasibleSet)?;
    Ok(set.region.clamp(best))
}

fn line_intersection(a: &HalfPlane, b: &HalfPlane) -> Option<Position> {
    let det = a.normal.x * b.normal.y - a.normal.y * b.normal.x;
    if det.abs() < 1e-14 {
        return None;
    }
    let x = (a.offset * b.normal.y - a.normal.y * b.offset) / det;
    let y = (a.normal.x * b.offset - a.offset * b.normal.x) / det;
    Some(Position::new(x, y))
}

fn line_circle_intersections(h: &HalfPlane, disk: &Disk, tol: f64) -> Vec<Position> {
    // foot of the perpendicular from the center, then ± along the line
    let foot = h.project(disk.center);
    let dist2 = (foot - disk.center).norm_sqr();
    let disc = disk.radius2 - dist2;
    if disc < -tol {
        return Vec::new();
    }
    let along = Position::new(-h.normal.y, h.normal.x);
    let s = disc.max(0.0).sqrt();
    vec![foot + s * along, foot + (-s) * along]
}
