//! Storage sizing against a hosting capacity region.
//!
//! The operating point is moved to the origin by translating the region, so
//! a regulation vector `r` restores feasibility exactly when `r` lies in the
//! shifted region. All sizing problems are then small convex programs over a
//! polygon that can be solved by enumeration.

use alloc::vec::Vec;

use thiserror::Error;

use crate::ergodic::LatticeAxis;
use crate::geometry::{ConvexPolygon, HalfSpace, Region, Vec2};
use crate::math;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EssError {
    #[error("the fixed power factor line misses the region")]
    LineMissesRegion,
    #[error("invalid sizing parameter: {0}")]
    BadParameter(&'static str),
    #[error("cost formulations disagree: {orthants} vs {candidates}")]
    FormulationMismatch { orthants: f64, candidates: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SizingMode {
    /// Smallest `x² + y²`.
    MinApparent,
    /// Regulation restricted to `y = tan(angle)·x`.
    FixedPowerFactor { angle: f64 },
    /// Smallest `beta·|x| + gamma·|y|`.
    TwoSiteCost { beta: f64, gamma: f64 },
}

impl SizingMode {
    pub fn validate(&self) -> Result<(), EssError> {
        match *self {
            SizingMode::MinApparent => Ok(()),
            SizingMode::FixedPowerFactor { angle } => {
                if angle.is_finite() && angle.abs() < core::f64::consts::FRAC_PI_2 {
                    Ok(())
                } else {
                    Err(EssError::BadParameter("power factor angle must lie in (-pi/2, pi/2)"))
                }
            }
            SizingMode::TwoSiteCost { beta, gamma } => {
                if beta > 0.0 && gamma > 0.0 && beta.is_finite() && gamma.is_finite() {
                    Ok(())
                } else {
                    Err(EssError::BadParameter("cost weights must be positive"))
                }
            }
        }
    }
}

/// Weight per MW of regulation for a storage price per kWh held over
/// `period_h` hours.
pub fn price_weight(price_per_kwh: f64, period_h: f64) -> f64 {
    price_per_kwh * 1000.0 * period_h
}

/// Which part of the shifted boundary the regulation lands on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActiveEdge {
    /// The operating point is already inside.
    Interior,
    Vertex(usize),
    /// Edge from vertex `k` to vertex `k + 1`.
    Edge(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegulationResult {
    /// Storage output added to the operating point (MW / MVAr).
    pub regulation: Vec2,
    pub objective: f64,
    pub feasible_without_ess: bool,
    pub active_edge: ActiveEdge,
}

impl RegulationResult {
    fn zero() -> Self {
        Self {
            regulation: Vec2::ZERO,
            objective: 0.0,
            feasible_without_ess: true,
            active_edge: ActiveEdge::Interior,
        }
    }

    /// Apparent power of the regulation vector.
    pub fn capacity(&self) -> f64 {
        self.regulation.norm()
    }
}

/// Translates the region so that `point` becomes the origin.
pub fn shift_coordinates(region: &Region, point: Vec2) -> Region {
    region.translate(-point)
}

fn active_edge(poly: &ConvexPolygon, p: Vec2) -> ActiveEdge {
    let scale = poly.vertices().iter().fold(1.0_f64, |s, v| s.max(v.x.abs()).max(v.y.abs()));
    let tol = 1e-9 * scale;
    if let Some(k) = poly.vertices().iter().position(|&v| (v - p).norm() <= tol) {
        return ActiveEdge::Vertex(k);
    }
    let (k, _) = poly
        .halfspaces()
        .iter()
        .enumerate()
        .map(|(k, h)| (k, h.margin(p).abs()))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
    ActiveEdge::Edge(k)
}

fn regulated(poly: &ConvexPolygon, regulation: Vec2, objective: f64) -> RegulationResult {
    RegulationResult {
        regulation,
        objective,
        feasible_without_ess: false,
        active_edge: active_edge(poly, regulation),
    }
}

/// Smallest apparent power regulation: the projection of the operating
/// point onto the region.
pub fn min_apparent_power(region: &Region, point: Vec2) -> RegulationResult {
    let shifted = shift_coordinates(region, point);
    let (x, d2) = shifted.project_origin();
    if d2 == 0.0 {
        return RegulationResult::zero();
    }
    regulated(&shifted.polygon, x, d2)
}

/// Smallest regulation along `y = tan(angle)·x`. The objective is the
/// squared apparent power.
pub fn min_capacity_fixed_pf(region: &Region, point: Vec2, angle: f64) -> Result<RegulationResult, EssError> {
    SizingMode::FixedPowerFactor { angle }.validate()?;
    let shifted = shift_coordinates(region, point);
    if shifted.contains(Vec2::ZERO).inside {
        return Ok(RegulationResult::zero());
    }
    let slope = math::tan(angle);
    let (lo, hi) = shifted
        .polygon
        .line_interval(Vec2::ZERO, Vec2::new(1.0, slope))
        .ok_or(EssError::LineMissesRegion)?;
    let x = 0.0_f64.clamp(lo, hi);
    let reg = Vec2::new(x, slope * x);
    Ok(regulated(&shifted.polygon, reg, x * x * (1.0 + slope * slope)))
}

fn weighted_l1(p: Vec2, beta: f64, gamma: f64) -> f64 {
    beta * p.x.abs() + gamma * p.y.abs()
}

/// Running minimum with ties broken towards the lexicographically smallest
/// `(|x|, |y|)`.
struct Best {
    point: Vec2,
    value: f64,
}

impl Best {
    fn new() -> Self {
        Self {
            point: Vec2::new(f64::NAN, f64::NAN),
            value: f64::INFINITY,
        }
    }

    fn offer(&mut self, p: Vec2, value: f64) {
        if !value.is_finite() {
            return;
        }
        if self.value.is_infinite() {
            *self = Self { point: p, value };
            return;
        }
        let tol = 1e-12 * self.value.abs().max(1.0);
        let key = (p.x.abs(), p.y.abs());
        let cur = (self.point.x.abs(), self.point.y.abs());
        if value < self.value - tol {
            *self = Self { point: p, value };
        } else if value <= self.value + tol && key < cur {
            self.point = p;
            self.value = self.value.min(value);
        }
    }
}

/// Splits the shifted region into its four sign orthants, on each of which
/// the weighted L1 objective is linear, and minimizes over the vertices of
/// every clipped piece.
fn cost_by_orthants(poly: &ConvexPolygon, beta: f64, gamma: f64) -> Best {
    let mut best = Best::new();
    for (sx, sy) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)] {
        // sx·x ≥ 0 and sy·y ≥ 0
        let bounds = [
            HalfSpace::new(Vec2::new(-sx, 0.0), 0.0).expect("unit normal"),
            HalfSpace::new(Vec2::new(0.0, -sy), 0.0).expect("unit normal"),
        ];
        for v in poly.clipped_vertices(&bounds) {
            best.offer(v, beta * sx * v.x + gamma * sy * v.y);
        }
    }
    best
}

/// Auxiliary-variable form: with `x = m⁺ − m⁻` and `y = n⁺ − n⁻` the
/// optimum sits at a vertex of the region, at a crossing of its boundary
/// with a coordinate axis, or at the origin.
fn cost_by_candidates(poly: &ConvexPolygon, beta: f64, gamma: f64) -> Best {
    let mut best = Best::new();
    if poly.contains(Vec2::ZERO) {
        best.offer(Vec2::ZERO, 0.0);
    }
    for (a, b) in poly.edges() {
        best.offer(a, weighted_l1(a, beta, gamma));
        for (ca, cb) in [(a.x, b.x), (a.y, b.y)] {
            let crosses = (ca <= 0.0 && cb >= 0.0) || (ca >= 0.0 && cb <= 0.0);
            if crosses && ca != cb {
                let p = a.lerp(b, ca / (ca - cb));
                best.offer(p, weighted_l1(p, beta, gamma));
            }
        }
    }
    best
}

/// Cheapest pair of storage outputs, one per axis, with prices `beta` and
/// `gamma` per MW. Both formulations are solved and must agree.
pub fn optimal_two_storage_cost(region: &Region, point: Vec2, beta: f64, gamma: f64) -> Result<RegulationResult, EssError> {
    SizingMode::TwoSiteCost { beta, gamma }.validate()?;
    let shifted = shift_coordinates(region, point);
    if shifted.contains(Vec2::ZERO).inside {
        return Ok(RegulationResult::zero());
    }
    let a = cost_by_orthants(&shifted.polygon, beta, gamma);
    let b = cost_by_candidates(&shifted.polygon, beta, gamma);
    let scale = a.value.abs().max(b.value.abs()).max(1.0);
    if !((a.value - b.value).abs() <= 1e-9 * scale) {
        return Err(EssError::FormulationMismatch {
            orthants: a.value,
            candidates: b.value,
        });
    }
    Ok(regulated(&shifted.polygon, a.point, weighted_l1(a.point, beta, gamma)))
}

/// Both cost formulations' optima, for cross-checking.
pub fn two_storage_cost_pair(region: &Region, point: Vec2, beta: f64, gamma: f64) -> (f64, f64) {
    let shifted = shift_coordinates(region, point);
    (
        cost_by_orthants(&shifted.polygon, beta, gamma).value,
        cost_by_candidates(&shifted.polygon, beta, gamma).value,
    )
}

pub fn size(region: &Region, point: Vec2, mode: SizingMode) -> Result<RegulationResult, EssError> {
    match mode {
        SizingMode::MinApparent => Ok(min_apparent_power(region, point)),
        SizingMode::FixedPowerFactor { angle } => min_capacity_fixed_pf(region, point, angle),
        SizingMode::TwoSiteCost { beta, gamma } => optimal_two_storage_cost(region, point, beta, gamma),
    }
}

/// Objective matrix over a lattice of operating points, row-major with the
/// first axis varying fastest. Cells where a fixed power factor cannot
/// restore feasibility hold NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub x: LatticeAxis,
    pub y: LatticeAxis,
    pub values: Vec<f64>,
}

impl Heatmap {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.x.n + ix]
    }
}

/// One heatmap row at second-axis value `y`.
pub fn heatmap_row(region: &Region, x: &LatticeAxis, y: f64, mode: SizingMode) -> Result<Vec<f64>, EssError> {
    x.values()
        .map(|xv| match size(region, Vec2::new(xv, y), mode) {
            Ok(r) => Ok(r.objective),
            Err(EssError::LineMissesRegion) => Ok(f64::NAN),
            Err(e) => Err(e),
        })
        .collect()
}

pub fn sweep_heatmap(region: &Region, x: LatticeAxis, y: LatticeAxis, mode: SizingMode) -> Result<Heatmap, EssError> {
    mode.validate()?;
    let mut values = Vec::with_capacity(x.n * y.n);
    for yv in y.values() {
        values.extend(heatmap_row(region, &x, yv, mode)?);
    }
    Ok(Heatmap { x, y, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Provenance;
    use crate::grid::AxisLabel;

    fn rect(x0: f64, x1: f64, y0: f64, y1: f64) -> Region {
        Region::new(
            ConvexPolygon::rectangle(x0, x1, y0, y1).unwrap(),
            [AxisLabel::p("a"), AxisLabel::p("b")],
            Provenance::Exact,
        )
    }

    #[test]
    fn shift_by_zero_is_identity() {
        let r = rect(0.0, 1.0, 0.0, 1.0);
        assert_eq!(shift_coordinates(&r, Vec2::ZERO), r);
        let twice = shift_coordinates(&shift_coordinates(&r, Vec2::new(1.0, 2.0)), Vec2::new(0.5, -1.0));
        let once = shift_coordinates(&r, Vec2::new(1.5, 1.0));
        for (a, b) in twice.vertices().iter().zip(once.vertices()) {
            assert!((*a - *b).norm() < 1e-15);
        }
    }

    #[test]
    fn projection_of_outside_point() {
        let r = rect(0.0, 1.0, 0.0, 1.0);
        let res = min_apparent_power(&r, Vec2::new(2.0, 0.5));
        assert_eq!(res.regulation, Vec2::new(-1.0, 0.0));
        assert_eq!(res.capacity(), 1.0);
        assert!(!res.feasible_without_ess);
        assert!(matches!(res.active_edge, ActiveEdge::Edge(_)));
        let inside = min_apparent_power(&r, Vec2::new(0.5, 0.5));
        assert!(inside.feasible_without_ess);
        assert_eq!(inside.objective, 0.0);
    }

    #[test]
    fn fixed_power_factor_examples() {
        let r = rect(1.0, 2.0, -1.0, 1.0);
        let res = min_capacity_fixed_pf(&r, Vec2::ZERO, 0.0).unwrap();
        assert_eq!(res.regulation, Vec2::new(1.0, 0.0));
        assert_eq!(res.objective, 1.0);
        let miss = rect(1.0, 2.0, 2.0, 3.0);
        assert_eq!(min_capacity_fixed_pf(&miss, Vec2::ZERO, 0.0), Err(EssError::LineMissesRegion));
        assert!(min_capacity_fixed_pf(&r, Vec2::ZERO, 2.0).is_err());
    }

    #[test]
    fn cost_moves_along_cheapest_axis() {
        let r = rect(-1.0, 1.0, -1.0, 1.0);
        let res = optimal_two_storage_cost(&r, Vec2::new(3.0, 0.0), 1.0, 1.0).unwrap();
        assert!((res.objective - 2.0).abs() < 1e-15);
        assert_eq!(res.regulation, Vec2::new(-2.0, 0.0));
        assert_eq!(optimal_two_storage_cost(&r, Vec2::ZERO, 1.0, 1.0).unwrap().objective, 0.0);
    }

    #[test]
    fn cost_tie_prefers_small_first_component() {
        // Diamond |x| + |y| ≤ 1 around (3, 3): every point of the facing
        // edge costs the same with unit weights.
        let d = Region::from_points(
            &[Vec2::new(4.0, 3.0), Vec2::new(3.0, 4.0), Vec2::new(2.0, 3.0), Vec2::new(3.0, 2.0)],
            [AxisLabel::p("a"), AxisLabel::p("b")],
            Provenance::Exact,
        )
        .unwrap();
        let res = optimal_two_storage_cost(&d, Vec2::ZERO, 1.0, 1.0).unwrap();
        assert!((res.objective - 5.0).abs() < 1e-12);
        assert_eq!(res.regulation, Vec2::new(2.0, 3.0));
    }

    #[test]
    fn heatmap_zero_inside() {
        let r = rect(-1.0, 1.0, -1.0, 1.0);
        let h = sweep_heatmap(&r, LatticeAxis::new(-0.5, 0.5, 3), LatticeAxis::new(-0.5, 0.5, 4), SizingMode::MinApparent).unwrap();
        assert_eq!(h.values.len(), 12);
        assert!(h.values.iter().all(|&v| v == 0.0));
        let miss = sweep_heatmap(&rect(1.0, 2.0, 2.0, 3.0), LatticeAxis::new(0.0, 0.0, 1), LatticeAxis::new(0.0, 0.0, 1), SizingMode::FixedPowerFactor { angle: 0.0 }).unwrap();
        assert!(miss.at(0, 0).is_nan());
    }
}
