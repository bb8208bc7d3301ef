//! Boundary search and incremental exploration of convex feasible regions.
//!
//! The evaluator is injected: the exact power flow, the linearized model or
//! any synthetic predicate. Exploration starts from the origin (no extra
//! integration), which must be feasible.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cell::Cell;
use core::f64::consts::PI;

use thiserror::Error;

use crate::flow::{evaluate_point_with_solution, OperatingPoint, Solution};
use crate::geometry::{hull_from_ring, ConvexPolygon, GeometryError, Provenance, Region, Vec2};
use crate::grid::{AxisLabel, Component, Grid};
use crate::linearized::{check_linearized_feasibility, solve_linearized, LinSolution};
use crate::math::{ceil, cos, log2, sin, sqrt};

/// Feasibility oracle over points of the explored space.
pub trait Evaluator {
    /// Information kept for feasible points.
    type State: Clone;

    /// `Some(state)` when `point` is feasible.
    fn probe(&self, point: &[f64]) -> Option<Self::State>;

    fn provenance(&self) -> Provenance {
        Provenance::Exact
    }
}

/// Adapts a boolean predicate.
pub struct Predicate<F>(pub F);

impl<F: Fn(&[f64]) -> bool> Evaluator for Predicate<F> {
    type State = ();

    fn probe(&self, point: &[f64]) -> Option<()> {
        (self.0)(point).then_some(())
    }
}

/// Exact DistFlow evaluator over operating-point axes (MW / MVAr).
pub struct ExactEvaluator<'g> {
    pub grid: &'g Grid,
    pub axes: Vec<AxisLabel>,
}

impl<'g> ExactEvaluator<'g> {
    pub fn new(grid: &'g Grid, axes: Vec<AxisLabel>) -> Self {
        Self { grid, axes }
    }
}

impl Evaluator for ExactEvaluator<'_> {
    type State = Solution;

    fn probe(&self, point: &[f64]) -> Option<Solution> {
        let op = OperatingPoint::from_axes(&self.axes, point);
        match evaluate_point_with_solution(self.grid, &op) {
            (report, Some(sol)) if report.feasible() => Some(sol),
            _ => None,
        }
    }
}

/// Linearized DistFlow evaluator over operating-point axes.
pub struct LinearizedEvaluator<'g> {
    pub grid: &'g Grid,
    pub axes: Vec<AxisLabel>,
}

impl<'g> LinearizedEvaluator<'g> {
    pub fn new(grid: &'g Grid, axes: Vec<AxisLabel>) -> Self {
        Self { grid, axes }
    }
}

impl Evaluator for LinearizedEvaluator<'_> {
    type State = LinSolution;

    fn probe(&self, point: &[f64]) -> Option<LinSolution> {
        let op = OperatingPoint::from_axes(&self.axes, point);
        let lsol = solve_linearized(self.grid, &op).ok()?;
        check_linearized_feasibility(self.grid, &lsol).feasible().then_some(lsol)
    }

    fn provenance(&self) -> Provenance {
        Provenance::Linearized
    }
}

/// Counts probes of the wrapped evaluator.
pub struct Counting<'a, E> {
    inner: &'a E,
    calls: Cell<usize>,
}

impl<'a, E: Evaluator> Counting<'a, E> {
    pub fn new(inner: &'a E) -> Self {
        Self {
            inner,
            calls: Cell::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.get()
    }
}

impl<E: Evaluator> Evaluator for Counting<'_, E> {
    type State = E::State;

    fn probe(&self, point: &[f64]) -> Option<E::State> {
        self.calls.set(self.calls.get() + 1);
        self.inner.probe(point)
    }

    fn provenance(&self) -> Provenance {
        self.inner.provenance()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExploreError {
    #[error("lower starting point is infeasible")]
    InfeasibleStart,
    #[error("ray stays feasible after {doublings} doublings")]
    UnboundedRay { doublings: u32 },
    #[error("boundary points collapse onto a line")]
    DegenerateRegion,
    #[error("invalid configuration: {0}")]
    BadConfig(&'static str),
    #[error("correction removed the whole region")]
    EmptyCorrection,
    #[error("line {line} has no current limit; correction is unbounded")]
    UnlimitedLine { line: String },
    #[error("region provenance must be linearized, found {0}")]
    WrongProvenance(&'static str),
    #[error("axis {0} does not name a bus of the grid")]
    UnknownAxis(String),
}

impl From<GeometryError> for ExploreError {
    fn from(_: GeometryError) -> Self {
        ExploreError::DegenerateRegion
    }
}

/// Result of one bisection search.
#[derive(Clone, Debug, PartialEq)]
pub struct Dichotomy<S> {
    /// Last feasible point.
    pub location: Vec<f64>,
    /// First infeasible point of the final bracket.
    pub outside: Vec<f64>,
    pub state: S,
    /// Midpoint evaluations.
    pub bisections: usize,
    /// How often the upper point had to be pushed outwards.
    pub doublings: u32,
}

/// Default number of times the upper point may be doubled away from the lower one.
pub const MAX_DOUBLINGS: u32 = 10;

fn distance(a: &[f64], b: &[f64]) -> f64 {
    sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

fn midpoint(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
}

/// Bisection between a feasible `s_l` and an infeasible `s_u`, in any dimension.
///
/// If `s_u` is feasible, the segment is doubled (up to [`MAX_DOUBLINGS`]
/// times). Stops once the bracket is no longer than `eps` and returns its
/// feasible end; the midpoint count is at most `⌈log₂(|s_u − s_l| / eps)⌉`.
pub fn dichotomy_boundary<E: Evaluator>(ev: &E, s_l: &[f64], s_u: &[f64], eps: f64) -> Result<Dichotomy<E::State>, ExploreError> {
    dichotomy_with_start(ev, s_l, None, s_u, eps, MAX_DOUBLINGS)
}

fn dichotomy_with_start<E: Evaluator>(
    ev: &E,
    s_l: &[f64],
    start_state: Option<E::State>,
    s_u: &[f64],
    eps: f64,
    max_doublings: u32,
) -> Result<Dichotomy<E::State>, ExploreError> {
    if !(eps > 0.0) {
        return Err(ExploreError::BadConfig("dichotomy eps must be positive"));
    }
    if s_l.len() != s_u.len() {
        return Err(ExploreError::BadConfig("endpoints differ in dimension"));
    }
    let mut state = match start_state {
        Some(s) => s,
        None => ev.probe(s_l).ok_or(ExploreError::InfeasibleStart)?,
    };

    let mut upper = s_u.to_vec();
    let mut doublings = 0;
    while ev.probe(&upper).is_some() {
        if doublings == max_doublings {
            return Err(ExploreError::UnboundedRay { doublings });
        }
        doublings += 1;
        let scale = (1u64 << doublings) as f64;
        upper = s_l.iter().zip(s_u).map(|(l, u)| l + scale * (u - l)).collect();
    }

    let mut a = s_l.to_vec();
    let mut b = upper;
    let mut bisections = 0;
    while distance(&a, &b) > eps {
        let mid = midpoint(&a, &b);
        bisections += 1;
        match ev.probe(&mid) {
            Some(s) => {
                a = mid;
                state = s;
            }
            None => b = mid,
        }
    }
    Ok(Dichotomy {
        location: a,
        outside: b,
        state,
        bisections,
        doublings,
    })
}

/// Upper bound on the midpoint count of a bisection over `length`.
pub fn bisection_budget(length: f64, eps: f64) -> usize {
    if length <= eps {
        0
    } else {
        ceil(log2(length / eps)) as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExploreConfig {
    /// Bisection stopping distance, in axis units.
    pub dichotomy_eps: f64,
    /// Stop once this many ray directions were probed.
    pub max_directions: usize,
    /// Orthonormal seed directions.
    pub initial_basis: [Vec2; 2],
    /// Length of the first upper-bound ray.
    pub initial_length: f64,
    pub max_doublings: u32,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        Self {
            dichotomy_eps: 1e-6,
            max_directions: 64,
            initial_basis: [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)],
            initial_length: 1.0,
            max_doublings: MAX_DOUBLINGS,
        }
    }
}

impl ExploreConfig {
    pub fn validate(&self) -> Result<(), ExploreError> {
        if !(self.dichotomy_eps > 0.0) {
            return Err(ExploreError::BadConfig("dichotomy_eps must be positive"));
        }
        if self.max_directions < 4 || !self.max_directions.is_multiple_of(2) {
            return Err(ExploreError::BadConfig("max_directions must be even and at least 4"));
        }
        if !(self.initial_length > 0.0) {
            return Err(ExploreError::BadConfig("initial_length must be positive"));
        }
        let [v1, v2] = self.initial_basis;
        if (v1.norm() - 1.0).abs() > 1e-9 || (v2.norm() - 1.0).abs() > 1e-9 || v1.dot(v2).abs() > 1e-9 {
            return Err(ExploreError::BadConfig("initial basis must be orthonormal"));
        }
        Ok(())
    }
}

/// First upper-bound ray length for a grid: twice the widest finite
/// injection-bound span on the axes, or twice the power base when none is finite.
pub fn initial_ray_length(grid: &Grid, axes: &[AxisLabel]) -> f64 {
    let mut span: f64 = 0.0;
    for label in axes {
        if let Some(k) = grid.bus_index(&label.bus) {
            let bus = &grid.buses()[k];
            let w = match label.component {
                Component::P => bus.p_max - bus.p_min,
                Component::Q => bus.q_max - bus.q_min,
            };
            if w.is_finite() {
                span = span.max(w * grid.s_base());
            }
        }
    }
    if span > 0.0 {
        2.0 * span
    } else {
        2.0 * grid.s_base()
    }
}

/// A point on the explored boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryPoint<S> {
    pub location: Vec2,
    /// Unit direction of the ray it was found on.
    pub direction: Vec2,
    pub state: S,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExploreWarning {
    /// A new boundary point lay strictly inside the current hull: the
    /// evaluator's region is not convex along this ray.
    InteriorBoundaryPoint { direction: Vec2, depth: f64 },
    /// The chord point used as lower start was infeasible; the ray restarted at the origin.
    InfeasibleChordStart { direction: Vec2 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Exploration<S> {
    pub region: Region,
    /// Boundary points in counterclockwise order of their ray direction.
    pub boundary: Vec<BoundaryPoint<S>>,
    pub evaluations: usize,
    pub warnings: Vec<ExploreWarning>,
}

struct Ray<S> {
    /// Angle in the normalized frame.
    angle: f64,
    point: BoundaryPoint<S>,
}

/// Maps between the raw axis frame and a frame where the seed boundary
/// distances are one; directions are bisected in the normalized frame.
#[derive(Clone, Copy)]
struct Frame {
    basis: [Vec2; 2],
    scale: [f64; 2],
}

impl Frame {
    fn to_normalized(self, d: Vec2) -> Vec2 {
        Vec2::new(d.dot(self.basis[0]) / self.scale[0], d.dot(self.basis[1]) / self.scale[1])
    }

    fn to_raw(self, n: Vec2) -> Vec2 {
        self.basis[0] * (n.x * self.scale[0]) + self.basis[1] * (n.y * self.scale[1])
    }
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a < 0.0 {
        a += 2.0 * PI;
    }
    a
}

/// Incremental exploration of a two-dimensional region around the origin.
///
/// Seeds with the four rays `±v₁`, `±v₂`, then repeatedly splits an
/// angular gap between adjacent rays and probes a direction inside it
/// together with its opposite, until `max_directions` rays exist. The gap
/// split is the least resolved one (the widest once all are resolved), and
/// the direction aims at the corner predicted by the boundary segments on
/// both sides of it when there is one, bisecting the gap otherwise. Gaps are
/// measured after scaling each basis direction by its mean seed distance so
/// elongated regions are refined evenly. Each new ray starts at its crossing
/// with the chord between its neighbours' boundary points.
pub fn explore_region_2d<E: Evaluator>(ev: &E, axes: [AxisLabel; 2], config: &ExploreConfig) -> Result<Exploration<E::State>, ExploreError> {
    config.validate()?;
    let counter = Counting::new(ev);
    let origin_state = counter.probe(&[0.0, 0.0]).ok_or(ExploreError::InfeasibleStart)?;
    let eps = config.dichotomy_eps;
    let [v1, v2] = config.initial_basis;

    let mut warnings = Vec::new();
    let shoot = |dir: Vec2, start: Vec2, start_state: Option<E::State>, warnings: &mut Vec<ExploreWarning>| {
        let along = start.dot(dir).max(0.0);
        let reach = config.initial_length.max(2.0 * along);
        let upper = (dir * reach).to_array();
        let first = dichotomy_with_start(&counter, &start.to_array(), start_state, &upper, eps, config.max_doublings);
        let found = match first {
            Err(ExploreError::InfeasibleStart) => {
                warnings.push(ExploreWarning::InfeasibleChordStart { direction: dir });
                dichotomy_with_start(&counter, &[0.0, 0.0], Some(origin_state.clone()), &upper, eps, config.max_doublings)?
            }
            other => other?,
        };
        Ok::<_, ExploreError>(BoundaryPoint {
            location: Vec2::from([found.location[0], found.location[1]]),
            direction: dir,
            state: found.state,
        })
    };

    let seeds = [v1, v2, -v1, -v2];
    let mut seed_points = Vec::with_capacity(4);
    for d in seeds {
        seed_points.push(shoot(d, Vec2::ZERO, Some(origin_state.clone()), &mut warnings)?);
    }
    let seed_scale = |a: &BoundaryPoint<E::State>, b: &BoundaryPoint<E::State>| {
        let s = 0.5 * (a.location.norm() + b.location.norm());
        if s > 0.0 {
            s
        } else {
            1.0
        }
    };
    let frame = Frame {
        basis: [v1, v2],
        scale: [seed_scale(&seed_points[0], &seed_points[2]), seed_scale(&seed_points[1], &seed_points[3])],
    };
    let mut rays: Vec<Ray<E::State>> = seed_points
        .into_iter()
        .map(|p| Ray {
            angle: wrap_angle(frame.to_normalized(p.direction).angle()),
            point: p,
        })
        .collect();
    rays.sort_by(|a, b| a.angle.total_cmp(&b.angle));
    let eps_normalized = eps / frame.scale[0].min(frame.scale[1]);

    while rays.len() < config.max_directions {
        let n = rays.len();
        let gaps: Vec<(usize, f64, GapEstimate)> = (0..n)
            .map(|k| {
                let next = if k + 1 < n { rays[k + 1].angle } else { rays[0].angle + 2.0 * PI };
                let gap = next - rays[k].angle;
                (k, gap, gap_estimate(&rays, k, gap, &frame))
            })
            .collect();
        // The first round bisects the seed quadrants so every estimate rests on
        // two points per side. Afterwards the least resolved gap is split, or
        // the widest once every gap is resolved.
        let first_round = n < 8;
        let resolved = |e: &GapEstimate| first_round || e.error <= eps_normalized;
        let (k, gap, estimate) = gaps
            .iter()
            .copied()
            .fold(None, |best: Option<(usize, f64, GapEstimate)>, cur| match best {
                None => Some(cur),
                Some(b) => {
                    let better = match (resolved(&cur.2), resolved(&b.2)) {
                        (false, true) => true,
                        (true, false) => false,
                        (false, false) => cur.2.error > b.2.error,
                        (true, true) => cur.1 > b.1,
                    };
                    Some(if better { cur } else { b })
                }
            })
            .expect("at least four rays");
        let mid = estimate
            .corner
            .filter(|_| !resolved(&estimate))
            .unwrap_or_else(|| wrap_angle(rays[k].angle + 0.5 * gap));
        for angle in [mid, wrap_angle(mid + PI)] {
            if rays.len() >= config.max_directions {
                break;
            }
            if rays.iter().any(|r| (r.angle - angle).abs() < 1e-12 || (r.angle - angle).abs() > 2.0 * PI - 1e-12) {
                continue;
            }
            let dir = frame
                .to_raw(Vec2::new(cos(angle), sin(angle)))
                .normalized()
                .ok_or(ExploreError::DegenerateRegion)?;
            let pos = rays.partition_point(|r| r.angle < angle);
            let before = &rays[(pos + rays.len() - 1) % rays.len()].point;
            let after = &rays[pos % rays.len()].point;
            let start = chord_crossing(before.location, after.location, dir).unwrap_or(Vec2::ZERO);
            let current_hull = hull_from_ring(&rays.iter().map(|r| r.point.location).collect::<Vec<_>>()).ok();

            let point = shoot(dir, start, None, &mut warnings)?;
            if let Some(h) = current_hull {
                let depth = h.margin(point.location);
                if depth > eps {
                    warnings.push(ExploreWarning::InteriorBoundaryPoint { direction: dir, depth });
                }
            }
            rays.insert(pos, Ray { angle, point });
        }
    }

    let points: Vec<Vec2> = rays.iter().map(|r| r.point.location).collect();
    let polygon = hull_from_ring(&points)?;
    Ok(Exploration {
        region: Region::new(polygon, axes, ev.provenance()),
        boundary: rays.into_iter().map(|r| r.point).collect(),
        evaluations: counter.calls(),
        warnings,
    })
}

#[derive(Clone, Copy, Debug)]
struct GapEstimate {
    /// Bound on how far the boundary can stray outside the chord, in the normalized frame.
    error: f64,
    /// Angle of the predicted corner when it lies strictly inside the gap.
    corner: Option<f64>,
}

/// How well the boundary across the gap after ray `k` is resolved.
///
/// Extends the boundary segments on either side of the gap, from the
/// previous ray through ray `k` and from ray `k + 2` back through ray
/// `k + 1`. For a convex region the boundary in the gap lies between the
/// chord and these extensions, so the distance from their meeting point to
/// the chord bounds the error. When that point lies strictly inside the
/// gap's wedge it is the corner a polygonal boundary would have there, and
/// probing that direction recovers it exactly.
fn gap_estimate<S>(rays: &[Ray<S>], k: usize, gap: f64, frame: &Frame) -> GapEstimate {
    let n = rays.len();
    let at = |i: usize| frame.to_normalized(rays[(k + n + i - 1) % n].point.location);
    let (a0, a, b, b1) = (at(0), at(1), at(2), at(3));
    let unknown = GapEstimate {
        error: (b - a).norm(),
        corner: None,
    };
    let Some(chord) = (b - a).normalized() else {
        return GapEstimate { error: 0.0, corner: None };
    };
    let (da, db) = (a - a0, b - b1);
    let den = da.cross(db);
    if den.abs() <= 1e-12 * da.norm() * db.norm() {
        // Parallel extensions: resolved only when all four points line up.
        let off = chord.cross(a0 - a).abs().max(chord.cross(b1 - a).abs());
        return if off <= 1e-12 * (b - a).norm() {
            GapEstimate { error: 0.0, corner: None }
        } else {
            unknown
        };
    }
    // a + s·da = b + t·db
    let w = b - a;
    let s = w.cross(db) / den;
    let t = w.cross(da) / den;
    if !(s >= 0.0 && t >= 0.0) {
        // The extensions meet behind the chord: a convex boundary is straight here.
        return GapEstimate { error: 0.0, corner: None };
    }
    let c = a + da * s;
    let error = (-chord.cross(c - a)).max(0.0);
    let offset = wrap_angle(wrap_angle(c.angle()) - rays[k].angle);
    let margin = 1e-9 * gap;
    let corner = (offset > margin && offset < gap - margin).then(|| wrap_angle(rays[k].angle + offset));
    GapEstimate { error, corner }
}

/// Point where the ray `t·dir, t ≥ 0` crosses the segment `[a, b]`.
fn chord_crossing(a: Vec2, b: Vec2, dir: Vec2) -> Option<Vec2> {
    // t·dir = a + s (b − a)
    let e = b - a;
    let den = dir.cross(e);
    if den.abs() < 1e-300 {
        return None;
    }
    let t = a.cross(e) / den;
    let s = a.cross(dir) / den;
    (t >= 0.0 && (-1e-12..=1.0 + 1e-12).contains(&s)).then(|| dir * t)
}

/// Shifts applied to a linearized region for one line: every non-empty
/// combination of the per-axis offsets `r·l_max` (P axes) and `x·l_max` (Q axes).
pub fn correction_shifts(grid: &Grid, axes: &[AxisLabel; 2], line: usize) -> Vec<Vec2> {
    let l = &grid.lines()[line];
    let per_axis: Vec<f64> = axes
        .iter()
        .map(|a| match a.component {
            Component::P => l.r * l.l_max * grid.s_base(),
            Component::Q => l.x * l.l_max * grid.s_base(),
        })
        .collect();
    let mut out = Vec::new();
    for mask in 1..4u8 {
        let s = Vec2::new(
            if mask & 1 != 0 { per_axis[0] } else { 0.0 },
            if mask & 2 != 0 { per_axis[1] } else { 0.0 },
        );
        if s != Vec2::ZERO && !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

/// Shrinks a linearized region into the exact one by intersecting it with
/// copies shifted by each line's worst-case loss terms.
///
/// The linearized injection under-estimates the exact one by `r_ij l_ij`
/// (active) and `x_ij l_ij` (reactive), both bounded by the line's current
/// limit. A point whose every shifted pre-image lies in the linearized
/// region is kept.
pub fn correct_region(region: &Region, grid: &Grid) -> Result<Region, ExploreError> {
    if region.provenance != Provenance::Linearized {
        return Err(ExploreError::WrongProvenance(region.provenance.as_str()));
    }
    for a in &region.axes {
        if grid.bus_index(&a.bus).is_none() {
            return Err(ExploreError::UnknownAxis(format!("{a}")));
        }
    }
    let mut current: ConvexPolygon = region.polygon.clone();
    for e in 0..grid.line_count() {
        if !grid.lines()[e].l_max.is_finite() {
            return Err(ExploreError::UnlimitedLine { line: grid.line_label(e) });
        }
        for shift in correction_shifts(grid, &region.axes, e) {
            current = current
                .intersect(&region.polygon.translated(shift))
                .ok_or(ExploreError::EmptyCorrection)?;
        }
    }
    Ok(Region::new(current, region.axes.clone(), Provenance::Corrected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{validate_grid, Bus, GridCase, Line};

    fn axes() -> [AxisLabel; 2] {
        [AxisLabel::p("a"), AxisLabel::p("b")]
    }

    #[test]
    fn threshold_on_a_line() {
        let ev = Predicate(|p: &[f64]| p[0] <= 3.0);
        let d = dichotomy_boundary(&ev, &[0.0], &[10.0], 1e-6).unwrap();
        assert!((d.location[0] - 3.0).abs() <= 1e-6);
        assert!(d.location[0] <= 3.0);
        assert!(d.bisections <= bisection_budget(10.0, 1e-6) + 1);
    }

    #[test]
    fn unit_disk_along_x() {
        let ev = Predicate(|p: &[f64]| p[0] * p[0] + p[1] * p[1] <= 1.0);
        let d = dichotomy_boundary(&ev, &[0.0, 0.0], &[2.0, 0.0], 1e-8).unwrap();
        assert!((d.location[0] - 1.0).abs() <= 1e-8);
        assert_eq!(d.location[1], 0.0);
    }

    #[test]
    fn short_ray_is_doubled() {
        let ev = Predicate(|p: &[f64]| p[0] <= 3.0);
        let d = dichotomy_boundary(&ev, &[0.0], &[1.0], 1e-6).unwrap();
        assert_eq!(d.doublings, 2);
        assert!((d.location[0] - 3.0).abs() <= 1e-6);
    }

    #[test]
    fn dichotomy_errors() {
        let ev = Predicate(|p: &[f64]| p[0] >= 1.0);
        assert_eq!(dichotomy_boundary(&ev, &[0.0], &[2.0], 1e-3).unwrap_err(), ExploreError::InfeasibleStart);
        let always = Predicate(|_: &[f64]| true);
        assert!(matches!(
            dichotomy_boundary(&always, &[0.0], &[1.0], 1e-3),
            Err(ExploreError::UnboundedRay { doublings: MAX_DOUBLINGS })
        ));
    }

    #[test]
    fn square_recovered_with_eight_directions() {
        let ev = Predicate(|p: &[f64]| p[0].abs() <= 0.5 && p[1].abs() <= 0.5);
        let config = ExploreConfig {
            max_directions: 8,
            dichotomy_eps: 1e-7,
            ..ExploreConfig::default()
        };
        let ex = explore_region_2d(&ev, axes(), &config).unwrap();
        assert_eq!(ex.boundary.len(), 8);
        // Every vertex lies on the square's boundary up to the bisection tolerance.
        for v in ex.region.vertices() {
            let gap = (v.x.abs().max(v.y.abs()) - 0.5).abs();
            assert!(gap <= 2e-7, "{v:?}");
        }
        assert!((ex.region.area() - 1.0).abs() < 1e-6);
        assert!(ex.warnings.is_empty());
    }

    #[test]
    fn infeasible_origin() {
        let ev = Predicate(|p: &[f64]| p[0] > 1.0);
        assert_eq!(
            explore_region_2d(&ev, axes(), &ExploreConfig::default()).unwrap_err(),
            ExploreError::InfeasibleStart
        );
    }

    #[test]
    fn bad_configs() {
        let ev = Predicate(|_: &[f64]| true);
        for config in [
            ExploreConfig {
                max_directions: 6 + 1,
                ..Default::default()
            },
            ExploreConfig {
                max_directions: 2,
                ..Default::default()
            },
            ExploreConfig {
                dichotomy_eps: 0.0,
                ..Default::default()
            },
        ] {
            assert!(matches!(explore_region_2d(&ev, axes(), &config), Err(ExploreError::BadConfig(_))));
        }
    }

    #[test]
    fn flat_region_is_degenerate() {
        let ev = Predicate(|p: &[f64]| p[1] == 0.0 && p[0].abs() <= 1.0);
        assert_eq!(
            explore_region_2d(&ev, axes(), &ExploreConfig::default()).unwrap_err(),
            ExploreError::DegenerateRegion
        );
    }

    fn line_grid(r: f64, x: f64, l_max: f64) -> Grid {
        validate_grid(GridCase {
            buses: vec![
                Bus::new("s", 0.81, 1.21).slack(),
                Bus::new("a", 0.81, 1.21).poc(),
                Bus::new("b", 0.81, 1.21).poc(),
            ],
            lines: vec![Line::new("s", "a", r, x, l_max), Line::new("a", "b", r, x, l_max)],
            s_base: 1.0,
            v_base: 1.0,
            v_slack: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn zero_shift_correction_is_identity() {
        let grid = line_grid(0.0, 1e-3, 1.0);
        let square = ConvexPolygon::rectangle(-1.0, 1.0, -1.0, 1.0).unwrap();
        let region = Region::new(square.clone(), axes(), Provenance::Linearized);
        let corrected = correct_region(&region, &grid).unwrap();
        assert_eq!(corrected.provenance, Provenance::Corrected);
        assert!((corrected.area() - square.area()).abs() < 1e-12);
    }

    #[test]
    fn single_axis_shift_trims_lower_side() {
        // P axis on a, Q axis on b; the first line dominates both shifts.
        let grid = validate_grid(GridCase {
            buses: vec![
                Bus::new("s", 0.81, 1.21).slack(),
                Bus::new("a", 0.81, 1.21).poc(),
                Bus::new("b", 0.81, 1.21).poc(),
            ],
            lines: vec![Line::new("s", "a", 0.5, 0.1, 1.0), Line::new("a", "b", 0.25, 0.1, 1.0)],
            s_base: 1.0,
            v_base: 1.0,
            v_slack: 1.0,
        })
        .unwrap();
        let axes = [AxisLabel::p("a"), AxisLabel::q("b")];
        let unit = ConvexPolygon::rectangle(0.0, 1.0, 0.0, 1.0).unwrap();
        let region = Region::new(unit, axes, Provenance::Linearized);
        let corrected = correct_region(&region, &grid).unwrap();
        // x shifts by at most 0.5, y by at most 0.1.
        let xs: Vec<f64> = corrected.vertices().iter().map(|v| v.x).collect();
        let ys: Vec<f64> = corrected.vertices().iter().map(|v| v.y).collect();
        assert!((xs.iter().cloned().fold(f64::INFINITY, f64::min) - 0.5).abs() < 1e-12);
        assert!((ys.iter().cloned().fold(f64::INFINITY, f64::min) - 0.1).abs() < 1e-12);
        assert!((corrected.area() - 0.5 * 0.9).abs() < 1e-12);
    }

    #[test]
    fn correction_errors() {
        let grid = line_grid(0.5, 0.5, 100.0);
        let small = ConvexPolygon::rectangle(-0.1, 0.1, -0.1, 0.1).unwrap();
        let region = Region::new(small.clone(), axes(), Provenance::Linearized);
        assert_eq!(correct_region(&region, &grid).unwrap_err(), ExploreError::EmptyCorrection);
        let exact = Region::new(small, axes(), Provenance::Exact);
        assert!(matches!(correct_region(&exact, &grid), Err(ExploreError::WrongProvenance(_))));
    }
}
