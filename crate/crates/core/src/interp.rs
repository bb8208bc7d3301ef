//! Boundary densification through the relaxed DistFlow model.
//!
//! Convex combinations of exact solutions satisfy every linear branch-flow
//! equation and, by convexity of `(P² + Q²)/v`, the relaxed current
//! inequality `l ≥ (P² + Q²)/v`. Each line is then pulled back onto the
//! tight surface by removing `ε` from its current and `rε/2`, `xε/2` from
//! its flows and from both endpoint injections, which leaves the balance and
//! voltage equations intact.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::explorer::BoundaryPoint;
use crate::flow::{solve_power_flow, OperatingPoint, Solution};
use crate::geometry::Vec2;
use crate::grid::{AxisLabel, Grid};

/// Stopping threshold of the ε iteration.
pub const EPSILON_TOL: f64 = 1e-10;
/// Iteration cap of the ε iteration.
pub const EPSILON_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterpError {
    #[error("solutions do not belong to the same grid")]
    GridMismatch,
    #[error("epsilon iteration on line {line} did not converge within {iterations} steps")]
    NoConvergence { line: usize, iterations: usize },
    #[error("non-positive squared voltage at the sending end of line {line}")]
    NonPositiveVoltage { line: usize },
    #[error("need at least two anchors and a total no smaller than the anchor count")]
    BadPlan,
}

/// A state of the relaxed model together with its per-line slack
/// `l − (P² + Q²)/v_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct RelaxedPoint {
    pub state: Solution,
    pub violation: Vec<f64>,
}

fn current_slack(grid: &Grid, s: &Solution, e: usize) -> f64 {
    let v_i = s.v[grid.upstream(e)];
    s.l[e] - (s.p_flow[e] * s.p_flow[e] + s.q_flow[e] * s.q_flow[e]) / v_i
}

impl RelaxedPoint {
    pub fn from_state(grid: &Grid, state: Solution) -> Self {
        let violation = (0..grid.line_count()).map(|e| current_slack(grid, &state, e)).collect();
        Self { state, violation }
    }
}

fn lerp_vec(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect()
}

/// `(1 − t)·a + t·b`, componentwise.
pub fn combine_solutions(grid: &Grid, a: &Solution, b: &Solution, t: f64) -> Result<RelaxedPoint, InterpError> {
    if !a.matches(grid) || !b.matches(grid) {
        return Err(InterpError::GridMismatch);
    }
    let state = Solution {
        v: lerp_vec(&a.v, &b.v, t),
        l: lerp_vec(&a.l, &b.l, t),
        p_flow: lerp_vec(&a.p_flow, &b.p_flow, t),
        q_flow: lerp_vec(&a.q_flow, &b.q_flow, t),
        p_inj: lerp_vec(&a.p_inj, &b.p_inj, t),
        q_inj: lerp_vec(&a.q_inj, &b.q_inj, t),
        iterations: 0,
    };
    Ok(RelaxedPoint::from_state(grid, state))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonOutcome {
    /// Total current removed from the line, `l* − l̃`.
    pub epsilon: f64,
    pub iterations: usize,
    /// Last increment `l̃ − (P̃² + Q̃²)/v`.
    pub residual: f64,
}

/// Fixed-point iteration for the current correction of one line.
///
/// Starting from the relaxed state, repeatedly removes the current excess
/// `ε⁽ⁿ⁾ = l⁽ⁿ⁾ − [(P⁽ⁿ⁾)² + (Q⁽ⁿ⁾)²]/v` from `l` while shifting the flows
/// by `rε⁽ⁿ⁾/2` and `xε⁽ⁿ⁾/2`, until `|ε⁽ⁿ⁾| ≤` [`EPSILON_TOL`].
pub fn epsilon_for_line(v_i: f64, p: f64, q: f64, l: f64, r: f64, x: f64) -> Option<EpsilonOutcome> {
    if !(v_i > 0.0) {
        return None;
    }
    let (mut lt, mut pt, mut qt) = (l, p, q);
    let mut step = lt - (pt * pt + qt * qt) / v_i;
    let mut n = 0;
    while step.abs() > EPSILON_TOL {
        if n == EPSILON_MAX_ITER || !step.is_finite() {
            return None;
        }
        n += 1;
        lt -= step;
        pt -= 0.5 * r * step;
        qt -= 0.5 * x * step;
        step = lt - (pt * pt + qt * qt) / v_i;
    }
    Some(EpsilonOutcome {
        epsilon: l - lt,
        iterations: n,
        residual: step,
    })
}

/// A relaxed point moved onto the tight current surface.
#[derive(Clone, Debug, PartialEq)]
pub struct MappedPoint {
    pub state: Solution,
    pub epsilon: Vec<f64>,
    /// Per-bus reactive injection removed, `Σ x_ij ε_ij / 2` over incident lines (pu).
    pub delta_q: Vec<f64>,
    /// Per-bus active injection removed, `Σ r_ij ε_ij / 2` over incident lines (pu).
    pub delta_p: Vec<f64>,
    /// Largest ε iteration count over the lines.
    pub iterations: usize,
}

impl MappedPoint {
    /// Σ |ΔQ_j| over non-slack buses (pu).
    pub fn q_correction(&self, grid: &Grid) -> f64 {
        self.delta_q
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != grid.slack())
            .map(|(_, d)| d.abs())
            .sum()
    }
}

/// Applies the per-line ε shift to every line. Voltages are unchanged;
/// buses incident to several lines accumulate their shifts.
#[allow(clippy::needless_range_loop)]
pub fn map_to_feasible(grid: &Grid, rp: &RelaxedPoint) -> Result<MappedPoint, InterpError> {
    if !rp.state.matches(grid) {
        return Err(InterpError::GridMismatch);
    }
    let n = grid.bus_count();
    let m = grid.line_count();
    let mut state = rp.state.clone();
    let mut epsilon = vec![0.0; m];
    let mut delta_p = vec![0.0; n];
    let mut delta_q = vec![0.0; n];
    let mut iterations = 0;
    for e in 0..m {
        let line = &grid.lines()[e];
        let i = grid.upstream(e);
        let j = grid.downstream(e);
        let s = &rp.state;
        if !(s.v[i] > 0.0) {
            return Err(InterpError::NonPositiveVoltage { line: e });
        }
        let out = epsilon_for_line(s.v[i], s.p_flow[e], s.q_flow[e], s.l[e], line.r, line.x)
            .ok_or(InterpError::NoConvergence {
                line: e,
                iterations: EPSILON_MAX_ITER,
            })?;
        let eps = out.epsilon;
        iterations = iterations.max(out.iterations);
        epsilon[e] = eps;
        state.l[e] -= eps;
        state.p_flow[e] -= 0.5 * line.r * eps;
        state.q_flow[e] -= 0.5 * line.x * eps;
        for b in [i, j] {
            state.p_inj[b] -= 0.5 * line.r * eps;
            state.q_inj[b] -= 0.5 * line.x * eps;
            delta_p[b] += 0.5 * line.r * eps;
            delta_q[b] += 0.5 * line.x * eps;
        }
    }
    Ok(MappedPoint {
        state,
        epsilon,
        delta_q,
        delta_p,
        iterations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointKind {
    /// A boundary point supplied by power flow.
    Anchor,
    /// A chord point mapped by the ε correction.
    Interpolated,
    /// The ε correction failed and the chord point was solved by power flow instead.
    PowerFlowFallback,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterpolatedPoint {
    /// Axis coordinates (MW / MVAr) of the state.
    pub location: Vec2,
    pub kind: PointKind,
    /// Σ |ΔQ_j| over non-slack buses (MVAr); zero for anchors and fallbacks.
    pub q_correction: f64,
    pub state: Solution,
    /// Anchor segment the point belongs to and its chord parameter.
    pub segment: usize,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterpolationReport {
    pub points: Vec<InterpolatedPoint>,
    pub anchor_count: usize,
    pub interp_count: usize,
    pub fallback_count: usize,
    /// Largest per-point reactive correction (MVAr).
    pub max_q_correction: f64,
}

/// One planned point: anchor segment `(k, k+1)` and chord parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlannedPoint {
    pub segment: usize,
    /// `None` for the anchor itself.
    pub t: Option<f64>,
}

/// Spreads `total − anchors` chord points evenly over the anchor segments.
///
/// Anchors form a closed ring when there are at least three; two anchors
/// give a single segment. Earlier segments receive the remainder. The plan
/// lists each anchor followed by the chord points of the segment it opens.
pub fn interpolation_plan(anchors: usize, total: usize) -> Result<Vec<PlannedPoint>, InterpError> {
    if anchors < 2 || total < anchors {
        return Err(InterpError::BadPlan);
    }
    let segments = if anchors == 2 { 1 } else { anchors };
    let extra = total - anchors;
    let mut plan = Vec::with_capacity(total);
    for k in 0..anchors {
        plan.push(PlannedPoint { segment: k, t: None });
        if k >= segments {
            continue;
        }
        let count = extra / segments + usize::from(k < extra % segments);
        for i in 1..=count {
            plan.push(PlannedPoint {
                segment: k,
                t: Some(i as f64 / (count + 1) as f64),
            });
        }
    }
    Ok(plan)
}

fn location(grid: &Grid, axes: &[AxisLabel; 2], s: &Solution) -> Vec2 {
    Vec2::new(
        s.axis_value(grid, &axes[0]).unwrap_or(f64::NAN),
        s.axis_value(grid, &axes[1]).unwrap_or(f64::NAN),
    )
}

/// Produces one planned point from its segment's anchors.
pub fn interpolate_one(
    grid: &Grid,
    axes: &[AxisLabel; 2],
    anchors: &[BoundaryPoint<Solution>],
    planned: PlannedPoint,
) -> Result<InterpolatedPoint, InterpError> {
    let a = &anchors[planned.segment];
    let Some(t) = planned.t else {
        return Ok(InterpolatedPoint {
            location: location(grid, axes, &a.state),
            kind: PointKind::Anchor,
            q_correction: 0.0,
            state: a.state.clone(),
            segment: planned.segment,
            t: 0.0,
        });
    };
    let b = &anchors[(planned.segment + 1) % anchors.len()];
    let relaxed = combine_solutions(grid, &a.state, &b.state, t)?;
    match map_to_feasible(grid, &relaxed) {
        Ok(mapped) => Ok(InterpolatedPoint {
            location: location(grid, axes, &mapped.state),
            kind: PointKind::Interpolated,
            q_correction: mapped.q_correction(grid) * grid.s_base(),
            state: mapped.state,
            segment: planned.segment,
            t,
        }),
        Err(InterpError::NoConvergence { line, iterations }) => {
            let chord = location(grid, axes, &relaxed.state);
            let op = OperatingPoint::from_axes(axes, &chord.to_array());
            let state = solve_power_flow(grid, &op).map_err(|_| InterpError::NoConvergence { line, iterations })?;
            Ok(InterpolatedPoint {
                location: location(grid, axes, &state),
                kind: PointKind::PowerFlowFallback,
                q_correction: 0.0,
                state,
                segment: planned.segment,
                t,
            })
        }
        Err(other) => Err(other),
    }
}

/// Collects planned points into a report.
pub fn assemble_report(points: Vec<InterpolatedPoint>) -> InterpolationReport {
    let count = |kind| points.iter().filter(|p| p.kind == kind).count();
    InterpolationReport {
        anchor_count: count(PointKind::Anchor),
        interp_count: count(PointKind::Interpolated),
        fallback_count: count(PointKind::PowerFlowFallback),
        max_q_correction: points.iter().map(|p| p.q_correction).fold(0.0, f64::max),
        points,
    }
}

/// Densifies a boundary given by ordered anchors up to `total` points.
pub fn interpolate_boundary(
    grid: &Grid,
    axes: &[AxisLabel; 2],
    anchors: &[BoundaryPoint<Solution>],
    total: usize,
) -> Result<InterpolationReport, InterpError> {
    if anchors.iter().any(|a| !a.state.matches(grid)) {
        return Err(InterpError::GridMismatch);
    }
    let plan = interpolation_plan(anchors.len(), total)?;
    let points = plan
        .into_iter()
        .map(|p| interpolate_one(grid, axes, anchors, p))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(assemble_report(points))
}
