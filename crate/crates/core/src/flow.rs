//! Exact DistFlow power flow on radial grids.
//!
//! Branch-flow equations for a line `(i, j)` with downstream lines `(j, k)`:
//!
//! ```text
//! P_ij = Σ P_jk + r_ij l_ij − P_j
//! Q_ij = Σ Q_jk + x_ij l_ij − Q_j
//! v_j  = v_i − 2 (r_ij P_ij + x_ij Q_ij) + (r_ij² + x_ij²) l_ij
//! l_ij = (P_ij² + Q_ij²) / v_i
//! ```
//!
//! `P_j > 0` is generation into the grid. The solver is a backward/forward
//! sweep on the current estimate `l`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::grid::{AxisLabel, Component, Grid};

/// Extra injections at points of connection, in MW / MVAr.
///
/// Buses that are not referenced keep their base load only.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OperatingPoint {
    entries: BTreeMap<AxisLabel, f64>,
}

impl OperatingPoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, label: AxisLabel, value: f64) -> &mut Self {
        self.entries.insert(label, value);
        self
    }

    pub fn with(mut self, label: AxisLabel, value: f64) -> Self {
        self.set(label, value);
        self
    }

    /// Operating point along a list of axes.
    pub fn from_axes(axes: &[AxisLabel], values: &[f64]) -> Self {
        let mut op = Self::new();
        for (label, &value) in axes.iter().zip(values) {
            *op.entries.entry(label.clone()).or_insert(0.0) += value;
        }
        op
    }

    pub fn get(&self, label: &AxisLabel) -> f64 {
        self.entries.get(label).copied().unwrap_or(0.0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&AxisLabel, f64)> {
        self.entries.iter().map(|(k, v)| (k, *v))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Full DistFlow state. Bus-indexed and line-indexed vectors follow the
/// grid's ordering; flows are sending-end flows along the line orientation.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub v: Vec<f64>,
    pub l: Vec<f64>,
    pub p_flow: Vec<f64>,
    pub q_flow: Vec<f64>,
    pub p_inj: Vec<f64>,
    pub q_inj: Vec<f64>,
    /// Sweep iterations spent; zero for states that did not come from the solver.
    pub iterations: usize,
}

impl Solution {
    pub fn zeros(grid: &Grid) -> Self {
        let n = grid.bus_count();
        let m = grid.line_count();
        Self {
            v: vec![0.0; n],
            l: vec![0.0; m],
            p_flow: vec![0.0; m],
            q_flow: vec![0.0; m],
            p_inj: vec![0.0; n],
            q_inj: vec![0.0; n],
            iterations: 0,
        }
    }

    pub fn matches(&self, grid: &Grid) -> bool {
        self.v.len() == grid.bus_count()
            && self.p_inj.len() == grid.bus_count()
            && self.q_inj.len() == grid.bus_count()
            && self.l.len() == grid.line_count()
            && self.p_flow.len() == grid.line_count()
            && self.q_flow.len() == grid.line_count()
    }

    /// Value of an axis quantity in MW / MVAr: the net injection plus the
    /// base load, i.e. the extra injection an operating point would carry.
    pub fn axis_value(&self, grid: &Grid, label: &AxisLabel) -> Option<f64> {
        let k = grid.bus_index(&label.bus)?;
        let bus = &grid.buses()[k];
        let pu = match label.component {
            Component::P => self.p_inj[k] + bus.base_load_p,
            Component::Q => self.q_inj[k] + bus.base_load_q,
        };
        Some(pu * grid.s_base())
    }

    /// Total series losses Σ r l (pu).
    pub fn losses(&self, grid: &Grid) -> f64 {
        grid.lines().iter().zip(&self.l).map(|(line, l)| line.r * l).sum()
    }
}

/// Largest absolute residual of each equation family over the grid.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Residuals {
    pub active_balance: f64,
    pub reactive_balance: f64,
    pub voltage_drop: f64,
    pub current: f64,
}

impl Residuals {
    /// Largest residual of the three linear equation families.
    pub fn linear(&self) -> f64 {
        self.active_balance.max(self.reactive_balance).max(self.voltage_drop)
    }

    pub fn max(&self) -> f64 {
        self.linear().max(self.current)
    }
}

/// Evaluates the branch-flow equations on an arbitrary state.
///
/// The balance residual at the slack bus is `Σ P_0k − P_0`.
pub fn distflow_residuals(grid: &Grid, s: &Solution) -> Residuals {
    let mut res = Residuals::default();
    for j in 0..grid.bus_count() {
        let out_p: f64 = grid.child_lines(j).iter().map(|&c| s.p_flow[c]).sum();
        let out_q: f64 = grid.child_lines(j).iter().map(|&c| s.q_flow[c]).sum();
        let (rp, rq) = match grid.parent_line(j) {
            Some(e) => {
                let line = &grid.lines()[e];
                (
                    s.p_flow[e] - (out_p + line.r * s.l[e] - s.p_inj[j]),
                    s.q_flow[e] - (out_q + line.x * s.l[e] - s.q_inj[j]),
                )
            }
            None => (out_p - s.p_inj[j], out_q - s.q_inj[j]),
        };
        res.active_balance = res.active_balance.max(rp.abs());
        res.reactive_balance = res.reactive_balance.max(rq.abs());
    }
    for (e, line) in grid.lines().iter().enumerate() {
        let i = grid.upstream(e);
        let j = grid.downstream(e);
        let z2 = line.r * line.r + line.x * line.x;
        let dv = s.v[j] - (s.v[i] - 2.0 * (line.r * s.p_flow[e] + line.x * s.q_flow[e]) + z2 * s.l[e]);
        let di = s.l[e] - (s.p_flow[e] * s.p_flow[e] + s.q_flow[e] * s.q_flow[e]) / s.v[i];
        res.voltage_drop = res.voltage_drop.max(dv.abs());
        res.current = res.current.max(di.abs());
    }
    res
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("sweep did not converge after {iterations} iterations (mismatch {mismatch:.3e})")]
    NoConvergence { iterations: usize, mismatch: f64 },
    #[error("squared voltage at bus {bus} dropped to {v:.3e}")]
    NegativeVoltage { bus: String, v: f64 },
    #[error("operating point references {label}, which is not a point of connection")]
    NotPoc { label: String },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepOptions {
    /// Convergence threshold on the current equation mismatch (pu²).
    pub tol: f64,
    pub max_iter: usize,
    /// Damping is halved at most this many times.
    pub max_halvings: u32,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            max_halvings: 10,
        }
    }
}

/// Net injections (pu) implied by an operating point: extra injection minus base load.
pub fn net_injections(grid: &Grid, op: &OperatingPoint) -> Result<(Vec<f64>, Vec<f64>), FlowError> {
    let mut p: Vec<f64> = grid.buses().iter().map(|b| -b.base_load_p).collect();
    let mut q: Vec<f64> = grid.buses().iter().map(|b| -b.base_load_q).collect();
    let s_base = grid.s_base();
    for (label, value) in op.entries() {
        let k = grid
            .bus_index(&label.bus)
            .filter(|&k| grid.buses()[k].is_poc && k != grid.slack())
            .ok_or_else(|| FlowError::NotPoc {
                label: alloc::format!("{label}"),
            })?;
        match label.component {
            Component::P => p[k] += value / s_base,
            Component::Q => q[k] += value / s_base,
        }
    }
    Ok((p, q))
}

pub fn solve_power_flow(grid: &Grid, op: &OperatingPoint) -> Result<Solution, FlowError> {
    solve_power_flow_with(grid, op, &SweepOptions::default())
}

pub fn solve_power_flow_with(grid: &Grid, op: &OperatingPoint, opts: &SweepOptions) -> Result<Solution, FlowError> {
    let (p_inj, q_inj) = net_injections(grid, op)?;
    sweep(grid, p_inj, q_inj, opts)
}

/// Backward/forward sweep for fixed net injections (pu) at non-slack buses.
/// The slack entries of `p_inj` / `q_inj` are overwritten.
pub fn sweep(grid: &Grid, mut p_inj: Vec<f64>, mut q_inj: Vec<f64>, opts: &SweepOptions) -> Result<Solution, FlowError> {
    let m = grid.line_count();
    let n = grid.bus_count();
    let lines = grid.lines();
    let order = grid.order();
    let slack = grid.slack();

    let mut l = vec![0.0; m];
    let mut l_next = vec![0.0; m];
    let mut l_prev = vec![0.0; m];
    let mut p_flow = vec![0.0; m];
    let mut q_flow = vec![0.0; m];
    let mut v = vec![0.0; n];

    let mut damping = 1.0;
    let mut halvings = 0u32;
    let mut growth = 0u32;
    let mut last_mismatch = f64::INFINITY;
    let mut mismatch = f64::INFINITY;

    let mut iter = 0usize;
    while iter < opts.max_iter {
        iter += 1;
        // Backward: aggregate downstream flows using the current l.
        for &j in order.iter().rev() {
            if let Some(e) = grid.parent_line(j) {
                let out_p: f64 = grid.child_lines(j).iter().map(|&c| p_flow[c]).sum();
                let out_q: f64 = grid.child_lines(j).iter().map(|&c| q_flow[c]).sum();
                p_flow[e] = out_p + lines[e].r * l[e] - p_inj[j];
                q_flow[e] = out_q + lines[e].x * l[e] - q_inj[j];
            }
        }
        // Forward: voltages from the slack outwards, then currents.
        v[slack] = grid.v_slack();
        let mut collapsed = None;
        for &j in order.iter() {
            let Some(e) = grid.parent_line(j) else { continue };
            let i = grid.upstream(e);
            let line = &lines[e];
            let z2 = line.r * line.r + line.x * line.x;
            v[j] = v[i] - 2.0 * (line.r * p_flow[e] + line.x * q_flow[e]) + z2 * l[e];
            if !(v[j] > 0.0) {
                collapsed = Some(j);
                break;
            }
            l_next[e] = (p_flow[e] * p_flow[e] + q_flow[e] * q_flow[e]) / v[i];
        }

        if let Some(j) = collapsed {
            if halvings >= opts.max_halvings || iter == 1 {
                return Err(FlowError::NegativeVoltage {
                    bus: grid.buses()[j].id.clone(),
                    v: v[j],
                });
            }
            // Retreat towards the last accepted estimate with a shorter step.
            halvings += 1;
            damping *= 0.5;
            for e in 0..m {
                l[e] = l_prev[e] + 0.5 * (l[e] - l_prev[e]);
            }
            growth = 0;
            continue;
        }

        mismatch = l.iter().zip(&l_next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if !mismatch.is_finite() {
            break;
        }
        if mismatch <= opts.tol {
            // The state (l, flows, v) satisfies the linear equations exactly
            // and the current equation up to `mismatch`.
            let out_p: f64 = grid.child_lines(slack).iter().map(|&c| p_flow[c]).sum();
            let out_q: f64 = grid.child_lines(slack).iter().map(|&c| q_flow[c]).sum();
            p_inj[slack] = out_p;
            q_inj[slack] = out_q;
            return Ok(Solution {
                v,
                l,
                p_flow,
                q_flow,
                p_inj,
                q_inj,
                iterations: iter,
            });
        }

        if mismatch > last_mismatch {
            growth += 1;
        } else {
            growth = 0;
        }
        last_mismatch = mismatch;
        if growth >= 3 && halvings < opts.max_halvings {
            damping *= 0.5;
            halvings += 1;
            growth = 0;
        }

        l_prev.copy_from_slice(&l);
        for e in 0..m {
            l[e] += damping * (l_next[e] - l[e]);
        }
    }
    Err(FlowError::NoConvergence {
        iterations: iter,
        mismatch,
    })
}

/// Family of an operating constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstraintKind {
    PBound,
    QBound,
    VBound,
    IBound,
    NoConvergence,
}

/// Element a constraint margin refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Subject {
    Bus(usize),
    Line(usize),
    Case,
}

/// Signed distance to a bound; negative when violated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Margin {
    pub kind: ConstraintKind,
    pub subject: Subject,
    pub margin: f64,
}

/// Outcome of checking a state against the operating bounds.
///
/// `tightest` holds, for each evaluated constraint family, the element
/// with the smallest margin.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeasibilityReport {
    pub violations: Vec<Margin>,
    pub tightest: Vec<Margin>,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.violations.is_empty()
    }

    /// Feasible once violations smaller than `tol` are forgiven.
    pub fn feasible_within(&self, tol: f64) -> bool {
        self.violations.iter().all(|m| m.margin >= -tol)
    }

    pub fn tightest(&self, kind: ConstraintKind) -> Option<Margin> {
        self.tightest.iter().copied().find(|m| m.kind == kind)
    }

    /// Smallest margin over all families.
    pub fn worst_margin(&self) -> f64 {
        self.tightest.iter().map(|m| m.margin).fold(f64::INFINITY, f64::min)
    }

    pub fn no_convergence() -> Self {
        let m = Margin {
            kind: ConstraintKind::NoConvergence,
            subject: Subject::Case,
            margin: f64::NEG_INFINITY,
        };
        Self {
            violations: vec![m],
            tightest: vec![m],
        }
    }

    pub(crate) fn record(&mut self, kind: ConstraintKind, subject: Subject, margin: f64) {
        let m = Margin { kind, subject, margin };
        // NaN margins count as violations.
        if !(margin >= 0.0) {
            self.violations.push(m);
        }
        match self.tightest.iter_mut().find(|t| t.kind == kind) {
            Some(t) => {
                if !(margin >= t.margin) {
                    *t = m;
                }
            }
            None => self.tightest.push(m),
        }
    }

    pub(crate) fn record_band(&mut self, kind: ConstraintKind, subject: Subject, value: f64, lo: f64, hi: f64) {
        if lo.is_infinite() && hi.is_infinite() {
            return;
        }
        self.record(kind, subject, (value - lo).min(hi - value));
    }
}

/// Checks voltage, current and injection bounds; bounds are closed.
pub fn check_feasibility(grid: &Grid, sol: &Solution) -> FeasibilityReport {
    let mut report = FeasibilityReport::default();
    for (k, bus) in grid.buses().iter().enumerate() {
        report.record_band(ConstraintKind::PBound, Subject::Bus(k), sol.p_inj[k], bus.p_min, bus.p_max);
        report.record_band(ConstraintKind::QBound, Subject::Bus(k), sol.q_inj[k], bus.q_min, bus.q_max);
        report.record_band(ConstraintKind::VBound, Subject::Bus(k), sol.v[k], bus.v_min, bus.v_max);
    }
    for (e, line) in grid.lines().iter().enumerate() {
        if line.l_max.is_finite() {
            report.record(ConstraintKind::IBound, Subject::Line(e), line.l_max - sol.l[e]);
        }
    }
    report
}

/// Power flow followed by the bound check; solver failure is reported as
/// a `NoConvergence` violation.
pub fn evaluate_point(grid: &Grid, op: &OperatingPoint) -> FeasibilityReport {
    evaluate_point_with_solution(grid, op).0
}

pub fn evaluate_point_with_solution(grid: &Grid, op: &OperatingPoint) -> (FeasibilityReport, Option<Solution>) {
    match solve_power_flow(grid, op) {
        Ok(sol) => (check_feasibility(grid, &sol), Some(sol)),
        Err(_) => (FeasibilityReport::no_convergence(), None),
    }
}
