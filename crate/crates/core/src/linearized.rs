//! Lossless linearized DistFlow.
//!
//! Loss terms are dropped from the balance and voltage equations, which makes
//! them linear and solvable in one backward and one forward pass. The
//! current equation survives as the convex inequality
//! `(P_ij² + Q_ij²) / v_i ≤ l_max`, evaluated with the model's own `v_i`.

use alloc::vec;
use alloc::vec::Vec;

use crate::flow::{net_injections, ConstraintKind, FeasibilityReport, FlowError, OperatingPoint, Solution, Subject};
use crate::grid::Grid;

#[derive(Clone, Debug, PartialEq)]
pub struct LinSolution {
    pub v: Vec<f64>,
    pub p_flow: Vec<f64>,
    pub q_flow: Vec<f64>,
    pub p_inj: Vec<f64>,
    pub q_inj: Vec<f64>,
}

impl LinSolution {
    /// Squared current implied by the flows, `(P² + Q²) / v_i`.
    pub fn implied_current(&self, grid: &Grid, line: usize) -> f64 {
        let i = grid.upstream(line);
        (self.p_flow[line] * self.p_flow[line] + self.q_flow[line] * self.q_flow[line]) / self.v[i]
    }
}

/// Solves the linearized model for fixed net injections (pu).
pub fn solve_linearized_injections(grid: &Grid, mut p_inj: Vec<f64>, mut q_inj: Vec<f64>) -> LinSolution {
    let m = grid.line_count();
    let mut p_flow = vec![0.0; m];
    let mut q_flow = vec![0.0; m];
    for &j in grid.order().iter().rev() {
        let out_p: f64 = grid.child_lines(j).iter().map(|&c| p_flow[c]).sum();
        let out_q: f64 = grid.child_lines(j).iter().map(|&c| q_flow[c]).sum();
        match grid.parent_line(j) {
            Some(e) => {
                p_flow[e] = out_p - p_inj[j];
                q_flow[e] = out_q - q_inj[j];
            }
            None => {
                p_inj[j] = out_p;
                q_inj[j] = out_q;
            }
        }
    }
    let mut v = vec![0.0; grid.bus_count()];
    v[grid.slack()] = grid.v_slack();
    for &j in grid.order() {
        if let Some(e) = grid.parent_line(j) {
            let line = &grid.lines()[e];
            v[j] = v[grid.upstream(e)] - 2.0 * (line.r * p_flow[e] + line.x * q_flow[e]);
        }
    }
    LinSolution {
        v,
        p_flow,
        q_flow,
        p_inj,
        q_inj,
    }
}

pub fn solve_linearized(grid: &Grid, op: &OperatingPoint) -> Result<LinSolution, FlowError> {
    let (p, q) = net_injections(grid, op)?;
    Ok(solve_linearized_injections(grid, p, q))
}

/// Injection, voltage and current bounds under the linearized model. The
/// current margin is `l_max − (P² + Q²)/v_i` in pu².
pub fn check_linearized_feasibility(grid: &Grid, lsol: &LinSolution) -> FeasibilityReport {
    let mut report = FeasibilityReport::default();
    for (k, bus) in grid.buses().iter().enumerate() {
        report.record_band(ConstraintKind::PBound, Subject::Bus(k), lsol.p_inj[k], bus.p_min, bus.p_max);
        report.record_band(ConstraintKind::QBound, Subject::Bus(k), lsol.q_inj[k], bus.q_min, bus.q_max);
        report.record_band(ConstraintKind::VBound, Subject::Bus(k), lsol.v[k], bus.v_min, bus.v_max);
    }
    for (e, line) in grid.lines().iter().enumerate() {
        if line.l_max.is_finite() {
            let v_i = lsol.v[grid.upstream(e)];
            let margin = if v_i > 0.0 {
                line.l_max - lsol.implied_current(grid, e)
            } else {
                f64::NEG_INFINITY
            };
            report.record(ConstraintKind::IBound, Subject::Line(e), margin);
        }
    }
    report
}

pub fn evaluate_point_linearized(grid: &Grid, op: &OperatingPoint) -> FeasibilityReport {
    match solve_linearized(grid, op) {
        Ok(lsol) => check_linearized_feasibility(grid, &lsol),
        Err(_) => FeasibilityReport::no_convergence(),
    }
}

/// Largest residual of the linearized balance and voltage equations.
pub fn linearized_residual(grid: &Grid, lsol: &LinSolution) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..grid.bus_count() {
        let out_p: f64 = grid.child_lines(j).iter().map(|&c| lsol.p_flow[c]).sum();
        let out_q: f64 = grid.child_lines(j).iter().map(|&c| lsol.q_flow[c]).sum();
        match grid.parent_line(j) {
            Some(e) => {
                let line = &grid.lines()[e];
                let i = grid.upstream(e);
                worst = worst
                    .max((lsol.p_flow[e] - (out_p - lsol.p_inj[j])).abs())
                    .max((lsol.q_flow[e] - (out_q - lsol.q_inj[j])).abs())
                    .max((lsol.v[j] - (lsol.v[i] - 2.0 * (line.r * lsol.p_flow[e] + line.x * lsol.q_flow[e]))).abs());
            }
            None => {
                worst = worst.max((out_p - lsol.p_inj[j]).abs()).max((out_q - lsol.q_inj[j]).abs());
            }
        }
    }
    worst
}

/// Injections the linearized balance equations assign to the exact flows of
/// `sol`: `P̂_j = Σ P_jk − P_ij`. The exact injection exceeds it by
/// `r_ij l_ij` at every non-slack bus.
pub fn linearized_injections_from_flows(grid: &Grid, sol: &Solution) -> (Vec<f64>, Vec<f64>) {
    let n = grid.bus_count();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for j in 0..n {
        let out_p: f64 = grid.child_lines(j).iter().map(|&c| sol.p_flow[c]).sum();
        let out_q: f64 = grid.child_lines(j).iter().map(|&c| sol.q_flow[c]).sum();
        let (fp, fq) = grid.parent_line(j).map_or((0.0, 0.0), |e| (sol.p_flow[e], sol.q_flow[e]));
        p[j] = out_p - fp;
        q[j] = out_q - fq;
    }
    (p, q)
}
