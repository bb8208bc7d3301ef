//! Brute-force scans of the operating space.
//!
//! [`ergodic_vi_scan`] runs the branch-flow equations in reverse: with the
//! squared voltages and currents fixed, each line's flow pair solves a
//! quadratic, and injections follow by back-substitution, with no power flow
//! iteration. [`ergodic_pq_scan`] is the conventional lattice of power flow
//! evaluations and serves as the oracle for region tests.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::flow::{evaluate_point, OperatingPoint, Solution};
use crate::grid::{AxisLabel, Component, Grid};
use crate::math::sqrt;

/// Default cap on the number of enumerated combinations.
pub const DEFAULT_SCAN_CAP: u64 = 10_000_000;

/// Injections at non-POC buses must match their base load within this bound
/// for a reverse-scan sample to be kept.
const FIXED_INJECTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScanError {
    #[error("scan needs {count} combinations, cap is {cap}")]
    SampleGridTooLarge { count: u128, cap: u64 },
    #[error("sample lists do not match the grid: {0}")]
    Shape(&'static str),
    #[error("axis {0} is not a point of connection")]
    BadAxis(alloc::string::String),
}

/// Sample lists for the reverse scan. `v[k]` is ignored for the slack bus,
/// which stays at the grid's slack voltage.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ViSamples {
    pub v: Vec<Vec<f64>>,
    pub l: Vec<Vec<f64>>,
}

/// Real roots `(P, Q)` of the sending-end flow on one line given `v_i`, `v_j`, `l`.
///
/// With `a = −r/x` and `b = (v_i − v_j + (r² + x²) l) / 2x` the voltage
/// equation reads `Q = aP + b`, and the current equation becomes
/// `(1 + a²) P² + 2ab P + b² − v_i l = 0`. A double root yields one pair.
pub fn line_flow_roots(r: f64, x: f64, v_i: f64, v_j: f64, l: f64) -> Vec<(f64, f64)> {
    let a = -r / x;
    let b = (v_i - v_j + (r * r + x * x) * l) / (2.0 * x);
    let qa = 1.0 + a * a;
    let qb = 2.0 * a * b;
    let qc = b * b - v_i * l;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return Vec::new();
    }
    if disc == 0.0 {
        let p = -qb / (2.0 * qa);
        return vec![(p, a * p + b)];
    }
    let root = sqrt(disc);
    // Stable form avoids cancellation for the small root.
    let t = -0.5 * (qb + if qb >= 0.0 { root } else { -root });
    let (p1, p2) = if t != 0.0 { (t / qa, qc / t) } else { (root / (2.0 * qa), -root / (2.0 * qa)) };
    vec![(p1, a * p1 + b), (p2, a * p2 + b)]
}

/// Number of combinations a reverse scan would enumerate, as an upper bound
/// (two roots per line).
pub fn vi_combination_count(grid: &Grid, samples: &ViSamples) -> u128 {
    let mut count: u128 = 1;
    for k in 0..grid.bus_count() {
        if k != grid.slack() {
            count = count.saturating_mul(samples.v[k].len() as u128);
        }
    }
    for list in &samples.l {
        count = count.saturating_mul(list.len() as u128).saturating_mul(2);
    }
    count
}

/// Reverse ergodic scan.
///
/// Every combination of sampled voltages, currents and root choices yields
/// one candidate state. Injections are recovered leaf-to-root by
/// `P_j = Σ P_jk + r_ij l_ij − P_ij` (slack: `Σ P_0k`). Combinations with a
/// negative discriminant on any line are skipped; so are those that need a
/// non-zero extra injection at a bus that is not a point of connection.
/// The returned operating points reference POC buses only.
///
/// The enumeration is exponential in the line count and meant for small grids.
pub fn ergodic_vi_scan(grid: &Grid, samples: &ViSamples, cap: u64) -> Result<Vec<(OperatingPoint, Solution)>, ScanError> {
    let n = grid.bus_count();
    let m = grid.line_count();
    if samples.v.len() != n {
        return Err(ScanError::Shape("one voltage list per bus"));
    }
    if samples.l.len() != m {
        return Err(ScanError::Shape("one current list per line"));
    }
    let count = vi_combination_count(grid, samples);
    if count > cap as u128 {
        return Err(ScanError::SampleGridTooLarge { count, cap });
    }
    let free: Vec<usize> = (0..n).filter(|&k| k != grid.slack()).collect();
    if free.iter().any(|&k| samples.v[k].is_empty()) || samples.l.iter().any(|l| l.is_empty()) {
        return Ok(Vec::new());
    }

    let mut out = Vec::new();
    let mut v_idx = vec![0usize; free.len()];
    let mut l_idx = vec![0usize; m];
    let mut v = vec![0.0; n];
    v[grid.slack()] = grid.v_slack();
    loop {
        for (slot, &k) in free.iter().enumerate() {
            v[k] = samples.v[k][v_idx[slot]];
        }
        let l: Vec<f64> = (0..m).map(|e| samples.l[e][l_idx[e]]).collect();
        let roots: Vec<Vec<(f64, f64)>> = (0..m)
            .map(|e| {
                let line = &grid.lines()[e];
                line_flow_roots(line.r, line.x, v[grid.upstream(e)], v[grid.downstream(e)], l[e])
            })
            .collect();
        if roots.iter().all(|r| !r.is_empty()) {
            enumerate_roots(grid, &v, &l, &roots, &mut out);
        }
        if !advance(&mut l_idx, |e| samples.l[e].len()) && !advance(&mut v_idx, |s| samples.v[free[s]].len()) {
            break;
        }
    }
    Ok(out)
}

/// Odometer increment; returns false once every digit wrapped.
fn advance(idx: &mut [usize], len: impl Fn(usize) -> usize) -> bool {
    for (d, slot) in idx.iter_mut().enumerate() {
        *slot += 1;
        if *slot < len(d) {
            return true;
        }
        *slot = 0;
    }
    false
}

fn enumerate_roots(grid: &Grid, v: &[f64], l: &[f64], roots: &[Vec<(f64, f64)>], out: &mut Vec<(OperatingPoint, Solution)>) {
    let m = grid.line_count();
    let mut choice = vec![0usize; m];
    loop {
        if let Some(pair) = assemble(grid, v, l, roots, &choice) {
            out.push(pair);
        }
        if !advance(&mut choice, |e| roots[e].len()) {
            break;
        }
    }
}

fn assemble(grid: &Grid, v: &[f64], l: &[f64], roots: &[Vec<(f64, f64)>], choice: &[usize]) -> Option<(OperatingPoint, Solution)> {
    let n = grid.bus_count();
    let m = grid.line_count();
    let mut sol = Solution {
        v: v.to_vec(),
        l: l.to_vec(),
        p_flow: (0..m).map(|e| roots[e][choice[e]].0).collect(),
        q_flow: (0..m).map(|e| roots[e][choice[e]].1).collect(),
        p_inj: vec![0.0; n],
        q_inj: vec![0.0; n],
        iterations: 0,
    };
    let mut op = OperatingPoint::new();
    let s_base = grid.s_base();
    for &j in grid.order().iter().rev() {
        let out_p: f64 = grid.child_lines(j).iter().map(|&c| sol.p_flow[c]).sum();
        let out_q: f64 = grid.child_lines(j).iter().map(|&c| sol.q_flow[c]).sum();
        let (pj, qj) = match grid.parent_line(j) {
            Some(e) => {
                let line = &grid.lines()[e];
                (out_p + line.r * l[e] - sol.p_flow[e], out_q + line.x * l[e] - sol.q_flow[e])
            }
            None => (out_p, out_q),
        };
        sol.p_inj[j] = pj;
        sol.q_inj[j] = qj;
        if j == grid.slack() {
            continue;
        }
        let bus = &grid.buses()[j];
        let extra_p = pj + bus.base_load_p;
        let extra_q = qj + bus.base_load_q;
        if bus.is_poc {
            op.set(AxisLabel::new(bus.id.clone(), Component::P), extra_p * s_base);
            op.set(AxisLabel::new(bus.id.clone(), Component::Q), extra_q * s_base);
        } else if extra_p.abs() > FIXED_INJECTION_TOL || extra_q.abs() > FIXED_INJECTION_TOL {
            return None;
        }
    }
    Some((op, sol))
}

/// Evenly spaced samples `lo, …, hi` (a single sample sits at `lo`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeAxis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl LatticeAxis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, hi, n }
    }

    pub fn value(&self, k: usize) -> f64 {
        if self.n <= 1 {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) * (k as f64) / ((self.n - 1) as f64)
        }
    }

    pub fn step(&self) -> f64 {
        if self.n <= 1 {
            0.0
        } else {
            (self.hi - self.lo) / ((self.n - 1) as f64)
        }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|k| self.value(k))
    }
}

/// Lattice over one or two axes. Cells are stored row-major with the first
/// axis varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct PqLattice {
    pub axes: Vec<AxisLabel>,
    pub x: LatticeAxis,
    pub y: Option<LatticeAxis>,
}

impl PqLattice {
    pub fn len(&self) -> usize {
        self.x.n * self.y.map_or(1, |y| y.n)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coordinates(&self, cell: usize) -> Vec<f64> {
        let ix = cell % self.x.n;
        match self.y {
            Some(y) => vec![self.x.value(ix), y.value(cell / self.x.n)],
            None => vec![self.x.value(ix)],
        }
    }

    pub fn operating_point(&self, cell: usize) -> OperatingPoint {
        OperatingPoint::from_axes(&self.axes, &self.coordinates(cell))
    }

    pub fn check(&self, grid: &Grid, cap: u64) -> Result<(), ScanError> {
        if self.axes.is_empty() || self.axes.len() > 2 || (self.axes.len() == 2) != self.y.is_some() {
            return Err(ScanError::Shape("one or two axes with matching ranges"));
        }
        for label in &self.axes {
            let ok = grid
                .bus_index(&label.bus)
                .is_some_and(|k| grid.buses()[k].is_poc && k != grid.slack());
            if !ok {
                return Err(ScanError::BadAxis(alloc::format!("{label}")));
            }
        }
        let count = self.len() as u128;
        if count > cap as u128 {
            return Err(ScanError::SampleGridTooLarge { count, cap });
        }
        Ok(())
    }
}

/// Feasibility mask of a lattice scan.
#[derive(Clone, Debug, PartialEq)]
pub struct PqScan {
    pub lattice: PqLattice,
    pub feasible: Vec<bool>,
}

impl PqScan {
    pub fn at(&self, ix: usize, iy: usize) -> bool {
        self.feasible[iy * self.lattice.x.n + ix]
    }
}

/// Conventional lattice scan with the exact evaluator.
pub fn ergodic_pq_scan(grid: &Grid, lattice: PqLattice, cap: u64) -> Result<PqScan, ScanError> {
    lattice.check(grid, cap)?;
    let feasible = (0..lattice.len())
        .map(|cell| evaluate_point(grid, &lattice.operating_point(cell)).feasible())
        .collect();
    Ok(PqScan { lattice, feasible })
}
