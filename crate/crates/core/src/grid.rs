//! Radial grid data model.
//!
//! All quantities stored here are per-unit on the case bases: powers in pu of
//! `s_base`, squared voltage magnitudes in pu², squared current magnitudes in
//! pu². Conversion from engineering units happens at ingestion.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

/// Active or reactive part of a bus injection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Component {
    P,
    Q,
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Component::P => f.write_str("P"),
            Component::Q => f.write_str("Q"),
        }
    }
}

/// Binds one coordinate of an operating point or region to a bus quantity.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AxisLabel {
    pub bus: String,
    pub component: Component,
}

impl AxisLabel {
    pub fn new(bus: impl Into<String>, component: Component) -> Self {
        Self {
            bus: bus.into(),
            component,
        }
    }

    pub fn p(bus: impl Into<String>) -> Self {
        Self::new(bus, Component::P)
    }

    pub fn q(bus: impl Into<String>) -> Self {
        Self::new(bus, Component::Q)
    }
}

/// Text form of an axis label is not `bus:P` or `bus:Q`.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("axis label must look like `bus:P` or `bus:Q`, got `{0}`")]
pub struct AxisLabelError(pub String);

impl core::str::FromStr for AxisLabel {
    type Err = AxisLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || AxisLabelError(String::from(s));
        let (bus, comp) = s.rsplit_once(':').ok_or_else(err)?;
        let component = match comp {
            "P" | "p" => Component::P,
            "Q" | "q" => Component::Q,
            _ => return Err(err()),
        };
        if bus.is_empty() {
            return Err(err());
        }
        Ok(AxisLabel::new(bus, component))
    }
}

impl fmt::Display for AxisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.bus, self.component)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bus {
    pub id: String,
    /// Net active injection bounds (pu).
    pub p_min: f64,
    pub p_max: f64,
    /// Net reactive injection bounds (pu).
    pub q_min: f64,
    pub q_max: f64,
    /// Squared voltage bounds (pu²).
    pub v_min: f64,
    pub v_max: f64,
    /// Existing consumption, positive for load (pu).
    pub base_load_p: f64,
    pub base_load_q: f64,
    pub is_slack: bool,
    pub is_poc: bool,
}

impl Bus {
    /// A bus with unbounded injections, the given squared voltage band and no load.
    pub fn new(id: impl Into<String>, v_min: f64, v_max: f64) -> Self {
        Self {
            id: id.into(),
            p_min: f64::NEG_INFINITY,
            p_max: f64::INFINITY,
            q_min: f64::NEG_INFINITY,
            q_max: f64::INFINITY,
            v_min,
            v_max,
            base_load_p: 0.0,
            base_load_q: 0.0,
            is_slack: false,
            is_poc: false,
        }
    }

    pub fn slack(mut self) -> Self {
        self.is_slack = true;
        self
    }

    pub fn poc(mut self) -> Self {
        self.is_poc = true;
        self
    }

    pub fn with_load(mut self, p: f64, q: f64) -> Self {
        self.base_load_p = p;
        self.base_load_q = q;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Line {
    pub from: String,
    pub to: String,
    /// Series resistance (pu).
    pub r: f64,
    /// Series reactance (pu).
    pub x: f64,
    /// Squared current limit (pu²); `f64::INFINITY` for no limit.
    pub l_max: f64,
}

impl Line {
    pub fn new(from: impl Into<String>, to: impl Into<String>, r: f64, x: f64, l_max: f64) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
            r,
            x,
            l_max,
        }
    }
}

/// Raw, unvalidated radial network description.
#[derive(Clone, Debug, PartialEq)]
pub struct GridCase {
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    /// Power base (MVA).
    pub s_base: f64,
    /// Voltage base (kV).
    pub v_base: f64,
    /// Fixed squared voltage of the slack bus (pu²).
    pub v_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("line {line} closes a cycle")]
    CyclicTopology { line: String },
    #[error("bus {bus} is not connected to the slack bus")]
    DisconnectedBus { bus: String },
    #[error("no slack bus")]
    NoSlack,
    #[error("more than one slack bus: {buses}")]
    MultipleSlack { buses: String },
    #[error("bad bounds on {element}: {detail}")]
    BadBounds { element: String, detail: String },
    #[error("duplicate bus id {bus}")]
    DuplicateBus { bus: String },
    #[error("line {line} references unknown bus {bus}")]
    UnknownBus { line: String, bus: String },
}

/// A validated radial grid.
///
/// Lines are oriented away from the slack bus; `upstream(e)` is the sending
/// bus `i` and `downstream(e)` the receiving bus `j` of line `(i, j)`.
#[derive(Clone, Debug)]
pub struct Grid {
    case: GridCase,
    slack: usize,
    order: Vec<usize>,
    parent_line: Vec<Option<usize>>,
    child_lines: Vec<Vec<usize>>,
    upstream: Vec<usize>,
    downstream: Vec<usize>,
}

fn line_name(line: &Line) -> String {
    format!("{}-{}", line.from, line.to)
}

fn bad(element: String, detail: &str) -> GridError {
    GridError::BadBounds {
        element,
        detail: detail.into(),
    }
}

/// Checks every structural and bound invariant and builds the tree topology.
pub fn validate_grid(raw: GridCase) -> Result<Grid, GridError> {
    if !(raw.s_base > 0.0 && raw.s_base.is_finite()) || !(raw.v_base > 0.0 && raw.v_base.is_finite()) {
        return Err(bad("case".into(), "bases must be positive and finite"));
    }

    let n = raw.buses.len();
    for (k, bus) in raw.buses.iter().enumerate() {
        if raw.buses[..k].iter().any(|b| b.id == bus.id) {
            return Err(GridError::DuplicateBus { bus: bus.id.clone() });
        }
        let element = format!("bus {}", bus.id);
        if bus.p_min.is_nan() || bus.p_max.is_nan() || bus.p_min > bus.p_max {
            return Err(bad(element, "p_min > p_max"));
        }
        if bus.q_min.is_nan() || bus.q_max.is_nan() || bus.q_min > bus.q_max {
            return Err(bad(element, "q_min > q_max"));
        }
        if !(bus.v_min > 0.0) || !(bus.v_min <= bus.v_max) {
            return Err(bad(element, "need 0 < v_min <= v_max"));
        }
        if !bus.base_load_p.is_finite() || !bus.base_load_q.is_finite() {
            return Err(bad(element, "base load must be finite"));
        }
    }

    let slacks: Vec<usize> = (0..n).filter(|&k| raw.buses[k].is_slack).collect();
    let slack = match slacks.as_slice() {
        [] => return Err(GridError::NoSlack),
        [s] => *s,
        many => {
            let ids: Vec<&str> = many.iter().map(|&k| raw.buses[k].id.as_str()).collect();
            return Err(GridError::MultipleSlack { buses: ids.join(", ") });
        }
    };
    let sb = &raw.buses[slack];
    if !(raw.v_slack >= sb.v_min && raw.v_slack <= sb.v_max) {
        return Err(bad(format!("bus {}", sb.id), "slack voltage outside [v_min, v_max]"));
    }

    let index = |id: &str| raw.buses.iter().position(|b| b.id == id);
    let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (e, line) in raw.lines.iter().enumerate() {
        let name = line_name(line);
        let a = index(&line.from).ok_or_else(|| GridError::UnknownBus {
            line: name.clone(),
            bus: line.from.clone(),
        })?;
        let b = index(&line.to).ok_or_else(|| GridError::UnknownBus {
            line: name.clone(),
            bus: line.to.clone(),
        })?;
        if !(line.r >= 0.0) || !line.r.is_finite() {
            return Err(bad(format!("line {name}"), "resistance must be >= 0"));
        }
        if !(line.x > 0.0) || !line.x.is_finite() {
            return Err(bad(format!("line {name}"), "reactance must be > 0"));
        }
        if !(line.l_max > 0.0) {
            return Err(bad(format!("line {name}"), "current limit must be > 0"));
        }
        if a == b {
            return Err(GridError::CyclicTopology { line: name });
        }
        adjacency[a].push((e, b));
        adjacency[b].push((e, a));
    }

    let m = raw.lines.len();
    let mut parent_line: Vec<Option<usize>> = vec![None; n];
    let mut child_lines: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut upstream = vec![usize::MAX; m];
    let mut downstream = vec![usize::MAX; m];
    let mut seen = vec![false; n];
    let mut used = vec![false; m];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    seen[slack] = true;
    queue.push_back(slack);
    while let Some(i) = queue.pop_front() {
        order.push(i);
        for &(e, j) in &adjacency[i] {
            if used[e] {
                continue;
            }
            used[e] = true;
            if seen[j] {
                return Err(GridError::CyclicTopology {
                    line: line_name(&raw.lines[e]),
                });
            }
            seen[j] = true;
            parent_line[j] = Some(e);
            child_lines[i].push(e);
            upstream[e] = i;
            downstream[e] = j;
            queue.push_back(j);
        }
    }
    if let Some(k) = (0..n).find(|&k| !seen[k]) {
        return Err(GridError::DisconnectedBus {
            bus: raw.buses[k].id.clone(),
        });
    }
    debug_assert!(used.iter().all(|&u| u));

    Ok(Grid {
        case: raw,
        slack,
        order,
        parent_line,
        child_lines,
        upstream,
        downstream,
    })
}

impl Grid {
    pub fn case(&self) -> &GridCase {
        &self.case
    }

    pub fn into_case(self) -> GridCase {
        self.case
    }

    pub fn buses(&self) -> &[Bus] {
        &self.case.buses
    }

    pub fn lines(&self) -> &[Line] {
        &self.case.lines
    }

    pub fn bus_count(&self) -> usize {
        self.case.buses.len()
    }

    pub fn line_count(&self) -> usize {
        self.case.lines.len()
    }

    pub fn s_base(&self) -> f64 {
        self.case.s_base
    }

    pub fn v_base(&self) -> f64 {
        self.case.v_base
    }

    pub fn v_slack(&self) -> f64 {
        self.case.v_slack
    }

    pub fn slack(&self) -> usize {
        self.slack
    }

    /// Buses in breadth-first order from the slack bus.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// The line feeding `bus`, `None` for the slack bus.
    pub fn parent_line(&self, bus: usize) -> Option<usize> {
        self.parent_line[bus]
    }

    /// Lines leaving `bus` away from the slack bus.
    pub fn child_lines(&self, bus: usize) -> &[usize] {
        &self.child_lines[bus]
    }

    pub fn upstream(&self, line: usize) -> usize {
        self.upstream[line]
    }

    pub fn downstream(&self, line: usize) -> usize {
        self.downstream[line]
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.case.buses.iter().position(|b| b.id == id)
    }

    /// `from-to` label of a line as given in the case.
    pub fn line_label(&self, line: usize) -> String {
        line_name(&self.case.lines[line])
    }

    /// Returns a copy of the grid with modified current limits; topology is kept.
    pub fn with_line_limits(&self, l_max: impl Fn(usize, &Line) -> f64) -> Grid {
        let mut g = self.clone();
        for (e, line) in g.case.lines.iter_mut().enumerate() {
            line.l_max = l_max(e, &self.case.lines[e]);
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_bus() -> GridCase {
        GridCase {
            buses: vec![
                Bus::new("slack", 0.81, 1.21).slack(),
                Bus::new("recv", 0.81, 1.21).poc(),
            ],
            lines: vec![Line::new("slack", "recv", 0.01, 0.01, f64::INFINITY)],
            s_base: 10.0,
            v_base: 10.5,
            v_slack: 1.0,
        }
    }

    #[test]
    fn two_bus_case_is_accepted() {
        let g = validate_grid(two_bus()).unwrap();
        assert_eq!(g.slack(), 0);
        assert_eq!(g.upstream(0), 0);
        assert_eq!(g.downstream(0), 1);
        assert_eq!(g.parent_line(1), Some(0));
        assert_eq!(g.order(), &[0, 1]);
    }

    #[test]
    fn reversed_line_is_oriented_from_slack() {
        let mut case = two_bus();
        case.lines[0] = Line::new("recv", "slack", 0.01, 0.01, 1.0);
        let g = validate_grid(case).unwrap();
        assert_eq!(g.upstream(0), 0);
        assert_eq!(g.downstream(0), 1);
    }

    #[test]
    fn triangle_is_cyclic() {
        let case = GridCase {
            buses: vec![
                Bus::new("a", 0.81, 1.21).slack(),
                Bus::new("b", 0.81, 1.21),
                Bus::new("c", 0.81, 1.21),
            ],
            lines: vec![
                Line::new("a", "b", 0.01, 0.01, 1.0),
                Line::new("b", "c", 0.01, 0.01, 1.0),
                Line::new("c", "a", 0.01, 0.01, 1.0),
            ],
            s_base: 1.0,
            v_base: 1.0,
            v_slack: 1.0,
        };
        assert!(matches!(validate_grid(case), Err(GridError::CyclicTopology { .. })));
    }

    #[test]
    fn inverted_voltage_band_is_rejected() {
        let mut case = two_bus();
        case.buses[1].v_min = 1.21;
        case.buses[1].v_max = 0.81;
        match validate_grid(case) {
            Err(GridError::BadBounds { element, .. }) => assert_eq!(element, "bus recv"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn slack_errors() {
        let mut case = two_bus();
        case.buses[0].is_slack = false;
        assert_eq!(validate_grid(case).unwrap_err(), GridError::NoSlack);
        let mut case = two_bus();
        case.buses[1].is_slack = true;
        assert!(matches!(validate_grid(case), Err(GridError::MultipleSlack { .. })));
    }

    #[test]
    fn disconnected_and_duplicate_buses() {
        let mut case = two_bus();
        case.buses.push(Bus::new("island", 0.81, 1.21));
        match validate_grid(case) {
            Err(GridError::DisconnectedBus { bus }) => assert_eq!(bus, "island"),
            other => panic!("unexpected {other:?}"),
        }
        let mut case = two_bus();
        case.buses.push(Bus::new("recv", 0.81, 1.21));
        assert!(matches!(validate_grid(case), Err(GridError::DuplicateBus { .. })));
    }

    #[test]
    fn zero_reactance_is_rejected() {
        let mut case = two_bus();
        case.lines[0].x = 0.0;
        assert!(matches!(validate_grid(case), Err(GridError::BadBounds { .. })));
    }

    #[test]
    fn slack_voltage_outside_band() {
        let mut case = two_bus();
        case.v_slack = 1.5;
        assert!(matches!(validate_grid(case), Err(GridError::BadBounds { .. })));
    }
}
