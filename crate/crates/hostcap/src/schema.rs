//! Grid file format.
//!
//! A grid is a JSON document with engineering units:
//!
//! ```json
//! {
//!   "s_base_mva": 36.0,
//!   "v_base_kv": 10.5,
//!   "buses": [
//!     { "id": "9", "slack": true, "v_set_pu": 1.0, "v_min_pu": 0.9, "v_max_pu": 1.1 },
//!     { "id": "7", "poc": true, "v_min_kv": 9.45, "v_max_kv": 11.55, "load_mw": 0.5, "load_mvar": 0.1 }
//!   ],
//!   "lines": [
//!     { "from": "9", "to": "7", "r_ohm_per_km": 0.641, "x_ohm_per_km": 0.204, "length_km": 2.0, "i_max_a": 170.0 },
//!     { "from": "7", "to": "8", "r_pu": 0.01, "x_pu": 0.02, "l_max_pu2": 1.0 }
//!   ]
//! }
//! ```
//!
//! Voltage limits are magnitudes, given either in kV on the case base or in
//! pu; they are stored squared. Injection bounds (`p_min_mw`, `p_max_mw`,
//! `q_min_mvar`, `q_max_mvar`) apply to the net injection and default to
//! unbounded. A line without `i_max_a` / `l_max_pu2` has no current limit.

use std::fmt;
use std::path::Path;

use hostcap_core::grid::{validate_grid, Bus, Grid, GridCase, GridError, Line};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid grid: {0}")]
    Invalid(#[from] GridError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A malformed document, with the location or field that caused it.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub context: String,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.context, self.message)
    }
}

impl std::error::Error for ParseError {}

impl ParseError {
    fn field(context: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            context: context.into(),
            message: message.into(),
        }
    }

    fn json(source: &str, e: &serde_json::Error) -> Self {
        Self {
            context: format!("{source} line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub slack: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub poc: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_set_pu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_min_pu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_max_pu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_min_kv: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_max_kv: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_min_mw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max_mw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_min_mvar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_max_mvar: Option<f64>,
    #[serde(default)]
    pub load_mw: f64,
    #[serde(default)]
    pub load_mvar: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineRecord {
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_ohm_per_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_ohm_per_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_max_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_pu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_pu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_max_pu2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub s_base_mva: f64,
    pub v_base_kv: f64,
    pub buses: Vec<BusRecord>,
    pub lines: Vec<LineRecord>,
}

/// Impedance base in ohm.
pub fn impedance_base(s_base_mva: f64, v_base_kv: f64) -> f64 {
    v_base_kv * v_base_kv / s_base_mva
}

/// Current base in ampere (three-phase, line-to-line voltage base).
pub fn current_base(s_base_mva: f64, v_base_kv: f64) -> f64 {
    1000.0 * s_base_mva / (3f64.sqrt() * v_base_kv)
}

fn voltage_limit(ctx: &str, pu: Option<f64>, kv: Option<f64>, v_base: f64, default: f64) -> Result<f64, ParseError> {
    let mag = match (pu, kv) {
        (Some(_), Some(_)) => return Err(ParseError::field(ctx, "give the limit in pu or kV, not both")),
        (Some(p), None) => p,
        (None, Some(k)) => k / v_base,
        (None, None) => default,
    };
    if mag <= 0.0 || !mag.is_finite() {
        return Err(ParseError::field(ctx, format!("voltage magnitude must be positive, got {mag}")));
    }
    Ok(mag * mag)
}

fn finite(ctx: impl Into<String>, value: f64) -> Result<f64, ParseError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ParseError::field(ctx, "value must be finite"))
    }
}

impl GridFile {
    pub fn to_case(&self) -> Result<GridCase, ParseError> {
        let (s_base, v_base) = (self.s_base_mva, self.v_base_kv);
        if s_base <= 0.0 || !s_base.is_finite() {
            return Err(ParseError::field("s_base_mva", "must be positive"));
        }
        if v_base <= 0.0 || !v_base.is_finite() {
            return Err(ParseError::field("v_base_kv", "must be positive"));
        }
        let mut v_slack = 1.0;
        let mut buses = Vec::with_capacity(self.buses.len());
        for (k, b) in self.buses.iter().enumerate() {
            let ctx = format!("buses[{k}] ({})", b.id);
            let v_min = voltage_limit(&format!("{ctx}.v_min"), b.v_min_pu, b.v_min_kv, v_base, 0.9)?;
            let v_max = voltage_limit(&format!("{ctx}.v_max"), b.v_max_pu, b.v_max_kv, v_base, 1.1)?;
            let bound = |name: &str, v: Option<f64>, default: f64| -> Result<f64, ParseError> {
                match v {
                    Some(v) if v.is_nan() => Err(ParseError::field(format!("{ctx}.{name}"), "value is NaN")),
                    Some(v) => Ok(v / s_base),
                    None => Ok(default),
                }
            };
            let mut bus = Bus::new(b.id.clone(), v_min, v_max);
            bus.p_min = bound("p_min_mw", b.p_min_mw, f64::NEG_INFINITY)?;
            bus.p_max = bound("p_max_mw", b.p_max_mw, f64::INFINITY)?;
            bus.q_min = bound("q_min_mvar", b.q_min_mvar, f64::NEG_INFINITY)?;
            bus.q_max = bound("q_max_mvar", b.q_max_mvar, f64::INFINITY)?;
            bus.base_load_p = finite(format!("{ctx}.load_mw"), b.load_mw)? / s_base;
            bus.base_load_q = finite(format!("{ctx}.load_mvar"), b.load_mvar)? / s_base;
            bus.is_slack = b.slack;
            bus.is_poc = b.poc;
            if b.slack {
                let set = b.v_set_pu.unwrap_or(1.0);
                if set <= 0.0 || !set.is_finite() {
                    return Err(ParseError::field(format!("{ctx}.v_set_pu"), "must be positive"));
                }
                v_slack = set * set;
            } else if b.v_set_pu.is_some() {
                return Err(ParseError::field(format!("{ctx}.v_set_pu"), "only the slack bus has a voltage set point"));
            }
            buses.push(bus);
        }
        let z_base = impedance_base(s_base, v_base);
        let i_base = current_base(s_base, v_base);
        let mut lines = Vec::with_capacity(self.lines.len());
        for (k, l) in self.lines.iter().enumerate() {
            let ctx = format!("lines[{k}] ({} -> {})", l.from, l.to);
            let si = l.r_ohm_per_km.is_some() || l.x_ohm_per_km.is_some() || l.length_km.is_some() || l.i_max_a.is_some();
            let pu = l.r_pu.is_some() || l.x_pu.is_some() || l.l_max_pu2.is_some();
            let (r, x, l_max) = match (si, pu) {
                (true, true) => return Err(ParseError::field(ctx, "mixes ohm/km and per-unit parameters")),
                (true, false) => {
                    let need = |name: &str, v: Option<f64>| v.ok_or_else(|| ParseError::field(format!("{ctx}.{name}"), "missing"));
                    let len = need("length_km", l.length_km)?;
                    let r = need("r_ohm_per_km", l.r_ohm_per_km)? * len / z_base;
                    let x = need("x_ohm_per_km", l.x_ohm_per_km)? * len / z_base;
                    let l_max = l.i_max_a.map_or(f64::INFINITY, |i| (i / i_base).powi(2));
                    (r, x, l_max)
                }
                (false, true) => {
                    let need = |name: &str, v: Option<f64>| v.ok_or_else(|| ParseError::field(format!("{ctx}.{name}"), "missing"));
                    (need("r_pu", l.r_pu)?, need("x_pu", l.x_pu)?, l.l_max_pu2.unwrap_or(f64::INFINITY))
                }
                (false, false) => return Err(ParseError::field(ctx, "no impedance given")),
            };
            lines.push(Line::new(l.from.clone(), l.to.clone(), r, x, l_max));
        }
        Ok(GridCase {
            buses,
            lines,
            s_base,
            v_base,
            v_slack,
        })
    }
}

/// Parses a grid document; `source` names it in error messages.
pub fn parse_grid_file(text: &str, source: &str) -> Result<GridFile, ParseError> {
    serde_json::from_str(text).map_err(|e| ParseError::json(source, &e))
}

pub fn parse_grid(text: &str, source: &str) -> Result<Grid, IngestError> {
    let case = parse_grid_file(text, source)?.to_case()?;
    Ok(validate_grid(case)?)
}

pub fn ingest_grid(path: &Path) -> Result<Grid, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_grid(&text, &path.display().to_string())
}

/// Per-unit description of a validated grid, for writing back to disk.
pub fn grid_to_file(grid: &Grid) -> GridFile {
    let limit = |v: f64| v.is_finite().then_some(v);
    GridFile {
        name: None,
        s_base_mva: grid.s_base(),
        v_base_kv: grid.v_base(),
        buses: grid
            .buses()
            .iter()
            .map(|b| BusRecord {
                id: b.id.clone(),
                slack: b.is_slack,
                poc: b.is_poc,
                v_set_pu: b.is_slack.then(|| grid.v_slack().sqrt()),
                v_min_pu: Some(b.v_min.sqrt()),
                v_max_pu: Some(b.v_max.sqrt()),
                p_min_mw: limit(b.p_min * grid.s_base()),
                p_max_mw: limit(b.p_max * grid.s_base()),
                q_min_mvar: limit(b.q_min * grid.s_base()),
                q_max_mvar: limit(b.q_max * grid.s_base()),
                load_mw: b.base_load_p * grid.s_base(),
                load_mvar: b.base_load_q * grid.s_base(),
                ..BusRecord::default()
            })
            .collect(),
        lines: grid
            .lines()
            .iter()
            .map(|l| LineRecord {
                from: l.from.clone(),
                to: l.to.clone(),
                r_pu: Some(l.r),
                x_pu: Some(l.x),
                l_max_pu2: limit(l.l_max),
                ..LineRecord::default()
            })
            .collect(),
    }
}
