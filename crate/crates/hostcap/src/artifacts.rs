//! Region, point and heatmap files.
//!
//! Regions are JSON:
//!
//! ```json
//! {
//!   "axes": ["7:P", "8:P"],
//!   "unit": "MW",
//!   "provenance": "corrected",
//!   "vertices": [[-1.2, -30.0], [2.5, -31.0], [2.9, 33.0], [-1.5, 35.0]],
//!   "halfspaces": [{ "normal": [0.27, -0.96], "offset": 28.5 }]
//! }
//! ```
//!
//! Vertices run counterclockwise and half-space `k` supports the edge from
//! vertex `k` to vertex `k + 1`; a point `z` is inside when
//! `normal · z ≤ offset` for all of them. CSV files carry one header row
//! naming their columns. Floats are written in shortest round-trip form, so
//! reading a file back reproduces the values bit for bit.

use std::fmt::Display;
use std::fs;
use std::path::Path;

use hostcap_core::ergodic::LatticeAxis;
use hostcap_core::ess::Heatmap;
use hostcap_core::geometry::{ConvexPolygon, GeometryError, HalfSpace, Provenance, Region, Vec2};
use hostcap_core::grid::AxisLabel;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::ParseError;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Geometry(#[from] GeometryError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Csv {
        path: path.display().to_string(),
        source,
    }
}

/// Units of region coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    /// MW for active, MVAr for reactive axes.
    #[serde(rename = "MW")]
    Si,
    #[serde(rename = "pu")]
    PerUnit,
}

impl Unit {
    pub fn suffix(&self, label: &AxisLabel) -> String {
        match (self, label.component) {
            (Unit::PerUnit, _) => format!("{label}_pu"),
            (Unit::Si, hostcap_core::grid::Component::P) => format!("{label}_MW"),
            (Unit::Si, hostcap_core::grid::Component::Q) => format!("{label}_MVAr"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HalfSpaceRecord {
    normal: [f64; 2],
    offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionFile {
    axes: [String; 2],
    unit: Unit,
    provenance: String,
    vertices: Vec<[f64; 2]>,
    halfspaces: Vec<HalfSpaceRecord>,
}

/// A region together with the unit of its coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionArtifact {
    pub region: Region,
    pub unit: Unit,
}

pub fn region_to_json(region: &Region, unit: Unit) -> String {
    let file = RegionFile {
        axes: [region.axes[0].to_string(), region.axes[1].to_string()],
        unit,
        provenance: region.provenance.as_str().to_string(),
        vertices: region.vertices().iter().map(|v| v.to_array()).collect(),
        halfspaces: region
            .halfspaces()
            .iter()
            .map(|h| HalfSpaceRecord {
                normal: h.normal().to_array(),
                offset: h.offset(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("region serializes");
    text.push('\n');
    text
}

pub fn parse_region(text: &str, source: &str) -> Result<RegionArtifact, ArtifactError> {
    let file: RegionFile = serde_json::from_str(text).map_err(|e| ParseError {
        context: format!("{source} line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let field = |context: String, message: String| ParseError { context, message };
    let mut axes = Vec::with_capacity(2);
    for (k, a) in file.axes.iter().enumerate() {
        axes.push(
            a.parse::<AxisLabel>()
                .map_err(|e| field(format!("{source}: axes[{k}]"), e.to_string()))?,
        );
    }
    let provenance = Provenance::parse(&file.provenance)
        .ok_or_else(|| field(format!("{source}: provenance"), format!("unknown provenance `{}`", file.provenance)))?;
    let halfspaces = file
        .halfspaces
        .iter()
        .enumerate()
        .map(|(k, h)| {
            HalfSpace::new(Vec2::from(h.normal), h.offset)
                .ok_or_else(|| field(format!("{source}: halfspaces[{k}]"), "normal must be non-zero and finite".into()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let vertices = file.vertices.iter().map(|&v| Vec2::from(v)).collect();
    let polygon = ConvexPolygon::from_parts(vertices, halfspaces)?;
    let axes: [AxisLabel; 2] = axes.try_into().expect("two axes");
    Ok(RegionArtifact {
        region: Region::new(polygon, axes, provenance),
        unit: file.unit,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), ArtifactError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

pub fn emit_region(path: &Path, region: &Region, unit: Unit) -> Result<(), ArtifactError> {
    write_text(path, &region_to_json(region, unit))
}

pub fn ingest_region(path: &Path) -> Result<RegionArtifact, ArtifactError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_region(&text, &path.display().to_string())
}

/// Renders rows of displayable cells as CSV text.
pub fn csv_text<R, C>(header: &[String], rows: R) -> String
where
    R: IntoIterator<Item = Vec<C>>,
    C: Display,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row.iter().map(|c| c.to_string())).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// `vertex,<axis 0>,<axis 1>`, one row per vertex in ring order.
pub fn vertices_csv(region: &Region, unit: Unit) -> String {
    let header = vec!["vertex".to_string(), unit.suffix(&region.axes[0]), unit.suffix(&region.axes[1])];
    csv_text(
        &header,
        region
            .vertices()
            .iter()
            .enumerate()
            .map(|(k, v)| vec![k.to_string(), v.x.to_string(), v.y.to_string()]),
    )
}

pub fn emit_vertices(path: &Path, region: &Region, unit: Unit) -> Result<(), ArtifactError> {
    write_text(path, &vertices_csv(region, unit))
}

/// Heatmap matrix: the header row lists the first-axis values after a
/// corner cell naming both axes; each following row starts with its
/// second-axis value. Missing cells are written as `NaN`.
pub fn heatmap_csv(map: &Heatmap, x_name: &str, y_name: &str) -> String {
    let mut header = vec![format!("{y_name}\\{x_name}")];
    header.extend(map.x.values().map(|v| v.to_string()));
    csv_text(
        &header,
        map.y.values().enumerate().map(|(iy, yv)| {
            let mut row = vec![yv.to_string()];
            row.extend((0..map.x.n).map(|ix| map.at(ix, iy).to_string()));
            row
        }),
    )
}

pub fn emit_heatmap(path: &Path, map: &Heatmap, x_name: &str, y_name: &str) -> Result<(), ArtifactError> {
    write_text(path, &heatmap_csv(map, x_name, y_name))
}

/// Reads a heatmap written by [`heatmap_csv`].
pub fn parse_heatmap(text: &str, source: &str) -> Result<Heatmap, ArtifactError> {
    let path = Path::new(source);
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let records = r.records().collect::<Result<Vec<_>, _>>().map_err(csv_err(path))?;
    let bad = |context: String, message: &str| ArtifactError::Parse(ParseError {
        context,
        message: message.to_string(),
    });
    let num = |s: &str, ctx: String| s.trim().parse::<f64>().map_err(|_| bad(ctx, "not a number"));
    let (head, body) = records.split_first().ok_or_else(|| bad(source.to_string(), "empty heatmap"))?;
    let xs = head
        .iter()
        .skip(1)
        .enumerate()
        .map(|(k, s)| num(s, format!("{source} header column {}", k + 1)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut ys = Vec::with_capacity(body.len());
    let mut values = Vec::with_capacity(xs.len() * body.len());
    for (iy, rec) in body.iter().enumerate() {
        if rec.len() != xs.len() + 1 {
            return Err(bad(format!("{source} row {}", iy + 2), "wrong number of cells"));
        }
        ys.push(num(&rec[0], format!("{source} row {} column 0", iy + 2))?);
        for (ix, s) in rec.iter().skip(1).enumerate() {
            values.push(num(s, format!("{source} row {} column {}", iy + 2, ix + 1))?);
        }
    }
    let axis = |v: &[f64]| LatticeAxis::new(v.first().copied().unwrap_or(0.0), v.last().copied().unwrap_or(0.0), v.len());
    Ok(Heatmap {
        x: axis(&xs),
        y: axis(&ys),
        values,
    })
}

pub fn emit_csv<R, C>(path: &Path, header: &[String], rows: R) -> Result<(), ArtifactError>
where
    R: IntoIterator<Item = Vec<C>>,
    C: Display,
{
    write_text(path, &csv_text(header, rows))
}
