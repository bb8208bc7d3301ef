use hostcap::artifacts::{self, Unit};
use hostcap::cases;
use hostcap::schema::{self, IngestError};
use hostcap_core::ergodic::LatticeAxis;
use hostcap_core::ess::{sweep_heatmap, SizingMode};
use hostcap_core::geometry::{Provenance, Region, Vec2};
use hostcap_core::grid::{AxisLabel, GridError};

const TWO_BUS_PU: &str = r#"{
  "s_base_mva": 10.0,
  "v_base_kv": 10.5,
  "buses": [
    {"id": "a", "slack": true, "v_set_pu": 1.0},
    {"id": "b", "poc": true}
  ],
  "lines": [{"from": "a", "to": "b", "r_pu": 0.01, "x_pu": 0.02, "l_max_pu2": 1.0}]
}"#;

#[test]
fn per_unit_lines_parse() {
    let grid = schema::parse_grid(TWO_BUS_PU, "inline").unwrap();
    assert_eq!(grid.bus_count(), 2);
    let line = &grid.lines()[0];
    assert_eq!((line.r, line.x, line.l_max), (0.01, 0.02, 1.0));
    // Default band 0.9 to 1.1 pu, stored squared.
    let b = &grid.buses()[1];
    assert!((b.v_min - 0.81).abs() < 1e-12 && (b.v_max - 1.21).abs() < 1e-12);
}

#[test]
fn engineering_units_convert_to_per_unit() {
    let grid = cases::two_bus(true);
    let line = &grid.lines()[0];
    // 0.11025 Ω on an 11.025 Ω base.
    assert!((line.r - 0.01).abs() < 1e-12);
    let i_base = 1000.0 * 10.0 / (3f64.sqrt() * 10.5);
    assert!((line.l_max - (402.0 / i_base).powi(2)).abs() < 1e-12);
}

#[test]
fn missing_base_is_a_parse_error() {
    let text = TWO_BUS_PU.replace("\"s_base_mva\": 10.0,", "");
    match schema::parse_grid(&text, "inline") {
        Err(IngestError::Parse(e)) => assert!(e.message.contains("s_base_mva"), "{e}"),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn unknown_field_is_a_parse_error() {
    let text = TWO_BUS_PU.replace("\"poc\": true", "\"poc\": true, \"colour\": 3");
    assert!(matches!(schema::parse_grid(&text, "inline"), Err(IngestError::Parse(_))));
}

#[test]
fn duplicate_bus_is_a_validation_error() {
    let text = TWO_BUS_PU.replace("{\"id\": \"b\", \"poc\": true}", "{\"id\": \"a\", \"poc\": true}");
    assert!(matches!(
        schema::parse_grid(&text, "inline"),
        Err(IngestError::Invalid(GridError::DuplicateBus { .. }))
    ));
}

#[test]
fn grid_file_round_trips() {
    let grid = cases::nine_bus();
    let text = serde_json::to_string(&schema::grid_to_file(&grid)).unwrap();
    let back = schema::parse_grid(&text, "round trip").unwrap();
    for (a, b) in grid.lines().iter().zip(back.lines()) {
        assert!((a.r - b.r).abs() < 1e-12 && (a.x - b.x).abs() < 1e-12 && (a.l_max - b.l_max).abs() < 1e-12);
    }
    for (a, b) in grid.buses().iter().zip(back.buses()) {
        assert_eq!(a.id, b.id);
        assert!((a.base_load_p - b.base_load_p).abs() < 1e-12);
    }
}

fn sample_region() -> Region {
    let points = [
        Vec2::new(-1.25, -3.5),
        Vec2::new(2.0, -2.75),
        Vec2::new(3.1, 1.0 / 3.0),
        Vec2::new(0.2, 4.0),
        Vec2::new(-2.0, 0.7),
    ];
    Region::from_points(&points, [AxisLabel::p("7"), AxisLabel::q("8")], Provenance::Corrected).unwrap()
}

#[test]
fn region_round_trips() {
    let region = sample_region();
    let text = artifacts::region_to_json(&region, Unit::Si);
    let back = artifacts::parse_region(&text, "inline").unwrap();
    assert_eq!(back.unit, Unit::Si);
    assert_eq!(back.region.axes, region.axes);
    assert_eq!(back.region.provenance, Provenance::Corrected);
    for (a, b) in region.vertices().iter().zip(back.region.vertices()) {
        assert!((*a - *b).norm() <= 1e-12);
    }
    for (a, b) in region.halfspaces().iter().zip(back.region.halfspaces()) {
        assert!((a.normal() - b.normal()).norm() <= 1e-12 && (a.offset() - b.offset()).abs() <= 1e-12);
    }
}

#[test]
fn inconsistent_region_file_is_rejected() {
    let text = artifacts::region_to_json(&sample_region(), Unit::Si).replacen("-1.25", "-9.0", 1);
    assert!(artifacts::parse_region(&text, "inline").is_err());
}

#[test]
fn vertex_table_has_one_row_per_vertex() {
    let region = sample_region();
    let text = artifacts::vertices_csv(&region, Unit::Si);
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.contains("7:P_MW") && header.contains("8:Q_MVAr"), "{header}");
    assert_eq!(lines.count(), region.vertices().len());
}

#[test]
fn heatmap_round_trips() {
    let map = sweep_heatmap(
        &sample_region(),
        LatticeAxis::new(-4.0, 4.0, 9),
        LatticeAxis::new(-5.0, 5.0, 7),
        SizingMode::FixedPowerFactor { angle: 0.3 },
    )
    .unwrap();
    assert!(map.values.iter().any(|v| v.is_nan()));
    let text = artifacts::heatmap_csv(&map, "x", "y");
    let back = artifacts::parse_heatmap(&text, "inline").unwrap();
    assert_eq!((back.x.n, back.y.n), (9, 7));
    for (a, b) in map.values.iter().zip(&back.values) {
        assert!((a.is_nan() && b.is_nan()) || (a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

#[test]
fn written_files_create_their_directory() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/deeper/region.json");
    artifacts::emit_region(&path, &sample_region(), Unit::Si).unwrap();
    let back = artifacts::ingest_region(&path).unwrap();
    assert_eq!(back.region.vertices().len(), 5);
}
