//! Bundled grids.
//!
//! `nine_bus.json` reconstructs a 10.5 kV feeder branch behind a 36 MVA
//! 50/10.5 kV transformer. Cable types use the 240, 95 and 50 mm² aluminium
//! impedances; lengths and loads (power factor 0.98) are chosen so that the
//! far end of the long cable run (bus 7) is voltage limited within a few MW
//! while bus 8, close to the busbar, is limited by the transformer.
//! `two_bus.json` is a slack bus feeding one receiver through a
//! 0.01 + j0.01 pu cable rated 402 A.

use hostcap_core::grid::{AxisLabel, Grid};

use crate::schema::parse_grid;

pub const NINE_BUS_JSON: &str = include_str!("../cases/nine_bus.json");
pub const TWO_BUS_JSON: &str = include_str!("../cases/two_bus.json");

pub fn nine_bus() -> Grid {
    parse_grid(NINE_BUS_JSON, "nine_bus.json").expect("bundled case is valid")
}

/// Active power of the two points of connection, bus 7 then bus 8.
pub fn nine_bus_axes() -> [AxisLabel; 2] {
    [AxisLabel::p("7"), AxisLabel::p("8")]
}

/// The two-bus case, with or without the cable's current rating.
pub fn two_bus(current_limit: bool) -> Grid {
    let grid = parse_grid(TWO_BUS_JSON, "two_bus.json").expect("bundled case is valid");
    if current_limit {
        grid
    } else {
        grid.with_line_limits(|_, _| f64::INFINITY)
    }
}

/// Receiver P and Q axes of the two-bus case.
pub fn two_bus_axes() -> [AxisLabel; 2] {
    [AxisLabel::p("recv"), AxisLabel::q("recv")]
}
