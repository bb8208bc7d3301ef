//! File formats, parallel drivers and the command line for `hostcap-core`.
//!
//! * [`schema`]: grid JSON in engineering units.
//! * [`artifacts`]: region JSON, CSV tables and heatmaps.
//! * [`cases`]: the bundled grids.
//! * [`parallel`]: worker-count independent scans, interpolation and heatmaps.
//! * [`pipeline`]: composite workflows and the self test.
//! * [`cli`]: argument parsing and exit codes.

pub mod artifacts;
pub mod cases;
pub mod cli;
pub mod parallel;
pub mod pipeline;
pub mod schema;
