//! Hosting capacity regions for radial distribution grids.
//!
//! The crate is `no_std` (with `alloc`) and contains only the numerical
//! machinery:
//!
//! * [`grid`]: radial network model and validation.
//! * [`flow`]: exact DistFlow power flow, feasibility checks and ergodic scans.
//! * [`linearized`]: the lossless linearized DistFlow model.
//! * [`geometry`]: convex polygon algebra in two dimensions.
//! * [`explorer`]: bisection boundary search, incremental region exploration
//!   and correction of linearized regions.
//! * [`interp`]: boundary densification through the relaxed model.
//! * [`ess`]: storage sizing against a region.
//!
//! File formats, the command line front end and worker pools live in the
//! `hostcap` crate.
#![cfg_attr(not(test), no_std)]
// Negated comparisons deliberately treat NaN as failing the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod ergodic;
pub mod ess;
pub mod explorer;
pub mod flow;
pub mod geometry;
pub mod grid;
pub mod interp;
pub mod linearized;
mod math;

pub use explorer::{BoundaryPoint, Evaluator, ExploreConfig, Exploration};
pub use flow::{FeasibilityReport, OperatingPoint, Solution};
pub use geometry::{ConvexPolygon, HalfSpace, Provenance, Region, Vec2};
pub use grid::{AxisLabel, Bus, Component, Grid, GridCase, Line};
