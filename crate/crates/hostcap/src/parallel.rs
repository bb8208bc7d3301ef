//! Multi-threaded drivers for the independent parts of the pipeline.
//!
//! Every driver computes per-item results on a dedicated pool and collects
//! them in item order, so the output does not depend on the worker count.

use hostcap_core::ergodic::{PqLattice, PqScan, ScanError};
use hostcap_core::ess::{heatmap_row, EssError, Heatmap, SizingMode};
use hostcap_core::explorer::BoundaryPoint;
use hostcap_core::flow::{evaluate_point, Solution};
use hostcap_core::geometry::Region;
use hostcap_core::grid::{AxisLabel, Grid};
use hostcap_core::interp::{assemble_report, interpolate_one, interpolation_plan, InterpError, InterpolationReport};
use hostcap_core::ergodic::LatticeAxis;
use rayon::prelude::*;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "HOSTCAP_WORKERS";

pub fn pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool")
}

/// Lattice feasibility scan, cells evaluated in parallel.
pub fn pq_scan(grid: &Grid, lattice: PqLattice, cap: u64, workers: usize) -> Result<PqScan, ScanError> {
    lattice.check(grid, cap)?;
    let feasible = pool(workers).install(|| {
        (0..lattice.len())
            .into_par_iter()
            .map(|cell| evaluate_point(grid, &lattice.operating_point(cell)).feasible())
            .collect()
    });
    Ok(PqScan { lattice, feasible })
}

/// Boundary densification with chord points mapped in parallel.
pub fn interpolate(
    grid: &Grid,
    axes: &[AxisLabel; 2],
    anchors: &[BoundaryPoint<Solution>],
    total: usize,
    workers: usize,
) -> Result<InterpolationReport, InterpError> {
    if anchors.iter().any(|a| !a.state.matches(grid)) {
        return Err(InterpError::GridMismatch);
    }
    let plan = interpolation_plan(anchors.len(), total)?;
    let points = pool(workers).install(|| {
        plan.into_par_iter()
            .map(|p| interpolate_one(grid, axes, anchors, p))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(assemble_report(points))
}

/// Sizing heatmap with rows computed in parallel.
pub fn heatmap(region: &Region, x: LatticeAxis, y: LatticeAxis, mode: SizingMode, workers: usize) -> Result<Heatmap, EssError> {
    mode.validate()?;
    let rows = pool(workers).install(|| {
        (0..y.n)
            .into_par_iter()
            .map(|iy| heatmap_row(region, &x, y.value(iy), mode))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(Heatmap {
        x,
        y,
        values: rows.into_iter().flatten().collect(),
    })
}
