//! Composite workflows shared by the command line and the self test.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use hostcap_core::ergodic::{LatticeAxis, PqLattice, DEFAULT_SCAN_CAP};
use hostcap_core::ess::{min_apparent_power, SizingMode};
use hostcap_core::explorer::{
    correct_region, dichotomy_boundary, explore_region_2d, BoundaryPoint, ExactEvaluator, ExploreConfig, ExploreError,
    LinearizedEvaluator,
};
use hostcap_core::flow::Solution;
use hostcap_core::geometry::{Region, Vec2};
use hostcap_core::grid::{AxisLabel, Grid};
use hostcap_core::interp::InterpolationReport;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::artifacts::{self, ArtifactError, Unit};
use crate::parallel;

/// Wall time spent per phase of a run.
#[derive(Clone, Debug, Default)]
pub struct Timings {
    pub phases: Vec<(String, Duration)>,
}

impl Timings {
    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.phases.push((phase.to_string(), start.elapsed()));
        out
    }

    pub fn log(&self) {
        for (phase, d) in &self.phases {
            log::info!("phase {phase}: {:.3} s", d.as_secs_f64());
        }
    }
}

/// Exact boundary points on rays from the origin through `count` points
/// spaced evenly by arclength along the region's perimeter, starting at
/// its first vertex.
pub fn anchors_on_region(
    grid: &Grid,
    axes: &[AxisLabel; 2],
    region: &Region,
    count: usize,
    eps: f64,
) -> Result<Vec<BoundaryPoint<Solution>>, ExploreError> {
    let ev = ExactEvaluator::new(grid, axes.to_vec());
    let perimeter = region.polygon.perimeter();
    (0..count)
        .map(|k| {
            let target = region.polygon.point_at_arclength(perimeter * k as f64 / count as f64);
            let d = dichotomy_boundary(&ev, &[0.0, 0.0], &target.to_array(), eps)?;
            let location = Vec2::new(d.location[0], d.location[1]);
            Ok(BoundaryPoint {
                location,
                direction: target.normalized().unwrap_or(Vec2::new(1.0, 0.0)),
                state: d.state,
            })
        })
        .collect()
}

/// Outcome of the exact and corrected explorations of one grid.
pub struct Regions {
    pub exact: Region,
    pub exact_boundary: Vec<BoundaryPoint<Solution>>,
    pub linearized: Region,
    pub corrected: Region,
}

pub fn explore_and_correct(grid: &Grid, axes: &[AxisLabel; 2], config: &ExploreConfig) -> Result<Regions, ExploreError> {
    let exact = explore_region_2d(&ExactEvaluator::new(grid, axes.to_vec()), axes.clone(), config)?;
    let lin = explore_region_2d(&LinearizedEvaluator::new(grid, axes.to_vec()), axes.clone(), config)?;
    let corrected = correct_region(&lin.region, grid)?;
    Ok(Regions {
        exact: exact.region,
        exact_boundary: exact.boundary,
        linearized: lin.region,
        corrected,
    })
}

/// Rows `kind,segment,t,<x>,<y>,q_correction_MVAr` of an interpolation.
pub fn interpolation_csv(report: &InterpolationReport, axes: &[AxisLabel; 2], unit: Unit, s_base: f64) -> String {
    let scale = if unit == Unit::PerUnit { 1.0 / s_base } else { 1.0 };
    let header = vec![
        "kind".to_string(),
        "segment".to_string(),
        "t".to_string(),
        unit.suffix(&axes[0]),
        unit.suffix(&axes[1]),
        if unit == Unit::PerUnit { "q_correction_pu" } else { "q_correction_MVAr" }.to_string(),
    ];
    artifacts::csv_text(
        &header,
        report.points.iter().map(|p| {
            vec![
                format!("{:?}", p.kind),
                p.segment.to_string(),
                p.t.to_string(),
                (p.location.x * scale).to_string(),
                (p.location.y * scale).to_string(),
                (p.q_correction * scale).to_string(),
            ]
        }),
    )
}

#[derive(Debug, thiserror::Error)]
pub enum SelftestError {
    #[error(transparent)]
    Explore(#[from] ExploreError),
    #[error(transparent)]
    Interp(#[from] hostcap_core::interp::InterpError),
    #[error(transparent)]
    Scan(#[from] hostcap_core::ergodic::ScanError),
    #[error(transparent)]
    Ess(#[from] hostcap_core::ess::EssError),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
}

/// Runs a reduced end-to-end pipeline on `grid` and writes its artifacts
/// to `out`. Random operating points come from `seed`; the files do not
/// depend on `workers`.
pub fn selftest(grid: &Grid, axes: &[AxisLabel; 2], seed: u64, workers: usize, out: &Path) -> Result<Vec<PathBuf>, SelftestError> {
    let mut timings = Timings::default();
    let mut written = Vec::new();
    let mut emit = |name: &str, text: String| -> Result<(), ArtifactError> {
        let path = out.join(name);
        artifacts::write_text(&path, &text)?;
        written.push(path);
        Ok(())
    };
    let config = ExploreConfig {
        max_directions: 24,
        dichotomy_eps: 1e-4,
        ..ExploreConfig::default()
    };
    let regions = timings.time("explore", || explore_and_correct(grid, axes, &config))?;
    emit("region_exact.json", artifacts::region_to_json(&regions.exact, Unit::Si))?;
    emit("region_corrected.json", artifacts::region_to_json(&regions.corrected, Unit::Si))?;
    emit("vertices_corrected.csv", artifacts::vertices_csv(&regions.corrected, Unit::Si))?;

    let anchors = timings.time("anchors", || anchors_on_region(grid, axes, &regions.exact, 8, 1e-4))?;
    let report = timings.time("interpolate", || parallel::interpolate(grid, axes, &anchors, 64, workers))?;
    emit("interpolated.csv", interpolation_csv(&report, axes, Unit::Si, grid.s_base()))?;

    let bounds = regions.exact.vertices().iter().fold([f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY], |b, v| {
        [b[0].min(v.x), b[1].max(v.x), b[2].min(v.y), b[3].max(v.y)]
    });
    let pad = |lo: f64, hi: f64| (lo - 0.1 * (hi - lo), hi + 0.1 * (hi - lo));
    let (x0, x1) = pad(bounds[0], bounds[1]);
    let (y0, y1) = pad(bounds[2], bounds[3]);
    let lattice = PqLattice {
        axes: axes.to_vec(),
        x: LatticeAxis::new(x0, x1, 24),
        y: Some(LatticeAxis::new(y0, y1, 24)),
    };
    let scan = timings.time("scan", || parallel::pq_scan(grid, lattice, DEFAULT_SCAN_CAP, workers))?;
    emit(
        "scan.csv",
        artifacts::csv_text(
            &["cell".to_string(), Unit::Si.suffix(&axes[0]), Unit::Si.suffix(&axes[1]), "feasible".to_string()],
            (0..scan.lattice.len()).map(|c| {
                let xy = scan.lattice.coordinates(c);
                vec![c.to_string(), xy[0].to_string(), xy[1].to_string(), u8::from(scan.feasible[c]).to_string()]
            }),
        ),
    )?;

    let mode = SizingMode::TwoSiteCost { beta: 300e3, gamma: 650e3 };
    let map = timings.time("heatmap", || {
        parallel::heatmap(&regions.corrected, LatticeAxis::new(x0, x1, 21), LatticeAxis::new(y0, y1, 21), mode, workers)
    })?;
    emit(
        "heatmap_cost.csv",
        artifacts::heatmap_csv(&map, &Unit::Si.suffix(&axes[0]), &Unit::Si.suffix(&axes[1])),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<String>> = (0..32)
        .map(|k| {
            let p = Vec2::new(rng.gen_range(x0..x1), rng.gen_range(y0..y1));
            let r = min_apparent_power(&regions.corrected, p);
            vec![
                k.to_string(),
                p.x.to_string(),
                p.y.to_string(),
                r.regulation.x.to_string(),
                r.regulation.y.to_string(),
                r.capacity().to_string(),
            ]
        })
        .collect();
    emit(
        "ess_min.csv",
        artifacts::csv_text(
            &["sample", "x", "y", "regulation_x", "regulation_y", "capacity"].map(String::from),
            rows,
        ),
    )?;
    timings.log();
    Ok(written)
}
