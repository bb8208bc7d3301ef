//! Command line front end.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use hostcap_core::ergodic::{ergodic_vi_scan, LatticeAxis, PqLattice, ScanError, ViSamples, DEFAULT_SCAN_CAP};
use hostcap_core::ess::{size, EssError, RegulationResult, SizingMode};
use hostcap_core::explorer::{
    correct_region, explore_region_2d, ExactEvaluator, ExploreConfig, ExploreError, LinearizedEvaluator,
};
use hostcap_core::flow::{check_feasibility, solve_power_flow, FlowError, OperatingPoint};
use hostcap_core::geometry::{GeometryError, Region, Vec2};
use hostcap_core::grid::{AxisLabel, Grid};
use hostcap_core::interp::InterpError;
use hostcap_core::ess::price_weight;

use crate::artifacts::{self, ArtifactError, RegionArtifact, Unit};
use crate::cases;
use crate::parallel::{self, WORKERS_ENV};
use crate::pipeline::{self, Timings};
use crate::schema::{self, IngestError};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INFEASIBLE_INPUT: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;
pub const EXIT_IO: u8 = 5;

/// Hosting capacity regions of radial distribution grids.
#[derive(Debug, Parser)]
#[command(name = "hostcap", version, about, long_about = None)]
pub struct Cli {
    /// Worker threads for scans, interpolation and heatmaps.
    #[arg(long, global = true, env = WORKERS_ENV, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub workers: u32,
    /// Report powers in per-unit of the grid base instead of MW / MVAr.
    #[arg(long, global = true)]
    pub pu: bool,
    /// Log tolerances, iteration counts and phase timings to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a grid file and print its size.
    Validate(GridArg),
    /// Solve the exact power flow at one operating point.
    Powerflow(PowerflowArgs),
    /// Brute-force scans of the operating space.
    #[command(subcommand)]
    Scan(ScanCommand),
    /// Explore, correct and densify hosting capacity regions.
    #[command(subcommand)]
    Region(RegionCommand),
    /// Size storage against a region.
    #[command(subcommand)]
    Ess(EssCommand),
    /// Run a reduced pipeline on a bundled case and write its artifacts.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
pub struct GridArg {
    /// Grid JSON file, or `builtin:nine-bus` / `builtin:two-bus`.
    #[arg(long)]
    pub grid: String,
}

#[derive(Debug, Args)]
pub struct PowerflowArgs {
    #[command(flatten)]
    pub grid: GridArg,
    /// Injection at a point of connection, `bus:P=value` or `bus:Q=value` (MW / MVAr, generation positive).
    #[arg(long = "set", value_name = "AXIS=VALUE", allow_hyphen_values = true)]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum ScanCommand {
    /// Exact feasibility on a lattice of one or two injection axes.
    Pq(PqArgs),
    /// Reverse scan over sampled bus voltages and line currents.
    Vi(ViArgs),
}

#[derive(Debug, Args)]
pub struct PqArgs {
    #[command(flatten)]
    pub grid: GridArg,
    /// First axis, `bus:P` or `bus:Q`.
    #[arg(long)]
    pub x_axis: String,
    /// First axis range `lo:hi:n` (MW / MVAr).
    #[arg(long, allow_hyphen_values = true)]
    pub x: String,
    /// Optional second axis.
    #[arg(long, requires = "y")]
    pub y_axis: Option<String>,
    /// Second axis range `lo:hi:n`.
    #[arg(long, allow_hyphen_values = true, requires = "y_axis")]
    pub y: Option<String>,
    /// Largest number of lattice cells.
    #[arg(long, default_value_t = DEFAULT_SCAN_CAP)]
    pub cap: u64,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ViArgs {
    #[command(flatten)]
    pub grid: GridArg,
    /// Voltage magnitude samples `lo:hi:n` (pu), used at every non-slack bus.
    #[arg(long)]
    pub v: String,
    /// Current magnitude samples `lo:hi:n` (pu), used on every line.
    #[arg(long)]
    pub i: String,
    /// Largest number of enumerated combinations.
    #[arg(long, default_value_t = DEFAULT_SCAN_CAP)]
    pub cap: u64,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum RegionCommand {
    /// Explore a region by bisection along rays from the origin.
    Explore(ExploreArgs),
    /// Shrink a linearized region so that the exact model accepts it.
    Correct(CorrectArgs),
    /// Densify a region boundary from exact anchors through the relaxed model.
    Interpolate(InterpolateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Model {
    Exact,
    Linearized,
}

#[derive(Debug, Args)]
pub struct ExploreArgs {
    #[command(flatten)]
    pub grid: GridArg,
    /// The two axes, `bus:P,bus:Q` style.
    #[arg(long)]
    pub axes: String,
    #[arg(long, value_enum, default_value_t = Model::Exact)]
    pub model: Model,
    /// Number of search directions.
    #[arg(long, default_value_t = 64)]
    pub directions: usize,
    /// Bisection stopping distance (MW / MVAr).
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    /// Output directory for `region.json` and `boundary.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CorrectArgs {
    #[command(flatten)]
    pub grid: GridArg,
    /// Linearized region JSON.
    #[arg(long)]
    pub region: PathBuf,
    /// Output region JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InterpolateArgs {
    #[command(flatten)]
    pub grid: GridArg,
    /// Region whose perimeter places the anchors.
    #[arg(long)]
    pub region: PathBuf,
    /// Number of exact anchors.
    #[arg(long, default_value_t = 4)]
    pub anchors: usize,
    /// Total number of boundary points, anchors included.
    #[arg(long, default_value_t = 400)]
    pub total: usize,
    /// Bisection stopping distance for anchors (MW / MVAr).
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum EssCommand {
    /// Smallest apparent power regulation, optionally at a fixed power factor.
    Min(EssMinArgs),
    /// Cheapest pair of storage units, one per axis.
    Cost(EssCostArgs),
    /// Sizing objective over a lattice of operating points.
    Sweep(EssSweepArgs),
}

#[derive(Debug, Args)]
pub struct EssMinArgs {
    /// Region JSON.
    #[arg(long)]
    pub region: PathBuf,
    /// Operating point `x,y` in the region's units.
    #[arg(long, allow_hyphen_values = true)]
    pub point: String,
    /// Regulation angle in radians; restricts regulation to `y = tan(angle) x`.
    #[arg(long, allow_hyphen_values = true)]
    pub pf_angle: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EssCostArgs {
    /// Region JSON.
    #[arg(long)]
    pub region: PathBuf,
    /// Operating point `x,y` in the region's units.
    #[arg(long, allow_hyphen_values = true)]
    pub point: String,
    /// Storage price on the first axis, per kWh.
    #[arg(long)]
    pub beta: f64,
    /// Storage price on the second axis, per kWh.
    #[arg(long)]
    pub gamma: f64,
    /// Operation period in hours.
    #[arg(long, default_value_t = 1.0)]
    pub period: f64,
}

#[derive(Debug, Args)]
pub struct EssSweepArgs {
    /// Region JSON.
    #[arg(long)]
    pub region: PathBuf,
    /// First axis range `lo:hi:n`.
    #[arg(long, allow_hyphen_values = true)]
    pub x: String,
    /// Second axis range `lo:hi:n`.
    #[arg(long, allow_hyphen_values = true)]
    pub y: String,
    /// `min`, `pf:<angle>` or `cost:<beta>,<gamma>` (prices per kWh).
    #[arg(long, default_value = "min")]
    pub mode: String,
    /// Operation period in hours for cost mode.
    #[arg(long, default_value_t = 1.0)]
    pub period: f64,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Grid file; defaults to the bundled nine-bus case.
    #[arg(long, default_value = "builtin:nine-bus")]
    pub grid: String,
    /// Axes for the regions.
    #[arg(long, default_value = "7:P,8:P")]
    pub axes: String,
    /// Seed for sampled operating points.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// A failed run with its exit status.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn infeasible(message: impl ToString) -> Self {
        Self {
            code: EXIT_INFEASIBLE_INPUT,
            message: message.to_string(),
        }
    }

    fn numeric(message: impl ToString) -> Self {
        Self {
            code: EXIT_NUMERIC,
            message: message.to_string(),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io { .. } => Self {
                code: EXIT_IO,
                message: e.to_string(),
            },
            _ => Self::infeasible(e),
        }
    }
}

impl From<ArtifactError> for CliError {
    fn from(e: ArtifactError) -> Self {
        match e {
            ArtifactError::Io { .. } | ArtifactError::Csv { .. } => Self {
                code: EXIT_IO,
                message: e.to_string(),
            },
            _ => Self::infeasible(e),
        }
    }
}

impl From<ExploreError> for CliError {
    fn from(e: ExploreError) -> Self {
        match e {
            ExploreError::InfeasibleStart
            | ExploreError::EmptyCorrection
            | ExploreError::UnlimitedLine { .. }
            | ExploreError::WrongProvenance(_)
            | ExploreError::UnknownAxis(_)
            | ExploreError::BadConfig(_) => Self::infeasible(e),
            ExploreError::UnboundedRay { .. } | ExploreError::DegenerateRegion => Self::numeric(e),
        }
    }
}

impl From<FlowError> for CliError {
    fn from(e: FlowError) -> Self {
        match e {
            FlowError::NotPoc { .. } => Self::infeasible(e),
            _ => Self::numeric(e),
        }
    }
}

impl From<ScanError> for CliError {
    fn from(e: ScanError) -> Self {
        Self::infeasible(e)
    }
}

impl From<InterpError> for CliError {
    fn from(e: InterpError) -> Self {
        match e {
            InterpError::BadPlan | InterpError::GridMismatch => Self::infeasible(e),
            _ => Self::numeric(e),
        }
    }
}

impl From<EssError> for CliError {
    fn from(e: EssError) -> Self {
        match e {
            EssError::FormulationMismatch { .. } => Self::numeric(e),
            _ => Self::infeasible(e),
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        Self::infeasible(e)
    }
}

impl From<pipeline::SelftestError> for CliError {
    fn from(e: pipeline::SelftestError) -> Self {
        use pipeline::SelftestError as S;
        match e {
            S::Explore(e) => e.into(),
            S::Interp(e) => e.into(),
            S::Scan(e) => e.into(),
            S::Ess(e) => e.into(),
            S::Artifact(e) => e.into(),
        }
    }
}

fn load_grid(spec: &str) -> Result<Grid, CliError> {
    match spec {
        "builtin:nine-bus" => Ok(cases::nine_bus()),
        "builtin:two-bus" => Ok(cases::two_bus(true)),
        path => Ok(schema::ingest_grid(Path::new(path))?),
    }
}

pub fn parse_range(s: &str) -> Result<LatticeAxis, CliError> {
    let bad = || CliError::usage(format!("range must be lo:hi:n, got `{s}`"));
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(bad());
    };
    let lo = f64::from_str(lo.trim()).map_err(|_| bad())?;
    let hi = f64::from_str(hi.trim()).map_err(|_| bad())?;
    let n = usize::from_str(n.trim()).map_err(|_| bad())?;
    if n == 0 || !lo.is_finite() || !hi.is_finite() || hi < lo || (n == 1 && lo != hi) {
        return Err(bad());
    }
    Ok(LatticeAxis::new(lo, hi, n))
}

pub fn parse_point(s: &str) -> Result<Vec2, CliError> {
    let bad = || CliError::usage(format!("point must be x,y, got `{s}`"));
    let (x, y) = s.split_once(',').ok_or_else(bad)?;
    let x = f64::from_str(x.trim()).map_err(|_| bad())?;
    let y = f64::from_str(y.trim()).map_err(|_| bad())?;
    Ok(Vec2::new(x, y))
}

pub fn parse_axis(s: &str) -> Result<AxisLabel, CliError> {
    s.trim().parse::<AxisLabel>().map_err(|e| CliError::usage(e.to_string()))
}

pub fn parse_axes(s: &str) -> Result<[AxisLabel; 2], CliError> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| CliError::usage(format!("axes must be two labels separated by a comma, got `{s}`")))?;
    Ok([parse_axis(a)?, parse_axis(b)?])
}

pub fn parse_mode(s: &str, period: f64) -> Result<SizingMode, CliError> {
    let bad = || CliError::usage(format!("mode must be min, pf:<angle> or cost:<beta>,<gamma>, got `{s}`"));
    let mode = if s == "min" {
        SizingMode::MinApparent
    } else if let Some(a) = s.strip_prefix("pf:") {
        SizingMode::FixedPowerFactor {
            angle: f64::from_str(a).map_err(|_| bad())?,
        }
    } else if let Some(w) = s.strip_prefix("cost:") {
        let (b, g) = w.split_once(',').ok_or_else(bad)?;
        SizingMode::TwoSiteCost {
            beta: price_weight(f64::from_str(b).map_err(|_| bad())?, period),
            gamma: price_weight(f64::from_str(g).map_err(|_| bad())?, period),
        }
    } else {
        return Err(bad());
    };
    mode.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(mode)
}

fn unit(cli: &Cli) -> Unit {
    if cli.pu {
        Unit::PerUnit
    } else {
        Unit::Si
    }
}

/// Region coordinates in MW / MVAr.
fn region_si(art: RegionArtifact, grid: &Grid) -> Region {
    match art.unit {
        Unit::Si => art.region,
        Unit::PerUnit => scale_region(&art.region, grid.s_base()),
    }
}

fn scale_region(region: &Region, factor: f64) -> Region {
    let pts: Vec<Vec2> = region.vertices().iter().map(|&v| v * factor).collect();
    Region::from_points(&pts, region.axes.clone(), region.provenance).expect("scaling keeps a valid polygon")
}

fn region_out(region: &Region, unit: Unit, s_base: f64) -> Region {
    match unit {
        Unit::Si => region.clone(),
        Unit::PerUnit => scale_region(region, 1.0 / s_base),
    }
}

fn print_regulation(r: &RegulationResult, currency: bool) {
    println!("feasible_without_ess: {}", r.feasible_without_ess);
    println!("regulation: {},{}", r.regulation.x, r.regulation.y);
    if currency {
        println!("cost: {}", r.objective);
    } else {
        println!("objective: {}", r.objective);
        println!("capacity: {}", r.objective.sqrt());
    }
    println!("active_edge: {:?}", r.active_edge);
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let workers = cli.workers as usize;
    let unit = unit(cli);
    let mut timings = Timings::default();
    match &cli.command {
        Command::Validate(a) => {
            let grid = load_grid(&a.grid)?;
            let pocs: Vec<&str> = grid.buses().iter().filter(|b| b.is_poc).map(|b| b.id.as_str()).collect();
            println!("valid: {} buses, {} lines", grid.bus_count(), grid.line_count());
            println!("slack: {}", grid.buses()[grid.slack()].id);
            println!("points of connection: {}", pocs.join(","));
        }
        Command::Powerflow(a) => {
            let grid = load_grid(&a.grid.grid)?;
            let mut op = OperatingPoint::new();
            for s in &a.set {
                let (label, value) = s
                    .split_once('=')
                    .ok_or_else(|| CliError::usage(format!("--set expects AXIS=VALUE, got `{s}`")))?;
                let value = f64::from_str(value.trim()).map_err(|_| CliError::usage(format!("bad value in `{s}`")))?;
                op.set(parse_axis(label)?, value);
            }
            let sol = timings.time("powerflow", || solve_power_flow(&grid, &op))?;
            log::info!("sweep converged in {} iterations", sol.iterations);
            let scale = if cli.pu { 1.0 } else { grid.s_base() };
            let (p_unit, q_unit) = if cli.pu { ("pu", "pu") } else { ("MW", "MVAr") };
            println!("bus,v_pu,p_{p_unit},q_{q_unit}");
            for (k, b) in grid.buses().iter().enumerate() {
                println!("{},{},{},{}", b.id, sol.v[k].sqrt(), sol.p_inj[k] * scale, sol.q_inj[k] * scale);
            }
            let i_scale = if cli.pu { 1.0 } else { schema::current_base(grid.s_base(), grid.v_base()) };
            println!("line,i_{},p_{p_unit},q_{q_unit}", if cli.pu { "pu" } else { "A" });
            for (e, l) in grid.lines().iter().enumerate() {
                println!(
                    "{}->{},{},{},{}",
                    l.from,
                    l.to,
                    sol.l[e].sqrt() * i_scale,
                    sol.p_flow[e] * scale,
                    sol.q_flow[e] * scale
                );
            }
            let report = check_feasibility(&grid, &sol);
            println!("feasible: {}", report.feasible());
            for v in &report.violations {
                println!("violation: {:?} {:?} margin {}", v.kind, v.subject, v.margin);
            }
        }
        Command::Scan(ScanCommand::Pq(a)) => {
            let grid = load_grid(&a.grid.grid)?;
            let mut axes = vec![parse_axis(&a.x_axis)?];
            let x = parse_range(&a.x)?;
            let y = match (&a.y_axis, &a.y) {
                (Some(ya), Some(yr)) => {
                    axes.push(parse_axis(ya)?);
                    Some(parse_range(yr)?)
                }
                _ => None,
            };
            let lattice = PqLattice { axes: axes.clone(), x, y };
            let scan = timings.time("scan", || parallel::pq_scan(&grid, lattice, a.cap, workers))?;
            let scale = if cli.pu { 1.0 / grid.s_base() } else { 1.0 };
            let mut header = vec!["cell".to_string()];
            header.extend(axes.iter().map(|l| unit.suffix(l)));
            header.push("feasible".into());
            artifacts::emit_csv(
                &a.out,
                &header,
                (0..scan.lattice.len()).map(|c| {
                    let mut row = vec![c.to_string()];
                    row.extend(scan.lattice.coordinates(c).iter().map(|v| (v * scale).to_string()));
                    row.push(u8::from(scan.feasible[c]).to_string());
                    row
                }),
            )?;
            let count = scan.feasible.iter().filter(|&&f| f).count();
            println!("feasible cells: {count} of {}", scan.feasible.len());
        }
        Command::Scan(ScanCommand::Vi(a)) => {
            let grid = load_grid(&a.grid.grid)?;
            let v = parse_range(&a.v)?;
            let i = parse_range(&a.i)?;
            let samples = ViSamples {
                v: (0..grid.bus_count()).map(|_| v.values().map(|m| m * m).collect()).collect(),
                l: (0..grid.line_count()).map(|_| i.values().map(|m| m * m).collect()).collect(),
            };
            let points = timings.time("scan", || ergodic_vi_scan(&grid, &samples, a.cap))?;
            let pocs: Vec<usize> = (0..grid.bus_count()).filter(|&k| grid.buses()[k].is_poc).collect();
            let mut header = vec!["sample".to_string()];
            for &k in &pocs {
                header.push(unit.suffix(&AxisLabel::p(grid.buses()[k].id.clone())));
                header.push(unit.suffix(&AxisLabel::q(grid.buses()[k].id.clone())));
            }
            header.push("feasible".into());
            let scale = if cli.pu { 1.0 } else { grid.s_base() };
            artifacts::emit_csv(
                &a.out,
                &header,
                points.iter().enumerate().map(|(s, (_, sol))| {
                    let mut row = vec![s.to_string()];
                    for &k in &pocs {
                        let b = &grid.buses()[k];
                        row.push(((sol.p_inj[k] + b.base_load_p) * scale).to_string());
                        row.push(((sol.q_inj[k] + b.base_load_q) * scale).to_string());
                    }
                    row.push(u8::from(check_feasibility(&grid, sol).feasible()).to_string());
                    row
                }),
            )?;
            println!("samples: {}", points.len());
        }
        Command::Region(RegionCommand::Explore(a)) => {
            let grid = load_grid(&a.grid.grid)?;
            let axes = parse_axes(&a.axes)?;
            let config = ExploreConfig {
                dichotomy_eps: a.eps,
                max_directions: a.directions,
                initial_length: hostcap_core::explorer::initial_ray_length(&grid, &axes),
                ..ExploreConfig::default()
            };
            log::info!("explore: eps {} directions {}", config.dichotomy_eps, config.max_directions);
            let (region, boundary, evaluations, warnings) = match a.model {
                Model::Exact => {
                    let ex = timings.time("explore", || explore_region_2d(&ExactEvaluator::new(&grid, axes.to_vec()), axes.clone(), &config))?;
                    let pts: Vec<Vec2> = ex.boundary.iter().map(|b| b.location).collect();
                    (ex.region, pts, ex.evaluations, ex.warnings)
                }
                Model::Linearized => {
                    let ex = timings.time("explore", || {
                        explore_region_2d(&LinearizedEvaluator::new(&grid, axes.to_vec()), axes.clone(), &config)
                    })?;
                    let pts: Vec<Vec2> = ex.boundary.iter().map(|b| b.location).collect();
                    (ex.region, pts, ex.evaluations, ex.warnings)
                }
            };
            for w in &warnings {
                log::warn!("{w:?}");
            }
            let out_region = region_out(&region, unit, grid.s_base());
            artifacts::emit_region(&a.out.join("region.json"), &out_region, unit)?;
            let scale = if cli.pu { 1.0 / grid.s_base() } else { 1.0 };
            artifacts::emit_csv(
                &a.out.join("boundary.csv"),
                &["point".to_string(), unit.suffix(&axes[0]), unit.suffix(&axes[1])],
                boundary
                    .iter()
                    .enumerate()
                    .map(|(k, p)| vec![k.to_string(), (p.x * scale).to_string(), (p.y * scale).to_string()]),
            )?;
            println!("vertices: {}", region.vertices().len());
            println!("area: {}", out_region.area());
            println!("evaluations: {evaluations}");
            println!("warnings: {}", warnings.len());
        }
        Command::Region(RegionCommand::Correct(a)) => {
            let grid = load_grid(&a.grid.grid)?;
            let region = region_si(artifacts::ingest_region(&a.region)?, &grid);
            let corrected = timings.time("correct", || correct_region(&region, &grid))?;
            artifacts::emit_region(&a.out, &region_out(&corrected, unit, grid.s_base()), unit)?;
            println!("vertices: {}", corrected.vertices().len());
            println!("area: {}", region_out(&corrected, unit, grid.s_base()).area());
        }
        Command::Region(RegionCommand::Interpolate(a)) => {
            let grid = load_grid(&a.grid.grid)?;
            let region = region_si(artifacts::ingest_region(&a.region)?, &grid);
            let axes = region.axes.clone();
            if a.anchors < 2 || a.total < a.anchors {
                return Err(CliError::usage("need at least two anchors and a total no smaller than the anchor count"));
            }
            let anchors = timings.time("powerflow", || pipeline::anchors_on_region(&grid, &axes, &region, a.anchors, a.eps))?;
            let report = timings.time("mapping", || parallel::interpolate(&grid, &axes, &anchors, a.total, workers))?;
            artifacts::write_text(&a.out, &pipeline::interpolation_csv(&report, &axes, unit, grid.s_base()))?;
            println!("anchors: {}", report.anchor_count);
            println!("interpolated: {}", report.interp_count);
            println!("fallbacks: {}", report.fallback_count);
            let q_scale = if cli.pu { 1.0 / grid.s_base() } else { 1.0 };
            println!("max_q_correction: {}", report.max_q_correction * q_scale);
            for (phase, d) in &timings.phases {
                println!("time_{phase}_s: {:.6}", d.as_secs_f64());
            }
        }
        Command::Ess(EssCommand::Min(a)) => {
            let art = artifacts::ingest_region(&a.region)?;
            let point = parse_point(&a.point)?;
            let mode = match a.pf_angle {
                Some(angle) => SizingMode::FixedPowerFactor { angle },
                None => SizingMode::MinApparent,
            };
            let r = size(&art.region, point, mode)?;
            print_regulation(&r, false);
        }
        Command::Ess(EssCommand::Cost(a)) => {
            let art = artifacts::ingest_region(&a.region)?;
            let point = parse_point(&a.point)?;
            let mode = SizingMode::TwoSiteCost {
                beta: price_weight(a.beta, a.period),
                gamma: price_weight(a.gamma, a.period),
            };
            mode.validate().map_err(|e| CliError::usage(e.to_string()))?;
            let r = size(&art.region, point, mode)?;
            print_regulation(&r, true);
        }
        Command::Ess(EssCommand::Sweep(a)) => {
            let art = artifacts::ingest_region(&a.region)?;
            let mode = parse_mode(&a.mode, a.period)?;
            let (x, y) = (parse_range(&a.x)?, parse_range(&a.y)?);
            let map = timings.time("heatmap", || parallel::heatmap(&art.region, x, y, mode, workers))?;
            artifacts::emit_heatmap(&a.out, &map, &art.unit.suffix(&art.region.axes[0]), &art.unit.suffix(&art.region.axes[1]))?;
            let zeros = map.values.iter().filter(|&&v| v == 0.0).count();
            println!("cells: {}", map.values.len());
            println!("zero cells: {zeros}");
        }
        Command::Selftest(a) => {
            let grid = load_grid(&a.grid)?;
            let axes = parse_axes(&a.axes)?;
            let files = pipeline::selftest(&grid, &axes, a.seed, workers, &a.out)?;
            for f in files {
                println!("wrote {}", f.display());
            }
        }
    }
    timings.log();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        let a = parse_range("-5:5:11").unwrap();
        assert_eq!((a.lo, a.hi, a.n), (-5.0, 5.0, 11));
        assert!(parse_range("1:1:1").is_ok());
        for bad in ["1:0:3", "0:1:0", "0:1:1", "0:1", "a:1:2", "0:inf:3"] {
            assert!(parse_range(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn points_and_axes() {
        assert_eq!(parse_point(" 1.5 , -2").unwrap(), Vec2::new(1.5, -2.0));
        assert!(parse_point("1;2").is_err());
        assert_eq!(parse_axes("7:P,8:Q").unwrap(), [AxisLabel::p("7"), AxisLabel::q("8")]);
        assert!(parse_axes("7:P").is_err());
    }

    #[test]
    fn sizing_modes() {
        assert!(matches!(parse_mode("min", 1.0), Ok(SizingMode::MinApparent)));
        assert!(matches!(parse_mode("pf:0.5", 1.0), Ok(SizingMode::FixedPowerFactor { .. })));
        match parse_mode("cost:300,650", 1.0).unwrap() {
            SizingMode::TwoSiteCost { beta, gamma } => {
                assert!((beta - price_weight(300.0, 1.0)).abs() < 1e-12);
                assert!((gamma - price_weight(650.0, 1.0)).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        for bad in ["max", "pf:x", "cost:1", "cost:-1,2"] {
            assert!(parse_mode(bad, 1.0).is_err(), "{bad}");
        }
    }
}
