//! Acceptance suite: one pass/fail line per criterion, non-zero exit on failure.
//!
//! Run with `cargo test -p hostcap --test acceptance`.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use hostcap::{cases, parallel, pipeline};
use hostcap_core::ergodic::{LatticeAxis, PqLattice, DEFAULT_SCAN_CAP};
use hostcap_core::ess::{min_apparent_power, sweep_heatmap, two_storage_cost_pair, SizingMode};
use hostcap_core::explorer::{explore_region_2d, ExploreConfig, Predicate};
use hostcap_core::flow::{evaluate_point, evaluate_point_with_solution, solve_power_flow, OperatingPoint, Solution};
use hostcap_core::geometry::{hull_from_ring, Provenance, Region, Vec2};
use hostcap_core::grid::{AxisLabel, Grid};
use hostcap_core::interp::{combine_solutions, epsilon_for_line, map_to_feasible, EPSILON_MAX_ITER, EPSILON_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn synthetic_axes() -> [AxisLabel; 2] {
    [AxisLabel::p("x"), AxisLabel::p("y")]
}

fn nine_bus_exact_region(grid: &Grid) -> Region {
    let config = ExploreConfig::default();
    pipeline::explore_and_correct(grid, &cases::nine_bus_axes(), &config)
        .expect("nine-bus exploration")
        .exact
}

fn bbox(ring: &[Vec2]) -> [f64; 4] {
    ring.iter().fold([f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY], |b, v| {
        [b[0].min(v.x), b[1].max(v.x), b[2].min(v.y), b[3].max(v.y)]
    })
}

fn power_flow_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut solved = 0;
    let mut check = |grid: &Grid, op: &OperatingPoint| {
        if let Ok(s) = solve_power_flow(grid, op) {
            let (lin, cur) = branch_flow_residuals(grid, &s);
            worst = worst.max(lin).max(cur);
            solved += 1;
        }
    };
    let nine = cases::nine_bus();
    let axes = cases::nine_bus_axes();
    for _ in 0..200 {
        let op = OperatingPoint::from_axes(&axes, &[rng.gen_range(-3.0..5.0), rng.gen_range(-40.0..50.0)]);
        check(&nine, &op);
    }
    for g in 0..100 {
        let n = rng.gen_range(2..=12);
        let grid = random_radial_grid(&mut rng, n);
        let pocs: Vec<String> = grid.buses().iter().filter(|b| b.is_poc).map(|b| b.id.clone()).collect();
        for _ in 0..20 {
            let mut op = OperatingPoint::new();
            for id in &pocs {
                op.set(AxisLabel::p(id.as_str()), rng.gen_range(-3.0..3.0));
                op.set(AxisLabel::q(id.as_str()), rng.gen_range(-2.0..2.0));
            }
            check(&grid, &op);
        }
        let _ = g;
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-8 && elapsed < Duration::from_secs(5) && solved > 1000,
        format!("{solved} solutions, max residual {worst:.2e} pu, {:.2} s", elapsed.as_secs_f64()),
    )
}

/// Feasible when some branch of the closed form meets the voltage and current bounds.
fn two_bus_oracle_feasible(grid: &Grid, p_mw: f64, q_mvar: f64) -> bool {
    let line = &grid.lines()[0];
    let recv = &grid.buses()[grid.bus_index("recv").unwrap()];
    let (p, q) = (p_mw / grid.s_base(), q_mvar / grid.s_base());
    two_bus_roots(line.r, line.x, p, q)
        .into_iter()
        .any(|(v, l)| v >= recv.v_min && v <= recv.v_max && l <= line.l_max)
}

/// Both roots of the two-bus current equation, slack voltage 1.
fn two_bus_roots(r: f64, x: f64, p: f64, q: f64) -> Vec<(f64, f64)> {
    let a = r * r + x * x;
    let b = -(2.0 * (r * p + x * q) + 1.0);
    let c = p * p + q * q;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    [(-b - disc.sqrt()) / (2.0 * a), (-b + disc.sqrt()) / (2.0 * a)]
        .into_iter()
        .map(|l| {
            let (pf, qf) = (r * l - p, x * l - q);
            (1.0 - 2.0 * (r * pf + x * qf) + a * l, l)
        })
        .collect()
}

fn library_feasible(grid: &Grid, axes: &[AxisLabel; 2], p: Vec2) -> bool {
    evaluate_point(grid, &OperatingPoint::from_axes(axes, &p.to_array())).feasible()
}

fn non_convexity_witness() -> Outcome {
    let axes = cases::two_bus_axes();
    let open = cases::two_bus(false);
    let lattice = PqLattice {
        axes: axes.to_vec(),
        x: LatticeAxis::new(-600.0, 600.0, 121),
        y: Some(LatticeAxis::new(-600.0, 600.0, 121)),
    };
    let scan = parallel::pq_scan(&open, lattice, DEFAULT_SCAN_CAP, 1).expect("scan");
    let feasible: Vec<Vec2> = (0..scan.lattice.len())
        .filter(|&c| scan.feasible[c])
        .map(|c| Vec2::from([scan.lattice.coordinates(c)[0], scan.lattice.coordinates(c)[1]]))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut witness = None;
    for _ in 0..100_000 {
        let a = feasible[rng.gen_range(0..feasible.len())];
        let b = feasible[rng.gen_range(0..feasible.len())];
        let m = a.lerp(b, 0.5);
        let confirmed = two_bus_oracle_feasible(&open, a.x, a.y)
            && two_bus_oracle_feasible(&open, b.x, b.y)
            && !two_bus_oracle_feasible(&open, m.x, m.y)
            && !library_feasible(&open, &axes, m);
        if confirmed {
            witness = Some((a, b));
            break;
        }
    }

    let limited = cases::two_bus(true);
    let lattice = PqLattice {
        axes: axes.to_vec(),
        x: LatticeAxis::new(-8.0, 8.0, 200),
        y: Some(LatticeAxis::new(-8.0, 8.0, 200)),
    };
    let scan = parallel::pq_scan(&limited, lattice, DEFAULT_SCAN_CAP, 1).expect("scan");
    let feasible: Vec<Vec2> = (0..scan.lattice.len())
        .filter(|&c| scan.feasible[c])
        .map(|c| Vec2::from([scan.lattice.coordinates(c)[0], scan.lattice.coordinates(c)[1]]))
        .collect();
    let mut bad = 0;
    for _ in 0..10_000 {
        let a = feasible[rng.gen_range(0..feasible.len())];
        let b = feasible[rng.gen_range(0..feasible.len())];
        let m = a.lerp(b, 0.5);
        if !library_feasible(&limited, &axes, m) || !two_bus_oracle_feasible(&limited, m.x, m.y) {
            bad += 1;
        }
    }
    let detail = match witness {
        Some((a, b)) => format!(
            "unlimited witness ({:.0}, {:.0}) & ({:.0}, {:.0}) MW/MVAr; limited: {} feasible cells, {bad}/10000 bad midpoints",
            a.x,
            a.y,
            b.x,
            b.y,
            feasible.len()
        ),
        None => format!("no unlimited witness; limited: {bad}/10000 bad midpoints"),
    };
    outcome(witness.is_some() && bad == 0 && feasible.len() > 1, detail)
}

fn under_estimation_band(grid: &Grid, region: &Region) -> Outcome {
    let axes = cases::nine_bus_axes();
    let b = bbox(region.vertices());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut samples = 0;
    let mut worst: f64 = f64::NEG_INFINITY;
    while samples < 1000 {
        let p = [rng.gen_range(b[0]..b[1]), rng.gen_range(b[2]..b[3])];
        let (report, state) = evaluate_point_with_solution(grid, &OperatingPoint::from_axes(&axes, &p));
        let (true, Some(s)) = (report.feasible(), state) else { continue };
        samples += 1;
        worst = worst.max(band_violation(grid, &s));
    }
    outcome(worst <= 1e-9, format!("{samples} feasible points, worst band violation {worst:.2e} pu"))
}

/// Largest violation of `P̂_j ≤ P_j ≤ P̂_j + r_ij l_ij^max`, where `P̂_j`
/// balances bus `j` with the exact flows but without the loss term.
fn band_violation(grid: &Grid, s: &Solution) -> f64 {
    let case = grid.case();
    let mut worst = f64::NEG_INFINITY;
    for (e, line) in case.lines.iter().enumerate() {
        // Sending end is the one whose voltage carries the current equation.
        let (from, to) = (grid.bus_index(&line.from).unwrap(), grid.bus_index(&line.to).unwrap());
        let j = if grid.parent_line(to) == Some(e) { to } else { from };
        let out: f64 = case
            .lines
            .iter()
            .enumerate()
            .filter(|&(k, l)| k != e && (grid.bus_index(&l.from) == Some(j) || grid.bus_index(&l.to) == Some(j)))
            .map(|(k, _)| s.p_flow[k])
            .sum();
        let p_hat = out - s.p_flow[e];
        let p = s.p_inj[j];
        worst = worst.max(p_hat - p).max(p - (p_hat + line.r * line.l_max));
    }
    worst
}

fn correction_containment(grid: &Grid) -> Outcome {
    let axes = cases::nine_bus_axes();
    let regions = pipeline::explore_and_correct(grid, &axes, &ExploreConfig::default()).expect("regions");
    let poly = &regions.corrected.polygon;
    let ring = poly.vertices();
    let b = bbox(ring);
    let perimeter = poly.perimeter();
    let centroid = poly.centroid();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut points = Vec::with_capacity(1000);
    while points.len() < 1000 {
        if points.len() % 2 == 0 {
            // Boundary-biased: a boundary point pulled slightly toward the centroid.
            let on = poly.point_at_arclength(rng.gen_range(0.0..perimeter));
            let pull: f64 = rng.gen_range(0.0..1e-3);
            points.push(on.lerp(centroid, pull * pull));
        } else {
            let p = Vec2::new(rng.gen_range(b[0]..b[1]), rng.gen_range(b[2]..b[3]));
            if ring_margin(ring, p) >= 0.0 {
                points.push(p);
            }
        }
    }
    let mut pass = 0;
    let mut worst: f64 = 0.0;
    let mut where_worst = String::new();
    for p in &points {
        let report = evaluate_point(grid, &OperatingPoint::from_axes(&axes, &p.to_array()));
        if report.feasible() {
            pass += 1;
        } else if report.worst_margin() < worst {
            worst = report.worst_margin();
            let m = report.violations.iter().min_by(|a, b| a.margin.total_cmp(&b.margin)).unwrap();
            where_worst = format!(" ({:?} on {:?} at {:.3}, {:.3} MW)", m.kind, m.subject, p.x, p.y);
        }
    }
    let ratio = pass as f64 / points.len() as f64;
    outcome(
        ratio >= 0.995 && worst >= -1e-4,
        format!("{pass}/{} exact-feasible, worst failure margin {worst:.2e} pu{where_worst}", points.len()),
    )
}

fn explorer_fidelity() -> Outcome {
    let disk = Predicate(|p: &[f64]| p[0] * p[0] + p[1] * p[1] <= 1.0);
    let config = ExploreConfig {
        max_directions: 64,
        ..ExploreConfig::default()
    };
    let disk_area = explore_region_2d(&disk, synthetic_axes(), &config).expect("disk").region.area();
    let target = 0.5 * 64.0 * (std::f64::consts::TAU / 64.0).sin();
    let disk_err = (disk_area - target).abs() / target;

    let pentagon = hull_from_ring(&[
        Vec2::new(2.0, 0.3),
        Vec2::new(0.8, 1.9),
        Vec2::new(-1.5, 1.2),
        Vec2::new(-1.2, -1.4),
        Vec2::new(1.1, -1.6),
    ])
    .expect("pentagon");
    let ring = pentagon.vertices().to_vec();
    let inside = Predicate(|p: &[f64]| ring_margin(&ring, Vec2::new(p[0], p[1])) >= 0.0);
    let eps = 1e-6;
    let mut recovered = None;
    let mut last = f64::NAN;
    for directions in (10..=64).step_by(2) {
        let config = ExploreConfig {
            max_directions: directions,
            dichotomy_eps: eps,
            ..ExploreConfig::default()
        };
        let found = explore_region_2d(&inside, synthetic_axes(), &config).expect("pentagon");
        last = hausdorff(found.region.vertices(), &ring);
        if last <= 2.0 * eps {
            recovered = Some(directions);
            break;
        }
    }
    let detail = format!(
        "disk area error {:.3}%; pentagon {}",
        100.0 * disk_err,
        match recovered {
            Some(d) => format!("recovered with {d} directions, Hausdorff {last:.2e}"),
            None => format!("not recovered within 64 directions, Hausdorff {last:.2e}"),
        }
    );
    outcome(disk_err <= 0.01 && recovered.is_some(), detail)
}

fn epsilon_self_certification(grid: &Grid, region: &Region) -> Outcome {
    let axes = cases::nine_bus_axes();
    let anchors = pipeline::anchors_on_region(grid, &axes, region, 40, 1e-6).expect("anchors");
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut max_iter, mut max_eps, mut max_cur, mut max_lin) = (0usize, 0.0f64, 0.0f64, 0.0f64);
    let mut failures = 0;
    for _ in 0..1000 {
        let k = rng.gen_range(0..anchors.len());
        let (a, b) = (&anchors[k].state, &anchors[(k + 1) % anchors.len()].state);
        let relaxed = combine_solutions(grid, a, b, rng.gen_range(0.0..1.0)).expect("combine");
        for (e, line) in grid.lines().iter().enumerate() {
            let s = &relaxed.state;
            match epsilon_for_line(s.v[grid.upstream(e)], s.p_flow[e], s.q_flow[e], s.l[e], line.r, line.x) {
                Some(o) => {
                    max_iter = max_iter.max(o.iterations);
                    max_eps = max_eps.max(o.residual.abs());
                }
                None => failures += 1,
            }
        }
        match map_to_feasible(grid, &relaxed) {
            Ok(mapped) => {
                let (lin, cur) = branch_flow_residuals(grid, &mapped.state);
                max_lin = max_lin.max(lin);
                max_cur = max_cur.max(cur);
            }
            Err(_) => failures += 1,
        }
    }
    outcome(
        failures == 0 && max_iter <= EPSILON_MAX_ITER && max_eps <= EPSILON_TOL && max_cur <= 1e-8 && max_lin <= 1e-9,
        format!(
            "1000 chord points: max {max_iter} iterations, |ε| {max_eps:.1e}, current residual {max_cur:.1e}, linear residual {max_lin:.1e}, {failures} failures"
        ),
    )
}

fn interpolation_orderings(grid: &Grid, region: &Region) -> Outcome {
    let start = Instant::now();
    let axes = cases::nine_bus_axes();
    let total = 400;
    let mut per_point = BTreeMap::new();
    let mut max_dq = BTreeMap::new();
    for anchors in [400usize, 40, 4] {
        let mut best = Duration::MAX;
        for _ in 0..3 {
            let t0 = Instant::now();
            let found = pipeline::anchors_on_region(grid, &axes, region, anchors, 1e-6).expect("anchors");
            let report = parallel::interpolate(grid, &axes, &found, total, 1).expect("interpolate");
            best = best.min(t0.elapsed());
            max_dq.insert(anchors, report.max_q_correction);
        }
        per_point.insert(anchors, best.as_secs_f64() / total as f64);
    }
    let elapsed = start.elapsed();
    let (t400, t40, t4) = (per_point[&400], per_point[&40], per_point[&4]);
    outcome(
        t400 > t40 && t40 > t4 && max_dq[&40] < max_dq[&4] && elapsed < Duration::from_secs(30),
        format!(
            "per point {:.1}/{:.1}/{:.1} µs (400/40/4 anchors); max ΔQ {:.4} vs {:.4} MVAr (40 vs 4); {:.2} s",
            t400 * 1e6,
            t40 * 1e6,
            t4 * 1e6,
            max_dq[&40],
            max_dq[&4],
            elapsed.as_secs_f64()
        ),
    )
}

fn random_region(rng: &mut ChaCha8Rng) -> Region {
    let n = rng.gen_range(3..=10);
    let center = Vec2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
    let scale = rng.gen_range(0.5..4.0);
    let ring = random_convex_polygon(rng, n, center, scale);
    Region::from_points(&ring, synthetic_axes(), Provenance::Exact).expect("region")
}

fn projection_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 2000;
    let mut worst_ratio: f64 = 0.0;
    let mut mismatched = 0;
    let mut zero_checks = 0;
    for _ in 0..100 {
        let region = random_region(&mut rng);
        let ring = region.vertices().to_vec();
        let b = bbox(&ring);
        let point = Vec2::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
        let (hx, hy) = ((b[1] - b[0]) / (n - 1) as f64, (b[3] - b[2]) / (n - 1) as f64);
        let mut brute = f64::INFINITY;
        for iy in 0..n {
            let y = b[2] + hy * iy as f64;
            for ix in 0..n {
                let q = Vec2::new(b[0] + hx * ix as f64, y);
                let d2 = (q - point).norm2();
                if d2 < brute && ring_margin(&ring, q) >= 0.0 {
                    brute = d2;
                }
            }
        }
        let diag = hx.hypot(hy);
        let lib = min_apparent_power(&region, point).capacity();
        worst_ratio = worst_ratio.max((lib - brute.sqrt()).abs() / diag);

        // Zero exactly when inside, on random, vertex and edge points.
        let mut probes: Vec<Vec2> = ring.clone();
        probes.extend((0..ring.len()).map(|k| ring[k].lerp(ring[(k + 1) % ring.len()], rng.gen_range(0.0..1.0))));
        probes.extend((0..20).map(|_| Vec2::new(rng.gen_range(b[0] - 1.0..b[1] + 1.0), rng.gen_range(b[2] - 1.0..b[3] + 1.0))));
        probes.push(point);
        for p in probes {
            zero_checks += 1;
            let zero = min_apparent_power(&region, p).objective == 0.0;
            if zero != (ring_margin(&ring, p) >= -1e-9) {
                mismatched += 1;
            }
        }
    }
    outcome(
        worst_ratio <= 1.0 && mismatched == 0,
        format!("worst gap {worst_ratio:.3} cell diagonals over 100 instances; zero-iff-inside {mismatched}/{zero_checks} mismatches"),
    )
}

fn cost_equivalence(grid: &Grid) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    let mut mask_mismatch = 0;
    let mut cells = 0;
    let mut compare_mask = |region: &Region, x: LatticeAxis, y: LatticeAxis, mode: SizingMode| {
        let map = sweep_heatmap(region, x, y, mode).expect("heatmap");
        for iy in 0..y.n {
            for ix in 0..x.n {
                cells += 1;
                let inside = ring_margin(region.vertices(), Vec2::new(x.value(ix), y.value(iy))) >= -1e-9;
                if (map.at(ix, iy) == 0.0) != inside {
                    mask_mismatch += 1;
                }
            }
        }
    };
    for k in 0..1000 {
        let region = random_region(&mut rng);
        let point = Vec2::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
        let (beta, gamma) = (rng.gen_range(0.1..10.0), rng.gen_range(0.1..10.0));
        let (a, b) = two_storage_cost_pair(&region, point, beta, gamma);
        worst = worst.max((a - b).abs() / a.abs().max(1.0));
        if k < 20 {
            let mode = SizingMode::TwoSiteCost { beta, gamma };
            compare_mask(&region, LatticeAxis::new(-10.0, 10.0, 81), LatticeAxis::new(-10.0, 10.0, 81), mode);
        }
    }
    let corrected = pipeline::explore_and_correct(grid, &cases::nine_bus_axes(), &ExploreConfig::default())
        .expect("regions")
        .corrected;
    let mode = SizingMode::TwoSiteCost {
        beta: hostcap_core::ess::price_weight(300.0, 1.0),
        gamma: hostcap_core::ess::price_weight(650.0, 1.0),
    };
    compare_mask(&corrected, LatticeAxis::new(-5.0, 5.0, 101), LatticeAxis::new(-50.0, 50.0, 101), mode);
    outcome(
        worst <= 1e-9 && mask_mismatch == 0,
        format!("1000 instances, worst relative disagreement {worst:.1e}; zero mask {mask_mismatch}/{cells} mismatches"),
    )
}

fn run_selftest(workers: usize, out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_hostcap"))
        .args(["--workers", &workers.to_string(), "selftest", "--seed", "11", "--out"])
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&status.stderr).into_owned())
    }
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .expect("output dir")
        .map(|e| {
            let e = e.expect("entry");
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).expect("artifact"))
        })
        .collect()
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let (one, eight) = (dir.path().join("w1"), dir.path().join("w8"));
    if let Err(e) = run_selftest(1, &one).and_then(|_| run_selftest(8, &eight)) {
        return outcome(false, format!("selftest failed: {e}"));
    }
    let (a, b) = (read_tree(&one), read_tree(&eight));
    let differing: Vec<&String> = a.keys().filter(|k| b.get(*k) != a.get(*k)).collect();
    outcome(
        !a.is_empty() && a.len() == b.len() && differing.is_empty(),
        format!("{} artifacts compared, differing: {differing:?}", a.len()),
    )
}

fn main() -> ExitCode {
    let grid = cases::nine_bus();
    let region = nine_bus_exact_region(&grid);
    let criteria: Vec<Criterion> = vec![
        ("power-flow exactness", Box::new(power_flow_exactness)),
        ("non-convexity witness", Box::new(non_convexity_witness)),
        ("under-estimation band", Box::new(|| under_estimation_band(&grid, &region))),
        ("correction containment", Box::new(|| correction_containment(&grid))),
        ("explorer fidelity", Box::new(explorer_fidelity)),
        ("epsilon self-certification", Box::new(|| epsilon_self_certification(&grid, &region))),
        ("interpolation orderings", Box::new(|| interpolation_orderings(&grid, &region))),
        ("projection oracle", Box::new(projection_oracle)),
        ("cost formulation equivalence", Box::new(|| cost_equivalence(&grid))),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "[{}] {:>2} {name}: {} ({:.2} s)",
            if o.pass { "PASS" } else { "FAIL" },
            k + 1,
            o.detail,
            t0.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
