//! Oracles written against the raw grid data, independent of the library's
//! own residual, containment and distance routines.

#![allow(dead_code)]

use hostcap_core::flow::Solution;
use hostcap_core::geometry::Vec2;
use hostcap_core::grid::{validate_grid, Bus, Grid, GridCase, Line};
use rand::Rng;

/// Largest residuals of the balance and voltage equations (first entry)
/// and of the current equation (second entry), recomputed line by line.
pub fn branch_flow_residuals(grid: &Grid, s: &Solution) -> (f64, f64) {
    let case = grid.case();
    let index = |id: &str| case.buses.iter().position(|b| b.id == id).unwrap();
    let n = case.buses.len();
    // Orientation: the end closer to the slack sends.
    let mut depth = vec![usize::MAX; n];
    let slack = case.buses.iter().position(|b| b.is_slack).unwrap();
    depth[slack] = 0;
    let mut changed = true;
    while changed {
        changed = false;
        for l in &case.lines {
            let (a, b) = (index(&l.from), index(&l.to));
            if depth[a] != usize::MAX && depth[b] == usize::MAX {
                depth[b] = depth[a] + 1;
                changed = true;
            } else if depth[b] != usize::MAX && depth[a] == usize::MAX {
                depth[a] = depth[b] + 1;
                changed = true;
            }
        }
    }
    let mut out_p = vec![0.0; n];
    let mut out_q = vec![0.0; n];
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut linear: f64 = 0.0;
    let mut current: f64 = 0.0;
    for (e, l) in case.lines.iter().enumerate() {
        let (mut i, mut j) = (index(&l.from), index(&l.to));
        if depth[i] > depth[j] {
            std::mem::swap(&mut i, &mut j);
        }
        parent[j] = Some(e);
        out_p[i] += s.p_flow[e];
        out_q[i] += s.q_flow[e];
        let drop = s.v[i] - 2.0 * (l.r * s.p_flow[e] + l.x * s.q_flow[e]) + (l.r * l.r + l.x * l.x) * s.l[e];
        linear = linear.max((s.v[j] - drop).abs());
        current = current.max((s.l[e] * s.v[i] - (s.p_flow[e].powi(2) + s.q_flow[e].powi(2))).abs());
    }
    for j in 0..n {
        match parent[j] {
            Some(e) => {
                let l = &case.lines[e];
                linear = linear
                    .max((s.p_flow[e] - (out_p[j] + l.r * s.l[e] - s.p_inj[j])).abs())
                    .max((s.q_flow[e] - (out_q[j] + l.x * s.l[e] - s.q_inj[j])).abs());
            }
            None => {
                linear = linear.max((out_p[j] - s.p_inj[j]).abs()).max((out_q[j] - s.q_inj[j]).abs());
            }
        }
    }
    (linear, current)
}

/// Random radial grid with `n` buses: bus 0 is the slack, every other bus
/// hangs off a uniformly chosen earlier bus.
pub fn random_radial_grid(rng: &mut impl Rng, n: usize) -> Grid {
    let mut buses = vec![Bus::new("b0", 0.81, 1.21).slack()];
    let mut lines = Vec::new();
    for k in 1..n {
        let mut b = Bus::new(format!("b{k}"), 0.81, 1.21).with_load(rng.gen_range(0.0..0.05), rng.gen_range(-0.01..0.02));
        if rng.gen_bool(0.4) {
            b = b.poc();
        }
        buses.push(b);
        let parent = rng.gen_range(0..k);
        lines.push(Line::new(
            format!("b{parent}"),
            format!("b{k}"),
            rng.gen_range(0.002..0.04),
            rng.gen_range(0.002..0.04),
            f64::INFINITY,
        ));
    }
    validate_grid(GridCase {
        buses,
        lines,
        s_base: 10.0,
        v_base: 10.5,
        v_slack: 1.0,
    })
    .unwrap()
}

/// Two-bus state with slack voltage 1 and receiver injection `p + jq` (pu),
/// taking the low-current root. `None` when no real solution exists.
pub fn two_bus_state(r: f64, x: f64, p: f64, q: f64) -> Option<(f64, f64)> {
    // l = (P_f² + Q_f²) with P_f = r l − p, Q_f = x l − q
    let a = r * r + x * x;
    let b = -(2.0 * (r * p + x * q) + 1.0);
    let c = p * p + q * q;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let l = 2.0 * c / (-b + disc.sqrt());
    let (pf, qf) = (r * l - p, x * l - q);
    let v = 1.0 - 2.0 * (r * pf + x * qf) + a * l;
    Some((v, l))
}

/// Signed distance from `p` to the boundary of the CCW convex ring, positive inside.
pub fn ring_margin(ring: &[Vec2], p: Vec2) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|k| {
            let (a, b) = (ring[k], ring[(k + 1) % n]);
            let e = b - a;
            e.cross(p - a) / e.norm()
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn segment_distance(a: Vec2, b: Vec2, p: Vec2) -> f64 {
    let e = b - a;
    let t = ((p - a).dot(e) / e.dot(e)).clamp(0.0, 1.0);
    (a + e * t - p).norm()
}

/// Distance from `p` to the closed convex polygon (zero inside).
pub fn polygon_distance(ring: &[Vec2], p: Vec2) -> f64 {
    if ring_margin(ring, p) >= 0.0 {
        return 0.0;
    }
    let n = ring.len();
    (0..n)
        .map(|k| segment_distance(ring[k], ring[(k + 1) % n], p))
        .fold(f64::INFINITY, f64::min)
}

/// Hausdorff distance between two convex polygons given as vertex rings.
pub fn hausdorff(a: &[Vec2], b: &[Vec2]) -> f64 {
    let one_way = |from: &[Vec2], to: &[Vec2]| {
        let n = to.len();
        from.iter()
            .map(|&p| (0..n).map(|k| segment_distance(to[k], to[(k + 1) % n], p)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    // For convex polygons the largest boundary gap is attained at a vertex.
    one_way(a, b).max(one_way(b, a))
}

/// Random convex polygon containing the origin: sorted random angles on an
/// ellipse-like radius profile.
pub fn random_convex_polygon(rng: &mut impl Rng, vertices: usize, center: Vec2, scale: f64) -> Vec<Vec2> {
    let mut angles: Vec<f64> = (0..vertices).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    let (rx, ry) = (scale * rng.gen_range(0.5..1.5), scale * rng.gen_range(0.5..1.5));
    let pts: Vec<Vec2> = angles.iter().map(|&t| center + Vec2::new(rx * t.cos(), ry * t.sin())).collect();
    hostcap_core::geometry::hull_from_ring(&pts).map(|h| h.vertices().to_vec()).unwrap_or(pts)
}
