//! Geometric invariants of the traced bones on the default window:
//! simple polylines, smoothly varying tangents, residual-tight samples,
//! and constancy of the trivial orbit derivative sign between consecutive
//! same-order landing points.

use rqmap::bones::{bones_for_period, residual_r1, scan_pcf, BoneKind, TraceOptions, VWindow};
use rqmap::family::QuadraticMap;

const SCAN_RESOLUTION: (usize, usize) = (160, 110);

fn traced_bones(n: usize) -> Vec<rqmap::bones::Bone> {
    bones_for_period(
        &VWindow::default_unimodal(),
        n,
        6,
        SCAN_RESOLUTION,
        &TraceOptions::default(),
    )
}

/// Segment intersection test, excluding shared endpoints.
fn segments_cross(a: ([f64; 2], [f64; 2]), b: ([f64; 2], [f64; 2])) -> bool {
    let orient = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| {
        (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
    };
    let (p1, p2) = a;
    let (q1, q2) = b;
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

#[test]
fn bones_are_simple_polylines_with_tight_samples() {
    for n in 2..=4 {
        for bone in traced_bones(n) {
            assert_eq!(bone.kind, BoneKind::Arc, "period {n}");
            assert!(
                bone.max_turn_seen < 0.2,
                "tangent turned {} rad in one step on a period-{n} bone",
                bone.max_turn_seen
            );
            for p in &bone.points {
                let r = residual_r1(*p, n).expect("bone sample evaluable");
                assert!(r.abs() < 1e-8, "sample residual {r}");
            }
            // No self-intersection: spatial bucketing on segment midpoints
            // keeps the pair set near-linear in the node count.
            let pts = &bone.points;
            let segs: Vec<([f64; 2], [f64; 2])> = pts
                .windows(2)
                .map(|w| ([w[0].v1, w[0].v2], [w[1].v1, w[1].v2]))
                .collect();
            let cell = 4.0 * 1e-2;
            use std::collections::HashMap;
            let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
            for (i, s) in segs.iter().enumerate() {
                let mx = 0.5 * (s.0[0] + s.1[0]);
                let my = 0.5 * (s.0[1] + s.1[1]);
                buckets
                    .entry(((mx / cell).floor() as i64, (my / cell).floor() as i64))
                    .or_default()
                    .push(i);
            }
            for (key, ids) in &buckets {
                for di in -1..=1i64 {
                    for dj in -1..=1i64 {
                        let other = match buckets.get(&(key.0 + di, key.1 + dj)) {
                            Some(o) => o,
                            None => continue,
                        };
                        for &i in ids {
                            for &j in other.iter().filter(|j| **j > i + 1) {
                                assert!(
                                    !segments_cross(segs[i], segs[j]),
                                    "period-{n} bone self-intersects at segments {i}, {j}"
                                );
                            }
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn trivial_orbit_derivative_sign_is_constant_between_landings() {
    let window = VWindow::default_unimodal();
    let points = scan_pcf(&window, 4, 6, SCAN_RESOLUTION);
    for n in 2..=4 {
        for bone in traced_bones(n) {
            // Index of the nearest polyline node for each landing point on
            // this bone, grouped by landing order m.
            let node_index = |v: rqmap::family::CriticalValuePair| -> usize {
                bone.points
                    .iter()
                    .enumerate()
                    .min_by(|(_, a), (_, b)| {
                        let da = (a.v1 - v.v1).hypot(a.v2 - v.v2);
                        let db = (b.v1 - v.v1).hypot(b.v2 - v.v2);
                        da.total_cmp(&db)
                    })
                    .map(|(i, _)| i)
                    .unwrap()
            };
            for m in 2..=6usize {
                let mut landings: Vec<usize> = points
                    .iter()
                    .filter(|p| p.n == n && p.m == m && bone.distance_to(p.v) < 1e-4)
                    .map(|p| node_index(p.v))
                    .collect();
                landings.sort_unstable();
                for pair in landings.windows(2) {
                    if pair[0] + 2 >= pair[1].saturating_sub(1) {
                        continue;
                    }
                    let segment = &bone.points[pair[0] + 2..pair[1] - 1];
                    // The constancy claim assumes no earlier critical hit
                    // of the trivial orbit along the subarc: crossing a
                    // lower-order landing locus (or a trivial-preperiodic
                    // one) zeroes a factor of the orbit derivative and
                    // legitimately flips its sign. Detect such passages by
                    // watching each orbit coordinate cross -1 or +1
                    // between adjacent nodes.
                    let orbit_at = |node: &rqmap::family::CriticalValuePair| -> Option<Vec<f64>> {
                        let f = QuadraticMap::from_critical_values(*node).ok()?;
                        let mut x = node.v2;
                        let mut out = Vec::with_capacity(m - 1);
                        for _ in 1..m {
                            x = f.eval_checked(x, 0).ok()?;
                            out.push(x);
                        }
                        Some(out)
                    };
                    let orbits: Option<Vec<Vec<f64>>> = segment.iter().map(orbit_at).collect();
                    let Some(orbits) = orbits else { continue };
                    let clean = orbits.windows(2).all(|w| {
                        w[0].iter().zip(&w[1]).all(|(a, b)| {
                            (a - 1.0).signum() == (b - 1.0).signum()
                                && (a + 1.0).signum() == (b + 1.0).signum()
                        })
                    });
                    if !clean {
                        continue;
                    }
                    let mut sign = 0i8;
                    for node in segment {
                        let f = QuadraticMap::from_critical_values(*node).unwrap();
                        let d = match f.orbit_derivative(node.v2, m - 1) {
                            Ok(d) => d,
                            Err(_) => continue,
                        };
                        if d.abs() < 1e-9 {
                            continue;
                        }
                        let s = if d > 0.0 { 1 } else { -1 };
                        if sign == 0 {
                            sign = s;
                        }
                        assert_eq!(
                            s, sign,
                            "(n, m) = ({n}, {m}): derivative sign flipped on a clean subarc"
                        );
                    }
                }
            }
        }
    }
}
