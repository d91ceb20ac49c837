//! End-to-end verification battery: eight criteria covering the entropy
//! oracles, the algebraic identities of the family, the region geometry,
//! positive transversality at postcritically finite parameters, the
//! absence of bone loops, the bone / polynomial correspondence, isentrope
//! connectivity on the default atlas window, and byte-level determinism
//! of every artifact across runs and worker counts.
//!
//! `run_all` powers both the `check` subcommand and the acceptance
//! integration test; each criterion reports pass/fail with a one-line
//! detail and its runtime.

use std::time::Instant;

use crate::atlas::{
    band_connectivity, entropy_grid, write_connectivity_json, write_grid_csv, GridSpec,
};
use crate::bones::{
    bones_for_period, check_positive_direction, scan_pcf, trace_curve, Bone, BoneKind, BonesError,
    BoundarySide, CurveProblem, PCFPoint, TraceKind, TraceOptions, VWindow,
};
use crate::entropy::{
    detect_finite_critical_orbit, entropy_lap, entropy_markov, lap_sequence, markov_partition,
    real_entropy_with_crosscheck, IntervalModel, LapOptions, RationalQuadratic,
};
use crate::family::{MobiusFrame, NormalFormParams, QuadraticMap};
use crate::num::SplitMix64;
use crate::report::{write_bones_json, write_pcf_json};

#[derive(Debug, Clone)]
pub struct AcceptanceConfig {
    pub grid_resolution: (usize, usize),
    pub scan_window: VWindow,
    pub scan_resolution: (usize, usize),
    pub n_max: usize,
    pub m_max: usize,
    /// Worker count for the determinism re-run (compared against 1).
    pub workers: usize,
}

impl Default for AcceptanceConfig {
    fn default() -> Self {
        Self {
            grid_resolution: (200, 200),
            scan_window: VWindow::default_unimodal(),
            scan_resolution: (240, 160),
            n_max: 4,
            m_max: 6,
            workers: rayon::current_num_threads().max(2),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        format!(
            "criterion {}: {} — {} ({}) [{:.1}s]",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.seconds
        )
    }
}

struct Check {
    passed: bool,
    detail: String,
}

fn golden_mean_entropy() -> f64 {
    ((1.0 + 5.0f64.sqrt()) / 2.0).ln()
}

fn logistic_model(lambda: f64) -> IntervalModel {
    IntervalModel::from_rational(
        (0.0, 1.0),
        RationalQuadratic::new([0.0, lambda, -lambda], [1.0, 0.0, 0.0]),
        vec![0.5],
    )
}

/// Independent oracle: superstable parameters of lambda x (1 - x) with
/// critical period exactly n, found by bisecting sign changes of the n-th
/// critical iterate over lambda in (3, 4].
pub fn superstable_logistic_params(n: usize) -> Vec<f64> {
    let crit_iter = |lambda: f64| -> f64 {
        let mut x = 0.5;
        for _ in 0..n {
            x = lambda * x * (1.0 - x);
        }
        x - 0.5
    };
    let minimal = |lambda: f64| -> bool {
        let mut x = 0.5;
        for _ in 1..n {
            x = lambda * x * (1.0 - x);
            if (x - 0.5).abs() < 1e-6 {
                return false;
            }
        }
        true
    };
    let samples = 8000;
    let (a, b) = (3.0001, 4.0);
    let at = |i: usize| a + (b - a) * i as f64 / samples as f64;
    let mut roots = Vec::new();
    for i in 0..samples {
        let (x0, x1) = (at(i), at(i + 1));
        let (r0, r1) = (crit_iter(x0), crit_iter(x1));
        if r0 == 0.0 || r0 * r1 >= 0.0 {
            continue;
        }
        let (mut lo, mut hi, mut rlo) = (x0, x1, r0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let rm = crit_iter(mid);
            if rlo * rm <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
                rlo = rm;
            }
        }
        let root = 0.5 * (lo + hi);
        if minimal(root) {
            roots.push(root);
        }
    }
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    roots
}

fn criterion_1() -> Check {
    let ln2 = 2.0f64.ln();
    // Full unimodal map: laps are exactly powers of two.
    let full = logistic_model(4.0);
    let laps = match lap_sequence(&full, 20, 1_000_000) {
        Ok(l) => l,
        Err(e) => {
            return Check {
                passed: false,
                detail: format!("lap sequence failed: {e}"),
            }
        }
    };
    let doubling = laps
        .iter()
        .enumerate()
        .all(|(i, &l)| l == 1u64 << (i + 1).min(63));
    let est_full = match entropy_lap(&full, &LapOptions::default()) {
        Ok(e) => e,
        Err(e) => {
            return Check {
                passed: false,
                detail: format!("{e}"),
            }
        }
    };
    let full_ok = (est_full.value - ln2).abs() <= 1e-3;

    // Period-3 superattracting map: golden-mean entropy by both methods.
    let golden = golden_mean_entropy();
    let lambda3 = superstable_logistic_params(3);
    let Some(&lambda3) = lambda3.first() else {
        return Check {
            passed: false,
            detail: "no superstable period-3 parameter".into(),
        };
    };
    let model3 = logistic_model(lambda3);
    let est3 = match entropy_lap(&model3, &LapOptions::default()) {
        Ok(e) => e,
        Err(e) => {
            return Check {
                passed: false,
                detail: format!("{e}"),
            }
        }
    };
    let lap3_ok = (est3.value - golden).abs() <= 1e-3;
    let markov3 = detect_finite_critical_orbit(&model3)
        .ok_or(())
        .and_then(|orbit| markov_partition(&model3, &orbit).map_err(|_| ()))
        .map(|sys| entropy_markov(&sys));
    let markov3_ok = matches!(&markov3, Ok(m) if (m.value - golden).abs() <= 1e-3);

    Check {
        passed: doubling && full_ok && lap3_ok && markov3_ok,
        detail: format!(
            "laps 2^n: {doubling}; h(4x(1-x)) = {:.6}; period-3 lap {:.6} / markov {:.6} vs {:.6}",
            est_full.value,
            est3.value,
            markov3.map(|m| m.value).unwrap_or(f64::NAN),
            golden
        ),
    }
}

fn criterion_2() -> Check {
    let mut rng = SplitMix64::new(0x5eed_0002);
    let mut checked = 0usize;
    let mut max_residual = 0.0f64;
    while checked < 1000 {
        let a = rng.range(0.05, 3.0) * if rng.next_f64() < 0.5 { -1.0 } else { 1.0 };
        let b = rng.range(-6.0, 6.0);
        if (a - 1.0).abs() < 2e-3 {
            continue;
        }
        let f = match QuadraticMap::new(a, b) {
            Ok(f) => f,
            Err(_) => continue,
        };
        match f.fixed_point_formula_residual() {
            Ok(r) => {
                checked += 1;
                max_residual = max_residual.max(r);
            }
            Err(_) => continue,
        }
    }
    let formula_ok = max_residual < 1e-9;

    // Moduli coordinates are invariant under real Moebius conjugation.
    // The sampling domain keeps fixed points of moderate multiplier so the
    // cubic route retains full absolute accuracy.
    let mut checked_sigma = 0usize;
    let mut max_diff = 0.0f64;
    while checked_sigma < 1000 {
        let a = rng.range(0.2, 1.5) * if rng.next_f64() < 0.5 { -1.0 } else { 1.0 };
        let b = rng.range(-2.0, 2.0);
        if (a - 1.0).abs() < 1e-2 {
            continue;
        }
        let f = match QuadraticMap::new(a, b) {
            Ok(f) => f,
            Err(_) => continue,
        };
        let m = [
            [rng.range(-2.0, 2.0), rng.range(-2.0, 2.0)],
            [rng.range(-2.0, 2.0), rng.range(-2.0, 2.0)],
        ];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det.abs() < 0.3 {
            continue;
        }
        let frame = match MobiusFrame::new(m) {
            Ok(fr) => fr,
            Err(_) => continue,
        };
        let s0 = f.sigma();
        let s1 = f.conjugate(&frame).sigma();
        checked_sigma += 1;
        max_diff = max_diff
            .max((s0.sigma1 - s1.sigma1).abs())
            .max((s0.sigma2 - s1.sigma2).abs());
    }
    let sigma_ok = max_diff < 1e-8;
    Check {
        passed: formula_ok && sigma_ok,
        detail: format!(
            "max fixed-point-formula residual {max_residual:.2e} on 1000 maps; max sigma drift {max_diff:.2e} on 1000 conjugations"
        ),
    }
}

fn criterion_3() -> Check {
    let mut rng = SplitMix64::new(0x5eed_0003);
    let mut checked = 0usize;
    let mut sigma_lo = f64::INFINITY;
    let mut sigma_hi = f64::NEG_INFINITY;
    let mut all_unimodal = true;
    while checked < 10_000 {
        let mu = rng.range(-8.0, -1e-4);
        let t = rng.range(-8.0, -1e-4);
        if !NormalFormParams::admissible(mu, t) {
            continue;
        }
        let sys = match NormalFormParams::new(mu, t) {
            Ok(p) => p.to_system(),
            Err(_) => continue,
        };
        checked += 1;
        all_unimodal &= sys.is_unimodal();
        sigma_lo = sigma_lo.min(sys.sigma.sigma1);
        sigma_hi = sigma_hi.max(sys.sigma.sigma1);
    }
    let in_band = sigma_lo >= -6.0 - 1e-6 && sigma_hi <= 2.0 + 1e-6;
    Check {
        passed: all_unimodal && in_band,
        detail: format!(
            "10^4 admissible samples: all unimodal = {all_unimodal}, sigma1 in [{sigma_lo:.6}, {sigma_hi:.6}]"
        ),
    }
}

/// Artifacts shared by criteria 4-8.
struct ScanArtifacts {
    points: Vec<PCFPoint>,
    bones: Vec<Bone>,
    pcf_json: String,
    bones_json: String,
}

fn compute_scan_artifacts(cfg: &AcceptanceConfig) -> ScanArtifacts {
    let points = scan_pcf(&cfg.scan_window, cfg.n_max, cfg.m_max, cfg.scan_resolution);
    let mut bones = Vec::new();
    for n in 2..=cfg.n_max {
        bones.extend(bones_for_period(
            &cfg.scan_window,
            n,
            cfg.m_max,
            cfg.scan_resolution,
            &TraceOptions::default(),
        ));
    }
    let pcf_json = write_pcf_json(&points);
    let bones_json = write_bones_json(&bones);
    ScanArtifacts {
        points,
        bones,
        pcf_json,
        bones_json,
    }
}

fn criterion_4(art: &ScanArtifacts) -> Check {
    let points = &art.points;
    if points.len() < 5 {
        return Check {
            passed: false,
            detail: format!("only {} distinct PCF parameters found", points.len()),
        };
    }
    let mut all_quotients_positive = true;
    let mut all_directional_positive = true;
    let mut dual_method_ok = true;
    let mut max_gap = 0.0f64;
    for p in points {
        all_quotients_positive &= p.quotient > 0.0;
        let bone = art
            .bones
            .iter()
            .filter(|b| b.n == p.n)
            .min_by(|a, b| a.distance_to(p.v).total_cmp(&b.distance_to(p.v)));
        match bone {
            Some(bone) if bone.distance_to(p.v) < 1e-4 => match check_positive_direction(p, bone) {
                Ok(report) => all_directional_positive &= report.positive,
                Err(e) => {
                    return Check {
                        passed: false,
                        detail: format!("direction check failed at {:?}: {e}", p.v),
                    }
                }
            },
            _ => {
                return Check {
                    passed: false,
                    detail: format!("no traced bone through {:?}", p.v),
                }
            }
        }
        // Entropy cross-check at superattracting parameters. Cores with
        // positive entropy converge at the default depth; zero-entropy
        // cores grow laps slowly and need depth plus a wide trailing
        // window to average out integer dribble, so those are rerun with
        // slow-growth options when the default honestly reports
        // nonconvergence.
        let slow = LapOptions {
            n_max: 2500,
            lap_cap: 1_000_000,
            tol: 1e-3,
            window: 200,
        };
        if let Ok(f) = QuadraticMap::from_critical_values(p.v) {
            if let Ok((lap, Some(markov))) =
                real_entropy_with_crosscheck(&f, &LapOptions::default())
            {
                let lap = if lap.converged {
                    lap
                } else {
                    match real_entropy_with_crosscheck(&f, &slow) {
                        Ok((deep_lap, _)) => deep_lap,
                        Err(_) => lap,
                    }
                };
                let gap = (lap.value - markov.value).abs();
                max_gap = max_gap.max(gap);
                dual_method_ok &= gap < 1e-3;
            }
        }
    }
    Check {
        passed: all_quotients_positive && all_directional_positive && dual_method_ok,
        detail: format!(
            "{} points; quotients > 0: {all_quotients_positive}; directional > 0: {all_directional_positive}; max lap/markov gap {max_gap:.2e}",
            points.len()
        ),
    }
}

fn criterion_5(art: &ScanArtifacts) -> Check {
    let mut all_arcs = true;
    let mut all_on_boundary = true;
    for b in &art.bones {
        all_arcs &= b.kind == BoneKind::Arc;
        all_on_boundary &= b.endpoint_info.iter().all(|e| {
            matches!(
                e,
                Some(BoundarySide::SigmaTwo) | Some(BoundarySide::SigmaMinusSix)
            )
        });
    }

    // Loop-detector liveness: the synthetic unit circle closes up with the
    // right arclength, so arc verdicts on real bones are meaningful.
    let residual = |p: [f64; 2]| -> Result<f64, BonesError> { Ok(p[0] * p[0] + p[1] * p[1] - 1.0) };
    let orientation = |_: [f64; 2]| -> Result<f64, BonesError> { Ok(1.0) };
    let inside = |_: [f64; 2]| true;
    let node_ok = |_: [f64; 2]| true;
    let problem = CurveProblem {
        residual: &residual,
        orientation: &orientation,
        inside: &inside,
        node_ok: &node_ok,
        window: None,
    };
    let circle = trace_curve(&problem, [1.0, 0.0], &TraceOptions::default());
    let circle_ok = matches!(
        &circle,
        Ok(t) if t.kind == TraceKind::Loop
            && (t.arclength - std::f64::consts::TAU).abs() <= 1e-3
    );
    let circle_len = circle.map(|t| t.arclength).unwrap_or(f64::NAN);
    Check {
        passed: all_arcs && all_on_boundary && circle_ok,
        detail: format!(
            "{} bones, arcs: {all_arcs}, endpoints on region boundary: {all_on_boundary}; synthetic circle loop {circle_len:.6} vs 2 pi",
            art.bones.len()
        ),
    }
}

fn criterion_6(art: &ScanArtifacts) -> Check {
    let mut detail = String::new();
    let mut passed = true;
    for n in 2..=4usize {
        let reaching = art
            .bones
            .iter()
            .filter(|b| b.n == n && b.reaches(BoundarySide::SigmaTwo))
            .count();
        let expected = superstable_logistic_params(n).len();
        passed &= reaching == expected;
        detail.push_str(&format!(
            "n={n}: {reaching} bones vs {expected} superstable; "
        ));
    }
    Check {
        passed,
        detail: detail.trim_end_matches("; ").to_string(),
    }
}

struct GridArtifacts {
    csv: String,
    connectivity_json: String,
    check: Check,
}

fn compute_grid_artifacts(cfg: &AcceptanceConfig, workers: Option<usize>) -> GridArtifacts {
    let spec = GridSpec::default_window(cfg.grid_resolution.0, cfg.grid_resolution.1);
    let grid = entropy_grid(&spec, workers);
    let report = band_connectivity(&grid);
    let cap = 2.0f64.ln() + 1e-3;
    let mut in_range = true;
    for cell in &grid.cells {
        if let Some(h) = cell.entropy {
            in_range &= (0.0..=cap).contains(&h);
        }
    }
    let components: Vec<usize> = report.bands.iter().map(|b| b.components).collect();
    let connected = components.iter().all(|c| *c == 1);
    GridArtifacts {
        csv: write_grid_csv(&grid),
        connectivity_json: write_connectivity_json(&report),
        check: Check {
            passed: connected && in_range,
            detail: format!(
                "components per band {components:?}; values within [0, log 2 + 1e-3]: {in_range}"
            ),
        },
    }
}

fn criterion_8(cfg: &AcceptanceConfig, scan: &ScanArtifacts, grid: &GridArtifacts) -> Check {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool");
    let scan_single = pool.install(|| compute_scan_artifacts(cfg));
    let grid_single = compute_grid_artifacts(cfg, Some(1));
    let scan_same =
        scan_single.pcf_json == scan.pcf_json && scan_single.bones_json == scan.bones_json;
    let grid_same =
        grid_single.csv == grid.csv && grid_single.connectivity_json == grid.connectivity_json;
    Check {
        passed: scan_same && grid_same,
        detail: format!(
            "scan/bones byte-identical: {scan_same}; grid/connectivity byte-identical: {grid_same} (1 vs {} workers)",
            cfg.workers
        ),
    }
}

/// Runs the full battery in order and returns one report per criterion.
pub fn run_all(cfg: &AcceptanceConfig) -> Vec<CriterionReport> {
    let mut reports = Vec::with_capacity(8);
    let mut push = |id: u8, name: &'static str, check: Check, start: Instant| {
        reports.push(CriterionReport {
            id,
            name,
            passed: check.passed,
            detail: check.detail,
            seconds: start.elapsed().as_secs_f64(),
        });
    };

    let t = Instant::now();
    push(1, "entropy oracle agreement", criterion_1(), t);

    let t = Instant::now();
    push(2, "algebraic identities", criterion_2(), t);

    let t = Instant::now();
    push(3, "region geometry", criterion_3(), t);

    let t = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .expect("thread pool");
    let scan = pool.install(|| compute_scan_artifacts(cfg));
    let scan_elapsed = t;
    push(
        4,
        "positive transversality",
        criterion_4(&scan),
        scan_elapsed,
    );

    let t = Instant::now();
    push(5, "no bone loops", criterion_5(&scan), t);

    let t = Instant::now();
    push(6, "bone/polynomial correspondence", criterion_6(&scan), t);

    let t = Instant::now();
    let grid = compute_grid_artifacts(cfg, Some(cfg.workers));
    push(
        7,
        "isentrope connectivity",
        Check {
            passed: grid.check.passed,
            detail: grid.check.detail.clone(),
        },
        t,
    );

    let t = Instant::now();
    push(8, "determinism", criterion_8(cfg, &scan, &grid), t);

    reports
}
