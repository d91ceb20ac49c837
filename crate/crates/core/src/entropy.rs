//! Topological entropy of piecewise-monotone interval maps.
//!
//! The workhorse is lap counting: the turning set of f^(n+1) is the union
//! of the turning set of f with the f-preimages of the turning set of f^n,
//! so the lap numbers lap(f^n) = |T_n| + 1 can be grown one pullback step
//! at a time. The normalized counts (1/n) log lap(f^n) decrease to the
//! entropy, giving a rigorous upper bound alongside the ratio estimator.
//! Postcritically finite maps get an independent route: a Markov partition
//! on the critical orbit and the log of the spectral radius of its
//! transition matrix.

use std::sync::Arc;

use thiserror::Error;

use crate::family::{FamilyError, QuadraticMap, RegionTag};

#[derive(Debug, Error)]
pub enum EntropyError {
    #[error("branch {branch} is not monotone near x = {x}")]
    BranchMonotonicityViolation { branch: usize, x: f64 },
    #[error("image point {y} of x = {x} escapes the domain")]
    ImageEscapesDomain { x: f64, y: f64 },
    #[error("turning point {x} lies strictly inside a partition cell")]
    TurningInsideCell { x: f64 },
    #[error("orbit point {point} maps to {image}, not an orbit point")]
    NotForwardInvariant { point: f64, image: f64 },
    #[error("partition needs at least two points")]
    EmptyPartition,
    #[error(transparent)]
    Family(#[from] FamilyError),
}

/// A ratio of two real quadratics, coefficients in ascending order:
/// (n0 + n1 x + n2 x^2) / (d0 + d1 x + d2 x^2).
///
/// Both the unimodal normal form and chart-conjugated restrictions of the
/// quadratic rational family land in this shape, which admits exact
/// preimages through the quadratic formula.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalQuadratic {
    num: [f64; 3],
    den: [f64; 3],
}

impl RationalQuadratic {
    pub fn new(num: [f64; 3], den: [f64; 3]) -> Self {
        Self { num, den }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = (self.num[2] * x + self.num[1]) * x + self.num[0];
        let d = (self.den[2] * x + self.den[1]) * x + self.den[0];
        n / d
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let n = (self.num[2] * x + self.num[1]) * x + self.num[0];
        let d = (self.den[2] * x + self.den[1]) * x + self.den[0];
        let dn = 2.0 * self.num[2] * x + self.num[1];
        let dd = 2.0 * self.den[2] * x + self.den[1];
        (dn * d - n * dd) / (d * d)
    }

    pub fn derivative_complex(&self, z: num_complex::Complex64) -> num_complex::Complex64 {
        let n = (z * self.num[2] + self.num[1]) * z + self.num[0];
        let d = (z * self.den[2] + self.den[1]) * z + self.den[0];
        let dn = z * (2.0 * self.num[2]) + self.num[1];
        let dd = z * (2.0 * self.den[2]) + self.den[1];
        (dn * d - n * dd) / (d * d)
    }

    /// All solutions of eval(x) = y inside [lo, hi].
    pub fn preimages(&self, y: f64, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(2);
        self.preimages_into(y, lo, hi, &mut out);
        out
    }

    /// Allocation-free variant for the lap-counting hot loop.
    pub fn preimages_into(&self, y: f64, lo: f64, hi: f64, out: &mut Vec<f64>) {
        let a = self.num[2] - y * self.den[2];
        let b = self.num[1] - y * self.den[1];
        let c = self.num[0] - y * self.den[0];
        let pad = 1e-12 * (hi - lo).abs();
        let scale = a.abs().max(b.abs()).max(c.abs());
        if scale == 0.0 || !scale.is_finite() {
            return;
        }
        let mut push = |r: f64| {
            if r >= lo - pad && r <= hi + pad {
                out.push(r.clamp(lo, hi));
            }
        };
        if a.abs() <= scale * 1e-14 {
            if b.abs() > scale * 1e-14 {
                push(-c / b);
            }
            return;
        }
        let disc = b * b - 4.0 * a * c;
        let tangency = 4.0 * f64::EPSILON * (b * b + 4.0 * a.abs() * c.abs());
        if disc < -tangency {
            return;
        }
        if disc <= tangency {
            push(-b / (2.0 * a));
            return;
        }
        let sq = disc.sqrt();
        if b == 0.0 {
            push(-sq / (2.0 * a));
            push(sq / (2.0 * a));
        } else {
            let q = -0.5 * (b + b.signum() * sq);
            push(q / a);
            push(c / q);
        }
    }
}

/// How an interval model evaluates its map.
#[derive(Clone)]
pub enum ModelMap {
    Rational(RationalQuadratic),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for ModelMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelMap::Rational(r) => write!(f, "Rational({r:?})"),
            ModelMap::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// A piecewise-monotone self-map of a closed interval with a sorted list
/// of interior turning points.
#[derive(Debug, Clone)]
pub struct IntervalModel {
    lo: f64,
    hi: f64,
    map: ModelMap,
    turning: Vec<f64>,
}

impl IntervalModel {
    pub fn from_rational(domain: (f64, f64), map: RationalQuadratic, turning: Vec<f64>) -> Self {
        Self::build(domain, ModelMap::Rational(map), turning)
    }

    pub fn from_fn<F>(domain: (f64, f64), map: F, turning: Vec<f64>) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::build(domain, ModelMap::Custom(Arc::new(map)), turning)
    }

    fn build(domain: (f64, f64), map: ModelMap, mut turning: Vec<f64>) -> Self {
        assert!(domain.0 < domain.1, "empty domain");
        turning.sort_by(f64::total_cmp);
        turning.retain(|t| *t > domain.0 && *t < domain.1);
        Self {
            lo: domain.0,
            hi: domain.1,
            map,
            turning,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn turning_points(&self) -> &[f64] {
        &self.turning
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.map {
            ModelMap::Rational(r) => r.eval(x),
            ModelMap::Custom(f) => f(x),
        }
    }

    fn span(&self) -> f64 {
        self.hi - self.lo
    }

    /// Branch endpoints: domain endpoints plus turning points.
    fn branch_nodes(&self) -> Vec<f64> {
        let mut nodes = Vec::with_capacity(self.turning.len() + 2);
        nodes.push(self.lo);
        nodes.extend_from_slice(&self.turning);
        nodes.push(self.hi);
        nodes
    }

    /// Spot check: strict monotonicity on each branch, image inside the
    /// domain. Sampling-based; a failure means the model is invalid.
    pub fn validate(&self, samples_per_branch: usize) -> Result<(), EntropyError> {
        let nodes = self.branch_nodes();
        let tol = 1e-9 * self.span().max(1.0);
        for (branch, w) in nodes.windows(2).enumerate() {
            let (u, v) = (w[0], w[1]);
            let mut prev = self.eval(u);
            let mut dir = 0.0f64;
            for i in 0..=samples_per_branch {
                let x = u + (v - u) * (i as f64) / (samples_per_branch as f64);
                let y = self.eval(x);
                if !(self.lo - tol..=self.hi + tol).contains(&y) {
                    return Err(EntropyError::ImageEscapesDomain { x, y });
                }
                if i > 0 {
                    let d = y - prev;
                    if d.abs() > 1e-14 * self.span() {
                        if dir != 0.0 && d.signum() != dir {
                            return Err(EntropyError::BranchMonotonicityViolation { branch, x });
                        }
                        dir = d.signum();
                    }
                }
                prev = y;
            }
        }
        Ok(())
    }

    /// All preimages of y in the domain, one per monotone branch at most.
    pub fn preimages(&self, y: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(2);
        self.preimages_into(y, &mut out);
        out
    }

    fn preimages_into(&self, y: f64, out: &mut Vec<f64>) {
        match &self.map {
            ModelMap::Rational(r) => r.preimages_into(y, self.lo, self.hi, out),
            ModelMap::Custom(_) => out.extend(self.preimages_by_bisection(y)),
        }
    }

    fn preimages_by_bisection(&self, y: f64) -> Vec<f64> {
        let nodes = self.branch_nodes();
        let mut out = Vec::new();
        let tol = 1e-13 * self.span();
        for w in nodes.windows(2) {
            let (mut u, mut v) = (w[0], w[1]);
            let (fu, fv) = (self.eval(u), self.eval(v));
            let (mut ru, rv) = (fu - y, fv - y);
            if ru == 0.0 {
                out.push(u);
                continue;
            }
            if rv == 0.0 {
                out.push(v);
                continue;
            }
            if ru * rv > 0.0 {
                continue;
            }
            for _ in 0..200 {
                if v - u <= tol {
                    break;
                }
                let m = 0.5 * (u + v);
                let rm = self.eval(m) - y;
                if rm == 0.0 {
                    u = m;
                    v = m;
                    break;
                }
                if ru * rm <= 0.0 {
                    v = m;
                } else {
                    u = m;
                    ru = rm;
                }
            }
            out.push(0.5 * (u + v));
        }
        out
    }
}

/// Parameters of the lap-counting estimator.
#[derive(Debug, Clone, Copy)]
pub struct LapOptions {
    pub n_max: usize,
    pub lap_cap: u64,
    pub tol: f64,
    pub window: usize,
}

impl Default for LapOptions {
    fn default() -> Self {
        Self {
            n_max: 40,
            lap_cap: 1_000_000,
            tol: 1e-3,
            window: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyMethod {
    Lap,
    Markov,
}

impl EntropyMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            EntropyMethod::Lap => "lap",
            EntropyMethod::Markov => "markov",
        }
    }
}

/// An entropy value in nats with its rigorous upper bound
/// min_n (1/n) log lap(f^n).
#[derive(Debug, Clone, Copy)]
pub struct EntropyEstimate {
    pub value: f64,
    pub upper_bound: f64,
    pub method: EntropyMethod,
    pub depth: usize,
    pub tolerance: f64,
    pub converged: bool,
}

impl EntropyEstimate {
    pub fn zero(method: EntropyMethod) -> Self {
        Self {
            value: 0.0,
            upper_bound: 0.0,
            method,
            depth: 0,
            tolerance: 0.0,
            converged: true,
        }
    }
}

/// lap(f^n) for n = 1.. until `n_max` levels or the count passes `lap_cap`.
///
/// The sorted turning set of f^n is pulled back one step of f at a time;
/// preimages landing within 1e-12 of an existing point or a domain
/// endpoint are merged so rounding cannot inflate the counts.
pub fn lap_sequence(
    model: &IntervalModel,
    n_max: usize,
    lap_cap: u64,
) -> Result<Vec<u64>, EntropyError> {
    model.validate(48)?;
    let merge_tol = 1e-12 * model.span();
    let (lo, hi) = model.domain();
    let mut turning_now: Vec<f64> = model.turning_points().to_vec();
    let mut laps = Vec::with_capacity(n_max);
    laps.push(turning_now.len() as u64 + 1);
    let mut next: Vec<f64> = Vec::new();
    for _ in 1..n_max {
        if *laps.last().unwrap() > lap_cap {
            break;
        }
        next.clear();
        next.extend_from_slice(model.turning_points());
        for &t in &turning_now {
            model.preimages_into(t, &mut next);
        }
        next.sort_unstable_by(f64::total_cmp);
        turning_now.clear();
        for &x in &next {
            if x <= lo + merge_tol || x >= hi - merge_tol {
                continue;
            }
            if let Some(&last) = turning_now.last() {
                if x - last <= merge_tol {
                    continue;
                }
            }
            turning_now.push(x);
        }
        laps.push(turning_now.len() as u64 + 1);
        if turning_now.is_empty() {
            break;
        }
    }
    Ok(laps)
}

/// Lap-counting entropy: ratio estimator over a trailing window, with the
/// subadditive bound min_n (1/n) log lap(f^n) attached.
pub fn entropy_lap(
    model: &IntervalModel,
    opts: &LapOptions,
) -> Result<EntropyEstimate, EntropyError> {
    let laps = lap_sequence(model, opts.n_max, opts.lap_cap)?;
    let depth = laps.len();
    let upper_bound = laps
        .iter()
        .enumerate()
        .map(|(i, &l)| (l as f64).ln() / (i as f64 + 1.0))
        .fold(f64::INFINITY, f64::min);
    if *laps.last().unwrap() == 1 {
        return Ok(EntropyEstimate {
            value: 0.0,
            upper_bound,
            method: EntropyMethod::Lap,
            depth,
            tolerance: 0.0,
            converged: true,
        });
    }
    let w = opts.window.min(depth - 1).max(1);
    let ratios: Vec<f64> = laps[depth - 1 - w..]
        .windows(2)
        .map(|p| (p[1] as f64 / p[0] as f64).ln())
        .collect();
    // Counts are integers, so the mean ratio is nonnegative up to rounding.
    let value = (ratios.iter().sum::<f64>() / ratios.len() as f64).max(0.0);
    let spread = ratios.iter().fold(f64::NEG_INFINITY, |m, r| m.max(*r))
        - ratios.iter().fold(f64::INFINITY, |m, r| m.min(*r));
    Ok(EntropyEstimate {
        value,
        upper_bound,
        method: EntropyMethod::Lap,
        depth,
        tolerance: spread,
        converged: spread <= opts.tol,
    })
}

/// A Markov partition of the core interval by a finite forward-invariant
/// orbit, with the 0/1 covering matrix M[i][j] = 1 iff f(I_i) contains I_j.
#[derive(Debug, Clone)]
pub struct MarkovSystem {
    pub partition: Vec<f64>,
    pub matrix: Vec<Vec<u8>>,
}

/// Builds the Markov system on the hull of `orbit`. The orbit must be
/// forward invariant (up to snapping tolerance) and must contain every
/// turning point of the model that falls inside its hull.
pub fn markov_partition(
    model: &IntervalModel,
    orbit: &[f64],
) -> Result<MarkovSystem, EntropyError> {
    let span = model.span();
    let merge_tol = 1e-9 * span.max(1.0);
    let snap_tol = 1e-6 * span.max(1.0);
    let mut points: Vec<f64> = orbit.to_vec();
    points.sort_by(f64::total_cmp);
    points.dedup_by(|a, b| (*a - *b).abs() <= merge_tol);
    if points.len() < 2 {
        return Err(EntropyError::EmptyPartition);
    }
    let (core_lo, core_hi) = (points[0], *points.last().unwrap());
    for &t in model.turning_points() {
        if t > core_lo + merge_tol && t < core_hi - merge_tol {
            let near = points.iter().any(|p| (p - t).abs() <= snap_tol);
            if !near {
                return Err(EntropyError::TurningInsideCell { x: t });
            }
        }
    }
    let snap = |y: f64| -> Result<usize, EntropyError> {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in points.iter().enumerate() {
            let d = (p - y).abs();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        if best_d > snap_tol {
            return Err(EntropyError::NotForwardInvariant {
                point: f64::NAN,
                image: y,
            });
        }
        Ok(best)
    };
    let image_idx: Vec<usize> = points
        .iter()
        .map(|&p| {
            snap(model.eval(p)).map_err(|_| EntropyError::NotForwardInvariant {
                point: p,
                image: model.eval(p),
            })
        })
        .collect::<Result<_, _>>()?;
    let cells = points.len() - 1;
    let mut matrix = vec![vec![0u8; cells]; cells];
    for i in 0..cells {
        let (a, b) = (image_idx[i], image_idx[i + 1]);
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        for row in matrix[i][a..b].iter_mut() {
            *row = 1;
        }
    }
    Ok(MarkovSystem {
        partition: points,
        matrix,
    })
}

/// Spectral radius of a nonnegative 0/1 matrix by scaled repeated
/// squaring: after k squarings the max entry of M^(2^k), renormalized at
/// every step, satisfies log(max)/2^k -> log rho with an O(log N * k / 2^k)
/// gap. Plain power iteration cannot reach this accuracy here: the Markov
/// cores of period-2^k superattracting orbits have a defective peripheral
/// eigenvalue, for which Collatz-Wielandt bounds close only harmonically.
pub fn spectral_radius(matrix: &[Vec<u8>]) -> f64 {
    let n = matrix.len();
    if n == 0 {
        return 0.0;
    }
    let mut b: Vec<f64> = matrix
        .iter()
        .flat_map(|row| row.iter().map(|&x| x as f64))
        .collect();
    let mut log_scale = 0.0f64;
    let squarings = 48u32;
    let mut scratch = vec![0.0f64; n * n];
    for _ in 0..squarings {
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += b[i * n + k] * b[k * n + j];
                }
                scratch[i * n + j] = acc;
            }
        }
        let max = scratch.iter().fold(0.0f64, |m, x| m.max(*x));
        if max == 0.0 {
            return 0.0; // nilpotent
        }
        for (dst, src) in b.iter_mut().zip(&scratch) {
            *dst = src / max;
        }
        log_scale = 2.0 * log_scale + max.ln();
    }
    (log_scale / 2f64.powi(squarings as i32)).exp()
}

/// Entropy of a Markov system: log of the spectral radius of its matrix.
pub fn entropy_markov(system: &MarkovSystem) -> EntropyEstimate {
    let rho = spectral_radius(&system.matrix);
    let value = if rho <= 1.0 { 0.0 } else { rho.ln() };
    EntropyEstimate {
        value,
        upper_bound: value,
        method: EntropyMethod::Markov,
        depth: system.matrix.len(),
        tolerance: 1e-10,
        converged: true,
    }
}

/// Steps used by the superattracting-orbit detector inside `real_entropy`.
const PCF_DETECT_STEPS: usize = 64;
const PCF_DETECT_TOL: f64 = 1e-9;

/// Detects a finite (eventually periodic) orbit of the first turning point.
pub fn detect_finite_critical_orbit(model: &IntervalModel) -> Option<Vec<f64>> {
    let c = *model.turning_points().first()?;
    let tol = PCF_DETECT_TOL * model.span().max(1.0);
    let mut orbit = vec![c];
    let mut x = c;
    for _ in 0..PCF_DETECT_STEPS {
        x = model.eval(x);
        if orbit.iter().any(|p| (p - x).abs() <= tol) {
            return Some(orbit);
        }
        orbit.push(x);
    }
    None
}

/// Real entropy of a map in the critical-value family: the topological
/// entropy of its restriction to the image arc, computed as an interval
/// map in a chart where the image is finite.
pub fn real_entropy(f: &QuadraticMap, opts: &LapOptions) -> Result<EntropyEstimate, EntropyError> {
    Ok(real_entropy_with_crosscheck(f, opts)?.0)
}

/// As `real_entropy`, but when the essential critical orbit is finite the
/// Markov estimate is returned alongside for cross-checking.
pub fn real_entropy_with_crosscheck(
    f: &QuadraticMap,
    opts: &LapOptions,
) -> Result<(EntropyEstimate, Option<EntropyEstimate>), EntropyError> {
    let class = f.classify()?;
    let chart = match class.tag {
        RegionTag::Monotonic => return Ok((EntropyEstimate::zero(EntropyMethod::Lap), None)),
        RegionTag::Unimodal => f.unimodal_restriction()?,
        RegionTag::BimodalPlusMinusPlus | RegionTag::BimodalMinusPlusMinus => {
            let (lo, hi) = class.image_interval;
            f.charted_restriction(0.5 * (lo + hi))
        }
    };
    let model = chart.interval_model();
    let lap = entropy_lap(&model, opts)?;
    let markov = detect_finite_critical_orbit(&model)
        .and_then(|orbit| markov_partition(&model, &orbit).ok())
        .map(|system| entropy_markov(&system));
    Ok((lap, markov))
}
