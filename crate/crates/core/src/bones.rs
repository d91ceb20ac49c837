//! Critical-relation residuals, Newton location of postcritically finite
//! parameters, transversality quotients and oriented tracing of the
//! postcritical curves ("bones") in critical-value space.
//!
//! For a unimodal parameter v the essential critical point c has a
//! well-defined role, and two residuals encode the critical relations:
//!
//! ```text
//! R1(v) = f_v^(n-1)(v_ess) - c_ess     (essential point has period n)
//! R2(v) = f_v^(m-1)(v_triv) - c_ess    (trivial value lands after m steps)
//! ```
//!
//! A bone of order n is a connected component of { R1 = 0 }. Its oriented
//! unit tangent is
//!
//! ```text
//! E_v ~ (f^(n-1))'(v_ess) * (-dR1/dv_triv, dR1/dv_ess),
//! ```
//!
//! which makes det(A_v | E_v) > 0 for the normalized gradient column
//! A_v = grad R1 / (f^(n-1))'(v_ess): the positive direction along the
//! curve. At a point where both residuals vanish, the transversality
//! quotient det D(R1,R2) / ((f^(n-1))'(v_ess) (f^(m-1))'(v_triv)) is the
//! sign-meaningful quantity; positivity at every such point is what rules
//! out bone loops.
//!
//! Everything is phrased in role coordinates (essential slot first), which
//! coincide with the chart coordinates (v1, v2) on the component where the
//! essential critical point is -1 and are the swap on the mirror component.

use thiserror::Error;

use crate::family::{CriticalPoint, CriticalValuePair, FamilyError, QuadraticMap, RegionTag};
use crate::num::solve2;

pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 60;
/// Minimal distance the critical orbits must keep from the critical points
/// at intermediate steps. A passage at distance d contributes d^2 to every
/// later residual, so a 1e-12 root is only trustworthy when d^2 > 1e-12:
/// anything tighter admits spurious higher-(n, m) shadows of lower
/// relations whose residuals are flat below the Newton tolerance.
pub const MINIMALITY_TOL: f64 = 1e-6;
pub const FD_STEP: f64 = 1e-6;
pub const FD_CONSISTENCY_TOL: f64 = 1e-4;
pub const BONE_SAMPLE_TOL: f64 = 1e-8;
pub const CORRECTOR_TOL: f64 = 1e-10;
pub const RANK_DROP_TOL: f64 = 1e-10;
pub const VANISHING_DERIVATIVE_TOL: f64 = 1e-12;
pub const DEDUP_TOL: f64 = 1e-8;
pub const LOOP_POSITION_TOL: f64 = 1e-6;
pub const LOOP_TANGENT_DOT: f64 = 0.9;
/// Grid tolerance when matching an endpoint to the sigma1 = 2 / -6 lines.
pub const SIGMA_EDGE_TOL: f64 = 1e-2;

#[derive(Debug, Error)]
pub enum BonesError {
    #[error("parameter ({v1}, {v2}) is not in the unimodal region")]
    RegionMismatch { v1: f64, v2: f64 },
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error("preperiodic relation requires 1 <= ell < q, got ell = {ell}, q = {q}")]
    BadPreperiodicIndices { q: usize, ell: usize },
    #[error("finite-difference Jacobian inconsistent across step halving: {consistency}")]
    JacobianInconsistent { consistency: f64 },
    #[error("singular Jacobian in Newton step")]
    SingularJacobian,
    #[error("Newton did not converge after {iterations} iterations (|R| = {residual})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error(
        "critical relation ({n}, {m}) is not minimal: orbit hits a critical point at step {step}"
    )]
    MinimalityViolation { n: usize, m: usize, step: usize },
    #[error("orbit derivative {value} vanishes within tolerance")]
    VanishingDerivative { value: f64 },
    #[error("residual gradient norm {gradient_norm} below rank tolerance")]
    RankDrop { gradient_norm: f64 },
    #[error("seed residual {residual} exceeds the bone sample tolerance")]
    SeedOffCurve { residual: f64 },
    #[error("corrector stagnated below minimum step {step}")]
    CorrectorStagnation { step: f64 },
    #[error("point lies {distance} away from the bone polyline")]
    PointNotOnBone { distance: f64 },
}

/// Which critical orbit relation a residual encodes. Slots are
/// role-indexed: j = 1 is the essential critical point, j = 2 the trivial
/// one, and targets name a critical point the same way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticalRelation {
    /// f^q(c_j) = c_target with no earlier critical hit.
    LandsOnCritical { j: u8, q: usize, target: u8 },
    /// f^q(c_j) = f^ell(c_j), 1 <= ell < q.
    Preperiodic { j: u8, q: usize, ell: usize },
}

/// Role coordinates: the essential critical value first.
#[derive(Debug, Clone, Copy)]
struct Roles {
    essential: CriticalPoint,
}

impl Roles {
    fn of(v: CriticalValuePair) -> Result<Roles, BonesError> {
        let f = QuadraticMap::from_critical_values(v)?;
        let class = f.classify()?;
        match (class.tag, class.essential) {
            (RegionTag::Unimodal, Some(essential)) => Ok(Roles { essential }),
            _ => Err(BonesError::RegionMismatch { v1: v.v1, v2: v.v2 }),
        }
    }

    fn essential_value(&self, v: CriticalValuePair) -> f64 {
        v.at(self.essential)
    }

    fn trivial_value(&self, v: CriticalValuePair) -> f64 {
        v.at(self.essential.other())
    }

    /// Role vector (essential slot, trivial slot).
    fn role_coords(&self, v: CriticalValuePair) -> [f64; 2] {
        [self.essential_value(v), self.trivial_value(v)]
    }

    fn pair_of(&self, r: [f64; 2]) -> CriticalValuePair {
        match self.essential {
            CriticalPoint::MinusOne => CriticalValuePair::new(r[0], r[1]),
            CriticalPoint::PlusOne => CriticalValuePair::new(r[1], r[0]),
        }
    }
}

/// R1: the essential critical point has period n. n = 1 gives v_ess - c_ess.
pub fn residual_r1(v: CriticalValuePair, n: usize) -> Result<f64, BonesError> {
    let roles = Roles::of(v)?;
    residual_r1_with_role(v, n, roles.essential)
}

/// R1 with the essential role pinned by the caller. The residual extends
/// smoothly across the region boundary, which the continuation corrector
/// needs when refining boundary crossings.
fn residual_r1_with_role(
    v: CriticalValuePair,
    n: usize,
    essential: CriticalPoint,
) -> Result<f64, BonesError> {
    let f = QuadraticMap::from_critical_values(v)?;
    let mut x = v.at(essential);
    for step in 0..n.saturating_sub(1) {
        x = f.eval_checked(x, step)?;
    }
    Ok(x - essential.value())
}

/// R2: the trivial critical value lands on the essential critical point
/// after m - 1 further steps. m = 1 gives v_triv - c_ess.
pub fn residual_r2(v: CriticalValuePair, m: usize) -> Result<f64, BonesError> {
    let roles = Roles::of(v)?;
    let f = QuadraticMap::from_critical_values(v)?;
    let mut x = roles.trivial_value(v);
    for step in 0..m.saturating_sub(1) {
        x = f.eval_checked(x, step)?;
    }
    Ok(x - roles.essential.value())
}

/// The general preperiodic residual f^(q-1)(v_j) - f^(ell-1)(v_j) for the
/// slot-j critical value. No region precondition: this is the raw second
/// critical-orbit relation.
pub fn residual_preperiodic(
    v: CriticalValuePair,
    j: u8,
    q: usize,
    ell: usize,
) -> Result<f64, BonesError> {
    if ell == 0 || ell >= q {
        return Err(BonesError::BadPreperiodicIndices { q, ell });
    }
    let f = QuadraticMap::from_critical_values(v)?;
    let start = if j <= 1 { v.v1 } else { v.v2 };
    let mut x = start;
    let mut at_ell = start;
    for step in 0..q - 1 {
        if step == ell - 1 {
            at_ell = x;
        }
        x = f.eval_checked(x, step)?;
    }
    if q - 1 == ell - 1 {
        at_ell = x;
    }
    Ok(x - at_ell)
}

/// Central-difference gradient of a scalar residual, role coordinates.
fn fd_gradient<F>(
    sys: &F,
    roles: &Roles,
    v: CriticalValuePair,
    h: f64,
) -> Result<[f64; 2], BonesError>
where
    F: Fn(CriticalValuePair) -> Result<f64, BonesError>,
{
    let r = roles.role_coords(v);
    let mut grad = [0.0; 2];
    for (i, g) in grad.iter_mut().enumerate() {
        let mut rp = r;
        rp[i] += h;
        let mut rm = r;
        rm[i] -= h;
        *g = (sys(roles.pair_of(rp))? - sys(roles.pair_of(rm))?) / (2.0 * h);
    }
    Ok(grad)
}

/// Central-difference Jacobian of a residual pair in role coordinates,
/// one Richardson extrapolation level. Returns the extrapolated matrix
/// together with the consistency gap between the h and h/2 levels.
pub fn jacobian_fd<F>(sys: &F, v: CriticalValuePair) -> Result<([[f64; 2]; 2], f64), BonesError>
where
    F: Fn(CriticalValuePair) -> Result<[f64; 2], BonesError>,
{
    let roles = Roles::of(v)?;
    let h = FD_STEP * v.v1.abs().max(v.v2.abs()).max(1.0);
    let level = |h: f64| -> Result<[[f64; 2]; 2], BonesError> {
        let r = roles.role_coords(v);
        let mut m = [[0.0; 2]; 2];
        for col in 0..2 {
            let mut rp = r;
            rp[col] += h;
            let mut rm = r;
            rm[col] -= h;
            let fp = sys(roles.pair_of(rp))?;
            let fm = sys(roles.pair_of(rm))?;
            m[0][col] = (fp[0] - fm[0]) / (2.0 * h);
            m[1][col] = (fp[1] - fm[1]) / (2.0 * h);
        }
        Ok(m)
    };
    let coarse = level(h)?;
    let fine = level(0.5 * h)?;
    let mut extrapolated = [[0.0; 2]; 2];
    let mut scale = 0.0f64;
    let mut gap = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            extrapolated[i][j] = (4.0 * fine[i][j] - coarse[i][j]) / 3.0;
            scale = scale.max(fine[i][j].abs());
            gap = gap.max((fine[i][j] - coarse[i][j]).abs());
        }
    }
    let consistency = gap / scale.max(1.0);
    if !consistency.is_finite() || consistency > FD_CONSISTENCY_TOL {
        return Err(BonesError::JacobianInconsistent { consistency });
    }
    Ok((extrapolated, consistency))
}

/// A located postcritically finite parameter with relation pair (n, m),
/// its residual Jacobian and transversality data.
#[derive(Debug, Clone)]
pub struct PCFPoint {
    pub v: CriticalValuePair,
    pub n: usize,
    pub m: usize,
    /// Jacobian of (R1, R2) in role coordinates at v.
    pub jacobian: [[f64; 2]; 2],
    /// det(jacobian) / ((f^(n-1))'(v_ess) (f^(m-1))'(v_triv)).
    pub quotient: f64,
    /// Sign of (f^(m-1))'(v_triv).
    pub derivative_sign: i8,
    pub residuals: [f64; 2],
    /// Max-norm residuals along the Newton iteration, for convergence audits.
    pub newton_residuals: Vec<f64>,
}

impl PCFPoint {
    /// The two critical orbit relations this parameter satisfies: the
    /// essential point is periodic of order n, the trivial value lands on
    /// the essential point after m steps.
    pub fn relations(&self) -> [CriticalRelation; 2] {
        [
            CriticalRelation::LandsOnCritical {
                j: 1,
                q: self.n,
                target: 1,
            },
            CriticalRelation::LandsOnCritical {
                j: 2,
                q: self.m,
                target: 1,
            },
        ]
    }
}

fn residual_pair(v: CriticalValuePair, n: usize, m: usize) -> Result<[f64; 2], BonesError> {
    Ok([residual_r1(v, n)?, residual_r2(v, m)?])
}

/// Verifies minimality of the relation pair: no earlier essential-orbit
/// return and no earlier trivial-orbit landing, both within 1e-8, and no
/// intermediate hit of either critical point.
fn check_minimality(v: CriticalValuePair, n: usize, m: usize) -> Result<(), BonesError> {
    let roles = Roles::of(v)?;
    let f = QuadraticMap::from_critical_values(v)?;
    let c_e = roles.essential.value();
    let c_t = roles.essential.other().value();
    let mut x = roles.essential_value(v);
    for k in 1..n {
        // x = f^k(c_ess)
        if (x - c_e).abs() < MINIMALITY_TOL || (x - c_t).abs() < MINIMALITY_TOL {
            return Err(BonesError::MinimalityViolation { n, m, step: k });
        }
        x = f.eval_checked(x, k)?;
    }
    let mut y = roles.trivial_value(v);
    for k in 1..m {
        // y = f^k(c_triv)
        if (y - c_e).abs() < MINIMALITY_TOL || (y - c_t).abs() < MINIMALITY_TOL {
            return Err(BonesError::MinimalityViolation { n, m, step: k });
        }
        y = f.eval_checked(y, k)?;
    }
    Ok(())
}

/// The quotient det D(R1,R2) / ((f^(n-1))'(v_ess) (f^(m-1))'(v_triv)).
pub fn transversality_quotient(
    v: CriticalValuePair,
    n: usize,
    m: usize,
    jacobian: &[[f64; 2]; 2],
) -> Result<f64, BonesError> {
    let roles = Roles::of(v)?;
    let f = QuadraticMap::from_critical_values(v)?;
    let d1 = f.orbit_derivative(roles.essential_value(v), n - 1)?;
    let d2 = f.orbit_derivative(roles.trivial_value(v), m - 1)?;
    for d in [d1, d2] {
        if d.abs() < VANISHING_DERIVATIVE_TOL {
            return Err(BonesError::VanishingDerivative { value: d });
        }
    }
    let det = jacobian[0][0] * jacobian[1][1] - jacobian[0][1] * jacobian[1][0];
    Ok(det / (d1 * d2))
}

/// Damped Newton (Armijo backtracking) on (R1, R2) from an initial guess.
/// Convergence means max |R_i| < 1e-12; minimality of (n, m) is audited
/// afterwards and the transversality data recorded.
pub fn newton_pcf(v0: CriticalValuePair, n: usize, m: usize) -> Result<PCFPoint, BonesError> {
    let sys = |v: CriticalValuePair| residual_pair(v, n, m);
    let mut v = v0;
    let mut history = Vec::new();
    for iteration in 0..NEWTON_MAX_ITER {
        let r = sys(v)?;
        let norm = r[0].abs().max(r[1].abs());
        history.push(norm);
        if norm < NEWTON_TOL {
            check_minimality(v, n, m)?;
            let (jacobian, _) = jacobian_fd(&sys, v)?;
            let quotient = transversality_quotient(v, n, m, &jacobian)?;
            let roles = Roles::of(v)?;
            let f = QuadraticMap::from_critical_values(v)?;
            let d2 = f.orbit_derivative(roles.trivial_value(v), m - 1)?;
            return Ok(PCFPoint {
                v,
                n,
                m,
                jacobian,
                quotient,
                derivative_sign: if d2 >= 0.0 { 1 } else { -1 },
                residuals: r,
                newton_residuals: history,
            });
        }
        let (jac, _) = jacobian_fd(&sys, v)?;
        let roles = Roles::of(v)?;
        let delta = solve2(jac, [-r[0], -r[1]]).ok_or(BonesError::SingularJacobian)?;
        let phi0 = 0.5 * (r[0] * r[0] + r[1] * r[1]);
        let mut lambda = 1.0f64;
        let mut accepted = false;
        while lambda >= 1.0 / 1024.0 {
            let role = roles.role_coords(v);
            let trial = roles.pair_of([role[0] + lambda * delta[0], role[1] + lambda * delta[1]]);
            if let Ok(rt) = sys(trial) {
                let phi = 0.5 * (rt[0] * rt[0] + rt[1] * rt[1]);
                if phi <= phi0 * (1.0 - 1e-4 * lambda) {
                    v = trial;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(BonesError::NewtonDiverged {
                iterations: iteration,
                residual: norm,
            });
        }
    }
    let final_res = sys(v)
        .map(|r| r[0].abs().max(r[1].abs()))
        .unwrap_or(f64::NAN);
    Err(BonesError::NewtonDiverged {
        iterations: NEWTON_MAX_ITER,
        residual: final_res,
    })
}

/// The oriented tangent frame along a bone of order n.
#[derive(Debug, Clone, Copy)]
pub struct TangentFrame {
    /// Unit positive-direction tangent, chart coordinates (v1, v2).
    pub e: [f64; 2],
    /// grad R1 / (f^(n-1))'(v_ess), role coordinates.
    pub gradient_column: [f64; 2],
}

/// E_v: the unit tangent (f^(n-1))'(v_ess) (-dR1/dv_triv, dR1/dv_ess),
/// normalized preserving sign. det(gradient_column | E) > 0 by build.
pub fn tangent_e(v: CriticalValuePair, n: usize) -> Result<TangentFrame, BonesError> {
    let roles = Roles::of(v)?;
    let f = QuadraticMap::from_critical_values(v)?;
    let sys = |w: CriticalValuePair| residual_r1(w, n);
    let h = FD_STEP * v.v1.abs().max(v.v2.abs()).max(1.0);
    let grad = fd_gradient(&sys, &roles, v, h)?;
    let gnorm = grad[0].hypot(grad[1]);
    if gnorm < RANK_DROP_TOL {
        return Err(BonesError::RankDrop {
            gradient_norm: gnorm,
        });
    }
    let d1 = f.orbit_derivative(roles.essential_value(v), n - 1)?;
    if d1.abs() < VANISHING_DERIVATIVE_TOL {
        return Err(BonesError::VanishingDerivative { value: d1 });
    }
    let raw = [-d1 * grad[1], d1 * grad[0]];
    let norm = raw[0].hypot(raw[1]);
    let e_role = [raw[0] / norm, raw[1] / norm];
    let gradient_column = [grad[0] / d1, grad[1] / d1];
    debug_assert!(
        gradient_column[0] * e_role[1] - gradient_column[1] * e_role[0] > 0.0,
        "oriented frame must satisfy det(A | E) > 0"
    );
    let e = match roles.essential {
        CriticalPoint::MinusOne => e_role,
        CriticalPoint::PlusOne => [e_role[1], e_role[0]],
    };
    Ok(TangentFrame { e, gradient_column })
}

/// A rectangle in (v1, v2) space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VWindow {
    pub v1_min: f64,
    pub v1_max: f64,
    pub v2_min: f64,
    pub v2_max: f64,
}

impl VWindow {
    pub fn new(v1_min: f64, v1_max: f64, v2_min: f64, v2_max: f64) -> Self {
        assert!(v1_min < v1_max && v2_min < v2_max, "window must be ordered");
        Self {
            v1_min,
            v1_max,
            v2_min,
            v2_max,
        }
    }

    /// The scan window inside the unimodal component where the essential
    /// critical point is -1 and both boundary lines are reachable.
    pub fn default_unimodal() -> Self {
        Self::new(1.000001, 8.0, -0.999999, 0.999999)
    }

    /// A slightly inflated copy used as the tracing safety window.
    pub fn inflate(&self, pad: f64) -> Self {
        Self::new(
            self.v1_min - pad,
            self.v1_max + pad,
            self.v2_min - pad,
            self.v2_max + pad,
        )
    }

    pub fn contains(&self, v: CriticalValuePair) -> bool {
        v.v1 >= self.v1_min && v.v1 <= self.v1_max && v.v2 >= self.v2_min && v.v2 <= self.v2_max
    }
}

/// Continuation controls for the bone tracer.
#[derive(Debug, Clone, Copy)]
pub struct TraceOptions {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub step_budget: usize,
    /// Max angle change per accepted step, radians.
    pub max_turn: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            initial_step: 1e-3,
            min_step: 1e-5,
            max_step: 1e-2,
            step_budget: 100_000,
            max_turn: 0.2,
        }
    }
}

/// Why one end of a trace stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceStop {
    /// Left the admissible set (for bones: the unimodal region).
    Boundary,
    /// Hit the tracing window.
    Window,
    /// Ran out of step budget.
    Budget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Loop,
    Open,
}

/// Raw output of the generic curve tracer.
#[derive(Debug, Clone)]
pub struct CurveTrace {
    pub nodes: Vec<[f64; 2]>,
    pub kind: TraceKind,
    /// Stop reasons for the backward and forward ends (Open only).
    pub ends: [Option<TraceStop>; 2],
    pub arclength: f64,
    /// Largest tangent angle change over accepted steps.
    pub max_turn_seen: f64,
}

/// A zero-curve continuation problem: scalar residual, orientation scalar
/// (the curve is followed along orientation * (-dR/dy, dR/dx)), an
/// admissibility test and an optional per-node filter.
pub struct CurveProblem<'a> {
    pub residual: &'a dyn Fn([f64; 2]) -> Result<f64, BonesError>,
    pub orientation: &'a dyn Fn([f64; 2]) -> Result<f64, BonesError>,
    pub inside: &'a dyn Fn([f64; 2]) -> bool,
    pub node_ok: &'a dyn Fn([f64; 2]) -> bool,
    pub window: Option<VWindow>,
}

impl<'a> CurveProblem<'a> {
    fn tangent(&self, v: [f64; 2]) -> Result<[f64; 2], BonesError> {
        let h = FD_STEP * v[0].abs().max(v[1].abs()).max(1.0);
        let g = self.gradient(v, h)?;
        let gnorm = g[0].hypot(g[1]);
        if gnorm < RANK_DROP_TOL {
            return Err(BonesError::RankDrop {
                gradient_norm: gnorm,
            });
        }
        let d = (self.orientation)(v)?;
        let raw = [-d * g[1], d * g[0]];
        let norm = raw[0].hypot(raw[1]);
        // Catches a vanishing orientation scalar and NaN alike.
        if norm <= 0.0 || norm.is_nan() {
            return Err(BonesError::RankDrop {
                gradient_norm: norm,
            });
        }
        Ok([raw[0] / norm, raw[1] / norm])
    }

    fn gradient(&self, v: [f64; 2], h: f64) -> Result<[f64; 2], BonesError> {
        let r = &self.residual;
        Ok([
            (r([v[0] + h, v[1]])? - r([v[0] - h, v[1]])?) / (2.0 * h),
            (r([v[0], v[1] + h])? - r([v[0], v[1] - h])?) / (2.0 * h),
        ])
    }

    /// Newton projection onto { R = 0 } intersected with the hyperplane
    /// through `anchor` orthogonal to `dir`.
    fn correct(&self, start: [f64; 2], anchor: [f64; 2], dir: [f64; 2]) -> Option<[f64; 2]> {
        let mut w = start;
        for _ in 0..16 {
            let r = (self.residual)(w).ok()?;
            let c = (w[0] - anchor[0]) * dir[0] + (w[1] - anchor[1]) * dir[1];
            if r.abs() < CORRECTOR_TOL
                && c.abs() < CORRECTOR_TOL * (1.0 + anchor[0].abs() + anchor[1].abs())
            {
                return Some(w);
            }
            let h = FD_STEP * w[0].abs().max(w[1].abs()).max(1.0);
            let g = self.gradient(w, h).ok()?;
            let delta = solve2([[g[0], g[1]], [dir[0], dir[1]]], [-r, -c])?;
            w = [w[0] + delta[0], w[1] + delta[1]];
            if !w[0].is_finite() || !w[1].is_finite() {
                return None;
            }
        }
        let r = (self.residual)(w).ok()?;
        if r.abs() < BONE_SAMPLE_TOL {
            Some(w)
        } else {
            None
        }
    }

    fn in_window(&self, v: [f64; 2]) -> bool {
        match self.window {
            Some(w) => w.contains(CriticalValuePair::new(v[0], v[1])),
            None => true,
        }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Pseudo-arclength tracer: predictor along the oriented tangent, Newton
/// corrector in the orthogonal hyperplane, adaptive steps (halve on
/// failure, grow 1.3x after three straight successes). Traces forward
/// first; if the curve closes onto the seed it reports a loop, otherwise
/// it traces backward and stitches both halves.
pub fn trace_curve(
    problem: &CurveProblem,
    seed: [f64; 2],
    opts: &TraceOptions,
) -> Result<CurveTrace, BonesError> {
    let r0 = (problem.residual)(seed)?;
    let seed = if r0.abs() < CORRECTOR_TOL {
        seed
    } else {
        if r0.abs() > 1e-2 {
            return Err(BonesError::SeedOffCurve { residual: r0 });
        }
        // Project the seed onto the curve along its gradient.
        let h = FD_STEP * seed[0].abs().max(seed[1].abs()).max(1.0);
        let g = problem.gradient(seed, h)?;
        let gn2 = g[0] * g[0] + g[1] * g[1];
        let start = [seed[0] - r0 * g[0] / gn2, seed[1] - r0 * g[1] / gn2];
        problem
            .correct(start, seed, problem.tangent(seed)?)
            .ok_or(BonesError::SeedOffCurve { residual: r0 })?
    };
    let e_seed = problem.tangent(seed)?;

    let forward = trace_direction(problem, seed, e_seed, 1.0, opts, true)?;
    if forward.closed_loop {
        let mut nodes = forward.nodes;
        let arclength = forward.arclength;
        let max_turn_seen = forward.max_turn_seen;
        if let Some(closure) = forward.closure_node {
            nodes.push(closure);
        }
        return Ok(CurveTrace {
            nodes,
            kind: TraceKind::Loop,
            ends: [None, None],
            arclength,
            max_turn_seen,
        });
    }
    let backward = trace_direction(problem, seed, e_seed, -1.0, opts, false)?;

    let mut nodes: Vec<[f64; 2]> = backward.nodes.iter().rev().copied().collect();
    nodes.extend_from_slice(&forward.nodes[1..]);
    Ok(CurveTrace {
        nodes,
        kind: TraceKind::Open,
        ends: [backward.stop, forward.stop],
        arclength: forward.arclength + backward.arclength,
        max_turn_seen: forward.max_turn_seen.max(backward.max_turn_seen),
    })
}

struct DirectionTrace {
    nodes: Vec<[f64; 2]>,
    stop: Option<TraceStop>,
    arclength: f64,
    closed_loop: bool,
    closure_node: Option<[f64; 2]>,
    max_turn_seen: f64,
}

fn trace_direction(
    problem: &CurveProblem,
    seed: [f64; 2],
    e_seed: [f64; 2],
    dir: f64,
    opts: &TraceOptions,
    detect_loop: bool,
) -> Result<DirectionTrace, BonesError> {
    let mut nodes = vec![seed];
    let mut v = seed;
    let mut e_prev = e_seed;
    let mut step = opts.initial_step;
    let mut successes = 0usize;
    let mut arclength = 0.0;
    let mut max_turn_seen = 0.0f64;
    let loop_radius = 5.0 * opts.max_step;
    let loop_min_arclen = 10.0 * opts.max_step;
    let min_turn_dot = opts.max_turn.cos();

    while nodes.len() < opts.step_budget {
        let predictor = [v[0] + dir * step * e_prev[0], v[1] + dir * step * e_prev[1]];
        let corrected = problem.correct(predictor, predictor, e_prev);

        // Exit tests run on the corrected point before the tangent checks:
        // at a region boundary the orientation scalar degenerates (and the
        // oriented tangent may flip), so the march must terminate first.
        if let Some(w) = corrected {
            if !(problem.inside)(w) || !problem.in_window(w) {
                let (end, window_crossing) = refine_crossing(problem, v, e_prev, dir, step);
                if let Some(end_node) = end {
                    if end_node != v {
                        arclength += dist(v, end_node);
                        nodes.push(end_node);
                    }
                }
                let stop = if window_crossing || !problem.in_window(w) {
                    TraceStop::Window
                } else {
                    TraceStop::Boundary
                };
                return Ok(DirectionTrace {
                    nodes,
                    stop: Some(stop),
                    arclength,
                    closed_loop: false,
                    closure_node: None,
                    max_turn_seen,
                });
            }
        }

        let candidate = corrected.filter(|w| (problem.node_ok)(*w)).and_then(|w| {
            let e_new = problem.tangent(w).ok()?;
            let dot = e_new[0] * e_prev[0] + e_new[1] * e_prev[1];
            if dot < min_turn_dot {
                None
            } else {
                Some((w, e_new, dot))
            }
        });

        let (w, e_new, dot) = match candidate {
            Some(c) => c,
            None => {
                step *= 0.5;
                successes = 0;
                if step < opts.min_step {
                    return Err(BonesError::CorrectorStagnation { step });
                }
                continue;
            }
        };

        // Loop closure before committing the node: a positively oriented
        // crossing of the hyperplane through the seed, inside the seed's
        // vicinity, after enough arclength.
        if detect_loop && arclength + dist(v, w) > loop_min_arclen {
            let h_old = (v[0] - seed[0]) * e_seed[0] + (v[1] - seed[1]) * e_seed[1];
            let h_new = (w[0] - seed[0]) * e_seed[0] + (w[1] - seed[1]) * e_seed[1];
            let near = dist(v, seed) <= loop_radius && dist(w, seed) <= loop_radius;
            if near && h_old < 0.0 && h_new >= 0.0 {
                if let Some(closure) = problem.correct(w, seed, e_seed) {
                    if dist(closure, seed) < LOOP_POSITION_TOL {
                        let e_close = problem.tangent(closure)?;
                        let align = e_close[0] * e_seed[0] + e_close[1] * e_seed[1];
                        if align > LOOP_TANGENT_DOT {
                            arclength += dist(v, closure);
                            return Ok(DirectionTrace {
                                nodes,
                                stop: None,
                                arclength,
                                closed_loop: true,
                                closure_node: Some(closure),
                                max_turn_seen,
                            });
                        }
                    }
                }
            }
        }

        max_turn_seen = max_turn_seen.max(dot.clamp(-1.0, 1.0).acos());
        arclength += dist(v, w);
        nodes.push(w);
        v = w;
        e_prev = e_new;
        successes += 1;
        if successes >= 3 {
            step = (step * 1.3).min(opts.max_step);
            successes = 0;
        }
    }

    Ok(DirectionTrace {
        nodes,
        stop: Some(TraceStop::Budget),
        arclength,
        closed_loop: false,
        closure_node: None,
        max_turn_seen,
    })
}

/// Bisects the predictor step length until the corrected point straddles
/// the admissibility (or window) boundary within machine-level resolution.
/// Returns the last inside node and whether the blocking side was the
/// tracing window rather than the region boundary.
fn refine_crossing(
    problem: &CurveProblem,
    v: [f64; 2],
    e: [f64; 2],
    dir: f64,
    step: f64,
) -> (Option<[f64; 2]>, bool) {
    let mut lo = 0.0f64;
    let mut hi = step;
    let mut best_inside: Option<[f64; 2]> = None;
    let mut window_side = false;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let predictor = [v[0] + dir * mid * e[0], v[1] + dir * mid * e[1]];
        match problem.correct(predictor, predictor, e) {
            Some(w) => {
                let in_region = (problem.inside)(w);
                let in_window = problem.in_window(w);
                if in_region && in_window {
                    best_inside = Some(w);
                    lo = mid;
                } else {
                    window_side = !in_window;
                    hi = mid;
                }
            }
            None => {
                hi = mid;
            }
        }
        if hi - lo < 1e-14 * step.max(1e-12) {
            break;
        }
    }
    (best_inside, window_side)
}

/// Bone taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoneKind {
    Arc,
    Loop,
    Truncated,
}

/// Which boundary an arc endpoint landed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundarySide {
    /// sigma1 -> 2 (superattracting fixed point line).
    SigmaTwo,
    /// sigma1 -> -6 (critical value on the other critical point).
    SigmaMinusSix,
    /// Stopped at the tracing window, not a region boundary.
    WindowEdge,
}

/// A traced component of { R1(., n) = 0 }.
#[derive(Debug, Clone)]
pub struct Bone {
    pub n: usize,
    pub points: Vec<CriticalValuePair>,
    pub kind: BoneKind,
    pub endpoint_info: [Option<BoundarySide>; 2],
    pub arclength: f64,
    pub max_turn_seen: f64,
}

impl Bone {
    /// Minimum distance from a parameter to the traced polyline.
    pub fn distance_to(&self, v: CriticalValuePair) -> f64 {
        let p = [v.v1, v.v2];
        let mut best = f64::INFINITY;
        for w in self.points.windows(2) {
            let a = [w[0].v1, w[0].v2];
            let b = [w[1].v1, w[1].v2];
            best = best.min(point_segment_distance(p, a, b));
        }
        if self.points.len() == 1 {
            best = dist(p, [self.points[0].v1, self.points[0].v2]);
        }
        best
    }

    pub fn reaches(&self, side: BoundarySide) -> bool {
        self.endpoint_info.iter().flatten().any(|s| *s == side)
    }
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

/// Traces the bone of order n through `seed`. The trace stops when the
/// region classification changes (endpoint tagged by its sigma1 line),
/// when it leaves `window`, or on loop closure / budget exhaustion.
pub fn trace_bone(
    seed: CriticalValuePair,
    n: usize,
    window: &VWindow,
    opts: &TraceOptions,
) -> Result<Bone, BonesError> {
    // The essential role is frozen for residual evaluation (so the
    // corrector can work right across the region boundary); the stop test
    // re-identifies it at every node and halts when it changes.
    let essential = Roles::of(seed)?.essential;
    let residual =
        move |p: [f64; 2]| residual_r1_with_role(CriticalValuePair::new(p[0], p[1]), n, essential);
    let orientation = move |p: [f64; 2]| -> Result<f64, BonesError> {
        let v = CriticalValuePair::new(p[0], p[1]);
        let f = QuadraticMap::from_critical_values(v)?;
        Ok(f.orbit_derivative(v.at(essential), n - 1)?)
    };
    let inside = move |p: [f64; 2]| -> bool {
        let v = CriticalValuePair::new(p[0], p[1]);
        QuadraticMap::from_critical_values(v)
            .ok()
            .and_then(|f| f.classify().ok())
            .map(|c| c.tag == RegionTag::Unimodal && c.essential == Some(essential))
            .unwrap_or(false)
    };
    let node_ok = move |p: [f64; 2]| -> bool {
        // Reject nodes whose essential orbit returns early: guards against
        // sliding onto a lower-period component of the same zero locus.
        let v = CriticalValuePair::new(p[0], p[1]);
        let f = match QuadraticMap::from_critical_values(v) {
            Ok(f) => f,
            Err(_) => return false,
        };
        let c_e = essential.value();
        let mut x = v.at(essential);
        for _ in 1..n {
            if (x - c_e).abs() < MINIMALITY_TOL {
                return false;
            }
            x = match f.eval_checked(x, 0) {
                Ok(y) => y,
                Err(_) => return false,
            };
        }
        true
    };
    let problem = CurveProblem {
        residual: &residual,
        orientation: &orientation,
        inside: &inside,
        node_ok: &node_ok,
        window: Some(*window),
    };
    let trace = trace_curve(&problem, [seed.v1, seed.v2], opts)?;
    let points: Vec<CriticalValuePair> = trace
        .nodes
        .iter()
        .map(|p| CriticalValuePair::new(p[0], p[1]))
        .collect();
    let kind = match trace.kind {
        TraceKind::Loop => BoneKind::Loop,
        TraceKind::Open => {
            if trace.ends.iter().flatten().any(|s| *s == TraceStop::Budget) {
                BoneKind::Truncated
            } else {
                BoneKind::Arc
            }
        }
    };
    let endpoint_info = match kind {
        BoneKind::Loop => [None, None],
        _ => {
            let first = points.first().copied();
            let last = points.last().copied();
            [
                classify_endpoint(first, trace.ends[0]),
                classify_endpoint(last, trace.ends[1]),
            ]
        }
    };
    Ok(Bone {
        n,
        points,
        kind,
        endpoint_info,
        arclength: trace.arclength,
        max_turn_seen: trace.max_turn_seen,
    })
}

fn classify_endpoint(
    v: Option<CriticalValuePair>,
    stop: Option<TraceStop>,
) -> Option<BoundarySide> {
    match stop {
        Some(TraceStop::Window) => Some(BoundarySide::WindowEdge),
        Some(TraceStop::Boundary) => {
            let v = v?;
            let f = QuadraticMap::from_critical_values(v).ok()?;
            let sigma1 = f.sigma().sigma1;
            if (sigma1 - 2.0).abs() <= SIGMA_EDGE_TOL {
                Some(BoundarySide::SigmaTwo)
            } else if (sigma1 + 6.0).abs() <= SIGMA_EDGE_TOL {
                Some(BoundarySide::SigmaMinusSix)
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Coarse-grid sign-change scan for postcritically finite parameters with
/// relation orders n <= n_max, m <= m_max, followed by Newton polish, a
/// minimality filter and deterministic dedup (lexicographic by
/// (n, m, v1, v2)).
pub fn scan_pcf(
    window: &VWindow,
    n_max: usize,
    m_max: usize,
    resolution: (usize, usize),
) -> Vec<PCFPoint> {
    use rayon::prelude::*;

    let (nx, ny) = resolution;
    assert!(nx >= 2 && ny >= 2);
    let v1_at = |i: usize| window.v1_min + (window.v1_max - window.v1_min) * i as f64 / nx as f64;
    let v2_at = |j: usize| window.v2_min + (window.v2_max - window.v2_min) * j as f64 / ny as f64;

    // Residual tables per node: r1[n-1], r2[m-1]; None where undefined.
    let nodes: Vec<Option<(Vec<f64>, Vec<f64>)>> = (0..(nx + 1) * (ny + 1))
        .into_par_iter()
        .map(|idx| {
            let i = idx % (nx + 1);
            let j = idx / (nx + 1);
            let v = CriticalValuePair::new(v1_at(i), v2_at(j));
            let roles = Roles::of(v).ok()?;
            let f = QuadraticMap::from_critical_values(v).ok()?;
            let c_e = roles.essential.value();
            let orbit_res = |start: f64, len: usize| -> Vec<f64> {
                let mut out = Vec::with_capacity(len);
                let mut x = start;
                out.push(x - c_e);
                for _ in 1..len {
                    match f.eval_checked(x, 0) {
                        Ok(y) => {
                            x = y;
                            out.push(x - c_e);
                        }
                        Err(_) => {
                            out.push(f64::NAN);
                        }
                    }
                }
                out
            };
            Some((
                orbit_res(roles.essential_value(v), n_max),
                orbit_res(roles.trivial_value(v), m_max),
            ))
        })
        .collect();

    const BLOWUP: f64 = 1e6;
    let value = |table: &Option<(Vec<f64>, Vec<f64>)>, which: usize, k: usize| -> Option<f64> {
        let t = table.as_ref()?;
        let arr = if which == 0 { &t.0 } else { &t.1 };
        let v = *arr.get(k)?;
        if v.is_finite() && v.abs() < BLOWUP {
            Some(v)
        } else {
            None
        }
    };

    let mut found: Vec<PCFPoint> = Vec::new();
    for n in 1..=n_max {
        for m in 1..=m_max {
            for j in 0..ny {
                for i in 0..nx {
                    let idx = |di: usize, dj: usize| (j + dj) * (nx + 1) + i + di;
                    let corners = [idx(0, 0), idx(1, 0), idx(0, 1), idx(1, 1)];
                    let mut r1 = [0.0; 4];
                    let mut r2 = [0.0; 4];
                    let mut ok = true;
                    for (k, &c) in corners.iter().enumerate() {
                        match (value(&nodes[c], 0, n - 1), value(&nodes[c], 1, m - 1)) {
                            (Some(a), Some(b)) => {
                                r1[k] = a;
                                r2[k] = b;
                            }
                            _ => {
                                ok = false;
                                break;
                            }
                        }
                    }
                    if !ok {
                        continue;
                    }
                    let sign_change = |r: &[f64; 4]| {
                        let min = r.iter().fold(f64::INFINITY, |a, b| a.min(*b));
                        let max = r.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
                        min <= 0.0 && max >= 0.0
                    };
                    if !sign_change(&r1) || !sign_change(&r2) {
                        continue;
                    }
                    let center = CriticalValuePair::new(
                        0.5 * (v1_at(i) + v1_at(i + 1)),
                        0.5 * (v2_at(j) + v2_at(j + 1)),
                    );
                    if let Ok(p) = newton_pcf(center, n, m) {
                        if window.contains(p.v) {
                            found.push(p);
                        }
                    }
                }
            }
        }
    }

    found.sort_by(|a, b| {
        (a.n, a.m)
            .cmp(&(b.n, b.m))
            .then(a.v.v1.total_cmp(&b.v.v1))
            .then(a.v.v2.total_cmp(&b.v.v2))
    });
    found.dedup_by(|b, a| {
        a.n == b.n
            && a.m == b.m
            && (a.v.v1 - b.v.v1).abs() <= DEDUP_TOL
            && (a.v.v2 - b.v.v2).abs() <= DEDUP_TOL
    });
    found
}

/// Seeds and traces every order-n bone meeting the window: seeds come from
/// located PCF points plus raw R1 sign changes along grid lines, then get
/// deduplicated against already-traced polylines.
pub fn bones_for_period(
    window: &VWindow,
    n: usize,
    m_max: usize,
    resolution: (usize, usize),
    opts: &TraceOptions,
) -> Vec<Bone> {
    let mut seeds: Vec<CriticalValuePair> = scan_pcf(window, n, m_max, resolution)
        .into_iter()
        .filter(|p| p.n == n)
        .map(|p| p.v)
        .collect();

    // Raw R1 sign changes along horizontal grid lines, refined by
    // bisection in v1; catches bones carrying no scanned PCF point.
    let (nx, ny) = resolution;
    for j in 0..=ny {
        let v2 = window.v2_min + (window.v2_max - window.v2_min) * j as f64 / ny as f64;
        let mut prev: Option<(f64, f64)> = None;
        for i in 0..=nx {
            let v1 = window.v1_min + (window.v1_max - window.v1_min) * i as f64 / nx as f64;
            let r = residual_r1(CriticalValuePair::new(v1, v2), n)
                .ok()
                .filter(|r| r.is_finite() && r.abs() < 1e6);
            if let (Some((pv1, pr)), Some(r)) = (prev, r) {
                if pr * r < 0.0 {
                    if let Some(root) = bisect_r1(pv1, v1, v2, n) {
                        seeds.push(CriticalValuePair::new(root, v2));
                    }
                }
            }
            prev = r.map(|r| (v1, r));
        }
    }

    seeds.sort_by(|a, b| a.v1.total_cmp(&b.v1).then(a.v2.total_cmp(&b.v2)));
    let trace_window = window.inflate(window.v1_max.abs().max(1.0) * 0.5);
    let mut bones: Vec<Bone> = Vec::new();
    for seed in seeds {
        if bones.iter().any(|b| b.distance_to(seed) < 1e-3) {
            continue;
        }
        // Seeds on lower-period sub-loci are rejected by the tracer's
        // minimality guard;, skip them here.
        if !minimal_period_is(seed, n) {
            continue;
        }
        if let Ok(bone) = trace_bone(seed, n, &trace_window, opts) {
            bones.push(bone);
        }
    }
    bones
}

fn minimal_period_is(v: CriticalValuePair, n: usize) -> bool {
    for k in 1..n {
        if let Ok(r) = residual_r1(v, k) {
            if r.abs() < MINIMALITY_TOL {
                return false;
            }
        }
    }
    true
}

fn bisect_r1(mut lo: f64, mut hi: f64, v2: f64, n: usize) -> Option<f64> {
    let eval = |v1: f64| residual_r1(CriticalValuePair::new(v1, v2), n).ok();
    let mut rlo = eval(lo)?;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let rm = eval(mid)?;
        if rm == 0.0 || hi - lo < 1e-13 * lo.abs().max(1.0) {
            return Some(mid);
        }
        if rlo * rm < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            rlo = rm;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Report of the positive-direction check at a PCF point on a bone.
#[derive(Debug, Clone)]
pub struct DirectionReport {
    /// grad_E R2 / (f^(m-1))'(v_triv); positive under transversality.
    pub normalized_derivative: f64,
    /// Raw directional derivative grad_E R2.
    pub raw_derivative: f64,
    /// (f^(m-1))'(v_triv) and its sign.
    pub trivial_orbit_derivative: f64,
    pub positive: bool,
    /// Sign agreement with the transversality quotient.
    pub agrees_with_quotient: bool,
    /// Chart in which the residuals were computed.
    pub chart: &'static str,
}

/// Directional derivative of R2 along the positive tangent at a PCF point
/// on a traced bone, normalized by the trivial orbit derivative.
pub fn check_positive_direction(
    point: &PCFPoint,
    bone: &Bone,
) -> Result<DirectionReport, BonesError> {
    let d = bone.distance_to(point.v);
    if d > 1e-4 {
        return Err(BonesError::PointNotOnBone { distance: d });
    }
    let frame = tangent_e(point.v, point.n)?;
    let h = FD_STEP * point.v.v1.abs().max(point.v.v2.abs()).max(1.0);
    let vp = CriticalValuePair::new(point.v.v1 + h * frame.e[0], point.v.v2 + h * frame.e[1]);
    let vm = CriticalValuePair::new(point.v.v1 - h * frame.e[0], point.v.v2 - h * frame.e[1]);
    let raw = (residual_r2(vp, point.m)? - residual_r2(vm, point.m)?) / (2.0 * h);
    let roles = Roles::of(point.v)?;
    let f = QuadraticMap::from_critical_values(point.v)?;
    let d2 = f.orbit_derivative(roles.trivial_value(point.v), point.m - 1)?;
    if d2.abs() < VANISHING_DERIVATIVE_TOL {
        return Err(BonesError::VanishingDerivative { value: d2 });
    }
    let normalized = raw / d2;
    Ok(DirectionReport {
        normalized_derivative: normalized,
        raw_derivative: raw,
        trivial_orbit_derivative: d2,
        positive: normalized > 0.0,
        agrees_with_quotient: (normalized > 0.0) == (point.quotient > 0.0),
        chart: "a(z+1/z)+b with critical points -1, +1",
    })
}
