//! The normalized family of real quadratic rational maps
//!
//! ```text
//! f(z) = a(z + 1/z) + b,   a != 0,
//! ```
//!
//! whose critical points sit at the constants -1 and +1 for every
//! parameter. The family is coordinatized by its critical values
//! (v1, v2) = (f(-1), f(+1)) = (-2a + b, 2a + b), inverted by
//! a = (v2 - v1)/4, b = (v1 + v2)/2.
//!
//! Geometry worth keeping in mind: on the real circle, z + 1/z omits
//! (-2, 2), so the image f(R-hat) is the circle arc *through infinity*
//! bounded by the critical values. The finite interval between v1 and v2
//! is the complementary gap. A critical point lies on the image arc
//! exactly when it lies outside that closed gap, which is how the region
//! classifier below decides monotone / unimodal / bimodal restrictions.
//! Interval-map work (entropy, kneading) happens in a Moebius chart that
//! sends a gap point to infinity, making the image a finite interval.

use num_complex::Complex64;
use thiserror::Error;

use crate::num::{complex_cubic_roots, complex_quadratic_roots};

/// Absolute tolerance for the region classifier's boundary flag.
pub const BOUNDARY_TOL: f64 = 1e-10;
/// Orbit points closer than this to the pole z = 0 abort affine iteration.
pub const POLE_TOL: f64 = 1e-9;
/// Multipliers closer than this to 1 make the fixed point formula ill-posed.
pub const PARABOLIC_DELTA: f64 = 1e-6;
/// Largest tolerated imaginary residue when symmetrizing multipliers.
const IMAG_RESIDUE_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum FamilyError {
    #[error("degenerate parameter: critical values coincide at {v}")]
    DegenerateParameter { v: f64 },
    #[error("coefficient a = {a} must be finite and nonzero")]
    InvalidCoefficient { a: f64 },
    #[error("orbit point {x} within {tol} of the pole z = 0 at step {step}")]
    PoleEncounter { x: f64, step: usize, tol: f64 },
    #[error("multiplier within {delta} of 1: near-parabolic fixed point")]
    NearParabolic { delta: f64 },
    #[error("critical point {critical_point} within {tol} of image-interval endpoint")]
    BoundaryAmbiguous { critical_point: f64, tol: f64 },
    #[error("Moebius frame requires three pairwise distinct points")]
    CoincidentPoints,
    #[error("homogeneous coordinates (0, 0) do not describe a circle point")]
    ZeroVector,
    #[error("singular matrix does not act on the circle")]
    SingularMatrix,
    #[error("(mu, t) = ({mu}, {t}) outside the admissible strip")]
    InadmissibleParams { mu: f64, t: f64 },
}

/// One of the two critical points, fixed at -1 and +1 in this chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticalPoint {
    MinusOne,
    PlusOne,
}

impl CriticalPoint {
    pub fn value(self) -> f64 {
        match self {
            CriticalPoint::MinusOne => -1.0,
            CriticalPoint::PlusOne => 1.0,
        }
    }

    pub fn other(self) -> CriticalPoint {
        match self {
            CriticalPoint::MinusOne => CriticalPoint::PlusOne,
            CriticalPoint::PlusOne => CriticalPoint::MinusOne,
        }
    }
}

/// Critical-value coordinates of a map in the family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalValuePair {
    pub v1: f64,
    pub v2: f64,
}

impl CriticalValuePair {
    pub fn new(v1: f64, v2: f64) -> Self {
        Self { v1, v2 }
    }

    /// Value at the given critical point.
    pub fn at(&self, c: CriticalPoint) -> f64 {
        match c {
            CriticalPoint::MinusOne => self.v1,
            CriticalPoint::PlusOne => self.v2,
        }
    }

    /// Endpoints of the finite interval bounded by the critical values.
    pub fn gap(&self) -> (f64, f64) {
        if self.v1 <= self.v2 {
            (self.v1, self.v2)
        } else {
            (self.v2, self.v1)
        }
    }
}

/// z -> a(z + 1/z) + b with critical points at -1 and +1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticMap {
    a: f64,
    b: f64,
}

impl QuadraticMap {
    pub fn new(a: f64, b: f64) -> Result<Self, FamilyError> {
        if a == 0.0 || !a.is_finite() || !b.is_finite() {
            return Err(FamilyError::InvalidCoefficient { a });
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Inverts (v1, v2) = (-2a + b, 2a + b).
    pub fn from_critical_values(v: CriticalValuePair) -> Result<Self, FamilyError> {
        let a = (v.v2 - v.v1) / 4.0;
        let b = (v.v1 + v.v2) / 2.0;
        if a == 0.0 {
            return Err(FamilyError::DegenerateParameter { v: v.v1 });
        }
        Self::new(a, b)
    }

    pub fn critical_values(&self) -> CriticalValuePair {
        CriticalValuePair::new(-2.0 * self.a + self.b, 2.0 * self.a + self.b)
    }

    /// Raw affine evaluation; the pole at 0 produces an infinity.
    pub fn eval(&self, x: f64) -> f64 {
        self.a * (x + 1.0 / x) + self.b
    }

    /// Affine evaluation with a pole guard, for orbit iteration.
    pub fn eval_checked(&self, x: f64, step: usize) -> Result<f64, FamilyError> {
        if x.abs() < POLE_TOL || !x.is_finite() {
            return Err(FamilyError::PoleEncounter {
                x,
                step,
                tol: POLE_TOL,
            });
        }
        Ok(self.eval(x))
    }

    /// f'(z) = a(1 - 1/z^2).
    pub fn derivative(&self, x: f64) -> f64 {
        self.a * (1.0 - 1.0 / (x * x))
    }

    fn derivative_complex(&self, z: Complex64) -> Complex64 {
        Complex64::new(self.a, 0.0) * (Complex64::new(1.0, 0.0) - (z * z).inv())
    }

    /// The orbit x, f(x), ..., f^k(x) (k + 1 entries), affine chart.
    pub fn orbit(&self, x: f64, k: usize) -> Result<Vec<f64>, FamilyError> {
        let mut out = Vec::with_capacity(k + 1);
        let mut cur = x;
        out.push(cur);
        for step in 0..k {
            cur = self.eval_checked(cur, step)?;
            out.push(cur);
        }
        Ok(out)
    }

    /// Chain-rule product (f^k)'(x) = prod_{i<k} f'(f^i(x)); k = 0 gives 1.
    pub fn orbit_derivative(&self, x: f64, k: usize) -> Result<f64, FamilyError> {
        let mut prod = 1.0;
        let mut cur = x;
        for step in 0..k {
            if cur.abs() < POLE_TOL || !cur.is_finite() {
                return Err(FamilyError::PoleEncounter {
                    x: cur,
                    step,
                    tol: POLE_TOL,
                });
            }
            prod *= self.derivative(cur);
            cur = self.eval(cur);
        }
        Ok(prod)
    }

    /// Total evaluation on the circle: [p : q] -> [a p^2 + b p q + a q^2 : p q].
    pub fn eval_circle(&self, z: &CirclePoint) -> CirclePoint {
        let (p, q) = (z.p, z.q);
        CirclePoint::normalized(self.a * p * p + self.b * p * q + self.a * q * q, p * q)
    }

    /// The three fixed points with multipliers.
    ///
    /// Infinity is always fixed with multiplier 1/a; the finite fixed points
    /// solve (a - 1) z^2 + b z + a = 0. When a = 1 the quadratic degenerates:
    /// infinity absorbs a second fixed point (multiplier 1 twice) and the
    /// lone finite one sits at -1/b (for b = 0 all three merge at infinity).
    pub fn fixed_points(&self) -> Vec<(FixedPointLocation, Complex64)> {
        let mut out = Vec::with_capacity(3);
        if (self.a - 1.0).abs() < 1e-14 {
            out.push((FixedPointLocation::Infinity, Complex64::new(1.0, 0.0)));
            out.push((FixedPointLocation::Infinity, Complex64::new(1.0, 0.0)));
            if self.b.abs() < 1e-14 {
                out[1].1 = Complex64::new(1.0, 0.0);
                out.push((FixedPointLocation::Infinity, Complex64::new(1.0, 0.0)));
            } else {
                let z = Complex64::new(-1.0 / self.b, 0.0);
                out.push((FixedPointLocation::Finite(z), self.derivative_complex(z)));
            }
            return out;
        }
        out.push((
            FixedPointLocation::Infinity,
            Complex64::new(1.0 / self.a, 0.0),
        ));
        let roots = complex_quadratic_roots(self.a - 1.0, self.b, self.a);
        for z in roots {
            out.push((FixedPointLocation::Finite(z), self.derivative_complex(z)));
        }
        out
    }

    /// |sum_i 1/(1 - mu_i) - 1|, which vanishes for every quadratic rational
    /// map; errors out when some multiplier is delta-close to 1.
    pub fn fixed_point_formula_residual(&self) -> Result<f64, FamilyError> {
        let fixed = self.fixed_points();
        let one = Complex64::new(1.0, 0.0);
        let mut sum = Complex64::new(0.0, 0.0);
        for (_, mu) in &fixed {
            if (mu - one).norm() <= PARABOLIC_DELTA {
                return Err(FamilyError::NearParabolic {
                    delta: PARABOLIC_DELTA,
                });
            }
            sum += (one - mu).inv();
        }
        Ok((sum - one).norm())
    }

    /// Symmetric functions (mu1+mu2+mu3, mu1 mu2+mu2 mu3+mu3 mu1) of the
    /// fixed-point multipliers: coordinates on the moduli space.
    pub fn sigma(&self) -> SigmaPoint {
        let fixed = self.fixed_points();
        let m: Vec<Complex64> = fixed.iter().map(|(_, mu)| *mu).collect();
        SigmaPoint::from_multipliers(&m)
    }

    /// True when b <= 0; such maps sit on the side of the family adjacent
    /// to the symmetry locus a(z + 1/z), where the critical-value chart
    /// stops being injective on conjugacy classes.
    pub fn symmetry_locus_adjacent(&self) -> bool {
        self.b <= 0.0
    }

    /// Region classification of the restriction to the circle.
    ///
    /// The image arc is the complement of the open gap between the critical
    /// values, so a critical point acts on the restricted interval map
    /// exactly when it lies outside the closed gap.
    pub fn classify(&self) -> Result<RegionClass, FamilyError> {
        let v = self.critical_values();
        let (lo, hi) = v.gap();
        for c in [CriticalPoint::MinusOne, CriticalPoint::PlusOne] {
            let x = c.value();
            if (x - lo).abs() < BOUNDARY_TOL || (x - hi).abs() < BOUNDARY_TOL {
                return Err(FamilyError::BoundaryAmbiguous {
                    critical_point: x,
                    tol: BOUNDARY_TOL,
                });
            }
        }
        let in_gap = |c: CriticalPoint| {
            let x = c.value();
            lo < x && x < hi
        };
        let minus_in = in_gap(CriticalPoint::MinusOne);
        let plus_in = in_gap(CriticalPoint::PlusOne);
        let (tag, essential) = match (minus_in, plus_in) {
            // Both critical points inside the gap: none on the image arc,
            // the restriction is monotone.
            (true, true) => (RegionTag::Monotonic, None),
            (false, true) => (RegionTag::Unimodal, Some(CriticalPoint::MinusOne)),
            (true, false) => (RegionTag::Unimodal, Some(CriticalPoint::PlusOne)),
            // Neither inside: both fold the restricted interval map.
            (false, false) => (self.bimodal_shape(lo, hi), None),
        };
        Ok(RegionClass {
            tag,
            essential,
            image_interval: (lo, hi),
        })
    }

    /// Distinguishes the two bimodal shapes by the slope of the first
    /// monotone branch of the restriction, computed in a finite chart.
    fn bimodal_shape(&self, lo: f64, hi: f64) -> RegionTag {
        let chart = self.charted_restriction(0.5 * (lo + hi));
        let turning = chart.turning_points();
        let left_edge = chart.domain().0;
        let first_turn = turning.first().copied().unwrap_or(chart.domain().1);
        let mid = 0.5 * (left_edge + first_turn);
        let h = 1e-7 * (chart.domain().1 - chart.domain().0);
        let slope = chart.map().eval(mid + h) - chart.map().eval(mid - h);
        if slope >= 0.0 {
            RegionTag::BimodalPlusMinusPlus
        } else {
            RegionTag::BimodalMinusPlusMinus
        }
    }

    /// Conjugates by phi(z) = 1/(z - s) where s lies in the gap between the
    /// critical values, so the image arc becomes a finite interval and the
    /// restriction an honest interval map with no pole in its domain.
    pub fn charted_restriction(&self, s: f64) -> ChartedRestriction {
        let (a, b) = (self.a, self.b);
        let num = [0.0, 1.0, s];
        let den = [a, 2.0 * a * s + b - s, a * (1.0 + s * s) + s * (b - s)];
        let v = self.critical_values();
        let w1 = 1.0 / (v.v1 - s);
        let w2 = 1.0 / (v.v2 - s);
        let (lo, hi) = if w1 <= w2 { (w1, w2) } else { (w2, w1) };
        let mut turning = Vec::new();
        for c in [-1.0f64, 1.0] {
            if !(self.critical_values().gap().0 < c && c < self.critical_values().gap().1) {
                let w = 1.0 / (c - s);
                if lo < w && w < hi {
                    turning.push(w);
                }
            }
        }
        turning.sort_by(f64::total_cmp);
        ChartedRestriction {
            map: crate::entropy::RationalQuadratic::new(num, den),
            domain: (lo, hi),
            turning,
            pole_target: s,
        }
    }

    /// The restriction of a unimodal map to its image, as a finite-interval
    /// system: the chart sends the trivial critical point to infinity.
    pub fn unimodal_restriction(&self) -> Result<ChartedRestriction, FamilyError> {
        let class = self.classify()?;
        let essential = match (class.tag, class.essential) {
            (RegionTag::Unimodal, Some(c)) => c,
            _ => {
                return Err(FamilyError::BoundaryAmbiguous {
                    critical_point: f64::NAN,
                    tol: BOUNDARY_TOL,
                })
            }
        };
        Ok(self.charted_restriction(essential.other().value()))
    }

    /// The map as a pair of homogeneous quadratic forms on the circle.
    pub fn to_sphere_map(&self) -> RationalSphereMap {
        RationalSphereMap {
            f1: QuadForm {
                pp: self.a,
                pq: self.b,
                qq: self.a,
            },
            f2: QuadForm {
                pp: 0.0,
                pq: 1.0,
                qq: 0.0,
            },
        }
    }

    /// Conjugate by a real Moebius frame; the result is a general quadratic
    /// rational map on the circle (generally outside this normalized family).
    pub fn conjugate(&self, frame: &MobiusFrame) -> RationalSphereMap {
        self.to_sphere_map().conjugate(frame)
    }
}

/// Where a fixed point lives on the sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FixedPointLocation {
    Infinity,
    Finite(Complex64),
}

/// Moduli-space coordinates built from the fixed-point multipliers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaPoint {
    pub sigma1: f64,
    pub sigma2: f64,
}

impl SigmaPoint {
    /// Symmetrizes a multiplier triple. The imaginary parts must cancel
    /// (conjugate-symmetric input); a residue above 1e-9 is a bug, not data.
    pub fn from_multipliers(m: &[Complex64]) -> SigmaPoint {
        assert_eq!(
            m.len(),
            3,
            "a quadratic rational map has three fixed points"
        );
        let s1 = m[0] + m[1] + m[2];
        let s2 = m[0] * m[1] + m[1] * m[2] + m[2] * m[0];
        let scale = 1.0 + s1.norm().max(s2.norm());
        assert!(
            s1.im.abs() <= IMAG_RESIDUE_TOL * scale && s2.im.abs() <= IMAG_RESIDUE_TOL * scale,
            "imaginary residue in symmetric functions: {} {}",
            s1.im,
            s2.im
        );
        SigmaPoint {
            sigma1: s1.re,
            sigma2: s2.re,
        }
    }
}

/// Region tags for the restriction of a family map to its image arc.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionTag {
    Monotonic,
    Unimodal,
    BimodalPlusMinusPlus,
    BimodalMinusPlusMinus,
}

/// Output of the region classifier.
///
/// `image_interval` stores the finite closed interval bounded by the two
/// critical values; the circle image of the map is the complementary arc
/// through infinity, whose endpoints are the same two values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionClass {
    pub tag: RegionTag,
    pub essential: Option<CriticalPoint>,
    pub image_interval: (f64, f64),
}

impl RegionClass {
    pub fn is_unimodal(&self) -> bool {
        self.tag == RegionTag::Unimodal
    }
}

/// A unimodal (or bimodal) restriction rendered as an interval self-map in
/// a chart where the image is finite. `pole_target` is the gap point sent
/// to infinity.
#[derive(Debug, Clone)]
pub struct ChartedRestriction {
    map: crate::entropy::RationalQuadratic,
    domain: (f64, f64),
    turning: Vec<f64>,
    pole_target: f64,
}

impl ChartedRestriction {
    pub fn map(&self) -> &crate::entropy::RationalQuadratic {
        &self.map
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn turning_points(&self) -> &[f64] {
        self.turning.as_slice()
    }

    pub fn pole_target(&self) -> f64 {
        self.pole_target
    }

    /// Chart coordinate of a circle point z.
    pub fn to_chart(&self, z: f64) -> f64 {
        1.0 / (z - self.pole_target)
    }

    /// Circle coordinate of a chart point w.
    pub fn from_chart(&self, w: f64) -> f64 {
        self.pole_target + 1.0 / w
    }

    pub fn interval_model(&self) -> crate::entropy::IntervalModel {
        crate::entropy::IntervalModel::from_rational(
            self.domain,
            self.map.clone(),
            self.turning.clone(),
        )
    }
}

/// A point of the real circle in homogeneous coordinates [p : q],
/// normalized to p^2 + q^2 = 1 with the first nonzero coordinate positive.
#[derive(Debug, Clone, Copy)]
pub struct CirclePoint {
    p: f64,
    q: f64,
}

impl CirclePoint {
    pub fn new(p: f64, q: f64) -> Result<Self, FamilyError> {
        if p == 0.0 && q == 0.0 || !p.is_finite() || !q.is_finite() {
            return Err(FamilyError::ZeroVector);
        }
        Ok(Self::normalized(p, q))
    }

    fn normalized(p: f64, q: f64) -> Self {
        let n = p.hypot(q);
        let (mut p, mut q) = (p / n, q / n);
        let lead = if p != 0.0 { p } else { q };
        if lead < 0.0 {
            p = -p;
            q = -q;
        }
        // Normalize the sign of a zero so identical points compare equal.
        if p == 0.0 {
            p = 0.0;
        }
        if q == 0.0 {
            q = 0.0;
        }
        Self { p, q }
    }

    pub fn from_affine(x: f64) -> Self {
        Self::normalized(x, 1.0)
    }

    pub fn infinity() -> Self {
        Self { p: 1.0, q: 0.0 }
    }

    pub fn is_infinity(&self) -> bool {
        self.q == 0.0
    }

    /// Affine value, `None` at infinity.
    pub fn value(&self) -> Option<f64> {
        if self.is_infinity() {
            None
        } else {
            Some(self.p / self.q)
        }
    }

    pub fn homogeneous(&self) -> (f64, f64) {
        (self.p, self.q)
    }

    /// Projective distance |p1 q2 - p2 q1| between unit representatives.
    pub fn distance(&self, other: &CirclePoint) -> f64 {
        (self.p * other.q - other.p * self.q).abs()
    }

    pub fn approx_eq(&self, other: &CirclePoint, tol: f64) -> bool {
        self.distance(other) <= tol
    }
}

/// A real Moebius transformation acting on the circle by its 2x2 matrix.
#[derive(Debug, Clone, Copy)]
pub struct MobiusFrame {
    m: [[f64; 2]; 2],
}

impl MobiusFrame {
    pub fn new(m: [[f64; 2]; 2]) -> Result<Self, FamilyError> {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(FamilyError::SingularMatrix);
        }
        Ok(Self { m })
    }

    pub fn identity() -> Self {
        Self {
            m: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        self.m
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    /// The unique frame sending (z1, z2, z3) to (1, 0, infinity).
    pub fn from_triple(z: [CirclePoint; 3]) -> Result<Self, FamilyError> {
        for i in 0..3 {
            for j in (i + 1)..3 {
                if z[i].distance(&z[j]) < 1e-12 {
                    return Err(FamilyError::CoincidentPoints);
                }
            }
        }
        let (p1, q1) = z[0].homogeneous();
        let (p2, q2) = z[1].homogeneous();
        let (p3, q3) = z[2].homogeneous();
        // Top row kills z2, bottom row kills z3; the scale on the top row
        // makes both rows agree at z1.
        let top_at_z1 = q2 * p1 - p2 * q1;
        let bot_at_z1 = q3 * p1 - p3 * q1;
        let m = [
            [bot_at_z1 * q2, -bot_at_z1 * p2],
            [top_at_z1 * q3, -top_at_z1 * p3],
        ];
        Self::new(m)
    }

    pub fn apply(&self, z: &CirclePoint) -> CirclePoint {
        let (p, q) = z.homogeneous();
        CirclePoint::normalized(
            self.m[0][0] * p + self.m[0][1] * q,
            self.m[1][0] * p + self.m[1][1] * q,
        )
    }

    /// Inverse up to scale (adjugate).
    pub fn inverse(&self) -> MobiusFrame {
        MobiusFrame {
            m: [[self.m[1][1], -self.m[0][1]], [-self.m[1][0], self.m[0][0]]],
        }
    }

    pub fn compose(&self, other: &MobiusFrame) -> MobiusFrame {
        let a = self.m;
        let b = other.m;
        MobiusFrame {
            m: [
                [
                    a[0][0] * b[0][0] + a[0][1] * b[1][0],
                    a[0][0] * b[0][1] + a[0][1] * b[1][1],
                ],
                [
                    a[1][0] * b[0][0] + a[1][1] * b[1][0],
                    a[1][0] * b[0][1] + a[1][1] * b[1][1],
                ],
            ],
        }
    }
}

/// A homogeneous quadratic form c_pp p^2 + c_pq p q + c_qq q^2.
#[derive(Debug, Clone, Copy)]
pub struct QuadForm {
    pub pp: f64,
    pub pq: f64,
    pub qq: f64,
}

impl QuadForm {
    fn eval(&self, p: f64, q: f64) -> f64 {
        self.pp * p * p + self.pq * p * q + self.qq * q * q
    }

    fn eval_c(&self, p: Complex64, q: Complex64) -> Complex64 {
        p * p * self.pp + p * q * self.pq + q * q * self.qq
    }

    /// Substitute (p, q) <- (m00 p + m01 q, m10 p + m11 q).
    fn substitute(&self, m: [[f64; 2]; 2]) -> QuadForm {
        let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
        QuadForm {
            pp: self.pp * a * a + self.pq * a * c + self.qq * c * c,
            pq: 2.0 * self.pp * a * b + self.pq * (a * d + b * c) + 2.0 * self.qq * c * d,
            qq: self.pp * b * b + self.pq * b * d + self.qq * d * d,
        }
    }
}

/// A degree-2 rational self-map of the circle as a pair of quadratic forms
/// [F1 : F2]; the general form produced by Moebius conjugation.
#[derive(Debug, Clone, Copy)]
pub struct RationalSphereMap {
    pub f1: QuadForm,
    pub f2: QuadForm,
}

impl RationalSphereMap {
    pub fn apply(&self, z: &CirclePoint) -> CirclePoint {
        let (p, q) = z.homogeneous();
        CirclePoint::normalized(self.f1.eval(p, q), self.f2.eval(p, q))
    }

    pub fn conjugate(&self, frame: &MobiusFrame) -> RationalSphereMap {
        let inv = frame.inverse().matrix();
        let g1 = self.f1.substitute(inv);
        let g2 = self.f2.substitute(inv);
        let m = frame.matrix();
        RationalSphereMap {
            f1: QuadForm {
                pp: m[0][0] * g1.pp + m[0][1] * g2.pp,
                pq: m[0][0] * g1.pq + m[0][1] * g2.pq,
                qq: m[0][0] * g1.qq + m[0][1] * g2.qq,
            },
            f2: QuadForm {
                pp: m[1][0] * g1.pp + m[1][1] * g2.pp,
                pq: m[1][0] * g1.pq + m[1][1] * g2.pq,
                qq: m[1][0] * g1.qq + m[1][1] * g2.qq,
            },
        }
    }

    #[cfg(test)]
    fn value_at(&self, z: Complex64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        self.f1.eval_c(z, one) / self.f2.eval_c(z, one)
    }

    /// Derivative of the affine representative F1(z,1)/F2(z,1).
    fn derivative_at(&self, z: Complex64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        let n = self.f1.eval_c(z, one);
        let d = self.f2.eval_c(z, one);
        let dn = z * 2.0 * self.f1.pp + self.f1.pq;
        let dd = z * 2.0 * self.f2.pp + self.f2.pq;
        (dn * d - n * dd) / (d * d)
    }

    /// Derivative in the chart w = 1/z of the conjugated map w -> 1/f(1/w),
    /// i.e. of F2(1,w)/F1(1,w).
    fn derivative_at_inverted(&self, w: Complex64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        let n = self.f2.eval_c(one, w);
        let d = self.f1.eval_c(one, w);
        let dn = w * 2.0 * self.f2.qq + self.f2.pq;
        let dd = w * 2.0 * self.f1.qq + self.f1.pq;
        (dn * d - n * dd) / (d * d)
    }

    /// Fixed-point multipliers via the homogeneous fixed-point cubic
    /// q F1(p,q) - p F2(p,q) = 0.
    pub fn multipliers(&self) -> Vec<Complex64> {
        let c3 = -self.f2.pp;
        let c2 = self.f1.pp - self.f2.pq;
        let c1 = self.f1.pq - self.f2.qq;
        let c0 = self.f1.qq;
        let scale = c3.abs().max(c2.abs()).max(c1.abs()).max(c0.abs());
        let mut mults = Vec::with_capacity(3);
        let finite_roots: Vec<Complex64> = if c3.abs() <= scale * 1e-13 {
            // Infinity is fixed; its multiplier in the w = 1/z chart.
            mults.push(self.derivative_at_inverted(Complex64::new(0.0, 0.0)));
            complex_quadratic_roots(c2, c1, c0).to_vec()
        } else {
            complex_cubic_roots(c3, c2, c1, c0).to_vec()
        };
        for z in finite_roots {
            if z.norm() <= 1.0 {
                mults.push(self.derivative_at(z));
            } else {
                mults.push(self.derivative_at_inverted(z.inv()));
            }
        }
        mults
    }

    pub fn sigma(&self) -> SigmaPoint {
        let mults = self.multipliers();
        SigmaPoint::from_multipliers(&mults)
    }

    #[cfg(test)]
    fn value_is_fixed(&self, z: Complex64) -> f64 {
        (self.value_at(z) - z).norm()
    }
}

/// Parameters (mu, t) of the unimodal normal form
///
/// ```text
/// x -> 2 mu x (t x + 2) / (mu^2 x^2 + (t x + 2)^2)  on [-1, 1].
/// ```
///
/// Admissibility: mu, t < 0, |mu - t| < 2 and mu + t <= -2. The first
/// diagonal bound keeps the turning point 2/(mu - t) outside [-1, 1]; the
/// second keeps -2/(mu + t) inside (the boundary mu + t = -2 parks it at
/// the right endpoint, a degenerate but well-defined self-map).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalFormParams {
    pub mu: f64,
    pub t: f64,
}

impl NormalFormParams {
    pub fn new(mu: f64, t: f64) -> Result<Self, FamilyError> {
        if Self::admissible(mu, t) {
            Ok(Self { mu, t })
        } else {
            Err(FamilyError::InadmissibleParams { mu, t })
        }
    }

    pub fn admissible(mu: f64, t: f64) -> bool {
        mu.is_finite()
            && t.is_finite()
            && mu < 0.0
            && t < 0.0
            && (mu - t).abs() < 2.0
            && mu + t <= -2.0
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (mu, t) = (self.mu, self.t);
        let u = t * x + 2.0;
        2.0 * mu * x * u / (mu * mu * x * x + u * u)
    }

    /// The map as a ratio of quadratics (coefficients in ascending order).
    pub fn rational(&self) -> crate::entropy::RationalQuadratic {
        let (mu, t) = (self.mu, self.t);
        crate::entropy::RationalQuadratic::new(
            [0.0, 4.0 * mu, 2.0 * mu * t],
            [4.0, 4.0 * t, mu * mu + t * t],
        )
    }

    /// Turning point inside [-1, 1] (the essential one, where the map
    /// attains -1). The other critical point 2/(mu - t) has value +1 and
    /// stays outside the interval for admissible parameters.
    pub fn essential_turning_point(&self) -> f64 {
        -2.0 / (self.mu + self.t)
    }

    /// Fixed points of the normal form as a degree-2 rational map: x = 0
    /// with multiplier mu, plus the roots of a real quadratic.
    pub fn multipliers(&self) -> Vec<Complex64> {
        let (mu, t) = (self.mu, self.t);
        let qa = mu * mu + t * t;
        let qb = 4.0 * t - 2.0 * mu * t;
        let qc = 4.0 - 4.0 * mu;
        let rational = self.rational();
        let mut mults = vec![Complex64::new(mu, 0.0)];
        for z in complex_quadratic_roots(qa, qb, qc) {
            mults.push(rational.derivative_complex(z));
        }
        mults
    }

    pub fn sigma(&self) -> SigmaPoint {
        SigmaPoint::from_multipliers(&self.multipliers())
    }

    /// Packages the normal form as an interval self-map of [-1, 1] with
    /// located turning point and moduli coordinates.
    pub fn to_system(&self) -> NormalFormSystem {
        NormalFormSystem {
            params: *self,
            sigma: self.sigma(),
        }
    }
}

/// The normal form as an interval dynamical system plus its projection to
/// moduli coordinates.
#[derive(Debug, Clone, Copy)]
pub struct NormalFormSystem {
    pub params: NormalFormParams,
    pub sigma: SigmaPoint,
}

impl NormalFormSystem {
    pub fn interval_model(&self) -> crate::entropy::IntervalModel {
        let c = self.params.essential_turning_point();
        let turning = if c < 1.0 - 1e-12 { vec![c] } else { Vec::new() };
        crate::entropy::IntervalModel::from_rational((-1.0, 1.0), self.params.rational(), turning)
    }

    /// The essential turning point lies in (0, 1]; classification is
    /// unimodal throughout the admissible strip.
    pub fn is_unimodal(&self) -> bool {
        let c = self.params.essential_turning_point();
        0.0 < c && c <= 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::SplitMix64;

    fn map(a: f64, b: f64) -> QuadraticMap {
        QuadraticMap::new(a, b).unwrap()
    }

    #[test]
    fn critical_value_chart_round_trips() {
        // (v1, v2) = (-1, 3) <-> (a, b) = (1, 1).
        let f = QuadraticMap::from_critical_values(CriticalValuePair::new(-1.0, 3.0)).unwrap();
        assert_eq!(f.a(), 1.0);
        assert_eq!(f.b(), 1.0);
        let v = map(1.0, 1.0).critical_values();
        assert_eq!((v.v1, v.v2), (-1.0, 3.0));
        let v = map(1.0, 0.0).critical_values();
        assert_eq!((v.v1, v.v2), (-2.0, 2.0));

        let back = QuadraticMap::from_critical_values(CriticalValuePair::new(-3.0, 1.0))
            .unwrap()
            .critical_values();
        assert_eq!((back.v1, back.v2), (-3.0, 1.0));
        let back = QuadraticMap::from_critical_values(CriticalValuePair::new(0.5, 4.5))
            .unwrap()
            .critical_values();
        assert!((back.v1 - 0.5).abs() < 1e-15 && (back.v2 - 4.5).abs() < 1e-15);

        let mut rng = SplitMix64::new(7);
        for _ in 0..1000 {
            let v1 = rng.range(-10.0, 10.0);
            let mut v2 = rng.range(-10.0, 10.0);
            if (v1 - v2).abs() < 1e-6 {
                v2 += 1.0;
            }
            let f = QuadraticMap::from_critical_values(CriticalValuePair::new(v1, v2)).unwrap();
            let back = f.critical_values();
            assert!((back.v1 - v1).abs() <= 1e-12 * v1.abs().max(1.0));
            assert!((back.v2 - v2).abs() <= 1e-12 * v2.abs().max(1.0));
            // f(-1) = v1 and f(+1) = v2 exactly by construction.
            assert!((f.eval(-1.0) - v1).abs() <= 1e-12 * v1.abs().max(1.0));
            assert!((f.eval(1.0) - v2).abs() <= 1e-12 * v2.abs().max(1.0));
        }
    }

    #[test]
    fn coincident_critical_values_are_rejected() {
        let err = QuadraticMap::from_critical_values(CriticalValuePair::new(2.0, 2.0));
        assert!(matches!(err, Err(FamilyError::DegenerateParameter { .. })));
    }

    #[test]
    fn critical_points_are_plus_minus_one() {
        let mut rng = SplitMix64::new(3);
        for _ in 0..100 {
            let f = map(rng.range(-3.0, 3.0).abs().max(0.01), rng.range(-3.0, 3.0));
            assert!(f.derivative(-1.0).abs() < 1e-14);
            assert!(f.derivative(1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn circle_evaluation_matches_affine_chart() {
        let f = map(1.0, 1.0);
        let y = f.eval_circle(&CirclePoint::from_affine(1.0));
        assert!((y.value().unwrap() - 3.0).abs() < 1e-14);
        assert!(f.eval_circle(&CirclePoint::from_affine(0.0)).is_infinity());
        assert!(f.eval_circle(&CirclePoint::infinity()).is_infinity());

        let mut rng = SplitMix64::new(11);
        for _ in 0..500 {
            let f = map(rng.range(0.05, 3.0), rng.range(-3.0, 3.0));
            let exp = rng.range(-6.0, 6.0);
            let x = rng.range(1.0, 10.0) * 10f64.powf(exp) * (rng.next_f64() - 0.5).signum();
            let y_proj = f.eval_circle(&CirclePoint::from_affine(x));
            let y_aff = f.eval(x);
            if let Some(y) = y_proj.value() {
                assert!(
                    (y - y_aff).abs() <= 1e-12 * y_aff.abs().max(1.0),
                    "chart mismatch at x = {x}: {y} vs {y_aff}"
                );
            }
        }
    }

    #[test]
    fn orbit_derivative_empty_product_and_direct_value() {
        let f = map(1.0, 1.0);
        assert_eq!(f.orbit_derivative(2.0, 0).unwrap(), 1.0);
        let d = f.orbit_derivative(2.0, 1).unwrap();
        assert!((d - 0.75).abs() < 1e-15);
    }

    #[test]
    fn orbit_derivative_matches_finite_difference_of_iterate() {
        let mut rng = SplitMix64::new(17);
        let mut checked = 0;
        while checked < 200 {
            let f = map(
                rng.range(0.1, 2.0) * (rng.next_f64() - 0.5).signum(),
                rng.range(-2.0, 2.0),
            );
            let x = rng.range(-4.0, 4.0);
            let k = 2 + (rng.next_u64() % 3) as usize;
            let h = 1e-6 * x.abs().max(1.0);
            let (d, fp, fm) = match (
                f.orbit_derivative(x, k),
                f.orbit(x + h, k),
                f.orbit(x - h, k),
            ) {
                (Ok(d), Ok(p), Ok(m)) => (d, p[k], m[k]),
                _ => continue,
            };
            let fd = (fp - fm) / (2.0 * h);
            // Skip ill-conditioned samples where the finite difference
            // itself is inaccurate (orbit near the pole or huge stretch).
            if d.abs() > 1e6 || !fd.is_finite() {
                continue;
            }
            checked += 1;
            assert!(
                (d - fd).abs() <= 1e-5 * d.abs().max(1.0),
                "k = {k}, x = {x}: chain rule {d} vs finite difference {fd}"
            );
        }
    }

    #[test]
    fn pole_orbit_is_an_error() {
        let f = map(1.0, 1.0);
        assert!(matches!(
            f.orbit(1e-12, 1),
            Err(FamilyError::PoleEncounter { .. })
        ));
    }

    #[test]
    fn fixed_points_generic_and_degenerate() {
        // (a, b) = (2, 1): infinity has multiplier 1/2 and the finite pair
        // solves z^2 + z + 2 = 0, a conjugate pair.
        let f = map(2.0, 1.0);
        let fixed = f.fixed_points();
        assert_eq!(fixed.len(), 3);
        assert!(matches!(fixed[0].0, FixedPointLocation::Infinity));
        assert!((fixed[0].1.re - 0.5).abs() < 1e-15 && fixed[0].1.im == 0.0);
        let (z1, m1) = match fixed[1] {
            (FixedPointLocation::Finite(z), m) => (z, m),
            _ => panic!("expected finite fixed point"),
        };
        let (z2, m2) = match fixed[2] {
            (FixedPointLocation::Finite(z), m) => (z, m),
            _ => panic!("expected finite fixed point"),
        };
        assert!((z1 - z2.conj()).norm() < 1e-12);
        assert!((m1 - m2.conj()).norm() < 1e-10);
        // Residual of the defining quadratic.
        for z in [z1, z2] {
            let r = (f.a - 1.0) * z * z + f.b * z + f.a;
            assert!(r.norm() < 1e-12);
        }

        // a = 1: infinity doubles up, single finite fixed point at -1/b.
        let f = map(1.0, 3.0);
        let fixed = f.fixed_points();
        let finite: Vec<_> = fixed
            .iter()
            .filter_map(|(loc, m)| match loc {
                FixedPointLocation::Finite(z) => Some((*z, *m)),
                _ => None,
            })
            .collect();
        assert_eq!(finite.len(), 1);
        assert!((finite[0].0.re + 1.0 / 3.0).abs() < 1e-14);
        assert_eq!(
            fixed
                .iter()
                .filter(|(loc, _)| matches!(loc, FixedPointLocation::Infinity))
                .count(),
            2
        );
    }

    #[test]
    fn fixed_point_formula_holds_away_from_parabolics() {
        assert!(map(2.0, 1.0).fixed_point_formula_residual().unwrap() < 1e-9);
        assert!(map(0.3, 5.0).fixed_point_formula_residual().unwrap() < 1e-9);
        assert!(matches!(
            map(1.0, 3.0).fixed_point_formula_residual(),
            Err(FamilyError::NearParabolic { .. })
        ));
        let mut rng = SplitMix64::new(23);
        let mut n = 0;
        while n < 1000 {
            let a = rng.range(-4.0, 4.0);
            let b = rng.range(-6.0, 6.0);
            if a.abs() < 1e-3 {
                continue;
            }
            let f = match QuadraticMap::new(a, b) {
                Ok(f) => f,
                Err(_) => continue,
            };
            match f.fixed_point_formula_residual() {
                Ok(r) => {
                    n += 1;
                    assert!(r < 1e-9, "residual {r} at (a, b) = ({a}, {b})");
                }
                Err(FamilyError::NearParabolic { .. }) => continue,
                Err(e) => panic!("unexpected error {e}"),
            }
        }
    }

    #[test]
    fn sigma_has_frozen_value_at_reference_map() {
        // (a, b) = (2, 1): multipliers are 1/2 and (11 -+ i sqrt 7)/4, so
        // sigma1 = 1/2 + 11/2 = 6 and sigma2 = 8 + (1/2)(11/2) = 10.75.
        let s = map(2.0, 1.0).sigma();
        assert!((s.sigma1 - 6.0).abs() < 1e-10, "sigma1 = {}", s.sigma1);
        assert!((s.sigma2 - 10.75).abs() < 1e-10, "sigma2 = {}", s.sigma2);
    }

    #[test]
    fn sigma_agrees_with_general_sphere_map_route() {
        let mut rng = SplitMix64::new(31);
        for _ in 0..200 {
            let a = rng.range(0.1, 3.0) * (rng.next_f64() - 0.5).signum();
            let b = rng.range(-4.0, 4.0);
            let f = map(a, b);
            if (f.a - 1.0).abs() < 1e-3 {
                continue;
            }
            let s_direct = f.sigma();
            let s_general = f.to_sphere_map().sigma();
            assert!(
                (s_direct.sigma1 - s_general.sigma1).abs() < 1e-8 * (1.0 + s_direct.sigma1.abs()),
                "sigma1 routes disagree at (a,b)=({a},{b}): {} vs {}",
                s_direct.sigma1,
                s_general.sigma1
            );
            assert!(
                (s_direct.sigma2 - s_general.sigma2).abs() < 1e-7 * (1.0 + s_direct.sigma2.abs())
            );
        }
    }

    #[test]
    fn sigma_is_invariant_under_real_moebius_conjugation() {
        let mut rng = SplitMix64::new(37);
        let mut done = 0;
        while done < 100 {
            let a = rng.range(0.1, 2.5) * (rng.next_f64() - 0.5).signum();
            let b = rng.range(-3.0, 3.0);
            let f = map(a, b);
            let m = [
                [rng.range(-2.0, 2.0), rng.range(-2.0, 2.0)],
                [rng.range(-2.0, 2.0), rng.range(-2.0, 2.0)],
            ];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            if det.abs() < 0.1 {
                continue;
            }
            let frame = MobiusFrame::new(m).unwrap();
            let s0 = f.sigma();
            let s1 = f.conjugate(&frame).sigma();
            done += 1;
            assert!(
                (s0.sigma1 - s1.sigma1).abs() <= 1e-8 * (1.0 + s0.sigma1.abs()),
                "sigma1 not conjugation invariant: {} vs {}",
                s0.sigma1,
                s1.sigma1
            );
            assert!((s0.sigma2 - s1.sigma2).abs() <= 1e-7 * (1.0 + s0.sigma2.abs()));
        }
    }

    #[test]
    fn conjugated_map_fixes_images_of_fixed_points() {
        let f = map(2.0, 1.0);
        let frame = MobiusFrame::new([[1.0, 2.0], [0.5, 3.0]]).unwrap();
        let g = f.conjugate(&frame);
        // Infinity is fixed for f; its image under the frame is fixed for g.
        let img = frame.apply(&CirclePoint::infinity());
        let gi = g.apply(&img);
        assert!(gi.approx_eq(&img, 1e-12));
        // And the finite conjugate pair stays fixed (checked in C).
        let z = Complex64::new(-0.5, (7.0f64).sqrt() / 2.0);
        let mz = {
            let m = frame.matrix();
            (z * m[0][0] + m[0][1]) / (z * m[1][0] + m[1][1])
        };
        assert!(g.value_is_fixed(mz) < 1e-10);
    }

    #[test]
    fn classify_monotonic_unimodal_bimodal() {
        // Both critical values on one side of both critical points: the
        // image arc carries both folds.
        let f = map(0.1, 5.0); // v = (4.8, 5.2)
        let class = f.classify().unwrap();
        assert_eq!(class.image_interval, (4.8, 5.2));
        assert!(matches!(
            class.tag,
            RegionTag::BimodalPlusMinusPlus | RegionTag::BimodalMinusPlusMinus
        ));

        // Gap (-5, 5) swallows both critical points: monotone restriction.
        let f = map(2.5, 0.0);
        assert_eq!(f.classify().unwrap().tag, RegionTag::Monotonic);

        // Unimodal, essential critical point -1 (outside the gap).
        let f = QuadraticMap::from_critical_values(CriticalValuePair::new(0.5, 4.5)).unwrap();
        let class = f.classify().unwrap();
        assert_eq!(class.tag, RegionTag::Unimodal);
        assert_eq!(class.essential, Some(CriticalPoint::MinusOne));

        // Mirror component: essential +1.
        let f = QuadraticMap::from_critical_values(CriticalValuePair::new(-4.5, -0.5)).unwrap();
        let class = f.classify().unwrap();
        assert_eq!(class.tag, RegionTag::Unimodal);
        assert_eq!(class.essential, Some(CriticalPoint::PlusOne));

        // A critical point sitting on the gap boundary is ambiguous.
        let f = QuadraticMap::from_critical_values(CriticalValuePair::new(-1.0, 3.0)).unwrap();
        assert!(matches!(
            f.classify(),
            Err(FamilyError::BoundaryAmbiguous { .. })
        ));
    }

    #[test]
    fn unimodal_restriction_is_a_self_map_with_interior_turning_point() {
        let mut rng = SplitMix64::new(41);
        let mut done = 0;
        while done < 300 {
            // The component v1 in (1, inf), v2 in (-1, 1).
            let v1 = rng.range(1.001, 7.0);
            let v2 = rng.range(-0.999, 0.999);
            let f = QuadraticMap::from_critical_values(CriticalValuePair::new(v1, v2)).unwrap();
            let class = match f.classify() {
                Ok(c) => c,
                Err(_) => continue,
            };
            assert_eq!(class.tag, RegionTag::Unimodal, "at v = ({v1}, {v2})");
            let chart = f.unimodal_restriction().unwrap();
            let (lo, hi) = chart.domain();
            assert!(lo < hi);
            assert_eq!(chart.turning_points().len(), 1);
            let c = chart.turning_points()[0];
            assert!(lo < c && c < hi);
            done += 1;
            // Sample the evaluator: image within the domain, turning value
            // equal to one endpoint (restriction to the image is onto one
            // side).
            for i in 0..50 {
                let x = lo + (hi - lo) * (i as f64) / 49.0;
                let y = chart.map().eval(x);
                assert!(
                    y >= lo - 1e-9 * (hi - lo) && y <= hi + 1e-9 * (hi - lo),
                    "image escapes domain at v=({v1},{v2}), x={x}, y={y}"
                );
            }
            let turn_val = chart.map().eval(c);
            let edge_dist = (turn_val - lo).abs().min((turn_val - hi).abs());
            assert!(
                edge_dist < 1e-9 * (hi - lo).max(1.0),
                "turning value {turn_val} should be an endpoint of [{lo}, {hi}]"
            );
        }
    }

    #[test]
    fn charted_restriction_conjugates_the_affine_map() {
        let f = QuadraticMap::from_critical_values(CriticalValuePair::new(3.0, 0.25)).unwrap();
        let chart = f.unimodal_restriction().unwrap();
        let mut rng = SplitMix64::new(43);
        for _ in 0..200 {
            let (lo, hi) = chart.domain();
            let w = rng.range(lo, hi);
            let z = chart.from_chart(w);
            if z.abs() < 1e-6 {
                continue;
            }
            let direct = chart.map().eval(w);
            let through_circle = chart.to_chart(f.eval(z));
            assert!(
                (direct - through_circle).abs() <= 1e-9 * direct.abs().max(1.0),
                "chart conjugation mismatch at w = {w}"
            );
        }
    }

    #[test]
    fn mobius_frame_normalizes_triples() {
        let inf = CirclePoint::infinity();
        let zero = CirclePoint::from_affine(0.0);
        let one = CirclePoint::from_affine(1.0);
        // The fixed frame (1, 0, inf) gives the identity up to scale.
        let id = MobiusFrame::from_triple([one, zero, inf]).unwrap();
        let mut rng = SplitMix64::new(47);
        for _ in 0..20 {
            let z = CirclePoint::from_affine(rng.range(-5.0, 5.0));
            assert!(id.apply(&z).approx_eq(&z, 1e-12));
        }
        // The proof frame (inf, 0, 1) -> (1, 0, inf).
        let beta = MobiusFrame::from_triple([inf, zero, one]).unwrap();
        assert!(beta.apply(&inf).approx_eq(&one, 1e-12));
        assert!(beta.apply(&zero).approx_eq(&zero, 1e-12));
        assert!(beta.apply(&one).is_infinity());
        // Inverse composes to the identity on random points.
        let binv = beta.inverse();
        for _ in 0..100 {
            let z = CirclePoint::from_affine(rng.range(-10.0, 10.0));
            assert!(binv.apply(&beta.apply(&z)).approx_eq(&z, 1e-12));
        }
        // Coincident points are rejected.
        assert!(matches!(
            MobiusFrame::from_triple([zero, zero, one]),
            Err(FamilyError::CoincidentPoints)
        ));
    }

    #[test]
    fn normal_form_evaluates_and_stays_bounded() {
        let p = NormalFormParams::new(-1.0, -1.0).unwrap();
        assert_eq!(p.eval(0.0), 0.0);
        assert!((p.eval(-2.0 / p.t) - 0.0).abs() < 1e-15);
        assert!((p.eval(1.0) + 1.0).abs() < 1e-15);

        let mut rng = SplitMix64::new(53);
        let mut done = 0;
        while done < 30 {
            let mu = rng.range(-4.0, -0.01);
            let t = rng.range(-4.0, -0.01);
            if !NormalFormParams::admissible(mu, t) {
                continue;
            }
            let p = NormalFormParams::new(mu, t).unwrap();
            done += 1;
            for i in 0..10_000 {
                let x = -30.0 + 60.0 * (i as f64) / 9999.0;
                let y = p.eval(x);
                assert!(y.abs() <= 1.0 + 1e-12, "|f({x})| = {y} > 1 at ({mu}, {t})");
            }
        }
    }

    #[test]
    fn normal_form_strip_edges() {
        // mu + t = -2 boundary admits (turning point at the endpoint).
        assert!(NormalFormParams::admissible(-1.0, -1.0));
        // Outside |mu - t| < 2 a second turning point enters [-1, 1].
        assert!(!NormalFormParams::admissible(-0.5, -3.0));
        // mu + t > -2 pushes the essential turning point out: monotone.
        assert!(!NormalFormParams::admissible(-0.5, -0.5));
        assert!(!NormalFormParams::admissible(0.5, -3.0));
        assert!(NormalFormParams::new(-0.5, -3.0).is_err());
    }

    #[test]
    fn normal_form_fixed_point_at_zero_has_multiplier_mu() {
        let p = NormalFormParams::new(-1.2, -1.0).unwrap();
        // Series check f(x) = mu x + O(x^2).
        let h = 1e-7;
        let slope = (p.eval(h) - p.eval(-h)) / (2.0 * h);
        assert!((slope - p.mu).abs() < 1e-6);
        let mults = p.multipliers();
        assert!((mults[0].re - p.mu).abs() < 1e-14);
    }

    #[test]
    fn normal_form_sigma_lies_in_the_unimodal_band() {
        let mut rng = SplitMix64::new(59);
        let mut done = 0;
        while done < 2000 {
            let mu = rng.range(-8.0, -1e-3);
            let t = rng.range(-8.0, -1e-3);
            if !NormalFormParams::admissible(mu, t) {
                continue;
            }
            let sys = NormalFormParams::new(mu, t).unwrap().to_system();
            assert!(sys.is_unimodal());
            assert!(
                sys.sigma.sigma1 >= -6.0 - 1e-6 && sys.sigma.sigma1 <= 2.0 + 1e-6,
                "sigma1 = {} outside [-6, 2] at (mu, t) = ({mu}, {t})",
                sys.sigma.sigma1
            );
            done += 1;
        }
    }

    #[test]
    fn normal_form_boundary_sigma_values() {
        // mu + t = -2 is the sigma1 = -6 edge; mu - t = 2 ... -2 flanks it,
        // and (-1, -1) sits exactly on the -6 line.
        let s = NormalFormParams::new(-1.0, -1.0).unwrap().sigma();
        assert!((s.sigma1 + 6.0).abs() < 1e-9, "sigma1 = {}", s.sigma1);
    }

    #[test]
    fn unimodal_component_sigma_band_in_v_space() {
        let mut rng = SplitMix64::new(61);
        let mut done = 0;
        while done < 1000 {
            let v1 = rng.range(1.001, 8.0);
            let v2 = rng.range(-0.999, 0.999);
            let f = QuadraticMap::from_critical_values(CriticalValuePair::new(v1, v2)).unwrap();
            if f.classify().map(|c| !c.is_unimodal()).unwrap_or(true) {
                continue;
            }
            if (f.a - 1.0).abs() < 1e-3 {
                continue;
            }
            let s = f.sigma();
            assert!(
                s.sigma1 >= -6.0 - 1e-6 && s.sigma1 <= 2.0 + 1e-6,
                "sigma1 = {} at v = ({v1}, {v2})",
                s.sigma1
            );
            done += 1;
        }
    }

    #[test]
    fn sigma_minus_six_on_the_landing_edges() {
        // v1 = 1: essential critical value hits the trivial critical point.
        let f = QuadraticMap::from_critical_values(CriticalValuePair::new(1.0, 3.0)).unwrap();
        assert!((f.sigma().sigma1 + 6.0).abs() < 1e-9);
        // v2 = -1: trivial critical value hits the essential critical point.
        let f = QuadraticMap::from_critical_values(CriticalValuePair::new(3.0, -1.0)).unwrap();
        assert!((f.sigma().sigma1 + 6.0).abs() < 1e-9);
        // v2 = 1: superattracting trivial fixed point, the sigma1 = 2 line.
        let f = QuadraticMap::from_critical_values(CriticalValuePair::new(3.0, 1.0)).unwrap();
        assert!((f.sigma().sigma1 - 2.0).abs() < 1e-9);
    }
}
