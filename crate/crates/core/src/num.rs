//! Small numeric utilities shared across the crate: deterministic RNG,
//! polynomial root finding and fixed-width float formatting.

use num_complex::Complex64;

/// Formats a float with 17 significant digits, the round-trip-safe width
/// used by every data artifact (CSV, JSON) this crate writes.
pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

/// SplitMix64: tiny deterministic generator for sampling-style checks.
/// All library algorithms are seed-free; this exists so that randomized
/// validation sweeps are reproducible bit-for-bit.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// Real roots of a*x^2 + b*x + c = 0, in ascending order.
///
/// Degenerate leading coefficients fall back to the linear/constant case.
/// A slightly negative discriminant (within `4 * eps * b^2` of zero) is
/// treated as a double root so that tangential pullbacks are not dropped.
pub fn real_quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 || !scale.is_finite() {
        return Vec::new();
    }
    if a.abs() <= scale * 1e-14 {
        if b.abs() <= scale * 1e-14 {
            return Vec::new();
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    let tangency = 4.0 * f64::EPSILON * (b * b + 4.0 * a.abs() * c.abs());
    if disc < -tangency {
        return Vec::new();
    }
    if disc <= tangency {
        return vec![-b / (2.0 * a)];
    }
    let sq = disc.sqrt();
    let (r1, r2) = if b == 0.0 {
        (sq / (2.0 * a), -sq / (2.0 * a))
    } else {
        // Citardauq-stable pairing: avoid cancellation in the small root.
        let q = -0.5 * (b + b.signum() * sq);
        (q / a, c / q)
    };
    let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
    vec![lo, hi]
}

/// Roots of a real quadratic as a complex pair (used for fixed points).
pub fn complex_quadratic_roots(a: f64, b: f64, c: f64) -> [Complex64; 2] {
    let disc = b * b - 4.0 * a * c;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        let q = if b >= 0.0 {
            -0.5 * (b + sq)
        } else {
            -0.5 * (b - sq)
        };
        let r1 = q / a;
        let r2 = if q != 0.0 { c / q } else { -b / a - r1 };
        [Complex64::new(r1, 0.0), Complex64::new(r2, 0.0)]
    } else {
        let re = -b / (2.0 * a);
        let im = (-disc).sqrt() / (2.0 * a).abs();
        [Complex64::new(re, im), Complex64::new(re, -im)]
    }
}

/// All three roots of a real cubic c3*x^3 + c2*x^2 + c1*x + c0, as complex
/// numbers with exact conjugate pairing, polished by a few Newton steps.
///
/// The caller must ensure |c3| is not negligible; use the quadratic solver
/// after deflating a known root otherwise.
pub fn complex_cubic_roots(c3: f64, c2: f64, c1: f64, c0: f64) -> [Complex64; 3] {
    let a = c2 / c3;
    let b = c1 / c3;
    let c = c0 / c3;
    // Depressed form t^3 + p t + q with x = t - a/3.
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let shift = -a / 3.0;
    let disc = -4.0 * p * p * p - 27.0 * q * q;
    let mut roots = if disc >= 0.0 {
        // Three real roots; trigonometric form (p <= 0 here).
        if p.abs() < 1e-300 {
            let r = -q.cbrt();
            [
                Complex64::new(r + shift, 0.0),
                Complex64::new(r + shift, 0.0),
                Complex64::new(r + shift, 0.0),
            ]
        } else {
            let m = 2.0 * (-p / 3.0).sqrt();
            let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
            let theta = arg.acos() / 3.0;
            let mut out = [Complex64::new(0.0, 0.0); 3];
            for (k, slot) in out.iter_mut().enumerate() {
                let t = m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos();
                *slot = Complex64::new(t + shift, 0.0);
            }
            out
        }
    } else {
        // One real root (Cardano) plus a conjugate pair.
        let half_q = q / 2.0;
        let inner = (half_q * half_q + p * p * p / 27.0).sqrt();
        let u3 = -half_q + if half_q < 0.0 { inner } else { -inner };
        let u = u3.cbrt();
        let v = if u != 0.0 { -p / (3.0 * u) } else { 0.0 };
        let t_real = u + v;
        let re = -t_real / 2.0;
        let im = (3.0f64.sqrt() / 2.0) * (u - v).abs();
        [
            Complex64::new(t_real + shift, 0.0),
            Complex64::new(re + shift, im),
            Complex64::new(re + shift, -im),
        ]
    };
    // Newton polish; conjugate symmetry is preserved by polishing the pair
    // through a single representative.
    let poly = |z: Complex64| ((Complex64::new(c3, 0.0) * z + c2) * z + c1) * z + c0;
    let dpoly = |z: Complex64| (Complex64::new(3.0 * c3, 0.0) * z + 2.0 * c2) * z + c1;
    let polish = |mut z: Complex64| {
        for _ in 0..3 {
            let d = dpoly(z);
            if d.norm() < 1e-300 {
                break;
            }
            z -= poly(z) / d;
        }
        z
    };
    if roots[1].im != 0.0 {
        let z = polish(roots[1]);
        roots[1] = z;
        roots[2] = z.conj();
        roots[0] = Complex64::new(polish(roots[0]).re, 0.0);
    } else {
        for r in roots.iter_mut() {
            *r = Complex64::new(polish(*r).re, 0.0);
        }
    }
    roots
}

/// Solves a 2x2 linear system `m * x = rhs`; `None` when singular.
pub fn solve2(m: [[f64; 2]; 2], rhs: [f64; 2]) -> Option<[f64; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = m[0][0]
        .abs()
        .max(m[0][1].abs())
        .max(m[1][0].abs())
        .max(m[1][1].abs());
    if !det.is_finite() || det.abs() <= scale * scale * 1e-300 {
        return None;
    }
    Some([
        (rhs[0] * m[1][1] - rhs[1] * m[0][1]) / det,
        (rhs[1] * m[0][0] - rhs[0] * m[1][0]) / det,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_roots_orders_and_survives_tangency() {
        let r = real_quadratic_roots(1.0, -3.0, 2.0);
        assert_eq!(r.len(), 2);
        assert!((r[0] - 1.0).abs() < 1e-14 && (r[1] - 2.0).abs() < 1e-14);
        // Double root at 1.
        let r = real_quadratic_roots(1.0, -2.0, 1.0 + 1e-18);
        assert_eq!(r.len(), 1);
        assert!((r[0] - 1.0).abs() < 1e-8);
        assert!(real_quadratic_roots(1.0, 0.0, 1.0).is_empty());
    }

    #[test]
    fn cubic_roots_match_known_factorization() {
        // (x-1)(x-2)(x-3)
        let r = complex_cubic_roots(1.0, -6.0, 11.0, -6.0);
        let mut re: Vec<f64> = r.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        for (got, want) in re.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
        // (x-1)(x^2+1): conjugate pair exactly mirrored.
        let r = complex_cubic_roots(1.0, -1.0, 1.0, -1.0);
        let pair: Vec<&Complex64> = r.iter().filter(|z| z.im != 0.0).collect();
        assert_eq!(pair.len(), 2);
        assert_eq!(pair[0].re, pair[1].re);
        assert_eq!(pair[0].im, -pair[1].im);
        assert!((pair[0].im.abs() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn splitmix_is_deterministic() {
        let mut a = SplitMix64::new(42);
        let mut b = SplitMix64::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn fmt_has_17_significant_digits() {
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f64(-0.5), "-5.0000000000000000e-1");
    }
}
