//! Special functions: logistic link helpers and the regularized incomplete
//! gamma function with its upper-tail inverse.

pub use statrs::function::gamma::ln_gamma;

/// Linear predictors are clamped to this magnitude before any inverse link.
pub const ETA_BOUND: f64 = 35.0;

const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;
const MAX_TERMS: usize = 100_000;

/// Inverse logit of a clamped linear predictor.
#[inline]
pub fn logistic(eta: f64) -> f64 {
    let e = eta.clamp(-ETA_BOUND, ETA_BOUND);
    1.0 / (1.0 + (-e).exp())
}

/// `ln logistic(eta)` without cancellation.
#[inline]
pub fn ln_logistic(eta: f64) -> f64 {
    let e = eta.clamp(-ETA_BOUND, ETA_BOUND);
    -(-e).exp().ln_1p()
}

/// `ln (1 - logistic(eta))` without cancellation.
#[inline]
pub fn ln_one_minus_logistic(eta: f64) -> f64 {
    let e = eta.clamp(-ETA_BOUND, ETA_BOUND);
    -e.exp().ln_1p()
}

/// A gamma shape parameter with its cached `ln Γ(a)`.
#[derive(Debug, Clone, Copy)]
pub struct GammaShape {
    a: f64,
    ln_gamma_a: f64,
}

impl GammaShape {
    pub fn new(a: f64) -> Self {
        debug_assert!(a > 0.0 && a.is_finite());
        Self {
            a,
            ln_gamma_a: ln_gamma(a),
        }
    }

    #[inline]
    pub fn a(&self) -> f64 {
        self.a
    }

    #[inline]
    pub fn ln_gamma_a(&self) -> f64 {
        self.ln_gamma_a
    }

    /// `ln` of the standard gamma density `x^(a-1) e^-x / Γ(a)`.
    #[inline]
    pub fn ln_density(&self, x: f64) -> f64 {
        (self.a - 1.0) * x.ln() - x - self.ln_gamma_a
    }

    #[inline]
    fn ln_prefactor(&self, x: f64) -> f64 {
        self.a * x.ln() - x - self.ln_gamma_a
    }

    /// Regularized lower and upper incomplete gamma `(P(a, x), Q(a, x))`.
    ///
    /// The series is used below `x = a + 1` and the Lentz continued fraction
    /// above it; the complementary value is obtained by subtraction, so the
    /// directly computed one carries full relative precision.
    pub fn regularized(&self, x: f64) -> (f64, f64) {
        if x <= 0.0 {
            return (0.0, 1.0);
        }
        if x.is_infinite() {
            return (1.0, 0.0);
        }
        if x < self.a + 1.0 {
            let p = (self.ln_prefactor(x) + self.series(x).ln()).exp().min(1.0);
            (p, 1.0 - p)
        } else {
            let q = (self.ln_prefactor(x) + self.continued_fraction(x).ln()).exp().min(1.0);
            (1.0 - q, q)
        }
    }

    /// `ln Q(a, x)`, accurate deep into the upper tail.
    pub fn ln_upper(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x.is_infinite() {
            return f64::NEG_INFINITY;
        }
        if x < self.a + 1.0 {
            let p = (self.ln_prefactor(x) + self.series(x).ln()).exp().min(1.0);
            (-p).ln_1p()
        } else {
            self.ln_prefactor(x) + self.continued_fraction(x).ln()
        }
    }

    fn series(&self, x: f64) -> f64 {
        let mut ap = self.a;
        let mut del = 1.0 / self.a;
        let mut sum = del;
        for _ in 0..MAX_TERMS {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        sum
    }

    fn continued_fraction(&self, x: f64) -> f64 {
        let mut b = x + 1.0 - self.a;
        let mut c = 1.0 / FPMIN;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_TERMS {
            let an = -(i as f64) * (i as f64 - self.a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < FPMIN {
                d = FPMIN;
            }
            c = b + an / c;
            if c.abs() < FPMIN {
                c = FPMIN;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        h
    }

    /// Solves `ln Q(a, x) = ln_q` for `x >= lower`, where `ln Q(a, lower) >= ln_q`.
    ///
    /// Safeguarded Newton iteration on the log upper tail with a bisection
    /// fallback; `ln Q` is strictly decreasing so the bracket never breaks.
    pub fn upper_inverse(&self, ln_q: f64, lower: f64) -> f64 {
        let lower = lower.max(0.0);
        if ln_q >= 0.0 {
            return lower;
        }
        let h = |x: f64| self.ln_upper(x) - ln_q;
        let mut lo = lower;
        if h(lo) <= 0.0 {
            return lo;
        }
        let mut hi = (lo * 2.0).max(self.a + 1.0).max(1.0);
        while h(hi) > 0.0 {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return lo;
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let hx = h(x);
            if hx > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            // d/dx ln Q = -density / Q
            let slope = -(self.ln_density(x) - self.ln_upper(x)).exp();
            let mut next = x - hx / slope;
            if !next.is_finite() || next <= lo || next >= hi {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 1e-15 * x.max(1e-300) || hi - lo <= 1e-15 * hi {
                return next;
            }
            x = next;
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_special_case() {
        let s = GammaShape::new(1.0);
        for &x in &[1e-6, 0.1, 0.5, 1.0, 2.0, 7.5, 30.0] {
            let (p, q) = s.regularized(x);
            assert!((p - (1.0 - (-x as f64).exp())).abs() < 1e-14, "x={x}");
            assert!((q - (-x as f64).exp()).abs() <= 1e-14 * (-x as f64).exp().max(1e-300) + 1e-300);
            assert!((s.ln_upper(x) + x).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_two_closed_form() {
        // Q(2, x) = (1 + x) e^-x
        let s = GammaShape::new(2.0);
        for &x in &[0.01, 0.7, 2.9, 3.1, 12.0, 60.0] {
            let expected = (1.0 + x) * (-x as f64).exp();
            let (_, q) = s.regularized(x);
            assert!(((q - expected) / expected).abs() < 1e-12, "x={x} q={q} e={expected}");
        }
    }

    #[test]
    fn half_shape_matches_erfc() {
        // Q(1/2, x) = erfc(sqrt(x)); reference values of erfc at 1/sqrt(2), 1, sqrt(2), 2, 3
        let cases = [
            (0.5, 0.317_310_507_862_914_1),
            (1.0, 0.157_299_207_050_285_13),
            (2.0, 0.045_500_263_896_358_42),
            (4.0, 0.004_677_734_981_047_266),
            (9.0, 2.209_049_699_858_544e-5),
        ];
        let s = GammaShape::new(0.5);
        for (x, expected) in cases {
            let (_, q) = s.regularized(x);
            assert!(((q - expected) / expected).abs() < 1e-12, "x={x} q={q} e={expected}");
        }
    }

    #[test]
    fn upper_inverse_round_trips() {
        for &a in &[0.3, 1.0, 2.0, 5.0, 40.0] {
            let s = GammaShape::new(a);
            for &lnq in &[-1e-6, -0.1, -1.0, -5.0, -30.0, -200.0] {
                let x = s.upper_inverse(lnq, 0.0);
                assert!((s.ln_upper(x) - lnq).abs() < 1e-9 * lnq.abs().max(1.0), "a={a} lnq={lnq} x={x}");
            }
        }
    }

    #[test]
    fn logistic_is_clamped_and_stable() {
        assert_eq!(logistic(0.0), 0.5);
        assert!(logistic(1e6) < 1.0);
        assert!(logistic(-1e6) > 0.0);
        assert!((ln_logistic(-50.0) - ln_logistic(-35.0)).abs() < 1e-15);
        let eta = 3.3;
        assert!((ln_logistic(eta).exp() + ln_one_minus_logistic(eta).exp() - 1.0).abs() < 1e-15);
    }
}
