//! Data augmentation for unreported connections: the E-step claim weight
//! and left-truncated gamma draws of the unobserved gap.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};

use crate::special::{ln_logistic, ln_one_minus_logistic, GammaShape};

/// Upper-tail mass below which inversion gives way to tail rejection.
const TAIL_SWITCH: f64 = 1e-12;
/// Upper-tail mass above which plain rejection from the untruncated law is cheapest.
const REJECT_SWITCH: f64 = 0.25;

/// Posterior claim probability of a connection given its observed status:
/// 1 for a reported claim, otherwise `p(1-F) / (p(1-F) + 1 - p)`, where
/// `ln_survival = ln(1 - F(c))`.
pub fn claim_weight(observed_claim: bool, eta_z: f64, ln_survival: f64) -> f64 {
    if observed_claim {
        return 1.0;
    }
    let a = ln_logistic(eta_z) + ln_survival;
    let b = ln_one_minus_logistic(eta_z);
    if a == f64::NEG_INFINITY {
        return 0.0;
    }
    let m = a.max(b);
    (a - m).exp() / ((a - m).exp() + (b - m).exp())
}

/// Draws `T ~ Gamma(shape, scale)` conditioned on `T > lower`.
///
/// Uses rejection from the untruncated law when the tail is heavy, inversion
/// of the upper regularized gamma function in the bulk, and an exponential
/// envelope in the far tail.
pub fn sample_left_truncated<R: Rng + ?Sized>(rng: &mut R, shape: &GammaShape, scale: f64, lower: f64) -> f64 {
    let a = shape.a();
    let x0 = (lower / scale).max(0.0);
    let ln_q0 = shape.ln_upper(x0);
    if ln_q0 > REJECT_SWITCH.ln() {
        let g = Gamma::new(a, 1.0).expect("valid gamma shape");
        loop {
            let x: f64 = g.sample(rng);
            if x > x0 {
                return x * scale;
            }
        }
    }
    if ln_q0 > TAIL_SWITCH.ln() {
        let u: f64 = rng.random::<f64>();
        let u = u.max(f64::MIN_POSITIVE);
        let x = shape.upper_inverse(ln_q0 + u.ln(), x0);
        return x.max(x0) * scale;
    }
    // far tail: x0 > a - 1 holds here, so the envelope rate is positive
    let rate = if a > 1.0 { 1.0 - (a - 1.0) / x0 } else { 1.0 };
    loop {
        let e: f64 = Exp1.sample(rng);
        let x = x0 + e / rate;
        let ln_accept = if a > 1.0 {
            (a - 1.0) * (x / x0).ln() - (x - x0) * (a - 1.0) / x0
        } else {
            (a - 1.0) * (x / x0).ln()
        };
        if rng.random::<f64>().ln() < ln_accept {
            return x * scale;
        }
    }
}
