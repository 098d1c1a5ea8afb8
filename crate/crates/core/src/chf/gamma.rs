//! Euler gamma function and friends (Lanczos approximation, g = 7, n = 9).

use std::f64::consts::PI;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Largest argument for which Γ(x) is finite in f64.
pub const GAMMA_MAX_ARG: f64 = 171.624_376_956_302_7;

fn lanczos_sum(x: f64) -> f64 {
    // x is the shifted argument (x - 1 in the usual notation)
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    acc
}

/// sin(πx) with exact zeros at the integers.
pub fn sin_pi(x: f64) -> f64 {
    if x == x.floor() {
        return 0.0;
    }
    let r = x.rem_euclid(2.0);
    let (r, sign) = if r > 1.0 { (r - 1.0, -1.0) } else { (r, 1.0) };
    let r = if r > 0.5 { 1.0 - r } else { r };
    sign * (PI * r).sin()
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

fn gamma_positive(x: f64) -> f64 {
    // x >= 0.5
    let y = x - 1.0;
    let t = y + LANCZOS_G + 0.5;
    // split the power so t^(y+0.5) does not overflow before e^{-t} is applied
    let half = t.powf(0.5 * (y + 0.5));
    (2.0 * PI).sqrt() * half * ((-t).exp() * half) * lanczos_sum(y)
}

/// Euler gamma function Γ(x).
pub fn gamma(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Domain("gamma of NaN".into()));
    }
    if is_nonpositive_integer(x) {
        return Err(Error::Pole(x));
    }
    if x > GAMMA_MAX_ARG {
        return Err(Error::Overflow("gamma"));
    }
    if x < 0.5 {
        let s = sin_pi(x);
        let g = gamma_positive(1.0 - x);
        if !g.is_finite() {
            // Γ(1-x) overflow means Γ(x) underflows towards zero
            return Ok(0.0);
        }
        return Ok(PI / (s * g));
    }
    Ok(gamma_positive(x))
}

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < 0.5 {
        return (PI / (sin_pi(x) * gamma_positive(1.0 - x))).ln();
    }
    if x < 20.0 {
        return gamma_positive(x).ln();
    }
    let y = x - 1.0;
    let t = y + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (y + 0.5) * t.ln() - t + lanczos_sum(y).ln()
}

/// Reciprocal gamma 1/Γ(x), an entire function: zero at the poles of Γ.
pub fn rgamma(x: f64) -> f64 {
    if is_nonpositive_integer(x) {
        return 0.0;
    }
    if x > GAMMA_MAX_ARG {
        return (-ln_gamma(x)).exp();
    }
    if x < 0.5 {
        // 1/Γ(x) = sin(πx) Γ(1-x) / π
        let one_minus = 1.0 - x;
        let s = sin_pi(x);
        if one_minus > GAMMA_MAX_ARG {
            let mag = (ln_gamma(one_minus) - PI.ln()).exp();
            return s * mag;
        }
        return s * gamma_positive(one_minus) / PI;
    }
    1.0 / gamma_positive(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn classical_values() {
        assert!(rel(gamma(1.0).unwrap(), 1.0) < 1e-14);
        assert!(rel(gamma(0.5).unwrap(), PI.sqrt()) < 1e-14);
        assert!(rel(gamma(5.0).unwrap(), 24.0) < 1e-14);
    }

    #[test]
    fn factorials_to_fifty() {
        let mut fact = 1.0_f64;
        for n in 1..=50 {
            // Γ(n) = (n-1)!
            assert!(rel(gamma(n as f64).unwrap(), fact) < 1e-12, "n = {n}");
            fact *= n as f64;
        }
    }

    #[test]
    fn negative_arguments_via_reflection() {
        // Γ(-0.5) = -2√π, Γ(-1.5) = 4√π/3
        assert!(rel(gamma(-0.5).unwrap(), -2.0 * PI.sqrt()) < 1e-13);
        assert!(rel(gamma(-1.5).unwrap(), 4.0 * PI.sqrt() / 3.0) < 1e-13);
        // Γ(x)Γ(1-x) = π / sin(πx) deep in the negative range
        let x = -37.3;
        let lhs = gamma(x).unwrap() * gamma(1.0 - x).unwrap();
        assert!(rel(lhs, PI / sin_pi(x)) < 1e-12);
    }

    #[test]
    fn poles_and_overflow() {
        assert_eq!(gamma(0.0), Err(Error::Pole(0.0)));
        assert_eq!(gamma(-3.0), Err(Error::Pole(-3.0)));
        assert_eq!(gamma(200.0), Err(Error::Overflow("gamma")));
    }

    #[test]
    fn reciprocal_is_entire() {
        assert_eq!(rgamma(-4.0), 0.0);
        assert!(rel(rgamma(4.0), 1.0 / 6.0) < 1e-14);
        assert!(rel(rgamma(-2.5), 1.0 / gamma(-2.5).unwrap()) < 1e-13);
        // large negative argument stays finite
        let r = rgamma(-150.5);
        assert!(r.is_finite() && r.abs() > 1e250);
        assert!(rel(r, 1.0 / gamma(-150.5).unwrap()) < 1e-10);
    }

    #[test]
    fn log_gamma_matches() {
        for &x in &[0.1, 0.7, 3.3, 19.9, 20.1, 55.5, 170.0] {
            assert!(
                (ln_gamma(x) - gamma(x).unwrap().ln()).abs() < 1e-12 * ln_gamma(x).abs().max(1.0)
            );
        }
        // Stirling at very large x
        let x = 1e5_f64;
        let stirling = (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + 1.0 / (12.0 * x);
        assert!((ln_gamma(x) - stirling).abs() < 1e-8);
    }
}
