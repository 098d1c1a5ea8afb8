//! Bracketed scalar root finding (Brent's method).

use crate::error::{Error, Result};

/// Stopping rule for [`brent`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_iter: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-14,
            rel: 4.0 * f64::EPSILON,
            max_iter: 200,
        }
    }
}

/// Root of `f` in `[lo, hi]`, which must bracket a sign change.
pub fn brent<F>(mut f: F, lo: f64, hi: f64, tol: Tolerance, what: &str) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoBracket(format!("{what} on [{lo}, {hi}]")));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..tol.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * tol.rel * b.abs() + 0.5 * tol.abs;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b)?;
    }
    Err(Error::NonConvergence {
        what: "brent root search",
        iterations: tol.max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_simple_roots() {
        let r = brent(|x| Ok(x * x - 2.0), 0.0, 2.0, Tolerance::default(), "sqrt2").unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
        let r = brent(
            |x| Ok(x.cos() - x),
            0.0,
            1.0,
            Tolerance::default(),
            "dottie",
        )
        .unwrap();
        assert!((r - 0.739_085_133_215_160_6).abs() < 1e-13);
    }

    #[test]
    fn reports_missing_bracket() {
        let err = brent(|x| Ok(x * x + 1.0), -1.0, 1.0, Tolerance::default(), "none").unwrap_err();
        assert!(matches!(err, Error::NoBracket(_)));
    }

    #[test]
    fn propagates_evaluation_errors() {
        let err = brent(
            |_| Err(Error::Overflow("test")),
            0.0,
            1.0,
            Tolerance::default(),
            "e",
        )
        .unwrap_err();
        assert_eq!(err, Error::Overflow("test"));
    }
}
