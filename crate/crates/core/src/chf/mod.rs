//! Confluent hypergeometric functions M(a, b, z) (Kummer) and U(a, b, z)
//! (Tricomi) for real parameters and non-negative real argument.
//!
//! Evaluation routes:
//!
//! * M, a ≥ -1: ascending series for z ≤ 100, large-z asymptotic beyond.
//! * M, a < -1: three-term recurrence in a, run downwards from a seed pair
//!   at a₀ ∈ [0, 1). The ascending series cancels catastrophically there.
//! * U, a > 0: integral representation via generalized Gauss–Laguerre,
//!   with the Gamma relation as fallback at tiny z.
//! * U, a ≤ 0: downward recurrence in a on the scaled function
//!   U(a,b,z)/Γ(b-a), seeded at a₀ ∈ (0, 1] and a₀ + 1. Seeds come from the
//!   Gamma relation for z ≤ 2 and from quadrature above. For z < 0.01 the
//!   Gamma relation is used directly, as it does not cancel there.

pub mod gamma;
pub mod quadrature;

use log::{debug, warn};

use crate::error::{Error, Result};
pub use gamma::{gamma, ln_gamma, rgamma};
pub use quadrature::LaguerreRule;

/// Truncation control for series and quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    pub max_terms: usize,
    pub rel_tol: f64,
    pub quad_nodes: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        Self {
            max_terms: 500,
            rel_tol: 1e-16,
            quad_nodes: 96,
        }
    }
}

impl SeriesControl {
    pub fn new(max_terms: usize, rel_tol: f64, quad_nodes: usize) -> Result<Self> {
        let ctl = Self {
            max_terms,
            rel_tol,
            quad_nodes,
        };
        ctl.validate()?;
        Ok(ctl)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_terms < 1 {
            return Err(Error::InvalidParameters("max_terms must be >= 1".into()));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::InvalidParameters(
                "rel_tol must lie in (0, 1)".into(),
            ));
        }
        if self.quad_nodes < 8 {
            return Err(Error::InvalidParameters("quad_nodes must be >= 8".into()));
        }
        Ok(())
    }
}

/// Which confluent hypergeometric function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChfKind {
    M,
    U,
}

/// Above this argument M switches to its asymptotic expansion.
const M_ASYMPTOTIC_Z: f64 = 100.0;
/// Below this argument U with a > 0 uses the Gamma relation instead of quadrature.
const U_SMALL_Z: f64 = 1e-2;
const NEAR_INTEGER_B: f64 = 1e-6;
const QUAD_AGREEMENT: f64 = 1e-10;
const SEED_GAMMA_MAX_Z: f64 = 2.0;

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

fn check_b(b: f64) -> Result<()> {
    if !b.is_finite() {
        return Err(Error::Domain(format!("b = {b} is not finite")));
    }
    if is_nonpositive_integer(b) {
        return Err(Error::ParameterPole(b));
    }
    Ok(())
}

/// Ascending series Σ (a)_n/(b)_n zⁿ/n!.
fn m_series(a: f64, b: f64, z: f64, ctl: &SeriesControl) -> Result<f64> {
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut small_run = 0;
    for n in 0..ctl.max_terms {
        let nf = n as f64;
        term *= (a + nf) * z / ((b + nf) * (nf + 1.0));
        sum += term;
        if term == 0.0 {
            return Ok(sum);
        }
        // only trust the tolerance once the terms are shrinking geometrically
        let shrinking = ((a + nf + 1.0) * z / ((b + nf + 1.0) * (nf + 2.0))).abs() < 1.0;
        if shrinking && term.abs() <= ctl.rel_tol * sum.abs() {
            small_run += 1;
            if small_run >= 3 {
                return Ok(sum);
            }
        } else {
            small_run = 0;
        }
        if !sum.is_finite() {
            return Err(Error::Overflow("kummer_m series"));
        }
    }
    Err(Error::NonConvergence {
        what: "kummer_m series",
        iterations: ctl.max_terms,
    })
}

/// Sum of the large-z asymptotic series Σ (b-a)_s (1-a)_s / (s! z^s).
fn m_asymptotic_sum(a: f64, b: f64, z: f64, ctl: &SeriesControl) -> Result<f64> {
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for s in 0..ctl.max_terms {
        let sf = s as f64;
        let next = term * (b - a + sf) * (1.0 - a + sf) / ((sf + 1.0) * z);
        if next.abs() > term.abs() {
            // divergent tail: optimal truncation reached
            break;
        }
        term = next;
        sum += term;
        if term.abs() <= ctl.rel_tol * sum.abs() {
            return Ok(sum);
        }
    }
    if term.abs() <= 1e-12 * sum.abs() {
        return Ok(sum);
    }
    Err(Error::NonConvergence {
        what: "kummer_m asymptotic series",
        iterations: ctl.max_terms,
    })
}

/// ln M(a, b, z) for a > 0, b > 0, z ≥ 0 (M is positive there).
pub fn ln_kummer_m(a: f64, b: f64, z: f64, ctl: &SeriesControl) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && z >= 0.0) {
        return Err(Error::Domain(format!(
            "ln_kummer_m needs a > 0, b > 0, z >= 0 (a = {a}, b = {b}, z = {z})"
        )));
    }
    if z <= M_ASYMPTOTIC_Z {
        return Ok(m_series(a, b, z, ctl)?.ln());
    }
    let s = m_asymptotic_sum(a, b, z, ctl)?;
    Ok(ln_gamma(b) - ln_gamma(a) + z + (a - b) * z.ln() + s.ln())
}

/// M(a, b, z) without the recurrence branch.
fn kummer_m_direct(a: f64, b: f64, z: f64, ctl: &SeriesControl) -> Result<f64> {
    if z <= M_ASYMPTOTIC_Z || (a <= 0.0 && a == a.floor()) {
        return m_series(a, b, z, ctl);
    }
    let s = m_asymptotic_sum(a, b, z, ctl)?;
    let ln_mag = z + (a - b) * z.ln();
    let scale = gamma(b)? * rgamma(a);
    let v = scale * ln_mag.exp() * s;
    if !v.is_finite() {
        return Err(Error::Overflow("kummer_m asymptotic"));
    }
    Ok(v)
}

/// Kummer's function M(a, b, z), z ≥ 0.
pub fn kummer_m(a: f64, b: f64, z: f64, ctl: &SeriesControl) -> Result<f64> {
    check_b(b)?;
    if !(z >= 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!(
            "kummer_m needs finite a and z >= 0 (a = {a}, z = {z})"
        )));
    }
    if z == 0.0 || a == 0.0 {
        return Ok(1.0);
    }
    if a >= -1.0 {
        return kummer_m_direct(a, b, z, ctl);
    }
    kummer_m_recurrence(a, b, z, ctl)
}

/// Downward recurrence (b-a) M(a-1) = -(2a-b+z) M(a) + a M(a+1).
fn kummer_m_recurrence(a: f64, b: f64, z: f64, ctl: &SeriesControl) -> Result<f64> {
    let steps = (-a.floor()) as usize;
    let a0 = a + steps as f64; // in [0, 1)
    let mut upper = kummer_m_direct(a0 + 1.0, b, z, ctl)?;
    let mut current = if a0 == 0.0 {
        1.0
    } else {
        kummer_m_direct(a0, b, z, ctl)?
    };
    let mut cur = a0;
    for _ in 0..steps {
        let denom = b - cur;
        if denom == 0.0 {
            // recurrence is singular when b - a hits zero; fall back
            return m_series(a, b, z, ctl);
        }
        let next = (-(2.0 * cur - b + z) * current + cur * upper) / denom;
        upper = current;
        current = next;
        cur -= 1.0;
    }
    Ok(current)
}

fn perturb_integer_b(b: f64) -> f64 {
    let nearest = b.round();
    if (b - nearest).abs() < NEAR_INTEGER_B {
        let perturbed = nearest + NEAR_INTEGER_B;
        warn!("b = {b} is within {NEAR_INTEGER_B} of an integer; using b = {perturbed} in the Gamma relation");
        perturbed
    } else {
        b
    }
}

/// U via U = Γ(1-b)/Γ(a+1-b) M(a,b,z) + Γ(b-1)/Γ(a) z^{1-b} M(a+1-b, 2-b, z).
pub fn tricomi_u_gamma_relation(a: f64, b: f64, z: f64, ctl: &SeriesControl) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("tricomi_u needs z > 0 (z = {z})")));
    }
    let b = perturb_integer_b(b);
    let first = gamma(1.0 - b)? * rgamma(a + 1.0 - b);
    let second = gamma(b - 1.0)? * rgamma(a);
    let mut value = 0.0;
    if first != 0.0 {
        value += first * kummer_m(a, b, z, ctl)?;
    }
    if second != 0.0 {
        value += second * z.powf(1.0 - b) * kummer_m(a + 1.0 - b, 2.0 - b, z, ctl)?;
    }
    if !value.is_finite() {
        return Err(Error::Overflow("tricomi_u gamma relation"));
    }
    Ok(value)
}

/// U via (1/Γ(a)) ∫₀^∞ e^{-zt} t^{a-1} (1+t)^{b-a-1} dt for a > 0, using a
/// pair of Gauss–Laguerre rules (n and 2n nodes) for the weight s^{a-1} e^{-s}.
pub fn tricomi_u_integral_with(
    rules: (&LaguerreRule, &LaguerreRule),
    a: f64,
    b: f64,
    z: f64,
) -> Result<f64> {
    let (coarse, fine) = rules;
    debug_assert!(
        (coarse.alpha - (a - 1.0)).abs() < 1e-15 && (fine.alpha - (a - 1.0)).abs() < 1e-15
    );
    let p = b - a - 1.0;
    let integrand = |s: f64| (s / z).ln_1p().mul_add(p, 0.0).exp();
    let lo = coarse.integrate(integrand);
    let hi = fine.integrate(integrand);
    if ((hi - lo) / hi).abs() > QUAD_AGREEMENT {
        return Err(Error::NonConvergence {
            what: "tricomi_u quadrature",
            iterations: fine.len(),
        });
    }
    let value = hi * rgamma(a) * (-a * z.ln()).exp();
    if !value.is_finite() {
        return Err(Error::Overflow("tricomi_u integral"));
    }
    Ok(value)
}

fn tricomi_u_integral(a: f64, b: f64, z: f64, ctl: &SeriesControl) -> Result<f64> {
    let coarse = LaguerreRule::new(ctl.quad_nodes, a - 1.0)?;
    let fine = LaguerreRule::new(2 * ctl.quad_nodes, a - 1.0)?;
    tricomi_u_integral_with((&coarse, &fine), a, b, z)
}

/// U(a, b, z) for a > 0: quadrature first, Gamma relation as fallback.
fn tricomi_u_positive(a: f64, b: f64, z: f64, ctl: &SeriesControl) -> Result<f64> {
    if z < U_SMALL_Z {
        if let Ok(v) = tricomi_u_gamma_relation(a, b, z, ctl) {
            return Ok(v);
        }
    }
    match tricomi_u_integral(a, b, z, ctl) {
        Ok(v) => Ok(v),
        Err(e @ Error::NonConvergence { .. }) => {
            debug!("U({a}, {b}, {z}) quadrature did not settle, trying the Gamma relation");
            tricomi_u_gamma_relation(a, b, z, ctl).map_err(|_| e)
        }
        Err(e) => Err(e),
    }
}

/// U(a, b, z) for a ∈ (0, 2]. At moderate z the Gamma relation is as
/// accurate as quadrature (about 1e-13) and far cheaper, since each new
/// first parameter would otherwise need fresh Laguerre rules.
fn recurrence_seed(a: f64, b: f64, z: f64, ctl: &SeriesControl) -> Result<f64> {
    if z <= SEED_GAMMA_MAX_Z && (b - b.round()).abs() >= NEAR_INTEGER_B {
        return tricomi_u_gamma_relation(a, b, z, ctl);
    }
    tricomi_u_positive(a, b, z, ctl)
}

/// Scaled Tricomi function W(a, b, z) = U(a, b, z) / Γ(b - a).
///
/// W stays O(1) as a → -∞ where U itself grows factorially; its zeros in a
/// (for a < b) are those of U.
pub fn tricomi_u_scaled(a: f64, b: f64, z: f64, ctl: &SeriesControl) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("tricomi_u needs z > 0 (z = {z})")));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain("tricomi_u needs finite parameters".into()));
    }
    if a > 0.0 {
        return Ok(tricomi_u_positive(a, b, z, ctl)? * rgamma(b - a));
    }
    if z < U_SMALL_Z {
        return Ok(tricomi_u_gamma_relation(a, b, z, ctl)? * rgamma(b - a));
    }
    // (b-a) W(a-1) = -(b-2a-z) W(a) + a W(a+1)
    let frac = a - a.floor();
    let a0 = if frac == 0.0 { 1.0 } else { frac };
    let steps = (a0 - a).round() as usize;
    let mut upper = recurrence_seed(a0 + 1.0, b, z, ctl)? * rgamma(b - a0 - 1.0);
    let mut current = recurrence_seed(a0, b, z, ctl)? * rgamma(b - a0);
    let mut cur = a0;
    for _ in 0..steps {
        let denom = b - cur;
        if denom == 0.0 {
            return Err(Error::Domain(format!(
                "U recurrence singular at a = {cur}, b = {b}"
            )));
        }
        let next = (-(b - 2.0 * cur - z) * current + cur * upper) / denom;
        upper = current;
        current = next;
        cur -= 1.0;
    }
    Ok(current)
}

/// Tricomi's function U(a, b, z), z > 0.
pub fn tricomi_u(a: f64, b: f64, z: f64, ctl: &SeriesControl) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("tricomi_u needs z > 0 (z = {z})")));
    }
    if a > 0.0 {
        return tricomi_u_positive(a, b, z, ctl);
    }
    if z < U_SMALL_Z {
        return tricomi_u_gamma_relation(a, b, z, ctl);
    }
    let w = tricomi_u_scaled(a, b, z, ctl)?;
    if w == 0.0 {
        return Ok(0.0);
    }
    let v = gamma(b - a)? * w;
    if !v.is_finite() {
        return Err(Error::Overflow("tricomi_u"));
    }
    Ok(v)
}

fn evaluate(kind: ChfKind, a: f64, b: f64, z: f64, ctl: &SeriesControl) -> Result<f64> {
    match kind {
        ChfKind::M => kummer_m(a, b, z, ctl),
        ChfKind::U => tricomi_u(a, b, z, ctl),
    }
}

/// d/dz of M or U: (a/b) M(a+1, b+1, z) or -a U(a+1, b+1, z).
pub fn chf_deriv_z(kind: ChfKind, a: f64, b: f64, z: f64, ctl: &SeriesControl) -> Result<f64> {
    match kind {
        ChfKind::M => {
            check_b(b)?;
            Ok(a / b * kummer_m(a + 1.0, b + 1.0, z, ctl)?)
        }
        ChfKind::U => Ok(-a * tricomi_u(a + 1.0, b + 1.0, z, ctl)?),
    }
}

/// Default step for derivatives in the first parameter.
pub fn default_a_step(a: f64) -> f64 {
    1e-6 * a.abs().max(1.0)
}

/// Central difference of `f` in its argument, with a step-halving check.
/// Returns (central difference at `step`, Richardson-extrapolated value).
pub(crate) fn central_difference<F>(f: F, a: f64, step: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let (fp, fm) = (f(a + step)?, f(a - step)?);
    let d1 = (fp - fm) / (2.0 * step);
    let scale = fp.abs().max(fm.abs());
    if scale > 0.0 && (fp - fm).abs() < 1e-8 * scale {
        warn!("first-parameter difference at a = {a} cancels to {:.1e} of the function scale; step {step} may be too small", (fp - fm).abs() / scale);
    }
    let half = 0.5 * step;
    let d2 = (f(a + half)? - f(a - half)?) / (2.0 * half);
    let extrapolated = (4.0 * d2 - d1) / 3.0;
    if (d2 - d1).abs() > 1e-4 * extrapolated.abs().max(f64::MIN_POSITIVE) {
        warn!(
            "first-parameter derivative at a = {a} changes by {:.1e} under step halving",
            (d2 - d1).abs()
        );
    }
    Ok((d1, extrapolated))
}

/// ∂/∂a of M(a, b, z) or U(a, b, z) by central difference with the given step.
pub fn chf_deriv_a(
    kind: ChfKind,
    a: f64,
    b: f64,
    z: f64,
    step: f64,
    ctl: &SeriesControl,
) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::Domain(format!(
            "step must be positive (step = {step})"
        )));
    }
    let (d, _) = central_difference(|x| evaluate(kind, x, b, z, ctl), a, step)?;
    Ok(d)
}
