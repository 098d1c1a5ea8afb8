//! Concave-majorant optimal stopping for a one-dimensional diffusion with
//! fundamental solutions u₊, u₋.
//!
//! With g = −u₋/u₊ and h(q) = f(g⁻¹(q))/u₊(g⁻¹(q)), the value function is
//! J(r) = u₊(r)·ĥ(g(r)), where ĥ is the smallest nonnegative concave
//! majorant of h. Thresholds are found in rate space from the smooth-fit
//! equations u'/u = f'/f.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::housing::{Payoff, PayoffKind};
use crate::rates::{invert_g, transform_g, FundamentalPair};
use crate::roots::{brent, Tolerance};

/// Boundary behaviour of f⁺/u₋ at r → 0 and f⁺/u₊ at r → ∞.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCheck {
    pub ell_x: f64,
    pub ell_y: f64,
    pub passed: bool,
    /// (r, f⁺/u₋) samples approaching zero.
    pub left_samples: Vec<(f64, f64)>,
    /// (r, f⁺/u₊) samples growing without bound.
    pub right_samples: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub kind: PayoffKind,
    pub r_star: f64,
    pub q_star: f64,
    pub r_inflect: f64,
    pub q_inflect: f64,
    /// Relative residual of u'/u = f'/f at the root.
    pub residual: f64,
    /// Relative residual of the majorant condition in q (tangency for
    /// selling, vanishing slope for buying).
    pub ncm_residual: f64,
    pub bracket: (f64, f64),
}

pub const LEFT_LIMIT_GRID: [f64; 4] = [1e-3, 1e-4, 1e-5, 1e-6];
pub const RIGHT_LIMIT_GRID: [f64; 3] = [10.0, 1e2, 1e3];
const LIMIT_ZERO_FACTOR: f64 = 1e-8;

/// Threshold scan grid.
pub const SCAN_MIN: f64 = 1e-4;
pub const SCAN_MAX: f64 = 2.0;
pub const SCAN_POINTS: usize = 400;

const ROOT_RESIDUAL_TOL: f64 = 1e-10;
const NCM_RESIDUAL_TOL: f64 = 1e-8;

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// h(q) = f(g⁻¹q)/u₊(g⁻¹q).
pub fn transform_h(pair: &FundamentalPair, payoff: &Payoff, q: f64) -> Result<f64> {
    let r = invert_g(pair, q)?;
    Ok(payoff.value(r)? / pair.u_plus(r)?)
}

/// Step used to difference f' into f''.
pub fn second_derivative_step(r: f64) -> f64 {
    1e-5 * r.max(1e-3)
}

/// (𝒜 − k(r)) f at rate r, with f'' by central differences of f'.
pub fn generator_applied(pair: &FundamentalPair, payoff: &Payoff, r: f64) -> Result<f64> {
    let c = pair.cir;
    let h = second_derivative_step(r);
    let f = payoff.value(r)?;
    let df = payoff.deriv(r)?;
    let d2f = (payoff.deriv(r + h)? - payoff.deriv(r - h)?) / (2.0 * h);
    Ok(c.kappa * (c.theta - r) * df + 0.5 * c.sigma_sq() * r * d2f - pair.disc.killing_rate(r) * f)
}

/// (h'(q), h''(q)) at the point q = g(r), given the rate r.
pub fn h_derivatives_at_rate(
    pair: &FundamentalPair,
    payoff: &Payoff,
    r: f64,
) -> Result<(f64, f64)> {
    let v = pair.eval(r)?;
    let f = payoff.value(r)?;
    let df = payoff.deriv(r)?;
    let gp = v.g_prime();
    let h1 = (v.u_plus * df - v.du_plus * f) / (gp * v.u_plus * v.u_plus);
    let lf = generator_applied(pair, payoff, r)?;
    let h2 = 2.0 * lf / (pair.cir.sigma_sq() * r * v.u_plus * gp * gp);
    Ok((h1, h2))
}

pub fn h_derivatives(pair: &FundamentalPair, payoff: &Payoff, q: f64) -> Result<(f64, f64)> {
    let r = invert_g(pair, q)?;
    h_derivatives_at_rate(pair, payoff, r)
}

fn classify_limit(samples: &[(f64, f64)], side: &str) -> Result<(f64, bool)> {
    let vals: Vec<f64> = samples.iter().map(|s| s.1).collect();
    if vals.iter().all(|&v| v == 0.0) {
        return Ok((0.0, true));
    }
    let first = vals[0];
    let last = *vals.last().unwrap();
    let decreasing = vals.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
    let increasing = vals.windows(2).all(|w| w[1] >= w[0]);
    if decreasing && last <= LIMIT_ZERO_FACTOR * first {
        return Ok((0.0, true));
    }
    if increasing && last > 1e3 * first.max(f64::MIN_POSITIVE) {
        return Ok((f64::INFINITY, false));
    }
    Err(Error::InconclusiveLimit(format!(
        "{side} boundary samples {vals:?}"
    )))
}

/// Numerical boundary limits of f⁺/u₋ (r → 0) and f⁺/u₊ (r → ∞).
pub fn check_limits(pair: &FundamentalPair, payoff: &Payoff) -> Result<LimitCheck> {
    let ratio = |r: f64, ln_u: f64| -> Result<f64> {
        let fp = payoff.positive_part(r)?;
        Ok(if fp == 0.0 {
            0.0
        } else {
            (fp.ln() - ln_u).exp()
        })
    };
    let left_samples = LEFT_LIMIT_GRID
        .iter()
        .map(|&r| Ok((r, ratio(r, pair.ln_u_minus(r)?)?)))
        .collect::<Result<Vec<_>>>()?;
    let right_samples = RIGHT_LIMIT_GRID
        .iter()
        .map(|&r| Ok((r, ratio(r, pair.ln_u_plus(r)?)?)))
        .collect::<Result<Vec<_>>>()?;
    let (ell_x, ok_x) = classify_limit(&left_samples, "left")?;
    let (ell_y, ok_y) = classify_limit(&right_samples, "right")?;
    Ok(LimitCheck {
        ell_x,
        ell_y,
        passed: ok_x && ok_y,
        left_samples,
        right_samples,
    })
}

/// u'/u − f'/f for the solution that matches the payoff kind.
fn smooth_fit_gap(pair: &FundamentalPair, payoff: &Payoff, r: f64) -> Result<(f64, f64)> {
    let lu = match payoff.label {
        PayoffKind::Sell => pair.log_deriv_minus(r)?,
        PayoffKind::Buy => pair.log_deriv_plus(r)?,
    };
    let lf = payoff.deriv(r)? / payoff.value(r)?;
    Ok((lu - lf, lu.abs() + lf.abs()))
}

/// Sign changes of `values` between consecutive usable grid points.
fn sign_change_brackets(grid: &[f64], values: &[Option<f64>]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for i in 0..grid.len() - 1 {
        if let (Some(a), Some(b)) = (values[i], values[i + 1]) {
            if a == 0.0 {
                out.push((grid[i], grid[i]));
            } else if a.signum() != b.signum() && b != 0.0 {
                out.push((grid[i], grid[i + 1]));
            }
        }
    }
    out
}

fn refine(bracket: (f64, f64), what: &str, f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    if bracket.0 == bracket.1 {
        return Ok(bracket.0);
    }
    let tol = Tolerance {
        abs: 1e-13,
        rel: 4.0 * f64::EPSILON,
        max_iter: 200,
    };
    brent(f, bracket.0, bracket.1, tol, what)
}

fn solve_smooth_fit(pair: &FundamentalPair, payoff: &Payoff) -> Result<(f64, (f64, f64), f64)> {
    let grid = log_grid(SCAN_MIN, SCAN_MAX, SCAN_POINTS);
    let mut values = Vec::with_capacity(grid.len());
    for &r in &grid {
        let usable = payoff.value(r)? > 0.0;
        values.push(if usable {
            Some(smooth_fit_gap(pair, payoff, r)?.0)
        } else {
            None
        });
    }
    if values.iter().all(Option::is_none) {
        return Err(Error::NoBracket(format!(
            "{} payoff is never positive on the scan grid",
            payoff.label
        )));
    }
    let brackets = sign_change_brackets(&grid, &values);
    let what = format!("{} threshold equation", payoff.label);
    match brackets.len() {
        0 => return Err(Error::NoBracket(what)),
        1 => {}
        count => {
            warn!("{what}: {count} sign changes on the scan grid");
            return Err(Error::MultipleRoots { what, count });
        }
    }
    let bracket = brackets[0];
    let r = refine(bracket, &what, |x| Ok(smooth_fit_gap(pair, payoff, x)?.0))?;
    let (gap, scale) = smooth_fit_gap(pair, payoff, r)?;
    let residual = gap.abs() / scale;
    if residual > ROOT_RESIDUAL_TOL {
        return Err(Error::NonConvergence {
            what: "threshold refinement",
            iterations: 200,
        });
    }
    Ok((r, bracket, residual))
}

/// Root of (𝒜 − k)f, the inflection point of h, searched on the side of
/// `r_star` given by `above`.
fn find_inflection(
    pair: &FundamentalPair,
    payoff: &Payoff,
    r_star: f64,
    above: bool,
    avoid: Option<f64>,
) -> Result<f64> {
    let (lo, hi) = if above {
        (r_star, SCAN_MAX)
    } else {
        (SCAN_MIN, r_star)
    };
    let grid = log_grid(lo, hi, SCAN_POINTS);
    let near_kink =
        |r: f64| avoid.is_some_and(|k| (r - k).abs() < 10.0 * second_derivative_step(k));
    let mut values = Vec::with_capacity(grid.len());
    for &r in &grid {
        values.push(if near_kink(r) {
            None
        } else {
            Some(generator_applied(pair, payoff, r)?)
        });
    }
    let brackets = sign_change_brackets(&grid, &values);
    let bracket = if above {
        brackets.first()
    } else {
        brackets.last()
    };
    let bracket = *bracket.ok_or_else(|| {
        Error::Shape(format!(
            "no inflection of h for the {} problem on [{lo}, {hi}]",
            payoff.label
        ))
    })?;
    if brackets.len() > 1 {
        warn!(
            "{} problem: {} sign changes of the generator on [{lo}, {hi}]",
            payoff.label,
            brackets.len()
        );
    }
    refine(bracket, "inflection of h", |x| {
        generator_applied(pair, payoff, x)
    })
}

/// Selling threshold r_s from u₋'/u₋ = f_s'/f_s.
pub fn solve_sell_threshold(pair: &FundamentalPair, payoff: &Payoff) -> Result<ThresholdResult> {
    if payoff.label != PayoffKind::Sell {
        return Err(Error::InvalidParameters(
            "sell threshold needs a sell payoff".into(),
        ));
    }
    let limits = check_limits(pair, payoff)?;
    if !limits.passed {
        return Err(Error::InconclusiveLimit(format!(
            "sell payoff limits {limits:?}"
        )));
    }
    let (r, bracket, residual) = solve_smooth_fit(pair, payoff)?;
    let q = transform_g(pair, r)?;
    // tangency: h(q_s)/q_s = h'(q_s)
    let v = pair.eval(r)?;
    let h = payoff.value(r)? / v.u_plus;
    let (h1, _) = h_derivatives_at_rate(pair, payoff, r)?;
    let ncm_residual = ((h / q - h1) / h1).abs();
    if ncm_residual > NCM_RESIDUAL_TOL {
        return Err(Error::Shape(format!(
            "tangency residual {ncm_residual:e} at r_s = {r}"
        )));
    }
    let r_inflect = find_inflection(pair, payoff, r, true, None)?;
    let q_inflect = transform_g(pair, r_inflect)?;
    if !(q < q_inflect) {
        return Err(Error::Ordering(format!(
            "q_s = {q} is not below the inflection {q_inflect}"
        )));
    }
    Ok(ThresholdResult {
        kind: PayoffKind::Sell,
        r_star: r,
        q_star: q,
        r_inflect,
        q_inflect,
        residual,
        ncm_residual,
        bracket,
    })
}

/// Buying threshold r_b from u₊'/u₊ = f_b'/f_b on the region f_b > 0.
pub fn solve_buy_threshold(pair: &FundamentalPair, payoff: &Payoff) -> Result<ThresholdResult> {
    if payoff.label != PayoffKind::Buy {
        return Err(Error::InvalidParameters(
            "buy threshold needs a buy payoff".into(),
        ));
    }
    let limits = check_limits(pair, payoff)?;
    if !limits.passed {
        return Err(Error::InconclusiveLimit(format!(
            "buy payoff limits {limits:?}"
        )));
    }
    let (r, bracket, residual) = solve_smooth_fit(pair, payoff)?;
    if let Some(r_s) = payoff.anchor {
        if !(r > r_s) {
            return Err(Error::Ordering(format!(
                "r_b = {r} is not above r_s = {r_s}"
            )));
        }
    }
    let q = transform_g(pair, r)?;
    // h_b'(q_b) = 0, relative to the two terms of its numerator
    let v = pair.eval(r)?;
    let (f, df) = (payoff.value(r)?, payoff.deriv(r)?);
    let ncm_residual =
        (v.u_plus * df - v.du_plus * f).abs() / ((v.u_plus * df).abs() + (v.du_plus * f).abs());
    if ncm_residual > NCM_RESIDUAL_TOL {
        return Err(Error::Shape(format!(
            "h_b'(q_b) residual {ncm_residual:e} at r_b = {r}"
        )));
    }
    let r_inflect = find_inflection(pair, payoff, r, false, payoff.anchor)?;
    let q_inflect = transform_g(pair, r_inflect)?;
    if !(q_inflect < q) {
        return Err(Error::Ordering(format!(
            "inflection {q_inflect} is not below q_b = {q}"
        )));
    }
    Ok(ThresholdResult {
        kind: PayoffKind::Buy,
        r_star: r,
        q_star: q,
        r_inflect,
        q_inflect,
        residual,
        ncm_residual,
        bracket,
    })
}

pub fn solve_threshold(pair: &FundamentalPair, payoff: &Payoff) -> Result<ThresholdResult> {
    match payoff.label {
        PayoffKind::Sell => solve_sell_threshold(pair, payoff),
        PayoffKind::Buy => solve_buy_threshold(pair, payoff),
    }
}

/// Solved value function J, immutable and cheap to clone.
#[derive(Debug, Clone)]
pub struct ValueFunction {
    pub kind: PayoffKind,
    pub threshold: ThresholdResult,
    pair: FundamentalPair,
    payoff: Payoff,
    /// f(r*)/u(r*), with u = u₋ for selling and u₊ for buying.
    scale: f64,
}

impl ValueFunction {
    pub fn new(
        pair: &FundamentalPair,
        payoff: &Payoff,
        threshold: ThresholdResult,
    ) -> Result<Self> {
        if threshold.kind != payoff.label {
            return Err(Error::InvalidParameters(
                "threshold and payoff kinds differ".into(),
            ));
        }
        let r = threshold.r_star;
        let u = match payoff.label {
            PayoffKind::Sell => pair.u_minus(r)?,
            PayoffKind::Buy => pair.u_plus(r)?,
        };
        Ok(Self {
            kind: payoff.label,
            threshold,
            pair: pair.clone(),
            payoff: payoff.clone(),
            scale: payoff.value(r)? / u,
        })
    }

    pub fn solve(pair: &FundamentalPair, payoff: &Payoff) -> Result<Self> {
        let thr = solve_threshold(pair, payoff)?;
        Self::new(pair, payoff, thr)
    }

    pub fn payoff(&self) -> &Payoff {
        &self.payoff
    }

    pub fn pair(&self) -> &FundamentalPair {
        &self.pair
    }

    pub fn r_star(&self) -> f64 {
        self.threshold.r_star
    }

    /// True on the continuation (waiting) region.
    pub fn continuation(&self, r: f64) -> bool {
        match self.kind {
            PayoffKind::Sell => r > self.threshold.r_star,
            PayoffKind::Buy => r < self.threshold.r_star,
        }
    }

    fn continuation_value(&self, r: f64) -> Result<f64> {
        Ok(self.scale
            * match self.kind {
                PayoffKind::Sell => self.pair.u_minus(r)?,
                PayoffKind::Buy => self.pair.u_plus(r)?,
            })
    }

    fn continuation_deriv(&self, r: f64) -> Result<f64> {
        Ok(self.scale
            * match self.kind {
                PayoffKind::Sell => self.pair.u_minus_prime(r)?,
                PayoffKind::Buy => self.pair.u_plus_prime(r)?,
            })
    }

    pub fn evaluate(&self, r: f64) -> Result<f64> {
        if self.continuation(r) {
            self.continuation_value(r)
        } else {
            self.payoff.value(r)
        }
    }

    /// J'(r); at the threshold itself the stopping-side derivative.
    pub fn deriv(&self, r: f64) -> Result<f64> {
        if self.continuation(r) {
            self.continuation_deriv(r)
        } else {
            self.payoff.deriv(r)
        }
    }

    /// (left, right) derivatives of J at the threshold.
    pub fn one_sided_derivs_at_threshold(&self) -> Result<(f64, f64)> {
        let r = self.threshold.r_star;
        let (stop, cont) = (self.payoff.deriv(r)?, self.continuation_deriv(r)?);
        Ok(match self.kind {
            PayoffKind::Sell => (stop, cont),
            PayoffKind::Buy => (cont, stop),
        })
    }

    /// h(q) for this problem's payoff.
    pub fn h(&self, q: f64) -> Result<f64> {
        transform_h(&self.pair, &self.payoff, q)
    }

    /// Smallest nonnegative concave majorant ĥ(q).
    pub fn ncm(&self, q: f64) -> Result<f64> {
        let t = &self.threshold;
        let h_star = self.payoff.value(t.r_star)? / self.pair.u_plus(t.r_star)?;
        match self.kind {
            PayoffKind::Sell if q > t.q_star => Ok(q * h_star / t.q_star),
            PayoffKind::Buy if q <= t.q_star => Ok(h_star),
            _ => self.h(q),
        }
    }
}

/// J_s(r): f_s below r_s, f_s(r_s)·u₋(r)/u₋(r_s) above.
pub fn value_sell(
    pair: &FundamentalPair,
    payoff: &Payoff,
    thr: &ThresholdResult,
    r: f64,
) -> Result<f64> {
    if r <= thr.r_star {
        payoff.value(r)
    } else {
        Ok(payoff.value(thr.r_star)? * pair.u_minus(r)? / pair.u_minus(thr.r_star)?)
    }
}

/// J_b(r): f_b(r_b)·u₊(r)/u₊(r_b) below r_b, f_b above.
pub fn value_buy(
    pair: &FundamentalPair,
    payoff: &Payoff,
    thr: &ThresholdResult,
    r: f64,
) -> Result<f64> {
    if r >= thr.r_star {
        payoff.value(r)
    } else {
        Ok(payoff.value(thr.r_star)? * pair.u_plus(r)? / pair.u_plus(thr.r_star)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chf::SeriesControl;
    use crate::housing::{buy_payoff, sell_payoff, HousingSpec};
    use crate::rates::{CirParams, DiscountSpec};
    use std::sync::OnceLock;

    fn spec() -> HousingSpec {
        HousingSpec {
            cash_scale: 1e5,
            spread: 0.01,
            term: 30.0,
            prop_buy: 0.06,
            prop_sell: 0.06,
            fixed_buy: 5000.0,
            fixed_sell: 5000.0,
        }
    }

    fn pair() -> FundamentalPair {
        let cir = CirParams::new(0.9, 0.08 / 0.9, 0.033f64.sqrt()).unwrap();
        FundamentalPair::new(
            cir,
            DiscountSpec::stochastic(0.6, 0.4),
            SeriesControl::default(),
        )
        .unwrap()
    }

    struct Solved {
        pair: FundamentalPair,
        sell: ValueFunction,
        buy: ValueFunction,
    }

    fn solved() -> &'static Solved {
        static CELL: OnceLock<Solved> = OnceLock::new();
        CELL.get_or_init(|| {
            let pair = pair();
            let sell = ValueFunction::solve(&pair, &sell_payoff(&spec()).unwrap()).unwrap();
            let fb = buy_payoff(&spec(), Some(&sell)).unwrap();
            let buy = ValueFunction::solve(&pair, &fb).unwrap();
            Solved { pair, sell, buy }
        })
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn thresholds_match_reference_solution() {
        let s = solved();
        // 40-digit reference roots of the smooth-fit equations
        assert!(
            rel(s.sell.r_star(), 0.026_469_344_04) < 1e-8,
            "{}",
            s.sell.r_star()
        );
        assert!(
            rel(s.buy.r_star(), 0.167_445_768_66) < 1e-8,
            "{}",
            s.buy.r_star()
        );
        assert!(s.sell.threshold.residual <= 1e-10 && s.buy.threshold.residual <= 1e-10);
    }

    #[test]
    fn ordering_of_inflections() {
        let s = solved();
        assert!(s.sell.threshold.q_star < s.sell.threshold.q_inflect);
        assert!(s.buy.threshold.q_inflect < s.buy.threshold.q_star);
    }

    #[test]
    fn scaling_currency_leaves_thresholds() {
        let pair = pair();
        let sell =
            ValueFunction::solve(&pair, &sell_payoff(&spec().scaled(10.0)).unwrap()).unwrap();
        assert!(rel(sell.r_star(), solved().sell.r_star()) < 1e-9);
    }

    #[test]
    fn limits_vanish_for_both_problems() {
        let s = solved();
        for p in [s.sell.payoff(), s.buy.payoff()] {
            let lc = check_limits(&s.pair, p).unwrap();
            assert!(lc.passed && lc.ell_x == 0.0 && lc.ell_y == 0.0, "{lc:?}");
        }
    }

    #[test]
    fn never_positive_payoff_has_zero_limits() {
        let f = Payoff::new(PayoffKind::Sell, |_| Ok(-1.0), |_| Ok(0.0));
        let lc = check_limits(&pair(), &f).unwrap();
        assert_eq!((lc.ell_x, lc.ell_y, lc.passed), (0.0, 0.0, true));
        assert!(matches!(
            solve_sell_threshold(&pair(), &f),
            Err(Error::NoBracket(_))
        ));
    }

    #[test]
    fn value_functions_are_continuous_and_dominate() {
        let s = solved();
        for vf in [&s.sell, &s.buy] {
            let r = vf.r_star();
            let below = vf.evaluate(r * (1.0 - 1e-12)).unwrap();
            let above = vf.evaluate(r * (1.0 + 1e-12)).unwrap();
            assert!(rel(below, above) < 1e-9);
            for i in 0..200 {
                let x = 1e-3 * 1000f64.powf(i as f64 / 199.0);
                let (j, f) = (vf.evaluate(x).unwrap(), vf.payoff().value(x).unwrap());
                assert!(j >= f - 1e-9 * f.abs(), "{} at {x}: {j} < {f}", vf.kind);
                if vf.continuation(x) {
                    assert!(j > f);
                }
            }
        }
    }

    #[test]
    fn free_functions_agree_with_value_function() {
        let s = solved();
        for &r in &[0.01, 0.05, 0.08, 0.2, 0.5] {
            let js = value_sell(&s.pair, s.sell.payoff(), &s.sell.threshold, r).unwrap();
            let jb = value_buy(&s.pair, s.buy.payoff(), &s.buy.threshold, r).unwrap();
            assert!(rel(js, s.sell.evaluate(r).unwrap()) < 1e-12);
            assert!(rel(jb, s.buy.evaluate(r).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn monotone_value_functions() {
        // f_b tends to −K_b at large rates, so J_b only rises up to r ≈ 0.6
        let s = solved();
        let grid = log_grid(1e-3, 0.5, 100);
        let js: Vec<f64> = grid.iter().map(|&r| s.sell.evaluate(r).unwrap()).collect();
        let jb: Vec<f64> = grid.iter().map(|&r| s.buy.evaluate(r).unwrap()).collect();
        assert!(js.windows(2).all(|w| w[1] < w[0]));
        assert!(jb.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn smooth_fit() {
        let s = solved();
        for vf in [&s.sell, &s.buy] {
            let (l, r) = vf.one_sided_derivs_at_threshold().unwrap();
            assert!(rel(l, r) < 1e-5, "{}: {l} vs {r}", vf.kind);
        }
    }

    #[test]
    fn buy_payoff_negative_below_sell_threshold() {
        let s = solved();
        let sp = spec();
        let r = 0.5 * s.sell.r_star();
        let fb = s.buy.payoff().value(r).unwrap();
        let v = crate::housing::home_value_factor(&sp, r);
        assert!(fb < 0.0);
        assert!(
            rel(
                fb,
                -v * (sp.prop_buy + sp.prop_sell) - sp.fixed_buy - sp.fixed_sell
            ) < 1e-12
        );
        assert!(s.buy.payoff().value(0.167).unwrap() > 0.0);
    }

    #[test]
    fn buy_payoff_derivative_matches_differences() {
        let s = solved();
        for &r in &[0.01, 0.06, 0.1, 0.167, 0.4] {
            let h = 1e-6 * r;
            let f = s.buy.payoff();
            let fd = (f.value(r + h).unwrap() - f.value(r - h).unwrap()) / (2.0 * h);
            let d = f.deriv(r).unwrap();
            assert!(rel(d, fd) < 1e-6, "r {r}: {d} vs {fd}");
        }
    }

    #[test]
    fn h_first_derivative_matches_differences() {
        let s = solved();
        for vf in [&s.sell, &s.buy] {
            for i in 0..20 {
                let r = 0.01 * 50f64.powf(i as f64 / 19.0);
                let q = transform_g(&s.pair, r).unwrap();
                let (h1, _) = h_derivatives(&s.pair, vf.payoff(), q).unwrap();
                let dq = 1e-6 * q.abs();
                let fd = (vf.h(q + dq).unwrap() - vf.h(q - dq).unwrap()) / (2.0 * dq);
                assert!(rel(h1, fd) < 1e-5, "{} r {r}: {h1} vs {fd}", vf.kind);
            }
        }
    }

    #[test]
    fn value_equals_u_plus_times_majorant() {
        let s = solved();
        for vf in [&s.sell, &s.buy] {
            for &r in &[0.005, 0.02, 0.03, 0.08, 0.15, 0.2, 0.6] {
                let q = transform_g(&s.pair, r).unwrap();
                let via_ncm = s.pair.u_plus(r).unwrap() * vf.ncm(q).unwrap();
                assert!(
                    rel(via_ncm, vf.evaluate(r).unwrap()) < 1e-9,
                    "{} r {r}",
                    vf.kind
                );
            }
        }
    }

    /// Upper concave hull of sampled points, evaluated at the samples.
    fn concave_hull(xs: &[f64], ys: &[f64]) -> Vec<f64> {
        let mut hull: Vec<usize> = Vec::new();
        for i in 0..xs.len() {
            while hull.len() >= 2 {
                let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                let cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a]);
                if cross >= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(i);
        }
        let mut out = Vec::with_capacity(xs.len());
        let mut k = 0;
        for i in 0..xs.len() {
            while k + 1 < hull.len() && xs[hull[k + 1]] < xs[i] {
                k += 1;
            }
            let (a, b) = (hull[k], hull[(k + 1).min(hull.len() - 1)]);
            out.push(if a == b {
                ys[a]
            } else {
                ys[a] + (ys[b] - ys[a]) * (xs[i] - xs[a]) / (xs[b] - xs[a])
            });
        }
        out
    }

    #[test]
    fn sell_majorant_matches_hull_oracle() {
        // the majorant of h_s⁺ with the origin appended is its concave hull
        let s = solved();
        let mut qs: Vec<f64> = log_grid(2e-3, 1.0, 3000)
            .iter()
            .map(|&r| transform_g(&s.pair, r).unwrap())
            .collect();
        qs.push(0.0);
        let hs: Vec<f64> = qs
            .iter()
            .map(|&q| {
                if q == 0.0 {
                    0.0
                } else {
                    s.sell.h(q).unwrap().max(0.0)
                }
            })
            .collect();
        let hull = concave_hull(&qs, &hs);
        let scale = hs.iter().cloned().fold(0.0, f64::max);
        for (i, &q) in qs.iter().enumerate().take(qs.len() - 1) {
            let ncm = s.sell.ncm(q).unwrap();
            assert!(
                (hull[i] - ncm).abs() <= 1e-6 * scale,
                "q {q}: hull {} ncm {ncm}",
                hull[i]
            );
        }
    }
}
