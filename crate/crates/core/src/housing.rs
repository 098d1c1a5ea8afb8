//! Home value factor, transaction costs, and the sell/buy reward functions.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stopping::ValueFunction;

/// Cash-flow and transaction-cost parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HousingSpec {
    /// Annual cash-flow scale C.
    #[serde(rename = "C")]
    pub cash_scale: f64,
    /// Mortgage spread ρ over the short rate.
    #[serde(rename = "rho")]
    pub spread: f64,
    /// Mortgage term T in years.
    #[serde(rename = "T_years")]
    pub term: f64,
    #[serde(rename = "delta_b")]
    pub prop_buy: f64,
    #[serde(rename = "delta_s")]
    pub prop_sell: f64,
    #[serde(rename = "K_b")]
    pub fixed_buy: f64,
    #[serde(rename = "K_s")]
    pub fixed_sell: f64,
}

impl HousingSpec {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.cash_scale > 0.0, "C > 0"),
            (self.spread > 0.0, "rho > 0"),
            (self.term > 0.0, "T > 0"),
            (self.prop_buy > 0.0, "delta_b > 0"),
            (
                self.prop_sell > 0.0 && self.prop_sell < 1.0,
                "0 < delta_s < 1",
            ),
            (self.fixed_buy > 0.0, "K_b > 0"),
            (self.fixed_sell > 0.0, "K_s > 0"),
        ];
        for (ok, what) in checks {
            if !ok {
                return Err(Error::InvalidParameters(format!(
                    "housing spec requires {what}"
                )));
            }
        }
        let all = [
            self.cash_scale,
            self.spread,
            self.term,
            self.prop_buy,
            self.prop_sell,
            self.fixed_buy,
            self.fixed_sell,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameters(
                "housing spec values must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Multiply every currency-valued field (C, K_b, K_s) by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            cash_scale: self.cash_scale * factor,
            fixed_buy: self.fixed_buy * factor,
            fixed_sell: self.fixed_sell * factor,
            ..*self
        }
    }
}

/// v(r) = C/(r+ρ)·(1 − e^{−(r+ρ)T}).
pub fn home_value_factor(spec: &HousingSpec, r: f64) -> f64 {
    let x = r + spec.spread;
    -spec.cash_scale * (-x * spec.term).exp_m1() / x
}

/// v'(r) = −C/(r+ρ)²·[(1 − e^{−(r+ρ)T}) − (r+ρ)T·e^{−(r+ρ)T}].
pub fn home_value_deriv(spec: &HousingSpec, r: f64) -> f64 {
    let x = r + spec.spread;
    let xt = x * spec.term;
    let decay = (-xt).exp();
    -spec.cash_scale / (x * x) * (-(-xt).exp_m1() - xt * decay)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayoffKind {
    Sell,
    Buy,
}

impl fmt::Display for PayoffKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PayoffKind::Sell => "sell",
            PayoffKind::Buy => "buy",
        })
    }
}

type RateFn = Arc<dyn Fn(f64) -> Result<f64> + Send + Sync>;

/// A reward function f(r) with its derivative.
#[derive(Clone)]
pub struct Payoff {
    pub label: PayoffKind,
    /// Kink of a payoff built on another value function (r_s for f_b).
    pub anchor: Option<f64>,
    value: RateFn,
    deriv: RateFn,
}

impl fmt::Debug for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Payoff")
            .field("label", &self.label)
            .field("anchor", &self.anchor)
            .finish_non_exhaustive()
    }
}

impl Payoff {
    pub fn new<V, D>(label: PayoffKind, value: V, deriv: D) -> Self
    where
        V: Fn(f64) -> Result<f64> + Send + Sync + 'static,
        D: Fn(f64) -> Result<f64> + Send + Sync + 'static,
    {
        Self {
            label,
            anchor: None,
            value: Arc::new(value),
            deriv: Arc::new(deriv),
        }
    }

    pub fn value(&self, r: f64) -> Result<f64> {
        (self.value)(r)
    }

    pub fn deriv(&self, r: f64) -> Result<f64> {
        (self.deriv)(r)
    }

    /// f⁺ = max(f, 0).
    pub fn positive_part(&self, r: f64) -> Result<f64> {
        Ok(self.value(r)?.max(0.0))
    }
}

/// f_s(r) = v(r)(1 − δ_s) − K_s.
pub fn sell_payoff(spec: &HousingSpec) -> Result<Payoff> {
    spec.validate()?;
    let s = *spec;
    let keep = 1.0 - s.prop_sell;
    Ok(Payoff::new(
        PayoffKind::Sell,
        move |r| Ok(home_value_factor(&s, r) * keep - s.fixed_sell),
        move |r| Ok(home_value_deriv(&s, r) * keep),
    ))
}

/// f_b(r) = J_s(r) − v(r)(1 + δ_b) − K_b, built on the solved selling value.
pub fn buy_payoff(spec: &HousingSpec, j_sell: Option<&ValueFunction>) -> Result<Payoff> {
    spec.validate()?;
    let j_sell = j_sell.ok_or(Error::UnsolvedDependency)?;
    if j_sell.kind != PayoffKind::Sell {
        return Err(Error::UnsolvedDependency);
    }
    let s = *spec;
    let pay = 1.0 + s.prop_buy;
    let (jv, jd) = (j_sell.clone(), j_sell.clone());
    let mut payoff = Payoff::new(
        PayoffKind::Buy,
        move |r| Ok(jv.evaluate(r)? - home_value_factor(&s, r) * pay - s.fixed_buy),
        move |r| Ok(jd.deriv(r)? - home_value_deriv(&s, r) * pay),
    );
    payoff.anchor = Some(j_sell.r_star());
    Ok(payoff)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn paper_spec() -> HousingSpec {
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

    #[test]
    fn value_factor_reference() {
        // closed form at 40 digits: 1e5/0.09 * (1 - e^{-2.7})
        let v = home_value_factor(&paper_spec(), 0.08);
        assert!((v - 1_036_438.319_178_055_8).abs() < 1e-6, "{v}");
    }

    #[test]
    fn value_factor_decreasing_and_vanishing_term() {
        let s = paper_spec();
        assert!(home_value_factor(&s, 0.02) > home_value_factor(&s, 0.08));
        let short = HousingSpec { term: 1e-12, ..s };
        assert!(home_value_factor(&short, 0.08) < 1e-6);
    }

    #[test]
    fn derivative_matches_differences() {
        let s = paper_spec();
        for &r in &[0.02, 0.08, 0.3] {
            let d = home_value_deriv(&s, r);
            assert!(d < 0.0);
            let h = 1e-5 * r;
            let fd = (home_value_factor(&s, r + h) - home_value_factor(&s, r - h)) / (2.0 * h);
            assert!(((d - fd) / d).abs() < 1e-8, "r {r}: {d} vs {fd}");
        }
    }

    #[test]
    fn derivative_stable_under_step_halving() {
        let s = paper_spec();
        let fd = |h: f64| {
            (home_value_factor(&s, 0.08 + h) - home_value_factor(&s, 0.08 - h)) / (2.0 * h)
        };
        let (d1, d2) = (fd(1e-4), fd(5e-5));
        let rich = (4.0 * d2 - d1) / 3.0;
        assert!(((rich - home_value_deriv(&s, 0.08)) / rich).abs() < 1e-9);
    }

    #[test]
    fn sell_payoff_values() {
        let s = paper_spec();
        let f = sell_payoff(&s).unwrap();
        let want = home_value_factor(&s, 0.026) * 0.94 - 5000.0;
        assert_eq!(f.value(0.026).unwrap(), want);
        assert!((want - 1.7194e6).abs() < 1e2, "{want}");
        assert!(f.value(0.02).unwrap() > f.value(0.03).unwrap());
        assert!(f.value(50.0).unwrap() < 0.0);
        assert_eq!(f.positive_part(50.0).unwrap(), 0.0);
    }

    #[test]
    fn buy_payoff_requires_sell_value() {
        assert!(matches!(
            buy_payoff(&paper_spec(), None),
            Err(Error::UnsolvedDependency)
        ));
    }

    #[test]
    fn invalid_specs_rejected() {
        let s = paper_spec();
        assert!(HousingSpec {
            prop_sell: 1.0,
            ..s
        }
        .validate()
        .is_err());
        assert!(HousingSpec {
            fixed_buy: 0.0,
            ..s
        }
        .validate()
        .is_err());
        assert!(HousingSpec {
            term: f64::NAN,
            ..s
        }
        .validate()
        .is_err());
    }
}
