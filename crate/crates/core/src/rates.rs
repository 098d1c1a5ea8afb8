//! CIR short-rate model, discounting modes, and the fundamental solutions
//! u₊ (increasing) and u₋ (decreasing) of the discounted generator equation
//!
//! κ(θ − r)u' + ½σ²r u'' − k(r) u = 0,
//!
//! where the killing rate k(r) is (χ − γ)r under stochastic discounting and
//! χ − γr under constant discounting.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chf::{
    kummer_m, ln_kummer_m, tricomi_u, tricomi_u_integral_with, LaguerreRule, SeriesControl,
};
use crate::error::{Error, Result};
use crate::roots::{brent, Tolerance};

/// Parameters of dR = κ(θ − R)dt + σ√R dW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CirParams {
    pub kappa: f64,
    pub theta: f64,
    pub sigma: f64,
}

impl CirParams {
    pub fn new(kappa: f64, theta: f64, sigma: f64) -> Result<Self> {
        let p = Self {
            kappa,
            theta,
            sigma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let Self {
            kappa,
            theta,
            sigma,
        } = *self;
        if !(kappa > 0.0 && theta > 0.0 && sigma > 0.0)
            || !(kappa.is_finite() && theta.is_finite() && sigma.is_finite())
        {
            return Err(Error::InvalidParameters(format!(
                "CIR parameters must be positive and finite (kappa = {kappa}, theta = {theta}, sigma = {sigma})"
            )));
        }
        if 2.0 * kappa * theta <= sigma * sigma {
            return Err(Error::InvalidParameters(format!(
                "Feller condition 2*kappa*theta > sigma^2 fails ({} <= {})",
                2.0 * kappa * theta,
                sigma * sigma
            )));
        }
        Ok(())
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma * self.sigma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscountMode {
    /// Discount factor exp(−(χ − γ)∫R).
    Stochastic,
    /// Discount factor exp(−χt + γ∫R).
    Constant,
}

/// Investor discounting χ and wage-growth proportionality γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscountSpec {
    pub mode: DiscountMode,
    pub chi: f64,
    pub gamma_wage: f64,
}

impl DiscountSpec {
    pub fn stochastic(chi: f64, gamma_wage: f64) -> Self {
        Self {
            mode: DiscountMode::Stochastic,
            chi,
            gamma_wage,
        }
    }

    pub fn constant(chi: f64, gamma_wage: f64) -> Self {
        Self {
            mode: DiscountMode::Constant,
            chi,
            gamma_wage,
        }
    }

    /// Instantaneous discount rate at short rate `r`.
    pub fn killing_rate(&self, r: f64) -> f64 {
        match self.mode {
            DiscountMode::Stochastic => (self.chi - self.gamma_wage) * r,
            DiscountMode::Constant => self.chi - self.gamma_wage * r,
        }
    }
}

/// Parameters of u± = e^{−νr}·{M, U}(α, β, ζr), plus the density scale ω.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformParams {
    pub alpha: f64,
    pub beta: f64,
    pub xi: f64,
    pub zeta: f64,
    pub nu: f64,
    pub omega: f64,
}

pub fn derive_transform(cir: &CirParams, disc: &DiscountSpec) -> Result<TransformParams> {
    cir.validate()?;
    let DiscountSpec {
        mode,
        chi,
        gamma_wage: gam,
    } = *disc;
    if !(chi > 0.0 && gam > 0.0) || !(chi.is_finite() && gam.is_finite()) {
        return Err(Error::InvalidParameters(format!(
            "chi and gamma must be positive (chi = {chi}, gamma = {gam})"
        )));
    }
    let CirParams { kappa, theta, .. } = *cir;
    let s2 = cir.sigma_sq();
    let beta = 2.0 * kappa * theta / s2;
    let (xi, alpha) = match mode {
        DiscountMode::Stochastic => {
            if chi <= gam {
                return Err(Error::InvalidParameters(format!(
                    "stochastic discounting requires chi > gamma ({chi} <= {gam})"
                )));
            }
            let xi = (kappa * kappa + 2.0 * s2 * (chi - gam)).sqrt();
            (xi, kappa * theta / s2 * (1.0 - kappa / xi))
        }
        DiscountMode::Constant => {
            let disc_sq = kappa * kappa - 2.0 * gam * s2;
            if disc_sq <= 0.0 {
                return Err(Error::InvalidParameters(format!(
                    "constant discounting requires kappa^2 > 2*gamma*sigma^2 ({} <= {})",
                    kappa * kappa,
                    2.0 * gam * s2
                )));
            }
            let xi = disc_sq.sqrt();
            let gate = 0.5 * beta * (kappa - xi);
            if chi <= gate {
                return Err(Error::InvalidParameters(format!(
                    "constant discounting requires chi > (beta/2)(kappa - sqrt(kappa^2 - 2*gamma*sigma^2)) = {gate} (chi = {chi})"
                )));
            }
            let alpha = kappa * theta / s2 * (1.0 - (kappa - s2 * chi / (kappa * theta)) / xi);
            (xi, alpha)
        }
    };
    Ok(TransformParams {
        alpha,
        beta,
        xi,
        zeta: 2.0 * xi / s2,
        nu: (xi - kappa) / s2,
        omega: 2.0 * kappa / s2,
    })
}

/// u₊, u₋ and their first derivatives at one rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalValues {
    pub u_plus: f64,
    pub u_minus: f64,
    pub du_plus: f64,
    pub du_minus: f64,
}

impl FundamentalValues {
    /// g'(r) = (u₊'u₋ − u₊u₋')/u₊².
    pub fn g_prime(&self) -> f64 {
        (self.du_plus * self.u_minus - self.u_plus * self.du_minus) / (self.u_plus * self.u_plus)
    }

    pub fn g(&self) -> f64 {
        -self.u_minus / self.u_plus
    }
}

/// Quadrature rules reused for U(α, ·) and U(α + 1, ·).
#[derive(Debug)]
struct CachedRules {
    a0: (LaguerreRule, LaguerreRule),
    a1: (LaguerreRule, LaguerreRule),
}

/// Evaluator for the fundamental solutions of one (CIR, discount) pair.
#[derive(Debug, Clone)]
pub struct FundamentalPair {
    pub cir: CirParams,
    pub disc: DiscountSpec,
    pub params: TransformParams,
    pub ctl: SeriesControl,
    rules: Option<Arc<CachedRules>>,
}

/// Smallest argument at which U goes through the cached quadrature rules.
const U_QUAD_MIN_Z: f64 = 0.05;

impl FundamentalPair {
    pub fn new(cir: CirParams, disc: DiscountSpec, ctl: SeriesControl) -> Result<Self> {
        ctl.validate()?;
        let params = derive_transform(&cir, &disc)?;
        let rules = if params.alpha > 0.0 {
            let n = ctl.quad_nodes;
            let a = params.alpha;
            Some(Arc::new(CachedRules {
                a0: (
                    LaguerreRule::new(n, a - 1.0)?,
                    LaguerreRule::new(2 * n, a - 1.0)?,
                ),
                a1: (LaguerreRule::new(n, a)?, LaguerreRule::new(2 * n, a)?),
            }))
        } else {
            None
        };
        Ok(Self {
            cir,
            disc,
            params,
            ctl,
            rules,
        })
    }

    fn check_rate(r: f64) -> Result<()> {
        if r > 0.0 && r.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "rate must be positive and finite (r = {r})"
            )))
        }
    }

    /// U(α + shift, β + shift, z) for shift ∈ {0, 1}, through cached rules when possible.
    fn u_fn(&self, shift: u8, z: f64) -> Result<f64> {
        let a = self.params.alpha + f64::from(shift);
        let b = self.params.beta + f64::from(shift);
        if let (Some(rules), true) = (&self.rules, z >= U_QUAD_MIN_Z) {
            let pair = if shift == 0 { &rules.a0 } else { &rules.a1 };
            if let Ok(v) = tricomi_u_integral_with((&pair.0, &pair.1), a, b, z) {
                return Ok(v);
            }
        }
        tricomi_u(a, b, z, &self.ctl)
    }

    fn m_fn(&self, shift: u8, z: f64) -> Result<f64> {
        let s = f64::from(shift);
        kummer_m(self.params.alpha + s, self.params.beta + s, z, &self.ctl)
    }

    pub fn u_plus(&self, r: f64) -> Result<f64> {
        Self::check_rate(r)?;
        let p = &self.params;
        Ok((-p.nu * r).exp() * self.m_fn(0, p.zeta * r)?)
    }

    pub fn u_minus(&self, r: f64) -> Result<f64> {
        Self::check_rate(r)?;
        let p = &self.params;
        Ok((-p.nu * r).exp() * self.u_fn(0, p.zeta * r)?)
    }

    pub fn u_plus_prime(&self, r: f64) -> Result<f64> {
        Self::check_rate(r)?;
        let p = &self.params;
        let z = p.zeta * r;
        Ok((-p.nu * r).exp()
            * (-p.nu * self.m_fn(0, z)? + p.alpha * p.zeta / p.beta * self.m_fn(1, z)?))
    }

    pub fn u_minus_prime(&self, r: f64) -> Result<f64> {
        Self::check_rate(r)?;
        let p = &self.params;
        let z = p.zeta * r;
        Ok((-p.nu * r).exp() * (-p.nu * self.u_fn(0, z)? - p.alpha * p.zeta * self.u_fn(1, z)?))
    }

    /// All four values at once (shares the CHF evaluations).
    pub fn eval(&self, r: f64) -> Result<FundamentalValues> {
        Self::check_rate(r)?;
        let p = &self.params;
        let z = p.zeta * r;
        let e = (-p.nu * r).exp();
        let (m0, m1) = (self.m_fn(0, z)?, self.m_fn(1, z)?);
        let (w0, w1) = (self.u_fn(0, z)?, self.u_fn(1, z)?);
        let v = FundamentalValues {
            u_plus: e * m0,
            u_minus: e * w0,
            du_plus: e * (-p.nu * m0 + p.alpha * p.zeta / p.beta * m1),
            du_minus: e * (-p.nu * w0 - p.alpha * p.zeta * w1),
        };
        if !(v.u_plus.is_finite()
            && v.u_minus.is_finite()
            && v.du_plus.is_finite()
            && v.du_minus.is_finite())
        {
            return Err(Error::Overflow("fundamental solutions"));
        }
        Ok(v)
    }

    /// u₊'/u₊, free of the exponential prefactor.
    pub fn log_deriv_plus(&self, r: f64) -> Result<f64> {
        Self::check_rate(r)?;
        let p = &self.params;
        let z = p.zeta * r;
        Ok(-p.nu + p.alpha * p.zeta / p.beta * self.m_fn(1, z)? / self.m_fn(0, z)?)
    }

    /// u₋'/u₋, free of the exponential prefactor.
    pub fn log_deriv_minus(&self, r: f64) -> Result<f64> {
        Self::check_rate(r)?;
        let p = &self.params;
        let z = p.zeta * r;
        Ok(-p.nu - p.alpha * p.zeta * self.u_fn(1, z)? / self.u_fn(0, z)?)
    }

    /// ln u₊(r); stays finite where u₊ itself overflows.
    pub fn ln_u_plus(&self, r: f64) -> Result<f64> {
        Self::check_rate(r)?;
        let p = &self.params;
        let z = p.zeta * r;
        let ln_m = if p.alpha > 0.0 {
            ln_kummer_m(p.alpha, p.beta, z, &self.ctl)?
        } else {
            let m = self.m_fn(0, z)?;
            if m <= 0.0 {
                return Err(Error::Domain(format!("u_plus is not positive at r = {r}")));
            }
            m.ln()
        };
        Ok(-p.nu * r + ln_m)
    }

    /// ln u₋(r).
    pub fn ln_u_minus(&self, r: f64) -> Result<f64> {
        Self::check_rate(r)?;
        let p = &self.params;
        let u = self.u_fn(0, p.zeta * r)?;
        if u <= 0.0 {
            return Err(Error::Domain(format!("u_minus is not positive at r = {r}")));
        }
        Ok(-p.nu * r + u.ln())
    }
}

pub fn fundamental_pair(
    cir: CirParams,
    disc: DiscountSpec,
    ctl: SeriesControl,
) -> Result<FundamentalPair> {
    FundamentalPair::new(cir, disc, ctl)
}

/// g(r) = −u₋(r)/u₊(r), computed through logarithms.
pub fn transform_g(pair: &FundamentalPair, r: f64) -> Result<f64> {
    let ln_ratio = pair.ln_u_minus(r)? - pair.ln_u_plus(r)?;
    let g = -ln_ratio.exp();
    if g == 0.0 || !g.is_finite() {
        return Err(Error::Overflow("transform_g"));
    }
    Ok(g)
}

const INVERT_R_MIN: f64 = 1e-12;
const INVERT_R_MAX: f64 = 1e4;

/// r with g(r) = q, for q < 0 inside the range of g.
pub fn invert_g(pair: &FundamentalPair, q: f64) -> Result<f64> {
    if !(q < 0.0) || !q.is_finite() {
        return Err(Error::OutOfRange(q));
    }
    let target = (-q).ln();
    // ln(−g) is decreasing in r
    let h = |r: f64| -> Result<f64> { Ok(pair.ln_u_minus(r)? - pair.ln_u_plus(r)? - target) };
    let theta = pair.cir.theta;
    let h_theta = h(theta)?;
    let (lo, hi) = if h_theta > 0.0 {
        let mut lo = theta;
        let mut hi = theta * 2.0;
        while h(hi)? > 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > INVERT_R_MAX {
                return Err(Error::OutOfRange(q));
            }
        }
        (lo, hi)
    } else {
        let mut hi = theta;
        let mut lo = theta / 2.0;
        while h(lo)? < 0.0 {
            hi = lo;
            lo /= 2.0;
            if lo < INVERT_R_MIN {
                return Err(Error::OutOfRange(q));
            }
        }
        (lo, hi)
    };
    let tol = Tolerance {
        abs: 0.0,
        rel: 2.0 * f64::EPSILON,
        max_iter: 200,
    };
    brent(h, lo, hi, tol, "g(r) = q")
}
