//! First-passage times of the CIR process through a fixed level.
//!
//! For an upward passage to `level` from below, the density is
//! p(t) = −κ Σ m_n k_n e^{κ k_n t}, where the k_n < 0 are the zeros in k of
//! M(k, β, ω·level) and m_n = −M(k_n, β, ω·r)/(k_n ∂_k M(k_n, β, ω·level)).
//! Downward passages use U in place of M. U is handled through the scaled
//! function U(k, β, z)/Γ(β − k), which has the same zeros and gives the same
//! coefficients, since the Γ factors cancel in the ratio.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::chf::{central_difference, default_a_step, kummer_m, tricomi_u_scaled, SeriesControl};
use crate::error::{Error, Result};
use crate::rates::TransformParams;
use crate::roots::{brent, Tolerance};

/// Default number of series terms.
pub const DEFAULT_TERMS: usize = 100;
/// Smallest time at which the truncated series is meant to be evaluated.
pub const T_MIN: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HitKind {
    /// Rate rises to the level (waiting to buy).
    BuyUp,
    /// Rate falls to the level (waiting to sell).
    SellDown,
}

/// Negative zeros k_1 > k_2 > … of the passage eigenfunction at `level`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSeries {
    pub kind: HitKind,
    pub level: f64,
    pub roots: Vec<f64>,
    pub n_terms: usize,
    pub omega: f64,
    pub beta: f64,
}

fn eigenfunction(kind: HitKind, k: f64, beta: f64, z: f64, ctl: &SeriesControl) -> Result<f64> {
    match kind {
        HitKind::BuyUp => kummer_m(k, beta, z, ctl),
        HitKind::SellDown => tricomi_u_scaled(k, beta, z, ctl),
    }
}

/// Largest ratio of consecutive root gaps accepted before a root is
/// presumed skipped.
const GAP_RATIO_LIMIT: f64 = 1.6;
const INITIAL_STEP: f64 = 0.25;
const MAX_SCAN_STEPS: usize = 10_000_000;

pub fn find_eigenvalues(
    kind: HitKind,
    level: f64,
    n_terms: usize,
    params: &TransformParams,
    ctl: &SeriesControl,
) -> Result<EigenSeries> {
    if !(level > 0.0 && level.is_finite()) {
        return Err(Error::Domain(format!(
            "level must be positive (level = {level})"
        )));
    }
    if n_terms == 0 {
        return Err(Error::InvalidParameters("n_terms must be >= 1".into()));
    }
    let (beta, omega) = (params.beta, params.omega);
    let z = omega * level;
    let f = |k: f64| eigenfunction(kind, k, beta, z, ctl);
    let tol = Tolerance {
        abs: 0.0,
        rel: 1e-13,
        max_iter: 200,
    };

    let mut roots: Vec<f64> = Vec::with_capacity(n_terms);
    let mut k = -1e-12;
    let mut fk = f(k)?;
    let mut step = INITIAL_STEP.min(1.0 / z.max(1e-3));
    let mut scans = 0;
    while roots.len() < n_terms {
        scans += 1;
        if scans > MAX_SCAN_STEPS {
            return Err(Error::NonConvergence {
                what: "eigenvalue scan",
                iterations: scans,
            });
        }
        let k2 = k - step;
        let f2 = f(k2)?;
        if f2 == 0.0 || f2.signum() != fk.signum() {
            let root = if f2 == 0.0 {
                k2
            } else {
                brent(f, k2, k, tol, "eigenvalue")?
            };
            roots.push(root);
            let n = roots.len();
            if n >= 2 {
                step = step.max((roots[n - 2] - roots[n - 1]) / 8.0);
            }
            if n >= 3 {
                let (g1, g2) = (roots[n - 3] - roots[n - 2], roots[n - 2] - roots[n - 1]);
                if g2 > GAP_RATIO_LIMIT * g1 {
                    return Err(Error::MissedRoot(0.5 * (roots[n - 2] + roots[n - 1])));
                }
            }
            if f2 == 0.0 {
                // step past the exact zero so the sign test restarts cleanly
                k = k2 - 1e-9 * k2.abs().max(1.0);
                fk = f(k)?;
                continue;
            }
        }
        k = k2;
        fk = f2;
    }
    Ok(EigenSeries {
        kind,
        level,
        roots,
        n_terms,
        omega,
        beta,
    })
}

impl EigenSeries {
    /// Eigenfunction residual at each root, relative to the function scale
    /// on a neighbourhood of the root.
    pub fn residuals(&self, ctl: &SeriesControl) -> Result<Vec<f64>> {
        let z = self.omega * self.level;
        self.roots
            .iter()
            .map(|&k| {
                let at = eigenfunction(self.kind, k, self.beta, z, ctl)?;
                let h = 0.05 * (1.0 + k.abs().sqrt());
                let scale = eigenfunction(self.kind, k - h, self.beta, z, ctl)?
                    .abs()
                    .max(eigenfunction(self.kind, k + h, self.beta, z, ctl)?.abs());
                Ok(at.abs() / scale)
            })
            .collect()
    }
}

/// Truncated first-passage density series from a fixed start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySeries {
    pub eigen: EigenSeries,
    pub start: f64,
    pub kappa: f64,
    pub coeffs: Vec<f64>,
}

pub fn density(
    kind: HitKind,
    eigen: &EigenSeries,
    start: f64,
    kappa: f64,
    ctl: &SeriesControl,
) -> Result<DensitySeries> {
    if eigen.kind != kind {
        return Err(Error::InvalidParameters(
            "eigen series kind does not match".into(),
        ));
    }
    let wrong_side = match kind {
        HitKind::BuyUp => !(start < eigen.level),
        HitKind::SellDown => !(start > eigen.level),
    };
    if wrong_side || !(start > 0.0) {
        return Err(Error::WrongSide {
            start,
            level: eigen.level,
        });
    }
    let (beta, z_level, z_start) = (eigen.beta, eigen.omega * eigen.level, eigen.omega * start);
    let mut coeffs = Vec::with_capacity(eigen.roots.len());
    for &k in &eigen.roots {
        let (d, _) = central_difference(
            |a| eigenfunction(kind, a, beta, z_level, ctl),
            k,
            default_a_step(k),
        )?;
        if d == 0.0 || !d.is_finite() {
            return Err(Error::DegenerateRoot(k));
        }
        let num = eigenfunction(kind, k, beta, z_start, ctl)?;
        coeffs.push(-num / (k * d));
    }
    Ok(DensitySeries {
        eigen: eigen.clone(),
        start,
        kappa,
        coeffs,
    })
}

impl DensitySeries {
    pub fn roots(&self) -> &[f64] {
        &self.eigen.roots
    }

    fn terms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.coeffs
            .iter()
            .copied()
            .zip(self.eigen.roots.iter().copied())
    }

    /// p(t); the truncated series oscillates below `T_MIN`.
    pub fn evaluate(&self, t: f64) -> f64 {
        -self.kappa
            * self
                .terms()
                .map(|(m, k)| m * k * (self.kappa * k * t).exp())
                .sum::<f64>()
    }

    /// ∫₀ᵗ p.
    pub fn cdf(&self, t: f64) -> f64 {
        self.terms()
            .map(|(m, k)| -m * (self.kappa * k * t).exp_m1())
            .sum()
    }

    /// ∫ₐᵇ p, term by term.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.terms()
            .map(|(m, k)| m * ((self.kappa * k * a).exp() - (self.kappa * k * b).exp()))
            .sum()
    }

    /// Σ m_n, the total mass of the truncated series.
    pub fn mass(&self) -> f64 {
        self.coeffs.iter().sum()
    }

    /// −(1/κ) Σ m_n/k_n.
    pub fn mean(&self) -> f64 {
        -self.terms().map(|(m, k)| m / k).sum::<f64>() / self.kappa
    }
}

/// Density of the sum of independent buy and sell waiting times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionSeries {
    pub buy: DensitySeries,
    pub sell: DensitySeries,
}

/// Roots closer than this are treated as coincident.
const COINCIDENT_ROOTS: f64 = 1e-10;

pub fn convolution_density(buy: &DensitySeries, sell: &DensitySeries, t: f64) -> f64 {
    let kappa = buy.kappa;
    if (sell.kappa - kappa).abs() > 1e-15 * kappa {
        warn!("convolving densities with different kappa; using the buy value");
    }
    let eb: Vec<(f64, f64)> = buy
        .terms()
        .map(|(m, k)| (m * k, (kappa * k * t).exp()))
        .collect();
    let es: Vec<(f64, f64, f64)> = sell
        .terms()
        .map(|(m, k)| (m * k, k, (kappa * k * t).exp()))
        .collect();
    let mut total = 0.0;
    for ((ab, eib), kb) in eb.iter().zip(buy.eigen.roots.iter()) {
        let mut row = 0.0;
        for &(as_, ks, ejs) in &es {
            let bracket = if (kb - ks).abs() < COINCIDENT_ROOTS {
                t * eib
            } else {
                (eib - ejs) / (kappa * (kb - ks))
            };
            row += as_ * bracket;
        }
        total += ab * row;
    }
    kappa * kappa * total
}

impl ConvolutionSeries {
    pub fn new(buy: DensitySeries, sell: DensitySeries) -> Self {
        Self { buy, sell }
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        convolution_density(&self.buy, &self.sell, t)
    }

    /// Σ m_b Σ m_s.
    pub fn mass(&self) -> f64 {
        self.buy.mass() * self.sell.mass()
    }

    /// Mean of the convolved series, −(1/κ)Σ_i Σ_j m_i m_j (1/k_i + 1/k_j).
    pub fn mean(&self) -> f64 {
        self.buy.mean() * self.sell.mass() + self.sell.mean() * self.buy.mass()
    }
}
