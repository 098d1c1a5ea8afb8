//! Monte Carlo simulation of CIR paths: first-passage times, discount
//! factors, and the value of buy-then-sell threshold strategies.
//!
//! Every path draws from its own ChaCha8 stream (seed, path index), so
//! results do not depend on execution order. Crossings are detected at grid
//! points and, optionally, between them with the Brownian-bridge crossing
//! probability exp(−2(L − x)(L − x')/(σ²x·dt)).

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::housing::{home_value_factor, HousingSpec};
use crate::rates::{CirParams, DiscountMode, DiscountSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Samples the noncentral chi-square transition law.
    ExactTransition,
    /// Euler step with negative rates truncated to zero in drift and diffusion.
    FullTruncationEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub scheme: Scheme,
    pub bridge_correction: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            dt: 1e-3,
            horizon: 200.0,
            seed: 20_240_601,
            scheme: Scheme::FullTruncationEuler,
            bridge_correction: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 1 {
            return Err(Error::InvalidParameters("n_paths must be >= 1".into()));
        }
        if !(self.dt > 0.0 && self.dt <= 0.1) {
            return Err(Error::InvalidParameters(format!(
                "dt must lie in (0, 0.1] (dt = {})",
                self.dt
            )));
        }
        if !(self.horizon >= 1.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidParameters(format!(
                "horizon must be >= 1 (horizon = {})",
                self.horizon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
}

/// Summary of a batch of simulated paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    pub n_paths: usize,
    pub hit_fraction: f64,
    /// First-passage times of the paths that hit, in path order.
    pub hitting_times: Vec<f64>,
    pub mean_hitting_time: f64,
    pub se_hitting_time: f64,
    /// Mean and standard error of the discounted payoff (currency).
    pub discounted_payoff_mean: f64,
    pub discounted_payoff_se: f64,
    /// Mean and standard error of e^{−Λ_τ}, zero on paths that never hit.
    pub lambda_factor_mean: f64,
    pub lambda_factor_se: f64,
}

impl PathStats {
    /// Empirical CDF at `t`, counting unhit paths as never hitting.
    pub fn empirical_cdf(&self, t: f64) -> f64 {
        self.hitting_times.iter().filter(|&&x| x <= t).count() as f64 / self.n_paths as f64
    }

    /// sup_t |F_emp(t) − F(t)| over the sample points.
    pub fn ks_distance<F: Fn(f64) -> f64>(&self, cdf: F) -> f64 {
        let mut times = self.hitting_times.clone();
        times.sort_by(f64::total_cmp);
        let n = self.n_paths as f64;
        let mut worst: f64 = 0.0;
        for (i, &t) in times.iter().enumerate() {
            let f = cdf(t);
            worst = worst
                .max((f - i as f64 / n).abs())
                .max((f - (i + 1) as f64 / n).abs());
        }
        worst
    }
}

/// Pairwise summation, independent of how the inputs were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One-step transition sampler.
struct Stepper {
    scheme: Scheme,
    kappa: f64,
    theta: f64,
    sigma: f64,
    sigma_sq: f64,
    dt: f64,
    sqrt_dt: f64,
    // exact-transition constants
    decay: f64,
    c: f64,
    dof: f64,
    chi_sq: Option<ChiSquared<f64>>,
    bridge: bool,
}

impl Stepper {
    fn new(cir: &CirParams, cfg: &SimConfig) -> Result<Self> {
        let (kappa, theta, sigma) = (cir.kappa, cir.theta, cir.sigma);
        let sigma_sq = sigma * sigma;
        let decay = (-kappa * cfg.dt).exp();
        let c = sigma_sq * -(-kappa * cfg.dt).exp_m1() / (4.0 * kappa);
        let dof = 4.0 * kappa * theta / sigma_sq;
        let chi_sq = if dof > 1.0 {
            Some(ChiSquared::new(dof - 1.0).map_err(|e| Error::InvalidParameters(e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            scheme: cfg.scheme,
            kappa,
            theta,
            sigma,
            sigma_sq,
            dt: cfg.dt,
            sqrt_dt: cfg.dt.sqrt(),
            decay,
            c,
            dof,
            chi_sq,
            bridge: cfg.bridge_correction,
        })
    }

    #[inline]
    fn step<R: Rng>(&self, x: f64, rng: &mut R) -> f64 {
        match self.scheme {
            Scheme::FullTruncationEuler => {
                let xp = x.max(0.0);
                let z: f64 = rng.sample(StandardNormal);
                x + self.kappa * (self.theta - xp) * self.dt
                    + self.sigma * xp.sqrt() * self.sqrt_dt * z
            }
            Scheme::ExactTransition => {
                let lambda = x.max(0.0) * self.decay / self.c;
                match &self.chi_sq {
                    Some(chi) => {
                        let z: f64 = rng.sample(StandardNormal);
                        let y = z + lambda.sqrt();
                        self.c * (y * y + chi.sample(rng))
                    }
                    None => {
                        let n = if lambda > 0.0 {
                            Poisson::new(0.5 * lambda)
                                .map(|p| p.sample(rng))
                                .unwrap_or(0.0)
                        } else {
                            0.0
                        };
                        let shape = 0.5 * self.dof + n;
                        Gamma::new(shape, 2.0).map(|g| g.sample(rng)).unwrap_or(0.0) * self.c
                    }
                }
            }
        }
    }

    /// Probability that a path bridging x → x' over one step touched `level`.
    #[inline]
    fn bridge_probability(&self, x: f64, x_next: f64, level: f64) -> f64 {
        let var = self.sigma_sq * x.max(0.0) * self.dt;
        if var <= 0.0 {
            return 0.0;
        }
        let expo = 2.0 * (level - x) * (level - x_next) / var;
        if expo > 50.0 {
            0.0
        } else {
            (-expo).exp()
        }
    }
}

/// Outcome of running one path until it crosses a level or time runs out.
struct Passage {
    /// Absolute time of the crossing.
    time: Option<f64>,
    /// ∫R over the simulated interval.
    integral: f64,
}

fn crossed(dir: Direction, x: f64, level: f64) -> bool {
    match dir {
        Direction::Up => x >= level,
        Direction::Down => x <= level,
    }
}

fn run_to_level<R: Rng>(
    stepper: &Stepper,
    rng: &mut R,
    x0: f64,
    t0: f64,
    level: f64,
    dir: Direction,
    horizon: f64,
) -> Passage {
    if crossed(dir, x0, level) {
        return Passage {
            time: Some(t0),
            integral: 0.0,
        };
    }
    let dt = stepper.dt;
    let (mut x, mut t, mut integral) = (x0, t0, 0.0);
    while t < horizon {
        let x_next = stepper.step(x, rng);
        if crossed(dir, x_next, level) {
            let frac = ((level - x) / (x_next - x)).clamp(0.0, 1.0);
            integral += 0.5 * (x + level) * frac * dt;
            let tau = t + frac * dt;
            return Passage {
                time: Some(tau),
                integral,
            };
        }
        if stepper.bridge {
            let p = stepper.bridge_probability(x, x_next, level);
            if p > 0.0 && rng.random::<f64>() < p {
                integral += 0.5 * (x + level) * 0.5 * dt;
                let tau = t + 0.5 * dt;
                return Passage {
                    time: Some(tau),
                    integral,
                };
            }
        }
        integral += 0.5 * (x + x_next.max(0.0)) * dt;
        x = x_next;
        t += dt;
    }
    Passage {
        time: None,
        integral,
    }
}

fn discount(disc: &DiscountSpec, t: f64, integral: f64) -> f64 {
    match disc.mode {
        DiscountMode::Stochastic => (-(disc.chi - disc.gamma_wage) * integral).exp(),
        DiscountMode::Constant => (-disc.chi * t + disc.gamma_wage * integral).exp(),
    }
}

fn path_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

const HIT_WARNING_FRACTION: f64 = 0.99;

/// First passage of R from `r0` to `level`, with the discount factor
/// e^{−Λ_τ} recorded per path (its mean is the payoff mean for a unit payoff).
pub fn simulate_hitting(
    cir: &CirParams,
    disc: &DiscountSpec,
    r0: f64,
    level: f64,
    direction: Direction,
    cfg: &SimConfig,
) -> Result<PathStats> {
    cfg.validate()?;
    cir.validate()?;
    if !(r0 > 0.0 && level > 0.0) {
        return Err(Error::Domain(format!(
            "rates must be positive (r0 = {r0}, level = {level})"
        )));
    }
    let wrong_side = match direction {
        Direction::Up => r0 > level,
        Direction::Down => r0 < level,
    };
    if wrong_side {
        return Err(Error::WrongSide { start: r0, level });
    }
    let stepper = Stepper::new(cir, cfg)?;
    let mut times = Vec::new();
    let mut all_times = Vec::new();
    let mut factors = Vec::with_capacity(cfg.n_paths);
    for i in 0..cfg.n_paths {
        let mut rng = path_rng(cfg.seed, i);
        let p = run_to_level(&stepper, &mut rng, r0, 0.0, level, direction, cfg.horizon);
        match p.time {
            Some(tau) => {
                times.push(tau);
                all_times.push(tau);
                factors.push(discount(disc, tau, p.integral));
            }
            None => factors.push(0.0),
        }
    }
    let hit_fraction = times.len() as f64 / cfg.n_paths as f64;
    if hit_fraction < HIT_WARNING_FRACTION {
        warn!(
            "only {:.2}% of paths reached {level} within {} years",
            100.0 * hit_fraction,
            cfg.horizon
        );
    }
    let (mean_t, se_t) = mean_se(&all_times);
    let (mean_f, se_f) = mean_se(&factors);
    Ok(PathStats {
        n_paths: cfg.n_paths,
        hit_fraction,
        hitting_times: times,
        mean_hitting_time: mean_t,
        se_hitting_time: se_t,
        discounted_payoff_mean: mean_f,
        discounted_payoff_se: se_f,
        lambda_factor_mean: mean_f,
        lambda_factor_se: se_f,
    })
}

/// Value of: buy the first time R ≥ `buy_level`, then sell the first time
/// R ≤ `sell_level`, both legs discounted by e^{−Λ}.
pub fn estimate_strategy_value(
    cir: &CirParams,
    disc: &DiscountSpec,
    spec: &HousingSpec,
    r0: f64,
    sell_level: f64,
    buy_level: f64,
    cfg: &SimConfig,
) -> Result<PathStats> {
    cfg.validate()?;
    cir.validate()?;
    if !(sell_level <= buy_level) {
        return Err(Error::Ordering(format!(
            "sell level {sell_level} exceeds buy level {buy_level}"
        )));
    }
    if !(r0 > 0.0 && sell_level > 0.0) {
        return Err(Error::Domain("rates must be positive".into()));
    }
    let stepper = Stepper::new(cir, cfg)?;
    let buy_at = |r: f64| home_value_factor(spec, r) * (1.0 + spec.prop_buy) + spec.fixed_buy;
    let sell_at = |r: f64| home_value_factor(spec, r) * (1.0 - spec.prop_sell) - spec.fixed_sell;
    let mut totals = Vec::with_capacity(cfg.n_paths);
    let mut factors = Vec::with_capacity(cfg.n_paths);
    let mut times = Vec::new();
    for i in 0..cfg.n_paths {
        let mut rng = path_rng(cfg.seed, i);
        let buy = run_to_level(
            &stepper,
            &mut rng,
            r0,
            0.0,
            buy_level,
            Direction::Up,
            cfg.horizon,
        );
        let Some(tb) = buy.time else {
            totals.push(0.0);
            factors.push(0.0);
            continue;
        };
        // a start above the buy level buys at the start rate
        let rb = if r0 >= buy_level { r0 } else { buy_level };
        let db = discount(disc, tb, buy.integral);
        let mut total = -db * buy_at(rb);
        let sell = run_to_level(
            &stepper,
            &mut rng,
            rb,
            tb,
            sell_level,
            Direction::Down,
            cfg.horizon,
        );
        if let Some(ts) = sell.time {
            let ds = discount(disc, ts, buy.integral + sell.integral);
            total += ds * sell_at(sell_level);
            times.push(ts);
        }
        totals.push(total);
        factors.push(db);
    }
    let hit_fraction = times.len() as f64 / cfg.n_paths as f64;
    if hit_fraction < HIT_WARNING_FRACTION {
        warn!(
            "only {:.2}% of strategy paths completed within {} years",
            100.0 * hit_fraction,
            cfg.horizon
        );
    }
    let (mean_t, se_t) = mean_se(&times);
    let (mean_v, se_v) = mean_se(&totals);
    let (mean_f, se_f) = mean_se(&factors);
    Ok(PathStats {
        n_paths: cfg.n_paths,
        hit_fraction,
        hitting_times: times,
        mean_hitting_time: mean_t,
        se_hitting_time: se_t,
        discounted_payoff_mean: mean_v,
        discounted_payoff_se: se_v,
        lambda_factor_mean: mean_f,
        lambda_factor_se: se_f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cir() -> CirParams {
        CirParams::new(0.9, 0.08 / 0.9, 0.033f64.sqrt()).unwrap()
    }

    fn disc() -> DiscountSpec {
        DiscountSpec::stochastic(0.6, 0.4)
    }

    fn small(scheme: Scheme) -> SimConfig {
        SimConfig {
            n_paths: 2000,
            dt: 1e-3,
            horizon: 100.0,
            seed: 7,
            scheme,
            bridge_correction: true,
        }
    }

    #[test]
    fn start_at_level_hits_immediately() {
        let s = simulate_hitting(
            &cir(),
            &disc(),
            0.1,
            0.1,
            Direction::Up,
            &small(Scheme::ExactTransition),
        )
        .unwrap();
        assert_eq!(s.hit_fraction, 1.0);
        assert!(s.hitting_times.iter().all(|&t| t == 0.0));
        assert_eq!(s.lambda_factor_mean, 1.0);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let cfg = small(Scheme::FullTruncationEuler);
        let a = simulate_hitting(&cir(), &disc(), 0.08, 0.12, Direction::Up, &cfg).unwrap();
        let b = simulate_hitting(&cir(), &disc(), 0.08, 0.12, Direction::Up, &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate_hitting(
            &cir(),
            &disc(),
            0.08,
            0.12,
            Direction::Up,
            &SimConfig { seed: 8, ..cfg },
        )
        .unwrap();
        assert_ne!(a.mean_hitting_time, c.mean_hitting_time);
    }

    #[test]
    fn path_streams_are_independent_of_batch_size() {
        let cfg = small(Scheme::FullTruncationEuler);
        let a = simulate_hitting(
            &cir(),
            &disc(),
            0.08,
            0.1,
            Direction::Up,
            &SimConfig { n_paths: 10, ..cfg },
        )
        .unwrap();
        let b = simulate_hitting(
            &cir(),
            &disc(),
            0.08,
            0.1,
            Direction::Up,
            &SimConfig { n_paths: 20, ..cfg },
        )
        .unwrap();
        assert_eq!(
            a.hitting_times[..],
            b.hitting_times[..a.hitting_times.len()]
        );
    }

    #[test]
    fn exact_transition_moments() {
        // E[R_t | R_0] = θ + (R_0 − θ)e^{−κt}
        let cfg = SimConfig {
            dt: 0.1,
            ..small(Scheme::ExactTransition)
        };
        let stepper = Stepper::new(&cir(), &cfg).unwrap();
        let mut rng = path_rng(3, 0);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| stepper.step(0.2, &mut rng)).collect();
        let (mean, se) = mean_se(&xs);
        let c = cir();
        let want = c.theta + (0.2 - c.theta) * (-c.kappa * 0.1f64).exp();
        assert!((mean - want).abs() < 4.0 * se, "{mean} vs {want} (se {se})");
        assert!(xs.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn rejects_invalid_config() {
        let bad = SimConfig {
            dt: 0.5,
            ..small(Scheme::ExactTransition)
        };
        assert!(simulate_hitting(&cir(), &disc(), 0.08, 0.1, Direction::Up, &bad).is_err());
        let wrong = simulate_hitting(
            &cir(),
            &disc(),
            0.2,
            0.1,
            Direction::Up,
            &small(Scheme::ExactTransition),
        );
        assert!(matches!(wrong, Err(Error::WrongSide { .. })));
    }

    #[test]
    fn cost_free_round_trip_is_worthless() {
        let spec = HousingSpec {
            cash_scale: 1e5,
            spread: 0.01,
            term: 30.0,
            prop_buy: 0.0,
            prop_sell: 0.0,
            fixed_buy: 0.0,
            fixed_sell: 0.0,
        };
        let cfg = SimConfig {
            n_paths: 500,
            ..small(Scheme::FullTruncationEuler)
        };
        let s = estimate_strategy_value(&cir(), &disc(), &spec, 0.05, 0.1, 0.1, &cfg).unwrap();
        assert!(
            s.discounted_payoff_mean.abs() < 1e-6,
            "{}",
            s.discounted_payoff_mean
        );
    }

    #[test]
    fn pairwise_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64 * 0.5).collect();
        assert_eq!(pairwise_sum(&xs), 249_750.0);
    }
}
