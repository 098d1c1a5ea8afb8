//! Monte Carlo cross-checks of the analytic solution.

use serde::Serialize;

use crate::mc::{estimate_strategy_value, simulate_hitting, Direction, PathStats, SimConfig};

use super::pipeline::Model;
use super::CliError;

/// Perturbation applied to the buy level in the optimality checks.
pub const BUY_LEVEL_PERTURBATION: f64 = 0.02;
/// Largest accepted KS distance between simulated and series CDFs.
pub const KS_LIMIT: f64 = 0.02;
/// Agreement window, in standard errors.
pub const SE_WINDOW: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Simulated statistic.
    pub simulated: f64,
    /// Analytic counterpart (or the bound it is compared against).
    pub reference: f64,
    /// Allowed deviation.
    pub tolerance: f64,
}

impl Check {
    fn within(name: &str, simulated: f64, reference: f64, tolerance: f64) -> Self {
        let passed = (simulated - reference).abs() <= tolerance;
        Self {
            name: name.into(),
            passed,
            simulated,
            reference,
            tolerance,
        }
    }

    fn at_most(name: &str, simulated: f64, bound: f64, tolerance: f64) -> Self {
        let passed = simulated <= bound + tolerance;
        Self {
            name: name.into(),
            passed,
            simulated,
            reference: bound,
            tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSummary {
    pub name: String,
    pub hit_fraction: f64,
    pub mean_hitting_time: f64,
    pub se_hitting_time: f64,
    pub discounted_payoff_mean: f64,
    pub discounted_payoff_se: f64,
}

impl SimSummary {
    fn new(name: &str, s: &PathStats) -> Self {
        Self {
            name: name.into(),
            hit_fraction: s.hit_fraction,
            mean_hitting_time: s.mean_hitting_time,
            se_hitting_time: s.se_hitting_time,
            discounted_payoff_mean: s.discounted_payoff_mean,
            discounted_payoff_se: s.discounted_payoff_se,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationOutcome {
    pub sim: SimConfig,
    pub checks: Vec<Check>,
    pub simulations: Vec<SimSummary>,
}

impl ValidationOutcome {
    pub fn failed(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.clone())
            .collect()
    }
}

fn mc_stage<T>(r: crate::Result<T>) -> Result<T, CliError> {
    r.map_err(|source| CliError::Numerical {
        stage: "monte carlo",
        source,
    })
}

fn analytic<T>(r: crate::Result<T>) -> Result<T, CliError> {
    r.map_err(|source| CliError::Numerical {
        stage: "validation reference",
        source,
    })
}

/// Runs the simulation suite against a solved model.
pub fn run_checks(model: &Model, sim: &SimConfig) -> Result<ValidationOutcome, CliError> {
    let cfg = &model.config;
    let (cir, disc) = (&cfg.cir, &cfg.discount);
    let pair = &model.pair;
    let waits = model.default_waiting_times()?;
    let (bl, sl) = (waits.buy_level, waits.sell_level);
    let mut checks = Vec::new();
    let mut sims = Vec::new();

    let up = mc_stage(simulate_hitting(cir, disc, cfg.r0, bl, Direction::Up, sim))?;
    checks.push(Check::within(
        "buy_wait_mean",
        up.mean_hitting_time,
        waits.buy.mean(),
        SE_WINDOW * up.se_hitting_time,
    ));
    checks.push(Check::at_most(
        "buy_wait_ks",
        up.ks_distance(|t| waits.buy.cdf(t)),
        0.0,
        KS_LIMIT,
    ));
    let lam_up = analytic(pair.u_plus(cfg.r0))? / analytic(pair.u_plus(bl))?;
    checks.push(Check::within(
        "discount_identity_up",
        up.lambda_factor_mean,
        lam_up,
        SE_WINDOW * up.lambda_factor_se,
    ));
    sims.push(SimSummary::new("buy_wait", &up));

    let down = mc_stage(simulate_hitting(cir, disc, bl, sl, Direction::Down, sim))?;
    checks.push(Check::within(
        "sell_wait_mean",
        down.mean_hitting_time,
        waits.sell.mean(),
        SE_WINDOW * down.se_hitting_time,
    ));
    checks.push(Check::at_most(
        "sell_wait_ks",
        down.ks_distance(|t| waits.sell.cdf(t)),
        0.0,
        KS_LIMIT,
    ));
    let lam_down = analytic(pair.u_minus(bl))? / analytic(pair.u_minus(sl))?;
    checks.push(Check::within(
        "discount_identity_down",
        down.lambda_factor_mean,
        lam_down,
        SE_WINDOW * down.lambda_factor_se,
    ));
    sims.push(SimSummary::new("sell_wait", &down));

    let (rs, rb) = (model.r_sell(), model.r_buy());
    let strategy = |buy_level: f64| {
        mc_stage(estimate_strategy_value(
            cir,
            disc,
            &cfg.housing,
            cfg.r0,
            rs,
            buy_level,
            sim,
        ))
    };
    let best = strategy(rb)?;
    let j_b = model.strategy_value()?;
    checks.push(Check::within(
        "strategy_value",
        best.discounted_payoff_mean,
        j_b,
        SE_WINDOW * best.discounted_payoff_se,
    ));
    sims.push(SimSummary::new("strategy_optimal", &best));
    for (name, level) in [
        ("perturbed_buy_up", rb + BUY_LEVEL_PERTURBATION),
        ("perturbed_buy_down", rb - BUY_LEVEL_PERTURBATION),
    ] {
        let p = strategy(level)?;
        let se = p.discounted_payoff_se.hypot(best.discounted_payoff_se);
        checks.push(Check::at_most(
            name,
            p.discounted_payoff_mean,
            best.discounted_payoff_mean,
            SE_WINDOW * se,
        ));
        sims.push(SimSummary::new(name, &p));
    }
    Ok(ValidationOutcome {
        sim: *sim,
        checks,
        simulations: sims,
    })
}
