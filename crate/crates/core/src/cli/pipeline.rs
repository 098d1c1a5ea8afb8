//! The solve pipeline: fundamental pair, sell problem, buy problem, and the
//! waiting-time series, with each failure tagged by its stage.

use serde::Serialize;

use crate::chf::SeriesControl;
use crate::hitting::{density, find_eigenvalues, ConvolutionSeries, DensitySeries, HitKind};
use crate::housing::{buy_payoff, sell_payoff};
use crate::rates::FundamentalPair;
use crate::stopping::ValueFunction;

use super::{CliError, RunConfig};

fn stage<T>(name: &'static str, r: crate::Result<T>) -> Result<T, CliError> {
    r.map_err(|source| CliError::Numerical {
        stage: name,
        source,
    })
}

/// Both solved stopping problems for one configuration.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: RunConfig,
    pub pair: FundamentalPair,
    pub sell: ValueFunction,
    pub buy: ValueFunction,
}

/// Buy and sell waiting-time series between a pair of levels.
#[derive(Debug, Clone)]
pub struct WaitingTimes {
    pub buy_level: f64,
    pub sell_level: f64,
    pub buy: DensitySeries,
    pub sell: DensitySeries,
}

impl WaitingTimes {
    pub fn total(&self) -> ConvolutionSeries {
        ConvolutionSeries::new(self.buy.clone(), self.sell.clone())
    }

    pub fn summary(&self) -> WaitSummary {
        let total = self.total();
        WaitSummary {
            buy_level: self.buy_level,
            sell_level: self.sell_level,
            buy_mean: self.buy.mean(),
            sell_mean: self.sell.mean(),
            total_mean: self.buy.mean() + self.sell.mean(),
            convolution_series_mean: total.mean(),
            buy_mass: self.buy.mass(),
            sell_mass: self.sell.mass(),
            total_mass: total.mass(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaitSummary {
    pub buy_level: f64,
    pub sell_level: f64,
    pub buy_mean: f64,
    pub sell_mean: f64,
    /// E[τ_b] + E[τ_s].
    pub total_mean: f64,
    /// First moment of the truncated convolution series; differs from
    /// `total_mean` by the truncation error in the masses.
    pub convolution_series_mean: f64,
    pub buy_mass: f64,
    pub sell_mass: f64,
    pub total_mass: f64,
}

fn round_to(x: f64, decimals: u32) -> f64 {
    let s = 10f64.powi(decimals as i32);
    (x * s).round() / s
}

impl Model {
    pub fn solve(config: &RunConfig) -> Result<Self, CliError> {
        config.validate()?;
        let pair = stage(
            "fundamental solutions",
            FundamentalPair::new(config.cir, config.discount, SeriesControl::default()),
        )?;
        let f_sell = stage("sell payoff", sell_payoff(&config.housing))?;
        let sell = stage("sell threshold", ValueFunction::solve(&pair, &f_sell))?;
        let f_buy = stage("buy payoff", buy_payoff(&config.housing, Some(&sell)))?;
        let buy = stage("buy threshold", ValueFunction::solve(&pair, &f_buy))?;
        Ok(Self {
            config: config.clone(),
            pair,
            sell,
            buy,
        })
    }

    pub fn r_sell(&self) -> f64 {
        self.sell.r_star()
    }

    pub fn r_buy(&self) -> f64 {
        self.buy.r_star()
    }

    /// Thresholds used by the hitting stage, rounded when configured.
    pub fn hitting_levels(&self) -> (f64, f64) {
        match self.config.hitting_threshold_decimals {
            Some(d) => (round_to(self.r_buy(), d), round_to(self.r_sell(), d)),
            None => (self.r_buy(), self.r_sell()),
        }
    }

    /// Waiting-time series from r0 up to `buy_level`, then down to `sell_level`.
    pub fn waiting_times(&self, buy_level: f64, sell_level: f64) -> Result<WaitingTimes, CliError> {
        let ctl = self.pair.ctl;
        let n = self.config.n_terms;
        let kappa = self.config.cir.kappa;
        let eb = stage(
            "buy eigenvalues",
            find_eigenvalues(HitKind::BuyUp, buy_level, n, &self.pair.params, &ctl),
        )?;
        let buy = stage(
            "buy density",
            density(HitKind::BuyUp, &eb, self.config.r0, kappa, &ctl),
        )?;
        let es = stage(
            "sell eigenvalues",
            find_eigenvalues(HitKind::SellDown, sell_level, n, &self.pair.params, &ctl),
        )?;
        let sell = stage(
            "sell density",
            density(HitKind::SellDown, &es, buy_level, kappa, &ctl),
        )?;
        Ok(WaitingTimes {
            buy_level,
            sell_level,
            buy,
            sell,
        })
    }

    /// Series at the configured hitting levels.
    pub fn default_waiting_times(&self) -> Result<WaitingTimes, CliError> {
        let (b, s) = self.hitting_levels();
        self.waiting_times(b, s)
    }

    /// J_b at the configured starting rate.
    pub fn strategy_value(&self) -> Result<f64, CliError> {
        stage("buy value", self.buy.evaluate(self.config.r0))
    }
}
