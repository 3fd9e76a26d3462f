//! Discrete multiplicative tatonnement with reserve prices.
//!
//! Each round every good moves from the same snapshot of excess demand:
//! `p_j <- p_j * exp(lambda * min(z_j, 1))`, unless that would take the price
//! below its reserve, in which case the price lands exactly on `r_j`.

use crate::error::{Error, Result};
use crate::market::{Market, PriceVector, SpendingMatrix};
use crate::theory;

/// Consecutive quiet steps required before a run is declared to have plateaued.
pub const PLATEAU_WINDOW: usize = 10;

/// Default plateau tolerance relative to `max(1, |F(p0)|)`.
pub const DEFAULT_RELATIVE_STOP_TOL: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct TatConfig {
    pub lambda: f64,
    /// Large-market threshold: buyers with `rho >= sigma` are the near-linear ones.
    pub sigma: f64,
    pub theta: f64,
    pub max_iters: usize,
    /// Absolute plateau tolerance; `None` means relative to the starting potential.
    pub stop_tol: Option<f64>,
}

impl TatConfig {
    pub fn new(lambda: f64, sigma: f64, theta: f64) -> Result<Self> {
        let config = TatConfig {
            lambda,
            sigma,
            theta,
            max_iters: 1000,
            stop_tol: None,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_stop_tol(mut self, stop_tol: f64) -> Self {
        self.stop_tol = Some(stop_tol);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::invalid("lambda", format!("must lie in (0, 1], got {}", self.lambda)));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::invalid("sigma", format!("must lie in (0, 1), got {}", self.sigma)));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::invalid("theta", format!("must lie in (0, 1), got {}", self.theta)));
        }
        if self.lambda * self.sigma / (1.0 - self.sigma) > 1.0 {
            return Err(Error::invalid(
                "sigma",
                "lambda * sigma / (1 - sigma) must not exceed 1",
            ));
        }
        if let Some(tol) = self.stop_tol {
            if !(tol >= 0.0 && tol.is_finite()) {
                return Err(Error::invalid("stop_tol", "must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

/// One synchronous price update.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub prices_before: PriceVector,
    pub prices_after: PriceVector,
    pub spendings_before: SpendingMatrix,
    pub spendings_after: SpendingMatrix,
    /// Supplies in force during this step.
    pub supplies: Vec<f64>,
    /// Excess demand at `prices_before`.
    pub z: Vec<f64>,
    pub delta: Vec<f64>,
    /// Goods whose update was cut off at the reserve price.
    pub clamped: Vec<bool>,
    pub potential_before: f64,
    pub potential_after: f64,
}

impl StepRecord {
    /// `sum_j w_j p_j z_j Delta_j`, the first-order decrease of the potential.
    pub fn progress_term(&self) -> f64 {
        self.progress_terms().iter().sum()
    }

    pub fn progress_terms(&self) -> Vec<f64> {
        (0..self.z.len())
            .map(|j| self.supplies[j] * self.prices_before[j] * self.z[j] * self.delta[j])
            .collect()
    }

    /// Whether every `Delta_j` has the sign of `min(z_j, 1)` and magnitude at most
    /// `lambda * |min(z_j, 1)|` (up to a relative rounding slack).
    pub fn delta_premise_holds(&self, lambda: f64) -> bool {
        self.z.iter().zip(&self.delta).all(|(&z, &d)| {
            let target = lambda * z.min(1.0);
            if d == 0.0 {
                return true;
            }
            d.signum() == target.signum() && d.abs() <= target.abs() * (1.0 + 1e-12)
        })
    }
}

/// Price change exponent for one good and whether it was clamped at the reserve.
pub fn step_delta(z: f64, price: f64, reserve: f64, lambda: f64) -> (f64, bool) {
    if z == 0.0 {
        return (0.0, false);
    }
    let delta = lambda * z.min(1.0);
    if price * delta.exp() >= reserve {
        (delta, false)
    } else {
        ((reserve / price).ln(), true)
    }
}

pub fn tat_step(
    market: &Market,
    prices: &PriceVector,
    config: &TatConfig,
) -> Result<(PriceVector, StepRecord)> {
    step_at(market, prices, config, 0)
}

pub(crate) fn step_at(
    market: &Market,
    prices: &PriceVector,
    config: &TatConfig,
    t: usize,
) -> Result<(PriceVector, StepRecord)> {
    if !prices.respects_reserves(market.reserves()) {
        return Err(Error::invalid("prices", "below reserve prices"));
    }
    let spendings_before = market.spending(prices);
    let z = market.excess_from_spending(&spendings_before, prices);
    let n = market.num_goods();
    let mut next = Vec::with_capacity(n);
    let mut delta = Vec::with_capacity(n);
    let mut clamped = Vec::with_capacity(n);
    for j in 0..n {
        let r = market.reserves()[j];
        let (d, hit) = step_delta(z[j], prices[j], r, config.lambda);
        next.push(if hit { r } else { prices[j] * d.exp() });
        delta.push(d);
        clamped.push(hit);
    }
    let next = PriceVector::new(next)?;
    let spendings_after = market.spending(&next);
    let record = StepRecord {
        t,
        potential_before: market.potential(prices)?,
        potential_after: market.potential(&next)?,
        prices_before: prices.clone(),
        prices_after: next.clone(),
        spendings_before,
        spendings_after,
        supplies: market.supplies().to_vec(),
        z,
        delta,
        clamped,
    };
    Ok((next, record))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub steps: Vec<StepRecord>,
    /// Index of the step that completed a plateau window, if any.
    pub plateau_at: Option<usize>,
    pub stop_tol: f64,
}

impl Trace {
    pub fn reached_plateau(&self) -> bool {
        self.plateau_at.is_some()
    }

    /// `F(p^0), F(p^1), ...` including the final price vector.
    pub fn potentials(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.steps.iter().map(|s| s.potential_before).collect();
        if let Some(last) = self.steps.last() {
            out.push(last.potential_after);
        }
        out
    }

    /// `p^0, p^1, ...` including the final price vector.
    pub fn prices(&self) -> Vec<&PriceVector> {
        let mut out: Vec<&PriceVector> = self.steps.iter().map(|s| &s.prices_before).collect();
        if let Some(last) = self.steps.last() {
            out.push(&last.prices_after);
        }
        out
    }
}

/// Tracks the plateau rule: both the realized change of the potential and
/// its first-order predicted decrease stay below `tol` for a full window.
#[derive(Clone, Debug)]
pub struct PlateauDetector {
    tol: f64,
    quiet: usize,
}

impl PlateauDetector {
    pub fn new(tol: f64) -> Self {
        PlateauDetector { tol, quiet: 0 }
    }

    pub fn observe(&mut self, step: &StepRecord) -> bool {
        let change = (step.potential_after - step.potential_before).abs();
        if change < self.tol && step.progress_term() < self.tol {
            self.quiet += 1;
        } else {
            self.quiet = 0;
        }
        self.quiet >= PLATEAU_WINDOW
    }
}

pub fn default_stop_tol(initial_potential: f64) -> f64 {
    DEFAULT_RELATIVE_STOP_TOL * initial_potential.abs().max(1.0)
}

pub fn run(market: &Market, p0: &PriceVector, config: &TatConfig) -> Result<Trace> {
    config.validate()?;
    let f0 = market.potential(p0)?;
    let stop_tol = config.stop_tol.unwrap_or_else(|| default_stop_tol(f0));
    let price_cap = theory::m_bound(market, p0, config.lambda);
    let mut detector = PlateauDetector::new(stop_tol);
    let mut steps = Vec::new();
    let mut plateau_at = None;
    let mut prices = p0.clone();
    for t in 0..config.max_iters {
        let (next, record) = step_at(market, &prices, config, t)?;
        let value: f64 = next.iter().zip(market.supplies()).map(|(p, w)| p * w).sum();
        if value > price_cap * (1.0 + 1e-12) {
            log::warn!("step {t}: price sum {value} exceeds the bound {price_cap}");
        }
        let done = detector.observe(&record);
        steps.push(record);
        prices = next;
        if done {
            plateau_at = Some(t);
            break;
        }
    }
    Ok(Trace {
        steps,
        plateau_at,
        stop_tol,
    })
}
