//! Constants of the convergence guarantees and slack checkers for every
//! inequality the guarantees are built from.
//!
//! Each checker evaluates both sides of one inequality on recorded data and
//! returns a [`BoundReport`]. A report passes when its slack is at least
//! `-tol * max(1, |rhs|)`; checkers whose premises fail on the given data
//! return an inapplicable report instead of a verdict.
//!
//! With non-unit supplies every statement is applied to the equivalent
//! market whose goods are rescaled to unit supply: prices become values
//! `w_j p_j`, reserves become reserve values `w_j r_j`, and coefficients
//! become `a_ij w_j`. Excess demand and the price exponents are unchanged.
//!
//! `C(kappa)` uses the `min` of its two branches. An alternative write-up of
//! the same bound takes the `max`; the `min` is the conservative choice and
//! is the one the main guarantee is stated with.

use std::fmt;

use crate::error::{Error, Result};
use crate::market::{CesBuyer, Market, PriceVector, Rho};
use crate::tatonnement::{StepRecord, TatConfig, Trace};

pub const DEFAULT_REL_TOL: f64 = 1e-9;

/// Half-width of the window around `kappa = 1` where `h_c` switches to its Taylor form.
const TAYLOR_RADIUS: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Pass,
    Fail,
    Inapplicable(String),
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => f.write_str("true"),
            Verdict::Fail => f.write_str("false"),
            Verdict::Inapplicable(_) => f.write_str("inapplicable"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub check: String,
    pub t: Option<usize>,
    pub good: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
    /// Positive when the inequality holds with room to spare.
    pub slack: f64,
    pub verdict: Verdict,
    /// Per-good terms of the bound, when the check sums over goods.
    pub contributions: Vec<f64>,
}

impl BoundReport {
    fn new(check: &str, lhs: f64, rhs: f64, slack: f64) -> Self {
        let mut report = BoundReport {
            check: check.to_string(),
            t: None,
            good: None,
            lhs,
            rhs,
            slack,
            verdict: Verdict::Pass,
            contributions: Vec::new(),
        };
        report.set_tolerance(DEFAULT_REL_TOL);
        report
    }

    /// Report for `lhs <= rhs`.
    pub fn at_most(check: &str, lhs: f64, rhs: f64) -> Self {
        Self::new(check, lhs, rhs, rhs - lhs)
    }

    /// Report for `lhs >= rhs`.
    pub fn at_least(check: &str, lhs: f64, rhs: f64) -> Self {
        Self::new(check, lhs, rhs, lhs - rhs)
    }

    pub fn inapplicable(check: &str, reason: impl Into<String>) -> Self {
        BoundReport {
            check: check.to_string(),
            t: None,
            good: None,
            lhs: f64::NAN,
            rhs: f64::NAN,
            slack: f64::NAN,
            verdict: Verdict::Inapplicable(reason.into()),
            contributions: Vec::new(),
        }
    }

    pub fn at_step(mut self, t: usize) -> Self {
        self.t = Some(t);
        self
    }

    pub fn for_good(mut self, good: usize) -> Self {
        self.good = Some(good);
        self
    }

    pub fn with_contributions(mut self, contributions: Vec<f64>) -> Self {
        self.contributions = contributions;
        self
    }

    /// Re-judges the report with relative tolerance `rel_tol`.
    pub fn set_tolerance(&mut self, rel_tol: f64) {
        if matches!(self.verdict, Verdict::Inapplicable(_)) {
            return;
        }
        let tol = rel_tol * self.rhs.abs().max(1.0);
        self.verdict = if self.slack >= -tol {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
    }

    pub fn with_tolerance(mut self, rel_tol: f64) -> Self {
        self.set_tolerance(rel_tol);
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn failed(&self) -> bool {
        self.verdict == Verdict::Fail
    }

    pub fn is_applicable(&self) -> bool {
        !matches!(self.verdict, Verdict::Inapplicable(_))
    }
}

/// `h_c(kappa) = (1 - kappa^c + c (kappa - 1)) / (kappa - 1)^2`, continued by
/// `c (1 - c) / 2` at `kappa = 1`.
pub fn h_c(kappa: f64, c: f64) -> f64 {
    let u = kappa - 1.0;
    if u == 0.0 {
        return c * (1.0 - c) / 2.0;
    }
    if u.abs() < TAYLOR_RADIUS {
        let c1 = c * (1.0 - c) / 2.0;
        let c2 = -c * (c - 1.0) * (c - 2.0) / 6.0;
        let c3 = -c * (c - 1.0) * (c - 2.0) * (c - 3.0) / 24.0;
        return c1 + u * (c2 + u * c3);
    }
    // 1 - kappa^c written with expm1 to keep precision for small c
    (-(c * kappa.ln()).exp_m1() + c * u) / (u * u)
}

/// `(kappa - 1 - log kappa) / (kappa - 1)^2`, with limit 1/2 at `kappa = 1`.
pub fn log_branch(kappa: f64) -> f64 {
    let u = kappa - 1.0;
    if u.abs() < TAYLOR_RADIUS {
        return 0.5 - u / 3.0 + u * u / 4.0;
    }
    (u - u.ln_1p()) / (u * u)
}

/// `C(kappa) = min(h_c(kappa) / c, (kappa - 1 - log kappa) / (kappa - 1)^2)`.
pub fn big_c(kappa: f64, c: f64) -> Result<f64> {
    if !(kappa >= 1.0 && kappa.is_finite()) {
        return Err(Error::Domain(format!("kappa must be >= 1, got {kappa}")));
    }
    if !(c < 1.0) {
        return Err(Error::Domain(format!("c must be < 1, got {c}")));
    }
    let second = log_branch(kappa);
    let first = if c == 0.0 { second } else { h_c(kappa, c) / c };
    let value = first.min(second);
    if !(value > 0.0) {
        return Err(Error::TheoryInapplicable(format!(
            "C(kappa) = {value} is not positive (kappa = {kappa}, c = {c})"
        )));
    }
    Ok(value)
}

/// `max_i c_i` over the non-linear buyers; 0 when every buyer is linear.
pub fn market_c_max(market: &Market) -> f64 {
    market
        .buyers()
        .iter()
        .filter_map(|b| b.rho().substitution())
        .fold(None, |acc: Option<f64>, c| Some(acc.map_or(c, |a| a.max(c))))
        .unwrap_or(0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TheoremParams {
    pub lambda: f64,
    pub sigma: f64,
    pub theta: f64,
    pub kappa: f64,
    pub epsilon: f64,
    pub total_money: f64,
    /// Reserve values `w_j r_j`.
    pub reserves: Vec<f64>,
    pub c_max: f64,
}

impl TheoremParams {
    pub fn new(market: &Market, config: &TatConfig, kappa: f64, epsilon: f64) -> Self {
        TheoremParams {
            lambda: config.lambda,
            sigma: config.sigma,
            theta: config.theta,
            kappa,
            epsilon,
            total_money: market.total_money(),
            reserves: reserve_values(market),
            c_max: market_c_max(market),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= 1.0) {
            return Err(Error::invalid("kappa", format!("must be >= 1, got {}", self.kappa)));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::invalid("epsilon", "must be nonnegative"));
        }
        if !(self.c_max < 1.0) {
            return Err(Error::invalid("c_max", "must be < 1"));
        }
        if let Some(j) = self.reserves.iter().position(|&r| r <= 0.0) {
            return Err(Error::MissingReserve(j));
        }
        Ok(())
    }

    pub fn big_c(&self) -> Result<f64> {
        big_c(self.kappa, self.c_max)
    }

    /// `1 - lambda - 2 lambda max(sigma / (1 - sigma), 1)`.
    pub fn progress_coefficient(&self) -> f64 {
        progress_coefficient(self.lambda, self.sigma)
    }

    /// `max(2, 1 / (2 C(kappa))) * E / (lambda r_j)` for every good.
    pub fn distance_weights(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let scale = 2f64.max(1.0 / (2.0 * self.big_c()?));
        Ok(self
            .reserves
            .iter()
            .map(|r| scale * self.total_money / (self.lambda * r))
            .collect())
    }
}

/// `w_j r_j` for every good.
pub fn reserve_values(market: &Market) -> Vec<f64> {
    market.supplies().iter().zip(market.reserves()).map(|(w, r)| w * r).collect()
}

pub fn progress_coefficient(lambda: f64, sigma: f64) -> f64 {
    1.0 - lambda - 2.0 * lambda * (sigma / (1.0 - sigma)).max(1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Alpha {
    pub value: f64,
    pub numerator: f64,
    pub denominator: f64,
}

impl Alpha {
    /// False when the numerator is not positive and the rate carries no guarantee.
    pub fn guaranteed(&self) -> bool {
        self.value > 0.0
    }
}

pub fn alpha(params: &TheoremParams) -> Result<Alpha> {
    let weights = params.distance_weights()?;
    let numerator = params.progress_coefficient() - 2.0 * params.epsilon - 2.0 * params.theta;
    let denominator = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let value = numerator / denominator;
    if value <= 0.0 {
        log::warn!("alpha = {value}: no convergence guarantee for these parameters");
    }
    Ok(Alpha {
        value,
        numerator,
        denominator,
    })
}

/// `lambda / (1 + 2 lambda - e^lambda)`.
///
/// One step gives `S' <= (e^lambda - 2 lambda) S + lambda (E + sum r)` for the
/// price sum `S`, so `S' <= S` once `S >= k (E + sum r)` with this `k`, and
/// otherwise `S' <= ((e^lambda - 2 lambda) k + lambda)(E + sum r) = k (E + sum r)`.
pub fn m_coefficient(lambda: f64) -> f64 {
    lambda / (1.0 + 2.0 * lambda - lambda.exp())
}

/// `(e^lambda - 2 lambda)(1 + 2 lambda - e^lambda) / lambda + lambda`, the
/// threshold with `k` inverted. It is below 1 for small `lambda` and so is
/// not a valid bound; kept for comparison only.
pub fn m_coefficient_inverted(lambda: f64) -> f64 {
    let el = lambda.exp();
    (el - 2.0 * lambda) * (1.0 + 2.0 * lambda - el) / lambda + lambda
}

/// Upper bound on `sum_j w_j p_j` along any run started at `p0`.
pub fn m_bound(market: &Market, p0: &[f64], lambda: f64) -> f64 {
    m_bound_weighted(
        market.total_money(),
        reserve_values(market).iter().sum(),
        p0,
        market.supplies(),
        lambda,
    )
}

/// `max(sum_j w_j p0_j, coef(lambda) (E + reserve_value_sum))`; dynamic
/// markets pass the largest supplies over time.
pub fn m_bound_weighted(
    total_money: f64,
    reserve_value_sum: f64,
    p0: &[f64],
    max_supplies: &[f64],
    lambda: f64,
) -> f64 {
    let start: f64 = p0.iter().zip(max_supplies).map(|(p, w)| p * w).sum();
    start.max(m_coefficient(lambda) * (total_money + reserve_value_sum))
}

fn near_linear(buyer: &CesBuyer, sigma: f64) -> bool {
    buyer.rho().value() >= sigma
}

/// Smallest epsilon for which the large-market condition holds along `steps`.
pub fn epsilon_observed(steps: &[StepRecord], sigma: f64, market: &Market) -> f64 {
    let near: Vec<usize> = market
        .buyers()
        .iter()
        .enumerate()
        .filter(|(_, b)| near_linear(b, sigma))
        .map(|(i, _)| i)
        .collect();
    if near.is_empty() {
        return 0.0;
    }
    let mut worst: f64 = 0.0;
    for step in steps {
        let totals = step.spendings_before.good_totals();
        for (j, total) in totals.iter().enumerate() {
            let moved: f64 = near
                .iter()
                .map(|&i| (step.spendings_before.get(i, j) - step.spendings_after.get(i, j)).abs())
                .sum();
            if moved == 0.0 {
                continue;
            }
            let base = total + step.supplies[j] * market.reserves()[j];
            if base == 0.0 {
                return f64::INFINITY;
            }
            worst = worst.max(moved / base);
        }
    }
    worst
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonEstimate {
    pub value: f64,
    /// Grid points per price-ratio coordinate.
    pub grid_resolution: usize,
    pub worst_good: Option<usize>,
}

/// Grid estimate of the a-priori large-market epsilon for an all-linear market.
///
/// For each good `j` and each ratio vector `q` (with `q_j = 1` and every other
/// `q_k` on a log-uniform grid over `[r_k / E, E / r_k]`), the numerator sums
/// budgets of buyers that are near switching on or off good `j` and the
/// denominator sums budgets of buyers strictly preferring `j`, plus `r_j`.
pub fn epsilon_apriori_linear(
    market: &Market,
    lambda: f64,
    grid_resolution: usize,
) -> Result<EpsilonEstimate> {
    if market.buyers().iter().any(|b| b.rho() != Rho::Linear) {
        return Err(Error::Domain("a-priori epsilon needs an all-linear market".into()));
    }
    if let Some(j) = market.reserves().iter().position(|&r| r <= 0.0) {
        return Err(Error::MissingReserve(j));
    }
    if grid_resolution == 0 {
        return Err(Error::invalid("grid_resolution", "must be positive"));
    }
    let mut estimate = EpsilonEstimate {
        value: 0.0,
        grid_resolution,
        worst_good: None,
    };
    if market.num_buyers() == 0 {
        return Ok(estimate);
    }
    let n = market.num_goods();
    let money = market.total_money();
    let reserves = reserve_values(market);
    let log_a: Vec<Vec<f64>> = market
        .buyers()
        .iter()
        .map(|b| b.coeffs().iter().zip(market.supplies()).map(|(a, w)| (a * w).ln()).collect())
        .collect();
    let budgets: Vec<f64> = market.buyers().iter().map(CesBuyer::budget).collect();
    let grid = |k: usize, g: usize| -> f64 {
        let hi = (money / reserves[k]).ln();
        if grid_resolution == 1 {
            return 0.0;
        }
        let frac = g as f64 / (grid_resolution - 1) as f64;
        -hi + 2.0 * hi * frac
    };

    for j in 0..n {
        let others: Vec<usize> = (0..n).filter(|&k| k != j).collect();
        let mut log_q = vec![0.0; n];
        let mut index = vec![0usize; others.len()];
        loop {
            for (slot, &k) in others.iter().enumerate() {
                log_q[k] = grid(k, index[slot]);
            }
            let mut switching = 0.0;
            let mut loyal = 0.0;
            for (i, la) in log_a.iter().enumerate() {
                if la[j] == f64::NEG_INFINITY {
                    continue;
                }
                // log(a_ij / a_ik) - log q_k for every other good
                let gaps: Vec<f64> = others.iter().map(|&k| la[j] - la[k] - log_q[k]).collect();
                let in_band = gaps.iter().any(|g| g.abs() <= lambda);
                let undominated = gaps.iter().all(|&g| g >= -lambda);
                if in_band && undominated {
                    switching += budgets[i];
                }
                if gaps.iter().all(|&g| g > 0.0) {
                    loyal += budgets[i];
                }
            }
            let ratio = switching / (loyal + reserves[j]);
            if ratio > estimate.value {
                estimate.value = ratio;
                estimate.worst_good = Some(j);
            }
            // odometer over the grid
            let mut slot = 0;
            while slot < index.len() {
                index[slot] += 1;
                if index[slot] < grid_resolution {
                    break;
                }
                index[slot] = 0;
                slot += 1;
            }
            if slot == index.len() {
                break;
            }
        }
    }
    Ok(estimate)
}

/// One-step progress bound on the potential.
pub fn check_progress(step: &StepRecord, market: &Market, sigma: f64, lambda: f64) -> BoundReport {
    const NAME: &str = "progress";
    if lambda * sigma / (1.0 - sigma) > 1.0 {
        return BoundReport::inapplicable(NAME, "lambda * sigma / (1 - sigma) > 1").at_step(step.t);
    }
    if !step.delta_premise_holds(lambda) {
        return BoundReport::inapplicable(NAME, "price step violates the sign/magnitude premise")
            .at_step(step.t);
    }
    let lhs = step.potential_before - step.potential_after;
    let first = progress_coefficient(lambda, sigma) * step.progress_term();
    let mut second = 0.0;
    for (i, buyer) in market.buyers().iter().enumerate() {
        if !near_linear(buyer, sigma) {
            continue;
        }
        let shift: f64 = (0..step.delta.len())
            .map(|j| (step.spendings_before.get(i, j) - step.spendings_after.get(i, j)) * step.delta[j])
            .sum();
        second += buyer.rho().value() * shift;
    }
    BoundReport::at_least(NAME, lhs, first - second).at_step(step.t)
}

/// Bounds on a single buyer's log-utility change over one step. Linear buyers
/// get the switching bound, `0 < rho < 1` the two substitute bounds (the
/// second only when `|lambda c| <= 1`), and `rho <= 0` the complements bound.
pub fn check_buyer_log_utility(
    buyer: &CesBuyer,
    buyer_index: usize,
    step: &StepRecord,
    lambda: f64,
) -> Vec<BoundReport> {
    let e = buyer.budget();
    let before = step.spendings_before.row(buyer_index);
    let after = step.spendings_after.row(buyer_index);
    let delta = &step.delta;
    let lu_before = buyer.log_max_utility(&step.prices_before);
    let lu_after = buyer.log_max_utility(&step.prices_after);
    let dot = |b: &[f64]| -> f64 { b.iter().zip(delta).map(|(b, d)| b * d).sum() };
    let dot_sq = |b: &[f64]| -> f64 { b.iter().zip(delta).map(|(b, d)| b * d * d).sum() };
    let tag = |name: &str| format!("{name}[buyer {buyer_index}]");

    if !(lu_before.is_finite() && lu_after.is_finite()) {
        return vec![BoundReport::inapplicable(&tag("log-utility"), "zero utility").at_step(step.t)];
    }
    let lhs = e * (lu_after - lu_before);
    let max_step = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));

    match buyer.rho() {
        Rho::Linear => {
            let rhs = -dot(before) + (dot(before) - dot(after));
            vec![BoundReport::at_most(&tag("log-utility-linear"), lhs, rhs).at_step(step.t)]
        }
        Rho::General(rho) if rho > 0.0 => {
            let c = rho / (rho - 1.0);
            let mut out = Vec::with_capacity(2);
            let name = tag("log-utility-substitutes");
            if max_step <= 1.0 {
                let rhs = -dot(before) + rho * dot_sq(before) - rho * dot(after) + rho * dot(before);
                out.push(BoundReport::at_most(&name, lhs, rhs).at_step(step.t));
            } else {
                out.push(BoundReport::inapplicable(&name, "|Delta| > 1").at_step(step.t));
            }
            let name = tag("log-utility-small-c");
            if (lambda * c).abs() <= 1.0 && max_step <= lambda * (1.0 + 1e-12) {
                let rhs = -dot(before) - c * dot_sq(before);
                out.push(BoundReport::at_most(&name, lhs, rhs).at_step(step.t));
            } else {
                out.push(BoundReport::inapplicable(&name, "|lambda c| > 1 or |Delta| > lambda").at_step(step.t));
            }
            out
        }
        _ => {
            let rhs = -dot(before);
            vec![BoundReport::at_most(&tag("log-utility-complements"), lhs, rhs).at_step(step.t)]
        }
    }
}

/// Per-good lower bound `w_j p_j z_j Delta_j >= (sum_i b_ij) Delta_j^2 / (2 lambda)`.
pub fn check_claim_lower_progress(step: &StepRecord, lambda: f64) -> Vec<BoundReport> {
    const NAME: &str = "claim-lower-progress";
    if !step.delta_premise_holds(lambda) {
        return vec![BoundReport::inapplicable(NAME, "price step violates the sign/magnitude premise")
            .at_step(step.t)];
    }
    let spent = step.spendings_before.good_totals();
    step.progress_terms()
        .into_iter()
        .enumerate()
        .map(|(j, lhs)| {
            let rhs = spent[j] * step.delta[j] * step.delta[j] / (2.0 * lambda);
            BoundReport::at_least(NAME, lhs, rhs).at_step(step.t).for_good(j)
        })
        .collect()
}

/// Strong-convexity bound of the potential around `p_star`, seen from `p`.
pub fn check_strong_convexity(
    market: &Market,
    p: &PriceVector,
    p_star: &PriceVector,
    kappa: f64,
) -> BoundReport {
    const NAME: &str = "strong-convexity";
    if p.iter().zip(p_star.iter()).any(|(q, s)| s / q > kappa) {
        return BoundReport::inapplicable(NAME, "p*_j / p_j exceeds kappa");
    }
    let strength = match big_c(kappa, market_c_max(market)) {
        Ok(v) => v,
        Err(e) => return BoundReport::inapplicable(NAME, e.to_string()),
    };
    let (f, f_star) = match (market.potential(p), market.potential(p_star)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return BoundReport::inapplicable(NAME, "potential undefined"),
    };
    let demand = market.spending(p).demand(p);
    let mut linear_part = 0.0;
    let mut rhs = 0.0;
    for j in 0..p.len() {
        let gap = p_star[j] - p[j];
        linear_part += (market.supplies()[j] - demand[j]) * gap;
        rhs += strength * demand[j] * gap * gap / p[j];
    }
    BoundReport::at_least(NAME, f_star - f - linear_part, rhs)
}

/// Upper bound on the potential gap at the start of `step` in terms of the step's progress.
pub fn check_distance_bound(
    market: &Market,
    step: &StepRecord,
    p_star: &PriceVector,
    params: &TheoremParams,
) -> BoundReport {
    const NAME: &str = "distance";
    let weights = match params.distance_weights() {
        Ok(w) => w,
        Err(e) => return BoundReport::inapplicable(NAME, e.to_string()).at_step(step.t),
    };
    let reserves = market.reserves();
    if p_star.iter().zip(reserves).any(|(p, r)| p / r > params.kappa * (1.0 + 1e-12)) {
        return BoundReport::inapplicable(NAME, "kappa below max p*_j / r_j").at_step(step.t);
    }
    let f_star = match market.potential(p_star) {
        Ok(v) => v,
        Err(e) => return BoundReport::inapplicable(NAME, e.to_string()).at_step(step.t),
    };
    let terms: Vec<f64> = step
        .progress_terms()
        .iter()
        .zip(&weights)
        .map(|(t, w)| t * w)
        .collect();
    let rhs = terms.iter().sum();
    BoundReport::at_most(NAME, step.potential_before - f_star, rhs)
        .at_step(step.t)
        .with_contributions(terms)
}

/// Bound on `sum_j w_j p_j^{t+1}` after every step.
pub fn check_price_sum(steps: &[StepRecord], m: f64) -> Vec<BoundReport> {
    steps
        .iter()
        .map(|s| {
            let value: f64 = s.prices_after.iter().zip(&s.supplies).map(|(p, w)| p * w).sum();
            BoundReport::at_most("price-sum", value, m).at_step(s.t)
        })
        .collect()
}

/// Envelope and conditional contraction checks for a gap sequence.
///
/// `offset` is the additive per-step error (for the static market
/// `2 lambda eps^2 M / theta`, for dynamic markets that plus `D`). The
/// envelope is `gap_t <= (1 - alpha)^t gap_0 + offset / alpha`; whenever
/// `gap_t >= 2 offset / alpha`, the next gap must satisfy
/// `gap_{t+1} <= (1 - alpha / 2) gap_t`.
pub fn envelope_checks(name: &str, gaps: &[f64], alpha: f64, offset: f64) -> Vec<BoundReport> {
    let contraction = format!("{name}-contraction");
    if !(alpha > 0.0) {
        return vec![BoundReport::inapplicable(name, format!("alpha = {alpha} is not positive"))];
    }
    let Some(&first) = gaps.first() else {
        return Vec::new();
    };
    let plateau = offset / alpha;
    let mut out = Vec::with_capacity(2 * gaps.len());
    let mut decay = 1.0;
    for (t, &gap) in gaps.iter().enumerate() {
        out.push(BoundReport::at_most(name, gap, decay * first + plateau).at_step(t));
        decay *= 1.0 - alpha;
        if gap >= 2.0 * plateau {
            if let Some(&next) = gaps.get(t + 1) {
                out.push(BoundReport::at_most(&contraction, next, (1.0 - alpha / 2.0) * gap).at_step(t));
            }
        }
    }
    out
}

/// Convergence envelope along a static run, against the equilibrium potential `f_star`.
pub fn check_theorem1_envelope(
    trace: &Trace,
    f_star: f64,
    params: &TheoremParams,
    m: f64,
) -> Vec<BoundReport> {
    let a = match alpha(params) {
        Ok(a) => a,
        Err(e) => return vec![BoundReport::inapplicable("envelope", e.to_string())],
    };
    let gaps: Vec<f64> = trace.potentials().iter().map(|f| f - f_star).collect();
    let offset = 2.0 * params.lambda * params.epsilon * params.epsilon * m / params.theta;
    envelope_checks("envelope", &gaps, a.value, offset)
}

/// Runs every per-step checker applicable to a static trace.
pub fn check_steps(market: &Market, trace: &Trace, config: &TatConfig) -> Vec<BoundReport> {
    let mut out = Vec::new();
    for step in &trace.steps {
        out.push(check_progress(step, market, config.sigma, config.lambda));
        for (i, buyer) in market.buyers().iter().enumerate() {
            out.extend(check_buyer_log_utility(buyer, i, step, config.lambda));
        }
        out.extend(check_claim_lower_progress(step, config.lambda));
    }
    out
}
