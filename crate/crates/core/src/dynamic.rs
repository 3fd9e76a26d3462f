//! Tatonnement in a market whose supplies, budgets and coefficients drift
//! from round to round, with measured potential disturbances and the
//! tracking envelope.

use crate::equilibrium::{self, EqSolution};
use crate::error::{Error, Result};
use crate::market::{CesBuyer, Market, PriceVector};
use crate::tatonnement::{default_stop_tol, step_at, PlateauDetector, StepRecord, TatConfig};
use crate::theory::{self, BoundReport, TheoremParams};

/// Multiplier applied to a base-market quantity at round `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Multiplier {
    Constant(f64),
    /// `1 + slope * t`.
    Linear { slope: f64 },
    /// `1 + amplitude * sin(t / period)`.
    Sinusoid { amplitude: f64, period: f64 },
    /// 1 before round `at`, `factor` from then on.
    Step { at: usize, factor: f64 },
}

impl Multiplier {
    pub fn at(&self, t: usize) -> f64 {
        let tf = t as f64;
        match *self {
            Multiplier::Constant(c) => c,
            Multiplier::Linear { slope } => 1.0 + slope * tf,
            Multiplier::Sinusoid { amplitude, period } => 1.0 + amplitude * (tf / period).sin(),
            Multiplier::Step { at, factor } => {
                if t >= at {
                    factor
                } else {
                    1.0
                }
            }
        }
    }

    /// Declared range of the multiplier over rounds `0..=horizon`.
    pub fn bounds(&self, horizon: usize) -> (f64, f64) {
        match *self {
            Multiplier::Constant(c) => (c, c),
            Multiplier::Linear { slope } => {
                let end = 1.0 + slope * horizon as f64;
                (end.min(1.0), end.max(1.0))
            }
            Multiplier::Sinusoid { amplitude, .. } => (1.0 - amplitude.abs(), 1.0 + amplitude.abs()),
            Multiplier::Step { at, factor } => {
                if at > horizon {
                    (1.0, 1.0)
                } else if at == 0 {
                    (factor, factor)
                } else {
                    (factor.min(1.0), factor.max(1.0))
                }
            }
        }
    }
}

/// Per-round multipliers relative to the base market. Quantities without an
/// entry keep their base value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PerturbationSchedule {
    pub supplies: Vec<(usize, Multiplier)>,
    pub budgets: Vec<(usize, Multiplier)>,
    pub coeffs: Vec<((usize, usize), Multiplier)>,
}

impl PerturbationSchedule {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn is_identity(&self) -> bool {
        self.supplies.is_empty() && self.budgets.is_empty() && self.coeffs.is_empty()
    }

    pub fn supply(mut self, good: usize, m: Multiplier) -> Self {
        self.supplies.push((good, m));
        self
    }

    pub fn budget(mut self, buyer: usize, m: Multiplier) -> Self {
        self.budgets.push((buyer, m));
        self
    }

    pub fn coeff(mut self, buyer: usize, good: usize, m: Multiplier) -> Self {
        self.coeffs.push(((buyer, good), m));
        self
    }
}

fn factor(m: &Multiplier, t: usize, what: &str) -> Result<f64> {
    let f = m.at(t);
    if !(f.is_finite() && f > 0.0) {
        return Err(Error::invalid(what, format!("multiplier at round {t} is {f}")));
    }
    Ok(f)
}

/// The base market with round-`t` multipliers applied. Cobb-Douglas
/// coefficients are re-normalized after scaling.
pub fn perturb(market: &Market, schedule: &PerturbationSchedule, t: usize) -> Result<Market> {
    if schedule.is_identity() {
        return Ok(market.clone());
    }
    let n = market.num_goods();
    let m = market.num_buyers();
    let mut supplies = market.supplies().to_vec();
    for (j, mult) in &schedule.supplies {
        let slot = supplies
            .get_mut(*j)
            .ok_or_else(|| Error::invalid("schedule.supplies", format!("good {j} out of range")))?;
        *slot *= factor(mult, t, &format!("schedule.supplies[{j}]"))?;
    }
    let mut budgets: Vec<f64> = market.buyers().iter().map(CesBuyer::budget).collect();
    for (i, mult) in &schedule.budgets {
        let slot = budgets
            .get_mut(*i)
            .ok_or_else(|| Error::invalid("schedule.budgets", format!("buyer {i} out of range")))?;
        *slot *= factor(mult, t, &format!("schedule.budgets[{i}]"))?;
    }
    let mut coeffs: Vec<Vec<f64>> = market.buyers().iter().map(|b| b.coeffs().to_vec()).collect();
    for ((i, j), mult) in &schedule.coeffs {
        if *i >= m || *j >= n {
            return Err(Error::invalid("schedule.coeffs", format!("entry ({i}, {j}) out of range")));
        }
        coeffs[*i][*j] *= factor(mult, t, &format!("schedule.coeffs[{i}][{j}]"))?;
    }
    let buyers = market
        .buyers()
        .iter()
        .zip(budgets.into_iter().zip(coeffs))
        .map(|(b, (e, a))| CesBuyer::new(e, b.rho(), a))
        .collect::<Result<Vec<_>>>()?;
    Market::new(buyers, supplies, market.reserves().to_vec())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Oracle {
    /// Solve each round's equilibrium to this residual tolerance.
    Solve { tol: f64 },
    Skip,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub equilibrium: Option<EqSolution>,
    /// `F^t(p^t) - F^t(p^{t,*})`.
    pub gap: Option<f64>,
    /// `|F^{t+1}(p^{t+1}) - F^t(p^{t+1})|`.
    pub disturbance: f64,
    /// Largest disturbance so far.
    pub running_max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicTrace {
    pub steps: Vec<StepRecord>,
    pub rounds: Vec<RoundRecord>,
    /// First round completing a plateau window; the run does not stop there.
    pub plateau_at: Option<usize>,
    /// Largest supply of each good over the horizon.
    pub max_supplies: Vec<f64>,
    /// Smallest supply of each good over the horizon.
    pub min_supplies: Vec<f64>,
    pub reserves: Vec<f64>,
    /// Largest total money over the horizon.
    pub max_total_money: f64,
}

impl DynamicTrace {
    pub fn disturbance_bound(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.running_max)
    }

    pub fn gaps(&self) -> Option<Vec<f64>> {
        self.rounds.iter().map(|r| r.gap).collect()
    }

    pub fn prices(&self) -> Vec<&PriceVector> {
        let mut out: Vec<&PriceVector> = self.steps.iter().map(|s| &s.prices_before).collect();
        if let Some(last) = self.steps.last() {
            out.push(&last.prices_after);
        }
        out
    }

    /// Constants for the tracking envelope: `E` is the largest total money,
    /// reserve values use the smallest supplies and `kappa` covers every
    /// solved round.
    pub fn theorem_params(&self, market0: &Market, config: &TatConfig, epsilon: f64) -> Result<TheoremParams> {
        let mut params = TheoremParams::new(market0, config, self.kappa(market0.reserves())?, epsilon);
        params.total_money = self.max_total_money;
        params.reserves = self.min_supplies.iter().zip(&self.reserves).map(|(w, r)| w * r).collect();
        Ok(params)
    }

    /// `max_t max_j p^{t,*}_j / r_j` over the solved rounds.
    pub fn kappa(&self, reserves: &[f64]) -> Result<f64> {
        let mut kappa: f64 = 1.0;
        for r in &self.rounds {
            if let Some(eq) = &r.equilibrium {
                kappa = kappa.max(equilibrium::kappa_of(&eq.p_star, reserves)?);
            }
        }
        Ok(kappa)
    }
}

/// Runs `config.max_iters` rounds, solving each round's equilibrium.
pub fn dynamic_run(
    market0: &Market,
    p0: &PriceVector,
    schedule: &PerturbationSchedule,
    config: &TatConfig,
) -> Result<DynamicTrace> {
    dynamic_run_with(market0, p0, schedule, config, Oracle::Solve { tol: equilibrium::DEFAULT_TOL })
}

pub fn dynamic_run_with(
    market0: &Market,
    p0: &PriceVector,
    schedule: &PerturbationSchedule,
    config: &TatConfig,
    oracle: Oracle,
) -> Result<DynamicTrace> {
    config.validate()?;
    let rounds_total = config.max_iters;
    let mut market = perturb(market0, schedule, 0)?;
    let stop_tol = config
        .stop_tol
        .unwrap_or_else(|| default_stop_tol(market.potential(p0).unwrap_or(0.0)));
    let mut detector = PlateauDetector::new(stop_tol);
    let mut plateau_at = None;
    let mut max_supplies = market.supplies().to_vec();
    let mut min_supplies = market.supplies().to_vec();
    let mut max_total_money = market.total_money();
    let mut steps = Vec::with_capacity(rounds_total);
    let mut rounds = Vec::with_capacity(rounds_total);
    let mut prices = p0.clone();
    let mut previous_star: Option<PriceVector> = None;
    let mut running_max: f64 = 0.0;

    for t in 0..rounds_total {
        let (next, step) = step_at(&market, &prices, config, t)?;
        let equilibrium = match oracle {
            Oracle::Skip => None,
            Oracle::Solve { tol } => Some(match &previous_star {
                Some(start) => equilibrium::solve_equilibrium_from(&market, start, tol)
                    .or_else(|_| equilibrium::solve_equilibrium(&market, tol))?,
                None => equilibrium::solve_equilibrium(&market, tol)?,
            }),
        };
        let gap = equilibrium.as_ref().map(|eq| step.potential_before - eq.f_star);
        previous_star = equilibrium.as_ref().map(|eq| eq.p_star.clone());

        let following = perturb(market0, schedule, t + 1)?;
        let disturbance = (following.potential(&next)? - step.potential_after).abs();
        running_max = running_max.max(disturbance);
        for (j, v) in following.supplies().iter().enumerate() {
            max_supplies[j] = max_supplies[j].max(*v);
            min_supplies[j] = min_supplies[j].min(*v);
        }
        max_total_money = max_total_money.max(following.total_money());

        if detector.observe(&step) && plateau_at.is_none() {
            plateau_at = Some(t);
        }
        steps.push(step);
        rounds.push(RoundRecord {
            equilibrium,
            gap,
            disturbance,
            running_max,
        });
        prices = next;
        market = following;
    }
    Ok(DynamicTrace {
        steps,
        rounds,
        plateau_at,
        max_supplies,
        min_supplies,
        reserves: market0.reserves().to_vec(),
        max_total_money,
    })
}

/// Tracking envelope with the measured disturbance bound `D`.
///
/// `params` should come from [`DynamicTrace::theorem_params`]; `M` uses the
/// largest supplies.
pub fn check_theorem2_envelope(dtrace: &DynamicTrace, params: &TheoremParams) -> Vec<BoundReport> {
    const NAME: &str = "tracking";
    let Some(gaps) = dtrace.gaps() else {
        return vec![BoundReport::inapplicable(NAME, "equilibria were not solved")];
    };
    let Some(first) = dtrace.steps.first() else {
        return Vec::new();
    };
    let a = match theory::alpha(params) {
        Ok(a) => a,
        Err(e) => return vec![BoundReport::inapplicable(NAME, e.to_string())],
    };
    let m = theory::m_bound_weighted(
        params.total_money,
        dtrace.max_supplies.iter().zip(&dtrace.reserves).map(|(w, r)| w * r).sum(),
        &first.prices_before,
        &dtrace.max_supplies,
        params.lambda,
    );
    let offset = 2.0 * params.lambda * params.epsilon * params.epsilon * m / params.theta
        + dtrace.disturbance_bound();
    theory::envelope_checks(NAME, &gaps, a.value, offset)
}
