//! Fisher market data model and the closed-form CES demand system.
//!
//! Every buyer spends their whole budget on a utility-maximizing bundle. For
//! a CES buyer with exponent `rho < 1` and `c = rho / (rho - 1)` the optimal
//! spending is proportional to `a_ij^(1-c) p_j^c`; linear buyers spend only
//! on goods maximizing `a_ij / p_j` and Cobb-Douglas buyers spend the fixed
//! share `a_ij` of their budget on good `j`.
//!
//! The potential `F(p) = sum_j w_j p_j + sum_i e_i log(max utility of i at p)`
//! is the convex dual of the Eisenberg-Gale program. Its gradient is
//! `w_j - x_j` (supply minus demand), which is what makes tatonnement a
//! descent method on it.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance under which two goods count as tied for a linear buyer.
pub const LINEAR_TIE_TOL: f64 = 1e-12;

/// CES exponent of a buyer. Linear and Cobb-Douglas are tagged so the
/// closed forms never divide by `rho` or `c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Rho {
    Linear,
    CobbDouglas,
    General(f64),
}

impl Rho {
    /// Maps a numeric exponent onto its tag: 1 is linear, 0 is Cobb-Douglas.
    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value == f64::NEG_INFINITY {
            return Err(Error::Domain(
                "rho must be finite (Leontief utilities are not supported)".into(),
            ));
        }
        if value == 1.0 {
            Ok(Rho::Linear)
        } else if value == 0.0 {
            Ok(Rho::CobbDouglas)
        } else if value > 1.0 {
            Err(Error::Domain("rho must be < 1 or the linear tag".into()))
        } else {
            Ok(Rho::General(value))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Rho::Linear => 1.0,
            Rho::CobbDouglas => 0.0,
            Rho::General(r) => r,
        }
    }

    /// The substitution parameter `c`; `None` for linear buyers.
    pub fn substitution(self) -> Option<f64> {
        match self {
            Rho::Linear => None,
            Rho::CobbDouglas => Some(0.0),
            Rho::General(r) => Some(r / (r - 1.0)),
        }
    }
}

/// `c = rho / (rho - 1)`, with the Cobb-Douglas convention `c(0) = 0`.
pub fn c_of_rho(rho: f64) -> Result<f64> {
    if rho.is_nan() || rho == f64::NEG_INFINITY || rho >= 1.0 {
        return Err(Error::Domain(format!(
            "substitution parameter undefined for rho = {rho}"
        )));
    }
    if rho == 0.0 {
        return Ok(0.0);
    }
    Ok(rho / (rho - 1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CesBuyer {
    budget: f64,
    rho: Rho,
    coeffs: Vec<f64>,
}

impl CesBuyer {
    /// Validates the buyer. Cobb-Douglas coefficients are rescaled to sum to 1
    /// unless they already do to within 1e-12.
    pub fn new(budget: f64, rho: Rho, coeffs: Vec<f64>) -> Result<Self> {
        if !(budget.is_finite() && budget > 0.0) {
            return Err(Error::invalid("budget", format!("must be positive, got {budget}")));
        }
        if let Rho::General(r) = rho {
            // Rho::new never builds these, but the enum is public.
            if !(r.is_finite() && r < 1.0 && r != 0.0) {
                return Err(Error::invalid("rho", "rho must be < 1 or the linear tag"));
            }
        }
        if coeffs.is_empty() {
            return Err(Error::invalid("coeffs", "no goods"));
        }
        for (j, &a) in coeffs.iter().enumerate() {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::invalid(
                    format!("coeffs[{j}]"),
                    format!("must be finite and nonnegative, got {a}"),
                ));
            }
        }
        let total: f64 = coeffs.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("coeffs", "at least one coefficient must be positive"));
        }
        let coeffs = if rho == Rho::CobbDouglas && (total - 1.0).abs() > 1e-12 {
            coeffs.iter().map(|a| a / total).collect()
        } else {
            coeffs
        };
        Ok(CesBuyer { budget, rho, coeffs })
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn rho(&self) -> Rho {
        self.rho
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn num_goods(&self) -> usize {
        self.coeffs.len()
    }

    /// `ln(a_ij^(1-c) p_j^c)` for goods with `a_ij > 0`, `-inf` otherwise.
    fn log_weights(&self, c: f64, prices: &[f64]) -> Vec<f64> {
        self.coeffs
            .iter()
            .zip(prices)
            .map(|(&a, &p)| {
                if a > 0.0 {
                    (1.0 - c) * a.ln() + c * p.ln()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect()
    }

    /// Goods attaining `max_j a_ij / p_j` within [`LINEAR_TIE_TOL`].
    pub fn linear_best_goods(&self, prices: &[f64]) -> Vec<usize> {
        linear_ties(&self.coeffs, prices, LINEAR_TIE_TOL)
    }

    pub fn best_response(&self, prices: &[f64]) -> Vec<f64> {
        let e = self.budget;
        match self.rho {
            Rho::CobbDouglas => self.coeffs.iter().map(|a| e * a).collect(),
            Rho::Linear => {
                let best = self.linear_best_goods(prices);
                let share = e / best.len() as f64;
                let mut b = vec![0.0; self.coeffs.len()];
                for j in best {
                    b[j] = share;
                }
                b
            }
            Rho::General(r) => {
                let c = r / (r - 1.0);
                let lw = self.log_weights(c, prices);
                let top = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = lw.iter().map(|l| (l - top).exp()).collect();
                let total: f64 = w.iter().sum();
                w.into_iter().map(|wj| e * wj / total).collect()
            }
        }
    }

    /// Natural log of the maximum utility attainable with the full budget.
    pub fn log_max_utility(&self, prices: &[f64]) -> f64 {
        let e = self.budget;
        match self.rho {
            Rho::Linear => {
                let best = self
                    .coeffs
                    .iter()
                    .zip(prices)
                    .filter(|(a, _)| **a > 0.0)
                    .map(|(a, p)| a.ln() - p.ln())
                    .fold(f64::NEG_INFINITY, f64::max);
                e.ln() + best
            }
            Rho::CobbDouglas => self
                .coeffs
                .iter()
                .zip(prices)
                .filter(|(a, _)| **a > 0.0)
                .map(|(a, p)| a * (e * a / p).ln())
                .sum(),
            Rho::General(r) => {
                let c = r / (r - 1.0);
                let lw = self.log_weights(c, prices);
                e.ln() - log_sum_exp(&lw) / c
            }
        }
    }

    pub fn max_utility(&self, prices: &[f64]) -> f64 {
        self.log_max_utility(prices).exp()
    }

    /// Utility of the bundle `x_j = b_j / p_j`.
    pub fn utility_of_spending(&self, spending: &[f64], prices: &[f64]) -> f64 {
        let bundle = self
            .coeffs
            .iter()
            .zip(spending.iter().zip(prices))
            .filter(|(a, _)| **a > 0.0)
            .map(|(&a, (&b, &p))| (a, b / p));
        match self.rho {
            Rho::Linear => bundle.map(|(a, x)| a * x).sum(),
            Rho::CobbDouglas => {
                let mut log_u = 0.0;
                for (a, x) in bundle {
                    if x <= 0.0 {
                        return 0.0;
                    }
                    log_u += a * x.ln();
                }
                log_u.exp()
            }
            Rho::General(r) => {
                let mut sum = 0.0;
                for (a, x) in bundle {
                    if x <= 0.0 {
                        if r < 0.0 {
                            // x^rho is infinite, so the utility collapses to 0
                            return 0.0;
                        }
                        continue;
                    }
                    sum += a * x.powf(r);
                }
                sum.powf(1.0 / r)
            }
        }
    }
}

pub(crate) fn linear_ties(coeffs: &[f64], prices: &[f64], tol: f64) -> Vec<usize> {
    let ratios: Vec<f64> = coeffs.iter().zip(prices).map(|(a, p)| a / p).collect();
    let best = ratios.iter().cloned().fold(0.0, f64::max);
    ratios
        .iter()
        .enumerate()
        .filter(|(_, &q)| q > 0.0 && q >= best * (1.0 - tol))
        .map(|(j, _)| j)
        .collect()
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let top = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + values.iter().map(|v| (v - top).exp()).sum::<f64>().ln()
}

/// Strictly positive, finite prices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriceVector(Vec<f64>);

impl PriceVector {
    pub fn new(prices: Vec<f64>) -> Result<Self> {
        for (j, &p) in prices.iter().enumerate() {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::invalid(
                    format!("prices[{j}]"),
                    format!("must be finite and positive, got {p}"),
                ));
            }
        }
        Ok(PriceVector(prices))
    }

    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `p_j >= r_j` for every good.
    pub fn respects_reserves(&self, reserves: &[f64]) -> bool {
        self.0.len() == reserves.len() && self.0.iter().zip(reserves).all(|(p, r)| p >= r)
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl Deref for PriceVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Per-buyer, per-good spending `b_ij`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpendingMatrix {
    rows: Vec<Vec<f64>>,
}

impl SpendingMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        SpendingMatrix { rows }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, buyer: usize) -> &[f64] {
        &self.rows[buyer]
    }

    pub fn get(&self, buyer: usize, good: usize) -> f64 {
        self.rows[buyer][good]
    }

    /// Total spending on each good, `sum_i b_ij`.
    pub fn good_totals(&self) -> Vec<f64> {
        let n = self.rows.first().map_or(0, Vec::len);
        let mut totals = vec![0.0; n];
        for row in &self.rows {
            for (t, b) in totals.iter_mut().zip(row) {
                *t += b;
            }
        }
        totals
    }

    /// Aggregate demand `x_j = sum_i b_ij / p_j`.
    pub fn demand(&self, prices: &[f64]) -> Vec<f64> {
        self.good_totals()
            .into_iter()
            .zip(prices)
            .map(|(b, p)| b / p)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Market {
    buyers: Vec<CesBuyer>,
    supplies: Vec<f64>,
    reserves: Vec<f64>,
}

impl Market {
    pub fn new(buyers: Vec<CesBuyer>, supplies: Vec<f64>, reserves: Vec<f64>) -> Result<Self> {
        let n = supplies.len();
        if n == 0 {
            return Err(Error::invalid("goods", "market has no goods"));
        }
        if reserves.len() != n {
            return Err(Error::invalid(
                "goods",
                format!("{} supplies but {} reserves", n, reserves.len()),
            ));
        }
        for (j, (&w, &r)) in supplies.iter().zip(&reserves).enumerate() {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::invalid(
                    format!("goods[{j}].supply"),
                    format!("must be positive, got {w}"),
                ));
            }
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::invalid(
                    format!("goods[{j}].reserve"),
                    format!("must be nonnegative, got {r}"),
                ));
            }
        }
        for (i, b) in buyers.iter().enumerate() {
            if b.num_goods() != n {
                return Err(Error::invalid(
                    format!("buyers[{i}].coeffs"),
                    format!("has {} entries, market has {n} goods", b.num_goods()),
                ));
            }
        }
        if !buyers.is_empty() {
            for j in 0..n {
                if buyers.iter().all(|b| b.coeffs[j] == 0.0) {
                    return Err(Error::invalid(
                        format!("goods[{j}]"),
                        "no buyer has a positive coefficient for this good",
                    ));
                }
            }
        }
        let market = Market {
            buyers,
            supplies,
            reserves,
        };
        if !market.money_condition_holds() {
            log::warn!(
                "total money {} is below the largest reserve price; theorem checks are not guaranteed",
                market.total_money()
            );
        }
        Ok(market)
    }

    /// Market with every supply equal to 1.
    pub fn with_unit_supplies(buyers: Vec<CesBuyer>, reserves: Vec<f64>) -> Result<Self> {
        let n = reserves.len();
        Self::new(buyers, vec![1.0; n], reserves)
    }

    pub fn buyers(&self) -> &[CesBuyer] {
        &self.buyers
    }

    pub fn supplies(&self) -> &[f64] {
        &self.supplies
    }

    pub fn reserves(&self) -> &[f64] {
        &self.reserves
    }

    pub fn num_goods(&self) -> usize {
        self.supplies.len()
    }

    pub fn num_buyers(&self) -> usize {
        self.buyers.len()
    }

    /// `E = sum_i e_i`.
    pub fn total_money(&self) -> f64 {
        self.buyers.iter().map(CesBuyer::budget).sum()
    }

    /// `E >= max_j r_j`.
    pub fn money_condition_holds(&self) -> bool {
        let top = self.reserves.iter().cloned().fold(0.0, f64::max);
        self.total_money() >= top
    }

    pub fn all_reserves_positive(&self) -> bool {
        self.reserves.iter().all(|&r| r > 0.0)
    }

    pub fn spending(&self, prices: &[f64]) -> SpendingMatrix {
        SpendingMatrix::from_rows(self.buyers.iter().map(|b| b.best_response(prices)).collect())
    }

    /// Relative excess demand `(x_j - w_j) / w_j`.
    pub fn excess_demand(&self, prices: &[f64]) -> Vec<f64> {
        self.excess_from_spending(&self.spending(prices), prices)
    }

    pub fn excess_from_spending(&self, spending: &SpendingMatrix, prices: &[f64]) -> Vec<f64> {
        spending
            .demand(prices)
            .into_iter()
            .zip(&self.supplies)
            .map(|(x, w)| (x - w) / w)
            .collect()
    }

    /// The Eisenberg-Gale dual potential with supply weights.
    pub fn potential(&self, prices: &[f64]) -> Result<f64> {
        let mut value: f64 = prices.iter().zip(&self.supplies).map(|(p, w)| p * w).sum();
        for (i, b) in self.buyers.iter().enumerate() {
            let lu = b.log_max_utility(prices);
            if !lu.is_finite() {
                return Err(Error::Domain(format!(
                    "buyer {i} has non-positive maximum utility at these prices"
                )));
            }
            value += b.budget * lu;
        }
        Ok(value)
    }
}

pub fn best_response_spending(buyer: &CesBuyer, prices: &PriceVector) -> Vec<f64> {
    buyer.best_response(prices)
}

pub fn utility_of_spending(buyer: &CesBuyer, spending: &[f64], prices: &PriceVector) -> f64 {
    buyer.utility_of_spending(spending, prices)
}

pub fn max_utility(buyer: &CesBuyer, prices: &PriceVector) -> f64 {
    buyer.max_utility(prices)
}

pub fn excess_demand(market: &Market, prices: &PriceVector) -> Vec<f64> {
    market.excess_demand(prices)
}

pub fn potential(market: &Market, prices: &PriceVector) -> Result<f64> {
    market.potential(prices)
}

/// Central-difference estimate of `dF/dp_j`.
pub fn potential_gradient_fd(market: &Market, prices: &PriceVector, h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("finite-difference step must be positive, got {h}")));
    }
    if prices.iter().any(|&p| p - h <= 0.0) {
        return Err(Error::Domain("finite-difference step reaches a non-positive price".into()));
    }
    let mut grad = Vec::with_capacity(prices.len());
    let mut probe = prices.to_vec();
    for j in 0..prices.len() {
        probe[j] = prices[j] + h;
        let up = market.potential(&probe)?;
        probe[j] = prices[j] - h;
        let down = market.potential(&probe)?;
        probe[j] = prices[j];
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cd(budget: f64, a: &[f64]) -> CesBuyer {
        CesBuyer::new(budget, Rho::CobbDouglas, a.to_vec()).unwrap()
    }

    fn prices(p: &[f64]) -> PriceVector {
        PriceVector::new(p.to_vec()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn c_of_rho_values() {
        assert_eq!(c_of_rho(0.5).unwrap(), -1.0);
        assert_eq!(c_of_rho(-1.0).unwrap(), 0.5);
        assert_eq!(c_of_rho(0.0).unwrap(), 0.0);
        assert!(c_of_rho(1.0).is_err());
        assert!(c_of_rho(f64::NEG_INFINITY).is_err());
        assert_eq!(Rho::CobbDouglas.substitution(), Some(0.0));
        assert_eq!(Rho::Linear.substitution(), None);
    }

    #[test]
    fn rho_tags() {
        assert_eq!(Rho::new(1.0).unwrap(), Rho::Linear);
        assert_eq!(Rho::new(0.0).unwrap(), Rho::CobbDouglas);
        assert_eq!(Rho::new(-0.5).unwrap(), Rho::General(-0.5));
        assert!(Rho::new(1.5).is_err());
        assert!(Rho::new(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn buyer_validation() {
        assert!(CesBuyer::new(0.0, Rho::Linear, vec![1.0]).is_err());
        assert!(CesBuyer::new(1.0, Rho::Linear, vec![0.0, 0.0]).is_err());
        assert!(CesBuyer::new(1.0, Rho::Linear, vec![-1.0, 2.0]).is_err());
        assert!(CesBuyer::new(1.0, Rho::General(1.5), vec![1.0]).is_err());
        assert!(CesBuyer::new(1.0, Rho::General(0.0), vec![1.0]).is_err());
        let b = cd(1.0, &[1.0, 3.0]);
        assert_eq!(b.coeffs(), &[0.25, 0.75]);
    }

    #[test]
    fn cobb_douglas_spends_fixed_shares() {
        let b = cd(1.0, &[0.3, 0.7]);
        for p in [[1.0, 1.0], [0.2, 7.0], [5.0, 0.01]] {
            let s = b.best_response(&p);
            assert!(close(s[0], 0.3, 1e-15) && close(s[1], 0.7, 1e-15));
        }
    }

    #[test]
    fn linear_buyer_in_oscillating_market() {
        let lam: f64 = 0.2;
        let b = CesBuyer::new(2.0, Rho::Linear, vec![1.0, 1.0]).unwrap();
        let p = prices(&[(lam / 2.0).exp(), (-lam / 2.0).exp()]);
        let s = best_response_spending(&b, &p);
        assert_eq!(s, vec![0.0, 2.0]);
        let x2 = s[1] / p[1];
        assert!(close(x2, 2.0 * 0.1f64.exp(), 1e-14));
    }

    #[test]
    fn linear_tie_splits_equally() {
        let b = CesBuyer::new(1.0, Rho::Linear, vec![1.0, 1.0, 0.5]).unwrap();
        assert_eq!(b.best_response(&[1.0, 1.0, 1.0]), vec![0.5, 0.5, 0.0]);
    }

    #[test]
    fn general_ces_closed_form() {
        let b = CesBuyer::new(3.0, Rho::General(0.5), vec![1.0, 1.0]).unwrap();
        let s = b.best_response(&[1.0, 2.0]);
        assert!(close(s[0], 2.0, 1e-14) && close(s[1], 1.0, 1e-14));
    }

    #[test]
    fn zero_coefficient_gets_no_spending() {
        for rho in [Rho::General(0.5), Rho::General(-2.0), Rho::CobbDouglas, Rho::Linear] {
            let b = CesBuyer::new(1.0, rho, vec![0.0, 1.0, 2.0]).unwrap();
            let s = b.best_response(&[0.01, 1.0, 1.0]);
            assert_eq!(s[0], 0.0, "{rho:?}");
            assert!(close(s.iter().sum(), 1.0, 1e-12));
        }
    }

    #[test]
    fn utility_of_spending_examples() {
        let lin = CesBuyer::new(2.0, Rho::Linear, vec![1.0, 1.0]).unwrap();
        let u = utility_of_spending(&lin, &[0.0, 2.0], &prices(&[1.0, (-0.1f64).exp()]));
        assert!(close(u, 2.0 * 0.1f64.exp(), 1e-14));

        let half = CesBuyer::new(1.0, Rho::General(0.5), vec![1.0, 1.0]).unwrap();
        let u = half.utility_of_spending(&[0.5, 0.5], &[1.0, 1.0]);
        assert!(close(u, 2.0, 1e-14));

        let c = cd(1.0, &[0.5, 0.5]);
        assert!(close(c.utility_of_spending(&[0.5, 0.5], &[1.0, 1.0]), 0.5, 1e-15));
        assert_eq!(c.utility_of_spending(&[0.0, 1.0], &[1.0, 1.0]), 0.0);

        let comp = CesBuyer::new(1.0, Rho::General(-2.0), vec![1.0, 1.0]).unwrap();
        assert_eq!(comp.utility_of_spending(&[0.0, 1.0], &[1.0, 1.0]), 0.0);
    }

    #[test]
    fn max_utility_examples() {
        let lin = CesBuyer::new(2.0, Rho::Linear, vec![1.0, 1.0]).unwrap();
        let u = max_utility(&lin, &prices(&[0.1f64.exp(), (-0.1f64).exp()]));
        assert!(close(u, 2.0 * 0.1f64.exp(), 1e-14));
        let half = CesBuyer::new(1.0, Rho::General(0.5), vec![1.0, 1.0]).unwrap();
        assert!(close(half.max_utility(&[1.0, 1.0]), 2.0, 1e-14));
        assert!(close(cd(1.0, &[0.5, 0.5]).max_utility(&[1.0, 1.0]), 0.5, 1e-15));
    }

    #[test]
    fn excess_demand_examples() {
        let lin = CesBuyer::new(2.0, Rho::Linear, vec![1.0, 1.0]).unwrap();
        let m = Market::with_unit_supplies(vec![lin], vec![0.0, 0.0]).unwrap();
        let z = excess_demand(&m, &prices(&[0.1f64.exp(), (-0.1f64).exp()]));
        assert_eq!(z[0], -1.0);
        assert!(close(z[1], 2.0 * 0.1f64.exp() - 1.0, 1e-14));

        let m = Market::with_unit_supplies(vec![cd(2.0, &[0.5, 0.5])], vec![0.0, 0.0]).unwrap();
        assert_eq!(m.excess_demand(&[1.0, 1.0]), vec![0.0, 0.0]);

        let l = CesBuyer::new(1.0, Rho::Linear, vec![1.0, 1.0]).unwrap();
        let m = Market::with_unit_supplies(vec![l.clone(), l], vec![0.0, 0.0]).unwrap();
        assert_eq!(m.excess_demand(&[1.0, 1.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn excess_demand_is_supply_relative() {
        let m = Market::new(vec![cd(2.0, &[0.5, 0.5])], vec![2.0, 0.5], vec![0.0, 0.0]).unwrap();
        // demand (1, 1) against supplies (2, 0.5)
        let z = m.excess_demand(&[1.0, 1.0]);
        assert!(close(z[0], -0.5, 1e-15) && close(z[1], 1.0, 1e-15));
    }

    #[test]
    fn potential_examples() {
        let m = Market::with_unit_supplies(vec![cd(2.0, &[0.5, 0.5])], vec![0.0, 0.0]).unwrap();
        assert!(close(potential(&m, &prices(&[1.0, 1.0])).unwrap(), 2.0, 1e-15));
        let lin = CesBuyer::new(2.0, Rho::Linear, vec![1.0, 1.0]).unwrap();
        let m = Market::with_unit_supplies(vec![lin], vec![0.0, 0.0]).unwrap();
        let f = m.potential(&[1.0, 1.0]).unwrap();
        assert!(close(f, 2.0 + 2.0 * 2f64.ln(), 1e-15));
        assert!((f - 3.3863).abs() < 1e-4);
    }

    #[test]
    fn gradient_fd_at_equilibrium_and_example1() {
        let m = Market::with_unit_supplies(vec![cd(2.0, &[0.5, 0.5])], vec![0.0, 0.0]).unwrap();
        let g = potential_gradient_fd(&m, &prices(&[1.0, 1.0]), 1e-6).unwrap();
        assert!(g.iter().all(|d| d.abs() < 1e-8));

        let lin = CesBuyer::new(2.0, Rho::Linear, vec![1.0, 1.0]).unwrap();
        let m = Market::with_unit_supplies(vec![lin], vec![0.0, 0.0]).unwrap();
        let p = prices(&[0.1f64.exp(), (-0.1f64).exp()]);
        let g = potential_gradient_fd(&m, &p, 1e-6).unwrap();
        let z = m.excess_demand(&p);
        assert!((g[0] + z[0]).abs() < 1e-6 && (g[1] + z[1]).abs() < 1e-6);
        assert!((g[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gradient_fd_rejects_bad_step() {
        let m = Market::with_unit_supplies(vec![cd(1.0, &[1.0])], vec![0.0]).unwrap();
        assert!(potential_gradient_fd(&m, &prices(&[1.0]), 0.0).is_err());
        assert!(potential_gradient_fd(&m, &prices(&[1.0]), 2.0).is_err());
    }

    #[test]
    fn market_validation_paths() {
        let b = CesBuyer::new(1.0, Rho::Linear, vec![1.0, 0.0]).unwrap();
        let err = Market::with_unit_supplies(vec![b], vec![0.0, 0.0]).unwrap_err();
        assert!(err.to_string().starts_with("goods[1]"), "{err}");
        let b = CesBuyer::new(1.0, Rho::Linear, vec![1.0]).unwrap();
        let err = Market::with_unit_supplies(vec![b], vec![0.0, 0.0]).unwrap_err();
        assert!(err.to_string().contains("buyers[0].coeffs"), "{err}");
        let b = CesBuyer::new(1.0, Rho::Linear, vec![1.0]).unwrap();
        assert!(Market::new(vec![b], vec![0.0], vec![0.0]).is_err());
    }

    #[test]
    fn price_vector_rejects_nonpositive() {
        assert!(PriceVector::new(vec![1.0, 0.0]).is_err());
        assert!(PriceVector::new(vec![f64::NAN]).is_err());
        assert!(PriceVector::new(vec![1.0, 2.0]).unwrap().respects_reserves(&[1.0, 0.5]));
    }
}
