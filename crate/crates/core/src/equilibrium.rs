//! Equilibrium oracle: minimizes the potential over `{p >= r}`.
//!
//! The descent scales one subset of goods at a time by a common factor
//! `e^s`. Along such a line the potential is convex in `s` and its one-sided
//! derivatives are available in closed form, so each line search bisects on
//! the sign of the right derivative. Subset directions (not just the
//! coordinate axes) are needed because linear buyers make the potential
//! nonsmooth at demand ties, where every single-coordinate move can be uphill.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::market::{linear_ties, Market, PriceVector, Rho};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const MULTISTARTS: usize = 5;
pub const MAX_SWEEPS: usize = 5000;

/// Relative tie tolerance used when judging linear demand in the residual.
pub const RESIDUAL_TIE_TOL: f64 = 1e-9;

/// Largest number of goods for which every subset is used as a direction.
const FULL_SUBSET_LIMIT: usize = 12;

const MULTISTART_SEED: u64 = 0x5eed_0fe9;

#[derive(Clone, Debug, PartialEq)]
pub struct EqSolution {
    pub p_star: PriceVector,
    pub f_star: f64,
    pub residual: f64,
    /// Descent sweeps used by the returned start.
    pub iterations: usize,
}

/// `max_j p*_j / r_j`.
pub fn kappa_of(p_star: &[f64], reserves: &[f64]) -> Result<f64> {
    let mut kappa: f64 = 0.0;
    for (j, (p, r)) in p_star.iter().zip(reserves).enumerate() {
        if *r <= 0.0 {
            return Err(Error::MissingReserve(j));
        }
        kappa = kappa.max(p / r);
    }
    Ok(kappa)
}

fn directions(n: usize) -> Vec<u64> {
    let full = (1u64 << n) - 1;
    if n <= FULL_SUBSET_LIMIT {
        return (1..=full).collect();
    }
    let mut out = Vec::new();
    for j in 0..n {
        for k in j..n {
            let s = (1u64 << j) | (1u64 << k);
            out.push(s);
            if s != full {
                out.push(full & !s);
            }
        }
    }
    out.push(full);
    out
}

fn in_set(mask: u64, j: usize) -> bool {
    mask >> j & 1 == 1
}

struct Box_ {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

fn search_box(market: &Market) -> Result<Box_> {
    if market.num_buyers() == 0 {
        return Err(Error::Domain("equilibrium needs at least one buyer".into()));
    }
    if market.num_goods() > 63 {
        return Err(Error::Domain("equilibrium solver supports at most 63 goods".into()));
    }
    let has_linear = market.buyers().iter().any(|b| b.rho() == Rho::Linear);
    let money = market.total_money();
    let mut lower = Vec::with_capacity(market.num_goods());
    let mut upper = Vec::with_capacity(market.num_goods());
    for (j, (&w, &r)) in market.supplies().iter().zip(market.reserves()).enumerate() {
        if r <= 0.0 && has_linear {
            return Err(Error::MissingReserve(j));
        }
        let cap = money / w;
        lower.push(if r > 0.0 { r } else { 1e-12 * cap });
        upper.push(cap + r);
    }
    Ok(Box_ { lower, upper })
}

/// One buyer's contribution to the potential along `p_S -> p_S e^s`.
enum LineTerm {
    /// `-(e / c) log(1 + pi (e^{cs} - 1))`.
    General { budget: f64, c: f64, share: f64 },
    /// `budget * (max(ln_in - s, ln_out) - max(ln_in, ln_out))`.
    Linear { budget: f64, ln_in: f64, ln_out: f64 },
}

struct Line {
    supply_value: f64,
    /// Slope of the Cobb-Douglas part, which is linear in `s`.
    fixed_slope: f64,
    terms: Vec<LineTerm>,
}

impl Line {
    fn new(market: &Market, prices: &[f64], mask: u64) -> Self {
        let supply_value = (0..prices.len())
            .filter(|&j| in_set(mask, j))
            .map(|j| market.supplies()[j] * prices[j])
            .sum();
        let mut fixed_slope = 0.0;
        let mut terms = Vec::new();
        for buyer in market.buyers() {
            let e = buyer.budget();
            match buyer.rho() {
                Rho::CobbDouglas => {
                    fixed_slope -= e * (0..prices.len())
                        .filter(|&j| in_set(mask, j))
                        .map(|j| buyer.coeffs()[j])
                        .sum::<f64>();
                }
                Rho::General(rho) => {
                    let b = buyer.best_response(prices);
                    let spent: f64 = (0..prices.len()).filter(|&j| in_set(mask, j)).map(|j| b[j]).sum();
                    let share = (spent / e).clamp(0.0, 1.0);
                    if share > 0.0 {
                        terms.push(LineTerm::General {
                            budget: e,
                            c: rho / (rho - 1.0),
                            share,
                        });
                    }
                }
                Rho::Linear => {
                    let mut ln_in = f64::NEG_INFINITY;
                    let mut ln_out = f64::NEG_INFINITY;
                    for (j, (&a, &p)) in buyer.coeffs().iter().zip(prices).enumerate() {
                        if a <= 0.0 {
                            continue;
                        }
                        let v = (a / p).ln();
                        if in_set(mask, j) {
                            ln_in = ln_in.max(v);
                        } else {
                            ln_out = ln_out.max(v);
                        }
                    }
                    if ln_in > f64::NEG_INFINITY {
                        terms.push(LineTerm::Linear {
                            budget: e,
                            ln_in,
                            ln_out,
                        });
                    }
                }
            }
        }
        Line {
            supply_value,
            fixed_slope,
            terms,
        }
    }

    fn value(&self, s: f64) -> f64 {
        let mut v = self.supply_value * s.exp_m1() + self.fixed_slope * s;
        for term in &self.terms {
            v += match *term {
                LineTerm::General { budget, c, share } => -(budget / c) * (share * (c * s).exp_m1()).ln_1p(),
                LineTerm::Linear { budget, ln_in, ln_out } => {
                    budget * ((ln_in - s).max(ln_out) - ln_in.max(ln_out))
                }
            };
        }
        v
    }

    fn right_slope(&self, s: f64) -> f64 {
        let mut d = self.supply_value * s.exp() + self.fixed_slope;
        for term in &self.terms {
            d += match *term {
                LineTerm::General { budget, c, share } => {
                    let g = (c * s).exp();
                    -budget * share * g / (1.0 + share * (g - 1.0))
                }
                LineTerm::Linear { budget, ln_in, ln_out } => {
                    if ln_in - s > ln_out {
                        -budget
                    } else {
                        0.0
                    }
                }
            };
        }
        d
    }

    /// Whether moving to `s` lowers the objective. Near the optimum the
    /// decrease is below the rounding of `value`, so the slope at `s / 2`
    /// is consulted as well.
    fn descends(&self, s: f64) -> bool {
        if self.value(s) < 0.0 {
            return true;
        }
        let mid = self.right_slope(0.5 * s);
        (s > 0.0 && mid < 0.0) || (s < 0.0 && mid > 0.0)
    }

    /// Minimizer of the convex line objective on `[lo, hi]`.
    fn argmin(&self, mut lo: f64, mut hi: f64) -> f64 {
        if self.right_slope(lo) >= 0.0 {
            return lo;
        }
        if self.right_slope(hi) < 0.0 {
            return hi;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.right_slope(mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// Largest relative violation of the equilibrium conditions at `prices`.
///
/// For each subset `S` of goods, the money that must be spent inside `S`
/// may not exceed its supply value, and (if no good of `S` sits at its
/// reserve) the money that can reach `S` must cover it. Linear buyers may
/// split their budget over their tied goods; for markets without linear
/// buyers this is `max_j |z_j|` over goods above reserve and `max(z_j, 0)`
/// at reserve.
pub fn equilibrium_residual(market: &Market, prices: &[f64]) -> f64 {
    let n = prices.len();
    let mut ces = vec![0.0; n];
    let mut linear: Vec<(u64, f64)> = Vec::new();
    for buyer in market.buyers() {
        if buyer.rho() == Rho::Linear {
            let ties = linear_ties(buyer.coeffs(), prices, RESIDUAL_TIE_TOL);
            let mask = ties.iter().fold(0u64, |m, &j| m | 1 << j);
            linear.push((mask, buyer.budget()));
        } else {
            for (acc, b) in ces.iter_mut().zip(buyer.best_response(prices)) {
                *acc += b;
            }
        }
    }
    let at_reserve: u64 = (0..n)
        .filter(|&j| prices[j] <= market.reserves()[j] * (1.0 + 1e-12))
        .fold(0, |m, j| m | 1 << j);
    let mut worst: f64 = 0.0;
    for mask in directions(n) {
        let mut value = 0.0;
        let mut spent = 0.0;
        for j in (0..n).filter(|&j| in_set(mask, j)) {
            value += market.supplies()[j] * prices[j];
            spent += ces[j];
        }
        let mut forced = 0.0;
        let mut reachable = 0.0;
        for &(ties, e) in &linear {
            if ties & !mask == 0 {
                forced += e;
            }
            if ties & mask != 0 {
                reachable += e;
            }
        }
        worst = worst.max((forced + spent - value) / value);
        if mask & at_reserve == 0 {
            worst = worst.max((value - reachable - spent) / value);
        }
    }
    worst
}

fn descend(market: &Market, start: Vec<f64>, bounds: &Box_, tol: f64) -> (Vec<f64>, f64, usize) {
    let n = start.len();
    let dirs = directions(n);
    let mut p = start;
    let mut residual = equilibrium_residual(market, &p);
    let mut sweeps = 0;
    while residual > tol && sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut moved = false;
        for &mask in &dirs {
            let members: Vec<usize> = (0..n).filter(|&j| in_set(mask, j)).collect();
            let lo = members
                .iter()
                .map(|&j| (bounds.lower[j] / p[j]).ln())
                .fold(f64::NEG_INFINITY, f64::max)
                .min(0.0);
            let hi = members
                .iter()
                .map(|&j| (bounds.upper[j] / p[j]).ln())
                .fold(f64::INFINITY, f64::min)
                .max(0.0);
            if lo == hi {
                continue;
            }
            let line = Line::new(market, &p, mask);
            let s = line.argmin(lo, hi);
            if s == 0.0 || !line.descends(s) {
                continue;
            }
            let factor = s.exp();
            for &j in &members {
                p[j] = (p[j] * factor).clamp(bounds.lower[j], bounds.upper[j]);
            }
            moved = true;
        }
        residual = equilibrium_residual(market, &p);
        if !moved {
            break;
        }
    }
    (p, residual, sweeps)
}

fn finish(market: &Market, p: Vec<f64>, residual: f64, sweeps: usize) -> Result<EqSolution> {
    let f_star = market.potential(&p)?;
    Ok(EqSolution {
        p_star: PriceVector::new(p)?,
        f_star,
        residual,
        iterations: sweeps,
    })
}

/// Multistart solve: five seeded starting points, the lowest potential among
/// converged starts is returned.
pub fn solve_equilibrium(market: &Market, tol: f64) -> Result<EqSolution> {
    let bounds = search_box(market)?;
    let n = market.num_goods();
    let mut rng = ChaCha8Rng::seed_from_u64(MULTISTART_SEED);
    let mut best: Option<EqSolution> = None;
    let mut best_residual = f64::INFINITY;
    let mut total_sweeps = 0;
    for k in 0..MULTISTARTS {
        let start: Vec<f64> = (0..n)
            .map(|j| {
                let (lo, hi) = (bounds.lower[j].ln(), bounds.upper[j].ln());
                if k == 0 {
                    // spread the money evenly over supply values
                    (market.total_money() / (n as f64 * market.supplies()[j])).clamp(bounds.lower[j], bounds.upper[j])
                } else {
                    rng.gen_range(lo..=hi).exp().clamp(bounds.lower[j], bounds.upper[j])
                }
            })
            .collect();
        let (p, residual, sweeps) = descend(market, start, &bounds, tol);
        total_sweeps += sweeps;
        log::debug!("start {k}: residual {residual:e} after {sweeps} sweeps");
        best_residual = best_residual.min(residual);
        if residual > tol {
            continue;
        }
        let candidate = finish(market, p, residual, sweeps)?;
        if best.as_ref().is_none_or(|b| candidate.f_star < b.f_star) {
            best = Some(candidate);
        }
    }
    best.ok_or(Error::NonConvergence {
        best_residual,
        iterations: total_sweeps,
    })
}

/// Single descent from `start`, clamped into the search box.
pub fn solve_equilibrium_from(market: &Market, start: &[f64], tol: f64) -> Result<EqSolution> {
    let bounds = search_box(market)?;
    if start.len() != market.num_goods() {
        return Err(Error::invalid("start", "length differs from the number of goods"));
    }
    let start: Vec<f64> = start
        .iter()
        .enumerate()
        .map(|(j, p)| p.clamp(bounds.lower[j], bounds.upper[j]))
        .collect();
    let (p, residual, sweeps) = descend(market, start, &bounds, tol);
    if residual > tol {
        return Err(Error::NonConvergence {
            best_residual: residual,
            iterations: sweeps,
        });
    }
    finish(market, p, residual, sweeps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::CesBuyer;

    fn linear(e: f64, a: Vec<f64>) -> CesBuyer {
        CesBuyer::new(e, Rho::Linear, a).unwrap()
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa_of(&[0.1, 0.5], &[0.1, 0.5]).unwrap(), 1.0);
        assert_eq!(kappa_of(&[1.0, 1.0], &[0.1, 0.5]).unwrap(), 10.0);
        assert!(matches!(kappa_of(&[1.0], &[0.0]), Err(Error::MissingReserve(0))));
    }

    #[test]
    fn cobb_douglas_closed_form() {
        let b = CesBuyer::new(2.0, Rho::CobbDouglas, vec![0.5, 0.5]).unwrap();
        let m = Market::with_unit_supplies(vec![b], vec![0.1, 0.1]).unwrap();
        let sol = solve_equilibrium(&m, DEFAULT_TOL).unwrap();
        for p in sol.p_star.iter() {
            assert!((p - 1.0).abs() < 1e-9, "{:?}", sol.p_star);
        }
        assert!(sol.residual <= DEFAULT_TOL);
        assert!((kappa_of(&sol.p_star, m.reserves()).unwrap() - 10.0).abs() < 1e-7);
    }

    #[test]
    fn symmetric_linear_buyers_escape_the_kink() {
        let m = Market::with_unit_supplies(
            vec![linear(1.0, vec![1.0, 1.0]), linear(1.0, vec![1.0, 1.0])],
            vec![0.1, 0.1],
        )
        .unwrap();
        let sol = solve_equilibrium_from(&m, &[2.0, 2.0], DEFAULT_TOL).unwrap();
        for p in sol.p_star.iter() {
            assert!((p - 1.0).abs() < 1e-9, "{:?}", sol.p_star);
        }
    }

    #[test]
    fn linear_tie_equilibrium_has_zero_residual() {
        // buyer 0 likes good 0 twice as much; buyer 1 is indifferent
        let m = Market::with_unit_supplies(
            vec![linear(1.0, vec![2.0, 1.0]), linear(2.0, vec![1.0, 1.0])],
            vec![0.1, 0.1],
        )
        .unwrap();
        let sol = solve_equilibrium(&m, DEFAULT_TOL).unwrap();
        assert!((sol.p_star.sum() - 3.0).abs() < 1e-9);
        assert!((sol.p_star[0] - 1.5).abs() < 1e-9, "{:?}", sol.p_star);
    }

    #[test]
    fn reserve_binds() {
        let b = CesBuyer::new(1.0, Rho::CobbDouglas, vec![0.9, 0.1]).unwrap();
        let m = Market::with_unit_supplies(vec![b], vec![0.1, 0.5]).unwrap();
        let sol = solve_equilibrium(&m, DEFAULT_TOL).unwrap();
        assert_eq!(sol.p_star[1], 0.5);
        assert!((sol.p_star[0] - 0.9).abs() < 1e-9);
    }

    #[test]
    fn linear_market_needs_reserves() {
        let m = Market::with_unit_supplies(vec![linear(1.0, vec![1.0, 1.0])], vec![0.1, 0.0]).unwrap();
        assert!(matches!(solve_equilibrium(&m, DEFAULT_TOL), Err(Error::MissingReserve(1))));
    }

    #[test]
    fn general_ces_clears_without_reserves() {
        let buyers = vec![
            CesBuyer::new(1.0, Rho::General(0.5), vec![1.0, 3.0]).unwrap(),
            CesBuyer::new(2.0, Rho::General(-1.0), vec![2.0, 1.0]).unwrap(),
        ];
        let m = Market::new(buyers, vec![1.0, 2.0], vec![0.0, 0.0]).unwrap();
        let sol = solve_equilibrium(&m, DEFAULT_TOL).unwrap();
        for z in m.excess_demand(&sol.p_star) {
            assert!(z.abs() <= 1e-9, "{z}");
        }
    }

    #[test]
    fn residual_matches_excess_demand_for_smooth_markets() {
        let b = CesBuyer::new(2.0, Rho::General(0.5), vec![1.0, 2.0]).unwrap();
        let m = Market::with_unit_supplies(vec![b], vec![0.0, 0.0]).unwrap();
        let p = [0.7, 1.9];
        let z = m.excess_demand(&p);
        let expect = z.iter().fold(0.0f64, |a, z| a.max(z.abs()));
        assert!((equilibrium_residual(&m, &p) - expect).abs() < 1e-14);
    }

    #[test]
    fn line_slope_matches_values() {
        let buyers = vec![
            CesBuyer::new(1.0, Rho::General(0.5), vec![1.0, 3.0, 1.0]).unwrap(),
            CesBuyer::new(2.0, Rho::General(-1.0), vec![2.0, 1.0, 1.0]).unwrap(),
            CesBuyer::new(1.5, Rho::CobbDouglas, vec![0.2, 0.3, 0.5]).unwrap(),
        ];
        let m = Market::with_unit_supplies(buyers, vec![0.0; 3]).unwrap();
        let p = [0.8, 1.3, 2.0];
        let f0 = m.potential(&p).unwrap();
        for mask in 1..8u64 {
            let line = Line::new(&m, &p, mask);
            for s in [-0.3, 0.0, 0.2] {
                let q: Vec<f64> = (0..3)
                    .map(|j| if in_set(mask, j) { p[j] * f64::exp(s) } else { p[j] })
                    .collect();
                let direct = m.potential(&q).unwrap() - f0;
                assert!((line.value(s) - direct).abs() < 1e-12);
                let h = 1e-6;
                let fd = (line.value(s + h) - line.value(s - h)) / (2.0 * h);
                assert!((line.right_slope(s) - fd).abs() < 1e-6);
            }
        }
    }
}
