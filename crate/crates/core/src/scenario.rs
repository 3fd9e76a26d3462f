//! Named, seed-deterministic market generators.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::market::{CesBuyer, Market, PriceVector, Rho};
use crate::tatonnement::TatConfig;

pub const SCENARIOS: [&str; 3] = ["example1", "large-linear", "random-ces"];

/// Reserve of each good as a fraction of `E / n`.
pub const RESERVE_FRACTION: f64 = 0.05;

/// Substitution parameters drawn by the mixed random-ces population.
pub const MIXED_RHOS: [Rho; 6] = [
    Rho::General(-2.0),
    Rho::General(-0.5),
    Rho::CobbDouglas,
    Rho::General(0.3),
    Rho::General(0.7),
    Rho::Linear,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RhoDistribution {
    /// Uniform over [`MIXED_RHOS`].
    Mixed,
    PointMass(Rho),
}

impl FromStr for RhoDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixed" => Ok(RhoDistribution::Mixed),
            "linear" => Ok(RhoDistribution::PointMass(Rho::Linear)),
            "cobb-douglas" => Ok(RhoDistribution::PointMass(Rho::CobbDouglas)),
            other => {
                let v: f64 = other
                    .parse()
                    .map_err(|_| Error::invalid("rho", format!("expected mixed, linear, cobb-douglas or a number, got `{other}`")))?;
                Ok(RhoDistribution::PointMass(Rho::new(v)?))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioParams {
    pub buyers: usize,
    pub goods: usize,
    /// Total money `E`; defaults to the number of goods.
    pub total_money: Option<f64>,
    pub lambda: f64,
    pub sigma: f64,
    pub theta: f64,
    pub rho: RhoDistribution,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            buyers: 1000,
            goods: 4,
            total_money: None,
            lambda: 0.1,
            sigma: 0.5,
            theta: 0.05,
            rho: RhoDistribution::Mixed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub market: Market,
    pub p0: PriceVector,
    pub config: TatConfig,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} buyers, {} goods, E = {}",
            self.name,
            self.market.num_buyers(),
            self.market.num_goods(),
            self.market.total_money()
        )
    }
}

/// One linear buyer with two units of money and equal coefficients, two
/// unit goods, no reserves, started at `(e^{lambda/2}, e^{-lambda/2})`.
pub fn example1(lambda: f64) -> Result<Scenario> {
    let buyer = CesBuyer::new(2.0, Rho::Linear, vec![1.0, 1.0])?;
    let market = Market::with_unit_supplies(vec![buyer], vec![0.0, 0.0])?;
    let p0 = PriceVector::new(vec![(lambda / 2.0).exp(), (-lambda / 2.0).exp()])?;
    Ok(Scenario {
        name: "example1".into(),
        market,
        p0,
        config: TatConfig::new(lambda, 0.5, 0.05)?,
    })
}

fn check_sizes(params: &ScenarioParams) -> Result<f64> {
    if params.buyers == 0 {
        return Err(Error::invalid("buyers", "must be positive"));
    }
    if params.goods == 0 {
        return Err(Error::invalid("goods", "must be positive"));
    }
    let money = params.total_money.unwrap_or(params.goods as f64);
    if !(money > 0.0 && money.is_finite()) {
        return Err(Error::invalid("total_money", "must be finite and positive"));
    }
    Ok(money)
}

/// `m` linear buyers with coefficients log-uniform on `[1, 10]`, budgets
/// `E / m`, reserves `0.05 E / n`, started at uniform prices `E / n`.
pub fn large_linear(params: &ScenarioParams, seed: u64) -> Result<Scenario> {
    let money = check_sizes(params)?;
    let (m, n) = (params.buyers, params.goods);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = 10f64.ln();
    let buyers = (0..m)
        .map(|_| {
            let coeffs = (0..n).map(|_| rng.gen_range(0.0..top).exp()).collect();
            CesBuyer::new(money / m as f64, Rho::Linear, coeffs)
        })
        .collect::<Result<Vec<_>>>()?;
    let market = Market::with_unit_supplies(buyers, vec![RESERVE_FRACTION * money / n as f64; n])?;
    Ok(Scenario {
        name: "large-linear".into(),
        market,
        p0: PriceVector::uniform(n, money / n as f64)?,
        config: TatConfig::new(params.lambda, params.sigma, params.theta)?,
    })
}

/// Mixed CES population: budgets uniform on `[0.5, 1.5]` rescaled to total
/// `E`, coefficients uniform on `[0.1, 1]`, supplies uniform on `[0.5, 2]`,
/// reserves `0.05 E / n`, started at `p_j = E / (n w_j)`.
pub fn random_ces(params: &ScenarioParams, seed: u64) -> Result<Scenario> {
    let money = check_sizes(params)?;
    let (m, n) = (params.buyers, params.goods);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let supplies: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..=2.0)).collect();
    let raw_budgets: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..=1.5)).collect();
    let scale = money / raw_budgets.iter().sum::<f64>();
    let mut buyers = Vec::with_capacity(m);
    for budget in raw_budgets {
        let rho = match params.rho {
            RhoDistribution::Mixed => *MIXED_RHOS.choose(&mut rng).expect("nonempty"),
            RhoDistribution::PointMass(r) => r,
        };
        let coeffs = (0..n).map(|_| rng.gen_range(0.1..=1.0)).collect();
        buyers.push(CesBuyer::new(budget * scale, rho, coeffs)?);
    }
    let reserve = RESERVE_FRACTION * money / n as f64;
    let market = Market::new(buyers, supplies.clone(), vec![reserve; n])?;
    let p0 = supplies.iter().map(|w| (money / (n as f64 * w)).max(reserve)).collect();
    Ok(Scenario {
        name: "random-ces".into(),
        market,
        p0: PriceVector::new(p0)?,
        config: TatConfig::new(params.lambda, params.sigma, params.theta)?,
    })
}

pub fn generate_scenario(name: &str, params: &ScenarioParams, seed: u64) -> Result<Scenario> {
    match name {
        "example1" => example1(params.lambda),
        "large-linear" => large_linear(params, seed),
        "random-ces" => random_ces(params, seed),
        other => Err(Error::UnknownScenario(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example1_start() {
        let s = example1(0.2).unwrap();
        assert_eq!(s.p0.as_slice(), &[0.1f64.exp(), (-0.1f64).exp()]);
        assert_eq!(s.market.buyers()[0].budget(), 2.0);
        assert_eq!(s.market.reserves(), &[0.0, 0.0]);
    }

    #[test]
    fn large_linear_is_deterministic() {
        let params = ScenarioParams::default();
        let a = large_linear(&params, 7).unwrap();
        let b = large_linear(&params, 7).unwrap();
        assert_eq!(a.market, b.market);
        let c = large_linear(&params, 8).unwrap();
        assert_ne!(a.market, c.market);
        assert_eq!(a.market.num_buyers(), 1000);
        assert!((a.market.total_money() - 4.0).abs() < 1e-9);
        assert_eq!(a.market.reserves(), &[0.05; 4]);
        for b in a.market.buyers() {
            assert!(b.coeffs().iter().all(|&x| (1.0..=10.0).contains(&x)));
        }
    }

    #[test]
    fn point_mass_population() {
        let params = ScenarioParams {
            buyers: 8,
            goods: 3,
            rho: "0.5".parse().unwrap(),
            ..ScenarioParams::default()
        };
        let s = random_ces(&params, 1).unwrap();
        assert!(s.market.buyers().iter().all(|b| b.rho() == Rho::General(0.5)));
        assert!(s.p0.respects_reserves(s.market.reserves()));
    }

    #[test]
    fn mixed_population_uses_several_kinds() {
        let params = ScenarioParams {
            buyers: 60,
            goods: 3,
            ..ScenarioParams::default()
        };
        let s = random_ces(&params, 3).unwrap();
        let kinds: std::collections::HashSet<String> =
            s.market.buyers().iter().map(|b| format!("{:?}", b.rho())).collect();
        assert_eq!(kinds.len(), MIXED_RHOS.len());
    }

    #[test]
    fn unknown_name() {
        let err = generate_scenario("nope", &ScenarioParams::default(), 0).unwrap_err();
        assert!(matches!(err, Error::UnknownScenario(_)));
        assert!("1.5".parse::<RhoDistribution>().is_err());
    }
}
