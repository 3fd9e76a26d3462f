//! Shared fixtures for the benchmarks.

use tatmarket_core::scenario::{large_linear, random_ces, RhoDistribution};
use tatmarket_core::{Market, PriceVector, ScenarioParams, TatConfig};

pub const SEED: u64 = 7;

pub struct Fixture {
    pub market: Market,
    pub p0: PriceVector,
    pub config: TatConfig,
}

pub fn linear(buyers: usize, goods: usize) -> Fixture {
    let params = ScenarioParams {
        buyers,
        goods,
        ..ScenarioParams::default()
    };
    let s = large_linear(&params, SEED).expect("valid scenario");
    Fixture {
        market: s.market,
        p0: s.p0,
        config: s.config,
    }
}

pub fn mixed(buyers: usize, goods: usize) -> Fixture {
    let params = ScenarioParams {
        buyers,
        goods,
        rho: RhoDistribution::Mixed,
        ..ScenarioParams::default()
    };
    let s = random_ces(&params, SEED).expect("valid scenario");
    Fixture {
        market: s.market,
        p0: s.p0,
        config: s.config,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        assert_eq!(linear(10, 3).market.num_buyers(), 10);
        assert_eq!(mixed(10, 3).market.num_goods(), 3);
    }
}
