//! Parsing of `--perturb` specs for the dynamic subcommand.
//!
//! A spec is `<target>:<multiplier>` where the target is `budget:<i>`,
//! `supply:<j>` or `coeff:<i>:<j>` (an index of `*` means every buyer or
//! good) and the multiplier is `const:<c>`, `linear:<slope>`,
//! `sin:<amplitude>:<period>` or `step:<round>:<factor>`.

use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use tatmarket_core::{Market, Multiplier, PerturbationSchedule};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Index {
    All,
    One(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Target {
    Budget(Index),
    Supply(Index),
    Coeff(Index, Index),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Perturbation {
    pub target: Target,
    pub multiplier: Multiplier,
}

fn index(s: &str) -> Result<Index> {
    if s == "*" {
        return Ok(Index::All);
    }
    Ok(Index::One(s.parse().with_context(|| format!("bad index `{s}`"))?))
}

fn number(s: &str) -> Result<f64> {
    s.parse().with_context(|| format!("bad number `{s}`"))
}

fn multiplier(parts: &[&str]) -> Result<Multiplier> {
    match parts {
        ["const", c] => Ok(Multiplier::Constant(number(c)?)),
        ["linear", slope] => Ok(Multiplier::Linear { slope: number(slope)? }),
        ["sin", amplitude, period] => Ok(Multiplier::Sinusoid {
            amplitude: number(amplitude)?,
            period: number(period)?,
        }),
        ["step", at, factor] => Ok(Multiplier::Step {
            at: at.parse().with_context(|| format!("bad round `{at}`"))?,
            factor: number(factor)?,
        }),
        _ => bail!("expected const:<c>, linear:<slope>, sin:<amplitude>:<period> or step:<round>:<factor>"),
    }
}

impl FromStr for Perturbation {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let (target, rest) = match parts.as_slice() {
            ["budget", i, rest @ ..] => (Target::Budget(index(i)?), rest),
            ["supply", j, rest @ ..] => (Target::Supply(index(j)?), rest),
            ["coeff", i, j, rest @ ..] => (Target::Coeff(index(i)?, index(j)?), rest),
            _ => bail!("`{s}`: expected budget:<i>, supply:<j> or coeff:<i>:<j> followed by a multiplier"),
        };
        let multiplier = multiplier(rest).map_err(|e| anyhow!("`{s}`: {e}"))?;
        Ok(Perturbation { target, multiplier })
    }
}

fn expand(index: Index, len: usize, what: &str) -> Result<Vec<usize>> {
    match index {
        Index::All => Ok((0..len).collect()),
        Index::One(k) if k < len => Ok(vec![k]),
        Index::One(k) => bail!("{what} index {k} out of range (market has {len})"),
    }
}

pub fn build(perturbations: &[Perturbation], market: &Market) -> Result<PerturbationSchedule> {
    let mut schedule = PerturbationSchedule::identity();
    for p in perturbations {
        match p.target {
            Target::Budget(i) => {
                for i in expand(i, market.num_buyers(), "buyer")? {
                    schedule = schedule.budget(i, p.multiplier);
                }
            }
            Target::Supply(j) => {
                for j in expand(j, market.num_goods(), "good")? {
                    schedule = schedule.supply(j, p.multiplier);
                }
            }
            Target::Coeff(i, j) => {
                for i in expand(i, market.num_buyers(), "buyer")? {
                    for j in expand(j, market.num_goods(), "good")? {
                        schedule = schedule.coeff(i, j, p.multiplier);
                    }
                }
            }
        }
    }
    Ok(schedule)
}
