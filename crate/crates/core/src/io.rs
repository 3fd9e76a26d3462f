//! Market files (JSON) and CSV emission of traces and check reports.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so every
//! emitted value parses back to the identical `f64`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{CesBuyer, Market, Rho};
use crate::tatonnement::StepRecord;
use crate::theory::BoundReport;

pub const TRACE_HEADER: &str = "t,good,price_before,price_after,z,delta,clamped,F_after";
pub const REPORT_HEADER: &str = "check,t,good,lhs,rhs,slack,pass";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoodSpec {
    pub supply: f64,
    pub reserve: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RhoSpec {
    Value(f64),
    Tag(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuyerSpec {
    pub budget: f64,
    pub rho: RhoSpec,
    pub coeffs: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketFile {
    pub goods: Vec<GoodSpec>,
    pub buyers: Vec<BuyerSpec>,
}

fn prefix(err: Error, path: &str) -> Error {
    match err {
        Error::Invalid { path: inner, reason } => Error::Invalid {
            path: format!("{path}.{inner}"),
            reason,
        },
        Error::Domain(reason) => Error::Invalid {
            path: path.to_string(),
            reason,
        },
        other => other,
    }
}

impl MarketFile {
    pub fn into_market(self) -> Result<Market> {
        let mut buyers = Vec::with_capacity(self.buyers.len());
        for (i, spec) in self.buyers.into_iter().enumerate() {
            let at = format!("buyers[{i}]");
            let rho = match spec.rho {
                RhoSpec::Value(v) => Rho::new(v).map_err(|e| prefix(e, &format!("{at}.rho")))?,
                RhoSpec::Tag(tag) => match tag.as_str() {
                    "linear" => Rho::Linear,
                    "cobb-douglas" => Rho::CobbDouglas,
                    other => {
                        return Err(Error::invalid(
                            format!("{at}.rho"),
                            format!("rho must be < 1 or the linear tag, got `{other}`"),
                        ))
                    }
                },
            };
            if rho == Rho::CobbDouglas {
                let total: f64 = spec.coeffs.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    log::warn!("{at}: Cobb-Douglas coefficients sum to {total}; normalizing");
                }
            }
            buyers.push(CesBuyer::new(spec.budget, rho, spec.coeffs).map_err(|e| prefix(e, &at))?);
        }
        let supplies = self.goods.iter().map(|g| g.supply).collect();
        let reserves = self.goods.iter().map(|g| g.reserve).collect();
        Market::new(buyers, supplies, reserves)
    }

    pub fn from_market(market: &Market) -> Self {
        MarketFile {
            goods: market
                .supplies()
                .iter()
                .zip(market.reserves())
                .map(|(&supply, &reserve)| GoodSpec { supply, reserve })
                .collect(),
            buyers: market
                .buyers()
                .iter()
                .map(|b| BuyerSpec {
                    budget: b.budget(),
                    rho: match b.rho() {
                        Rho::Linear => RhoSpec::Tag("linear".into()),
                        Rho::CobbDouglas => RhoSpec::Tag("cobb-douglas".into()),
                        Rho::General(r) => RhoSpec::Value(r),
                    },
                    coeffs: b.coeffs().to_vec(),
                })
                .collect(),
        }
    }
}

pub fn parse_market(text: &str) -> Result<Market> {
    let file: MarketFile = serde_json::from_str(text)?;
    file.into_market()
}

pub fn market_to_string(market: &Market) -> Result<String> {
    Ok(serde_json::to_string_pretty(&MarketFile::from_market(market))?)
}

pub fn load_market(path: impl AsRef<Path>) -> Result<Market> {
    parse_market(&std::fs::read_to_string(path)?)
}

pub fn emit_market(market: &Market, path: impl AsRef<Path>) -> Result<()> {
    let mut text = market_to_string(market)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_trace<W: Write>(steps: &[StepRecord], mut out: W) -> Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for s in steps {
        for j in 0..s.delta.len() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                s.t,
                j,
                s.prices_before[j],
                s.prices_after[j],
                s.z[j],
                s.delta[j],
                s.clamped[j],
                s.potential_after
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn emit_trace(steps: &[StepRecord], path: impl AsRef<Path>) -> Result<()> {
    write_trace(steps, BufWriter::new(File::create(path)?))
}

fn optional(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_report<W: Write>(reports: &[BoundReport], mut out: W) -> Result<()> {
    writeln!(out, "{REPORT_HEADER}")?;
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.check,
            optional(r.t),
            optional(r.good),
            r.lhs,
            r.rhs,
            r.slack,
            r.verdict
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn emit_report(reports: &[BoundReport], path: impl AsRef<Path>) -> Result<()> {
    write_report(reports, BufWriter::new(File::create(path)?))
}
