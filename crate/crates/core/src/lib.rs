//! Tatonnement price dynamics for Fisher markets with CES buyers and reserve
//! prices, together with checkers for the bounds that govern its convergence.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod equilibrium;
pub mod dynamic;
pub mod error;
pub mod io;
pub mod market;
pub mod scenario;
pub mod tatonnement;
pub mod theory;

pub use dynamic::{dynamic_run, DynamicTrace, Multiplier, PerturbationSchedule};
pub use equilibrium::{kappa_of, solve_equilibrium, EqSolution};
pub use error::{Error, Result};
pub use scenario::{generate_scenario, Scenario, ScenarioParams};
pub use market::{CesBuyer, Market, PriceVector, Rho, SpendingMatrix};
pub use tatonnement::{run, tat_step, StepRecord, TatConfig, Trace};
pub use theory::{BoundReport, TheoremParams, Verdict};
