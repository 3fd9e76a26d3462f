//! `tatmarket`: run, check and track tatonnement on Fisher markets.

mod schedule;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use tatmarket_core::dynamic::{self, Oracle};
use tatmarket_core::equilibrium::{self, kappa_of};
use tatmarket_core::io::{emit_market, load_market, market_to_string, write_report, write_trace};
use tatmarket_core::scenario::{generate_scenario, RhoDistribution, ScenarioParams};
use tatmarket_core::theory::{self, BoundReport, TheoremParams};
use tatmarket_core::{Market, PriceVector, Rho, StepRecord, TatConfig};

use schedule::Perturbation;

#[derive(Parser)]
#[command(name = "tatmarket", version, about = "Tatonnement on CES Fisher markets with reserve prices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run tatonnement and write the price trace.
    Run(RunArgs),
    /// Run tatonnement and evaluate the convergence bounds along the trace.
    Check(CheckArgs),
    /// Solve for the equilibrium prices.
    SolveEq(SolveArgs),
    /// Observed and a-priori large-market epsilon.
    Epsilon(EpsilonArgs),
    /// Tatonnement in a market that drifts from round to round.
    Dynamic(DynamicArgs),
    /// Write a generated market to a market file.
    Scenario(ScenarioArgs),
}

#[derive(Args, Clone)]
struct Source {
    /// Market file (JSON).
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    market: Option<PathBuf>,
    /// Named scenario: example1, large-linear or random-ces.
    #[arg(long)]
    scenario: Option<String>,
    /// Seed for generated scenarios.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    buyers: usize,
    #[arg(long, default_value_t = 4)]
    goods: usize,
    /// Total money; defaults to the number of goods.
    #[arg(long)]
    total_money: Option<f64>,
    /// Buyer population for random-ces: mixed, linear, cobb-douglas or a number.
    #[arg(long, default_value = "mixed")]
    rho: String,
}

#[derive(Args, Clone)]
struct Tuning {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    /// Absolute plateau tolerance; default is relative to the starting potential.
    #[arg(long)]
    stop_tol: Option<f64>,
    /// Initial prices: comma-separated values, `reserves` or `uniform:<value>`.
    #[arg(long)]
    p0: Option<InitialPrices>,
}

#[derive(Clone, Debug, PartialEq)]
enum InitialPrices {
    Explicit(Vec<f64>),
    Reserves,
    Uniform(f64),
}

impl FromStr for InitialPrices {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "reserves" {
            return Ok(InitialPrices::Reserves);
        }
        if let Some(v) = s.strip_prefix("uniform:") {
            return Ok(InitialPrices::Uniform(v.parse().with_context(|| format!("bad price `{v}`"))?));
        }
        let values = s
            .split(',')
            .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad price `{v}`")))
            .collect::<Result<Vec<_>>>()?;
        Ok(InitialPrices::Explicit(values))
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    tuning: Tuning,
    /// Trace CSV; stdout when omitted.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CheckKind {
    Progress,
    LogUtility,
    Claim,
    StrongConvexity,
    Distance,
    PriceSum,
    Envelope,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    tuning: Tuning,
    /// Checks to run; all of them when omitted.
    #[arg(long, value_enum, value_delimiter = ',')]
    checks: Vec<CheckKind>,
    /// Large-market epsilon; observed along the run when omitted.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Report CSV; stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value_t = equilibrium::DEFAULT_TOL)]
    tol: f64,
    /// Price CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EpsilonArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    tuning: Tuning,
    /// Grid points per price ratio for the a-priori estimate.
    #[arg(long, default_value_t = 17)]
    grid: usize,
}

#[derive(Args)]
struct DynamicArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    tuning: Tuning,
    /// Perturbation, e.g. `budget:*:linear:0.001`; repeatable.
    #[arg(long = "perturb")]
    perturbations: Vec<Perturbation>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Skip the per-round equilibrium solves and the tracking check.
    #[arg(long)]
    no_oracle: bool,
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Per-round CSV (gap, disturbance, running max); stdout when omitted.
    #[arg(long)]
    rounds: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioArgs {
    #[command(flatten)]
    source: Source,
    /// Market file to write; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Setup {
    market: Market,
    p0: PriceVector,
    config: TatConfig,
}

fn load(source: &Source) -> Result<(Market, Option<(PriceVector, TatConfig)>)> {
    if let Some(path) = &source.market {
        let market = load_market(path).with_context(|| format!("loading {}", path.display()))?;
        return Ok((market, None));
    }
    let name = source.scenario.as_deref().ok_or_else(|| anyhow!("either --market or --scenario is required"))?;
    let seed = match (name, source.seed) {
        ("example1", seed) => seed.unwrap_or(0),
        (_, Some(seed)) => seed,
        (_, None) => bail!("--seed is required for scenario `{name}`"),
    };
    let params = ScenarioParams {
        buyers: source.buyers,
        goods: source.goods,
        total_money: source.total_money,
        rho: RhoDistribution::from_str(&source.rho)?,
        ..ScenarioParams::default()
    };
    let s = generate_scenario(name, &params, seed)?;
    Ok((s.market, Some((s.p0, s.config))))
}

fn default_prices(market: &Market) -> Vec<f64> {
    let n = market.num_goods() as f64;
    market
        .supplies()
        .iter()
        .zip(market.reserves())
        .map(|(w, r)| (market.total_money() / (n * w)).max(*r))
        .collect()
}

fn setup(source: &Source, tuning: &Tuning) -> Result<Setup> {
    let (market, suggested) = load(source)?;
    let (p0, base) = match suggested {
        Some((p0, config)) => (p0, config),
        None => (PriceVector::new(default_prices(&market))?, TatConfig::new(0.1, 0.5, 0.05)?),
    };
    let p0 = match &tuning.p0 {
        None => p0,
        Some(InitialPrices::Reserves) => PriceVector::new(market.reserves().to_vec())
            .context("--p0 reserves needs every reserve to be positive")?,
        Some(InitialPrices::Uniform(v)) => PriceVector::uniform(market.num_goods(), *v)?,
        Some(InitialPrices::Explicit(v)) => {
            if v.len() != market.num_goods() {
                bail!("--p0 has {} prices but the market has {} goods", v.len(), market.num_goods());
            }
            PriceVector::new(v.clone())?
        }
    };
    if !p0.respects_reserves(market.reserves()) {
        bail!("initial prices lie below the reserve prices");
    }
    let mut config = TatConfig::new(
        tuning.lambda.unwrap_or(base.lambda),
        tuning.sigma.unwrap_or(base.sigma),
        tuning.theta.unwrap_or(base.theta),
    )?
    .with_max_iters(tuning.max_iters);
    if let Some(tol) = tuning.stop_tol {
        config = config.with_stop_tol(tol);
    }
    config.validate()?;
    Ok(Setup { market, p0, config })
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn emit_steps(steps: &[StepRecord], path: Option<&Path>) -> Result<()> {
    write_trace(steps, sink(path)?)?;
    Ok(())
}

fn emit_reports(reports: &[BoundReport], path: Option<&Path>) -> Result<()> {
    write_report(reports, sink(path)?)?;
    Ok(())
}

/// `FAILED <k>/<n> checks` when any applicable check failed.
fn failure_line(reports: &[BoundReport]) -> Option<String> {
    let applicable = reports.iter().filter(|r| r.is_applicable()).count();
    let failed = reports.iter().filter(|r| r.failed()).count();
    (failed > 0).then(|| format!("FAILED {failed}/{applicable} checks"))
}

/// Prints the tally and turns failures into a nonzero exit.
fn verdict(reports: &[BoundReport]) -> ExitCode {
    let applicable = reports.iter().filter(|r| r.is_applicable()).count();
    let failed = reports.iter().filter(|r| r.failed()).count();
    eprintln!(
        "{applicable} checks applicable, {} inapplicable, {failed} failed",
        reports.len() - applicable
    );
    match failure_line(reports) {
        Some(line) => {
            println!("{line}");
            ExitCode::FAILURE
        }
        None => ExitCode::SUCCESS,
    }
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let s = setup(&args.source, &args.tuning)?;
    let trace = tatmarket_core::run(&s.market, &s.p0, &s.config)?;
    emit_steps(&trace.steps, args.trace.as_deref())?;
    match trace.plateau_at {
        Some(t) => eprintln!("plateau reached at step {t} (tol {:e})", trace.stop_tol),
        None => eprintln!("no plateau after {} steps (tol {:e})", trace.steps.len(), trace.stop_tol),
    }
    Ok(ExitCode::SUCCESS)
}

fn equilibrium_checks(
    wanted: &dyn Fn(CheckKind) -> bool,
    s: &Setup,
    trace: &tatmarket_core::Trace,
    epsilon: f64,
) -> Vec<BoundReport> {
    let needs_eq = [CheckKind::StrongConvexity, CheckKind::Distance, CheckKind::Envelope];
    if !needs_eq.iter().any(|k| wanted(*k)) {
        return Vec::new();
    }
    let skip = |reason: String| -> Vec<BoundReport> {
        needs_eq
            .iter()
            .filter(|k| wanted(**k))
            .map(|k| BoundReport::inapplicable(k.to_possible_value().unwrap().get_name(), reason.clone()))
            .collect()
    };
    let eq = match equilibrium::solve_equilibrium(&s.market, equilibrium::DEFAULT_TOL) {
        Ok(eq) => eq,
        Err(e) => return skip(e.to_string()),
    };
    let kappa = match kappa_of(&eq.p_star, s.market.reserves()) {
        Ok(k) => k,
        Err(e) => return skip(e.to_string()),
    };
    eprintln!("equilibrium: F* = {}, kappa = {kappa}", eq.f_star);
    let params = TheoremParams::new(&s.market, &s.config, kappa, epsilon);
    let mut out = Vec::new();
    if wanted(CheckKind::StrongConvexity) {
        for (t, p) in trace.prices().into_iter().enumerate() {
            out.push(theory::check_strong_convexity(&s.market, p, &eq.p_star, kappa).at_step(t));
        }
    }
    if wanted(CheckKind::Distance) {
        for step in &trace.steps {
            out.push(theory::check_distance_bound(&s.market, step, &eq.p_star, &params));
        }
    }
    if wanted(CheckKind::Envelope) {
        let m = theory::m_bound(&s.market, &s.p0, s.config.lambda);
        out.extend(theory::check_theorem1_envelope(trace, eq.f_star, &params, m));
    }
    out
}

fn cmd_check(args: CheckArgs) -> Result<ExitCode> {
    let s = setup(&args.source, &args.tuning)?;
    let trace = tatmarket_core::run(&s.market, &s.p0, &s.config)?;
    if let Some(path) = &args.trace {
        emit_steps(&trace.steps, Some(path))?;
    }
    let wanted = |k: CheckKind| args.checks.is_empty() || args.checks.contains(&k);
    let (lambda, sigma) = (s.config.lambda, s.config.sigma);
    let mut reports = Vec::new();
    for step in &trace.steps {
        if wanted(CheckKind::Progress) {
            reports.push(theory::check_progress(step, &s.market, sigma, lambda));
        }
        if wanted(CheckKind::LogUtility) {
            for (i, buyer) in s.market.buyers().iter().enumerate() {
                reports.extend(theory::check_buyer_log_utility(buyer, i, step, lambda));
            }
        }
        if wanted(CheckKind::Claim) {
            reports.extend(theory::check_claim_lower_progress(step, lambda));
        }
    }
    if wanted(CheckKind::PriceSum) {
        let m = theory::m_bound(&s.market, &s.p0, lambda);
        reports.extend(theory::check_price_sum(&trace.steps, m));
    }
    let epsilon = args
        .epsilon
        .unwrap_or_else(|| theory::epsilon_observed(&trace.steps, sigma, &s.market));
    eprintln!("epsilon = {epsilon}");
    reports.extend(equilibrium_checks(&wanted, &s, &trace, epsilon));
    emit_reports(&reports, args.report.as_deref())?;
    Ok(verdict(&reports))
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode> {
    let (market, _) = load(&args.source)?;
    let eq = equilibrium::solve_equilibrium(&market, args.tol)?;
    let mut out = sink(args.out.as_deref())?;
    writeln!(out, "good,p_star,reserve")?;
    for (j, (p, r)) in eq.p_star.iter().zip(market.reserves()).enumerate() {
        writeln!(out, "{j},{p},{r}")?;
    }
    out.flush()?;
    eprintln!("F* = {}, residual = {:e}, sweeps = {}", eq.f_star, eq.residual, eq.iterations);
    if let Ok(kappa) = kappa_of(&eq.p_star, market.reserves()) {
        eprintln!("kappa = {kappa}");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_epsilon(args: EpsilonArgs) -> Result<ExitCode> {
    let s = setup(&args.source, &args.tuning)?;
    let trace = tatmarket_core::run(&s.market, &s.p0, &s.config)?;
    let observed = theory::epsilon_observed(&trace.steps, s.config.sigma, &s.market);
    println!("kind,epsilon,detail");
    println!("observed,{observed},{} steps", trace.steps.len());
    let all_linear = s.market.buyers().iter().all(|b| b.rho() == Rho::Linear);
    if all_linear && s.market.all_reserves_positive() {
        let est = theory::epsilon_apriori_linear(&s.market, s.config.lambda, args.grid)?;
        let worst = est.worst_good.map(|j| format!("good {j}")).unwrap_or_default();
        println!("apriori,{},grid {} {worst}", est.value, est.grid_resolution);
    } else {
        eprintln!("a-priori estimate needs an all-linear market with positive reserves");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_dynamic(args: DynamicArgs) -> Result<ExitCode> {
    let s = setup(&args.source, &args.tuning)?;
    let schedule = schedule::build(&args.perturbations, &s.market)?;
    let oracle = if args.no_oracle {
        Oracle::Skip
    } else {
        Oracle::Solve { tol: equilibrium::DEFAULT_TOL }
    };
    let dtrace = dynamic::dynamic_run_with(&s.market, &s.p0, &schedule, &s.config, oracle)?;
    if let Some(path) = &args.trace {
        emit_steps(&dtrace.steps, Some(path))?;
    }
    let mut out = sink(args.rounds.as_deref())?;
    writeln!(out, "t,F,F_star,gap,disturbance,running_max")?;
    for (step, round) in dtrace.steps.iter().zip(&dtrace.rounds) {
        let f_star = round.equilibrium.as_ref().map(|e| e.f_star.to_string()).unwrap_or_default();
        let gap = round.gap.map(|g| g.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{f_star},{gap},{},{}",
            step.t, step.potential_before, round.disturbance, round.running_max
        )?;
    }
    out.flush()?;
    drop(out);
    eprintln!("disturbance bound D = {}", dtrace.disturbance_bound());
    if args.no_oracle {
        return Ok(ExitCode::SUCCESS);
    }
    let epsilon = args
        .epsilon
        .unwrap_or_else(|| theory::epsilon_observed(&dtrace.steps, s.config.sigma, &s.market));
    let params = dtrace.theorem_params(&s.market, &s.config, epsilon)?;
    let reports = dynamic::check_theorem2_envelope(&dtrace, &params);
    if let Some(path) = &args.report {
        emit_reports(&reports, Some(path))?;
    }
    Ok(verdict(&reports))
}

fn cmd_scenario(args: ScenarioArgs) -> Result<ExitCode> {
    let (market, suggested) = load(&args.source)?;
    match &args.out {
        Some(path) => emit_market(&market, path)?,
        None => println!("{}", market_to_string(&market)?),
    }
    if let Some((p0, config)) = suggested {
        let p0: Vec<String> = p0.iter().map(f64::to_string).collect();
        eprintln!(
            "suggested: --p0 {} --lambda {} --sigma {} --theta {}",
            p0.join(","),
            config.lambda,
            config.sigma,
            config.theta
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Check(a) => cmd_check(a),
        Command::SolveEq(a) => cmd_solve(a),
        Command::Epsilon(a) => cmd_epsilon(a),
        Command::Dynamic(a) => cmd_dynamic(a),
        Command::Scenario(a) => cmd_scenario(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
