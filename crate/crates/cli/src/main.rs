//! Batch experiment runner for fixed-price bilateral trade mechanisms:
//! verification of IR/SBB/DSIC, welfare evaluation, and the two
//! approximation rules, with CSV/JSON reports.

mod instance;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bitrade_core::pricing::{solve_threshold_price, DEFAULT_MASS_TOL};
use bitrade_core::verify::{search_counterexample, SearchBudget};
use bitrade_core::welfare::{welfare_report, Estimate};
use bitrade_core::{EvalMode, FixedPriceMechanism, PriceRule, TieBreaking};

use instance::{load_instance, InstanceSpec};
use report::{emit, render_csv, CsvRow};

#[derive(Parser)]
#[command(
    name = "bitrade",
    version,
    about = "Simulation and verification toolkit for multi-unit bilateral trade"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for an IR/SBB/DSIC violation of a mechanism over the
    /// instance's declared valuation class. Exits 0 iff none is found.
    Verify {
        #[arg(long)]
        instance: PathBuf,
        /// Path to a mechanism descriptor JSON file.
        #[arg(long)]
        mechanism: PathBuf,
        /// Optional file receiving the violation report (JSON lines).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate OPT, expected welfare, and their ratio for an explicit
    /// mechanism.
    Evaluate {
        /// Path to a mechanism descriptor JSON file.
        #[arg(long)]
        mechanism: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Build one of the approximation rules (det2 or grqm) for the
    /// instance's seller prior and report its welfare ratio.
    Approx {
        /// Price rule: "det2" (half-mass price) or "grqm" (random quantile).
        #[arg(long)]
        mechanism: RuleName,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Evaluate a grid of fixed prices; one CSV row per price.
    Sweep {
        /// Comma-separated unit prices, e.g. "0,1,2.5,5".
        #[arg(long, value_delimiter = ',', required = true)]
        prices: Vec<f64>,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Evaluation mode: "exact" (closed-form / quadrature) or "mc".
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    mode: Mode,
    /// Monte Carlo trial count (mc mode only).
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    /// RNG seed; required in mc mode, never defaulted from the clock.
    #[arg(long)]
    seed: Option<u64>,
    /// Optional CSV output path (stdout always receives the same bytes).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Mass tolerance override for threshold-price solving.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Mode {
    Exact,
    Mc,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleName {
    Det2,
    Grqm,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Verify {
            instance,
            mechanism,
            out,
        } => {
            let spec = load_instance(&instance)?;
            let mech = load_mechanism(&mechanism, spec.k)?;
            let found = search_counterexample(&mech, spec.class, SearchBudget::default());
            let mut doc = String::new();
            if let Some(v) = &found {
                doc.push_str(&serde_json::to_string(v)?);
                doc.push('\n');
            }
            emit(&doc, out.as_deref())?;
            Ok(if found.is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Evaluate { mechanism, run } => {
            let spec = load_instance(&run.instance)?;
            let mech = load_mechanism(&mechanism, spec.k)?;
            let name = mechanism
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "mechanism".into());
            let rows = vec![evaluate_rule(&spec, PriceRule::Fixed(mech), name, &run)?];
            emit(&render_csv(&rows), run.out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Approx { mechanism, run } => {
            let spec = load_instance(&run.instance)?;
            let (rule, name) = match mechanism {
                RuleName::Det2 => {
                    let tol = run.tol.unwrap_or(DEFAULT_MASS_TOL);
                    let sol =
                        solve_threshold_price(&spec.seller, spec.k as f64 / 2.0, tol)
                            .context("solving the half-mass price")?;
                    let mech = FixedPriceMechanism::full_range(
                        sol.p,
                        TieBreaking::FavorHighest,
                        spec.k,
                    )?;
                    (PriceRule::Fixed(mech), "det2".to_string())
                }
                RuleName::Grqm => (PriceRule::Grqm, "grqm".to_string()),
            };
            let rows = vec![evaluate_rule(&spec, rule, name, &run)?];
            emit(&render_csv(&rows), run.out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { prices, run } => {
            let spec = load_instance(&run.instance)?;
            let mut rows = Vec::with_capacity(prices.len());
            for p in prices {
                let mech =
                    FixedPriceMechanism::full_range(p, TieBreaking::FavorHighest, spec.k)?;
                rows.push(evaluate_rule(
                    &spec,
                    PriceRule::Fixed(mech),
                    format!("fixed@{p}"),
                    &run,
                )?);
            }
            emit(&render_csv(&rows), run.out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load_mechanism(path: &PathBuf, k: usize) -> Result<FixedPriceMechanism> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading mechanism file {}", path.display()))?;
    let mech = FixedPriceMechanism::from_json(&text)
        .with_context(|| format!("parsing mechanism file {}", path.display()))?;
    if mech.units() != k {
        bail!(
            "mechanism has k = {} but the instance declares k = {k}",
            mech.units()
        );
    }
    Ok(mech)
}

fn eval_mode(run: &RunArgs) -> Result<EvalMode> {
    match run.mode {
        Mode::Exact => Ok(EvalMode::Exact { quad_nodes: 256 }),
        Mode::Mc => {
            if run.seed.is_none() {
                return Err(anyhow!("mc mode requires an explicit --seed"));
            }
            if run.trials == 0 {
                return Err(anyhow!("mc mode requires --trials >= 1"));
            }
            Ok(EvalMode::MonteCarlo { trials: run.trials })
        }
    }
}

fn evaluate_rule(
    spec: &InstanceSpec,
    rule: PriceRule,
    name: String,
    run: &RunArgs,
) -> Result<CsvRow> {
    let mode = eval_mode(run)?;
    // each row gets a fresh stream so row order never changes the numbers
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed.unwrap_or(0));
    let report = welfare_report(&rule, &spec.buyer, &spec.seller, mode, &mut rng)?;
    Ok(csv_row(&spec.id, name, &report.opt, &report.sw, report.ratio))
}

fn csv_row(id: &str, mechanism: String, opt: &Estimate, sw: &Estimate, ratio: f64) -> CsvRow {
    let trials = match sw.method {
        bitrade_core::Method::MonteCarlo { trials } => Some(trials),
        _ => None,
    };
    CsvRow {
        instance_id: id.to_string(),
        mechanism,
        opt: opt.value,
        sw: sw.value,
        ratio,
        method: sw.method.to_string(),
        trials,
        stderr: sw.stderr,
    }
}
