//! Command-line surface for the bound library: compute bounds, run
//! simulations, reproduce the benchmark table, and run the verification
//! suite. Data goes to --output (stdout by default); notes go to stderr.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error, 3 numeric
//! error.

use std::io::Write;

mod config;
mod output;
mod verify;

use clap::{Parser, Subcommand};

use mlebound::bound::{
    closed_form_normal, general_bound, xi_moments_normal_analytic, xi_moments_normal_paper,
    BoundBreakdown, BoundError, McConfig,
};
use mlebound::mc::{
    estimate_q_h, expect_h_gaussian, per_trial_records, table1, EhMethod, SimConfig, SimError,
    DESK_SCALE_CELL_CAP,
};
use mlebound::model::NormalModel;
use mlebound::par::run_with_workers;
use mlebound::testfn::TestFunction;

use config::{CommonArgs, Mode, Resolved};
use output::{open_sink, write_rows, Field, Row};

#[derive(Parser)]
#[command(
    name = "mlebound",
    version,
    about = "Explicit normal-approximation error bounds for MLEs with a \
             sum-of-i.i.d.-terms structure"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the bound breakdown, one row per sample size
    Bound(CommonArgs),
    /// Run standardized-MLE trials (aggregated, or per trial with --per-trial)
    Simulate(CommonArgs),
    /// Reproduce the benchmark table (q_h vs the closed-form bound)
    Table1(CommonArgs),
    /// Run the self-verification checks (oracles, audits, fault detection)
    Verify(CommonArgs),
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Numeric(String),
    VerificationFailed,
    Io(std::io::Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(_) | SimError::CellTooLarge { .. } => CliError::Usage(e.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<BoundError> for CliError {
    fn from(e: BoundError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(CliError::VerificationFailed) => 1,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Numeric(msg)) => {
            eprintln!("error: {msg}");
            3
        }
        Err(CliError::Io(e)) => {
            eprintln!("error: {e}");
            3
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Bound(args) => cmd_bound(args.resolve()?),
        Command::Simulate(args) => cmd_simulate(args.resolve()?),
        Command::Table1(args) => cmd_table1(args.resolve()?),
        Command::Verify(args) => cmd_verify(args.resolve()?),
    }
}

fn breakdown_row(b: &BoundBreakdown) -> Row {
    vec![
        ("n", Field::U64(b.n)),
        ("mode", Field::Str(b.mode.as_str().to_string())),
        ("r1_term", Field::F64(b.r1_term)),
        ("mse_term", Field::F64(b.mse_term)),
        ("a1_term", Field::F64(b.a1_term)),
        ("a2_term", Field::F64(b.a2_term)),
        ("total", Field::F64(b.total)),
        ("epsilon", Field::F64(b.epsilon)),
        (
            "moment_source",
            Field::Str(
                b.moment_source
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| "none".to_string()),
            ),
        ),
    ]
}

fn cmd_bound(resolved: Resolved) -> Result<(), CliError> {
    let mut ns = resolved.n.clone();
    ns.sort_unstable();

    // Monte Carlo backed modes share the simulation harness's desk cap.
    if resolved.mode != Mode::ClosedForm && !resolved.allow_large {
        for &n in &ns {
            if u128::from(n) * resolved.trials as u128 > DESK_SCALE_CELL_CAP {
                return Err(CliError::Usage(format!(
                    "cell n={n} x trials={} exceeds the desk-scale cap; pass --allow-large",
                    resolved.trials
                )));
            }
        }
    }
    if resolved.mode == Mode::Simplified && resolved.epsilon.is_finite() {
        return Err(CliError::Usage(
            "mode simplified uses the epsilon-free bound; drop --epsilon or pass inf".to_string(),
        ));
    }

    let model = NormalModel::new();
    let theta0 = [resolved.mu, resolved.sigma2];
    let h = resolved.h.clone();
    let mc = McConfig {
        trials: resolved.trials,
        seed: resolved.seed,
    };
    let epsilon = resolved.epsilon;
    let mode = resolved.mode;

    let breakdowns = run_with_workers(
        resolved.workers,
        || -> Result<Vec<BoundBreakdown>, CliError> {
            ns.iter()
                .map(|&n| -> Result<BoundBreakdown, CliError> {
                    let b = match mode {
                        Mode::ClosedForm => closed_form_normal(n, &h)?,
                        Mode::PaperConstants => {
                            let moments = xi_moments_normal_paper();
                            general_bound(&model, &theta0, n, &h, epsilon, &moments, mc)?
                        }
                        Mode::General => {
                            let moments = xi_moments_normal_analytic()?;
                            general_bound(&model, &theta0, n, &h, epsilon, &moments, mc)?
                        }
                        Mode::Simplified => {
                            let moments = xi_moments_normal_analytic()?;
                            general_bound(&model, &theta0, n, &h, f64::INFINITY, &moments, mc)?
                        }
                    };
                    Ok(b)
                })
                .collect()
        },
    )?;

    let rows: Vec<Row> = breakdowns.iter().map(breakdown_row).collect();
    let mut sink = open_sink(&resolved.output)?;
    write_rows(&mut *sink, resolved.format, &rows)?;
    Ok(())
}

fn resolve_e_h_reference(
    h: &TestFunction,
    exact: bool,
    seed: u64,
) -> Result<(f64, String), CliError> {
    let (value, method) = match expect_h_gaussian(h, EhMethod::Quadrature) {
        Ok(e) => (e.value, "quadrature"),
        Err(SimError::QuadratureUnsupported { .. }) => {
            let est = expect_h_gaussian(
                h,
                EhMethod::MonteCarlo {
                    samples: 2_000_000,
                    seed,
                },
            )?;
            (est.value, "monte-carlo")
        }
        Err(e) => return Err(e.into()),
    };
    if exact {
        Ok((value, method.to_string()))
    } else {
        Ok((
            (value * 1000.0).round() / 1000.0,
            format!("{method}-rounded-3dp"),
        ))
    }
}

fn sim_row(row: &mlebound::mc::SimRow) -> Row {
    vec![
        ("n", Field::U64(row.n)),
        ("trials", Field::Usize(row.trials)),
        ("mean_h", Field::F64(row.mean_h)),
        ("q_h", Field::F64(row.q_h)),
        ("std_err", Field::F64(row.std_err)),
        ("bound", Field::F64(row.bound)),
        ("error", Field::F64(row.error)),
    ]
}

fn cmd_simulate(resolved: Resolved) -> Result<(), CliError> {
    let model = NormalModel::new();
    let theta0 = [resolved.mu, resolved.sigma2];
    let h = resolved.h.clone();

    if resolved.per_trial {
        if resolved.n.len() != 1 {
            return Err(CliError::Usage(
                "--per-trial needs exactly one --n value".to_string(),
            ));
        }
        let n = resolved.n[0];
        if !resolved.allow_large && u128::from(n) * resolved.trials as u128 > DESK_SCALE_CELL_CAP {
            return Err(CliError::Usage(format!(
                "cell n={n} x trials={} exceeds the desk-scale cap; pass --allow-large",
                resolved.trials
            )));
        }
        let records = run_with_workers(resolved.workers, || {
            per_trial_records(&model, &theta0, n, &h, resolved.trials, resolved.seed)
        })?;
        let rows: Vec<Row> = records
            .iter()
            .map(|r| {
                let mut row: Row = vec![("trial", Field::U64(r.trial))];
                for (i, &w) in r.w.iter().enumerate() {
                    let name: &'static str = match i {
                        0 => "w1",
                        1 => "w2",
                        2 => "w3",
                        3 => "w4",
                        _ => "w_extra",
                    };
                    row.push((name, Field::F64(w)));
                }
                row.push(("h_value", Field::F64(r.h_value)));
                row
            })
            .collect();
        let mut sink = open_sink(&resolved.output)?;
        write_rows(&mut *sink, resolved.format, &rows)?;
        return Ok(());
    }

    // aggregated: one SimReport-style row per n
    let mut ns = resolved.n.clone();
    ns.sort_unstable();
    for &n in &ns {
        if !resolved.allow_large && u128::from(n) * resolved.trials as u128 > DESK_SCALE_CELL_CAP {
            return Err(CliError::Usage(format!(
                "cell n={n} x trials={} exceeds the desk-scale cap; pass --allow-large",
                resolved.trials
            )));
        }
    }
    let (e_h, method) = resolve_e_h_reference(&h, resolved.exact_ehz, resolved.seed)?;
    eprintln!("# e_h_reference = {e_h} ({method})");
    let rows_data = run_with_workers(resolved.workers, || -> Result<Vec<_>, SimError> {
        ns.iter()
            .map(|&n| estimate_q_h(&model, &theta0, n, &h, resolved.trials, resolved.seed, e_h))
            .collect()
    })?;
    let rows: Vec<Row> = rows_data.iter().map(sim_row).collect();
    let mut sink = open_sink(&resolved.output)?;
    write_rows(&mut *sink, resolved.format, &rows)?;
    Ok(())
}

fn cmd_table1(resolved: Resolved) -> Result<(), CliError> {
    let config = SimConfig {
        mu: resolved.mu,
        sigma2: resolved.sigma2,
        n_list: resolved.n.clone(),
        trials: resolved.trials,
        master_seed: resolved.seed,
        h: resolved.h.clone(),
        workers: resolved.workers,
        exact_e_h: resolved.exact_ehz,
        allow_large: resolved.allow_large,
    };
    let report = table1(&config)?;
    eprintln!(
        "# e_h_used = {} ({}); unrounded = {}",
        report.e_h_used, report.e_h_method, report.e_h_exact
    );
    let retries: u64 = report.rows.iter().map(|r| r.degenerate_retries).sum();
    if retries > 0 {
        eprintln!("# degenerate trials redrawn: {retries}");
    }
    let rows: Vec<Row> = report.rows.iter().map(sim_row).collect();
    let mut sink = open_sink(&resolved.output)?;
    write_rows(&mut *sink, resolved.format, &rows)?;
    Ok(())
}

fn cmd_verify(resolved: Resolved) -> Result<(), CliError> {
    let results = run_with_workers(resolved.workers, || verify::run_all(resolved.seed));
    let mut sink = open_sink(&resolved.output)?;
    let mut all_passed = true;
    for r in &results {
        all_passed &= r.passed;
        writeln!(
            sink,
            "{} {}: {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        )?;
    }
    sink.flush()?;
    if all_passed {
        Ok(())
    } else {
        Err(CliError::VerificationFailed)
    }
}
