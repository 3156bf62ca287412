//! Command-line driver: check suites, solver runs, estimate verification,
//! the damping search, the oracle comparison and report aggregation.
//!
//! Exit status: 0 when every requested check passes, 1 when a check fails,
//! 2 on usage or configuration errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dynheat::harness::report::{aggregate, write_field_dump, Report};
use dynheat::harness::runs;
use dynheat::harness::spec::ExperimentSpec;
use dynheat::Error;

#[derive(Parser)]
#[command(name = "dynheat", version, about = "Half-space heat flow with a dynamical boundary condition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutArg {
    /// Directory for CSV/JSON reports (and field dumps for `solve`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Kernel identity suites.
    Kernels {
        #[command(subcommand)]
        action: CheckAction,
    },
    /// Quadrature suites and moment-bound slopes.
    Quad {
        #[command(subcommand)]
        action: CheckAction,
    },
    /// Solve the problem described by a config file.
    Solve {
        config: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Estimate checks.
    Verify {
        #[command(subcommand)]
        what: Verify,
    },
    /// Finite-difference cross-check.
    Oracle {
        #[command(subcommand)]
        action: OracleAction,
    },
    /// Aggregate every report in a directory into aggregate.csv / aggregate.summary.json.
    Report {
        #[arg(long, default_value = "out")]
        dir: PathBuf,
    },
}

#[derive(Subcommand)]
enum CheckAction {
    Check(OutArg),
}

#[derive(Subcommand)]
enum Verify {
    /// Semigroup decay, boundary-derivative and solution estimates.
    Estimates {
        spec: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Smallest damping M with sup_t e^{-Mt} t^γ ∫ e^{Ms} s^{-a} (t-s)^{-b} ds <= delta.
    #[command(allow_negative_numbers = true)]
    Lemma22 {
        a: f64,
        b: f64,
        gamma: f64,
        horizon: f64,
        delta: f64,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Subcommand)]
enum OracleAction {
    Compare {
        spec: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
}

fn print_report(r: &Report) {
    for e in &r.entries {
        let values: Vec<String> = e.values.iter().map(|(k, v)| format!("{k}={v:.6e}")).collect();
        let tag = if e.passed { "PASS" } else { "FAIL" };
        let detail = if e.detail.is_empty() { String::new() } else { format!(" ({})", e.detail) };
        println!("{tag} {}: {}{detail}", e.name, values.join(" "));
    }
}

fn emit(reports: &[Report], dir: Option<&Path>) -> dynheat::Result<bool> {
    for r in reports {
        print_report(r);
        if let Some(d) = dir {
            let (csv, json) = r.write(d)?;
            println!("wrote {} and {}", csv.display(), json.display());
        }
    }
    Ok(reports.iter().all(Report::passed))
}

fn load(path: &Path) -> dynheat::Result<ExperimentSpec> {
    ExperimentSpec::load(path)
}

fn run(cli: Cli) -> dynheat::Result<bool> {
    match cli.command {
        Command::Kernels { action: CheckAction::Check(out) } => emit(&[runs::kernels_report()?], out.out.as_deref()),
        Command::Quad { action: CheckAction::Check(out) } => emit(&[runs::quadrature_report()?], out.out.as_deref()),
        Command::Solve { config, out } => {
            let spec = load(&config)?;
            runs::require_plane(&spec)?;
            let sol = runs::solve_spec(&spec)?;
            let dir = out.out.unwrap_or_else(|| spec.output.directory.clone());
            if spec.output.dump_fields {
                for (name, traj) in [("v", &sol.v), ("w", &sol.w), ("u", &sol.u)] {
                    let path = write_field_dump(&dir, &format!("{}-{name}", spec.id), traj)?;
                    println!("wrote {}", path.display());
                }
            }
            emit(&[runs::solve_report(&spec, &sol)], Some(&dir))
        }
        Command::Verify { what: Verify::Estimates { spec, out } } => {
            let spec = load(&spec)?;
            let dir = out.out.unwrap_or_else(|| spec.output.directory.clone());
            let smoothing = runs::smoothing_report(&spec)?;
            if spec.estimates.run_solver {
                runs::require_plane(&spec)?;
            }
            let config = spec.solver.clone();
            let theorem = runs::theorem_report(&spec, |_, phi| dynheat::solver::picard_solve(phi, &config))?;
            emit(&[smoothing, theorem], Some(&dir))
        }
        Command::Verify { what: Verify::Lemma22 { a, b, gamma, horizon, delta, out } } => {
            let r = runs::lemma22_report(a, b, gamma, horizon, delta)?;
            for row in r.rows.iter().filter(|row| row.quantity == "sup_curve") {
                println!("t={:.6e} sup={:.6e}", row.t, row.value);
            }
            emit(&[r], out.out.as_deref())
        }
        Command::Oracle { action: OracleAction::Compare { spec, out } } => {
            let spec = load(&spec)?;
            runs::require_plane(&spec)?;
            let dir = out.out.unwrap_or_else(|| spec.output.directory.clone());
            let sol = runs::solve_spec(&spec)?;
            emit(&[runs::oracle_report(&spec, &sol.u)?], Some(&dir))
        }
        Command::Report { dir } => {
            let all = aggregate(&dir)?;
            for s in &all {
                println!("{} {}", if s.passed { "PASS" } else { "FAIL" }, s.experiment);
            }
            println!("wrote {}", dir.join("aggregate.csv").display());
            Ok(all.iter().all(|s| s.passed))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Parse(_) | Error::Domain(_) | Error::Io(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
