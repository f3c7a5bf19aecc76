use std::fmt::Write as _;
use std::io::Write as _;

use clap::{Parser, Subcommand};

use credal_cal::commands::{generate, merge, null_dist, sampling_demo, simulate, test};
use credal_cal::CliResult;

/// Tests whether an ensemble admits a calibrated convex combination.
#[derive(Parser)]
#[command(name = "credal-cal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Type I/II error sweep over synthetic scenarios.
    Simulate(simulate::SimulateArgs),
    /// Test an ingested prediction file.
    Test(test::TestArgs),
    /// Estimator distributions under calibrated labels.
    NullDist(null_dist::NullDistArgs),
    /// Image of flat weights on a polytope in the 2-simplex.
    SamplingDemo(sampling_demo::SamplingDemoArgs),
    /// Write a synthetic scenario as a prediction CSV.
    Generate(generate::GenerateArgs),
    /// Combine sweeps over disjoint repetition ranges.
    Merge(merge::MergeArgs),
}

/// Runs the command and returns the summary for stdout.
fn run(cli: Cli) -> CliResult<String> {
    let mut out = String::new();
    match cli.command {
        Command::Simulate(a) => {
            let report = simulate::run(&a)?;
            for row in &report.rows {
                let _ = writeln!(
                    out,
                    "{} {} {} alpha={} rate={:.3} reps={}",
                    row.case, row.estimator, row.method, row.alpha, row.rejection_rate, row.repetitions
                );
            }
        }
        Command::Test(a) => {
            let r = test::run(&a)?;
            let _ = writeln!(
                out,
                "proposed: statistic={:.6} p={:.4} reject={}",
                r.proposed.statistic, r.proposed.p_value, r.proposed.reject
            );
            let _ = writeln!(
                out,
                "mean predictor: statistic={:.6} p={:.4} reject={}",
                r.mean_predictor.statistic, r.mean_predictor.p_value, r.mean_predictor.reject
            );
        }
        Command::NullDist(a) => {
            for s in null_dist::run(&a)? {
                let _ = writeln!(out, "{} mean={:.6} sd={:.6} q95={:.6}", s.estimator, s.mean, s.sd, s.q95);
            }
        }
        Command::SamplingDemo(a) => {
            let s = sampling_demo::run(&a)?;
            let _ = writeln!(out, "concentration ratio {:.4} (all inside: {})", s.concentration_ratio, s.all_inside);
        }
        Command::Generate(a) => {
            let s = generate::run(&a)?;
            let _ = writeln!(out, "wrote {} rows ({} instances regenerated)", s.rows, s.regenerated);
        }
        Command::Merge(a) => {
            let r = merge::run(&a)?;
            let _ = writeln!(out, "merged {} records into {} rows", r.records.len(), r.rows.len());
        }
    }
    Ok(out)
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        // A closed stdout (e.g. piped into `head`) is not an error.
        Ok(text) => drop(std::io::stdout().write_all(text.as_bytes())),
        Err(e) => {
            eprintln!("credal-cal: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
