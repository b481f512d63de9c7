use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use reduction_core::config::{Experiment, RunConfig};
use reduction_core::runner::{self, Overrides};
use reduction_core::Result;

#[derive(Parser)]
#[command(name = "reduction", version, about = "Energy-based stochastic state reduction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an ensemble and write trajectories and a summary.
    Simulate(Common),
    /// Simulate an ensemble and run the verification suite.
    Verify(Common),
    /// Euler-vs-closed-form strong error over the configured step ladder.
    Convergence(Common),
    /// Compare the finite-time model with the time-changed asymptotic model.
    Timechange(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of paths, overriding the config.
    #[arg(long)]
    paths: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<(Experiment, Overrides)> {
        let exp = RunConfig::from_path(&self.config)?.build()?;
        let ov = Overrides {
            seed: self.seed,
            paths: self.paths,
            threads: self.threads,
        };
        Ok((exp, ov))
    }
}

fn print_report(report: &reduction_core::diagnostics::Report) {
    for t in &report.tests {
        let status = match (&t.skipped, t.negative_control, t.passed) {
            (Some(_), _, _) => "SKIP",
            (None, true, false) => "FAIL (control, expected)",
            (None, true, true) => "PASS (control, unexpected)",
            (None, false, true) => "PASS",
            (None, false, false) => "FAIL",
        };
        match &t.skipped {
            Some(reason) => println!("{status:<28} {:<36} {reason}", t.name),
            None => println!(
                "{status:<28} {:<36} statistic {:.6e}  threshold {:.6e}",
                t.name, t.statistic, t.threshold
            ),
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate(c) => {
            let (exp, ov) = c.load()?;
            let out = runner::simulate(&exp, &ov, &c.out)?;
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            let freq = &out.summary.terminal_frequencies;
            println!("terminal frequencies {freq:?} over {} paths", out.summary.n_paths);
            Ok(match &out.report {
                Some(r) => {
                    print_report(r);
                    r.passed
                }
                None => true,
            })
        }
        Command::Verify(c) => {
            let (exp, ov) = c.load()?;
            let report = runner::verify(&exp, &ov)?;
            print_report(&report);
            let path = runner::write_report(&report, &c.out)?;
            println!("wrote {}", path.display());
            Ok(report.passed)
        }
        Command::Convergence(c) => {
            let (exp, ov) = c.load()?;
            let rows = runner::convergence(&exp, &ov)?;
            print!("{}", runner::convergence_csv(&rows));
            let path = runner::write_convergence(&rows, &c.out)?;
            println!("wrote {}", path.display());
            Ok(true)
        }
        Command::Timechange(c) => {
            let (exp, ov) = c.load()?;
            let result = runner::timechange(&exp, &ov)?;
            for r in &result.rows {
                println!(
                    "steps {:>7}  max |H~ - H| {:.6e}  rms {:.6e}  algebraic {:.3e}",
                    r.steps, r.max_discrepancy, r.rms_discrepancy, r.algebraic_discrepancy
                );
            }
            let path = runner::write_timechange(&result, &c.out)?;
            println!("wrote {}", path.display());
            println!("{}", if result.passed { "PASS" } else { "FAIL" });
            Ok(result.passed)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
