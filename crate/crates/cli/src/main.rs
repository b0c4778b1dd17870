//! Command-line pipelines over the nanofiber collection toolkit: mode
//! tables, coupling sweeps, taper checks, photon-stream simulation, and
//! the correlation/fit analysis chain.
//!
//! Exit codes: 0 on success, 1 for a bad invocation or config file, 2 for
//! a domain failure (rejected model, failed adiabaticity, non-converged
//! fit, defective data).

// `!(x > 0.0)`-style guards deliberately reject NaN along with the
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod budget;
mod config;
mod correlate;
mod coupling;
mod error;
mod fits;
mod modes;
mod output;
mod simulate;
mod table;
mod taper;
mod units;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "nanofiber",
    version,
    about = "Model and analyze single-photon collection through a tapered fiber",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Guided modes of a step-index fiber at one wavelength.
    Modes(modes::ModesArgs),
    /// Coupling efficiency of a dipole emitter versus fiber diameter.
    CouplingSweep(coupling::CouplingArgs),
    /// Build a taper profile and test it against the adiabaticity criterion.
    Taper(taper::TaperArgs),
    /// Simulate a photon stream for a configured scene.
    Simulate(simulate::SimulateArgs),
    /// Correlate two channels of a stream into a g2 curve.
    Correlate(correlate::CorrelateArgs),
    /// Fit a fluorescence decay histogram.
    FitLifetime(fits::FitLifetimeArgs),
    /// Fit a saturation curve of rate versus power.
    FitSaturation(fits::FitSaturationArgs),
    /// Fit a polarization modulation curve.
    FitCosine(fits::FitCosineArgs),
    /// Fit an antibunching curve with a shelving shoulder.
    FitG2(fits::FitG2Args),
    /// End-to-end collection budget arithmetic.
    Budget(budget::BudgetArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    let outcome = match cli.command {
        Command::Modes(args) => modes::run(args),
        Command::CouplingSweep(args) => coupling::run(args),
        Command::Taper(args) => taper::run(args),
        Command::Simulate(args) => simulate::run(args),
        Command::Correlate(args) => correlate::run(args),
        Command::FitLifetime(args) => fits::run_lifetime(args),
        Command::FitSaturation(args) => fits::run_saturation(args),
        Command::FitCosine(args) => fits::run_cosine(args),
        Command::FitG2(args) => fits::run_g2(args),
        Command::Budget(args) => budget::run(args),
    };
    if let Err(failure) = outcome {
        eprintln!("error: {failure}");
        std::process::exit(failure.exit_code());
    }
}
