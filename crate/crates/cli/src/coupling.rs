//! `coupling-sweep`: spectrum-averaged coupling efficiency of a surface
//! dipole versus fiber diameter, as CSV plus an argmax summary.

use std::path::PathBuf;

use clap::Args;

use nanofiber_core::dipole_coupling::{coupling_sweep, DipoleEmitter, SpectrumModel, SweepRequest};

use crate::config::RunConfig;
use crate::error::{Failure, Result};
use crate::output::DataSink;
use crate::units;

#[derive(Args)]
pub struct CouplingArgs {
    /// Smallest diameter in the sweep.
    #[arg(long, value_parser = units::parse_length, default_value = "200nm")]
    d_min: f64,
    /// Largest diameter in the sweep.
    #[arg(long, value_parser = units::parse_length, default_value = "1um")]
    d_max: f64,
    /// Diameter step.
    #[arg(long, value_parser = units::parse_length, default_value = "10nm")]
    step: f64,
    /// Emission spectrum: `nv` (broadband) or `line`.
    #[arg(long, default_value = "nv")]
    spectrum: String,
    /// Wavelength for `--spectrum line`; overrides `[spectrum] wavelength`.
    #[arg(long, value_parser = units::parse_length)]
    wavelength: Option<f64>,
    /// Dipole orientation and position: `radial`, `axial`, or `center`.
    #[arg(long, default_value = "radial")]
    dipole: String,
    /// Free-space radiative lifetime of the dipole.
    #[arg(long, value_parser = units::parse_time, default_value = "21ns")]
    dipole_lifetime: f64,
    /// Core index: `silica` or a fixed number.
    #[arg(long)]
    core: Option<String>,
    /// Surround index, default vacuum.
    #[arg(long)]
    surround: Option<f64>,
    /// Config file supplying defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: CouplingArgs) -> Result<()> {
    let config = RunConfig::load(args.config.as_deref())?;
    let spectrum = match args.spectrum.as_str() {
        "nv" => SpectrumModel::nv_default(),
        "line" => {
            let wavelength = args.wavelength.or(config.length("spectrum", "wavelength")?).ok_or(
                Failure::usage("--spectrum line needs --wavelength or [spectrum] wavelength"),
            )?;
            SpectrumModel::monochromatic(wavelength)
        }
        other => {
            return Err(Failure::usage(format!(
                "spectrum `{other}` is neither `nv` nor `line`"
            )))
        }
    };
    let dipole = match args.dipole.as_str() {
        "radial" => DipoleEmitter::radial_on_surface(args.dipole_lifetime),
        "axial" => DipoleEmitter::axial_on_surface(args.dipole_lifetime),
        "center" => DipoleEmitter::radial_at_center(args.dipole_lifetime),
        other => {
            return Err(Failure::usage(format!(
                "dipole `{other}` is not one of radial, axial, center"
            )))
        }
    };
    let request = SweepRequest {
        core: config.index_model(args.core.as_deref())?,
        surround: match args.surround {
            Some(value) => value,
            None => config.surround()?,
        },
        d_min: args.d_min,
        d_max: args.d_max,
        step: args.step,
    };

    let sweep = coupling_sweep(&request, &spectrum, &dipole)?;
    let sink = DataSink::new(args.out);
    sink.write(&sweep.to_csv())?;

    let best = sweep.argmax().ok_or(Failure::domain("sweep produced no points"))?;
    sink.summary(&format!(
        "best diameter {:.0} nm: eta_total {:.4} ({:.4} per side), fundamental fraction {:.3}",
        best.diameter * 1e9,
        best.eta_total,
        best.eta_per_side,
        best.fundamental_fraction
    ));
    match sweep.multimode_onset(0.01) {
        Some(onset) => sink.summary(&format!(
            "higher modes carry >1% of the coupled power from d = {:.0} nm",
            onset * 1e9
        )),
        None => sink.summary("fundamental-mode coupling stays above 99% across the sweep"),
    }
    Ok(())
}
