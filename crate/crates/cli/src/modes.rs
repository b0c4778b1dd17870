//! `modes`: enumerate the guided modes of a step-index fiber at one
//! wavelength and emit them as a CSV table.

use std::path::PathBuf;

use clap::Args;

use nanofiber_core::fiber_modes::{
    enumerate_guided_modes, second_mode_cutoff_diameter, v_number, FiberSpec,
};

use crate::config::RunConfig;
use crate::error::{Failure, Result};
use crate::output::DataSink;
use crate::units;

#[derive(Args)]
pub struct ModesArgs {
    /// Fiber diameter, e.g. `450nm`; overrides `[fiber] diameter`.
    #[arg(long, value_parser = units::parse_length)]
    diameter: Option<f64>,
    /// Vacuum wavelength, e.g. `637nm`; overrides `[spectrum] wavelength`.
    #[arg(long, value_parser = units::parse_length)]
    wavelength: Option<f64>,
    /// Core index: `silica` (dispersive) or a fixed number.
    #[arg(long)]
    core: Option<String>,
    /// Surround index, default vacuum.
    #[arg(long)]
    surround: Option<f64>,
    /// Highest azimuthal order searched.
    #[arg(long, default_value_t = 3)]
    l_max: u32,
    /// Config file supplying defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: ModesArgs) -> Result<()> {
    let config = RunConfig::load(args.config.as_deref())?;
    let diameter = args
        .diameter
        .or(config.length("fiber", "diameter")?)
        .ok_or(Failure::usage("missing fiber diameter (--diameter or [fiber] diameter)"))?;
    let wavelength = args.wavelength.or(config.length("spectrum", "wavelength")?).ok_or(
        Failure::usage("missing wavelength (--wavelength or [spectrum] wavelength)"),
    )?;
    let core = config.index_model(args.core.as_deref())?;
    let surround = match args.surround {
        Some(value) => value,
        None => config.surround()?,
    };

    let spec = FiberSpec::new(diameter, core, surround)?;
    let modes = enumerate_guided_modes(&spec, wavelength, args.l_max)?;
    let v = v_number(&spec, wavelength)?;
    let cutoff = second_mode_cutoff_diameter(wavelength, &core, surround)?;

    let mut table = String::from("label,n_eff,beta_rad_per_m,u,w\n");
    for mode in &modes {
        table.push_str(&format!(
            "{},{:.9e},{:.9e},{:.9e},{:.9e}\n",
            mode.label(),
            mode.n_eff,
            mode.beta,
            mode.u,
            mode.w
        ));
    }

    let sink = DataSink::new(args.out);
    sink.write(&table)?;
    let (n1, n2) = modes.first().map(|m| m.indices()).unwrap_or((f64::NAN, f64::NAN));
    sink.summary(&format!(
        "{} guided mode(s) at d = {:.1} nm, lambda = {:.1} nm (V = {:.3}, n = {:.4}/{:.4}); second-mode cutoff at d = {:.1} nm",
        modes.len(),
        diameter * 1e9,
        wavelength * 1e9,
        v,
        n1,
        n2,
        cutoff * 1e9
    ));
    Ok(())
}
