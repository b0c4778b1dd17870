//! `taper`: build a pull profile or a straight cone, test it against the
//! adiabaticity criterion, and emit the sampled profile with the local
//! criterion ratio as CSV. Exits 0 when the profile passes and 2 when it
//! does not, so recipes can be gated in scripts.

use std::path::PathBuf;

use clap::Args;

use nanofiber_core::taper_design::{
    adiabaticity_check, profile_from_recipe_sampled, HotZone, ProfileKind, PullRecipe,
    TaperProfile,
};

use crate::config::RunConfig;
use crate::error::{Failure, Result};
use crate::output::DataSink;
use crate::units;

#[derive(Args)]
pub struct TaperArgs {
    /// Profile shape: `pull` (flame-brush recipe) or `cone`.
    #[arg(long, default_value = "pull")]
    shape: String,
    /// Starting fiber radius (pull).
    #[arg(long, value_parser = units::parse_length)]
    initial_radius: Option<f64>,
    /// Hot-zone length (pull).
    #[arg(long, value_parser = units::parse_length)]
    hot_zone: Option<f64>,
    /// Total elongation of the pull.
    #[arg(long, value_parser = units::parse_length)]
    elongation: Option<f64>,
    /// Transition law of the pull: `exponential` or `linear`.
    #[arg(long, default_value = "exponential")]
    transition: String,
    /// Cone start radius.
    #[arg(long, value_parser = units::parse_length)]
    cone_start: Option<f64>,
    /// Cone end radius.
    #[arg(long, value_parser = units::parse_length)]
    cone_end: Option<f64>,
    /// Cone half-angle in degrees.
    #[arg(long)]
    cone_angle_deg: Option<f64>,
    /// Vacuum wavelength the criterion is evaluated at.
    #[arg(long, value_parser = units::parse_length)]
    wavelength: Option<f64>,
    /// Pass threshold on the criterion ratio.
    #[arg(long, default_value_t = 1.0)]
    safety: f64,
    /// Samples along the profile.
    #[arg(long, default_value_t = 512)]
    samples: usize,
    /// Config file supplying defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn require(value: Option<f64>, what: &str) -> Result<f64> {
    value.ok_or(Failure::usage(format!("--shape needs --{what}")))
}

fn build_profile(args: &TaperArgs) -> Result<TaperProfile> {
    match args.shape.as_str() {
        "pull" => {
            let recipe = PullRecipe {
                initial_radius: require(args.initial_radius, "initial-radius")?,
                hot_zone: HotZone::Constant(require(args.hot_zone, "hot-zone")?),
                total_elongation: require(args.elongation, "elongation")?,
                kind: match args.transition.as_str() {
                    "exponential" => ProfileKind::ConstantHotZone,
                    "linear" => ProfileKind::Linear,
                    other => {
                        return Err(Failure::usage(format!(
                            "transition `{other}` is neither `exponential` nor `linear`"
                        )))
                    }
                },
            };
            Ok(profile_from_recipe_sampled(&recipe, args.samples)?)
        }
        "cone" => {
            let angle = args
                .cone_angle_deg
                .ok_or(Failure::usage("--shape cone needs --cone-angle-deg"))?;
            Ok(TaperProfile::linear_cone(
                require(args.cone_start, "cone-start")?,
                require(args.cone_end, "cone-end")?,
                angle.to_radians(),
                args.samples,
            )?)
        }
        other => Err(Failure::usage(format!("shape `{other}` is neither `pull` nor `cone`"))),
    }
}

pub fn run(args: TaperArgs) -> Result<()> {
    let config = RunConfig::load(args.config.as_deref())?;
    let wavelength = args.wavelength.or(config.length("spectrum", "wavelength")?).ok_or(
        Failure::usage("missing wavelength (--wavelength or [spectrum] wavelength)"),
    )?;
    let profile = build_profile(&args)?;
    let report = adiabaticity_check(&profile, wavelength, args.safety)?;

    let mut table = String::from("z_m,r_m,rho\n");
    for i in 0..report.z.len() {
        table.push_str(&format!(
            "{:.9e},{:.9e},{:.9e}\n",
            report.z[i], report.r[i], report.rho[i]
        ));
    }
    let sink = DataSink::new(args.out);
    sink.write(&table)?;
    sink.summary(&format!(
        "waist {:.1} nm diameter over {:.2} mm; max criterion ratio {:.3} at z = {:.2} mm (threshold {})",
        2.0 * profile.waist_radius * 1e9,
        profile.waist_length * 1e3,
        report.max_rho,
        report.worst_z * 1e3,
        report.safety_factor
    ));
    if !report.pass {
        return Err(Failure::domain(format!(
            "profile is not adiabatic: criterion ratio reaches {:.3} (margin {:.3})",
            report.max_rho, report.min_margin
        )));
    }
    sink.summary("profile passes the adiabaticity criterion");
    Ok(())
}
