//! The four fit subcommands. Each reads a documented CSV (or a time-tag
//! stream for lifetimes), runs the corresponding fit, prints the fit
//! record as JSON, and puts a one-line human summary on the other stream.

use std::path::{Path, PathBuf};

use clap::Args;

use nanofiber_core::photon_analysis::{
    decay_histogram, fit_cosine, fit_g2_three_level, fit_lifetime, fit_saturation, DecayHistogram,
    G2Curve,
};
use nanofiber_core::timetag_io::Strictness;

use crate::config::RunConfig;
use crate::correlate::read_stream;
use crate::error::{Failure, Result};
use crate::output::DataSink;
use crate::table;
use crate::units;

fn emit_json<T: serde::Serialize>(out: Option<PathBuf>, record: &T, summary: &str) -> Result<()> {
    let sink = DataSink::new(out);
    let json = serde_json::to_string_pretty(record)
        .map_err(|err| Failure::domain(format!("cannot encode fit record: {err}")))?;
    sink.write(&format!("{json}\n"))?;
    sink.summary(summary);
    Ok(())
}

#[derive(Args)]
pub struct FitLifetimeArgs {
    /// Pulsed time-tag stream; overrides `[io] input`.
    #[arg(long, conflicts_with = "histogram")]
    input: Option<PathBuf>,
    /// Pre-binned decay histogram CSV (bin_center_s,counts) instead of a
    /// stream.
    #[arg(long)]
    histogram: Option<PathBuf>,
    /// Histogram bin width for the stream path; overrides `[fit] bin`.
    #[arg(long, value_parser = units::parse_time)]
    bin: Option<f64>,
    /// Histogram span for the stream path; overrides `[fit] window`.
    #[arg(long, value_parser = units::parse_time)]
    window: Option<f64>,
    /// Sync channel; overrides `[fit] sync_channel`.
    #[arg(long)]
    sync: Option<u8>,
    /// Detector channel; overrides `[fit] channel_a`.
    #[arg(long)]
    detector: Option<u8>,
    /// Config file supplying defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Rebuild a decay histogram from its CSV export, enforcing the uniform
/// grid the format guarantees (centers at (i + 1/2) * bin width).
fn histogram_from_csv(path: &Path) -> Result<DecayHistogram> {
    let rows = table::read_rows(path, 2, 2)?;
    if rows.len() < 2 {
        return Err(Failure::domain(format!("{}: need at least 2 bins", path.display())));
    }
    let bin_width = rows[1][0] - rows[0][0];
    if !(bin_width > 0.0) {
        return Err(Failure::domain(format!("{}: bin centers not ascending", path.display())));
    }
    for (i, row) in rows.iter().enumerate() {
        let expected = (i as f64 + 0.5) * bin_width;
        if (row[0] - expected).abs() > 1e-6 * bin_width {
            return Err(Failure::domain(format!(
                "{}: bin {} center {} off the uniform grid starting at half a bin",
                path.display(),
                i + 1,
                row[0]
            )));
        }
        if row[1] < 0.0 || row[1].fract() != 0.0 {
            return Err(Failure::domain(format!(
                "{}: bin {} count {} is not a nonnegative integer",
                path.display(),
                i + 1,
                row[1]
            )));
        }
    }
    Ok(DecayHistogram { bin_width, counts: rows.iter().map(|row| row[1] as u64).collect() })
}

pub fn run_lifetime(args: FitLifetimeArgs) -> Result<()> {
    let config = RunConfig::load(args.config.as_deref())?;
    let hist = match &args.histogram {
        Some(path) => histogram_from_csv(path)?,
        None => {
            let input = args
                .input
                .clone()
                .or(config.text("io", "input").map(PathBuf::from))
                .ok_or(Failure::usage("missing input (--input stream or --histogram CSV)"))?;
            let bin = args
                .bin
                .or(config.time("fit", "bin")?)
                .ok_or(Failure::usage("missing bin width (--bin or [fit] bin)"))?;
            let window = args
                .window
                .or(config.time("fit", "window")?)
                .ok_or(Failure::usage("missing window (--window or [fit] window)"))?;
            let sync = match args.sync {
                Some(value) => value,
                None => config.integer("fit", "sync_channel")?.unwrap_or(0) as u8,
            };
            let detector = match args.detector {
                Some(value) => value,
                None => config.integer("fit", "channel_a")?.unwrap_or(1) as u8,
            };
            let stream = read_stream(&input, Strictness::Strict)?;
            decay_histogram(&stream, sync, detector, bin, window)?
        }
    };
    let fit = fit_lifetime(&hist)?;
    let summary = if fit.single_component {
        format!(
            "single component: tau = {:.2} +- {:.2} ns, amplitude {:.1}",
            fit.tau_slow * 1e9,
            fit.sigma_tau_slow * 1e9,
            fit.amp_slow
        )
    } else {
        format!(
            "two components: tau = {:.2} +- {:.2} ns and {:.2} +- {:.2} ns (amplitude ratio {:.2})",
            fit.tau_fast * 1e9,
            fit.sigma_tau_fast * 1e9,
            fit.tau_slow * 1e9,
            fit.sigma_tau_slow * 1e9,
            fit.amp_fast / fit.amp_slow
        )
    };
    emit_json(args.out, &fit, &summary)
}

#[derive(Args)]
pub struct FitSaturationArgs {
    /// CSV of `power_w,rate_per_s` points.
    #[arg(long)]
    input: PathBuf,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run_saturation(args: FitSaturationArgs) -> Result<()> {
    let points = table::read_pairs(&args.input)?;
    let fit = fit_saturation(&points)?;
    let summary = format!(
        "saturation power {:.1} +- {:.1} uW, peak rate {:.3e} +- {:.1e} 1/s, background slope {:.3e} 1/(W s)",
        fit.saturation_power * 1e6,
        fit.sigma_saturation_power * 1e6,
        fit.max_rate,
        fit.sigma_max_rate,
        fit.background_slope
    );
    emit_json(args.out, &fit, &summary)
}

#[derive(Args)]
pub struct FitCosineArgs {
    /// CSV of `angle_rad,rate_per_s` points.
    #[arg(long)]
    input: PathBuf,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run_cosine(args: FitCosineArgs) -> Result<()> {
    let points = table::read_pairs(&args.input)?;
    let fit = fit_cosine(&points)?;
    // The suppression factor is derived, not a parameter; attach it to the
    // record when it is defined (mean above the modulation amplitude).
    let mut record = serde_json::to_value(&fit)
        .map_err(|err| Failure::domain(format!("cannot encode fit record: {err}")))?;
    let suppression = fit.suppression().ok();
    if let serde_json::Value::Object(map) = &mut record {
        map.insert(
            "suppression".to_string(),
            match suppression {
                Some(value) => serde_json::json!(value),
                None => serde_json::Value::Null,
            },
        );
    }
    let summary = match suppression {
        Some(value) => format!(
            "mean {:.1}, amplitude {:.1}, phase {:.3} rad; suppression factor {:.3}",
            fit.mean, fit.amplitude, fit.phase, value
        ),
        None => format!(
            "mean {:.1} does not exceed amplitude {:.1}; suppression undefined",
            fit.mean, fit.amplitude
        ),
    };
    emit_json(args.out, &record, &summary)
}

#[derive(Args)]
pub struct FitG2Args {
    /// CSV of `tau_s,g2[,sigma]` bins, as written by `correlate`.
    #[arg(long)]
    input: PathBuf,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run_g2(args: FitG2Args) -> Result<()> {
    let rows = table::read_rows(&args.input, 2, 3)?;
    let curve = G2Curve {
        tau: rows.iter().map(|row| row[0]).collect(),
        g2: rows.iter().map(|row| row[1]).collect(),
        sigma: rows.iter().map(|row| row.get(2).copied().unwrap_or(0.0)).collect(),
    };
    let fit = fit_g2_three_level(&curve)?;
    let span = curve.tau.last().unwrap() - curve.tau.first().unwrap();
    let summary = if fit.two_level {
        format!(
            "two-level emitter: antibunching time {:.2} +- {:.2} ns, no shelving shoulder",
            fit.tau1 * 1e9,
            fit.sigma_tau1 * 1e9
        )
    } else if fit.tau2 > span {
        format!(
            "antibunching time {:.2} +- {:.2} ns, shoulder {:.3} +- {:.3} with decay slower than the fitted window",
            fit.tau1 * 1e9,
            fit.sigma_tau1 * 1e9,
            fit.shoulder,
            fit.sigma_shoulder
        )
    } else {
        format!(
            "antibunching time {:.2} +- {:.2} ns, shoulder {:.3} +- {:.3} decaying over {:.1} ns",
            fit.tau1 * 1e9,
            fit.sigma_tau1 * 1e9,
            fit.shoulder,
            fit.sigma_shoulder,
            fit.tau2 * 1e9
        )
    };
    emit_json(args.out, &fit, &summary)
}
