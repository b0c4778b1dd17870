//! `correlate`: histogram inter-channel delays from a time-tag stream and
//! normalize them to a g2 curve, optionally background-corrected with
//! measured signal and background rates.

use std::io::BufReader;
use std::path::PathBuf;

use clap::Args;

use nanofiber_core::photon_analysis::{
    correlate, corrected_g2, normalize_g2, BackgroundRecord, CorrelationMode,
};
use nanofiber_core::timetag_io::{read_ttag, Strictness, TimeTagStream};

use crate::config::RunConfig;
use crate::error::{Failure, Result};
use crate::output::{write_file, DataSink};
use crate::units;

#[derive(Args)]
pub struct CorrelateArgs {
    /// Time-tag stream; overrides `[io] input`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Start channel; overrides `[fit] channel_a`.
    #[arg(long)]
    channel_a: Option<u8>,
    /// Stop channel; overrides `[fit] channel_b`.
    #[arg(long)]
    channel_b: Option<u8>,
    /// Histogram bin width; overrides `[fit] bin`.
    #[arg(long, value_parser = units::parse_time)]
    bin: Option<f64>,
    /// Largest delay on either side; overrides `[fit] window`.
    #[arg(long, value_parser = units::parse_time)]
    window: Option<f64>,
    /// Pairing mode: `full` or `start-stop`; overrides `[fit] mode`.
    #[arg(long)]
    mode: Option<String>,
    /// Measured rates `S1,S2,N1,N2` in 1/s (signal then background per
    /// channel); switches the output to the corrected curve.
    #[arg(long)]
    background: Option<String>,
    /// Also write the raw coincidence histogram here.
    #[arg(long)]
    counts_out: Option<PathBuf>,
    /// Accept streams with unordered records.
    #[arg(long)]
    lenient: bool,
    /// Config file supplying defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the g2 CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn read_stream(path: &PathBuf, strictness: Strictness) -> Result<TimeTagStream> {
    let file = std::fs::File::open(path)
        .map_err(|err| Failure::usage(format!("cannot open {}: {err}", path.display())))?;
    let (stream, warnings) = read_ttag(BufReader::new(file), strictness)?;
    for warning in warnings {
        eprintln!("warning: {}: {warning}", path.display());
    }
    Ok(stream)
}

fn parse_background(text: &str) -> Result<BackgroundRecord> {
    let fields: Vec<&str> = text.split(',').collect();
    if fields.len() != 4 {
        return Err(Failure::usage(format!(
            "--background needs four rates `S1,S2,N1,N2`, got {} field(s)",
            fields.len()
        )));
    }
    let mut rates = [0.0; 4];
    for (slot, field) in rates.iter_mut().zip(&fields) {
        *slot = units::parse_number(field).map_err(Failure::Usage)?;
    }
    Ok(BackgroundRecord { signal: [rates[0], rates[1]], background: [rates[2], rates[3]] })
}

fn parse_mode(text: &str) -> Result<CorrelationMode> {
    match text {
        "full" => Ok(CorrelationMode::Full),
        "start-stop" => Ok(CorrelationMode::StartStop),
        other => Err(Failure::usage(format!("mode `{other}` is neither `full` nor `start-stop`"))),
    }
}

pub fn run(args: CorrelateArgs) -> Result<()> {
    let config = RunConfig::load(args.config.as_deref())?;
    let input = args
        .input
        .or(config.text("io", "input").map(PathBuf::from))
        .ok_or(Failure::usage("missing stream (--input or [io] input)"))?;
    let channel_a = match args.channel_a {
        Some(value) => value,
        None => config.integer("fit", "channel_a")?.unwrap_or(1) as u8,
    };
    let channel_b = match args.channel_b {
        Some(value) => value,
        None => config.integer("fit", "channel_b")?.unwrap_or(2) as u8,
    };
    let bin = args
        .bin
        .or(config.time("fit", "bin")?)
        .ok_or(Failure::usage("missing bin width (--bin or [fit] bin)"))?;
    let window = args
        .window
        .or(config.time("fit", "window")?)
        .ok_or(Failure::usage("missing delay window (--window or [fit] window)"))?;
    let mode = parse_mode(match &args.mode {
        Some(text) => text.as_str(),
        None => config.text("fit", "mode").unwrap_or("full"),
    })?;
    let strictness = if args.lenient { Strictness::Lenient } else { Strictness::Strict };

    let stream = read_stream(&input, strictness)?;
    let histogram = correlate(&stream, channel_a, channel_b, bin, window, mode)?;
    if let Some(path) = &args.counts_out {
        write_file(path, histogram.to_csv().as_bytes())?;
    }
    let raw = normalize_g2(&histogram)?;
    let (curve, label) = match &args.background {
        Some(text) => (corrected_g2(&raw, &parse_background(text)?)?, "corrected"),
        None => (raw, "raw"),
    };

    let sink = DataSink::new(args.out);
    sink.write(&curve.to_csv())?;
    let center = curve.g2[curve.g2.len() / 2];
    sink.summary(&format!(
        "{label} g2 over {} bins of {:.3} ns from {} x {} events; g2(0) = {:.3}",
        curve.g2.len(),
        bin * 1e9,
        histogram.total_a,
        histogram.total_b,
        center
    ));
    Ok(())
}
