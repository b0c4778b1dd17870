//! Photon-statistics analysis: correlation histograms from time-tag
//! streams, rate normalization to the raw correlation, the
//! background-corrected correlation, pulsed decay histograms, and the
//! curve fits built on the shared least-squares engine in [`fit`].
//!
//! All binning is done in integer ticks so results are bit-reproducible;
//! requested widths and windows snap to whole ticks.

pub mod fit;

pub use fit::{
    fit_cosine, fit_g2_three_level, fit_lifetime, fit_saturation, LifetimeFit, PolarizationFit,
    SaturationFit, ThreeLevelG2Fit,
};

use crate::error::{CoreError, Result};
use crate::timetag_io::TimeTagStream;

/// Hard cap on histogram size; a request beyond this is a unit mistake.
const MAX_BINS: usize = 1 << 24;

/// Which pairs enter the correlation histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationMode {
    /// Every pair of events within the delay window.
    Full,
    /// Each start event paired with the next stop event only.
    StartStop,
}

/// Coincidence counts on a delay axis centered at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationHistogram {
    pub mode: CorrelationMode,
    /// Bin width in seconds, snapped to a whole number of ticks.
    pub bin_width: f64,
    /// 2K+1 bins; index K is the bin centered on zero delay.
    pub counts: Vec<u64>,
    /// Event totals on the start and stop channels.
    pub total_a: u64,
    pub total_b: u64,
    /// Acquisition duration, taken as the stream's timestamp span.
    pub duration: f64,
}

impl CorrelationHistogram {
    /// Delay at the center of each bin, seconds.
    pub fn tau_centers(&self) -> Vec<f64> {
        let half = (self.counts.len() / 2) as i64;
        (0..self.counts.len() as i64)
            .map(|i| (i - half) as f64 * self.bin_width)
            .collect()
    }

    /// CSV export (bin_center_s, counts).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_center_s,counts\n");
        for (tau, &count) in self.tau_centers().iter().zip(self.counts.iter()) {
            out.push_str(&format!("{tau:.9e},{count}\n"));
        }
        out
    }
}

/// Raw or corrected correlation curve with per-bin statistical errors.
#[derive(Debug, Clone, PartialEq)]
pub struct G2Curve {
    /// Bin-center delays, seconds.
    pub tau: Vec<f64>,
    pub g2: Vec<f64>,
    /// One-sigma counting error per bin (empty when unknown, e.g. for
    /// analytically generated curves).
    pub sigma: Vec<f64>,
}

impl G2Curve {
    /// CSV export (tau_s, g2, sigma).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau_s,g2,sigma\n");
        for i in 0..self.tau.len() {
            let sigma = self.sigma.get(i).copied().unwrap_or(0.0);
            out.push_str(&format!("{:.9e},{:.9e},{:.9e}\n", self.tau[i], self.g2[i], sigma));
        }
        out
    }
}

/// Mean signal and background rates of the two channels, as measured by
/// the background-sampling protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundRecord {
    pub signal: [f64; 2],
    pub background: [f64; 2],
}

impl BackgroundRecord {
    pub fn validate(&self) -> Result<()> {
        for value in self.signal.iter().chain(self.background.iter()) {
            if !(value.is_finite() && *value >= 0.0) {
                return Err(CoreError::domain(format!("rate {value} must be nonnegative")));
            }
        }
        Ok(())
    }

    /// Measured total rate of channel i: signal plus background.
    pub fn total(&self, index: usize) -> f64 {
        self.signal[index] + self.background[index]
    }
}

/// Histogram of signal delays after the preceding sync record.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayHistogram {
    /// Bin width in seconds, snapped to a whole number of ticks.
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl DecayHistogram {
    /// Delay at the center of each bin, seconds.
    pub fn bin_centers(&self) -> Vec<f64> {
        (0..self.counts.len())
            .map(|i| (i as f64 + 0.5) * self.bin_width)
            .collect()
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// CSV export (bin_center_s, counts).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_center_s,counts\n");
        for (center, &count) in self.bin_centers().iter().zip(self.counts.iter()) {
            out.push_str(&format!("{center:.9e},{count}\n"));
        }
        out
    }
}

fn ticks_for(interval: f64, resolution_ps: u64, what: &str) -> Result<i64> {
    if !(interval.is_finite() && interval > 0.0) {
        return Err(CoreError::domain(format!("{what} {interval} must be positive")));
    }
    let ticks = (interval * 1e12 / resolution_ps as f64).round();
    if ticks < 1.0 {
        return Err(CoreError::domain(format!(
            "{what} {interval:.3e} s is below one {resolution_ps} ps tick"
        )));
    }
    Ok(ticks as i64)
}

fn channel_ticks(stream: &TimeTagStream, channel: u8) -> Result<Vec<i64>> {
    let ticks: Vec<i64> = stream
        .records
        .iter()
        .filter(|r| r.channel() == channel)
        .map(|r| r.ticks() as i64)
        .collect();
    if ticks.is_empty() {
        return Err(CoreError::domain(format!("no events on channel {channel}")));
    }
    Ok(ticks)
}

/// Correlate two channels of a stream into a delay histogram.
///
/// Delays are t_b - t_a. Full mode histograms every pair within the
/// window via a sliding two-pointer pass, so cost is O(n k) with k the
/// typical occupancy of the window; start-stop mode pairs each start with
/// the next stop only. For an autocorrelation (equal channels) the pair of
/// an event with itself is excluded.
pub fn correlate(
    stream: &TimeTagStream,
    ch_a: u8,
    ch_b: u8,
    bin_width: f64,
    max_delay: f64,
    mode: CorrelationMode,
) -> Result<CorrelationHistogram> {
    stream.validate()?;
    let bt = ticks_for(bin_width, stream.resolution_ps, "bin width")?;
    let half_bins = {
        if !(max_delay.is_finite() && max_delay > 0.0) {
            return Err(CoreError::domain(format!("delay window {max_delay} must be positive")));
        }
        let k = (max_delay / (bt as f64 * stream.resolution_ps as f64 * 1e-12)).round() as i64;
        if k < 1 {
            return Err(CoreError::domain(
                "delay window shorter than one bin".to_string(),
            ));
        }
        k
    };
    let n_bins = 2 * half_bins as usize + 1;
    if n_bins > MAX_BINS {
        return Err(CoreError::domain(format!(
            "{n_bins} bins requested, limit is {MAX_BINS}"
        )));
    }
    let times_a = channel_ticks(stream, ch_a)?;
    let times_b = if ch_a == ch_b { Vec::new() } else { channel_ticks(stream, ch_b)? };
    let times_b: &[i64] = if ch_a == ch_b { &times_a } else { &times_b };
    let auto = ch_a == ch_b;

    // Half-open bins in ticks: bin m covers [m*bt - h, m*bt + (bt - h))
    // around delay m*bt, with h = bt/2 rounded down.
    let h = bt / 2;
    let lower = -(half_bins * bt + h);
    let upper = half_bins * bt + (bt - h);
    let mut counts = vec![0u64; n_bins];

    match mode {
        CorrelationMode::Full if auto => {
            // Unordered pairs, each filed under its delay and the mirror.
            // Binning the positive delay once and reflecting keeps
            // C(tau) = C(-tau) exact for every bin parity; at even tick
            // counts per bin, edge delays would otherwise mirror into the
            // neighboring bin.
            let center = half_bins as usize;
            for (i, &ta) in times_a.iter().enumerate() {
                let mut j = i + 1;
                while j < times_a.len() && times_a[j] - ta < upper {
                    let m = ((times_a[j] - ta + h) / bt) as usize;
                    counts[center + m] += 1;
                    counts[center - m] += 1;
                    j += 1;
                }
            }
        }
        CorrelationMode::Full => {
            let mut window_start = 0usize;
            for &ta in &times_a {
                while window_start < times_b.len() && times_b[window_start] - ta < lower {
                    window_start += 1;
                }
                let mut j = window_start;
                while j < times_b.len() && times_b[j] - ta < upper {
                    let shifted = times_b[j] - ta + half_bins * bt + h;
                    counts[(shifted / bt) as usize] += 1;
                    j += 1;
                }
            }
        }
        CorrelationMode::StartStop => {
            let mut next = 0usize;
            for (i, &ta) in times_a.iter().enumerate() {
                if auto {
                    next = i + 1;
                } else {
                    while next < times_b.len() && times_b[next] < ta {
                        next += 1;
                    }
                }
                if let Some(&tb) = times_b.get(next) {
                    let delta = tb - ta;
                    if delta < upper {
                        let shifted = delta + half_bins * bt + h;
                        counts[(shifted / bt) as usize] += 1;
                    }
                }
            }
        }
    }

    Ok(CorrelationHistogram {
        mode,
        bin_width: bt as f64 * stream.resolution_ps as f64 * 1e-12,
        counts,
        total_a: times_a.len() as u64,
        total_b: times_b.len() as u64,
        duration: stream.span_seconds(),
    })
}

/// Normalize a full-mode histogram to the raw correlation
/// g2(tau) = C(tau) / (r_a r_b delta T).
pub fn normalize_g2(hist: &CorrelationHistogram) -> Result<G2Curve> {
    if hist.mode != CorrelationMode::Full {
        return Err(CoreError::domain(
            "start-stop histograms have no rate normalization; correlate in full mode".to_string(),
        ));
    }
    if !(hist.duration > 0.0) || hist.total_a == 0 || hist.total_b == 0 {
        return Err(CoreError::domain(
            "normalization needs a nonzero duration and counts on both channels".to_string(),
        ));
    }
    // r_a r_b delta T with r_i = N_i / T.
    let norm = hist.total_a as f64 * hist.total_b as f64 * hist.bin_width / hist.duration;
    let g2 = hist.counts.iter().map(|&c| c as f64 / norm).collect();
    let sigma = hist.counts.iter().map(|&c| (c.max(1) as f64).sqrt() / norm).collect();
    Ok(G2Curve { tau: hist.tau_centers(), g2, sigma })
}

/// Remove uncorrelated background from a raw correlation curve.
///
/// With measured totals T_i = S_i + N_i and a background uncorrelated with
/// everything, the signal correlation is
/// g2 = (raw * T1 T2 - N1 S2 - S1 N2 - N1 N2) / (S1 S2),
/// an affine map applied bin by bin; errors scale with the slope.
pub fn corrected_g2(raw: &G2Curve, record: &BackgroundRecord) -> Result<G2Curve> {
    record.validate()?;
    let [s1, s2] = record.signal;
    let [n1, n2] = record.background;
    if !(s1 > 0.0 && s2 > 0.0) {
        return Err(CoreError::domain(
            "pure background, correction undefined".to_string(),
        ));
    }
    let scale = record.total(0) * record.total(1) / (s1 * s2);
    let offset = (n1 * s2 + s1 * n2 + n1 * n2) / (s1 * s2);
    Ok(G2Curve {
        tau: raw.tau.clone(),
        g2: raw.g2.iter().map(|&g| g * scale - offset).collect(),
        sigma: raw.sigma.iter().map(|&s| s * scale).collect(),
    })
}

/// Histogram signal-channel delays after the most recent sync record.
pub fn decay_histogram(
    stream: &TimeTagStream,
    sync_channel: u8,
    signal_channel: u8,
    bin_width: f64,
    window: f64,
) -> Result<DecayHistogram> {
    stream.validate()?;
    let bt = ticks_for(bin_width, stream.resolution_ps, "bin width")?;
    let n_bins = {
        if !(window.is_finite() && window > 0.0) {
            return Err(CoreError::domain(format!("window {window} must be positive")));
        }
        let n = (window * 1e12 / (stream.resolution_ps as f64 * bt as f64)).round() as usize;
        if n < 1 {
            return Err(CoreError::domain("window shorter than one bin".to_string()));
        }
        n
    };
    if n_bins > MAX_BINS {
        return Err(CoreError::domain(format!("{n_bins} bins requested, limit is {MAX_BINS}")));
    }
    let window_ticks = bt as u64 * n_bins as u64;
    let mut counts = vec![0u64; n_bins];
    let mut last_sync: Option<u64> = None;
    let mut saw_sync = false;
    for record in &stream.records {
        let channel = record.channel();
        if channel == sync_channel {
            last_sync = Some(record.ticks());
            saw_sync = true;
        } else if channel == signal_channel {
            if let Some(sync) = last_sync {
                let delta = record.ticks() - sync;
                if delta < window_ticks {
                    counts[(delta / bt as u64) as usize] += 1;
                }
            }
        }
    }
    if !saw_sync {
        return Err(CoreError::domain(format!(
            "no sync records on channel {sync_channel}"
        )));
    }
    Ok(DecayHistogram {
        bin_width: bt as f64 * stream.resolution_ps as f64 * 1e-12,
        counts,
    })
}
