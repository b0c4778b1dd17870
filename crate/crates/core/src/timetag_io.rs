//! Time-tag persistence: a minimal binary container ("TTG1") plus a CSV
//! interchange schema, both bit-exact, and stream merging for overlaying
//! background on signal.
//!
//! A tag packs into one 64-bit word: channel in the top 4 bits, tick count
//! in the low 60. At 4 ps per tick the range covers more than 50 days, so
//! nothing here worries about rollover.

use crate::error::{CoreError, Result};
use std::io::{BufRead, BufReader, Read, Write};

const MAGIC: [u8; 4] = *b"TTG1";
const FORMAT_VERSION: u16 = 1;
const CSV_HEADER: &str = "channel,time_ps";

/// How readers treat recoverable defects (currently only tag ordering).
/// Structural problems (bad magic, truncation) are errors in both modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strictness {
    /// Out-of-order tags abort the read.
    Strict,
    /// Out-of-order tags are kept and reported as warnings.
    Lenient,
}

/// One detection event: channel 0..=15 and a 60-bit tick count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeTag(u64);

impl TimeTag {
    pub const MAX_TICKS: u64 = (1 << 60) - 1;

    pub fn new(channel: u8, ticks: u64) -> Result<Self> {
        if channel > 15 {
            return Err(CoreError::domain(format!("channel {channel} exceeds 15")));
        }
        if ticks > Self::MAX_TICKS {
            return Err(CoreError::domain(format!("tick count {ticks} exceeds 60 bits")));
        }
        Ok(TimeTag(u64::from(channel) << 60 | ticks))
    }

    /// Decode a wire word. Every 64-bit pattern is a valid tag.
    pub fn from_word(word: u64) -> Self {
        TimeTag(word)
    }

    pub fn word(self) -> u64 {
        self.0
    }

    pub fn channel(self) -> u8 {
        (self.0 >> 60) as u8
    }

    pub fn ticks(self) -> u64 {
        self.0 & Self::MAX_TICKS
    }
}

/// An ordered sequence of detection events with a common clock.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeTagStream {
    /// Picoseconds per tick.
    pub resolution_ps: u64,
    /// Tags with non-decreasing tick counts.
    pub records: Vec<TimeTag>,
}

impl TimeTagStream {
    pub fn new(resolution_ps: u64, records: Vec<TimeTag>) -> Result<Self> {
        let stream = TimeTagStream { resolution_ps, records };
        stream.validate()?;
        Ok(stream)
    }

    /// Check the ordering invariant and the clock resolution.
    pub fn validate(&self) -> Result<()> {
        if self.resolution_ps == 0 {
            return Err(CoreError::domain("resolution must be a positive tick size".to_string()));
        }
        if let Some((index, pair)) =
            self.records.windows(2).enumerate().find(|(_, p)| p[1].ticks() < p[0].ticks())
        {
            return Err(CoreError::domain(format!(
                "record {}: ticks {} precede {}",
                index + 1,
                pair[1].ticks(),
                pair[0].ticks()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Duration spanned by the tags, in seconds.
    pub fn span_seconds(&self) -> f64 {
        match (self.records.first(), self.records.last()) {
            (Some(a), Some(b)) => (b.ticks() - a.ticks()) as f64 * self.resolution_ps as f64 * 1e-12,
            _ => 0.0,
        }
    }
}

/// Write the binary container. The stream is validated first.
pub fn write_ttag<W: Write>(stream: &TimeTagStream, mut dest: W) -> Result<()> {
    stream.validate()?;
    dest.write_all(&MAGIC)?;
    dest.write_all(&FORMAT_VERSION.to_le_bytes())?;
    dest.write_all(&stream.resolution_ps.to_le_bytes())?;
    dest.write_all(&(stream.records.len() as u64).to_le_bytes())?;
    for tag in &stream.records {
        dest.write_all(&tag.word().to_le_bytes())?;
    }
    Ok(())
}

/// Read the binary container. Returns the stream together with any
/// warnings produced in lenient mode (always empty in strict mode).
pub fn read_ttag<R: Read>(mut source: R, strictness: Strictness) -> Result<(TimeTagStream, Vec<String>)> {
    let mut header = [0u8; 22];
    source
        .read_exact(&mut header)
        .map_err(|e| map_eof(e, "file shorter than the 22-byte header"))?;
    if header[0..4] != MAGIC {
        return Err(CoreError::format(format!(
            "bad magic {:02x?}, expected \"TTG1\"",
            &header[0..4]
        )));
    }
    let version = u16::from_le_bytes(header[4..6].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(CoreError::format(format!(
            "unsupported version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let resolution_ps = u64::from_le_bytes(header[6..14].try_into().unwrap());
    if resolution_ps == 0 {
        return Err(CoreError::format("resolution field is zero".to_string()));
    }
    let count = u64::from_le_bytes(header[14..22].try_into().unwrap());
    let count = usize::try_from(count)
        .map_err(|_| CoreError::format(format!("record count {count} exceeds addressable memory")))?;

    let mut records = Vec::with_capacity(count.min(1 << 24));
    let mut word = [0u8; 8];
    for index in 0..count {
        source.read_exact(&mut word).map_err(|e| {
            map_eof(e, &format!("file ends after {index} of {count} declared records"))
        })?;
        records.push(TimeTag::from_word(u64::from_le_bytes(word)));
    }
    let mut probe = [0u8; 1];
    match source.read_exact(&mut probe) {
        Ok(()) => {
            return Err(CoreError::format(format!(
                "trailing bytes after the {count} declared records"
            )))
        }
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {}
        Err(e) => return Err(e.into()),
    }

    let stream = TimeTagStream { resolution_ps, records };
    finish_ordering(stream, strictness, |index, tag, prev| {
        format!("record {index}: ticks {} precede {}", tag.ticks(), prev.ticks())
    })
}

fn map_eof(e: std::io::Error, context: &str) -> CoreError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        CoreError::format(context.to_string())
    } else {
        e.into()
    }
}

/// Apply the strictness policy to ordering violations found in a freshly
/// parsed stream. `describe` renders one violation (1-based index of the
/// offending record).
fn finish_ordering(
    stream: TimeTagStream,
    strictness: Strictness,
    describe: impl Fn(usize, TimeTag, TimeTag) -> String,
) -> Result<(TimeTagStream, Vec<String>)> {
    let mut warnings = Vec::new();
    for (index, pair) in stream.records.windows(2).enumerate() {
        if pair[1].ticks() < pair[0].ticks() {
            let text = describe(index + 1, pair[1], pair[0]);
            match strictness {
                Strictness::Strict => return Err(CoreError::format(text)),
                Strictness::Lenient => warnings.push(text),
            }
        }
    }
    Ok((stream, warnings))
}

/// Write the CSV interchange form: header `channel,time_ps`, one row per
/// tag with the time in picoseconds.
pub fn write_csv<W: Write>(stream: &TimeTagStream, mut dest: W) -> Result<()> {
    stream.validate()?;
    writeln!(dest, "{CSV_HEADER}")?;
    for tag in &stream.records {
        let time_ps = tag.ticks().checked_mul(stream.resolution_ps).ok_or_else(|| {
            CoreError::format(format!(
                "tick count {} at {} ps per tick overflows the picosecond column",
                tag.ticks(),
                stream.resolution_ps
            ))
        })?;
        writeln!(dest, "{},{}", tag.channel(), time_ps)?;
    }
    Ok(())
}

/// Read the CSV interchange form. Times are taken verbatim as picoseconds,
/// so the resulting stream has a 1 ps tick. Line numbers in errors count
/// the header as line 1.
pub fn read_csv<R: Read>(source: R, strictness: Strictness) -> Result<(TimeTagStream, Vec<String>)> {
    let reader = BufReader::new(source);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| CoreError::format("empty input, expected a header line".to_string()))??;
    if header.trim() != CSV_HEADER {
        return Err(CoreError::format(format!(
            "line 1: header {header:?}, expected {CSV_HEADER:?}"
        )));
    }
    let mut records = Vec::new();
    let mut line_numbers = Vec::new();
    for (offset, line) in lines.enumerate() {
        let line_number = offset + 2;
        let line = line?;
        let row = line.trim();
        if row.is_empty() {
            continue;
        }
        let (channel, time) = row.split_once(',').ok_or_else(|| {
            CoreError::format(format!("line {line_number}: expected two comma-separated fields"))
        })?;
        let channel: u8 = channel.trim().parse().map_err(|_| {
            CoreError::format(format!("line {line_number}: bad channel {:?}", channel.trim()))
        })?;
        let time_ps: u64 = time.trim().parse().map_err(|_| {
            CoreError::format(format!("line {line_number}: bad time {:?}", time.trim()))
        })?;
        let tag = TimeTag::new(channel, time_ps)
            .map_err(|e| CoreError::format(format!("line {line_number}: {e}")))?;
        records.push(tag);
        line_numbers.push(line_number);
    }
    let stream = TimeTagStream { resolution_ps: 1, records };
    finish_ordering(stream, strictness, |index, tag, prev| {
        format!(
            "line {}: time {} ps precedes {} ps",
            line_numbers[index],
            tag.ticks(),
            prev.ticks()
        )
    })
}

/// Timestamp-ordered merge of two streams on the same clock. Ties keep
/// tags from `a` ahead of tags from `b`.
pub fn merge_streams(a: &TimeTagStream, b: &TimeTagStream) -> Result<TimeTagStream> {
    if a.resolution_ps != b.resolution_ps {
        return Err(CoreError::domain(format!(
            "resolution mismatch: {} ps vs {} ps per tick",
            a.resolution_ps, b.resolution_ps
        )));
    }
    a.validate()?;
    b.validate()?;
    let mut records = Vec::with_capacity(a.len() + b.len());
    let (mut ia, mut ib) = (0, 0);
    while ia < a.records.len() && ib < b.records.len() {
        if b.records[ib].ticks() < a.records[ia].ticks() {
            records.push(b.records[ib]);
            ib += 1;
        } else {
            records.push(a.records[ia]);
            ia += 1;
        }
    }
    records.extend_from_slice(&a.records[ia..]);
    records.extend_from_slice(&b.records[ib..]);
    Ok(TimeTagStream { resolution_ps: a.resolution_ps, records })
}
