//! Unit-suffixed scalars. Every physical quantity on the command line and
//! in config files carries an explicit suffix ("450 nm", "1.3 s", "30 uW"),
//! so a bare number in a length slot is an error rather than a guess.

/// Dimension of a config value, used both to validate and to convert.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Length,
    Time,
    Power,
    Energy,
    /// Bare number: ratios, rates in 1/s, coefficients in raw SI.
    Number,
    Integer,
    Text,
}

impl Kind {
    pub fn describe(self) -> &'static str {
        match self {
            Kind::Length => "a length (nm, um, mm, cm, m)",
            Kind::Time => "a time (ps, ns, us, ms, s, min)",
            Kind::Power => "a power (nW, uW, mW, W)",
            Kind::Energy => "an energy (fJ, pJ, nJ, uJ, mJ, J)",
            Kind::Number => "a bare number",
            Kind::Integer => "a nonnegative integer",
            Kind::Text => "text",
        }
    }
}

const LENGTHS: &[(&str, f64)] =
    &[("nm", 1e-9), ("um", 1e-6), ("mm", 1e-3), ("cm", 1e-2), ("m", 1.0)];
const TIMES: &[(&str, f64)] =
    &[("min", 60.0), ("ps", 1e-12), ("ns", 1e-9), ("us", 1e-6), ("ms", 1e-3), ("s", 1.0)];
const POWERS: &[(&str, f64)] = &[("nW", 1e-9), ("uW", 1e-6), ("mW", 1e-3), ("W", 1.0)];
const ENERGIES: &[(&str, f64)] =
    &[("fJ", 1e-15), ("pJ", 1e-12), ("nJ", 1e-9), ("uJ", 1e-6), ("mJ", 1e-3), ("J", 1.0)];

fn with_suffix(text: &str, table: &[(&str, f64)], kind: Kind) -> Result<f64, String> {
    let text = text.trim();
    for &(suffix, factor) in table {
        if let Some(number) = text.strip_suffix(suffix) {
            let number = number.trim_end();
            if number.is_empty() {
                continue;
            }
            if let Ok(value) = number.parse::<f64>() {
                if !value.is_finite() {
                    return Err(format!("`{text}` is not finite"));
                }
                return Ok(value * factor);
            }
        }
    }
    Err(format!("`{text}` is not {}", kind.describe()))
}

pub fn parse_length(text: &str) -> Result<f64, String> {
    with_suffix(text, LENGTHS, Kind::Length)
}

pub fn parse_time(text: &str) -> Result<f64, String> {
    with_suffix(text, TIMES, Kind::Time)
}

pub fn parse_power(text: &str) -> Result<f64, String> {
    with_suffix(text, POWERS, Kind::Power)
}

pub fn parse_energy(text: &str) -> Result<f64, String> {
    with_suffix(text, ENERGIES, Kind::Energy)
}

pub fn parse_number(text: &str) -> Result<f64, String> {
    let text = text.trim();
    match text.parse::<f64>() {
        Ok(value) if value.is_finite() => Ok(value),
        _ => Err(format!("`{text}` is not a bare number")),
    }
}

pub fn parse_integer(text: &str) -> Result<u64, String> {
    let text = text.trim();
    text.parse::<u64>().map_err(|_| format!("`{text}` is not a nonnegative integer"))
}

/// Parse-time validation of a config value against its declared kind.
pub fn check(kind: Kind, raw: &str) -> Result<(), String> {
    match kind {
        Kind::Length => parse_length(raw).map(drop),
        Kind::Time => parse_time(raw).map(drop),
        Kind::Power => parse_power(raw).map(drop),
        Kind::Energy => parse_energy(raw).map(drop),
        Kind::Number => parse_number(raw).map(drop),
        Kind::Integer => parse_integer(raw).map(drop),
        Kind::Text => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The scale factors are floats, so conversions land within an ulp of
    /// the literal rather than exactly on it.
    fn close(value: f64, expected: f64) -> bool {
        (value - expected).abs() <= 1e-12 * expected.abs()
    }

    #[test]
    fn suffixes_scale_into_si() {
        assert!(close(parse_length("450 nm").unwrap(), 450e-9));
        assert!(close(parse_length("450nm").unwrap(), 450e-9));
        assert!(close(parse_length("1.5 um").unwrap(), 1.5e-6));
        assert_eq!(parse_time("3 min").unwrap(), 180.0);
        assert_eq!(parse_time("1e-2 s").unwrap(), 1e-2);
        assert!(close(parse_time("5 ms").unwrap(), 5e-3));
        assert!(close(parse_power("30 uW").unwrap(), 30e-6));
        assert!(close(parse_energy("2 pJ").unwrap(), 2e-12));
    }

    #[test]
    fn bare_numbers_are_rejected_where_a_unit_is_required() {
        assert!(parse_length("450").is_err());
        assert!(parse_time("1.3").is_err());
        assert!(parse_power("100e-6").is_err());
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        assert!(parse_time("450 nm").is_err());
        assert!(parse_length("30 uW").is_err());
        assert!(parse_power("5 s").is_err());
    }

    #[test]
    fn numbers_must_be_plain() {
        assert_eq!(parse_number("4e10").unwrap(), 4e10);
        assert!(parse_number("4e10 W").is_err());
        assert!(parse_number("inf").is_err());
    }
}
