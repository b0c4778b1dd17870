//! Sectioned `key = value` run configuration.
//!
//! The format is deliberately small: `[section]` headers, one `key = value`
//! pair per line, `#` comments. Sections, keys, and value dimensions are
//! all checked against a fixed schema when the file is parsed, so a typo
//! or a value in the wrong unit fails the run before any computation
//! starts. Command-line flags override config values key by key.

use std::collections::BTreeMap;
use std::path::Path;

use nanofiber_core::emitter_sim::{
    BackgroundModel, Collection, Excitation, Scene, ThreeLevelModel,
};
use nanofiber_core::fiber_modes::IndexModel;

use crate::error::{Failure, Result};
use crate::units::{self, Kind};

/// Every key the format accepts, with its section and dimension.
const SCHEMA: &[(&str, &str, Kind)] = &[
    ("fiber", "diameter", Kind::Length),
    ("fiber", "core", Kind::Text),
    ("fiber", "surround", Kind::Number),
    ("fiber", "l_max", Kind::Integer),
    ("spectrum", "kind", Kind::Text),
    ("spectrum", "wavelength", Kind::Length),
    ("emitter", "pump_coefficient", Kind::Number),
    ("emitter", "lifetime", Kind::Time),
    ("emitter", "shelving_rate", Kind::Number),
    ("emitter", "deshelving_rate", Kind::Number),
    ("emitter", "deshelving_power_coefficient", Kind::Number),
    ("emitter", "quantum_efficiency", Kind::Number),
    ("background", "model", Kind::Text),
    ("background", "fiber_rate", Kind::Number),
    ("background", "reference_power", Kind::Power),
    ("background", "fiber_lifetime", Kind::Time),
    ("background", "bleach_coefficient", Kind::Number),
    ("background", "recovery_rate", Kind::Number),
    ("background", "dark_rate_1", Kind::Number),
    ("background", "dark_rate_2", Kind::Number),
    ("background", "raman_rate", Kind::Number),
    ("scene", "excitation", Kind::Text),
    ("scene", "power", Kind::Power),
    ("scene", "rep_rate", Kind::Number),
    ("scene", "pulse_energy", Kind::Energy),
    ("scene", "splitting", Kind::Number),
    ("scene", "efficiency_1", Kind::Number),
    ("scene", "efficiency_2", Kind::Number),
    ("scene", "duration", Kind::Time),
    ("scene", "seed", Kind::Integer),
    ("fit", "bin", Kind::Time),
    ("fit", "window", Kind::Time),
    ("fit", "mode", Kind::Text),
    ("fit", "channel_a", Kind::Integer),
    ("fit", "channel_b", Kind::Integer),
    ("fit", "sync_channel", Kind::Integer),
    ("io", "out", Kind::Text),
    ("io", "input", Kind::Text),
];

fn schema_kind(section: &str, key: &str) -> Option<Kind> {
    SCHEMA.iter().find(|(s, k, _)| *s == section && *k == key).map(|&(_, _, kind)| kind)
}

fn known_sections() -> Vec<&'static str> {
    let mut names: Vec<&str> = SCHEMA.iter().map(|&(s, _, _)| s).collect();
    names.dedup();
    names
}

/// Parsed config document: raw values by (section, key), schema-checked.
#[derive(Debug, Default)]
pub struct RunConfig {
    entries: BTreeMap<(String, String), (String, usize)>,
}

impl RunConfig {
    /// Read and parse a config file; `None` yields an empty config so
    /// commands can treat the file as optional.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(RunConfig::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|err| {
                    Failure::usage(format!("cannot read config {}: {err}", path.display()))
                })?;
                Self::parse(&text)
                    .map_err(|msg| Failure::usage(format!("{}: {msg}", path.display())))
            }
        }
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut entries = BTreeMap::new();
        let mut section: Option<String> = None;
        for (index, raw_line) in text.lines().enumerate() {
            let line_no = index + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or(format!("line {line_no}: unterminated section header"))?
                    .trim();
                if !known_sections().contains(&name) {
                    return Err(format!(
                        "line {line_no}: unknown section [{name}]; sections are {}",
                        known_sections().join(", ")
                    ));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(format!("line {line_no}: expected `key = value`, got `{line}`"))?;
            let (key, value) = (key.trim(), value.trim());
            let section = section
                .as_deref()
                .ok_or(format!("line {line_no}: `{key}` appears before any [section]"))?;
            if key.is_empty() || value.is_empty() {
                return Err(format!("line {line_no}: empty key or value"));
            }
            let kind = schema_kind(section, key).ok_or(format!(
                "line {line_no}: unknown key `{key}` in [{section}]"
            ))?;
            units::check(kind, value)
                .map_err(|msg| format!("line {line_no}: [{section}] {key}: {msg}"))?;
            let slot = (section.to_string(), key.to_string());
            if let Some((_, first)) = entries.get(&slot) {
                return Err(format!(
                    "line {line_no}: `{key}` in [{section}] already set on line {first}"
                ));
            }
            entries.insert(slot, (value.to_string(), line_no));
        }
        Ok(RunConfig { entries })
    }

    fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.entries.get(&(section.to_string(), key.to_string())).map(|(v, _)| v.as_str())
    }

    fn scalar(
        &self,
        section: &str,
        key: &str,
        parse: fn(&str) -> std::result::Result<f64, String>,
    ) -> Result<Option<f64>> {
        self.raw(section, key)
            .map(|raw| {
                parse(raw).map_err(|msg| Failure::usage(format!("[{section}] {key}: {msg}")))
            })
            .transpose()
    }

    pub fn length(&self, section: &str, key: &str) -> Result<Option<f64>> {
        self.scalar(section, key, units::parse_length)
    }

    pub fn time(&self, section: &str, key: &str) -> Result<Option<f64>> {
        self.scalar(section, key, units::parse_time)
    }

    pub fn power(&self, section: &str, key: &str) -> Result<Option<f64>> {
        self.scalar(section, key, units::parse_power)
    }

    pub fn energy(&self, section: &str, key: &str) -> Result<Option<f64>> {
        self.scalar(section, key, units::parse_energy)
    }

    pub fn number(&self, section: &str, key: &str) -> Result<Option<f64>> {
        self.scalar(section, key, units::parse_number)
    }

    pub fn integer(&self, section: &str, key: &str) -> Result<Option<u64>> {
        self.raw(section, key)
            .map(|raw| {
                units::parse_integer(raw)
                    .map_err(|msg| Failure::usage(format!("[{section}] {key}: {msg}")))
            })
            .transpose()
    }

    pub fn text(&self, section: &str, key: &str) -> Option<&str> {
        self.raw(section, key)
    }

    /// Fiber surround index, default vacuum.
    pub fn surround(&self) -> Result<f64> {
        Ok(self.number("fiber", "surround")?.unwrap_or(1.0))
    }

    /// Core index model from `[fiber] core`: `silica` or a fixed number.
    pub fn index_model(&self, flag: Option<&str>) -> Result<IndexModel> {
        let choice = match flag {
            Some(text) => text,
            None => self.text("fiber", "core").unwrap_or("silica"),
        };
        if choice == "silica" {
            return Ok(IndexModel::FusedSilica);
        }
        choice
            .parse::<f64>()
            .map(IndexModel::Fixed)
            .map_err(|_| Failure::usage(format!("core `{choice}` is neither `silica` nor a number")))
    }

    /// Emitter rates: defaults to the built-in three-level parameter set,
    /// overridden key by key.
    pub fn emitter(&self) -> Result<ThreeLevelModel> {
        let mut model = ThreeLevelModel::nv_defaults();
        if let Some(value) = self.number("emitter", "pump_coefficient")? {
            model.pump_rate_coefficient = value;
        }
        if let Some(value) = self.time("emitter", "lifetime")? {
            if !(value > 0.0) {
                return Err(Failure::usage(format!("[emitter] lifetime {value} s not positive")));
            }
            model.radiative_decay = 1.0 / value;
        }
        if let Some(value) = self.number("emitter", "shelving_rate")? {
            model.shelving = value;
        }
        if let Some(value) = self.number("emitter", "deshelving_rate")? {
            model.deshelving = value;
        }
        if let Some(value) = self.number("emitter", "deshelving_power_coefficient")? {
            model.deshelving_power_coefficient = value;
        }
        if let Some(value) = self.number("emitter", "quantum_efficiency")? {
            model.quantum_efficiency = value;
        }
        Ok(model)
    }

    /// Background model: `model = off` (default) or `calibrated`, then
    /// key-by-key overrides.
    pub fn background(&self) -> Result<BackgroundModel> {
        let mut background = match self.text("background", "model").unwrap_or("off") {
            "off" => BackgroundModel::off(),
            "calibrated" => BackgroundModel::calibrated_defaults(),
            other => {
                return Err(Failure::usage(format!(
                    "[background] model `{other}` is neither `off` nor `calibrated`"
                )))
            }
        };
        if let Some(value) = self.number("background", "fiber_rate")? {
            background.fiber_rate_at_reference = value;
        }
        if let Some(value) = self.power("background", "reference_power")? {
            background.reference_power = value;
        }
        if let Some(value) = self.time("background", "fiber_lifetime")? {
            background.fiber_lifetime = value;
        }
        if let Some(value) = self.number("background", "bleach_coefficient")? {
            background.bleach_rate_coefficient = value;
        }
        if let Some(value) = self.number("background", "recovery_rate")? {
            background.recovery_rate = value;
        }
        if let Some(value) = self.number("background", "dark_rate_1")? {
            background.dark_rate[0] = value;
        }
        if let Some(value) = self.number("background", "dark_rate_2")? {
            background.dark_rate[1] = value;
        }
        if let Some(value) = self.number("background", "raman_rate")? {
            background.raman_rate = value;
        }
        Ok(background)
    }

    pub fn excitation(&self) -> Result<Excitation> {
        match self.text("scene", "excitation").unwrap_or("cw") {
            "cw" => {
                let power = self.power("scene", "power")?.ok_or(Failure::usage(
                    "cw excitation needs `power` in [scene]",
                ))?;
                Ok(Excitation::Cw { power })
            }
            "pulsed" => {
                let rep_rate = self.number("scene", "rep_rate")?.ok_or(Failure::usage(
                    "pulsed excitation needs `rep_rate` in [scene]",
                ))?;
                let pulse_energy = self.energy("scene", "pulse_energy")?.ok_or(Failure::usage(
                    "pulsed excitation needs `pulse_energy` in [scene]",
                ))?;
                Ok(Excitation::Pulsed { rep_rate, pulse_energy })
            }
            other => Err(Failure::usage(format!(
                "[scene] excitation `{other}` is neither `cw` nor `pulsed`"
            ))),
        }
    }

    pub fn collection(&self) -> Result<Collection> {
        Ok(Collection {
            splitting: self.number("scene", "splitting")?.unwrap_or(0.5),
            efficiency: [
                self.number("scene", "efficiency_1")?.unwrap_or(1.0),
                self.number("scene", "efficiency_2")?.unwrap_or(1.0),
            ],
        })
    }

    pub fn scene(&self) -> Result<Scene> {
        Ok(Scene {
            emitter: self.emitter()?,
            background: self.background()?,
            excitation: self.excitation()?,
            collection: self.collection()?,
            seed: self.integer("scene", "seed")?.unwrap_or(0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCENE: &str = "\
# A minimal continuous-wave scene.
[emitter]
lifetime = 21 ns

[scene]
excitation = cw
power = 100 uW      # half a saturation parameter or so
duration = 50 ms
seed = 7
";

    #[test]
    fn a_scene_round_trips_through_the_builders() {
        let config = RunConfig::parse(SCENE).unwrap();
        let scene = config.scene().unwrap();
        assert_eq!(scene.seed, 7);
        let Excitation::Cw { power } = scene.excitation else {
            panic!("expected cw excitation, got {:?}", scene.excitation);
        };
        assert!((power - 100e-6).abs() < 1e-16, "{power}");
        assert_eq!(scene.collection.splitting, 0.5);
        let duration = config.time("scene", "duration").unwrap().unwrap();
        assert!((duration - 50e-3).abs() < 1e-14, "{duration}");
        assert!((scene.emitter.radiative_decay - 1e9 / 21.0).abs() < 1e-3);
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_line() {
        let err = RunConfig::parse("[scene]\npowr = 1 uW\n").unwrap_err();
        assert!(err.contains("line 2"), "{err}");
        assert!(err.contains("powr"), "{err}");
    }

    #[test]
    fn unknown_sections_are_rejected() {
        let err = RunConfig::parse("[scenes]\npower = 1 uW\n").unwrap_err();
        assert!(err.contains("[scenes]"), "{err}");
    }

    #[test]
    fn wrong_units_are_rejected_at_parse_time() {
        let err = RunConfig::parse("[scene]\nduration = 5 nm\n").unwrap_err();
        assert!(err.contains("duration"), "{err}");
        assert!(err.contains("time"), "{err}");
    }

    #[test]
    fn keys_outside_sections_and_duplicates_are_rejected() {
        assert!(RunConfig::parse("power = 1 uW\n").unwrap_err().contains("before any"));
        let err =
            RunConfig::parse("[scene]\nseed = 1\nseed = 2\n").unwrap_err();
        assert!(err.contains("already set on line 2"), "{err}");
    }

    #[test]
    fn background_presets_select_and_override() {
        let config =
            RunConfig::parse("[background]\nmodel = calibrated\nraman_rate = 5e3\n").unwrap();
        let background = config.background().unwrap();
        assert_eq!(background.raman_rate, 5e3);
        assert!(background.bleach_rate_coefficient > 0.0);
        let off = RunConfig::parse("").unwrap().background().unwrap();
        assert_eq!(off.raman_rate, 0.0);
    }
}
