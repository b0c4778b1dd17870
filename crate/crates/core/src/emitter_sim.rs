//! Driven three-level emitter (ground, excited, shelved) plus the
//! experiment's background sources: analytic observables (intensity
//! correlation, saturation curve, bleach kinetics, polarization contrast)
//! and a Monte-Carlo quantum-jump simulator that emits time-tag streams
//! for the analysis chain.
//!
//! States are ordered [ground, excited, shelved] everywhere. Pumping is
//! linear in power (k_ge = sigma * P), the excited state decays radiatively
//! at k_eg = 1/tau or shelves at k_es, and the shelf empties at k_sg. A
//! photon accompanies a radiative decay with probability q.

use crate::error::{CoreError, Result};
use crate::timetag_io::{TimeTag, TimeTagStream};
use nalgebra::Matrix3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};

/// Tick size of simulated streams. 4 ps sits three orders of magnitude
/// below the emitter lifetime, so discretization never shapes a histogram.
pub const TICK_PS: u64 = 4;
const TICKS_PER_SECOND: f64 = 1e12 / TICK_PS as f64;

/// Channel 0 carries one record per excitation pulse.
pub const SYNC_CHANNEL: u8 = 0;
/// The two detectors behind the splitter.
pub const DETECTOR_CHANNELS: [u8; 2] = [1, 2];

/// Rates of the three-level system and its radiative quantum efficiency.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeLevelModel {
    /// Pump rate per unit power, 1/(W s); k_ge = coefficient * P.
    pub pump_rate_coefficient: f64,
    /// Radiative decay k_eg = 1/lifetime, 1/s.
    pub radiative_decay: f64,
    /// Shelving rate k_es into the metastable state, 1/s.
    pub shelving: f64,
    /// Deshelving rate k_sg back to ground at zero power, 1/s.
    pub deshelving: f64,
    /// Optional power-linear deshelving term, 1/(W s); zero by default.
    pub deshelving_power_coefficient: f64,
    /// Probability that a radiative decay produces a photon.
    pub quantum_efficiency: f64,
}

impl ThreeLevelModel {
    /// Representative NV-center parameters: 21 ns lifetime, a shelf that
    /// produces a visible bunching shoulder around saturation, and a pump
    /// coefficient placing saturation near 520 uW.
    pub fn nv_defaults() -> Self {
        ThreeLevelModel {
            pump_rate_coefficient: 4e10,
            radiative_decay: 1e9 / 21.0,
            shelving: 5e6,
            deshelving: 3.3e6,
            deshelving_power_coefficient: 0.0,
            quantum_efficiency: 0.9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("pump coefficient", self.pump_rate_coefficient),
            ("shelving rate", self.shelving),
            ("deshelving rate", self.deshelving),
            ("deshelving power coefficient", self.deshelving_power_coefficient),
        ];
        for (name, value) in rates {
            if !(value.is_finite() && value >= 0.0) {
                return Err(CoreError::domain(format!("{name} {value} must be nonnegative")));
            }
        }
        if !(self.radiative_decay.is_finite() && self.radiative_decay > 0.0) {
            return Err(CoreError::domain(format!(
                "radiative decay {} must be positive",
                self.radiative_decay
            )));
        }
        if !(0.0..=1.0).contains(&self.quantum_efficiency) {
            return Err(CoreError::domain(format!(
                "quantum efficiency {} outside [0, 1]",
                self.quantum_efficiency
            )));
        }
        Ok(())
    }

    /// Excited-state lifetime 1/k_eg, seconds.
    pub fn lifetime(&self) -> f64 {
        1.0 / self.radiative_decay
    }

    fn deshelving_at(&self, power: f64) -> f64 {
        self.deshelving + self.deshelving_power_coefficient * power
    }

    /// Steady-state excited population at the given power.
    pub fn excited_steady_state(&self, power: f64) -> Result<f64> {
        self.validate()?;
        if !(power.is_finite() && power >= 0.0) {
            return Err(CoreError::domain(format!("power {power} must be nonnegative")));
        }
        let pump = self.pump_rate_coefficient * power;
        let k_sg = self.deshelving_at(power);
        let denominator = (pump + self.radiative_decay + self.shelving) * k_sg + pump * self.shelving;
        if denominator == 0.0 {
            return Ok(0.0);
        }
        Ok(pump * k_sg / denominator)
    }

    /// High-power limit of the excited population for constant deshelving,
    /// k_sg / (k_sg + k_es).
    pub fn excited_population_limit(&self) -> f64 {
        self.deshelving / (self.deshelving + self.shelving)
    }

    /// Half-saturation power for constant deshelving,
    /// P_sat = k_sg (k_eg + k_es) / (sigma (k_sg + k_es)); at this power
    /// the emission rate is half its high-power limit, and the saturation
    /// curve is exactly R_inf * P / (P + P_sat).
    pub fn p_sat(&self) -> f64 {
        self.deshelving * (self.radiative_decay + self.shelving)
            / (self.pump_rate_coefficient * (self.deshelving + self.shelving))
    }
}

/// Generator of the three-level rate equations at one power, columns
/// indexed by source state [g, e, s]. Columns sum to zero.
pub fn rate_matrix(model: &ThreeLevelModel, power: f64) -> Result<Matrix3<f64>> {
    model.validate()?;
    if !(power.is_finite() && power >= 0.0) {
        return Err(CoreError::domain(format!("power {power} must be nonnegative")));
    }
    let pump = model.pump_rate_coefficient * power;
    let k_eg = model.radiative_decay;
    let k_es = model.shelving;
    let k_sg = model.deshelving_at(power);
    Ok(Matrix3::new(
        -pump, k_eg, k_sg,
        pump, -(k_eg + k_es), 0.0,
        0.0, k_es, -k_sg,
    ))
}

/// Normalized intensity correlation of the driven emitter.
///
/// After a detection the system sits in the ground state; g2 is the excited
/// population regrown from there, divided by its steady-state value:
/// g2(tau) = p_e(|tau|) / p_e(inf). Computed from the closed-form
/// exponential of the reduced 2x2 generator in (p_e, p_s), which handles
/// real and complex eigenvalue pairs alike.
pub fn analytic_g2(model: &ThreeLevelModel, power: f64, tau: f64) -> Result<f64> {
    model.validate()?;
    if !(power.is_finite() && power > 0.0) {
        return Err(CoreError::domain(format!(
            "power {power} must be positive for a defined correlation"
        )));
    }
    let pump = model.pump_rate_coefficient * power;
    let k_sg = model.deshelving_at(power);
    let a = -(pump + model.radiative_decay + model.shelving);
    let m = [[a, -pump], [model.shelving, -k_sg]];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det <= 0.0 {
        return Err(CoreError::domain(
            "zero steady-state excited population, correlation undefined".to_string(),
        ));
    }
    // Steady state solves M p = -b with b = (pump, 0).
    let pe_ss = -pump * m[1][1] / det;
    let ps_ss = pump * m[1][0] / det;

    // exp(M t) = exp(mu t) (c I + s (M - mu I)) with mu = tr/2 and
    // c, s the cosh/sinh pair of sqrt(mu^2 - det) (cos/sin when negative).
    let t = tau.abs();
    let mu = 0.5 * (m[0][0] + m[1][1]);
    let disc = mu * mu - det;
    let (c, s) = if disc * t * t > 1e-12 {
        let q = disc.sqrt();
        ((q * t).cosh(), (q * t).sinh() / q)
    } else if disc * t * t < -1e-12 {
        let w = (-disc).sqrt();
        ((w * t).cos(), (w * t).sin() / w)
    } else {
        // Degenerate pair: second-order series in disc t^2.
        (1.0 + 0.5 * disc * t * t, t * (1.0 + disc * t * t / 6.0))
    };
    let scale = (mu * t).exp();
    // p(t) = p_ss + exp(M t) (p(0) - p_ss) with p(0) = 0.
    let pe = pe_ss
        + scale * (c * -pe_ss + s * ((m[0][0] - mu) * -pe_ss + m[0][1] * -ps_ss));
    Ok(pe / pe_ss)
}

/// Detected count rate at one power: efficiency * q * k_eg * p_e^ss.
pub fn saturation_rate(model: &ThreeLevelModel, power: f64, collection_efficiency: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&collection_efficiency) {
        return Err(CoreError::domain(format!(
            "collection efficiency {collection_efficiency} outside [0, 1]"
        )));
    }
    let pe = model.excited_steady_state(power)?;
    Ok(collection_efficiency * model.quantum_efficiency * model.radiative_decay * pe)
}

/// Background sources superimposed on the emitter signal.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundModel {
    /// Fiber-fluorescence photon rate reaching the splitter at the
    /// reference power with a fresh (unbleached) fiber, 1/s.
    pub fiber_rate_at_reference: f64,
    /// Power at which `fiber_rate_at_reference` applies, W.
    pub reference_power: f64,
    /// Fluorescence decay time of the fiber background, seconds.
    pub fiber_lifetime: f64,
    /// Bleaching rate per unit power, 1/(W s).
    pub bleach_rate_coefficient: f64,
    /// Recovery rate of bleached sites, 1/s.
    pub recovery_rate: f64,
    /// Detector dark rates per channel, 1/s.
    pub dark_rate: [f64; 2],
    /// Unbleachable residual (Raman) photon rate at the splitter, 1/s.
    pub raman_rate: f64,
}

impl BackgroundModel {
    /// Defaults calibrated against two observations: the active fraction
    /// halves after 60 s at 30 uW, and recovery in the dark reaches 90%
    /// after 180 s. The fluorescence decay time is 30 us.
    pub fn calibrated_defaults() -> Self {
        BackgroundModel {
            fiber_rate_at_reference: 1e5,
            reference_power: 30e-6,
            fiber_lifetime: 30e-6,
            bleach_rate_coefficient: 615.1164144598507,
            recovery_rate: std::f64::consts::LN_10 / 180.0,
            dark_rate: [100.0, 100.0],
            raman_rate: 1e3,
        }
    }

    /// No background at all; useful for signal-only scenes.
    pub fn off() -> Self {
        BackgroundModel {
            fiber_rate_at_reference: 0.0,
            reference_power: 30e-6,
            fiber_lifetime: 30e-6,
            bleach_rate_coefficient: 0.0,
            recovery_rate: 0.0,
            dark_rate: [0.0, 0.0],
            raman_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("fiber rate", self.fiber_rate_at_reference),
            ("bleach coefficient", self.bleach_rate_coefficient),
            ("recovery rate", self.recovery_rate),
            ("dark rate", self.dark_rate[0]),
            ("dark rate", self.dark_rate[1]),
            ("raman rate", self.raman_rate),
        ];
        for (name, value) in rates {
            if !(value.is_finite() && value >= 0.0) {
                return Err(CoreError::domain(format!("{name} {value} must be nonnegative")));
            }
        }
        if !(self.fiber_lifetime.is_finite() && self.fiber_lifetime > 0.0) {
            return Err(CoreError::domain(format!(
                "fiber fluorescence lifetime {} must be positive",
                self.fiber_lifetime
            )));
        }
        if self.fiber_rate_at_reference > 0.0 && !(self.reference_power > 0.0) {
            return Err(CoreError::domain(
                "reference power must be positive when the fiber rate is nonzero".to_string(),
            ));
        }
        Ok(())
    }

    /// Long-time active fraction under constant illumination.
    pub fn steady_active_fraction(&self, power: f64) -> f64 {
        let total = self.bleach_rate_coefficient * power + self.recovery_rate;
        if total > 0.0 {
            self.recovery_rate / total
        } else {
            1.0
        }
    }

    fn fiber_rate(&self, power: f64, active_fraction: f64) -> f64 {
        if self.fiber_rate_at_reference == 0.0 {
            0.0
        } else {
            self.fiber_rate_at_reference * power / self.reference_power * active_fraction
        }
    }
}

/// Active fraction of the fiber fluorescence after illuminating a fresh
/// fiber at constant power for time `t`.
pub fn bleach_response(background: &BackgroundModel, power: f64, t: f64) -> Result<f64> {
    bleach_response_from(background, power, t, 1.0)
}

/// Same with an explicit starting fraction. Two-state kinetics
/// dA/dt = -k_b P A + k_r (1 - A) relax exponentially toward
/// A_ss = k_r / (k_r + k_b P).
pub fn bleach_response_from(background: &BackgroundModel, power: f64, t: f64, a0: f64) -> Result<f64> {
    background.validate()?;
    if !(power.is_finite() && power >= 0.0) {
        return Err(CoreError::domain(format!("power {power} must be nonnegative")));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(CoreError::domain(format!("time {t} must be nonnegative")));
    }
    if !(0.0..=1.0).contains(&a0) {
        return Err(CoreError::domain(format!("starting fraction {a0} outside [0, 1]")));
    }
    let total = background.bleach_rate_coefficient * power + background.recovery_rate;
    let a_ss = background.steady_active_fraction(power);
    Ok(a_ss + (a0 - a_ss) * (-total * t).exp())
}

/// Detected-rate model for the half-waveplate scan: the emitter signal is
/// polarization-independent while the background follows
/// B(theta) = mean * (1 + visibility * cos 2(theta - theta0)).
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationModel {
    /// Angle-independent emitter rate, 1/s.
    pub nv_rate: f64,
    /// Mean background rate, 1/s.
    pub background_mean: f64,
    /// Modulation visibility in [0, 1].
    pub visibility: f64,
    /// Angle of maximum background, radians.
    pub theta0: f64,
}

impl PolarizationModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.nv_rate.is_finite() && self.nv_rate >= 0.0) {
            return Err(CoreError::domain(format!("signal rate {} must be nonnegative", self.nv_rate)));
        }
        if !(self.background_mean.is_finite() && self.background_mean >= 0.0) {
            return Err(CoreError::domain(format!(
                "background rate {} must be nonnegative",
                self.background_mean
            )));
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(CoreError::domain(format!("visibility {} outside [0, 1]", self.visibility)));
        }
        Ok(())
    }

    /// Choose the visibility so that the total-rate suppression across the
    /// angle scan equals `suppression` exactly.
    pub fn with_suppression(nv_rate: f64, background_mean: f64, suppression: f64, theta0: f64) -> Result<Self> {
        if !(suppression >= 1.0 && suppression.is_finite()) {
            return Err(CoreError::domain(format!("suppression factor {suppression} must be >= 1")));
        }
        if !(background_mean > 0.0) {
            return Err(CoreError::domain(
                "suppression needs a nonzero background".to_string(),
            ));
        }
        let visibility =
            (suppression - 1.0) * (nv_rate + background_mean) / (background_mean * (suppression + 1.0));
        let model = PolarizationModel { nv_rate, background_mean, visibility, theta0 };
        if visibility > 1.0 {
            return Err(CoreError::domain(format!(
                "suppression factor {suppression} would need visibility {visibility:.3} > 1"
            )));
        }
        model.validate()?;
        Ok(model)
    }

    pub fn background_at(&self, theta: f64) -> f64 {
        self.background_mean * (1.0 + self.visibility * (2.0 * (theta - self.theta0)).cos())
    }

    /// Ratio of the total rate at the background maximum to the minimum.
    pub fn suppression_factor(&self) -> f64 {
        let hi = self.nv_rate + self.background_mean * (1.0 + self.visibility);
        let lo = self.nv_rate + self.background_mean * (1.0 - self.visibility);
        hi / lo
    }
}

/// Total detected rate and the background's share of it at one angle.
pub fn polarization_signal(model: &PolarizationModel, theta: f64) -> Result<(f64, f64)> {
    model.validate()?;
    let background = model.background_at(theta);
    let total = model.nv_rate + background;
    let share = if total > 0.0 { background / total } else { 0.0 };
    Ok((total, share))
}

/// Drive applied to the emitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Excitation {
    /// Continuous pumping at the given power, W.
    Cw { power: f64 },
    /// Periodic instantaneous excitation attempts: repetition rate in Hz
    /// and energy per pulse in J. Each pulse also emits a sync record.
    Pulsed { rep_rate: f64, pulse_energy: f64 },
}

impl Excitation {
    fn validate(&self) -> Result<()> {
        match *self {
            Excitation::Cw { power } => {
                if !(power.is_finite() && power >= 0.0) {
                    return Err(CoreError::domain(format!("power {power} must be nonnegative")));
                }
            }
            Excitation::Pulsed { rep_rate, pulse_energy } => {
                if !(rep_rate.is_finite() && rep_rate > 0.0) {
                    return Err(CoreError::domain(format!("repetition rate {rep_rate} must be positive")));
                }
                if !(pulse_energy.is_finite() && pulse_energy >= 0.0) {
                    return Err(CoreError::domain(format!(
                        "pulse energy {pulse_energy} must be nonnegative"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Time-averaged optical power, used for bleaching and the background
    /// rates.
    pub fn mean_power(&self) -> f64 {
        match *self {
            Excitation::Cw { power } => power,
            Excitation::Pulsed { rep_rate, pulse_energy } => rep_rate * pulse_energy,
        }
    }
}

/// Splitter and detector pair behind the collection path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Collection {
    /// Probability that a photon takes the channel-1 arm.
    pub splitting: f64,
    /// Detection efficiency of channels 1 and 2.
    pub efficiency: [f64; 2],
}

impl Collection {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.splitting) {
            return Err(CoreError::domain(format!("splitting ratio {} outside [0, 1]", self.splitting)));
        }
        for eff in self.efficiency {
            if !(0.0..=1.0).contains(&eff) {
                return Err(CoreError::domain(format!("channel efficiency {eff} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Probability that an emitted photon is detected on either channel.
    pub fn total_efficiency(&self) -> f64 {
        self.splitting * self.efficiency[0] + (1.0 - self.splitting) * self.efficiency[1]
    }
}

/// Complete description of one simulated measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub emitter: ThreeLevelModel,
    pub background: BackgroundModel,
    pub excitation: Excitation,
    pub collection: Collection,
    /// Default RNG seed; `simulate_stream` takes the seed explicitly so a
    /// caller can override it without editing the scene.
    pub seed: u64,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        self.emitter.validate()?;
        self.background.validate()?;
        self.excitation.validate()?;
        self.collection.validate()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Level {
    Ground,
    Excited,
    Shelved,
}

/// Independent RNG streams, one per photon source, so that adding or
/// removing a source never perturbs the others.
mod stream_id {
    pub const SIGNAL: u64 = 0;
    pub const FIBER: u64 = 1;
    pub const DARK1: u64 = 2;
    pub const DARK2: u64 = 3;
    pub const RAMAN: u64 = 4;
}

fn source_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn exp_gap<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    Exp::new(rate).expect("positive rate").sample(rng)
}

fn ticks_of(t: f64) -> u64 {
    (t * TICKS_PER_SECOND).round() as u64
}

/// Collapse splitter branch and detection into one draw; returns the
/// detecting channel, if any.
fn route_photon<R: Rng>(collection: &Collection, rng: &mut R) -> Option<u8> {
    let p1 = collection.splitting * collection.efficiency[0];
    let p2 = (1.0 - collection.splitting) * collection.efficiency[1];
    let u: f64 = rng.gen();
    if u < p1 {
        Some(DETECTOR_CHANNELS[0])
    } else if u < p1 + p2 {
        Some(DETECTOR_CHANNELS[1])
    } else {
        None
    }
}

/// Monte-Carlo quantum-jump simulation of a scene.
///
/// Emitter photons, fiber fluorescence (with its rate following the bleach
/// kinetics), per-channel dark counts, and the Raman residual each consume
/// an independent RNG stream derived from the seed, so output is bit-exact
/// reproducible. Records are sorted by timestamp, ties by channel.
pub fn simulate_stream(scene: &Scene, duration: f64, seed: u64) -> Result<TimeTagStream> {
    scene.validate()?;
    if !(duration.is_finite() && duration > 0.0) {
        return Err(CoreError::domain(format!("duration {duration} must be positive")));
    }
    let mut records: Vec<TimeTag> = Vec::new();
    let push = |records: &mut Vec<TimeTag>, t: f64, channel: u8| -> Result<()> {
        records.push(TimeTag::new(channel, ticks_of(t))?);
        Ok(())
    };

    // Emitter trajectory.
    {
        let rng = &mut source_rng(seed, stream_id::SIGNAL);
        match scene.excitation {
            Excitation::Cw { power } => {
                simulate_cw_signal(scene, power, duration, rng, &mut records, push)?
            }
            Excitation::Pulsed { rep_rate, pulse_energy } => {
                simulate_pulsed_signal(scene, rep_rate, pulse_energy, duration, rng, &mut records, push)?
            }
        }
    }

    // Fiber fluorescence, bleach-modulated.
    {
        let rng = &mut source_rng(seed, stream_id::FIBER);
        let bg = &scene.background;
        let power = scene.excitation.mean_power();
        let envelope = bg.fiber_rate(power, 1.0);
        if envelope > 0.0 {
            let relax = bg.bleach_rate_coefficient * power + bg.recovery_rate;
            let a_ss = bg.steady_active_fraction(power);
            match scene.excitation {
                Excitation::Cw { .. } => {
                    // Thinned homogeneous process under the fresh-fiber
                    // envelope (the active fraction only decays from 1).
                    let mut t = 0.0;
                    loop {
                        t += exp_gap(rng, envelope);
                        if t >= duration {
                            break;
                        }
                        let active = a_ss + (1.0 - a_ss) * (-relax * t).exp();
                        if rng.gen::<f64>() < active {
                            if let Some(channel) = route_photon(&scene.collection, rng) {
                                push(&mut records, t, channel)?;
                            }
                        }
                    }
                }
                Excitation::Pulsed { rep_rate, .. } => {
                    // Fluorescence attaches to pulses with an exponential
                    // delay of the fiber lifetime.
                    let period = 1.0 / rep_rate;
                    let mut t_pulse = 0.0;
                    while t_pulse < duration {
                        let active = a_ss + (1.0 - a_ss) * (-relax * t_pulse).exp();
                        let mean = envelope * active * period;
                        if mean > 0.0 {
                            let count = Poisson::new(mean).expect("positive mean").sample(rng) as u64;
                            for _ in 0..count {
                                let t = t_pulse + exp_gap(rng, 1.0 / bg.fiber_lifetime);
                                if let Some(channel) = route_photon(&scene.collection, rng) {
                                    push(&mut records, t, channel)?;
                                }
                            }
                        }
                        t_pulse += period;
                    }
                }
            }
        }
    }

    // Dark counts go straight onto their channel.
    for (index, &rate) in scene.background.dark_rate.iter().enumerate() {
        let stream = if index == 0 { stream_id::DARK1 } else { stream_id::DARK2 };
        let rng = &mut source_rng(seed, stream);
        if rate > 0.0 {
            let mut t = 0.0;
            loop {
                t += exp_gap(rng, rate);
                if t >= duration {
                    break;
                }
                push(&mut records, t, DETECTOR_CHANNELS[index])?;
            }
        }
    }

    // Raman residual, constant rate through the splitter.
    {
        let rng = &mut source_rng(seed, stream_id::RAMAN);
        let rate = scene.background.raman_rate;
        if rate > 0.0 {
            let mut t = 0.0;
            loop {
                t += exp_gap(rng, rate);
                if t >= duration {
                    break;
                }
                if let Some(channel) = route_photon(&scene.collection, rng) {
                    push(&mut records, t, channel)?;
                }
            }
        }
    }

    records.sort_unstable_by_key(|tag| (tag.ticks(), tag.channel()));
    TimeTagStream::new(TICK_PS, records)
}

fn simulate_cw_signal(
    scene: &Scene,
    power: f64,
    duration: f64,
    rng: &mut ChaCha8Rng,
    records: &mut Vec<TimeTag>,
    push: impl Fn(&mut Vec<TimeTag>, f64, u8) -> Result<()>,
) -> Result<()> {
    let model = &scene.emitter;
    let pump = model.pump_rate_coefficient * power;
    let k_eg = model.radiative_decay;
    let k_es = model.shelving;
    let k_sg = model.deshelving_at(power);
    let mut level = Level::Ground;
    let mut t = 0.0;
    loop {
        let total = match level {
            Level::Ground => pump,
            Level::Excited => k_eg + k_es,
            Level::Shelved => k_sg,
        };
        if total <= 0.0 {
            break;
        }
        t += exp_gap(rng, total);
        if t >= duration {
            break;
        }
        level = match level {
            Level::Ground => Level::Excited,
            Level::Excited => {
                if rng.gen::<f64>() * (k_eg + k_es) < k_eg {
                    if rng.gen::<f64>() < model.quantum_efficiency {
                        if let Some(channel) = route_photon(&scene.collection, rng) {
                            push(records, t, channel)?;
                        }
                    }
                    Level::Ground
                } else {
                    Level::Shelved
                }
            }
            Level::Shelved => Level::Ground,
        };
    }
    Ok(())
}

fn simulate_pulsed_signal(
    scene: &Scene,
    rep_rate: f64,
    pulse_energy: f64,
    duration: f64,
    rng: &mut ChaCha8Rng,
    records: &mut Vec<TimeTag>,
    push: impl Fn(&mut Vec<TimeTag>, f64, u8) -> Result<()>,
) -> Result<()> {
    let model = &scene.emitter;
    let period = 1.0 / rep_rate;
    let excite_probability = 1.0 - (-model.pump_rate_coefficient * pulse_energy).exp();
    let k_eg = model.radiative_decay;
    let k_es = model.shelving;
    // The drive is off between pulses.
    let k_sg = model.deshelving_at(0.0);
    let mut level = Level::Ground;
    let mut pulse_index: u64 = 0;
    loop {
        let t_pulse = pulse_index as f64 * period;
        if t_pulse >= duration {
            break;
        }
        push(records, t_pulse, SYNC_CHANNEL)?;
        // Pulses act on the ground state only; an emitter still excited or
        // shelved ignores the attempt.
        if level == Level::Ground && rng.gen::<f64>() < excite_probability {
            level = Level::Excited;
        }
        let segment_end = (t_pulse + period).min(duration);
        let mut t = t_pulse;
        loop {
            let total = match level {
                Level::Ground => break,
                Level::Excited => k_eg + k_es,
                Level::Shelved => k_sg,
            };
            if total <= 0.0 {
                break;
            }
            t += exp_gap(rng, total);
            if t >= segment_end {
                // Truncating an exponential wait is safe: the residual
                // clock after the boundary is exponential again.
                break;
            }
            level = match level {
                Level::Excited => {
                    if rng.gen::<f64>() * (k_eg + k_es) < k_eg {
                        if rng.gen::<f64>() < model.quantum_efficiency {
                            if let Some(channel) = route_photon(&scene.collection, rng) {
                                push(records, t, channel)?;
                            }
                        }
                        Level::Ground
                    } else {
                        Level::Shelved
                    }
                }
                Level::Shelved => Level::Ground,
                Level::Ground => unreachable!(),
            };
        }
        pulse_index += 1;
    }
    Ok(())
}
