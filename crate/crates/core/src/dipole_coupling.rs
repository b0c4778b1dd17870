//! Spontaneous-emission coupling of a point dipole near the fiber into the
//! guided modes, spectrally averaged coupling, diameter sweeps, and the
//! end-to-end collection budget arithmetic.
//!
//! The emission rate into one guided mode comes from Fermi's golden rule
//! applied to the one-dimensional guided continuum. With the mode fields
//! normalized to unit power flux (the `fiber_modes` convention) the group
//! slowness and normalization integral collapse into a closed form, and the
//! rate into a mode, counting both propagation directions and both members
//! of a degenerate orientation pair, relative to the free-space rate is
//!     Gamma/Gamma_free = (3 pi / (2 (k a)^2))
//!                        * (dr^2 er^2 + dphi^2 ephi^2 + dz^2 ez^2),
//! with the scalar profiles evaluated at the dipole radius. The sum over
//! the degenerate pair makes the rate independent of the dipole azimuth and
//! cancels all cross terms between field components.
//!
//! The total-rate approximation keeps the denominator at the unmodified
//! free-space rate: eta = sum(Gamma) / (sum(Gamma) + Gamma_free). No
//! Purcell correction of the non-guided background is attempted.

use crate::error::{CoreError, Result};
use crate::fiber_modes::{
    enumerate_guided_modes, second_mode_cutoff_diameter, FiberSpec, GuidedMode, IndexModel,
};
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Azimuthal orders enumerated when totaling guided emission; covers every
/// family that can be guided across the sub-micron diameters of interest.
pub const DEFAULT_L_MAX: u32 = 3;

/// Radial placement of the emitter in the fiber cross-section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialPlacement {
    /// Fixed distance from the fiber axis, in meters.
    Absolute(f64),
    /// Distance from the local fiber surface, in meters; zero means on the
    /// surface, and the position tracks the diameter during sweeps.
    /// Negative offsets are rejected: they would put an emitter declared to
    /// be on or outside the surface inside the solid glass.
    SurfaceOffset(f64),
}

/// A point dipole emitter near (or inside) the fiber.
#[derive(Debug, Clone, Copy)]
pub struct DipoleEmitter {
    pub placement: RadialPlacement,
    /// Azimuth of the emitter position. The guided totals are independent
    /// of it because the degenerate orientation pair is summed.
    pub azimuth: f64,
    /// Dipole orientation unit vector, components (radial, azimuthal,
    /// axial) in the cylindrical frame at the emitter position.
    pub orientation: [f64; 3],
    /// Free-space excited-state lifetime, seconds. Does not change the
    /// coupling fractions; carried for rate bookkeeping by callers.
    pub free_space_lifetime: f64,
}

impl DipoleEmitter {
    /// Radially oriented dipole sitting on the fiber surface.
    pub fn radial_on_surface(free_space_lifetime: f64) -> Self {
        DipoleEmitter {
            placement: RadialPlacement::SurfaceOffset(0.0),
            azimuth: 0.0,
            orientation: [1.0, 0.0, 0.0],
            free_space_lifetime,
        }
    }

    /// Axially oriented dipole sitting on the fiber surface.
    pub fn axial_on_surface(free_space_lifetime: f64) -> Self {
        DipoleEmitter {
            placement: RadialPlacement::SurfaceOffset(0.0),
            azimuth: 0.0,
            orientation: [0.0, 0.0, 1.0],
            free_space_lifetime,
        }
    }

    /// Radially oriented dipole on the fiber axis.
    pub fn radial_at_center(free_space_lifetime: f64) -> Self {
        DipoleEmitter {
            placement: RadialPlacement::Absolute(0.0),
            azimuth: 0.0,
            orientation: [1.0, 0.0, 0.0],
            free_space_lifetime,
        }
    }

    /// Actual radial coordinate for a given fiber, in meters.
    fn resolve_radius(&self, spec: &FiberSpec) -> Result<f64> {
        match self.placement {
            RadialPlacement::Absolute(r) => {
                if r.is_finite() && r >= 0.0 {
                    Ok(r)
                } else {
                    Err(CoreError::domain(format!("dipole radius {r} must be nonnegative")))
                }
            }
            RadialPlacement::SurfaceOffset(ofs) => {
                if !ofs.is_finite() || ofs < 0.0 {
                    return Err(CoreError::domain(format!(
                        "surface offset {ofs} is negative: emitter flagged on-surface would sit inside the glass"
                    )));
                }
                Ok(spec.radius() + ofs)
            }
        }
    }

    fn unit_orientation(&self) -> Result<[f64; 3]> {
        let [r, p, z] = self.orientation;
        let norm = (r * r + p * p + z * z).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-8 {
            return Err(CoreError::domain(format!(
                "dipole orientation [{r}, {p}, {z}] is not a unit vector (|v| = {norm})"
            )));
        }
        Ok([r / norm, p / norm, z / norm])
    }
}

/// Emission spectrum of the emitter.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumKind {
    /// Single line at the given vacuum wavelength.
    Monochromatic(f64),
    /// Sampled spectrum as (wavelength, nonnegative density) pairs; the
    /// given wavelengths are used directly as quadrature nodes.
    Tabulated(Vec<(f64, f64)>),
    /// Gaussian line shape in wavelength.
    Gaussian { center: f64, fwhm: f64 },
}

/// A spectrum truncated to a support window and a quadrature resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumModel {
    pub kind: SpectrumKind,
    /// Truncation window (min, max) in meters.
    pub support: (f64, f64),
    /// Number of quadrature samples for continuous shapes.
    pub samples: usize,
}

impl SpectrumModel {
    pub fn monochromatic(wavelength: f64) -> Self {
        SpectrumModel {
            kind: SpectrumKind::Monochromatic(wavelength),
            support: (wavelength, wavelength),
            samples: 1,
        }
    }

    /// Default model of the room-temperature NV- emission band: gaussian
    /// centered at 700 nm with 100 nm FWHM, truncated to 600-800 nm.
    pub fn nv_default() -> Self {
        SpectrumModel {
            kind: SpectrumKind::Gaussian { center: 700e-9, fwhm: 100e-9 },
            support: (600e-9, 800e-9),
            samples: 32,
        }
    }

    /// Quadrature nodes and weights; the weights are normalized to sum to
    /// one so spectral averages are convex combinations.
    pub fn discretize(&self) -> Result<Vec<(f64, f64)>> {
        let pts = match &self.kind {
            SpectrumKind::Monochromatic(lam) => {
                if !(lam.is_finite() && *lam > 0.0) {
                    return Err(CoreError::domain(format!("wavelength {lam} must be positive")));
                }
                vec![(*lam, 1.0)]
            }
            SpectrumKind::Tabulated(table) => {
                let mut pts = Vec::new();
                for &(lam, s) in table {
                    if s < 0.0 {
                        return Err(CoreError::domain(format!(
                            "negative spectral density {s} at {lam} m"
                        )));
                    }
                    if lam >= self.support.0 && lam <= self.support.1 && s > 0.0 {
                        pts.push((lam, s));
                    }
                }
                pts
            }
            SpectrumKind::Gaussian { center, fwhm } => {
                if !(fwhm.is_finite() && *fwhm > 0.0) {
                    return Err(CoreError::domain(format!("FWHM {fwhm} must be positive")));
                }
                let (lo, hi) = self.support;
                if !(hi > lo) || self.samples == 0 {
                    return Err(CoreError::domain(
                        "gaussian spectrum needs a nonempty support window and at least one sample"
                            .to_string(),
                    ));
                }
                let sigma = fwhm / (8.0 * 2.0f64.ln()).sqrt();
                let n = self.samples;
                let h = (hi - lo) / n as f64;
                (0..n)
                    .map(|i| {
                        let lam = lo + (i as f64 + 0.5) * h;
                        let t = (lam - center) / sigma;
                        (lam, (-0.5 * t * t).exp())
                    })
                    .collect()
            }
        };
        let total: f64 = pts.iter().map(|&(_, w)| w).sum();
        if !(total > 0.0) {
            return Err(CoreError::domain(
                "spectrum has no weight inside its support window".to_string(),
            ));
        }
        Ok(pts.into_iter().map(|(lam, w)| (lam, w / total)).collect())
    }
}

/// Guided-coupling summary for one emitter and fiber.
#[derive(Debug, Clone)]
pub struct CouplingResult {
    /// Fraction of total emission entering guided modes, both directions.
    pub eta_total: f64,
    /// Fraction reaching one fiber end: exactly half the total, since the
    /// emission splits symmetrically between the two directions.
    pub eta_per_side: f64,
    /// Per-mode emission fractions keyed by mode label; they sum to
    /// `eta_total`. Degenerate orientation pairs are already summed.
    pub per_mode: BTreeMap<String, f64>,
    /// Share of the guided emission carried by HE11.
    pub fundamental_fraction: f64,
}

/// Rate into one guided mode relative to the free-space rate, counting both
/// propagation directions and the degenerate orientation pair.
pub fn mode_coupling_rate(mode: &GuidedMode, dipole_radius: f64, orientation: [f64; 3]) -> f64 {
    let a = mode.radius();
    let k_a = 2.0 * std::f64::consts::PI * a / mode.wavelength;
    let p = mode.radial_profile(dipole_radius / a);
    let pref = 1.5 * std::f64::consts::PI / (k_a * k_a);
    let [dr, dphi, dz] = orientation;
    pref * (dr * dr * p.e_r * p.e_r + dphi * dphi * p.e_phi * p.e_phi + dz * dz * p.e_z * p.e_z)
}

/// Coupling of a dipole to all guided modes at a single wavelength.
pub fn coupling_efficiency(
    spec: &FiberSpec,
    wavelength: f64,
    dipole: &DipoleEmitter,
) -> Result<CouplingResult> {
    let modes = enumerate_guided_modes(spec, wavelength, DEFAULT_L_MAX)?;
    coupling_from_modes(&modes, spec, dipole)
}

fn coupling_from_modes(
    modes: &[GuidedMode],
    spec: &FiberSpec,
    dipole: &DipoleEmitter,
) -> Result<CouplingResult> {
    let orientation = dipole.unit_orientation()?;
    let r_d = dipole.resolve_radius(spec)?;
    let mut rates: Vec<(String, f64)> = modes
        .iter()
        .map(|m| (m.label(), mode_coupling_rate(m, r_d, orientation)))
        .collect();
    rates.sort_by(|a, b| a.0.cmp(&b.0));
    let total: f64 = rates.iter().map(|&(_, g)| g).sum();
    let denom = total + 1.0;
    let per_mode: BTreeMap<String, f64> =
        rates.into_iter().map(|(label, g)| (label, g / denom)).collect();
    let eta_total = total / denom;
    let fundamental_fraction = if total > 0.0 {
        per_mode.get("HE11").copied().unwrap_or(0.0) * denom / total
    } else {
        // No guided emission at all: trivially nothing outside HE11.
        1.0
    };
    Ok(CouplingResult {
        eta_total,
        eta_per_side: 0.5 * eta_total,
        per_mode,
        fundamental_fraction,
    })
}

/// Spectrally averaged coupling: per-wavelength efficiencies combined with
/// the spectrum's quadrature weights, per-mode maps merged by label.
pub fn broadband_coupling(
    spec: &FiberSpec,
    spectrum: &SpectrumModel,
    dipole: &DipoleEmitter,
) -> Result<CouplingResult> {
    let nodes = spectrum.discretize()?;
    let partials: Vec<(f64, CouplingResult)> = nodes
        .par_iter()
        .map(|&(lam, wt)| coupling_efficiency(spec, lam, dipole).map(|c| (wt, c)))
        .collect::<Result<Vec<_>>>()?;
    let mut eta_total = 0.0;
    let mut per_mode: BTreeMap<String, f64> = BTreeMap::new();
    for (wt, c) in &partials {
        eta_total += wt * c.eta_total;
        for (label, f) in &c.per_mode {
            *per_mode.entry(label.clone()).or_insert(0.0) += wt * f;
        }
    }
    let fundamental_fraction = if eta_total > 0.0 {
        per_mode.get("HE11").copied().unwrap_or(0.0) / eta_total
    } else {
        1.0
    };
    Ok(CouplingResult {
        eta_total,
        eta_per_side: 0.5 * eta_total,
        per_mode,
        fundamental_fraction,
    })
}

/// Materials and diameter grid for a coupling sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepRequest {
    pub core: IndexModel,
    pub surround: f64,
    /// Diameter grid in meters: inclusive ends, uniform step.
    pub d_min: f64,
    pub d_max: f64,
    pub step: f64,
}

/// One diameter sample of a sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub diameter: f64,
    pub eta_total: f64,
    pub eta_per_side: f64,
    pub fundamental_fraction: f64,
}

/// Result of a coupling-versus-diameter sweep.
#[derive(Debug, Clone)]
pub struct CouplingSweep {
    pub points: Vec<SweepPoint>,
}

/// Spectrally averaged coupling across a diameter grid. Points are
/// evaluated concurrently; the result is identical to serial evaluation.
pub fn coupling_sweep(
    request: &SweepRequest,
    spectrum: &SpectrumModel,
    dipole: &DipoleEmitter,
) -> Result<CouplingSweep> {
    if !(request.step > 0.0) {
        return Err(CoreError::domain(format!("sweep step {} must be positive", request.step)));
    }
    if !(request.d_min > 0.0 && request.d_max >= request.d_min) {
        return Err(CoreError::domain(format!(
            "invalid diameter range [{}, {}]",
            request.d_min, request.d_max
        )));
    }
    let n = ((request.d_max - request.d_min) / request.step + 1.5).floor() as usize;
    let diameters: Vec<f64> = (0..n).map(|i| request.d_min + i as f64 * request.step).collect();
    let points = diameters
        .par_iter()
        .map(|&d| {
            let spec = FiberSpec::new(d, request.core, request.surround)?;
            let c = broadband_coupling(&spec, spectrum, dipole)?;
            Ok(SweepPoint {
                diameter: d,
                eta_total: c.eta_total,
                eta_per_side: c.eta_per_side,
                fundamental_fraction: c.fundamental_fraction,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CouplingSweep { points })
}

impl CouplingSweep {
    /// Point with the largest averaged efficiency.
    pub fn argmax(&self) -> Option<&SweepPoint> {
        self.points
            .iter()
            .max_by(|a, b| a.eta_total.partial_cmp(&b.eta_total).expect("finite eta"))
    }

    /// True when the sampled efficiency curve rises to a single interior
    /// maximum and falls afterwards (plateaus allowed).
    pub fn is_unimodal(&self) -> bool {
        let mut seen_decrease = false;
        for pair in self.points.windows(2) {
            let diff = pair[1].eta_total - pair[0].eta_total;
            if diff > 0.0 && seen_decrease {
                return false;
            }
            if diff < 0.0 {
                seen_decrease = true;
            }
        }
        let Some(best) = self.argmax() else { return false };
        let first = self.points.first().expect("nonempty").eta_total;
        let last = self.points.last().expect("nonempty").eta_total;
        best.eta_total > first && best.eta_total > last
    }

    /// Smallest diameter where the fundamental carries less than 1 - epsilon
    /// of the guided emission.
    pub fn multimode_onset(&self, epsilon: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.fundamental_fraction < 1.0 - epsilon)
            .map(|p| p.diameter)
    }

    /// CSV export with meters and dimensionless columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("d_m,eta_total,eta_per_side,fundamental_fraction\n");
        for p in &self.points {
            out.push_str(&format!(
                "{:.9e},{:.9e},{:.9e},{:.9e}\n",
                p.diameter, p.eta_total, p.eta_per_side, p.fundamental_fraction
            ));
        }
        out
    }
}

/// End-to-end collection arithmetic from guided fraction to detected share.
#[derive(Debug, Clone, Copy)]
pub struct EfficiencyBudget {
    pub beta_side: f64,
    pub fiber_transmission: f64,
    pub confocal_efficiency: f64,
    pub end_to_end_one_side: f64,
    pub end_to_end_two_side: f64,
    /// One-side end-to-end efficiency over the confocal reference.
    /// Infinite when the confocal reference is zero but collection is not.
    pub fiber_to_confocal_ratio: f64,
}

/// Combine the per-side guided fraction with fiber transmission and compare
/// against a confocal reference efficiency.
pub fn efficiency_budget(
    beta_side: f64,
    fiber_transmission: f64,
    confocal_efficiency: f64,
) -> Result<EfficiencyBudget> {
    for (name, v) in [
        ("beta_side", beta_side),
        ("fiber_transmission", fiber_transmission),
        ("confocal_efficiency", confocal_efficiency),
    ] {
        if !(0.0..=1.0).contains(&v) || !v.is_finite() {
            return Err(CoreError::domain(format!("{name} = {v} outside [0, 1]")));
        }
    }
    let one = beta_side * fiber_transmission;
    Ok(EfficiencyBudget {
        beta_side,
        fiber_transmission,
        confocal_efficiency,
        end_to_end_one_side: one,
        end_to_end_two_side: 2.0 * one,
        fiber_to_confocal_ratio: one / confocal_efficiency,
    })
}

/// Largest diameter of the sweep grid that stays single-mode across the
/// whole spectrum support (single-family guidance at the bluest sample).
pub fn single_mode_limit(spectrum: &SpectrumModel, core: &IndexModel, surround: f64) -> Result<f64> {
    let bluest = spectrum
        .discretize()?
        .iter()
        .map(|&(lam, _)| lam)
        .fold(f64::INFINITY, f64::min);
    second_mode_cutoff_diameter(bluest, core, surround)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const NV_LIFETIME: f64 = 21e-9;

    fn close(got: f64, want: f64, tol: f64) {
        assert!(
            (got - want).abs() <= tol * want.abs().max(1e-12),
            "got {got:.12e}, want {want:.12e}"
        );
    }

    #[test]
    fn surface_radial_and_axial_reference_efficiencies() {
        // Independently computed with the same golden-rule constant from a
        // high-precision prototype of the exact mode fields.
        let spec = FiberSpec::silica_air(0.45e-6).unwrap();
        let radial = coupling_efficiency(&spec, 0.70e-6, &DipoleEmitter::radial_on_surface(NV_LIFETIME))
            .unwrap();
        let axial = coupling_efficiency(&spec, 0.70e-6, &DipoleEmitter::axial_on_surface(NV_LIFETIME))
            .unwrap();
        close(radial.eta_total, 0.2970052606524663, 1e-9);
        close(axial.eta_total, 0.13338969661767425, 1e-9);
        close(radial.eta_total / axial.eta_total, 2.2265982169803724, 1e-9);
    }

    #[test]
    fn monochromatic_peak_reference() {
        let spec = FiberSpec::silica_air(0.28e-6).unwrap();
        let c = coupling_efficiency(&spec, 0.637e-6, &DipoleEmitter::radial_on_surface(NV_LIFETIME))
            .unwrap();
        close(c.eta_total, 0.4398075056212354, 1e-9);
        // Single-mode diameter: everything guided is HE11.
        assert_eq!(c.fundamental_fraction, 1.0);
        assert_eq!(c.per_mode.len(), 1);
    }

    #[test]
    fn per_mode_fractions_sum_to_total() {
        let spec = FiberSpec::silica_air(0.80e-6).unwrap();
        let c = coupling_efficiency(&spec, 0.637e-6, &DipoleEmitter::radial_on_surface(NV_LIFETIME))
            .unwrap();
        assert!(c.per_mode.len() > 1, "0.8 um fiber should be multimode at 637 nm");
        let sum: f64 = c.per_mode.values().sum();
        assert!((sum - c.eta_total).abs() < 1e-9);
        assert!(c.per_mode.values().all(|&f| f >= 0.0));
        assert!(c.eta_total > 0.0 && c.eta_total < 1.0);
        assert_eq!(c.eta_per_side, 0.5 * c.eta_total);
    }

    #[test]
    fn efficiency_decays_with_surface_distance() {
        let spec = FiberSpec::silica_air(0.45e-6).unwrap();
        let mut last = f64::INFINITY;
        for i in 0..10 {
            let mut dip = DipoleEmitter::radial_on_surface(NV_LIFETIME);
            dip.placement = RadialPlacement::SurfaceOffset(i as f64 * 20e-9);
            let eta = coupling_efficiency(&spec, 0.70e-6, &dip).unwrap().eta_total;
            assert!(eta < last, "offset {} nm did not decay: {eta} vs {last}", i * 20);
            last = eta;
        }
    }

    #[test]
    fn negative_surface_offset_is_rejected() {
        let spec = FiberSpec::silica_air(0.45e-6).unwrap();
        let mut dip = DipoleEmitter::radial_on_surface(NV_LIFETIME);
        dip.placement = RadialPlacement::SurfaceOffset(-5e-9);
        assert!(coupling_efficiency(&spec, 0.70e-6, &dip).is_err());
    }

    #[test]
    fn non_unit_orientation_is_rejected() {
        let spec = FiberSpec::silica_air(0.45e-6).unwrap();
        let mut dip = DipoleEmitter::radial_on_surface(NV_LIFETIME);
        dip.orientation = [1.0, 1.0, 0.0];
        assert!(coupling_efficiency(&spec, 0.70e-6, &dip).is_err());
    }

    #[test]
    fn monochromatic_broadband_matches_single_wavelength() {
        let spec = FiberSpec::silica_air(0.45e-6).unwrap();
        let dip = DipoleEmitter::radial_on_surface(NV_LIFETIME);
        let direct = coupling_efficiency(&spec, 0.70e-6, &dip).unwrap();
        let via_spectrum =
            broadband_coupling(&spec, &SpectrumModel::monochromatic(0.70e-6), &dip).unwrap();
        close(via_spectrum.eta_total, direct.eta_total, 1e-12);
        close(
            via_spectrum.fundamental_fraction,
            direct.fundamental_fraction,
            1e-12,
        );
    }

    #[test]
    fn broadband_average_is_bounded_by_spectral_extremes() {
        let spec = FiberSpec::silica_air(0.45e-6).unwrap();
        let dip = DipoleEmitter::radial_on_surface(NV_LIFETIME);
        let spectrum = SpectrumModel::nv_default();
        let avg = broadband_coupling(&spec, &spectrum, &dip).unwrap().eta_total;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (lam, _) in spectrum.discretize().unwrap() {
            let eta = coupling_efficiency(&spec, lam, &dip).unwrap().eta_total;
            lo = lo.min(eta);
            hi = hi.max(eta);
        }
        assert!(avg >= lo && avg <= hi, "{lo} <= {avg} <= {hi} violated");
    }

    #[test]
    fn spectral_quadrature_converges_under_doubling() {
        let spec = FiberSpec::silica_air(0.45e-6).unwrap();
        let dip = DipoleEmitter::radial_on_surface(NV_LIFETIME);
        let coarse = broadband_coupling(&spec, &SpectrumModel::nv_default(), &dip).unwrap();
        let mut fine_model = SpectrumModel::nv_default();
        fine_model.samples = 64;
        let fine = broadband_coupling(&spec, &fine_model, &dip).unwrap();
        assert!((coarse.eta_total - fine.eta_total).abs() < 1e-3);
    }

    #[test]
    fn spectrum_weights_are_normalized() {
        for model in [
            SpectrumModel::nv_default(),
            SpectrumModel::monochromatic(0.637e-6),
            SpectrumModel {
                kind: SpectrumKind::Tabulated(vec![(650e-9, 2.0), (700e-9, 3.0), (900e-9, 5.0)]),
                support: (600e-9, 800e-9),
                samples: 0,
            },
        ] {
            let pts = model.discretize().unwrap();
            let sum: f64 = pts.iter().map(|&(_, w)| w).sum();
            assert!((sum - 1.0).abs() < 1e-12);
            // The tabulated point outside the support must have been cut.
            assert!(pts.iter().all(|&(lam, _)| lam <= 800e-9));
        }
    }

    #[test]
    fn degenerate_spectra_are_rejected() {
        let empty = SpectrumModel {
            kind: SpectrumKind::Tabulated(vec![(900e-9, 1.0)]),
            support: (600e-9, 800e-9),
            samples: 0,
        };
        assert!(empty.discretize().is_err());
        let negative = SpectrumModel {
            kind: SpectrumKind::Tabulated(vec![(700e-9, -1.0)]),
            support: (600e-9, 800e-9),
            samples: 0,
        };
        assert!(negative.discretize().is_err());
    }

    #[test]
    fn budget_reference_arithmetic() {
        let b = efficiency_budget(0.15, 0.10, 0.005).unwrap();
        close(b.end_to_end_one_side, 0.015, 1e-12);
        close(b.end_to_end_two_side, 0.030, 1e-12);
        close(b.fiber_to_confocal_ratio, 3.0, 1e-12);

        let zero = efficiency_budget(0.0, 0.10, 0.005).unwrap();
        assert_eq!(zero.end_to_end_one_side, 0.0);
        assert_eq!(zero.end_to_end_two_side, 0.0);
        assert_eq!(zero.fiber_to_confocal_ratio, 0.0);

        let lossless = efficiency_budget(0.22, 1.0, 0.005).unwrap();
        close(lossless.end_to_end_one_side, 0.22, 1e-12);

        assert!(efficiency_budget(1.2, 0.1, 0.005).is_err());
        assert!(efficiency_budget(0.5, -0.1, 0.005).is_err());
    }

    #[test]
    fn sweep_is_deterministic_and_exports_csv() {
        let req = SweepRequest {
            core: IndexModel::FusedSilica,
            surround: 1.0,
            d_min: 0.30e-6,
            d_max: 0.36e-6,
            step: 0.02e-6,
        };
        let dip = DipoleEmitter::radial_on_surface(NV_LIFETIME);
        let spectrum = SpectrumModel::monochromatic(0.637e-6);
        let s1 = coupling_sweep(&req, &spectrum, &dip).unwrap();
        let s2 = coupling_sweep(&req, &spectrum, &dip).unwrap();
        assert_eq!(s1.points.len(), 4);
        for (a, b) in s1.points.iter().zip(s2.points.iter()) {
            assert_eq!(a.eta_total, b.eta_total);
        }
        let csv = s1.to_csv();
        assert!(csv.starts_with("d_m,eta_total,eta_per_side,fundamental_fraction\n"));
        assert_eq!(csv.lines().count(), 5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(6))]
        // The coupling problem is scale free for fixed indices: rescaling
        // diameter, wavelength, and dipole radius together changes nothing.
        #[test]
        fn coupling_is_scale_invariant(scale in 0.7f64..1.8) {
            let core = IndexModel::Fixed(1.45);
            let d = 0.45e-6;
            let lam = 0.70e-6;
            let dip = DipoleEmitter {
                placement: RadialPlacement::Absolute(0.30e-6),
                azimuth: 0.0,
                orientation: [1.0, 0.0, 0.0],
                free_space_lifetime: NV_LIFETIME,
            };
            let dip_scaled = DipoleEmitter {
                placement: RadialPlacement::Absolute(0.30e-6 * scale),
                ..dip
            };
            let spec1 = FiberSpec::new(d, core, 1.0).unwrap();
            let spec2 = FiberSpec::new(d * scale, core, 1.0).unwrap();
            let c1 = coupling_efficiency(&spec1, lam, &dip).unwrap();
            let c2 = coupling_efficiency(&spec2, lam * scale, &dip_scaled).unwrap();
            prop_assert!((c1.eta_total - c2.eta_total).abs() < 1e-9);
        }
    }
}
