//! Taper radius profiles from pull recipes, and the adiabaticity test that
//! compares the local taper slope against the beat length between the
//! fundamental mode and its nearest neighbor.
//!
//! The pull model is volume conservation in a heated zone: with hot-zone
//! length L(x) at elongation x, the waist radius obeys
//! r_w(x) = r0 exp(-Int dx' / (2 L(x'))), each transition grows by dx/2 per
//! pull increment, and the point frozen at elongation x keeps radius
//! r_w(x). For a constant hot zone this gives the classic exponential
//! transition r(z) = r0 exp(-z/L) over a length x_end/2 on each side of a
//! cylindrical waist of length L.

use crate::error::{CoreError, Result};
use crate::fiber_modes::{leading_betas, FiberSpec};
use rayon::prelude::*;

/// Default number of profile samples, log-spaced in radius so the sampling
/// is densest where the adiabaticity criterion varies fastest.
pub const DEFAULT_PROFILE_SAMPLES: usize = 512;

/// Azimuthal orders searched for the nearest neighbor mode; the runner-up
/// is always within l <= 2 for a two-layer guide.
const NEIGHBOR_L_MAX: u32 = 2;

/// Heated-zone length during the pull.
#[derive(Debug, Clone, PartialEq)]
pub enum HotZone {
    /// Fixed hot-zone length in meters.
    Constant(f64),
    /// Piecewise-linear schedule (elongation, hot-zone length), elongation
    /// ascending from zero.
    Tabulated(Vec<(f64, f64)>),
}

/// Shape assumed for the transition regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    /// Exponential transitions from the volume-conservation pull model.
    ConstantHotZone,
    /// Straight cones between the initial radius and the waist.
    Linear,
}

/// Parameters of a heat-and-pull run.
#[derive(Debug, Clone, PartialEq)]
pub struct PullRecipe {
    /// Radius of the untapered fiber, meters.
    pub initial_radius: f64,
    pub hot_zone: HotZone,
    /// Total elongation applied, meters.
    pub total_elongation: f64,
    pub kind: ProfileKind,
}

/// Sampled radius profile r(z) over the tapered section.
#[derive(Debug, Clone)]
pub struct TaperProfile {
    /// Axial positions, meters, ascending.
    pub z: Vec<f64>,
    /// Local radius at each position, meters, all positive.
    pub r: Vec<f64>,
    pub waist_radius: f64,
    pub waist_length: f64,
}

/// Outcome of the adiabaticity test along a profile.
#[derive(Debug, Clone)]
pub struct AdiabaticityReport {
    /// Axial positions where the criterion was evaluated.
    pub z: Vec<f64>,
    /// Local radius at those positions.
    pub r: Vec<f64>,
    /// Local ratio of beat length to taper length-scale,
    /// rho = |dr/dz| / (r dbeta / (2 pi)); adiabatic means rho well below 1.
    pub rho: Vec<f64>,
    pub max_rho: f64,
    /// Position of the maximum ratio.
    pub worst_z: f64,
    /// safety_factor - max_rho; negative when the profile fails.
    pub min_margin: f64,
    pub safety_factor: f64,
    pub pass: bool,
}

/// Waist radius after pulling, from volume conservation.
fn waist_radius_of(recipe: &PullRecipe) -> Result<f64> {
    match &recipe.hot_zone {
        HotZone::Constant(l) => Ok(recipe.initial_radius * (-recipe.total_elongation / (2.0 * l)).exp()),
        HotZone::Tabulated(table) => {
            // Trapezoid integral of 1/(2 L(x)) over the pull.
            let (x_end, mut acc, mut prev) = (recipe.total_elongation, 0.0, None::<(f64, f64)>);
            for &(x, l) in table {
                let x = x.min(x_end);
                if let Some((x0, f0)) = prev {
                    acc += 0.5 * (f0 + 1.0 / (2.0 * l)) * (x - x0);
                }
                prev = Some((x, 1.0 / (2.0 * l)));
                if x >= x_end {
                    break;
                }
            }
            // Extend the last tabulated hot zone to the end of the pull.
            if let Some((x0, f0)) = prev {
                if x0 < x_end {
                    acc += f0 * (x_end - x0);
                }
            }
            Ok(recipe.initial_radius * (-acc).exp())
        }
    }
}

fn validate_recipe(recipe: &PullRecipe) -> Result<()> {
    if !(recipe.initial_radius.is_finite() && recipe.initial_radius > 0.0) {
        return Err(CoreError::domain(format!(
            "initial radius {} must be positive",
            recipe.initial_radius
        )));
    }
    if !(recipe.total_elongation.is_finite() && recipe.total_elongation >= 0.0) {
        return Err(CoreError::domain(format!(
            "total elongation {} must be nonnegative",
            recipe.total_elongation
        )));
    }
    match &recipe.hot_zone {
        HotZone::Constant(l) => {
            if !(l.is_finite() && *l > 0.0) {
                return Err(CoreError::domain(format!("hot-zone length {l} must be positive")));
            }
        }
        HotZone::Tabulated(table) => {
            if table.is_empty() {
                return Err(CoreError::domain("empty hot-zone schedule".to_string()));
            }
            let mut prev = f64::NEG_INFINITY;
            for &(x, l) in table {
                if !(l.is_finite() && l > 0.0) {
                    return Err(CoreError::domain(format!(
                        "hot-zone length {l} at elongation {x} must be positive"
                    )));
                }
                if !(x.is_finite() && x >= 0.0 && x > prev) {
                    return Err(CoreError::domain(
                        "hot-zone schedule elongations must be nonnegative and ascending".to_string(),
                    ));
                }
                prev = x;
            }
        }
    }
    Ok(())
}

/// Hot-zone length at the end of the pull, which is the waist length.
fn final_hot_zone(recipe: &PullRecipe) -> f64 {
    match &recipe.hot_zone {
        HotZone::Constant(l) => *l,
        HotZone::Tabulated(table) => {
            let x_end = recipe.total_elongation;
            let mut last = table[0].1;
            for &(x, l) in table {
                if x > x_end {
                    break;
                }
                last = l;
            }
            last
        }
    }
}

/// Taper profile predicted for a pull recipe, with the default sampling.
pub fn profile_from_recipe(recipe: &PullRecipe) -> Result<TaperProfile> {
    profile_from_recipe_sampled(recipe, DEFAULT_PROFILE_SAMPLES)
}

/// Same as [`profile_from_recipe`] with an explicit sample budget.
pub fn profile_from_recipe_sampled(recipe: &PullRecipe, samples: usize) -> Result<TaperProfile> {
    validate_recipe(recipe)?;
    if samples < 8 {
        return Err(CoreError::domain(format!("sample budget {samples} too small")));
    }
    let r0 = recipe.initial_radius;
    let waist_radius = waist_radius_of(recipe)?;
    let waist_length = final_hot_zone(recipe);
    let x_end = recipe.total_elongation;
    if x_end == 0.0 {
        // Untapered: the profile is the hot-zone span of bare fiber.
        return Ok(TaperProfile {
            z: vec![0.0, waist_length],
            r: vec![r0, r0],
            waist_radius: r0,
            waist_length,
        });
    }
    let transition_len = 0.5 * x_end;
    let n_waist = (samples / 16).max(2);
    let n_side = ((samples - n_waist) / 2).max(4);

    // Radii for one transition, log-spaced from the full radius down to the
    // waist, then mapped to axial position by the chosen transition shape.
    let log_ratio = (r0 / waist_radius).ln();
    let radii: Vec<f64> = (0..n_side)
        .map(|i| r0 * (-log_ratio * i as f64 / (n_side - 1) as f64).exp())
        .collect();
    let z_of_r: Box<dyn Fn(f64) -> f64> = match (recipe.kind, &recipe.hot_zone) {
        (ProfileKind::Linear, _) => {
            Box::new(move |r: f64| transition_len * (r0 - r) / (r0 - waist_radius))
        }
        (ProfileKind::ConstantHotZone, HotZone::Constant(l)) => {
            let l = *l;
            Box::new(move |r: f64| l * (r0 / r).ln())
        }
        (ProfileKind::ConstantHotZone, HotZone::Tabulated(_)) => {
            // Invert r_w(x) numerically on a fine elongation grid; the
            // frozen point for elongation x sits at z = x/2.
            let grid_n = 2048;
            let mut xs = Vec::with_capacity(grid_n + 1);
            let mut rs = Vec::with_capacity(grid_n + 1);
            for i in 0..=grid_n {
                let x = x_end * i as f64 / grid_n as f64;
                let sub = PullRecipe { total_elongation: x, ..recipe.clone() };
                xs.push(0.5 * x);
                rs.push(waist_radius_of(&sub)?);
            }
            Box::new(move |r: f64| {
                // rs is strictly decreasing; binary search for the segment.
                let idx = rs.partition_point(|&v| v > r).min(rs.len() - 1).max(1);
                let (r1, r2) = (rs[idx - 1], rs[idx]);
                let t = if r1 == r2 { 0.0 } else { (r1 - r) / (r1 - r2) };
                xs[idx - 1] + t * (xs[idx] - xs[idx - 1])
            })
        }
    };

    let mut z = Vec::with_capacity(2 * n_side + n_waist);
    let mut r = Vec::with_capacity(2 * n_side + n_waist);
    for &ri in &radii {
        z.push(z_of_r(ri).clamp(0.0, transition_len));
        r.push(ri);
    }
    let waist_start = transition_len;
    for i in 1..n_waist {
        z.push(waist_start + waist_length * i as f64 / (n_waist - 1) as f64);
        r.push(waist_radius);
    }
    for &ri in radii.iter().rev().skip(1) {
        z.push(waist_start + waist_length + (transition_len - z_of_r(ri).clamp(0.0, transition_len)));
        r.push(ri);
    }
    Ok(TaperProfile { z, r, waist_radius, waist_length })
}

impl TaperProfile {
    /// Straight cone from `r_start` down to `r_end` with the given
    /// half-angle, sampled log-spaced in radius. Useful as a worst-case
    /// transition shape for adiabaticity studies.
    pub fn linear_cone(r_start: f64, r_end: f64, half_angle: f64, samples: usize) -> Result<TaperProfile> {
        if !(r_start > r_end && r_end > 0.0) {
            return Err(CoreError::domain(format!(
                "cone radii must satisfy r_start > r_end > 0, got {r_start} and {r_end}"
            )));
        }
        if !(half_angle > 0.0 && half_angle < std::f64::consts::FRAC_PI_2) {
            return Err(CoreError::domain(format!("half-angle {half_angle} rad out of range")));
        }
        if samples < 8 {
            return Err(CoreError::domain(format!("sample budget {samples} too small")));
        }
        let slope = half_angle.tan();
        let length = (r_start - r_end) / slope;
        let log_ratio = (r_start / r_end).ln();
        let mut z = Vec::with_capacity(samples);
        let mut r = Vec::with_capacity(samples);
        for i in 0..samples {
            let ri = r_start * (-log_ratio * i as f64 / (samples - 1) as f64).exp();
            z.push((r_start - ri) / slope);
            r.push(ri);
        }
        debug_assert!((z.last().unwrap() - length).abs() < 1e-12 * length.max(1e-30));
        Ok(TaperProfile { z, r, waist_radius: r_end, waist_length: 0.0 })
    }

    /// CSV export of the bare profile (z_m, r_m).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("z_m,r_m\n");
        for (&z, &r) in self.z.iter().zip(self.r.iter()) {
            out.push_str(&format!("{z:.9e},{r:.9e}\n"));
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if self.z.len() != self.r.len() || self.z.len() < 2 {
            return Err(CoreError::domain("profile needs matching z and r samples".to_string()));
        }
        for pair in self.z.windows(2) {
            if !(pair[1] >= pair[0]) {
                return Err(CoreError::domain("profile z samples must ascend".to_string()));
            }
        }
        if self.r.iter().any(|&r| !(r > 0.0)) {
            return Err(CoreError::domain("profile radii must be positive".to_string()));
        }
        Ok(())
    }
}

/// Evaluate the adiabaticity criterion along a profile at one wavelength.
///
/// At each sample the local two-layer silica/air guide is solved for the
/// fundamental propagation constant and that of the nearest other guided
/// mode (or the surround light line when the waist is single-mode), and the
/// taper slope is compared against the resulting beat length. The profile
/// must be sampled finely enough that consecutive radii differ by less than
/// one percent.
pub fn adiabaticity_check(
    profile: &TaperProfile,
    wavelength: f64,
    safety_factor: f64,
) -> Result<AdiabaticityReport> {
    profile.validate()?;
    if !(safety_factor > 0.0 && safety_factor.is_finite()) {
        return Err(CoreError::domain(format!("safety factor {safety_factor} must be positive")));
    }
    let (z, r) = (&profile.z, &profile.r);
    for (i, pair) in r.windows(2).enumerate() {
        let dr = (pair[1] - pair[0]).abs();
        if dr > 0.01 * pair[0].min(pair[1]) {
            return Err(CoreError::domain(format!(
                "profile too coarse near z = {:.6e} m: radius step {:.2}% exceeds 1%",
                z[i],
                100.0 * dr / pair[0].min(pair[1])
            )));
        }
    }
    let n = z.len();
    let slope = |i: usize| -> f64 {
        let (lo, hi) = if i == 0 {
            (0, 1)
        } else if i == n - 1 {
            (n - 2, n - 1)
        } else {
            (i - 1, i + 1)
        };
        if z[hi] == z[lo] {
            0.0
        } else {
            (r[hi] - r[lo]) / (z[hi] - z[lo])
        }
    };
    let light_line = 2.0 * std::f64::consts::PI / wavelength;
    let rho: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let s = slope(i);
            if s == 0.0 {
                return Ok(0.0);
            }
            let spec = FiberSpec::silica_air(2.0 * r[i])?;
            let (beta1, beta2) = leading_betas(&spec, wavelength, NEIGHBOR_L_MAX)
                .map_err(|e| CoreError::solver(format!("at z = {:.6e} m: {e}", z[i])))?;
            let dbeta = beta1 - beta2.unwrap_or(light_line);
            if !(dbeta > 0.0) {
                return Err(CoreError::solver(format!(
                    "vanishing beat length at z = {:.6e} m (r = {:.3e} m)",
                    z[i], r[i]
                )));
            }
            Ok(s.abs() * 2.0 * std::f64::consts::PI / (r[i] * dbeta))
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mut max_rho, mut worst) = (0.0, 0);
    for (i, &val) in rho.iter().enumerate() {
        if val > max_rho {
            max_rho = val;
            worst = i;
        }
    }
    Ok(AdiabaticityReport {
        z: z.clone(),
        r: r.clone(),
        rho,
        max_rho,
        worst_z: z[worst],
        min_margin: safety_factor - max_rho,
        safety_factor,
        pass: max_rho <= safety_factor,
    })
}

impl AdiabaticityReport {
    /// CSV export (z_m, r_m, rho).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("z_m,r_m,rho\n");
        for i in 0..self.z.len() {
            out.push_str(&format!("{:.9e},{:.9e},{:.9e}\n", self.z[i], self.r[i], self.rho[i]));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(got: f64, want: f64, tol: f64) {
        assert!((got - want).abs() <= tol * want.abs().max(1e-30), "got {got:e}, want {want:e}");
    }

    #[test]
    fn standard_pull_reaches_quarter_micron_waist() {
        // Pull a 125 um fiber to a 225 nm radius, 5 mm long waist; the
        // elongation follows by inverting the exponential law.
        let l = 5e-3;
        let r0 = 62.5e-6;
        let x_end = 2.0 * l * (r0 / 0.225e-6_f64).ln();
        let recipe = PullRecipe {
            initial_radius: r0,
            hot_zone: HotZone::Constant(l),
            total_elongation: x_end,
            kind: ProfileKind::ConstantHotZone,
        };
        let profile = profile_from_recipe(&recipe).unwrap();
        assert!((profile.waist_radius - 0.225e-6).abs() < 1e-9);
        close(profile.waist_length, 5e-3, 1e-12);
        // Total span: two transitions of x_end/2 plus the waist.
        close(*profile.z.last().unwrap(), x_end + l, 1e-9);
        // min r equals the waist radius.
        let rmin = profile.r.iter().cloned().fold(f64::INFINITY, f64::min);
        close(rmin, profile.waist_radius, 1e-12);
    }

    #[test]
    fn zero_elongation_is_identity() {
        let recipe = PullRecipe {
            initial_radius: 62.5e-6,
            hot_zone: HotZone::Constant(5e-3),
            total_elongation: 0.0,
            kind: ProfileKind::ConstantHotZone,
        };
        let profile = profile_from_recipe(&recipe).unwrap();
        assert_eq!(profile.waist_radius, 62.5e-6);
        assert!(profile.r.iter().all(|&r| r == 62.5e-6));
    }

    #[test]
    fn waist_radius_decreases_with_elongation() {
        let mut last = f64::INFINITY;
        for x_mm in [10.0, 20.0, 30.0, 40.0] {
            let recipe = PullRecipe {
                initial_radius: 62.5e-6,
                hot_zone: HotZone::Constant(5e-3),
                total_elongation: x_mm * 1e-3,
                kind: ProfileKind::ConstantHotZone,
            };
            let w = profile_from_recipe(&recipe).unwrap().waist_radius;
            assert!(w < last);
            last = w;
        }
    }

    #[test]
    fn tabulated_constant_schedule_matches_constant_hot_zone() {
        let a = PullRecipe {
            initial_radius: 10e-6,
            hot_zone: HotZone::Constant(4e-3),
            total_elongation: 12e-3,
            kind: ProfileKind::ConstantHotZone,
        };
        let b = PullRecipe {
            hot_zone: HotZone::Tabulated(vec![(0.0, 4e-3), (6e-3, 4e-3), (12e-3, 4e-3)]),
            ..a.clone()
        };
        let pa = profile_from_recipe(&a).unwrap();
        let pb = profile_from_recipe(&b).unwrap();
        close(pb.waist_radius, pa.waist_radius, 1e-9);
        close(pb.waist_length, pa.waist_length, 1e-12);
    }

    #[test]
    fn profile_sampling_is_fine_enough_for_the_checker() {
        let recipe = PullRecipe {
            initial_radius: 1e-6,
            hot_zone: HotZone::Constant(5e-3),
            total_elongation: 2.0 * 5e-3 * (1.0f64 / 0.225).ln(),
            kind: ProfileKind::ConstantHotZone,
        };
        let profile = profile_from_recipe(&recipe).unwrap();
        for pair in profile.r.windows(2) {
            assert!((pair[1] - pair[0]).abs() <= 0.01 * pair[0].min(pair[1]));
        }
    }

    #[test]
    fn uniform_section_has_zero_rho_and_passes() {
        let recipe = PullRecipe {
            initial_radius: 0.5e-6,
            hot_zone: HotZone::Constant(2e-3),
            total_elongation: 0.0,
            kind: ProfileKind::ConstantHotZone,
        };
        let profile = profile_from_recipe(&recipe).unwrap();
        let report = adiabaticity_check(&profile, 0.7e-6, 1.0).unwrap();
        assert!(report.pass);
        assert_eq!(report.max_rho, 0.0);
    }

    #[test]
    fn gentle_cone_passes_and_steep_cone_fails() {
        let gentle = TaperProfile::linear_cone(0.5e-6, 0.225e-6, 0.05f64.to_radians(), 400).unwrap();
        let report = adiabaticity_check(&gentle, 0.7e-6, 1.0).unwrap();
        assert!(report.pass, "gentle cone max rho = {}", report.max_rho);

        let steep = TaperProfile::linear_cone(0.5e-6, 0.225e-6, 5.0f64.to_radians(), 400).unwrap();
        let report = adiabaticity_check(&steep, 0.7e-6, 1.0).unwrap();
        assert!(!report.pass, "steep cone max rho = {}", report.max_rho);
        assert!(report.min_margin < 0.0);
    }

    #[test]
    fn rho_scales_linearly_with_slope() {
        // Doubling the cone angle at the same radii doubles |dr/dz| and
        // must double rho pointwise (radii are sampled identically).
        let base = TaperProfile::linear_cone(0.5e-6, 0.30e-6, 0.2f64.to_radians(), 200).unwrap();
        let steep = TaperProfile::linear_cone(
            0.5e-6,
            0.30e-6,
            (2.0 * 0.2f64.to_radians().tan()).atan(),
            200,
        )
        .unwrap();
        let ra = adiabaticity_check(&base, 0.7e-6, 1.0).unwrap();
        let rb = adiabaticity_check(&steep, 0.7e-6, 1.0).unwrap();
        for (a, b) in ra.rho.iter().zip(rb.rho.iter()).skip(1) {
            close(*b, 2.0 * a, 1e-6);
        }
    }

    #[test]
    fn report_is_stable_under_denser_sampling() {
        let recipe = PullRecipe {
            initial_radius: 1e-6,
            hot_zone: HotZone::Constant(5e-3),
            total_elongation: 2.0 * 5e-3 * (1.0f64 / 0.45).ln(),
            kind: ProfileKind::ConstantHotZone,
        };
        let coarse = profile_from_recipe_sampled(&recipe, 512).unwrap();
        let dense = profile_from_recipe_sampled(&recipe, 1024).unwrap();
        let a = adiabaticity_check(&coarse, 0.7e-6, 1.0).unwrap();
        let b = adiabaticity_check(&dense, 0.7e-6, 1.0).unwrap();
        assert!((a.max_rho - b.max_rho).abs() < 0.05 * a.max_rho.max(1e-12));
    }

    #[test]
    fn coarse_profiles_are_rejected() {
        let profile = TaperProfile {
            z: vec![0.0, 1e-3, 2e-3],
            r: vec![10e-6, 5e-6, 2e-6],
            waist_radius: 2e-6,
            waist_length: 0.0,
        };
        let err = adiabaticity_check(&profile, 0.7e-6, 1.0).unwrap_err();
        assert!(err.to_string().contains("too coarse"));
    }
}
