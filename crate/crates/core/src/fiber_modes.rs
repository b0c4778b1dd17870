//! Exact vectorial guided modes of a two-layer step-index cylindrical
//! waveguide, valid at arbitrary index contrast.
//!
//! Conventions: propagation factor exp(i(beta z - omega t)), natural units
//! (c = eps0 = mu0 = 1) with lengths measured in fiber radii inside the
//! field math. The transverse wavenumbers u (core) and w (cladding) obey
//! u^2 + w^2 = V^2. Modes returned by the solvers carry field coefficients
//! rescaled so the mode's axial power flux equals one, which fixes the
//! normalization that the coupling calculations rely on.

use crate::error::{CoreError, Result};
use crate::numerics::bessel::{bessel_j_seq, bessel_k_seq, j_prime, k_prime};
use crate::numerics::quad::{gauss_legendre_panels, geometric_breaks};
use crate::numerics::roots::{bracket_from_samples, refine, Bracket};
use num_complex::Complex64;
use rayon::prelude::*;

/// Normalized frequency at which the first higher-order modes (TE01, TM01)
/// reach cutoff: the first zero of J_0.
pub const SECOND_MODE_V: f64 = 2.404825557695773;

/// Number of effective-index samples used to bracket characteristic roots.
pub const DEFAULT_GRID_POINTS: usize = 4096;

/// Highest supported azimuthal order for mode enumeration.
pub const MAX_AZIMUTHAL_ORDER: u32 = 8;

const SELLMEIER_B: [f64; 3] = [0.696_166_3, 0.407_942_6, 0.897_479_4];
/// Resonance wavelengths squared, in square micrometers.
const SELLMEIER_C_UM2: [f64; 3] = [
    0.068_404_3 * 0.068_404_3,
    0.116_241_4 * 0.116_241_4,
    9.896_161 * 9.896_161,
];

/// Refractive index of synthetic fused silica at a vacuum wavelength given
/// in meters, from the three-term Sellmeier expansion for the bulk glass.
///
/// Valid for wavelengths between 0.21 um and 3.7 um; outside that range the
/// expansion is unsupported and an error is returned.
pub fn sellmeier_index(wavelength: f64) -> Result<f64> {
    let um = wavelength * 1e6;
    if !(0.21..=3.71).contains(&um) {
        return Err(CoreError::domain(format!(
            "wavelength {um:.4} um outside the 0.21-3.71 um validity range of the silica dispersion model"
        )));
    }
    let l2 = um * um;
    let mut n2 = 1.0;
    for (b, c) in SELLMEIER_B.iter().zip(SELLMEIER_C_UM2.iter()) {
        n2 += b * l2 / (l2 - c);
    }
    Ok(n2.sqrt())
}

/// Core index model: either dispersionless or the fused-silica Sellmeier fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IndexModel {
    /// Fixed, wavelength-independent refractive index.
    Fixed(f64),
    /// Dispersive fused silica.
    FusedSilica,
}

impl IndexModel {
    /// Refractive index at the given vacuum wavelength in meters.
    pub fn index_at(&self, wavelength: f64) -> Result<f64> {
        match *self {
            IndexModel::Fixed(n) => {
                if n.is_finite() && n > 0.0 {
                    Ok(n)
                } else {
                    Err(CoreError::domain(format!("fixed index {n} must be positive")))
                }
            }
            IndexModel::FusedSilica => sellmeier_index(wavelength),
        }
    }
}

/// Geometry and materials of the two-layer waveguide.
#[derive(Debug, Clone, Copy)]
pub struct FiberSpec {
    /// Core diameter in meters.
    pub diameter: f64,
    /// Core index model.
    pub core: IndexModel,
    /// Refractive index of the (dispersionless) surround.
    pub surround: f64,
}

impl FiberSpec {
    pub fn new(diameter: f64, core: IndexModel, surround: f64) -> Result<Self> {
        if !(diameter.is_finite() && diameter > 0.0) {
            return Err(CoreError::domain(format!("diameter {diameter} must be positive")));
        }
        if !(surround.is_finite() && surround > 0.0) {
            return Err(CoreError::domain(format!("surround index {surround} must be positive")));
        }
        Ok(FiberSpec { diameter, core, surround })
    }

    /// Silica core in air or vacuum.
    pub fn silica_air(diameter: f64) -> Result<Self> {
        FiberSpec::new(diameter, IndexModel::FusedSilica, 1.0)
    }

    /// Core radius in meters.
    pub fn radius(&self) -> f64 {
        0.5 * self.diameter
    }

    /// Core and surround indices at a wavelength, checked for guidance.
    fn indices_at(&self, wavelength: f64) -> Result<(f64, f64)> {
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(CoreError::domain(format!("wavelength {wavelength} must be positive")));
        }
        let n1 = self.core.index_at(wavelength)?;
        if n1 <= self.surround {
            return Err(CoreError::domain(format!(
                "core index {n1:.6} does not exceed surround index {:.6}; no guided modes exist",
                self.surround
            )));
        }
        Ok((n1, self.surround))
    }
}

/// Normalized frequency V = (pi d / lambda) sqrt(n1^2 - n2^2).
pub fn v_number(spec: &FiberSpec, wavelength: f64) -> Result<f64> {
    let (n1, n2) = spec.indices_at(wavelength)?;
    Ok(std::f64::consts::PI * spec.diameter / wavelength * (n1 * n1 - n2 * n2).sqrt())
}

/// Diameter at which V reaches the first zero of J_0, where TE01 and TM01
/// start being guided and the fiber stops being strictly single-family.
pub fn second_mode_cutoff_diameter(wavelength: f64, core: &IndexModel, surround: f64) -> Result<f64> {
    let n1 = core.index_at(wavelength)?;
    if n1 <= surround {
        return Err(CoreError::domain(
            "core index does not exceed surround index; cutoff diameter undefined".to_string(),
        ));
    }
    Ok(SECOND_MODE_V * wavelength / (std::f64::consts::PI * (n1 * n1 - surround * surround).sqrt()))
}

/// Mode family of the step-index cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeFamily {
    Te,
    Tm,
    He,
    Eh,
}

impl std::fmt::Display for ModeFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModeFamily::Te => "TE",
            ModeFamily::Tm => "TM",
            ModeFamily::He => "HE",
            ModeFamily::Eh => "EH",
        };
        f.write_str(s)
    }
}

/// The four field amplitude constants (core E, core H, surround E,
/// surround H) after power normalization.
#[derive(Debug, Clone, Copy)]
pub struct FieldCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Scalar radial field profiles with the azimuthal factors stripped off.
///
/// The full fields of the cos-oriented mode member are recovered as
/// E = (i er cos(l phi), i ephi sin(l phi), ez cos(l phi)) and
/// H = (i hr sin(l phi), i hphi cos(l phi), hz sin(l phi)); for l = 0 the
/// azimuthal factors are all one.
#[derive(Debug, Clone, Copy, Default)]
pub struct RadialProfile {
    pub e_r: f64,
    pub e_phi: f64,
    pub e_z: f64,
    pub h_r: f64,
    pub h_phi: f64,
    pub h_z: f64,
}

/// Complex E and H at a point, components ordered (r, phi, z).
#[derive(Debug, Clone, Copy)]
pub struct FieldPoint {
    pub e: [Complex64; 3],
    pub h: [Complex64; 3],
}

/// One guided mode at a fixed wavelength, fields normalized to unit power.
#[derive(Debug, Clone)]
pub struct GuidedMode {
    pub family: ModeFamily,
    /// Azimuthal order l (0 for TE/TM, >= 1 for HE/EH).
    pub azimuthal_order: u32,
    /// Radial order m, counted from 1 at the largest effective index.
    pub radial_order: u32,
    /// Vacuum wavelength in meters.
    pub wavelength: f64,
    /// Effective index beta / k.
    pub n_eff: f64,
    /// Propagation constant in rad/m.
    pub beta: f64,
    /// Core transverse parameter u = a sqrt(k^2 n1^2 - beta^2).
    pub u: f64,
    /// Surround decay parameter w = a sqrt(beta^2 - k^2 n2^2).
    pub w: f64,
    pub field_coefficients: FieldCoefficients,
    radius: f64,
    k_a: f64,
    n_core: f64,
    n_surround: f64,
}

impl GuidedMode {
    /// Conventional label such as "HE11" or "TE01".
    pub fn label(&self) -> String {
        format!("{}{}{}", self.family, self.azimuthal_order, self.radial_order)
    }

    /// Core radius in meters.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Core and surround indices the mode was solved with.
    pub fn indices(&self) -> (f64, f64) {
        (self.n_core, self.n_surround)
    }

    /// Scalar field profiles at normalized radius x = r/a.
    pub fn radial_profile(&self, x: f64) -> RadialProfile {
        debug_assert!(x >= 0.0);
        // Guard the l >= 1 on-axis terms J_l(ux)/x, which are finite limits.
        let xe = x.max(1e-12);
        let nu = self.azimuthal_order as usize;
        let nuf = nu as f64;
        let c = &self.field_coefficients;
        let bt = self.n_eff * self.k_a;
        let kt = self.k_a;
        if x < 1.0 {
            let u = self.u;
            let seq = bessel_j_seq(nu + 1, u * xe);
            let fnu = seq[nu];
            let fp = j_prime(&seq, nu);
            let inv = 1.0 / (u * u);
            let n1sq = self.n_core * self.n_core;
            RadialProfile {
                e_r: inv * (bt * u * c.a * fp + kt * nuf * c.b * fnu / xe),
                e_phi: -inv * (bt * nuf * c.a * fnu / xe + kt * u * c.b * fp),
                e_z: c.a * fnu,
                h_r: inv * (bt * u * c.b * fp + kt * n1sq * nuf * c.a * fnu / xe),
                h_phi: inv * (bt * nuf * c.b * fnu / xe + kt * n1sq * u * c.a * fp),
                h_z: c.b * fnu,
            }
        } else {
            let w = self.w;
            let seq = bessel_k_seq(nu + 1, w * xe);
            let fnu = seq[nu];
            let fp = k_prime(&seq, nu);
            let inv = 1.0 / (w * w);
            let n2sq = self.n_surround * self.n_surround;
            RadialProfile {
                e_r: -inv * (bt * w * c.c * fp + kt * nuf * c.d * fnu / xe),
                e_phi: inv * (bt * nuf * c.c * fnu / xe + kt * w * c.d * fp),
                e_z: c.c * fnu,
                h_r: -inv * (bt * w * c.d * fp + kt * n2sq * nuf * c.c * fnu / xe),
                h_phi: -inv * (bt * nuf * c.d * fnu / xe + kt * n2sq * w * c.c * fp),
                h_z: c.d * fnu,
            }
        }
    }

    /// Complex fields of the cos-oriented mode member at radius r (meters)
    /// and azimuth phi (radians). The sin-oriented degenerate partner for
    /// l >= 1 follows by rotating phi by pi/(2l).
    pub fn field(&self, r: f64, phi: f64) -> FieldPoint {
        let p = self.radial_profile(r / self.radius);
        let (s, c) = if self.azimuthal_order == 0 {
            (1.0, 1.0)
        } else {
            (self.azimuthal_order as f64 * phi).sin_cos()
        };
        let i = Complex64::new(0.0, 1.0);
        FieldPoint {
            e: [
                i * (p.e_r * c),
                i * (p.e_phi * s),
                Complex64::new(p.e_z * c, 0.0),
            ],
            h: [
                i * (p.h_r * s),
                i * (p.h_phi * c),
                Complex64::new(p.h_z * s, 0.0),
            ],
        }
    }

    /// Axial power flux of the mode in the normalized convention.
    ///
    /// Solver-produced modes are rescaled so this equals one; the method is
    /// exposed so callers can verify the normalization contract.
    pub fn power_flux(&self) -> f64 {
        let m_phi = if self.azimuthal_order == 0 {
            2.0 * std::f64::consts::PI
        } else {
            std::f64::consts::PI
        };
        let sz_x = |x: f64| {
            let p = self.radial_profile(x);
            (p.e_r * p.h_phi - p.e_phi * p.h_r) * x
        };
        // Enough interior panels to track the Bessel oscillation of high
        // radial orders, then a geometric mesh over the evanescent tail.
        let n_inside = ((self.u / 2.0).ceil() as usize).max(2);
        let inside: Vec<f64> = (0..=n_inside).map(|i| i as f64 / n_inside as f64).collect();
        let outside = geometric_breaks(1.0, 1.0 + 45.0 / self.w, 12);
        let total = gauss_legendre_panels(sz_x, &inside) + gauss_legendre_panels(sz_x, &outside);
        0.5 * m_phi * total
    }

    /// Fractional jump of the radial E component across the surface, equal
    /// to n_surround^2 / n_core^2 by continuity of the normal displacement.
    pub fn surface_er_ratio(&self) -> f64 {
        (self.n_surround / self.n_core).powi(2)
    }
}

/// Effective index of the fundamental HE11 mode.
pub fn solve_fundamental(spec: &FiberSpec, wavelength: f64) -> Result<GuidedMode> {
    let solver = Solver::new(spec, wavelength)?;
    let mut roots = solver.family_roots(ModeFamily::He, 1);
    if roots.is_empty() {
        return Err(CoreError::solver(format!(
            "no HE11 root found for d = {:.4} um at lambda = {:.4} um (V = {:.4})",
            spec.diameter * 1e6,
            wavelength * 1e6,
            solver.v
        )));
    }
    let n_eff = roots.pop().expect("nonempty");
    solver.assemble(ModeFamily::He, 1, 1, n_eff)
}

/// All guided modes with azimuthal order up to `l_max`, sorted by
/// decreasing effective index.
pub fn enumerate_guided_modes(spec: &FiberSpec, wavelength: f64, l_max: u32) -> Result<Vec<GuidedMode>> {
    if l_max > MAX_AZIMUTHAL_ORDER {
        return Err(CoreError::domain(format!(
            "azimuthal order limit {l_max} exceeds the supported maximum {MAX_AZIMUTHAL_ORDER}"
        )));
    }
    let solver = Solver::new(spec, wavelength)?;
    let mut branches = vec![(ModeFamily::Te, 0u32), (ModeFamily::Tm, 0u32)];
    for nu in 1..=l_max {
        branches.push((ModeFamily::He, nu));
        branches.push((ModeFamily::Eh, nu));
    }
    let mut found: Vec<(ModeFamily, u32, u32, f64)> = Vec::new();
    for &(family, nu) in &branches {
        let roots = solver.family_roots(family, nu);
        let count = roots.len();
        for (i, &root) in roots.iter().rev().enumerate() {
            debug_assert!(i < count);
            found.push((family, nu, (i + 1) as u32, root));
        }
    }
    let mut modes = found
        .into_par_iter()
        .map(|(family, nu, m, n_eff)| solver.assemble(family, nu, m, n_eff))
        .collect::<Result<Vec<_>>>()?;
    modes.sort_by(|a, b| b.n_eff.partial_cmp(&a.n_eff).expect("finite n_eff"));
    Ok(modes)
}

/// Propagation constants in rad/m of the fundamental mode and of the
/// nearest other guided mode, if one exists, considering azimuthal orders
/// up to `l_max`.
///
/// This avoids assembling and normalizing full mode fields, which matters
/// when scanning taper profiles whose thick ends guide hundreds of modes.
pub fn leading_betas(spec: &FiberSpec, wavelength: f64, l_max: u32) -> Result<(f64, Option<f64>)> {
    if l_max > MAX_AZIMUTHAL_ORDER {
        return Err(CoreError::domain(format!(
            "azimuthal order limit {l_max} exceeds the supported maximum {MAX_AZIMUTHAL_ORDER}"
        )));
    }
    let solver = Solver::new(spec, wavelength)?;
    // The runner-up can be the second root of the HE1 branch itself or the
    // first root of any other family.
    let he1 = solver.top_roots(ModeFamily::He, 1, 2);
    let Some(&he11) = he1.first() else {
        return Err(CoreError::solver(format!(
            "no fundamental mode found for d = {:.4} um at lambda = {:.4} um",
            spec.diameter * 1e6,
            wavelength * 1e6
        )));
    };
    let mut next = he1.get(1).copied();
    let mut branches = vec![(ModeFamily::Te, 0u32), (ModeFamily::Tm, 0u32), (ModeFamily::Eh, 1u32)];
    for nu in 2..=l_max {
        branches.push((ModeFamily::He, nu));
        branches.push((ModeFamily::Eh, nu));
    }
    for (family, nu) in branches {
        if let Some(&r) = solver.top_roots(family, nu, 1).first() {
            next = Some(next.map_or(r, |n: f64| n.max(r)));
        }
    }
    let k = 2.0 * std::f64::consts::PI / wavelength;
    Ok((he11 * k, next.map(|n| n * k)))
}

/// Shared state for locating and assembling modes at one (fiber, wavelength).
struct Solver {
    a: f64,
    k_a: f64,
    n1: f64,
    n2: f64,
    v: f64,
    wavelength: f64,
    /// Effective-index scan grid, ascending.
    grid: Vec<f64>,
}

/// Bessel data for one effective-index sample.
struct PointData {
    u: f64,
    w: f64,
    j: Vec<f64>,
    k: Vec<f64>,
}

impl Solver {
    fn new(spec: &FiberSpec, wavelength: f64) -> Result<Solver> {
        let (n1, n2) = spec.indices_at(wavelength)?;
        let a = spec.radius();
        let k_a = 2.0 * std::f64::consts::PI * a / wavelength;
        let v = k_a * (n1 * n1 - n2 * n2).sqrt();
        let span = n1 - n2;
        // Stay strictly inside (n2, n1); at the edges u or w vanishes and
        // the characteristic functions are singular.
        let lo = n2 + span * 1e-9;
        let hi = n1 - span * 1e-9;
        let n = DEFAULT_GRID_POINTS;
        let grid = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect();
        Ok(Solver { a, k_a, n1, n2, v, wavelength, grid })
    }

    fn point_data(&self, n_eff: f64, max_order: usize) -> PointData {
        let u = self.k_a * (self.n1 * self.n1 - n_eff * n_eff).max(0.0).sqrt();
        let w = self.k_a * (n_eff * n_eff - self.n2 * self.n2).max(0.0).sqrt();
        PointData {
            u,
            w,
            j: bessel_j_seq(max_order, u),
            k: bessel_k_seq(max_order, w),
        }
    }

    /// Characteristic function whose zeros are the family's modes.
    ///
    /// TE/TM are the classical transcendental forms. For the hybrid
    /// families the quadratic in J'_l/(u J_l) is resolved into its two
    /// branches, HE taking the positive square root and EH the negative,
    /// which keeps each branch free of spurious crossings.
    fn characteristic(&self, family: ModeFamily, nu: u32, n_eff: f64, p: &PointData) -> f64 {
        let rho = (self.n2 / self.n1).powi(2);
        let (u, w) = (p.u, p.w);
        match family {
            ModeFamily::Te => p.j[1] / (u * p.j[0]) + p.k[1] / (w * p.k[0]),
            ModeFamily::Tm => p.j[1] / (u * p.j[0]) + rho * p.k[1] / (w * p.k[0]),
            ModeFamily::He | ModeFamily::Eh => {
                let nuq = nu as usize;
                let x = j_prime(&p.j, nuq) / (u * p.j[nuq]);
                let y = k_prime(&p.k, nuq) / (w * p.k[nuq]);
                let r = nu as f64 * (n_eff / self.n1) * (1.0 / (u * u) + 1.0 / (w * w));
                let half_dy = 0.5 * (1.0 - rho) * y;
                let disc = (half_dy * half_dy + r * r).sqrt();
                let sign = if family == ModeFamily::He { 1.0 } else { -1.0 };
                x + 0.5 * (1.0 + rho) * y + sign * disc
            }
        }
    }

    /// All roots of one family branch, ascending in effective index.
    fn family_roots(&self, family: ModeFamily, nu: u32) -> Vec<f64> {
        let max_order = nu as usize + 1;
        let values: Vec<f64> = self
            .grid
            .par_iter()
            .map(|&n_eff| {
                let p = self.point_data(n_eff, max_order);
                self.characteristic(family, nu, n_eff, &p)
            })
            .collect();
        let brackets = bracket_from_samples(&self.grid, &values);
        let eval = |n_eff: f64| {
            let p = self.point_data(n_eff, max_order);
            self.characteristic(family, nu, n_eff, &p)
        };
        let mut roots = Vec::new();
        for b in brackets {
            let root = refine(eval, b, 1e-14);
            if self.is_genuine_root(root, &b, eval) {
                roots.push(root);
            }
        }
        // Poles of J_l(u) can sit arbitrarily close to a root without being
        // one; anything the residual filter let through twice is one root.
        roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        roots
    }

    /// Up to `count` largest genuine roots of one branch, descending.
    fn top_roots(&self, family: ModeFamily, nu: u32, count: usize) -> Vec<f64> {
        let max_order = nu as usize + 1;
        let values: Vec<f64> = self
            .grid
            .par_iter()
            .map(|&n_eff| {
                let p = self.point_data(n_eff, max_order);
                self.characteristic(family, nu, n_eff, &p)
            })
            .collect();
        let brackets = bracket_from_samples(&self.grid, &values);
        let eval = |n_eff: f64| {
            let p = self.point_data(n_eff, max_order);
            self.characteristic(family, nu, n_eff, &p)
        };
        let mut roots = Vec::new();
        for b in brackets.iter().rev() {
            let root = refine(eval, *b, 1e-14);
            if self.is_genuine_root(root, b, eval)
                && roots.last().is_none_or(|&prev: &f64| (prev - root).abs() > 1e-9)
            {
                roots.push(root);
                if roots.len() == count {
                    break;
                }
            }
        }
        roots
    }

    /// Sign changes at poles of the characteristic function converge under
    /// bisection but keep a huge residual; genuine roots drive it to the
    /// rounding floor.
    fn is_genuine_root(&self, root: f64, b: &Bracket, eval: impl Fn(f64) -> f64) -> bool {
        let scale = b.f_lo.abs().max(b.f_hi.abs());
        if scale == 0.0 {
            return true;
        }
        eval(root).abs() < 1e-6 * scale
    }

    /// Build the normalized mode for a refined root.
    fn assemble(&self, family: ModeFamily, nu: u32, m: u32, n_eff: f64) -> Result<GuidedMode> {
        let nuq = nu as usize;
        let p = self.point_data(n_eff, nuq + 1);
        let (u, w) = (p.u, p.w);
        let bt = n_eff * self.k_a;
        let (a, b) = match family {
            ModeFamily::Te => (0.0, 1.0),
            ModeFamily::Tm => (1.0, 0.0),
            ModeFamily::He | ModeFamily::Eh => {
                let x = j_prime(&p.j, nuq) / (u * p.j[nuq]);
                let y = k_prime(&p.k, nuq) / (w * p.k[nuq]);
                let b = -(bt * nu as f64 / self.k_a) * (1.0 / (u * u) + 1.0 / (w * w)) / (x + y);
                (1.0, b)
            }
        };
        let match_ratio = p.j[nuq] / p.k[nuq];
        let coeffs = FieldCoefficients {
            a,
            b,
            c: a * match_ratio,
            d: b * match_ratio,
        };
        let mut mode = GuidedMode {
            family,
            azimuthal_order: nu,
            radial_order: m,
            wavelength: self.wavelength,
            n_eff,
            beta: bt / self.a,
            u,
            w,
            field_coefficients: coeffs,
            radius: self.a,
            k_a: self.k_a,
            n_core: self.n1,
            n_surround: self.n2,
        };
        let power = mode.power_flux();
        if !(power.is_finite() && power > 0.0) {
            return Err(CoreError::solver(format!(
                "non-positive power flux {power:e} for {} at n_eff = {n_eff:.9}",
                mode.label()
            )));
        }
        let s = 1.0 / power.sqrt();
        mode.field_coefficients.a *= s;
        mode.field_coefficients.b *= s;
        mode.field_coefficients.c *= s;
        mode.field_coefficients.d *= s;
        Ok(mode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(got: f64, want: f64, tol: f64) {
        assert!(
            (got - want).abs() <= tol * want.abs().max(1.0),
            "got {got:.15e}, want {want:.15e}"
        );
    }

    #[test]
    fn silica_index_reference_values() {
        // High-precision evaluations of the Sellmeier expansion.
        for (um, want) in [
            (0.450, 1.4655656654352176),
            (0.5876, 1.4584623420532408),
            (0.600, 1.4580377016844404),
            (0.637, 1.4568969878241789),
            (0.700, 1.4552924662622837),
            (0.800, 1.453317254858742),
        ] {
            close(sellmeier_index(um * 1e-6).unwrap(), want, 1e-14);
        }
    }

    #[test]
    fn silica_index_rejects_out_of_range() {
        assert!(sellmeier_index(0.15e-6).is_err());
        assert!(sellmeier_index(4.0e-6).is_err());
    }

    #[test]
    fn fundamental_reference_indices() {
        // (diameter um, wavelength um, n_eff) solved independently at high
        // precision from the exact characteristic equation.
        for (d, lam, want) in [
            (0.45, 0.700, 1.1794056553656769),
            (0.45, 0.637, 1.2143432536188445),
            (0.28, 0.637, 1.052804935942285),
            (0.31, 0.700, 1.0541325343285701),
            (0.40, 0.637, 1.17210689399745),
        ] {
            let spec = FiberSpec::silica_air(d * 1e-6).unwrap();
            let mode = solve_fundamental(&spec, lam * 1e-6).unwrap();
            close(mode.n_eff, want, 1e-11);
            assert_eq!(mode.label(), "HE11");
            // u^2 + w^2 = V^2 ties the transverse parameters to geometry.
            let v = v_number(&spec, lam * 1e-6).unwrap();
            close(mode.u * mode.u + mode.w * mode.w, v * v, 1e-12);
        }
    }

    #[test]
    fn higher_order_reference_indices() {
        let spec = FiberSpec::silica_air(0.60e-6).unwrap();
        let modes = enumerate_guided_modes(&spec, 0.637e-6, 2).unwrap();
        let find = |label: &str| {
            modes
                .iter()
                .find(|m| m.label() == label)
                .unwrap_or_else(|| panic!("{label} missing"))
                .n_eff
        };
        close(find("TE01"), 1.1169907355909454, 1e-11);
        close(find("TM01"), 1.074370154085399, 1e-11);
        close(find("HE21"), 1.05392722629667, 1e-11);
    }

    #[test]
    fn mode_counts_straddle_the_he21_onset() {
        // At 637 nm a 480 nm silica fiber guides HE11, TE01, TM01 but not
        // yet HE21; by 600 nm diameter HE21 has appeared.
        let spec = FiberSpec::silica_air(0.48e-6).unwrap();
        let modes = enumerate_guided_modes(&spec, 0.637e-6, 2).unwrap();
        let labels: Vec<String> = modes.iter().map(|m| m.label()).collect();
        assert_eq!(labels, ["HE11", "TE01", "TM01"]);

        let spec = FiberSpec::silica_air(0.60e-6).unwrap();
        let modes = enumerate_guided_modes(&spec, 0.637e-6, 2).unwrap();
        let labels: Vec<String> = modes.iter().map(|m| m.label()).collect();
        assert_eq!(labels, ["HE11", "TE01", "TM01", "HE21"]);
    }

    #[test]
    fn characteristic_residual_is_tiny_at_roots() {
        let spec = FiberSpec::silica_air(0.60e-6).unwrap();
        let solver = Solver::new(&spec, 0.637e-6).unwrap();
        for (family, nu) in [
            (ModeFamily::He, 1u32),
            (ModeFamily::Te, 0),
            (ModeFamily::Tm, 0),
            (ModeFamily::He, 2),
        ] {
            for root in solver.family_roots(family, nu) {
                let p = solver.point_data(root, nu as usize + 1);
                let res = solver.characteristic(family, nu, root, &p).abs();
                assert!(res < 1e-12, "{family}{nu} residual {res:e}");
            }
        }
    }

    #[test]
    fn solved_modes_carry_unit_power() {
        let spec = FiberSpec::silica_air(0.60e-6).unwrap();
        for mode in enumerate_guided_modes(&spec, 0.637e-6, 2).unwrap() {
            close(mode.power_flux(), 1.0, 1e-10);
        }
    }

    #[test]
    fn surface_fields_match_reference() {
        // Independently computed surface profile of HE11 for a 450 nm fiber
        // at 700 nm, quoted unnormalized with a = 1 and power 2.515801...;
        // the solver returns the power-normalized versions.
        let spec = FiberSpec::silica_air(0.45e-6).unwrap();
        let mode = solve_fundamental(&spec, 0.70e-6).unwrap();
        let scale = 1.0 / 2.515801445881378f64.sqrt();
        let p_out = mode.radial_profile(1.0 + 1e-12);
        close(p_out.e_r, 0.9591532331900072 * scale, 1e-9);
        close(p_out.e_phi, -0.521356958301828 * scale, 1e-9);
        close(p_out.e_z, 0.5789368317164747 * scale, 1e-9);
        close(p_out.h_r, 0.9015511715474076 * scale, 1e-9);
        close(p_out.h_phi, 0.5760112076815169 * scale, 1e-9);
        close(p_out.h_z, 0.5650875193754032 * scale, 1e-9);
    }

    #[test]
    fn tangential_fields_are_continuous_and_er_jumps() {
        let spec = FiberSpec::silica_air(0.45e-6).unwrap();
        let mode = solve_fundamental(&spec, 0.70e-6).unwrap();
        let pin = mode.radial_profile(1.0 - 1e-11);
        let pout = mode.radial_profile(1.0 + 1e-11);
        for (a, b) in [
            (pin.e_phi, pout.e_phi),
            (pin.e_z, pout.e_z),
            (pin.h_r, pout.h_r),
            (pin.h_phi, pout.h_phi),
            (pin.h_z, pout.h_z),
        ] {
            assert!((a - b).abs() < 1e-8 * a.abs().max(1e-3), "{a} vs {b}");
        }
        // Normal D is continuous, so Er jumps by the index ratio squared.
        let ratio = pin.e_r / pout.e_r;
        assert!((ratio - mode.surface_er_ratio()).abs() < 1e-8);
    }

    #[test]
    fn cutoff_diameter_reference() {
        let d = second_mode_cutoff_diameter(0.637e-6, &IndexModel::FusedSilica, 1.0).unwrap();
        close(d, 0.4602253292170314e-6, 1e-12);
    }

    #[test]
    fn field_point_assembles_azimuthal_factors() {
        let spec = FiberSpec::silica_air(0.45e-6).unwrap();
        let mode = solve_fundamental(&spec, 0.70e-6).unwrap();
        let r = 0.9 * mode.radius();
        let p = mode.radial_profile(0.9);
        let f = mode.field(r, 0.0);
        // At phi = 0 the sin-type components vanish.
        assert!((f.e[0].im - p.e_r).abs() < 1e-12);
        assert_eq!(f.e[1].im, 0.0);
        assert!((f.e[2].re - p.e_z).abs() < 1e-12);
        assert_eq!(f.h[0].im, 0.0);
        assert!((f.h[1].im - p.h_phi).abs() < 1e-12);
        assert_eq!(f.h[2].re, 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        // The guidance problem only depends on d/lambda for fixed indices,
        // so a joint rescale of both must not move the effective index.
        #[test]
        fn effective_index_is_scale_invariant(
            d_um in 0.35f64..1.0,
            scale in 0.5f64..3.0,
        ) {
            let lam = 0.637e-6;
            let core = IndexModel::Fixed(1.45);
            let spec1 = FiberSpec::new(d_um * 1e-6, core, 1.0).unwrap();
            let spec2 = FiberSpec::new(d_um * 1e-6 * scale, core, 1.0).unwrap();
            let m1 = solve_fundamental(&spec1, lam).unwrap();
            let m2 = solve_fundamental(&spec2, lam * scale).unwrap();
            prop_assert!((m1.n_eff - m2.n_eff).abs() < 1e-9);
        }
    }
}
