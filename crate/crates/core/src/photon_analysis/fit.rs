//! Curve fits for the measurement chain: lifetime decays, saturation
//! curves, polarization modulation, and the three-level g2 shape.
//!
//! All nonlinear fits run through one damped least-squares engine that
//! interpolates between gradient descent and Gauss-Newton steps. Positive
//! parameters (amplitudes, time constants, powers) are fitted on a log
//! scale so the search space never leaves the physical domain, and each
//! public fit restarts from a small set of heuristic initializations and
//! keeps the best converged result. The cosine fit is linear in disguise
//! and is solved exactly instead.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::Serialize;

use super::{DecayHistogram, G2Curve};
use crate::error::{CoreError, Result};

/// Bi-exponential decay fit, `amp_fast*exp(-t/tau_fast) +
/// amp_slow*exp(-t/tau_slow) + offset`, with components ordered so that
/// `tau_slow > tau_fast`.
#[derive(Debug, Clone, Serialize)]
pub struct LifetimeFit {
    pub amp_fast: f64,
    pub tau_fast: f64,
    pub amp_slow: f64,
    pub tau_slow: f64,
    pub offset: f64,
    pub sigma_amp_fast: f64,
    pub sigma_tau_fast: f64,
    pub sigma_amp_slow: f64,
    pub sigma_tau_slow: f64,
    pub sigma_offset: f64,
    /// True when the data support only one exponential. The fast fields
    /// are zero in that case and the component lives in the slow slots.
    pub single_component: bool,
}

impl LifetimeFit {
    /// Model value at time `t` (same units as the fitted bin centers).
    pub fn evaluate(&self, t: f64) -> f64 {
        let fast = if self.single_component {
            0.0
        } else {
            self.amp_fast * (-t / self.tau_fast).exp()
        };
        fast + self.amp_slow * (-t / self.tau_slow).exp() + self.offset
    }
}

/// Saturation curve fit, `max_rate*P/(P + saturation_power) +
/// background_slope*P`.
#[derive(Debug, Clone, Serialize)]
pub struct SaturationFit {
    pub max_rate: f64,
    pub saturation_power: f64,
    /// Linear background slope, clamped to zero when the fit prefers a
    /// small negative value; the uncertainty keeps the unclamped scale.
    pub background_slope: f64,
    pub sigma_max_rate: f64,
    pub sigma_saturation_power: f64,
    pub sigma_background_slope: f64,
}

impl SaturationFit {
    pub fn evaluate(&self, power: f64) -> f64 {
        self.max_rate * power / (power + self.saturation_power) + self.background_slope * power
    }
}

/// Polarization modulation fit, `mean + amplitude*cos(2*(theta - phase))`.
#[derive(Debug, Clone, Serialize)]
pub struct PolarizationFit {
    pub mean: f64,
    pub amplitude: f64,
    /// Angle of maximum response, reported in (-pi/2, pi/2].
    pub phase: f64,
    pub sigma_mean: f64,
    pub sigma_amplitude: f64,
    pub sigma_phase: f64,
}

impl PolarizationFit {
    pub fn evaluate(&self, theta: f64) -> f64 {
        self.mean + self.amplitude * (2.0 * (theta - self.phase)).cos()
    }

    /// Ratio of maximum to minimum response, `(mean + amplitude) /
    /// (mean - amplitude)`. Undefined when the modulation reaches the
    /// mean level and the minimum touches zero.
    pub fn suppression(&self) -> Result<f64> {
        if self.mean <= self.amplitude {
            return Err(CoreError::fit(format!(
                "modulation amplitude {:.3e} reaches the mean level {:.3e}; suppression factor undefined",
                self.amplitude, self.mean
            )));
        }
        Ok((self.mean + self.amplitude) / (self.mean - self.amplitude))
    }
}

/// Antibunching-with-shoulder fit, `1 - (1+shoulder)*exp(-|tau|/tau1) +
/// shoulder*exp(-|tau|/tau2)`. The form is 0 at zero delay and tends to 1
/// in the wings; `shoulder > 0` produces bunching above 1.
#[derive(Debug, Clone, Serialize)]
pub struct ThreeLevelG2Fit {
    /// Antibunching time constant, seconds.
    pub tau1: f64,
    /// Shoulder (shelving) time constant, seconds; zero on the two-level
    /// branch.
    pub tau2: f64,
    /// Wing overshoot parameter `a`; zero on the two-level branch.
    pub shoulder: f64,
    pub sigma_tau1: f64,
    pub sigma_tau2: f64,
    pub sigma_shoulder: f64,
    /// True when the shoulder is indistinguishable from zero and the
    /// curve was refit as a plain two-level dip.
    pub two_level: bool,
}

impl ThreeLevelG2Fit {
    pub fn evaluate(&self, tau: f64) -> f64 {
        let t = tau.abs();
        if self.two_level {
            1.0 - (-t / self.tau1).exp()
        } else {
            1.0 - (1.0 + self.shoulder) * (-t / self.tau1).exp()
                + self.shoulder * (-t / self.tau2).exp()
        }
    }
}

/// How the engine sees one parameter.
#[derive(Clone, Copy)]
enum Transform {
    /// Fitted as-is.
    Free,
    /// Fitted as its natural log, which keeps the parameter positive.
    LogPositive,
}

impl Transform {
    fn internal(self, natural: f64) -> f64 {
        match self {
            Transform::Free => natural,
            Transform::LogPositive => natural.ln(),
        }
    }

    fn natural(self, internal: f64) -> f64 {
        match self {
            Transform::Free => internal,
            Transform::LogPositive => internal.exp(),
        }
    }

    /// d(natural)/d(internal) at the solution, for mapping uncertainties
    /// back to natural units.
    fn scale(self, natural: f64) -> f64 {
        match self {
            Transform::Free => 1.0,
            Transform::LogPositive => natural,
        }
    }
}

/// A converged fit in natural parameter units.
struct Fitted {
    params: Vec<f64>,
    sigma: Vec<f64>,
    chi2: f64,
}

/// Damped least squares on transformed coordinates.
///
/// `weights` are 1/variance per point; when absent the fit is unweighted
/// and the covariance is scaled by the reduced chi-square instead.
/// Returns `None` when the start is invalid or the iteration fails to
/// settle, so callers can move on to the next initialization.
fn damped_least_squares(
    x: &[f64],
    y: &[f64],
    weights: Option<&[f64]>,
    transforms: &[Transform],
    start: &[f64],
    model: &dyn Fn(&[f64], f64) -> f64,
) -> Option<Fitted> {
    let n = x.len();
    let m = transforms.len();
    debug_assert_eq!(start.len(), m);
    if n <= m {
        return None;
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);

    let to_natural = |theta: &[f64]| -> Vec<f64> {
        theta.iter().zip(transforms).map(|(&t, tr)| tr.natural(t)).collect()
    };
    let chi2_of = |theta: &[f64]| -> f64 {
        let p = to_natural(theta);
        (0..n)
            .map(|i| {
                let r = y[i] - model(&p, x[i]);
                weight(i) * r * r
            })
            .sum()
    };
    // Weighted normal matrix J'WJ and gradient J'Wr at a point, with the
    // Jacobian taken by central differences on the internal coordinates.
    let linearize = |theta: &[f64]| -> (DMatrix<f64>, DVector<f64>) {
        let p = to_natural(theta);
        let mut jac = DMatrix::zeros(n, m);
        for k in 0..m {
            let step = 1e-6 * (1.0 + theta[k].abs());
            let mut plus = theta.to_vec();
            plus[k] += step;
            let mut minus = theta.to_vec();
            minus[k] -= step;
            let (pp, pm) = (to_natural(&plus), to_natural(&minus));
            for i in 0..n {
                jac[(i, k)] = (model(&pp, x[i]) - model(&pm, x[i])) / (2.0 * step);
            }
        }
        let mut a = DMatrix::zeros(m, m);
        let mut g = DVector::zeros(m);
        for i in 0..n {
            let w = weight(i);
            let r = y[i] - model(&p, x[i]);
            for k in 0..m {
                g[k] += w * jac[(i, k)] * r;
                for l in k..m {
                    a[(k, l)] += w * jac[(i, k)] * jac[(i, l)];
                }
            }
        }
        for k in 0..m {
            for l in 0..k {
                a[(k, l)] = a[(l, k)];
            }
        }
        (a, g)
    };

    let mut theta: Vec<f64> =
        start.iter().zip(transforms).map(|(&p, tr)| tr.internal(p)).collect();
    if theta.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut chi2 = chi2_of(&theta);
    if !chi2.is_finite() {
        return None;
    }

    let mut lambda = 1e-3;
    let mut converged = false;
    for _ in 0..200 {
        let (a, g) = linearize(&theta);
        let mut accepted = false;
        // Raise the damping until a step actually lowers chi-square.
        for _ in 0..60 {
            let mut damped = a.clone();
            for k in 0..m {
                let d = a[(k, k)];
                damped[(k, k)] = d + lambda * if d > 0.0 { d } else { 1.0 };
            }
            let delta = match damped.lu().solve(&g) {
                Some(d) if d.iter().all(|v| v.is_finite()) => d,
                _ => {
                    lambda *= 3.0;
                    continue;
                }
            };
            let trial: Vec<f64> =
                theta.iter().zip(delta.iter()).map(|(t, d)| t + d).collect();
            let trial_chi2 = chi2_of(&trial);
            if trial_chi2.is_finite() && trial_chi2 <= chi2 {
                let drop = chi2 - trial_chi2;
                theta = trial;
                chi2 = trial_chi2;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if drop <= 1e-12 * chi2.max(1e-300) {
                    converged = true;
                }
                break;
            }
            lambda *= 3.0;
            if lambda > 1e12 {
                break;
            }
        }
        // No downhill step even under heavy damping: numerically at a
        // stationary point.
        if !accepted {
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return None;
    }

    let params = to_natural(&theta);
    let (a, _) = linearize(&theta);
    let scale = match weights {
        Some(_) => 1.0,
        None => chi2 / (n - m) as f64,
    };
    // Covariance from the pseudo-inverse of the information matrix:
    // directions at roundoff level carry no information, and a parameter
    // participating in one is unconstrained by the data, so it reports an
    // infinite sigma (never NaN, and never zero, which would claim
    // certainty). Parameters the data does pin keep their finite errors.
    let svd = a.svd(true, false);
    let u = svd.u.as_ref().expect("U was requested");
    let s_max = svd.singular_values.iter().copied().fold(0.0f64, f64::max);
    let cutoff = s_max * m as f64 * f64::EPSILON.sqrt();
    let sigma = (0..m)
        .map(|k| {
            let mut var = 0.0f64;
            let mut unconstrained = false;
            for j in 0..m {
                let weight_kj = u[(k, j)] * u[(k, j)];
                if svd.singular_values[j] > cutoff {
                    var += weight_kj / svd.singular_values[j];
                } else if weight_kj > 1e-10 {
                    unconstrained = true;
                }
            }
            let var = var * scale;
            if unconstrained || !var.is_finite() {
                f64::INFINITY
            } else {
                var.max(0.0).sqrt() * transforms[k].scale(params[k]).abs()
            }
        })
        .collect();
    Some(Fitted { params, sigma, chi2 })
}

/// Runs the engine from each start and keeps the best chi-square.
fn multi_start(
    x: &[f64],
    y: &[f64],
    weights: Option<&[f64]>,
    transforms: &[Transform],
    starts: &[Vec<f64>],
    model: &dyn Fn(&[f64], f64) -> f64,
    what: &str,
) -> Result<Fitted> {
    let mut best: Option<Fitted> = None;
    for start in starts {
        if let Some(fit) = damped_least_squares(x, y, weights, transforms, start, model) {
            if best.as_ref().is_none_or(|b| fit.chi2 < b.chi2) {
                best = Some(fit);
            }
        }
    }
    best.ok_or_else(|| {
        CoreError::fit(format!("{what} did not converge from any of {} starts", starts.len()))
    })
}

/// Fits `amp_fast*exp(-t/tau_fast) + amp_slow*exp(-t/tau_slow) + offset`
/// to a decay histogram with Poisson weights (variance `max(count, 1)`).
///
/// When the two components collapse onto each other, or one amplitude is
/// negligible or statistically insignificant, the curve is refit as a
/// single exponential and reported with `single_component` set.
/// One reweighting pass for count data: replace observed-count weights
/// with weights from the fitted curve and refit from the solution.
/// Observed-count weights overweight downward fluctuations, which biases
/// decay times low by a fraction of a percent at typical counts; weights
/// taken from the model remove that bias without a full likelihood fit.
fn poisson_reweighted(
    x: &[f64],
    y: &[f64],
    transforms: &[Transform],
    fitted: Fitted,
    model: &dyn Fn(&[f64], f64) -> f64,
) -> Fitted {
    let weights: Vec<f64> = x.iter().map(|&t| 1.0 / model(&fitted.params, t).max(1.0)).collect();
    damped_least_squares(x, y, Some(&weights), transforms, &fitted.params, model)
        .unwrap_or(fitted)
}

pub fn fit_lifetime(hist: &DecayHistogram) -> Result<LifetimeFit> {
    let nonzero = hist.counts.iter().filter(|&&c| c > 0).count();
    if nonzero < 5 {
        return Err(CoreError::fit(format!(
            "lifetime fit needs at least 5 nonzero bins, found {nonzero}"
        )));
    }
    let centers = hist.bin_centers();
    let y: Vec<f64> = hist.counts.iter().map(|&c| c as f64).collect();
    let weights: Vec<f64> = y.iter().map(|&v| 1.0 / v.max(1.0)).collect();
    let span = *centers.last().expect("nonempty histogram");

    let peak = y.iter().cloned().fold(0.0, f64::max);
    let tail = &y[(y.len() * 9) / 10..];
    let offset0 = tail.iter().sum::<f64>() / tail.len().max(1) as f64;
    let pulse = (peak - offset0).max(1e-3 * peak).max(1e-9);

    let mut starts = Vec::new();
    for &tau_f in &[span / 50.0, span / 20.0] {
        for &tau_s in &[span / 8.0, span / 3.0] {
            for &split in &[0.8, 0.5] {
                starts.push(vec![split * pulse, tau_f, (1.0 - split) * pulse, tau_s, offset0]);
            }
        }
    }
    let transforms = [
        Transform::LogPositive,
        Transform::LogPositive,
        Transform::LogPositive,
        Transform::LogPositive,
        Transform::Free,
    ];
    let model = |p: &[f64], t: f64| p[0] * (-t / p[1]).exp() + p[2] * (-t / p[3]).exp() + p[4];
    let fitted = multi_start(
        &centers,
        &y,
        Some(&weights),
        &transforms,
        &starts,
        &model,
        "bi-exponential lifetime fit",
    )?;
    let fitted = poisson_reweighted(&centers, &y, &transforms, fitted, &model);

    // (amp, tau, sigma_amp, sigma_tau) per component, ordered by tau.
    let mut fast = (fitted.params[0], fitted.params[1], fitted.sigma[0], fitted.sigma[1]);
    let mut slow = (fitted.params[2], fitted.params[3], fitted.sigma[2], fitted.sigma[3]);
    if fast.1 > slow.1 {
        std::mem::swap(&mut fast, &mut slow);
    }

    let negligible = fast.0 < 0.01 * slow.0 || slow.0 < 0.01 * fast.0;
    let insignificant = fast.0 < 3.0 * fast.2 || slow.0 < 3.0 * slow.2;
    let collapsed = slow.1 - fast.1 < 0.05 * slow.1;
    if negligible || insignificant || collapsed {
        let tau0 = if fast.0 > slow.0 { fast.1 } else { slow.1 };
        let single_starts = vec![
            vec![pulse, tau0, offset0],
            vec![pulse, span / 20.0, offset0],
            vec![pulse, span / 5.0, offset0],
            vec![pulse, span / 2.0, offset0],
        ];
        let single_transforms =
            [Transform::LogPositive, Transform::LogPositive, Transform::Free];
        let single_model = |p: &[f64], t: f64| p[0] * (-t / p[1]).exp() + p[2];
        let single = multi_start(
            &centers,
            &y,
            Some(&weights),
            &single_transforms,
            &single_starts,
            &single_model,
            "single-exponential lifetime fit",
        )?;
        let single =
            poisson_reweighted(&centers, &y, &single_transforms, single, &single_model);
        return Ok(LifetimeFit {
            amp_fast: 0.0,
            tau_fast: 0.0,
            amp_slow: single.params[0],
            tau_slow: single.params[1],
            offset: single.params[2],
            sigma_amp_fast: 0.0,
            sigma_tau_fast: 0.0,
            sigma_amp_slow: single.sigma[0],
            sigma_tau_slow: single.sigma[1],
            sigma_offset: single.sigma[2],
            single_component: true,
        });
    }

    Ok(LifetimeFit {
        amp_fast: fast.0,
        tau_fast: fast.1,
        amp_slow: slow.0,
        tau_slow: slow.1,
        offset: fitted.params[4],
        sigma_amp_fast: fast.2,
        sigma_tau_fast: fast.3,
        sigma_amp_slow: slow.2,
        sigma_tau_slow: slow.3,
        sigma_offset: fitted.sigma[4],
        single_component: false,
    })
}

/// Fits `max_rate*P/(P + saturation_power) + background_slope*P` to
/// (power, rate) points.
///
/// Needs at least four points and at least one power above the estimated
/// saturation power (from a straight line through the (P, P/rate)
/// points); below that the plateau is unconstrained.
pub fn fit_saturation(points: &[(f64, f64)]) -> Result<SaturationFit> {
    if points.len() < 4 {
        return Err(CoreError::fit(format!(
            "saturation fit needs at least 4 points, got {}",
            points.len()
        )));
    }
    for &(power, rate) in points {
        if !(power.is_finite() && power >= 0.0 && rate.is_finite()) {
            return Err(CoreError::domain(format!(
                "saturation point ({power}, {rate}) is not a nonnegative power with a finite rate"
            )));
        }
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let max_rate = sorted.iter().map(|p| p.1).fold(f64::MIN, f64::max);
    if max_rate <= 0.0 {
        return Err(CoreError::fit("saturation fit needs positive rates".to_string()));
    }
    let top_power = sorted.last().expect("nonempty").0;

    // For the pure saturating model P/rate is linear in P with slope
    // 1/max_rate and intercept P_sat/max_rate, so a line through the
    // (P, P/rate) points estimates P_sat. Rates that never bend give a
    // flat or negative slope and an unbounded estimate.
    let (mut sn, mut sx, mut sy, mut sxx, mut sxy) = (0.0f64, 0.0, 0.0, 0.0, 0.0);
    for &(power, rate) in &sorted {
        if rate > 0.0 {
            let inverse = power / rate;
            sn += 1.0;
            sx += power;
            sy += inverse;
            sxx += power * power;
            sxy += power * inverse;
        }
    }
    let slope = (sn * sxy - sx * sy) / (sn * sxx - sx * sx);
    let estimated = (sy - slope * sx) / sn / slope;
    if !(slope > 0.0) || !(estimated < top_power) {
        return Err(CoreError::fit(format!(
            "no data above the estimated saturation power; powers reach {top_power:.3e} W and the plateau is unconstrained"
        )));
    }
    let half_power = estimated.max(0.25 * top_power);

    let mut starts = Vec::new();
    for &rate in &[max_rate, 2.0 * max_rate] {
        for &power in &[0.5 * half_power, half_power, 2.0 * half_power] {
            starts.push(vec![rate, power, 0.0]);
        }
    }
    starts.push(vec![1.5 * max_rate, half_power, 0.0]);
    starts.push(vec![max_rate, half_power, 0.1 * max_rate / top_power]);

    let transforms = [Transform::LogPositive, Transform::LogPositive, Transform::Free];
    let model = |p: &[f64], x: f64| p[0] * x / (x + p[1]) + p[2] * x;
    let (x, y): (Vec<f64>, Vec<f64>) = sorted.iter().copied().unzip();
    let fitted =
        multi_start(&x, &y, None, &transforms, &starts, &model, "saturation fit")?;

    Ok(SaturationFit {
        max_rate: fitted.params[0],
        saturation_power: fitted.params[1],
        background_slope: fitted.params[2].max(0.0),
        sigma_max_rate: fitted.sigma[0],
        sigma_saturation_power: fitted.sigma[1],
        sigma_background_slope: fitted.sigma[2],
    })
}

/// Fits `mean + amplitude*cos(2*(theta - phase))` to (angle, rate) points.
///
/// The model is linear in `(mean, a*cos(2*phase), a*sin(2*phase))`, so the
/// fit is solved exactly by normal equations; amplitude and phase
/// uncertainties follow by error propagation.
pub fn fit_cosine(points: &[(f64, f64)]) -> Result<PolarizationFit> {
    let mut folded: Vec<f64> =
        points.iter().map(|p| p.0.rem_euclid(std::f64::consts::PI)).collect();
    folded.sort_by(f64::total_cmp);
    let distinct = 1 + folded.windows(2).filter(|w| w[1] - w[0] > 1e-9).count();
    if points.len() < 4 || distinct < 4 {
        return Err(CoreError::fit(format!(
            "cosine fit needs at least 4 distinct angles (mod pi), got {distinct}"
        )));
    }

    let mut xtx = Matrix3::zeros();
    let mut xty = Vector3::zeros();
    for &(theta, rate) in points {
        let row = Vector3::new(1.0, (2.0 * theta).cos(), (2.0 * theta).sin());
        xtx += row * row.transpose();
        xty += row * rate;
    }
    let degenerate = || CoreError::fit("cosine fit angles are degenerate".to_string());
    let beta = xtx.lu().solve(&xty).ok_or_else(degenerate)?;
    let residual_ss: f64 = points
        .iter()
        .map(|&(theta, rate)| {
            let row = Vector3::new(1.0, (2.0 * theta).cos(), (2.0 * theta).sin());
            (rate - row.dot(&beta)).powi(2)
        })
        .sum();
    let variance = residual_ss / (points.len() - 3) as f64;
    let cov = xtx.try_inverse().ok_or_else(degenerate)? * variance;

    let (mean, alpha, gamma) = (beta[0], beta[1], beta[2]);
    let amplitude = alpha.hypot(gamma);
    let (phase, sigma_amplitude, sigma_phase) = if amplitude > 0.0 {
        let grad_amp = Vector3::new(0.0, alpha / amplitude, gamma / amplitude);
        let grad_phase = Vector3::new(
            0.0,
            -gamma / (2.0 * amplitude * amplitude),
            alpha / (2.0 * amplitude * amplitude),
        );
        (
            gamma.atan2(alpha) / 2.0,
            grad_amp.dot(&(cov * grad_amp)).max(0.0).sqrt(),
            grad_phase.dot(&(cov * grad_phase)).max(0.0).sqrt(),
        )
    } else {
        (0.0, cov[(1, 1)].max(cov[(2, 2)]).max(0.0).sqrt(), f64::INFINITY)
    };

    Ok(PolarizationFit {
        mean,
        amplitude,
        phase,
        sigma_mean: cov[(0, 0)].max(0.0).sqrt(),
        sigma_amplitude,
        sigma_phase,
    })
}

/// Fits `1 - (1+a)*exp(-|tau|/tau1) + a*exp(-|tau|/tau2)` to a g2 curve.
///
/// Bins are weighted by their counting errors when the curve carries
/// them. The curve must show both the dip (some g2 below 0.5) and the
/// wings (some g2 at or above 0.9), otherwise the time constants are not
/// identifiable. A shoulder indistinguishable from zero triggers a
/// two-level refit with `a = 0`.
pub fn fit_g2_three_level(curve: &G2Curve) -> Result<ThreeLevelG2Fit> {
    let n = curve.tau.len();
    if n < 8 || curve.g2.len() != n {
        return Err(CoreError::fit(format!(
            "g2 fit needs at least 8 bins with matching delays, got {n}"
        )));
    }
    let g_min = curve.g2.iter().cloned().fold(f64::INFINITY, f64::min);
    let g_max = curve.g2.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(g_min < 0.5) {
        return Err(CoreError::fit(format!(
            "no antibunching dip in the curve (minimum g2 is {g_min:.3})"
        )));
    }
    if !(g_max >= 0.9) {
        return Err(CoreError::fit(format!(
            "curve never recovers toward its wings (maximum g2 is {g_max:.3})"
        )));
    }
    let weights: Option<Vec<f64>> =
        if curve.sigma.len() == n && curve.sigma.iter().all(|&s| s > 0.0) {
            Some(curve.sigma.iter().map(|s| 1.0 / (s * s)).collect())
        } else {
            None
        };

    let span = curve.tau.iter().fold(0.0f64, |acc, t| acc.max(t.abs()));
    // Dip width estimate: smallest |tau| where the curve has climbed back
    // to 0.5, which is tau1*ln(2) for a pure two-level dip.
    let mut by_delay: Vec<(f64, f64)> =
        curve.tau.iter().zip(&curve.g2).map(|(&t, &g)| (t.abs(), g)).collect();
    by_delay.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half_crossing = by_delay
        .iter()
        .find(|p| p.1 >= 0.5)
        .map(|p| p.0)
        .unwrap_or(span / 10.0)
        .max(span / 200.0);
    let tau1_0 = half_crossing / std::f64::consts::LN_2;
    let shoulder0 = (g_max - 1.0).max(0.05);

    let mut starts = Vec::new();
    for &t1 in &[tau1_0, 2.0 * tau1_0] {
        for &t2 in &[5.0 * tau1_0, 25.0 * tau1_0] {
            for &a in &[shoulder0, 0.02] {
                starts.push(vec![t1, t2, a]);
            }
        }
    }
    let transforms = [Transform::LogPositive, Transform::LogPositive, Transform::Free];
    let model = |p: &[f64], tau: f64| {
        let t = tau.abs();
        1.0 - (1.0 + p[2]) * (-t / p[0]).exp() + p[2] * (-t / p[1]).exp()
    };
    let fitted = multi_start(
        &curve.tau,
        &curve.g2,
        weights.as_deref(),
        &transforms,
        &starts,
        &model,
        "three-level g2 fit",
    )?;

    if fitted.params[2] <= 1e-3 {
        // The shoulder carries no signal, so tau2 is unidentifiable;
        // refit the plain dip.
        let two_starts =
            vec![vec![tau1_0], vec![fitted.params[0]], vec![2.0 * tau1_0]];
        let two_model = |p: &[f64], tau: f64| 1.0 - (-tau.abs() / p[0]).exp();
        let refit = multi_start(
            &curve.tau,
            &curve.g2,
            weights.as_deref(),
            &[Transform::LogPositive],
            &two_starts,
            &two_model,
            "two-level g2 fit",
        )?;
        return Ok(ThreeLevelG2Fit {
            tau1: refit.params[0],
            tau2: 0.0,
            shoulder: 0.0,
            sigma_tau1: refit.sigma[0],
            sigma_tau2: 0.0,
            sigma_shoulder: 0.0,
            two_level: true,
        });
    }

    Ok(ThreeLevelG2Fit {
        tau1: fitted.params[0],
        tau2: fitted.params[1],
        shoulder: fitted.params[2],
        sigma_tau1: fitted.sigma[0],
        sigma_tau2: fitted.sigma[1],
        sigma_shoulder: fitted.sigma[2],
        two_level: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emitter_sim::{analytic_g2, ThreeLevelModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal, Poisson};

    // The arguments mirror the decay model terms in order.
    #[allow(clippy::too_many_arguments)]
    fn biexp_histogram(
        bins: usize,
        bin_width: f64,
        amp_fast: f64,
        tau_fast: f64,
        amp_slow: f64,
        tau_slow: f64,
        offset: f64,
        rng: Option<&mut ChaCha8Rng>,
    ) -> DecayHistogram {
        let means: Vec<f64> = (0..bins)
            .map(|i| {
                let t = (i as f64 + 0.5) * bin_width;
                amp_fast * (-t / tau_fast).exp() + amp_slow * (-t / tau_slow).exp() + offset
            })
            .collect();
        let counts = match rng {
            Some(rng) => means
                .iter()
                .map(|&m| if m > 0.0 { Poisson::new(m).unwrap().sample(rng) as u64 } else { 0 })
                .collect(),
            None => means.iter().map(|&m| m.round() as u64).collect(),
        };
        DecayHistogram { bin_width, counts }
    }

    #[test]
    fn dead_parameters_get_infinite_sigma_not_nan() {
        // The model ignores its second parameter entirely, so the
        // information matrix is singular: the fit must still converge on
        // the live parameter and report the dead one as unconstrained.
        let x: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| 3.0 * v).collect();
        let fitted = damped_least_squares(
            &x,
            &y,
            None,
            &[Transform::Free, Transform::Free],
            &[1.0, 1.0],
            &|p, v| p[0] * v,
        )
        .unwrap();
        assert!((fitted.params[0] - 3.0).abs() < 1e-9);
        assert!(fitted.sigma.iter().all(|s| !s.is_nan()));
        assert_eq!(fitted.sigma[1], f64::INFINITY);
    }

    #[test]
    fn noise_free_biexponential_is_recovered() {
        // Amplitudes large enough that rounding to integer counts is a
        // negligible perturbation.
        let hist =
            biexp_histogram(400, 0.5e-9, 5e12, 2e-9, 1e12, 21e-9, 1e10, None);
        let fit = fit_lifetime(&hist).unwrap();
        assert!(!fit.single_component);
        assert!((fit.tau_fast / 2e-9 - 1.0).abs() < 1e-6, "tau_fast {}", fit.tau_fast);
        assert!((fit.tau_slow / 21e-9 - 1.0).abs() < 1e-6, "tau_slow {}", fit.tau_slow);
        assert!((fit.amp_fast / 5e12 - 1.0).abs() < 1e-6);
        assert!((fit.amp_slow / 1e12 - 1.0).abs() < 1e-6);
        assert!((fit.offset / 1e10 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn poisson_lifetime_data_recovers_the_slow_component_within_a_nanosecond() {
        // Roughly one million counts split 5:1 between a 2 ns and a 21 ns
        // component, the regime where the slow tail identifies the
        // emitter against the fast fluorescence.
        for seed in [11, 12] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let hist = biexp_histogram(
                750,
                0.2e-9,
                32258.0,
                2e-9,
                6452.0,
                21e-9,
                5.0,
                Some(&mut rng),
            );
            let fit = fit_lifetime(&hist).unwrap();
            assert!(!fit.single_component, "seed {seed}");
            assert!(
                (fit.tau_slow - 21e-9).abs() < 1e-9,
                "seed {seed}: tau_slow {}",
                fit.tau_slow
            );
            assert!(fit.sigma_tau_slow > 0.0 && fit.sigma_tau_slow < 1e-9, "seed {seed}");
            let ratio = fit.amp_fast / fit.amp_slow;
            assert!((ratio - 5.0).abs() < 0.5, "seed {seed}: amplitude ratio {ratio}");
        }
    }

    #[test]
    fn high_count_decays_come_back_without_the_short_bias() {
        // Weighting by observed counts alone pulls exponential decay
        // times about half a percent short at these statistics; the
        // model-weight refinement pass must keep the estimate inside
        // counting noise (0.07% here), so gate at 0.3%.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let hist = biexp_histogram(600, 0.5e-9, 0.0, 1e-9, 5e4, 19e-9, 10.0, Some(&mut rng));
        let fit = fit_lifetime(&hist).unwrap();
        assert!(fit.single_component);
        assert!(
            (fit.tau_slow / 19e-9 - 1.0).abs() < 3e-3,
            "tau {} is biased",
            fit.tau_slow
        );
    }

    #[test]
    fn single_exponential_data_is_reported_as_one_component() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let hist =
            biexp_histogram(600, 0.25e-9, 0.0, 1e-9, 8000.0, 21e-9, 3.0, Some(&mut rng));
        let fit = fit_lifetime(&hist).unwrap();
        assert!(fit.single_component);
        assert_eq!(fit.amp_fast, 0.0);
        assert_eq!(fit.tau_fast, 0.0);
        assert!((fit.tau_slow / 21e-9 - 1.0).abs() < 0.02, "tau_slow {}", fit.tau_slow);
    }

    #[test]
    fn broadened_lifetime_draw_is_recovered_within_its_uncertainty() {
        // Emitters from an inhomogeneous batch, 18 ns mean and 10 ns full
        // width: draw one lifetime and make sure the fit error bar covers
        // the truth.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let fwhm_to_sigma = 10e-9 / (8.0 * std::f64::consts::LN_2).sqrt();
        let tau_slow: f64 = Normal::new(18e-9, fwhm_to_sigma).unwrap().sample(&mut rng);
        assert!(tau_slow > 5e-9, "draw landed in the unphysical tail");
        let hist = biexp_histogram(
            750,
            0.2e-9,
            30000.0,
            2e-9,
            6000.0,
            tau_slow,
            4.0,
            Some(&mut rng),
        );
        let fit = fit_lifetime(&hist).unwrap();
        assert!(!fit.single_component);
        assert!(
            (fit.tau_slow - tau_slow).abs() < 3.0 * fit.sigma_tau_slow,
            "drew {tau_slow}, fitted {} +- {}",
            fit.tau_slow,
            fit.sigma_tau_slow
        );
    }

    #[test]
    fn too_few_nonzero_bins_is_rejected() {
        let hist = DecayHistogram { bin_width: 1e-9, counts: vec![5, 0, 3, 0, 2, 0, 1] };
        let err = fit_lifetime(&hist).unwrap_err();
        assert!(err.to_string().contains("5 nonzero bins"), "{err}");
    }

    #[test]
    fn noise_free_saturation_curve_is_recovered() {
        let (max_rate, p_sat, slope) = (2.5e5, 5.2e-4, 1e7);
        let points: Vec<(f64, f64)> = (1..=12)
            .map(|i| {
                let p = i as f64 * 0.5 * p_sat;
                (p, max_rate * p / (p + p_sat) + slope * p)
            })
            .collect();
        let fit = fit_saturation(&points).unwrap();
        assert!((fit.max_rate / max_rate - 1.0).abs() < 1e-6, "{}", fit.max_rate);
        assert!((fit.saturation_power / p_sat - 1.0).abs() < 1e-6);
        assert!((fit.background_slope / slope - 1.0).abs() < 1e-6);
    }

    #[test]
    fn noisy_saturation_data_recovers_the_saturation_power_within_5_percent() {
        // Detected-rate sweep over 0.1 to 5 times the saturation power
        // with 1% multiplicative noise.
        let model = ThreeLevelModel::nv_defaults();
        let p_sat = model.p_sat();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let noise = Normal::new(1.0, 0.01).unwrap();
        let points: Vec<(f64, f64)> = (0..60)
            .map(|i| {
                let p = (0.1 + 4.9 * i as f64 / 59.0) * p_sat;
                let rate = crate::emitter_sim::saturation_rate(&model, p, 0.4).unwrap();
                (p, rate * noise.sample(&mut rng))
            })
            .collect();
        let fit = fit_saturation(&points).unwrap();
        assert!(
            (fit.saturation_power / p_sat - 1.0).abs() < 0.05,
            "P_sat {} vs {}",
            fit.saturation_power,
            p_sat
        );
        assert!(fit.sigma_saturation_power > 0.0);
    }

    #[test]
    fn zero_background_slope_is_consistent_with_zero() {
        let (max_rate, p_sat) = (1e5, 3e-4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(1.0, 0.01).unwrap();
        let points: Vec<(f64, f64)> = (1..=15)
            .map(|i| {
                let p = i as f64 * 0.4 * p_sat;
                (p, max_rate * p / (p + p_sat) * noise.sample(&mut rng))
            })
            .collect();
        let fit = fit_saturation(&points).unwrap();
        assert!(fit.background_slope >= 0.0);
        assert!(
            fit.background_slope <= 3.0 * fit.sigma_background_slope,
            "slope {} vs sigma {}",
            fit.background_slope,
            fit.sigma_background_slope
        );
    }

    #[test]
    fn saturation_data_without_plateau_coverage_is_rejected() {
        // Rates still climbing linearly: the half-max estimate sits at
        // the last point, so the plateau is unconstrained.
        let points: Vec<(f64, f64)> =
            (1..=6).map(|i| (i as f64 * 1e-5, i as f64 * 1e3)).collect();
        let err = fit_saturation(&points).unwrap_err();
        assert!(err.to_string().contains("saturation power"), "{err}");
    }

    #[test]
    fn exact_cosine_data_is_recovered_exactly() {
        let (mean, amplitude, phase) = (3000.0, 1000.0, 0.4);
        let points: Vec<(f64, f64)> = (0..13)
            .map(|i| {
                let theta = i as f64 * std::f64::consts::PI / 13.0;
                (theta, mean + amplitude * (2.0 * (theta - phase)).cos())
            })
            .collect();
        let fit = fit_cosine(&points).unwrap();
        assert!((fit.mean / mean - 1.0).abs() < 1e-9);
        assert!((fit.amplitude / amplitude - 1.0).abs() < 1e-9);
        assert!((fit.phase - phase).abs() < 1e-9);
    }

    #[test]
    fn cosine_fit_is_periodic_in_pi() {
        let points: Vec<(f64, f64)> = (0..9)
            .map(|i| {
                let theta = i as f64 * 0.35;
                (theta, 500.0 + 120.0 * (2.0 * (theta - 1.0)).cos())
            })
            .collect();
        let shifted: Vec<(f64, f64)> =
            points.iter().map(|&(t, r)| (t + std::f64::consts::PI, r)).collect();
        let a = fit_cosine(&points).unwrap();
        let b = fit_cosine(&shifted).unwrap();
        assert!((a.mean - b.mean).abs() < 1e-9 * a.mean);
        assert!((a.amplitude - b.amplitude).abs() < 1e-9 * a.amplitude);
        assert!((a.phase - b.phase).abs() < 1e-9);
    }

    #[test]
    fn suppression_factor_two_survives_one_percent_noise() {
        // (mean + a) / (mean - a) = 2 puts the modulation at a third of
        // the mean.
        let (mean, amplitude) = (3000.0, 1000.0);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let noise = Normal::new(1.0, 0.01).unwrap();
        let points: Vec<(f64, f64)> = (0..13)
            .map(|i| {
                let theta = i as f64 * std::f64::consts::PI / 13.0;
                let rate = mean + amplitude * (2.0 * (theta - 0.7)).cos();
                (theta, rate * noise.sample(&mut rng))
            })
            .collect();
        let fit = fit_cosine(&points).unwrap();
        let suppression = fit.suppression().unwrap();
        assert!((suppression - 2.0).abs() < 0.04, "suppression {suppression}");
    }

    #[test]
    fn suppression_is_undefined_when_modulation_reaches_the_mean() {
        let fit = PolarizationFit {
            mean: 800.0,
            amplitude: 900.0,
            phase: 0.0,
            sigma_mean: 1.0,
            sigma_amplitude: 1.0,
            sigma_phase: 0.01,
        };
        assert!(fit.suppression().is_err());
    }

    #[test]
    fn degenerate_angle_sets_are_rejected() {
        // Six points but only three distinct angles mod pi.
        let points = vec![
            (0.0, 10.0),
            (0.5, 12.0),
            (1.0, 9.0),
            (std::f64::consts::PI, 10.0),
            (0.5 + std::f64::consts::PI, 12.0),
            (1.0 - std::f64::consts::PI, 9.0),
        ];
        let err = fit_cosine(&points).unwrap_err();
        assert!(err.to_string().contains("distinct angles"), "{err}");
    }

    #[test]
    fn noise_free_three_level_curve_is_recovered() {
        let (tau1, tau2, a) = (12e-9, 150e-9, 0.4);
        let tau: Vec<f64> = (-128..128).map(|i| i as f64 * 2e-9).collect();
        let g2: Vec<f64> = tau
            .iter()
            .map(|&t| {
                let t = t.abs();
                1.0 - (1.0 + a) * (-t / tau1).exp() + a * (-t / tau2).exp()
            })
            .collect();
        let curve = G2Curve { tau, g2, sigma: Vec::new() };
        let fit = fit_g2_three_level(&curve).unwrap();
        assert!(!fit.two_level);
        assert!((fit.tau1 / tau1 - 1.0).abs() < 1e-6, "tau1 {}", fit.tau1);
        assert!((fit.tau2 / tau2 - 1.0).abs() < 1e-6, "tau2 {}", fit.tau2);
        assert!((fit.shoulder / a - 1.0).abs() < 1e-6, "shoulder {}", fit.shoulder);
        assert_eq!(fit.evaluate(0.0), 0.0);
    }

    #[test]
    fn three_level_rate_solution_is_fit_to_within_one_percent() {
        // The rate-equation g2 is exactly bi-exponential, so the fitted
        // form should reproduce it to numerical precision, far below the
        // 0.01 sup-norm bound asserted here.
        let model = ThreeLevelModel::nv_defaults();
        let power = model.p_sat();
        let tau: Vec<f64> = (0..400).map(|i| i as f64 * 0.5e-9).collect();
        let g2: Vec<f64> =
            tau.iter().map(|&t| analytic_g2(&model, power, t).unwrap()).collect();
        let curve = G2Curve { tau: tau.clone(), g2: g2.clone(), sigma: Vec::new() };
        let fit = fit_g2_three_level(&curve).unwrap();
        assert!(!fit.two_level);
        let sup = tau
            .iter()
            .zip(&g2)
            .map(|(&t, &g)| (fit.evaluate(t) - g).abs())
            .fold(0.0f64, f64::max);
        assert!(sup < 0.01, "sup-norm {sup}");
        assert!(fit.shoulder > 0.0 && fit.tau2 > fit.tau1);
    }

    #[test]
    fn flat_wings_fall_back_to_the_two_level_branch() {
        let tau1 = 15e-9;
        let tau: Vec<f64> = (-100..100).map(|i| i as f64 * 2e-9).collect();
        let g2: Vec<f64> = tau.iter().map(|&t| 1.0 - (-t.abs() / tau1).exp()).collect();
        let curve = G2Curve { tau, g2, sigma: Vec::new() };
        let fit = fit_g2_three_level(&curve).unwrap();
        assert!(fit.two_level);
        assert_eq!(fit.tau2, 0.0);
        assert_eq!(fit.shoulder, 0.0);
        assert!((fit.tau1 / tau1 - 1.0).abs() < 1e-6, "tau1 {}", fit.tau1);
    }

    #[test]
    fn curves_without_dip_or_wings_are_rejected() {
        let tau: Vec<f64> = (-20..20).map(|i| i as f64 * 1e-9).collect();
        let flat = G2Curve {
            tau: tau.clone(),
            g2: vec![1.0; tau.len()],
            sigma: Vec::new(),
        };
        let err = fit_g2_three_level(&flat).unwrap_err();
        assert!(err.to_string().contains("dip"), "{err}");

        let dip_only = G2Curve {
            tau: tau.clone(),
            g2: vec![0.1; tau.len()],
            sigma: Vec::new(),
        };
        let err = fit_g2_three_level(&dip_only).unwrap_err();
        assert!(err.to_string().contains("wings"), "{err}");
    }
}
