//! Scalar root finding on a grid: bracket by sign change, refine by
//! bisection, then polish with a few secant steps.

/// A sign-change bracket [lo, hi] with f(lo) and f(hi) of opposite sign.
#[derive(Debug, Clone, Copy)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

/// Scan precomputed samples for sign changes.
///
/// Non-finite samples break any bracket that would span them, which is how
/// poles of the characteristic functions are kept out of the candidate list
/// at scan resolution.
pub fn bracket_from_samples(grid: &[f64], values: &[f64]) -> Vec<Bracket> {
    debug_assert_eq!(grid.len(), values.len());
    let mut out = Vec::new();
    for i in 0..grid.len().saturating_sub(1) {
        let (f0, f1) = (values[i], values[i + 1]);
        if !f0.is_finite() || !f1.is_finite() {
            continue;
        }
        if f0 == 0.0 {
            out.push(Bracket { lo: grid[i], hi: grid[i], f_lo: 0.0, f_hi: 0.0 });
        } else if f0 * f1 < 0.0 {
            out.push(Bracket { lo: grid[i], hi: grid[i + 1], f_lo: f0, f_hi: f1 });
        }
    }
    out
}

/// Bisect a bracket down to the requested interval width, then polish with
/// secant steps while they stay inside the bracket.
pub fn refine<F: FnMut(f64) -> f64>(mut f: F, bracket: Bracket, x_tol: f64) -> f64 {
    if bracket.lo == bracket.hi {
        return bracket.lo;
    }
    let (mut lo, mut hi) = (bracket.lo, bracket.hi);
    let (mut f_lo, mut f_hi) = (bracket.f_lo, bracket.f_hi);
    for _ in 0..200 {
        if (hi - lo).abs() <= x_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_lo * f_mid < 0.0 {
            hi = mid;
            f_hi = f_mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    // Secant polish; the function is smooth at a genuine root, so this
    // squeezes out the last digits that bisection left on the table.
    let (mut x0, mut x1) = (lo, hi);
    let (mut y0, mut y1) = (f_lo, f_hi);
    for _ in 0..8 {
        if y1 == y0 {
            break;
        }
        let x2 = x1 - y1 * (x1 - x0) / (y1 - y0);
        if !(bracket.lo..=bracket.hi).contains(&x2) {
            break;
        }
        let y2 = f(x2);
        x0 = x1;
        y0 = y1;
        x1 = x2;
        y1 = y2;
        if y2 == 0.0 {
            break;
        }
    }
    if y1.abs() <= y0.abs() {
        x1
    } else {
        x0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cosine_roots() {
        let n = 1000;
        let grid: Vec<f64> = (0..=n).map(|i| 10.0 * i as f64 / n as f64).collect();
        let values: Vec<f64> = grid.iter().map(|&x| x.cos()).collect();
        let brackets = bracket_from_samples(&grid, &values);
        assert_eq!(brackets.len(), 3);
        let roots: Vec<f64> = brackets
            .into_iter()
            .map(|b| refine(|x| x.cos(), b, 1e-14))
            .collect();
        for (r, want) in roots.iter().zip([0.5, 1.5, 2.5]) {
            assert!((r - want * std::f64::consts::PI).abs() < 1e-12);
        }
    }

    #[test]
    fn pole_is_not_bracketed_when_marked_non_finite() {
        // tan has a pole at pi/2; a scan of tan with the pole sample set to
        // NaN must not report a bracket there.
        let n = 500;
        let grid: Vec<f64> = (0..=n).map(|i| 0.1 + 3.3 * i as f64 / n as f64).collect();
        let values: Vec<f64> = grid
            .iter()
            .map(|&x| {
                let t = x.tan();
                // Mask a window wider than the grid spacing around the pole
                // so at least one sample is non-finite.
                if t.abs() > 1e2 {
                    f64::NAN
                } else {
                    t
                }
            })
            .collect();
        let brackets = bracket_from_samples(&grid, &values);
        // Only the genuine root of tan at pi remains.
        assert_eq!(brackets.len(), 1);
        let r = refine(|x| x.tan(), brackets[0], 1e-14);
        assert!((r - std::f64::consts::PI).abs() < 1e-12);
    }
}
