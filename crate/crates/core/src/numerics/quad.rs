//! Fixed-order Gauss-Legendre quadrature on finite panels.

/// 64-point Gauss-Legendre nodes on [-1, 1].
static GL64_NODES: [f64; 64] = [
    -9.99305041735772170e-01, -9.96340116771955220e-01, -9.91013371476744287e-01, -9.83336253884625977e-01,
    -9.73326827789910975e-01, -9.61008799652053769e-01, -9.46411374858402765e-01, -9.29569172131939570e-01,
    -9.10522137078502825e-01, -8.89315445995114140e-01, -8.65999398154092770e-01, -8.40629296252580316e-01,
    -8.13265315122797539e-01, -7.83972358943341385e-01, -7.52819907260531940e-01, -7.19881850171610771e-01,
    -6.85236313054233270e-01, -6.48965471254657311e-01, -6.11155355172393278e-01, -5.71895646202634000e-01,
    -5.31279464019894565e-01, -4.89403145707052956e-01, -4.46366017253464087e-01, -4.02270157963991626e-01,
    -3.57220158337668126e-01, -3.11322871990210970e-01, -2.64687162208767424e-01, -2.17423643740007083e-01,
    -1.69644420423992803e-01, -1.21462819296120558e-01, -7.29931217877990424e-02, -2.43502926634244291e-02,
    2.43502926634244291e-02, 7.29931217877990424e-02, 1.21462819296120558e-01, 1.69644420423992803e-01,
    2.17423643740007083e-01, 2.64687162208767424e-01, 3.11322871990210970e-01, 3.57220158337668126e-01,
    4.02270157963991626e-01, 4.46366017253464087e-01, 4.89403145707052956e-01, 5.31279464019894565e-01,
    5.71895646202634000e-01, 6.11155355172393278e-01, 6.48965471254657311e-01, 6.85236313054233270e-01,
    7.19881850171610771e-01, 7.52819907260531940e-01, 7.83972358943341385e-01, 8.13265315122797539e-01,
    8.40629296252580316e-01, 8.65999398154092770e-01, 8.89315445995114140e-01, 9.10522137078502825e-01,
    9.29569172131939570e-01, 9.46411374858402765e-01, 9.61008799652053769e-01, 9.73326827789910975e-01,
    9.83336253884625977e-01, 9.91013371476744287e-01, 9.96340116771955220e-01, 9.99305041735772170e-01,
];

/// 64-point Gauss-Legendre weights matching [`GL64_NODES`].
static GL64_WEIGHTS: [f64; 64] = [
    1.78328072169421517e-03, 4.14703326056292329e-03, 6.50445796897965427e-03, 8.84675982636439102e-03,
    1.11681394601314665e-02, 1.34630478967182315e-02, 1.57260304760250824e-02, 1.79517157756973016e-02,
    2.01348231535300945e-02, 2.22701738083830071e-02, 2.43527025687108531e-02, 2.63774697150546272e-02,
    2.83396726142597019e-02, 3.02346570724024953e-02, 3.20579283548514532e-02, 3.38051618371417867e-02,
    3.54722132568823234e-02, 3.70551285402401509e-02, 3.85501531786155913e-02, 3.99537411327203495e-02,
    4.12625632426234859e-02, 4.24735151236535977e-02, 4.35837245293234643e-02, 4.45905581637565454e-02,
    4.54916279274181143e-02, 4.62847965813143747e-02, 4.69681828162099996e-02, 4.75401657148303014e-02,
    4.79993885964583172e-02, 4.83447622348029543e-02, 4.85754674415034560e-02, 4.86909570091397514e-02,
    4.86909570091397514e-02, 4.85754674415034560e-02, 4.83447622348029543e-02, 4.79993885964583172e-02,
    4.75401657148303014e-02, 4.69681828162099996e-02, 4.62847965813143747e-02, 4.54916279274181143e-02,
    4.45905581637565454e-02, 4.35837245293234643e-02, 4.24735151236535977e-02, 4.12625632426234859e-02,
    3.99537411327203495e-02, 3.85501531786155913e-02, 3.70551285402401509e-02, 3.54722132568823234e-02,
    3.38051618371417867e-02, 3.20579283548514532e-02, 3.02346570724024953e-02, 2.83396726142597019e-02,
    2.63774697150546272e-02, 2.43527025687108531e-02, 2.22701738083830071e-02, 2.01348231535300945e-02,
    1.79517157756973016e-02, 1.57260304760250824e-02, 1.34630478967182315e-02, 1.11681394601314665e-02,
    8.84675982636439102e-03, 6.50445796897965427e-03, 4.14703326056292329e-03, 1.78328072169421517e-03,
];

/// Integral of f over [a, b] with a single 64-point panel.
pub fn gauss_legendre<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut s = 0.0;
    for (&x, &w) in GL64_NODES.iter().zip(GL64_WEIGHTS.iter()) {
        s += w * f(mid + half * x);
    }
    half * s
}

/// Integral of f over consecutive panels defined by the sorted breakpoints.
pub fn gauss_legendre_panels<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64]) -> f64 {
    debug_assert!(breaks.len() >= 2);
    let mut total = 0.0;
    for pair in breaks.windows(2) {
        total += gauss_legendre(&mut f, pair[0], pair[1]);
    }
    total
}

/// Breakpoints that start at `a`, take one unit step, then grow geometrically
/// to reach `b`. Suited to integrands that decay exponentially from `a`.
pub fn geometric_breaks(a: f64, b: f64, n_panels: usize) -> Vec<f64> {
    debug_assert!(b > a && n_panels >= 2);
    let mut breaks = Vec::with_capacity(n_panels + 1);
    breaks.push(a);
    // Panel widths w, w*g, w*g^2, ... with mild growth g.
    let g: f64 = 1.6;
    let total: f64 = (0..n_panels).map(|k| g.powi(k as i32)).sum();
    let w0 = (b - a) / total;
    let mut z = a;
    for k in 0..n_panels - 1 {
        z += w0 * g.powi(k as i32);
        breaks.push(z);
    }
    breaks.push(b);
    breaks
}
