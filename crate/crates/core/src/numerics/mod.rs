//! Special functions, quadrature, and root finding used by the mode solver.

pub mod bessel;
pub mod quad;
pub mod roots;
