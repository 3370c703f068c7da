//! Scalar root finding shared by the efficiency fixed points.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Gauss–Legendre nodes per panel for the individually optimal
    /// detector's Gaussian integral.
    pub quadrature_nodes: usize,
}

impl Default for FixedPointSettings {
    fn default() -> Self {
        FixedPointSettings {
            tolerance: 1e-12,
            max_iterations: 200,
            quadrature_nodes: 16,
        }
    }
}

impl FixedPointSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("fixed-point tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("fixed-point max_iterations must be at least 1"));
        }
        if self.quadrature_nodes < 8 {
            return Err(Error::invalid("at least 8 quadrature nodes are required"));
        }
        Ok(())
    }
}

/// Bisection on an increasing `residual` over `[lo, hi]`.
///
/// Returns as soon as `|residual| < tolerance`. An endpoint that is itself a
/// root is returned directly.
pub fn bisect(
    mut residual: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    settings: &FixedPointSettings,
) -> Result<f64> {
    if !(lo < hi) {
        return Err(Error::invalid("bisection bracket must satisfy lo < hi"));
    }
    let (mut lo, mut hi) = (lo, hi);
    let r_lo = residual(lo);
    let r_hi = residual(hi);
    if r_lo.abs() < settings.tolerance {
        return Ok(lo);
    }
    if r_hi.abs() < settings.tolerance {
        return Ok(hi);
    }
    if r_lo.signum() == r_hi.signum() {
        return Err(Error::SolverFailure {
            iterations: 0,
            residual: r_lo.abs().min(r_hi.abs()),
        });
    }
    let increasing = r_lo < 0.0;
    let mut last = f64::INFINITY;
    for _ in 0..settings.max_iterations {
        let mid = 0.5 * (lo + hi);
        let r = residual(mid);
        if r.abs() < settings.tolerance || mid == lo || mid == hi {
            return Ok(mid);
        }
        if (r < 0.0) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
        last = r;
    }
    Err(Error::SolverFailure {
        iterations: settings.max_iterations,
        residual: last.abs(),
    })
}

/// Damped iteration `x ← (1 − λ) x + λ map(x)` until `|x − map(x)| < tolerance`.
pub fn damped_fixed_point(
    mut map: impl FnMut(f64) -> f64,
    init: f64,
    damping: f64,
    settings: &FixedPointSettings,
) -> Result<f64> {
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::invalid("damping factor must lie in (0, 1]"));
    }
    let mut x = init;
    let mut residual = f64::INFINITY;
    for _ in 0..settings.max_iterations {
        let fx = map(x);
        residual = (x - fx).abs();
        if residual < settings.tolerance {
            return Ok(x);
        }
        if !fx.is_finite() {
            break;
        }
        x = (1.0 - damping) * x + damping * fx;
    }
    Err(Error::SolverFailure {
        iterations: settings.max_iterations,
        residual,
    })
}
