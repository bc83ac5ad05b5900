use num_complex::Complex64;

use super::GridState;
use crate::error::{Error, Result};

/// Modes with `k·dx` up to this value are compared with the continuum relation.
pub const CONTINUUM_KDX_LIMIT: f64 = 0.3;

/// `sqrt(k² + m_s)`
pub fn continuum_dispersion(k: f64, mass_scalar: f64) -> f64 {
    (k * k + mass_scalar).sqrt()
}

/// Frequency of `exp(ikz)` under the leapfrog scheme:
/// `(2/dt)·asin((dt/2)·sqrt((4/dx²)·sin²(k·dx/2) + m_s))`.
pub fn discrete_dispersion(k: f64, mass_scalar: f64, dx: f64, dt: f64) -> Result<f64> {
    let lambda = 4.0 / (dx * dx) * (0.5 * k * dx).sin().powi(2) + mass_scalar;
    let arg = 0.5 * dt * lambda.max(0.0).sqrt();
    if arg > 1.0 + 1e-12 {
        return Err(Error::Config(format!("mode k = {k} is unstable at dt = {dt}")));
    }
    Ok(2.0 / dt * arg.min(1.0).asin())
}

/// The relation a measured frequency should match: the continuum value for
/// resolved modes, the discrete one otherwise.
pub fn dispersion_oracle(k: f64, mass_scalar: f64, dx: f64, dt: f64) -> Result<f64> {
    if (k * dx).abs() <= CONTINUUM_KDX_LIMIT {
        Ok(continuum_dispersion(k, mass_scalar))
    } else {
        discrete_dispersion(k, mass_scalar, dx, dt)
    }
}

/// Rotation rate of the Fourier coefficient `Σψ·exp(−ikz)/N` over a time
/// series, by a least-squares fit of its unwrapped phase.
pub fn measure_dispersion(states: &[GridState], k: f64) -> Result<f64> {
    if states.len() < 2 {
        return Err(Error::InvalidParameter("frequency fit needs at least 2 states".into()));
    }
    let mut points = Vec::with_capacity(states.len());
    let mut unwrapped = 0.0;
    let mut previous: Option<f64> = None;
    for s in states {
        let n = s.grid.len() as f64;
        let c: Complex64 = s
            .field
            .iter()
            .enumerate()
            .map(|(i, v)| v * Complex64::cis(-k * s.grid.coords(i)[2]))
            .sum::<Complex64>()
            / n;
        if c.norm() < 1e-12 {
            return Err(Error::SignalTooWeak(c.norm()));
        }
        let phase = c.arg();
        unwrapped = match previous {
            None => phase,
            Some(p) => {
                let delta = (phase - p + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI;
                unwrapped + delta
            }
        };
        previous = Some(phase);
        points.push((s.t, unwrapped));
    }
    let (slope, _) = crate::fit::linear_fit(&points);
    Ok(slope.abs())
}
