use num_complex::Complex64;
use rayon::prelude::*;

use super::{Grid, GridState, Stepper};
use crate::error::{Error, Result};

/// `(dt/2)·sqrt(λ_max)` for the largest frequency `λ_max = 4Σ1/dx² + m_s` of
/// the discrete operator. The scheme is stable for values up to 1, and equals
/// `dt/dx` for the one-dimensional wave equation.
pub fn courant_number(grid: &Grid, dt: f64, mass_scalar: f64) -> f64 {
    0.5 * dt * (grid.laplacian_bound() + mass_scalar.max(0.0)).sqrt()
}

/// Kick-drift-kick leapfrog for `∂²ψ/∂τ² = ∇²ψ − m_s·ψ`.
///
/// The field at integer steps obeys the three-level recurrence
/// `ψⁿ⁺¹ − 2ψⁿ + ψⁿ⁻¹ = dt²(∇²ψⁿ − m_s·ψⁿ)`.
#[derive(Debug, Clone)]
pub struct Leapfrog {
    grid: Grid,
    dt: f64,
    mass_scalar: f64,
    accel: Vec<Complex64>,
    cached_step: Option<usize>,
}

impl Leapfrog {
    pub fn new(grid: &Grid, dt: f64, mass_scalar: f64, field: &[Complex64]) -> Self {
        let mut lf = Self {
            grid: grid.clone(),
            dt,
            mass_scalar,
            accel: vec![Complex64::default(); grid.len()],
            cached_step: None,
        };
        lf.update_accel(field);
        lf
    }

    fn update_accel(&mut self, field: &[Complex64]) {
        self.grid.laplacian(field, &mut self.accel);
        let m = self.mass_scalar;
        self.accel.par_iter_mut().zip(field).for_each(|(a, f)| *a -= f * m);
    }
}

impl Stepper for Leapfrog {
    fn step(&mut self, state: &mut GridState) -> Result<()> {
        if self.cached_step != Some(state.step_count) {
            self.update_accel(&state.field);
        }
        let half = 0.5 * self.dt;
        let dt = self.dt;
        let pi = state
            .pi
            .as_mut()
            .ok_or_else(|| Error::Config("second-order evolution needs an initial time derivative".into()))?;
        pi.par_iter_mut().zip(&self.accel).for_each(|(p, a)| *p += a * half);
        state.field.par_iter_mut().zip(pi.par_iter()).for_each(|(f, p)| *f += p * dt);
        self.update_accel(&state.field);
        let pi = state.pi.as_mut().expect("checked above");
        pi.par_iter_mut().zip(&self.accel).for_each(|(p, a)| *p += a * half);
        state.step_count += 1;
        state.t += dt;
        self.cached_step = Some(state.step_count);
        Ok(())
    }
}
