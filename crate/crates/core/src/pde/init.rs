use num_complex::Complex64;

use super::{discrete_dispersion, Grid, GridState};
use crate::error::{Error, Result};
use crate::fields::{eval_psi_b, eval_psi_boosted, FieldSpec};
use crate::kinematics::FourPosition;
use crate::verify::analytic_derivatives_psi;

fn event(r: [f64; 3], t: f64) -> FourPosition {
    FourPosition::new(r[0], r[1], r[2], t)
}

/// Envelope `ψᵇ` of component `k` at time `t`, for the Schrödinger form.
pub fn envelope_state(grid: &Grid, spec: &FieldSpec, k: usize, t: f64) -> Result<GridState> {
    spec.component(k)?;
    let field = grid.sample(|r| eval_psi_b(spec, k, event(r, t)).expect("index checked"));
    GridState::new(grid.clone(), field, None, t)
}

/// Boosted field `ψ` at time `t` with its closed-form time derivative.
pub fn field_state(grid: &Grid, spec: &FieldSpec, t: f64) -> Result<GridState> {
    let field = grid.sample(|r| eval_psi_boosted(spec, event(r, t)));
    let pi = grid.sample(|r| {
        (0..spec.components().len())
            .map(|k| analytic_derivatives_psi(spec, k, event(r, t)).expect("index in range").d_tau)
            .sum()
    });
    GridState::new(grid.clone(), field, Some(pi), t)
}

fn check_periodic(grid: &Grid, k: f64) -> Result<()> {
    let turns = k * grid.extent()[2] / (2.0 * std::f64::consts::PI);
    if (turns - turns.round()).abs() > 1e-9 {
        return Err(Error::Grid(format!("wavenumber {k} is not periodic on length {}", grid.extent()[2])));
    }
    Ok(())
}

/// `A·exp(ikz)` along z with the time derivative that makes it a single
/// positive-frequency mode of the leapfrog scheme.
pub fn plane_wave_state(grid: &Grid, k: f64, mass_scalar: f64, dt: f64, amplitude: f64) -> Result<GridState> {
    check_periodic(grid, k)?;
    let omega = discrete_dispersion(k, mass_scalar, grid.dz(), dt)?;
    let rate = Complex64::new(0.0, (omega * dt).sin() / dt);
    let field = grid.sample(|r| Complex64::cis(k * r[2]) * amplitude);
    let pi = field.iter().map(|f| f * rate).collect();
    GridState::new(grid.clone(), field, Some(pi), 0.0)
}

/// `sin(k(z − z₀))` at rest, with `z₀` the grid node `node`.
pub fn standing_wave_state(grid: &Grid, k: f64, node: usize) -> Result<GridState> {
    check_periodic(grid, k)?;
    let z0 = grid.axis_coord(2, node);
    let field = grid.sample(|r| Complex64::new((k * (r[2] - z0)).sin(), 0.0));
    let pi = vec![Complex64::default(); grid.len()];
    GridState::new(grid.clone(), field, Some(pi), 0.0)
}
