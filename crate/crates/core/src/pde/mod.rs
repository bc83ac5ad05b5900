//! Finite-difference evolution of the limit equations on periodic grids.
//!
//! The Schrödinger form `−iħc·∂τψ + (ħ²/2m)∇²ψ = Uψ` is advanced with
//! Crank-Nicolson. The Klein-Gordon-Fock and wave equations
//! `∂²ψ/∂τ² = ∇²ψ − m_s·ψ` are advanced with a kick-drift-kick leapfrog
//! storing `(ψ, ∂τψ)` at integer steps.

mod dispersion;
mod grid;
mod init;
mod leapfrog;
mod observables;
mod schrodinger;
mod snapshot;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::MassParameters;
use crate::profile::QuadraticPotential;

pub use dispersion::{continuum_dispersion, discrete_dispersion, dispersion_oracle, measure_dispersion, CONTINUUM_KDX_LIMIT};
pub use grid::{Grid, DEFAULT_MAX_POINTS};
pub use init::{envelope_state, field_state, plane_wave_state, standing_wave_state};
pub use leapfrog::{courant_number, Leapfrog};
pub use observables::{drift_statistics, measure_observables, DriftStatistics, Observables};
pub use schrodinger::CrankNicolson;
pub use snapshot::{read_snapshot, write_snapshot};

/// Field values on a grid, with the time derivative for second-order equations.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub grid: Grid,
    pub field: Vec<Complex64>,
    pub pi: Option<Vec<Complex64>>,
    pub t: f64,
    pub step_count: usize,
}

impl GridState {
    pub fn new(grid: Grid, field: Vec<Complex64>, pi: Option<Vec<Complex64>>, t: f64) -> Result<Self> {
        if field.len() != grid.len() {
            return Err(Error::Grid(format!("field has {} values for {} nodes", field.len(), grid.len())));
        }
        if let Some(p) = &pi {
            if p.len() != grid.len() {
                return Err(Error::Grid(format!("time derivative has {} values for {} nodes", p.len(), grid.len())));
            }
        }
        let state = Self {
            grid,
            field,
            pi,
            t,
            step_count: 0,
        };
        if !state.is_finite() {
            return Err(Error::NonFinite("initial state".into()));
        }
        Ok(state)
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> Complex64 + Sync) -> Self {
        let field = grid.sample(f);
        Self {
            grid,
            field,
            pi: None,
            t: 0.0,
            step_count: 0,
        }
    }

    pub fn zeros(grid: Grid, with_pi: bool) -> Self {
        let n = grid.len();
        Self {
            grid,
            field: vec![Complex64::default(); n],
            pi: with_pi.then(|| vec![Complex64::default(); n]),
            t: 0.0,
            step_count: 0,
        }
    }

    pub fn with_pi(mut self, f: impl Fn([f64; 3]) -> Complex64 + Sync) -> Self {
        self.pi = Some(self.grid.sample(f));
        self
    }

    pub fn is_finite(&self) -> bool {
        let ok = |v: &[Complex64]| v.iter().all(|c| c.re.is_finite() && c.im.is_finite());
        ok(&self.field) && self.pi.as_deref().is_none_or(ok)
    }
}

/// Potential function `u(x, y, z)` entering `U = ħ²u/2m`.
#[derive(Clone)]
pub struct Potential(Arc<dyn Fn([f64; 3]) -> f64 + Send + Sync>);

impl Potential {
    pub fn new(f: impl Fn([f64; 3]) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn quadratic(q: QuadraticPotential) -> Self {
        Self::new(move |r| q.eval(r))
    }

    /// Values tabulated on `grid`, served back by nearest node.
    pub fn tabulated(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!("{} potential values for {} nodes", values.len(), grid.len())));
        }
        let g = grid.clone();
        Ok(Self::new(move |r| {
            let idx = [0, 1, 2].map(|a| {
                let n = g.points()[a];
                if n == 1 {
                    0
                } else {
                    let h = g.spacing()[a];
                    let i = ((r[a] + 0.5 * g.extent()[a]) / h - 0.5).round() as i64;
                    i.rem_euclid(n as i64) as usize
                }
            });
            let [_, ny, nz] = g.points();
            values[(idx[0] * ny + idx[1]) * nz + idx[2]]
        }))
    }

    pub fn eval(&self, r: [f64; 3]) -> f64 {
        (self.0)(r)
    }
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Potential(..)")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    CrankNicolson,
    Leapfrog,
}

#[derive(Debug, Clone)]
pub enum Physics {
    Schrodinger {
        mass: MassParameters,
        potential: Option<Potential>,
    },
    KleinGordon {
        mass_scalar: f64,
    },
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub dt: f64,
    pub steps: usize,
    pub scheme: Scheme,
    pub physics: Physics,
    /// Relative residual for the iterative solve of three-dimensional
    /// Crank-Nicolson steps.
    pub linear_tolerance: f64,
    pub max_iterations: usize,
}

impl SolverConfig {
    pub fn schrodinger(dt: f64, steps: usize, mass: MassParameters, potential: Option<Potential>) -> Self {
        Self {
            dt,
            steps,
            scheme: Scheme::CrankNicolson,
            physics: Physics::Schrodinger { mass, potential },
            linear_tolerance: 1e-12,
            max_iterations: 500,
        }
    }

    pub fn klein_gordon(dt: f64, steps: usize, mass_scalar: f64) -> Self {
        Self {
            dt,
            steps,
            scheme: Scheme::Leapfrog,
            physics: Physics::KleinGordon { mass_scalar },
            linear_tolerance: 1e-12,
            max_iterations: 500,
        }
    }

    pub fn wave(dt: f64, steps: usize) -> Self {
        Self::klein_gordon(dt, steps, 0.0)
    }

    pub fn mass_scalar(&self) -> Option<f64> {
        match self.physics {
            Physics::KleinGordon { mass_scalar } => Some(mass_scalar),
            Physics::Schrodinger { .. } => None,
        }
    }

    fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        match (&self.physics, self.scheme) {
            (Physics::Schrodinger { .. }, Scheme::CrankNicolson) => {
                if !(self.linear_tolerance > 0.0 && self.max_iterations > 0) {
                    return Err(Error::Config("linear solver tolerance and iteration limit must be positive".into()));
                }
                Ok(())
            }
            (Physics::KleinGordon { mass_scalar }, Scheme::Leapfrog) => {
                if !mass_scalar.is_finite() {
                    return Err(Error::Config("mass scalar must be finite".into()));
                }
                let courant = courant_number(grid, self.dt, *mass_scalar);
                if courant > 1.0 + 1e-12 {
                    return Err(Error::Config(format!("Courant number {courant} exceeds 1")));
                }
                Ok(())
            }
            (_, scheme) => Err(Error::Config(format!("scheme {scheme:?} does not match the equation"))),
        }
    }

    /// Non-fatal accuracy notes for this configuration on `grid`.
    pub fn warnings(&self, grid: &Grid) -> Vec<String> {
        let mut out = vec![];
        if self.scheme == Scheme::CrankNicolson {
            let dx = grid.active_axes().iter().map(|&a| grid.spacing()[a]).fold(f64::INFINITY, f64::min);
            if self.dt > dx * dx {
                out.push(format!("dt = {} exceeds dx² = {}; phases of short modes will be inaccurate", self.dt, dx * dx));
            }
        }
        out
    }
}

/// One time step of an evolution scheme.
pub trait Stepper {
    fn step(&mut self, state: &mut GridState) -> Result<()>;
}

fn stepper_for(state: &GridState, cfg: &SolverConfig) -> Result<Box<dyn Stepper>> {
    cfg.validate(&state.grid)?;
    Ok(match &cfg.physics {
        Physics::Schrodinger { mass, potential } => Box::new(CrankNicolson::new(&state.grid, cfg.dt, mass, potential.as_ref(), cfg.linear_tolerance, cfg.max_iterations)?),
        Physics::KleinGordon { mass_scalar } => {
            if state.pi.is_none() {
                return Err(Error::Config("second-order evolution needs an initial time derivative".into()));
            }
            Box::new(Leapfrog::new(&state.grid, cfg.dt, *mass_scalar, &state.field))
        }
    })
}

/// Advance `cfg.steps` steps, calling `observe` on the initial state and
/// after every `every`-th step (never when `every` is 0).
pub fn evolve_observed(initial: GridState, cfg: &SolverConfig, every: usize, mut observe: impl FnMut(&GridState) -> Result<()>) -> Result<GridState> {
    let mut state = initial;
    let mut stepper = stepper_for(&state, cfg)?;
    if every > 0 {
        observe(&state)?;
    }
    for _ in 0..cfg.steps {
        stepper.step(&mut state)?;
        if !state.is_finite() {
            return Err(Error::NonFiniteState(state.step_count));
        }
        if every > 0 && state.step_count.is_multiple_of(every) {
            observe(&state)?;
        }
    }
    Ok(state)
}

pub fn evolve_schrodinger(initial: GridState, cfg: &SolverConfig) -> Result<GridState> {
    if !matches!(cfg.physics, Physics::Schrodinger { .. }) {
        return Err(Error::Config("Schrödinger evolution needs mass parameters".into()));
    }
    evolve_observed(initial, cfg, 0, |_| Ok(()))
}

pub fn evolve_kgf(initial: GridState, cfg: &SolverConfig) -> Result<GridState> {
    if cfg.mass_scalar().is_none() {
        return Err(Error::Config("Klein-Gordon-Fock evolution needs a mass scalar".into()));
    }
    evolve_observed(initial, cfg, 0, |_| Ok(()))
}

pub fn evolve_wave(initial: GridState, cfg: &SolverConfig) -> Result<GridState> {
    if cfg.mass_scalar() != Some(0.0) {
        return Err(Error::Config("wave evolution needs a zero mass scalar".into()));
    }
    evolve_observed(initial, cfg, 0, |_| Ok(()))
}
