use num_complex::Complex64;
use rayon::prelude::*;

use super::grid::ordered_sum;
use super::{Grid, GridState, Potential, Stepper};
use crate::error::{Error, Result};
use crate::fields::MassParameters;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Crank-Nicolson for `∂τψ = (i/ħc)·Hψ` with `H = −(ħ²/2m)∇² + U`:
/// `(1 − isH)ψⁿ⁺¹ = (1 + isH)ψⁿ`, `s = dt/(2ħc)`.
///
/// One-dimensional systems are solved directly (cyclic tridiagonal); in three
/// dimensions the complex-symmetric system is solved by conjugate orthogonal
/// conjugate gradients.
#[derive(Debug, Clone)]
pub struct CrankNicolson {
    grid: Grid,
    dt: f64,
    s: f64,
    kinetic: f64,
    energy: Vec<f64>,
    solver: LinearSolver,
    rhs: Vec<Complex64>,
    work: Vec<Complex64>,
}

#[derive(Debug, Clone)]
enum LinearSolver {
    Cyclic(CyclicTridiagonal),
    Cocg {
        tolerance: f64,
        max_iterations: usize,
        r: Vec<Complex64>,
        p: Vec<Complex64>,
        q: Vec<Complex64>,
    },
}

impl CrankNicolson {
    pub fn new(grid: &Grid, dt: f64, mass: &MassParameters, potential: Option<&Potential>, tolerance: f64, max_iterations: usize) -> Result<Self> {
        let kinetic = mass.hbar() * mass.hbar() / (2.0 * mass.m());
        let energy: Vec<f64> = match potential {
            Some(p) => grid.sample(|r| kinetic * p.eval(r)),
            None => vec![0.0; grid.len()],
        };
        if energy.iter().any(|u| !u.is_finite()) {
            return Err(Error::NonFinite("potential on the grid".into()));
        }
        let s = dt / (2.0 * mass.hbar() * mass.c());
        let n = grid.len();
        let solver = if grid.dim() == 1 {
            let off = I * (s * kinetic / (grid.dz() * grid.dz()));
            let diag: Vec<Complex64> = energy
                .iter()
                .map(|u| Complex64::new(1.0, 0.0) - I * s * (2.0 * kinetic / (grid.dz() * grid.dz()) + u))
                .collect();
            LinearSolver::Cyclic(CyclicTridiagonal::new(diag, off)?)
        } else {
            LinearSolver::Cocg {
                tolerance,
                max_iterations,
                r: vec![Complex64::default(); n],
                p: vec![Complex64::default(); n],
                q: vec![Complex64::default(); n],
            }
        };
        Ok(Self {
            grid: grid.clone(),
            dt,
            s,
            kinetic,
            energy,
            solver,
            rhs: vec![Complex64::default(); n],
            work: vec![Complex64::default(); n],
        })
    }

    /// `U = ħ²u/2m` at every node.
    pub fn potential_energy(&self) -> &[f64] {
        &self.energy
    }

    /// `out = Hf`.
    pub fn apply_hamiltonian(&self, f: &[Complex64], out: &mut [Complex64]) {
        apply_h(&self.grid, self.kinetic, &self.energy, f, out);
    }
}

fn apply_h(grid: &Grid, kinetic: f64, energy: &[f64], f: &[Complex64], out: &mut [Complex64]) {
    grid.laplacian(f, out);
    out.par_iter_mut()
        .zip(f.par_iter().zip(energy))
        .for_each(|(o, (v, u))| *o = v * u - *o * kinetic);
}

/// `Σ aᵢbᵢ` without conjugation, in fixed order.
fn bilinear(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let re = ordered_sum(a.len(), |i| (a[i] * b[i]).re);
    let im = ordered_sum(a.len(), |i| (a[i] * b[i]).im);
    Complex64::new(re, im)
}

fn norm_sq(a: &[Complex64]) -> f64 {
    ordered_sum(a.len(), |i| a[i].norm_sqr())
}

impl Stepper for CrankNicolson {
    fn step(&mut self, state: &mut GridState) -> Result<()> {
        let s = self.s;
        apply_h(&self.grid, self.kinetic, &self.energy, &state.field, &mut self.work);
        self.rhs
            .par_iter_mut()
            .zip(state.field.par_iter().zip(&self.work))
            .for_each(|(r, (f, h))| *r = f + I * s * h);
        match &mut self.solver {
            LinearSolver::Cyclic(t) => t.solve(&self.rhs, &mut state.field),
            LinearSolver::Cocg {
                tolerance,
                max_iterations,
                r,
                p,
                q,
            } => {
                // x₀ = ψⁿ; A x = x − isHx
                let x = &mut state.field;
                let apply_a = |v: &[Complex64], out: &mut [Complex64], work: &mut [Complex64]| {
                    apply_h(&self.grid, self.kinetic, &self.energy, v, work);
                    out.par_iter_mut()
                        .zip(v.par_iter().zip(work.par_iter()))
                        .for_each(|(o, (v, h))| *o = v - I * s * h);
                };
                apply_a(x, q, &mut self.work);
                r.par_iter_mut().zip(self.rhs.par_iter().zip(q.par_iter())).for_each(|(r, (b, ax))| *r = b - ax);
                p.copy_from_slice(r);
                let b_norm = norm_sq(&self.rhs).sqrt().max(f64::MIN_POSITIVE);
                let mut rho = bilinear(r, r);
                let mut residual = norm_sq(r).sqrt() / b_norm;
                let mut iterations = 0;
                while residual > *tolerance {
                    if iterations == *max_iterations {
                        return Err(Error::SolverDivergence {
                            iterations,
                            residual,
                            tolerance: *tolerance,
                        });
                    }
                    apply_a(p, q, &mut self.work);
                    let alpha = rho / bilinear(p, q);
                    x.par_iter_mut().zip(p.par_iter()).for_each(|(x, p)| *x += p * alpha);
                    r.par_iter_mut().zip(q.par_iter()).for_each(|(r, q)| *r -= q * alpha);
                    residual = norm_sq(r).sqrt() / b_norm;
                    let rho_next = bilinear(r, r);
                    let beta = rho_next / rho;
                    rho = rho_next;
                    p.par_iter_mut().zip(r.par_iter()).for_each(|(p, r)| *p = r + *p * beta);
                    iterations += 1;
                    if !residual.is_finite() {
                        return Err(Error::SolverDivergence {
                            iterations,
                            residual,
                            tolerance: *tolerance,
                        });
                    }
                }
            }
        }
        state.step_count += 1;
        state.t += self.dt;
        Ok(())
    }
}

/// Periodic tridiagonal system with constant off-diagonal, solved by
/// Sherman-Morrison around a precomputed Thomas factorisation.
#[derive(Debug, Clone)]
struct CyclicTridiagonal {
    off: Complex64,
    gamma: Complex64,
    cprime: Vec<Complex64>,
    denom: Vec<Complex64>,
    z: Vec<Complex64>,
    z_factor: Complex64,
}

impl CyclicTridiagonal {
    fn new(diag: Vec<Complex64>, off: Complex64) -> Result<Self> {
        let n = diag.len();
        if n < 3 {
            return Err(Error::Grid("cyclic solve needs at least 3 nodes".into()));
        }
        let gamma = -diag[0];
        let mut modified = diag;
        modified[0] -= gamma;
        modified[n - 1] -= off * off / gamma;
        let mut cprime = vec![Complex64::default(); n];
        let mut denom = vec![Complex64::default(); n];
        denom[0] = modified[0];
        cprime[0] = off / denom[0];
        for i in 1..n {
            denom[i] = modified[i] - off * cprime[i - 1];
            if denom[i].norm() == 0.0 {
                return Err(Error::Config("singular Crank-Nicolson matrix".into()));
            }
            cprime[i] = off / denom[i];
        }
        let mut t = Self {
            off,
            gamma,
            cprime,
            denom,
            z: vec![],
            z_factor: Complex64::default(),
        };
        let mut u = vec![Complex64::default(); n];
        u[0] = gamma;
        u[n - 1] = off;
        let mut z = vec![Complex64::default(); n];
        t.thomas(&u, &mut z);
        t.z_factor = Complex64::new(1.0, 0.0) + z[0] + off * z[n - 1] / gamma;
        t.z = z;
        Ok(t)
    }

    fn thomas(&self, r: &[Complex64], x: &mut [Complex64]) {
        let n = r.len();
        x[0] = r[0] / self.denom[0];
        for i in 1..n {
            x[i] = (r[i] - self.off * x[i - 1]) / self.denom[i];
        }
        for i in (0..n - 1).rev() {
            let next = x[i + 1];
            x[i] -= self.cprime[i] * next;
        }
    }

    fn solve(&self, r: &[Complex64], x: &mut [Complex64]) {
        let n = r.len();
        self.thomas(r, x);
        let fact = (x[0] + self.off * x[n - 1] / self.gamma) / self.z_factor;
        for (xi, zi) in x.iter_mut().zip(&self.z) {
            *xi -= fact * zi;
        }
    }
}
