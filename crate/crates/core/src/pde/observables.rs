use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::ordered_sum;
use super::{GridState, Physics, SolverConfig};

/// Integral diagnostics of one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub t: f64,
    pub step: usize,
    /// `sqrt(Σ|ψ|²·dV)`
    pub norm: f64,
    /// `⟨ψ, Hψ⟩` for the Schrödinger form; the quadratic invariant of the
    /// leapfrog scheme for second-order equations.
    pub energy: f64,
    pub centroid: [f64; 3],
    pub width: [f64; 3],
}

pub fn measure_observables(state: &GridState, cfg: &SolverConfig) -> Observables {
    let grid = &state.grid;
    let f = &state.field;
    let n = grid.len();
    let dv = grid.cell_volume();
    let mass = ordered_sum(n, |i| f[i].norm_sqr());
    let mut centroid = [0.0; 3];
    let mut width = [0.0; 3];
    if mass > 0.0 {
        for &a in grid.active_axes() {
            let c = ordered_sum(n, |i| grid.coords(i)[a] * f[i].norm_sqr()) / mass;
            let w = ordered_sum(n, |i| (grid.coords(i)[a] - c).powi(2) * f[i].norm_sqr()) / mass;
            centroid[a] = c;
            width[a] = w.sqrt();
        }
    }
    let mut lap = vec![Complex64::default(); n];
    grid.laplacian(f, &mut lap);
    let energy = match &cfg.physics {
        Physics::Schrodinger { mass, potential } => {
            let kinetic = mass.hbar() * mass.hbar() / (2.0 * mass.m());
            let u: Vec<f64> = match potential {
                Some(p) => grid.sample(|r| kinetic * p.eval(r)),
                None => vec![0.0; n],
            };
            dv * ordered_sum(n, |i| (f[i].conj() * (f[i] * u[i] - lap[i] * kinetic)).re)
        }
        Physics::KleinGordon { mass_scalar } => {
            let m = *mass_scalar;
            let q = 0.25 * cfg.dt * cfg.dt;
            let pi = state.pi.as_deref();
            0.5 * dv
                * ordered_sum(n, |i| {
                    let k = f[i] * m - lap[i];
                    let p = pi.map_or(0.0, |p| p[i].norm_sqr());
                    p + (f[i].conj() * k).re - q * k.norm_sqr()
                })
        }
    };
    Observables {
        t: state.t,
        step: state.step_count,
        norm: (mass * dv).sqrt(),
        energy,
        centroid,
        width,
    }
}

/// Deviation and trend statistics of a conserved quantity's history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftStatistics {
    /// `max|E − E₀|/|E₀|`
    pub max_rel_deviation: f64,
    pub window_means: Vec<f64>,
    /// Window means change monotonically throughout (a sign test on their
    /// successive differences).
    pub monotone: bool,
}

pub fn drift_statistics(values: &[f64], windows: usize) -> DriftStatistics {
    let Some(&first) = values.first() else {
        return DriftStatistics {
            max_rel_deviation: 0.0,
            window_means: vec![],
            monotone: false,
        };
    };
    let scale = if first == 0.0 { 1.0 } else { first.abs() };
    let max_rel_deviation = values.iter().map(|v| (v - first).abs() / scale).fold(0.0, f64::max);
    let windows = windows.clamp(1, values.len());
    let size = values.len() / windows;
    let window_means: Vec<f64> = (0..windows)
        .map(|w| values[w * size..(w + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let signs: Vec<f64> = window_means.windows(2).map(|p| (p[1] - p[0]).signum()).collect();
    let monotone = signs.len() >= 2 && (signs.iter().all(|&s| s > 0.0) || signs.iter().all(|&s| s < 0.0));
    DriftStatistics {
        max_rel_deviation,
        window_means,
        monotone,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::MassParameters;
    use crate::pde::Grid;

    fn schrodinger_cfg() -> SolverConfig {
        SolverConfig::schrodinger(0.01, 1, MassParameters::natural(1.0).unwrap(), None)
    }

    #[test]
    fn normalised_gaussian_has_unit_norm() {
        let mut errs = vec![];
        for n in [64, 128] {
            let g = Grid::new_1d(n, 8.0).unwrap();
            let sigma: f64 = 0.2;
            let amp = (std::f64::consts::PI * sigma * sigma).powf(-0.25);
            let s = GridState::from_fn(g, |r| Complex64::new(amp * (-r[2] * r[2] / (2.0 * sigma * sigma)).exp(), 0.0));
            let o = measure_observables(&s, &schrodinger_cfg());
            errs.push((o.norm - 1.0).abs());
            assert!(o.centroid[2].abs() < 1e-14);
            assert!((o.width[2] - sigma / 2f64.sqrt()).abs() < 1e-3);
        }
        assert!(errs[1] < 1e-6, "{errs:?}");
    }

    #[test]
    fn zero_state_has_zero_observables() {
        let g = Grid::new_3d([8, 8, 8], [1.0; 3]).unwrap();
        let s = GridState::zeros(g, true);
        for cfg in [schrodinger_cfg(), SolverConfig::klein_gordon(0.01, 1, 1.0)] {
            let o = measure_observables(&s, &cfg);
            assert_eq!((o.norm, o.energy, o.centroid, o.width), (0.0, 0.0, [0.0; 3], [0.0; 3]));
        }
    }

    #[test]
    fn plane_wave_centroid_is_central() {
        let g = Grid::new_1d(50, 2.0 * std::f64::consts::PI).unwrap();
        let s = GridState::from_fn(g, |r| Complex64::cis(3.0 * r[2]));
        let o = measure_observables(&s, &schrodinger_cfg());
        assert!(o.centroid[2].abs() < 1e-14);
        // kinetic energy k²/2 per unit norm
        assert!((o.energy / (o.norm * o.norm) - 4.5).abs() < 0.1);
    }

    #[test]
    fn drift_detection() {
        let flat = [1.0, 1.0 + 1e-9, 1.0 - 1e-9, 1.0, 1.0 + 1e-9, 1.0 - 1e-9];
        let d = drift_statistics(&flat, 3);
        assert!(!d.monotone);
        assert!((d.max_rel_deviation - 1e-9).abs() < 1e-15);
        let rising: Vec<f64> = (0..100).map(|i| 1.0 + 1e-8 * i as f64).collect();
        assert!(drift_statistics(&rising, 10).monotone);
        assert!(!drift_statistics(&[], 4).monotone);
    }
}
