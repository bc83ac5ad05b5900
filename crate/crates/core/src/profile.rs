//! Spatial amplitude profiles `q′(x′, y′, z′)` of the harmonic components.
//!
//! Each profile stores one complex function (modulus `g′`, argument `α′`) and
//! evaluates it together with its gradient and the diagonal of its Hessian in
//! fundamental-frame coordinates.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::BoostParameters;

/// Value, gradient and Hessian diagonal of a profile at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileJet {
    pub value: Complex64,
    pub grad: [Complex64; 3],
    pub hess: [Complex64; 3],
}

impl ProfileJet {
    fn flat(value: Complex64) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self {
            value,
            grad: [zero; 3],
            hess: [zero; 3],
        }
    }

    pub fn laplacian(&self) -> Complex64 {
        self.hess[0] + self.hess[1] + self.hess[2]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AmplitudeProfile {
    /// `A`
    Constant {
        #[serde(deserialize_with = "real_or_complex")]
        amplitude: Complex64,
    },
    /// `A·exp(i k z′)`
    PlaneWave {
        #[serde(deserialize_with = "real_or_complex")]
        amplitude: Complex64,
        k: f64,
    },
    /// `A·exp(−(z′ − z₀)²/(2σ²))`, flat in x′ and y′.
    Gaussian {
        #[serde(deserialize_with = "real_or_complex")]
        amplitude: Complex64,
        center: f64,
        sigma: f64,
    },
    /// Product of normalised Hermite functions `ψₙ((x′ₐ − cₐ)/L)` over the
    /// active axes; harmonic-oscillator eigenfunction of length scale `L`.
    HermiteGauss {
        #[serde(deserialize_with = "real_or_complex")]
        amplitude: Complex64,
        length: f64,
        orders: [u32; 3],
        active: [bool; 3],
        #[serde(default)]
        center: [f64; 3],
    },
    /// Values tabulated along z′ on a uniform periodic grid, interpolated by
    /// the band-limited trigonometric series through the samples.
    Tabulated(TabulatedProfile),
}

/// Amplitudes are written `[re, im]`; a bare number is read as real.
fn real_or_complex<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Complex64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Doc {
        Real(f64),
        Pair(f64, f64),
    }
    Ok(match Doc::deserialize(d)? {
        Doc::Real(re) => Complex64::new(re, 0.0),
        Doc::Pair(re, im) => Complex64::new(re, im),
    })
}

impl AmplitudeProfile {
    pub fn constant(amplitude: f64) -> Self {
        Self::Constant {
            amplitude: Complex64::new(amplitude, 0.0),
        }
    }

    pub fn plane_wave(amplitude: f64, k: f64) -> Self {
        Self::PlaneWave {
            amplitude: Complex64::new(amplitude, 0.0),
            k,
        }
    }

    pub fn gaussian(amplitude: f64, center: f64, sigma: f64) -> Self {
        Self::Gaussian {
            amplitude: Complex64::new(amplitude, 0.0),
            center,
            sigma,
        }
    }

    /// Harmonic-oscillator eigenfunction on the given axes, centred at the origin.
    pub fn hermite_gauss(amplitude: f64, length: f64, orders: [u32; 3], active: [bool; 3]) -> Self {
        Self::HermiteGauss {
            amplitude: Complex64::new(amplitude, 0.0),
            length,
            orders,
            active,
            center: [0.0; 3],
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Constant { .. } => "constant",
            Self::PlaneWave { .. } => "plane_wave",
            Self::Gaussian { .. } => "gaussian",
            Self::HermiteGauss { .. } => "hermite_gauss",
            Self::Tabulated(_) => "tabulated",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidField(msg));
        let finite_c = |a: &Complex64| a.re.is_finite() && a.im.is_finite();
        match self {
            Self::Constant { amplitude } if !finite_c(amplitude) => {
                bad("constant amplitude must be finite".into())
            }
            Self::PlaneWave { amplitude, k } if !finite_c(amplitude) || !k.is_finite() => {
                bad("plane wave parameters must be finite".into())
            }
            Self::Gaussian {
                amplitude,
                center,
                sigma,
            } if !finite_c(amplitude) || !center.is_finite() || !(sigma.is_finite() && *sigma > 0.0) => {
                bad(format!("gaussian needs finite amplitude/center and sigma > 0, got sigma = {sigma}"))
            }
            Self::HermiteGauss {
                amplitude,
                length,
                center,
                orders,
                ..
            } => {
                if !finite_c(amplitude) || !(length.is_finite() && *length > 0.0) {
                    bad(format!("hermite_gauss needs finite amplitude and length > 0, got {length}"))
                } else if center.iter().any(|c| !c.is_finite()) {
                    bad("hermite_gauss center must be finite".into())
                } else if orders.iter().any(|&n| n > 60) {
                    bad("hermite_gauss orders above 60 are not supported".into())
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Whether the profile takes only real values (required of a mean component).
    pub fn is_real_valued(&self) -> bool {
        match self {
            Self::Constant { amplitude } => amplitude.im == 0.0,
            Self::PlaneWave { amplitude, k } => amplitude.im == 0.0 && *k == 0.0,
            Self::Gaussian { amplitude, .. } | Self::HermiteGauss { amplitude, .. } => amplitude.im == 0.0,
            Self::Tabulated(t) => t.values.iter().all(|v| v.im == 0.0),
        }
    }

    pub fn value(&self, p: [f64; 3]) -> Complex64 {
        match self {
            Self::Constant { amplitude } => *amplitude,
            Self::PlaneWave { amplitude, k } => amplitude * Complex64::cis(k * p[2]),
            Self::Gaussian {
                amplitude,
                center,
                sigma,
            } => {
                let u = (p[2] - center) / sigma;
                amplitude * (-0.5 * u * u).exp()
            }
            Self::HermiteGauss { .. } | Self::Tabulated(_) => self.jet(p).value,
        }
    }

    /// Modulus `g′` of the profile.
    pub fn modulus(&self, p: [f64; 3]) -> f64 {
        self.value(p).norm()
    }

    /// Argument `α′` of the profile, in (−π, π].
    pub fn argument(&self, p: [f64; 3]) -> f64 {
        self.value(p).arg()
    }

    pub fn jet(&self, p: [f64; 3]) -> ProfileJet {
        match self {
            Self::Constant { amplitude } => ProfileJet::flat(*amplitude),
            Self::PlaneWave { amplitude, k } => {
                let q = amplitude * Complex64::cis(k * p[2]);
                let mut jet = ProfileJet::flat(q);
                jet.grad[2] = Complex64::new(0.0, *k) * q;
                jet.hess[2] = -k * k * q;
                jet
            }
            Self::Gaussian {
                amplitude,
                center,
                sigma,
            } => {
                let d = p[2] - center;
                let s2 = sigma * sigma;
                let q = amplitude * (-0.5 * d * d / s2).exp();
                let mut jet = ProfileJet::flat(q);
                jet.grad[2] = q * (-d / s2);
                jet.hess[2] = q * (d * d / (s2 * s2) - 1.0 / s2);
                jet
            }
            Self::HermiteGauss {
                amplitude,
                length,
                orders,
                active,
                center,
            } => {
                let mut f = [[1.0, 0.0, 0.0]; 3];
                for axis in 0..3 {
                    if active[axis] {
                        let s = (p[axis] - center[axis]) / length;
                        let (v, dv) = hermite_function(orders[axis], s);
                        let n = orders[axis] as f64;
                        f[axis] = [v, dv / length, (s * s - (2.0 * n + 1.0)) * v / (length * length)];
                    }
                }
                let prod = |skip: usize, d: usize| -> f64 {
                    (0..3)
                        .map(|a| if a == skip { f[a][d] } else { f[a][0] })
                        .product()
                };
                let value = amplitude * (f[0][0] * f[1][0] * f[2][0]);
                ProfileJet {
                    value,
                    grad: [0, 1, 2].map(|a| amplitude * prod(a, 1)),
                    hess: [0, 1, 2].map(|a| amplitude * prod(a, 2)),
                }
            }
            Self::Tabulated(t) => t.jet(p[2]),
        }
    }

    /// Length over which the profile changes appreciably; finite-difference
    /// spacings are taken as fractions of it.
    pub fn characteristic_length(&self) -> f64 {
        match self {
            Self::Constant { .. } => 1.0,
            Self::PlaneWave { k, .. } => {
                if *k == 0.0 {
                    1.0
                } else {
                    2.0 * PI / k.abs()
                }
            }
            Self::Gaussian { sigma, .. } => *sigma,
            Self::HermiteGauss { length, .. } => *length,
            Self::Tabulated(t) => t.shortest_wavelength(),
        }
    }

    /// Fundamental-frame box where the profile is numerically significant.
    pub fn support_box(&self) -> [(f64, f64); 3] {
        let unit = (-1.0, 1.0);
        match self {
            Self::Constant { .. } => [unit; 3],
            Self::PlaneWave { .. } => {
                let l = self.characteristic_length();
                [unit, unit, (-l, l)]
            }
            Self::Gaussian { center, sigma, .. } => [unit, unit, (center - 3.0 * sigma, center + 3.0 * sigma)],
            Self::HermiteGauss {
                length,
                orders,
                active,
                center,
                ..
            } => [0, 1, 2].map(|a| {
                if active[a] {
                    let half = ((2.0 * orders[a] as f64 + 1.0).sqrt() + 1.0) * length;
                    (center[a] - half, center[a] + half)
                } else {
                    unit
                }
            }),
            Self::Tabulated(t) => [unit, unit, (t.z0, t.z0 + t.period())],
        }
    }

    /// The function `u(x, y, z) = ∇²q/q` in the observer frame, when it does
    /// not depend on time for this boost.
    ///
    /// With `β ≠ 0` the profile is evaluated at `ξ = γ(z − βτ)`, so only
    /// profiles whose z-dependence gives a constant `q_ξξ/q` qualify.
    pub fn separable_potential(&self, boost: &BoostParameters) -> Option<QuadraticPotential> {
        let g2 = boost.gamma() * boost.gamma();
        let moving = boost.beta() != 0.0;
        match self {
            Self::Constant { .. } => Some(QuadraticPotential::constant(0.0)),
            Self::PlaneWave { k, .. } => Some(QuadraticPotential::constant(-g2 * k * k)),
            Self::Gaussian { center, sigma, .. } if !moving => {
                let s2 = sigma * sigma;
                Some(QuadraticPotential {
                    offset: -1.0 / s2,
                    curvature: [0.0, 0.0, 1.0 / (s2 * s2)],
                    center: [0.0, 0.0, *center],
                })
            }
            Self::HermiteGauss {
                length,
                orders,
                active,
                center,
                ..
            } if !(moving && active[2]) => {
                let l2 = length * length;
                let mut pot = QuadraticPotential {
                    offset: 0.0,
                    curvature: [0.0; 3],
                    center: *center,
                };
                for a in 0..3 {
                    if active[a] {
                        pot.offset -= (2.0 * orders[a] as f64 + 1.0) / l2;
                        pot.curvature[a] = 1.0 / (l2 * l2);
                    }
                }
                Some(pot)
            }
            _ => None,
        }
    }
}

/// `u(r) = offset + Σₐ curvatureₐ·(rₐ − centerₐ)²`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticPotential {
    pub offset: f64,
    pub curvature: [f64; 3],
    pub center: [f64; 3],
}

impl QuadraticPotential {
    pub fn constant(offset: f64) -> Self {
        Self {
            offset,
            curvature: [0.0; 3],
            center: [0.0; 3],
        }
    }

    pub fn eval(&self, r: [f64; 3]) -> f64 {
        (0..3).fold(self.offset, |u, a| {
            let d = r[a] - self.center[a];
            u + self.curvature[a] * d * d
        })
    }
}

/// Normalised Hermite function `ψₙ(s)` and its derivative.
fn hermite_function(n: u32, s: f64) -> (f64, f64) {
    let psi0 = PI.powf(-0.25) * (-0.5 * s * s).exp();
    let mut prev = 0.0;
    let mut cur = psi0;
    for j in 0..n {
        let j = j as f64;
        let next = (2.0 / (j + 1.0)).sqrt() * s * cur - (j / (j + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    // ψₙ′ = s ψₙ − sqrt(2(n+1)) ψₙ₊₁ = sqrt(2n) ψₙ₋₁ − s ψₙ
    let n = n as f64;
    let deriv = (2.0 * n).sqrt() * prev - s * cur;
    (cur, deriv)
}

/// Complex samples `values[j]` at `z′ = z0 + j·dz`, extended periodically with
/// period `N·dz`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableDoc", into = "TableDoc")]
pub struct TabulatedProfile {
    z0: f64,
    dz: f64,
    values: Vec<Complex64>,
    modes: Vec<(f64, Complex64)>,
    nyquist: Option<(f64, Complex64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableDoc {
    z0: f64,
    dz: f64,
    values: Vec<Complex64>,
}

impl TryFrom<TableDoc> for TabulatedProfile {
    type Error = Error;

    fn try_from(doc: TableDoc) -> Result<Self> {
        TabulatedProfile::new(doc.z0, doc.dz, doc.values)
    }
}

impl From<TabulatedProfile> for TableDoc {
    fn from(t: TabulatedProfile) -> Self {
        TableDoc {
            z0: t.z0,
            dz: t.dz,
            values: t.values,
        }
    }
}

impl TabulatedProfile {
    pub fn new(z0: f64, dz: f64, values: Vec<Complex64>) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::InvalidField("tabulated profile needs at least 2 values".into()));
        }
        if !(dz.is_finite() && dz > 0.0) || !z0.is_finite() {
            return Err(Error::InvalidField(format!("tabulated profile needs finite z0 and dz > 0, got dz = {dz}")));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidField("tabulated values must be finite".into()));
        }

        let mut spectrum = values.clone();
        FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut spectrum);
        let period = n as f64 * dz;
        let scale = 1.0 / n as f64;
        let mut modes = Vec::with_capacity(n);
        let mut nyquist = None;
        for (m, c) in spectrum.into_iter().enumerate() {
            let c = c * scale;
            if 2 * m == n {
                nyquist = Some((PI / dz, c));
                continue;
            }
            let index = if 2 * m < n { m as f64 } else { m as f64 - n as f64 };
            modes.push((2.0 * PI * index / period, c));
        }
        Ok(Self {
            z0,
            dz,
            values,
            modes,
            nyquist,
        })
    }

    pub fn period(&self) -> f64 {
        self.values.len() as f64 * self.dz
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    fn shortest_wavelength(&self) -> f64 {
        let cmax = self.modes.iter().map(|(_, c)| c.norm()).fold(0.0, f64::max);
        let kmax = self
            .modes
            .iter()
            .chain(self.nyquist.iter())
            .filter(|(_, c)| c.norm() > 1e-12 * cmax.max(f64::MIN_POSITIVE))
            .map(|(k, _)| k.abs())
            .fold(0.0, f64::max);
        if kmax == 0.0 {
            self.period()
        } else {
            2.0 * PI / kmax
        }
    }

    fn jet(&self, z: f64) -> ProfileJet {
        let u = z - self.z0;
        let zero = Complex64::new(0.0, 0.0);
        let (mut v, mut d, mut dd) = (zero, zero, zero);
        for &(k, c) in &self.modes {
            let term = c * Complex64::cis(k * u);
            v += term;
            d += term * Complex64::new(0.0, k);
            dd -= term * (k * k);
        }
        if let Some((k, c)) = self.nyquist {
            let (s, co) = (k * u).sin_cos();
            v += c * co;
            d -= c * (k * s);
            dd -= c * (k * k * co);
        }
        let mut jet = ProfileJet::flat(v);
        jet.grad[2] = d;
        jet.hess[2] = dd;
        jet
    }
}
