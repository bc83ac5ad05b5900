//! Lorentz boosts along the z axis between the fundamental frame K′ and an
//! observer frame K.
//!
//! The time coordinate is always stored in length units (cτ), so the
//! transformation is applied in its dimensionless form and the speed constant
//! only matters where physical constants enter (mass terms, `mc/ħ`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boost velocity along z, with the Lorentz factor cached.
///
/// `beta > 0` means K moves along +z relative to K′.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoostDoc", into = "BoostDoc")]
pub struct BoostParameters {
    beta: f64,
    gamma: f64,
    c: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoostDoc {
    beta: f64,
    #[serde(default = "unit_speed", skip_serializing_if = "is_unit_speed")]
    c: f64,
}

fn unit_speed() -> f64 {
    1.0
}

fn is_unit_speed(c: &f64) -> bool {
    *c == 1.0
}

impl TryFrom<BoostDoc> for BoostParameters {
    type Error = Error;

    fn try_from(doc: BoostDoc) -> Result<Self> {
        BoostParameters::with_speed(doc.beta, doc.c)
    }
}

impl From<BoostParameters> for BoostDoc {
    fn from(b: BoostParameters) -> Self {
        BoostDoc { beta: b.beta, c: b.c }
    }
}

impl BoostParameters {
    /// Boost in natural units (`c = 1`).
    pub fn new(beta: f64) -> Result<Self> {
        Self::with_speed(beta, 1.0)
    }

    pub fn with_speed(beta: f64, c: f64) -> Result<Self> {
        if !beta.is_finite() || beta.abs() >= 1.0 {
            return Err(Error::SuperluminalBoost(beta.abs()));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "speed constant must be positive and finite, got {c}"
            )));
        }
        // (1 - beta)(1 + beta) keeps precision as |beta| -> 1
        let gamma = 1.0 / ((1.0 - beta) * (1.0 + beta)).sqrt();
        Ok(Self { beta, gamma, c })
    }

    pub fn rest() -> Self {
        Self {
            beta: 0.0,
            gamma: 1.0,
            c: 1.0,
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Frame velocity `V = βc`.
    pub fn velocity(&self) -> f64 {
        self.beta * self.c
    }

    /// `γ - 1` without cancellation for small β.
    pub fn gamma_minus_one(&self) -> f64 {
        let g = self.gamma;
        self.beta * self.beta * g * g / (g + 1.0)
    }

    /// The boost taking K back to K′.
    pub fn inverse(&self) -> Self {
        Self {
            beta: -self.beta,
            gamma: self.gamma,
            c: self.c,
        }
    }

    /// Relativistic composition: applying `self` then `other` equals one boost
    /// with the returned parameters.
    pub fn compose(&self, other: &BoostParameters) -> Result<Self> {
        let beta = (self.beta + other.beta) / (1.0 + self.beta * other.beta);
        Self::with_speed(beta, self.c)
    }
}

/// Build a boost; fails for `|beta| >= 1`.
pub fn make_boost(beta: f64) -> Result<BoostParameters> {
    BoostParameters::new(beta)
}

/// An event `(x, y, z, τ)` with τ in length units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FourPosition {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub tau: f64,
}

impl FourPosition {
    pub const fn new(x: f64, y: f64, z: f64, tau: f64) -> Self {
        Self { x, y, z, tau }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.z, self.tau]
    }

    pub fn spatial(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Minkowski interval `τ² − x² − y² − z²` from the origin.
    pub fn interval(&self) -> f64 {
        self.tau * self.tau - self.x * self.x - self.y * self.y - self.z * self.z
    }
}

/// Co-moving coordinates of an event: `ξ = γ(z − βτ)` and `η = γ(τ − βz) − τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComovingCoords {
    pub xi: f64,
    pub eta: f64,
}

/// Coordinates in K′ of an event given in K.
pub fn boost_event(e: FourPosition, b: &BoostParameters) -> FourPosition {
    let (beta, gamma) = (b.beta, b.gamma);
    FourPosition {
        x: e.x,
        y: e.y,
        z: gamma * (e.z - beta * e.tau),
        tau: gamma * (e.tau - beta * e.z),
    }
}

/// Coordinates in K of an event given in K′.
pub fn inverse_boost_event(e: FourPosition, b: &BoostParameters) -> FourPosition {
    boost_event(e, &b.inverse())
}

pub fn comoving_coords(e: FourPosition, b: &BoostParameters) -> ComovingCoords {
    let (beta, gamma) = (b.beta, b.gamma);
    ComovingCoords {
        xi: gamma * (e.z - beta * e.tau),
        eta: gamma * (e.tau - beta * e.z) - e.tau,
    }
}
