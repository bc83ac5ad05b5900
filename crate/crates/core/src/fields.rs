//! The stationary field of a physical object in its fundamental frame and the
//! same field seen from a boosted frame.
//!
//! A field is a finite sum of harmonics `q′ₖ(r′)·exp(iω′ₖτ′)`. Its real part is
//! the stationary process `g′`, its value in K follows from substituting the
//! co-moving coordinates, and the frame scalar is `Σ|qₖ|²`. The non-periodic
//! remainder is identically zero.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{boost_event, comoving_coords, BoostParameters, FourPosition};
use crate::profile::AmplitudeProfile;
use crate::spectral::SampledSignal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicComponent {
    pub omega: f64,
    pub profile: AmplitudeProfile,
}

impl HarmonicComponent {
    pub fn new(omega: f64, profile: AmplitudeProfile) -> Self {
        Self { omega, profile }
    }
}

/// Rest mass and action constant; the oscillation frequency of the matching
/// harmonic is `ω = mc/ħ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MassDoc", into = "MassDoc")]
pub struct MassParameters {
    m: f64,
    hbar: f64,
    c: f64,
    omega: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MassDoc {
    m: f64,
    hbar: f64,
    #[serde(default = "unit")]
    c: f64,
}

fn unit() -> f64 {
    1.0
}

impl TryFrom<MassDoc> for MassParameters {
    type Error = Error;

    fn try_from(d: MassDoc) -> Result<Self> {
        MassParameters::with_speed(d.m, d.hbar, d.c)
    }
}

impl From<MassParameters> for MassDoc {
    fn from(p: MassParameters) -> Self {
        MassDoc {
            m: p.m,
            hbar: p.hbar,
            c: p.c,
        }
    }
}

impl MassParameters {
    pub fn new(m: f64, hbar: f64) -> Result<Self> {
        Self::with_speed(m, hbar, 1.0)
    }

    pub fn with_speed(m: f64, hbar: f64, c: f64) -> Result<Self> {
        for (name, v) in [("m", m), ("hbar", hbar), ("c", c)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(Self {
            m,
            hbar,
            c,
            omega: m * c / hbar,
        })
    }

    /// Natural units with `ħ = c = 1`, so `m = ω`.
    pub fn natural(omega: f64) -> Result<Self> {
        Self::new(omega, 1.0)
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Rest energy `mc²`.
    pub fn rest_energy(&self) -> f64 {
        self.m * self.c * self.c
    }
}

/// Finite harmonic expansion of a stationary object plus the boost to the
/// observer frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FieldDoc", into = "FieldDoc")]
pub struct FieldSpec {
    components: Vec<HarmonicComponent>,
    boost: BoostParameters,
    mass: Option<MassParameters>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldDoc {
    boost: BoostParameters,
    components: Vec<HarmonicComponent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mass: Option<MassParameters>,
}

impl TryFrom<FieldDoc> for FieldSpec {
    type Error = Error;

    fn try_from(d: FieldDoc) -> Result<Self> {
        let mut spec = FieldSpec::new(d.components, d.boost)?;
        spec.mass = d.mass;
        Ok(spec)
    }
}

impl From<FieldSpec> for FieldDoc {
    fn from(s: FieldSpec) -> Self {
        FieldDoc {
            boost: s.boost,
            components: s.components,
            mass: s.mass,
        }
    }
}

impl FieldSpec {
    pub fn new(components: Vec<HarmonicComponent>, boost: BoostParameters) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidField("a field needs at least one component".into()));
        }
        for (i, c) in components.iter().enumerate() {
            if !(c.omega.is_finite() && c.omega >= 0.0) {
                return Err(Error::InvalidField(format!("component {i}: omega must be finite and >= 0, got {}", c.omega)));
            }
            if c.omega == 0.0 && (i != 0 || !c.profile.is_real_valued()) {
                return Err(Error::InvalidField(format!(
                    "component {i}: omega = 0 is reserved for a real-valued mean as the first component"
                )));
            }
            c.profile.validate()?;
        }
        if components.windows(2).any(|w| w[1].omega <= w[0].omega) {
            return Err(Error::InvalidField("component frequencies must be strictly increasing".into()));
        }
        Ok(Self {
            components,
            boost,
            mass: None,
        })
    }

    /// One harmonic with the given profile.
    pub fn single(omega: f64, profile: AmplitudeProfile, boost: BoostParameters) -> Result<Self> {
        Self::new(vec![HarmonicComponent::new(omega, profile)], boost)
    }

    pub fn with_mass(mut self, mass: MassParameters) -> Self {
        self.mass = Some(mass);
        self
    }

    pub fn with_boost(mut self, boost: BoostParameters) -> Self {
        self.boost = boost;
        self
    }

    pub fn components(&self) -> &[HarmonicComponent] {
        &self.components
    }

    pub fn component(&self, k: usize) -> Result<&HarmonicComponent> {
        self.components.get(k).ok_or(Error::ComponentIndex {
            index: k,
            len: self.components.len(),
        })
    }

    pub fn boost(&self) -> &BoostParameters {
        &self.boost
    }

    pub fn mass(&self) -> Option<&MassParameters> {
        self.mass.as_ref()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidField(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("field documents always serialize")
    }

    /// `ψ′` at the fixed K′ position `r` over `n` times spanning
    /// `τ′ ∈ [−t_max, t_max]`, plus `transient·exp(−τ′²)` standing in for a
    /// decaying non-periodic part.
    pub fn sample_fundamental(&self, r: [f64; 3], t_max: f64, n: usize, transient: f64) -> Result<SampledSignal> {
        SampledSignal::symmetric(
            |t| {
                let psi = eval_psi_fundamental(self, FourPosition::new(r[0], r[1], r[2], t));
                psi + transient * (-t * t).exp()
            },
            t_max,
            n,
        )
    }
}

/// Stationary real process `g′ = Σ Re(q′ₖ·exp(iω′ₖτ′))` at a K′ event.
///
/// Evaluated with the same operations as the real part of
/// [`eval_psi_fundamental`], so the two agree bit for bit.
pub fn eval_g_fundamental(spec: &FieldSpec, rp: FourPosition) -> f64 {
    let r = rp.spatial();
    let mut g = 0.0;
    for c in &spec.components {
        let q = c.profile.value(r);
        let (s, co) = (c.omega * rp.tau).sin_cos();
        g += q.re * co - q.im * s;
    }
    g
}

/// Complex functional field `ψ′ = Σ q′ₖ(r′)·exp(iω′ₖτ′)` at a K′ event.
pub fn eval_psi_fundamental(spec: &FieldSpec, rp: FourPosition) -> Complex64 {
    let r = rp.spatial();
    spec.components
        .iter()
        .map(|c| {
            let (s, co) = (c.omega * rp.tau).sin_cos();
            c.profile.value(r) * Complex64::new(co, s)
        })
        .sum()
}

/// Field in K: `ψ(r, τ) = Σ qₖ(x, y, ξ)·exp(iω′ₖ(η + τ))`.
pub fn eval_psi_boosted(spec: &FieldSpec, e: FourPosition) -> Complex64 {
    let cc = comoving_coords(e, &spec.boost);
    let r = [e.x, e.y, cc.xi];
    let phase_time = cc.eta + e.tau;
    spec.components
        .iter()
        .map(|c| c.profile.value(r) * Complex64::cis(c.omega * phase_time))
        .sum()
}

/// Envelope of the k-th harmonic, `ψᵇ = q(x, y, ξ)·exp(iωη)`.
pub fn eval_psi_b(spec: &FieldSpec, k: usize, e: FourPosition) -> Result<Complex64> {
    let c = spec.component(k)?;
    let cc = comoving_coords(e, &spec.boost);
    Ok(c.profile.value([e.x, e.y, cc.xi]) * Complex64::cis(c.omega * cc.eta))
}

/// The k-th term of [`eval_psi_boosted`], `ψᵇ·exp(iωτ)`.
pub fn eval_component_boosted(spec: &FieldSpec, k: usize, e: FourPosition) -> Result<Complex64> {
    let c = spec.component(k)?;
    let cc = comoving_coords(e, &spec.boost);
    Ok(c.profile.value([e.x, e.y, cc.xi]) * Complex64::cis(c.omega * (cc.eta + e.tau)))
}

/// Frame scalar `φ = Σ|qₖ(x, y, ξ)|²`.
pub fn scalar_field_phi(spec: &FieldSpec, e: FourPosition) -> f64 {
    let xi = comoving_coords(e, &spec.boost).xi;
    let r = [e.x, e.y, xi];
    spec.components.iter().map(|c| c.profile.value(r).norm_sqr()).sum()
}

/// Same scalar evaluated from the fundamental-frame profiles at a K′ event.
pub fn scalar_field_phi_fundamental(spec: &FieldSpec, rp: FourPosition) -> f64 {
    let r = rp.spatial();
    spec.components.iter().map(|c| c.profile.value(r).norm_sqr()).sum()
}

/// Scalar of a normalised functional value, `|f|² = g² + h²`.
pub fn normalised_scalar(f: Complex64) -> f64 {
    f.norm_sqr()
}

/// Fundamental-frame coordinates of an observer event under the field's boost.
pub fn to_fundamental(spec: &FieldSpec, e: FourPosition) -> FourPosition {
    boost_event(e, &spec.boost)
}
