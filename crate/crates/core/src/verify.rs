//! Numerical certification of the envelope derivatives and of the equations
//! they combine into.
//!
//! Every residual is evaluated in multiplied-through form, so no quantity is
//! divided by the field except in the scalar-invariance ratio. For fields of
//! the harmonic form the equations are identities, and the residuals are pure
//! round-off when analytic derivatives are used.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{eval_component_boosted, eval_psi_b, FieldSpec, MassParameters};
use crate::fit::loglog_slope;
use crate::kinematics::{boost_event, comoving_coords, inverse_boost_event, FourPosition};
use crate::profile::ProfileJet;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
    Z,
    Tau,
}

impl Axis {
    pub const ALL: [Axis; 4] = [Axis::X, Axis::Y, Axis::Z, Axis::Tau];

    fn shift(self, e: FourPosition, d: f64) -> FourPosition {
        let mut e = e;
        match self {
            Axis::X => e.x += d,
            Axis::Y => e.y += d,
            Axis::Z => e.z += d,
            Axis::Tau => e.tau += d,
        }
        e
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DerivOrder {
    First,
    Second,
}

/// Central difference of `field` at `e` along `axis`.
pub fn fd_partial<F>(field: F, e: FourPosition, axis: Axis, order: DerivOrder, h: f64) -> Result<Complex64>
where
    F: Fn(FourPosition) -> Complex64,
{
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter(format!("stencil spacing must be positive, got {h}")));
    }
    let plus = field(axis.shift(e, h));
    let minus = field(axis.shift(e, -h));
    let finite = |v: Complex64| v.re.is_finite() && v.im.is_finite();
    let value = match order {
        DerivOrder::First => (plus - minus) / (2.0 * h),
        DerivOrder::Second => {
            let mid = field(e);
            if !finite(mid) {
                return Err(Error::NonFinite(format!("field value at {e:?}")));
            }
            (plus - mid * 2.0 + minus) / (h * h)
        }
    };
    if !finite(plus) || !finite(minus) || !finite(value) {
        return Err(Error::NonFinite(format!("field near {e:?} along {axis:?}")));
    }
    Ok(value)
}

/// First and second partials of a field at one event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeBundle {
    pub d_tau: Complex64,
    pub d_x: Complex64,
    pub d_y: Complex64,
    pub d_z: Complex64,
    pub d2_tau: Complex64,
    pub d2_x: Complex64,
    pub d2_y: Complex64,
    pub d2_z: Complex64,
}

impl DerivativeBundle {
    pub const NAMES: [&'static str; 8] = ["d_tau", "d_x", "d_y", "d_z", "d2_tau", "d2_x", "d2_y", "d2_z"];

    pub fn entries(&self) -> [Complex64; 8] {
        [
            self.d_tau, self.d_x, self.d_y, self.d_z, self.d2_tau, self.d2_x, self.d2_y, self.d2_z,
        ]
    }

    pub fn get(&self, axis: Axis, order: DerivOrder) -> Complex64 {
        use { Axis::*, DerivOrder::* };
        match (axis, order) {
            (Tau, First) => self.d_tau,
            (X, First) => self.d_x,
            (Y, First) => self.d_y,
            (Z, First) => self.d_z,
            (Tau, Second) => self.d2_tau,
            (X, Second) => self.d2_x,
            (Y, Second) => self.d2_y,
            (Z, Second) => self.d2_z,
        }
    }

    pub fn laplacian(&self) -> Complex64 {
        self.d2_x + self.d2_y + self.d2_z
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// All eight partials by central differences with spacing `h`.
    pub fn from_differences<F>(field: F, e: FourPosition, h: f64) -> Result<Self>
    where
        F: Fn(FourPosition) -> Complex64,
    {
        let d = |axis, order| fd_partial(&field, e, axis, order, h);
        use { Axis::*, DerivOrder::* };
        Ok(Self {
            d_tau: d(Tau, First)?,
            d_x: d(X, First)?,
            d_y: d(Y, First)?,
            d_z: d(Z, First)?,
            d2_tau: d(Tau, Second)?,
            d2_x: d(X, Second)?,
            d2_y: d(Y, Second)?,
            d2_z: d(Z, Second)?,
        })
    }
}

/// Profile jet and boost quantities of one harmonic at one observer event.
struct Local {
    beta: f64,
    gamma: f64,
    gm1: f64,
    omega: f64,
    jet: ProfileJet,
    /// `exp(iωη)`
    envelope_phase: Complex64,
    /// `exp(iωτ)`
    carrier: Complex64,
}

impl Local {
    fn new(spec: &FieldSpec, k: usize, e: FourPosition) -> Result<Self> {
        let c = spec.component(k)?;
        let b = spec.boost();
        let cc = comoving_coords(e, b);
        Ok(Self {
            beta: b.beta(),
            gamma: b.gamma(),
            gm1: b.gamma_minus_one(),
            omega: c.omega,
            jet: c.profile.jet([e.x, e.y, cc.xi]),
            envelope_phase: Complex64::cis(c.omega * cc.eta),
            carrier: Complex64::cis(c.omega * e.tau),
        })
    }

    fn q(&self) -> Complex64 {
        self.jet.value
    }

    fn q_xi(&self) -> Complex64 {
        self.jet.grad[2]
    }

    fn q_xixi(&self) -> Complex64 {
        self.jet.hess[2]
    }

    /// Observer-frame `∂²q/∂z² = γ²·q_ξξ`.
    fn q_zz(&self) -> Complex64 {
        self.q_xixi() * (self.gamma * self.gamma)
    }

    /// Observer-frame Laplacian of `q(x, y, ξ)`.
    fn lap_q(&self) -> Complex64 {
        self.jet.hess[0] + self.jet.hess[1] + self.q_zz()
    }

    fn envelope_derivatives(&self) -> DerivativeBundle {
        let (b, g, gm1, w) = (self.beta, self.gamma, self.gm1, self.omega);
        let (q, qxi, qxixi) = (self.q(), self.q_xi(), self.q_xixi());
        let ph = self.envelope_phase;
        DerivativeBundle {
            d_tau: (qxi * (-g * b) + I * (w * gm1) * q) * ph,
            d_z: (qxi * g - I * (g * w * b) * q) * ph,
            d_x: self.jet.grad[0] * ph,
            d_y: self.jet.grad[1] * ph,
            d2_tau: (qxixi * (g * g * b * b) - I * (2.0 * g * gm1 * w * b) * qxi - q * (w * w * gm1 * gm1)) * ph,
            d2_z: (qxixi * (g * g) - q * (g * g * w * w * b * b) - I * (2.0 * g * g * w * b) * qxi) * ph,
            d2_x: self.jet.hess[0] * ph,
            d2_y: self.jet.hess[1] * ph,
        }
    }

    fn field_derivatives(&self) -> DerivativeBundle {
        let env = self.envelope_derivatives();
        let psi_b = self.q() * self.envelope_phase;
        let w = self.omega;
        let c = self.carrier;
        DerivativeBundle {
            d_tau: (env.d_tau + I * w * psi_b) * c,
            d_x: env.d_x * c,
            d_y: env.d_y * c,
            d_z: env.d_z * c,
            d2_tau: (env.d2_tau + I * (2.0 * w) * env.d_tau - psi_b * (w * w)) * c,
            d2_x: env.d2_x * c,
            d2_y: env.d2_y * c,
            d2_z: env.d2_z * c,
        }
    }
}

/// Closed-form partials of the envelope `ψᵇ = q(x, y, ξ)·exp(iωη)`.
pub fn analytic_derivatives_psi_b(spec: &FieldSpec, k: usize, e: FourPosition) -> Result<DerivativeBundle> {
    Ok(Local::new(spec, k, e)?.envelope_derivatives())
}

/// Closed-form partials of the k-th harmonic `ψ = ψᵇ·exp(iωτ)`.
pub fn analytic_derivatives_psi(spec: &FieldSpec, k: usize, e: FourPosition) -> Result<DerivativeBundle> {
    Ok(Local::new(spec, k, e)?.field_derivatives())
}

/// Where the left-hand-side derivatives of a residual come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeSource {
    Analytic,
    FiniteDifference { h: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualOptions {
    /// Events with `|q| ≤ eps_q_rel·max|q|` are skipped.
    pub eps_q_rel: f64,
    /// Frequency used in the equation's coefficients, when it differs from
    /// the component's (e.g. taken from `mc/ħ`).
    pub equation_omega: Option<f64>,
    pub derivatives: DerivativeSource,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        Self {
            eps_q_rel: 1e-8,
            equation_omega: None,
            derivatives: DerivativeSource::Analytic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquationId {
    /// First partials of the envelope against central differences.
    FirstDerivatives,
    /// Second partials of the envelope against central differences.
    SecondDerivatives,
    /// Envelope equation in ω.
    Envelope,
    /// Envelope equation in ħ, m, c with a potential.
    Schrodinger,
    /// Second-order equation with the frame-scalar mass term.
    KleinGordon,
    Wave,
    Scalar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMode {
    /// The equation with γ retained.
    Exact,
    /// The non-relativistic limit γ → 1.
    Unity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub beta: f64,
    pub omega: f64,
    pub equation_omega: f64,
    pub component: usize,
    pub profile_kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_mode: Option<GammaMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass_scalar: Option<f64>,
}

/// Residual statistics over a set of events.
///
/// `max_rel` is the largest ratio of an event's residual to the magnitude of
/// the largest term entering it at that event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub equation_id: EquationId,
    pub sample_count: usize,
    pub skipped: usize,
    pub max_abs: f64,
    pub rms: f64,
    pub max_rel: f64,
    pub scale: f64,
    pub stencil_spacing: Option<f64>,
    pub metadata: ReportMetadata,
}

impl ResidualReport {
    /// `max_abs ≤ tol × local scale` at every event.
    pub fn within(&self, tol: f64) -> bool {
        self.max_rel <= tol
    }
}

#[derive(Default)]
struct Accumulator {
    n: usize,
    sum_sq: f64,
    max_abs: f64,
    max_rel: f64,
    scale: f64,
}

impl Accumulator {
    fn push(&mut self, residual: f64, scale: f64) {
        self.n += 1;
        self.sum_sq += residual * residual;
        self.max_abs = self.max_abs.max(residual);
        self.scale = self.scale.max(scale);
        let rel = if scale > 0.0 {
            residual / scale
        } else if residual == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        self.max_rel = self.max_rel.max(rel);
    }

    fn finish(self, equation_id: EquationId, skipped: usize, stencil_spacing: Option<f64>, metadata: ReportMetadata) -> ResidualReport {
        let rms = if self.n == 0 { 0.0 } else { (self.sum_sq / self.n as f64).sqrt() };
        ResidualReport {
            equation_id,
            sample_count: self.n,
            skipped,
            max_abs: self.max_abs,
            rms: rms.min(self.max_abs),
            max_rel: self.max_rel,
            scale: self.scale,
            stencil_spacing,
            metadata,
        }
    }
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(0.0, f64::max)
}

/// Events whose profile modulus is significant, with local data prepared.
fn significant_events(spec: &FieldSpec, k: usize, events: &[FourPosition], eps_q_rel: f64) -> Result<(Vec<(FourPosition, Local)>, usize)> {
    let locals = events
        .iter()
        .map(|&e| Local::new(spec, k, e).map(|l| (e, l)))
        .collect::<Result<Vec<_>>>()?;
    let qmax = locals.iter().map(|(_, l)| l.q().norm()).fold(0.0, f64::max);
    let threshold = eps_q_rel * qmax;
    let total = locals.len();
    let kept: Vec<_> = locals.into_iter().filter(|(_, l)| l.q().norm() > threshold).collect();
    let skipped = total - kept.len();
    Ok((kept, skipped))
}

fn metadata(spec: &FieldSpec, k: usize, equation_omega: f64) -> Result<ReportMetadata> {
    let c = spec.component(k)?;
    Ok(ReportMetadata {
        beta: spec.boost().beta(),
        omega: c.omega,
        equation_omega,
        component: k,
        profile_kind: c.profile.kind().to_string(),
        gamma_mode: None,
        mass_scalar: None,
    })
}

fn spacing(source: DerivativeSource) -> Option<f64> {
    match source {
        DerivativeSource::Analytic => None,
        DerivativeSource::FiniteDifference { h } => Some(h),
    }
}

fn envelope_bundle(spec: &FieldSpec, k: usize, e: FourPosition, local: &Local, source: DerivativeSource) -> Result<DerivativeBundle> {
    match source {
        DerivativeSource::Analytic => Ok(local.envelope_derivatives()),
        DerivativeSource::FiniteDifference { h } => {
            DerivativeBundle::from_differences(|p| eval_psi_b(spec, k, p).expect("index checked"), e, h)
        }
    }
}

fn field_bundle(spec: &FieldSpec, k: usize, e: FourPosition, local: &Local, source: DerivativeSource) -> Result<DerivativeBundle> {
    match source {
        DerivativeSource::Analytic => Ok(local.field_derivatives()),
        DerivativeSource::FiniteDifference { h } => {
            DerivativeBundle::from_differences(|p| eval_component_boosted(spec, k, p).expect("index checked"), e, h)
        }
    }
}

/// Magnitudes of the constituent terms of the envelope equation at one event.
fn envelope_scale(l: &Local, d: &DerivativeBundle, w_eq: f64) -> f64 {
    let g2 = l.gamma * l.gamma;
    max_of(&[
        (d.d_tau * l.gamma).norm(),
        d.laplacian().norm() / (2.0 * w_eq),
        l.lap_q().norm() / (2.0 * w_eq),
        0.5 * w_eq * l.gm1 * l.gm1 * l.q().norm(),
        g2 * l.beta.abs() * l.q_xi().norm(),
        g2 * l.omega * l.q().norm(),
        g2 * l.q_xixi().norm() / w_eq,
    ])
}

/// Residual of `−iγ·∂τψᵇ + ∇²ψᵇ/(2ω) − [∇²q/(2ωq) + (ω/2)(γ−1)²]·ψᵇ`.
pub fn residual_envelope(spec: &FieldSpec, k: usize, events: &[FourPosition], opts: &ResidualOptions) -> Result<ResidualReport> {
    let omega = spec.component(k)?.omega;
    let w_eq = opts.equation_omega.unwrap_or(omega);
    if omega == 0.0 || w_eq == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    let (kept, skipped) = significant_events(spec, k, events, opts.eps_q_rel)?;
    let mut acc = Accumulator::default();
    for (e, l) in &kept {
        let d = envelope_bundle(spec, k, *e, l, opts.derivatives)?;
        let psi_b = l.q() * l.envelope_phase;
        let lhs = -I * l.gamma * d.d_tau + d.laplacian() / (2.0 * w_eq);
        let rhs = l.lap_q() * l.envelope_phase / (2.0 * w_eq) + psi_b * (0.5 * w_eq * l.gm1 * l.gm1);
        acc.push((lhs - rhs).norm(), envelope_scale(l, &d, w_eq));
    }
    Ok(acc.finish(EquationId::Envelope, skipped, spacing(opts.derivatives), metadata(spec, k, w_eq)?))
}

/// Residual of the mass-parametrised envelope equation
/// `−iħcγ·∂τψᵇ + (ħ²/2m)∇²ψᵇ − [ħ²u/2m + mc²(γ−1)²/2]·ψᵇ`, or its γ → 1 limit.
///
/// The potential must satisfy `∇²q = u·q` at every event (separated variables).
pub fn residual_schrodinger(
    spec: &FieldSpec,
    k: usize,
    mass: &MassParameters,
    potential: &dyn Fn([f64; 3]) -> f64,
    events: &[FourPosition],
    gamma_mode: GammaMode,
    opts: &ResidualOptions,
) -> Result<ResidualReport> {
    let omega = spec.component(k)?.omega;
    if omega == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    let w_eq = mass.omega();
    if (w_eq - omega).abs() > 1e-12 * omega {
        return Err(Error::MassMismatch {
            from_mass: w_eq,
            field: omega,
        });
    }
    let (kept, skipped) = significant_events(spec, k, events, opts.eps_q_rel)?;
    let (hbar, m, c) = (mass.hbar(), mass.m(), mass.c());
    let kinetic = hbar * hbar / (2.0 * m);
    let mut acc = Accumulator::default();
    for (i, (e, l)) in kept.iter().enumerate() {
        let u = potential(e.spatial());
        let lap_q = l.lap_q();
        let mismatch = (lap_q - l.q() * u).norm();
        if mismatch > 1e-8 * (lap_q.norm() + (l.q() * u).norm()).max(f64::MIN_POSITIVE) {
            return Err(Error::NotSeparable { mismatch, event: i });
        }
        let d = envelope_bundle(spec, k, *e, l, opts.derivatives)?;
        let psi_b = l.q() * l.envelope_phase;
        let (time_coeff, relativistic) = match gamma_mode {
            GammaMode::Exact => (l.gamma, mass.rest_energy() * l.gm1 * l.gm1 / 2.0),
            GammaMode::Unity => (1.0, 0.0),
        };
        let lhs = -I * (hbar * c * time_coeff) * d.d_tau + d.laplacian() * kinetic;
        let rhs = psi_b * (kinetic * u + relativistic);
        acc.push((lhs - rhs).norm(), hbar * c * envelope_scale(l, &d, w_eq));
    }
    let mut meta = metadata(spec, k, w_eq)?;
    meta.gamma_mode = Some(gamma_mode);
    Ok(acc.finish(EquationId::Schrodinger, skipped, spacing(opts.derivatives), meta))
}

/// The term `mc²(γ−1)²/2` dropped in the non-relativistic limit.
pub fn neglected_term(mass: &MassParameters, beta: f64) -> Result<f64> {
    let b = crate::kinematics::BoostParameters::new(beta).map_err(|_| Error::Domain(format!("beta = {beta} outside (-1, 1)")))?;
    let gm1 = b.gamma_minus_one();
    Ok(mass.rest_energy() * gm1 * gm1 / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub points: Vec<(f64, f64)>,
    pub fitted_slope: f64,
    pub fit_range: (f64, f64),
}

/// Neglected term over ascending speeds, with its log-log slope.
pub fn neglected_term_scan(mass: &MassParameters, betas: &[f64]) -> Result<ScanResult> {
    if betas.len() < 3 {
        return Err(Error::InvalidParameter(format!("a slope fit needs at least 3 speeds, got {}", betas.len())));
    }
    if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
        return Err(Error::Domain(format!("beta = {b} outside (0, 1)")));
    }
    if betas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("speeds must be strictly ascending".into()));
    }
    let points = betas
        .iter()
        .map(|&b| neglected_term(mass, b).map(|t| (b, t)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanResult {
        fitted_slope: loglog_slope(&points),
        fit_range: (betas[0], betas[betas.len() - 1]),
        points,
    })
}

/// Residual of `∂²ψ/∂τ² − ∇²ψ + [(∇²q − β²q_zz)/q + ω²]·ψ` for the k-th
/// harmonic, or of `∂²ψ/∂τ² − ∇²ψ + m_s·ψ` when a constant mass scalar is given.
pub fn residual_kgf(spec: &FieldSpec, k: usize, mass_scalar: Option<f64>, events: &[FourPosition], opts: &ResidualOptions) -> Result<ResidualReport> {
    let omega = spec.component(k)?.omega;
    let w_eq = opts.equation_omega.unwrap_or(omega);
    if mass_scalar.is_none() && (omega == 0.0 || w_eq == 0.0) {
        return Err(Error::ZeroFrequency);
    }
    let (kept, skipped) = significant_events(spec, k, events, opts.eps_q_rel)?;
    let mut acc = Accumulator::default();
    for (e, l) in &kept {
        let d = field_bundle(spec, k, *e, l, opts.derivatives)?;
        let phase = l.envelope_phase * l.carrier;
        let psi = l.q() * phase;
        let b2 = l.beta * l.beta;
        let g2 = l.gamma * l.gamma;
        let mass_term = match mass_scalar {
            Some(ms) => psi * ms,
            None => (l.lap_q() - l.q_zz() * b2 + l.q() * (w_eq * w_eq)) * phase,
        };
        let residual = d.d2_tau - d.laplacian() + mass_term;
        let scale = max_of(&[
            d.d2_tau.norm(),
            d.laplacian().norm(),
            mass_term.norm(),
            l.lap_q().norm(),
            b2 * l.q_zz().norm(),
            g2 * w_eq * w_eq * l.q().norm(),
            g2 * l.q_xixi().norm(),
            2.0 * g2 * l.omega * l.beta.abs() * l.q_xi().norm(),
        ]);
        acc.push(residual.norm(), scale);
    }
    let id = if mass_scalar == Some(0.0) { EquationId::Wave } else { EquationId::KleinGordon };
    let mut meta = metadata(spec, k, w_eq)?;
    meta.mass_scalar = mass_scalar;
    Ok(acc.finish(id, skipped, spacing(opts.derivatives), meta))
}

/// Compare `(∇²q − β²q_zz)/q` in K with `∇′²q′/q′` at the mapped event in K′.
pub fn scalar_invariance_check(spec: &FieldSpec, k: usize, events: &[FourPosition], opts: &ResidualOptions) -> Result<ResidualReport> {
    let comp = spec.component(k)?;
    let (kept, skipped) = significant_events(spec, k, events, opts.eps_q_rel)?;
    let mut acc = Accumulator::default();
    for (e, l) in &kept {
        let b2 = l.beta * l.beta;
        let lab = (l.lap_q() - l.q_zz() * b2) / l.q();
        let rp = boost_event(*e, spec.boost());
        let jet = comp.profile.jet(rp.spatial());
        let fundamental = jet.laplacian() / jet.value;
        let qn = l.q().norm();
        let scale = max_of(&[
            fundamental.norm(),
            lab.norm(),
            (l.jet.hess[0].norm() + l.jet.hess[1].norm() + l.q_zz().norm()) / qn,
        ]);
        acc.push((lab - fundamental).norm(), scale);
    }
    Ok(acc.finish(EquationId::Scalar, skipped, None, metadata(spec, k, comp.omega)?))
}

/// Agreement of closed-form envelope partials of one order with central
/// differences at spacing `h`. The residual at an event is the largest entry
/// error, scaled by the largest entry magnitude.
pub fn derivative_report(spec: &FieldSpec, k: usize, events: &[FourPosition], h: f64, order: DerivOrder) -> Result<ResidualReport> {
    let comp = spec.component(k)?;
    let range = match order {
        DerivOrder::First => 0..4,
        DerivOrder::Second => 4..8,
    };
    let mut acc = Accumulator::default();
    for &e in events {
        let an = analytic_derivatives_psi_b(spec, k, e)?;
        let fd = DerivativeBundle::from_differences(|p| eval_psi_b(spec, k, p).expect("index checked"), e, h)?;
        let (a, f) = (an.entries(), fd.entries());
        let err = range.clone().map(|i| (a[i] - f[i]).norm()).fold(0.0, f64::max);
        let scale = range.clone().map(|i| a[i].norm()).fold(0.0, f64::max);
        acc.push(err, scale);
    }
    let id = match order {
        DerivOrder::First => EquationId::FirstDerivatives,
        DerivOrder::Second => EquationId::SecondDerivatives,
    };
    Ok(acc.finish(id, 0, Some(h), metadata(spec, k, comp.omega)?))
}

/// Error history of one bundle entry under stencil refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryConvergence {
    pub name: String,
    pub errors: Vec<f64>,
    /// `None` when the stencil error is at round-off level for some spacing,
    /// so no order can be measured.
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub spacings: Vec<f64>,
    pub entries: Vec<EntryConvergence>,
}

impl ConvergenceStudy {
    pub fn resolved(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().filter_map(|e| e.slope.map(|s| (e.name.as_str(), s)))
    }

    /// Every measurable slope lies within `target ± tol`, and at least one exists.
    pub fn order_within(&self, target: f64, tol: f64) -> bool {
        let slopes: Vec<f64> = self.resolved().map(|(_, s)| s).collect();
        !slopes.is_empty() && slopes.iter().all(|s| (s - target).abs() <= tol)
    }

    /// Entries of one derivative order only.
    pub fn restricted(&self, order: DerivOrder) -> Self {
        let prefix_second = |n: &str| n.starts_with("d2_");
        Self {
            spacings: self.spacings.clone(),
            entries: self
                .entries
                .iter()
                .filter(|e| prefix_second(&e.name) == (order == DerivOrder::Second))
                .cloned()
                .collect(),
        }
    }
}

/// Spacings `ℓ·{1e−2, 5e−3, 2.5e−3}` for the component's characteristic length ℓ.
pub fn default_spacings(spec: &FieldSpec, k: usize) -> Result<Vec<f64>> {
    let l = spec.component(k)?.profile.characteristic_length();
    Ok(vec![l * 1e-2, l * 5e-3, l * 2.5e-3])
}

/// Compare closed-form envelope partials against central differences at each
/// spacing and fit the convergence order of every entry.
pub fn derivative_convergence(spec: &FieldSpec, k: usize, events: &[FourPosition], spacings: &[f64]) -> Result<ConvergenceStudy> {
    if spacings.len() < 2 {
        return Err(Error::InvalidParameter("order fit needs at least 2 spacings".into()));
    }
    let analytic = events
        .iter()
        .map(|&e| analytic_derivatives_psi_b(spec, k, e))
        .collect::<Result<Vec<_>>>()?;
    let magnitude = events
        .iter()
        .map(|&e| eval_psi_b(spec, k, e).map(|v| v.norm()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    let mut errors = vec![vec![0.0; spacings.len()]; 8];
    for (j, &h) in spacings.iter().enumerate() {
        for (e, an) in events.iter().zip(&analytic) {
            let fd = DerivativeBundle::from_differences(|p| eval_psi_b(spec, k, p).expect("index checked"), *e, h)?;
            for (i, (a, f)) in an.entries().iter().zip(fd.entries()).enumerate() {
                errors[i][j] = f64::max(errors[i][j], (f - a).norm());
            }
        }
    }

    let entries = DerivativeBundle::NAMES
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let order = if i < 4 { 1 } else { 2 };
            let resolved = spacings.iter().zip(&errors[i]).all(|(&h, &err)| {
                let roundoff = f64::EPSILON * magnitude.max(f64::MIN_POSITIVE) / h.powi(order);
                err > 100.0 * roundoff
            });
            let slope = resolved.then(|| {
                let pts: Vec<(f64, f64)> = spacings.iter().copied().zip(errors[i].iter().copied()).collect();
                loglog_slope(&pts)
            });
            EntryConvergence {
                name: name.to_string(),
                errors: errors[i].clone(),
                slope,
            }
        })
        .collect();
    Ok(ConvergenceStudy {
        spacings: spacings.to_vec(),
        entries,
    })
}

/// `n` seeded events mapped from the significant box of component `k` in K′
/// (times `τ′ ∈ [−tau_half, tau_half]`) to the observer frame.
pub fn sample_events(spec: &FieldSpec, k: usize, n: usize, seed: u64, tau_half: f64) -> Result<Vec<FourPosition>> {
    let bbox = spec.component(k)?.profile.support_box();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let rp = FourPosition::new(
                rng.gen_range(bbox[0].0..=bbox[0].1),
                rng.gen_range(bbox[1].0..=bbox[1].1),
                rng.gen_range(bbox[2].0..=bbox[2].1),
                rng.gen_range(-tau_half..=tau_half),
            );
            inverse_boost_event(rp, spec.boost())
        })
        .collect())
}

/// `n` seeded events uniform in `[−half, half]⁴`.
pub fn sample_box_events(n: usize, seed: u64, half: f64) -> Vec<FourPosition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| FourPosition::from_array([0; 4].map(|_| rng.gen_range(-half..=half))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{make_boost, BoostParameters};
    use crate::profile::AmplitudeProfile;

    fn spec(omega: f64, profile: AmplitudeProfile, beta: f64) -> FieldSpec {
        FieldSpec::single(omega, profile, make_boost(beta).unwrap()).unwrap()
    }

    #[test]
    fn stencil_basics() {
        let e = FourPosition::new(0.0, 0.0, 0.5, 0.0);
        let constant = |_: FourPosition| Complex64::new(3.0, -1.0);
        for order in [DerivOrder::First, DerivOrder::Second] {
            assert_eq!(fd_partial(constant, e, Axis::Z, order, 0.1).unwrap(), Complex64::new(0.0, 0.0));
        }
        let square = |p: FourPosition| Complex64::new(p.z * p.z, 0.0);
        for h in [0.5, 0.25, 0.125] {
            assert_eq!(fd_partial(square, e, Axis::Z, DerivOrder::Second, h).unwrap(), Complex64::new(2.0, 0.0));
        }
        let h = 1e-3;
        let sine = |p: FourPosition| Complex64::new(p.z.sin(), 0.0);
        let d = fd_partial(sine, FourPosition::default(), Axis::Z, DerivOrder::First, h).unwrap();
        assert!((d.re - (1.0 - h * h / 6.0)).abs() < 1e-12);
    }

    #[test]
    fn stencil_errors() {
        let e = FourPosition::default();
        let f = |_: FourPosition| Complex64::new(1.0, 0.0);
        assert!(fd_partial(f, e, Axis::X, DerivOrder::First, 0.0).is_err());
        let blow = |p: FourPosition| Complex64::new(1.0 / p.x, 0.0);
        assert!(matches!(
            fd_partial(blow, e, Axis::X, DerivOrder::Second, 0.1),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn rest_frame_time_derivative_vanishes() {
        let s = spec(1.3, AmplitudeProfile::gaussian(1.0, 0.0, 0.6), 0.0);
        let d = analytic_derivatives_psi_b(&s, 0, FourPosition::new(0.1, 0.2, 0.3, 0.4)).unwrap();
        assert_eq!(d.d_tau, Complex64::new(0.0, 0.0));
        assert_eq!(d.d2_tau, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn gaussian_second_z_derivative_formula() {
        let profile = AmplitudeProfile::gaussian(1.0, 0.0, 0.8);
        let s = spec(1.5, profile.clone(), 0.6);
        let e = FourPosition::new(0.0, 0.0, 0.35, 0.2);
        let (g, b, w) = (1.25, 0.6, 1.5);
        let cc = comoving_coords(e, s.boost());
        let jet = profile.jet([0.0, 0.0, cc.xi]);
        let ph = Complex64::cis(w * cc.eta);
        let q = jet.value;
        let expect = q * ph * (g * g) * (jet.hess[2] / q - w * w * b * b) - I * (2.0 * g * g * w * b) * jet.grad[2] * ph;
        let d = analytic_derivatives_psi_b(&s, 0, e).unwrap();
        assert!((d.d2_z - expect).norm() < 1e-14);
        let fd = fd_partial(|p| eval_psi_b(&s, 0, p).unwrap(), e, Axis::Z, DerivOrder::Second, 1e-3).unwrap();
        assert!((fd - d.d2_z).norm() < 1e-4);
    }

    #[test]
    fn plane_wave_derivatives_converge_at_second_order() {
        let s = spec(1.0, AmplitudeProfile::plane_wave(1.0, 2.0), 0.6);
        let events = sample_events(&s, 0, 20, 11, 3.0).unwrap();
        let study = derivative_convergence(&s, 0, &events, &default_spacings(&s, 0).unwrap()).unwrap();
        assert!(study.order_within(2.0, 0.1), "{study:?}");
        assert!(study.resolved().count() >= 4);
    }

    #[test]
    fn envelope_identity_holds() {
        for beta in [0.0, 0.6] {
            let s = spec(1.0, AmplitudeProfile::plane_wave(1.0, 1.5), beta);
            let events = sample_events(&s, 0, 100, 3, 5.0).unwrap();
            let r = residual_envelope(&s, 0, &events, &ResidualOptions::default()).unwrap();
            assert_eq!(r.sample_count, 100);
            assert!(r.max_abs < 1e-10, "{r:?}");
            assert!(r.within(1e-10));
            assert!(r.max_abs >= r.rms);
        }
    }

    #[test]
    fn envelope_with_differences_converges() {
        let s = spec(1.0, AmplitudeProfile::gaussian(1.0, 0.0, 1.0), 0.5);
        let events = sample_events(&s, 0, 30, 5, 2.0).unwrap();
        let mut pts = vec![];
        for h in [0.02, 0.01, 0.005] {
            let opts = ResidualOptions {
                derivatives: DerivativeSource::FiniteDifference { h },
                ..Default::default()
            };
            pts.push((h, residual_envelope(&s, 0, &events, &opts).unwrap().max_abs));
        }
        assert!((loglog_slope(&pts) - 2.0).abs() < 0.1, "{pts:?}");
    }

    #[test]
    fn derivative_report_shrinks_with_spacing() {
        let s = spec(1.0, AmplitudeProfile::gaussian(1.0, 0.0, 1.0), 0.3);
        let events = sample_events(&s, 0, 20, 6, 2.0).unwrap();
        for order in [DerivOrder::First, DerivOrder::Second] {
            let coarse = derivative_report(&s, 0, &events, 0.02, order).unwrap();
            let fine = derivative_report(&s, 0, &events, 0.01, order).unwrap();
            let ratio = coarse.max_abs / fine.max_abs;
            assert!((ratio - 4.0).abs() < 0.4, "{ratio}");
            assert!(fine.max_rel < 1e-3);
        }
        let study = derivative_convergence(&s, 0, &events, &[0.01, 0.005, 0.0025]).unwrap();
        assert_eq!(study.restricted(DerivOrder::First).entries.len(), 4);
        assert!(study.restricted(DerivOrder::Second).entries.iter().all(|e| e.name.starts_with("d2_")));
    }

    #[test]
    fn envelope_rejects_mean_component() {
        let s = FieldSpec::single(0.0, AmplitudeProfile::constant(1.0), BoostParameters::rest()).unwrap();
        let events = sample_box_events(4, 1, 1.0);
        assert!(matches!(residual_envelope(&s, 0, &events, &ResidualOptions::default()), Err(Error::ZeroFrequency)));
    }

    #[test]
    fn envelope_detects_wrong_equation_frequency() {
        let s = spec(1.0, AmplitudeProfile::plane_wave(1.0, 1.0), 0.6);
        let events = sample_events(&s, 0, 20, 2, 3.0).unwrap();
        let opts = ResidualOptions {
            equation_omega: Some(1.3),
            ..Default::default()
        };
        let r = residual_envelope(&s, 0, &events, &opts).unwrap();
        assert!(!r.within(1e-10));
        assert!(r.max_rel > 1e-3);
    }

    #[test]
    fn schrodinger_residuals() {
        let mass = MassParameters::natural(2.0).unwrap();
        let profile = AmplitudeProfile::hermite_gauss(1.0, 1.0, [0, 0, 0], [true, false, true]);
        let rest = spec(2.0, profile.clone(), 0.0);
        let pot = profile.separable_potential(rest.boost()).unwrap();
        let events = sample_events(&rest, 0, 60, 9, 2.0).unwrap();
        for mode in [GammaMode::Exact, GammaMode::Unity] {
            let r = residual_schrodinger(&rest, 0, &mass, &|r| pot.eval(r), &events, mode, &ResidualOptions::default()).unwrap();
            assert!(r.max_abs < 1e-10, "{mode:?}: {r:?}");
        }

        // transverse-only profile stays separable when moving
        let transverse = AmplitudeProfile::hermite_gauss(1.0, 1.0, [1, 0, 0], [true, true, false]);
        let moving = spec(2.0, transverse.clone(), 0.1);
        let pot = transverse.separable_potential(moving.boost()).unwrap();
        let events = sample_events(&moving, 0, 60, 9, 2.0).unwrap();
        let exact = residual_schrodinger(&moving, 0, &mass, &|r| pot.eval(r), &events, GammaMode::Exact, &ResidualOptions::default()).unwrap();
        assert!(exact.max_abs < 1e-10);
        let unity = residual_schrodinger(&moving, 0, &mass, &|r| pot.eval(r), &events, GammaMode::Unity, &ResidualOptions::default()).unwrap();
        assert!(unity.max_abs > 1e-6);

        // the unity residual is exactly the dropped terms
        let gm1 = moving.boost().gamma_minus_one();
        let mut worst: f64 = 0.0;
        for &e in &events {
            let d = analytic_derivatives_psi_b(&moving, 0, e).unwrap();
            let psi_b = eval_psi_b(&moving, 0, e).unwrap();
            let dropped = I * gm1 * d.d_tau + psi_b * (2.0 * gm1 * gm1 / 2.0);
            worst = worst.max(dropped.norm());
        }
        assert!((unity.max_abs - worst).abs() < 1e-12 * worst.max(1.0));
    }

    #[test]
    fn schrodinger_preconditions() {
        let mass = MassParameters::natural(1.0).unwrap();
        let s = spec(1.0, AmplitudeProfile::gaussian(1.0, 0.0, 1.0), 0.3);
        let rest_pot = AmplitudeProfile::gaussian(1.0, 0.0, 1.0)
            .separable_potential(&BoostParameters::rest())
            .unwrap();
        let events = sample_events(&s, 0, 20, 1, 2.0).unwrap();
        let r = residual_schrodinger(&s, 0, &mass, &|r| rest_pot.eval(r), &events, GammaMode::Exact, &ResidualOptions::default());
        assert!(matches!(r, Err(Error::NotSeparable { .. })));

        let wrong_mass = MassParameters::natural(1.5).unwrap();
        let r = residual_schrodinger(&s, 0, &wrong_mass, &|_| 0.0, &events, GammaMode::Exact, &ResidualOptions::default());
        assert!(matches!(r, Err(Error::MassMismatch { .. })));
    }

    #[test]
    fn neglected_term_values() {
        let mass = MassParameters::natural(1.0).unwrap();
        assert_eq!(neglected_term(&mass, 0.0).unwrap(), 0.0);
        // (1/sqrt(0.99) - 1)^2 / 2
        let gm1 = 1.0 / 0.99f64.sqrt() - 1.0;
        let t = neglected_term(&mass, 0.1).unwrap();
        assert!((t - gm1 * gm1 / 2.0).abs() < 1e-15);
        assert!((t - 1.2690e-5).abs() < 1e-8);

        let scan = neglected_term_scan(&mass, &[0.01, 0.02, 0.04, 0.08]).unwrap();
        assert!((scan.fitted_slope - 4.0).abs() < 0.2);
        assert!(matches!(neglected_term_scan(&mass, &[0.1, 0.2, 1.2]), Err(Error::Domain(_))));
        assert!(neglected_term_scan(&mass, &[0.1, 0.2]).is_err());
        assert!(neglected_term_scan(&mass, &[0.2, 0.1, 0.3]).is_err());
    }

    #[test]
    fn kgf_free_particle_and_wave() {
        let free = spec(1.0, AmplitudeProfile::constant(1.0), 0.6);
        let events = sample_events(&free, 0, 50, 4, 3.0).unwrap();
        for e in &events[..5] {
            let d = analytic_derivatives_psi(&free, 0, *e).unwrap();
            let psi = eval_component_boosted(&free, 0, *e).unwrap();
            assert!((d.d2_tau - d.laplacian() + psi).norm() < 1e-13);
        }
        let r = residual_kgf(&free, 0, Some(1.0), &events, &ResidualOptions::default()).unwrap();
        assert!(r.max_abs < 1e-12);
        let bracket = residual_kgf(&free, 0, None, &events, &ResidualOptions::default()).unwrap();
        assert!(bracket.max_abs < 1e-12);

        let massless = spec(2.0, AmplitudeProfile::plane_wave(1.0, 2.0), 0.3);
        let events = sample_events(&massless, 0, 50, 4, 3.0).unwrap();
        let wave = residual_kgf(&massless, 0, Some(0.0), &events, &ResidualOptions::default()).unwrap();
        assert_eq!(wave.equation_id, EquationId::Wave);
        assert!(wave.max_abs < 1e-10);
    }

    #[test]
    fn scalar_invariance_of_plane_wave() {
        let k = 1.7;
        let s = spec(1.0, AmplitudeProfile::plane_wave(1.0, k), 0.6);
        let events = sample_events(&s, 0, 40, 8, 3.0).unwrap();
        let r = scalar_invariance_check(&s, 0, &events, &ResidualOptions::default()).unwrap();
        assert!(r.within(1e-10));
        let l = Local::new(&s, 0, events[0]).unwrap();
        let lab = (l.lap_q() - l.q_zz() * 0.36) / l.q();
        assert!((lab - Complex64::new(-k * k, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn sampler_is_deterministic() {
        let s = spec(1.0, AmplitudeProfile::gaussian(1.0, 0.5, 0.3), 0.9);
        let a = sample_events(&s, 0, 10, 42, 1.0).unwrap();
        let b = sample_events(&s, 0, 10, 42, 1.0).unwrap();
        assert_eq!(a, b);
        for e in &a {
            let z = boost_event(*e, s.boost()).z;
            assert!((z - 0.5).abs() <= 0.9 + 1e-12);
        }
    }
}
