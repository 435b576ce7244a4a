//! Chirped Gaussian pulses defined in the spectral domain.
//!
//! A pulse has spectral amplitude 𝒜 exp[−(ω−ω_c)²τ₀²/2] and spectral phase
//! φ + (ω−ω_c)²β/2 around its centre ω_c = ω_res + Δ. The time-domain field is
//! E(t) = (1/π) Re ∫₀^∞ A(ω) e^{iφ(ω)} e^{iωt} dω, available both in closed
//! form ([`field_analytic`]) and by direct quadrature ([`field_numeric`]).

use core::f64::consts::PI;

use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::quad::{integrate, QuadOptions};

/// The field is taken to vanish beyond this many stretched durations.
pub const FIELD_CUTOFF_WIDTHS: f64 = 14.0;
/// Half-width, in spectral bandwidths 1/τ₀, of the synthesis integral.
pub const SPECTRAL_WINDOW: f64 = 12.0;
/// Half-width, in stretched durations τ, of the time-domain integrals.
pub const TEMPORAL_WINDOW: f64 = 12.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseSpec {
    /// Spectral amplitude 𝒜 (a.u. field × time).
    pub amplitude: f64,
    /// Transition the pulse targets (a.u.); the centre is `resonance + detuning`.
    pub resonance: f64,
    /// Transform-limited duration τ₀ (a.u.).
    pub tau0: f64,
    /// Spectral chirp β (a.u. time²).
    pub beta: f64,
    /// Absolute phase φ (rad).
    pub phase: f64,
    /// Detuning Δ of the spectral centre from `resonance` (a.u.).
    pub detuning: f64,
}

impl PulseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau0.is_finite() && self.tau0 > 0.0) {
            return Err(invalid("tau0", "must be finite and > 0"));
        }
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(invalid("amplitude", "must be finite and >= 0"));
        }
        if !(self.omega_center().is_finite() && self.omega_center() > 0.0) {
            return Err(invalid("omega_center", "resonance + detuning must be > 0"));
        }
        if !self.beta.is_finite() || !self.phase.is_finite() {
            return Err(invalid("beta/phase", "must be finite"));
        }
        Ok(())
    }

    pub fn omega_center(&self) -> f64 {
        self.resonance + self.detuning
    }

    /// β/τ₀², the dimensionless chirp.
    fn reduced_chirp(&self) -> f64 {
        self.beta / (self.tau0 * self.tau0)
    }

    /// τ = τ₀ √(1 + β²/τ₀⁴)
    pub fn stretched_duration(&self) -> f64 {
        self.tau0 * self.reduced_chirp().hypot(1.0)
    }

    /// β′ = β/(τ₀⁴ + β²), the linear sweep rate of the instantaneous frequency.
    pub fn temporal_chirp(&self) -> f64 {
        let b = self.reduced_chirp();
        b / (self.tau0 * self.tau0 * (1.0 + b * b))
    }

    /// √(2/π)(𝒜/τ₀)(1 + β²/τ₀⁴)^(−1/4)
    pub fn peak_envelope(&self) -> f64 {
        let b = self.reduced_chirp();
        (2.0 / PI).sqrt() * self.amplitude / self.tau0 * (1.0 + b * b).powf(-0.25)
    }

    /// Time beyond which the field is treated as exactly zero.
    pub fn support_half_width(&self) -> f64 {
        FIELD_CUTOFF_WIDTHS * self.stretched_duration()
    }
}

/// A(ω) = 𝒜 exp[−(ω − ω_c)²τ₀²/2]
pub fn spectral_amplitude(omega: f64, spec: &PulseSpec) -> f64 {
    let x = (omega - spec.omega_center()) * spec.tau0;
    spec.amplitude * (-0.5 * x * x).exp()
}

/// φ(ω) = φ + (ω − ω_c)²β/2
pub fn spectral_phase(omega: f64, spec: &PulseSpec) -> f64 {
    let d = omega - spec.omega_center();
    spec.phase + 0.5 * d * d * spec.beta
}

/// The complex signal whose real part is the field.
pub fn analytic_signal(t: f64, spec: &PulseSpec) -> Complex64 {
    let b = spec.reduced_chirp();
    let prefactor = (Complex64::new(1.0, 0.0) / Complex64::new(1.0, -b)).sqrt();
    let tau = spec.stretched_duration();
    let envelope = (2.0 / PI).sqrt() * spec.amplitude / spec.tau0 * (-0.5 * (t / tau).powi(2)).exp();
    let phase = -0.5 * spec.temporal_chirp() * t * t + spec.omega_center() * t + spec.phase;
    prefactor * Complex64::from_polar(envelope, phase)
}

/// Closed-form time-domain field.
pub fn field_analytic(t: f64, spec: &PulseSpec) -> f64 {
    analytic_signal(t, spec).re
}

/// Closed-form field, zero beyond [`PulseSpec::support_half_width`].
pub fn field_truncated(t: f64, spec: &PulseSpec) -> f64 {
    if t.abs() > spec.support_half_width() {
        0.0
    } else {
        field_analytic(t, spec)
    }
}

/// The field by quadrature of the spectral synthesis integral over
/// ω ∈ ω_c ± 12/τ₀.
pub fn field_numeric(t: f64, spec: &PulseSpec) -> Result<f64> {
    spec.validate()?;
    if spec.amplitude == 0.0 {
        return Ok(0.0);
    }
    // x = (ω − ω_c)τ₀; the common factor e^{i(ω_c t + φ)} is taken outside.
    let b = spec.reduced_chirp();
    let s = t / spec.tau0;
    let lo = (-SPECTRAL_WINDOW).max(-spec.omega_center() * spec.tau0);
    let hi = SPECTRAL_WINDOW;
    let turns = (b.abs() * hi * hi + s.abs() * (hi - lo)) / PI;
    let opts = QuadOptions {
        initial_panels: 16 + turns.ceil() as usize,
        abs_tol: 1e-8 * (2.0 * PI).sqrt(),
        ..Default::default()
    };
    let q = integrate(|x| Complex64::from_polar((-0.5 * x * x).exp(), 0.5 * b * x * x + s * x), lo, hi, opts)?;
    let carrier = Complex64::from_polar(1.0, spec.omega_center() * t + spec.phase);
    Ok((carrier * q.value).re * spec.amplitude / (PI * spec.tau0))
}

fn carrier_panels(spec: &PulseSpec, span: f64, omega: f64) -> usize {
    16 + (span * (spec.omega_center() + omega.abs()) / PI).ceil() as usize
}

/// ∫|E(t)|² dt over ±12 stretched durations.
pub fn fluence(spec: &PulseSpec) -> Result<f64> {
    spec.validate()?;
    if spec.amplitude == 0.0 {
        return Ok(0.0);
    }
    let half = TEMPORAL_WINDOW * spec.stretched_duration();
    let scale = spec.amplitude * spec.amplitude / spec.tau0;
    let opts = QuadOptions {
        initial_panels: carrier_panels(spec, 2.0 * half, spec.omega_center()),
        abs_tol: 1e-10 * scale,
        ..Default::default()
    };
    let q = integrate(|t| Complex64::new(field_analytic(t, spec).powi(2), 0.0), -half, half, opts)?;
    Ok(q.value.re)
}

/// ∫ E(t) e^{−iω₀t} dt over [t_from, t_to], both clipped to ±12 stretched
/// durations.
pub fn fourier_component_window(spec: &PulseSpec, omega0: f64, t_from: f64, t_to: f64) -> Result<Complex64> {
    spec.validate()?;
    if spec.amplitude == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let half = TEMPORAL_WINDOW * spec.stretched_duration();
    let a = t_from.max(-half);
    let b = t_to.min(half);
    if b <= a {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let opts = QuadOptions {
        initial_panels: carrier_panels(spec, b - a, omega0),
        abs_tol: 1e-10 * spec.amplitude,
        ..Default::default()
    };
    let q = integrate(|t| Complex64::from_polar(field_analytic(t, spec), -omega0 * t), a, b, opts)?;
    Ok(q.value)
}

/// ∫ E(t) e^{−iω₀t} dt over the whole pulse. Equals A(ω₀)e^{iφ(ω₀)} up to a
/// counter-rotating term of order exp[−2(ω₀τ₀)²].
pub fn resonant_fourier_component(spec: &PulseSpec, omega0: f64) -> Result<Complex64> {
    fourier_component_window(spec, omega0, f64::NEG_INFINITY, f64::INFINITY)
}

/// The two pulses of a control sequence; `plus` targets |+;0⟩, `minus` |−;0⟩.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulsePair {
    pub plus: PulseSpec,
    pub minus: PulseSpec,
}

impl PulsePair {
    pub fn validate(&self) -> Result<()> {
        self.plus.validate()?;
        self.minus.validate()
    }

    pub fn shares_tau0(&self) -> bool {
        self.plus.tau0 == self.minus.tau0
    }

    pub fn field(&self, t: f64) -> f64 {
        field_truncated(t, &self.plus) + field_truncated(t, &self.minus)
    }

    /// The total field vanishes for |t| beyond this.
    pub fn support_half_width(&self) -> f64 {
        self.plus.support_half_width().max(self.minus.support_half_width())
    }

    pub fn peak_envelope(&self) -> f64 {
        self.plus.peak_envelope() + self.minus.peak_envelope()
    }

    pub fn longest_duration(&self) -> f64 {
        self.plus.stretched_duration().max(self.minus.stretched_duration())
    }

    /// |E(t)| bound relative to the peak: the sum of both Gaussian envelopes.
    pub fn relative_envelope(&self, t: f64) -> f64 {
        let peak = self.peak_envelope();
        if peak == 0.0 {
            return 0.0;
        }
        let env = |p: &PulseSpec| {
            if t.abs() > p.support_half_width() {
                0.0
            } else {
                p.peak_envelope() * (-0.5 * (t / p.stretched_duration()).powi(2)).exp()
            }
        };
        (env(&self.plus) + env(&self.minus)) / peak
    }
}
