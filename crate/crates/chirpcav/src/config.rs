//! Run configuration: a TOML file whose physical quantities are strings with
//! an explicit unit, e.g. `"0.20286 cm^-1"`, `"-120 ns^2"`, `"1.75 pi"`.
//!
//! Parsing resolves every default and converts to atomic units (chirp axes of
//! scans stay in ns²). [`RunConfig::to_toml`] writes the resolved values back
//! out in canonical units, and that text parses to an identical config.

use std::f64::consts::PI;
use std::fmt::{self, Write as _};
use std::ops::Range;

use chirpcav_core::model::{ModelParams, REFERENCE_OMEGA_MINUS, REFERENCE_OMEGA_PLUS};
use chirpcav_core::propagate::{PostPulseOptions, PropagationConfig, StepControl, Window};
use chirpcav_core::scan::{FixedParams, Resonance, ScanAxis, ScanMode, ScanParam};
use chirpcav_core::units::{self, Unit};
use serde::Deserialize;
use toml::Spanned;

/// A rejected configuration, located by line (1-based) and dotted field path.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config line {l}, field `{}`: {}", self.field, self.message),
            None => write!(f, "config field `{}`: {}", self.field, self.message),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PulseSource {
    /// Amplitudes and phases as written in the pulse blocks.
    Explicit,
    /// Amplitudes and phases from the optimum block; chirps and detunings
    /// still come from the pulse blocks.
    Optimum,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseBlock {
    /// a.u. (field × time)
    pub amplitude: f64,
    /// a.u.²
    pub beta: f64,
    /// rad
    pub phase: f64,
    /// a.u.
    pub detuning: f64,
}

impl Default for PulseBlock {
    fn default() -> Self {
        PulseBlock { amplitude: 0.0, beta: 0.0, phase: 0.0, detuning: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseConfig {
    pub tau0: f64,
    pub resonance: Resonance,
    pub source: PulseSource,
    pub plus: PulseBlock,
    pub minus: PulseBlock,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PhiPlus {
    Value(f64),
    /// Chosen so both beats peak together at the start of the post-pulse window.
    Aligned,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimumConfig {
    pub k: u32,
    pub phi_minus: f64,
    pub phi_plus: PhiPlus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanConfig {
    pub mode: ScanMode,
    pub fixed: FixedParams,
    pub axes: Vec<ScanAxis>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelParams,
    pub pulses: PulseConfig,
    pub optimum: OptimumConfig,
    pub propagation: PropagationConfig,
    pub post_pulse: PostPulseOptions,
    pub scan: Option<ScanConfig>,
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub dir: Option<String>,
    /// Rows of the pulse CSV, spread evenly over the propagation window.
    pub pulse_samples: usize,
}

pub const DEFAULT_PULSE_SAMPLES: usize = 100_001;

#[derive(Clone, Debug, PartialEq)]
pub struct Parsed {
    pub config: RunConfig,
    pub warnings: Vec<String>,
}

type Q = Spanned<String>;

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: Option<RawModel>,
    pulses: Option<RawPulses>,
    optimum: Option<RawOptimum>,
    propagation: Option<RawPropagation>,
    scan: Option<RawScan>,
    output: Option<RawOutput>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawModel {
    rotational_constant: Option<Q>,
    dipole: Option<Q>,
    omega_c: Option<Q>,
    coupling: Option<Q>,
    omega_minus: Option<Q>,
    omega_plus: Option<Q>,
    j_max: Option<Spanned<i64>>,
    n_max: Option<Spanned<i64>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawPulses {
    tau0: Option<Q>,
    resonance: Option<Q>,
    source: Option<Q>,
    plus: Option<RawPulse>,
    minus: Option<RawPulse>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawPulse {
    amplitude: Option<Q>,
    beta: Option<Q>,
    phase: Option<Q>,
    detuning: Option<Q>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOptimum {
    k: Option<Spanned<i64>>,
    phi_minus: Option<Q>,
    phi_plus: Option<Q>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawPropagation {
    window: Option<Q>,
    t_start: Option<Q>,
    t_end: Option<Q>,
    step: Option<Q>,
    steps_per_period: Option<Spanned<f64>>,
    rtol: Option<Spanned<f64>>,
    atol: Option<Spanned<f64>>,
    max_steps: Option<Spanned<i64>>,
    sample_stride: Option<Spanned<i64>>,
    post_pulse_window: Option<Q>,
    post_pulse_samples: Option<Spanned<i64>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawScan {
    mode: Option<Q>,
    amplitude: Option<Q>,
    beta_plus: Option<Q>,
    beta_minus: Option<Q>,
    delta: Option<Q>,
    phi_minus: Option<Q>,
    phi_plus: Option<Q>,
    #[serde(default)]
    axis: Vec<RawAxis>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAxis {
    param: Q,
    min: Q,
    max: Q,
    points: Spanned<i64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
    pulse_samples: Option<Spanned<i64>>,
}

/// What a quantity string is allowed to carry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Energy,
    Dipole,
    Time,
    /// Chirp, resolved to a.u.²
    Chirp,
    /// Chirp, resolved to ns²
    ChirpNs2,
    Angle,
    /// Spectral amplitude, a.u.; `pi` multiplies by π.
    Amplitude,
}

impl Kind {
    fn accepted(self) -> &'static str {
        match self {
            Kind::Energy => "cm^-1, au",
            Kind::Dipole => "D, au",
            Kind::Time => "ns, au",
            Kind::Chirp | Kind::ChirpNs2 => "ns^2, au",
            Kind::Angle => "rad, deg, pi",
            Kind::Amplitude => "au, pi",
        }
    }
}

struct Ctx<'a> {
    text: &'a str,
    warnings: Vec<String>,
}

impl<'a> Ctx<'a> {
    fn line(&self, span: Range<usize>) -> usize {
        self.text[..span.start.min(self.text.len())].matches('\n').count() + 1
    }

    fn err(&self, span: Option<Range<usize>>, field: &str, msg: impl Into<String>) -> ConfigError {
        ConfigError { line: span.map(|s| self.line(s)), field: field.to_string(), message: msg.into() }
    }

    fn quantity(&self, q: &Q, field: &str, kind: Kind) -> Result<f64, ConfigError> {
        parse_quantity(q.get_ref(), kind).map_err(|m| self.err(Some(q.span()), field, m))
    }

    fn opt(&self, q: &Option<Q>, field: &str, kind: Kind, default: f64) -> Result<f64, ConfigError> {
        q.as_ref().map_or(Ok(default), |q| self.quantity(q, field, kind))
    }

    fn count(&self, v: &Option<Spanned<i64>>, field: &str, min: i64, default: i64) -> Result<usize, ConfigError> {
        match v {
            None => Ok(default as usize),
            Some(s) if *s.get_ref() >= min => Ok(*s.get_ref() as usize),
            Some(s) => Err(self.err(Some(s.span()), field, format!("must be >= {min}"))),
        }
    }

    fn positive(&self, v: &Option<Spanned<f64>>, field: &str, default: f64) -> Result<f64, ConfigError> {
        match v {
            None => Ok(default),
            Some(s) if *s.get_ref() > 0.0 && s.get_ref().is_finite() => Ok(*s.get_ref()),
            Some(s) => Err(self.err(Some(s.span()), field, "must be a positive number")),
        }
    }

    fn word<'q>(
        &self,
        q: &'q Option<Q>,
        field: &str,
        allowed: &[&str],
        default: &'q str,
    ) -> Result<&'q str, ConfigError> {
        match q {
            None => Ok(default),
            Some(s) if allowed.contains(&s.get_ref().as_str()) => Ok(s.get_ref().as_str()),
            Some(s) => Err(self.err(Some(s.span()), field, format!("expected one of: {}", allowed.join(", ")))),
        }
    }
}

/// Parses `"<number> <unit>"`; the number may be a fraction `a/b`.
fn parse_quantity(s: &str, kind: Kind) -> Result<f64, String> {
    let mut parts = s.split_whitespace();
    let (Some(num), Some(unit), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(format!("expected \"<number> <unit>\" with unit one of {}, got {s:?}", kind.accepted()));
    };
    let (value, den) = parse_number(num).ok_or_else(|| format!("not a number: {num:?}"))?;
    let bad_unit = || format!("unit {unit:?} not accepted here (use {})", kind.accepted());
    let out = match kind {
        Kind::Energy => match unit {
            "cm^-1" => units::convert(value, Unit::Wavenumber, Unit::AuEnergy).unwrap(),
            "au" => value,
            _ => return Err(bad_unit()),
        },
        Kind::Dipole => match unit {
            "D" => units::convert(value, Unit::Debye, Unit::AuDipole).unwrap(),
            "au" => value,
            _ => return Err(bad_unit()),
        },
        Kind::Time => match unit {
            "ns" => units::convert(value, Unit::Nanosecond, Unit::AuTime).unwrap(),
            "au" => value,
            _ => return Err(bad_unit()),
        },
        Kind::Chirp => match unit {
            "ns^2" => units::convert(value, Unit::Nanosecond2, Unit::AuTime2).unwrap(),
            "au" => value,
            _ => return Err(bad_unit()),
        },
        Kind::ChirpNs2 => match unit {
            "ns^2" => value,
            "au" => units::convert(value, Unit::AuTime2, Unit::Nanosecond2).unwrap(),
            _ => return Err(bad_unit()),
        },
        Kind::Angle => match unit {
            "rad" => value,
            "deg" => value.to_radians(),
            "pi" => value * PI,
            _ => return Err(bad_unit()),
        },
        Kind::Amplitude => match unit {
            "au" => value,
            "pi" => value * PI,
            _ => return Err(bad_unit()),
        },
    };
    // a fraction's denominator applies last, so "1/9 pi" is exactly π/9
    let out = out / den;
    if !out.is_finite() {
        return Err(format!("{s:?} is not finite"));
    }
    Ok(out)
}

/// (numerator, denominator)
fn parse_number(s: &str) -> Option<(f64, f64)> {
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b) = (a.parse::<f64>().ok()?, b.parse::<f64>().ok()?);
            (b != 0.0).then_some((a, b))
        }
        None => Some((s.parse().ok()?, 1.0)),
    }
}

pub const DEFAULT_TAU0: f64 = 5.409e8;

impl RunConfig {
    pub fn parse(text: &str) -> Result<Parsed, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let span = e.span();
            let line = span.map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            ConfigError { line, field: "<document>".into(), message: e.message().to_string() }
        })?;
        let mut ctx = Ctx { text, warnings: Vec::new() };
        let config = resolve(&mut ctx, raw)?;
        Ok(Parsed { config, warnings: ctx.warnings })
    }

    /// The resolved config in canonical units with 17 significant digits.
    pub fn to_toml(&self) -> String {
        let mut s = String::new();
        let q = |v: f64, u: &str| format!("\"{} {u}\"", fmt_sig17(v));
        let m = &self.model;
        writeln!(s, "[model]").unwrap();
        writeln!(s, "rotational_constant = {}", q(m.rotational_constant, "au")).unwrap();
        writeln!(s, "dipole = {}", q(m.dipole, "au")).unwrap();
        writeln!(s, "omega_c = {}", q(m.omega_c, "au")).unwrap();
        writeln!(s, "coupling = {}", q(m.coupling, "au")).unwrap();
        writeln!(s, "j_max = {}", m.j_max).unwrap();
        writeln!(s, "n_max = {}", m.n_max).unwrap();

        let p = &self.pulses;
        writeln!(s, "\n[pulses]").unwrap();
        writeln!(s, "tau0 = {}", q(p.tau0, "au")).unwrap();
        writeln!(s, "resonance = \"{}\"", resonance_name(p.resonance)).unwrap();
        let source = match p.source {
            PulseSource::Explicit => "explicit",
            PulseSource::Optimum => "optimum",
        };
        writeln!(s, "source = \"{source}\"").unwrap();
        for (name, b) in [("plus", &p.plus), ("minus", &p.minus)] {
            writeln!(s, "\n[pulses.{name}]").unwrap();
            writeln!(s, "amplitude = {}", q(b.amplitude, "au")).unwrap();
            writeln!(s, "beta = {}", q(b.beta, "au")).unwrap();
            writeln!(s, "phase = {}", q(b.phase, "rad")).unwrap();
            writeln!(s, "detuning = {}", q(b.detuning, "au")).unwrap();
        }

        let o = &self.optimum;
        writeln!(s, "\n[optimum]").unwrap();
        writeln!(s, "k = {}", o.k).unwrap();
        writeln!(s, "phi_minus = {}", q(o.phi_minus, "rad")).unwrap();
        match o.phi_plus {
            PhiPlus::Value(v) => writeln!(s, "phi_plus = {}", q(v, "rad")).unwrap(),
            PhiPlus::Aligned => writeln!(s, "phi_plus = \"aligned\"").unwrap(),
        }

        let pr = &self.propagation;
        writeln!(s, "\n[propagation]").unwrap();
        match pr.window {
            Window::Auto => writeln!(s, "window = \"auto\"").unwrap(),
            Window::Explicit { t_start, t_end } => {
                writeln!(s, "window = \"explicit\"").unwrap();
                writeln!(s, "t_start = {}", q(t_start, "au")).unwrap();
                writeln!(s, "t_end = {}", q(t_end, "au")).unwrap();
            }
        }
        match pr.step {
            StepControl::Fixed { steps_per_period } => {
                writeln!(s, "step = \"fixed\"").unwrap();
                writeln!(s, "steps_per_period = {}", fmt_sig17(steps_per_period)).unwrap();
            }
            StepControl::Adaptive { rtol, atol, max_steps } => {
                writeln!(s, "step = \"adaptive\"").unwrap();
                writeln!(s, "rtol = {}", fmt_sig17(rtol)).unwrap();
                writeln!(s, "atol = {}", fmt_sig17(atol)).unwrap();
                writeln!(s, "max_steps = {max_steps}").unwrap();
            }
        }
        writeln!(s, "sample_stride = {}", pr.sample_stride).unwrap();
        if let Some(w) = self.post_pulse.window {
            writeln!(s, "post_pulse_window = {}", q(w, "au")).unwrap();
        }
        writeln!(s, "post_pulse_samples = {}", self.post_pulse.samples).unwrap();

        if let Some(sc) = &self.scan {
            let f = &sc.fixed;
            writeln!(s, "\n[scan]").unwrap();
            writeln!(s, "mode = \"{}\"", sc.mode.name()).unwrap();
            writeln!(s, "amplitude = {}", q(f.amplitude, "au")).unwrap();
            writeln!(s, "beta_plus = {}", q(f.beta_plus, "ns^2")).unwrap();
            writeln!(s, "beta_minus = {}", q(f.beta_minus, "ns^2")).unwrap();
            writeln!(s, "delta = {}", q(f.delta, "au")).unwrap();
            writeln!(s, "phi_minus = {}", q(f.target_phases.0, "rad")).unwrap();
            writeln!(s, "phi_plus = {}", q(f.target_phases.1, "rad")).unwrap();
            for ax in &sc.axes {
                writeln!(s, "\n[[scan.axis]]").unwrap();
                writeln!(s, "param = \"{}\"", ax.param.name()).unwrap();
                writeln!(s, "min = {}", q(ax.min, ax.param.unit())).unwrap();
                writeln!(s, "max = {}", q(ax.max, ax.param.unit())).unwrap();
                writeln!(s, "points = {}", ax.points).unwrap();
            }
        }
        writeln!(s, "\n[output]").unwrap();
        if let Some(d) = &self.output.dir {
            writeln!(s, "dir = {}", toml::Value::String(d.clone())).unwrap();
        }
        writeln!(s, "pulse_samples = {}", self.output.pulse_samples).unwrap();
        s
    }
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_sig17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn resonance_name(r: Resonance) -> &'static str {
    match r {
        Resonance::Exact => "exact",
        Resonance::ClosedForm => "closed_form",
    }
}

fn resolve(ctx: &mut Ctx, raw: RawConfig) -> Result<RunConfig, ConfigError> {
    let model = resolve_model(ctx, raw.model.unwrap_or_default())?;
    let pulses = resolve_pulses(ctx, raw.pulses.unwrap_or_default())?;
    let optimum = resolve_optimum(ctx, raw.optimum.unwrap_or_default())?;
    let (propagation, post_pulse) = resolve_propagation(ctx, raw.propagation.unwrap_or_default())?;
    let scan = raw.scan.map(|s| resolve_scan(ctx, s, pulses.tau0)).transpose()?;
    let out = raw.output.unwrap_or_default();
    let output = OutputConfig {
        pulse_samples: ctx.count(&out.pulse_samples, "output.pulse_samples", 2, DEFAULT_PULSE_SAMPLES as i64)?,
        dir: out.dir,
    };
    Ok(RunConfig { model, pulses, optimum, propagation, post_pulse, scan, output })
}

fn resolve_model(ctx: &mut Ctx, m: RawModel) -> Result<ModelParams, ConfigError> {
    let reference = ModelParams::reference();
    let b =
        ctx.opt(&m.rotational_constant, "model.rotational_constant", Kind::Energy, reference.rotational_constant)?;
    let mu = ctx.opt(&m.dipole, "model.dipole", Kind::Dipole, reference.dipole)?;
    let direct = m.omega_c.is_some() || m.coupling.is_some();
    let split = m.omega_minus.is_some() || m.omega_plus.is_some();
    let (omega_c, coupling) = if direct && split {
        let span = m.omega_minus.as_ref().or(m.omega_plus.as_ref()).map(|q| q.span());
        return Err(ctx.err(
            span,
            "model.omega_minus",
            "give either omega_c/coupling or omega_minus/omega_plus, not both",
        ));
    } else if split {
        let lo = ctx.opt(&m.omega_minus, "model.omega_minus", Kind::Energy, REFERENCE_OMEGA_MINUS)?;
        let hi = ctx.opt(&m.omega_plus, "model.omega_plus", Kind::Energy, REFERENCE_OMEGA_PLUS)?;
        if !(hi > lo) {
            return Err(ctx.err(
                m.omega_plus.as_ref().map(|q| q.span()),
                "model.omega_plus",
                "must exceed omega_minus",
            ));
        }
        (0.5 * (hi + lo), 0.5 * (hi - lo))
    } else {
        (
            ctx.opt(&m.omega_c, "model.omega_c", Kind::Energy, reference.omega_c)?,
            ctx.opt(&m.coupling, "model.coupling", Kind::Energy, reference.coupling)?,
        )
    };
    let j_max = ctx.count(&m.j_max, "model.j_max", 1, reference.j_max as i64)?;
    let n_max = ctx.count(&m.n_max, "model.n_max", 1, reference.n_max as i64)?;
    let params = ModelParams { rotational_constant: b, dipole: mu, omega_c, coupling, j_max, n_max };
    params.validate().map_err(|e| ctx.err(None, "model", e.to_string()))?;
    Ok(params)
}

fn resolve_pulses(ctx: &mut Ctx, p: RawPulses) -> Result<PulseConfig, ConfigError> {
    let tau0 = ctx.opt(&p.tau0, "pulses.tau0", Kind::Time, DEFAULT_TAU0)?;
    if !(tau0 > 0.0) {
        return Err(ctx.err(p.tau0.as_ref().map(|q| q.span()), "pulses.tau0", "must be > 0"));
    }
    let resonance = match ctx.word(&p.resonance, "pulses.resonance", &["exact", "closed_form"], "exact")? {
        "exact" => Resonance::Exact,
        _ => Resonance::ClosedForm,
    };
    let source = match ctx.word(&p.source, "pulses.source", &["explicit", "optimum"], "explicit")? {
        "explicit" => PulseSource::Explicit,
        _ => PulseSource::Optimum,
    };
    let mut block = |raw: Option<RawPulse>, name: &str| -> Result<PulseBlock, ConfigError> {
        let raw = raw.unwrap_or_default();
        let f = |k: &str| format!("pulses.{name}.{k}");
        if raw.amplitude.is_none() && source == PulseSource::Explicit {
            ctx.warnings.push(format!("{} not set; using 0 (no drive)", f("amplitude")));
        }
        let amplitude = ctx.opt(&raw.amplitude, &f("amplitude"), Kind::Amplitude, 0.0)?;
        if amplitude < 0.0 {
            return Err(ctx.err(raw.amplitude.as_ref().map(|q| q.span()), &f("amplitude"), "must be >= 0"));
        }
        Ok(PulseBlock {
            amplitude,
            beta: ctx.opt(&raw.beta, &f("beta"), Kind::Chirp, 0.0)?,
            phase: ctx.opt(&raw.phase, &f("phase"), Kind::Angle, 0.0)?,
            detuning: ctx.opt(&raw.detuning, &f("detuning"), Kind::Energy, 0.0)?,
        })
    };
    let plus = block(p.plus, "plus")?;
    let minus = block(p.minus, "minus")?;
    Ok(PulseConfig { tau0, resonance, source, plus, minus })
}

fn resolve_optimum(ctx: &mut Ctx, o: RawOptimum) -> Result<OptimumConfig, ConfigError> {
    let k = match &o.k {
        None => 0,
        Some(s) if (0..=1000).contains(s.get_ref()) => *s.get_ref() as u32,
        Some(s) => return Err(ctx.err(Some(s.span()), "optimum.k", "must be an integer in 0..=1000")),
    };
    let phi_minus = ctx.opt(&o.phi_minus, "optimum.phi_minus", Kind::Angle, 0.0)?;
    let phi_plus = match &o.phi_plus {
        None => PhiPlus::Aligned,
        Some(q) if q.get_ref() == "aligned" => PhiPlus::Aligned,
        Some(q) => PhiPlus::Value(ctx.quantity(q, "optimum.phi_plus", Kind::Angle)?),
    };
    Ok(OptimumConfig { k, phi_minus, phi_plus })
}

fn resolve_propagation(ctx: &mut Ctx, p: RawPropagation) -> Result<(PropagationConfig, PostPulseOptions), ConfigError> {
    let explicit_times = p.t_start.is_some() || p.t_end.is_some();
    let window_word = ctx.word(
        &p.window,
        "propagation.window",
        &["auto", "explicit"],
        if explicit_times { "explicit" } else { "auto" },
    )?;
    let window = if window_word == "auto" {
        if explicit_times {
            let span = p.t_start.as_ref().or(p.t_end.as_ref()).map(|q| q.span());
            return Err(ctx.err(span, "propagation.t_start", "t_start/t_end need window = \"explicit\""));
        }
        Window::Auto
    } else {
        let (Some(a), Some(b)) = (&p.t_start, &p.t_end) else {
            return Err(ctx.err(
                p.window.as_ref().map(|q| q.span()),
                "propagation.window",
                "explicit window needs t_start and t_end",
            ));
        };
        let t_start = ctx.quantity(a, "propagation.t_start", Kind::Time)?;
        let t_end = ctx.quantity(b, "propagation.t_end", Kind::Time)?;
        if !(t_end > t_start) {
            return Err(ctx.err(Some(b.span()), "propagation.t_end", "must exceed t_start"));
        }
        Window::Explicit { t_start, t_end }
    };
    let step = match ctx.word(&p.step, "propagation.step", &["fixed", "adaptive"], "fixed")? {
        "fixed" => {
            let spp = ctx.positive(&p.steps_per_period, "propagation.steps_per_period", 40.0)?;
            if spp < StepControl::MIN_STEPS_PER_PERIOD {
                let span = p.steps_per_period.as_ref().map(|s| s.span());
                return Err(ctx.err(span, "propagation.steps_per_period", "must be >= 40 to resolve the carrier"));
            }
            StepControl::Fixed { steps_per_period: spp }
        }
        _ => StepControl::Adaptive {
            rtol: ctx.positive(&p.rtol, "propagation.rtol", 1e-9)?,
            atol: ctx.positive(&p.atol, "propagation.atol", 1e-12)?,
            max_steps: ctx.count(&p.max_steps, "propagation.max_steps", 1, 50_000_000)?,
        },
    };
    let sample_stride = ctx.count(&p.sample_stride, "propagation.sample_stride", 1, 200)?;
    let window_pp = p
        .post_pulse_window
        .as_ref()
        .map(|q| {
            let v = ctx.quantity(q, "propagation.post_pulse_window", Kind::Time)?;
            if v > 0.0 {
                Ok(v)
            } else {
                Err(ctx.err(Some(q.span()), "propagation.post_pulse_window", "must be > 0"))
            }
        })
        .transpose()?;
    let samples = ctx.count(&p.post_pulse_samples, "propagation.post_pulse_samples", 3, 20_001)?;
    Ok((PropagationConfig { window, step, sample_stride }, PostPulseOptions { window: window_pp, samples }))
}

fn resolve_scan(ctx: &mut Ctx, s: RawScan, tau0: f64) -> Result<ScanConfig, ConfigError> {
    let mode = match ctx.word(&s.mode, "scan.mode", &["equal_chirp", "independent"], "equal_chirp")? {
        "equal_chirp" => ScanMode::EqualChirp,
        _ => ScanMode::Independent,
    };
    let mut axes = Vec::new();
    for (i, a) in s.axis.iter().enumerate() {
        let field = |k: &str| format!("scan.axis[{i}].{k}");
        let param = ScanParam::from_name(a.param.get_ref()).ok_or_else(|| {
            ctx.err(Some(a.param.span()), &field("param"), "expected amplitude, beta_plus, beta_minus or delta")
        })?;
        let kind = match param {
            ScanParam::Amplitude => Kind::Amplitude,
            ScanParam::BetaPlus | ScanParam::BetaMinus => Kind::ChirpNs2,
            ScanParam::Delta => Kind::Energy,
        };
        let min = ctx.quantity(&a.min, &field("min"), kind)?;
        let max = ctx.quantity(&a.max, &field("max"), kind)?;
        if !(max > min) {
            return Err(ctx.err(Some(a.max.span()), &field("max"), "must exceed min"));
        }
        let points = ctx.count(&Some(a.points.clone()), &field("points"), 2, 2)?;
        axes.push(ScanAxis::new(param, min, max, points));
    }
    if axes.is_empty() || axes.len() > 2 {
        return Err(ctx.err(None, "scan.axis", "a scan needs one or two [[scan.axis]] tables"));
    }
    if mode == ScanMode::EqualChirp && axes.iter().any(|a| a.param == ScanParam::BetaMinus) {
        return Err(ctx.err(s.mode.as_ref().map(|q| q.span()), "scan.mode", "equal_chirp forbids a beta_minus axis"));
    }
    let swept = |p: ScanParam| axes.iter().any(|a| a.param == p);
    if s.amplitude.is_none() && !swept(ScanParam::Amplitude) {
        ctx.warnings.push("scan.amplitude not set; using 0 (no drive)".into());
    }
    let reference = FixedParams::reference(0.0);
    let fixed = FixedParams {
        amplitude: ctx.opt(&s.amplitude, "scan.amplitude", Kind::Amplitude, 0.0)?,
        beta_plus: ctx.opt(&s.beta_plus, "scan.beta_plus", Kind::ChirpNs2, 0.0)?,
        beta_minus: ctx.opt(&s.beta_minus, "scan.beta_minus", Kind::ChirpNs2, 0.0)?,
        delta: ctx.opt(&s.delta, "scan.delta", Kind::Energy, 0.0)?,
        tau0,
        target_phases: (
            ctx.opt(&s.phi_minus, "scan.phi_minus", Kind::Angle, reference.target_phases.0)?,
            ctx.opt(&s.phi_plus, "scan.phi_plus", Kind::Angle, reference.target_phases.1)?,
        ),
    };
    Ok(ScanConfig { mode, fixed, axes })
}
