//! Exact propagation of H(t) = H₀ − μ cosθ [E₊(t) + E₋(t)] in the truncated
//! composite basis, and the observables extracted from it.
//!
//! The equations are integrated in the interaction picture of the exact H₀
//! eigenbasis, ċ = i E(t) e^{iEt} D e^{−iEt} c with D = μ Vᵀ cosθ V. This is
//! a change of variables, not an approximation: no rotating-wave or Magnus
//! truncation enters. Energies are measured from the dressed ground state, so
//! states are defined up to the global phase e^{−iE₀t}.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::model::{cos_theta_matrix, CompositeBasis, ModelParams, OperatorMatrix};
use crate::pulse::{PulsePair, PulseSpec};
use crate::spectrum::{DressedFrame, ExactDressed};

/// Populations below this have their phase reported as 0.
pub const PHASE_POPULATION_FLOOR: f64 = 1e-6;
/// Largest field at t_end, relative to the peak, accepted as field-free.
pub const FIELD_FREE_THRESHOLD: f64 = 1e-10;
/// Default half-window in units of τ₀.
pub const DEFAULT_WINDOW_TAU0: f64 = 28.0;

/// Everything about the field-free model a propagation needs, built once.
#[derive(Clone)]
pub struct System {
    params: ModelParams,
    basis: CompositeBasis,
    exact: ExactDressed,
    cos: OperatorMatrix,
    /// E_k − E₀
    shifted: Vec<f64>,
    /// μ Vᵀ cosθ V, row-major
    coupling: Vec<f64>,
    /// Vᵀ cosθ V, row-major
    cos_eig: Vec<f64>,
}

impl System {
    pub fn new(params: &ModelParams) -> Result<Self> {
        let exact = ExactDressed::new(params)?;
        let basis = params.basis();
        let cos = cos_theta_matrix(&basis);
        let e0 = exact.ground_energy();
        let shifted = exact.eigensystem.energies.iter().map(|e| e - e0).collect();
        let cos_m = exact.eigensystem.transform(&cos);
        let dim = basis.dim();
        let mut cos_eig = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                cos_eig[i * dim + j] = cos_m[(i, j)];
            }
        }
        let coupling = cos_eig.iter().map(|v| v * params.dipole).collect();
        Ok(System { params: *params, basis, exact, cos, shifted, coupling, cos_eig })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn basis(&self) -> &CompositeBasis {
        &self.basis
    }

    pub fn exact(&self) -> &ExactDressed {
        &self.exact
    }

    pub fn cos_matrix(&self) -> &OperatorMatrix {
        &self.cos
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Eigen-energies relative to the dressed ground state.
    pub fn shifted_energies(&self) -> &[f64] {
        &self.shifted
    }

    /// The dressed ground state at t = 0.
    pub fn ground_state(&self, time: f64) -> StateVector {
        let col = self.exact.eigensystem.vectors.column(self.exact.indices[0]);
        StateVector { time, amplitudes: col.iter().map(|&v| Complex64::new(v, 0.0)).collect() }
    }

    fn vectors(&self) -> &DMatrix<f64> {
        &self.exact.eigensystem.vectors
    }

    /// Vᵀψ
    fn to_eigen(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let v = self.vectors();
        (0..self.dim()).map(|k| v.column(k).iter().zip(psi).map(|(a, b)| b * *a).sum()).collect()
    }

    /// V a
    fn from_eigen(&self, a: &[Complex64]) -> Vec<Complex64> {
        let v = self.vectors();
        let dim = self.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        for (k, ak) in a.iter().enumerate() {
            for (i, o) in out.iter_mut().enumerate() {
                *o += ak * v[(i, k)];
            }
        }
        out
    }

    fn phases(&self, t: f64, out: &mut [Complex64]) {
        for (o, e) in out.iter_mut().zip(&self.shifted) {
            *o = Complex64::from_polar(1.0, e * t);
        }
    }

    /// ⟨cosθ⟩ for eigenbasis amplitudes `a`.
    fn orientation_eigen(&self, a: &[Complex64]) -> f64 {
        let dim = self.dim();
        let mut acc = 0.0;
        for j in 0..dim {
            let row = &self.cos_eig[j * dim..(j + 1) * dim];
            let mut s = Complex64::new(0.0, 0.0);
            for (c, ak) in row.iter().zip(a) {
                s += ak * *c;
            }
            acc += (a[j].conj() * s).re;
        }
        acc
    }
}

/// Amplitudes over the composite basis (index n(J_max+1) + J) at `time`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub time: f64,
    pub amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn basis_state(basis: &CompositeBasis, j: usize, n: usize, time: f64) -> Result<Self> {
        let k = basis.index(j, n).ok_or_else(|| invalid("state", "label outside basis"))?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); basis.dim()];
        amplitudes[k] = Complex64::new(1.0, 0.0);
        Ok(StateVector { time, amplitudes })
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }
}

/// ⟨ψ|cosθ|ψ⟩ over the composite basis.
pub fn orientation_expectation(state: &StateVector, cos: &OperatorMatrix) -> f64 {
    let a = &state.amplitudes;
    let mut acc = 0.0;
    for i in 0..a.len() {
        let mut s = Complex64::new(0.0, 0.0);
        for (j, aj) in a.iter().enumerate() {
            s += aj * cos.matrix[(i, j)];
        }
        acc += (a[i].conj() * s).re;
    }
    acc
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projections {
    /// |⟨0;0|ψ⟩|², |⟨−;0|ψ⟩|², |⟨+;0|ψ⟩|²
    pub populations: [f64; 3],
    /// (Ψ₋, Ψ₊)
    pub phases: [f64; 2],
    /// Ψ₊ − Ψ₋
    pub delta_psi: f64,
}

fn projections_from(overlaps: [Complex64; 3], omegas: [f64; 2], t: f64) -> Projections {
    let populations = [overlaps[0].norm_sqr(), overlaps[1].norm_sqr(), overlaps[2].norm_sqr()];
    let phase = |k: usize| {
        if populations[k] < PHASE_POPULATION_FLOOR {
            0.0
        } else {
            (overlaps[k] * Complex64::from_polar(1.0, omegas[k - 1] * t)).arg()
        }
    };
    let phases = [phase(1), phase(2)];
    Projections { populations, phases, delta_psi: phases[1] - phases[0] }
}

/// Populations of and phases Ψ± = arg[⟨±;0|ψ⟩ e^{iω±t}] on the three states
/// of `frame`.
pub fn dressed_projections(state: &StateVector, frame: &DressedFrame) -> Projections {
    let overlap = |v: &Vec<f64>| -> Complex64 { v.iter().zip(&state.amplitudes).map(|(a, b)| b * *a).sum() };
    let overlaps = [overlap(&frame.vectors[0]), overlap(&frame.vectors[1]), overlap(&frame.vectors[2])];
    let omegas = [frame.energies[1] - frame.energies[0], frame.energies[2] - frame.energies[0]];
    projections_from(overlaps, omegas, state.time)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Window {
    /// ±max(28τ₀, 14τ_max) with τ₀ taken from the pulses.
    Auto,
    Explicit {
        t_start: f64,
        t_end: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepControl {
    /// Classical RK4 at this many steps per period of the fastest carrier.
    Fixed { steps_per_period: f64 },
    /// Dormand–Prince 5(4) with error control.
    Adaptive { rtol: f64, atol: f64, max_steps: usize },
}

impl StepControl {
    pub const MIN_STEPS_PER_PERIOD: f64 = 40.0;

    pub fn adaptive_default() -> Self {
        StepControl::Adaptive { rtol: 1e-9, atol: 1e-12, max_steps: 50_000_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagationConfig {
    pub window: Window,
    pub step: StepControl,
    /// Record observables every this many steps.
    pub sample_stride: usize,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            window: Window::Auto,
            step: StepControl::Fixed { steps_per_period: 40.0 },
            sample_stride: 200,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        if let Window::Explicit { t_start, t_end } = self.window {
            if !(t_start.is_finite() && t_end.is_finite() && t_end > t_start) {
                return Err(invalid("window", "need finite t_end > t_start"));
            }
        }
        match self.step {
            StepControl::Fixed { steps_per_period } => {
                if !(steps_per_period >= StepControl::MIN_STEPS_PER_PERIOD) || !steps_per_period.is_finite() {
                    return Err(invalid("steps_per_period", "must be >= 40 to resolve the carrier"));
                }
            }
            StepControl::Adaptive { rtol, atol, max_steps } => {
                if !(rtol > 0.0 && atol > 0.0) {
                    return Err(invalid("tolerance", "rtol and atol must be > 0"));
                }
                if max_steps == 0 {
                    return Err(invalid("max_steps", "must be > 0"));
                }
            }
        }
        if self.sample_stride == 0 {
            return Err(invalid("sample_stride", "must be > 0"));
        }
        Ok(())
    }

    pub fn resolve_window(&self, pulses: &PulsePair) -> (f64, f64) {
        match self.window {
            Window::Explicit { t_start, t_end } => (t_start, t_end),
            Window::Auto => {
                let tau0 = pulses.plus.tau0.max(pulses.minus.tau0);
                let half = (DEFAULT_WINDOW_TAU0 * tau0).max(pulses.support_half_width());
                (-half, half)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub orientation: f64,
    pub populations: [f64; 3],
    pub phases: [f64; 2],
    pub delta_psi: f64,
    pub norm: f64,
}

#[derive(Clone, Debug)]
pub struct TrajectoryResult {
    pub samples: Vec<Sample>,
    pub final_state: StateVector,
    /// Integrator steps taken (accepted steps when adaptive).
    pub steps: usize,
    pub rejected_steps: usize,
    pub max_norm_drift: f64,
}

impl TrajectoryResult {
    pub fn final_projections(&self, system: &System) -> Projections {
        dressed_projections(&self.final_state, &system.exact().frame())
    }
}

/// Field of one pulse with its time-independent factors hoisted.
#[derive(Clone, Copy)]
struct Carrier {
    pre: Complex64,
    inv_two_tau2: f64,
    half_chirp: f64,
    omega: f64,
    phase: f64,
    support: f64,
}

impl Carrier {
    fn new(p: &PulseSpec) -> Self {
        let b = p.beta / (p.tau0 * p.tau0);
        let pre =
            (Complex64::new(1.0, 0.0) / Complex64::new(1.0, -b)).sqrt() * ((2.0 / PI).sqrt() * p.amplitude / p.tau0);
        let tau = p.stretched_duration();
        Carrier {
            pre,
            inv_two_tau2: 0.5 / (tau * tau),
            half_chirp: 0.5 * p.temporal_chirp(),
            omega: p.omega_center(),
            phase: p.phase,
            support: p.support_half_width(),
        }
    }

    fn field(&self, t: f64) -> f64 {
        if t.abs() > self.support || self.pre == Complex64::new(0.0, 0.0) {
            return 0.0;
        }
        let env = (-t * t * self.inv_two_tau2).exp();
        let (s, c) = (-self.half_chirp * t * t + self.omega * t + self.phase).sin_cos();
        env * (self.pre.re * c - self.pre.im * s)
    }
}

struct Field {
    plus: Carrier,
    minus: Carrier,
    support: f64,
    idle: bool,
}

impl Field {
    fn new(p: &PulsePair) -> Self {
        let plus = Carrier::new(&p.plus);
        let minus = Carrier::new(&p.minus);
        let on = |c: &Carrier| c.pre.norm() != 0.0;
        let amp = |c: &Carrier| if on(c) { c.support } else { 0.0 };
        let idle = !on(&plus) && !on(&minus);
        Field { plus, minus, support: amp(&plus).max(amp(&minus)), idle }
    }

    fn at(&self, t: f64) -> f64 {
        self.plus.field(t) + self.minus.field(t)
    }

    /// The field vanishes on the closed interval between a and b.
    fn off_between(&self, a: f64, b: f64) -> bool {
        self.idle || (a > self.support && b > self.support) || (a < -self.support && b < -self.support)
    }
}

/// Integrator workspace for the interaction-picture equations.
struct Rhs<'a> {
    sys: &'a System,
    u: Vec<Complex64>,
}

impl<'a> Rhs<'a> {
    fn new(sys: &'a System) -> Self {
        Rhs { sys, u: vec![Complex64::new(0.0, 0.0); sys.dim()] }
    }

    /// out = i f ph ⊙ (D (ph* ⊙ c))
    fn eval(&mut self, f: f64, ph: &[Complex64], c: &[Complex64], out: &mut [Complex64]) {
        let dim = self.sys.dim();
        if f == 0.0 {
            out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
            return;
        }
        for k in 0..dim {
            self.u[k] = ph[k].conj() * c[k];
        }
        let d = &self.sys.coupling;
        for k in 0..dim {
            let row = &d[k * dim..(k + 1) * dim];
            let mut s = Complex64::new(0.0, 0.0);
            for (dv, uv) in row.iter().zip(&self.u) {
                s += uv * *dv;
            }
            out[k] = Complex64::new(0.0, f) * ph[k] * s;
        }
    }
}

struct Recorder<'a> {
    sys: &'a System,
    samples: Vec<Sample>,
    max_norm_drift: f64,
    a: Vec<Complex64>,
    ph: Vec<Complex64>,
}

impl<'a> Recorder<'a> {
    fn new(sys: &'a System) -> Self {
        let dim = sys.dim();
        Recorder {
            sys,
            samples: Vec::new(),
            max_norm_drift: 0.0,
            a: vec![Complex64::new(0.0, 0.0); dim],
            ph: vec![Complex64::new(0.0, 0.0); dim],
        }
    }

    fn record(&mut self, t: f64, c: &[Complex64], store: bool) {
        let norm = c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        self.max_norm_drift = self.max_norm_drift.max((norm - 1.0).abs());
        if !store {
            return;
        }
        self.sys.phases(t, &mut self.ph);
        for k in 0..c.len() {
            self.a[k] = c[k] * self.ph[k].conj();
        }
        let idx = self.sys.exact.indices;
        // in the shifted interaction picture arg c± already has e^{iω±t} removed
        let overlaps = [c[idx[0]], c[idx[1]], c[idx[2]]];
        let p = projections_from(overlaps, [0.0, 0.0], 0.0);
        self.samples.push(Sample {
            t,
            orientation: self.sys.orientation_eigen(&self.a),
            populations: p.populations,
            phases: p.phases,
            delta_psi: p.delta_psi,
            norm,
        });
    }
}

/// Propagates from the dressed ground state across the configured window.
pub fn propagate(params: &ModelParams, pulses: &PulsePair, config: &PropagationConfig) -> Result<TrajectoryResult> {
    let system = System::new(params)?;
    propagate_with(&system, pulses, config)
}

/// [`propagate`] reusing a prebuilt [`System`].
pub fn propagate_with(system: &System, pulses: &PulsePair, config: &PropagationConfig) -> Result<TrajectoryResult> {
    config.validate()?;
    let (t0, t1) = config.resolve_window(pulses);
    evolve(system, pulses, &system.ground_state(t0), t1, config)
}

/// Evolves `initial` from its time to `t_to`, forward or backward.
pub fn evolve(
    system: &System,
    pulses: &PulsePair,
    initial: &StateVector,
    t_to: f64,
    config: &PropagationConfig,
) -> Result<TrajectoryResult> {
    config.validate()?;
    pulses.validate()?;
    if initial.amplitudes.len() != system.dim() {
        return Err(invalid("initial", "state dimension does not match the basis"));
    }
    if !t_to.is_finite() {
        return Err(invalid("t_to", "must be finite"));
    }
    let t_from = initial.time;
    let dim = system.dim();
    let mut ph = vec![Complex64::new(0.0, 0.0); dim];
    system.phases(t_from, &mut ph);
    let a0 = system.to_eigen(&initial.amplitudes);
    let mut c: Vec<Complex64> = a0.iter().zip(&ph).map(|(a, p)| a * p).collect();

    let omega_ref = pulses.plus.omega_center().max(pulses.minus.omega_center()).max(system.params.omega_c);
    let period = 2.0 * PI / omega_ref;
    let field = Field::new(pulses);
    let mut rec = Recorder::new(system);

    let (steps, rejected) = match config.step {
        StepControl::Fixed { steps_per_period } => {
            let h_max = period / steps_per_period;
            (fixed_rk4(system, &field, &mut c, t_from, t_to, h_max, config.sample_stride, &mut rec), 0)
        }
        StepControl::Adaptive { rtol, atol, max_steps } => {
            let opts = AdaptiveOpts { rtol, atol, max_steps, h_init: period / 40.0, h_max: period };
            adaptive_dp45(system, &field, &mut c, t_from, t_to, opts, config.sample_stride, &mut rec)?
        }
    };

    system.phases(t_to, &mut ph);
    let a: Vec<Complex64> = c.iter().zip(&ph).map(|(c, p)| c * p.conj()).collect();
    let final_state = StateVector { time: t_to, amplitudes: system.from_eigen(&a) };
    Ok(TrajectoryResult {
        samples: rec.samples,
        final_state,
        steps,
        rejected_steps: rejected,
        max_norm_drift: rec.max_norm_drift,
    })
}

#[allow(clippy::too_many_arguments)]
fn fixed_rk4(
    sys: &System,
    field: &Field,
    c: &mut [Complex64],
    t_from: f64,
    t_to: f64,
    h_max: f64,
    stride: usize,
    rec: &mut Recorder,
) -> usize {
    let dim = sys.dim();
    let span = t_to - t_from;
    let n = ((span.abs() / h_max).ceil() as usize).max(1);
    let h = span / n as f64;
    let zero = Complex64::new(0.0, 0.0);
    let mut rhs = Rhs::new(sys);
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![zero; dim], vec![zero; dim], vec![zero; dim], vec![zero; dim], vec![zero; dim]);
    let mut ph0 = vec![zero; dim];
    let mut phm = vec![zero; dim];
    let mut ph1 = vec![zero; dim];
    let half: Vec<Complex64> = sys.shifted.iter().map(|e| Complex64::from_polar(1.0, e * 0.5 * h)).collect();
    let mut have_ph0 = false;
    let mut taken = 0;

    rec.record(t_from, c, true);
    for i in 0..n {
        let ta = t_from + h * i as f64;
        let tb = if i + 1 == n { t_to } else { t_from + h * (i + 1) as f64 };
        if field.off_between(ta, tb) {
            have_ph0 = false;
        } else {
            if !have_ph0 {
                sys.phases(ta, &mut ph0);
            }
            sys.phases(tb, &mut ph1);
            for k in 0..dim {
                phm[k] = ph0[k] * half[k];
            }
            let tm = 0.5 * (ta + tb);
            let (fa, fm, fb) = (field.at(ta), field.at(tm), field.at(tb));
            rhs.eval(fa, &ph0, c, &mut k1);
            for k in 0..dim {
                tmp[k] = c[k] + k1[k] * (0.5 * h);
            }
            rhs.eval(fm, &phm, &tmp, &mut k2);
            for k in 0..dim {
                tmp[k] = c[k] + k2[k] * (0.5 * h);
            }
            rhs.eval(fm, &phm, &tmp, &mut k3);
            for k in 0..dim {
                tmp[k] = c[k] + k3[k] * h;
            }
            rhs.eval(fb, &ph1, &tmp, &mut k4);
            for k in 0..dim {
                c[k] += (k1[k] + (k2[k] + k3[k]) * 2.0 + k4[k]) * (h / 6.0);
            }
            core::mem::swap(&mut ph0, &mut ph1);
            have_ph0 = true;
            taken += 1;
        }
        rec.record(tb, c, (i + 1) % stride == 0 || i + 1 == n);
    }
    taken
}

#[derive(Clone, Copy)]
struct AdaptiveOpts {
    rtol: f64,
    atol: f64,
    max_steps: usize,
    h_init: f64,
    h_max: f64,
}

// Dormand–Prince 5(4) tableau
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus embedded fourth-order weights.
const DP_E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

#[allow(clippy::too_many_arguments)]
fn adaptive_dp45(
    sys: &System,
    field: &Field,
    c: &mut Vec<Complex64>,
    t_from: f64,
    t_to: f64,
    opts: AdaptiveOpts,
    stride: usize,
    rec: &mut Recorder,
) -> Result<(usize, usize)> {
    let dim = sys.dim();
    let dir = if t_to >= t_from { 1.0 } else { -1.0 };
    // only the stretch where the field is on needs integrating
    let s = field.support;
    let lo = t_from.min(t_to).max(-s);
    let hi = t_from.max(t_to).min(s);
    rec.record(t_from, c, true);
    if lo >= hi || field.idle {
        rec.record(t_to, c, true);
        return Ok((0, 0));
    }
    let (a_start, a_end) = if dir > 0.0 { (lo, hi) } else { (hi, lo) };
    if a_start != t_from {
        rec.record(a_start, c, true);
    }

    let zero = Complex64::new(0.0, 0.0);
    let mut rhs = Rhs::new(sys);
    let mut k: Vec<Vec<Complex64>> = (0..7).map(|_| vec![zero; dim]).collect();
    let mut tmp = vec![zero; dim];
    let mut y5 = vec![zero; dim];
    let mut ph = vec![zero; dim];
    let min_step = opts.h_init * 1e-8;

    let mut t = a_start;
    let mut h = opts.h_init;
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    sys.phases(t, &mut ph);
    rhs.eval(field.at(t), &ph, c, &mut k[0]);
    while dir * (a_end - t) > 0.0 {
        if accepted + rejected >= opts.max_steps {
            return Err(Error::StepBudget { time: t, steps: accepted + rejected });
        }
        if h < min_step {
            return Err(Error::StepUnderflow { time: t, step: h });
        }
        let last = h >= (a_end - t).abs();
        let hs = if last { a_end - t } else { dir * h };
        for stage in 1..7 {
            for j in 0..dim {
                let mut acc = c[j];
                for (m, kv) in k.iter().enumerate().take(stage) {
                    let w = DP_A[stage][m];
                    if w != 0.0 {
                        acc += kv[j] * (w * hs);
                    }
                }
                tmp[j] = acc;
            }
            let ts = t + DP_C[stage] * hs;
            sys.phases(ts, &mut ph);
            rhs.eval(field.at(ts), &ph, &tmp, &mut k[stage]);
            if stage == 6 {
                y5.copy_from_slice(&tmp);
            }
        }
        let mut err = 0.0;
        for j in 0..dim {
            let mut e = zero;
            for (m, kv) in k.iter().enumerate() {
                e += kv[j] * (DP_E[m] * hs);
            }
            let scale = opts.atol + opts.rtol * c[j].norm().max(y5[j].norm());
            err += (e.norm() / scale).powi(2);
        }
        let err = (err / dim as f64).sqrt();
        if err <= 1.0 {
            t = if last { a_end } else { t + hs };
            c.copy_from_slice(&y5);
            let (first, rest) = k.split_at_mut(1);
            first[0].copy_from_slice(&rest[5]);
            accepted += 1;
            rec.record(t, c, accepted % stride == 0 || last);
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * fac).min(opts.h_max);
        } else {
            rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        }
    }
    if a_end != t_to {
        rec.record(t_to, c, true);
    }
    Ok((accepted, rejected))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PostPulseOptions {
    /// Search window length; `None` means 2π/g.
    pub window: Option<f64>,
    pub samples: usize,
}

impl Default for PostPulseOptions {
    fn default() -> Self {
        PostPulseOptions { window: None, samples: 20_001 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PostPulseMax {
    /// max |⟨cosθ⟩|
    pub value: f64,
    /// signed ⟨cosθ⟩ at the maximum
    pub signed: f64,
    /// absolute time of the maximum
    pub time: f64,
}

/// Largest |⟨cosθ⟩| under field-free evolution after `state`.
pub fn post_pulse_max_orientation(
    system: &System,
    pulses: &PulsePair,
    state: &StateVector,
    opts: PostPulseOptions,
) -> Result<PostPulseMax> {
    let rel = pulses.relative_envelope(state.time);
    if rel > FIELD_FREE_THRESHOLD {
        return Err(Error::FieldNotNegligible { time: state.time, relative_field: rel });
    }
    if opts.samples < 3 {
        return Err(invalid("samples", "need at least 3"));
    }
    let window = opts.window.unwrap_or(2.0 * PI / system.params.coupling);
    if !(window > 0.0) {
        return Err(invalid("window", "must be > 0"));
    }
    let a = system.to_eigen(&state.amplitudes);
    let mut b = a.clone();
    let mut eval = |s: f64| {
        for ((bk, ak), e) in b.iter_mut().zip(&a).zip(&system.shifted) {
            *bk = ak * Complex64::from_polar(1.0, -e * s);
        }
        system.orientation_eigen(&b)
    };
    let n = opts.samples;
    let ds = window / (n - 1) as f64;
    let values: Vec<f64> = (0..n).map(|i| eval(ds * i as f64)).collect();

    // refine the few largest local maxima of |⟨cosθ⟩|
    let mut peaks: Vec<usize> = (0..n)
        .filter(|&i| {
            let v = values[i].abs();
            (i == 0 || v >= values[i - 1].abs()) && (i + 1 == n || v >= values[i + 1].abs())
        })
        .collect();
    peaks.sort_by(|&x, &y| values[y].abs().total_cmp(&values[x].abs()));
    peaks.truncate(8);
    let mut best = PostPulseMax { value: 0.0, signed: 0.0, time: state.time };
    for i in peaks {
        let lo = (ds * i as f64 - ds).max(0.0);
        let hi = (ds * i as f64 + ds).min(window);
        let s = golden_max(|s| eval(s).abs(), lo, hi);
        for cand in [s, ds * i as f64] {
            let v = eval(cand);
            if v.abs() > best.value {
                best = PostPulseMax { value: v.abs(), signed: v, time: state.time + cand };
            }
        }
    }
    Ok(best)
}

fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..60 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        }
        if (b - a).abs() <= 1e-13 * (a.abs() + b.abs()) {
            break;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::magnus::{solve_optimal_pulses, ThreeLevelParams};
    use crate::pulse::field_truncated;
    use crate::units;

    const TAU0: f64 = 5.409e8;

    fn zero_pulses(params: &ModelParams) -> PulsePair {
        let p =
            PulseSpec { amplitude: 0.0, resonance: params.omega_c, tau0: TAU0, beta: 0.0, phase: 0.0, detuning: 0.0 };
        PulsePair { plus: p, minus: p }
    }

    fn optimal_pair(sys: &System, scale: f64, beta_ns2: f64) -> PulsePair {
        let levels = ThreeLevelParams::from_exact(sys.exact(), sys.params());
        let sol = solve_optimal_pulses(&levels, 0, (0.0, PI / 9.0)).unwrap();
        let beta = units::ns2(beta_ns2);
        let mut pair = sol.pulses(&levels, TAU0, (beta, beta), 0.0);
        pair.plus.amplitude *= scale;
        pair.minus.amplitude *= scale;
        pair
    }

    fn aligned_pair(sys: &System) -> PulsePair {
        let levels = ThreeLevelParams::from_exact(sys.exact(), sys.params());
        let probe = optimal_pair(sys, 1.0, 0.0);
        let (_, t_end) = PropagationConfig::default().resolve_window(&probe);
        let targets = crate::magnus::aligned_target_phases(&levels, 0.0, t_end);
        solve_optimal_pulses(&levels, 0, targets).unwrap().pulses(&levels, TAU0, (0.0, 0.0), 0.0)
    }

    #[test]
    fn carrier_matches_closed_form() {
        let sys = System::new(&ModelParams::reference()).unwrap();
        for b in [-1000.0, 0.0, 370.0] {
            let pair = optimal_pair(&sys, 1.0, b);
            let field = Field::new(&pair);
            for i in -50..=50 {
                let t = i as f64 * 0.3 * pair.support_half_width() / 10.0;
                let want = field_truncated(t, &pair.plus) + field_truncated(t, &pair.minus);
                assert!((field.at(t) - want).abs() <= 1e-12 * pair.peak_envelope(), "{t}");
            }
        }
    }

    #[test]
    fn orientation_of_basis_superpositions() {
        let basis = CompositeBasis::new(4, 3).unwrap();
        let cos = cos_theta_matrix(&basis);
        let s0 = StateVector::basis_state(&basis, 0, 0, 0.0).unwrap();
        assert_eq!(orientation_expectation(&s0, &cos), 0.0);
        let h = 0.5f64.sqrt();
        let mut s = s0.clone();
        s.amplitudes[basis.index(0, 0).unwrap()] = Complex64::new(h, 0.0);
        s.amplitudes[basis.index(1, 0).unwrap()] = Complex64::new(h, 0.0);
        let v = orientation_expectation(&s, &cos);
        // 2 · (1/2) · ⟨0|cosθ|1⟩ with ⟨0|cosθ|1⟩ = 1/√3
        assert!((v - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        s.amplitudes[basis.index(1, 0).unwrap()] = Complex64::new(-h, 0.0);
        assert!((orientation_expectation(&s, &cos) + 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn projections_of_dressed_ground() {
        let sys = System::new(&ModelParams::reference()).unwrap();
        let p = dressed_projections(&sys.ground_state(3.0e9), &sys.exact().frame());
        assert!((p.populations[0] - 1.0).abs() < 1e-14);
        assert!(p.populations[1] < 1e-28 && p.populations[2] < 1e-28);
        assert_eq!(p.phases, [0.0, 0.0]);
        assert_eq!(p.delta_psi, 0.0);
    }

    #[test]
    fn bare_ground_projection_deficit() {
        // the bare |0,0⟩ leaks slightly outside the three dressed states
        let sys = System::new(&ModelParams::reference()).unwrap();
        let bare = StateVector::basis_state(sys.basis(), 0, 0, 0.0).unwrap();
        let p = dressed_projections(&bare, &sys.exact().frame());
        let total: f64 = p.populations.iter().sum();
        assert!(total <= 1.0 + 1e-14);
        assert!(p.populations[0] > 0.99);
    }

    #[test]
    fn zero_field_is_stationary() {
        let params = ModelParams::reference();
        let sys = System::new(&params).unwrap();
        let pulses = zero_pulses(&params);
        let res = propagate_with(&sys, &pulses, &PropagationConfig::default()).unwrap();
        for s in &res.samples {
            assert!((s.populations[0] - 1.0).abs() < 1e-8);
            assert!(s.orientation.abs() < 1e-8);
        }
        assert_eq!(res.steps, 0);
        let m = post_pulse_max_orientation(&sys, &pulses, &res.final_state, Default::default()).unwrap();
        assert!(m.value < 1e-8);
    }

    #[test]
    fn rejects_field_on_at_end() {
        let sys = System::new(&ModelParams::reference()).unwrap();
        let pair = optimal_pair(&sys, 1.0, 0.0);
        let err = post_pulse_max_orientation(&sys, &pair, &sys.ground_state(0.0), Default::default());
        assert!(matches!(err, Err(Error::FieldNotNegligible { .. })));
    }

    #[test]
    fn config_validation() {
        let mut cfg = PropagationConfig::default();
        cfg.step = StepControl::Fixed { steps_per_period: 20.0 };
        assert!(cfg.validate().is_err());
        cfg.step = StepControl::Adaptive { rtol: 0.0, atol: 1e-12, max_steps: 10 };
        assert!(cfg.validate().is_err());
        cfg = PropagationConfig { window: Window::Explicit { t_start: 1.0, t_end: 1.0 }, ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg = PropagationConfig { sample_stride: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn auto_window_covers_stretched_pulse() {
        let sys = System::new(&ModelParams::reference()).unwrap();
        let short = optimal_pair(&sys, 1.0, 0.0);
        let (a, b) = PropagationConfig::default().resolve_window(&short);
        assert_eq!((a, b), (-28.0 * TAU0, 28.0 * TAU0));
        let long = optimal_pair(&sys, 1.0, 1000.0);
        let (_, b) = PropagationConfig::default().resolve_window(&long);
        assert!(b >= long.support_half_width());
        assert!(long.relative_envelope(b) <= FIELD_FREE_THRESHOLD);
    }

    #[test]
    fn step_budget_and_underflow_reported() {
        let sys = System::new(&ModelParams::reference()).unwrap();
        let pair = optimal_pair(&sys, 1.0, 0.0);
        let cfg = PropagationConfig {
            step: StepControl::Adaptive { rtol: 1e-9, atol: 1e-12, max_steps: 10 },
            ..Default::default()
        };
        let err = propagate_with(&sys, &pair, &cfg).unwrap_err();
        assert!(matches!(err, Error::StepBudget { steps: 10, .. }), "{err:?}");
        let cfg = PropagationConfig {
            window: Window::Explicit { t_start: -TAU0, t_end: TAU0 },
            step: StepControl::Adaptive { rtol: 1e-30, atol: 1e-300, max_steps: 1_000_000 },
            ..Default::default()
        };
        let err = propagate_with(&sys, &pair, &cfg).unwrap_err();
        assert!(matches!(err, Error::StepUnderflow { .. }), "{err:?}");
    }

    fn max_diff(a: &StateVector, b: &StateVector) -> f64 {
        a.amplitudes.iter().zip(&b.amplitudes).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn driven_run_is_unitary_and_step_converged() {
        let sys = System::new(&ModelParams::reference()).unwrap();
        let pair = optimal_pair(&sys, 1.0, 0.0);
        let coarse = propagate_with(&sys, &pair, &PropagationConfig::default()).unwrap();
        let fine_cfg = PropagationConfig { step: StepControl::Fixed { steps_per_period: 80.0 }, ..Default::default() };
        let fine = propagate_with(&sys, &pair, &fine_cfg).unwrap();
        assert!(coarse.max_norm_drift < 1e-8, "{}", coarse.max_norm_drift);
        assert!(coarse.samples.iter().all(|s| (s.norm - 1.0).abs() < 1e-8));
        assert!(max_diff(&coarse.final_state, &fine.final_state) < 1e-8);
        let adaptive_cfg = PropagationConfig { step: StepControl::adaptive_default(), ..Default::default() };
        let adaptive = propagate_with(&sys, &pair, &adaptive_cfg).unwrap();
        assert!(max_diff(&adaptive.final_state, &fine.final_state) < 1e-8);
        assert!(adaptive.max_norm_drift < 1e-8);
        // the pulse pair actually drives the system
        let p = coarse.final_projections(&sys);
        assert!((p.populations[0] - 0.5).abs() < 0.01, "{:?}", p.populations);
    }

    #[test]
    fn backward_evolution_restores_initial_state() {
        let sys = System::new(&ModelParams::reference()).unwrap();
        let pair = optimal_pair(&sys, 1.0, 0.0);
        let cfg = PropagationConfig::default();
        let fwd = propagate_with(&sys, &pair, &cfg).unwrap();
        let (t0, _) = cfg.resolve_window(&pair);
        let back = evolve(&sys, &pair, &fwd.final_state, t0, &cfg).unwrap();
        let overlap = sys.ground_state(t0).inner(&back.final_state).norm_sqr();
        assert!((1.0 - overlap).abs() < 1e-6, "{overlap}");
    }

    #[test]
    fn search_window_is_sufficient() {
        let sys = System::new(&ModelParams::reference()).unwrap();
        let pair = aligned_pair(&sys);
        let res = propagate_with(&sys, &pair, &PropagationConfig::default()).unwrap();
        let one = post_pulse_max_orientation(&sys, &pair, &res.final_state, Default::default()).unwrap();
        let window = 4.0 * PI / sys.params().coupling;
        let two = post_pulse_max_orientation(
            &sys,
            &pair,
            &res.final_state,
            PostPulseOptions { window: Some(window), samples: 40_001 },
        )
        .unwrap();
        assert!((one.value - two.value).abs() < 1e-4, "{} {}", one.value, two.value);
        assert!((one.value - 0.5774).abs() < 2e-3, "{}", one.value);
    }
}
