//! Rectangular parameter sweeps and the analysis of their landscapes.
//!
//! Amplitude and detuning axes are in atomic units, chirp axes in ns². A grid
//! point is evaluated by one full propagation; evaluation is a pure function
//! of the spec and the point, so points may run in any order or in parallel.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::magnus::{magnus_final_state, pulse_phases_for_targets, ThreeLevelParams};
use crate::model::ModelParams;
use crate::propagate::{post_pulse_max_orientation, propagate_with, PostPulseOptions, PropagationConfig, System};
use crate::pulse::{PulsePair, PulseSpec};
use crate::spectrum::jc_dressed_spectrum;
use crate::units;

/// Failure fraction above which a scan is marked degraded.
pub const DEGRADED_FRACTION: f64 = 0.05;
/// Rows whose max − min falls below this have no ridge point.
pub const FLAT_ROW_TOLERANCE: f64 = 1e-4;
/// 1/√3 + 0.02: orientations above this are reported as suspicious.
pub const ORIENTATION_GUARD: f64 = 0.597_350_269_189_625_8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScanParam {
    /// 𝒜₊ = 𝒜₋, a.u.
    Amplitude,
    /// ns²
    BetaPlus,
    /// ns²
    BetaMinus,
    /// Δ₊ = Δ₋, a.u.
    Delta,
}

impl ScanParam {
    pub const ALL: [ScanParam; 4] = [ScanParam::Amplitude, ScanParam::BetaPlus, ScanParam::BetaMinus, ScanParam::Delta];

    pub fn name(self) -> &'static str {
        match self {
            ScanParam::Amplitude => "amplitude",
            ScanParam::BetaPlus => "beta_plus",
            ScanParam::BetaMinus => "beta_minus",
            ScanParam::Delta => "delta",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }

    /// Unit of the values carried on this axis.
    pub fn unit(self) -> &'static str {
        match self {
            ScanParam::Amplitude | ScanParam::Delta => "au",
            ScanParam::BetaPlus | ScanParam::BetaMinus => "ns^2",
        }
    }
}

impl fmt::Display for ScanParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanAxis {
    pub param: ScanParam,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl ScanAxis {
    pub fn new(param: ScanParam, min: f64, max: f64, points: usize) -> Self {
        ScanAxis { param, min, max, points }
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| if i + 1 == n { self.max } else { self.min + (self.max - self.min) * i as f64 / (n - 1) as f64 })
            .collect()
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.points - 1) as f64
    }

    /// Values mirror about zero.
    pub fn is_symmetric(&self) -> bool {
        let v = self.values();
        let scale = self.min.abs().max(self.max.abs());
        v.iter().zip(v.iter().rev()).all(|(a, b)| (a + b).abs() <= 1e-12 * scale)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanMode {
    /// β₋ follows β₊; a `beta_plus` axis sets both.
    EqualChirp,
    Independent,
}

impl ScanMode {
    pub fn name(self) -> &'static str {
        match self {
            ScanMode::EqualChirp => "equal_chirp",
            ScanMode::Independent => "independent",
        }
    }
}

/// Which frequencies the pulses are centred on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Resonance {
    /// E± − E₀ of the exact dressed states.
    Exact,
    /// Closed-form JC polariton frequencies.
    ClosedForm,
}

/// Values of the pulse parameters not swept by an axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedParams {
    /// a.u., applied to both pulses
    pub amplitude: f64,
    /// ns²
    pub beta_plus: f64,
    /// ns²
    pub beta_minus: f64,
    /// a.u., common to both pulses
    pub delta: f64,
    pub tau0: f64,
    /// Target superposition phases (φ_{−,0}, φ_{+,0}), mapped onto pulse phases.
    pub target_phases: (f64, f64),
}

impl FixedParams {
    /// Reference values: τ₀ = 5.409×10⁸ a.u., φ_{−,0} = π, φ_{+,0} = π/9.
    pub fn reference(amplitude: f64) -> Self {
        FixedParams {
            amplitude,
            beta_plus: 0.0,
            beta_minus: 0.0,
            delta: 0.0,
            tau0: 5.409e8,
            target_phases: (core::f64::consts::PI, core::f64::consts::PI / 9.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanSpec {
    pub axes: Vec<ScanAxis>,
    pub mode: ScanMode,
    pub fixed: FixedParams,
    pub model: ModelParams,
    pub resonance: Resonance,
    pub propagation: PropagationConfig,
    pub post_pulse: PostPulseOptions,
}

impl ScanSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidScan(m.to_string()));
        if self.axes.is_empty() || self.axes.len() > 2 {
            return bad("a scan needs one or two axes");
        }
        for ax in &self.axes {
            if ax.points < 2 {
                return Err(Error::InvalidScan(format!("axis {} needs at least 2 points", ax.param)));
            }
            if !(ax.min.is_finite() && ax.max.is_finite() && ax.max > ax.min) {
                return Err(Error::InvalidScan(format!("axis {} needs finite min < max", ax.param)));
            }
            if ax.param == ScanParam::Amplitude && ax.min < 0.0 {
                return bad("amplitude axis must be non-negative");
            }
        }
        if self.axes.len() == 2 && self.axes[0].param == self.axes[1].param {
            return bad("both axes sweep the same parameter");
        }
        if self.mode == ScanMode::EqualChirp && self.axes.iter().any(|a| a.param == ScanParam::BetaMinus) {
            return bad("equal_chirp mode forbids a beta_minus axis");
        }
        if !(self.fixed.tau0 > 0.0) || !(self.fixed.amplitude >= 0.0) {
            return bad("fixed block needs tau0 > 0 and amplitude >= 0");
        }
        self.model.validate()?;
        self.propagation.validate()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.points).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points in row-major order, the first axis outermost.
    pub fn points(&self) -> Vec<GridPoint> {
        let values: Vec<Vec<f64>> = self.axes.iter().map(|a| a.values()).collect();
        let n = self.len();
        (0..n)
            .map(|flat| {
                let mut rest = flat;
                let mut index = [0usize; 2];
                for (k, ax) in self.axes.iter().enumerate().rev() {
                    index[k] = rest % ax.points;
                    rest /= ax.points;
                }
                let coords = (0..self.axes.len()).map(|k| values[k][index[k]]).collect();
                GridPoint { flat, index, coords }
            })
            .collect()
    }

    /// Pulse parameters at `point`, in pulse order (β₊, β₋) in ns².
    pub fn settings(&self, point: &GridPoint) -> PointSettings {
        let f = &self.fixed;
        let mut s =
            PointSettings { amplitude: f.amplitude, beta_plus: f.beta_plus, beta_minus: f.beta_minus, delta: f.delta };
        for (ax, &v) in self.axes.iter().zip(&point.coords) {
            match ax.param {
                ScanParam::Amplitude => s.amplitude = v,
                ScanParam::BetaPlus => s.beta_plus = v,
                ScanParam::BetaMinus => s.beta_minus = v,
                ScanParam::Delta => s.delta = v,
            }
        }
        if self.mode == ScanMode::EqualChirp {
            s.beta_minus = s.beta_plus;
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridPoint {
    pub flat: usize,
    /// Index along each axis; unused slots are 0.
    pub index: [usize; 2],
    pub coords: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointSettings {
    pub amplitude: f64,
    pub beta_plus: f64,
    pub beta_minus: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PointStatus {
    Ok,
    Failed(String),
}

impl PointStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, PointStatus::Ok)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointResult {
    pub flat: usize,
    pub index: [usize; 2],
    pub coords: Vec<f64>,
    pub status: PointStatus,
    /// max |⟨cosθ⟩| after the pulses
    pub orientation: f64,
    pub populations: [f64; 3],
    /// (Ψ₋, Ψ₊)
    pub phases: [f64; 2],
    pub delta_psi: f64,
    pub norm_drift: f64,
    /// First-order Magnus populations for the same pulses.
    pub magnus_populations: [f64; 3],
}

impl PointResult {
    pub fn failed(point: &GridPoint, reason: String) -> Self {
        PointResult {
            flat: point.flat,
            index: point.index,
            coords: point.coords.clone(),
            status: PointStatus::Failed(reason),
            orientation: f64::NAN,
            populations: [f64::NAN; 3],
            phases: [f64::NAN; 2],
            delta_psi: f64::NAN,
            norm_drift: f64::NAN,
            magnus_populations: [f64::NAN; 3],
        }
    }
}

/// Immutable per-scan state shared by every point.
pub struct ScanContext {
    pub spec: ScanSpec,
    pub system: System,
    /// Levels the pulses are tuned to.
    pub levels: ThreeLevelParams,
    /// Levels the Magnus comparison is evaluated with (always the exact ones).
    pub exact_levels: ThreeLevelParams,
}

impl ScanContext {
    pub fn new(spec: &ScanSpec) -> Result<Self> {
        spec.validate()?;
        let system = System::new(&spec.model)?;
        let exact_levels = ThreeLevelParams::from_exact(system.exact(), &spec.model);
        let levels = match spec.resonance {
            Resonance::Exact => exact_levels,
            Resonance::ClosedForm => ThreeLevelParams::from_spectrum(&jc_dressed_spectrum(&spec.model)?),
        };
        Ok(ScanContext { spec: spec.clone(), system, levels, exact_levels })
    }

    pub fn pulses(&self, point: &GridPoint) -> PulsePair {
        let s = self.spec.settings(point);
        let f = &self.spec.fixed;
        let (phase_minus, phase_plus) = pulse_phases_for_targets(&self.levels, f.target_phases);
        let make = |resonance: f64, beta_ns2: f64, phase: f64| PulseSpec {
            amplitude: s.amplitude,
            resonance,
            tau0: f.tau0,
            beta: units::ns2(beta_ns2),
            phase,
            detuning: s.delta,
        };
        PulsePair {
            plus: make(self.levels.omega_plus, s.beta_plus, phase_plus),
            minus: make(self.levels.omega_minus, s.beta_minus, phase_minus),
        }
    }

    pub fn evaluate(&self, point: &GridPoint) -> PointResult {
        match self.try_evaluate(point) {
            Ok(r) => r,
            Err(e) => PointResult::failed(point, e.to_string()),
        }
    }

    fn try_evaluate(&self, point: &GridPoint) -> Result<PointResult> {
        let pulses = self.pulses(point);
        let traj = propagate_with(&self.system, &pulses, &self.spec.propagation)?;
        let max = post_pulse_max_orientation(&self.system, &pulses, &traj.final_state, self.spec.post_pulse)?;
        let proj = traj.final_projections(&self.system);
        let magnus = magnus_final_state(&pulses, &self.exact_levels)?;
        Ok(PointResult {
            flat: point.flat,
            index: point.index,
            coords: point.coords.clone(),
            status: PointStatus::Ok,
            orientation: max.value,
            populations: proj.populations,
            phases: proj.phases,
            delta_psi: proj.delta_psi,
            norm_drift: traj.max_norm_drift,
            magnus_populations: magnus.populations(),
        })
    }
}

/// Evaluates a single grid point of `spec`.
pub fn evaluate_point(spec: &ScanSpec, point: &GridPoint) -> Result<PointResult> {
    Ok(ScanContext::new(spec)?.evaluate(point))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanResult {
    pub axes: Vec<ScanAxis>,
    pub mode: ScanMode,
    /// Row-major, first axis outermost.
    pub points: Vec<PointResult>,
    pub failed: usize,
    pub degraded: bool,
    /// Flat indices of points above [`ORIENTATION_GUARD`].
    pub guard_violations: Vec<usize>,
}

impl ScanResult {
    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.points).collect()
    }

    pub fn axis_position(&self, param: ScanParam) -> Option<usize> {
        self.axes.iter().position(|a| a.param == param)
    }

    pub fn at(&self, i: usize, j: usize) -> &PointResult {
        let n1 = self.axes.get(1).map_or(1, |a| a.points);
        &self.points[i * n1 + j]
    }
}

/// Orders point results by grid position and derives the scan-level flags.
pub fn assemble(spec: &ScanSpec, mut results: Vec<PointResult>) -> Result<ScanResult> {
    let n = spec.len();
    results.sort_by_key(|r| r.flat);
    if results.len() != n || results.iter().enumerate().any(|(i, r)| r.flat != i) {
        return Err(Error::InvalidScan(format!("expected {n} distinct point results, got {}", results.len())));
    }
    let failed = results.iter().filter(|r| !r.status.is_ok()).count();
    let guard_violations =
        results.iter().filter(|r| r.status.is_ok() && r.orientation > ORIENTATION_GUARD).map(|r| r.flat).collect();
    Ok(ScanResult {
        axes: spec.axes.clone(),
        mode: spec.mode,
        points: results,
        failed,
        degraded: failed as f64 > DEGRADED_FRACTION * n as f64,
        guard_violations,
    })
}

/// Runs every point in order on the calling thread.
pub fn run_scan(spec: &ScanSpec) -> Result<ScanResult> {
    let ctx = ScanContext::new(spec)?;
    let results = spec.points().iter().map(|p| ctx.evaluate(p)).collect();
    assemble(spec, results)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RidgePoint {
    /// Coordinate on the sweep axis.
    pub sweep: f64,
    /// Argmax on the other axis; `None` for flat or fully failed rows.
    pub argmax: Option<f64>,
    pub max: f64,
}

/// For each value of `sweep_axis`, the coordinate on the other axis where
/// orientation peaks. Ties go to the smallest |coordinate|.
pub fn extract_ridge(result: &ScanResult, sweep_axis: ScanParam) -> Result<Vec<RidgePoint>> {
    if result.axes.len() != 2 {
        return Err(Error::InvalidScan("ridge extraction needs a 2-axis result".to_string()));
    }
    let s = result
        .axis_position(sweep_axis)
        .ok_or_else(|| Error::InvalidScan(format!("{sweep_axis} is not an axis of this scan")))?;
    let o = 1 - s;
    let sweep_vals = result.axes[s].values();
    let other_vals = result.axes[o].values();
    let mut out = Vec::with_capacity(sweep_vals.len());
    for (i, &sv) in sweep_vals.iter().enumerate() {
        let row: Vec<(f64, f64)> = (0..other_vals.len())
            .filter_map(|j| {
                let p = if s == 0 { result.at(i, j) } else { result.at(j, i) };
                p.status.is_ok().then_some((other_vals[j], p.orientation))
            })
            .collect();
        if row.is_empty() {
            out.push(RidgePoint { sweep: sv, argmax: None, max: f64::NAN });
            continue;
        }
        let max = row.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
        let min = row.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        let argmax = if max - min < FLAT_ROW_TOLERANCE {
            None
        } else {
            row.iter()
                .filter(|r| r.1 == max)
                .map(|r| r.0)
                .min_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)))
        };
        out.push(RidgePoint { sweep: sv, argmax, max });
    }
    Ok(out)
}

/// The two fitted optimal-chirp loci β₊(β₋).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocusFit {
    /// 𝒜 = π
    Pi,
    /// 𝒜 = 1.75π
    SevenQuartersPi,
}

impl LocusFit {
    pub fn amplitude_in_pi(self) -> f64 {
        match self {
            LocusFit::Pi => 1.0,
            LocusFit::SevenQuartersPi => 1.75,
        }
    }
}

pub const LOCUS_PI_SCALE: f64 = 415.0;
pub const LOCUS_PI_WIDTH: f64 = 91.0;
pub const LOCUS_PI_OFFSET: f64 = 32.5;
pub const LOCUS_175_OFFSET: f64 = 163.0;
pub const LOCUS_175_BREAK: f64 = 113.0;
pub const LOCUS_175_LIMIT: f64 = 1000.0;

/// Y₁ = 157.44 / (1 + 10^{0.0074(−321.6 − β₋)})
pub fn locus_y1(beta_minus: f64) -> f64 {
    157.44 / (1.0 + 10f64.powf(0.0074 * (-321.6 - beta_minus)))
}

/// Y₂ = −1040.44 / (1 + 10^{0.025(−167 − β₋)})
pub fn locus_y2(beta_minus: f64) -> f64 {
    -1040.44 / (1.0 + 10f64.powf(0.025 * (-167.0 - beta_minus)))
}

/// β₊ on the fitted locus, both chirps in ns². Branches are evaluated
/// exactly as written, including the open interval ends.
pub fn eval_fitted_locus(beta_minus: f64, fit: LocusFit) -> Result<f64> {
    let reject = Err(Error::LocusDomain { beta_minus_ns2: beta_minus });
    if !beta_minus.is_finite() {
        return reject;
    }
    match fit {
        LocusFit::Pi => {
            if beta_minus < 0.0 {
                Ok(LOCUS_PI_SCALE * (-beta_minus / LOCUS_PI_WIDTH).exp() + LOCUS_PI_OFFSET)
            } else if beta_minus > 0.0 {
                Ok(-LOCUS_PI_SCALE * (beta_minus / LOCUS_PI_WIDTH).exp() + LOCUS_PI_OFFSET)
            } else {
                reject
            }
        }
        LocusFit::SevenQuartersPi => {
            let y = LOCUS_175_OFFSET + locus_y1(beta_minus) + locus_y2(beta_minus);
            if -LOCUS_175_LIMIT < beta_minus && beta_minus < -LOCUS_175_BREAK {
                Ok(y)
            } else if -LOCUS_175_BREAK < beta_minus && beta_minus < LOCUS_175_BREAK {
                Ok(beta_minus)
            } else if LOCUS_175_BREAK < beta_minus && beta_minus < LOCUS_175_LIMIT {
                Ok(-y)
            } else {
                reject
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymmetryReport {
    /// max |O(β₊, β₋) − O(−β₊, −β₋)|
    pub sign_reversal: f64,
    /// max |O(β₊, β₋) − O(β₋, β₊)|
    pub exchange: f64,
    /// Mirror pairs compared (both points succeeded).
    pub pairs: usize,
}

/// Orientation mismatch under the two chirp symmetries of a β₊ × β₋ scan.
pub fn symmetry_report(result: &ScanResult) -> Result<SymmetryReport> {
    let bad = |m: &str| Err(Error::InvalidScan(m.to_string()));
    let (Some(ip), Some(im)) = (result.axis_position(ScanParam::BetaPlus), result.axis_position(ScanParam::BetaMinus))
    else {
        return bad("symmetry report needs beta_plus and beta_minus axes");
    };
    let (ap, am) = (&result.axes[ip], &result.axes[im]);
    if !ap.is_symmetric() || !am.is_symmetric() {
        return bad("grid is not symmetric about the origin");
    }
    let (vp, vm) = (ap.values(), am.values());
    if vp.len() != vm.len() || vp.iter().zip(&vm).any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0)) {
        return bad("beta_plus and beta_minus axes differ; exchange is undefined");
    }
    let n = vp.len();
    let get = |p: usize, m: usize| {
        let (i, j) = if ip == 0 { (p, m) } else { (m, p) };
        let r = result.at(i, j);
        r.status.is_ok().then_some(r.orientation)
    };
    let mut rep = SymmetryReport { sign_reversal: 0.0, exchange: 0.0, pairs: 0 };
    for p in 0..n {
        for m in 0..n {
            let Some(o) = get(p, m) else { continue };
            if let Some(r) = get(n - 1 - p, n - 1 - m) {
                rep.sign_reversal = rep.sign_reversal.max((o - r).abs());
                rep.pairs += 1;
            }
            if let Some(x) = get(m, p) {
                rep.exchange = rep.exchange.max((o - x).abs());
            }
        }
    }
    Ok(rep)
}
