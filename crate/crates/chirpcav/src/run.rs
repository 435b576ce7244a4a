//! The computations behind each subcommand. Everything here returns results
//! in memory; nothing touches the filesystem.

use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::{bail, Context, Result};
use chirpcav_core::magnus::{
    aligned_target_phases, magnus_final_state, max_orientation_bound, orientation_timeseries, pulse_areas,
    solve_optimal_pulses, OptimalSolution, SuperpositionState, ThetaPair, ThreeLevelParams,
};
use chirpcav_core::propagate::{
    post_pulse_max_orientation, propagate_with, PostPulseMax, Projections, System, TrajectoryResult,
};
use chirpcav_core::pulse::{PulsePair, PulseSpec};
use chirpcav_core::scan::{assemble, Resonance, ScanContext, ScanResult, ScanSpec};
use chirpcav_core::spectrum::jc_dressed_spectrum;
use chirpcav_core::units;
use rayon::prelude::*;

use crate::config::{PhiPlus, PulseSource, RunConfig};

pub struct Setup {
    pub system: System,
    /// Levels from the exact diagonalisation.
    pub exact_levels: ThreeLevelParams,
    /// Levels the pulses are tuned to (exact or closed-form).
    pub levels: ThreeLevelParams,
}

pub fn setup(cfg: &RunConfig) -> Result<Setup> {
    let system = System::new(&cfg.model)?;
    let exact_levels = ThreeLevelParams::from_exact(system.exact(), &cfg.model);
    let levels = match cfg.pulses.resonance {
        Resonance::Exact => exact_levels,
        Resonance::ClosedForm => ThreeLevelParams::from_spectrum(&jc_dressed_spectrum(&cfg.model)?),
    };
    Ok(Setup { system, exact_levels, levels })
}

/// Target phases (φ_{−,0}, φ_{+,0}) of the optimum block, with `aligned`
/// resolved against the end of the propagation window.
pub fn optimum_targets(cfg: &RunConfig, levels: &ThreeLevelParams) -> Result<(f64, f64)> {
    let o = &cfg.optimum;
    Ok(match o.phi_plus {
        PhiPlus::Value(v) => (o.phi_minus, v),
        PhiPlus::Aligned => {
            // the window does not depend on amplitudes or phases
            let probe = solve_optimal_pulses(levels, o.k, (o.phi_minus, 0.0))?;
            let (_, t_end) = cfg.propagation.resolve_window(&chirped(cfg, &probe, levels));
            aligned_target_phases(levels, o.phi_minus, t_end)
        }
    })
}

pub fn optimum(cfg: &RunConfig, levels: &ThreeLevelParams) -> Result<OptimalSolution> {
    let targets = optimum_targets(cfg, levels)?;
    Ok(solve_optimal_pulses(levels, cfg.optimum.k, targets)?)
}

fn chirped(cfg: &RunConfig, sol: &OptimalSolution, levels: &ThreeLevelParams) -> PulsePair {
    let p = &cfg.pulses;
    let mut pair = sol.pulses(levels, p.tau0, (p.minus.beta, p.plus.beta), 0.0);
    pair.minus.detuning = p.minus.detuning;
    pair.plus.detuning = p.plus.detuning;
    pair
}

/// The pulse pair described by the config, and the optimum it came from if any.
pub fn pulses(cfg: &RunConfig, levels: &ThreeLevelParams) -> Result<(PulsePair, Option<OptimalSolution>)> {
    let p = &cfg.pulses;
    let pair = match p.source {
        PulseSource::Explicit => {
            let make = |b: &crate::config::PulseBlock, resonance: f64| PulseSpec {
                amplitude: b.amplitude,
                resonance,
                tau0: p.tau0,
                beta: b.beta,
                phase: b.phase,
                detuning: b.detuning,
            };
            (PulsePair { plus: make(&p.plus, levels.omega_plus), minus: make(&p.minus, levels.omega_minus) }, None)
        }
        PulseSource::Optimum => {
            let sol = optimum(cfg, levels)?;
            (chirped(cfg, &sol, levels), Some(sol))
        }
    };
    pair.0.validate()?;
    Ok(pair)
}

pub struct MagnusRun {
    pub pulses: PulsePair,
    pub thetas: ThetaPair,
    pub state: SuperpositionState,
    pub bound: f64,
    /// (t, ⟨cosθ⟩) over the post-pulse search window, starting where the
    /// propagation window ends.
    pub orientation: Vec<(f64, f64)>,
}

pub fn magnus(cfg: &RunConfig, samples: usize) -> Result<MagnusRun> {
    let s = setup(cfg)?;
    let (pulses, _) = pulses(cfg, &s.levels)?;
    let thetas = pulse_areas(&pulses, &s.exact_levels, f64::INFINITY)?;
    let state = magnus_final_state(&pulses, &s.exact_levels)?;
    let period = cfg.post_pulse.window.unwrap_or(2.0 * std::f64::consts::PI / s.exact_levels.coupling);
    let n = samples.max(2);
    let (_, t0) = cfg.propagation.resolve_window(&pulses);
    let times: Vec<f64> = (0..n).map(|i| t0 + period * i as f64 / (n - 1) as f64).collect();
    let values = orientation_timeseries(&state, &s.exact_levels, &times);
    Ok(MagnusRun {
        pulses,
        thetas,
        state,
        bound: max_orientation_bound(s.exact_levels.m_minus, s.exact_levels.m_plus),
        orientation: times.into_iter().zip(values).collect(),
    })
}

pub struct SimulateRun {
    pub setup: Setup,
    pub pulses: PulsePair,
    pub optimum: Option<OptimalSolution>,
    pub window: (f64, f64),
    pub trajectory: TrajectoryResult,
    pub projections: Projections,
    pub post_pulse: PostPulseMax,
    pub magnus: SuperpositionState,
}

pub fn simulate(cfg: &RunConfig) -> Result<SimulateRun> {
    let setup = setup(cfg)?;
    let (pulses, optimum) = pulses(cfg, &setup.levels)?;
    let window = cfg.propagation.resolve_window(&pulses);
    let trajectory = propagate_with(&setup.system, &pulses, &cfg.propagation)?;
    let post_pulse = post_pulse_max_orientation(&setup.system, &pulses, &trajectory.final_state, cfg.post_pulse)
        .context("post-pulse orientation search")?;
    let projections = trajectory.final_projections(&setup.system);
    let magnus = magnus_final_state(&pulses, &setup.exact_levels)?;
    Ok(SimulateRun { setup, pulses, optimum, window, trajectory, projections, post_pulse, magnus })
}

pub fn scan_spec(cfg: &RunConfig) -> Result<ScanSpec> {
    let Some(sc) = &cfg.scan else { bail!("the config has no [scan] block") };
    let spec = ScanSpec {
        axes: sc.axes.clone(),
        mode: sc.mode,
        fixed: sc.fixed,
        model: cfg.model,
        resonance: cfg.pulses.resonance,
        propagation: cfg.propagation,
        post_pulse: cfg.post_pulse,
    };
    spec.validate()?;
    Ok(spec)
}

/// Settings applied at each point: amplitude (a.u.), β₊, β₋ (ns²), Δ (a.u.).
pub fn point_settings(spec: &ScanSpec) -> Vec<[f64; 4]> {
    spec.points()
        .iter()
        .map(|p| {
            let s = spec.settings(p);
            [s.amplitude, s.beta_plus, s.beta_minus, s.delta]
        })
        .collect()
}

/// Evaluates every grid point on `threads` workers (0 = all cores).
/// `progress` is called with (done, total) after each point.
pub fn scan(spec: &ScanSpec, threads: usize, progress: &(dyn Fn(usize, usize) + Sync)) -> Result<ScanResult> {
    let ctx = ScanContext::new(spec)?;
    let points = spec.points();
    let total = points.len();
    let done = AtomicUsize::new(0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let results = pool.install(|| {
        points
            .par_iter()
            .map(|p| {
                let r = ctx.evaluate(p);
                progress(done.fetch_add(1, Ordering::Relaxed) + 1, total);
                r
            })
            .collect::<Vec<_>>()
    });
    Ok(assemble(spec, results)?)
}

/// Pulse areas in units of π for display.
pub fn in_pi(v: f64) -> f64 {
    v / std::f64::consts::PI
}

pub fn ns2(v_au: f64) -> f64 {
    units::to_ns2(v_au)
}
