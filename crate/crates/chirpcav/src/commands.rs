//! Subcommand drivers: read the config, compute, then write every output.
//! Nothing is written until all results exist.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use chirpcav_core::magnus::{OptimalSolution, ThreeLevelParams};
use chirpcav_core::pulse::PulsePair;
use chirpcav_core::scan::symmetry_report;
use serde_json::{json, Value};

use crate::config::{Parsed, RunConfig};
use crate::output::{self, ManifestInfo, OutputFile};
use crate::run;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Pulse,
    Magnus,
    Optimum,
    Simulate,
    Scan,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Pulse => "pulse",
            Command::Magnus => "magnus",
            Command::Optimum => "optimum",
            Command::Simulate => "simulate",
            Command::Scan => "scan",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Options {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub threads: usize,
}

pub fn load_config(path: Option<&Path>) -> Result<Parsed> {
    let text = match path {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => String::new(),
    };
    let parsed = RunConfig::parse(&text).map_err(|e| match path {
        Some(p) => anyhow::anyhow!("{}: {e}", p.display()),
        None => anyhow::anyhow!("{e}"),
    })?;
    Ok(parsed)
}

/// Runs `command` and returns a one-line report.
pub fn execute(command: Command, opts: &Options) -> Result<String> {
    let started = Instant::now();
    let Parsed { config, warnings } = load_config(opts.config.as_deref())?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let threads = if opts.threads == 0 { rayon::current_num_threads() } else { opts.threads };
    let (files, report) = compute(command, &config, threads)?;
    let resolved = config.to_toml();
    let info = ManifestInfo {
        command: command.name(),
        resolved_config: &resolved,
        warnings: &warnings,
        wall_time_s: started.elapsed().as_secs_f64(),
        threads,
    };
    let mut all = files;
    all.push(output::manifest(&info, &all)?);
    let dir = opts
        .out
        .clone()
        .or_else(|| config.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let written = output::write_all(&dir, &all)?;
    for p in &written {
        eprintln!("wrote {}", p.display());
    }
    Ok(report)
}

/// The files a command produces, in memory, plus its report line.
pub fn compute(command: Command, cfg: &RunConfig, threads: usize) -> Result<(Vec<OutputFile>, String)> {
    match command {
        Command::Pulse => pulse(cfg),
        Command::Magnus => magnus(cfg),
        Command::Optimum => optimum(cfg),
        Command::Simulate => simulate(cfg),
        Command::Scan => scan(cfg, threads),
    }
}

fn summary(name: &str, body: Value) -> Result<OutputFile> {
    Ok(OutputFile { name: name.into(), schema: output::SUMMARY_SCHEMA, bytes: output::json_bytes(&body)? })
}

fn levels_json(l: &ThreeLevelParams) -> Value {
    json!({
        "omega_minus": l.omega_minus,
        "omega_plus": l.omega_plus,
        "coupling": l.coupling,
        "mu_tilde_minus": l.mu_tilde_minus,
        "mu_tilde_plus": l.mu_tilde_plus,
        "m_minus": l.m_minus,
        "m_plus": l.m_plus,
        "orientation_bound": l.orientation_bound(),
    })
}

fn pulses_json(p: &PulsePair) -> Value {
    let one = |s: &chirpcav_core::pulse::PulseSpec| {
        json!({
            "amplitude": s.amplitude,
            "resonance": s.resonance,
            "tau0": s.tau0,
            "beta": s.beta,
            "beta_ns2": run::ns2(s.beta),
            "phase": s.phase,
            "detuning": s.detuning,
        })
    };
    json!({ "plus": one(&p.plus), "minus": one(&p.minus) })
}

fn optimum_json(o: &OptimalSolution) -> Value {
    json!({
        "k": o.k,
        "area": o.area,
        "area_over_pi": run::in_pi(o.area),
        "amplitude_minus": o.amplitude_minus,
        "amplitude_plus": o.amplitude_plus,
        "arg_theta_minus": o.arg_theta_minus,
        "arg_theta_plus": o.arg_theta_plus,
        "phase_minus": o.phase_minus,
        "phase_plus": o.phase_plus,
        "phase_residual": o.phase_residual,
        "phase_condition_met": o.phase_condition_met,
    })
}

fn pulse(cfg: &RunConfig) -> Result<(Vec<OutputFile>, String)> {
    let s = run::setup(cfg)?;
    let (pulses, _) = run::pulses(cfg, &s.levels)?;
    let window = cfg.propagation.resolve_window(&pulses);
    let csv = output::pulse_csv(&pulses, window, cfg.output.pulse_samples)?;
    let body = json!({
        "schema": output::SUMMARY_SCHEMA,
        "command": "pulse",
        "levels": levels_json(&s.levels),
        "pulses": pulses_json(&pulses),
        "window": [window.0, window.1],
    });
    let files = vec![
        OutputFile { name: "pulse.csv".into(), schema: output::PULSE_SCHEMA, bytes: csv },
        summary("pulse.json", body)?,
    ];
    Ok((files, format!("pulse: {} samples over [{:e}, {:e}] a.u.", cfg.output.pulse_samples, window.0, window.1)))
}

fn magnus(cfg: &RunConfig) -> Result<(Vec<OutputFile>, String)> {
    let m = run::magnus(cfg, cfg.post_pulse.samples)?;
    let max = m.orientation.iter().map(|r| r.1.abs()).fold(0.0, f64::max);
    let rows: Vec<[f64; 2]> = m.orientation.iter().map(|&(t, c)| [t, c]).collect();
    let csv = output::float_table(&output::MAGNUS_HEADER, rows.iter().map(|r| &r[..]))?;
    let (phi_minus0, phi_plus0) = m.state.relative_phases();
    let body = json!({
        "schema": output::SUMMARY_SCHEMA,
        "command": "magnus",
        "pulses": pulses_json(&m.pulses),
        "theta_minus": [m.thetas.minus.re, m.thetas.minus.im],
        "theta_plus": [m.thetas.plus.re, m.thetas.plus.im],
        "theta0": m.thetas.theta0(),
        "populations": m.state.populations(),
        "relative_phases": [phi_minus0, phi_plus0],
        "orientation_bound": m.bound,
        "max_orientation": max,
    });
    let files = vec![
        OutputFile { name: "magnus.csv".into(), schema: output::MAGNUS_SCHEMA, bytes: csv },
        summary("magnus.json", body)?,
    ];
    Ok((files, format!("magnus: max |<cos theta>| = {max:.6} (bound {:.6})", m.bound)))
}

fn optimum(cfg: &RunConfig) -> Result<(Vec<OutputFile>, String)> {
    let s = run::setup(cfg)?;
    let targets = run::optimum_targets(cfg, &s.levels)?;
    let sol = run::optimum(cfg, &s.levels)?;
    let body = json!({
        "schema": output::SUMMARY_SCHEMA,
        "command": "optimum",
        "levels": levels_json(&s.levels),
        "target_phases": [targets.0, targets.1],
        "optimum": optimum_json(&sol),
    });
    let report = format!(
        "optimum: k = {}, amplitudes (minus, plus) = ({:.6}, {:.6}) a.u., phase condition {}",
        sol.k,
        sol.amplitude_minus,
        sol.amplitude_plus,
        if sol.phase_condition_met { "met" } else { "not met" }
    );
    Ok((vec![summary("optimum.json", body)?], report))
}

fn simulate(cfg: &RunConfig) -> Result<(Vec<OutputFile>, String)> {
    let r = run::simulate(cfg)?;
    let csv = output::trajectory_csv(&r.trajectory.samples)?;
    let body = json!({
        "schema": output::SUMMARY_SCHEMA,
        "command": "simulate",
        "levels": levels_json(&r.setup.exact_levels),
        "pulses": pulses_json(&r.pulses),
        "optimum": r.optimum.as_ref().map(optimum_json),
        "window": [r.window.0, r.window.1],
        "steps": r.trajectory.steps,
        "rejected_steps": r.trajectory.rejected_steps,
        "max_norm_drift": r.trajectory.max_norm_drift,
        "final_populations": r.projections.populations,
        "final_phases": r.projections.phases,
        "final_delta_psi": r.projections.delta_psi,
        "post_pulse_max": { "value": r.post_pulse.value, "signed": r.post_pulse.signed, "time": r.post_pulse.time },
        "magnus_populations": r.magnus.populations(),
    });
    let files = vec![
        OutputFile { name: "trajectory.csv".into(), schema: output::TRAJECTORY_SCHEMA, bytes: csv },
        summary("simulate.json", body)?,
    ];
    let p = r.projections.populations;
    let report = format!(
        "simulate: max |<cos theta>| = {:.6}, populations ({:.6}, {:.6}, {:.6}), norm drift {:.1e}",
        r.post_pulse.value, p[0], p[1], p[2], r.trajectory.max_norm_drift
    );
    Ok((files, report))
}

fn scan(cfg: &RunConfig, threads: usize) -> Result<(Vec<OutputFile>, String)> {
    let spec = run::scan_spec(cfg)?;
    let total = spec.len();
    let step = (total / 20).max(1);
    let progress = |done: usize, total: usize| {
        if done % step == 0 || done == total {
            eprintln!("scan: {done}/{total}");
        }
    };
    let result = run::scan(&spec, threads, &progress)?;
    let settings = run::point_settings(&spec);
    let csv = output::scan_csv(&result, &settings)?;
    let best = result.points.iter().filter(|p| p.status.is_ok()).max_by(|a, b| a.orientation.total_cmp(&b.orientation));
    let symmetry = symmetry_report(&result).ok();
    let body = json!({
        "schema": output::SUMMARY_SCHEMA,
        "command": "scan",
        "shape": result.shape(),
        "axes": result.axes.iter().map(|a| json!({
            "param": a.param.name(), "unit": a.param.unit(), "min": a.min, "max": a.max, "points": a.points,
        })).collect::<Vec<_>>(),
        "mode": result.mode.name(),
        "failed": result.failed,
        "degraded": result.degraded,
        "guard_violations": result.guard_violations,
        "best": best.map(|p| json!({ "point": p.flat, "coords": p.coords, "orientation": p.orientation })),
        "symmetry": symmetry.map(|s| json!({ "sign_reversal": s.sign_reversal, "exchange": s.exchange, "pairs": s.pairs })),
    });
    let files = vec![
        OutputFile { name: "scan.csv".into(), schema: output::SCAN_SCHEMA, bytes: csv },
        summary("scan.json", body)?,
    ];
    let mut report = format!("scan: {total} points, {} failed", result.failed);
    if result.degraded {
        report.push_str(" (DEGRADED: more than 5% of points failed)");
    }
    if let Some(b) = best {
        report.push_str(&format!(", max orientation {:.6}", b.orientation));
    }
    Ok((files, report))
}
