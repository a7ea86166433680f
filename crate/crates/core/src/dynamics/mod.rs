//! Sweeps, quenches and fidelity traces.

mod krylov;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use krylov::{krylov_step, KrylovOptions, StepStats};

use crate::error::{Error, Result};
use crate::hamiltonians::{DetuningFamily, LinearOperator, ModelSpec};
use crate::linalg::cnorm;
use crate::spectral::{lowest_eigenpairs_with, EigenOptions, StateVector};
use krylov::KrylovBasis;

/// Norm drift tolerated over a whole trajectory.
pub const CUMULATIVE_NORM_TOL: f64 = 1e-8;

/// Linear detuning ramp from `delta_start` to `delta_end` over `total_time`,
/// stopped after `abort_fraction` of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub total_time: f64,
    pub delta_start: f64,
    pub delta_end: f64,
    #[serde(default = "full_sweep")]
    pub abort_fraction: f64,
}

fn full_sweep() -> f64 {
    1.0
}

impl ScheduleSpec {
    pub fn new(total_time: f64, delta_start: f64, delta_end: f64, abort_fraction: f64) -> Self {
        ScheduleSpec { total_time, delta_start, delta_end, abort_fraction }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.total_time > 0.0 && self.total_time.is_finite()) {
            return Err(Error::invalid("sweep time must be positive"));
        }
        if !(self.delta_start < self.delta_end) {
            return Err(Error::invalid("forward sweeps need delta_start < delta_end"));
        }
        if !(0.0..=1.0).contains(&self.abort_fraction) {
            return Err(Error::invalid("abort fraction must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn delta_at(&self, t: f64) -> f64 {
        self.delta_start + (self.delta_end - self.delta_start) * t / self.total_time
    }

    pub fn stop_time(&self) -> f64 {
        self.abort_fraction * self.total_time
    }
}

/// Step control for time-dependent evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[derive(Default)]
pub struct SweepOptions {
    /// Overrides the default piecewise-constant step `min(0.01·T, 0.05/Ω)`.
    pub max_step: Option<f64>,
    pub krylov: KrylovOptions,
}


impl SweepOptions {
    fn step_for(&self, schedule: &ScheduleSpec, omega: f64) -> f64 {
        self.max_step.unwrap_or_else(|| (0.01 * schedule.total_time).min(0.05 / omega))
    }
}

fn check_norm(psi: &[Complex64], reference: f64, t: f64) -> Result<()> {
    let drift = (cnorm(psi) - reference).abs();
    if drift > CUMULATIVE_NORM_TOL {
        return Err(Error::Integration(format!("norm drift {drift:.2e} at t = {t}")));
    }
    Ok(())
}

fn check_times(times: &[f64], start: f64) -> Result<()> {
    if times.iter().any(|t| !t.is_finite() || *t < start) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("sample times must be finite, nondecreasing and not before the start"));
    }
    Ok(())
}

/// Evolves under `family` with piecewise-constant detuning taken at each substep
/// midpoint, calling `observe` at each requested time.
fn evolve_schedule(
    family: &DetuningFamily,
    schedule: &ScheduleSpec,
    psi: &mut Vec<Complex64>,
    from: f64,
    times: &[f64],
    step: f64,
    opts: &KrylovOptions,
    mut observe: impl FnMut(f64, &[Complex64]) -> Result<()>,
) -> Result<()> {
    let reference = cnorm(psi);
    let mut t = from;
    for &target in times {
        while target - t > 1e-12 * step {
            let h = (target - t).min(step);
            let mid = t + 0.5 * h;
            krylov_step(&family.at(schedule.delta_at(mid)), psi, h, opts)?;
            t += h;
        }
        t = t.max(target);
        check_norm(psi, reference, t)?;
        observe(target, psi)?;
    }
    Ok(())
}

/// States along a sweep at the requested times (measured from the sweep start).
pub fn propagate(
    spec: &ModelSpec,
    schedule: &ScheduleSpec,
    psi0: &StateVector,
    sample_times: &[f64],
    opts: &SweepOptions,
) -> Result<Vec<StateVector>> {
    schedule.validate()?;
    check_times(sample_times, 0.0)?;
    let family = spec.family()?;
    if psi0.space().as_ref() != family.space().as_ref() {
        return Err(Error::SpaceMismatch);
    }
    let mut psi = psi0.amplitudes().to_vec();
    let mut out = Vec::with_capacity(sample_times.len());
    let step = opts.step_for(schedule, spec.omega);
    evolve_schedule(&family, schedule, &mut psi, 0.0, sample_times, step, &opts.krylov, |_, s| {
        out.push(StateVector::from_amplitudes(family.space().clone(), s.to_vec())?);
        Ok(())
    })?;
    Ok(out)
}

/// Outcome of an adiabatic sweep.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub state: StateVector,
    pub stop_time: f64,
    pub stop_delta: f64,
    /// `|⟨E0(δ_stop)|ψ⟩|²`.
    pub ground_fidelity: f64,
}

/// Sweeps from the all-ground configuration and compares with the instantaneous
/// ground state at the stop time.
pub fn sweep(spec: &ModelSpec, schedule: &ScheduleSpec, opts: &SweepOptions) -> Result<SweepResult> {
    schedule.validate()?;
    let family = spec.family()?;
    let psi0 = StateVector::basis(family.space().clone(), 0)?;
    let stop = schedule.stop_time();
    let mut psi = psi0.amplitudes().to_vec();
    let step = opts.step_for(schedule, spec.omega);
    evolve_schedule(&family, schedule, &mut psi, 0.0, &[stop], step, &opts.krylov, |_, _| Ok(()))?;
    let stop_delta = schedule.delta_at(stop);
    let ground = lowest_eigenpairs_with(&family.at(stop_delta), 1, &EigenOptions::default(), &[])?;
    let state = StateVector::from_amplitudes(family.space().clone(), psi)?;
    let g = StateVector::from_real(family.space().clone(), &ground[0].vector)?;
    let ground_fidelity = g.fidelity(&state)?;
    Ok(SweepResult { state, stop_time: stop, stop_delta, ground_fidelity })
}

/// Fidelity time series of a propagated state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuenchTrace {
    pub times: Vec<f64>,
    /// `|⟨Z̄2|ψ(t)⟩|²`.
    pub revival: Vec<f64>,
    /// `|⟨Z2|ψ(t)⟩|²`.
    pub transfer: Vec<f64>,
    pub mean_occupation: Option<Vec<f64>>,
    /// Largest `|‖ψ‖ − 1|` seen.
    pub norm_drift: f64,
    /// Time at which a preceding sweep handed over to the quench.
    pub sweep_end: Option<f64>,
}

impl QuenchTrace {
    fn empty(with_occupation: bool) -> Self {
        QuenchTrace {
            times: Vec::new(),
            revival: Vec::new(),
            transfer: Vec::new(),
            mean_occupation: with_occupation.then(Vec::new),
            norm_drift: 0.0,
            sweep_end: None,
        }
    }

    fn record(&mut self, t: f64, revival: f64, transfer: f64, occupation: f64, norm: f64) {
        self.times.push(t);
        self.revival.push(revival);
        self.transfer.push(transfer);
        if let Some(o) = &mut self.mean_occupation {
            o.push(occupation);
        }
        self.norm_drift = self.norm_drift.max((norm - 1.0).abs());
    }

    pub fn series(&self, target: Target) -> &[f64] {
        match target {
            Target::Z2 => &self.transfer,
            Target::Z2Bar => &self.revival,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Z2,
    Z2Bar,
}

struct Probes {
    z2: Option<usize>,
    z2bar: Option<usize>,
    occupation: Vec<f64>,
}

impl Probes {
    fn new(spec: &ModelSpec, family: &DetuningFamily) -> Result<Self> {
        let space = family.space();
        let sites = spec.site_count()? as f64;
        Ok(Probes {
            z2: space.index_of(spec.z2_mask()?),
            z2bar: spec.z2bar_mask().ok().and_then(|m| space.index_of(m)),
            occupation: family.occupation.iter().map(|o| o / sites).collect(),
        })
    }

    fn measure(&self, psi: &[Complex64]) -> (f64, f64, f64, f64) {
        let amp = |i: Option<usize>| i.map_or(0.0, |i| psi[i].norm_sqr());
        let occ = psi.iter().zip(&self.occupation).map(|(a, o)| a.norm_sqr() * o).sum();
        (amp(self.z2bar), amp(self.z2), occ, cnorm(psi))
    }
}

/// Evolution under a fixed operator, sampled on `times`; one Krylov basis serves as
/// many consecutive samples as its error estimate allows.
fn sample_constant(
    h: &dyn LinearOperator,
    psi: &mut Vec<Complex64>,
    start: f64,
    times: &[f64],
    probes: &Probes,
    with_occupation: bool,
    opts: &KrylovOptions,
    trace: &mut QuenchTrace,
) -> Result<()> {
    let reference = cnorm(psi);
    let mut t0 = start;
    let mut next = 0;
    while next < times.len() {
        if times[next] - t0 <= 0.0 {
            let (r, z, o, nrm) = probes.measure(psi);
            trace.record(times[next], r, z, o, nrm);
            next += 1;
            continue;
        }
        let basis = KrylovBasis::build(h, psi, opts.max_dim, None)?;
        let gram = with_occupation.then(|| basis.projected_diagonal(&probes.occupation));
        let mut served = None;
        while next < times.len() && basis.error(times[next] - t0) <= opts.tol {
            let c = basis.coefficients(times[next] - t0);
            let amp = |i: Option<usize>| i.map_or(0.0, |i| basis.amplitude(&c, i).norm_sqr());
            let occ = gram.as_ref().map_or(0.0, |g| {
                let gc = g * nalgebra::DVector::from_column_slice(&c);
                c.iter().zip(gc.iter()).map(|(a, b)| a.conj() * b).sum::<Complex64>().re
            });
            let nrm = c.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            trace.record(times[next], amp(probes.z2bar), amp(probes.z2), occ, nrm);
            served = Some(times[next]);
            next += 1;
        }
        let advance = match served {
            Some(t) => t - t0,
            None => basis.max_step(times[next] - t0, opts.tol),
        };
        if advance <= 0.0 {
            return Err(Error::Integration(format!(
                "tolerance {:.1e} unreachable with {} Krylov vectors at t = {t0}",
                opts.tol, opts.max_dim
            )));
        }
        *psi = basis.state(&basis.coefficients(advance));
        t0 += advance;
        check_norm(psi, reference, t0)?;
    }
    Ok(())
}

fn uniform_times(start: f64, t_max: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && t_max >= 0.0 && t_max.is_finite()) {
        return Err(Error::invalid("quench needs dt > 0 and t_max >= 0"));
    }
    let steps = (t_max / dt + 1e-9).floor() as usize;
    Ok((0..=steps).map(|j| start + j as f64 * dt).collect())
}

/// Quench at `spec.delta` from `psi0`, sampled every `dt` up to `t_max`.
pub fn quench_trace(
    spec: &ModelSpec,
    psi0: &StateVector,
    t_max: f64,
    dt: f64,
    opts: &KrylovOptions,
) -> Result<QuenchTrace> {
    let family = spec.family()?;
    if psi0.space().as_ref() != family.space().as_ref() {
        return Err(Error::SpaceMismatch);
    }
    let probes = Probes::new(spec, &family)?;
    let times = uniform_times(0.0, t_max, dt)?;
    let mut trace = QuenchTrace::empty(true);
    let mut psi = psi0.amplitudes().to_vec();
    sample_constant(&family.at(spec.delta), &mut psi, 0.0, &times, &probes, true, opts, &mut trace)?;
    Ok(trace)
}

/// Quench from the `Z̄2` configuration.
pub fn quench_from_z2bar(spec: &ModelSpec, t_max: f64, dt: f64) -> Result<QuenchTrace> {
    let space = spec.family()?.space().clone();
    let psi0 = StateVector::basis(space, spec.z2bar_mask()?)?;
    quench_trace(spec, &psi0, t_max, dt, &KrylovOptions::default())
}

/// Sweep from the all-ground state, aborted per the schedule, followed by a quench to
/// `quench_delta`. Both phases are recorded; `sweep_end` marks the hand-over time.
pub fn quasi_adiabatic_then_quench(
    spec: &ModelSpec,
    schedule: &ScheduleSpec,
    quench_delta: f64,
    t_max: f64,
    dt: f64,
    opts: &SweepOptions,
) -> Result<QuenchTrace> {
    schedule.validate()?;
    let family = spec.family()?;
    let probes = Probes::new(spec, &family)?;
    let mut psi = StateVector::basis(family.space().clone(), 0)?.into_amplitudes();
    let mut trace = QuenchTrace::empty(true);
    let stop = schedule.stop_time();
    let step = opts.step_for(schedule, spec.omega);
    let sweep_times = uniform_times(0.0, stop, dt)?;
    let mut sweep_times: Vec<f64> = sweep_times.into_iter().filter(|&t| t < stop).collect();
    sweep_times.push(stop);
    evolve_schedule(&family, schedule, &mut psi, 0.0, &sweep_times, step, &opts.krylov, |t, s| {
        let (r, z, o, n) = probes.measure(s);
        if t < stop {
            trace.record(t, r, z, o, n);
        }
        Ok(())
    })?;
    trace.sweep_end = Some(stop);
    let times = uniform_times(stop, t_max, dt)?;
    sample_constant(&family.at(quench_delta), &mut psi, stop, &times, &probes, true, &opts.krylov, &mut trace)?;
    Ok(trace)
}

/// Largest fidelity of `target` within `window`, with the peak time refined by a
/// parabola through the neighbouring samples when the maximum is interior.
pub fn peak_fidelity(trace: &QuenchTrace, target: Target, window: (f64, f64)) -> Result<(f64, f64)> {
    let (a, b) = window;
    let idx: Vec<usize> = (0..trace.times.len()).filter(|&i| trace.times[i] >= a && trace.times[i] <= b).collect();
    if idx.is_empty() {
        return Err(Error::EmptyWindow(a, b));
    }
    let series = trace.series(target);
    let best = *idx.iter().max_by(|&&i, &&j| series[i].total_cmp(&series[j])).expect("nonempty");
    let interior = best > idx[0] && best < idx[idx.len() - 1];
    if !interior {
        return Ok((trace.times[best], series[best]));
    }
    let (y0, y1, y2) = (series[best - 1], series[best], series[best + 1]);
    let (t0, t1, t2) = (trace.times[best - 1], trace.times[best], trace.times[best + 1]);
    let denom = y0 - 2.0 * y1 + y2;
    let h = 0.5 * (t2 - t0);
    if denom >= 0.0 || (t1 - t0 - h).abs() > 1e-9 * h.max(1.0) {
        return Ok((t1, y1));
    }
    let shift = 0.5 * h * (y0 - y2) / denom;
    let value = y1 - 0.25 * (y0 - y2) * shift / h;
    Ok((t1 + shift, value.min(1.0)))
}

/// Local maxima of `target`'s series, in time order.
pub fn local_maxima(trace: &QuenchTrace, target: Target) -> Vec<(f64, f64)> {
    let s = trace.series(target);
    (1..s.len().saturating_sub(1))
        .filter(|&i| s[i] > s[i - 1] && s[i] >= s[i + 1])
        .map(|i| (trace.times[i], s[i]))
        .collect()
}
