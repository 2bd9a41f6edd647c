//! Recurrence-time extraction from |A(τ)|² series and λ sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{self, AutocorrelationSeries, EvolveOptions, Grid};
use crate::resonance::{self, ContextSpec, TimeScales};
use crate::units::ScaledParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakOptions {
    /// Number of leading peaks averaged for the classical period.
    pub count: usize,
    /// Minimum prominence as a fraction of the series maximum.
    pub prominence: f64,
}

impl Default for PeakOptions {
    fn default() -> Self {
        PeakOptions { count: 5, prominence: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodEstimate {
    pub value: f64,
    pub uncertainty: f64,
    pub peak_indices: Vec<usize>,
    pub peak_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeEstimate {
    pub time: f64,
    pub index: usize,
    pub window: f64,
    pub collapse_time: f64,
    pub initial_envelope: f64,
    pub peak_envelope: f64,
}

fn sample_spacing(series: &AutocorrelationSeries) -> Result<f64> {
    let n = series.len();
    if n < 3 || series.a2.len() != n {
        return Err(Error::InvalidInput(format!("series needs >= 3 matching samples, got {n}")));
    }
    if series.tau.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("series times must be strictly ascending".into()));
    }
    if series.a2.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidInput("series values must be non-negative".into()));
    }
    Ok((series.tau[n - 1] - series.tau[0]) / (n - 1) as f64)
}

/// Topographic prominence of the local maximum at `i`. A side that reaches
/// the end of the series without meeting a higher sample does not bound the
/// prominence; a peak open on both sides is measured from the lowest sample.
fn prominence(y: &[f64], i: usize) -> f64 {
    let h = y[i];
    let side = |it: &mut dyn Iterator<Item = &f64>| {
        let mut low = h;
        for &v in it {
            if v > h {
                return (low, false);
            }
            low = low.min(v);
        }
        (low, true)
    };
    let (left, left_open) = side(&mut y[..i].iter().rev());
    let (right, right_open) = side(&mut y[i + 1..].iter());
    match (left_open, right_open) {
        (true, false) => h - right,
        (false, true) => h - left,
        (true, true) => h - left.min(right),
        (false, false) => h - left.max(right),
    }
}

/// Interior local maxima in order, each with at least `min_prom` prominence.
fn prominent_peaks(y: &[f64], min_prom: f64) -> impl Iterator<Item = usize> + '_ {
    (1..y.len().saturating_sub(1))
        .filter(move |&i| y[i] > y[i - 1] && y[i] >= y[i + 1])
        .filter(move |&i| prominence(y, i) >= min_prom)
}

/// Sub-sample peak position by a parabola through the three samples.
fn refine(t: &[f64], y: &[f64], i: usize) -> f64 {
    let d = y[i - 1] - 2.0 * y[i] + y[i + 1];
    if d == 0.0 {
        return t[i];
    }
    let off = (0.5 * (y[i - 1] - y[i + 1]) / d).clamp(-0.5, 0.5);
    t[i] + off * 0.5 * (t[i + 1] - t[i - 1])
}

/// Mean spacing of the first `count` prominent maxima. Each peak is given an
/// integer order from the median gap, so peaks suppressed by a slower
/// modulation count as skipped periods instead of one long gap.
pub fn extract_classical_period(series: &AutocorrelationSeries, opts: PeakOptions) -> Result<PeriodEstimate> {
    let dt = sample_spacing(series)?;
    let y = &series.a2;
    let max = y.iter().copied().fold(0.0, f64::max);
    let peaks: Vec<usize> = prominent_peaks(y, opts.prominence * max).take(opts.count.max(3)).collect();
    if peaks.len() < 3 {
        return Err(Error::Extraction(format!("only {} qualifying peaks (need 3)", peaks.len())));
    }
    let times: Vec<f64> = peaks.iter().map(|&i| refine(&series.tau, y, i)).collect();
    let mut gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_by(f64::total_cmp);
    let median = gaps[gaps.len() / 2];
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for t in &times[1..] {
        let d = t - times[0];
        let n = (d / median).round().max(1.0);
        sxy += n * d;
        sxx += n * n;
    }
    let span = ((times[times.len() - 1] - times[0]) / median).round().max(1.0);
    Ok(PeriodEstimate {
        value: sxy / sxx,
        uncertainty: 0.5 * dt * std::f64::consts::SQRT_2 / span,
        peak_indices: peaks,
        peak_times: times,
    })
}

/// Centred moving average over `window` (time units). Entry i of the result
/// belongs to sample `offset + i`.
pub fn moving_average(series: &AutocorrelationSeries, window: f64) -> Result<(usize, Vec<f64>)> {
    let dt = sample_spacing(series)?;
    if !(window > 0.0) {
        return Err(Error::InvalidInput(format!("window must be positive, got {window}")));
    }
    let half = ((window / dt).round() as usize / 2).max(1);
    let n = series.len();
    if 2 * half + 1 > n {
        return Err(Error::Span(format!("window {window} longer than series span {}", dt * (n - 1) as f64)));
    }
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in &series.a2 {
        acc += v;
        prefix.push(acc);
    }
    let m = (2 * half + 1) as f64;
    let env = (half..n - half).map(|i| (prefix[i + half + 1] - prefix[i - half]) / m).collect();
    Ok((half, env))
}

fn envelope_peak(series: &AutocorrelationSeries, window: f64, prom: f64) -> Result<EnvelopeEstimate> {
    let (offset, env) = moving_average(series, window)?;
    let initial = env[0];
    let collapse = env
        .iter()
        .position(|&e| e < 0.5 * initial)
        .ok_or_else(|| Error::NoRevival(format!("envelope never falls below half its initial value {initial}")))?;
    let min_prom = prom * initial;
    let tail = &env[collapse..];
    let local = prominent_peaks(tail, min_prom)
        .next()
        .ok_or_else(|| Error::NoRevival("no envelope maximum after the collapse".into()))?;
    let i = collapse + local;
    let tau: Vec<f64> = series.tau[offset..offset + env.len()].to_vec();
    Ok(EnvelopeEstimate {
        time: lobe_vertex(&tau, &env, i, 0.5 * min_prom),
        index: offset + i,
        window,
        collapse_time: tau[collapse],
        initial_envelope: initial,
        peak_envelope: env[i],
    })
}

/// Vertex of a least-squares parabola through the lobe around `i` where the
/// envelope stays within `depth` of env[i]. Ripple-split twin maxima fall in
/// the same lobe and give the same answer.
fn lobe_vertex(t: &[f64], y: &[f64], i: usize, depth: f64) -> f64 {
    let floor = y[i] - depth;
    let mut a = i;
    while a > 0 && y[a - 1] >= floor {
        a -= 1;
    }
    let mut b = i;
    while b + 1 < y.len() && y[b + 1] >= floor {
        b += 1;
    }
    if b - a < 2 {
        return if i > 0 && i + 1 < y.len() { refine(t, y, i) } else { t[i] };
    }
    // Fit y = c0 + c1 x + c2 x² with x centred on the lobe.
    let x0 = 0.5 * (t[a] + t[b]);
    let mut m = [[0.0f64; 3]; 3];
    let mut r = [0.0f64; 3];
    for j in a..=b {
        let x = t[j] - x0;
        let pw = [1.0, x, x * x];
        for (row, &pr) in m.iter_mut().zip(&pw) {
            for (cell, &pc) in row.iter_mut().zip(&pw) {
                *cell += pr * pc;
            }
        }
        for (rk, &pk) in r.iter_mut().zip(&pw) {
            *rk += pk * y[j];
        }
    }
    match solve3(m, r) {
        Some([_, c1, c2]) if c2 < 0.0 => (x0 - 0.5 * c1 / c2).clamp(t[a], t[b]),
        _ => t[i],
    }
}

fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> Option<[f64; 3]> {
    for c in 0..3 {
        let p = (c..3).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs()))?;
        if m[p][c].abs() < 1e-300 {
            return None;
        }
        m.swap(c, p);
        r.swap(c, p);
        for row in c + 1..3 {
            let f = m[row][c] / m[c][c];
            let pivot = m[c];
            for (x, p) in m[row][c..].iter_mut().zip(&pivot[c..]) {
                *x -= f * p;
            }
            r[row] -= f * r[c];
        }
    }
    let mut x = [0.0; 3];
    for c in (0..3).rev() {
        let s: f64 = (c + 1..3).map(|k| m[c][k] * x[k]).sum();
        x[c] = (r[c] - s) / m[c][c];
    }
    Some(x)
}

/// First envelope maximum after the collapse, envelope window 3·t_cl_hint.
pub fn extract_revival_time(
    series: &AutocorrelationSeries,
    t_cl_hint: f64,
    opts: PeakOptions,
) -> Result<EnvelopeEstimate> {
    if !(t_cl_hint > 0.0) {
        return Err(Error::InvalidInput(format!("classical-period hint must be positive, got {t_cl_hint}")));
    }
    envelope_peak(series, 3.0 * t_cl_hint, opts.prominence)
}

/// Same envelope method one level up (window 3·t_rev_hint). The series must
/// span at least two windows.
pub fn extract_super_revival(
    series: &AutocorrelationSeries,
    t_rev_hint: f64,
    opts: PeakOptions,
) -> Result<EnvelopeEstimate> {
    if !(t_rev_hint > 0.0) {
        return Err(Error::InvalidInput(format!("revival hint must be positive, got {t_rev_hint}")));
    }
    sample_spacing(series)?;
    let window = 3.0 * t_rev_hint;
    let span = series.tau[series.len() - 1] - series.tau[0];
    if span < 2.0 * window {
        return Err(Error::Span(format!("series spans {span}, need at least {}", 2.0 * window)));
    }
    envelope_peak(series, window, opts.prominence)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractedTimes {
    pub t_classical: Option<f64>,
    pub t_revival: Option<f64>,
    pub t_super_revival: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RelativeErrors {
    pub t_classical: Option<f64>,
    pub t_revival: Option<f64>,
    pub t_super_revival: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub classical: Option<PeriodEstimate>,
    pub revival: Option<EnvelopeEstimate>,
    pub super_revival: Option<EnvelopeEstimate>,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceReport {
    pub extracted: ExtractedTimes,
    pub analytic: TimeScales,
    pub relative_errors: RelativeErrors,
    pub diagnostics: Diagnostics,
}

fn rel(x: Option<f64>, reference: f64) -> Option<f64> {
    x.map(|v| (v - reference).abs() / reference.abs())
}

/// Runs all three extractors with hints taken from `analytic` (which must be
/// in the series' time unit) and compares.
pub fn compare(series: &AutocorrelationSeries, analytic: &TimeScales, opts: PeakOptions) -> RecurrenceReport {
    let mut diag = Diagnostics::default();
    match extract_classical_period(series, opts) {
        Ok(e) => diag.classical = Some(e),
        Err(e) => diag.failures.push(format!("classical: {e}")),
    }
    match extract_revival_time(series, analytic.t_classical, opts) {
        Ok(e) => diag.revival = Some(e),
        Err(e) => diag.failures.push(format!("revival: {e}")),
    }
    if analytic.t_super_revival.is_finite() {
        match extract_super_revival(series, analytic.t_revival, opts) {
            Ok(e) => diag.super_revival = Some(e),
            Err(e) => diag.failures.push(format!("super-revival: {e}")),
        }
    }
    let extracted = ExtractedTimes {
        t_classical: diag.classical.as_ref().map(|e| e.value),
        t_revival: diag.revival.as_ref().map(|e| e.time),
        t_super_revival: diag.super_revival.as_ref().map(|e| e.time),
    };
    RecurrenceReport {
        relative_errors: RelativeErrors {
            t_classical: rel(extracted.t_classical, analytic.t_classical),
            t_revival: rel(extracted.t_revival, analytic.t_revival),
            t_super_revival: rel(extracted.t_super_revival, analytic.t_super_revival),
        },
        extracted,
        analytic: analytic.clone(),
        diagnostics: diag,
    }
}

/// Wavepacket simulation attached to a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub grid_length: f64,
    pub grid_points: usize,
    pub steps_per_period: usize,
    pub tau_end: f64,
    pub z0: f64,
    pub p0: f64,
    pub delta_p: f64,
    pub with_interaction: bool,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec {
            grid_length: quantum::DEFAULT_LENGTH,
            grid_points: quantum::DEFAULT_POINTS,
            steps_per_period: 200,
            tau_end: 100.0 * std::f64::consts::TAU,
            z0: std::f64::consts::FRAC_PI_2,
            p0: 0.0,
            delta_p: 0.5,
            with_interaction: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub params: ScaledParams,
    pub context: ContextSpec,
    pub simulation: Option<SimulationSpec>,
    pub peaks: PeakOptions,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub q: Option<f64>,
    pub beta: Option<f64>,
    pub delicate: Option<TimeScales>,
    pub robust: Option<TimeScales>,
    pub robust_harmonic: Option<TimeScales>,
    pub report: Option<RecurrenceReport>,
    pub errors: Vec<String>,
}

fn sweep_row(lambda: f64, base: &SweepConfig) -> SweepRow {
    let mut row = SweepRow { lambda, ..Default::default() };
    let b = &base.params;
    let params = match ScaledParams::new(b.kbar, b.lattice_depth_recoil, b.interaction_g, lambda) {
        Ok(p) => p,
        Err(e) => {
            row.errors.push(e.to_string());
            return row;
        }
    };
    let ctx = match resonance::build_context(&params, base.context) {
        Ok(c) => c,
        Err(e) => {
            row.errors.push(format!("context: {e}"));
            return row;
        }
    };
    row.q = Some(ctx.q);
    row.beta = Some(ctx.beta);
    match resonance::undriven_times(ctx.nbar, ctx.q0, ctx.regime).and_then(|t0| resonance::delicate_times(&ctx, &t0)) {
        Ok(t) => row.delicate = Some(t),
        Err(e) => row.errors.push(format!("delicate: {e}")),
    }
    match resonance::robust_times(&ctx) {
        Ok(t) => row.robust = Some(t),
        Err(e) => row.errors.push(format!("robust: {e}")),
    }
    if lambda > 0.0 {
        match resonance::robust_times_harmonic(&ctx, ctx.q0, lambda) {
            Ok(t) => row.robust_harmonic = Some(t),
            Err(e) => row.errors.push(format!("robust_harmonic: {e}")),
        }
    }
    if let Some(sim) = &base.simulation {
        let analytic = if ctx.q <= resonance::DELICATE_MAX_Q { row.delicate.clone() } else { row.robust.clone() };
        match (analytic, simulate(&params, sim)) {
            (Some(a), Ok(series)) => row.report = Some(compare(&series, &a, base.peaks)),
            (None, _) => row.errors.push("simulation skipped: no analytic hints".into()),
            (_, Err(e)) => row.errors.push(format!("simulation: {e}")),
        }
    }
    row
}

/// Gaussian wavepacket run returning the autocorrelation series.
pub fn simulate(params: &ScaledParams, sim: &SimulationSpec) -> Result<AutocorrelationSeries> {
    let grid = Grid::new(sim.grid_length, sim.grid_points)?;
    let psi = quantum::init_gaussian(&grid, sim.z0, sim.p0, sim.delta_p, params.kbar)?;
    let opts = EvolveOptions {
        with_interaction: sim.with_interaction,
        snapshot_stride: usize::MAX,
        ..EvolveOptions::new(sim.tau_end, sim.steps_per_period)
    };
    let rec = quantum::evolve(&grid, &psi, params, &opts)?;
    Ok(quantum::autocorrelation(&rec))
}

/// Analytic (and optionally simulated) time scales over a λ grid. Rows are
/// computed in parallel and returned in grid order; per-point failures are
/// recorded in the row.
pub fn sweep(lambda_grid: &[f64], base: &SweepConfig) -> Vec<SweepRow> {
    lambda_grid.par_iter().map(|&l| sweep_row(l, base)).collect()
}
