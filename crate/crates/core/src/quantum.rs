//! Split-operator propagation of
//!
//! ```text
//! i k̄ ∂τ ψ = [ −(k̄²/2) ∂z² + q₀k̄² cos 2z + λ z sin τ + G k̄ ρ̃ ] ψ
//! ```
//!
//! on a periodic box, where ρ̃ is |ψ|² scaled to unit spatial average. The
//! linear drive is removed by the gauge ψ = exp(iA(τ)z/k̄)·φ with
//! A(τ) = λ(cos τ − 1), which turns the kinetic term into (k̄κ + A)²/2 and
//! keeps the problem periodic. The kinetic factor is integrated exactly over
//! each step, so the only splitting error comes from the potential.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::units::ScaledParams;

pub const DEFAULT_LENGTH: f64 = 32.0 * PI;
pub const DEFAULT_POINTS: usize = 2048;
pub const DEFAULT_SNAPSHOTS_PER_PERIOD: usize = 16;
/// Largest allowed time step.
pub const MAX_DT: f64 = TAU / 200.0;
const NORM_DRIFT_LIMIT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub length: f64,
    pub points: usize,
    pub dz: f64,
    #[serde(skip)]
    pub z: Vec<f64>,
    #[serde(skip)]
    pub k: Vec<f64>,
}

impl Grid {
    /// Periodic grid on [−L/2, L/2); L must be a multiple of π and the point
    /// count a power of two.
    pub fn new(length: f64, points: usize) -> Result<Grid> {
        if !points.is_power_of_two() || points < 8 {
            return Err(Error::InvalidInput(format!("grid points must be a power of two >= 8, got {points}")));
        }
        let periods = length / PI;
        if !(length > 0.0) || (periods - periods.round()).abs() > 1e-9 * periods.max(1.0) {
            return Err(Error::InvalidInput(format!("box length {length} is not a multiple of π")));
        }
        let dz = length / points as f64;
        let z = (0..points).map(|j| -0.5 * length + j as f64 * dz).collect();
        let n = points as i64;
        let k = (0..n).map(|j| TAU / length * if j < n / 2 { j } else { j - n } as f64).collect();
        Ok(Grid { length, points, dz, z, k })
    }

    pub fn standard() -> Grid {
        Grid::new(DEFAULT_LENGTH, DEFAULT_POINTS).expect("default grid is valid")
    }

    pub fn integrate(&self, f: impl Iterator<Item = f64>) -> f64 {
        f.sum::<f64>() * self.dz
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    pub amplitudes: Vec<Complex64>,
    pub time: f64,
    /// Current gauge offset A(τ).
    pub gauge_momentum: f64,
}

impl Wavefunction {
    pub fn norm(&self, grid: &Grid) -> f64 {
        grid.integrate(self.amplitudes.iter().map(|a| a.norm_sqr()))
    }

    pub fn normalize(&mut self, grid: &Grid) {
        let s = 1.0 / self.norm(grid).sqrt();
        self.amplitudes.iter_mut().for_each(|a| *a *= s);
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Mean and variance of position under |ψ|².
    pub fn position_moments(&self, grid: &Grid) -> (f64, f64) {
        let n = self.norm(grid);
        let mean = grid.integrate(self.amplitudes.iter().zip(&grid.z).map(|(a, z)| a.norm_sqr() * z)) / n;
        let var = grid
            .integrate(self.amplitudes.iter().zip(&grid.z).map(|(a, z)| a.norm_sqr() * (z - mean) * (z - mean)))
            / n;
        (mean, var)
    }
}

/// ∫ a* b dz.
pub fn overlap(grid: &Grid, a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>() * grid.dz
}

/// Minimum-uncertainty Gaussian with momentum width Δp and position width
/// Δz = k̄/(2Δp), centred at (z₀, p₀).
pub fn init_gaussian(grid: &Grid, z0: f64, p0: f64, delta_p: f64, kbar: f64) -> Result<Wavefunction> {
    if !(delta_p > 0.0) || !(kbar > 0.0) {
        return Err(Error::InvalidInput(format!("need delta_p > 0 and kbar > 0, got {delta_p}, {kbar}")));
    }
    let dz = kbar / (2.0 * delta_p);
    if dz > grid.length / 8.0 {
        return Err(Error::GridTooSmall(format!("Δz = {dz} exceeds L/8 = {}", grid.length / 8.0)));
    }
    if z0.abs() > 0.5 * grid.length - 4.0 * dz {
        return Err(Error::GridTooSmall(format!("packet at z0 = {z0} is too close to the box edge")));
    }
    let amplitudes = grid
        .z
        .iter()
        .map(|&z| {
            let x = z - z0;
            Complex64::from_polar((-x * x / (4.0 * dz * dz)).exp(), p0 * z / kbar)
        })
        .collect();
    let mut psi = Wavefunction { amplitudes, time: 0.0, gauge_momentum: 0.0 };
    psi.normalize(grid);
    Ok(psi)
}

#[inline]
fn unit_phase(phi: f64) -> Complex64 {
    Complex64::from_polar(1.0, phi)
}

/// A(τ) = λ(cos τ − 1).
pub fn gauge_offset(lambda: f64, tau: f64) -> f64 {
    lambda * (tau.cos() - 1.0)
}

/// Multiplies gauge-frame amplitudes by exp(iAz/k̄), giving the lab-frame
/// wavefunction.
pub fn gauge_restore(grid: &Grid, amplitudes: &[Complex64], a: f64, kbar: f64) -> Vec<Complex64> {
    if a == 0.0 {
        return amplitudes.to_vec();
    }
    amplitudes.iter().zip(&grid.z).map(|(psi, &z)| psi * Complex64::from_polar(1.0, a * z / kbar)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub tau_end: f64,
    pub dt: f64,
    /// Steps between stored density snapshots.
    pub snapshot_stride: usize,
    pub with_interaction: bool,
}

impl EvolveOptions {
    /// dt = 2π/steps_per_period and 16 snapshots per drive period.
    pub fn new(tau_end: f64, steps_per_period: usize) -> EvolveOptions {
        EvolveOptions {
            tau_end,
            dt: TAU / steps_per_period as f64,
            snapshot_stride: (steps_per_period / DEFAULT_SNAPSHOTS_PER_PERIOD).max(1),
            with_interaction: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub grid_length: f64,
    pub grid_points: usize,
    pub dt: f64,
    pub steps: usize,
    pub snapshot_stride: usize,
    pub with_interaction: bool,
    pub kbar: f64,
    pub q0: f64,
    pub lambda: f64,
    pub interaction_g: f64,
    pub final_norm_drift: f64,
    /// Sum of the per-step relative norm changes removed by renormalisation
    /// (FFT rounding only; the scheme itself is unitary).
    pub rounding_drift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionRecord {
    pub snapshot_times: Vec<f64>,
    /// Lab-frame |ψ|² per snapshot.
    pub densities: Vec<Vec<f64>>,
    pub overlap_times: Vec<f64>,
    /// ⟨ψ(0)|ψ(τ)⟩ with ψ(τ) gauge-restored, one per step including τ = 0.
    pub overlaps: Vec<Complex64>,
    pub meta: RunMeta,
    /// Final state in the gauge frame.
    pub final_state: Wavefunction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutocorrelationSeries {
    pub tau: Vec<f64>,
    pub a2: Vec<f64>,
}

impl AutocorrelationSeries {
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }
}

pub fn autocorrelation(record: &EvolutionRecord) -> AutocorrelationSeries {
    AutocorrelationSeries {
        tau: record.overlap_times.clone(),
        a2: record.overlaps.iter().map(|o| o.norm_sqr()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMap {
    pub times: Vec<f64>,
    pub z: Vec<f64>,
    /// rows: time, columns: position.
    pub rho: Vec<Vec<f64>>,
}

pub fn density_map(record: &EvolutionRecord, grid: &Grid) -> DensityMap {
    DensityMap { times: record.snapshot_times.clone(), z: grid.z.clone(), rho: record.densities.clone() }
}

/// Owns the FFT plans and the potential for repeated steps.
pub struct Propagator {
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    momentum: Vec<f64>,
    /// q₀k̄ cos 2z, the lattice potential divided by k̄.
    lattice: Vec<f64>,
    half_lattice: Vec<Complex64>,
    free: Vec<Complex64>,
    kbar: f64,
    lambda: f64,
    /// G if the mean-field term is on, else 0.
    nonlinear: f64,
    length: f64,
    dz: f64,
    dt: f64,
}

impl Propagator {
    pub fn new(grid: &Grid, params: &ScaledParams, dt: f64, with_interaction: bool) -> Result<Propagator> {
        if !(dt > 0.0) || dt > MAX_DT * (1.0 + 1e-12) {
            return Err(Error::InvalidInput(format!("dt = {dt} must lie in (0, 2π/200]")));
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(grid.points);
        let ifft = planner.plan_fft_inverse(grid.points);
        let scratch_len = fft.get_inplace_scratch_len().max(ifft.get_inplace_scratch_len());
        let kbar = params.kbar;
        let momentum: Vec<f64> = grid.k.iter().map(|k| kbar * k).collect();
        let lattice: Vec<f64> = grid.z.iter().map(|z| params.q0 * kbar * (2.0 * z).cos()).collect();
        Ok(Propagator {
            fft,
            ifft,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            half_lattice: lattice.iter().map(|v| unit_phase(-0.5 * v * dt)).collect(),
            free: momentum.iter().map(|p| unit_phase(-0.5 * p * p * dt / kbar)).collect(),
            momentum,
            lattice,
            kbar,
            lambda: params.lambda,
            nonlinear: if with_interaction { params.interaction_g } else { 0.0 },
            length: grid.length,
            dz: grid.dz,
            dt,
        })
    }

    /// Largest potential phase rate max|V|/k̄ for the given state.
    pub fn max_potential_rate(&self, psi: &[Complex64]) -> f64 {
        let lat = self.lattice.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if self.nonlinear == 0.0 {
            return lat;
        }
        let (peak, norm) = psi.iter().fold((0.0f64, 0.0), |(p, n), a| (p.max(a.norm_sqr()), n + a.norm_sqr()));
        lat + self.nonlinear.abs() * peak * self.length / (norm * self.dz)
    }

    fn half_potential(&self, psi: &mut [Complex64]) {
        let h = 0.5 * self.dt;
        if self.nonlinear == 0.0 {
            for (a, f) in psi.iter_mut().zip(&self.half_lattice) {
                *a *= f;
            }
        } else {
            // Unit-average density: |ψ|²·L/∫|ψ|².
            let norm: f64 = psi.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.dz;
            let scale = self.nonlinear * self.length / norm;
            for (a, v) in psi.iter_mut().zip(&self.lattice) {
                let phase = -(v + scale * a.norm_sqr()) * h;
                *a *= unit_phase(phase);
            }
        }
    }

    /// Exact kinetic propagation from τ₀ to τ₀ + dt in the gauge frame.
    fn kinetic(&mut self, psi: &mut [Complex64], tau0: f64) {
        let dt = self.dt;
        let tau1 = tau0 + dt;
        let l = self.lambda;
        let ds = tau1.sin() - tau0.sin();
        let i1 = l * (ds - dt);
        let i2 = l * l * (1.5 * dt + 0.25 * ((2.0 * tau1).sin() - (2.0 * tau0).sin()) - 2.0 * ds);
        let inv_n = 1.0 / psi.len() as f64;
        let c = -0.5 / self.kbar;
        self.fft.process_with_scratch(psi, &mut self.scratch);
        if l == 0.0 {
            for (a, f) in psi.iter_mut().zip(&self.free) {
                *a *= f * inv_n;
            }
        } else {
            for ((a, f), &p) in psi.iter_mut().zip(&self.free).zip(&self.momentum) {
                *a *= f * unit_phase(c * (2.0 * p * i1 + i2)) * inv_n;
            }
        }
        self.ifft.process_with_scratch(psi, &mut self.scratch);
    }

    /// One Strang step from τ₀.
    pub fn step(&mut self, psi: &mut [Complex64], tau0: f64) {
        self.half_potential(psi);
        self.kinetic(psi, tau0);
        self.half_potential(psi);
    }
}

/// Propagates `psi` (lab frame at τ = psi.time, which must be a multiple of
/// 2π or zero so that the gauge offset vanishes) to `tau_end`.
pub fn evolve(grid: &Grid, psi: &Wavefunction, params: &ScaledParams, opts: &EvolveOptions) -> Result<EvolutionRecord> {
    if grid.points != psi.amplitudes.len() {
        return Err(Error::InvalidInput("wavefunction does not match grid".into()));
    }
    if opts.snapshot_stride == 0 {
        return Err(Error::InvalidInput("snapshot stride must be >= 1".into()));
    }
    let mut prop = Propagator::new(grid, params, opts.dt, opts.with_interaction)?;
    let rate = prop.max_potential_rate(&psi.amplitudes);
    if opts.dt * rate > PI {
        return Err(Error::StepTooLarge(format!("dt·max|V|/k̄ = {} > π", opts.dt * rate)));
    }
    let span = opts.tau_end - psi.time;
    if !(span >= 0.0) {
        return Err(Error::InvalidInput(format!("tau_end {} before start {}", opts.tau_end, psi.time)));
    }
    let steps = (span / opts.dt - 1e-9).ceil().max(0.0) as usize;
    let kbar = params.kbar;
    let lambda = params.lambda;
    let tau_start = psi.time;

    let reference = gauge_restore(grid, &psi.amplitudes, gauge_offset(lambda, tau_start), kbar);
    let mut amps = psi.amplitudes.clone();
    let n0 = psi.norm(grid);

    let mut overlap_times = Vec::with_capacity(steps + 1);
    let mut overlaps = Vec::with_capacity(steps + 1);
    let mut snapshot_times = Vec::new();
    let mut densities = Vec::new();
    overlap_times.push(tau_start);
    overlaps.push(overlap(grid, &reference, &reference));
    snapshot_times.push(tau_start);
    densities.push(amps.iter().map(|a| a.norm_sqr()).collect());

    let mut lab = vec![Complex64::new(0.0, 0.0); grid.points];
    let mut rounding_drift = 0.0f64;
    for s in 0..steps {
        let tau0 = tau_start + s as f64 * opts.dt;
        prop.step(&mut amps, tau0);
        let norm = grid.integrate(amps.iter().map(|a| a.norm_sqr()));
        rounding_drift += norm / n0 - 1.0;
        if !norm.is_finite() || rounding_drift.abs() > NORM_DRIFT_LIMIT {
            return Err(Error::Numerical(format!("norm drift {rounding_drift:e} at step {}", s + 1)));
        }
        let fix = (n0 / norm).sqrt();
        amps.iter_mut().for_each(|a| *a *= fix);
        let tau = tau_start + (s + 1) as f64 * opts.dt;
        let a = gauge_offset(lambda, tau);
        let mut acc = Complex64::new(0.0, 0.0);
        for ((l, psi), (r, &z)) in lab.iter_mut().zip(&amps).zip(reference.iter().zip(&grid.z)) {
            *l = psi * Complex64::from_polar(1.0, a * z / kbar);
            acc += r.conj() * *l;
        }
        overlap_times.push(tau);
        overlaps.push(acc * grid.dz);
        if (s + 1) % opts.snapshot_stride == 0 || s + 1 == steps {
            snapshot_times.push(tau);
            densities.push(lab.iter().map(|a| a.norm_sqr()).collect());
        }
    }
    let tau_final = tau_start + steps as f64 * opts.dt;
    let final_state =
        Wavefunction { amplitudes: amps, time: tau_final, gauge_momentum: gauge_offset(lambda, tau_final) };
    let drift = final_state.norm(grid) - n0;
    Ok(EvolutionRecord {
        snapshot_times,
        densities,
        overlap_times,
        overlaps,
        meta: RunMeta {
            grid_length: grid.length,
            grid_points: grid.points,
            dt: opts.dt,
            steps,
            snapshot_stride: opts.snapshot_stride,
            with_interaction: opts.with_interaction,
            kbar,
            q0: params.q0,
            lambda,
            interaction_g: params.interaction_g,
            final_norm_drift: drift,
            rounding_drift,
        },
        final_state,
    })
}

/// Imaginary-time relaxation towards the lowest state of the undriven
/// Hamiltonian. Returns the state and its energy per k̄ (the eigen-phase rate
/// in τ), which equals k̄·a₀(q₀)/2 for the linear problem.
pub fn relax_ground_state(
    grid: &Grid,
    params: &ScaledParams,
    start: &Wavefunction,
    dt: f64,
    max_steps: usize,
    tol: f64,
) -> Result<(Wavefunction, f64)> {
    let kbar = params.kbar;
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(grid.points);
    let ifft = planner.plan_fft_inverse(grid.points);
    let inv_n = 1.0 / grid.points as f64;
    let half_v: Vec<f64> = grid.z.iter().map(|z| (-(params.q0 * kbar * (2.0 * z).cos()) * 0.5 * dt).exp()).collect();
    let kin: Vec<f64> = grid.k.iter().map(|k| (-0.5 * kbar * k * k * dt).exp() * inv_n).collect();
    let mut psi = start.amplitudes.clone();
    let mut last = f64::INFINITY;
    for _ in 0..max_steps {
        for (a, v) in psi.iter_mut().zip(&half_v) {
            *a *= *v;
        }
        fft.process(&mut psi);
        for (a, k) in psi.iter_mut().zip(&kin) {
            *a *= *k;
        }
        ifft.process(&mut psi);
        for (a, v) in psi.iter_mut().zip(&half_v) {
            *a *= *v;
        }
        let mut w = Wavefunction { amplitudes: psi, time: 0.0, gauge_momentum: 0.0 };
        w.normalize(grid);
        psi = w.amplitudes;
        let e = energy_rate(grid, params, &psi, &*fft, &*ifft);
        if (e - last).abs() < tol {
            return Ok((Wavefunction { amplitudes: psi, time: 0.0, gauge_momentum: 0.0 }, e));
        }
        last = e;
    }
    Err(Error::Numerical(format!("ground-state relaxation did not converge in {max_steps} steps")))
}

/// ⟨H⟩/k̄ for the undriven linear Hamiltonian.
fn energy_rate(grid: &Grid, params: &ScaledParams, psi: &[Complex64], fft: &dyn Fft<f64>, ifft: &dyn Fft<f64>) -> f64 {
    let kbar = params.kbar;
    let mut d = psi.to_vec();
    fft.process(&mut d);
    for (a, k) in d.iter_mut().zip(&grid.k) {
        *a *= 0.5 * kbar * k * k / grid.points as f64;
    }
    ifft.process(&mut d);
    let kinetic: f64 = psi.iter().zip(&d).map(|(a, b)| (a.conj() * b).re).sum::<f64>() * grid.dz;
    let potential =
        grid.integrate(psi.iter().zip(&grid.z).map(|(a, z)| a.norm_sqr() * params.q0 * kbar * (2.0 * z).cos()));
    kinetic + potential
}
