//! Classical driven pendulum H = p²/2 + (κ/2)cos 2z + λ z sin τ.
//!
//! Equations of motion ż = p, ṗ = κ sin 2z − λ sin τ. Potential minima sit
//! at z = π/2 mod π and maxima at z = 0 mod π.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Error, Result};

pub const DEFAULT_STEPS_PER_PERIOD: usize = 1000;
const MAX_FREQUENCY_STEPS: usize = 50_000_000;
const MIN_CROSSINGS: usize = 51;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalParams {
    pub kappa: f64,
    pub lambda: f64,
    pub dt: f64,
}

impl ClassicalParams {
    pub fn new(kappa: f64, lambda: f64) -> Self {
        ClassicalParams { kappa, lambda, dt: TAU / DEFAULT_STEPS_PER_PERIOD as f64 }
    }

    pub fn with_steps_per_period(mut self, steps: usize) -> Self {
        self.dt = TAU / steps as f64;
        self
    }

    /// Number of steps per drive period; fails unless dt divides 2π.
    pub fn steps_per_period(&self) -> Result<usize> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidInput(format!("dt must be positive, got {}", self.dt)));
        }
        if !self.kappa.is_finite() || !self.lambda.is_finite() {
            return Err(Error::InvalidInput("kappa and lambda must be finite".into()));
        }
        let n = (TAU / self.dt).round();
        if n < 1.0 || ((n * self.dt) / TAU - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("dt = {} does not divide 2π", self.dt)));
        }
        Ok(n as usize)
    }

    pub fn force(&self, z: f64, tau: f64) -> f64 {
        self.kappa * (2.0 * z).sin() - self.lambda * tau.sin()
    }

    pub fn hamiltonian(&self, s: PhasePoint, tau: f64) -> f64 {
        0.5 * s.p * s.p + 0.5 * self.kappa * (2.0 * s.z).cos() + self.lambda * s.z * tau.sin()
    }

    /// Energy of the undriven pendulum.
    pub fn energy(&self, s: PhasePoint) -> f64 {
        0.5 * s.p * s.p + 0.5 * self.kappa * (2.0 * s.z).cos()
    }

    /// Modified energy conserved by the undriven kick-drift-kick map up to
    /// O(dt⁴): H − dt²V′²/24 + dt²p²V″/12.
    pub fn shadow_energy(&self, s: PhasePoint) -> f64 {
        let h2 = self.dt * self.dt;
        let f = self.kappa * (2.0 * s.z).sin();
        let vpp = -2.0 * self.kappa * (2.0 * s.z).cos();
        self.energy(s) + h2 * (-f * f / 24.0 + s.p * s.p * vpp / 12.0)
    }

    pub fn separatrix_energy(&self) -> f64 {
        0.5 * self.kappa
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub z: f64,
    pub p: f64,
}

impl PhasePoint {
    pub fn new(z: f64, p: f64) -> Self {
        PhasePoint { z, p }
    }
}

/// Folds z mod π into [−π/2, π/2).
pub fn fold_z(z: f64) -> f64 {
    let f = (z + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2;
    if f >= FRAC_PI_2 {
        -FRAC_PI_2
    } else {
        f
    }
}

/// Nearest potential minimum to z.
pub fn well_center(z: f64) -> f64 {
    FRAC_PI_2 + PI * ((z - FRAC_PI_2) / PI).round()
}

/// One kick-drift-kick step from τ to τ + h (h may be negative). Both kicks
/// use the force at the midpoint time.
#[inline]
pub fn step(params: &ClassicalParams, s: PhasePoint, tau: f64, h: f64) -> PhasePoint {
    step_at_midpoint(params, s, tau + 0.5 * h, h)
}

/// Kick-drift-kick step with the drive phase given at the step midpoint.
#[inline]
pub fn step_at_midpoint(params: &ClassicalParams, s: PhasePoint, tm: f64, h: f64) -> PhasePoint {
    let drive = params.lambda * tm.sin();
    let mut p = s.p + 0.5 * h * (params.kappa * (2.0 * s.z).sin() - drive);
    let z = s.z + h * p;
    p += 0.5 * h * (params.kappa * (2.0 * z).sin() - drive);
    PhasePoint { z, p }
}

/// Advances `n_steps` steps starting at drive phase `tau0`, calling `visit`
/// after every step with (step index, τ, state).
pub fn propagate_with<F: FnMut(usize, f64, PhasePoint)>(
    params: &ClassicalParams,
    start: PhasePoint,
    tau0: f64,
    n_steps: usize,
    h: f64,
    mut visit: F,
) -> PhasePoint {
    let mut s = start;
    for k in 0..n_steps {
        let tau = tau0 + k as f64 * h;
        s = step(params, s, tau, h);
        visit(k + 1, tau0 + (k + 1) as f64 * h, s);
    }
    s
}

pub fn propagate(params: &ClassicalParams, start: PhasePoint, tau0: f64, n_steps: usize, h: f64) -> PhasePoint {
    propagate_with(params, start, tau0, n_steps, h, |_, _, _| {})
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub tau: Vec<f64>,
    pub z: Vec<f64>,
    pub p: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn point(&self, i: usize) -> PhasePoint {
        PhasePoint::new(self.z[i], self.p[i])
    }
}

/// Full trajectory over `n_periods` drive periods, one entry per step
/// (including τ = 0). z is not folded.
pub fn integrate(initial: PhasePoint, params: &ClassicalParams, n_periods: usize) -> Result<Trajectory> {
    let spp = params.steps_per_period()?;
    let n = spp * n_periods;
    let mut t =
        Trajectory { tau: Vec::with_capacity(n + 1), z: Vec::with_capacity(n + 1), p: Vec::with_capacity(n + 1) };
    t.tau.push(0.0);
    t.z.push(initial.z);
    t.p.push(initial.p);
    let mut s = initial;
    for m in 0..n_periods {
        for k in 0..spp {
            let tau = m as f64 * TAU + k as f64 * params.dt;
            s = step(params, s, tau, params.dt);
            t.tau.push(m as f64 * TAU + (k + 1) as f64 * params.dt);
            t.z.push(s.z);
            t.p.push(s.p);
        }
    }
    Ok(t)
}

/// Stroboscopic map over one drive period starting at τ = 0.
pub fn stroboscopic_map(params: &ClassicalParams, s: PhasePoint) -> Result<PhasePoint> {
    let spp = params.steps_per_period()?;
    Ok(propagate(params, s, 0.0, spp, params.dt))
}

/// Unfolded stroboscopic samples at τ = 2πm, m = 1..=n_periods.
fn strobe(params: &ClassicalParams, spp: usize, seed: PhasePoint, n_periods: usize) -> Vec<PhasePoint> {
    let mut out = Vec::with_capacity(n_periods);
    let mut s = seed;
    for _ in 0..n_periods {
        // τ restarts at 0 each period, so sampling phases stay exact.
        s = propagate(params, s, 0.0, spp, params.dt);
        out.push(s);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareSample {
    pub seed_id: usize,
    pub period_index: usize,
    pub z: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareSection {
    pub samples: Vec<PoincareSample>,
    pub n_seeds: usize,
    pub n_periods: usize,
    pub period: f64,
}

impl PoincareSection {
    pub fn for_seed(&self, seed_id: usize) -> &[PoincareSample] {
        let a = seed_id * self.n_periods;
        &self.samples[a..a + self.n_periods]
    }
}

/// Stroboscopic section of every seed, z folded into [−π/2, π/2). Seeds run
/// in parallel; samples are ordered by seed and then by period.
pub fn poincare(seeds: &[PhasePoint], params: &ClassicalParams, n_periods: usize) -> Result<PoincareSection> {
    let spp = params.steps_per_period()?;
    let per_seed: Vec<Vec<PhasePoint>> = seeds.par_iter().map(|&s| strobe(params, spp, s, n_periods)).collect();
    let samples = per_seed
        .into_iter()
        .enumerate()
        .flat_map(|(id, pts)| {
            pts.into_iter().enumerate().map(move |(m, s)| PoincareSample {
                seed_id: id,
                period_index: m + 1,
                z: fold_z(s.z),
                p: s.p,
            })
        })
        .collect();
    Ok(PoincareSection { samples, n_seeds: seeds.len(), n_periods, period: TAU })
}

/// Seeds on the line p = 0 from the well bottom z = π/2 towards the barrier
/// at z = π, excluding both ends.
pub fn seed_line(n: usize) -> Vec<PhasePoint> {
    (1..=n).map(|i| PhasePoint::new(FRAC_PI_2 + FRAC_PI_2 * i as f64 / (n + 1) as f64, 0.0)).collect()
}

/// Rectangular seed grid over [z0, z1] × [p0, p1] (row-major in p).
pub fn seed_grid(nz: usize, np: usize, z_range: (f64, f64), p_range: (f64, f64)) -> Vec<PhasePoint> {
    let lin = |n: usize, (a, b): (f64, f64), i: usize| {
        if n == 1 {
            0.5 * (a + b)
        } else {
            a + (b - a) * i as f64 / (n - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(nz * np);
    for j in 0..np {
        for i in 0..nz {
            out.push(PhasePoint::new(lin(nz, z_range, i), lin(np, p_range, j)));
        }
    }
    out
}

/// Whether the seed stays inside its initial well (|z − centre| < π/2) for
/// every step of `n_periods` periods.
pub fn is_librating(params: &ClassicalParams, seed: PhasePoint, n_periods: usize) -> Result<bool> {
    let spp = params.steps_per_period()?;
    let c = well_center(seed.z);
    let mut s = seed;
    for _ in 0..n_periods {
        for k in 0..spp {
            s = step(params, s, k as f64 * params.dt, params.dt);
            if (s.z - c).abs() >= FRAC_PI_2 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Fraction of seeds in bounded libration; the island-size diagnostic.
pub fn libration_fraction(seeds: &[PhasePoint], params: &ClassicalParams, n_periods: usize) -> Result<f64> {
    params.steps_per_period()?;
    if seeds.is_empty() {
        return Err(Error::InvalidInput("no seeds".into()));
    }
    let bounded = seeds
        .par_iter()
        .map(|&s| is_librating(params, s, n_periods))
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&b| b)
        .count();
    Ok(bounded as f64 / seeds.len() as f64)
}

/// Finite-time growth rate (1/τ)·ln(d/d₀) of the phase-space distance between
/// a seed and a neighbour displaced by `delta` in z.
pub fn finite_time_divergence(params: &ClassicalParams, seed: PhasePoint, delta: f64, n_periods: usize) -> Result<f64> {
    let spp = params.steps_per_period()?;
    let mut a = seed;
    let mut b = PhasePoint::new(seed.z + delta, seed.p);
    for _ in 0..n_periods {
        a = propagate(params, a, 0.0, spp, params.dt);
        b = propagate(params, b, 0.0, spp, params.dt);
    }
    let d = (a.z - b.z).hypot(a.p - b.p);
    Ok((d / delta).ln() / (n_periods as f64 * TAU))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub z: f64,
    pub p: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Trace of the one-period Jacobian; |trace| < 2 means elliptic.
    pub trace: f64,
}

impl FixedPoint {
    pub fn is_elliptic(&self) -> bool {
        self.trace.abs() < 2.0
    }
}

fn map_jacobian(params: &ClassicalParams, s: PhasePoint) -> Result<[[f64; 2]; 2]> {
    let e = 1e-6;
    let zp = stroboscopic_map(params, PhasePoint::new(s.z + e, s.p))?;
    let zm = stroboscopic_map(params, PhasePoint::new(s.z - e, s.p))?;
    let pp = stroboscopic_map(params, PhasePoint::new(s.z, s.p + e))?;
    let pm = stroboscopic_map(params, PhasePoint::new(s.z, s.p - e))?;
    Ok([[(zp.z - zm.z) / (2.0 * e), (pp.z - pm.z) / (2.0 * e)], [(zp.p - zm.p) / (2.0 * e), (pp.p - pm.p) / (2.0 * e)]])
}

/// Newton iteration for a period-1 fixed point of the stroboscopic map.
pub fn find_fixed_point(params: &ClassicalParams, guess: PhasePoint, tol: f64, max_iter: usize) -> Result<FixedPoint> {
    let mut s = guess;
    for it in 0..max_iter {
        let m = stroboscopic_map(params, s)?;
        let (fz, fp) = (m.z - s.z, m.p - s.p);
        let residual = fz.hypot(fp);
        let j = map_jacobian(params, s)?;
        if residual < tol {
            return Ok(FixedPoint { z: s.z, p: s.p, residual, iterations: it, trace: j[0][0] + j[1][1] });
        }
        // Solve (J − I) δ = −F.
        let (a, b, c, d) = (j[0][0] - 1.0, j[0][1], j[1][0], j[1][1] - 1.0);
        let det = a * d - b * c;
        if det.abs() < 1e-14 {
            return Err(Error::Numerical(format!("singular Newton step at ({}, {})", s.z, s.p)));
        }
        let dz = (-fz * d + fp * b) / det;
        let dp = (-fp * a + fz * c) / det;
        // Damp steps larger than a quarter well.
        let scale = (0.4 / dz.hypot(dp)).min(1.0);
        s = PhasePoint::new(s.z + scale * dz, s.p + scale * dp);
        if !s.z.is_finite() || !s.p.is_finite() {
            return Err(Error::Numerical("Newton iteration diverged".into()));
        }
    }
    Err(Error::Numerical(format!("fixed-point search did not converge in {max_iter} iterations")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitFrequency {
    pub omega: f64,
    pub relative_jitter: f64,
    pub periods: usize,
}

/// Libration frequency of an undriven orbit from the mean interval between
/// upward crossings of the well centre.
pub fn orbit_frequency(initial: PhasePoint, params: &ClassicalParams) -> Result<OrbitFrequency> {
    if params.lambda != 0.0 {
        return Err(Error::InvalidInput("orbit_frequency needs lambda = 0".into()));
    }
    params.steps_per_period()?;
    let energy = params.energy(initial);
    let separatrix = params.separatrix_energy();
    if !(params.kappa > 0.0) || energy >= separatrix * (1.0 - 1e-12) {
        return Err(Error::NotLibrating { energy, separatrix });
    }
    let c = well_center(initial.z);
    let h = params.dt;
    let mut crossings: Vec<f64> = Vec::with_capacity(MIN_CROSSINGS);
    let mut s = initial;
    let mut k = 0usize;
    while crossings.len() < MIN_CROSSINGS {
        if k >= MAX_FREQUENCY_STEPS {
            return Err(Error::Numerical(format!("fewer than {MIN_CROSSINGS} crossings in {k} steps")));
        }
        let next = step(params, s, 0.0, h);
        let (a, b) = (s.z - c, next.z - c);
        if a < 0.0 && b >= 0.0 {
            crossings.push((k as f64 + a / (a - b)) * h);
        }
        s = next;
        k += 1;
    }
    let intervals: Vec<f64> = crossings.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = (crossings[crossings.len() - 1] - crossings[0]) / intervals.len() as f64;
    let var = intervals.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / intervals.len() as f64;
    Ok(OrbitFrequency { omega: TAU / mean, relative_jitter: var.sqrt() / mean, periods: intervals.len() })
}

/// Frequency of the undriven orbit released from rest at `amplitude` from
/// the well bottom.
pub fn libration_frequency(kappa: f64, amplitude: f64, dt: f64) -> Result<f64> {
    let params = ClassicalParams { kappa, lambda: 0.0, dt };
    Ok(orbit_frequency(PhasePoint::new(FRAC_PI_2 + amplitude, 0.0), &params)?.omega)
}

/// Amplitude and energy of the undriven orbit whose frequency equals
/// `target`, by bisection until the energy bracket is below `energy_tol`.
pub fn resonant_orbit(kappa: f64, target: f64, dt: f64, energy_tol: f64) -> Result<(f64, f64)> {
    let small = libration_frequency(kappa, 1e-3, dt)?;
    if target >= small {
        return Err(Error::InvalidInput(format!("target frequency {target} above small-amplitude limit {small}")));
    }
    let energy = |a: f64| -0.5 * kappa * (2.0 * a).cos();
    let (mut lo, mut hi) = (1e-3, FRAC_PI_2 * (1.0 - 1e-9));
    while energy(hi) - energy(lo) > energy_tol {
        let mid = 0.5 * (lo + hi);
        if libration_frequency(kappa, mid, dt)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    Ok((a, energy(a)))
}

/// Distinct period-1 fixed points reached by Newton from an n × n grid of
/// guesses covering one well, z folded into [−π/2, π/2).
pub fn period_one_fixed_points(params: &ClassicalParams, n: usize) -> Result<Vec<FixedPoint>> {
    let pmax = 1.1 * (2.0 * params.kappa.max(0.0)).sqrt() + params.lambda.abs();
    let guesses = seed_grid(n, n, (0.05, PI - 0.05), (-pmax, pmax));
    let found: Vec<FixedPoint> =
        guesses.par_iter().filter_map(|&g| find_fixed_point(params, g, 1e-10, 40).ok()).collect();
    let mut out: Vec<FixedPoint> = Vec::new();
    for mut fp in found {
        fp.z = fold_z(fp.z);
        if !out.iter().any(|o| (o.z - fp.z).abs() < 1e-6 && (o.p - fp.p).abs() < 1e-6) {
            out.push(fp);
        }
    }
    Ok(out)
}

/// Elliptic period-1 fixed point at the centre of the 1:1 island. Newton
/// starts from the linear forced response at the well bottom and falls back
/// to a grid search.
pub fn resonance_fixed_point(params: &ClassicalParams) -> Result<FixedPoint> {
    let w2 = 2.0 * params.kappa - 1.0;
    if w2 != 0.0 {
        let guess = PhasePoint::new(FRAC_PI_2, -params.lambda / w2);
        if let Ok(fp) = find_fixed_point(params, guess, 1e-10, 40) {
            if fp.is_elliptic() {
                return Ok(fp);
            }
        }
    }
    period_one_fixed_points(params, 12)?
        .into_iter()
        .find(FixedPoint::is_elliptic)
        .ok_or_else(|| Error::Numerical("no elliptic period-1 fixed point found".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn fold_interval() {
        assert_eq!(fold_z(0.0), 0.0);
        assert_relative_eq!(fold_z(PI + 0.3), 0.3, epsilon = 1e-15);
        assert_relative_eq!(fold_z(FRAC_PI_2), -FRAC_PI_2);
        assert_relative_eq!(fold_z(-FRAC_PI_2), -FRAC_PI_2);
        assert_relative_eq!(fold_z(-7.0), -7.0 + 2.0 * PI, epsilon = 1e-14);
    }

    #[test]
    fn dt_must_divide_period() {
        assert_eq!(ClassicalParams::new(2.0, 0.0).steps_per_period().unwrap(), 1000);
        let bad = ClassicalParams { dt: 0.01, ..ClassicalParams::new(2.0, 0.0) };
        assert!(bad.steps_per_period().is_err());
        let neg = ClassicalParams { dt: -0.1, ..ClassicalParams::new(2.0, 0.0) };
        assert!(neg.steps_per_period().is_err());
    }

    #[test]
    fn equilibrium_stays_put() {
        let params = ClassicalParams::new(2.0, 0.0);
        let mut s = PhasePoint::new(FRAC_PI_2, 0.0);
        for _ in 0..10 {
            let n = stroboscopic_map(&params, s).unwrap();
            assert!((n.z - s.z).abs() + (n.p - s.p).abs() < 1e-12);
            s = n;
        }
    }

    #[test]
    fn shadow_energy_conserved_over_many_steps() {
        let params = ClassicalParams::new(2.0, 0.0);
        let s0 = PhasePoint::new(1.0, 0.8);
        let e0 = params.shadow_energy(s0);
        let mut worst = 0.0f64;
        propagate_with(&params, s0, 0.0, 10_000, params.dt, |_, _, s| {
            worst = worst.max((params.shadow_energy(s) - e0).abs());
        });
        assert!(worst / e0.abs().max(1.0) < 1e-8, "{worst}");
    }

    #[test]
    fn shadow_energy_has_no_secular_drift() {
        let params = ClassicalParams::new(2.0, 0.0);
        let s0 = PhasePoint::new(2.3, 0.4);
        let sec = poincare(&[s0], &params, 10_000).unwrap();
        let e0 = params.shadow_energy(s0);
        let last = sec.samples.last().unwrap();
        let e1 = params.shadow_energy(PhasePoint::new(last.z, last.p));
        assert!((e1 - e0).abs() / e0.abs().max(1.0) < 1e-8);
    }

    #[test]
    fn poincare_shape_and_ordering() {
        let params = ClassicalParams::new(2.0, 0.5).with_steps_per_period(200);
        let seeds = seed_line(5);
        let sec = poincare(&seeds, &params, 7).unwrap();
        assert_eq!(sec.samples.len(), 35);
        for (i, s) in sec.samples.iter().enumerate() {
            assert_eq!(s.seed_id, i / 7);
            assert_eq!(s.period_index, i % 7 + 1);
            assert!((-FRAC_PI_2..FRAC_PI_2).contains(&s.z));
        }
        let serial: Vec<_> = seeds.iter().map(|&s| stroboscopic_map(&params, s).unwrap()).collect();
        for (id, s) in serial.iter().enumerate() {
            assert_eq!(sec.for_seed(id)[0].p, s.p);
        }
    }

    #[test]
    fn undriven_sections_lie_on_energy_contours() {
        let params = ClassicalParams::new(2.0, 0.0);
        let seeds = seed_grid(3, 3, (0.3, 2.8), (-1.0, 1.0));
        let sec = poincare(&seeds, &params, 50).unwrap();
        for (id, seed) in seeds.iter().enumerate() {
            let e0 = params.shadow_energy(*seed);
            for s in sec.for_seed(id) {
                assert!((params.shadow_energy(PhasePoint::new(s.z, s.p)) - e0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn small_amplitude_frequency() {
        let params = ClassicalParams::new(2.0, 0.0);
        let f = orbit_frequency(PhasePoint::new(FRAC_PI_2 + 0.01, 0.0), &params).unwrap();
        assert!((f.omega / 2.0 - 1.0).abs() < 0.01, "{}", f.omega);
        assert!(f.relative_jitter < 1e-4);
        assert!(f.periods >= 50);
    }

    #[test]
    fn frequency_slows_towards_separatrix() {
        let a = libration_frequency(2.0, 1.0, TAU / 1000.0).unwrap();
        let b = libration_frequency(2.0, 1.5, TAU / 1000.0).unwrap();
        let c = libration_frequency(2.0, 1.57, TAU / 1000.0).unwrap();
        assert!(a > b && b > c);
        assert!(c < 0.6);
    }

    #[test]
    fn rotating_orbit_rejected() {
        let params = ClassicalParams::new(2.0, 0.0);
        let err = orbit_frequency(PhasePoint::new(0.0, 0.1), &params).unwrap_err();
        assert!(matches!(err, Error::NotLibrating { .. }));
        assert!(orbit_frequency(PhasePoint::new(1.0, 0.0), &ClassicalParams::new(2.0, 0.1)).is_err());
    }

    #[test]
    fn unit_frequency_orbit_found_by_bisection() {
        let dt = TAU / 1000.0;
        let (amp, e) = resonant_orbit(2.0, 1.0, dt, 1e-6).unwrap();
        assert!(e > -1.0 && e < 1.0);
        let w = libration_frequency(2.0, amp, dt).unwrap();
        assert!((w - 1.0).abs() < 1e-4, "{w}");
    }

    #[test]
    fn resonance_fixed_point_exists() {
        let params = ClassicalParams::new(2.0, 0.5);
        let fp = resonance_fixed_point(&params).unwrap();
        assert!(fp.residual < 1e-6);
        assert!(fp.is_elliptic());
        let m = stroboscopic_map(&params, PhasePoint::new(fp.z, fp.p)).unwrap();
        assert!((m.z - fp.z).hypot(m.p - fp.p) < 1e-6);
    }

    #[test]
    fn island_shrinks_with_drive() {
        let seeds = seed_line(20);
        let weak = libration_fraction(&seeds, &ClassicalParams::new(2.0, 0.5), 500).unwrap();
        let strong = libration_fraction(&seeds, &ClassicalParams::new(2.0, 1.5), 500).unwrap();
        assert!(strong < weak, "{strong} vs {weak}");
        let none = libration_fraction(&seeds, &ClassicalParams::new(2.0, 0.0), 50).unwrap();
        assert_eq!(none, 1.0);
    }

    #[test]
    fn separatrix_seed_diverges() {
        let params = ClassicalParams::new(2.0, 0.5);
        let rate = finite_time_divergence(&params, PhasePoint::new(PI - 0.05, 0.0), 1e-8, 100).unwrap();
        assert!(rate > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn reversible(z in -3.0f64..3.0, p in -2.0f64..2.0, lambda in 0.0f64..2.0, n in 1usize..=1000) {
            let params = ClassicalParams::new(2.0, lambda);
            let h = params.dt;
            let mid = |k: usize| k as f64 * h + 0.5 * h;
            let mut s = PhasePoint::new(z, p);
            for k in 0..n {
                s = step_at_midpoint(&params, s, mid(k), h);
            }
            for k in (0..n).rev() {
                s = step_at_midpoint(&params, s, mid(k), -h);
            }
            prop_assert!((s.z - z).abs() < 1e-10 && (s.p - p).abs() < 1e-10);
        }

        #[test]
        fn folding_keeps_momentum_and_dynamics(z in -10.0f64..10.0, p in -2.0f64..2.0, m in -3i32..3) {
            let params = ClassicalParams::new(2.0, 0.7).with_steps_per_period(100);
            let a = stroboscopic_map(&params, PhasePoint::new(z, p)).unwrap();
            let b = stroboscopic_map(&params, PhasePoint::new(z + m as f64 * PI, p)).unwrap();
            prop_assert!((fold_z(a.z) - fold_z(b.z)).abs() < 1e-9 || (fold_z(a.z) - fold_z(b.z)).abs() > PI - 1e-9);
            prop_assert!((a.p - b.p).abs() < 1e-9);
            let f = fold_z(z);
            prop_assert!((-FRAC_PI_2..FRAC_PI_2).contains(&f));
        }
    }
}
