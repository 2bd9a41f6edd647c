//! Mathieu characteristic values of real order and the band structure of the
//! lattice potential `2q cos 2z`.
//!
//! For `y'' + (a − 2q cos 2z) y = 0` a solution `e^{iνz}P(z)` with `P`
//! π-periodic exists when `a` is an eigenvalue of the operator that is
//! tridiagonal in the basis `e^{i(κ+2m)z}`: diagonal `(κ+2m)²`, off-diagonals
//! `q`. Here κ is the order folded into `[0, 1]` (the Bloch quasimomentum in
//! units of `k_L`). At fixed κ the eigenvalues never cross, so the band with
//! index `⌊ν⌋` is exactly the `⌊ν⌋`-th eigenvalue in ascending order; that is
//! how branches are selected. Eigenvalues are located by Sturm-sequence
//! bisection.

use std::collections::HashMap;
use std::sync::RwLock;

use crate::error::{Error, Result};
use crate::quadrature;

pub const DEFAULT_TRUNCATION: usize = 64;
pub const MAX_TRUNCATION: usize = 1024;
pub const MIN_TRUNCATION: usize = 8;
/// Accepted change when the truncation is doubled, relative to `max(1, |a|)`.
pub const CONVERGENCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MathieuQuery {
    pub order_nu: f64,
    pub q: f64,
    /// Half-size M of the basis `m ∈ [−M, M]`.
    pub truncation: usize,
}

impl MathieuQuery {
    pub fn new(order_nu: f64, q: f64) -> Self {
        MathieuQuery { order_nu, q, truncation: DEFAULT_TRUNCATION }
    }

    fn validate(&self) -> Result<()> {
        if !self.order_nu.is_finite() {
            return Err(Error::InvalidInput(format!("order must be finite, got {}", self.order_nu)));
        }
        if !(self.q.is_finite() && self.q >= 0.0) {
            return Err(Error::InvalidInput(format!("q must be non-negative, got {}", self.q)));
        }
        if self.truncation < MIN_TRUNCATION {
            return Err(Error::InvalidInput(format!(
                "truncation must be at least {MIN_TRUNCATION}, got {}",
                self.truncation
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandPoint {
    pub band_index: usize,
    pub quasimomentum: f64,
    /// Energy in recoil units for the potential `2q₀ cos 2z`.
    pub energy: f64,
}

/// Folds a real order onto (band index, quasimomentum κ ∈ [0, 1]).
///
/// `ν` and `−ν` are equivalent; orders differing by 2 share κ.
pub fn fold_order(nu: f64) -> (usize, f64) {
    let nu = nu.abs();
    let band = nu.floor() as usize;
    let r = nu.rem_euclid(2.0);
    let kappa = if r <= 1.0 { r } else { 2.0 - r };
    (band, kappa)
}

/// The truncated Floquet operator at quasimomentum κ.
#[derive(Debug, Clone, Copy)]
struct Tridiagonal {
    kappa: f64,
    q: f64,
    half: usize,
}

impl Tridiagonal {
    fn len(&self) -> usize {
        2 * self.half + 1
    }

    fn diag(&self, i: usize) -> f64 {
        let k = self.kappa + 2.0 * (i as f64 - self.half as f64);
        k * k
    }

    /// Number of eigenvalues strictly below `x`.
    fn count_below(&self, x: f64) -> usize {
        let q2 = self.q * self.q;
        let pivmin = f64::MIN_POSITIVE.max(q2 * f64::EPSILON * 1e-3);
        let mut count = 0;
        let mut d = self.diag(0) - x;
        if d < 0.0 {
            count += 1;
        }
        for i in 1..self.len() {
            if d.abs() < pivmin {
                d = -pivmin;
            }
            d = self.diag(i) - x - q2 / d;
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th eigenvalue (0-based, ascending).
    fn eigenvalue(&self, k: usize) -> f64 {
        debug_assert!(k < self.len());
        let n = self.len();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            let d = self.diag(i);
            lo = lo.min(d);
            hi = hi.max(d);
        }
        lo -= 2.0 * self.q + 1.0;
        hi += 2.0 * self.q + 1.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Normalised eigenvector for an (already accurate) eigenvalue, by inverse
    /// iteration with a pivoted tridiagonal solve.
    fn eigenvector(&self, eigenvalue: f64) -> Vec<f64> {
        let n = self.len();
        let shift = eigenvalue + 1e3 * f64::EPSILON * eigenvalue.abs().max(1.0);
        let diag: Vec<f64> = (0..n).map(|i| self.diag(i) - shift).collect();
        let off = vec![self.q; n - 1];
        // Deterministic, non-symmetric start so both parities are reached.
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * ((i * 7 + 3) % 11) as f64).collect();
        for _ in 0..4 {
            v = solve_tridiagonal(&off, &diag, &off, &v);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
        }
        // Fix the overall sign: largest component positive.
        let imax = v.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).map(|(i, _)| i).unwrap_or(0);
        if v[imax] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    }
}

/// Gaussian elimination with partial pivoting for a tridiagonal system
/// (sub-diagonal `lower`, diagonal `diag`, super-diagonal `upper`).
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut du = upper.to_vec();
    du.push(0.0);
    let mut du2 = vec![0.0; n];
    let mut dl = lower.to_vec();
    let mut b = rhs.to_vec();
    let tiny = f64::MIN_POSITIVE / f64::EPSILON;
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i].abs() < tiny {
                d[i] = tiny;
            }
            let f = dl[i] / d[i];
            d[i + 1] -= f * du[i];
            b[i + 1] -= f * b[i];
            dl[i] = 0.0;
        } else {
            let f = d[i] / dl[i];
            d[i] = dl[i];
            let tmp = d[i + 1];
            d[i + 1] = du[i] - f * tmp;
            du[i] = tmp;
            du2[i] = du[i + 1];
            du[i + 1] *= -f;
            b.swap(i, i + 1);
            b[i + 1] -= f * b[i];
        }
    }
    if d[n - 1].abs() < tiny {
        d[n - 1] = tiny;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = b[n - 1] / d[n - 1];
    if n >= 2 {
        x[n - 2] = (b[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        x[i] = (b[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
    }
    x
}

type CacheKey = (u64, u64, usize);

/// Characteristic-value solver with optional memoisation.
///
/// The cache is keyed by the exact bit patterns of (ν, q) and the starting
/// truncation, and may be shared across threads.
#[derive(Debug, Default)]
pub struct MathieuSolver {
    cache: Option<RwLock<HashMap<CacheKey, f64>>>,
}

impl MathieuSolver {
    pub fn new() -> Self {
        MathieuSolver { cache: None }
    }

    pub fn with_cache() -> Self {
        MathieuSolver { cache: Some(RwLock::new(HashMap::new())) }
    }

    pub fn cached_len(&self) -> usize {
        self.cache.as_ref().map_or(0, |c| c.read().map(|m| m.len()).unwrap_or(0))
    }

    pub fn char_value(&self, query: MathieuQuery) -> Result<f64> {
        query.validate()?;
        let key = (query.order_nu.abs().to_bits(), query.q.to_bits(), query.truncation);
        if let Some(cache) = &self.cache {
            if let Some(v) = cache.read().ok().and_then(|m| m.get(&key).copied()) {
                return Ok(v);
            }
        }
        let v = char_value(query)?;
        if let Some(cache) = &self.cache {
            if let Ok(mut m) = cache.write() {
                m.insert(key, v);
            }
        }
        Ok(v)
    }
}

/// Converged `index`-th eigenvalue at quasimomentum κ.
fn converged_eigenvalue(kappa: f64, q: f64, index: usize, truncation: usize, nu_for_error: f64) -> Result<f64> {
    let mut half = truncation.max(index / 2 + MIN_TRUNCATION);
    if half > MAX_TRUNCATION {
        return Err(Error::Convergence { nu: nu_for_error, q, cap: MAX_TRUNCATION });
    }
    let mut prev = Tridiagonal { kappa, q, half }.eigenvalue(index);
    while half * 2 <= MAX_TRUNCATION {
        half *= 2;
        let next = Tridiagonal { kappa, q, half }.eigenvalue(index);
        if (next - prev).abs() <= CONVERGENCE_TOL * next.abs().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Convergence { nu: nu_for_error, q, cap: MAX_TRUNCATION })
}

/// Characteristic value a_ν(q) for real order ν (integer ν gives the even
/// solution's a_n).
pub fn char_value(query: MathieuQuery) -> Result<f64> {
    query.validate()?;
    let nu = query.order_nu.abs();
    if query.q == 0.0 {
        return Ok(nu * nu);
    }
    let (band, kappa) = fold_order(nu);
    converged_eigenvalue(kappa, query.q, band, query.truncation, nu)
}

/// Odd-solution characteristic value b_n(q), n ≥ 1.
pub fn char_value_odd(n: usize, q: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("b_n is defined for n >= 1".into()));
    }
    if q == 0.0 {
        return Ok((n * n) as f64);
    }
    let kappa = (n % 2) as f64;
    converged_eigenvalue(kappa, q, n - 1, DEFAULT_TRUNCATION, n as f64)
}

/// Shallow-lattice expansion a_ν ≈ ν² + q²/(2(ν²−1)).
pub fn char_value_small_q(nu: f64, q: f64) -> Result<f64> {
    let nu = nu.abs();
    if (nu - 1.0).abs() < 0.1 {
        return Err(Error::Expansion(format!("order {nu} too close to 1 for the small-q expansion")));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Expansion(format!("small-q expansion needs 0 <= q <= 1, got {q}")));
    }
    let n2 = nu * nu;
    Ok(n2 + q * q / (2.0 * (n2 - 1.0)))
}

/// Deep-lattice expansion a ≈ −2q + 2s√q − (s²+1)/8 for odd s = 2n̄+1.
pub fn char_value_large_q(s: u32, q: f64) -> Result<f64> {
    if s.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!("branch s must be odd, got {s}")));
    }
    if !(q >= 5.0) {
        return Err(Error::Regime(format!("large-q expansion needs q >= 5, got {q}")));
    }
    let s = s as f64;
    Ok(-2.0 * q + 2.0 * s * q.sqrt() - (s * s + 1.0) / 8.0)
}

/// Energy (E_r) of band `n` at quasimomentum κ ∈ [0, 1] for the potential
/// `2q₀ cos 2z`.
pub fn band_energy(n: usize, kappa: f64, q0: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::InvalidInput(format!("quasimomentum must lie in [0,1], got {kappa}")));
    }
    if !(q0.is_finite() && q0 >= 0.0) {
        return Err(Error::InvalidInput(format!("q0 must be non-negative, got {q0}")));
    }
    converged_eigenvalue(kappa, q0, n, DEFAULT_TRUNCATION, n as f64 + kappa)
}

/// Band points for bands `0..bands` on a uniform κ grid of `points` samples.
pub fn band_structure(q0: f64, bands: usize, points: usize) -> Result<Vec<BandPoint>> {
    let points = points.max(2);
    let mut out = Vec::with_capacity(bands * points);
    for n in 0..bands {
        for i in 0..points {
            let kappa = i as f64 / (points - 1) as f64;
            out.push(BandPoint { band_index: n, quasimomentum: kappa, energy: band_energy(n, kappa, q0)? });
        }
    }
    Ok(out)
}

/// (min, max) of band `n`; in a cosine lattice the extremes sit at κ = 0, 1.
pub fn band_edges(n: usize, q0: f64) -> Result<(f64, f64)> {
    let a = band_energy(n, 0.0, q0)?;
    let b = band_energy(n, 1.0, q0)?;
    Ok((a.min(b), a.max(b)))
}

/// κ-average over the zone of E₁(κ) − E₀(κ), Gauss-Legendre with `nodes`
/// points.
pub fn mean_band_separation_with(q0: f64, nodes: usize) -> Result<f64> {
    let (x, w) = quadrature::gauss_legendre(nodes);
    let mut acc = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        let kappa = 0.5 * (xi + 1.0);
        acc += wi * (band_energy(1, kappa, q0)? - band_energy(0, kappa, q0)?);
    }
    Ok(0.5 * acc)
}

pub fn mean_band_separation(q0: f64) -> Result<f64> {
    mean_band_separation_with(q0, 64)
}

/// Gap between the two lowest bands: bottom of band 1 minus top of band 0.
pub fn band_gap(q0: f64) -> Result<f64> {
    let (_, top0) = band_edges(0, q0)?;
    let (bottom1, _) = band_edges(1, q0)?;
    Ok(bottom1 - top0)
}

/// A Bloch eigenstate as Fourier coefficients over `e^{i(κ+2m)z}`.
#[derive(Debug, Clone)]
pub struct BlochState {
    pub kappa: f64,
    pub energy: f64,
    /// Coefficient of `e^{i(κ+2(i−half))z}` at position `i`.
    pub coefficients: Vec<f64>,
    pub half: usize,
}

impl BlochState {
    pub fn value(&self, z: f64) -> num_complex::Complex64 {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = self.kappa + 2.0 * (i as f64 - self.half as f64);
                num_complex::Complex64::from_polar(*c, k * z)
            })
            .sum()
    }
}

pub fn bloch_state(n: usize, kappa: f64, q0: f64, truncation: usize) -> Result<BlochState> {
    let energy = band_energy(n, kappa, q0)?;
    let half = truncation.max(n / 2 + MIN_TRUNCATION);
    let t = Tridiagonal { kappa, q: q0, half };
    Ok(BlochState { kappa, energy, coefficients: t.eigenvector(energy), half })
}

/// |⟨n|z|n+1⟩| between the κ = 0 states of bands `n` and `n+1`, both
/// restricted to (and renormalised on) the well centred at z = π/2.
pub fn well_dipole_element(n: usize, q0: f64) -> Result<f64> {
    let compute = |truncation: usize| -> Result<f64> {
        let a = bloch_state(n, 0.0, q0, truncation)?;
        let b = bloch_state(n + 1, 0.0, q0, truncation)?;
        let c = std::f64::consts::FRAC_PI_2;
        let (x, w) = quadrature::gauss_legendre(256);
        let mut na = 0.0;
        let mut nb = 0.0;
        let mut cross = num_complex::Complex64::new(0.0, 0.0);
        for (xi, wi) in x.iter().zip(&w) {
            let z = c + c * xi;
            let fa = a.value(z);
            let fb = b.value(z);
            na += wi * fa.norm_sqr();
            nb += wi * fb.norm_sqr();
            cross += fa.conj() * fb * (wi * (z - c));
        }
        Ok(cross.norm() / (na * nb).sqrt())
    };
    let coarse = compute(DEFAULT_TRUNCATION)?;
    let fine = compute(2 * DEFAULT_TRUNCATION)?;
    if (fine - coarse).abs() > 1e-9 * fine.abs().max(1e-300) {
        return Err(Error::Convergence { nu: n as f64, q: q0, cap: 2 * DEFAULT_TRUNCATION });
    }
    Ok(fine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn a(nu: f64, q: f64) -> f64 {
        char_value(MathieuQuery::new(nu, q)).unwrap()
    }

    #[test]
    fn free_rotor_and_zero_q() {
        assert_eq!(a(0.0, 0.0), 0.0);
        assert_eq!(a(1.4, 0.0), 1.4 * 1.4);
    }

    #[test]
    fn a0_at_q1_reference_value() {
        // Frozen from a dense eigensolve of the 257x257 matrix (truncation
        // 128), unchanged at truncation 256.
        assert_relative_eq!(a(0.0, 1.0), -0.455_138_604_107_413_9, max_relative = 1e-12);
    }

    #[test]
    fn tabulated_integer_orders() {
        // Abramowitz & Stegun table 20.1 values.
        assert_relative_eq!(a(0.0, 5.0), -5.800_046_020_9, epsilon = 1e-9);
        assert_relative_eq!(a(1.0, 5.0), 1.858_187_541_5, epsilon = 1e-9);
        assert_relative_eq!(char_value_odd(1, 5.0).unwrap(), -5.790_080_598_6, epsilon = 1e-9);
        assert_relative_eq!(char_value_odd(2, 5.0).unwrap(), 2.099_460_445_5, epsilon = 1e-9);
    }

    #[test]
    fn fold_order_examples() {
        assert_eq!(fold_order(0.3), (0, 0.3));
        let (n, k) = fold_order(1.5);
        assert_eq!(n, 1);
        assert_relative_eq!(k, 0.5);
        let (n, k) = fold_order(-2.25);
        assert_eq!(n, 2);
        assert_relative_eq!(k, 0.25);
    }

    #[test]
    fn deep_branch_is_selected_by_band_count() {
        // At q=25 a dominant-Fourier-weight rule would report band 0 here.
        let v = a(1.5, 25.0);
        assert!(v > -22.0 && v < -21.0, "{v}");
    }

    #[test]
    fn small_q_expansion_values() {
        assert_relative_eq!(char_value_small_q(2.0, 0.1).unwrap(), 4.0 + 0.01 / 6.0, max_relative = 1e-15);
        assert_eq!(char_value_small_q(3.3, 0.0).unwrap(), 3.3 * 3.3);
        assert!(matches!(char_value_small_q(1.05, 0.1), Err(Error::Expansion(_))));
    }

    #[test]
    fn small_q_error_scales_as_q4() {
        let err = |q: f64| (a(4.0, q) - char_value_small_q(4.0, q).unwrap()).abs();
        let c_half = err(0.25) / 0.25f64.powi(4);
        let c = err(0.5) / 0.5f64.powi(4);
        // C estimated by halving q stays put and bounds the error at q=0.5.
        assert!((c / c_half - 1.0).abs() < 0.05, "{c} vs {c_half}");
        assert!(err(0.5) < 1.1 * c_half * 0.5f64.powi(4));
    }

    #[test]
    fn large_q_expansion_values() {
        assert_relative_eq!(char_value_large_q(1, 25.0).unwrap(), -40.25, max_relative = 1e-15);
        assert_relative_eq!(char_value_large_q(3, 25.0).unwrap(), -21.25, max_relative = 1e-15);
        assert!(matches!(char_value_large_q(1, 4.0), Err(Error::Regime(_))));
        let q: f64 = 1e8;
        let lead = (char_value_large_q(1, q).unwrap() + 2.0 * q) / (2.0 * q.sqrt());
        assert_relative_eq!(lead, 1.0, max_relative = 1e-4);
    }

    #[test]
    fn band_energy_free_particle() {
        assert_relative_eq!(band_energy(0, 0.5, 0.0).unwrap(), 0.25);
        assert_relative_eq!(band_energy(1, 0.5, 0.0).unwrap(), 2.25);
        assert_relative_eq!(band_energy(0, 0.0, 4.0).unwrap(), a(0.0, 4.0), max_relative = 1e-14);
    }

    #[test]
    fn band_energy_rejects_out_of_zone() {
        assert!(band_energy(0, 1.5, 1.0).is_err());
    }

    #[test]
    fn mean_separation_free_particle() {
        assert_relative_eq!(mean_band_separation(0.0).unwrap(), 2.0, max_relative = 1e-13);
    }

    #[test]
    fn band_gap_is_twice_q_for_shallow_lattice() {
        // First-order gap at the zone edge is 2q.
        let g = band_gap(0.01).unwrap();
        assert_relative_eq!(g, 0.02, max_relative = 1e-3);
        assert_eq!(band_gap(0.0).unwrap(), 0.0);
    }

    #[test]
    fn dipole_element_deep_well_is_harmonic() {
        // Harmonic oscillator of -ψ'' + 4q0 u² ψ: ⟨0|u|1⟩ = 1/(2 q0^{1/4}).
        let q0: f64 = 25.0;
        let v = well_dipole_element(0, q0).unwrap();
        let harmonic = 1.0 / (2.0 * q0.powf(0.25));
        assert!((v / harmonic - 1.0).abs() < 0.1, "{v} vs {harmonic}");
    }

    #[test]
    fn cache_is_consistent_and_thread_safe() {
        use rayon::prelude::*;
        let solver = MathieuSolver::with_cache();
        let qs: Vec<f64> = (0..32).map(|i| 0.25 * i as f64).collect();
        let first: Vec<f64> = qs.par_iter().map(|&q| solver.char_value(MathieuQuery::new(0.7, q)).unwrap()).collect();
        let second: Vec<f64> = qs.par_iter().map(|&q| solver.char_value(MathieuQuery::new(0.7, q)).unwrap()).collect();
        assert_eq!(first, second);
        assert_eq!(solver.cached_len(), 32);
        assert_eq!(first[4], a(0.7, 1.0));
    }

    #[test]
    fn rejects_bad_queries() {
        assert!(char_value(MathieuQuery { order_nu: 0.5, q: 1.0, truncation: 4 }).is_err());
        assert!(char_value(MathieuQuery::new(0.5, -1.0)).is_err());
        assert!(char_value(MathieuQuery::new(f64::NAN, 1.0)).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn order_sign_symmetry(nu in 0.0f64..6.0, q in 0.0f64..20.0) {
                prop_assert_eq!(a(nu, q), a(-nu, q));
            }

            #[test]
            fn bands_are_ordered(kappa in 0.0f64..=1.0, q in 0.0f64..30.0, n in 0usize..6) {
                let lo = band_energy(n, kappa, q).unwrap();
                let hi = band_energy(n + 1, kappa, q).unwrap();
                prop_assert!(hi >= lo);
            }

            #[test]
            fn integer_orders_interlace(q in 0.01f64..40.0) {
                let vals: Vec<f64> = (0..6).map(|n| a(n as f64, q)).collect();
                for w in vals.windows(2) {
                    prop_assert!(w[1] > w[0]);
                }
            }

            #[test]
            fn truncation_converged(nu in 0.0f64..5.0, q in 0.0f64..50.0) {
                let base = char_value(MathieuQuery { order_nu: nu, q, truncation: 16 }).unwrap();
                let wide = char_value(MathieuQuery { order_nu: nu, q, truncation: 128 }).unwrap();
                prop_assert!((base - wide).abs() <= 1e-12 * wide.abs().max(1.0));
            }
        }
    }
}
