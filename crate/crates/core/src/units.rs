//! Laboratory parameters and their dimensionless counterparts.
//!
//! Lengths are scaled by the lattice wavenumber (`z = k_L x`), time by the
//! drive frequency (`τ = ω_m t`), and lattice depths are quoted in recoil
//! energies `E_r = ħ²k_L²/(2M)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Planck constant (J s).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Mass of a ⁸⁷Rb atom (kg).
pub const RB87_MASS: f64 = 1.443e-25;

/// Transverse confinement and scattering data from which the mean-field
/// strength G can be computed instead of being given directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scattering {
    /// Radial trap angular frequency ω⊥ (rad/s).
    pub radial_frequency: f64,
    /// s-wave scattering length (m).
    pub scattering_length: f64,
    /// Mean linear density n₀ (1/m).
    pub mean_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalSetup {
    /// Atomic mass (kg).
    pub atom_mass: f64,
    /// Lattice laser wavelength (m); the lattice spacing is half of it.
    pub lattice_wavelength: f64,
    /// Lattice depth V₀ in recoil energies.
    pub lattice_depth: f64,
    /// Drive frequency ω_m/2π (Hz).
    pub drive_frequency: f64,
    /// Drive (shaking) amplitude ΔL (m).
    pub drive_amplitude: f64,
    /// Dimensionless mean-field strength G.
    #[serde(rename = "interaction_G", default)]
    pub interaction_g: f64,
    /// When present, G is derived from these instead of `interaction_G`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scattering: Option<Scattering>,
}

impl PhysicalSetup {
    /// Rb-87 in an 852 nm lattice, the configuration used for the parameter
    /// estimates of the shaken-lattice experiments.
    pub fn rb87_852nm(lattice_depth: f64, drive_frequency: f64, drive_amplitude: f64) -> Self {
        PhysicalSetup {
            atom_mass: RB87_MASS,
            lattice_wavelength: 852e-9,
            lattice_depth,
            drive_frequency,
            drive_amplitude,
            interaction_g: 0.0,
            scattering: None,
        }
    }

    pub fn lattice_spacing(&self) -> f64 {
        self.lattice_wavelength / 2.0
    }

    /// k_L = π / d_L.
    pub fn wavenumber(&self) -> f64 {
        PI / self.lattice_spacing()
    }

    /// E_r = ħ²π²/(2M d_L²), in joules.
    pub fn recoil_energy(&self) -> f64 {
        let d = self.lattice_spacing();
        HBAR * HBAR * PI * PI / (2.0 * self.atom_mass * d * d)
    }

    /// Recoil angular frequency ω_r = ħk_L²/(2M).
    pub fn recoil_frequency(&self) -> f64 {
        let k = self.wavenumber();
        HBAR * k * k / (2.0 * self.atom_mass)
    }

    pub fn drive_angular_frequency(&self) -> f64 {
        2.0 * PI * self.drive_frequency
    }

    /// Amplitude of the inertial force in the co-moving frame, F = MΔLω_m².
    pub fn drive_force(&self) -> f64 {
        let w = self.drive_angular_frequency();
        self.atom_mass * self.drive_amplitude * w * w
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("atom_mass", self.atom_mass),
            ("lattice_wavelength", self.lattice_wavelength),
            ("drive_frequency", self.drive_frequency),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be strictly positive, got {v}")));
            }
        }
        let non_negative = [
            ("lattice_depth", self.lattice_depth),
            ("drive_amplitude", self.drive_amplitude),
            ("interaction_G", self.interaction_g),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be non-negative, got {v}")));
            }
        }
        if let Some(s) = &self.scattering {
            for (name, v) in [
                ("radial_frequency", s.radial_frequency),
                ("scattering_length", s.scattering_length),
                ("mean_density", s.mean_density),
            ] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvalidInput(format!("scattering.{name} must be non-negative, got {v}")));
                }
            }
        }
        Ok(())
    }
}

/// Dimensionless parameters of the driven-lattice Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledParams {
    /// Rescaled Planck constant k̄ = 2ω_r/ω_m.
    pub kbar: f64,
    /// Bare lattice depth V₀ (E_r).
    pub lattice_depth_recoil: f64,
    #[serde(rename = "interaction_G")]
    pub interaction_g: f64,
    /// Screened depth V′ = V₀/(1+4G) (E_r).
    pub effective_depth: f64,
    /// Mathieu parameter of the undriven lattice, q₀ = V′/4.
    pub q0: f64,
    /// Drive amplitude λ = k_L ΔL.
    pub lambda: f64,
}

impl ScaledParams {
    /// Builds the scaled set directly from (k̄, V₀, G, λ).
    pub fn new(kbar: f64, lattice_depth_recoil: f64, interaction_g: f64, lambda: f64) -> Result<Self> {
        if !(kbar.is_finite() && kbar > 0.0) {
            return Err(Error::InvalidInput(format!("kbar must be positive, got {kbar}")));
        }
        if !(lattice_depth_recoil.is_finite() && lattice_depth_recoil >= 0.0) {
            return Err(Error::InvalidInput(format!("lattice depth must be non-negative, got {lattice_depth_recoil}")));
        }
        if !(interaction_g.is_finite() && interaction_g >= 0.0) {
            return Err(Error::InvalidInput(format!("G must be non-negative, got {interaction_g}")));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidInput(format!("lambda must be non-negative, got {lambda}")));
        }
        let effective_depth = screened_depth(lattice_depth_recoil, interaction_g);
        Ok(ScaledParams {
            kbar,
            lattice_depth_recoil,
            interaction_g,
            effective_depth,
            q0: effective_depth / 4.0,
            lambda,
        })
    }

    /// Same lattice and drive, different amplitude.
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    /// Inverts λ back to the inertial force F = λħω_m k_L / k̄ for a given
    /// laboratory setup.
    pub fn drive_force(&self, setup: &PhysicalSetup) -> f64 {
        self.lambda * HBAR * setup.drive_angular_frequency() * setup.wavenumber() / self.kbar
    }
}

/// V′ = V₀/(1+4G).
pub fn screened_depth(lattice_depth: f64, interaction_g: f64) -> f64 {
    lattice_depth / (1.0 + 4.0 * interaction_g)
}

/// Mean-field strength from transverse confinement: g₁D = ħk_Lω⊥a_s and
/// G = g₁D n₀ k̄/(ħω_m).
pub fn interaction_from_scattering(setup: &PhysicalSetup, s: &Scattering, kbar: f64) -> f64 {
    let g1d = HBAR * setup.wavenumber() * s.radial_frequency * s.scattering_length;
    g1d * s.mean_density * kbar / (HBAR * setup.drive_angular_frequency())
}

pub fn scale_setup(setup: &PhysicalSetup) -> Result<ScaledParams> {
    setup.validate()?;
    let kbar = 2.0 * setup.recoil_frequency() / setup.drive_angular_frequency();
    let g = match &setup.scattering {
        Some(s) => interaction_from_scattering(setup, s, kbar),
        None => setup.interaction_g,
    };
    let lambda = setup.wavenumber() * setup.drive_amplitude;
    ScaledParams::new(kbar, setup.lattice_depth, g, lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Validity {
    Valid,
    Marginal,
    /// Too deep for the uniform-density screening to hold; linear
    /// (G = 0) runs are unaffected.
    InvalidForInteracting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityThresholds {
    pub valid_below: f64,
    pub marginal_below: f64,
}

impl Default for ValidityThresholds {
    fn default() -> Self {
        ValidityThresholds { valid_below: 1.0, marginal_below: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub effective_depth: f64,
    pub validity: Validity,
    pub linear_dynamics_allowed: bool,
    pub message: String,
}

/// Checks V′ ≪ 1, the condition for replacing the mean-field term with a
/// screened lattice.
pub fn effective_potential_validity(params: &ScaledParams, thresholds: ValidityThresholds) -> ValidityReport {
    let v = params.effective_depth;
    let validity = if v < thresholds.valid_below {
        Validity::Valid
    } else if v < thresholds.marginal_below {
        Validity::Marginal
    } else {
        Validity::InvalidForInteracting
    };
    let message = match validity {
        Validity::Valid => format!("V' = {v} below {}", thresholds.valid_below),
        Validity::Marginal => format!("V' = {v} is not small; screening only approximate"),
        Validity::InvalidForInteracting => {
            format!("V' = {v}: invalid for interacting runs; linear runs unaffected")
        }
    };
    ValidityReport { effective_depth: v, validity, linear_dynamics_allowed: true, message }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn recoil_energy_matches_wavenumber_form() {
        let s = PhysicalSetup::rb87_852nm(2.0, 3000.0, 0.0);
        let k = s.wavenumber();
        let alt = HBAR * HBAR * k * k / (2.0 * s.atom_mass);
        assert_relative_eq!(s.recoil_energy(), alt, max_relative = 1e-14);
        assert_relative_eq!(s.recoil_energy(), HBAR * s.recoil_frequency(), max_relative = 1e-14);
    }

    #[test]
    fn no_drive_gives_zero_lambda() {
        let p = scale_setup(&PhysicalSetup::rb87_852nm(2.0, 5000.0, 0.0)).unwrap();
        assert_eq!(p.lambda, 0.0);
    }

    #[test]
    fn identity_at_zero_interaction() {
        let p = scale_setup(&PhysicalSetup::rb87_852nm(2.0, 5000.0, 1e-8)).unwrap();
        assert_eq!(p.effective_depth, 2.0);
        assert_eq!(p.q0, 0.5);
    }

    #[test]
    fn rejects_non_positive_mass_and_frequency() {
        let mut s = PhysicalSetup::rb87_852nm(2.0, 5000.0, 0.0);
        s.atom_mass = 0.0;
        assert!(matches!(scale_setup(&s), Err(Error::InvalidInput(_))));
        let mut s = PhysicalSetup::rb87_852nm(2.0, 5000.0, 0.0);
        s.drive_frequency = -1.0;
        assert!(matches!(scale_setup(&s), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn drive_force_round_trip() {
        let s = PhysicalSetup::rb87_852nm(4.0, 4321.0, 37e-9);
        let p = scale_setup(&s).unwrap();
        let force = p.drive_force(&s);
        assert_relative_eq!(force, s.drive_force(), max_relative = 1e-14);
        let w = s.drive_angular_frequency();
        let recovered = force / (s.atom_mass * w * w);
        assert_relative_eq!(recovered, s.drive_amplitude, max_relative = 1e-14);
    }

    #[test]
    fn interaction_from_scattering_data() {
        let mut s = PhysicalSetup::rb87_852nm(10.0, 5000.0, 0.0);
        s.scattering =
            Some(Scattering { radial_frequency: 2.0 * PI * 80.0, scattering_length: 5.3e-9, mean_density: 1e7 });
        let p = scale_setup(&s).unwrap();
        let g1d = HBAR * s.wavenumber() * 2.0 * PI * 80.0 * 5.3e-9;
        let expected = g1d * 1e7 * p.kbar / (HBAR * s.drive_angular_frequency());
        assert_relative_eq!(p.interaction_g, expected, max_relative = 1e-14);
        assert!(p.effective_depth < 10.0);
    }

    #[test]
    fn validity_classes() {
        let th = ValidityThresholds::default();
        let p = ScaledParams::new(0.5, 20.0, 10.0, 0.0).unwrap();
        assert_relative_eq!(p.effective_depth, 20.0 / 41.0, max_relative = 1e-15);
        assert_eq!(effective_potential_validity(&p, th).validity, Validity::Valid);

        let p = ScaledParams::new(0.5, 16.0, 0.0, 0.0).unwrap();
        let r = effective_potential_validity(&p, th);
        assert_eq!(r.validity, Validity::InvalidForInteracting);
        assert!(r.linear_dynamics_allowed);

        let p = ScaledParams::new(0.5, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(effective_potential_validity(&p, th).validity, Validity::Valid);

        let p = ScaledParams::new(0.5, 3.0, 0.0, 0.0).unwrap();
        assert_eq!(effective_potential_validity(&p, th).validity, Validity::Marginal);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn kbar_decreases_with_drive_frequency(f in 500.0f64..20_000.0, df in 1.0f64..5000.0) {
                let a = scale_setup(&PhysicalSetup::rb87_852nm(2.0, f, 0.0)).unwrap();
                let b = scale_setup(&PhysicalSetup::rb87_852nm(2.0, f + df, 0.0)).unwrap();
                prop_assert!(b.kbar < a.kbar);
            }

            #[test]
            fn lambda_is_linear_in_amplitude(dl in 0.0f64..1e-6, c in 0.1f64..10.0) {
                let a = scale_setup(&PhysicalSetup::rb87_852nm(2.0, 5000.0, dl)).unwrap();
                let b = scale_setup(&PhysicalSetup::rb87_852nm(2.0, 5000.0, c * dl)).unwrap();
                prop_assert!((b.lambda - c * a.lambda).abs() <= 1e-12 * (1.0 + b.lambda.abs()));
            }

            #[test]
            fn screening_decreases_with_interaction(v0 in 0.1f64..30.0, g in 0.0f64..20.0, dg in 0.01f64..5.0) {
                let a = ScaledParams::new(1.0, v0, g, 0.0).unwrap();
                let b = ScaledParams::new(1.0, v0, g + dg, 0.0).unwrap();
                prop_assert!(b.effective_depth < a.effective_depth);
                prop_assert!(a.effective_depth <= v0);
            }
        }
    }
}
