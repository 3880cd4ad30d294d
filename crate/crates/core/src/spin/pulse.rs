use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

use super::state::{DensityMatrix, Matrix9};
use super::system::{Level, SpinSystem, Transition};

/// How a drive acts on spectator transitions of the same channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectivityMode {
    /// Perfectly selective: rotates only the addressed pair.
    Ideal,
    /// Finite selectivity: every same-channel transition sees the carrier
    /// with its own detuning (generalized Rabi rotation).
    Rabi,
}

/// One mw or rf drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    pub transition: Transition,
    /// On-resonance rotation angle, radians, in [0, 2*pi].
    pub nominal_angle: f64,
    /// Rabi frequency, MHz. Must be positive in Rabi mode.
    pub rabi_frequency_mhz: f64,
    /// Carrier offset from the addressed transition, MHz.
    pub carrier_offset_mhz: f64,
    pub selectivity_mode: SelectivityMode,
}

impl DriveSpec {
    pub fn ideal(transition: Transition, nominal_angle: f64) -> Result<Self> {
        let spec = DriveSpec {
            transition,
            nominal_angle,
            rabi_frequency_mhz: 0.0,
            carrier_offset_mhz: 0.0,
            selectivity_mode: SelectivityMode::Ideal,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn rabi(
        transition: Transition,
        nominal_angle: f64,
        rabi_frequency_mhz: f64,
        carrier_offset_mhz: f64,
    ) -> Result<Self> {
        let spec = DriveSpec {
            transition,
            nominal_angle,
            rabi_frequency_mhz,
            carrier_offset_mhz,
            selectivity_mode: SelectivityMode::Rabi,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.nominal_angle.is_finite()
            || self.nominal_angle < 0.0
            || self.nominal_angle > 2.0 * PI
        {
            return Err(Error::domain(format!(
                "nominal angle must lie in [0, 2*pi], got {}",
                self.nominal_angle
            )));
        }
        match self.selectivity_mode {
            SelectivityMode::Rabi => {
                if !(self.rabi_frequency_mhz > 0.0) {
                    return Err(Error::domain(format!(
                        "Rabi mode needs a positive Rabi frequency, got {}",
                        self.rabi_frequency_mhz
                    )));
                }
                if !self.carrier_offset_mhz.is_finite() {
                    return Err(Error::domain("carrier offset must be finite".to_string()));
                }
            }
            SelectivityMode::Ideal => {}
        }
        Ok(())
    }
}

/// Two same-channel rotations touched a common level with non-negligible
/// amplitude; their composition is order-dependent (applied in ascending
/// transition-frequency order).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectivityWarning {
    pub shared_level: Level,
    pub first: Transition,
    pub second: Transition,
    pub first_flip: f64,
    pub second_flip: f64,
}

/// Flip probabilities below this are treated as negligible when deciding
/// whether an overlapping pair deserves a warning.
const OVERLAP_WARN_MIN_FLIP: f64 = 1e-6;

/// Embed a 2x2 unitary block on the subspace spanned by two levels.
fn embedded_unitary(a: Level, b: Level, block: [[Complex64; 2]; 2]) -> Matrix9 {
    let mut u = Matrix9::identity();
    let (i, j) = (a.index(), b.index());
    u[(i, i)] = block[0][0];
    u[(i, j)] = block[0][1];
    u[(j, i)] = block[1][0];
    u[(j, j)] = block[1][1];
    u
}

/// Perfectly selective rotation of the addressed pair by `angle`:
/// U = exp(-i * angle * sigma_x / 2) on the subspace, identity elsewhere.
pub fn apply_ideal_pulse(
    state: &DensityMatrix,
    transition: &Transition,
    angle: f64,
) -> Result<DensityMatrix> {
    if !angle.is_finite() || !(0.0..=2.0 * PI).contains(&angle) {
        return Err(Error::domain(format!(
            "rotation angle must lie in [0, 2*pi], got {angle}"
        )));
    }
    let c = Complex64::new((angle / 2.0).cos(), 0.0);
    let s = Complex64::new(0.0, -(angle / 2.0).sin());
    let u = embedded_unitary(transition.from(), transition.to(), [[c, s], [s, c]]);
    Ok(state.conjugated(&u))
}

/// One spectator rotation of a finite-selectivity pulse.
struct SubRotation {
    transition: Transition,
    frequency_mhz: f64,
    detuning_mhz: f64,
    flip_probability: f64,
}

/// Finite-selectivity pulse: the carrier sits at the addressed transition
/// (plus `carrier_offset_mhz`) and every same-channel transition is rotated
/// with the generalized Rabi formula
///
/// P = Omega^2 / Omega_eff^2 * sin^2(pi * Omega_eff * t_p),
/// Omega_eff = sqrt(Omega^2 + delta^2),
///
/// where t_p = angle / (2*pi*Omega) makes the on-resonance rotation equal
/// the nominal angle. Rotations are composed in ascending
/// transition-frequency order; pairs of non-negligible rotations that share
/// a level are reported as selectivity warnings.
pub fn apply_finite_pulse(
    state: &DensityMatrix,
    system: &SpinSystem,
    drive: &DriveSpec,
) -> Result<(DensityMatrix, Vec<SelectivityWarning>)> {
    drive.validate()?;
    system.validate()?;
    if drive.selectivity_mode != SelectivityMode::Rabi {
        return Err(Error::domain(
            "apply_finite_pulse requires a Rabi-mode drive".to_string(),
        ));
    }

    let omega = drive.rabi_frequency_mhz;
    let t_p = drive.nominal_angle / (2.0 * PI * omega);
    let carrier =
        system.transition_frequency(&drive.transition) + drive.carrier_offset_mhz;

    let mut rotations: Vec<SubRotation> = Transition::channel_transitions(
        drive.transition.channel(),
    )
    .into_iter()
    .map(|t| {
        let f = system.transition_frequency(&t);
        let delta = carrier - f;
        let omega_eff = (omega * omega + delta * delta).sqrt();
        let half = PI * omega_eff * t_p;
        let weight = omega / omega_eff;
        SubRotation {
            transition: t,
            frequency_mhz: f,
            detuning_mhz: delta,
            flip_probability: weight * weight * half.sin().powi(2),
        }
    })
    .collect();

    rotations.sort_by(|a, b| {
        a.frequency_mhz
            .partial_cmp(&b.frequency_mhz)
            .unwrap()
            .then_with(|| a.transition.from().index().cmp(&b.transition.from().index()))
            .then_with(|| a.transition.to().index().cmp(&b.transition.to().index()))
    });

    let mut rho = state.clone();
    for rot in &rotations {
        let omega_eff = (omega * omega + rot.detuning_mhz * rot.detuning_mhz).sqrt();
        let half = PI * omega_eff * t_p;
        let (c, s) = (half.cos(), half.sin());
        let ax = omega / omega_eff;
        let az = rot.detuning_mhz / omega_eff;
        // Basis order (lower level, upper level); sigma_z is -1 on the lower.
        let (lo, hi) = if system.level_energy(rot.transition.from())
            <= system.level_energy(rot.transition.to())
        {
            (rot.transition.from(), rot.transition.to())
        } else {
            (rot.transition.to(), rot.transition.from())
        };
        let block = [
            [Complex64::new(c, s * az), Complex64::new(0.0, -s * ax)],
            [Complex64::new(0.0, -s * ax), Complex64::new(c, -s * az)],
        ];
        rho = rho.conjugated(&embedded_unitary(lo, hi, block));
    }

    let mut warnings = Vec::new();
    for i in 0..rotations.len() {
        for j in (i + 1)..rotations.len() {
            let (a, b) = (&rotations[i], &rotations[j]);
            if a.flip_probability < OVERLAP_WARN_MIN_FLIP
                || b.flip_probability < OVERLAP_WARN_MIN_FLIP
            {
                continue;
            }
            if let Some(shared) = a.transition.shared_level(&b.transition) {
                warnings.push(SelectivityWarning {
                    shared_level: shared,
                    first: a.transition,
                    second: b.transition,
                    first_flip: a.flip_probability,
                    second_flip: b.flip_probability,
                });
            }
        }
    }

    Ok((rho, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::state::DIM;

    fn one_at(level: Level) -> DensityMatrix {
        let mut p = [0.0; DIM];
        p[level.index()] = 1.0;
        DensityMatrix::from_populations(&p).unwrap()
    }

    #[test]
    fn pi_pulse_inverts_the_pair() {
        let t = Transition::mw((0, 1), (-1, 1)).unwrap();
        let rho = apply_ideal_pulse(&one_at(t.from()), &t, PI).unwrap();
        let p = rho.populations();
        assert!((p[t.to().index()] - 1.0).abs() < 1e-12);
        assert!(p[t.from().index()].abs() < 1e-12);
        rho.validate().unwrap();
    }

    #[test]
    fn zero_angle_is_identity() {
        let t = Transition::rf((-1, 1), (-1, 0)).unwrap();
        let start = DensityMatrix::optically_initialized();
        let rho = apply_ideal_pulse(&start, &t, 0.0).unwrap();
        for i in 0..DIM {
            assert!((rho.populations()[i] - start.populations()[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn half_pi_splits_population_with_coherence() {
        let t = Transition::mw((0, 0), (-1, 0)).unwrap();
        let rho = apply_ideal_pulse(&one_at(t.from()), &t, PI / 2.0).unwrap();
        let p = rho.populations();
        assert!((p[t.from().index()] - 0.5).abs() < 1e-12);
        assert!((p[t.to().index()] - 0.5).abs() < 1e-12);
        let coh = rho.get(t.from().index(), t.to().index());
        assert!((coh.norm() - 0.5).abs() < 1e-12);
        rho.validate().unwrap();
    }

    #[test]
    fn two_pi_pulses_restore_populations() {
        let t = Transition::mw((0, -1), (1, -1)).unwrap();
        let start = DensityMatrix::optically_initialized();
        let once = apply_ideal_pulse(&start, &t, PI).unwrap();
        let twice = apply_ideal_pulse(&once, &t, PI).unwrap();
        for i in 0..DIM {
            assert!((twice.populations()[i] - start.populations()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_out_of_range_angles() {
        let t = Transition::mw((0, 1), (-1, 1)).unwrap();
        let rho = DensityMatrix::optically_initialized();
        assert!(apply_ideal_pulse(&rho, &t, -0.1).is_err());
        assert!(apply_ideal_pulse(&rho, &t, 2.0 * PI + 0.1).is_err());
        assert!(DriveSpec::ideal(t, 7.0).is_err());
        assert!(DriveSpec::rabi(t, PI, 0.0, 0.0).is_err());
    }

    #[test]
    fn resonant_finite_pulse_matches_ideal_on_target() {
        let sys = SpinSystem::default();
        let t = Transition::mw((0, 1), (-1, 1)).unwrap();
        let drive = DriveSpec::rabi(t, PI, 1.0, 0.0).unwrap();
        let (rho, _) = apply_finite_pulse(&one_at(t.from()), &sys, &drive).unwrap();
        let p = rho.populations();
        assert!((p[t.to().index()] - 1.0).abs() < 1e-9);
        rho.validate().unwrap();
    }

    #[test]
    fn neighbor_flip_matches_generalized_rabi_formula() {
        // Hyperfine neighbor detuned by A = 2.2 MHz from a 1 MHz, pi drive.
        let sys = SpinSystem::default().with_hyperfine(2.2);
        let target = Transition::mw((0, 1), (-1, 1)).unwrap();
        let neighbor = Transition::mw((0, 0), (-1, 0)).unwrap();
        let drive = DriveSpec::rabi(target, PI, 1.0, 0.0).unwrap();

        let delta = sys.transition_frequency(&target) - sys.transition_frequency(&neighbor);
        let omega_eff = (1.0 + delta * delta).sqrt();
        let expected = (1.0 / omega_eff.powi(2)) * (PI * omega_eff * 0.5).sin().powi(2);
        assert!((expected - 0.063).abs() < 1e-3);

        let (rho, _) = apply_finite_pulse(&one_at(neighbor.from()), &sys, &drive).unwrap();
        let got = rho.populations()[neighbor.to().index()];
        assert!((got - expected).abs() < 1e-12, "got {got}, expected {expected}");
    }

    #[test]
    fn weak_drive_leaves_neighbors_untouched() {
        // A / Omega >= 100 bounds the neighbor flip by 1e-4.
        let sys = SpinSystem::default();
        let omega = sys.hyperfine_mhz / 100.0;
        let target = Transition::mw((0, 1), (-1, 1)).unwrap();
        let neighbor = Transition::mw((0, 0), (-1, 0)).unwrap();
        let drive = DriveSpec::rabi(target, PI, omega, 0.0).unwrap();
        let (rho, _) = apply_finite_pulse(&one_at(neighbor.from()), &sys, &drive).unwrap();
        assert!(rho.populations()[neighbor.to().index()] <= 1e-4);
    }

    #[test]
    fn finite_pulse_preserves_physicality() {
        let sys = SpinSystem::default();
        let target = Transition::rf((-1, 1), (-1, 0)).unwrap();
        let drive = DriveSpec::rabi(target, PI / 2.0, 0.5, 0.1).unwrap();
        let (rho, _) = apply_finite_pulse(
            &DensityMatrix::optically_initialized(),
            &sys,
            &drive,
        )
        .unwrap();
        rho.validate().unwrap();
        assert!(rho.trace_drift() < 1e-12);
    }

    #[test]
    fn strong_drive_reports_overlap_warnings() {
        // Rabi frequency comparable to the rf splittings: neighboring
        // rotations share levels with sizeable amplitude.
        let sys = SpinSystem::default();
        let target = Transition::rf((-1, 1), (-1, 0)).unwrap();
        let drive = DriveSpec::rabi(target, PI, 3.0, 0.0).unwrap();
        let (_, warnings) = apply_finite_pulse(
            &DensityMatrix::optically_initialized(),
            &sys,
            &drive,
        )
        .unwrap();
        assert!(!warnings.is_empty());
        assert!(warnings
            .iter()
            .all(|w| w.first_flip >= 1e-6 && w.second_flip >= 1e-6));
    }

    #[test]
    fn ideal_mode_rejected_by_finite_pulse() {
        let sys = SpinSystem::default();
        let t = Transition::mw((0, 1), (-1, 1)).unwrap();
        let drive = DriveSpec::ideal(t, PI).unwrap();
        assert!(apply_finite_pulse(&DensityMatrix::fully_mixed(), &sys, &drive).is_err());
    }
}
