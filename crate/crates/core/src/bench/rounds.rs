//! Repeated mid-circuit rounds: cool (or not), benchmark, heat, repeat.

use serde::{Deserialize, Serialize};

use super::rb::{run_rb, RbSetup};
use crate::error::{Error, Result};
use crate::motional::{doppler_sigma, rsc_cycle, thermal_distribution, MotionalMode, RscConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RscStage {
    pub cycles: usize,
    /// Red-sideband pulse area `η·Ω_c·τ` on the targeted mode, rad.
    pub area: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RoundPolicy {
    NoCooling,
    /// Molasses-style cooling that cannot go below `floor` phonons.
    LocalGm { floor: f64 },
    /// Sideband cooling; cycles alternate between the radial and axial mode.
    Rsc { stages: Vec<RscStage> },
}

impl RoundPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            RoundPolicy::NoCooling => "no_cooling",
            RoundPolicy::LocalGm { .. } => "local_gm",
            RoundPolicy::Rsc { .. } => "rsc",
        }
    }
}

/// Trap modes and the cooling hardware shared by every round.
#[derive(Clone, Debug)]
pub struct MotionSetup {
    pub radial: MotionalMode,
    pub axial: MotionalMode,
    /// Wavevector difference of the Rydberg lasers, rad/m.
    pub k_eff: f64,
    pub atom_mass: f64,
    /// Raman carrier Rabi frequency, rad/s.
    pub carrier_rabi: f64,
    pub pump_heating: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub f_corrected: f64,
    pub f_corrected_std_err: f64,
    pub f_raw: f64,
    pub nbar_radial: f64,
    pub nbar_axial: f64,
    pub doppler_sigma: f64,
    /// The qubits were optically re-pumped by the cooling step.
    pub reinitialized: bool,
}

/// Thermal state with the same ladder (grown if needed) and mean `nbar`.
fn rethermalize(mode: &MotionalMode, nbar: f64) -> Result<MotionalMode> {
    let mut n_max = mode.n_max();
    if nbar > 0.0 {
        let log_q = (nbar / (1.0 + nbar)).ln();
        let needed = ((1e-9f64).ln() / log_q).ceil() as usize + 1;
        n_max = n_max.max(needed);
    }
    mode.with_dist(thermal_distribution(nbar, n_max)?)
}

fn cool(mode: &MotionalMode, carrier_rabi: f64, pump_heating: f64, area: f64) -> MotionalMode {
    let cfg = RscConfig {
        carrier_rabi,
        pulse_time: RscConfig::pulse_time_for_area(carrier_rabi, mode, area),
        pump_heating,
        cycles: 1,
    };
    rsc_cycle(mode, &cfg)
}

fn apply_policy(policy: &RoundPolicy, motion: &mut MotionSetup) -> Result<bool> {
    match policy {
        RoundPolicy::NoCooling => Ok(false),
        RoundPolicy::LocalGm { floor } => {
            for mode in [&mut motion.radial, &mut motion.axial] {
                if mode.mean_phonon() > *floor {
                    *mode = rethermalize(mode, *floor)?;
                }
            }
            Ok(false)
        }
        RoundPolicy::Rsc { stages } => {
            for stage in stages {
                for c in 0..stage.cycles {
                    let mode = if c % 2 == 0 { &mut motion.radial } else { &mut motion.axial };
                    *mode = cool(mode, motion.carrier_rabi, motion.pump_heating, stage.area);
                }
            }
            Ok(true)
        }
    }
}

/// Runs `n_rounds` of policy → benchmark → heating.
///
/// Each round re-derives the Doppler spread from the current phonon
/// numbers before benchmarking, then adds `heating_per_round` phonons to
/// both modes as a re-thermalized distribution.
pub fn run_rounds(
    n_rounds: usize,
    policy: &RoundPolicy,
    heating_per_round: f64,
    rb: &RbSetup,
    motion: &MotionSetup,
    seed: u64,
) -> Result<Vec<RoundRecord>> {
    if n_rounds == 0 {
        return Err(Error::param("n_rounds", "must be >= 1"));
    }
    if !(heating_per_round >= 0.0 && heating_per_round.is_finite()) {
        return Err(Error::param("heating_per_round", "must be finite and >= 0"));
    }
    let mut motion = motion.clone();
    let mut out = Vec::with_capacity(n_rounds);
    for round in 0..n_rounds {
        let reinitialized = apply_policy(policy, &mut motion)?;
        let sigma = doppler_sigma(&[motion.radial.clone(), motion.axial.clone()], motion.k_eff, motion.atom_mass)?;
        let mut setup = rb.clone();
        setup.noise.doppler_sigma = sigma;
        let res = run_rb(&setup, seed, round)?.result;
        out.push(RoundRecord {
            round: round + 1,
            f_corrected: res.f_corrected,
            f_corrected_std_err: res.f_corrected_std_err,
            f_raw: res.f_raw,
            nbar_radial: motion.radial.mean_phonon(),
            nbar_axial: motion.axial.mean_phonon(),
            doppler_sigma: sigma,
            reinitialized,
        });
        motion.radial = rethermalize(&motion.radial, motion.radial.mean_phonon() + heating_per_round)?;
        motion.axial = rethermalize(&motion.axial, motion.axial.mean_phonon() + heating_per_round)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::rb::{NoiseModel, RbConfig};
    use crate::czgate::{BlockadeModel, PulseProfile};
    use crate::motional::{ModeLabel, RB87_MASS};
    use crate::readout::{ImagingParams, Thresholds};
    use std::f64::consts::PI;

    fn motion(nbar: f64) -> MotionSetup {
        MotionSetup {
            radial: MotionalMode::thermal(2.0 * PI * 100e3, 0.16, nbar, 600, ModeLabel::Radial).unwrap(),
            axial: MotionalMode::thermal(2.0 * PI * 20e3, 0.16 * 5f64.sqrt(), nbar, 600, ModeLabel::Axial).unwrap(),
            k_eff: 8.76e6,
            atom_mass: RB87_MASS,
            carrier_rabi: 2.0 * PI * 20e3,
            pump_heating: 0.08,
        }
    }

    fn rb() -> RbSetup {
        let omega = 2.0 * PI * 5e6;
        RbSetup {
            config: RbConfig {
                n_cz_list: vec![0, 10, 20],
                randomizations: 2,
                shots: 10,
                ideal_gate: true,
            },
            model: BlockadeModel::ideal(omega),
            profile: PulseProfile::time_optimal(omega),
            noise: NoiseModel::none(),
            imaging: ImagingParams::ideal(),
            thresholds: Thresholds { t1: 0, t2: 0 },
        }
    }

    #[test]
    fn policies_steer_phonon_numbers() {
        let stages = vec![RscStage { cycles: 300, area: 0.3 }, RscStage { cycles: 300, area: 0.6 }];
        let rsc = run_rounds(3, &RoundPolicy::Rsc { stages }, 16.0, &rb(), &motion(1.0), 1).unwrap();
        for r in &rsc {
            assert!((0.8..=1.2).contains(&r.nbar_radial), "{r:?}");
            assert!(r.reinitialized);
        }
        let none = run_rounds(3, &RoundPolicy::NoCooling, 16.0, &rb(), &motion(1.0), 1).unwrap();
        assert!((none[1].nbar_radial - 17.0).abs() < 1e-6);
        assert!(none[2].doppler_sigma > none[1].doppler_sigma);
        let gm = run_rounds(3, &RoundPolicy::LocalGm { floor: 4.0 }, 16.0, &rb(), &motion(1.0), 1).unwrap();
        assert!((gm[0].nbar_radial - 1.0).abs() < 1e-6);
        assert!((gm[1].nbar_radial - 4.0).abs() < 1e-6);
    }

    #[test]
    fn policy_serde_shape() {
        let p: RoundPolicy = serde_json::from_str(r#"{"kind":"local_gm","floor":4.0}"#).unwrap();
        assert_eq!(p, RoundPolicy::LocalGm { floor: 4.0 });
    }
}
