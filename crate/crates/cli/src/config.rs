//! Run configuration: one TOML file with a section per subsystem.

use std::f64::consts::PI;
use std::path::Path;

use rydgate::bench::{MotionSetup, NoiseModel, RbConfig, RoundPolicy};
use rydgate::czgate::{BlockadeModel, PulseProfile};
use rydgate::motional::{doppler_sigma, ModeLabel, MotionalMode, RscConfig, RB87_MASS};
use rydgate::readout::{ImagingParams, Thresholds};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// The configuration shipped with the binary and used by `--config default`.
pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub model: BlockadeModel,
    /// Gate pulse; the built-in time-optimal profile when omitted.
    #[serde(default)]
    pub pulse: Option<PulseProfile>,
    pub noise: NoiseModel,
    pub imaging: ImagingParams,
    pub motional: MotionalSection,
    pub rsc: RscConfig,
    pub rb: RbSection,
    pub rounds: RoundsSection,
    #[serde(default)]
    pub optimize: OptimizeSection,
    #[serde(default)]
    pub sideband: SidebandSection,
    #[serde(default)]
    pub readout: ReadoutSection,
    #[serde(default)]
    pub rabi: RabiSection,
}

fn one() -> f64 {
    1.0
}

fn rb87() -> f64 {
    RB87_MASS
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionalSection {
    /// rad/s
    pub radial_trap_freq: f64,
    /// rad/s
    pub axial_trap_freq: f64,
    pub radial_lamb_dicke: f64,
    pub axial_lamb_dicke: f64,
    pub radial_nbar: f64,
    pub axial_nbar: f64,
    pub n_max: usize,
    /// Rydberg two-photon wavevector difference, rad/m.
    pub k_eff: f64,
    #[serde(default = "rb87")]
    pub atom_mass: f64,
    #[serde(default = "one")]
    pub radial_doppler_weight: f64,
    #[serde(default)]
    pub axial_doppler_weight: f64,
}

impl MotionalSection {
    pub fn modes(&self) -> rydgate::Result<[MotionalMode; 2]> {
        Ok([
            MotionalMode::thermal(self.radial_trap_freq, self.radial_lamb_dicke, self.radial_nbar, self.n_max, ModeLabel::Radial)?
                .with_doppler_weight(self.radial_doppler_weight),
            MotionalMode::thermal(self.axial_trap_freq, self.axial_lamb_dicke, self.axial_nbar, self.n_max, ModeLabel::Axial)?
                .with_doppler_weight(self.axial_doppler_weight),
        ])
    }

    pub fn doppler_sigma(&self) -> rydgate::Result<f64> {
        doppler_sigma(&self.modes()?, self.k_eff, self.atom_mass)
    }

    fn validate(&self) -> rydgate::Result<()> {
        self.modes()?;
        for (name, v) in [("k_eff", self.k_eff), ("atom_mass", self.atom_mass)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(rydgate::Error::InvalidParameter {
                    name,
                    reason: "must be finite and > 0".into(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbSection {
    pub n_cz_list: Vec<usize>,
    pub randomizations: usize,
    pub shots: usize,
    /// Replace the simulated pulse with an exact CZ.
    #[serde(default)]
    pub ideal_gate: bool,
    /// Derive `noise.doppler_sigma` from the motional section.
    #[serde(default = "yes")]
    pub doppler_from_motion: bool,
    /// Fixed readout thresholds; calibrated from `[imaging]` when omitted.
    #[serde(default)]
    pub thresholds: Option<Thresholds>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundsSection {
    pub n_rounds: usize,
    /// Phonons added to each mode between rounds.
    pub heating_per_round: f64,
    pub policies: Vec<RoundPolicy>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeSection {
    /// Maximum number of gate simulations.
    pub budget: usize,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        Self { budget: 400 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SidebandSection {
    /// Probe pulse length, s.
    pub probe_time: f64,
    /// Carrier pulse area of the probe, rad.
    pub probe_area: f64,
    /// Grid half-width in units of the largest trap frequency.
    pub span_factor: f64,
    pub points: usize,
    /// Relative height below which a local maximum is not counted as a peak.
    pub peak_threshold: f64,
}

impl Default for SidebandSection {
    fn default() -> Self {
        Self {
            probe_time: 4e-3,
            probe_area: PI / 4.0,
            span_factor: 1.5,
            points: 4501,
            peak_threshold: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReadoutSection {
    /// Labeled training draws per class for threshold calibration.
    pub calibration_samples: usize,
    /// Held-out draws per prepared state.
    pub held_out: usize,
    /// Trials per prepared state written to the scatter CSV.
    pub scatter_trials: usize,
}

impl Default for ReadoutSection {
    fn default() -> Self {
        Self {
            calibration_samples: 5000,
            held_out: 10_000,
            scatter_trials: 2000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RabiSection {
    /// Longest pulse, s.
    pub t_max: f64,
    pub points: usize,
}

impl Default for RabiSection {
    fn default() -> Self {
        Self { t_max: 400e-9, points: 201 }
    }
}

fn section(name: &str, r: rydgate::Result<()>) -> Result<(), CliError> {
    r.map_err(|e| match e {
        rydgate::Error::InvalidParameter { name: key, reason } => CliError::Config(format!("{name}.{key}: {reason}")),
        other => CliError::Config(format!("{name}: {other}")),
    })
}

fn positive(key: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{key}: must be finite and > 0, got {v}")))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path).map_err(|source| CliError::ReadConfig {
            path: path.display().to_string(),
            source,
        })?;
        let text = String::from_utf8(bytes.clone()).map_err(|_| CliError::Config(format!("{} is not UTF-8", path.display())))?;
        Ok((Self::parse(&text)?, bytes))
    }

    pub fn default_config() -> Self {
        Self::parse(DEFAULT_CONFIG).expect("shipped config is valid")
    }

    /// Checks every section before anything runs.
    pub fn validate(&self) -> Result<(), CliError> {
        section("model", self.model.validate())?;
        if let Some(p) = &self.pulse {
            section("pulse", p.validate())?;
        }
        section("noise", self.noise.validate())?;
        section("imaging", self.imaging.validate())?;
        section("motional", self.motional.validate())?;
        section("rsc", self.rsc.validate())?;
        section("rb", self.rb_config().validate())?;
        if self.rounds.n_rounds == 0 {
            return Err(CliError::Config("rounds.n_rounds: must be >= 1".into()));
        }
        if !(self.rounds.heating_per_round >= 0.0 && self.rounds.heating_per_round.is_finite()) {
            return Err(CliError::Config("rounds.heating_per_round: must be finite and >= 0".into()));
        }
        if self.optimize.budget == 0 {
            return Err(CliError::Config("optimize.budget: must be >= 1".into()));
        }
        positive("sideband.probe_time", self.sideband.probe_time)?;
        positive("sideband.probe_area", self.sideband.probe_area)?;
        positive("sideband.span_factor", self.sideband.span_factor)?;
        if self.sideband.points < 3 {
            return Err(CliError::Config("sideband.points: must be >= 3".into()));
        }
        if self.readout.calibration_samples < 1000 {
            return Err(CliError::Config("readout.calibration_samples: must be >= 1000".into()));
        }
        if self.readout.held_out < 1000 {
            return Err(CliError::Config("readout.held_out: must be >= 1000".into()));
        }
        positive("rabi.t_max", self.rabi.t_max)?;
        if self.rabi.points < 2 {
            return Err(CliError::Config("rabi.points: must be >= 2".into()));
        }
        Ok(())
    }

    pub fn profile(&self) -> PulseProfile {
        self.pulse.clone().unwrap_or_else(|| PulseProfile::time_optimal(self.model.omega))
    }

    pub fn rb_config(&self) -> RbConfig {
        RbConfig {
            n_cz_list: self.rb.n_cz_list.clone(),
            randomizations: self.rb.randomizations,
            shots: self.rb.shots,
            ideal_gate: self.rb.ideal_gate,
        }
    }

    /// Noise model with the Doppler spread taken from the motional state
    /// when so configured.
    pub fn noise_model(&self) -> rydgate::Result<NoiseModel> {
        let mut noise = self.noise.clone();
        if self.rb.doppler_from_motion {
            noise.doppler_sigma = self.motional.doppler_sigma()?;
        }
        Ok(noise)
    }

    pub fn motion_setup(&self) -> rydgate::Result<MotionSetup> {
        let [radial, axial] = self.motional.modes()?;
        Ok(MotionSetup {
            radial,
            axial,
            k_eff: self.motional.k_eff,
            atom_mass: self.motional.atom_mass,
            carrier_rabi: self.rsc.carrier_rabi,
            pump_heating: self.rsc.pump_heating,
        })
    }
}
