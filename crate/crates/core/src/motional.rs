//! Phonon ladders of the trap modes, Raman sideband cooling as a Markov
//! chain on the phonon distribution, sideband spectra and thermometry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HBAR: f64 = 1.054_571_817e-34;
pub const K_B: f64 = 1.380_649e-23;
/// Mass of a ⁸⁷Rb atom, kg.
pub const RB87_MASS: f64 = 1.443_160_648e-25;

const TAIL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeLabel {
    Radial,
    Axial,
}

impl std::fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModeLabel::Radial => "radial",
            ModeLabel::Axial => "axial",
        })
    }
}

/// One harmonic trap axis and its phonon-number distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionalMode {
    trap_freq: f64,
    lamb_dicke: f64,
    dist: Vec<f64>,
    label: ModeLabel,
    doppler_weight: f64,
}

impl MotionalMode {
    pub fn new(trap_freq: f64, lamb_dicke: f64, dist: Vec<f64>, label: ModeLabel) -> Result<Self> {
        if !(trap_freq > 0.0 && trap_freq.is_finite()) {
            return Err(Error::param("trap_freq", "must be finite and > 0"));
        }
        if !(lamb_dicke > 0.0 && lamb_dicke < 0.5) {
            return Err(Error::param("lamb_dicke", format!("must lie in (0, 0.5), got {lamb_dicke}")));
        }
        if dist.is_empty() || dist.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::param("dist", "entries must be >= 0"));
        }
        let total: f64 = dist.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::param("dist", format!("sums to {total}, not 1")));
        }
        Ok(Self {
            trap_freq,
            lamb_dicke,
            dist,
            label,
            doppler_weight: match label {
                ModeLabel::Radial => 1.0,
                ModeLabel::Axial => 0.0,
            },
        })
    }

    /// Mode in a thermal state of mean occupation `nbar`.
    pub fn thermal(trap_freq: f64, lamb_dicke: f64, nbar: f64, n_max: usize, label: ModeLabel) -> Result<Self> {
        Self::new(trap_freq, lamb_dicke, thermal_distribution(nbar, n_max)?, label)
    }

    /// Squared direction cosine between this axis and the Rydberg-laser
    /// wavevector. Radial modes default to 1, axial to 0.
    pub fn with_doppler_weight(mut self, w: f64) -> Self {
        self.doppler_weight = w.clamp(0.0, 1.0);
        self
    }

    /// Same mode with a replacement distribution on the same ladder.
    pub fn with_dist(&self, dist: Vec<f64>) -> Result<Self> {
        let mut m = Self::new(self.trap_freq, self.lamb_dicke, dist, self.label)?;
        m.doppler_weight = self.doppler_weight;
        Ok(m)
    }

    pub fn trap_freq(&self) -> f64 {
        self.trap_freq
    }

    pub fn lamb_dicke(&self) -> f64 {
        self.lamb_dicke
    }

    pub fn dist(&self) -> &[f64] {
        &self.dist
    }

    pub fn label(&self) -> ModeLabel {
        self.label
    }

    pub fn doppler_weight(&self) -> f64 {
        self.doppler_weight
    }

    pub fn n_max(&self) -> usize {
        self.dist.len() - 1
    }

    pub fn mean_phonon(&self) -> f64 {
        self.dist.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }
}

/// Truncated thermal distribution `p(n) = n̄ⁿ/(1+n̄)ⁿ⁺¹`, renormalized.
///
/// Fails if the mass beyond `n_max` exceeds 1e-9.
pub fn thermal_distribution(nbar: f64, n_max: usize) -> Result<Vec<f64>> {
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return Err(Error::param("nbar", "must be finite and >= 0"));
    }
    let mut dist = vec![0.0; n_max + 1];
    if nbar == 0.0 {
        dist[0] = 1.0;
        return Ok(dist);
    }
    let log_q = (nbar / (1.0 + nbar)).ln();
    let tail = ((n_max + 1) as f64 * log_q).exp();
    if tail > TAIL_TOL {
        return Err(Error::TruncationTooSmall { tail, n_max });
    }
    let log_p0 = -(1.0 + nbar).ln();
    for (n, p) in dist.iter_mut().enumerate() {
        *p = (log_p0 + n as f64 * log_q).exp();
    }
    let total: f64 = dist.iter().sum();
    dist.iter_mut().for_each(|p| *p /= total);
    Ok(dist)
}

/// Rabi frequency of the `n → n + delta_n` transition to first order in η.
pub fn sideband_rabi(n: usize, delta_n: i32, mode: &MotionalMode, carrier_rabi: f64) -> f64 {
    let eta = mode.lamb_dicke;
    let nf = n as f64;
    match delta_n {
        0 => carrier_rabi * (1.0 - eta * eta * nf),
        -1 => eta * carrier_rabi * nf.sqrt(),
        1 => eta * carrier_rabi * (nf + 1.0).sqrt(),
        _ => 0.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RscConfig {
    /// Raman carrier Rabi frequency Ω_c, rad/s.
    pub carrier_rabi: f64,
    /// Length of each red-sideband pulse, s.
    pub pulse_time: f64,
    /// Probability that the optical-pumping step adds one phonon.
    pub pump_heating: f64,
    pub cycles: usize,
}

impl RscConfig {
    /// Pulse time giving red-sideband area `eta·Ω_c·τ = area` on `mode`.
    pub fn pulse_time_for_area(carrier_rabi: f64, mode: &MotionalMode, area: f64) -> f64 {
        area / (mode.lamb_dicke * carrier_rabi)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_rabi > 0.0 && self.carrier_rabi.is_finite()) {
            return Err(Error::param("carrier_rabi", "must be finite and > 0"));
        }
        if !(self.pulse_time > 0.0 && self.pulse_time.is_finite()) {
            return Err(Error::param("pulse_time", "must be finite and > 0"));
        }
        if !(0.0..=1.0).contains(&self.pump_heating) {
            return Err(Error::param("pump_heating", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// One cooling cycle: a red-sideband pulse moving each `|n⟩` to `|n−1⟩`
/// with probability `sin²(η·Ω_c·√n·τ/2)`, then optical pumping that adds a
/// phonon with probability `pump_heating`. The top of the ladder absorbs.
///
/// The cycle acts on the whole distribution, so it needs no randomness.
pub fn rsc_cycle(mode: &MotionalMode, cfg: &RscConfig) -> MotionalMode {
    let p = &mode.dist;
    let top = p.len() - 1;
    let mut cooled = vec![0.0; p.len()];
    for (n, &pn) in p.iter().enumerate() {
        if n == 0 {
            cooled[0] += pn;
            continue;
        }
        let s = (0.5 * sideband_rabi(n, -1, mode, cfg.carrier_rabi) * cfg.pulse_time)
            .sin()
            .powi(2);
        cooled[n - 1] += pn * s;
        cooled[n] += pn * (1.0 - s);
    }
    let h = cfg.pump_heating;
    let mut heated = vec![0.0; p.len()];
    for (n, &pn) in cooled.iter().enumerate() {
        if n == top {
            heated[n] += pn;
        } else {
            heated[n] += pn * (1.0 - h);
            heated[n + 1] += pn * h;
        }
    }
    let total: f64 = heated.iter().sum();
    heated.iter_mut().for_each(|x| *x /= total);
    MotionalMode {
        dist: heated,
        ..mode.clone()
    }
}

/// Runs `cfg.cycles` cooling cycles.
pub fn rsc_run(mode: &MotionalMode, cfg: &RscConfig) -> MotionalMode {
    (0..cfg.cycles).fold(mode.clone(), |m, _| rsc_cycle(&m, cfg))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SidebandSpectrum {
    /// Probe detuning, rad/s.
    pub detunings: Vec<f64>,
    pub transfer: Vec<f64>,
}

fn rabi_line(rabi: f64, detuning: f64, time: f64) -> f64 {
    let w2 = rabi * rabi + detuning * detuning;
    if w2 == 0.0 {
        return 0.0;
    }
    rabi * rabi / w2 * (0.5 * w2.sqrt() * time).sin().powi(2)
}

const SIGNIFICANT: f64 = 1e-14;

/// Probe transfer versus detuning for a set of modes.
///
/// Each mode contributes its red and blue sideband lines; the carrier is a
/// single line whose strength depends on the phonon numbers of all modes.
pub fn sideband_spectrum(modes: &[MotionalMode], probe_rabi: f64, probe_time: f64, detunings: &[f64]) -> SidebandSpectrum {
    // Collapse the joint occupation into distinct carrier Rabi frequencies.
    let mut carrier: Vec<(f64, f64)> = vec![(1.0, probe_rabi)];
    for m in modes {
        let eta2 = m.lamb_dicke * m.lamb_dicke;
        carrier = carrier
            .iter()
            .flat_map(|&(w, rabi)| {
                m.dist
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| **p > SIGNIFICANT)
                    .map(move |(n, p)| (w * p, rabi * (1.0 - eta2 * n as f64)))
            })
            .filter(|(w, _)| *w > SIGNIFICANT)
            .collect();
    }
    let transfer = detunings
        .iter()
        .map(|&d| {
            let mut t: f64 = carrier.iter().map(|&(w, r)| w * rabi_line(r, d, probe_time)).sum();
            for m in modes {
                for (n, &p) in m.dist.iter().enumerate().filter(|(_, p)| **p > SIGNIFICANT) {
                    for dn in [-1i32, 1] {
                        let r = sideband_rabi(n, dn, m, probe_rabi);
                        if r > 0.0 {
                            t += p * rabi_line(r, d - dn as f64 * m.trap_freq, probe_time);
                        }
                    }
                }
            }
            t.clamp(0.0, 1.0)
        })
        .collect();
    SidebandSpectrum {
        detunings: detunings.to_vec(),
        transfer,
    }
}

/// Uniform grid of `points` detunings over `[-span, span]`.
pub fn detuning_grid(span: f64, points: usize) -> Vec<f64> {
    let n = points.max(2);
    (0..n)
        .map(|k| -span + 2.0 * span * k as f64 / (n - 1) as f64)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermometryFit {
    pub nbar: f64,
    /// Red-to-blue peak ratio.
    pub ratio: f64,
}

fn window_peak(spec: &SidebandSpectrum, lo: f64, hi: f64) -> Option<f64> {
    spec.detunings
        .iter()
        .zip(&spec.transfer)
        .filter(|(d, _)| **d >= lo && **d <= hi)
        .map(|(_, t)| *t)
        .reduce(f64::max)
}

/// Mean phonon number from the sideband asymmetry of the mode at
/// `trap_freq`: `n̄ = r/(1−r)` with `r` the red/blue peak ratio, peaks taken
/// within ±15% of ∓`trap_freq`.
pub fn fit_mean_phonon(spec: &SidebandSpectrum, trap_freq: f64) -> Result<ThermometryFit> {
    let w = trap_freq.abs();
    let red = window_peak(spec, -1.15 * w, -0.85 * w);
    let blue = window_peak(spec, 0.85 * w, 1.15 * w);
    let (Some(red), Some(blue)) = (red, blue) else {
        return Err(Error::param("spec", "detuning grid does not cover both sidebands"));
    };
    if blue <= 0.0 {
        return Err(Error::param("spec", "blue sideband has no transfer"));
    }
    nbar_from_ratio(red / blue)
}

/// Inverts `r = n̄/(n̄+1)`.
pub fn nbar_from_ratio(ratio: f64) -> Result<ThermometryFit> {
    if !(ratio >= 0.0) || ratio >= 1.0 {
        return Err(Error::UnphysicalRatio { ratio });
    }
    Ok(ThermometryFit {
        nbar: ratio / (1.0 - ratio),
        ratio,
    })
}

/// Detunings of features that dominate their surroundings: points that are
/// the maximum within `±half_window` and exceed `rel_threshold` times the
/// global maximum. Plateaus report their first point.
pub fn resolved_peaks(spec: &SidebandSpectrum, half_window: f64, rel_threshold: f64) -> Vec<f64> {
    let t = &spec.transfer;
    let d = &spec.detunings;
    let global = t.iter().cloned().fold(0.0, f64::max);
    let mut peaks = Vec::new();
    let mut lo = 0;
    let mut hi = 0;
    for i in 0..t.len() {
        while d[lo] < d[i] - half_window {
            lo += 1;
        }
        while hi + 1 < t.len() && d[hi + 1] <= d[i] + half_window {
            hi += 1;
        }
        if t[i] <= rel_threshold * global {
            continue;
        }
        let dominant = (lo..=hi).all(|j| t[j] < t[i] || (t[j] == t[i] && j >= i));
        if dominant {
            peaks.push(d[i]);
        }
    }
    peaks
}

/// Laser-frame Doppler spread `k_eff·σ_v`, rad/s, where each mode adds
/// `cos²·ħω(2n̄+1)/(2m)` to the velocity variance.
pub fn doppler_sigma(modes: &[MotionalMode], k_eff: f64, atom_mass: f64) -> Result<f64> {
    if modes.is_empty() {
        return Err(Error::param("modes", "need at least one mode"));
    }
    let var: f64 = modes
        .iter()
        .map(|m| m.doppler_weight * HBAR * m.trap_freq / (2.0 * atom_mass) * (2.0 * m.mean_phonon() + 1.0))
        .sum();
    Ok(k_eff * var.sqrt())
}
