//! Monte-Carlo execution of echoed RB circuits through the gate model,
//! stochastic error channels and the two-stage readout.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fidelity_from_decay, fit_decay, AsymptoteMode, DecayFit, DecayPoint};
use super::sequence::{apply_on_a, apply_on_b, apply_single, build_sequence, Mat2, Op, Pair, RbSequence, PAULIS};
use crate::czgate::{simulate_gate, BlockadeModel, GateResult, PulseProfile};
use crate::error::{Error, Result};
use crate::qdyn::C64;
use crate::readout::{classify, simulate_counts, Class, ImagingParams, Outcome, Thresholds, TrueState};
use crate::rng::derive;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Per-atom Gaussian laser detuning from thermal motion, rad/s.
    #[serde(default)]
    pub doppler_sigma: f64,
    /// Redraw the Doppler detuning before every CZ instead of once per shot.
    #[serde(default)]
    pub doppler_per_gate: bool,
    #[serde(default)]
    pub loss_prob_gate: f64,
    #[serde(default)]
    pub recycle_prob_gate: f64,
    #[serde(default)]
    pub scatter_prob_gate: f64,
    #[serde(default)]
    pub prep_error: f64,
    /// Depolarizing probability per atom per global rotation.
    #[serde(default)]
    pub single_qubit_error: f64,
    /// Two-qubit depolarizing probability per CZ.
    #[serde(default)]
    pub depolarizing_2q: f64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            doppler_sigma: 0.0,
            doppler_per_gate: false,
            loss_prob_gate: 0.0,
            recycle_prob_gate: 0.0,
            scatter_prob_gate: 0.0,
            prep_error: 0.0,
            single_qubit_error: 0.0,
            depolarizing_2q: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.doppler_sigma >= 0.0 && self.doppler_sigma.is_finite()) {
            return Err(Error::param("doppler_sigma", "must be finite and >= 0"));
        }
        let probs = [
            ("loss_prob_gate", self.loss_prob_gate),
            ("recycle_prob_gate", self.recycle_prob_gate),
            ("scatter_prob_gate", self.scatter_prob_gate),
            ("prep_error", self.prep_error),
            ("single_qubit_error", self.single_qubit_error),
            ("depolarizing_2q", self.depolarizing_2q),
        ];
        for (name, v) in probs {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(name, "must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbConfig {
    pub n_cz_list: Vec<usize>,
    #[serde(default = "default_randomizations")]
    pub randomizations: usize,
    pub shots: usize,
    /// Replace the simulated pulse by an exact CZ.
    #[serde(default)]
    pub ideal_gate: bool,
}

fn default_randomizations() -> usize {
    32
}

impl RbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_cz_list.len() < 3 {
            return Err(Error::param("n_cz_list", "need at least 3 sequence lengths"));
        }
        if let Some(n) = self.n_cz_list.iter().find(|n| *n % 2 != 0) {
            return Err(Error::OddSequenceLength(*n));
        }
        if self.n_cz_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("n_cz_list", "must be strictly ascending"));
        }
        if self.randomizations == 0 || self.shots == 0 {
            return Err(Error::param("shots", "randomizations and shots must be > 0"));
        }
        Ok(())
    }
}

/// Everything a benchmarking run needs besides the seed.
#[derive(Clone, Debug)]
pub struct RbSetup {
    pub config: RbConfig,
    pub model: BlockadeModel,
    pub profile: PulseProfile,
    pub noise: NoiseModel,
    pub imaging: ImagingParams,
    pub thresholds: Thresholds,
}

impl RbSetup {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.model.validate()?;
        self.profile.validate()?;
        self.noise.validate()?;
        self.imaging.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub round: usize,
    pub n_cz: usize,
    pub randomization: usize,
    pub shot: usize,
    pub atom_a: Outcome,
    pub atom_b: Outcome,
}

impl ShotRecord {
    pub fn any_loss(&self) -> bool {
        self.atom_a.class == Class::Loss || self.atom_b.class == Class::Loss
    }

    pub fn returned(&self) -> bool {
        self.atom_a.class == Class::Zero && self.atom_b.class == Class::Zero
    }
}

/// Shots in which neither atom reads out as lost, order preserved.
pub fn post_select_loss(shots: &[ShotRecord]) -> Vec<ShotRecord> {
    shots.iter().filter(|s| !s.any_loss()).copied().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbPoint {
    pub n_cz: usize,
    pub return_prob: f64,
    pub std_err: f64,
    pub n_shots: usize,
    /// Shots surviving loss post-selection.
    pub n_kept: usize,
    pub return_prob_post: f64,
    pub std_err_post: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbResult {
    pub points: Vec<RbPoint>,
    pub raw_fit: DecayFit,
    pub corrected_fit: DecayFit,
    pub p_raw: f64,
    pub p_corrected: f64,
    /// Return-probability retention per gate (asymptote 0).
    pub f_raw: f64,
    /// Depolarizing-equivalent fidelity of post-selected data (asymptote 1/4).
    pub f_corrected: f64,
    pub f_raw_std_err: f64,
    pub f_corrected_std_err: f64,
}

#[derive(Clone, Debug)]
pub struct RbRun {
    pub result: RbResult,
    pub shots: Vec<ShotRecord>,
}

const STREAM_SEQUENCE: u64 = 0x5e9;
const STREAM_SHOT: u64 = 0x540;

/// What the pulse does to the computational states in one shot.
#[derive(Clone, Debug)]
struct GateMap {
    diag: [C64; 4],
    /// Weight with which atom A / atom B is the one left in |r⟩, per input.
    residual: [[f64; 2]; 4],
}

impl GateMap {
    fn exact_cz() -> Self {
        let one = C64::new(1.0, 0.0);
        Self {
            diag: [one, one, one, -one],
            residual: [[0.0; 2]; 4],
        }
    }

    fn from_result(r: &GateResult) -> Self {
        Self {
            diag: [r.amplitude(0), r.amplitude(1), r.amplitude(2), r.amplitude(3)],
            residual: r.residual_rydberg,
        }
    }
}

enum Atoms {
    Both(Pair),
    OnlyA([C64; 2]),
    OnlyB([C64; 2]),
    None,
}

/// Gate maps tabulated on a per-atom detuning grid of `GRID_STEP·σ`
/// spacing out to `±GRID_HALF·GRID_STEP·σ`; Doppler draws snap to the
/// nearest node.
const GRID_HALF: i64 = 16;
const GRID_STEP: f64 = 0.25;
const GRID_LEN: usize = (2 * GRID_HALF + 1) as usize;

struct DopplerTable {
    maps: Vec<GateMap>,
}

impl DopplerTable {
    fn build(setup: &RbSetup) -> Result<Self> {
        let sigma = setup.noise.doppler_sigma;
        let node = |i: usize| (i as i64 - GRID_HALF) as f64 * GRID_STEP * sigma;
        let maps = (0..GRID_LEN * GRID_LEN)
            .into_par_iter()
            .map(|k| {
                let det = (node(k / GRID_LEN), node(k % GRID_LEN));
                simulate_gate(&setup.profile, &setup.model, Some(det), None).map(|r| GateMap::from_result(&r))
            })
            .collect::<Result<_>>()?;
        Ok(Self { maps })
    }

    fn index(z: f64) -> usize {
        (((z / GRID_STEP).round() as i64).clamp(-GRID_HALF, GRID_HALF) + GRID_HALF) as usize
    }

    fn lookup(&self, za: f64, zb: f64) -> &GateMap {
        &self.maps[Self::index(za) * GRID_LEN + Self::index(zb)]
    }
}

struct ShotSim<'a, R: Rng> {
    setup: &'a RbSetup,
    rng: R,
    gate: GateMap,
    doppler: Option<&'a DopplerTable>,
}

fn normalize(v: &mut [C64]) -> f64 {
    let n2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let n = n2.sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|z| *z /= n);
    }
    n2
}

fn pick_weighted<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

impl<R: Rng> ShotSim<'_, R> {
    fn random_pauli(&mut self) -> &'static Mat2 {
        &PAULIS[self.rng.random_range(0..4)]
    }

    fn depolarize(&mut self, atoms: &mut Atoms, prob_a: f64, prob_b: f64) {
        if prob_a > 0.0 && self.rng.random::<f64>() < prob_a {
            let g = self.random_pauli();
            match atoms {
                Atoms::Both(psi) => apply_on_a(g, psi),
                Atoms::OnlyA(psi) => apply_single(g, psi),
                _ => {}
            }
        }
        if prob_b > 0.0 && self.rng.random::<f64>() < prob_b {
            let g = self.random_pauli();
            match atoms {
                Atoms::Both(psi) => apply_on_b(g, psi),
                Atoms::OnlyB(psi) => apply_single(g, psi),
                _ => {}
            }
        }
    }

    /// Removes one atom from a pair, collapsing it in the computational
    /// basis and keeping the partner's conditional state.
    fn lose(&mut self, psi: &Pair, atom_a_lost: bool) -> Atoms {
        let weights: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
        self.lose_by_weights(psi, atom_a_lost, &weights)
    }

    fn lose_by_weights(&mut self, psi: &Pair, atom_a_lost: bool, weights: &[f64]) -> Atoms {
        let k = pick_weighted(&mut self.rng, weights);
        let mut v = if atom_a_lost {
            let a = k >> 1;
            [psi[2 * a], psi[2 * a + 1]]
        } else {
            let b = k & 1;
            [psi[b], psi[2 + b]]
        };
        if normalize(&mut v) == 0.0 {
            let bit = if atom_a_lost { k & 1 } else { k >> 1 };
            v = [C64::new(0.0, 0.0); 2];
            v[bit] = C64::new(1.0, 0.0);
        }
        if atom_a_lost {
            Atoms::OnlyB(v)
        } else {
            Atoms::OnlyA(v)
        }
    }

    fn rotation(&mut self, atoms: &mut Atoms, g: &Mat2) {
        match atoms {
            Atoms::Both(psi) => {
                apply_on_a(g, psi);
                apply_on_b(g, psi);
            }
            Atoms::OnlyA(psi) | Atoms::OnlyB(psi) => apply_single(g, psi),
            Atoms::None => {}
        }
        let p = self.setup.noise.single_qubit_error;
        self.depolarize(atoms, p, p);
    }

    /// Draws fresh per-atom Doppler detunings in units of σ.
    fn redraw_gate(&mut self) -> Result<()> {
        if let Some(table) = self.doppler {
            let za: f64 = self.rng.sample(StandardNormal);
            let zb: f64 = self.rng.sample(StandardNormal);
            self.gate = table.lookup(za, zb).clone();
        }
        Ok(())
    }

    fn cz(&mut self, atoms: &mut Atoms) -> Result<()> {
        let noise = &self.setup.noise;
        if noise.doppler_per_gate {
            self.redraw_gate()?;
        }
        let d = self.gate.diag;
        let (loss, recycle, scatter, depol) = (
            noise.loss_prob_gate,
            noise.recycle_prob_gate,
            noise.scatter_prob_gate,
            noise.depolarizing_2q,
        );
        let next = match std::mem::replace(atoms, Atoms::None) {
            Atoms::Both(mut psi) => {
                let orig = psi;
                let before: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
                for k in 0..4 {
                    psi[k] *= d[k];
                }
                let kept = normalize(&mut psi);
                if self.rng.random::<f64>() >= kept {
                    // The pulse left Rydberg population behind: one atom is
                    // expelled, collapsing onto the inputs that leaked.
                    let leak: Vec<f64> = (0..4).map(|k| before[k] * (1.0 - d[k].norm_sqr()).max(0.0)).collect();
                    let wa: f64 = (0..4).map(|k| before[k] * self.gate.residual[k][0]).sum();
                    let wb: f64 = (0..4).map(|k| before[k] * self.gate.residual[k][1]).sum();
                    let a_lost = pick_weighted(&mut self.rng, &[wa.max(1e-300), wb.max(1e-300)]) == 0;
                    self.lose_by_weights(&orig, a_lost, &leak)
                } else {
                    let mut atoms = Atoms::Both(psi);
                    if depol > 0.0 && self.rng.random::<f64>() < depol {
                        let pa = self.random_pauli();
                        let pb = self.random_pauli();
                        if let Atoms::Both(psi) = &mut atoms {
                            apply_on_a(pa, psi);
                            apply_on_b(pb, psi);
                        }
                    }
                    atoms
                }
            }
            Atoms::OnlyA(mut v) => self.lone_gate(&mut v, d[2], true),
            Atoms::OnlyB(mut v) => self.lone_gate(&mut v, d[1], false),
            Atoms::None => Atoms::None,
        };
        *atoms = next;
        // Independent per-atom loss after the pulse.
        let lost_a = loss > 0.0 && self.rng.random::<f64>() < loss;
        let lost_b = loss > 0.0 && self.rng.random::<f64>() < loss;
        *atoms = match std::mem::replace(atoms, Atoms::None) {
            Atoms::Both(psi) => match (lost_a, lost_b) {
                (false, false) => Atoms::Both(psi),
                (true, true) => Atoms::None,
                (true, false) => self.lose(&psi, true),
                (false, true) => self.lose(&psi, false),
            },
            Atoms::OnlyA(v) if !lost_a => Atoms::OnlyA(v),
            Atoms::OnlyB(v) if !lost_b => Atoms::OnlyB(v),
            _ => Atoms::None,
        };
        let p = recycle + scatter - recycle * scatter;
        self.depolarize(atoms, p, p);
        Ok(())
    }

    /// A lone atom sees the pulse as if its partner sat in |0⟩.
    fn lone_gate(&mut self, v: &mut [C64; 2], d1: C64, is_a: bool) -> Atoms {
        v[1] *= d1;
        let kept = normalize(v);
        if self.rng.random::<f64>() >= kept {
            return Atoms::None;
        }
        if is_a {
            Atoms::OnlyA(*v)
        } else {
            Atoms::OnlyB(*v)
        }
    }

    fn measure(&mut self, atoms: &Atoms) -> (TrueState, TrueState) {
        let bit = |b: usize| if b == 1 { TrueState::One } else { TrueState::Zero };
        match atoms {
            Atoms::Both(psi) => {
                let w: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
                let k = pick_weighted(&mut self.rng, &w);
                (bit(k >> 1), bit(k & 1))
            }
            Atoms::OnlyA(v) => {
                let k = pick_weighted(&mut self.rng, &[v[0].norm_sqr(), v[1].norm_sqr()]);
                (bit(k), TrueState::Lost)
            }
            Atoms::OnlyB(v) => {
                let k = pick_weighted(&mut self.rng, &[v[0].norm_sqr(), v[1].norm_sqr()]);
                (TrueState::Lost, bit(k))
            }
            Atoms::None => (TrueState::Lost, TrueState::Lost),
        }
    }

    fn run(&mut self, seq: &RbSequence) -> Result<(Outcome, Outcome)> {
        let noise = &self.setup.noise;
        if !noise.doppler_per_gate {
            self.redraw_gate()?;
        }
        let prep = noise.prep_error;
        let a = usize::from(self.rng.random::<f64>() < prep);
        let b = usize::from(self.rng.random::<f64>() < prep);
        let mut psi = [C64::new(0.0, 0.0); 4];
        psi[2 * a + b] = C64::new(1.0, 0.0);
        let mut atoms = Atoms::Both(psi);
        for op in seq.ops() {
            match op {
                Op::Rotation(r) => self.rotation(&mut atoms, &r.matrix()),
                Op::Cz => self.cz(&mut atoms)?,
            }
        }
        let (sa, sb) = self.measure(&atoms);
        let imaging = &self.setup.imaging;
        let th = &self.setup.thresholds;
        let ca = simulate_counts(sa, imaging, &mut self.rng);
        let cb = simulate_counts(sb, imaging, &mut self.rng);
        Ok((classify(ca.c1, ca.c2, th), classify(cb.c1, cb.c2, th)))
    }
}

/// Return probability with a smoothed binomial error, inflated to the
/// spread between randomizations when that is larger.
fn point_estimate(per_randomization: &[(usize, usize)]) -> (f64, f64, usize) {
    let n: usize = per_randomization.iter().map(|x| x.1).sum();
    let k: usize = per_randomization.iter().map(|x| x.0).sum();
    if n == 0 {
        return (0.0, 1.0, 0);
    }
    let y = k as f64 / n as f64;
    let q = (k as f64 + 0.5) / (n as f64 + 1.0);
    let binomial = q * (1.0 - q) / n as f64;
    let fracs: Vec<f64> = per_randomization
        .iter()
        .filter(|x| x.1 > 0)
        .map(|x| x.0 as f64 / x.1 as f64)
        .collect();
    let r = fracs.len() as f64;
    let spread = if fracs.len() > 1 {
        let mean = fracs.iter().sum::<f64>() / r;
        fracs.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (r - 1.0) / r
    } else {
        0.0
    };
    (y, binomial.max(spread).sqrt(), n)
}

/// Runs every (length, randomization, shot) of the configured experiment.
///
/// Each shot draws from its own generator derived from `(seed, round,
/// point, randomization, shot)`, so results do not depend on how the work
/// is spread over threads.
pub fn run_rb(setup: &RbSetup, seed: u64, round: usize) -> Result<RbRun> {
    setup.validate()?;
    let cfg = &setup.config;
    let sequences: Vec<Vec<RbSequence>> = cfg
        .n_cz_list
        .iter()
        .enumerate()
        .map(|(pi, &n)| {
            (0..cfg.randomizations)
                .map(|ri| build_sequence(n, &mut derive(seed, &[STREAM_SEQUENCE, round as u64, pi as u64, ri as u64])))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let base_gate = if cfg.ideal_gate {
        GateMap::exact_cz()
    } else {
        GateMap::from_result(&simulate_gate(&setup.profile, &setup.model, None, None)?)
    };

    let doppler = if setup.noise.doppler_sigma > 0.0 && !cfg.ideal_gate {
        Some(DopplerTable::build(setup)?)
    } else {
        None
    };

    let per_point = cfg.randomizations * cfg.shots;
    let total = cfg.n_cz_list.len() * per_point;
    let shots: Vec<ShotRecord> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let pi = idx / per_point;
            let ri = (idx % per_point) / cfg.shots;
            let si = idx % cfg.shots;
            let rng = derive(seed, &[STREAM_SHOT, round as u64, pi as u64, ri as u64, si as u64]);
            let mut sim = ShotSim {
                setup,
                rng,
                gate: base_gate.clone(),
                doppler: doppler.as_ref(),
            };
            let (atom_a, atom_b) = sim.run(&sequences[pi][ri])?;
            Ok(ShotRecord {
                round,
                n_cz: cfg.n_cz_list[pi],
                randomization: ri,
                shot: si,
                atom_a,
                atom_b,
            })
        })
        .collect::<Result<_>>()?;

    let result = analyze(&shots, cfg)?;
    Ok(RbRun { result, shots })
}

/// Aggregates shot records into per-length points and both decay fits.
pub fn analyze(shots: &[ShotRecord], cfg: &RbConfig) -> Result<RbResult> {
    let mut points = Vec::with_capacity(cfg.n_cz_list.len());
    for &n in &cfg.n_cz_list {
        let mut raw = vec![(0usize, 0usize); cfg.randomizations];
        let mut post = vec![(0usize, 0usize); cfg.randomizations];
        for s in shots.iter().filter(|s| s.n_cz == n) {
            let hit = usize::from(s.returned());
            raw[s.randomization].0 += hit;
            raw[s.randomization].1 += 1;
            if !s.any_loss() {
                post[s.randomization].0 += hit;
                post[s.randomization].1 += 1;
            }
        }
        let (y, se, n_shots) = point_estimate(&raw);
        let (yp, sep, n_kept) = point_estimate(&post);
        points.push(RbPoint {
            n_cz: n,
            return_prob: y,
            std_err: se,
            n_shots,
            n_kept,
            return_prob_post: yp,
            std_err_post: sep,
        });
    }
    let raw_pts: Vec<DecayPoint> = points
        .iter()
        .map(|p| DecayPoint {
            n: p.n_cz as f64,
            y: p.return_prob,
            std_err: p.std_err,
        })
        .collect();
    let post_pts: Vec<DecayPoint> = points
        .iter()
        .filter(|p| p.n_kept > 0)
        .map(|p| DecayPoint {
            n: p.n_cz as f64,
            y: p.return_prob_post,
            std_err: p.std_err_post,
        })
        .collect();
    let raw_fit = fit_decay(&raw_pts, AsymptoteMode::Raw, None)?;
    let corrected_fit = fit_decay(&post_pts, AsymptoteMode::Corrected, None)?;
    Ok(RbResult {
        p_raw: raw_fit.p,
        p_corrected: corrected_fit.p,
        f_raw: fidelity_from_decay(raw_fit.p, AsymptoteMode::Raw),
        f_corrected: fidelity_from_decay(corrected_fit.p, AsymptoteMode::Corrected),
        f_raw_std_err: raw_fit.p_std_err,
        f_corrected_std_err: 0.75 * corrected_fit.p_std_err,
        points,
        raw_fit,
        corrected_fit,
    })
}
