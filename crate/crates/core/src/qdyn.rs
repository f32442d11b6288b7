//! Dense complex linear algebra and time evolution for small Hilbert spaces.
//!
//! Everything here targets dimensions of at most a few tens: two atoms with
//! three levels each is the largest space the gate model needs. Evolution is
//! a fixed-step fourth-order Runge-Kutta integration of the Schrödinger
//! equation with renormalization after every step, and
//! [`trajectory_evolve`] adds first-order Monte-Carlo wavefunction jumps on
//! top of the same stepper.

use std::ops::{Index, IndexMut};

use rand::Rng;

use crate::error::{Error, Result};

pub use num_complex::Complex64 as C64;

const HERMITIAN_TOL: f64 = 1e-12;
const PROJECTOR_TOL: f64 = 1e-12;
/// Upper bound on the summed jump probability of one trajectory step.
const MAX_JUMP_PROB_PER_STEP: f64 = 1e-3;

/// A normalized pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
}

impl StateVector {
    /// Builds a state from raw amplitudes, normalizing them.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::param("amplitudes", "state must have dim > 0"));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NonFinite { t: 0.0 });
        }
        let norm = norm(&amps);
        if norm == 0.0 {
            return Err(Error::param("amplitudes", "zero vector cannot be normalized"));
        }
        let mut amps = amps;
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(Self { amps })
    }

    /// Computational basis state `|k⟩` of a `dim`-dimensional space.
    pub fn basis(dim: usize, k: usize) -> Self {
        assert!(k < dim, "basis index {k} out of range for dim {dim}");
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[k] = C64::new(1.0, 0.0);
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amps)
    }

    /// Probability of finding the system in basis state `k`.
    pub fn population(&self, k: usize) -> f64 {
        self.amps[k].norm_sqr()
    }

    /// Euclidean distance between two states of equal dimension.
    pub fn distance(&self, other: &StateVector) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Complex inner product `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    fn from_unnormalized(mut amps: Vec<C64>) -> Self {
        let n = norm(&amps);
        amps.iter_mut().for_each(|a| *a /= n);
        Self { amps }
    }
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Square complex matrix in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    dim: usize,
    entries: Vec<C64>,
}

impl OperatorMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let entries = (0..dim * dim).map(|k| f(k / dim, k % dim)).collect();
        Self { dim, entries }
    }

    /// Builds a matrix from row-major entries.
    pub fn from_entries(dim: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Ok(Self { dim, entries })
    }

    /// Like [`from_entries`](Self::from_entries) but rejects matrices that
    /// are not Hermitian to within 1e-12 elementwise.
    pub fn hermitian(dim: usize, entries: Vec<C64>) -> Result<Self> {
        let m = Self::from_entries(dim, entries)?;
        let deviation = m.hermitian_deviation();
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(m)
    }

    /// Diagonal projector onto the listed basis states.
    pub fn projector(dim: usize, onto: &[usize]) -> Self {
        let mut m = Self::zeros(dim);
        for &k in onto {
            m[(k, k)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Rank-one projector `|v⟩⟨v|` onto a normalized state.
    pub fn outer(v: &StateVector) -> Self {
        let a = v.amplitudes();
        Self::from_fn(a.len(), |i, j| a[i] * a[j].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn hermitian_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_finite(&self) -> bool {
        self.entries
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn dagger(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, rhs: &OperatorMatrix) -> Self {
        assert_eq!(self.dim, rhs.dim, "matmul dimension mismatch");
        let d = self.dim;
        Self::from_fn(d, |i, j| (0..d).map(|k| self[(i, k)] * rhs[(k, j)]).sum())
    }

    /// Tensor product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &OperatorMatrix) -> Self {
        let (a, b) = (self.dim, rhs.dim);
        Self::from_fn(a * b, |i, j| self[(i / b, j / b)] * rhs[(i % b, j % b)])
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, rhs: &OperatorMatrix) -> Self {
        assert_eq!(self.dim, rhs.dim, "add dimension mismatch");
        Self {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Largest elementwise modulus difference.
    pub fn max_abs_diff(&self, rhs: &OperatorMatrix) -> f64 {
        assert_eq!(self.dim, rhs.dim);
        self.entries
            .iter()
            .zip(&rhs.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// `out = self · v`
    pub fn apply_into(&self, v: &[C64], out: &mut [C64]) {
        let d = self.dim;
        for (i, o) in out.iter_mut().enumerate().take(d) {
            let row = &self.entries[i * d..(i + 1) * d];
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    pub fn apply(&self, v: &StateVector) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        self.apply_into(v.amplitudes(), &mut out);
        out
    }

    /// `⟨v|self|v⟩` without any clamping.
    pub fn expectation(&self, v: &StateVector) -> C64 {
        let hv = self.apply(v);
        v.amplitudes()
            .iter()
            .zip(&hv)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

impl Index<(usize, usize)> for OperatorMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.entries[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for OperatorMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.entries[i * self.dim + j]
    }
}

/// A possibly time-dependent Hamiltonian, in units of rad/s, seen only
/// through its action on a state vector.
///
/// Implementors that know their sparsity pattern can act directly; the dense
/// fallback is [`FnDrive`].
pub trait Drive {
    fn dim(&self) -> usize;

    /// Writes `H(t)·psi` into `out`.
    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) -> Result<()>;
}

/// A constant Hamiltonian.
impl Drive for OperatorMatrix {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, _t: f64, psi: &[C64], out: &mut [C64]) -> Result<()> {
        self.apply_into(psi, out);
        Ok(())
    }
}

/// Dense drive built from a closure returning the full matrix at each time.
pub struct FnDrive<F> {
    dim: usize,
    hamiltonian: F,
}

impl<F: Fn(f64) -> OperatorMatrix> FnDrive<F> {
    pub fn new(dim: usize, hamiltonian: F) -> Self {
        Self { dim, hamiltonian }
    }
}

impl<F: Fn(f64) -> OperatorMatrix> Drive for FnDrive<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) -> Result<()> {
        let h = (self.hamiltonian)(t);
        if h.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: h.dim(),
            });
        }
        if !h.is_finite() {
            return Err(Error::NonFinite { t });
        }
        h.apply_into(psi, out);
        Ok(())
    }
}

/// Scratch space for one RK4 step of `dψ/dt = -i·H(t)·ψ`.
struct Rk4 {
    k: [Vec<C64>; 4],
    tmp: Vec<C64>,
}

impl Rk4 {
    fn new(dim: usize) -> Self {
        let z = || vec![C64::new(0.0, 0.0); dim];
        Self {
            k: [z(), z(), z(), z()],
            tmp: z(),
        }
    }

    fn deriv(drive: &impl Drive, t: f64, psi: &[C64], out: &mut [C64]) -> Result<()> {
        drive.apply(t, psi, out)?;
        // -i·(a + ib) = b - ia
        out.iter_mut().for_each(|z| *z = C64::new(z.im, -z.re));
        Ok(())
    }

    fn step(&mut self, drive: &impl Drive, t: f64, h: f64, psi: &mut [C64]) -> Result<()> {
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;
        Self::deriv(drive, t, psi, k1)?;
        for ((x, p), k) in tmp.iter_mut().zip(psi.iter()).zip(k1.iter()) {
            *x = p + k * (0.5 * h);
        }
        Self::deriv(drive, t + 0.5 * h, tmp, k2)?;
        for ((x, p), k) in tmp.iter_mut().zip(psi.iter()).zip(k2.iter()) {
            *x = p + k * (0.5 * h);
        }
        Self::deriv(drive, t + 0.5 * h, tmp, k3)?;
        for ((x, p), k) in tmp.iter_mut().zip(psi.iter()).zip(k3.iter()) {
            *x = p + k * h;
        }
        Self::deriv(drive, t + h, tmp, k4)?;
        let w = h / 6.0;
        for (i, p) in psi.iter_mut().enumerate() {
            *p += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * w;
        }
        Ok(())
    }
}

fn step_count(t0: f64, t1: f64, dt: f64) -> Result<usize> {
    let ok = t0.is_finite() && t1.is_finite() && dt.is_finite() && t1 >= t0 && dt > 0.0;
    if !ok {
        return Err(Error::InvalidTimes { t0, t1, dt });
    }
    if t1 == t0 {
        return Ok(0);
    }
    // Tolerate round-off so that e.g. (π/Ω)/(π/(100Ω)) gives exactly 100.
    Ok(((t1 - t0) / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize)
}

fn check_dim(state: &StateVector, drive: &impl Drive) -> Result<()> {
    if drive.dim() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            found: drive.dim(),
        });
    }
    Ok(())
}

fn renormalize(psi: &mut [C64], t: f64) -> Result<()> {
    let n = norm(psi);
    if !n.is_finite() || n == 0.0 {
        return Err(Error::NonFinite { t });
    }
    psi.iter_mut().for_each(|a| *a /= n);
    Ok(())
}

/// Evolves `state` from `t0` to `t1` with steps no larger than `dt`.
///
/// The window is split into equal steps, so the last step never overshoots.
pub fn evolve(
    state: &StateVector,
    drive: &impl Drive,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<StateVector> {
    evolve_observed(state, drive, t0, t1, dt, |_, _| {})
}

/// Same as [`evolve`], calling `observer(t, ψ)` at `t0` and after every step.
pub fn evolve_observed(
    state: &StateVector,
    drive: &impl Drive,
    t0: f64,
    t1: f64,
    dt: f64,
    mut observer: impl FnMut(f64, &[C64]),
) -> Result<StateVector> {
    check_dim(state, drive)?;
    let n = step_count(t0, t1, dt)?;
    let mut psi = state.amps.clone();
    observer(t0, &psi);
    if n == 0 {
        return Ok(state.clone());
    }
    let h = (t1 - t0) / n as f64;
    let mut rk = Rk4::new(psi.len());
    for k in 0..n {
        let t = t0 + k as f64 * h;
        rk.step(drive, t, h, &mut psi)?;
        renormalize(&mut psi, t + h)?;
        observer(t + h, &psi);
    }
    Ok(StateVector { amps: psi })
}

/// What happens to the system after a jump.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum JumpTarget {
    /// The atom leaves the trap; the trajectory ends here.
    LossFromRydberg,
    /// The atom decays back into the qubit manifold and evolution continues.
    RecycleToGround,
}

/// A decay channel with rate `rate` acting on the subspace selected by
/// `source_projector`.
#[derive(Clone, Debug)]
pub struct JumpChannel {
    rate: f64,
    target: JumpTarget,
    source_projector: OperatorMatrix,
    recycle_map: Option<OperatorMatrix>,
}

impl JumpChannel {
    pub fn new(rate: f64, target: JumpTarget, source_projector: OperatorMatrix) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::param("rate", format!("must be finite and >= 0, got {rate}")));
        }
        let p2 = source_projector.matmul(&source_projector);
        let deviation = p2.max_abs_diff(&source_projector);
        if deviation > PROJECTOR_TOL {
            return Err(Error::NotProjector { deviation });
        }
        Ok(Self {
            rate,
            target,
            source_projector,
            recycle_map: None,
        })
    }

    /// Operator applied after projecting on a recycle jump, e.g. `|1⟩⟨r|`.
    /// Without one the post-jump state is the normalized projection.
    pub fn with_recycle_map(mut self, map: OperatorMatrix) -> Self {
        self.recycle_map = Some(map);
        self
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn target(&self) -> JumpTarget {
        self.target
    }

    pub fn source_projector(&self) -> &OperatorMatrix {
        &self.source_projector
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub target: JumpTarget,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub state: StateVector,
    pub events: Vec<JumpEvent>,
}

impl Trajectory {
    pub fn lost(&self) -> bool {
        self.events
            .last()
            .is_some_and(|e| e.target == JumpTarget::LossFromRydberg)
    }
}

/// `H - (i/2)·Σ rate·P` acting on a vector.
struct EffectiveDrive<'a, D> {
    drive: &'a D,
    channels: &'a [JumpChannel],
    scratch: std::cell::RefCell<Vec<C64>>,
}

impl<D: Drive> Drive for EffectiveDrive<'_, D> {
    fn dim(&self) -> usize {
        self.drive.dim()
    }

    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) -> Result<()> {
        self.drive.apply(t, psi, out)?;
        let mut scratch = self.scratch.borrow_mut();
        for ch in self.channels.iter().filter(|c| c.rate > 0.0) {
            ch.source_projector.apply_into(psi, &mut scratch);
            let w = C64::new(0.0, -0.5 * ch.rate);
            for (o, s) in out.iter_mut().zip(scratch.iter()) {
                *o += w * s;
            }
        }
        Ok(())
    }
}

/// Monte-Carlo wavefunction evolution with first-order jump sampling.
///
/// Each step jumps through channel `k` with probability `rate_k·dt·⟨P_k⟩`;
/// otherwise the state evolves under the effective non-Hermitian
/// Hamiltonian and is renormalized. The step is shrunk so that the summed
/// jump probability stays below 1e-3. A loss jump ends the trajectory and
/// returns the pre-jump state. With every rate zero this is exactly
/// [`evolve`] and draws nothing from `rng`.
pub fn trajectory_evolve<R: Rng + ?Sized>(
    state: &StateVector,
    drive: &impl Drive,
    channels: &[JumpChannel],
    t0: f64,
    t1: f64,
    dt: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    check_dim(state, drive)?;
    for ch in channels {
        if ch.source_projector.dim() != state.dim() {
            return Err(Error::DimensionMismatch {
                expected: state.dim(),
                found: ch.source_projector.dim(),
            });
        }
    }
    let total_rate: f64 = channels.iter().map(|c| c.rate).sum();
    if total_rate == 0.0 {
        return Ok(Trajectory {
            state: evolve(state, drive, t0, t1, dt)?,
            events: Vec::new(),
        });
    }
    let dt = dt.min(MAX_JUMP_PROB_PER_STEP / total_rate);
    let n = step_count(t0, t1, dt)?;
    if n == 0 {
        return Ok(Trajectory {
            state: state.clone(),
            events: Vec::new(),
        });
    }
    let h = (t1 - t0) / n as f64;
    let eff = EffectiveDrive {
        drive,
        channels,
        scratch: std::cell::RefCell::new(vec![C64::new(0.0, 0.0); state.dim()]),
    };
    let mut rk = Rk4::new(state.dim());
    let mut psi = state.amps.clone();
    let mut events = Vec::new();
    let mut probs = vec![0.0; channels.len()];
    for k in 0..n {
        let t = t0 + k as f64 * h;
        let current = StateVector { amps: psi.clone() };
        for (p, ch) in probs.iter_mut().zip(channels) {
            *p = if ch.rate > 0.0 {
                ch.rate * h * ch.source_projector.expectation(&current).re.max(0.0)
            } else {
                0.0
            };
        }
        let u: f64 = rng.random();
        let total: f64 = probs.iter().sum();
        if u < total {
            let mut acc = 0.0;
            let idx = probs
                .iter()
                .position(|p| {
                    acc += p;
                    u < acc
                })
                .unwrap_or(channels.len() - 1);
            let ch = &channels[idx];
            let time = t + h;
            events.push(JumpEvent {
                time,
                target: ch.target,
            });
            match ch.target {
                JumpTarget::LossFromRydberg => {
                    return Ok(Trajectory {
                        state: current,
                        events,
                    });
                }
                JumpTarget::RecycleToGround => {
                    let mut projected = ch.source_projector.apply(&current);
                    if let Some(map) = &ch.recycle_map {
                        let v = projected.clone();
                        map.apply_into(&v, &mut projected);
                    }
                    if norm(&projected) == 0.0 {
                        return Err(Error::NonFinite { t: time });
                    }
                    psi = StateVector::from_unnormalized(projected).amps;
                }
            }
        } else {
            rk.step(&eff, t, h, &mut psi)?;
            renormalize(&mut psi, t + h)?;
        }
    }
    Ok(Trajectory {
        state: StateVector { amps: psi },
        events,
    })
}

/// `⟨ψ|P|ψ⟩` for a projector `P`, clamped to `[0, 1]`.
pub fn expectation(state: &StateVector, projector: &OperatorMatrix) -> Result<f64> {
    if projector.dim() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            found: projector.dim(),
        });
    }
    let deviation = projector.matmul(projector).max_abs_diff(projector);
    if deviation > PROJECTOR_TOL {
        return Err(Error::NotProjector { deviation });
    }
    Ok(projector.expectation(state).re.clamp(0.0, 1.0))
}
