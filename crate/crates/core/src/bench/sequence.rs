//! Global single-qubit rotations and the echoed RB circuit layout.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qdyn::C64;

/// 2×2 complex matrix, row-major.
pub type Mat2 = [[C64; 2]; 2];

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn mat2_dagger(a: &Mat2) -> Mat2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

pub const PAULI_I: Mat2 = [[ONE, ZERO], [ZERO, ONE]];
pub const PAULI_X: Mat2 = [[ZERO, ONE], [ONE, ZERO]];
pub const PAULI_Y: Mat2 = [[ZERO, C64::new(0.0, -1.0)], [I, ZERO]];
pub const PAULI_Z: Mat2 = [[ONE, ZERO], [ZERO, C64::new(-1.0, 0.0)]];
pub const PAULIS: [Mat2; 4] = [PAULI_I, PAULI_X, PAULI_Y, PAULI_Z];

/// `iY`, the single-atom factor each echoed CZ pair contributes.
const I_Y: Mat2 = [[ZERO, ONE], [C64::new(-1.0, 0.0), ZERO]];

/// SU(2) element `Rz(axis_phase)·Rx(polar)·Rz(z_phase)` applied to both
/// atoms, with `Rz(a) = diag(e^{-ia/2}, e^{ia/2})`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalRotation {
    pub axis_phase: f64,
    pub polar: f64,
    pub z_phase: f64,
}

impl GlobalRotation {
    pub const IDENTITY: Self = Self {
        axis_phase: 0.0,
        polar: 0.0,
        z_phase: 0.0,
    };

    /// The echo pulse: a π rotation about x.
    pub const X_PI: Self = Self {
        axis_phase: 0.0,
        polar: PI,
        z_phase: 0.0,
    };

    pub fn matrix(&self) -> Mat2 {
        let rz = |a: f64| -> Mat2 { [[C64::from_polar(1.0, -a / 2.0), ZERO], [ZERO, C64::from_polar(1.0, a / 2.0)]] };
        let (s, c) = (self.polar / 2.0).sin_cos();
        let rx: Mat2 = [[C64::new(c, 0.0), C64::new(0.0, -s)], [C64::new(0.0, -s), C64::new(c, 0.0)]];
        mat2_mul(&mat2_mul(&rz(self.axis_phase), &rx), &rz(self.z_phase))
    }

    /// Euler angles of an SU(2) matrix. The round trip reproduces `u` up to
    /// an overall sign.
    pub fn from_su2(u: &Mat2) -> Self {
        let a = u[0][0];
        let b = u[0][1];
        let polar = 2.0 * b.norm().atan2(a.norm());
        // a = cos(β/2)·e^{-i(α+γ)/2},  b = -i·sin(β/2)·e^{-i(α-γ)/2}
        let sum = if a.norm() > 1e-15 { -2.0 * a.arg() } else { 0.0 };
        let diff = if b.norm() > 1e-15 { -2.0 * (b.arg() + PI / 2.0) } else { 0.0 };
        Self {
            axis_phase: 0.5 * (sum + diff),
            polar,
            z_phase: 0.5 * (sum - diff),
        }
    }
}

/// Haar-random SU(2) element in Euler form.
pub fn sample_haar_rotation<R: Rng + ?Sized>(rng: &mut R) -> GlobalRotation {
    let axis_phase = 2.0 * PI * rng.random::<f64>();
    let z_phase = 2.0 * PI * rng.random::<f64>();
    let polar = (2.0 * rng.random::<f64>() - 1.0).clamp(-1.0, 1.0).acos();
    GlobalRotation {
        axis_phase,
        polar,
        z_phase,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Op {
    Rotation(GlobalRotation),
    Cz,
}

/// Echoed global RB circuit: `[R_k, CZ, X, CZ]` for each pair, then `R_f`.
#[derive(Clone, Debug, PartialEq)]
pub struct RbSequence {
    pub n_cz: usize,
    pub rotations: Vec<GlobalRotation>,
    /// Indices into [`ops`](Self::ops) holding the X echo.
    pub echo_flags: Vec<usize>,
    pub r_f: GlobalRotation,
}

impl RbSequence {
    /// Builds the circuit around the given random rotations, one per CZ pair.
    pub fn from_rotations(rotations: Vec<GlobalRotation>) -> Self {
        // CZ·(X⊗X)·CZ = -(Y⊗Y) = (iY)⊗(iY) for the π pulse X = -iσx, so each
        // pair acts as the global single-atom element iY·R_k.
        let mut net = PAULI_I;
        for r in &rotations {
            net = mat2_mul(&mat2_mul(&I_Y, &r.matrix()), &net);
        }
        let r_f = GlobalRotation::from_su2(&mat2_dagger(&net));
        let echo_flags = (0..rotations.len()).map(|k| 4 * k + 2).collect();
        Self {
            n_cz: 2 * rotations.len(),
            rotations,
            echo_flags,
            r_f,
        }
    }

    pub fn ops(&self) -> Vec<Op> {
        let mut ops = Vec::with_capacity(4 * self.rotations.len() + 1);
        for r in &self.rotations {
            ops.extend([Op::Rotation(*r), Op::Cz, Op::Rotation(GlobalRotation::X_PI), Op::Cz]);
        }
        ops.push(Op::Rotation(self.r_f));
        ops
    }
}

/// Random echoed sequence with `n_cz` CZ gates.
pub fn build_sequence<R: Rng + ?Sized>(n_cz: usize, rng: &mut R) -> Result<RbSequence> {
    if n_cz % 2 != 0 {
        return Err(Error::OddSequenceLength(n_cz));
    }
    let rotations = (0..n_cz / 2).map(|_| sample_haar_rotation(rng)).collect();
    Ok(RbSequence::from_rotations(rotations))
}

/// Two-atom pure state, index `2a + b` for atom A in `a` and atom B in `b`.
pub type Pair = [C64; 4];

pub fn apply_on_a(g: &Mat2, psi: &mut Pair) {
    for b in 0..2 {
        let (x, y) = (psi[b], psi[2 + b]);
        psi[b] = g[0][0] * x + g[0][1] * y;
        psi[2 + b] = g[1][0] * x + g[1][1] * y;
    }
}

pub fn apply_on_b(g: &Mat2, psi: &mut Pair) {
    for a in 0..2 {
        let (x, y) = (psi[2 * a], psi[2 * a + 1]);
        psi[2 * a] = g[0][0] * x + g[0][1] * y;
        psi[2 * a + 1] = g[1][0] * x + g[1][1] * y;
    }
}

pub fn apply_single(g: &Mat2, psi: &mut [C64; 2]) {
    let (x, y) = (psi[0], psi[1]);
    psi[0] = g[0][0] * x + g[0][1] * y;
    psi[1] = g[1][0] * x + g[1][1] * y;
}

/// Probability that the noiseless circuit returns `|00⟩` to `|00⟩`.
pub fn ideal_return_probability(seq: &RbSequence) -> f64 {
    let mut psi: Pair = [ONE, ZERO, ZERO, ZERO];
    for op in seq.ops() {
        match op {
            Op::Rotation(r) => {
                let g = r.matrix();
                apply_on_a(&g, &mut psi);
                apply_on_b(&g, &mut psi);
            }
            Op::Cz => psi[3] = -psi[3],
        }
    }
    psi[0].norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qdyn::OperatorMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn to_op(m: &Mat2) -> OperatorMatrix {
        OperatorMatrix::from_fn(2, |i, j| m[i][j])
    }

    fn cz() -> OperatorMatrix {
        OperatorMatrix::from_fn(4, |i, j| match (i == j, i) {
            (false, _) => ZERO,
            (true, 3) => -ONE,
            _ => ONE,
        })
    }

    #[test]
    fn echo_identity() {
        let x_pi = to_op(&GlobalRotation::X_PI.matrix());
        let lhs = cz().matmul(&x_pi.kron(&x_pi)).matmul(&cz());
        let yy = to_op(&PAULI_Y).kron(&to_op(&PAULI_Y));
        assert!(lhs.max_abs_diff(&yy.scale(-ONE)) < 1e-15);
        // With the bare Pauli X the sign flips.
        let x = to_op(&PAULI_X);
        assert_eq!(cz().matmul(&x.kron(&x)).matmul(&cz()), yy);
    }

    #[test]
    fn euler_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let u = sample_haar_rotation(&mut rng).matrix();
            let v = GlobalRotation::from_su2(&u).matrix();
            let same = (0..2).all(|i| (0..2).all(|j| (u[i][j] - v[i][j]).norm() < 1e-12));
            let flipped = (0..2).all(|i| (0..2).all(|j| (u[i][j] + v[i][j]).norm() < 1e-12));
            assert!(same || flipped);
        }
    }

    #[test]
    fn haar_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let (mut m1, mut m2) = (0.0, 0.0);
        for _ in 0..n {
            let p = sample_haar_rotation(&mut rng).matrix()[0][0].norm_sqr();
            m1 += p;
            m2 += p * p;
        }
        assert!((m1 / n as f64 - 0.5).abs() < 0.005);
        assert!((m2 / n as f64 - 1.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn seeds_control_the_stream() {
        let draw = |s| {
            let mut r = ChaCha8Rng::seed_from_u64(s);
            (0..5).map(|_| sample_haar_rotation(&mut r)).collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
        assert_ne!(draw(3), draw(4));
    }

    #[test]
    fn short_sequences() {
        let empty = RbSequence::from_rotations(vec![]);
        assert_eq!(empty.r_f.matrix(), PAULI_I);
        let pair = RbSequence::from_rotations(vec![GlobalRotation::IDENTITY]);
        assert!((ideal_return_probability(&pair) - 1.0).abs() < 1e-12);
        // X(π) on both atoms also undoes the single echoed pair.
        let mut alt = pair.clone();
        alt.r_f = GlobalRotation::X_PI;
        assert!((ideal_return_probability(&alt) - 1.0).abs() < 1e-12);
        assert!(matches!(build_sequence(3, &mut ChaCha8Rng::seed_from_u64(0)), Err(Error::OddSequenceLength(3))));
    }

    #[test]
    fn sampled_sequences_return_home() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in (2..=20).step_by(2) {
            for _ in 0..20 {
                let s = build_sequence(n, &mut rng).unwrap();
                assert_eq!(s.ops().len(), 2 * n + 1);
                assert!((ideal_return_probability(&s) - 1.0).abs() < 1e-10);
            }
        }
    }
}
